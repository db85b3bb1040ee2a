//! Exact rational verification of two counting bounds: pairwise
//! intersection mass of equal-measure families, and the mass of ergodic
//! components retaining a fixed subgroup with half probability.

use num::{BigInt, BigRational, One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::autom::seeded_rng;
use crate::error::{Error, Result};
use crate::ratio::{parse_rational, rational_string};
use crate::verify::{CheckReport, Verdict};

fn default_true() -> bool {
    true
}
fn families_1000() -> u64 {
    1000
}
fn space_60() -> usize {
    60
}
fn default_p_values() -> Vec<String> {
    vec!["1/2".into(), "1/3".into(), "1/4".into()]
}
fn grid_10() -> usize {
    10
}

/// Parameters for the intersection-probability checks. With explicit
/// `sets`, verifies that single family; without, verifies seeded random
/// families.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntersectionParams {
    #[serde(default)]
    pub space_size: Option<usize>,
    /// Explicit family of index sets, each of measure exactly `p`.
    #[serde(default)]
    pub sets: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub p: Option<String>,
    /// Enforce the family size `ceil(2/p)`; disabling it is the negative
    /// control showing the bound needs that many sets.
    #[serde(default = "default_true")]
    pub require_r: bool,
    #[serde(default = "families_1000")]
    pub families: u64,
    #[serde(default = "default_p_values")]
    pub p_values: Vec<String>,
    #[serde(default = "space_60")]
    pub max_space: usize,
}

impl Default for IntersectionParams {
    fn default() -> Self {
        serde_json::from_value(json!({})).expect("defaults are complete")
    }
}

fn ceil_two_over(p: &BigRational) -> Result<usize> {
    if p <= &BigRational::zero() || p > &BigRational::one() {
        return Err(Error::PreconditionViolated(format!(
            "measure p = {p} outside (0, 1]"
        )));
    }
    let two_over = BigRational::from_integer(2.into()) / p;
    let ceil = two_over.ceil().to_integer();
    usize::try_from(&ceil).map_err(|_| Error::PreconditionViolated("p too small".into()))
}

fn max_pair_intersection(
    space_size: usize,
    sets: &[Vec<usize>],
) -> (BigRational, Vec<(usize, usize, String)>) {
    let masks: Vec<Vec<bool>> = sets
        .iter()
        .map(|set| {
            let mut mask = vec![false; space_size];
            for &x in set {
                mask[x] = true;
            }
            mask
        })
        .collect();
    let mut max = BigRational::zero();
    let mut pairs = Vec::new();
    for j in 0..sets.len() {
        for l in (j + 1)..sets.len() {
            let common = (0..space_size)
                .filter(|&x| masks[j][x] && masks[l][x])
                .count();
            let mu = BigRational::new(BigInt::from(common), BigInt::from(space_size));
            pairs.push((j, l, rational_string(&mu)));
            if mu > max {
                max = mu;
            }
        }
    }
    (max, pairs)
}

/// Verifies, for a family of `ceil(2/p)` subsets of measure exactly `p` on
/// a uniform finite space, that some pair intersects in measure at least
/// `p^3/6`. Exact rational arithmetic throughout.
pub fn check_intersection_probability(params: &IntersectionParams) -> Result<CheckReport> {
    let p = params.clone();
    let params_json = serde_json::to_value(params).expect("serializable");
    CheckReport::run("intersection_probability", params_json, None, move || {
        let space_size = p.space_size.ok_or_else(|| {
            Error::PreconditionViolated("explicit check needs space_size".into())
        })?;
        let sets = p
            .sets
            .as_ref()
            .ok_or_else(|| Error::PreconditionViolated("explicit check needs sets".into()))?;
        let measure = parse_rational(p.p.as_deref().ok_or_else(|| {
            Error::PreconditionViolated("explicit check needs p".into())
        })?)?;

        for (j, set) in sets.iter().enumerate() {
            let mut sorted = set.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != set.len() || sorted.iter().any(|&x| x >= space_size) {
                return Err(Error::PreconditionViolated(format!(
                    "set {j} is not a subset of the space"
                )));
            }
            let mu = BigRational::new(BigInt::from(set.len()), BigInt::from(space_size));
            if mu != measure {
                return Err(Error::PreconditionViolated(format!(
                    "set {j} has measure {mu}, expected {measure}"
                )));
            }
        }
        let r = ceil_two_over(&measure)?;
        if p.require_r && sets.len() != r {
            return Err(Error::PreconditionViolated(format!(
                "need ceil(2/p) = {r} sets, got {}",
                sets.len()
            )));
        }

        let bound = &measure * &measure * &measure / BigRational::from_integer(6.into());
        let (max, pairs) = max_pair_intersection(space_size, sets);
        if max >= bound {
            Ok((
                Verdict::Pass,
                None,
                json!({
                    "max_pair_intersection": rational_string(&max),
                    "bound": rational_string(&bound),
                    "pairs": pairs,
                }),
            ))
        } else {
            Ok((
                Verdict::Fail,
                Some(json!({
                    "max_pair_intersection": rational_string(&max),
                    "bound": rational_string(&bound),
                    "sets": sets,
                })),
                Value::Null,
            ))
        }
    })
}

/// The randomized variant: seeded random families of measure-`p` subsets,
/// each verified exactly.
pub fn check_random_intersection_families(
    params: &IntersectionParams,
    seed: u64,
) -> Result<CheckReport> {
    let p = params.clone();
    let params_json = serde_json::to_value(params).expect("serializable");
    CheckReport::run("intersection_probability", params_json, Some(seed), move || {
        let mut rng = seeded_rng(seed);
        let p_values = p
            .p_values
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>>>()?;
        for (family, measure) in (0..p.families).zip(p_values.iter().cycle()) {
            let denom = usize::try_from(measure.denom())
                .map_err(|_| Error::PreconditionViolated("denominator too large".into()))?;
            let max_blocks = (p.max_space / denom).max(1);
            let space_size = denom * rng.gen_range(1..=max_blocks);
            let numer = usize::try_from(measure.numer())
                .map_err(|_| Error::PreconditionViolated("numerator too large".into()))?;
            let set_size = numer * space_size / denom;
            let r = ceil_two_over(measure)?;

            let universe: Vec<usize> = (0..space_size).collect();
            let sets: Vec<Vec<usize>> = (0..r)
                .map(|_| {
                    let mut pool = universe.clone();
                    pool.shuffle(&mut rng);
                    pool.truncate(set_size);
                    pool
                })
                .collect();

            let bound =
                measure * measure * measure / BigRational::from_integer(6.into());
            let (max, _) = max_pair_intersection(space_size, &sets);
            if max < bound {
                return Ok((
                    Verdict::Fail,
                    Some(json!({
                        "family": family,
                        "space_size": space_size,
                        "p": rational_string(measure),
                        "sets": sets,
                        "max_pair_intersection": rational_string(&max),
                        "bound": rational_string(&bound),
                    })),
                    Value::Null,
                ));
            }
        }
        Ok((
            Verdict::Pass,
            None,
            json!({"families": p.families, "p_values": p.p_values}),
        ))
    })
}

/// Parameters for the component-mass checks. With explicit `weights` and
/// `probs`, verifies that single decomposition; without, sweeps a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentMassParams {
    #[serde(default)]
    pub weights: Option<Vec<String>>,
    #[serde(default)]
    pub probs: Option<Vec<String>>,
    /// Negative control: claim the qualifying mass reaches `p` instead of
    /// the required `p/2`.
    #[serde(default)]
    pub strong_claim: bool,
    #[serde(default = "grid_10")]
    pub grid_resolution: usize,
}

impl Default for ComponentMassParams {
    fn default() -> Self {
        serde_json::from_value(json!({})).expect("defaults are complete")
    }
}

fn component_mass_holds(
    weights: &[BigRational],
    probs: &[BigRational],
    strong_claim: bool,
) -> Result<(bool, BigRational, BigRational, BigRational)> {
    if weights.len() != probs.len() || weights.is_empty() {
        return Err(Error::PreconditionViolated(
            "weights and probs must be equal-length and nonempty".into(),
        ));
    }
    let total: BigRational = weights.iter().cloned().sum();
    if total != BigRational::one() {
        return Err(Error::PreconditionViolated(format!(
            "weights sum to {total}, not 1"
        )));
    }
    for (i, q) in probs.iter().enumerate() {
        if q < &BigRational::zero() || q > &BigRational::one() {
            return Err(Error::PreconditionViolated(format!(
                "prob {i} = {q} outside [0, 1]"
            )));
        }
    }
    let p: BigRational = weights
        .iter()
        .zip(probs)
        .map(|(w, q)| w * q)
        .sum();
    let half_p = &p / BigRational::from_integer(2.into());
    let qualifying: BigRational = weights
        .iter()
        .zip(probs)
        .filter(|(_, q)| *q >= &half_p)
        .map(|(w, _)| w.clone())
        .sum();
    let required = if strong_claim { p.clone() } else { half_p };
    Ok((qualifying >= required, p, qualifying, required))
}

/// Verifies that in a weighted decomposition with overall retention
/// probability `p`, the components retaining with probability at least
/// `p/2` carry mass at least `p/2`. Exact rationals.
pub fn check_component_mass(params: &ComponentMassParams) -> Result<CheckReport> {
    let p = params.clone();
    let params_json = serde_json::to_value(params).expect("serializable");
    CheckReport::run("component_mass", params_json, None, move || {
        let weights = p
            .weights
            .as_ref()
            .ok_or_else(|| Error::PreconditionViolated("explicit check needs weights".into()))?
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>>>()?;
        let probs = p
            .probs
            .as_ref()
            .ok_or_else(|| Error::PreconditionViolated("explicit check needs probs".into()))?
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>>>()?;
        let (holds, total_p, qualifying, required) =
            component_mass_holds(&weights, &probs, p.strong_claim)?;
        let payload = json!({
            "p": rational_string(&total_p),
            "qualifying_mass": rational_string(&qualifying),
            "required": rational_string(&required),
        });
        if holds {
            Ok((Verdict::Pass, None, payload))
        } else {
            Ok((Verdict::Fail, Some(payload), Value::Null))
        }
    })
}

/// Sweeps a grid of two-component decompositions, including boundary
/// families where the retention probability sits exactly at `p/2`.
pub fn check_component_mass_grid(params: &ComponentMassParams) -> Result<CheckReport> {
    let p = params.clone();
    let params_json = serde_json::to_value(params).expect("serializable");
    CheckReport::run("component_mass", params_json, None, move || {
        let res = p.grid_resolution;
        if res < 2 {
            return Err(Error::PreconditionViolated(
                "grid resolution must be at least 2".into(),
            ));
        }
        let frac = |num: usize, den: usize| {
            BigRational::new(BigInt::from(num), BigInt::from(den))
        };
        let mut families = 0u64;
        for a in 1..res {
            let weights = [frac(a, res), frac(res - a, res)];
            for b in 0..=res {
                for c in 0..=res {
                    let probs = [frac(b, res), frac(c, res)];
                    families += 1;
                    let (holds, total_p, qualifying, required) =
                        component_mass_holds(&weights, &probs, p.strong_claim)?;
                    if !holds {
                        return Ok((
                            Verdict::Fail,
                            Some(json!({
                                "weights": weights.iter().map(rational_string).collect::<Vec<_>>(),
                                "probs": probs.iter().map(rational_string).collect::<Vec<_>>(),
                                "p": rational_string(&total_p),
                                "qualifying_mass": rational_string(&qualifying),
                                "required": rational_string(&required),
                            })),
                            Value::Null,
                        ));
                    }
                }
            }
        }
        Ok((Verdict::Pass, None, json!({"families": families})))
    })
}
