//! Checks built around fixed boundary sets: recovering a closed set from
//! the fixed points of its pointwise stabilizer, the constructive family of
//! distinct coloring translates, and statistical evidence that setwise
//! stabilizers of random translates fix the green ray.

use num::{BigInt, BigRational};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::autom::{seeded_rng, transporter, Flavor};
use crate::boundary::{coloring_from_set, green_spine, ClosedSetApprox, Color};
use crate::error::{Error, Result};
use crate::groups::{LevelActionTable, TruncatedWreathGroup, DEFAULT_ORDER_CAP};
use crate::irs::fix_set_of_sample;
use crate::ratio::{parse_rational, rational_string};
use crate::tree::{shadow_at_level, Arity, LevelSet, VertexAddress};
use crate::verify::{CheckReport, Verdict};

fn symmetric() -> Flavor {
    Flavor::Symmetric
}
fn three() -> usize {
    3
}

fn default_ray2() -> ClosedSetApprox {
    ClosedSetApprox::ray(Arity::new(2).unwrap(), &"11".parse().unwrap())
        .expect("valid ray")
}

/// Parameters for [`check_fix_stab`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixStabParams {
    /// The closed set, truncated strictly above the group depth for an
    /// exact recovery; at equal depths the deepest level is an honest
    /// truncation artifact and the check fails.
    #[serde(default = "default_ray2")]
    pub set: ClosedSetApprox,
    #[serde(default = "three")]
    pub group_depth: usize,
    #[serde(default = "symmetric")]
    pub flavor: Flavor,
}

impl Default for FixStabParams {
    fn default() -> Self {
        FixStabParams {
            set: default_ray2(),
            group_depth: 3,
            flavor: Flavor::Symmetric,
        }
    }
}

/// Computes the pointwise stabilizer of the set inside the enumerated
/// depth-n group and verifies that its fixed boundary set reproduces the
/// set's level sets exactly, level by level.
pub fn check_fix_stab(params: &FixStabParams) -> Result<CheckReport> {
    let p = params.clone();
    let params_json = serde_json::to_value(params).expect("serializable");
    CheckReport::run("fix_stab", params_json, None, move || {
        let set = &p.set;
        let d = set.arity();
        if p.group_depth < set.depth() {
            return Err(Error::DepthExceeded {
                requested: set.depth(),
                depth: p.group_depth,
            });
        }
        let group = TruncatedWreathGroup::new(d, p.group_depth, p.flavor)?;

        // Stabilizing the closed set pointwise reduces to stabilizing the
        // level-n shadow of its deepest level set.
        let mut shadow = Vec::new();
        for v in set.leaves() {
            shadow.extend(
                shadow_at_level(v, d, p.group_depth)?
                    .members()
                    .iter()
                    .cloned(),
            );
        }
        let shadow = LevelSet::new(p.group_depth, shadow)?;
        let full = group.full_subgroup(DEFAULT_ORDER_CAP).enumerate()?;
        let stabilizer = full.pointwise_stabilizer(&shadow)?;
        let fix = fix_set_of_sample(&stabilizer)?;

        for k in 0..=set.depth() {
            if fix.level(k) != set.level(k) {
                return Ok((
                    Verdict::Fail,
                    Some(json!({
                        "level": k,
                        "fixed": fix.level(k),
                        "expected": set.level(k),
                    })),
                    Value::Null,
                ));
            }
        }
        Ok((
            Verdict::Pass,
            None,
            json!({
                "stabilizer_order": stabilizer.order(),
                "set_depth": set.depth(),
                "group_depth": p.group_depth,
            }),
        ))
    })
}

fn default_ray5() -> ClosedSetApprox {
    ClosedSetApprox::ray(Arity::new(2).unwrap(), &"11111".parse().unwrap())
        .expect("valid ray")
}

fn four() -> usize {
    4
}

/// Parameters for [`check_infinite_translates`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfiniteTranslatesParams {
    #[serde(default = "default_ray5")]
    pub set: ClosedSetApprox,
    #[serde(default = "symmetric")]
    pub flavor: Flavor,
    /// How many pairwise distinct translates to construct.
    #[serde(default = "four")]
    pub count: usize,
    /// Negative control: reuse the first blue witness for every translate,
    /// collapsing the family.
    #[serde(default)]
    pub degenerate_witnesses: bool,
}

impl Default for InfiniteTranslatesParams {
    fn default() -> Self {
        InfiniteTranslatesParams {
            set: default_ray5(),
            flavor: Flavor::Symmetric,
            count: 4,
            degenerate_witnesses: false,
        }
    }
}

/// Builds the translating elements of the infinite-translates argument: the
/// i-th element carries a blue witness below the green spine onto the spine
/// at a fresh level. Asserts the resulting colorings are pairwise distinct,
/// distinguished exactly by green-then-blue values along the spine.
pub fn check_infinite_translates(params: &InfiniteTranslatesParams) -> Result<CheckReport> {
    let p = params.clone();
    let params_json = serde_json::to_value(params).expect("serializable");
    CheckReport::run("infinite_translates", params_json, None, move || {
        let set = &p.set;
        let d = set.arity();
        let depth = set.depth();
        let spine = green_spine(set).ok_or_else(|| {
            Error::PreconditionViolated(
                "the set is clopen (or empty/full) within the truncation; \
                 the construction needs a green spine"
                    .into(),
            )
        })?;
        let coloring = coloring_from_set(set);

        // Blue witnesses: w_i blue below the spine vertex at the previous
        // witness level, mapped onto the spine at its own level.
        let mut witnesses: Vec<(usize, VertexAddress)> = Vec::new();
        let mut prev_level = 0usize;
        for _ in 0..p.count {
            if p.degenerate_witnesses && !witnesses.is_empty() {
                witnesses.push(witnesses[0].clone());
                continue;
            }
            let anchor = &spine[prev_level];
            let found = ((prev_level + 1)..=depth).find_map(|level| {
                shadow_at_level(anchor, d, level)
                    .ok()?
                    .members()
                    .iter()
                    .find(|w| coloring.color(w) == Color::Blue)
                    .cloned()
                    .map(|w| (level, w))
            });
            match found {
                Some((level, w)) => {
                    witnesses.push((level, w));
                    prev_level = level;
                }
                None => {
                    return Err(Error::BudgetExceeded {
                        depth,
                        requested: p.count,
                        found: witnesses.len(),
                    })
                }
            }
        }

        let translates: Vec<_> = witnesses
            .iter()
            .map(|(level, w)| {
                let g = transporter(d, p.flavor, w, &spine[*level])?;
                Ok(coloring.translate(&g))
            })
            .collect::<Result<Vec<_>>>()?;

        // The proof's distinguishing statistic.
        for (i, t) in translates.iter().enumerate() {
            for (j, (level, _)) in witnesses.iter().enumerate() {
                let at_spine = t.color(&spine[*level]);
                let expected = if j < i {
                    Some(Color::Green)
                } else if j == i {
                    Some(Color::Blue)
                } else {
                    None
                };
                if let Some(expected) = expected {
                    if at_spine != expected {
                        return Ok((
                            Verdict::Fail,
                            Some(json!({
                                "translate": i,
                                "witness": j,
                                "level": level,
                                "got": at_spine,
                                "expected": expected,
                            })),
                            Value::Null,
                        ));
                    }
                }
            }
        }
        for i in 0..translates.len() {
            for j in (i + 1)..translates.len() {
                if translates[i] == translates[j] {
                    return Ok((
                        Verdict::Fail,
                        Some(json!({"equal_pair": [i, j]})),
                        Value::Null,
                    ));
                }
            }
        }
        Ok((
            Verdict::Pass,
            None,
            json!({
                "count": p.count,
                "witness_levels": witnesses.iter().map(|(l, _)| *l).collect::<Vec<_>>(),
            }),
        ))
    })
}

fn d2() -> usize {
    2
}
fn two() -> usize {
    2
}
fn trials_2000() -> u64 {
    2000
}
fn default_floor() -> String {
    "1/2".to_string()
}

/// A non-clopen set whose shallow truncation admits a stabilizer moving the
/// green spine while the deeper ones do not: the shadow of "00" plus the
/// single ray through "1000". At depth 2 its two level vertices can be
/// swapped; from depth 3 on the asymmetry pins the spine.
fn default_fixation_set() -> Option<ClosedSetApprox> {
    let d = Arity::new(2).expect("valid arity");
    let mut leaves: Vec<VertexAddress> = shadow_at_level(&"00".parse().unwrap(), d, 4)
        .expect("valid shadow")
        .members()
        .to_vec();
    leaves.push("1000".parse().unwrap());
    Some(ClosedSetApprox::from_leaves(d, 4, leaves).expect("valid set"))
}

/// Parameters for [`check_green_ray_fixation`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreenRayFixationParams {
    #[serde(default = "d2")]
    pub d: usize,
    #[serde(default = "symmetric")]
    pub flavor: Flavor,
    /// The non-clopen set under test, at depth `max_depth`. When omitted,
    /// the greedy set of measure `measure` is used.
    #[serde(default = "default_fixation_set")]
    pub set: Option<ClosedSetApprox>,
    /// Fallback target measure for the greedy set when `set` is omitted.
    #[serde(default)]
    pub measure: Option<String>,
    #[serde(default = "two")]
    pub min_depth: usize,
    #[serde(default = "four")]
    pub max_depth: usize,
    #[serde(default = "trials_2000")]
    pub trials: u64,
    /// Required fixation fraction at the deepest level.
    #[serde(default = "default_floor")]
    pub floor: String,
    /// Trial budget below which the verdict stays inconclusive.
    #[serde(default = "trials_2000")]
    pub trial_budget: u64,
    /// Negative control: substitute a clopen set, which trips the
    /// hypothesis guard.
    #[serde(default)]
    pub clopen_control: bool,
}

impl Default for GreenRayFixationParams {
    fn default() -> Self {
        serde_json::from_value(json!({})).expect("defaults are complete")
    }
}

/// Samples Haar translates of a non-clopen set and records, per truncation
/// depth, the fraction of trials in which the whole setwise stabilizer of
/// the translate fixes the translated green-spine vertex at that depth.
/// Statistical evidence only: the verdict asserts the fractions are
/// non-decreasing in depth and meet the floor at the deepest level, and
/// stays inconclusive below the trial budget. Noise never hard-fails.
pub fn check_green_ray_fixation(
    params: &GreenRayFixationParams,
    seed: u64,
) -> Result<CheckReport> {
    let p = params.clone();
    let params_json = serde_json::to_value(params).expect("serializable");
    CheckReport::run("green_ray_fixation", params_json, Some(seed), move || {
        let d = Arity::new(p.d)?;
        let floor = parse_rational(&p.floor)?;
        if p.min_depth < 1 || p.min_depth > p.max_depth {
            return Err(Error::PreconditionViolated(
                "need 1 <= min_depth <= max_depth".into(),
            ));
        }
        let set = if p.clopen_control {
            ClosedSetApprox::from_shadows(d, p.max_depth, ["0".parse().unwrap()])?
        } else if let Some(set) = &p.set {
            if set.depth() != p.max_depth || set.arity() != d {
                return Err(Error::PreconditionViolated(format!(
                    "the set must live at arity {} and depth {}",
                    p.d, p.max_depth
                )));
            }
            set.clone()
        } else {
            let measure = parse_rational(p.measure.as_deref().unwrap_or("8/15"))?;
            ClosedSetApprox::with_measure(d, p.max_depth, &measure)?
        };
        let spine = green_spine(&set).ok_or_else(|| {
            Error::PreconditionViolated(
                "the set is clopen within the truncation; the fixation \
                 statistic needs a green spine"
                    .into(),
            )
        })?;

        let depths: Vec<usize> = (p.min_depth..=p.max_depth).collect();
        let tables: Vec<LevelActionTable> = depths
            .iter()
            .map(|&k| {
                LevelActionTable::build(
                    &TruncatedWreathGroup::new(d, k, p.flavor)?,
                    DEFAULT_ORDER_CAP,
                )
            })
            .collect::<Result<Vec<_>>>()?;

        let top_group = TruncatedWreathGroup::new(d, p.max_depth, p.flavor)?;
        let mut rng = seeded_rng(seed);
        let mut fixed_counts = vec![0u64; depths.len()];
        for _ in 0..p.trials {
            let gamma = top_group.haar(&mut rng);
            let translated = set.translate(&gamma)?;
            for (slot, (&k, table)) in depths.iter().zip(&tables).enumerate() {
                let leaves = translated.level(k);
                let spine_idx = table.vertex_index(&gamma.apply(&spine[k]));
                let all_fix = table
                    .setwise_stabilizer_indices(leaves)
                    .iter()
                    .all(|&e| table.images()[e][spine_idx] as usize == spine_idx);
                if all_fix {
                    fixed_counts[slot] += 1;
                }
            }
        }

        let fractions: Vec<BigRational> = fixed_counts
            .iter()
            .map(|&c| BigRational::new(BigInt::from(c), BigInt::from(p.trials)))
            .collect();
        let monotone = fractions.windows(2).all(|w| w[0] <= w[1]);
        let floor_met = fractions.last().map(|f| *f >= floor).unwrap_or(false);
        let verdict = if monotone && floor_met && p.trials >= p.trial_budget {
            Verdict::Pass
        } else {
            Verdict::InconclusiveStatistical
        };
        Ok((
            verdict,
            None,
            json!({
                "depths": depths,
                "fractions": fractions.iter().map(rational_string).collect::<Vec<_>>(),
                "monotone": monotone,
                "floor_met": floor_met,
                "trials": p.trials,
            }),
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d2a() -> Arity {
        Arity::new(2).unwrap()
    }

    fn d3a() -> Arity {
        Arity::new(3).unwrap()
    }

    #[test]
    fn fix_stab_all_standard_sets() {
        // d=2, sets at depth 2 inside the depth-3 group.
        for set in [
            ClosedSetApprox::empty(d2a(), 2),
            ClosedSetApprox::full(d2a(), 2),
            ClosedSetApprox::ray(d2a(), &"11".parse().unwrap()).unwrap(),
            ClosedSetApprox::from_shadows(d2a(), 2, ["00".parse().unwrap(), "11".parse().unwrap()])
                .unwrap(),
        ] {
            let params = FixStabParams {
                set,
                group_depth: 3,
                flavor: Flavor::Symmetric,
            };
            let report = check_fix_stab(&params).unwrap();
            assert!(report.passed(), "failed: {:?}", report.counterexample);
        }

        // d=3 alternating, sets at depth 1 inside the depth-2 group.
        for set in [
            ClosedSetApprox::empty(d3a(), 1),
            ClosedSetApprox::full(d3a(), 1),
            ClosedSetApprox::ray(d3a(), &"1".parse().unwrap()).unwrap(),
            ClosedSetApprox::from_shadows(d3a(), 1, ["0".parse().unwrap(), "2".parse().unwrap()])
                .unwrap(),
        ] {
            let params = FixStabParams {
                set,
                group_depth: 2,
                flavor: Flavor::Alternating,
            };
            let report = check_fix_stab(&params).unwrap();
            assert!(report.passed(), "failed: {:?}", report.counterexample);
        }
    }

    #[test]
    fn fix_stab_at_equal_depth_shows_truncation_artifact() {
        // The deepest sibling of a thin set cannot be moved inside a group
        // of the same depth, so the recovery honestly fails there.
        let params = FixStabParams {
            set: ClosedSetApprox::ray(d2a(), &"111".parse().unwrap()).unwrap(),
            group_depth: 3,
            flavor: Flavor::Symmetric,
        };
        let report = check_fix_stab(&params).unwrap();
        assert!(report.failed());
        assert_eq!(report.counterexample.unwrap()["level"], 3);
    }

    #[test]
    fn infinite_translates_ray_depth5() {
        let report = check_infinite_translates(&InfiniteTranslatesParams::default()).unwrap();
        assert!(report.passed(), "{:?}", report.counterexample);
        assert_eq!(
            report.details["witness_levels"],
            serde_json::json!([1, 2, 3, 4])
        );
    }

    #[test]
    fn infinite_translates_single() {
        let params = InfiniteTranslatesParams {
            count: 1,
            ..InfiniteTranslatesParams::default()
        };
        assert!(check_infinite_translates(&params).unwrap().passed());
    }

    #[test]
    fn infinite_translates_budget_exceeded() {
        let params = InfiniteTranslatesParams {
            count: 6,
            ..InfiniteTranslatesParams::default()
        };
        assert!(matches!(
            check_infinite_translates(&params),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn infinite_translates_clopen_guard() {
        let params = InfiniteTranslatesParams {
            set: ClosedSetApprox::from_shadows(d2a(), 3, ["0".parse().unwrap()]).unwrap(),
            ..InfiniteTranslatesParams::default()
        };
        assert!(matches!(
            check_infinite_translates(&params),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn infinite_translates_degenerate_fails() {
        let params = InfiniteTranslatesParams {
            degenerate_witnesses: true,
            ..InfiniteTranslatesParams::default()
        };
        let report = check_infinite_translates(&params).unwrap();
        assert!(report.failed());
    }

    #[test]
    fn green_ray_fixation_small_run() {
        let params = GreenRayFixationParams {
            set: None,
            max_depth: 3,
            trials: 200,
            trial_budget: 2000,
            ..GreenRayFixationParams::default()
        };
        let report = check_green_ray_fixation(&params, 5).unwrap();
        // Below budget: inconclusive, but the fractions are reported.
        assert_eq!(report.verdict, Verdict::InconclusiveStatistical);
        assert!(report.details["fractions"].as_array().unwrap().len() == 2);
    }

    #[test]
    fn green_ray_fixation_single_ray_is_always_fixed() {
        // The setwise stabilizer of a one-ray set fixes it pointwise:
        // fraction 1 at every depth.
        let params = GreenRayFixationParams {
            set: Some(ClosedSetApprox::ray(d2a(), &"111".parse().unwrap()).unwrap()),
            min_depth: 1,
            max_depth: 3,
            trials: 300,
            trial_budget: 300,
            ..GreenRayFixationParams::default()
        };
        let report = check_green_ray_fixation(&params, 3).unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        assert_eq!(
            report.details["fractions"],
            serde_json::json!(["1", "1", "1"])
        );
    }

    #[test]
    fn green_ray_fixation_clopen_control_errors() {
        let params = GreenRayFixationParams {
            clopen_control: true,
            ..GreenRayFixationParams::default()
        };
        assert!(check_green_ray_fixation(&params, 5).is_err());
    }
}
