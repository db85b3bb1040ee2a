//! Exact algebraic checks for sections of conjugates, surjectivity of the
//! section map onto rigid stabilizers with one discarded vertex per cycle,
//! the three-way discard cover identity, and the disjoint-support commutator
//! trick.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};

use crate::autom::{haar_sample, seeded_rng, FinitaryAutomorphism, Flavor};
use crate::error::{Error, Result};
use crate::groups::{rigid_stabilizer_gens, TruncatedWreathGroup, DEFAULT_ORDER_CAP};
use crate::perm::Permutation;
use crate::tree::{Arity, LevelSet, VertexAddress};
use crate::verify::{CheckReport, Verdict};

fn d3() -> usize {
    3
}
fn d2() -> usize {
    2
}
fn two() -> usize {
    2
}
fn three() -> usize {
    3
}
fn one() -> usize {
    1
}
fn trials_1000() -> u64 {
    1000
}
fn trials_500() -> u64 {
    500
}
fn alternating() -> Flavor {
    Flavor::Alternating
}
fn symmetric() -> Flavor {
    Flavor::Symmetric
}

/// Parameters for [`check_conjugate_sections`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConjugateSectionsParams {
    #[serde(default = "d3")]
    pub d: usize,
    #[serde(default = "two")]
    pub group_depth: usize,
    #[serde(default = "alternating")]
    pub flavor: Flavor,
    /// The level whose rigid stabilizer supplies the conjugating tuple.
    #[serde(default = "one")]
    pub section_level: usize,
    #[serde(default = "trials_1000")]
    pub trials: u64,
    /// Negative control: assert the identity with the section factors in
    /// the reversed order, which is wrong whenever sections fail to commute.
    #[serde(default)]
    pub sabotage_section_order: bool,
}

impl Default for ConjugateSectionsParams {
    fn default() -> Self {
        serde_json::from_value(json!({})).expect("defaults are complete")
    }
}

/// Verifies, for random `s` in the depth-n group and random `sigma` fixing
/// level k pointwise with sections `sigma_v`, the exact section identity
///
/// ```text
/// [s^sigma]_u  =  (sigma_u)^-1 . [s]_u . sigma_{u^s}
/// ```
///
/// at every `u` on level k (products read left to right, conjugation is
/// `s^g = g^-1 s g`). When `s` fixes level k trivially below, the middle
/// factor drops and the telescoping form used by the surjectivity argument
/// remains.
pub fn check_conjugate_sections(
    params: &ConjugateSectionsParams,
    seed: u64,
) -> Result<CheckReport> {
    let p = params.clone();
    let params_json = serde_json::to_value(params).expect("serializable");
    CheckReport::run("conjugate_sections", params_json, Some(seed), move || {
        let d = Arity::new(p.d)?;
        let k = p.section_level;
        if k >= p.group_depth {
            return Err(Error::DepthExceeded {
                requested: k + 1,
                depth: p.group_depth,
            });
        }
        let mut rng = seeded_rng(seed);
        let level_k = VertexAddress::all_at_level(d, k);

        for trial in 0..p.trials {
            // First trials pin the degenerate cases exactly.
            let s = if trial == 1 {
                FinitaryAutomorphism::identity(d)
            } else {
                haar_sample(d, p.group_depth, p.flavor, &mut rng)?
            };
            let sigma = if trial == 0 {
                FinitaryAutomorphism::identity(d)
            } else {
                random_level_rigid(d, p.group_depth, p.flavor, k, &mut rng)?
            };
            let conj = s.conjugate(&sigma)?;

            for u in &level_k {
                // Conjugation by a level-k-fixing element preserves the
                // level-k action.
                if conj.apply(u) != s.apply(u) {
                    return Ok((
                        Verdict::Fail,
                        Some(json!({
                            "trial": trial,
                            "reason": "level action changed under conjugation",
                            "u": u.to_string(),
                        })),
                        Value::Null,
                    ));
                }
                let got = conj.section(u);
                let sigma_u = sigma.section(u);
                let sigma_target = sigma.section(&s.apply(u));
                let expected = if p.sabotage_section_order {
                    sigma_u.compose(&s.section(u))?.compose(&sigma_target.inverse())?
                } else {
                    sigma_u
                        .inverse()
                        .compose(&s.section(u))?
                        .compose(&sigma_target)?
                };
                if got != expected {
                    return Ok((
                        Verdict::Fail,
                        Some(json!({
                            "trial": trial,
                            "u": u.to_string(),
                            "s": s,
                            "sigma": sigma,
                            "section_of_conjugate": got,
                            "expected": expected,
                        })),
                        Value::Null,
                    ));
                }
            }
        }
        Ok((
            Verdict::Pass,
            None,
            json!({"trials": p.trials, "vertices_per_trial": level_k.len()}),
        ))
    })
}

/// A Haar-random element of the rigid stabilizer of level `k`: independent
/// uniform sections at every level-k vertex.
fn random_level_rigid(
    d: Arity,
    group_depth: usize,
    flavor: Flavor,
    k: usize,
    rng: &mut impl rand::Rng,
) -> Result<FinitaryAutomorphism> {
    let mut out = FinitaryAutomorphism::identity(d);
    for v in VertexAddress::all_at_level(d, k) {
        let section = haar_sample(d, group_depth - k, flavor, rng)?;
        out = out.compose(&section.embed_at(&v))?;
    }
    Ok(out)
}

/// One cycle on a level, spelled as a parent vertex and the digit cycle
/// applied at it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleSpec {
    pub parent: VertexAddress,
    pub digits: Vec<u8>,
}

fn default_cycles() -> Vec<CycleSpec> {
    vec![CycleSpec {
        parent: VertexAddress::root(),
        digits: vec![0, 1, 2],
    }]
}

/// Parameters for [`check_sections_surjective`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectionsSurjectiveParams {
    #[serde(default = "d3")]
    pub d: usize,
    #[serde(default = "two")]
    pub group_depth: usize,
    #[serde(default = "alternating")]
    pub flavor: Flavor,
    #[serde(default = "default_cycles")]
    pub cycles: Vec<CycleSpec>,
    /// Negative control: claim surjectivity over the full cycles with no
    /// discarded vertex. The last section is determined by the others, so
    /// the image is a proper subset and the claim fails.
    #[serde(default)]
    pub claim_full_surjectivity: bool,
}

impl Default for SectionsSurjectiveParams {
    fn default() -> Self {
        serde_json::from_value(json!({})).expect("defaults are complete")
    }
}

/// Enumerates all conjugating tuples over the rigid stabilizer of the cycle
/// vertices and verifies that the sections of the conjugates, read over the
/// cycles with the first vertex of each discarded, run through the whole
/// rigid stabilizer of the remaining vertices with uniform fibers.
pub fn check_sections_surjective(params: &SectionsSurjectiveParams) -> Result<CheckReport> {
    let p = params.clone();
    let params_json = serde_json::to_value(params).expect("serializable");
    CheckReport::run("sections_surjective", params_json, None, move || {
        let d = Arity::new(p.d)?;
        let group = TruncatedWreathGroup::new(d, p.group_depth, p.flavor)?;

        // Build the permutation realizing the cycles and collect the cycle
        // vertices in order.
        let mut s = FinitaryAutomorphism::identity(d);
        let mut cycles: Vec<Vec<VertexAddress>> = Vec::new();
        for spec in &p.cycles {
            if spec.digits.len() < 3 {
                return Err(Error::PreconditionViolated(
                    "cycles must have length at least 3".into(),
                ));
            }
            let perm = Permutation::cycle(d, &spec.digits)?;
            if !p.flavor.admits(&perm) {
                return Err(Error::PreconditionViolated(format!(
                    "cycle {:?} is odd, not admitted by the alternating flavor",
                    spec.digits
                )));
            }
            s = s.compose(&FinitaryAutomorphism::elementary(
                d,
                spec.parent.clone(),
                perm,
            )?)?;
            cycles.push(
                spec.digits
                    .iter()
                    .map(|&y| spec.parent.child(y))
                    .collect(),
            );
        }
        let level = cycles[0][0].level();
        for cycle in &cycles {
            for v in cycle {
                if v.level() != level {
                    return Err(Error::PreconditionViolated(
                        "all cycles must live on one level".into(),
                    ));
                }
                // The built element must realize each cycle.
                debug_assert_eq!(
                    s.apply(v),
                    cycle[(cycle.iter().position(|x| x == v).unwrap() + 1) % cycle.len()].clone()
                );
            }
        }

        // Per-vertex rigid stabilizers, as abstract subtree elements.
        let cycle_vertices: Vec<VertexAddress> =
            cycles.iter().flat_map(|c| c.iter().cloned()).collect();
        let subtree_elements: Vec<Vec<FinitaryAutomorphism>> = cycle_vertices
            .iter()
            .map(|v| {
                let rst = rigid_stabilizer_gens(&group, &LevelSet::new(level, [v.clone()])?)?
                    .enumerate()?;
                Ok(rst
                    .elements()
                    .expect("just enumerated")
                    .iter()
                    .map(|g| g.section(v))
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let rst_cycle_order: usize = subtree_elements.iter().map(Vec::len).product();
        if rst_cycle_order > DEFAULT_ORDER_CAP {
            return Err(Error::OrderCapExceeded {
                cap: DEFAULT_ORDER_CAP,
                seen: rst_cycle_order,
            });
        }

        // Vertices whose sections we observe: with the first of each cycle
        // discarded, or all of them for the negative control.
        let observed: Vec<VertexAddress> = cycles
            .iter()
            .flat_map(|c| {
                let skip = usize::from(!p.claim_full_surjectivity);
                c.iter().skip(skip).cloned()
            })
            .collect();

        // Walk every tuple in the rigid stabilizer of the cycles.
        let mut image: BTreeMap<Vec<FinitaryAutomorphism>, usize> = BTreeMap::new();
        let mut tuple_index = vec![0usize; cycle_vertices.len()];
        loop {
            let mut sigma = FinitaryAutomorphism::identity(d);
            for (pos, v) in cycle_vertices.iter().enumerate() {
                sigma =
                    sigma.compose(&subtree_elements[pos][tuple_index[pos]].embed_at(v))?;
            }
            let conj = s.conjugate(&sigma)?;
            let key: Vec<FinitaryAutomorphism> =
                observed.iter().map(|u| conj.section(u)).collect();
            *image.entry(key).or_insert(0) += 1;

            // Advance the mixed-radix counter.
            let mut pos = 0;
            loop {
                if pos == tuple_index.len() {
                    break;
                }
                tuple_index[pos] += 1;
                if tuple_index[pos] < subtree_elements[pos].len() {
                    break;
                }
                tuple_index[pos] = 0;
                pos += 1;
            }
            if pos == tuple_index.len() {
                break;
            }
        }

        // The target: the full product of subtree groups over the observed
        // vertices.
        let observed_positions: Vec<usize> = observed
            .iter()
            .map(|u| cycle_vertices.iter().position(|v| v == u).unwrap())
            .collect();
        let mut target: BTreeSet<Vec<FinitaryAutomorphism>> = BTreeSet::new();
        let mut idx = vec![0usize; observed.len()];
        loop {
            target.insert(
                observed_positions
                    .iter()
                    .zip(&idx)
                    .map(|(&pos, &i)| subtree_elements[pos][i].clone())
                    .collect(),
            );
            let mut pos = 0;
            loop {
                if pos == idx.len() {
                    break;
                }
                idx[pos] += 1;
                if idx[pos] < subtree_elements[observed_positions[pos]].len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == idx.len() {
                break;
            }
        }

        let image_keys: BTreeSet<&Vec<FinitaryAutomorphism>> = image.keys().collect();
        let surjective = image_keys.len() == target.len()
            && target.iter().all(|t| image.contains_key(t));
        let expected_fiber = rst_cycle_order / target.len().max(1);
        let fibers_uniform = image.values().all(|&c| c == expected_fiber);

        if surjective && fibers_uniform {
            Ok((
                Verdict::Pass,
                None,
                json!({
                    "rst_cycles_order": rst_cycle_order,
                    "image_size": image.len(),
                    "target_size": target.len(),
                    "fiber_size": expected_fiber,
                }),
            ))
        } else {
            let missing = target
                .iter()
                .find(|t| !image.contains_key(*t))
                .map(|t| serde_json::to_value(t).expect("serializable"));
            Ok((
                Verdict::Fail,
                Some(json!({
                    "image_size": image.len(),
                    "target_size": target.len(),
                    "missing_tuple": missing,
                    "fibers_uniform": fibers_uniform,
                })),
                Value::Null,
            ))
        }
    })
}

fn default_lengths() -> Option<Vec<Vec<usize>>> {
    None
}

/// Parameters for [`check_def_cover`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[derive(Default)]
pub struct DefCoverParams {
    /// Cycle-length multisets to test; `None` runs every multiset with
    /// entries in {3,4,5} and at most 3 cycles.
    #[serde(default = "default_lengths")]
    pub cycle_lengths: Option<Vec<Vec<usize>>>,
    /// Negative control: discard the same vertex three times, which breaks
    /// the cover identity.
    #[serde(default)]
    pub same_discard: bool,
}


/// Verifies `(D & E) | (E & F) | (D & F) = C` where `D`, `E`, `F` discard
/// the first, second and third vertex of each abstract cycle.
pub fn check_def_cover(params: &DefCoverParams) -> Result<CheckReport> {
    let p = params.clone();
    let params_json = serde_json::to_value(params).expect("serializable");
    CheckReport::run("def_cover", params_json, None, move || {
        let families: Vec<Vec<usize>> = match &p.cycle_lengths {
            Some(fams) => fams.clone(),
            None => {
                let mut fams = Vec::new();
                let entries = [3usize, 4, 5];
                for a in 0..entries.len() {
                    fams.push(vec![entries[a]]);
                    for b in a..entries.len() {
                        fams.push(vec![entries[a], entries[b]]);
                        for c in b..entries.len() {
                            fams.push(vec![entries[a], entries[b], entries[c]]);
                        }
                    }
                }
                fams
            }
        };

        for lengths in &families {
            if lengths.iter().any(|&l| l < 3) {
                return Err(Error::PreconditionViolated(
                    "cycle lengths must be at least 3".into(),
                ));
            }
            let all: BTreeSet<(usize, usize)> = lengths
                .iter()
                .enumerate()
                .flat_map(|(i, &l)| (0..l).map(move |j| (i, j)))
                .collect();
            let discard = |which: usize| -> BTreeSet<(usize, usize)> {
                let skip = if p.same_discard { 0 } else { which };
                all.iter()
                    .filter(|&&(_, j)| j != skip)
                    .copied()
                    .collect()
            };
            let (d, e, f) = (discard(0), discard(1), discard(2));
            let union: BTreeSet<(usize, usize)> = d
                .intersection(&e)
                .chain(e.intersection(&f))
                .chain(d.intersection(&f))
                .copied()
                .collect();
            if union != all {
                let missed: Vec<(usize, usize)> =
                    all.difference(&union).copied().collect();
                return Ok((
                    Verdict::Fail,
                    Some(json!({"cycle_lengths": lengths, "missed": missed})),
                    Value::Null,
                ));
            }
            // Each point sits outside exactly one of D, E, F when its
            // position is among the discarded ones.
            for &(i, j) in &all {
                if j < 3 && !p.same_discard {
                    let outside = [&d, &e, &f]
                        .iter()
                        .filter(|s| !s.contains(&(i, j)))
                        .count();
                    if outside != 1 {
                        return Ok((
                            Verdict::Fail,
                            Some(json!({"cycle_lengths": lengths, "point": (i, j)})),
                            Value::Null,
                        ));
                    }
                }
            }
        }
        Ok((
            Verdict::Pass,
            None,
            json!({"families_checked": families.len()}),
        ))
    })
}

/// Parameters for [`check_grigorchuk_commutator`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrigorchukParams {
    #[serde(default = "d2")]
    pub d: usize,
    #[serde(default = "three")]
    pub group_depth: usize,
    #[serde(default = "symmetric")]
    pub flavor: Flavor,
    #[serde(default = "trials_500")]
    pub trials: u64,
    /// Negative control: take the moving element to be the identity, so
    /// `[[phi,f],g]` collapses while `[f,g]` does not.
    #[serde(default)]
    pub force_identity_phi: bool,
}

impl Default for GrigorchukParams {
    fn default() -> Self {
        serde_json::from_value(json!({})).expect("defaults are complete")
    }
}

/// Verifies the commutator identity `[[phi, f], g] = [f, g]` for `phi`
/// moving a vertex `v` and `f`, `g` supported inside the subtree at `v`.
pub fn check_grigorchuk_commutator(params: &GrigorchukParams, seed: u64) -> Result<CheckReport> {
    let p = params.clone();
    let params_json = serde_json::to_value(params).expect("serializable");
    CheckReport::run("grigorchuk_commutator", params_json, Some(seed), move || {
        let d = Arity::new(p.d)?;
        if p.group_depth < 2 {
            return Err(Error::DepthExceeded {
                requested: 2,
                depth: p.group_depth,
            });
        }
        let group = TruncatedWreathGroup::new(d, p.group_depth, p.flavor)?;
        let mut rng = seeded_rng(seed);

        for trial in 0..p.trials {
            let level = 1 + (trial as usize % (p.group_depth - 1));
            let vertices = VertexAddress::all_at_level(d, level);
            let v = vertices[rand::Rng::gen_range(&mut rng, 0..vertices.len())].clone();

            let phi = if p.force_identity_phi {
                FinitaryAutomorphism::identity(d)
            } else {
                let mut phi = group.haar(&mut rng);
                let mut guard = 0;
                while phi.fixes(&v) {
                    phi = group.haar(&mut rng);
                    guard += 1;
                    if guard > 1000 {
                        return Err(Error::PreconditionViolated(format!(
                            "could not sample an element moving {v}"
                        )));
                    }
                }
                phi
            };

            let subtree_depth = p.group_depth - level;
            let mut f = haar_sample(d, subtree_depth, p.flavor, &mut rng)?.embed_at(&v);
            let mut g = haar_sample(d, subtree_depth, p.flavor, &mut rng)?.embed_at(&v);
            if p.force_identity_phi {
                // Only a noncommuting pair witnesses the broken hypothesis.
                let mut guard = 0;
                while f.commutator(&g)?.is_identity() {
                    f = haar_sample(d, subtree_depth, p.flavor, &mut rng)?.embed_at(&v);
                    g = haar_sample(d, subtree_depth, p.flavor, &mut rng)?.embed_at(&v);
                    guard += 1;
                    if guard > 10_000 {
                        return Err(Error::PreconditionViolated(
                            "rigid stabilizer appears abelian; negative control needs \
                             a noncommuting pair"
                                .into(),
                        ));
                    }
                }
            }

            let lhs = phi.commutator(&f)?.commutator(&g)?;
            let rhs = f.commutator(&g)?;
            if lhs != rhs {
                return Ok((
                    Verdict::Fail,
                    Some(json!({
                        "trial": trial,
                        "vertex": v.to_string(),
                        "phi": phi,
                        "f": f,
                        "g": g,
                        "lhs": lhs,
                        "rhs": rhs,
                    })),
                    Value::Null,
                ));
            }

            // Commuting pair: both sides must collapse to the identity.
            if trial == 0 && !p.force_identity_phi {
                let both = phi.commutator(&f)?.commutator(&f)?;
                if !f.commutator(&f)?.is_identity() || both != f.commutator(&f)? {
                    return Ok((
                        Verdict::Fail,
                        Some(json!({"trial": trial, "reason": "commuting-pair case"})),
                        Value::Null,
                    ));
                }
            }
        }
        Ok((Verdict::Pass, None, json!({"trials": p.trials})))
    })
}
