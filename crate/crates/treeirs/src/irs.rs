//! Invariant-random-subgroup samplers, subgroup fingerprints, empirical
//! distributions, atom-mass estimation and conjugation-invariance testing.
//!
//! Every sampler is a value describing a distribution over subgroups of a
//! truncated wreath group; `prepare` builds whatever enumeration tables the
//! sampler needs, and sampling is then deterministic given the seeded source.

use std::collections::BTreeMap;

use num::{BigInt, BigRational, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autom::{haar_sample, FinitaryAutomorphism};
use crate::boundary::ClosedSetApprox;
use crate::error::{Error, Result};
use crate::groups::{
    level_stabilizer_gens, GeneratedSubgroup, LevelPartition, TruncatedWreathGroup,
    DEFAULT_ORDER_CAP,
};
use crate::tree::{LevelSet, VertexAddress};

/// Which stabilizer a set-stabilizer sampler takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabMode {
    Pointwise,
    Setwise,
}

/// The "top" subgroup of a level sampler: a subgroup of the depth-`n`
/// quotient group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TopSpec {
    Full,
    #[default]
    Trivial,
    Generators(Vec<FinitaryAutomorphism>),
}

/// Per-hanging-subtree sampler piece: an independent level sampler of depth
/// `top_depth` inside the subtree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtreeIrsSpec {
    pub top_depth: usize,
    #[serde(default)]
    pub top: TopSpec,
}

/// A description of an IRS distribution over subgroups of a truncated
/// wreath group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IrsSampler {
    /// The uniform random conjugate of a fixed subgroup.
    UniformConjugate { subgroup: GeneratedSubgroup },
    /// The Dirac measure on a fixed subgroup. Conjugation-invariant only
    /// for normal subgroups; doubles as the negative control for the
    /// invariance test.
    Fixed { subgroup: GeneratedSubgroup },
    /// Pointwise or setwise stabilizer of the Haar-random translate of a
    /// closed set, inside the enumerated ambient group.
    StabilizerOfRandomSet {
        ambient: TruncatedWreathGroup,
        set: ClosedSetApprox,
        mode: StabMode,
    },
    /// Preimage of a uniform conjugate of a top subgroup under the depth-`n`
    /// restriction: the conjugated top generators together with the level-`n`
    /// stabilizer.
    LevelIrs {
        ambient: TruncatedWreathGroup,
        top_depth: usize,
        #[serde(default)]
        top: TopSpec,
    },
    /// A uniformly random boundary ray, with an independent level sampler in
    /// every subtree hanging off the ray. Specs are indexed by attach level,
    /// the last entry repeating.
    FixedRay {
        ambient: TruncatedWreathGroup,
        subtrees: Vec<SubtreeIrsSpec>,
    },
    /// Like `FixedRay`, but the leftmost hanging subtrees at attach levels 0
    /// and 1 share one diagonally coupled top subgroup.
    Coupled {
        ambient: TruncatedWreathGroup,
        couple_depth: usize,
        #[serde(default)]
        rest: Vec<SubtreeIrsSpec>,
    },
}

impl IrsSampler {
    pub fn ambient(&self) -> TruncatedWreathGroup {
        match self {
            IrsSampler::UniformConjugate { subgroup } | IrsSampler::Fixed { subgroup } => {
                *subgroup.ambient()
            }
            IrsSampler::StabilizerOfRandomSet { ambient, .. }
            | IrsSampler::LevelIrs { ambient, .. }
            | IrsSampler::FixedRay { ambient, .. }
            | IrsSampler::Coupled { ambient, .. } => *ambient,
        }
    }

    /// Validates the sampler and builds the enumeration tables it needs.
    pub fn prepare(&self) -> Result<PreparedSampler> {
        let action = match self {
            IrsSampler::StabilizerOfRandomSet { ambient, set, mode: _ } => {
                if set.arity() != ambient.arity() {
                    return Err(Error::ArityMismatch(
                        set.arity().get(),
                        ambient.arity().get(),
                    ));
                }
                if set.depth() != ambient.depth() {
                    return Err(Error::PreconditionViolated(format!(
                        "set depth {} must equal the ambient depth {}",
                        set.depth(),
                        ambient.depth()
                    )));
                }
                Some(LevelActionTable::build(ambient, DEFAULT_ORDER_CAP)?)
            }
            IrsSampler::LevelIrs {
                ambient,
                top_depth,
                top,
            } => {
                validate_top(ambient, *top_depth, top)?;
                None
            }
            IrsSampler::FixedRay { ambient, subtrees } => {
                if subtrees.is_empty() {
                    return Err(Error::PreconditionViolated(
                        "fixed-ray sampler needs at least one subtree spec".into(),
                    ));
                }
                for spec in subtrees {
                    validate_top_shape(ambient, spec.top_depth, &spec.top)?;
                }
                None
            }
            IrsSampler::Coupled {
                ambient,
                couple_depth,
                ..
            } => {
                if ambient.depth() < couple_depth + 2 {
                    return Err(Error::DepthExceeded {
                        requested: couple_depth + 2,
                        depth: ambient.depth(),
                    });
                }
                None
            }
            IrsSampler::UniformConjugate { .. } | IrsSampler::Fixed { .. } => None,
        };
        Ok(PreparedSampler {
            sampler: self.clone(),
            action,
        })
    }
}

fn validate_top(ambient: &TruncatedWreathGroup, top_depth: usize, top: &TopSpec) -> Result<()> {
    if top_depth > ambient.depth() {
        return Err(Error::DepthExceeded {
            requested: top_depth,
            depth: ambient.depth(),
        });
    }
    validate_top_shape(ambient, top_depth, top)
}

fn validate_top_shape(
    ambient: &TruncatedWreathGroup,
    top_depth: usize,
    top: &TopSpec,
) -> Result<()> {
    if let TopSpec::Generators(gens) = top {
        let quotient = TruncatedWreathGroup::new(ambient.arity(), top_depth, ambient.flavor())?;
        for g in gens {
            if !quotient.contains(g) {
                return Err(Error::PreconditionViolated(format!(
                    "top generator {g} does not lie in the depth-{top_depth} quotient"
                )));
            }
        }
    }
    Ok(())
}

use crate::groups::LevelActionTable;

fn stabilizer_indices(
    table: &LevelActionTable,
    leaves: &[VertexAddress],
    mode: StabMode,
) -> Vec<usize> {
    match mode {
        StabMode::Pointwise => table.pointwise_stabilizer_indices(leaves),
        StabMode::Setwise => table.setwise_stabilizer_indices(leaves),
    }
}

/// A validated sampler with its enumeration tables.
pub struct PreparedSampler {
    sampler: IrsSampler,
    action: Option<LevelActionTable>,
}

impl PreparedSampler {
    pub fn sampler(&self) -> &IrsSampler {
        &self.sampler
    }

    /// Draws one subgroup. Deterministic given the state of `rng`.
    pub fn sample(&self, rng: &mut impl Rng) -> Result<GeneratedSubgroup> {
        match &self.sampler {
            IrsSampler::UniformConjugate { subgroup } => {
                let gamma = subgroup.ambient().haar(rng);
                subgroup.conjugate_by(&gamma)
            }
            IrsSampler::Fixed { subgroup } => Ok(subgroup.clone()),
            IrsSampler::StabilizerOfRandomSet { ambient, set, mode } => {
                let gamma = ambient.haar(rng);
                let translated = set.translate(&gamma)?;
                let table = self.action.as_ref().expect("built in prepare");
                let indices = stabilizer_indices(table, translated.leaves(), *mode);
                let elements = indices
                    .iter()
                    .map(|&i| table.elements()[i].clone())
                    .collect();
                Ok(ambient
                    .full_subgroup(DEFAULT_ORDER_CAP)
                    .subgroup_from_elements(elements))
            }
            IrsSampler::LevelIrs {
                ambient,
                top_depth,
                top,
            } => {
                let mut gens =
                    sampled_top_generators(ambient, *top_depth, top, &VertexAddress::root(), rng)?;
                gens.extend(
                    level_stabilizer_gens(ambient, *top_depth)?
                        .generators()
                        .iter()
                        .cloned(),
                );
                GeneratedSubgroup::new(*ambient, gens, DEFAULT_ORDER_CAP)
            }
            IrsSampler::FixedRay { ambient, subtrees } => {
                let (ray, _) = random_ray(ambient, rng);
                let mut gens = Vec::new();
                for descriptor in crate::boundary::decompose(&ray) {
                    let spec = subtree_spec(subtrees, descriptor.attach_level);
                    for root in &descriptor.hanging_roots {
                        gens.extend(subtree_level_irs_gens(
                            ambient,
                            root,
                            spec.top_depth,
                            &spec.top,
                            rng,
                        )?);
                    }
                }
                GeneratedSubgroup::new(*ambient, gens, DEFAULT_ORDER_CAP)
            }
            IrsSampler::Coupled {
                ambient,
                couple_depth,
                rest,
            } => self.sample_coupled(ambient, *couple_depth, rest, rng),
        }
    }

    fn sample_coupled(
        &self,
        ambient: &TruncatedWreathGroup,
        couple_depth: usize,
        rest: &[SubtreeIrsSpec],
        rng: &mut impl Rng,
    ) -> Result<GeneratedSubgroup> {
        let (ray, _) = random_ray(ambient, rng);
        let descriptors = crate::boundary::decompose(&ray);
        let coupled_roots: Vec<VertexAddress> = descriptors
            .iter()
            .take(2)
            .filter_map(|desc| desc.hanging_roots.first().cloned())
            .collect();
        if coupled_roots.len() < 2 {
            return Err(Error::PreconditionViolated(
                "coupled sampler needs hanging subtrees at attach levels 0 and 1".into(),
            ));
        }

        let quotient =
            TruncatedWreathGroup::new(ambient.arity(), couple_depth, ambient.flavor())?;
        let mut gens = Vec::new();

        // Independent Haar conjugators for the two coupled copies.
        let conj: Vec<FinitaryAutomorphism> = coupled_roots
            .iter()
            .map(|root| {
                let depth_below = ambient.depth() - root.level();
                let n = couple_depth.min(depth_below);
                haar_sample(ambient.arity(), n, ambient.flavor(), rng)
                    .map(|g| g.embed_at(root))
            })
            .collect::<Result<Vec<_>>>()?;
        let conjugator = conj[0].compose(&conj[1])?;

        // Diagonal top subgroup across the two subtrees, conjugated.
        for e in quotient.elementary_generators() {
            let diagonal = e
                .embed_at(&coupled_roots[0])
                .compose(&e.embed_at(&coupled_roots[1]))?;
            gens.push(diagonal.conjugate(&conjugator)?);
        }
        // Level stabilizers below the coupled tops.
        for root in &coupled_roots {
            gens.extend(subtree_stabilizer_gens(ambient, root, couple_depth)?);
        }

        // Everything else: independent per-subtree samplers.
        for descriptor in &descriptors {
            let skip_first = descriptor.attach_level <= 1;
            let spec = subtree_spec_or_trivial(rest, descriptor.attach_level);
            for (j, root) in descriptor.hanging_roots.iter().enumerate() {
                if skip_first && j == 0 {
                    continue;
                }
                gens.extend(subtree_level_irs_gens(
                    ambient,
                    root,
                    spec.top_depth,
                    &spec.top,
                    rng,
                )?);
            }
        }
        GeneratedSubgroup::new(*ambient, gens, DEFAULT_ORDER_CAP)
    }

    /// The fingerprint of one draw at the given depth, using the level
    /// action table when the sampler has one at exactly that depth.
    pub fn sample_fingerprint(
        &self,
        depth: usize,
        rng: &mut impl Rng,
    ) -> Result<SubgroupFingerprint> {
        if let (
            IrsSampler::StabilizerOfRandomSet { ambient, set, mode },
            Some(table),
        ) = (&self.sampler, &self.action)
        {
            if table.level() == depth {
                let gamma = ambient.haar(rng);
                let translated = set.translate(&gamma)?;
                let indices = stabilizer_indices(table, translated.leaves(), *mode);
                let mut rows: Vec<Vec<u16>> = indices
                    .iter()
                    .map(|&i| table.images()[i].clone())
                    .collect();
                rows.sort();
                rows.dedup();
                return Ok(SubgroupFingerprint {
                    depth,
                    kind: FingerprintKind::Exact(rows),
                });
            }
        }
        let sample = self.sample(rng)?;
        fingerprint(&sample, depth)
    }
}

fn subtree_spec(specs: &[SubtreeIrsSpec], attach_level: usize) -> &SubtreeIrsSpec {
    specs
        .get(attach_level)
        .unwrap_or_else(|| specs.last().expect("validated nonempty"))
}

fn subtree_spec_or_trivial(specs: &[SubtreeIrsSpec], attach_level: usize) -> SubtreeIrsSpec {
    if specs.is_empty() {
        SubtreeIrsSpec {
            top_depth: 0,
            top: TopSpec::Trivial,
        }
    } else {
        subtree_spec(specs, attach_level).clone()
    }
}

/// A uniformly random depth-N ray: each digit uniform.
fn random_ray(
    ambient: &TruncatedWreathGroup,
    rng: &mut impl Rng,
) -> (ClosedSetApprox, VertexAddress) {
    let digits: Vec<u8> = (0..ambient.depth())
        .map(|_| rng.gen_range(0..ambient.arity().get() as u8))
        .collect();
    let leaf = VertexAddress::from_digits(digits, ambient.arity()).expect("digits in range");
    let ray = ClosedSetApprox::ray(ambient.arity(), &leaf).expect("leaf at full depth");
    (ray, leaf)
}

/// Conjugated top generators of a level sampler planted at `root`.
fn sampled_top_generators(
    ambient: &TruncatedWreathGroup,
    top_depth: usize,
    top: &TopSpec,
    root: &VertexAddress,
    rng: &mut impl Rng,
) -> Result<Vec<FinitaryAutomorphism>> {
    let depth_below = ambient.depth() - root.level();
    let n = top_depth.min(depth_below);
    match top {
        TopSpec::Trivial => Ok(Vec::new()),
        TopSpec::Full => {
            // The full quotient is normal; conjugation changes nothing.
            let quotient = TruncatedWreathGroup::new(ambient.arity(), n, ambient.flavor())?;
            Ok(quotient
                .elementary_generators()
                .into_iter()
                .map(|e| e.embed_at(root))
                .collect())
        }
        TopSpec::Generators(gens) => {
            let gamma = haar_sample(ambient.arity(), n, ambient.flavor(), rng)?;
            gens.iter()
                .map(|g| g.truncate(n).conjugate(&gamma).map(|c| c.embed_at(root)))
                .collect()
        }
    }
}

/// Elementary generators fixing the first `below` levels inside the subtree
/// at `root`.
fn subtree_stabilizer_gens(
    ambient: &TruncatedWreathGroup,
    root: &VertexAddress,
    below: usize,
) -> Result<Vec<FinitaryAutomorphism>> {
    let mut gens = Vec::new();
    let start = root.level() + below;
    for level in start..ambient.depth() {
        for u in crate::tree::shadow_at_level(root, ambient.arity(), level)?.iter() {
            gens.extend(ambient.elementary_generators_at(u));
        }
    }
    Ok(gens)
}

fn subtree_level_irs_gens(
    ambient: &TruncatedWreathGroup,
    root: &VertexAddress,
    top_depth: usize,
    top: &TopSpec,
    rng: &mut impl Rng,
) -> Result<Vec<FinitaryAutomorphism>> {
    let mut gens = sampled_top_generators(ambient, top_depth, top, root, rng)?;
    gens.extend(subtree_stabilizer_gens(ambient, root, top_depth)?);
    Ok(gens)
}

/// Canonical identification of a subgroup's image in a depth-truncation:
/// the sorted set of level actions of its elements, or a coarser
/// orbit/fixed-set signature when enumeration is capped.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SubgroupFingerprint {
    depth: usize,
    kind: FingerprintKind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum FingerprintKind {
    Exact(Vec<Vec<u16>>),
    Coarse {
        orbits: Vec<LevelPartition>,
        fixed: Vec<LevelSet>,
    },
}

impl SubgroupFingerprint {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.kind, FingerprintKind::Exact(_))
    }

    /// Number of distinct depth-truncated elements, when exact.
    pub fn order(&self) -> Option<usize> {
        match &self.kind {
            FingerprintKind::Exact(rows) => Some(rows.len()),
            FingerprintKind::Coarse { .. } => None,
        }
    }

    /// Stable FNV-1a digest of the canonical form, for report keys.
    pub fn hash_hex(&self) -> String {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |byte: u8| {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        };
        eat(self.depth as u8);
        match &self.kind {
            FingerprintKind::Exact(rows) => {
                for row in rows {
                    eat(0xff);
                    for &x in row {
                        eat((x & 0xff) as u8);
                        eat((x >> 8) as u8);
                    }
                }
            }
            FingerprintKind::Coarse { orbits, fixed } => {
                eat(0xcc);
                let repr = serde_json::to_string(&(orbits, fixed)).expect("serializable");
                for b in repr.bytes() {
                    eat(b);
                }
            }
        }
        format!("{hash:016x}")
    }
}

/// The canonical fingerprint of the subgroup's image in the depth
/// truncation. Falls back to the coarse orbit/fixed-set signature when the
/// truncated enumeration exceeds the order cap.
pub fn fingerprint(subgroup: &GeneratedSubgroup, depth: usize) -> Result<SubgroupFingerprint> {
    if depth > subgroup.ambient().depth() {
        return Err(Error::DepthExceeded {
            requested: depth,
            depth: subgroup.ambient().depth(),
        });
    }
    let quotient = TruncatedWreathGroup::new(
        subgroup.ambient().arity(),
        depth,
        subgroup.ambient().flavor(),
    )?;
    let truncated_gens: Vec<FinitaryAutomorphism> = subgroup
        .generators()
        .iter()
        .map(|g| g.truncate(depth))
        .collect();
    let truncated =
        GeneratedSubgroup::new(quotient, truncated_gens, subgroup.order_cap())?;
    match truncated.enumerate() {
        Ok(enumerated) => {
            let mut rows: Vec<Vec<u16>> = enumerated
                .elements()
                .expect("just enumerated")
                .iter()
                .map(|g| g.level_action(depth))
                .collect();
            rows.sort();
            rows.dedup();
            Ok(SubgroupFingerprint {
                depth,
                kind: FingerprintKind::Exact(rows),
            })
        }
        Err(Error::OrderCapExceeded { .. }) => {
            let orbits = truncated.orbit_sequence(depth)?;
            let fixed = (0..=depth)
                .map(|k| truncated.fixed_vertices(k))
                .collect::<Result<Vec<_>>>()?;
            Ok(SubgroupFingerprint {
                depth,
                kind: FingerprintKind::Coarse { orbits, fixed },
            })
        }
        Err(e) => Err(e),
    }
}

/// The closed-set approximation of the fixed boundary points: fixed
/// vertices at the ambient depth, with shallower levels their ancestors.
pub fn fix_set_of_sample(subgroup: &GeneratedSubgroup) -> Result<ClosedSetApprox> {
    let depth = subgroup.ambient().depth();
    let fixed = subgroup.fixed_vertices(depth)?;
    ClosedSetApprox::from_leaves(
        subgroup.ambient().arity(),
        depth,
        fixed.members().iter().cloned(),
    )
}

/// Empirical distribution over subgroup fingerprints.
#[derive(Debug, Clone, Default)]
pub struct EmpiricalDistribution {
    counts: BTreeMap<SubgroupFingerprint, u64>,
    total: u64,
}

impl EmpiricalDistribution {
    pub fn record(&mut self, fp: SubgroupFingerprint) {
        *self.counts.entry(fp).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn support_size(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> impl Iterator<Item = (&SubgroupFingerprint, u64)> {
        self.counts.iter().map(|(fp, &c)| (fp, c))
    }

    pub fn max_count(&self) -> u64 {
        self.counts.values().copied().max().unwrap_or(0)
    }

    /// Commutative merge of two distributions.
    pub fn merge(mut self, other: EmpiricalDistribution) -> EmpiricalDistribution {
        for (fp, c) in other.counts {
            *self.counts.entry(fp).or_insert(0) += c;
        }
        self.total += other.total;
        self
    }

    /// Exact total-variation distance between two empirical distributions.
    pub fn tv_distance(&self, other: &EmpiricalDistribution) -> BigRational {
        if self.total == 0 || other.total == 0 {
            return BigRational::zero();
        }
        let keys: std::collections::BTreeSet<&SubgroupFingerprint> = self
            .counts
            .keys()
            .chain(other.counts.keys())
            .collect();
        let mut sum = BigRational::zero();
        for key in keys {
            let p = BigRational::new(
                BigInt::from(self.counts.get(key).copied().unwrap_or(0)),
                BigInt::from(self.total),
            );
            let q = BigRational::new(
                BigInt::from(other.counts.get(key).copied().unwrap_or(0)),
                BigInt::from(other.total),
            );
            let diff = if p >= q { p - q } else { q - p };
            sum += diff;
        }
        sum / BigRational::from_integer(2.into())
    }
}

/// Result of an atom-mass estimation run.
#[derive(Debug, Clone)]
pub struct AtomMassReport {
    pub max_frequency: BigRational,
    pub support_size: usize,
    pub distribution: EmpiricalDistribution,
}

/// Samples `trials` subgroups and reports the empirical maximum point mass
/// and the number of distinct fingerprints at the given depth.
pub fn estimate_atom_mass(
    sampler: &IrsSampler,
    trials: u64,
    depth: usize,
    rng: &mut impl Rng,
) -> Result<AtomMassReport> {
    if trials == 0 {
        return Err(Error::PreconditionViolated("trials must be >= 1".into()));
    }
    let prepared = sampler.prepare()?;
    let mut distribution = EmpiricalDistribution::default();
    for _ in 0..trials {
        distribution.record(prepared.sample_fingerprint(depth, rng)?);
    }
    let max_frequency = BigRational::new(
        BigInt::from(distribution.max_count()),
        BigInt::from(distribution.total()),
    );
    Ok(AtomMassReport {
        max_frequency,
        support_size: distribution.support_size(),
        distribution,
    })
}

/// Result of a conjugation-invariance test.
#[derive(Debug, Clone)]
pub struct InvarianceReport {
    /// Exact total-variation distance between the fingerprint distributions
    /// of the sampler and its conjugate.
    pub statistic: BigRational,
    /// Combined support size, which scales the concentration threshold.
    pub support_size: usize,
    pub trials: u64,
    /// True when `statistic^2 <= 16 * support / trials`, a loose
    /// concentration bound leaving only sampling noise in range.
    pub pass: bool,
}

/// Compares the empirical fingerprint distribution of the sampler with that
/// of the sampler conjugated by `gamma`, over independent runs.
pub fn invariance_test(
    sampler: &IrsSampler,
    gamma: &FinitaryAutomorphism,
    trials: u64,
    depth: usize,
    rng: &mut impl Rng,
) -> Result<InvarianceReport> {
    if !sampler.ambient().contains(gamma) {
        return Err(Error::PreconditionViolated(format!(
            "conjugator {gamma} is not in the ambient group"
        )));
    }
    let prepared = sampler.prepare()?;
    let mut base = EmpiricalDistribution::default();
    let mut conjugated = EmpiricalDistribution::default();
    for _ in 0..trials {
        base.record(prepared.sample_fingerprint(depth, rng)?);
    }
    for _ in 0..trials {
        let sample = prepared.sample(rng)?.conjugate_by(gamma)?;
        conjugated.record(fingerprint(&sample, depth)?);
    }
    let statistic = base.tv_distance(&conjugated);
    let keys: std::collections::BTreeSet<_> = base
        .counts
        .keys()
        .chain(conjugated.counts.keys())
        .collect();
    let support_size = keys.len();
    // statistic <= 4 sqrt(F/trials), compared via squares to stay exact.
    let lhs = &statistic * &statistic;
    let rhs = BigRational::new(
        BigInt::from(16u64 * support_size as u64),
        BigInt::from(trials),
    );
    Ok(InvarianceReport {
        pass: lhs <= rhs,
        statistic,
        support_size,
        trials,
    })
}

/// The exact conjugation orbit of a subgroup under its enumerated ambient
/// group, as fingerprints at the given depth.
pub fn conjugation_orbit(
    subgroup: &GeneratedSubgroup,
    depth: usize,
) -> Result<Vec<SubgroupFingerprint>> {
    let ambient = subgroup.ambient().full_subgroup(subgroup.order_cap()).enumerate()?;
    let mut orbit = std::collections::BTreeSet::new();
    for gamma in ambient.elements().expect("just enumerated") {
        orbit.insert(fingerprint(&subgroup.conjugate_by(gamma)?, depth)?);
    }
    Ok(orbit.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autom::{seeded_rng, Flavor};
    use crate::tree::Arity;
    use crate::perm::Permutation;

    fn d2() -> Arity {
        Arity::new(2).unwrap()
    }

    fn addr(s: &str) -> VertexAddress {
        s.parse().unwrap()
    }

    fn sym(n: usize) -> TruncatedWreathGroup {
        TruncatedWreathGroup::new(d2(), n, Flavor::Symmetric).unwrap()
    }

    fn swap_subgroup(v: &str, n: usize) -> GeneratedSubgroup {
        let g = FinitaryAutomorphism::elementary(
            d2(),
            addr(v),
            Permutation::transposition(d2(), 0, 1),
        )
        .unwrap();
        GeneratedSubgroup::new(sym(n), vec![g], 1000).unwrap()
    }

    #[test]
    fn uniform_conjugate_endpoints() {
        let mut rng = seeded_rng(3);
        // Full group: every conjugate is the full group.
        let full = sym(2).full_subgroup(100);
        let sampler = IrsSampler::UniformConjugate {
            subgroup: full.clone(),
        };
        let prepared = sampler.prepare().unwrap();
        let fp_full = fingerprint(&full, 2).unwrap();
        for _ in 0..10 {
            let s = prepared.sample(&mut rng).unwrap();
            assert_eq!(fingerprint(&s, 2).unwrap(), fp_full);
        }
        // Trivial subgroup: always trivial.
        let trivial = GeneratedSubgroup::trivial(sym(2));
        let sampler = IrsSampler::UniformConjugate {
            subgroup: trivial.clone(),
        };
        let prepared = sampler.prepare().unwrap();
        for _ in 0..10 {
            let s = prepared.sample(&mut rng).unwrap();
            assert_eq!(s.enumerate().unwrap().order(), Some(1));
        }
    }

    #[test]
    fn uniform_conjugate_hits_whole_orbit_uniformly() {
        // L = {id, swap at "0"} in S_2^wr(2) has exactly two conjugates.
        let l = swap_subgroup("0", 2);
        let orbit = conjugation_orbit(&l, 2).unwrap();
        assert_eq!(orbit.len(), 2);

        let sampler = IrsSampler::UniformConjugate { subgroup: l };
        let mut rng = seeded_rng(11);
        let report = estimate_atom_mass(&sampler, 4000, 2, &mut rng).unwrap();
        assert_eq!(report.support_size, 2);
        // Each conjugate within a generous band around 1/2.
        for (_, count) in report.distribution.counts() {
            assert!((1800..=2200).contains(&count), "count {count}");
        }
    }

    #[test]
    fn fingerprint_distinguishes_conjugates() {
        let l0 = swap_subgroup("0", 2);
        let l1 = swap_subgroup("1", 2);
        assert_ne!(fingerprint(&l0, 2).unwrap(), fingerprint(&l1, 2).unwrap());
        assert_eq!(
            fingerprint(&l0, 1).unwrap(),
            fingerprint(&l1, 1).unwrap(),
            "both act trivially on level 1"
        );

        // Conjugation equivariance through translation.
        let root_swap = FinitaryAutomorphism::elementary(
            d2(),
            VertexAddress::root(),
            Permutation::transposition(d2(), 0, 1),
        )
        .unwrap();
        let conj = l0.conjugate_by(&root_swap).unwrap();
        assert_eq!(
            fingerprint(&conj, 2).unwrap(),
            fingerprint(&l1, 2).unwrap()
        );
    }

    #[test]
    fn level_irs_endpoints() {
        let ambient = sym(2);
        // Full top at depth 1: always the whole group.
        let sampler = IrsSampler::LevelIrs {
            ambient,
            top_depth: 1,
            top: TopSpec::Full,
        };
        let prepared = sampler.prepare().unwrap();
        let mut rng = seeded_rng(5);
        let s = prepared.sample(&mut rng).unwrap().enumerate().unwrap();
        assert_eq!(s.order(), Some(8));

        // Trivial top at depth 1: always the level-1 stabilizer, order 4.
        let sampler = IrsSampler::LevelIrs {
            ambient,
            top_depth: 1,
            top: TopSpec::Trivial,
        };
        let prepared = sampler.prepare().unwrap();
        let s = prepared.sample(&mut rng).unwrap().enumerate().unwrap();
        assert_eq!(s.order(), Some(4));
    }

    #[test]
    fn level_irs_fixed_point_structure() {
        // Top L = {id, swap at "0"} on two levels inside depth-3 ambient:
        // every sample fixes exactly the two level-2 vertices that the
        // sampled top conjugate fixes.
        let top_gen = FinitaryAutomorphism::elementary(
            d2(),
            addr("0"),
            Permutation::transposition(d2(), 0, 1),
        )
        .unwrap();
        let sampler = IrsSampler::LevelIrs {
            ambient: sym(3),
            top_depth: 2,
            top: TopSpec::Generators(vec![top_gen]),
        };
        let prepared = sampler.prepare().unwrap();
        let mut rng = seeded_rng(17);
        for _ in 0..20 {
            let s = prepared.sample(&mut rng).unwrap();
            assert_eq!(s.fixed_vertices(2).unwrap().len(), 2);
        }
    }

    #[test]
    fn stabilizer_sampler_matches_filter_oracle() {
        let ambient = sym(3);
        let set = ClosedSetApprox::ray(d2(), &addr("111")).unwrap();
        let sampler = IrsSampler::StabilizerOfRandomSet {
            ambient,
            set: set.clone(),
            mode: StabMode::Pointwise,
        };
        let prepared = sampler.prepare().unwrap();
        let full = ambient.full_subgroup(1000).enumerate().unwrap();
        for seed in 0..10u64 {
            let mut rng = seeded_rng(seed);
            let sample = prepared.sample(&mut rng).unwrap();
            // Oracle: redo the translate with the same seed and filter.
            let mut rng = seeded_rng(seed);
            let gamma = ambient.haar(&mut rng);
            let translated = set.translate(&gamma).unwrap();
            let leaf_set = LevelSet::new(3, translated.leaves().iter().cloned()).unwrap();
            let oracle = full.pointwise_stabilizer(&leaf_set).unwrap();
            assert_eq!(sample.elements(), oracle.elements());

            // The fixed set of the sample contains the translated set on
            // every level.
            let fix = fix_set_of_sample(&sample).unwrap();
            for k in 0..=3 {
                for v in translated.level(k) {
                    assert!(fix.contains(v), "level {k} vertex {v}");
                }
            }
        }
    }

    #[test]
    fn fix_set_recovers_stabilized_ray() {
        // Pointwise stabilizer of a depth-2 ray inside the depth-3 group:
        // its fixed boundary set recovers the ray on every visible level.
        let ambient = sym(3);
        let ray2 = ClosedSetApprox::ray(d2(), &addr("11")).unwrap();
        let shadow = crate::tree::shadow_at_level(&addr("11"), d2(), 3).unwrap();
        let full = ambient.full_subgroup(1000).enumerate().unwrap();
        let stab = full.pointwise_stabilizer(&shadow).unwrap();
        let fix = fix_set_of_sample(&stab).unwrap();
        for k in 0..=2 {
            assert_eq!(fix.level(k), ray2.level(k), "level {k}");
        }
    }

    #[test]
    fn fix_set_endpoints() {
        let ambient = sym(2);
        let trivial = GeneratedSubgroup::trivial(ambient);
        let fix = fix_set_of_sample(&trivial).unwrap();
        assert!(fix.is_full());

        let full = ambient.full_subgroup(100);
        let fix = fix_set_of_sample(&full).unwrap();
        assert!(fix.is_empty());
    }

    #[test]
    fn invariance_stabilizer_sampler_passes() {
        let ambient = sym(2);
        let set = ClosedSetApprox::ray(d2(), &addr("11")).unwrap();
        let sampler = IrsSampler::StabilizerOfRandomSet {
            ambient,
            set,
            mode: StabMode::Pointwise,
        };
        let gamma = FinitaryAutomorphism::elementary(
            d2(),
            VertexAddress::root(),
            Permutation::transposition(d2(), 0, 1),
        )
        .unwrap();
        let mut rng = seeded_rng(31);
        let report = invariance_test(&sampler, &gamma, 1500, 2, &mut rng).unwrap();
        assert!(report.pass, "tv = {}", report.statistic);
    }

    #[test]
    fn fix_set_is_conjugation_equivariant() {
        for seed in 0..15u64 {
            let mut rng = seeded_rng(seed);
            let ambient = sym(3);
            let h = GeneratedSubgroup::new(
                ambient,
                vec![ambient.haar(&mut rng), ambient.haar(&mut rng)],
                1000,
            )
            .unwrap();
            let gamma = ambient.haar(&mut rng);
            let lhs = fix_set_of_sample(&h.conjugate_by(&gamma).unwrap()).unwrap();
            let rhs = fix_set_of_sample(&h).unwrap().translate(&gamma).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn orbit_partitions_are_conjugation_equivariant() {
        for seed in 0..15u64 {
            let mut rng = seeded_rng(seed);
            let ambient = sym(3);
            let h = GeneratedSubgroup::new(ambient, vec![ambient.haar(&mut rng)], 1000).unwrap();
            let gamma = ambient.haar(&mut rng);
            for level in 0..=3 {
                let lhs = h.conjugate_by(&gamma).unwrap().orbits(level).unwrap();
                let rhs = h.orbits(level).unwrap().translate(&gamma).unwrap();
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn invariance_uniform_conjugate_passes() {
        let l = swap_subgroup("0", 2);
        let gamma = FinitaryAutomorphism::elementary(
            d2(),
            VertexAddress::root(),
            Permutation::transposition(d2(), 0, 1),
        )
        .unwrap();
        let sampler = IrsSampler::UniformConjugate { subgroup: l };
        let mut rng = seeded_rng(23);
        let report = invariance_test(&sampler, &gamma, 2000, 2, &mut rng).unwrap();
        assert!(report.pass, "tv = {}", report.statistic);
    }

    #[test]
    fn invariance_broken_sampler_fails_with_tv_one() {
        // Dirac at a non-normal subgroup, conjugator not normalizing it:
        // the two streams are disjoint, so the TV distance is exactly 1.
        let l = swap_subgroup("0", 2);
        let gamma = FinitaryAutomorphism::elementary(
            d2(),
            VertexAddress::root(),
            Permutation::transposition(d2(), 0, 1),
        )
        .unwrap();
        let sampler = IrsSampler::Fixed { subgroup: l };
        let mut rng = seeded_rng(29);
        let report = invariance_test(&sampler, &gamma, 500, 2, &mut rng).unwrap();
        assert!(!report.pass);
        assert_eq!(report.statistic, BigRational::from_integer(1.into()));
    }

    #[test]
    fn stabilizer_support_grows_with_depth() {
        let target = BigRational::new(8.into(), 15.into());
        let mut supports = Vec::new();
        for depth in 2..=4usize {
            let ambient = sym(depth);
            let set = ClosedSetApprox::with_measure(d2(), depth, &target).unwrap();
            let sampler = IrsSampler::StabilizerOfRandomSet {
                ambient,
                set,
                mode: StabMode::Pointwise,
            };
            let mut rng = seeded_rng(41);
            let report = estimate_atom_mass(&sampler, 300, depth, &mut rng).unwrap();
            supports.push(report.support_size);
        }
        assert!(
            supports[0] < supports[1] && supports[1] < supports[2],
            "supports {supports:?}"
        );
    }

    #[test]
    fn fixed_ray_sampler_fixes_its_ray() {
        let ambient = sym(3);
        let sampler = IrsSampler::FixedRay {
            ambient,
            subtrees: vec![SubtreeIrsSpec {
                top_depth: 0,
                top: TopSpec::Trivial,
            }],
        };
        let prepared = sampler.prepare().unwrap();
        for seed in 0..10u64 {
            let mut rng = seeded_rng(seed);
            let s = prepared.sample(&mut rng).unwrap();
            let fix = fix_set_of_sample(&s).unwrap();
            // Oracle: replay the ray draw. The fixed set contains the ray,
            // and matches it exactly above the truncation level, where the
            // deepest hanging leaf cannot be moved by depth-3 elements.
            let mut rng = seeded_rng(seed);
            let (ray, _) = random_ray(&ambient, &mut rng);
            for k in 0..3 {
                assert_eq!(fix.level(k), ray.level(k), "seed {seed} level {k}");
            }
            for leaf in ray.leaves() {
                assert!(fix.contains(leaf));
            }
        }
    }

    #[test]
    fn coupled_sampler_couples_the_top_parts() {
        let ambient = sym(3);
        let sampler = IrsSampler::Coupled {
            ambient,
            couple_depth: 1,
            rest: vec![],
        };
        let prepared = sampler.prepare().unwrap();
        for seed in 0..10u64 {
            let mut rng = seeded_rng(seed);
            let s = prepared.sample(&mut rng).unwrap().enumerate().unwrap();

            let mut rng = seeded_rng(seed);
            let (ray, leaf) = random_ray(&ambient, &mut rng);
            assert!(!ray.is_empty());
            let digits = leaf.digits();
            let c0 = VertexAddress::from_digits(vec![1 - digits[0]], d2()).unwrap();
            let c1 = VertexAddress::from_digits(vec![digits[0], 1 - digits[1]], d2()).unwrap();

            // The coupled generator moves the tops of both hanging subtrees
            // simultaneously: no element moves one top level but not the
            // other.
            for el in s.elements().unwrap() {
                let moves_c0 = c0.children(d2()).iter().any(|v| !el.fixes(v));
                let moves_c1 = c1.children(d2()).iter().any(|v| !el.fixes(v));
                assert_eq!(moves_c0, moves_c1, "seed {seed}");
            }
        }
    }

    #[test]
    fn sampler_spec_roundtrip() {
        let sampler = IrsSampler::LevelIrs {
            ambient: sym(2),
            top_depth: 1,
            top: TopSpec::Full,
        };
        let json = serde_json::to_string(&sampler).unwrap();
        let back: IrsSampler = serde_json::from_str(&json).unwrap();
        assert_eq!(back, sampler);

        let sampler = IrsSampler::StabilizerOfRandomSet {
            ambient: sym(2),
            set: ClosedSetApprox::ray(d2(), &addr("11")).unwrap(),
            mode: StabMode::Setwise,
        };
        let json = serde_json::to_value(&sampler).unwrap();
        assert_eq!(json["type"], "stabilizer_of_random_set");
        let back: IrsSampler = serde_json::from_value(json).unwrap();
        assert_eq!(back, sampler);
    }

    #[test]
    fn distribution_merge_is_commutative() {
        let sampler = IrsSampler::UniformConjugate {
            subgroup: swap_subgroup("0", 2),
        };
        let a = estimate_atom_mass(&sampler, 40, 2, &mut seeded_rng(1))
            .unwrap()
            .distribution;
        let b = estimate_atom_mass(&sampler, 60, 2, &mut seeded_rng(2))
            .unwrap()
            .distribution;
        let ab = a.clone().merge(b.clone());
        let ba = b.merge(a);
        assert_eq!(ab.total(), 100);
        let pairs = |d: &EmpiricalDistribution| {
            d.counts()
                .map(|(fp, c)| (fp.hash_hex(), c))
                .collect::<Vec<_>>()
        };
        assert_eq!(pairs(&ab), pairs(&ba));
    }

    #[test]
    fn deterministic_given_seed() {
        let sampler = IrsSampler::UniformConjugate {
            subgroup: swap_subgroup("0", 2),
        };
        let a = estimate_atom_mass(&sampler, 50, 2, &mut seeded_rng(7)).unwrap();
        let b = estimate_atom_mass(&sampler, 50, 2, &mut seeded_rng(7)).unwrap();
        let counts_a: Vec<(String, u64)> = a
            .distribution
            .counts()
            .map(|(fp, c)| (fp.hash_hex(), c))
            .collect();
        let counts_b: Vec<(String, u64)> = b
            .distribution
            .counts()
            .map(|(fp, c)| (fp.hash_hex(), c))
            .collect();
        assert_eq!(counts_a, counts_b);
    }
}
