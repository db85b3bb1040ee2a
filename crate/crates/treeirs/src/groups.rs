//! Truncated wreath-product groups and their subgroups: breadth-first
//! enumeration, orbits and level partitions, level/rigid/pointwise/setwise
//! stabilizers, derived subgroups and witness generator sets.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num::{BigRational, BigUint};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autom::{haar_sample, FinitaryAutomorphism, Flavor};
use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::tree::{half_pow, Arity, LevelSet, VertexAddress};

/// Default ceiling on explicit enumerations; everything bigger fails loudly.
pub const DEFAULT_ORDER_CAP: usize = 200_000;

/// The automorphism group of the depth-`n` d-ary tree: the n-times iterated
/// permutational wreath product of `S_d` (or `A_d`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TruncatedWreathGroup {
    d: Arity,
    depth: usize,
    flavor: Flavor,
}

impl<'de> Deserialize<'de> for TruncatedWreathGroup {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            d: Arity,
            depth: usize,
            flavor: Flavor,
        }
        let repr = Repr::deserialize(de)?;
        TruncatedWreathGroup::new(repr.d, repr.depth, repr.flavor)
            .map_err(serde::de::Error::custom)
    }
}

impl TruncatedWreathGroup {
    pub fn new(d: Arity, depth: usize, flavor: Flavor) -> Result<TruncatedWreathGroup> {
        flavor.check_arity(d)?;
        Ok(TruncatedWreathGroup { d, depth, flavor })
    }

    pub fn arity(&self) -> Arity {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    /// `|base|^((d^n - 1)/(d - 1))` with base `d!` or `d!/2`.
    pub fn order(&self) -> BigUint {
        let base = BigUint::from(self.flavor.base_order(self.d));
        base.pow(self.d.vertices_above(self.depth) as u32)
    }

    pub fn contains(&self, g: &FinitaryAutomorphism) -> bool {
        g.arity() == self.d
            && g.depth() <= self.depth
            && (self.flavor == Flavor::Symmetric || g.is_alternating())
    }

    /// Generators of the base group placed at a single vertex.
    pub fn elementary_generators_at(&self, v: &VertexAddress) -> Vec<FinitaryAutomorphism> {
        let d = self.d.get() as u8;
        let perms: Vec<Permutation> = match self.flavor {
            Flavor::Symmetric => (0..d - 1)
                .map(|i| Permutation::transposition(self.d, i, i + 1))
                .collect(),
            Flavor::Alternating => (2..d)
                .map(|k| Permutation::cycle(self.d, &[0, 1, k]).expect("digits in range"))
                .collect(),
        };
        perms
            .into_iter()
            .map(|p| FinitaryAutomorphism::elementary(self.d, v.clone(), p).expect("valid entry"))
            .collect()
    }

    /// Elementary generators at every vertex of levels `lo..depth`.
    pub fn elementary_generators_from_level(&self, lo: usize) -> Vec<FinitaryAutomorphism> {
        let mut gens = Vec::new();
        for level in lo..self.depth {
            for v in VertexAddress::all_at_level(self.d, level) {
                gens.extend(self.elementary_generators_at(&v));
            }
        }
        gens
    }

    /// A generating set for the whole truncated group.
    pub fn elementary_generators(&self) -> Vec<FinitaryAutomorphism> {
        self.elementary_generators_from_level(0)
    }

    pub fn haar(&self, rng: &mut impl Rng) -> FinitaryAutomorphism {
        haar_sample(self.d, self.depth, self.flavor, rng).expect("arity checked at construction")
    }

    /// The full group as a generated subgroup (not yet enumerated).
    pub fn full_subgroup(&self, order_cap: usize) -> GeneratedSubgroup {
        GeneratedSubgroup {
            ambient: *self,
            generators: self.elementary_generators(),
            elements: None,
            order_cap,
        }
    }
}

/// A subgroup of a truncated wreath group given by generators, optionally
/// with its full element list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedSubgroup {
    ambient: TruncatedWreathGroup,
    generators: Vec<FinitaryAutomorphism>,
    elements: Option<Vec<FinitaryAutomorphism>>,
    order_cap: usize,
}

impl GeneratedSubgroup {
    pub fn new(
        ambient: TruncatedWreathGroup,
        generators: Vec<FinitaryAutomorphism>,
        order_cap: usize,
    ) -> Result<GeneratedSubgroup> {
        for g in &generators {
            if !ambient.contains(g) {
                return Err(Error::PreconditionViolated(format!(
                    "generator {g} does not lie in the ambient depth-{} {} group",
                    ambient.depth(),
                    ambient.flavor()
                )));
            }
        }
        Ok(GeneratedSubgroup {
            ambient,
            generators,
            elements: None,
            order_cap,
        })
    }

    pub fn trivial(ambient: TruncatedWreathGroup) -> GeneratedSubgroup {
        GeneratedSubgroup {
            ambient,
            generators: Vec::new(),
            elements: Some(vec![FinitaryAutomorphism::identity(ambient.arity())]),
            order_cap: DEFAULT_ORDER_CAP,
        }
    }

    pub fn ambient(&self) -> &TruncatedWreathGroup {
        &self.ambient
    }

    pub fn generators(&self) -> &[FinitaryAutomorphism] {
        &self.generators
    }

    pub fn order_cap(&self) -> usize {
        self.order_cap
    }

    pub fn is_enumerated(&self) -> bool {
        self.elements.is_some()
    }

    /// The sorted element list, if enumerated.
    pub fn elements(&self) -> Option<&[FinitaryAutomorphism]> {
        self.elements.as_deref()
    }

    pub fn order(&self) -> Option<usize> {
        self.elements.as_ref().map(Vec::len)
    }

    /// Breadth-first closure of the generators under composition. Idempotent.
    pub fn enumerate(&self) -> Result<GeneratedSubgroup> {
        if self.elements.is_some() {
            return Ok(self.clone());
        }
        let elements = bfs_closure(self.ambient.arity(), &self.generators, self.order_cap)?;
        Ok(GeneratedSubgroup {
            ambient: self.ambient,
            generators: self.generators.clone(),
            elements: Some(elements),
            order_cap: self.order_cap,
        })
    }

    pub fn contains_element(&self, g: &FinitaryAutomorphism) -> Result<bool> {
        match &self.elements {
            Some(els) => Ok(els.binary_search(g).is_ok()),
            None => Err(Error::PreconditionViolated(
                "membership test requires an enumerated subgroup".into(),
            )),
        }
    }

    /// Orbit partition of the generator action on a level. Needs no
    /// enumeration: vertices are closed under the generator action.
    pub fn orbits(&self, level: usize) -> Result<LevelPartition> {
        if level > self.ambient.depth() {
            return Err(Error::DepthExceeded {
                requested: level,
                depth: self.ambient.depth(),
            });
        }
        let vertices = VertexAddress::all_at_level(self.ambient.arity(), level);
        let index: BTreeMap<&VertexAddress, usize> =
            vertices.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let mut seen = vec![false; vertices.len()];
        let mut blocks = Vec::new();
        for start in 0..vertices.len() {
            if seen[start] {
                continue;
            }
            let mut block = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(i) = queue.pop_front() {
                block.push(vertices[i].clone());
                for g in &self.generators {
                    let j = index[&g.apply(&vertices[i])];
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            blocks.push(block);
        }
        LevelPartition::new(level, blocks)
    }

    /// Orbit partitions on levels `0..=max_level`.
    pub fn orbit_sequence(&self, max_level: usize) -> Result<Vec<LevelPartition>> {
        (0..=max_level).map(|k| self.orbits(k)).collect()
    }

    /// Vertices on a level fixed by every generator (equivalently by the
    /// whole subgroup).
    pub fn fixed_vertices(&self, level: usize) -> Result<LevelSet> {
        if level > self.ambient.depth() {
            return Err(Error::DepthExceeded {
                requested: level,
                depth: self.ambient.depth(),
            });
        }
        let members = VertexAddress::all_at_level(self.ambient.arity(), level)
            .into_iter()
            .filter(|v| self.generators.iter().all(|g| g.fixes(v)));
        LevelSet::new(level, members)
    }

    /// Elements fixing every vertex of `set`. Requires enumeration.
    pub fn pointwise_stabilizer(&self, set: &LevelSet) -> Result<GeneratedSubgroup> {
        let els = self.require_elements()?;
        let filtered: Vec<FinitaryAutomorphism> = els
            .iter()
            .filter(|g| set.iter().all(|v| g.fixes(v)))
            .cloned()
            .collect();
        Ok(self.subgroup_from_elements(filtered))
    }

    /// Elements mapping `set` onto itself. Requires enumeration.
    pub fn setwise_stabilizer(&self, set: &LevelSet) -> Result<GeneratedSubgroup> {
        let els = self.require_elements()?;
        let filtered: Vec<FinitaryAutomorphism> = els
            .iter()
            .filter(|g| set.iter().all(|v| set.contains(&g.apply(v))))
            .cloned()
            .collect();
        Ok(self.subgroup_from_elements(filtered))
    }

    /// The commutator subgroup: the normal closure within `self` of the
    /// commutators of generator pairs, iterating conjugation by generators
    /// until a fixpoint.
    pub fn derived_subgroup(&self) -> Result<GeneratedSubgroup> {
        let mut gens: BTreeSet<FinitaryAutomorphism> = BTreeSet::new();
        for a in &self.generators {
            for b in &self.generators {
                let c = a.commutator(b)?;
                if !c.is_identity() {
                    gens.insert(c);
                }
            }
        }
        loop {
            let elements = bfs_closure(
                self.ambient.arity(),
                &gens.iter().cloned().collect::<Vec<_>>(),
                self.order_cap,
            )?;
            let mut grew = false;
            for h in &elements {
                for g in &self.generators {
                    let conj = h.conjugate(g)?;
                    if elements.binary_search(&conj).is_err() {
                        gens.insert(conj);
                        grew = true;
                    }
                }
            }
            if !grew {
                let generators: Vec<FinitaryAutomorphism> = gens.into_iter().collect();
                return Ok(GeneratedSubgroup {
                    ambient: self.ambient,
                    generators,
                    elements: Some(elements),
                    order_cap: self.order_cap,
                });
            }
        }
    }

    /// The conjugate subgroup `self^g`.
    pub fn conjugate_by(&self, g: &FinitaryAutomorphism) -> Result<GeneratedSubgroup> {
        let generators = self
            .generators
            .iter()
            .map(|s| s.conjugate(g))
            .collect::<Result<Vec<_>>>()?;
        let elements = match &self.elements {
            Some(els) => {
                let mut conj = els
                    .iter()
                    .map(|s| s.conjugate(g))
                    .collect::<Result<Vec<_>>>()?;
                conj.sort();
                Some(conj)
            }
            None => None,
        };
        Ok(GeneratedSubgroup {
            ambient: self.ambient,
            generators,
            elements,
            order_cap: self.order_cap,
        })
    }

    fn require_elements(&self) -> Result<&[FinitaryAutomorphism]> {
        self.elements.as_deref().ok_or_else(|| {
            Error::PreconditionViolated("operation requires an enumerated subgroup".into())
        })
    }

    /// Wraps an explicit element list (assumed closed) as a subgroup, using
    /// the elements themselves as generators.
    pub(crate) fn subgroup_from_elements(
        &self,
        mut elements: Vec<FinitaryAutomorphism>,
    ) -> GeneratedSubgroup {
        elements.sort();
        elements.dedup();
        let generators = elements
            .iter()
            .filter(|g| !g.is_identity())
            .cloned()
            .collect();
        GeneratedSubgroup {
            ambient: self.ambient,
            generators,
            elements: Some(elements),
            order_cap: self.order_cap,
        }
    }
}

/// Precomputed action of an enumerated group on one level, for fast
/// stabilizer filtering.
pub(crate) struct LevelActionTable {
    elements: Vec<FinitaryAutomorphism>,
    /// `images[e][i]`: lexicographic index of the image of the i-th level
    /// vertex under element `e`.
    images: Vec<Vec<u16>>,
    level: usize,
    d: Arity,
}

impl LevelActionTable {
    pub(crate) fn build(group: &TruncatedWreathGroup, cap: usize) -> Result<LevelActionTable> {
        let enumerated = group.full_subgroup(cap).enumerate()?;
        let elements = enumerated.elements().expect("just enumerated").to_vec();
        let level = group.depth();
        let images = elements.iter().map(|g| g.level_action(level)).collect();
        Ok(LevelActionTable {
            elements,
            images,
            level,
            d: group.arity(),
        })
    }

    pub(crate) fn level(&self) -> usize {
        self.level
    }

    pub(crate) fn elements(&self) -> &[FinitaryAutomorphism] {
        &self.elements
    }

    pub(crate) fn images(&self) -> &[Vec<u16>] {
        &self.images
    }

    pub(crate) fn vertex_index(&self, v: &VertexAddress) -> usize {
        v.digits()
            .iter()
            .fold(0usize, |acc, &y| acc * self.d.get() + y as usize)
    }

    /// Indices of elements fixing every listed vertex.
    pub(crate) fn pointwise_stabilizer_indices(&self, vertices: &[VertexAddress]) -> Vec<usize> {
        let idx: Vec<usize> = vertices.iter().map(|v| self.vertex_index(v)).collect();
        (0..self.elements.len())
            .filter(|&e| idx.iter().all(|&i| self.images[e][i] as usize == i))
            .collect()
    }

    /// Indices of elements mapping the listed vertex set onto itself.
    pub(crate) fn setwise_stabilizer_indices(&self, vertices: &[VertexAddress]) -> Vec<usize> {
        let idx: Vec<usize> = vertices.iter().map(|v| self.vertex_index(v)).collect();
        let size = self.d.level_size(self.level);
        let mut member = vec![false; size];
        for &i in &idx {
            member[i] = true;
        }
        (0..self.elements.len())
            .filter(|&e| idx.iter().all(|&i| member[self.images[e][i] as usize]))
            .collect()
    }
}

impl Serialize for GeneratedSubgroup {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("GeneratedSubgroup", 3)?;
        st.serialize_field("ambient", &self.ambient)?;
        st.serialize_field("generators", &self.generators)?;
        st.serialize_field("order_cap", &self.order_cap)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for GeneratedSubgroup {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            ambient: TruncatedWreathGroup,
            generators: Vec<FinitaryAutomorphism>,
            #[serde(default = "default_cap")]
            order_cap: usize,
        }
        fn default_cap() -> usize {
            DEFAULT_ORDER_CAP
        }
        let repr = Repr::deserialize(de)?;
        GeneratedSubgroup::new(repr.ambient, repr.generators, repr.order_cap)
            .map_err(serde::de::Error::custom)
    }
}

fn bfs_closure(
    d: Arity,
    generators: &[FinitaryAutomorphism],
    cap: usize,
) -> Result<Vec<FinitaryAutomorphism>> {
    let identity = FinitaryAutomorphism::identity(d);
    let mut set: BTreeSet<FinitaryAutomorphism> = BTreeSet::new();
    set.insert(identity.clone());
    let mut queue = VecDeque::from([identity]);
    while let Some(x) = queue.pop_front() {
        for g in generators {
            let y = x.compose(g)?;
            if !set.contains(&y) {
                if set.len() >= cap {
                    return Err(Error::OrderCapExceeded {
                        cap,
                        seen: set.len() + 1,
                    });
                }
                set.insert(y.clone());
                queue.push_back(y);
            }
        }
    }
    Ok(set.into_iter().collect())
}

/// Generators of the pointwise stabilizer of level `m` inside `g`: all
/// elementary permutations at vertices of levels `m..depth`.
pub fn level_stabilizer_gens(
    group: &TruncatedWreathGroup,
    m: usize,
) -> Result<GeneratedSubgroup> {
    if m > group.depth() {
        return Err(Error::DepthExceeded {
            requested: m,
            depth: group.depth(),
        });
    }
    GeneratedSubgroup::new(
        *group,
        group.elementary_generators_from_level(m),
        DEFAULT_ORDER_CAP,
    )
}

/// Generators of the rigid stabilizer of a vertex set: elementary
/// permutations at every vertex inside the subtrees below the set. Every
/// element fixes all vertices outside the shadows of the set.
pub fn rigid_stabilizer_gens(
    group: &TruncatedWreathGroup,
    set: &LevelSet,
) -> Result<GeneratedSubgroup> {
    if set.level() > group.depth() {
        return Err(Error::DepthExceeded {
            requested: set.level(),
            depth: group.depth(),
        });
    }
    let mut gens = Vec::new();
    for v in set.iter() {
        for level in v.level()..group.depth() {
            for u in crate::tree::shadow_at_level(v, group.arity(), level)?.iter() {
                gens.extend(group.elementary_generators_at(u));
            }
        }
    }
    GeneratedSubgroup::new(*group, gens, DEFAULT_ORDER_CAP)
}

/// A partition of one tree level into disjoint blocks covering the level.
/// Canonical form: blocks sorted internally and by their first member.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LevelPartition {
    level: usize,
    blocks: Vec<Vec<VertexAddress>>,
}

impl LevelPartition {
    pub fn new(
        level: usize,
        blocks: impl IntoIterator<Item = Vec<VertexAddress>>,
    ) -> Result<LevelPartition> {
        let mut canon: Vec<Vec<VertexAddress>> = Vec::new();
        let mut seen: BTreeSet<VertexAddress> = BTreeSet::new();
        for mut block in blocks {
            block.sort();
            block.dedup();
            if block.is_empty() {
                continue;
            }
            for v in &block {
                if v.level() != level {
                    return Err(Error::PreconditionViolated(format!(
                        "block member {v} is not on level {level}"
                    )));
                }
                if !seen.insert(v.clone()) {
                    return Err(Error::PreconditionViolated(format!(
                        "vertex {v} appears in two blocks"
                    )));
                }
            }
            canon.push(block);
        }
        canon.sort();
        Ok(LevelPartition {
            level,
            blocks: canon,
        })
    }

    pub fn singletons(d: Arity, level: usize) -> LevelPartition {
        let blocks = VertexAddress::all_at_level(d, level)
            .into_iter()
            .map(|v| vec![v]);
        LevelPartition::new(level, blocks).expect("singletons are disjoint")
    }

    pub fn one_block(d: Arity, level: usize) -> LevelPartition {
        LevelPartition::new(level, [VertexAddress::all_at_level(d, level)])
            .expect("a single block is a partition")
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn blocks(&self) -> &[Vec<VertexAddress>] {
        &self.blocks
    }

    pub fn block_containing(&self, v: &VertexAddress) -> Option<&[VertexAddress]> {
        self.blocks
            .iter()
            .find(|b| b.binary_search(v).is_ok())
            .map(Vec::as_slice)
    }

    /// True when the blocks cover all of `L_level` for arity `d`.
    pub fn covers_level(&self, d: Arity) -> bool {
        self.blocks.iter().map(Vec::len).sum::<usize>() == d.level_size(self.level)
    }

    /// The image partition under an automorphism.
    pub fn translate(&self, g: &FinitaryAutomorphism) -> Result<LevelPartition> {
        LevelPartition::new(
            self.level,
            self.blocks
                .iter()
                .map(|b| b.iter().map(|v| g.apply(v)).collect::<Vec<_>>()),
        )
    }
}

impl Serialize for LevelPartition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            level: usize,
            blocks: &'a [Vec<VertexAddress>],
        }
        Repr {
            level: self.level,
            blocks: &self.blocks,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LevelPartition {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            level: usize,
            blocks: Vec<Vec<VertexAddress>>,
        }
        let repr = Repr::deserialize(de)?;
        LevelPartition::new(repr.level, repr.blocks).map_err(serde::de::Error::custom)
    }
}

/// Result of a truncated metric computation: the exact value together with
/// how it was reached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncatedDistance {
    /// `1/2^k` for the deepest agreeing level `k`; `1` when none agrees.
    pub value: BigRational,
    /// Deepest level at which the two objects coincide, if any.
    pub agreed_level: Option<usize>,
    /// True when the objects coincide through the whole truncation depth,
    /// so the true distance is only bounded above by `value`.
    pub equal_at_truncation: bool,
}

impl Serialize for TruncatedDistance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("TruncatedDistance", 4)?;
        st.serialize_field("rational", &crate::ratio::rational_string(&self.value))?;
        st.serialize_field("decimal", &crate::ratio::rational_f64(&self.value))?;
        st.serialize_field("agreed_level", &self.agreed_level)?;
        st.serialize_field("equal_at_truncation", &self.equal_at_truncation)?;
        st.end()
    }
}

impl TruncatedDistance {
    pub(crate) fn from_scan(first_mismatch: Option<usize>, depth: usize) -> TruncatedDistance {
        match first_mismatch {
            Some(0) => TruncatedDistance {
                value: BigRational::from_integer(1.into()),
                agreed_level: None,
                equal_at_truncation: false,
            },
            Some(k) => TruncatedDistance {
                value: half_pow(k - 1),
                agreed_level: Some(k - 1),
                equal_at_truncation: false,
            },
            None => TruncatedDistance {
                value: half_pow(depth),
                agreed_level: Some(depth),
                equal_at_truncation: true,
            },
        }
    }
}

/// Distance of two projective sequences of level partitions: `1/2^k` for the
/// deepest common level `k` on which they coincide. Agreement is downward
/// closed for orbit partitions, so the scan stops at the first mismatch.
pub fn partition_distance(
    p: &[LevelPartition],
    q: &[LevelPartition],
) -> Result<TruncatedDistance> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::PreconditionViolated(
            "partition sequences must contain level 0".into(),
        ));
    }
    let depth = (p.len() - 1).min(q.len() - 1);
    for (i, (pi, qi)) in p.iter().zip(q).enumerate() {
        if pi.level() != i || qi.level() != i {
            return Err(Error::PreconditionViolated(
                "partition sequences must be indexed by level starting at 0".into(),
            ));
        }
    }
    let first_mismatch = (0..=depth).find(|&k| p[k] != q[k]);
    Ok(TruncatedDistance::from_scan(first_mismatch, depth))
}

/// Searches for a small generator set whose orbit partition on the target's
/// level equals the target; `None` when no subgroup of the ambient realizes
/// it.
///
/// The subgroup of all elements preserving every block setwise is the unique
/// maximal candidate: the target is realizable if and only if that
/// subgroup's orbits equal the target. A witness of size at most `|L_k|` is
/// then extracted greedily.
pub fn find_witness(
    group: &TruncatedWreathGroup,
    target: &LevelPartition,
    order_cap: usize,
) -> Result<Option<GeneratedSubgroup>> {
    let level = target.level();
    if level > group.depth() {
        return Err(Error::DepthExceeded {
            requested: level,
            depth: group.depth(),
        });
    }
    if !target.covers_level(group.arity()) {
        return Err(Error::PreconditionViolated(
            "target partition does not cover its level".into(),
        ));
    }
    let full = group.full_subgroup(order_cap).enumerate()?;
    let preserving: Vec<&FinitaryAutomorphism> = full
        .elements()
        .expect("just enumerated")
        .iter()
        .filter(|g| {
            target.blocks().iter().all(|block| {
                block
                    .iter()
                    .all(|v| block.binary_search(&g.apply(v)).is_ok())
            })
        })
        .collect();

    let maximal = GeneratedSubgroup {
        ambient: *group,
        generators: preserving.iter().map(|g| (*g).clone()).collect(),
        elements: None,
        order_cap,
    };
    if maximal.orbits(level)? != *target {
        return Ok(None);
    }

    // Greedy reduction: keep only elements that merge orbits still split.
    let mut witness: Vec<FinitaryAutomorphism> = Vec::new();
    loop {
        let current = GeneratedSubgroup::new(*group, witness.clone(), order_cap)?;
        let orbits = current.orbits(level)?;
        if orbits == *target {
            return Ok(Some(current));
        }
        let progress = preserving.iter().find(|g| {
            orbits.blocks().iter().any(|block| {
                block
                    .iter()
                    .any(|v| orbits.block_containing(&g.apply(v)) != Some(block.as_slice()))
            })
        });
        match progress {
            Some(g) => witness.push((*g).clone()),
            None => return Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autom::seeded_rng;
    use proptest::prelude::*;

    fn d2() -> Arity {
        Arity::new(2).unwrap()
    }

    fn d3() -> Arity {
        Arity::new(3).unwrap()
    }

    fn addr(s: &str) -> VertexAddress {
        s.parse().unwrap()
    }

    fn sym(d: Arity, n: usize) -> TruncatedWreathGroup {
        TruncatedWreathGroup::new(d, n, Flavor::Symmetric).unwrap()
    }

    fn alt(d: Arity, n: usize) -> TruncatedWreathGroup {
        TruncatedWreathGroup::new(d, n, Flavor::Alternating).unwrap()
    }

    fn swap_at(v: &str) -> FinitaryAutomorphism {
        FinitaryAutomorphism::elementary(d2(), addr(v), Permutation::transposition(d2(), 0, 1))
            .unwrap()
    }

    #[test]
    fn closed_form_orders() {
        assert_eq!(sym(d2(), 0).order(), BigUint::from(1u32));
        assert_eq!(sym(d2(), 1).order(), BigUint::from(2u32));
        assert_eq!(sym(d2(), 2).order(), BigUint::from(8u32));
        assert_eq!(sym(d2(), 3).order(), BigUint::from(128u32));
        assert_eq!(alt(d3(), 2).order(), BigUint::from(81u32));
    }

    #[test]
    fn enumeration_matches_closed_form() {
        for group in [sym(d2(), 1), sym(d2(), 2), sym(d2(), 3), alt(d3(), 1), alt(d3(), 2)] {
            let enumerated = group.full_subgroup(DEFAULT_ORDER_CAP).enumerate().unwrap();
            assert_eq!(
                BigUint::from(enumerated.order().unwrap()),
                group.order(),
                "group {:?}",
                group
            );
        }
    }

    #[test]
    fn enumerate_empty_generators() {
        let s = GeneratedSubgroup::new(sym(d2(), 2), vec![], 100).unwrap();
        assert_eq!(s.enumerate().unwrap().order(), Some(1));
    }

    #[test]
    fn enumerate_cyclic_three() {
        let g = FinitaryAutomorphism::elementary(
            d3(),
            VertexAddress::root(),
            Permutation::new(vec![1, 2, 0]).unwrap(),
        )
        .unwrap();
        let s = GeneratedSubgroup::new(alt(d3(), 1), vec![g], 100).unwrap();
        assert_eq!(s.enumerate().unwrap().order(), Some(3));
    }

    #[test]
    fn enumerate_is_idempotent() {
        let s = sym(d2(), 2).full_subgroup(100).enumerate().unwrap();
        assert_eq!(s.enumerate().unwrap(), s);
    }

    #[test]
    fn order_cap_fails_loudly() {
        let err = sym(d2(), 3).full_subgroup(50).enumerate();
        assert!(matches!(err, Err(Error::OrderCapExceeded { cap: 50, .. })));
    }

    #[test]
    fn orbits_examples() {
        let trivial = GeneratedSubgroup::trivial(sym(d2(), 2));
        assert_eq!(trivial.orbits(2).unwrap(), LevelPartition::singletons(d2(), 2));

        let full = sym(d2(), 2).full_subgroup(100);
        assert_eq!(full.orbits(2).unwrap(), LevelPartition::one_block(d2(), 2));

        let s = GeneratedSubgroup::new(sym(d2(), 2), vec![swap_at("0")], 100).unwrap();
        let expected = LevelPartition::new(
            2,
            [
                vec![addr("00"), addr("01")],
                vec![addr("10")],
                vec![addr("11")],
            ],
        )
        .unwrap();
        assert_eq!(s.orbits(2).unwrap(), expected);
    }

    #[test]
    fn orbit_blocks_project_to_parent_blocks() {
        for seed in 0..30u64 {
            let mut rng = seeded_rng(seed);
            let group = sym(d2(), 3);
            let gens = vec![group.haar(&mut rng), group.haar(&mut rng)];
            let s = GeneratedSubgroup::new(group, gens, 1000).unwrap();
            for level in 0..3 {
                let coarse = s.orbits(level).unwrap();
                let fine = s.orbits(level + 1).unwrap();
                for block in fine.blocks() {
                    let parents: BTreeSet<VertexAddress> =
                        block.iter().map(|v| v.parent().unwrap()).collect();
                    let first = coarse.block_containing(parents.iter().next().unwrap());
                    for p in &parents {
                        assert_eq!(coarse.block_containing(p), first);
                    }
                }
            }
        }
    }

    #[test]
    fn partition_distance_examples() {
        let p = vec![
            LevelPartition::one_block(d2(), 0),
            LevelPartition::singletons(d2(), 1),
        ];
        let q = vec![
            LevelPartition::one_block(d2(), 0),
            LevelPartition::one_block(d2(), 1),
        ];
        let dist = partition_distance(&p, &q).unwrap();
        assert_eq!(dist.value, BigRational::from_integer(1.into()));
        assert_eq!(dist.agreed_level, Some(0));
        assert!(!dist.equal_at_truncation);

        let dist = partition_distance(&p, &p).unwrap();
        assert!(dist.equal_at_truncation);
        assert_eq!(dist.value, half_pow(1));

        // Orbit partitions of two concrete subgroups, checked against a
        // direct level-by-level comparison.
        let s1 = GeneratedSubgroup::new(sym(d2(), 2), vec![swap_at("0")], 100).unwrap();
        let s2 = GeneratedSubgroup::new(sym(d2(), 2), vec![swap_at("1")], 100).unwrap();
        let p1 = s1.orbit_sequence(2).unwrap();
        let p2 = s2.orbit_sequence(2).unwrap();
        let k = (0..=2)
            .take_while(|&k| p1[k] == p2[k])
            .last()
            .unwrap();
        assert_eq!(k, 1); // they agree on levels 0 and 1, split differently at 2
        let dist = partition_distance(&p1, &p2).unwrap();
        assert_eq!(dist.value, half_pow(1));
    }

    #[test]
    fn fixed_vertices_examples() {
        let trivial = GeneratedSubgroup::trivial(sym(d2(), 2));
        assert_eq!(trivial.fixed_vertices(2).unwrap(), LevelSet::full(d2(), 2));

        let full = sym(d2(), 2).full_subgroup(100);
        assert!(full.fixed_vertices(1).unwrap().is_empty());
        assert!(full.fixed_vertices(2).unwrap().is_empty());

        let s = GeneratedSubgroup::new(sym(d2(), 2), vec![swap_at("0")], 100).unwrap();
        assert_eq!(
            s.fixed_vertices(2).unwrap(),
            LevelSet::new(2, [addr("10"), addr("11")]).unwrap()
        );
    }

    #[test]
    fn level_stabilizer_examples() {
        let g = sym(d2(), 2);
        let whole = level_stabilizer_gens(&g, 0).unwrap().enumerate().unwrap();
        assert_eq!(whole.order(), Some(8));

        let trivial = level_stabilizer_gens(&g, 2).unwrap().enumerate().unwrap();
        assert_eq!(trivial.order(), Some(1));

        let stab1 = level_stabilizer_gens(&g, 1).unwrap().enumerate().unwrap();
        assert_eq!(stab1.order(), Some(4));
        // Oracle: filter the full enumeration for elements fixing level 1.
        let full = g.full_subgroup(100).enumerate().unwrap();
        let fixing = full
            .elements()
            .unwrap()
            .iter()
            .filter(|el| {
                VertexAddress::all_at_level(d2(), 1)
                    .iter()
                    .all(|v| el.fixes(v))
            })
            .count();
        assert_eq!(fixing, 4);
    }

    #[test]
    fn level_stabilizer_is_normal() {
        let g = sym(d2(), 2);
        let stab = level_stabilizer_gens(&g, 1).unwrap().enumerate().unwrap();
        for gen in g.elementary_generators() {
            for el in stab.elements().unwrap() {
                let conj = el.conjugate(&gen).unwrap();
                assert!(stab.contains_element(&conj).unwrap());
            }
        }
    }

    #[test]
    fn rigid_stabilizer_examples() {
        let g = sym(d2(), 2);
        let all = rigid_stabilizer_gens(&g, &LevelSet::full(d2(), 0))
            .unwrap()
            .enumerate()
            .unwrap();
        assert_eq!(all.order(), Some(8));

        // d=3 alternating, V = {"0"}: the portrait is supported inside the
        // subtree at "0", so only the vertex permutation at "0" is free.
        let ga = alt(d3(), 2);
        let rst = rigid_stabilizer_gens(&ga, &LevelSet::new(1, [addr("0")]).unwrap())
            .unwrap()
            .enumerate()
            .unwrap();
        assert_eq!(rst.order(), Some(3));
        // Oracle: filter the enumerated 81-element group by portrait support.
        let full = ga.full_subgroup(1000).enumerate().unwrap();
        let supported = full
            .elements()
            .unwrap()
            .iter()
            .filter(|el| el.supported_in(&addr("0")))
            .count();
        assert_eq!(supported, 3);
    }

    #[test]
    fn rigid_stabilizers_of_disjoint_sets_commute() {
        let g = sym(d2(), 3);
        let rst0 = rigid_stabilizer_gens(&g, &LevelSet::new(1, [addr("0")]).unwrap())
            .unwrap()
            .enumerate()
            .unwrap();
        let rst1 = rigid_stabilizer_gens(&g, &LevelSet::new(1, [addr("1")]).unwrap())
            .unwrap()
            .enumerate()
            .unwrap();
        for a in rst0.elements().unwrap() {
            for b in rst1.elements().unwrap() {
                assert_eq!(a.compose(b).unwrap(), b.compose(a).unwrap());
            }
        }
    }

    #[test]
    fn derived_subgroup_examples() {
        // Abelian: the level-1 stabilizer of S_2^wr(2) is (Z/2)^2.
        let g = sym(d2(), 2);
        let abelian = level_stabilizer_gens(&g, 1).unwrap().enumerate().unwrap();
        assert_eq!(abelian.derived_subgroup().unwrap().order(), Some(1));

        // S_2^wr(2) is dihedral of order 8; its derived subgroup has order 2.
        let full = g.full_subgroup(100).enumerate().unwrap();
        let derived = full.derived_subgroup().unwrap();
        assert_eq!(derived.order(), Some(2));

        // Oracle: enumerate all commutators of the 8-element group.
        let mut comms = BTreeSet::new();
        for a in full.elements().unwrap() {
            for b in full.elements().unwrap() {
                comms.insert(a.commutator(b).unwrap());
            }
        }
        for c in &comms {
            assert!(derived.contains_element(c).unwrap());
        }

        // Derived of derived is trivial (metabelian).
        assert_eq!(derived.derived_subgroup().unwrap().order(), Some(1));
    }

    #[test]
    fn derived_subgroup_is_normal_with_abelian_quotient() {
        let full = sym(d2(), 2).full_subgroup(100).enumerate().unwrap();
        let derived = full.derived_subgroup().unwrap();
        for a in full.elements().unwrap() {
            for b in full.elements().unwrap() {
                // Normality and abelian quotient both reduce to commutator
                // membership over all pairs.
                assert!(derived
                    .contains_element(&a.commutator(b).unwrap())
                    .unwrap());
            }
            for h in derived.elements().unwrap() {
                assert!(derived.contains_element(&h.conjugate(a).unwrap()).unwrap());
            }
        }
    }

    #[test]
    fn pointwise_stabilizer_examples() {
        let full = sym(d2(), 2).full_subgroup(100).enumerate().unwrap();

        let all = full.pointwise_stabilizer(&LevelSet::empty(2)).unwrap();
        assert_eq!(all.order(), Some(8));

        // Definitional roundtrip: stabilizing the fixed vertices changes
        // nothing.
        let s = GeneratedSubgroup::new(sym(d2(), 2), vec![swap_at("0")], 100)
            .unwrap()
            .enumerate()
            .unwrap();
        let fixed = s.fixed_vertices(2).unwrap();
        let stab = s.pointwise_stabilizer(&fixed).unwrap();
        assert_eq!(stab.order(), s.order());

        // Orbit-stabilizer: the level-2 orbit of "00" has size 4 in the
        // transitive 8-element group, so the stabilizer has order 2.
        let stab00 = full
            .pointwise_stabilizer(&LevelSet::new(2, [addr("00")]).unwrap())
            .unwrap();
        assert_eq!(stab00.order(), Some(2));
    }

    #[test]
    fn setwise_stabilizer_examples() {
        let full = sym(d2(), 2).full_subgroup(100).enumerate().unwrap();

        let whole_level = full.setwise_stabilizer(&LevelSet::full(d2(), 2)).unwrap();
        assert_eq!(whole_level.order(), Some(8));

        let singleton = LevelSet::new(2, [addr("00")]).unwrap();
        assert_eq!(
            full.setwise_stabilizer(&singleton).unwrap().order(),
            full.pointwise_stabilizer(&singleton).unwrap().order()
        );

        let diagonal = LevelSet::new(2, [addr("00"), addr("11")]).unwrap();
        let stab = full.setwise_stabilizer(&diagonal).unwrap();
        // Only the identity and the simultaneous swap at root, "0" and "1"
        // preserve the diagonal pair.
        assert_eq!(stab.order(), Some(2));
    }

    #[test]
    fn find_witness_examples() {
        let g = sym(d2(), 2);

        let singles = LevelPartition::singletons(d2(), 2);
        let w = find_witness(&g, &singles, 1000).unwrap().unwrap();
        assert!(w.generators().is_empty());

        let block1 = LevelPartition::one_block(d2(), 1);
        let w = find_witness(&g, &block1, 1000).unwrap().unwrap();
        assert_eq!(w.orbits(1).unwrap(), block1);
        assert!(w.generators().len() <= 2);

        let target = LevelPartition::new(
            2,
            [
                vec![addr("00"), addr("01")],
                vec![addr("10")],
                vec![addr("11")],
            ],
        )
        .unwrap();
        let w = find_witness(&g, &target, 1000).unwrap().unwrap();
        assert_eq!(w.orbits(2).unwrap(), target);

        // {"00","11"} cannot be an orbit without merging {"01"} and {"10"}.
        let unrealizable = LevelPartition::new(
            2,
            [
                vec![addr("00"), addr("11")],
                vec![addr("01")],
                vec![addr("10")],
            ],
        )
        .unwrap();
        assert!(find_witness(&g, &unrealizable, 1000).unwrap().is_none());
    }

    #[test]
    fn index_bound_finite_analogue() {
        // Ambient: G = S_2^wr(3); K = Stab(L_1) has index 2 with transversal
        // {id, root swap} supported above level 1. For every n >= 1 the
        // index of K cap Gamma_n in Gamma_n stays <= 2.
        let g = sym(d2(), 3);
        let full = g.full_subgroup(1000).enumerate().unwrap();
        let k = level_stabilizer_gens(&g, 1).unwrap().enumerate().unwrap();
        let index = full.order().unwrap() / k.order().unwrap();
        assert_eq!(index, 2);
        for n in 1..=3 {
            let gamma_n: Vec<_> = full
                .elements()
                .unwrap()
                .iter()
                .filter(|el| el.depth() <= n)
                .collect();
            let k_cap: Vec<_> = k
                .elements()
                .unwrap()
                .iter()
                .filter(|el| el.depth() <= n)
                .collect();
            assert!(gamma_n.len() <= index * k_cap.len());
        }
    }

    #[test]
    fn partition_serialization() {
        let p = LevelPartition::new(
            2,
            [
                vec![addr("10")],
                vec![addr("01"), addr("00")],
                vec![addr("11")],
            ],
        )
        .unwrap();
        let json = serde_json::to_value(&p).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"level": 2, "blocks": [["00","01"],["10"],["11"]]})
        );
    }

    proptest! {
        #[test]
        fn orbits_and_fixed_vertices_consistent(seed in 0u64..100) {
            let mut rng = seeded_rng(seed);
            let group = sym(d2(), 3);
            let gens = vec![group.haar(&mut rng)];
            let s = GeneratedSubgroup::new(group, gens, 1000).unwrap();
            let orbits = s.orbits(3).unwrap();
            let fixed = s.fixed_vertices(3).unwrap();
            // Fixed vertices are exactly the singleton orbit members that
            // every generator fixes; here one generator, so singleton orbits
            // coincide with fixed vertices.
            let singles: Vec<VertexAddress> = orbits
                .blocks()
                .iter()
                .filter(|b| b.len() == 1)
                .map(|b| b[0].clone())
                .collect();
            prop_assert_eq!(fixed.members().to_vec(), singles);
        }
    }
}
