//! Closed boundary subsets as level-consistent vertex sets, the
//! red/green/blue coloring, the Hausdorff metric via levels, decomposition of
//! the tree with respect to a closed set, and generalized congruence / rigid
//! level stabilizers.
//!
//! A [`ClosedSetApprox`] at depth `N` represents the clopen set
//! `union of Sh(v) for v in C_N`; every operation states its truncation
//! semantics explicitly.


use num::{BigInt, BigRational};
use serde::{Deserialize, Serialize};

use crate::autom::FinitaryAutomorphism;
use crate::error::{Error, Result};
use crate::groups::{
    rigid_stabilizer_gens, GeneratedSubgroup, TruncatedDistance, TruncatedWreathGroup,
    DEFAULT_ORDER_CAP,
};
use crate::tree::{Arity, LevelSet, VertexAddress};

/// Depth-`N` approximation of a closed boundary subset: per level, the
/// vertices whose shadow meets the set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosedSetApprox {
    d: Arity,
    depth: usize,
    /// `levels[k]` is `C_k`, sorted; `v` is in `C_k` iff some child of `v`
    /// is in `C_{k+1}`.
    levels: Vec<Vec<VertexAddress>>,
}

impl ClosedSetApprox {
    /// Builds the approximation from its deepest level; shallower levels are
    /// the ancestor sets.
    pub fn from_leaves(
        d: Arity,
        depth: usize,
        leaves: impl IntoIterator<Item = VertexAddress>,
    ) -> Result<ClosedSetApprox> {
        let mut level: Vec<VertexAddress> = leaves.into_iter().collect();
        level.sort();
        level.dedup();
        for v in &level {
            if v.level() != depth {
                return Err(Error::PreconditionViolated(format!(
                    "leaf {v} is not on level {depth}"
                )));
            }
            for &digit in v.digits() {
                if digit as usize >= d.get() {
                    return Err(Error::DigitOutOfRange { digit, d: d.get() });
                }
            }
        }
        let mut levels = vec![level];
        for _ in 0..depth {
            let prev = levels.last().unwrap();
            let mut parents: Vec<VertexAddress> =
                prev.iter().map(|v| v.parent().unwrap()).collect();
            parents.sort();
            parents.dedup();
            levels.push(parents);
        }
        levels.reverse();
        Ok(ClosedSetApprox { d, depth, levels })
    }

    /// The union of shadows of arbitrary-level vertices, truncated at `depth`.
    pub fn from_shadows(
        d: Arity,
        depth: usize,
        vertices: impl IntoIterator<Item = VertexAddress>,
    ) -> Result<ClosedSetApprox> {
        let mut leaves = Vec::new();
        for v in vertices {
            leaves.extend(
                crate::tree::shadow_at_level(&v, d, depth)?
                    .members()
                    .iter()
                    .cloned(),
            );
        }
        ClosedSetApprox::from_leaves(d, depth, leaves)
    }

    pub fn empty(d: Arity, depth: usize) -> ClosedSetApprox {
        ClosedSetApprox {
            d,
            depth,
            levels: vec![Vec::new(); depth + 1],
        }
    }

    pub fn full(d: Arity, depth: usize) -> ClosedSetApprox {
        let levels = (0..=depth)
            .map(|k| VertexAddress::all_at_level(d, k))
            .collect();
        ClosedSetApprox { d, depth, levels }
    }

    /// The single truncated ray through `leaf`.
    pub fn ray(d: Arity, leaf: &VertexAddress) -> Result<ClosedSetApprox> {
        ClosedSetApprox::from_leaves(d, leaf.level(), [leaf.clone()])
    }

    /// Deterministic closed set of measure close to `r`: a greedy d-adic
    /// expansion including leftmost shadows level by level. For `r` whose
    /// expansion does not terminate by `depth`, the set is not clopen at any
    /// visible level.
    pub fn with_measure(d: Arity, depth: usize, r: &BigRational) -> Result<ClosedSetApprox> {
        let zero = BigRational::from_integer(0.into());
        let one = BigRational::from_integer(1.into());
        if r < &zero || r > &one {
            return Err(Error::PreconditionViolated(format!(
                "target measure {r} outside [0, 1]"
            )));
        }
        if r == &one {
            return Ok(ClosedSetApprox::full(d, depth));
        }
        let mut leaves: Vec<VertexAddress> = Vec::new();
        let mut active = VertexAddress::root();
        let mut remainder = r.clone();
        let d_rat = BigRational::from_integer(BigInt::from(d.get()));
        for _ in 0..depth {
            if remainder == zero {
                break;
            }
            let scaled = &remainder * &d_rat;
            let whole = scaled.floor();
            let count: usize = usize::try_from(&whole.to_integer()).expect("0 <= count < d");
            remainder = scaled - whole;
            for y in 0..count {
                let full_child = active.child(y as u8);
                leaves.extend(
                    crate::tree::shadow_at_level(&full_child, d, depth)?
                        .members()
                        .iter()
                        .cloned(),
                );
            }
            active = active.child(count as u8);
        }
        if remainder > zero {
            // The active vertex carries the unresolved remainder: its shadow
            // meets the set, marked via its leftmost continuation.
            let mut v = active;
            while v.level() < depth {
                v = v.child(0);
            }
            leaves.push(v);
        }
        ClosedSetApprox::from_leaves(d, depth, leaves)
    }

    pub fn arity(&self) -> Arity {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `C_k`, sorted.
    pub fn level(&self, k: usize) -> &[VertexAddress] {
        &self.levels[k]
    }

    pub fn leaves(&self) -> &[VertexAddress] {
        &self.levels[self.depth]
    }

    pub fn is_empty(&self) -> bool {
        self.levels[self.depth].is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.levels[self.depth].len() == self.d.level_size(self.depth)
    }

    pub fn contains(&self, v: &VertexAddress) -> bool {
        v.level() <= self.depth && self.levels[v.level()].binary_search(v).is_ok()
    }

    /// Exact measure of the represented clopen set: `|C_N| / d^N`.
    pub fn measure(&self) -> BigRational {
        BigRational::new(
            BigInt::from(self.levels[self.depth].len()),
            BigInt::from(self.d.get()).pow(self.depth as u32),
        )
    }

    /// Level sets mapped by the automorphism; consistency is preserved since
    /// automorphisms respect the prefix relation.
    pub fn translate(&self, g: &FinitaryAutomorphism) -> Result<ClosedSetApprox> {
        if g.arity() != self.d {
            return Err(Error::ArityMismatch(g.arity().get(), self.d.get()));
        }
        if g.depth() > self.depth {
            return Err(Error::DepthExceeded {
                requested: g.depth(),
                depth: self.depth,
            });
        }
        ClosedSetApprox::from_leaves(
            self.d,
            self.depth,
            self.levels[self.depth].iter().map(|v| g.apply(v)),
        )
    }

    /// True when no green vertex exists on level `k` (then none below
    /// either). At `k = depth` this is vacuously true: the approximation
    /// itself is clopen.
    pub fn is_clopen_at_depth(&self, k: usize) -> Result<bool> {
        if k > self.depth {
            return Err(Error::DepthExceeded {
                requested: k,
                depth: self.depth,
            });
        }
        let coloring = coloring_from_set(self);
        Ok(VertexAddress::all_at_level(self.d, k)
            .iter()
            .all(|v| coloring.color(v) != Color::Green))
    }
}

impl Serialize for ClosedSetApprox {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            d: usize,
            depth: usize,
            levels: &'a [Vec<VertexAddress>],
        }
        Repr {
            d: self.d.get(),
            depth: self.depth,
            levels: &self.levels,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ClosedSetApprox {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            d: usize,
            depth: usize,
            levels: Vec<Vec<VertexAddress>>,
        }
        let repr = Repr::deserialize(de)?;
        let d = Arity::new(repr.d).map_err(serde::de::Error::custom)?;
        if repr.levels.len() != repr.depth + 1 {
            return Err(serde::de::Error::custom(format!(
                "expected {} level sets, got {}",
                repr.depth + 1,
                repr.levels.len()
            )));
        }
        let built =
            ClosedSetApprox::from_leaves(d, repr.depth, repr.levels[repr.depth].iter().cloned())
                .map_err(serde::de::Error::custom)?;
        for (k, level) in repr.levels.iter().enumerate() {
            let mut sorted = level.clone();
            sorted.sort();
            if sorted != built.levels[k] {
                return Err(serde::de::Error::custom(format!(
                    "level {k} is inconsistent with the deepest level"
                )));
            }
        }
        Ok(built)
    }
}

/// Vertex colors encoding a closed set: red shadows lie inside the set, blue
/// shadows miss it, green vertices see both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Green,
    Blue,
}

/// A 3-coloring of all vertices of levels `0..=depth`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    d: Arity,
    depth: usize,
    /// Colors per level, indexed lexicographically within the level.
    colors: Vec<Vec<Color>>,
}

impl Coloring {
    pub fn arity(&self) -> Arity {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn color(&self, v: &VertexAddress) -> Color {
        self.colors[v.level()][vertex_index(v, self.d)]
    }

    /// The translated coloring: the new color of `v` is the old color of the
    /// preimage of `v`.
    pub fn translate(&self, g: &FinitaryAutomorphism) -> Coloring {
        let mut colors = Vec::with_capacity(self.depth + 1);
        for level in 0..=self.depth {
            let mut row = vec![Color::Blue; self.d.level_size(level)];
            for v in VertexAddress::all_at_level(self.d, level) {
                row[vertex_index(&v, self.d)] = self.color(&g.preimage(&v));
            }
            colors.push(row);
        }
        Coloring {
            d: self.d,
            depth: self.depth,
            colors,
        }
    }
}

fn vertex_index(v: &VertexAddress, d: Arity) -> usize {
    v.digits()
        .iter()
        .fold(0usize, |acc, &y| acc * d.get() + y as usize)
}

/// Colors every vertex of levels `0..=depth`: red if its whole depth-N
/// shadow lies in the set, blue if none of it does, green otherwise.
pub fn coloring_from_set(set: &ClosedSetApprox) -> Coloring {
    let d = set.arity();
    let depth = set.depth();
    // Count C_N-descendants per vertex, bottom up.
    let mut counts: Vec<Vec<usize>> = Vec::with_capacity(depth + 1);
    let mut leaf_row = vec![0usize; d.level_size(depth)];
    for v in set.leaves() {
        leaf_row[vertex_index(v, d)] = 1;
    }
    counts.push(leaf_row);
    for level in (0..depth).rev() {
        let child_row = &counts[counts.len() - 1];
        let mut row = vec![0usize; d.level_size(level)];
        for (i, slot) in row.iter_mut().enumerate() {
            *slot = (0..d.get()).map(|y| child_row[i * d.get() + y]).sum();
        }
        counts.push(row);
    }
    counts.reverse();

    let colors = counts
        .iter()
        .enumerate()
        .map(|(level, row)| {
            let full = d.level_size(depth - level);
            row.iter()
                .map(|&c| {
                    if c == full {
                        Color::Red
                    } else if c == 0 {
                        Color::Blue
                    } else {
                        Color::Green
                    }
                })
                .collect()
        })
        .collect();
    Coloring { d, depth, colors }
}

/// `1/2^k` where `k` is the deepest level on which the two approximations
/// coincide; flagged when they agree through the whole truncation.
pub fn hausdorff_distance_approx(
    c1: &ClosedSetApprox,
    c2: &ClosedSetApprox,
) -> Result<TruncatedDistance> {
    if c1.arity() != c2.arity() {
        return Err(Error::ArityMismatch(c1.arity().get(), c2.arity().get()));
    }
    if c1.depth() != c2.depth() {
        return Err(Error::PreconditionViolated(format!(
            "depth mismatch: {} vs {}",
            c1.depth(),
            c2.depth()
        )));
    }
    if c1.is_empty() || c2.is_empty() {
        return Err(Error::PreconditionViolated(
            "hausdorff distance requires nonempty sets".into(),
        ));
    }
    let first_mismatch = (0..=c1.depth()).find(|&k| c1.level(k) != c2.level(k));
    Ok(TruncatedDistance::from_scan(first_mismatch, c1.depth()))
}

/// Minimum over all elements of the enumerated group of the Hausdorff
/// distance between the translated first set and the second.
pub fn class_distance_at_depth(
    c1: &ClosedSetApprox,
    c2: &ClosedSetApprox,
    group: &GeneratedSubgroup,
) -> Result<TruncatedDistance> {
    let elements = group.elements().ok_or_else(|| {
        Error::PreconditionViolated("class distance requires an enumerated group".into())
    })?;
    let mut best: Option<TruncatedDistance> = None;
    for g in elements {
        let dist = hausdorff_distance_approx(&c1.translate(g)?, c2)?;
        let better = match &best {
            None => true,
            Some(b) => dist.value < b.value || (dist.equal_at_truncation && !b.equal_at_truncation),
        };
        if better {
            best = Some(dist);
        }
    }
    best.ok_or_else(|| Error::PreconditionViolated("empty group enumeration".into()))
}

/// One tree of the decomposition with respect to a closed set: the spine of
/// the first `attach_level` levels of `T_C` together with the subtrees
/// hanging off the fixed vertices at that level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubtreeDescriptor {
    pub attach_level: usize,
    /// `F_i`: the set-tree vertices at the attach level.
    pub root_set: LevelSet,
    /// Roots of the hanging components: children of `F_i` outside the set
    /// tree. For the degenerate whole-tree descriptor this is the root.
    pub hanging_roots: Vec<VertexAddress>,
    /// Set when the attach level sits at the truncation depth, where the
    /// hanging structure below is not visible.
    pub at_truncation: bool,
}

impl SubtreeDescriptor {
    /// Membership of a vertex in this tree of the decomposition.
    pub fn contains_vertex(&self, w: &VertexAddress, set: &ClosedSetApprox) -> bool {
        if w.level() < self.attach_level {
            return set.contains(w);
        }
        if w.level() == self.attach_level && self.root_set.contains(w) {
            return true;
        }
        self.hanging_roots.iter().any(|c| c.is_prefix_of(w))
    }

    /// True when the vertex lies in a hanging component (off the spine).
    pub fn in_hanging_part(&self, w: &VertexAddress) -> bool {
        self.hanging_roots.iter().any(|c| c.is_prefix_of(w))
    }

    /// The level-`n` vertices of the hanging components: the boundary piece
    /// of this tree at truncation depth.
    pub fn boundary_piece(&self, d: Arity, n: usize) -> Result<LevelSet> {
        let mut members = Vec::new();
        for c in &self.hanging_roots {
            members.extend(
                crate::tree::shadow_at_level(c, d, n)?
                    .members()
                    .iter()
                    .cloned(),
            );
        }
        LevelSet::new(n, members)
    }
}

/// Decomposes the tree with respect to a closed set: descriptors for the
/// trees hanging off each level of the set tree. The empty set yields the
/// single whole-tree descriptor.
pub fn decompose(set: &ClosedSetApprox) -> Vec<SubtreeDescriptor> {
    let d = set.arity();
    if set.is_empty() {
        return vec![SubtreeDescriptor {
            attach_level: 0,
            root_set: LevelSet::empty(0),
            hanging_roots: vec![VertexAddress::root()],
            at_truncation: false,
        }];
    }
    let mut out = Vec::with_capacity(set.depth() + 1);
    for i in 0..=set.depth() {
        let root_set = LevelSet::new(i, set.level(i).iter().cloned()).expect("level members");
        let at_truncation = i == set.depth();
        let hanging_roots = if at_truncation {
            Vec::new()
        } else {
            set.level(i)
                .iter()
                .flat_map(|v| v.children(d))
                .filter(|c| !set.contains(c))
                .collect()
        };
        out.push(SubtreeDescriptor {
            attach_level: i,
            root_set,
            hanging_roots,
            at_truncation,
        });
    }
    out
}

/// The decomposition in its other spelling: the disjoint subtrees hanging
/// off the set tree, as `(attach level, component root)` pairs. Every
/// vertex outside the set tree lies below exactly one root.
pub fn hanging_subtrees(set: &ClosedSetApprox) -> Vec<(usize, VertexAddress)> {
    decompose(set)
        .into_iter()
        .flat_map(|descriptor| {
            descriptor
                .hanging_roots
                .into_iter()
                .map(move |root| (descriptor.attach_level, root))
        })
        .collect()
}

/// Per-tree stabilizer depths `m_i`, indexed by attach level; the last entry
/// repeats for deeper attach levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongruenceSpec {
    depths: Vec<usize>,
}

impl CongruenceSpec {
    pub fn new(depths: Vec<usize>) -> Result<CongruenceSpec> {
        if depths.is_empty() {
            return Err(Error::PreconditionViolated(
                "congruence spec needs at least one depth".into(),
            ));
        }
        Ok(CongruenceSpec { depths })
    }

    pub fn uniform(m: usize) -> CongruenceSpec {
        CongruenceSpec { depths: vec![m] }
    }

    pub fn depth_at(&self, attach_level: usize) -> usize {
        *self
            .depths
            .get(attach_level)
            .unwrap_or_else(|| self.depths.last().expect("nonempty"))
    }
}

/// A generalized stabilizer together with honest truncation accounting.
#[derive(Debug, Clone)]
pub struct GeneralizedStabilizer {
    pub subgroup: GeneratedSubgroup,
    /// Attach levels whose stabilized level lies below the set truncation,
    /// so their factor is trivial here by ignorance, not by computation.
    pub truncated_attach_levels: Vec<usize>,
}

fn stabilized_vertices(
    set: &ClosedSetApprox,
    descriptor: &SubtreeDescriptor,
    m: usize,
    group_depth: usize,
) -> Vec<VertexAddress> {
    // Level m of the hanging tree bundle sits at tree level
    // attach_level + m, but never above the hanging roots themselves.
    let level = (descriptor.attach_level + m).max(descriptor.attach_level + 1);
    if level > group_depth {
        return Vec::new();
    }
    let d = set.arity();
    descriptor
        .hanging_roots
        .iter()
        .flat_map(|c| {
            crate::tree::shadow_at_level(c, d, level)
                .map(|s| s.members().to_vec())
                .unwrap_or_default()
        })
        .collect()
}

fn generalized_gens(
    set: &ClosedSetApprox,
    spec: &CongruenceSpec,
    group: &TruncatedWreathGroup,
    rigid: bool,
) -> Result<GeneralizedStabilizer> {
    if group.arity() != set.arity() {
        return Err(Error::ArityMismatch(group.arity().get(), set.arity().get()));
    }
    if set.depth() > group.depth() {
        return Err(Error::DepthExceeded {
            requested: set.depth(),
            depth: group.depth(),
        });
    }
    let mut gens = Vec::new();
    let mut truncated = Vec::new();
    for descriptor in decompose(set) {
        let i = descriptor.attach_level;
        let m = spec.depth_at(i);
        if i + m > set.depth() || descriptor.at_truncation {
            truncated.push(i);
        }
        let vertices = stabilized_vertices(set, &descriptor, m, group.depth());
        if vertices.is_empty() {
            continue;
        }
        let level = vertices[0].level();
        let level_set = LevelSet::new(level, vertices)?;
        if rigid {
            // Direct product of rigid vertex stabilizers under the level of
            // each hanging bundle.
            gens.extend(
                rigid_stabilizer_gens(group, &level_set)?
                    .generators()
                    .iter()
                    .cloned(),
            );
        } else {
            // Pointwise stabilizer of that level inside the hanging bundle:
            // elementary permutations everywhere at or below it.
            for v in level_set.iter() {
                for l in v.level()..group.depth() {
                    for u in crate::tree::shadow_at_level(v, group.arity(), l)?.iter() {
                        gens.extend(group.elementary_generators_at(u));
                    }
                }
            }
        }
    }
    gens.sort();
    gens.dedup();
    let subgroup = GeneratedSubgroup::new(*group, gens, DEFAULT_ORDER_CAP)?;
    Ok(GeneralizedStabilizer {
        subgroup,
        truncated_attach_levels: truncated,
    })
}

/// Direct sum over the decomposition trees of the pointwise stabilizers of
/// level `m_i` inside each tree, realized inside the ambient group. The
/// result fixes the set pointwise.
pub fn generalized_congruence_gens(
    set: &ClosedSetApprox,
    spec: &CongruenceSpec,
    group: &TruncatedWreathGroup,
) -> Result<GeneralizedStabilizer> {
    generalized_gens(set, spec, group, false)
}

/// The same construction with rigid level stabilizers per tree; contained in
/// the corresponding generalized congruence subgroup.
pub fn generalized_rigid_gens(
    set: &ClosedSetApprox,
    spec: &CongruenceSpec,
    group: &TruncatedWreathGroup,
) -> Result<GeneralizedStabilizer> {
    generalized_gens(set, spec, group, true)
}

/// The all-green spine of a non-clopen set: vertices `u_0..u_{N-1}` all
/// green (leftmost such path) extended by a set leaf under `u_{N-1}`.
/// `None` when the set is empty, full, or clopen within the truncation.
pub fn green_spine(set: &ClosedSetApprox) -> Option<Vec<VertexAddress>> {
    let depth = set.depth();
    if depth == 0 {
        return None;
    }
    let coloring = coloring_from_set(set);
    let greens_at = |level: usize| {
        VertexAddress::all_at_level(set.arity(), level)
            .into_iter()
            .find(|v| coloring.color(v) == Color::Green)
    };
    // Greens at level N-1 guarantee an all-green path from the root, since
    // ancestors of green vertices are green.
    let deepest_green = greens_at(depth - 1)?;
    let mut spine: Vec<VertexAddress> = (0..=deepest_green.level())
        .map(|k| deepest_green.prefix(k))
        .collect();
    debug_assert!(spine.iter().all(|v| coloring.color(v) == Color::Green));
    // Continue into the set: a leaf below the deepest green vertex.
    let leaf = set
        .leaves()
        .iter()
        .find(|leaf| deepest_green.is_prefix_of(leaf))?
        .clone();
    spine.push(leaf);
    Some(spine)
}

/// The deepest vertex of the green spine, continuing into the set at the
/// truncation level.
pub fn find_green_ray(set: &ClosedSetApprox) -> Option<VertexAddress> {
    green_spine(set).map(|spine| spine.last().cloned().expect("spine is nonempty"))
}
