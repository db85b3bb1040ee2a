//! Cross-module consistency against classical facts that the implementation
//! cannot trivially agree with itself on: abelianization orders of iterated
//! wreath products, orbit-stabilizer indices, and stabilizer coincidences
//! specific to the binary tree.

use treeirs::irs::{conjugation_orbit, fingerprint};
use treeirs::{
    level_stabilizer_gens, rigid_stabilizer_gens, shadow_at_level, Arity, Flavor, LevelSet,
    TruncatedWreathGroup, VertexAddress, DEFAULT_ORDER_CAP,
};

fn d2() -> Arity {
    Arity::new(2).unwrap()
}

fn d3() -> Arity {
    Arity::new(3).unwrap()
}

fn addr(s: &str) -> VertexAddress {
    s.parse().unwrap()
}

#[test]
fn derived_subgroup_orders_match_abelianizations() {
    // The abelianization of the depth-n binary wreath tower is (Z/2)^n, so
    // the derived subgroup has index 2^n.
    for n in 1..=3usize {
        let group = TruncatedWreathGroup::new(d2(), n, Flavor::Symmetric).unwrap();
        let full = group.full_subgroup(DEFAULT_ORDER_CAP).enumerate().unwrap();
        let derived = full.derived_subgroup().unwrap();
        assert_eq!(
            full.order().unwrap(),
            derived.order().unwrap() << n,
            "depth {n}"
        );
    }

    // For the depth-2 ternary alternating tower the abelianization is
    // (Z/3)^2: base coinvariants under the rotation plus the top copy.
    let group = TruncatedWreathGroup::new(d3(), 2, Flavor::Alternating).unwrap();
    let full = group.full_subgroup(DEFAULT_ORDER_CAP).enumerate().unwrap();
    let derived = full.derived_subgroup().unwrap();
    assert_eq!(full.order().unwrap(), 81);
    assert_eq!(derived.order().unwrap(), 9);
}

#[test]
fn point_stabilizer_indices_follow_orbit_stabilizer() {
    let group = TruncatedWreathGroup::new(d2(), 3, Flavor::Symmetric).unwrap();
    let full = group.full_subgroup(DEFAULT_ORDER_CAP).enumerate().unwrap();
    for k in 1..=3usize {
        let v = VertexAddress::all_at_level(d2(), k)[0].clone();
        let stab = full
            .pointwise_stabilizer(&LevelSet::new(k, [v]).unwrap())
            .unwrap();
        // Level-transitivity: the orbit is the whole level.
        assert_eq!(stab.order().unwrap() << k, full.order().unwrap(), "level {k}");
    }
}

#[test]
fn sibling_leaves_share_their_stabilizer_on_the_binary_tree() {
    // Fixing one child of a binary vertex forces fixing the other, so the
    // stabilizers of sibling leaves are literally the same subgroup, and
    // the conjugation orbit of a leaf stabilizer has only 4 members for 8
    // leaves.
    let group = TruncatedWreathGroup::new(d2(), 3, Flavor::Symmetric).unwrap();
    let full = group.full_subgroup(DEFAULT_ORDER_CAP).enumerate().unwrap();
    let stab = |leaf: &str| {
        full.pointwise_stabilizer(&LevelSet::new(3, [addr(leaf)]).unwrap())
            .unwrap()
    };
    assert_eq!(stab("110").elements(), stab("111").elements());
    assert_ne!(stab("101").elements(), stab("111").elements());

    let orbit = conjugation_orbit(&stab("111"), 3).unwrap();
    assert_eq!(orbit.len(), 4);
}

#[test]
fn rigid_level_stabilizer_equals_pointwise_in_the_full_group() {
    let group = TruncatedWreathGroup::new(d2(), 3, Flavor::Symmetric).unwrap();
    let rigid = rigid_stabilizer_gens(&group, &LevelSet::full(d2(), 1))
        .unwrap()
        .enumerate()
        .unwrap();
    let pointwise = level_stabilizer_gens(&group, 1).unwrap().enumerate().unwrap();
    assert_eq!(rigid.elements(), pointwise.elements());
    // Product structure over the two level-1 subtrees: 8 * 8.
    assert_eq!(rigid.order(), Some(64));
}

#[test]
fn fingerprints_of_distinct_level_stabilizers_differ() {
    let group = TruncatedWreathGroup::new(d2(), 3, Flavor::Symmetric).unwrap();
    let sub = |v: &str| {
        rigid_stabilizer_gens(&group, &LevelSet::new(1, [addr(v)]).unwrap()).unwrap()
    };
    let left = fingerprint(&sub("0"), 3).unwrap();
    let right = fingerprint(&sub("1"), 3).unwrap();
    assert_ne!(left, right);
    assert_eq!(left.order(), Some(8));
    // Truncating to level 1 collapses both to the trivial image.
    assert_eq!(
        fingerprint(&sub("0"), 1).unwrap(),
        fingerprint(&sub("1"), 1).unwrap()
    );
}

#[test]
fn shadow_stabilizer_of_a_vertex_matches_its_subtree_group() {
    // Elements supported in the subtree at "0" are exactly those fixing the
    // complementary shadow pointwise.
    let group = TruncatedWreathGroup::new(d2(), 3, Flavor::Symmetric).unwrap();
    let full = group.full_subgroup(DEFAULT_ORDER_CAP).enumerate().unwrap();
    let complement = shadow_at_level(&addr("1"), d2(), 3).unwrap();
    let fixing = full.pointwise_stabilizer(&complement).unwrap();
    let rigid = rigid_stabilizer_gens(&group, &LevelSet::new(1, [addr("0")]).unwrap())
        .unwrap()
        .enumerate()
        .unwrap();
    assert_eq!(fixing.elements(), rigid.elements());
}
