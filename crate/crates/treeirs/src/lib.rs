//! Combinatorics of finitary automorphism groups of the d-ary rooted tree.
//!
//! The crate provides, at explicit truncation depths:
//!
//! - vertex addressing, shadows and the ultrametric boundary ([`tree`]);
//! - finitary automorphisms as sparse portraits, with exact Haar sampling of
//!   truncated wreath products ([`autom`]);
//! - subgroup enumeration, orbits, level partitions and stabilizers
//!   ([`groups`]);
//! - closed boundary subsets, red/green/blue colorings, tree decompositions
//!   and generalized congruence/rigid stabilizers ([`boundary`]);
//! - invariant-random-subgroup samplers, fingerprints and invariance tests
//!   ([`irs`]);
//! - exact and statistical verification checks with structured reports
//!   ([`verify`]).
//!
//! All measures and distances use exact rational arithmetic. Every sampling
//! operation takes an explicit seeded random source, so experiments are
//! reproducible bit for bit.

pub mod autom;
pub mod boundary;
pub mod error;
pub mod groups;
pub mod irs;
pub mod perm;
pub mod ratio;
pub mod tree;
pub mod verify;

pub use autom::{
    aut_distance, derived_rng, haar_sample, seeded_rng, transporter, FinitaryAutomorphism, Flavor,
    RngSource,
};
pub use boundary::{
    class_distance_at_depth, coloring_from_set, decompose, find_green_ray,
    generalized_congruence_gens, generalized_rigid_gens, green_spine, hanging_subtrees,
    hausdorff_distance_approx, ClosedSetApprox, Color, Coloring, CongruenceSpec,
    GeneralizedStabilizer, SubtreeDescriptor,
};
pub use error::{Error, Result};
pub use groups::{
    find_witness, level_stabilizer_gens, partition_distance, rigid_stabilizer_gens,
    GeneratedSubgroup, LevelPartition, TruncatedDistance, TruncatedWreathGroup, DEFAULT_ORDER_CAP,
};
pub use irs::{
    conjugation_orbit, estimate_atom_mass, fingerprint, fix_set_of_sample, invariance_test,
    AtomMassReport, EmpiricalDistribution, InvarianceReport, IrsSampler, PreparedSampler,
    StabMode, SubgroupFingerprint, SubtreeIrsSpec, TopSpec,
};
pub use perm::Permutation;
pub use tree::{
    navigate, ray_distance, shadow_at_level, shadow_measure, Arity, LevelSet, VertexAddress,
};
