//! Addressing, levels, shadows and the boundary metric of the d-ary rooted tree.
//!
//! Vertices are finite words over the digits `0..d`; the root is the empty
//! word. A vertex at level `n` serializes as its digit string, e.g. `"011"`,
//! the root as `""`. All measures and distances are exact rationals.

use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

use num::{BigInt, BigRational, One};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Branching degree of the tree. Digit-string addressing fixes `2 <= d <= 10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Arity(usize);

impl Arity {
    pub fn new(d: usize) -> Result<Arity> {
        if (2..=10).contains(&d) {
            Ok(Arity(d))
        } else {
            Err(Error::InvalidArity(d))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Number of vertices on level `n`, i.e. `d^n`.
    pub fn level_size(self, n: usize) -> usize {
        self.0.pow(n as u32)
    }

    /// Number of vertices on levels `0..n`, i.e. `(d^n - 1)/(d - 1)`.
    pub fn vertices_above(self, n: usize) -> usize {
        (self.level_size(n) - 1) / (self.0 - 1)
    }
}

impl Serialize for Arity {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Arity {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let d = usize::deserialize(de)?;
        Arity::new(d).map_err(D::Error::custom)
    }
}

/// A vertex of the tree: a finite digit word, the root being the empty word.
///
/// `Ord` is lexicographic on the digit word, which orders each level
/// left-to-right and is the canonical order used everywhere downstream.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct VertexAddress(Vec<u8>);

impl VertexAddress {
    pub fn root() -> VertexAddress {
        VertexAddress(Vec::new())
    }

    pub fn from_digits(digits: Vec<u8>, d: Arity) -> Result<VertexAddress> {
        for &digit in &digits {
            if digit as usize >= d.get() {
                return Err(Error::DigitOutOfRange { digit, d: d.get() });
            }
        }
        Ok(VertexAddress(digits))
    }

    pub fn parse(s: &str, d: Arity) -> Result<VertexAddress> {
        let mut digits = Vec::with_capacity(s.len());
        for c in s.chars() {
            let digit = c
                .to_digit(10)
                .ok_or_else(|| Error::Parse(format!("invalid digit {c:?} in address {s:?}")))?
                as u8;
            digits.push(digit);
        }
        VertexAddress::from_digits(digits, d)
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn level(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// The address with the last digit removed; `None` for the root.
    pub fn parent(&self) -> Option<VertexAddress> {
        if self.is_root() {
            None
        } else {
            Some(VertexAddress(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn child(&self, digit: u8) -> VertexAddress {
        let mut digits = self.0.clone();
        digits.push(digit);
        VertexAddress(digits)
    }

    /// Children in digit order `v0, v1, ..., v(d-1)`.
    pub fn children(&self, d: Arity) -> Vec<VertexAddress> {
        (0..d.get() as u8).map(|y| self.child(y)).collect()
    }

    pub fn is_prefix_of(&self, other: &VertexAddress) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// The first `n` digits as an address.
    pub fn prefix(&self, n: usize) -> VertexAddress {
        VertexAddress(self.0[..n].to_vec())
    }

    /// The address with the first `n` digits removed.
    pub fn strip_prefix(&self, n: usize) -> VertexAddress {
        VertexAddress(self.0[n..].to_vec())
    }

    /// `self` prepended to `tail`.
    pub fn join(&self, tail: &VertexAddress) -> VertexAddress {
        let mut digits = self.0.clone();
        digits.extend_from_slice(&tail.0);
        VertexAddress(digits)
    }

    /// Length of the longest common prefix with `other`.
    pub fn common_prefix_len(&self, other: &VertexAddress) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .take_while(|(a, b)| a == b)
            .count()
    }

    /// All addresses of a level in lexicographic order.
    pub fn all_at_level(d: Arity, level: usize) -> Vec<VertexAddress> {
        let mut out = vec![VertexAddress::root()];
        for _ in 0..level {
            out = out
                .into_iter()
                .flat_map(|v| (0..d.get() as u8).map(move |y| v.child(y)))
                .collect();
        }
        out
    }

    /// All addresses of levels `0..=max_level` in (level, lexicographic) order.
    pub fn all_up_to_level(d: Arity, max_level: usize) -> Vec<VertexAddress> {
        (0..=max_level)
            .flat_map(|k| VertexAddress::all_at_level(d, k))
            .collect()
    }
}

impl Borrow<[u8]> for VertexAddress {
    fn borrow(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for VertexAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &digit in &self.0 {
            write!(f, "{digit}")?;
        }
        Ok(())
    }
}

impl FromStr for VertexAddress {
    type Err = Error;

    /// Parses without an arity bound; use [`VertexAddress::parse`] to validate
    /// digits against a fixed arity.
    fn from_str(s: &str) -> Result<VertexAddress> {
        VertexAddress::parse(s, Arity(10))
    }
}

impl Serialize for VertexAddress {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VertexAddress {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// A set of vertices all lying on one level, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LevelSet {
    level: usize,
    members: Vec<VertexAddress>,
}

impl LevelSet {
    pub fn new(level: usize, members: impl IntoIterator<Item = VertexAddress>) -> Result<LevelSet> {
        let mut members: Vec<VertexAddress> = members.into_iter().collect();
        members.sort();
        members.dedup();
        for m in &members {
            if m.level() != level {
                return Err(Error::PreconditionViolated(format!(
                    "vertex {m} is not on level {level}"
                )));
            }
        }
        Ok(LevelSet { level, members })
    }

    pub fn empty(level: usize) -> LevelSet {
        LevelSet {
            level,
            members: Vec::new(),
        }
    }

    /// The whole level `L_n`.
    pub fn full(d: Arity, level: usize) -> LevelSet {
        LevelSet {
            level,
            members: VertexAddress::all_at_level(d, level),
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn members(&self) -> &[VertexAddress] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: &VertexAddress) -> bool {
        self.members.binary_search(v).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = &VertexAddress> {
        self.members.iter()
    }
}

/// Parent, children and level of a vertex, read off the word structure.
pub struct Navigation {
    pub parent: Option<VertexAddress>,
    pub children: Vec<VertexAddress>,
    pub level: usize,
}

pub fn navigate(v: &VertexAddress, d: Arity) -> Navigation {
    Navigation {
        parent: v.parent(),
        children: v.children(d),
        level: v.level(),
    }
}

/// All level-`n` descendants of `v`: the shadow of `v` on `L_n`.
pub fn shadow_at_level(v: &VertexAddress, d: Arity, n: usize) -> Result<LevelSet> {
    if n < v.level() {
        return Err(Error::LevelTooShallow {
            requested: n,
            vertex_level: v.level(),
        });
    }
    let mut out = vec![v.clone()];
    for _ in v.level()..n {
        out = out
            .into_iter()
            .flat_map(|w| (0..d.get() as u8).map(move |y| w.child(y)))
            .collect();
    }
    LevelSet::new(n, out)
}

/// Boundary measure of the shadow of `v`: exactly `1/d^level(v)`.
pub fn shadow_measure(v: &VertexAddress, d: Arity) -> BigRational {
    let den = BigInt::from(d.get()).pow(v.level() as u32);
    BigRational::new(BigInt::one(), den)
}

/// Distance of two truncated rays: `1/2^k` where `k` is the length of the
/// longest common prefix.
pub fn ray_distance(p: &VertexAddress, q: &VertexAddress) -> Result<BigRational> {
    if p.level() != q.level() {
        return Err(Error::PreconditionViolated(format!(
            "truncated rays have different depths: {} vs {}",
            p.level(),
            q.level()
        )));
    }
    if p == q {
        return Err(Error::EqualPrefixes);
    }
    Ok(half_pow(p.common_prefix_len(q)))
}

/// `1/2^k` as an exact rational.
pub fn half_pow(k: usize) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(2).pow(k as u32))
}
