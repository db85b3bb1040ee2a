//! Finitary tree automorphisms as sparse portraits.
//!
//! An automorphism is stored as a map from vertex addresses to vertex
//! permutations; identity permutations are dropped, so structural equality
//! coincides with equality as group elements. Words act on the right:
//! `w^(ab) = (w^a)^b`, and conjugation is `s^g = g^-1 s g`.

use std::collections::BTreeMap;
use std::fmt;

use num::BigRational;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::tree::{half_pow, Arity, VertexAddress};

/// Whether vertex permutations range over the full symmetric group or only
/// its even elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    #[default]
    Symmetric,
    Alternating,
}

impl Flavor {
    /// Factorial of `d`, halved for the alternating flavor.
    pub fn base_order(self, d: Arity) -> u64 {
        let fact: u64 = (1..=d.get() as u64).product();
        match self {
            Flavor::Symmetric => fact,
            Flavor::Alternating => fact / 2,
        }
    }

    pub fn admits(self, p: &Permutation) -> bool {
        match self {
            Flavor::Symmetric => true,
            Flavor::Alternating => p.is_even(),
        }
    }

    /// Alternating constructions degenerate below `d = 3`.
    pub fn check_arity(self, d: Arity) -> Result<()> {
        if self == Flavor::Alternating && d.get() < 3 {
            Err(Error::AlternatingArityTooSmall(d.get()))
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flavor::Symmetric => write!(f, "symmetric"),
            Flavor::Alternating => write!(f, "alternating"),
        }
    }
}

/// A finitary automorphism of the d-ary rooted tree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FinitaryAutomorphism {
    d: Arity,
    portrait: BTreeMap<VertexAddress, Permutation>,
}

impl FinitaryAutomorphism {
    pub fn identity(d: Arity) -> FinitaryAutomorphism {
        FinitaryAutomorphism {
            d,
            portrait: BTreeMap::new(),
        }
    }

    /// The elementary automorphism applying `perm` to the children of `v`.
    pub fn elementary(d: Arity, v: VertexAddress, perm: Permutation) -> Result<FinitaryAutomorphism> {
        FinitaryAutomorphism::from_portrait(d, [(v, perm)])
    }

    pub fn from_portrait(
        d: Arity,
        entries: impl IntoIterator<Item = (VertexAddress, Permutation)>,
    ) -> Result<FinitaryAutomorphism> {
        let mut portrait = BTreeMap::new();
        for (v, p) in entries {
            for &digit in v.digits() {
                if digit as usize >= d.get() {
                    return Err(Error::DigitOutOfRange { digit, d: d.get() });
                }
            }
            if p.degree() != d.get() {
                return Err(Error::ArityMismatch(p.degree(), d.get()));
            }
            if !p.is_identity() {
                portrait.insert(v, p);
            }
        }
        Ok(FinitaryAutomorphism { d, portrait })
    }

    pub fn arity(&self) -> Arity {
        self.d
    }

    /// Smallest `n` such that all vertex permutations sit on levels `< n`.
    pub fn depth(&self) -> usize {
        self.portrait
            .keys()
            .map(|v| v.level() + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn is_identity(&self) -> bool {
        self.portrait.is_empty()
    }

    pub fn portrait(&self) -> &BTreeMap<VertexAddress, Permutation> {
        &self.portrait
    }

    /// The vertex permutation at `w`; identity if the portrait has no entry.
    pub fn vertex_perm(&self, w: &VertexAddress) -> Permutation {
        self.portrait
            .get(w.digits())
            .cloned()
            .unwrap_or_else(|| Permutation::identity(self.d))
    }

    /// The image `w^g`, computed digit by digit: the i-th output digit is the
    /// vertex permutation at the original prefix `w[0..i)` applied to `w[i]`.
    pub fn apply(&self, w: &VertexAddress) -> VertexAddress {
        let digits = w.digits();
        let mut out = Vec::with_capacity(digits.len());
        for (i, &y) in digits.iter().enumerate() {
            match self.portrait.get(&digits[..i]) {
                Some(p) => out.push(p.apply(y)),
                None => out.push(y),
            }
        }
        VertexAddress::from_digits(out, self.d).expect("image digits stay in range")
    }

    /// The unique `w` with `w^g` equal to the argument.
    pub fn preimage(&self, image: &VertexAddress) -> VertexAddress {
        let digits = image.digits();
        let mut out: Vec<u8> = Vec::with_capacity(digits.len());
        for &target in digits {
            let y = match self.portrait.get(&out[..]) {
                Some(p) => (0..self.d.get() as u8)
                    .find(|&y| p.apply(y) == target)
                    .expect("permutation is surjective"),
                None => target,
            };
            out.push(y);
        }
        VertexAddress::from_digits(out, self.d).expect("digits stay in range")
    }

    /// Right-action composition: `apply(a.compose(b), w) = b.apply(a.apply(w))`.
    pub fn compose(&self, other: &FinitaryAutomorphism) -> Result<FinitaryAutomorphism> {
        if self.d != other.d {
            return Err(Error::ArityMismatch(self.d.get(), other.d.get()));
        }
        // The product can only have a nontrivial vertex permutation at w if
        // a does at w, or b does at w^a.
        let mut candidates: Vec<VertexAddress> = self.portrait.keys().cloned().collect();
        for k in other.portrait.keys() {
            candidates.push(self.preimage(k));
        }
        candidates.sort();
        candidates.dedup();

        let mut portrait = BTreeMap::new();
        for w in candidates {
            let p = self.vertex_perm(&w);
            let q = other.vertex_perm(&self.apply(&w));
            let composite = p.then(&q);
            if !composite.is_identity() {
                portrait.insert(w, composite);
            }
        }
        Ok(FinitaryAutomorphism {
            d: self.d,
            portrait,
        })
    }

    pub fn inverse(&self) -> FinitaryAutomorphism {
        let portrait = self
            .portrait
            .iter()
            .map(|(w, p)| (self.apply(w), p.inverse()))
            .collect();
        FinitaryAutomorphism {
            d: self.d,
            portrait,
        }
    }

    /// Conjugate `self^g = g^-1 self g`.
    pub fn conjugate(&self, g: &FinitaryAutomorphism) -> Result<FinitaryAutomorphism> {
        g.inverse().compose(self)?.compose(g)
    }

    /// Commutator `[a, b] = a^-1 b^-1 a b`.
    pub fn commutator(&self, b: &FinitaryAutomorphism) -> Result<FinitaryAutomorphism> {
        self.inverse()
            .compose(&b.inverse())?
            .compose(self)?
            .compose(b)
    }

    /// The section at `v`: the automorphism of the subtree below `v`, read as
    /// an automorphism of the full tree by deleting the prefix `v`.
    pub fn section(&self, v: &VertexAddress) -> FinitaryAutomorphism {
        let portrait = self
            .portrait
            .iter()
            .filter(|(w, _)| v.is_prefix_of(w))
            .map(|(w, p)| (w.strip_prefix(v.level()), p.clone()))
            .collect();
        FinitaryAutomorphism {
            d: self.d,
            portrait,
        }
    }

    /// Inverse of [`section`](Self::section): plants `self` inside the
    /// subtree rooted at `v`, fixing everything else.
    pub fn embed_at(&self, v: &VertexAddress) -> FinitaryAutomorphism {
        let portrait = self
            .portrait
            .iter()
            .map(|(w, p)| (v.join(w), p.clone()))
            .collect();
        FinitaryAutomorphism {
            d: self.d,
            portrait,
        }
    }

    /// True if every portrait entry lies in the subtree rooted at `v`.
    pub fn supported_in(&self, v: &VertexAddress) -> bool {
        self.portrait.keys().all(|w| v.is_prefix_of(w))
    }

    /// The restriction to the first `depth` levels: the image under the
    /// quotient map onto the depth-`depth` truncated group.
    pub fn truncate(&self, depth: usize) -> FinitaryAutomorphism {
        let portrait = self
            .portrait
            .iter()
            .filter(|(w, _)| w.level() < depth)
            .map(|(w, p)| (w.clone(), p.clone()))
            .collect();
        FinitaryAutomorphism {
            d: self.d,
            portrait,
        }
    }

    pub fn fixes(&self, v: &VertexAddress) -> bool {
        self.apply(v) == *v
    }

    pub fn is_alternating(&self) -> bool {
        self.portrait.values().all(Permutation::is_even)
    }

    /// The permutation induced on level `n`, as images of lexicographic
    /// vertex indices.
    pub fn level_action(&self, n: usize) -> Vec<u16> {
        let d = self.d.get();
        let size = self.d.level_size(n);
        assert!(size <= 1 << 16, "level {n} too wide for compact actions");
        let mut out = vec![0u16; size];
        for (idx, v) in VertexAddress::all_at_level(self.d, n).iter().enumerate() {
            let image = self.apply(v);
            let mut j = 0usize;
            for &digit in image.digits() {
                j = j * d + digit as usize;
            }
            out[idx] = j as u16;
        }
        out
    }
}

impl FinitaryAutomorphism {
    /// Multiplicative order by iterated composition, `None` beyond `cap`.
    pub fn multiplicative_order(&self, cap: usize) -> Option<usize> {
        if self.is_identity() {
            return Some(1);
        }
        let mut acc = self.clone();
        for k in 1..=cap {
            if acc.is_identity() {
                return Some(k);
            }
            acc = acc.compose(self).expect("same arity");
        }
        None
    }
}

impl fmt::Display for FinitaryAutomorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.portrait.is_empty() {
            return write!(f, "id");
        }
        write!(f, "{{")?;
        for (i, (v, p)) in self.portrait.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "\"{v}\": {p}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Serialize, Deserialize)]
struct PortraitRepr {
    d: usize,
    depth: usize,
    perms: BTreeMap<String, Vec<u8>>,
}

impl Serialize for FinitaryAutomorphism {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = PortraitRepr {
            d: self.d.get(),
            depth: self.depth(),
            perms: self
                .portrait
                .iter()
                .map(|(v, p)| (v.to_string(), p.images().to_vec()))
                .collect(),
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FinitaryAutomorphism {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = PortraitRepr::deserialize(de)?;
        let d = Arity::new(repr.d).map_err(D::Error::custom)?;
        let mut entries = Vec::new();
        for (addr, images) in repr.perms {
            let v = VertexAddress::parse(&addr, d).map_err(D::Error::custom)?;
            if v.level() >= repr.depth {
                return Err(D::Error::custom(format!(
                    "portrait key {addr:?} at level {} violates depth {}",
                    v.level(),
                    repr.depth
                )));
            }
            let p = Permutation::new(images).map_err(D::Error::custom)?;
            entries.push((v, p));
        }
        FinitaryAutomorphism::from_portrait(d, entries).map_err(D::Error::custom)
    }
}

/// Deepest level on which the two automorphisms act identically, as `1/2^k`.
pub fn aut_distance(
    a: &FinitaryAutomorphism,
    b: &FinitaryAutomorphism,
) -> Result<BigRational> {
    if a.arity() != b.arity() {
        return Err(Error::ArityMismatch(a.arity().get(), b.arity().get()));
    }
    if a == b {
        return Err(Error::EqualElements);
    }
    let max_depth = a.depth().max(b.depth());
    for level in 1..=max_depth {
        let disagree = VertexAddress::all_at_level(a.arity(), level)
            .iter()
            .any(|w| a.apply(w) != b.apply(w));
        if disagree {
            return Ok(half_pow(level - 1));
        }
    }
    // Distinct sparse portraits act identically on every level only if they
    // are equal, which was excluded above.
    unreachable!("distinct canonical portraits must disagree on some level")
}

/// A seeded deterministic random source.
pub type RngSource = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> RngSource {
    RngSource::seed_from_u64(seed)
}

/// An independent stream derived from `(seed, stream)`, for parallel or
/// per-task sampling.
pub fn derived_rng(seed: u64, stream: u64) -> RngSource {
    let mut rng = RngSource::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A uniformly random permutation of `{0..d-1}` from the given flavor.
pub fn random_permutation(d: Arity, flavor: Flavor, rng: &mut impl Rng) -> Permutation {
    let n = d.get();
    let mut images: Vec<u8> = (0..n as u8).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        images.swap(i, j);
    }
    let mut p = Permutation::new(images).expect("shuffle yields a bijection");
    if flavor == Flavor::Alternating && !p.is_even() {
        // Precomposing odd samples with a fixed transposition folds S_d
        // two-to-one onto A_d, preserving uniformity.
        let mut images = p.images().to_vec();
        images.swap(0, 1);
        p = Permutation::new(images).expect("swap preserves bijectivity");
    }
    p
}

/// A uniformly random element of the depth-`n` truncated wreath product:
/// every vertex on levels `0..n` receives an independent uniform vertex
/// permutation from the flavor.
pub fn haar_sample(
    d: Arity,
    n: usize,
    flavor: Flavor,
    rng: &mut impl Rng,
) -> Result<FinitaryAutomorphism> {
    flavor.check_arity(d)?;
    let mut entries = Vec::new();
    if n > 0 {
        for v in VertexAddress::all_up_to_level(d, n - 1) {
            entries.push((v, random_permutation(d, flavor, rng)));
        }
    }
    FinitaryAutomorphism::from_portrait(d, entries)
}

/// An automorphism of the given flavor mapping `from` to `to` (addresses of
/// equal level), supported on the path below their deepest common ancestor.
pub fn transporter(
    d: Arity,
    flavor: Flavor,
    from: &VertexAddress,
    to: &VertexAddress,
) -> Result<FinitaryAutomorphism> {
    if from.level() != to.level() {
        return Err(Error::PreconditionViolated(format!(
            "transporter endpoints must share a level: {} vs {}",
            from.level(),
            to.level()
        )));
    }
    flavor.check_arity(d)?;
    let mut entries = Vec::new();
    for i in from.common_prefix_len(to)..from.level() {
        let (a, b) = (from.digits()[i], to.digits()[i]);
        if a == b {
            continue;
        }
        let perm = match flavor {
            Flavor::Symmetric => Permutation::transposition(d, a, b),
            Flavor::Alternating => {
                let spare = (0..d.get() as u8)
                    .find(|&z| z != a && z != b)
                    .expect("d >= 3 for alternating");
                Permutation::cycle(d, &[a, b, spare])?
            }
        };
        entries.push((from.prefix(i), perm));
    }
    let g = FinitaryAutomorphism::from_portrait(d, entries)?;
    debug_assert_eq!(g.apply(from), *to);
    Ok(g)
}
