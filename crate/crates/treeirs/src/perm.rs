//! Permutations of the digit set `{0..d-1}` in one-line notation.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tree::Arity;

/// A permutation of `{0..d-1}`; `images[y]` is the image of digit `y`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Permutation {
    images: Vec<u8>,
}

impl Permutation {
    pub fn identity(d: Arity) -> Permutation {
        Permutation {
            images: (0..d.get() as u8).collect(),
        }
    }

    pub fn new(images: Vec<u8>) -> Result<Permutation> {
        let d = images.len();
        if !(2..=10).contains(&d) {
            return Err(Error::InvalidArity(d));
        }
        let mut seen = vec![false; d];
        for &y in &images {
            if y as usize >= d || seen[y as usize] {
                return Err(Error::PreconditionViolated(format!(
                    "{images:?} is not a bijection of 0..{d}"
                )));
            }
            seen[y as usize] = true;
        }
        Ok(Permutation { images })
    }

    /// The transposition `(a b)`, identity elsewhere.
    pub fn transposition(d: Arity, a: u8, b: u8) -> Permutation {
        let mut images: Vec<u8> = (0..d.get() as u8).collect();
        images.swap(a as usize, b as usize);
        Permutation { images }
    }

    /// The cycle `a_0 -> a_1 -> ... -> a_k -> a_0`, identity elsewhere.
    pub fn cycle(d: Arity, points: &[u8]) -> Result<Permutation> {
        let mut images: Vec<u8> = (0..d.get() as u8).collect();
        for i in 0..points.len() {
            let from = points[i] as usize;
            if from >= d.get() {
                return Err(Error::DigitOutOfRange {
                    digit: points[i],
                    d: d.get(),
                });
            }
            images[from] = points[(i + 1) % points.len()];
        }
        Permutation::new(images)
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn apply(&self, y: u8) -> u8 {
        self.images[y as usize]
    }

    pub fn images(&self) -> &[u8] {
        &self.images
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &y)| i as u8 == y)
    }

    /// Composition applying `self` first, then `other`.
    pub fn then(&self, other: &Permutation) -> Permutation {
        Permutation {
            images: self
                .images
                .iter()
                .map(|&y| other.images[y as usize])
                .collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut images = vec![0u8; self.images.len()];
        for (y, &img) in self.images.iter().enumerate() {
            images[img as usize] = y as u8;
        }
        Permutation { images }
    }

    /// True for even permutations, determined by the cycle decomposition.
    pub fn is_even(&self) -> bool {
        let n = self.images.len();
        let mut seen = vec![false; n];
        let mut transpositions = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut y = start;
            while !seen[y] {
                seen[y] = true;
                y = self.images[y] as usize;
                len += 1;
            }
            transpositions += len - 1;
        }
        transpositions % 2 == 0
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, y) in self.images.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{y}")?;
        }
        write!(f, "]")
    }
}

impl Serialize for Permutation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.images.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let images = Vec::<u8>::deserialize(de)?;
        Permutation::new(images).map_err(D::Error::custom)
    }
}

/// All `d!` permutations in lexicographic order of their image arrays.
pub fn all_permutations(d: Arity) -> Vec<Permutation> {
    let mut out = Vec::new();
    let mut images: Vec<u8> = (0..d.get() as u8).collect();
    loop {
        out.push(Permutation {
            images: images.clone(),
        });
        // next_permutation in place
        let n = images.len();
        let Some(i) = (0..n - 1).rev().find(|&i| images[i] < images[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| images[j] > images[i]).unwrap();
        images.swap(i, j);
        images[i + 1..].reverse();
        continue;
    }
    out
}
