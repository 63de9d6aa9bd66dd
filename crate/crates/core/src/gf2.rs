//! Bit vectors over GF(2): flip patterns, elimination, span membership.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tree::{format_bits, parse_bits, RouterId};

/// A fixed-length bit vector, MSB first. Ordering on equal lengths is
/// lexicographic on the bit string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitFlipPattern {
    len: u32,
    bits: u64,
}

impl BitFlipPattern {
    pub fn new(len: u32, bits: u64) -> Self {
        assert!(len < 64 && bits >> len == 0, "pattern bits exceed length {len}");
        Self { len, bits }
    }

    /// The flip taking `from` to `to`; both routers must share a layer.
    pub fn between(from: RouterId, to: RouterId) -> Self {
        debug_assert_eq!(from.layer(), to.layer());
        Self::new(from.path_len(), from.path() ^ to.path())
    }

    /// The `i`-th unit vector, counting from the most significant bit.
    pub fn unit(len: u32, i: u32) -> Self {
        Self::new(len, 1 << (len - 1 - i))
    }

    #[inline]
    pub fn len(self) -> u32 {
        self.len
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn bits(self) -> u64 {
        self.bits
    }

    pub fn is_zero(self) -> bool {
        self.bits == 0
    }

    /// Most significant (side) bit.
    pub fn msb(self) -> bool {
        self.len > 0 && (self.bits >> (self.len - 1)) & 1 == 1
    }

    pub fn apply(self, r: RouterId) -> RouterId {
        debug_assert_eq!(r.path_len(), self.len);
        RouterId::new_unchecked(r.layer(), r.path() ^ self.bits)
    }
}

impl std::ops::BitXor for BitFlipPattern {
    type Output = Self;

    fn bitxor(self, rhs: Self) -> Self {
        assert_eq!(self.len, rhs.len, "pattern length mismatch");
        Self::new(self.len, self.bits ^ rhs.bits)
    }
}

impl fmt::Display for BitFlipPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_bits(self.bits, self.len))
    }
}

impl FromStr for BitFlipPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = parse_bits(s).ok_or_else(|| Error::InvalidParameter(format!("bad pattern {s:?}")))?;
        Ok(Self::new(s.len() as u32, bits))
    }
}

impl Serialize for BitFlipPattern {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitFlipPattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Reduced row-echelon basis of a subspace of GF(2)^64.
#[derive(Clone, Debug, Default)]
pub struct Basis {
    // Distinct leading bits, sorted by leading bit descending; every pivot
    // bit is cleared in all other rows.
    rows: Vec<u64>,
}

#[inline]
fn pivot(v: u64) -> u32 {
    63 - v.leading_zeros()
}

impl Basis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    /// Residue of `v` after eliminating every pivot.
    pub fn reduce(&self, mut v: u64) -> u64 {
        for &r in &self.rows {
            if (v >> pivot(r)) & 1 == 1 {
                v ^= r;
            }
        }
        v
    }

    pub fn contains(&self, v: u64) -> bool {
        self.reduce(v) == 0
    }

    /// Add `v`; returns false if it was already in the span.
    pub fn insert(&mut self, v: u64) -> bool {
        let v = self.reduce(v);
        if v == 0 {
            return false;
        }
        let p = pivot(v);
        for r in self.rows.iter_mut() {
            if (*r >> p) & 1 == 1 {
                *r ^= v;
            }
        }
        let at = self.rows.partition_point(|&r| pivot(r) > p);
        self.rows.insert(at, v);
        true
    }
}

impl FromIterator<u64> for Basis {
    fn from_iter<I: IntoIterator<Item = u64>>(iter: I) -> Self {
        let mut b = Basis::new();
        for v in iter {
            b.insert(v);
        }
        b
    }
}

pub fn rank<I: IntoIterator<Item = u64>>(vectors: I) -> usize {
    vectors.into_iter().collect::<Basis>().rank()
}

/// Find a subset of `generators` whose XOR is `target`, as a bit mask over
/// generator indices. Requires at most 64 generators.
pub fn solve(generators: &[u64], target: u64) -> Option<u64> {
    assert!(generators.len() <= 64);
    // slots[p] holds a (vector, combination) pair whose leading bit is p.
    let mut slots: [Option<(u64, u64)>; 64] = [None; 64];
    let eliminate = |slots: &[Option<(u64, u64)>; 64], mut v: u64, mut c: u64| {
        while v != 0 {
            match slots[pivot(v) as usize] {
                Some((rv, rc)) => {
                    v ^= rv;
                    c ^= rc;
                }
                None => break,
            }
        }
        (v, c)
    };
    for (i, &g) in generators.iter().enumerate() {
        let (v, c) = eliminate(&slots, g, 1u64 << i);
        if v != 0 {
            slots[pivot(v) as usize] = Some((v, c));
        }
    }
    let (v, c) = eliminate(&slots, target, 0);
    (v == 0).then_some(c)
}

/// Every XOR combination of `generators`, `2^k` values in subset order.
pub fn span_elements(generators: &[u64]) -> Vec<u64> {
    let mut span = vec![0u64];
    for &g in generators {
        let extra: Vec<u64> = span.iter().map(|&s| s ^ g).collect();
        span.extend(extra);
    }
    span
}
