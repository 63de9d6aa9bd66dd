//! Router tree model, fault injection and accessibility queries.
//!
//! A depth-`n` tree has routers at layers `1..=n`; the router at layer `k` is
//! identified by the `k - 1` address bits that route a query to it, most
//! significant bit first (`0` = left, `1` = right). Each layer-`n` router
//! serves the two leaf addresses obtained by appending one more bit.
//!
//! A faulty link is represented by marking the router below it faulty.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::rng;

/// Largest supported tree depth.
pub const MAX_DEPTH: u32 = 20;

/// Render the low `len` bits of `value` MSB first.
pub fn format_bits(value: u64, len: u32) -> String {
    (0..len)
        .rev()
        .map(|i| if (value >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Parse a string of `0`/`1` characters, MSB first.
pub fn parse_bits(s: &str) -> Option<u64> {
    if s.len() > 63 {
        return None;
    }
    s.chars().try_fold(0u64, |acc, c| match c {
        '0' => Some(acc << 1),
        '1' => Some((acc << 1) | 1),
        _ => None,
    })
}

/// Position of a router: its layer and the path bits leading to it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RouterId {
    layer: u32,
    path: u64,
}

impl RouterId {
    pub const ROOT: RouterId = RouterId { layer: 1, path: 0 };

    pub fn new(layer: u32, path: u64) -> Result<Self> {
        if layer == 0 || layer > 63 {
            return Err(invalid(format!("router layer {layer} out of range")));
        }
        if path >> (layer - 1) != 0 {
            return Err(invalid(format!(
                "path {path:#b} has more than {} bits",
                layer - 1
            )));
        }
        Ok(Self { layer, path })
    }

    #[inline]
    pub(crate) const fn new_unchecked(layer: u32, path: u64) -> Self {
        Self { layer, path }
    }

    #[inline]
    pub fn layer(self) -> u32 {
        self.layer
    }

    #[inline]
    pub fn path(self) -> u64 {
        self.path
    }

    /// Number of path bits (`layer - 1`).
    #[inline]
    pub fn path_len(self) -> u32 {
        self.layer - 1
    }

    pub fn parent(self) -> Option<Self> {
        (self.layer > 1).then(|| Self::new_unchecked(self.layer - 1, self.path >> 1))
    }

    #[inline]
    pub fn child(self, bit: u64) -> Self {
        debug_assert!(bit <= 1);
        Self::new_unchecked(self.layer + 1, (self.path << 1) | bit)
    }

    #[inline]
    pub fn left(self) -> Self {
        self.child(0)
    }

    #[inline]
    pub fn right(self) -> Self {
        self.child(1)
    }

    /// Which half of the tree the router lies in; `None` for the root.
    pub fn side(self) -> Option<u64> {
        (self.layer >= 2).then(|| self.path >> (self.layer - 2))
    }

    /// 1-based heap index: the root is 1 and the children of `i` are `2i`, `2i + 1`.
    #[inline]
    pub fn heap_index(self) -> usize {
        ((1u64 << (self.layer - 1)) | self.path) as usize
    }

    pub fn from_heap_index(index: usize) -> Self {
        assert!(index >= 1, "heap index starts at 1");
        let layer = usize::BITS - index.leading_zeros();
        Self::new_unchecked(layer, (index as u64) & !(1u64 << (layer - 1)))
    }

    /// True if `self` lies on the path from the root to `other` (inclusive).
    pub fn is_ancestor_of(self, other: RouterId) -> bool {
        self.layer <= other.layer && other.path >> (other.layer - self.layer) == self.path
    }

    /// Routers from the root down to `self`, inclusive.
    pub fn ancestry(self) -> impl Iterator<Item = RouterId> {
        (1..=self.layer)
            .map(move |k| Self::new_unchecked(k, self.path >> (self.layer - k)))
    }

    pub fn path_string(self) -> String {
        format_bits(self.path, self.path_len())
    }
}

impl fmt::Display for RouterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.layer, self.path_string())
    }
}

impl FromStr for RouterId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::RouterParse(s.to_string());
        let (layer, bits) = s.split_once(':').ok_or_else(err)?;
        let layer: u32 = layer.trim().parse().map_err(|_| err())?;
        if layer == 0 || bits.len() as u32 != layer - 1 {
            return Err(err());
        }
        let path = parse_bits(bits).ok_or_else(err)?;
        RouterId::new(layer, path).map_err(|_| err())
    }
}

impl Serialize for RouterId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RouterId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A depth-`n` router tree together with its faulty-router table.
#[derive(Clone, PartialEq, Eq)]
pub struct QramTree {
    depth: u32,
    protected_top: bool,
    /// Indexed by heap index; slot 0 unused.
    faulty: Vec<bool>,
}

impl fmt::Debug for QramTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QramTree")
            .field("depth", &self.depth)
            .field("protected_top", &self.protected_top)
            .field(
                "faulty",
                &self.faulty_routers().map(|r| r.to_string()).collect::<Vec<_>>(),
            )
            .finish()
    }
}

fn check_depth(n: u32) -> Result<()> {
    if !(2..=MAX_DEPTH).contains(&n) {
        return Err(invalid(format!("depth {n} outside [2, {MAX_DEPTH}]")));
    }
    Ok(())
}

impl QramTree {
    pub fn healthy(depth: u32, protected_top: bool) -> Result<Self> {
        check_depth(depth)?;
        Ok(Self {
            depth,
            protected_top,
            faulty: vec![false; 1usize << depth],
        })
    }

    pub fn with_faults<I>(depth: u32, protected_top: bool, faulty: I) -> Result<Self>
    where
        I: IntoIterator<Item = RouterId>,
    {
        let mut tree = Self::healthy(depth, protected_top)?;
        for r in faulty {
            tree.mark_faulty(r)?;
        }
        Ok(tree)
    }

    /// Sample a tree in which every eligible router fails independently with
    /// probability `epsilon`. The fault bit of each router is a pure function
    /// of `(seed, router)`.
    pub fn generate(n: u32, epsilon: f64, seed: u64, protect_top: bool) -> Result<Self> {
        check_depth(n)?;
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(invalid(format!("epsilon {epsilon} outside [0, 1]")));
        }
        let first = if protect_top { 4 } else { 1 };
        let mut faulty = vec![false; 1usize << n];
        for (i, slot) in faulty.iter_mut().enumerate().skip(first) {
            *slot = rng::bernoulli(seed, i as u64, epsilon);
        }
        Ok(Self {
            depth: n,
            protected_top: protect_top,
            faulty,
        })
    }

    /// Copy of this tree with one more faulty router.
    pub fn with_fault(&self, r: RouterId) -> Result<Self> {
        let mut t = self.clone();
        t.mark_faulty(r)?;
        Ok(t)
    }

    fn mark_faulty(&mut self, r: RouterId) -> Result<()> {
        if r.layer() > self.depth {
            return Err(invalid(format!("router {r} below depth {}", self.depth)));
        }
        if self.protected_top && r.layer() <= 2 {
            return Err(invalid(format!("router {r} is in the protected top")));
        }
        self.faulty[r.heap_index()] = true;
        Ok(())
    }

    #[inline]
    pub fn depth(&self) -> u32 {
        self.depth
    }

    #[inline]
    pub fn protected_top(&self) -> bool {
        self.protected_top
    }

    /// Number of routers, `2^n - 1`.
    pub fn router_count(&self) -> usize {
        self.faulty.len() - 1
    }

    #[inline]
    pub fn is_faulty(&self, r: RouterId) -> bool {
        r.layer() <= self.depth && self.faulty[r.heap_index()]
    }

    /// Faulty routers in canonical (layer, path) order.
    pub fn faulty_routers(&self) -> impl Iterator<Item = RouterId> + '_ {
        self.faulty
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &f)| f)
            .map(|(i, _)| RouterId::from_heap_index(i))
    }

    pub fn faulty_count(&self) -> usize {
        self.faulty.iter().filter(|&&f| f).count()
    }

    /// True if the three routers of layers 1 and 2 are healthy.
    pub fn top_healthy(&self) -> bool {
        !(self.faulty[1] || self.faulty[2] || self.faulty[3])
    }

    /// Routers at `layer`, left to right.
    pub fn layer_routers(&self, layer: u32) -> impl Iterator<Item = RouterId> {
        (0..1u64 << (layer - 1)).map(move |p| RouterId::new_unchecked(layer, p))
    }

    /// True iff `r` and all of its ancestors are healthy.
    pub fn is_accessible(&self, r: RouterId) -> bool {
        debug_assert!(r.layer() <= self.depth);
        r.ancestry().all(|a| !self.faulty[a.heap_index()])
    }

    /// Number of leaf addresses below `r` reachable from the root.
    pub fn available_addresses(&self, r: RouterId) -> u64 {
        if !self.is_accessible(r) {
            return 0;
        }
        self.subtree_available(r)
    }

    fn subtree_available(&self, r: RouterId) -> u64 {
        if self.faulty[r.heap_index()] {
            0
        } else if r.layer() == self.depth {
            2
        } else {
            self.subtree_available(r.left()) + self.subtree_available(r.right())
        }
    }

    /// Precomputed availability of every router, for algorithms that query it
    /// repeatedly.
    pub fn accessibility(&self) -> Accessibility {
        let len = self.faulty.len();
        let mut counts = vec![0u64; len];
        let first_leaf = 1usize << (self.depth - 1);
        for i in (1..len).rev() {
            counts[i] = if self.faulty[i] {
                0
            } else if i >= first_leaf {
                2
            } else {
                counts[2 * i] + counts[2 * i + 1]
            };
        }
        let mut accessible = vec![false; len];
        accessible[1] = !self.faulty[1];
        for i in 2..len {
            accessible[i] = accessible[i / 2] && !self.faulty[i];
        }
        Accessibility {
            depth: self.depth,
            counts,
            accessible,
        }
    }

    /// Number of leaf addresses reachable from the root.
    pub fn accessible_address_count(&self) -> u64 {
        self.accessibility().available(RouterId::ROOT)
    }

    pub fn faulty_address_table(&self) -> FaultyAddressTable {
        let acc = self.accessibility();
        let inaccessible = self
            .layer_routers(self.depth)
            .filter(|&r| !acc.is_accessible(r))
            .flat_map(|r| [r.path() << 1, (r.path() << 1) | 1])
            .collect();
        FaultyAddressTable {
            depth: self.depth,
            inaccessible,
        }
    }

    /// At least half of the `2^n` addresses are reachable.
    pub fn is_repairable(&self) -> bool {
        self.accessible_address_count() >= 1u64 << (self.depth - 1)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&TreeFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: TreeFile = serde_json::from_str(s)?;
        file.try_into()
    }
}

impl Serialize for QramTree {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TreeFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for QramTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        TreeFile::deserialize(d)?
            .try_into()
            .map_err(serde::de::Error::custom)
    }
}

/// On-disk tree format.
#[derive(Serialize, Deserialize)]
struct TreeFile {
    n: u32,
    protected_top: bool,
    faulty: Vec<RouterId>,
}

impl From<&QramTree> for TreeFile {
    fn from(t: &QramTree) -> Self {
        TreeFile {
            n: t.depth,
            protected_top: t.protected_top,
            faulty: t.faulty_routers().collect(),
        }
    }
}

impl TryFrom<TreeFile> for QramTree {
    type Error = Error;

    fn try_from(f: TreeFile) -> Result<Self> {
        QramTree::with_faults(f.n, f.protected_top, f.faulty)
    }
}

/// Per-router availability table for one tree.
#[derive(Clone, Debug)]
pub struct Accessibility {
    depth: u32,
    counts: Vec<u64>,
    accessible: Vec<bool>,
}

impl Accessibility {
    #[inline]
    pub fn depth(&self) -> u32 {
        self.depth
    }

    #[inline]
    pub fn is_accessible(&self, r: RouterId) -> bool {
        self.accessible[r.heap_index()]
    }

    #[inline]
    pub fn available(&self, r: RouterId) -> u64 {
        let i = r.heap_index();
        if self.accessible[i] {
            self.counts[i]
        } else {
            0
        }
    }

    /// Available addresses on each side of the root, `[left, right]`.
    pub fn side_counts(&self) -> [u64; 2] {
        [
            self.available(RouterId::ROOT.left()),
            self.available(RouterId::ROOT.right()),
        ]
    }
}

/// The set of leaf addresses that cannot be reached from the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaultyAddressTable {
    pub depth: u32,
    pub inaccessible: BTreeSet<u64>,
}

impl FaultyAddressTable {
    pub fn len(&self) -> usize {
        self.inaccessible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inaccessible.is_empty()
    }

    pub fn contains(&self, address: u64) -> bool {
        self.inaccessible.contains(&address)
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.inaccessible
            .iter()
            .map(|&a| format_bits(a, self.depth))
            .collect()
    }
}
