//! Classical assignment of faulty routers to spare routers and the flag
//! qubits that realize the resulting reroutes.
//!
//! A reroute from router `f` to router `a` on the same layer flips the address
//! bits in `f.path ^ a.path`. Each flag qubit carries one generating pattern;
//! activating a subset of flags applies the XOR of their patterns, so every
//! pattern in the span of the generating set is realizable.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gf2::{self, Basis, BitFlipPattern};
use crate::matching::Matcher;
use crate::tree::RouterId;

/// A faulty→available assignment at one layer and the flag qubits it needs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentResult {
    pub layer: u32,
    #[serde(with = "pair_list")]
    pub assignment: BTreeMap<RouterId, RouterId>,
    pub generating_set: Vec<BitFlipPattern>,
    pub used_patterns: BTreeSet<BitFlipPattern>,
    pub flag_count: usize,
    /// When set, the generating set covers only the bits below the side bit
    /// and the side-bit flip is applied by the repair machinery whenever a
    /// reroute crosses sides.
    pub hidden_side_flip: bool,
}

/// Flags to raise for one reroute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlagActivation {
    /// Bit `i` set means generating pattern `i` is applied.
    pub flags: u64,
    pub side_flip: bool,
}

impl AssignmentResult {
    fn pattern_space(&self, p: BitFlipPattern) -> u64 {
        if self.hidden_side_flip && !p.is_empty() {
            p.bits() & !(1u64 << (p.len() - 1))
        } else {
            p.bits()
        }
    }

    fn generator_bits(&self) -> Vec<u64> {
        self.generating_set.iter().map(|g| g.bits()).collect()
    }

    /// Flags that realize `pattern`, or `None` if it lies outside the span.
    pub fn activation(&self, pattern: BitFlipPattern) -> Option<FlagActivation> {
        let flags = gf2::solve(&self.generator_bits(), self.pattern_space(pattern))?;
        Some(FlagActivation {
            flags,
            side_flip: self.hidden_side_flip && pattern.msb(),
        })
    }

    /// Apply the flags of `activation` to a router path.
    pub fn realize(&self, activation: FlagActivation, r: RouterId) -> RouterId {
        let mut bits = self
            .generating_set
            .iter()
            .enumerate()
            .filter(|(i, _)| (activation.flags >> i) & 1 == 1)
            .fold(0u64, |acc, (_, g)| acc ^ g.bits());
        if activation.side_flip {
            bits ^= 1u64 << (r.path_len() - 1);
        }
        RouterId::new_unchecked(r.layer(), r.path() ^ bits)
    }

    /// Every used pattern lies in the span of the generating set.
    pub fn closure_holds(&self) -> bool {
        let basis: Basis = self.generator_bits().into_iter().collect();
        self.used_patterns
            .iter()
            .all(|&p| basis.contains(self.pattern_space(p)))
    }

    /// Check the structural invariants: injective assignment, recorded
    /// patterns, span closure and flag count.
    pub fn validate(&self) -> Result<()> {
        let mut targets = BTreeSet::new();
        for (&f, &a) in &self.assignment {
            if f.layer() != self.layer || a.layer() != self.layer {
                return Err(invalid(format!("pair {f} -> {a} not on layer {}", self.layer)));
            }
            if !targets.insert(a) {
                return Err(invalid(format!("target {a} assigned twice")));
            }
            if !self.used_patterns.contains(&BitFlipPattern::between(f, a)) {
                return Err(invalid(format!("pattern of {f} -> {a} not recorded")));
            }
        }
        if !self.closure_holds() {
            return Err(invalid("used pattern outside the generated span"));
        }
        if self.flag_count != self.generating_set.len() {
            return Err(invalid("flag count differs from generating set size"));
        }
        Ok(())
    }

    /// Rank of the used patterns: the fewest flags that realize this
    /// assignment.
    pub fn used_rank(&self) -> usize {
        gf2::rank(self.used_patterns.iter().map(|&p| self.pattern_space(p)))
    }

    /// Rank of the used patterns with the side bit cleared: the flags needed
    /// when side crossings are applied by the repair machinery.
    pub fn side_hidden_rank(&self) -> usize {
        let len = self.layer - 1;
        gf2::rank(
            self.used_patterns
                .iter()
                .map(|p| p.bits() & !(1u64 << (len - 1))),
        )
    }
}

fn check_layer(layer: u32, faulty: &[RouterId], available: &[RouterId]) -> Result<()> {
    if layer < 2 {
        return Err(invalid(format!("assignments need layer >= 2, got {layer}")));
    }
    if let Some(r) = faulty.iter().chain(available).find(|r| r.layer() != layer) {
        return Err(invalid(format!("router {r} is not on layer {layer}")));
    }
    Ok(())
}

fn check_feasible(faulty: &[RouterId], available: &[RouterId]) -> Result<()> {
    if faulty.len() > available.len() {
        return Err(Error::Infeasible {
            faulty: faulty.len(),
            available: available.len(),
        });
    }
    Ok(())
}

/// `M[i][j] = faulty[i].path ^ available[j].path`.
pub fn bitflip_matrix(
    faulty: &[RouterId],
    available: &[RouterId],
) -> Result<Vec<Vec<BitFlipPattern>>> {
    if let Some(layer) = faulty.first().or(available.first()).map(|r| r.layer()) {
        check_layer(layer, faulty, available)?;
    }
    Ok(faulty
        .iter()
        .map(|&f| available.iter().map(|&a| BitFlipPattern::between(f, a)).collect())
        .collect())
}

fn sorted(routers: &[RouterId]) -> Vec<RouterId> {
    let mut v = routers.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Mask strategy: one flag per user-visible address bit, assignment first-fit
/// in canonical order.
pub fn mask_assignment(
    layer: u32,
    faulty: &[RouterId],
    available: &[RouterId],
) -> Result<AssignmentResult> {
    check_layer(layer, faulty, available)?;
    check_feasible(faulty, available)?;
    let assignment: BTreeMap<RouterId, RouterId> =
        sorted(faulty).into_iter().zip(sorted(available)).collect();
    let used_patterns = assignment
        .iter()
        .map(|(&f, &a)| BitFlipPattern::between(f, a))
        .collect();
    let len = layer - 1;
    // Unit vectors below the side bit.
    let generating_set: Vec<_> = (1..len).map(|i| BitFlipPattern::unit(len, i)).collect();
    Ok(AssignmentResult {
        layer,
        assignment,
        flag_count: generating_set.len(),
        generating_set,
        used_patterns,
        hidden_side_flip: true,
    })
}

/// Dense lookup from router path to its slot in the available list.
struct SlotTable {
    slots: Vec<u32>,
}

impl SlotTable {
    const NONE: u32 = u32::MAX;

    fn new(len: u32, available: &[RouterId]) -> Self {
        let mut slots = vec![Self::NONE; 1usize << len];
        for (j, a) in available.iter().enumerate() {
            slots[a.path() as usize] = j as u32;
        }
        Self { slots }
    }

    #[inline]
    fn get(&self, path: u64) -> Option<usize> {
        match self.slots[path as usize] {
            Self::NONE => None,
            j => Some(j as usize),
        }
    }
}

/// Greedy flag-qubit minimization.
///
/// Each round picks, among the patterns still present between unassigned
/// faulty and unassigned available routers, the one whose addition to the
/// generating set admits the largest injective assignment of the remaining
/// faulty routers (a maximum bipartite matching restricted to edges whose
/// pattern lies in the enlarged span). Ties go to the lexicographically
/// smallest pattern. The matching is committed and the pattern appended.
pub fn flag_qubit_minimization(
    layer: u32,
    faulty: &[RouterId],
    available: &[RouterId],
) -> Result<AssignmentResult> {
    check_layer(layer, faulty, available)?;
    check_feasible(faulty, available)?;
    let len = layer - 1;
    if len > crate::tree::MAX_DEPTH {
        return Err(invalid(format!("layer {layer} too deep for pattern search")));
    }
    let faulty = sorted(faulty);
    let available = sorted(available);
    let slots = SlotTable::new(len, &available);

    let mut free = vec![true; available.len()];
    let mut remaining: Vec<usize> = (0..faulty.len()).collect();
    let mut span: Vec<u64> = vec![0];
    let mut generating: Vec<u64> = Vec::new();
    let mut assignment = BTreeMap::new();

    let mut present = vec![false; 1usize << len];
    let mut candidates: Vec<u64> = Vec::new();
    let mut adj: Vec<Vec<usize>> = Vec::new();
    let mut matcher = Matcher::default();

    // Build edges for candidate `p`; returns the number of faulty routers with
    // at least one edge. Edges with patterns already in the span cannot exist
    // here: the previous round committed a maximum matching over that span.
    let build = |p: u64, span: &[u64], free: &[bool], remaining: &[usize], adj: &mut Vec<Vec<usize>>| {
        adj.resize_with(remaining.len(), Vec::new);
        let mut touched = 0;
        for (k, &fi) in remaining.iter().enumerate() {
            let row = &mut adj[k];
            row.clear();
            let fpath = faulty[fi].path();
            for &s in span {
                if let Some(j) = slots.get(fpath ^ s ^ p) {
                    if free[j] {
                        row.push(j);
                    }
                }
            }
            if !row.is_empty() {
                touched += 1;
            }
        }
        touched
    };

    while !remaining.is_empty() {
        candidates.clear();
        for &fi in &remaining {
            let fpath = faulty[fi].path();
            for (j, a) in available.iter().enumerate() {
                if free[j] {
                    let q = fpath ^ a.path();
                    if !present[q as usize] {
                        present[q as usize] = true;
                        candidates.push(q);
                    }
                }
            }
        }
        candidates.sort_unstable();
        for &q in &candidates {
            present[q as usize] = false;
        }

        let mut best: Option<(usize, u64)> = None;
        for &p in &candidates {
            let bound = build(p, &span, &free, &remaining, &mut adj);
            if matches!(best, Some((size, _)) if bound <= size) {
                continue;
            }
            matcher.reset(remaining.len(), available.len());
            let size = matcher.run(&adj[..remaining.len()]);
            if best.is_none_or(|(b, _)| size > b) {
                best = Some((size, p));
                if size == remaining.len() {
                    break;
                }
            }
        }
        let (size, p) = best.expect("a nonempty pattern matrix always has a candidate");
        debug_assert!(size > 0);

        build(p, &span, &free, &remaining, &mut adj);
        matcher.reset(remaining.len(), available.len());
        matcher.run(&adj[..remaining.len()]);
        let mut still = Vec::with_capacity(remaining.len() - size);
        for (k, &fi) in remaining.iter().enumerate() {
            match matcher.left[k] {
                Some(j) => {
                    free[j] = false;
                    assignment.insert(faulty[fi], available[j]);
                }
                None => still.push(fi),
            }
        }
        remaining = still;
        generating.push(p);
        let extra: Vec<u64> = span.iter().map(|&s| s ^ p).collect();
        span.extend(extra);
    }

    let used_patterns = assignment
        .iter()
        .map(|(&f, &a)| BitFlipPattern::between(f, a))
        .collect();
    Ok(AssignmentResult {
        layer,
        assignment,
        flag_count: generating.len(),
        generating_set: generating.into_iter().map(|b| BitFlipPattern::new(len, b)).collect(),
        used_patterns,
        hidden_side_flip: false,
    })
}

/// Replace the generating set by a GF(2) basis of the used patterns. The
/// assignment is unchanged and the flag count becomes the rank.
pub fn basis_reduction(result: &AssignmentResult) -> AssignmentResult {
    let basis: Basis = result
        .used_patterns
        .iter()
        .map(|&p| result.pattern_space(p))
        .collect();
    let len = result.layer - 1;
    let reduced = AssignmentResult {
        generating_set: basis
            .rows()
            .iter()
            .map(|&b| BitFlipPattern::new(len, b))
            .collect(),
        flag_count: basis.rank(),
        ..result.clone()
    };
    debug_assert!(reduced.closure_holds());
    reduced
}

/// A procedure mapping faulty routers to available routers on one layer.
pub trait Assigner {
    fn assign(
        &self,
        layer: u32,
        faulty: &[RouterId],
        available: &[RouterId],
    ) -> Result<AssignmentResult>;
}

impl<F> Assigner for F
where
    F: Fn(u32, &[RouterId], &[RouterId]) -> Result<AssignmentResult>,
{
    fn assign(&self, layer: u32, faulty: &[RouterId], available: &[RouterId]) -> Result<AssignmentResult> {
        self(layer, faulty, available)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[derive(clap::ValueEnum)]
pub enum AssignerKind {
    Mask,
    Flagmin,
    /// Greedy minimization followed by basis reduction.
    FlagminReduced,
}

impl Assigner for AssignerKind {
    fn assign(&self, layer: u32, faulty: &[RouterId], available: &[RouterId]) -> Result<AssignmentResult> {
        match self {
            AssignerKind::Mask => mask_assignment(layer, faulty, available),
            AssignerKind::Flagmin => flag_qubit_minimization(layer, faulty, available),
            AssignerKind::FlagminReduced => {
                flag_qubit_minimization(layer, faulty, available).map(|r| basis_reduction(&r))
            }
        }
    }
}

/// Serialize an assignment map as `[{from, to, pattern}]`.
pub(crate) mod pair_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Pair {
        from: RouterId,
        to: RouterId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pattern: Option<BitFlipPattern>,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<RouterId, RouterId>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(map.iter().map(|(&from, &to)| Pair {
            from,
            to,
            pattern: (from.layer() == to.layer()).then(|| BitFlipPattern::between(from, to)),
        }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BTreeMap<RouterId, RouterId>, D::Error> {
        let pairs = Vec::<Pair>::deserialize(d)?;
        Ok(pairs.into_iter().map(|p| (p.from, p.to)).collect())
    }
}
