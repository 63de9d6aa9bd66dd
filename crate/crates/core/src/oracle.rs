//! Independent checks for repair outcomes: leaf enumeration, query
//! simulation through flag activations, outcome verification and an
//! exhaustive minimum-flag search for tiny instances.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::flags::FlagActivation;
use crate::gf2::{self, BitFlipPattern};
use crate::iterative::RepairOutcome;
use crate::tree::{QramTree, RouterId};

/// Number of leaf addresses whose full root-to-leaf path is healthy, by
/// direct enumeration.
pub fn brute_force_accessible(tree: &QramTree) -> u64 {
    let n = tree.depth();
    (0..1u64 << n)
        .filter(|&a| path_is_healthy(tree, n, a))
        .count() as u64
}

fn path_is_healthy(tree: &QramTree, n: u32, address: u64) -> bool {
    (1..=n).all(|layer| {
        !tree.is_faulty(RouterId::new_unchecked(layer, address >> (n - layer + 1)))
    })
}

/// Per-layer flag activation tables derived from an outcome.
pub struct QuerySimulator<'a> {
    tree: &'a QramTree,
    outcome: &'a RepairOutcome,
    /// `tables[i]` maps an arrival prefix at layer `outcome.layers[i].layer`
    /// to the flags raised for it.
    tables: Vec<BTreeMap<u64, FlagActivation>>,
}

impl<'a> QuerySimulator<'a> {
    pub fn new(tree: &'a QramTree, outcome: &'a RepairOutcome) -> Result<Self> {
        if tree.depth() != outcome.n {
            return Err(invalid("outcome depth differs from tree depth"));
        }
        let mut tables = Vec::with_capacity(outcome.layers.len());
        for m in &outcome.layers {
            let mut table = BTreeMap::new();
            for (&from, &to) in m.assignments() {
                let act = m
                    .result
                    .activation(BitFlipPattern::between(from, to))
                    .ok_or_else(|| invalid(format!("reroute {from} -> {to} not generated by flags")))?;
                table.insert(from.path(), act);
            }
            tables.push(table);
        }
        Ok(Self {
            tree,
            outcome,
            tables,
        })
    }

    /// Physical address a query for `user_address` ends at, walking the
    /// tree layer by layer and applying flag-driven address flips.
    pub fn route(&self, user_address: u64) -> Result<u64> {
        let n = self.outcome.n;
        let mut a = (self.outcome.repairable_side << (n - 1)) | user_address;
        let mut next_table = 0;
        for layer in 1..=n {
            let shift = n - layer + 1;
            if let Some(m) = self.outcome.layers.get(next_table).filter(|m| m.layer == layer) {
                if let Some(&act) = self.tables[next_table].get(&(a >> shift)) {
                    let mut flip = 0u64;
                    for (i, g) in m.result.generating_set.iter().enumerate() {
                        if (act.flags >> i) & 1 == 1 {
                            flip ^= g.bits();
                        }
                    }
                    if act.side_flip {
                        flip ^= 1u64 << (layer - 2);
                    }
                    a ^= flip << shift;
                    // The whole upstream path changed.
                    for up in 1..layer {
                        self.check(user_address, up, a >> (n - up + 1))?;
                    }
                }
                next_table += 1;
            }
            self.check(user_address, layer, a >> shift)?;
        }
        Ok(a)
    }

    fn check(&self, user_address: u64, layer: u32, path: u64) -> Result<()> {
        let router = RouterId::new_unchecked(layer, path);
        if self.tree.is_faulty(router) {
            return Err(Error::SimulationFault {
                user_address,
                router,
            });
        }
        Ok(())
    }

    /// Read the word a query for `user_address` returns from `memory`.
    pub fn query<T: Clone>(&self, memory: &[T], user_address: u64) -> Result<T> {
        let a = self.route(user_address)?;
        memory
            .get(a as usize)
            .cloned()
            .ok_or_else(|| invalid(format!("memory has no cell {a}")))
    }
}

pub fn simulate_query<T: Clone>(
    tree: &QramTree,
    outcome: &RepairOutcome,
    memory: &[T],
    user_address: u64,
) -> Result<T> {
    QuerySimulator::new(tree, outcome)?.query(memory, user_address)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub user_address: u64,
    pub resolved: u64,
    pub expected_class: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryReport {
    pub injective: bool,
    pub all_targets_accessible: bool,
    pub healthy_fixed_points: bool,
    /// Resolution agrees with the outcome's final mapping.
    pub final_mapping_consistent: bool,
    /// Every layer mapping is well formed and every entry is used.
    pub layer_mappings_valid: bool,
    pub mismatches: Vec<Mismatch>,
}

impl QueryReport {
    pub fn all_ok(&self) -> bool {
        self.injective
            && self.all_targets_accessible
            && self.healthy_fixed_points
            && self.final_mapping_consistent
            && self.layer_mappings_valid
    }
}

pub fn verify_outcome(tree: &QramTree, outcome: &RepairOutcome) -> QueryReport {
    let mut report = QueryReport {
        injective: true,
        all_targets_accessible: true,
        healthy_fixed_points: true,
        final_mapping_consistent: true,
        layer_mappings_valid: true,
        mismatches: Vec::new(),
    };
    let n = tree.depth();
    let miss = |report: &mut QueryReport, u: u64, resolved: u64, class: String| {
        report.mismatches.push(Mismatch {
            user_address: u,
            resolved,
            expected_class: class,
        });
    };
    if outcome.n != n || outcome.repairable_side > 1 {
        report.layer_mappings_valid = false;
        miss(&mut report, 0, 0, "outcome shape does not fit tree".into());
        return report;
    }
    let side = outcome.repairable_side;
    let acc = tree.accessibility();

    // Arrival prefixes per layer, computed by an independent walk.
    let mut arrivals: BTreeMap<u32, BTreeSet<u64>> = BTreeMap::new();
    let mut owner: BTreeMap<u64, u64> = BTreeMap::new();
    for u in 0..1u64 << (n - 1) {
        let original = (side << (n - 1)) | u;
        let mut a = original;
        for m in &outcome.layers {
            let shift = n - m.layer + 1;
            arrivals.entry(m.layer).or_default().insert(a >> shift);
            if let Some(t) = m.assignments().get(&RouterId::new_unchecked(m.layer, a >> shift)) {
                a = (t.path() << shift) | (a & ((1u64 << shift) - 1));
            }
        }
        let resolved = outcome.resolve_address(u);
        if resolved != a {
            report.final_mapping_consistent = false;
            miss(&mut report, u, resolved, format!("walk ends at {a}"));
        }
        if let Some(prev) = owner.insert(resolved, u) {
            report.injective = false;
            miss(&mut report, u, resolved, format!("also served for user address {prev}"));
        }
        if !path_is_healthy(tree, n, resolved) {
            report.all_targets_accessible = false;
            miss(&mut report, u, resolved, "inaccessible leaf".into());
        }
        if path_is_healthy(tree, n, original) && resolved != original {
            report.healthy_fixed_points = false;
            miss(&mut report, u, resolved, format!("healthy address {original} moved"));
        }
        let leaf_user = RouterId::new_unchecked(n, original >> 1);
        let expected = outcome
            .final_mapping
            .get(&leaf_user)
            .map_or(original >> 1, |t| t.path());
        if resolved >> 1 != expected {
            report.final_mapping_consistent = false;
            miss(&mut report, u, resolved, format!("final mapping gives router {expected}"));
        }
    }

    let spare = 1 - side;
    let mut expected_layer = outcome.d_rr + 1;
    for m in &outcome.layers {
        let mut problems = Vec::new();
        if m.layer != expected_layer {
            problems.push(format!("layer {} out of sequence", m.layer));
        }
        expected_layer = m.layer + 1;
        if let Err(e) = m.result.validate() {
            problems.push(e.to_string());
        }
        let reached = arrivals.get(&m.layer);
        for (&from, &to) in m.assignments() {
            if to.side() != Some(spare) || !acc.is_accessible(to) {
                problems.push(format!("target {to} is not an accessible spare router"));
            }
            if !tree.is_faulty(from) {
                problems.push(format!("source {from} is healthy"));
            }
            if !reached.is_some_and(|r| r.contains(&from.path())) {
                problems.push(format!("source {from} is never reached"));
            }
        }
        for p in problems {
            report.layer_mappings_valid = false;
            miss(&mut report, 0, 0, format!("layer {}: {p}", m.layer));
        }
    }
    if expected_layer != n + 1 && !outcome.layers.is_empty()
        || outcome.layers.is_empty() && outcome.d_rr != n
    {
        report.layer_mappings_valid = false;
        miss(&mut report, 0, 0, "layers do not reach the last layer".into());
    }
    if outcome.flag_counts.len() != outcome.layers.len() {
        report.layer_mappings_valid = false;
        miss(&mut report, 0, 0, "flag counts do not match layers".into());
    }
    report
}

/// Largest instance accepted by [`brute_force_min_flags`].
pub const MAX_BRUTE_FAULTY: usize = 4;
pub const MAX_BRUTE_AVAILABLE: usize = 6;

/// Minimum over all injective assignments of the GF(2) rank of the used
/// patterns.
pub fn brute_force_min_flags(faulty: &[RouterId], available: &[RouterId]) -> Result<usize> {
    if faulty.len() > MAX_BRUTE_FAULTY || available.len() > MAX_BRUTE_AVAILABLE {
        return Err(invalid(format!(
            "brute force limited to {MAX_BRUTE_FAULTY} faulty and {MAX_BRUTE_AVAILABLE} available routers"
        )));
    }
    if faulty.len() > available.len() {
        return Err(Error::Infeasible {
            faulty: faulty.len(),
            available: available.len(),
        });
    }
    let mut best = usize::MAX;
    let mut chosen = Vec::with_capacity(faulty.len());
    search(faulty, available, 0, &mut chosen, &mut best);
    Ok(if faulty.is_empty() { 0 } else { best })
}

fn search(faulty: &[RouterId], available: &[RouterId], used: u32, chosen: &mut Vec<u64>, best: &mut usize) {
    if chosen.len() == faulty.len() {
        *best = (*best).min(gf2::rank(chosen.iter().copied()));
        return;
    }
    let f = faulty[chosen.len()];
    for (j, a) in available.iter().enumerate() {
        if used & (1 << j) == 0 {
            chosen.push(f.path() ^ a.path());
            search(faulty, available, used | (1 << j), chosen, best);
            chosen.pop();
        }
    }
}
