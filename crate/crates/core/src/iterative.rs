//! Layer-by-layer repair: the user addresses one half of the tree and
//! queries that would reach a faulty router are rerouted to spare routers on
//! the other half.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::flags::{pair_list, Assigner, AssignmentResult};
use crate::relabel::largest_relabel_depth;
use crate::tree::{Accessibility, QramTree, RouterId};

/// Repairs decided at one layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerMapping {
    pub layer: u32,
    /// Reachable faulty routers on the repairable side.
    pub faulty: Vec<RouterId>,
    /// Faulty children of earlier targets that need a new target.
    pub reassigned: Vec<RouterId>,
    /// Number of spare routers offered to the assigner.
    pub available: usize,
    /// Assignment keyed by the router a query arrives at.
    pub result: AssignmentResult,
}

impl LayerMapping {
    pub fn assignments(&self) -> &BTreeMap<RouterId, RouterId> {
        &self.result.assignment
    }

    pub fn is_empty(&self) -> bool {
        self.result.assignment.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairOutcome {
    pub n: u32,
    pub repairable_side: u64,
    pub d_rr: u32,
    pub layers: Vec<LayerMapping>,
    pub flag_counts: Vec<usize>,
    /// Leaf-layer routers of the user's half that are served elsewhere, and
    /// the routers that serve them.
    #[serde(with = "pair_list")]
    pub final_mapping: BTreeMap<RouterId, RouterId>,
}

/// Side with strictly more accessible addresses; ties go left.
pub fn choose_repairable_side(tree: &QramTree) -> u64 {
    side_from(&tree.accessibility())
}

fn side_from(acc: &Accessibility) -> u64 {
    let [left, right] = acc.side_counts();
    u64::from(right > left)
}

/// Deepest layer down to which every router on `side` is healthy.
fn healthy_prefix_depth(tree: &QramTree, side: u64) -> u32 {
    tree.faulty_routers()
        .filter(|r| r.side() == Some(side))
        .map(|r| r.layer() - 1)
        .min()
        .unwrap_or(tree.depth())
}

pub fn iterative_repair(tree: &QramTree, assigner: &dyn Assigner) -> Result<RepairOutcome> {
    let n = tree.depth();
    if n < 2 || !tree.top_healthy() {
        return Err(invalid("iterative repair needs depth >= 2 and a healthy top"));
    }
    if !tree.is_repairable() {
        return Err(invalid("tree has fewer than half of its addresses accessible"));
    }
    let acc = tree.accessibility();
    let side = side_from(&acc);
    let spare = 1 - side;
    let relabel = largest_relabel_depth(tree).unwrap_or(1);
    let d_rr = relabel.min(healthy_prefix_depth(tree, side));

    // Queries with user prefix `s` currently sit at router `overall[s]`.
    let mut overall: BTreeMap<RouterId, RouterId> = BTreeMap::new();
    let mut layers = Vec::new();
    let mut flag_counts = Vec::new();

    for layer in d_rr + 1..=n {
        let sources: BTreeSet<RouterId> = overall.keys().copied().collect();
        let targets: BTreeSet<RouterId> = overall.values().copied().collect();

        let mut inherited = BTreeMap::new();
        let mut pending: Vec<(RouterId, RouterId)> = Vec::new();
        for (&s, &t) in &overall {
            for b in 0..2 {
                let (sb, tb) = (s.child(b), t.child(b));
                if tree.is_faulty(tb) {
                    pending.push((sb, tb));
                } else {
                    inherited.insert(sb, tb);
                }
            }
        }
        let reassigned: Vec<RouterId> = pending.iter().map(|&(_, tb)| tb).collect();

        let faulty: Vec<RouterId> = tree
            .faulty_routers()
            .filter(|r| r.layer() == layer && r.side() == Some(side))
            .filter(|r| {
                let p = r.parent().expect("layer >= 2");
                acc.is_accessible(p) && !sources.contains(&p)
            })
            .collect();

        let available: Vec<RouterId> = tree
            .layer_routers(layer)
            .filter(|r| r.side() == Some(spare) && acc.is_accessible(*r))
            .filter(|r| !targets.contains(&r.parent().expect("layer >= 2")))
            .collect();

        let mut needing: Vec<RouterId> = faulty.iter().chain(&reassigned).copied().collect();
        needing.sort_unstable();
        if needing.len() > available.len() {
            return Err(Error::IterativeFailure {
                layer,
                faulty: needing.len(),
                available: available.len(),
            });
        }
        let result = assigner.assign(layer, &needing, &available)?;
        debug_assert!(result.flag_count <= (layer - 1) as usize);
        debug_assert!(result
            .assignment
            .values()
            .all(|t| available.binary_search(t).is_ok()));

        let mut next = inherited;
        for &(sb, tb) in &pending {
            next.insert(sb, result.assignment[&tb]);
        }
        for &f in &faulty {
            next.insert(f, result.assignment[&f]);
        }
        overall = next;

        flag_counts.push(result.flag_count);
        layers.push(LayerMapping {
            layer,
            faulty,
            reassigned,
            available: available.len(),
            result,
        });
    }

    Ok(RepairOutcome {
        n,
        repairable_side: side,
        d_rr,
        layers,
        flag_counts,
        final_mapping: overall,
    })
}

impl RepairOutcome {
    /// Sequential layer-repair rounds, `n - d_rr`.
    pub fn rounds(&self) -> usize {
        self.layers.len()
    }

    pub fn max_flags(&self) -> usize {
        self.flag_counts.iter().copied().max().unwrap_or(0)
    }

    pub fn user_address_count(&self) -> u64 {
        1u64 << (self.n - 1)
    }

    /// Physical `n`-bit address served for the `(n-1)`-bit user address.
    pub fn resolve_address(&self, user_address: u64) -> u64 {
        let n = self.n;
        let mut a = (self.repairable_side << (n - 1)) | user_address;
        for m in &self.layers {
            let shift = n - m.layer + 1;
            let prefix = RouterId::new_unchecked(m.layer, a >> shift);
            if let Some(t) = m.assignments().get(&prefix) {
                a = (t.path() << shift) | (a & ((1u64 << shift) - 1));
            }
        }
        a
    }

    /// Move every user datum to the cell its query resolves to. Cells not
    /// served by any user address hold `filler`.
    pub fn relocate_data<T: Clone>(&self, memory: &[T], filler: T) -> Result<Vec<T>> {
        let size = 1usize << self.n;
        if memory.len() != size {
            return Err(invalid(format!(
                "memory has {} words, expected {size}",
                memory.len()
            )));
        }
        let mut out = vec![filler; size];
        let base = (self.repairable_side << (self.n - 1)) as usize;
        for u in 0..self.user_address_count() {
            out[self.resolve_address(u) as usize] = memory[base | u as usize].clone();
        }
        Ok(out)
    }
}

pub fn resolve_address(outcome: &RepairOutcome, user_address: u64) -> u64 {
    outcome.resolve_address(user_address)
}

pub fn relocate_data<T: Clone>(memory: &[T], outcome: &RepairOutcome, filler: T) -> Result<Vec<T>> {
    outcome.relocate_data(memory, filler)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flags::AssignerKind;

    fn r(s: &str) -> RouterId {
        s.parse().unwrap()
    }

    fn tree(n: u32, faulty: &[&str]) -> QramTree {
        QramTree::with_faults(n, true, faulty.iter().map(|s| r(s))).unwrap()
    }

    #[test]
    fn side_choice() {
        assert_eq!(choose_repairable_side(&tree(3, &[])), 0);
        assert_eq!(choose_repairable_side(&tree(3, &["3:11"])), 0);
        assert_eq!(choose_repairable_side(&tree(3, &["3:01"])), 1);
    }

    #[test]
    fn healthy_tree_is_identity() {
        let t = tree(5, &[]);
        let out = iterative_repair(&t, &AssignerKind::Flagmin).unwrap();
        assert_eq!(out.d_rr, 5);
        assert!(out.layers.is_empty());
        assert!(out.final_mapping.is_empty());
        for u in 0..16 {
            assert_eq!(out.resolve_address(u), u);
        }
    }

    #[test]
    fn single_reroute_at_layer_three() {
        let t = tree(4, &["3:01", "3:11"]);
        let out = iterative_repair(&t, &AssignerKind::Flagmin).unwrap();
        assert_eq!(out.repairable_side, 0);
        assert_eq!(out.d_rr, 2);
        assert_eq!(out.rounds(), 2);
        let l3 = &out.layers[0];
        assert_eq!(l3.layer, 3);
        assert_eq!(l3.assignments().len(), 1);
        assert_eq!(l3.assignments()[&r("3:01")], r("3:10"));
        assert!(out.layers[1].is_empty());
        // User addresses 1xx sit under router 3:01 and move under 3:10.
        for u in 0b100..0b1000 {
            assert_eq!(out.resolve_address(u), 0b1000 | (u & 0b11));
        }
        for u in 0..0b100 {
            assert_eq!(out.resolve_address(u), u);
        }
    }

    #[test]
    fn reassignment_when_target_child_is_faulty() {
        let t = tree(5, &["4:001", "4:110", "5:1000", "5:1010"]);
        let out = iterative_repair(&t, &AssignerKind::Flagmin).unwrap();
        assert_eq!(out.repairable_side, 0);
        assert_eq!(out.d_rr, 3);
        let l5 = out.layers.iter().find(|m| m.layer == 5).unwrap();
        assert!(!l5.reassigned.is_empty());
        let images: BTreeSet<u64> = (0..16).map(|u| out.resolve_address(u)).collect();
        assert_eq!(images.len(), 16);
        let acc = t.accessibility();
        for a in images {
            assert!(acc.is_accessible(RouterId::new(5, a >> 1).unwrap()));
        }
    }

    #[test]
    fn relocation_moves_rerouted_words() {
        let t = tree(4, &["3:01", "3:11"]);
        let out = iterative_repair(&t, &AssignerKind::Mask).unwrap();
        let memory: Vec<u32> = (100..116).collect();
        let moved = out.relocate_data(&memory, 0).unwrap();
        assert_eq!(moved[0b1000], 104);
        assert_eq!(moved[0b1011], 107);
        assert_eq!(moved[0b0010], 102);
        assert_eq!(moved[0b0100], 0);
        assert!(out.relocate_data(&memory[1..], 0).is_err());
    }

    #[test]
    fn rejects_unrepairable() {
        let t = QramTree::with_faults(3, false, [r("2:0"), r("3:10")]).unwrap();
        assert!(iterative_repair(&t, &AssignerKind::Mask).is_err());
    }
}
