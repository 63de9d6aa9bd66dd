//! Relabel repair: map a smaller address space of depth `m` onto the
//! accessible part of a depth-`n` tree by steering some routers to a fixed
//! child ("one-way" routers).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tree::{Accessibility, QramTree, RouterId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    pub fn bit(self) -> u64 {
        match self {
            Direction::Left => 0,
            Direction::Right => 1,
        }
    }
}

/// Result of a successful relabel repair for depth `m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelabelPlan {
    pub m: u32,
    #[serde(with = "one_way_list")]
    pub one_way: BTreeMap<RouterId, Direction>,
    /// Routers reached by the `m - 1` logical routing bits, indexed by the
    /// logical prefix. They are found right subtree first.
    pub leaf_routers: Vec<RouterId>,
}

struct Search<'a> {
    n: u32,
    m: u32,
    acc: &'a Accessibility,
    one_way: BTreeMap<RouterId, Direction>,
    leaves: Vec<RouterId>,
}

impl Search<'_> {
    /// Addresses available below child `bit` of `r`. Children of a last-layer
    /// router are single addresses.
    fn child_avail(&self, r: RouterId, bit: u64) -> u64 {
        if r.layer() == self.n {
            1
        } else {
            self.acc.available(r.child(bit))
        }
    }

    fn visit(&mut self, r: RouterId, k: u32) -> bool {
        if k == self.m {
            self.leaves.push(r);
            return true;
        }
        let a_r = self.child_avail(r, 1);
        let a_l = self.child_avail(r, 0);
        let need = 1u64 << (self.m - k);
        if r.layer() < self.n && a_r >= need && a_l >= need {
            let leaves = self.leaves.len();
            let one_way = self.one_way.clone();
            if self.visit(r.right(), k + 1) && self.visit(r.left(), k + 1) {
                return true;
            }
            self.leaves.truncate(leaves);
            self.one_way = one_way;
        }
        if r.layer() < self.n && a_r >= 2 * need {
            self.one_way.insert(r, Direction::Right);
            self.visit(r.right(), k)
        } else if r.layer() < self.n && a_l >= 2 * need {
            self.one_way.insert(r, Direction::Left);
            self.visit(r.left(), k)
        } else {
            false
        }
    }
}

/// Attempt to relabel the tree into a depth-`m` address space.
pub fn relabel_repair(tree: &QramTree, m: u32) -> Result<RelabelPlan> {
    relabel_with(tree, &tree.accessibility(), m)
}

fn relabel_with(tree: &QramTree, acc: &Accessibility, m: u32) -> Result<RelabelPlan> {
    let n = tree.depth();
    if m == 0 || m > n {
        return Err(invalid(format!("relabel depth {m} outside [1, {n}]")));
    }
    if !acc.is_accessible(RouterId::ROOT) {
        return Err(Error::RelabelFailure { m });
    }
    let mut search = Search {
        n,
        m,
        acc,
        one_way: BTreeMap::new(),
        leaves: Vec::new(),
    };
    if search.visit(RouterId::ROOT, 1) {
        Ok(RelabelPlan {
            m,
            one_way: search.one_way,
            leaf_routers: search.leaves,
        })
    } else {
        Err(Error::RelabelFailure { m })
    }
}

/// Largest `m` in `2..=n` for which relabel repair succeeds.
pub fn largest_relabel_depth(tree: &QramTree) -> Option<u32> {
    let acc = tree.accessibility();
    (2..=tree.depth())
        .rev()
        .find(|&m| relabel_with(tree, &acc, m).is_ok())
}

/// Largest relabel depth together with its plan.
pub fn best_relabel(tree: &QramTree) -> Option<RelabelPlan> {
    let acc = tree.accessibility();
    (2..=tree.depth())
        .rev()
        .find_map(|m| relabel_with(tree, &acc, m).ok())
}

impl RelabelPlan {
    /// Physical address read for logical address `x` (an `m`-bit value).
    pub fn physical_address(&self, tree: &QramTree, x: u64) -> Result<u64> {
        if x >> self.m != 0 {
            return Err(invalid(format!("logical address {x} has more than {} bits", self.m)));
        }
        let acc = tree.accessibility();
        let n = tree.depth();
        let mut r = self.leaf_routers[(x >> 1) as usize];
        while r.layer() < n {
            r = if acc.available(r.right()) >= 2 {
                r.right()
            } else {
                r.left()
            };
        }
        Ok((r.path() << 1) | (x & 1))
    }

    /// Physical addresses of all `2^m` logical addresses, in logical order.
    pub fn address_map(&self, tree: &QramTree) -> Result<Vec<u64>> {
        (0..1u64 << self.m)
            .map(|x| self.physical_address(tree, x))
            .collect()
    }
}

mod one_way_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        router: RouterId,
        dir: Direction,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<RouterId, Direction>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(map.iter().map(|(&router, &dir)| Entry { router, dir }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BTreeMap<RouterId, Direction>, D::Error> {
        Ok(Vec::<Entry>::deserialize(d)?
            .into_iter()
            .map(|e| (e.router, e.dir))
            .collect())
    }
}
