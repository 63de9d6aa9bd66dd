//! Oracles shared by the integration tests. Nothing here calls into the
//! library's own counting or probability code.

#![allow(dead_code)]

use qram_repair::{QramTree, RouterId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Number of routers in a depth-`n` tree.
pub fn router_count(n: u32) -> usize {
    (1usize << n) - 1
}

/// Router with 0-based index `i` in breadth-first order.
pub fn router_at(i: usize) -> RouterId {
    let heap = i + 1;
    let layer = usize::BITS - heap.leading_zeros();
    RouterId::new(layer, (heap - (1 << (layer - 1))) as u64).unwrap()
}

/// Fault set encoded as a bitmask over breadth-first router indices.
pub fn tree_from_mask(n: u32, mask: u64, protected: bool) -> QramTree {
    let faulty = (0..router_count(n)).filter(|&i| (mask >> i) & 1 == 1).map(router_at);
    QramTree::with_faults(n, protected, faulty).unwrap()
}

/// Accessible leaf count by walking every address through a bitmask of
/// faults, independent of the tree type.
pub fn accessible_by_mask(n: u32, mask: u64) -> u64 {
    (0..1u64 << n)
        .filter(|&a| {
            (1..=n).all(|layer| {
                let path = a >> (n - layer + 1);
                let idx = (1usize << (layer - 1)) - 1 + path as usize;
                (mask >> idx) & 1 == 0
            })
        })
        .count() as u64
}

/// Exact moments over every fault configuration of a depth-`n` tree.
pub struct Enumeration {
    pub expected_faulty: f64,
    /// `p[l]`: probability of exactly `l` accessible addresses.
    pub p: Vec<f64>,
    pub unrepairable: f64,
}

/// Enumerate all fault configurations; with `protected`, the top three
/// routers are forced healthy and the probabilities are conditional.
pub fn enumerate(n: u32, eps: f64, protected: bool) -> Enumeration {
    let routers = router_count(n);
    let mut p = vec![0.0; (1 << n) + 1];
    let mut total_weight = 0.0;
    let mut expected = 0.0;
    for mask in 0u64..1 << routers {
        if protected && mask & 0b111 != 0 {
            continue;
        }
        let k = mask.count_ones() as i32;
        let free = if protected { routers as i32 - 3 } else { routers as i32 };
        let w = eps.powi(k) * (1.0 - eps).powi(free - k);
        let acc = accessible_by_mask(n, mask);
        p[acc as usize] += w;
        expected += w * ((1u64 << n) - acc) as f64;
        total_weight += w;
    }
    let half = 1usize << (n - 1);
    Enumeration {
        expected_faulty: expected / total_weight,
        unrepairable: p[..half].iter().sum::<f64>() / total_weight,
        p: p.into_iter().map(|v| v / total_weight).collect(),
    }
}

/// Random tree drawn with an RNG unrelated to the library's.
pub fn random_tree(rng: &mut ChaCha8Rng, n: u32, eps: f64, protected: bool) -> QramTree {
    let faulty: Vec<RouterId> = (0..router_count(n))
        .filter(|&i| !(protected && i < 3) && rng.gen_bool(eps))
        .map(router_at)
        .collect();
    QramTree::with_faults(n, protected, faulty).unwrap()
}

/// XOR of two paths computed one bit at a time.
pub fn xor_bits(a: u64, b: u64, len: u32) -> u64 {
    (0..len).fold(0, |acc, i| {
        let bit = ((a >> i) & 1) != ((b >> i) & 1);
        acc | (u64::from(bit) << i)
    })
}

/// Distinct random routers on one side of `layer`.
pub fn random_side_routers(rng: &mut ChaCha8Rng, layer: u32, side: u64, count: usize) -> Vec<RouterId> {
    let half = 1u64 << (layer - 2);
    let mut paths: Vec<u64> = (0..half).collect();
    for i in 0..count.min(paths.len()) {
        let j = rng.gen_range(i..paths.len());
        paths.swap(i, j);
    }
    paths
        .into_iter()
        .take(count)
        .map(|p| RouterId::new(layer, (side << (layer - 2)) | p).unwrap())
        .collect()
}

/// Rank over GF(2) by naive elimination on a vector of rows.
pub fn naive_rank(mut rows: Vec<u64>) -> usize {
    let mut rank = 0;
    for bit in (0..64).rev() {
        if let Some(i) = (rank..rows.len()).find(|&i| (rows[i] >> bit) & 1 == 1) {
            rows.swap(rank, i);
            for j in 0..rows.len() {
                if j != rank && (rows[j] >> bit) & 1 == 1 {
                    rows[j] ^= rows[rank];
                }
            }
            rank += 1;
        }
    }
    rank
}
