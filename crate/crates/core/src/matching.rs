//! Maximum bipartite matching by augmenting paths.

/// Maximum matching of a bipartite graph given as adjacency lists from left
/// vertices to right vertices `0..right_len`. Returns the partner of every
/// left vertex. Deterministic: depends only on adjacency order.
pub fn maximum_matching(adj: &[Vec<usize>], right_len: usize) -> Vec<Option<usize>> {
    let mut matcher = Matcher::new(adj.len(), right_len);
    matcher.run(adj);
    matcher.left
}

/// Reusable matching state, for callers that solve many small instances.
#[derive(Debug, Default)]
pub struct Matcher {
    pub left: Vec<Option<usize>>,
    right: Vec<Option<usize>>,
    seen: Vec<u32>,
    stamp: u32,
}

impl Matcher {
    pub fn new(left_len: usize, right_len: usize) -> Self {
        let mut m = Self::default();
        m.reset(left_len, right_len);
        m
    }

    pub fn reset(&mut self, left_len: usize, right_len: usize) {
        self.left.clear();
        self.left.resize(left_len, None);
        self.right.clear();
        self.right.resize(right_len, None);
        if self.seen.len() < right_len {
            self.seen.resize(right_len, 0);
        }
    }

    /// Size of a maximum matching; partners are left in `self.left`.
    pub fn run(&mut self, adj: &[Vec<usize>]) -> usize {
        let mut size = 0;
        // Greedy pass first.
        for (u, edges) in adj.iter().enumerate() {
            if let Some(&v) = edges.iter().find(|&&v| self.right[v].is_none()) {
                self.left[u] = Some(v);
                self.right[v] = Some(u);
                size += 1;
            }
        }
        for u in 0..adj.len() {
            if self.left[u].is_some() || adj[u].is_empty() {
                continue;
            }
            self.stamp = self.stamp.wrapping_add(1);
            if self.stamp == 0 {
                self.seen.iter_mut().for_each(|s| *s = 0);
                self.stamp = 1;
            }
            if self.augment(adj, u) {
                size += 1;
            }
        }
        size
    }

    fn augment(&mut self, adj: &[Vec<usize>], u: usize) -> bool {
        for &v in &adj[u] {
            if self.seen[v] == self.stamp {
                continue;
            }
            self.seen[v] = self.stamp;
            let free = match self.right[v] {
                None => true,
                Some(w) => self.augment(adj, w),
            };
            if free {
                self.left[u] = Some(v);
                self.right[v] = Some(u);
                return true;
            }
        }
        false
    }
}
