//! Connected labeled graphs and sums of edge-weight products over them.

use crate::error::{Error, Result};

/// Largest vertex count handled by the enumerator and the connected-sum evaluator.
pub const MAX_VERTICES: usize = 5;

/// Index of the unordered pair `(i, j)`, `i < j`, among the pairs of `n` vertices.
pub(crate) fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// All pairs `(i, j)`, `i < j`, in [`pair_index`] order.
pub(crate) fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

/// Whether the graph with edge bitmask `mask` (bits in [`pair_index`] order) is connected.
pub fn is_connected(n: usize, mask: u32) -> bool {
    if n <= 1 {
        return true;
    }
    let edges = pairs(n);
    let mut reached = 1u32;
    loop {
        let before = reached;
        for (b, &(i, j)) in edges.iter().enumerate() {
            if mask >> b & 1 == 1 && (reached >> i & 1) != (reached >> j & 1) {
                reached |= (1 << i) | (1 << j);
            }
        }
        if reached == before {
            break;
        }
    }
    reached == (1 << n) - 1
}

/// Connected labeled graphs on `n` vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphSet {
    n: usize,
    masks: Vec<u32>,
}

impl GraphSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// Edge bitmasks in [`pair_index`] order.
    pub fn masks(&self) -> &[u32] {
        &self.masks
    }

    /// Edge lists with vertices labeled `1..=n`.
    pub fn graphs(&self) -> Vec<Vec<(usize, usize)>> {
        let edges = pairs(self.n);
        self.masks
            .iter()
            .map(|&m| {
                edges
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| m >> b & 1 == 1)
                    .map(|(_, &(i, j))| (i + 1, j + 1))
                    .collect()
            })
            .collect()
    }

    /// `Σ_G Π_{(i,j)∈G} w[i][j]` by explicit enumeration.
    pub fn weighted_sum(&self, w: &[[f64; MAX_VERTICES]; MAX_VERTICES]) -> f64 {
        let edges = pairs(self.n);
        self.masks
            .iter()
            .map(|&m| {
                edges
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| m >> b & 1 == 1)
                    .map(|(_, &(i, j))| w[i][j])
                    .product::<f64>()
            })
            .sum()
    }
}

/// Enumerates every connected labeled graph on `n` vertices exactly once.
pub fn connected_graphs(n: usize) -> Result<GraphSet> {
    if !(1..=MAX_VERTICES).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "graph enumeration supports 1..={MAX_VERTICES} vertices, got {n}"
        )));
    }
    let npairs = n * (n - 1) / 2;
    let masks = (0..1u32 << npairs).filter(|&m| is_connected(n, m)).collect();
    Ok(GraphSet { n, masks })
}

/// `Σ_{G connected on n vertices} Π_{(i,j)∈G} w[i][j]` by the subset recursion
/// `C(S) = A(S) - Σ_{min S ∈ T ⊊ S} C(T) A(S∖T)` with `A(S) = Π_{i<j∈S} (1 + w_ij)`.
pub fn connected_sum(n: usize, w: &[[f64; MAX_VERTICES]; MAX_VERTICES]) -> f64 {
    debug_assert!((1..=MAX_VERTICES).contains(&n));
    let full = (1usize << n) - 1;
    let mut all = [1.0f64; 1 << MAX_VERTICES];
    for s in 1..=full {
        let top = usize::BITS - 1 - s.leading_zeros();
        let rest = s & !(1 << top);
        let mut a = all[rest];
        for j in 0..top as usize {
            if rest >> j & 1 == 1 {
                a *= 1.0 + w[j][top as usize];
            }
        }
        all[s] = a;
    }
    // Only subsets containing vertex 0 are needed for C(full).
    let mut conn = [0.0f64; 1 << MAX_VERTICES];
    let mut s = 1usize;
    while s <= full {
        if s & 1 == 1 {
            let mut c = all[s];
            let others = s & !1;
            // T = {0} ∪ t with t a proper subset of `others`.
            let mut t = (others.wrapping_sub(1)) & others;
            loop {
                if t != others {
                    let tt = t | 1;
                    c -= conn[tt] * all[s & !tt];
                }
                if t == 0 {
                    break;
                }
                t = (t - 1) & others;
            }
            conn[s] = c;
        }
        s += 1;
    }
    conn[full]
}
