//! Ursell (truncated) functions from correlation functions by set-partition recursion.

use crate::error::{Error, Result};

/// Correlation values `ρ⁽|S|⁾(x_S)` for every nonempty subset `S` of `m ≤ 4` points.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTable {
    m: usize,
    values: Vec<f64>,
}

impl CorrelationTable {
    /// `rho(mask)` must return the correlation function of the points whose bits are set.
    pub fn from_fn(m: usize, rho: impl Fn(usize) -> f64) -> Result<Self> {
        if !(1..=4).contains(&m) {
            return Err(Error::InvalidArgument(format!(
                "Ursell recursion supports 1..=4 points, got {m}"
            )));
        }
        let mut values = vec![0.0; 1 << m];
        for (s, v) in values.iter_mut().enumerate().skip(1) {
            *v = rho(s);
        }
        Ok(Self { m, values })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rho(&self, mask: usize) -> f64 {
        self.values[mask]
    }

    /// `ω(S)` for every subset, from `ρ(S) = Σ_{partitions π of S} Π_{B∈π} ω(B)`.
    pub fn ursell(&self) -> Vec<f64> {
        let full = (1usize << self.m) - 1;
        let mut omega = vec![0.0; full + 1];
        // partitions[S] = Σ over all partitions of S of Π ω(B); partitions[∅] = 1.
        let mut partitions = vec![0.0; full + 1];
        partitions[0] = 1.0;
        let mut order: Vec<usize> = (1..=full).collect();
        order.sort_by_key(|s| s.count_ones());
        for s in order {
            let low = s & s.wrapping_neg();
            let rest = s & !low;
            // Blocks B = low ∪ t, t ⊆ rest; the block B = S is the unknown ω(S).
            let mut acc = 0.0;
            let mut t = rest;
            loop {
                let b = low | t;
                if b != s {
                    acc += omega[b] * partitions[s & !b];
                }
                if t == 0 {
                    break;
                }
                t = (t - 1) & rest;
            }
            omega[s] = self.values[s] - acc;
            partitions[s] = self.values[s];
        }
        omega
    }
}

/// `ω⁽ᵐ⁾` at each point set, for tables of a common order `m ≤ 4`.
pub fn ursell_from_correlations(tables: &[CorrelationTable]) -> Result<Vec<f64>> {
    tables
        .iter()
        .map(|t| {
            if t.m > 4 {
                return Err(Error::InvalidArgument("Ursell recursion supports m <= 4".into()));
            }
            Ok(t.ursell()[(1 << t.m) - 1])
        })
        .collect()
}
