//! Thin wrapper around `rustfft` for real circular convolutions and correlations.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub(crate) type Spectrum = Vec<Complex<f64>>;

/// Forward and inverse plans of one length, shareable across threads.
#[derive(Clone)]
pub(crate) struct Circular {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Circular {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    /// Transform of a real array, zero-padded to the plan length.
    pub fn forward(&self, a: &[f64]) -> Spectrum {
        debug_assert!(a.len() <= self.n);
        let mut buf: Spectrum = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
        buf.resize(self.n, Complex::new(0.0, 0.0));
        self.fwd.process(&mut buf);
        buf
    }

    /// Real part of the normalized inverse transform.
    pub fn inverse(&self, mut buf: Spectrum) -> Vec<f64> {
        self.inv.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    /// `c[i] = sum_j a[(i - j) mod n] b[j]`.
    pub fn convolve(&self, a_hat: &[Complex<f64>], b: &[f64]) -> Vec<f64> {
        let b_hat = self.forward(b);
        let prod = a_hat.iter().zip(&b_hat).map(|(x, y)| x * y).collect();
        self.inverse(prod)
    }

    /// `c[k] = sum_s a[s] b[(s + k) mod n]`.
    pub fn correlate(&self, a_hat: &[Complex<f64>], b_hat: &[Complex<f64>]) -> Vec<f64> {
        let prod = a_hat.iter().zip(b_hat).map(|(x, y)| x.conj() * y).collect();
        self.inverse(prod)
    }
}
