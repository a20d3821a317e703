//! Mayer graphs, truncated cluster expansions and the Ursell recursion.

pub mod graphs;
mod series;
mod ursell;

pub use graphs::{connected_graphs, connected_sum, is_connected, GraphSet, MAX_VERTICES};
pub use series::{Assembly, ClusterSeries};
pub use ursell::{ursell_from_correlations, CorrelationTable};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, Kernel2D};
use crate::potentials::{gas_phase_mu0, stability_bound, PairPotential};

/// Largest particle number kept in the cluster sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterTruncation {
    n_max: usize,
}

impl ClusterTruncation {
    pub fn new(n_max: usize) -> Result<Self> {
        if !(2..=5).contains(&n_max) {
            return Err(Error::InvalidArgument(format!(
                "truncation order must lie in 2..=5, got {n_max}"
            )));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }
}

impl Default for ClusterTruncation {
    fn default() -> Self {
        Self { n_max: 4 }
    }
}

/// Where the external vertices of a graph integral sit.
#[derive(Clone, Copy, Debug)]
pub enum Externals<'a> {
    /// One external vertex at the origin.
    Origin,
    /// Vertices at `x` and `0`, for every grid node `x`.
    PairSlice,
    /// Vertices at the given grid nodes.
    Nodes(&'a [usize]),
}

/// Result of [`phi_n`].
#[derive(Clone, Debug, PartialEq)]
pub enum GraphIntegral {
    Scalar(f64),
    Function(GridFunction),
}

/// Brute-force `∫ φ⁽ⁿ⁾` over the internal vertices, which range over the
/// periodic ring of the grid. Serves as the reference for the fast assembly.
pub fn phi_n(
    f: &GridFunction,
    n: usize,
    externals: Externals<'_>,
    trunc: ClusterTruncation,
) -> Result<GraphIntegral> {
    if n > trunc.n_max() {
        return Err(Error::Unsupported(format!(
            "graph order {n} exceeds the truncation order {}",
            trunc.n_max()
        )));
    }
    let spec = *f.spec();
    let k = spec.center();
    let fixed_count = match externals {
        Externals::Origin => 1,
        Externals::PairSlice => 2,
        Externals::Nodes(v) => v.len(),
    };
    if fixed_count == 0 || fixed_count > n {
        return Err(Error::InvalidArgument(format!(
            "{fixed_count} external vertices for a graph of order {n}"
        )));
    }
    if n - fixed_count > 3 {
        return Err(Error::Unsupported(format!(
            "{} internal vertices exceed the quadrature dimension guard of 3",
            n - fixed_count
        )));
    }
    let f_off = f.by_offset();
    let p = spec.period() as isize;
    let fv = |a: isize, b: isize| f_off[(a - b).rem_euclid(p) as usize];
    let internals = n - fixed_count;
    let h = spec.spacing();
    let integral = |ext: &[isize]| -> f64 {
        let mut pos = [0isize; MAX_VERTICES];
        pos[..ext.len()].copy_from_slice(ext);
        let total = (p as usize).pow(internals as u32);
        let mut acc = 0.0;
        for idx in 0..total {
            let mut r = idx;
            for v in 0..internals {
                pos[ext.len() + v] = (r % p as usize) as isize;
                r /= p as usize;
            }
            let mut w = [[0.0; MAX_VERTICES]; MAX_VERTICES];
            for i in 0..n {
                for j in i + 1..n {
                    w[i][j] = fv(pos[i], pos[j]);
                    w[j][i] = w[i][j];
                }
            }
            acc += connected_sum(n, &w);
        }
        acc * h.powi(internals as i32)
    };
    Ok(match externals {
        Externals::Origin => GraphIntegral::Scalar(integral(&[k as isize])),
        Externals::Nodes(v) => {
            let ext: Vec<isize> = v.iter().map(|&i| i as isize).collect();
            GraphIntegral::Scalar(integral(&ext))
        }
        Externals::PairSlice => {
            use rayon::prelude::*;
            let vals: Vec<f64> = (0..spec.points())
                .into_par_iter()
                .map(|i| integral(&[i as isize, k as isize]))
                .collect();
            GraphIntegral::Function(GridFunction::new(spec, vals)?)
        }
    })
}

/// Value of a cluster function of order `m`.
#[derive(Clone, Debug, PartialEq)]
pub enum ClusterValue {
    Scalar(f64),
    Function(GridFunction),
    Kernel(Kernel2D),
}

fn warn_if_dense(p: &PairPotential, z: f64) {
    if let Ok(sb) = stability_bound(p, 4, 2000, 0) {
        let mu0 = gas_phase_mu0(p, sb.b);
        let mu = z.ln() / p.beta();
        if mu > mu0 {
            log::warn!("activity {z} lies above the gas-phase bound e^(beta mu0) = {}", (p.beta() * mu0).exp());
        }
    }
}

/// Truncated cluster function `ω⁽ᵐ⁾` at activity `z`: `m = 1` density,
/// `m = 2` the pair function, `m = 3` the kernel `ω⁽³⁾(x,0,x')`, `m = 4` the
/// kernel `K₄(x,x') = ∫ω⁽⁴⁾(x,0,x'',x'+x'') dx''` at its lowest order.
pub fn omega_m(p: &PairPotential, z: f64, m: usize, trunc: ClusterTruncation) -> Result<ClusterValue> {
    if !(z > 0.0) {
        return Err(Error::InvalidArgument(format!("activity must be positive, got {z}")));
    }
    if !(1..=4).contains(&m) {
        return Err(Error::InvalidArgument(format!("cluster order must lie in 1..=4, got {m}")));
    }
    warn_if_dense(p, z);
    let level = if m >= 3 { Assembly::WithKernels } else { Assembly::Pair };
    let s = ClusterSeries::assemble(p, trunc, level)?;
    Ok(match m {
        1 => ClusterValue::Scalar(s.density(z)),
        2 => ClusterValue::Function(s.omega2(z)),
        3 => ClusterValue::Kernel(s.omega3(z)?),
        _ => ClusterValue::Kernel(s.k4(z)?),
    })
}

/// Truncated `βp = Σ_{n ≤ n_max} zⁿ/n! ∫φ⁽ⁿ⁾(0, x₂..xₙ)`.
pub fn pressure_series(p: &PairPotential, z: f64, trunc: ClusterTruncation) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::InvalidArgument(format!("activity must be positive, got {z}")));
    }
    warn_if_dense(p, z);
    Ok(ClusterSeries::assemble(p, trunc, Assembly::Pair)?.beta_pressure(z))
}

#[cfg(test)]
mod tests;
