//! Thermodynamics at fixed `(μ, u)`: density, pressure, pair correlation and
//! their first derivatives, the density-constrained chemical potential, and a
//! Kirkwood–Salsburg residual.
//!
//! Products of series are truncated at total order `n_max` in the activity,
//! so `ρ⁽²⁾ = ω⁽²⁾ + ρ²` means the truncated product. With this convention the
//! derivative identities hold exactly for the truncated quantities.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::{Assembly, ClusterSeries, ClusterTruncation};
use crate::error::{Error, Result};
use crate::grid::{convolve_periodic, inner, integrate, GridFunction};
use crate::potentials::{gas_phase_mu0, stability_bound, PairPotential};

/// Seed of the configuration search used for the gas-phase bound.
const STABILITY_SEED: u64 = 0x5eed;

/// Forward state at one `(μ, u)`.
#[derive(Clone, Debug)]
pub struct ThermoState {
    pub z: f64,
    pub mu: f64,
    pub beta: f64,
    pub rho: f64,
    pub beta_p: f64,
    pub omega2: GridFunction,
    /// Pair correlation `ω⁽²⁾ + ρ²` (truncated product).
    pub rho2: GridFunction,
    pub d_mu_rho: f64,
    pub d_mu_omega2: GridFunction,
    pub grad_u_rho: GridFunction,
    pub trunc: ClusterTruncation,
    series: Arc<ClusterSeries>,
}

/// `Σ_{i+j=n} a_i b_j` for `n ≤ n_max`.
pub(crate) fn cauchy(a: &[f64], b: &[f64], n_max: usize) -> Vec<f64> {
    (0..=n_max)
        .map(|n| (0..=n).map(|i| a[i] * b[n - i]).sum())
        .collect()
}

pub(crate) fn powers(z: f64, n_max: usize) -> Vec<f64> {
    (0..=n_max).map(|n| z.powi(n as i32)).collect()
}

pub(crate) fn sum_scalar(c: &[f64], zp: &[f64]) -> f64 {
    c.iter().zip(zp).map(|(a, b)| a * b).sum()
}

pub(crate) fn sum_functions(c: &[GridFunction], zp: &[f64]) -> GridFunction {
    let mut out = GridFunction::zeros(*c[0].spec());
    for (f, &w) in c.iter().zip(zp) {
        if w != 0.0 {
            out = out.add_scaled(w, f);
        }
    }
    out
}

impl ThermoState {
    /// Builds the state from assembled coefficients.
    pub fn from_series(series: Arc<ClusterSeries>, beta: f64, mu: f64, trunc: ClusterTruncation) -> Self {
        let n = series.n_max();
        let z = (beta * mu).exp();
        let zp = powers(z, n);
        let rho_c = series.rho_coefficients();
        let rho = sum_scalar(rho_c, &zp);
        let beta_p = series.beta_pressure(z);
        let w2: Vec<GridFunction> = (0..=n).map(|k| series.omega2_coefficient(k).clone()).collect();
        let omega2 = sum_functions(&w2, &zp);
        let j: Vec<f64> = (0..=n).map(|k| series.omega2_integral(k)).collect();
        let i3 = Self::row_integral_coefficients(&series);
        let i3z = sum_functions(&i3, &zp);
        let rr = cauchy(rho_c, rho_c, n);
        let rho2 = sum_functions(
            &(0..=n).map(|k| w2[k].map(|v| v + rr[k])).collect::<Vec<_>>(),
            &zp,
        );
        let rho_j = sum_scalar(&cauchy(rho_c, &j, n), &zp);
        let d_mu_rho = beta * (rho + sum_scalar(&j, &zp));
        let d_mu_omega2 = omega2.scaled(2.0 * beta).add_scaled(beta, &i3z);
        let grad_u_rho = rho2
            .scaled(-beta)
            .add_scaled(-0.5 * beta, &i3z)
            .map(|v| v - beta * rho_j);
        Self {
            z,
            mu,
            beta,
            rho,
            beta_p,
            omega2,
            rho2,
            d_mu_rho,
            d_mu_omega2,
            grad_u_rho,
            trunc,
            series,
        }
    }

    /// Row integrals `∫ω⁽³⁾_n(x,0,x')dx'` per order; without kernels they follow
    /// from relabeling the internal vertices, `(n-2) ω⁽²⁾_n`.
    fn row_integral_coefficients(series: &ClusterSeries) -> Vec<GridFunction> {
        (0..=series.n_max())
            .map(|k| {
                if k < 3 {
                    GridFunction::zeros(*series.spec())
                } else if series.omega3_coefficient(k).is_some() {
                    series.omega3_row_integral(k).clone()
                } else {
                    series.omega2_coefficient(k).scaled((k - 2) as f64)
                }
            })
            .collect()
    }

    pub fn series(&self) -> &Arc<ClusterSeries> {
        &self.series
    }

    pub fn n_max(&self) -> usize {
        self.series.n_max()
    }

    /// Per-order coefficients of `∫ω⁽³⁾(x,0,x')dx'`.
    pub(crate) fn i3_coefficients(&self) -> Vec<GridFunction> {
        Self::row_integral_coefficients(&self.series)
    }
}

/// Forward state with all coefficient families assembled.
pub fn forward(p: &PairPotential, mu: f64, trunc: ClusterTruncation) -> Result<ThermoState> {
    forward_with(p, mu, trunc, Assembly::WithKernels)
}

pub fn forward_with(p: &PairPotential, mu: f64, trunc: ClusterTruncation, level: Assembly) -> Result<ThermoState> {
    if !mu.is_finite() {
        return Err(Error::InvalidArgument(format!("chemical potential must be finite, got {mu}")));
    }
    let series = Arc::new(ClusterSeries::assemble(p, trunc, level)?);
    if let Ok(sb) = stability_bound(p, 4, 2000, STABILITY_SEED) {
        let mu0 = gas_phase_mu0(p, sb.b);
        if mu > mu0 {
            log::warn!("mu = {mu} exceeds the gas-phase bound mu0 = {mu0}");
        }
    }
    Ok(ThermoState::from_series(series, p.beta(), mu, trunc))
}

/// Pair correlation `ρ⁽²⁾ = ω⁽²⁾ + ρ²`.
pub fn pair_correlation(state: &ThermoState) -> GridFunction {
    state.rho2.clone()
}

/// Upper end of the chemical-potential bracket used by the density solve.
pub fn gas_phase_limit(p: &PairPotential) -> Result<f64> {
    let sb = stability_bound(p, 4, 2000, STABILITY_SEED)?;
    Ok(gas_phase_mu0(p, sb.b))
}

/// Solves `ρ(μ, u) = ρ*` for `μ` by safeguarded Newton iteration.
pub fn solve_mu_star(
    p: &PairPotential,
    rho_star: f64,
    trunc: ClusterTruncation,
    tol: f64,
) -> Result<(f64, ThermoState)> {
    solve_mu_star_with(p, rho_star, trunc, tol, Assembly::WithKernels)
}

pub fn solve_mu_star_with(
    p: &PairPotential,
    rho_star: f64,
    trunc: ClusterTruncation,
    tol: f64,
    level: Assembly,
) -> Result<(f64, ThermoState)> {
    if !(rho_star > 0.0 && rho_star.is_finite()) {
        return Err(Error::DensityOutOfRange {
            rho_star,
            reason: "density must be positive".into(),
        });
    }
    if let Some(sigma) = p.hardcore_radius() {
        if rho_star * sigma >= 1.0 {
            return Err(Error::DensityOutOfRange {
                rho_star,
                reason: format!("at or above the closest-packing density 1/σ = {}", 1.0 / sigma),
            });
        }
    }
    let series = Arc::new(ClusterSeries::assemble(p, trunc, level)?);
    let mu = solve_on_series(&series, p, rho_star, tol)?;
    Ok((mu, ThermoState::from_series(series, p.beta(), mu, trunc)))
}

pub(crate) fn solve_on_series(series: &ClusterSeries, p: &PairPotential, rho_star: f64, tol: f64) -> Result<f64> {
    let beta = p.beta();
    let mu_ideal = rho_star.ln() / beta;
    let mu0 = gas_phase_limit(p)?;
    let mut lo = mu_ideal - 5.0;
    let mut hi = if mu0.is_finite() { mu0 } else { mu_ideal + 5.0 };
    let g = |mu: f64| series.density((beta * mu).exp()) - rho_star;
    if g(hi) <= 0.0 {
        return Err(Error::DensityOutOfRange {
            rho_star,
            reason: format!(
                "above the gas-phase density bound rho(mu0) = {:.6e}",
                series.density((beta * hi).exp())
            ),
        });
    }
    if g(lo) >= 0.0 {
        return Err(Error::DensityOutOfRange {
            rho_star,
            reason: "no bracket below the ideal-gas guess".into(),
        });
    }
    let mut mu = mu_ideal.clamp(lo, hi);
    for _ in 0..50 {
        let r = g(mu);
        if r.abs() <= tol * rho_star {
            return Ok(mu);
        }
        if r > 0.0 {
            hi = mu;
        } else {
            lo = mu;
        }
        let slope = beta * series.density_log_derivative((beta * mu).exp());
        let newton = mu - r / slope;
        mu = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::NoConvergence {
        steps: 50,
        what: format!("chemical potential for rho* = {rho_star}"),
    })
}

/// `μ*'(u) v = -⟨v, ∇ᵤρ⟩ / ∂_μρ`.
pub fn mu_star_derivative(state: &ThermoState, v: &GridFunction) -> Result<f64> {
    if !(state.d_mu_rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "degenerate density derivative {}",
            state.d_mu_rho
        )));
    }
    Ok(-inner(v, &state.grad_u_rho)? / state.d_mu_rho)
}

/// Sup-norm residuals of the first two Kirkwood–Salsburg equations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResidual {
    /// `|ρ - z(1 + Σ_{n<N} ...)|`.
    pub m0: f64,
    /// `sup_x |ρ⁽²⁾(x) - z b(x)(ρ + Σ_{n≤N-2} ...)|`.
    pub m1: f64,
}

/// Evaluates the Kirkwood–Salsburg equations with the truncated correlation
/// functions inserted; the residuals are `O(z^{n_max+1})`.
pub fn ks_residual(p: &PairPotential, mu: f64, trunc: ClusterTruncation) -> Result<KsResidual> {
    let state = forward(p, mu, trunc)?;
    let n = trunc.n_max();
    let spec = *p.spec();
    let h = spec.spacing();
    let pp = spec.period();
    let k = spec.center();
    let f = p.mayer();
    let b = p.boltzmann();
    let z = state.z;
    let rho = state.rho;
    let w2 = &state.omega2;
    let rho2 = &state.rho2;
    let f1 = integrate(&f);
    let f_w2_f = inner(&f, &convolve_periodic(w2, &f)?)?;
    let omega3 = if n >= 3 { Some(state.series.omega3(z)?) } else { None };
    let f_off = f.by_offset();
    let fat = |d: isize| f_off[d.rem_euclid(pp as isize) as usize];

    // m = 0: terms with n = 1 .. N-1 free particles around the origin.
    let mut s0 = 1.0;
    if n >= 2 {
        s0 += rho * f1;
    }
    if n >= 3 {
        s0 += 0.5 * inner(&f, &convolve_periodic(rho2, &f)?)?;
    }
    if n >= 4 {
        let om3 = omega3.as_ref().expect("kernels assembled");
        // ∫∫∫ f(y1) f(y2) f(y3) ω⁽³⁾(y1 - y2, 0, y3 - y2) over the ring.
        let cubic: f64 = (0..pp)
            .into_par_iter()
            .map(|t2| {
                let mut acc = 0.0;
                let f2 = fat(t2 as isize - k as isize);
                if f2 == 0.0 {
                    return 0.0;
                }
                for t1 in 0..pp {
                    let f1v = fat(t1 as isize - k as isize);
                    if f1v == 0.0 {
                        continue;
                    }
                    let a = spec.offset_index(t1 as isize - t2 as isize);
                    let row = om3.row(a);
                    for t3 in 0..pp {
                        let c = spec.offset_index(t3 as isize - t2 as isize);
                        acc += f1v * fat(t3 as isize - k as isize) * row[c];
                    }
                }
                f2 * acc
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum::<f64>()
            * h.powi(3);
        let third = cubic + 3.0 * rho * f1 * f_w2_f + rho.powi(3) * f1.powi(3);
        s0 += third / 6.0;
    }
    let m0 = (rho - z * s0).abs();

    // m = 1: particle at x with a partner at the origin.
    let mut inner_sum = GridFunction::constant(spec, rho);
    if n >= 3 {
        inner_sum = inner_sum.add_scaled(1.0, &convolve_periodic(&f, rho2)?);
    }
    if n >= 4 {
        let om3 = omega3.as_ref().expect("kernels assembled");
        let f_w2 = convolve_periodic(&f, w2)?;
        let quad: Vec<f64> = (0..spec.points())
            .into_par_iter()
            .map(|i| {
                // ∫∫ f(x-y1) f(x-y2) ω⁽³⁾(y1, 0, y2).
                let mut acc = 0.0;
                for t1 in 0..pp {
                    let a = fat(i as isize - t1 as isize);
                    if a == 0.0 {
                        continue;
                    }
                    let row = om3.row(t1);
                    for t2 in 0..pp {
                        acc += a * fat(i as isize - t2 as isize) * row[t2];
                    }
                }
                acc * h * h
            })
            .collect();
        let second = GridFunction::from_vec(spec, quad)
            .add_scaled(2.0 * rho * f1, &f_w2)
            .map(|v| v + rho * f_w2_f + rho.powi(3) * f1 * f1);
        inner_sum = inner_sum.add_scaled(0.5, &second);
    }
    let rhs = inner_sum.zip_map(b, |s, bv| z * bv * s);
    let m1 = rho2.zip_map(&rhs, |a, c| (a - c).abs()).max();
    Ok(KsResidual { m0, m1 })
}
