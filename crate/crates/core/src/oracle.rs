//! Independent references: grand-canonical quadrature in a finite box,
//! finite-difference order checks and the exact hard-rod gas.

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::CorrelationTable;
use crate::error::{Error, Result};
use crate::potentials::{PairPotential, Shape};

/// Largest particle number the box quadrature handles.
pub const MAX_PARTICLES: usize = 5;

/// The box `[-L/2, L/2]` and its quadrature controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub length: f64,
    pub n_cap: usize,
    /// Gauss–Legendre nodes per panel for terms with at most three particles.
    pub quad_points: usize,
    /// Nodes per panel for terms with four or five particles.
    pub quad_points_high: usize,
}

impl BoxSpec {
    pub fn new(length: f64, n_cap: usize) -> Result<Self> {
        let b = Self {
            length,
            n_cap,
            quad_points: 16,
            quad_points_high: 8,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidArgument(format!("box length must be positive, got {}", self.length)));
        }
        if self.n_cap > MAX_PARTICLES {
            return Err(Error::Unsupported(format!(
                "box quadrature supports at most {MAX_PARTICLES} particles, got {}",
                self.n_cap
            )));
        }
        if self.quad_points < 2 || self.quad_points_high < 2 {
            return Err(Error::InvalidArgument("quadrature needs at least two nodes per panel".into()));
        }
        Ok(())
    }

    fn half(&self) -> f64 {
        0.5 * self.length
    }
}

/// Ordered-configuration integrator for one potential.
struct BoxIntegrator {
    shape: Shape,
    beta: f64,
    half: f64,
    /// Interaction range scale used to place panel breaks.
    scale: f64,
    core: Option<f64>,
    /// Distance at which the Boltzmann factor jumps, if it does.
    jump: Option<f64>,
    n_cap: usize,
    low: Vec<(f64, f64)>,
    high: Vec<(f64, f64)>,
}

impl BoxIntegrator {
    fn new(p: &PairPotential, b: &BoxSpec) -> Result<Self> {
        b.validate()?;
        let shape = p.shape().cloned().ok_or_else(|| {
            Error::Unsupported("box quadrature needs a closed-form potential".into())
        })?;
        let scale = match shape {
            Shape::HardRod { sigma, .. } | Shape::LjType { sigma, .. } => sigma,
            Shape::Square { width, .. } => width,
            Shape::Ideal => 1.0,
        };
        let rule = |n: usize| -> Result<Vec<(f64, f64)>> {
            GaussLegendre::new(n)
                .map(|g| g.as_node_weight_pairs().to_vec())
                .map_err(|e| Error::InvalidArgument(format!("Gauss-Legendre rule: {e}")))
        };
        let jump = match shape {
            Shape::HardRod { sigma, .. } => Some(sigma),
            Shape::Square { width, .. } => Some(width),
            _ => None,
        };
        Ok(Self {
            jump,
            n_cap: b.n_cap,
            core: shape.hard_core(),
            shape,
            beta: p.beta(),
            half: b.half(),
            scale,
            low: rule(b.quad_points)?,
            high: rule(b.quad_points_high)?,
        })
    }

    fn boltzmann(&self, r: f64) -> f64 {
        (-self.beta * self.shape.u(r)).exp()
    }

    /// Quadrature nodes on `[lo, half]`, split where the integrand may kink.
    fn nodes(&self, lo: f64, anchors: &[f64], prev: Option<f64>, rule: &[(f64, f64)]) -> Vec<(f64, f64)> {
        let hi = self.half;
        let mut lo = lo;
        if let (Some(s), Some(x)) = (self.core, prev) {
            lo = lo.max(x + s);
        }
        if lo >= hi {
            return Vec::new();
        }
        let mut cuts = vec![lo, hi];
        let s = self.scale;
        if let Some(x) = prev {
            cuts.extend([1.0, 1.5, 2.0, 3.0].iter().map(|c| x + c * s));
        }
        for &a in anchors {
            cuts.push(a);
            for c in [1.0, 1.5, 2.0, 3.0] {
                cuts.push(a - c * s);
                cuts.push(a + c * s);
            }
        }
        // Integrating out later particles leaves kinks at multiples of the jump
        // distance from the walls and from the fixed points.
        if let Some(d) = self.jump {
            for j in 1..=self.n_cap {
                let jd = j as f64 * d;
                cuts.extend([hi - jd, -hi + jd]);
                if let Some(x) = prev {
                    cuts.push(x + jd);
                }
                for &a in anchors {
                    cuts.extend([a - jd, a + jd]);
                }
            }
        }
        cuts.retain(|&c| c >= lo && c <= hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut out = Vec::with_capacity((cuts.len() - 1) * rule.len());
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
            out.extend(rule.iter().map(|&(t, wt)| (m + r * t, r * wt)));
        }
        out
    }

    /// `∫_{x₁<…<x_k} Π e^{-βu}` over `k` free particles joining the fixed ones.
    fn ordered(&self, k: usize, fixed: &[f64], free: &mut Vec<f64>, lo: f64, rule: &[(f64, f64)]) -> f64 {
        if k == 0 {
            return 1.0;
        }
        let prev = free.last().copied();
        let mut acc = 0.0;
        for (x, w) in self.nodes(lo, fixed, prev, rule) {
            let mut b = 1.0;
            for &y in fixed.iter().chain(free.iter()) {
                b *= self.boltzmann(x - y);
                if b == 0.0 {
                    break;
                }
            }
            if b == 0.0 {
                continue;
            }
            free.push(x);
            acc += w * b * self.ordered(k - 1, fixed, free, x, rule);
            free.pop();
        }
        acc
    }

    /// Configuration integral of `n` particles, `m` of which sit at `fixed`,
    /// divided by `(n - m)!`.
    fn term(&self, n: usize, fixed: &[f64]) -> f64 {
        let m = fixed.len();
        let mut b0 = 1.0;
        for i in 0..m {
            for j in 0..i {
                b0 *= self.boltzmann(fixed[i] - fixed[j]);
            }
        }
        if b0 == 0.0 || n == m {
            return b0;
        }
        let rule = if n <= 3 { &self.low } else { &self.high };
        // Parallel over the first free particle; summed in order so results
        // do not depend on the thread schedule.
        let first = self.nodes(-self.half, fixed, None, rule);
        let parts: Vec<f64> = first
            .par_iter()
            .map(|&(x, w)| {
                let mut b = 1.0;
                for &y in fixed {
                    b *= self.boltzmann(x - y);
                }
                if b == 0.0 {
                    return 0.0;
                }
                let mut free = vec![x];
                w * b * self.ordered(n - m - 1, fixed, &mut free, x, rule)
            })
            .collect();
        b0 * parts.iter().sum::<f64>()
    }

    fn xi(&self, z: f64, n_cap: usize) -> f64 {
        (0..=n_cap).map(|n| z.powi(n as i32) * self.term(n, &[])).sum()
    }
}

/// `Ξ = Σ_{N≤N_cap} (z^N/N!) ∫_{Λᴺ} e^{-βU}`.
pub fn box_partition_function(p: &PairPotential, mu: f64, b: &BoxSpec) -> Result<f64> {
    let q = BoxIntegrator::new(p, b)?;
    let z = (p.beta() * mu).exp();
    let xi = q.xi(z, b.n_cap);
    if !xi.is_finite() {
        return Err(Error::Overflow(format!("partition function at mu = {mu} is {xi}")));
    }
    Ok(xi)
}

/// `ρ_Λ⁽ᵐ⁾(x₁..x_m)`, `m = xs.len() ≤ 3`.
pub fn box_correlation(p: &PairPotential, mu: f64, b: &BoxSpec, xs: &[f64]) -> Result<f64> {
    let q = BoxIntegrator::new(p, b)?;
    let z = (p.beta() * mu).exp();
    correlation_with(&q, z, b.n_cap, q.xi(z, b.n_cap), xs)
}

fn correlation_with(q: &BoxIntegrator, z: f64, n_cap: usize, xi: f64, xs: &[f64]) -> Result<f64> {
    let m = xs.len();
    if m == 0 || m > 3 {
        return Err(Error::InvalidArgument(format!("box correlations need 1..=3 points, got {m}")));
    }
    if xs.iter().any(|x| x.abs() > q.half) {
        return Err(Error::InvalidArgument("correlation point outside the box".into()));
    }
    let num: f64 = (m..=n_cap).map(|n| z.powi(n as i32) * q.term(n, xs)).sum();
    let rho = num / xi;
    if !rho.is_finite() {
        return Err(Error::Overflow(format!("correlation at z = {z} is {rho}")));
    }
    Ok(rho)
}

/// Correlations of every nonempty subset of `xs`, ready for the Ursell recursion.
pub fn box_correlations(p: &PairPotential, mu: f64, b: &BoxSpec, xs: &[f64]) -> Result<CorrelationTable> {
    let q = BoxIntegrator::new(p, b)?;
    let z = (p.beta() * mu).exp();
    let xi = q.xi(z, b.n_cap);
    let m = xs.len();
    let mut values = vec![0.0; 1 << m];
    for (mask, v) in values.iter_mut().enumerate().skip(1) {
        let pts: Vec<f64> = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| xs[i]).collect();
        *v = correlation_with(&q, z, b.n_cap, xi, &pts)?;
    }
    CorrelationTable::from_fn(m, |mask| values[mask])
}

/// Bound on the first omitted term, `z^{N+1} L^{N+1} e^{βB(N+1)²} / (N+1)!`.
pub fn box_tail_bound(p: &PairPotential, mu: f64, b: &BoxSpec, stability: f64) -> f64 {
    let n = (b.n_cap + 1) as f64;
    let z = (p.beta() * mu).exp();
    let log = n * (z * b.length).ln() + p.beta() * stability * n * n - ln_factorial(b.n_cap + 1);
    log.exp()
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Outcome of a finite-difference order test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FdReport {
    pub label: String,
    pub steps: Vec<f64>,
    /// `|g(t) - g(0) - t g'(0)|` for each step.
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log t`.
    pub slope: f64,
    pub claimed_order: f64,
    /// Relative gap between the central difference at the smallest step and the claim.
    pub central_gap: f64,
    pub pass: bool,
}

/// Checks a claimed directional derivative `df` of `g` at `0`. The remainder
/// of a correct derivative is second order, so the test passes when the fitted
/// slope reaches `claimed_order - 0.1`, or when every error is round-off.
pub fn fd_check(
    label: &str,
    g: impl Fn(f64) -> Result<f64>,
    df: f64,
    steps: &[f64],
    claimed_order: f64,
) -> Result<FdReport> {
    if steps.len() < 2 || steps.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidArgument("fd_check needs at least two positive steps".into()));
    }
    let g0 = g(0.0)?;
    let mut errors = Vec::with_capacity(steps.len());
    for &t in steps {
        errors.push((g(t)? - g0 - t * df).abs());
    }
    let t_min = steps.iter().copied().fold(f64::INFINITY, f64::min);
    let central = (g(t_min)? - g(-t_min)?) / (2.0 * t_min);
    let scale = g0.abs().max(df.abs()).max(f64::MIN_POSITIVE);
    let central_gap = (central - df).abs() / df.abs().max(f64::MIN_POSITIVE);
    let roundoff = errors.iter().all(|&e| e <= 1e-13 * scale);
    let slope = if errors.contains(&0.0) {
        f64::INFINITY
    } else {
        fit_slope(steps, &errors)
    };
    Ok(FdReport {
        label: label.to_string(),
        steps: steps.to_vec(),
        errors,
        slope,
        claimed_order,
        central_gap,
        pass: roundoff || slope >= claimed_order - 0.1,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Exact thermodynamics of hard rods of length `sigma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tonks {
    pub z: f64,
    pub beta_p: f64,
    pub rho: f64,
}

/// Which variable fixes the hard-rod state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TonksInput {
    Activity(f64),
    Density(f64),
}

/// Solves `z = βp e^{βpσ}` and `βp = ρ/(1 - ρσ)`.
pub fn tonks_reference(input: TonksInput, sigma: f64) -> Result<Tonks> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("rod length must be positive, got {sigma}")));
    }
    match input {
        TonksInput::Activity(z) => {
            if !(z >= 0.0 && z.is_finite()) {
                return Err(Error::InvalidArgument(format!("activity must be nonnegative, got {z}")));
            }
            let beta_p = lambert_w(z * sigma)? / sigma;
            Ok(Tonks {
                z,
                beta_p,
                rho: beta_p / (1.0 + beta_p * sigma),
            })
        }
        TonksInput::Density(rho) => {
            if !(rho >= 0.0 && rho * sigma < 1.0) {
                return Err(Error::DensityOutOfRange {
                    rho_star: rho,
                    reason: format!("hard rods need 0 <= rho < 1/sigma = {}", 1.0 / sigma),
                });
            }
            let beta_p = rho / (1.0 - rho * sigma);
            Ok(Tonks {
                z: beta_p * (beta_p * sigma).exp(),
                beta_p,
                rho,
            })
        }
    }
}

/// Principal branch of `w e^w = x` for `x ≥ 0`, by Newton's method.
pub fn lambert_w(x: f64) -> Result<f64> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!("Lambert W needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut w = if x < 1.0 { x / (1.0 + x) } else { x.ln() - x.ln().ln().max(0.0) };
    for _ in 0..100 {
        let e = w.exp();
        let step = (w * e - x) / (e * (w + 1.0));
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w.abs().max(1e-300) {
            return Ok(w);
        }
    }
    Err(Error::NoConvergence {
        steps: 100,
        what: format!("Lambert W({x})"),
    })
}
