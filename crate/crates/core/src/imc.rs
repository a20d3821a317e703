//! Regularized Newton iteration on `Φ`: the inverse Monte Carlo scheme with
//! the sampled cross-correlation matrix replaced by the series Jacobian.

use serde::{Deserialize, Serialize};

use crate::cluster::{Assembly, ClusterTruncation};
use crate::entropy::{apply_f_prime, phi_with, EntropyEval, JacobianKernels, Target};
use crate::error::{Error, Result};
use crate::grid::{inner, GridFunction};
use crate::potentials::{v_norm, PairPotential};
use crate::thermo::ThermoState;

/// Which part of `F'` the inner solve uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    #[default]
    Full,
    /// Multiplication by `-βρ⁽²⁾` only: a relative-mismatch update, kept for diagnostics.
    Diagonal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImcConfig {
    pub max_iters: usize,
    /// Stop once `sup |∇Φ|` over the free region drops below this.
    pub grad_tol: f64,
    /// Initial Tikhonov parameter; `None` picks `10⁻³ max βρ⁽²⁾`.
    pub lambda0: Option<f64>,
    /// Factor applied to `λ` after every accepted step.
    pub lambda_decay: f64,
    /// First trial step length.
    pub damping: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub cg_tol: f64,
    pub cg_max: usize,
    pub trunc: ClusterTruncation,
    pub jacobian: JacobianMode,
}

impl Default for ImcConfig {
    fn default() -> Self {
        Self {
            max_iters: 30,
            grad_tol: 1e-6,
            lambda0: None,
            lambda_decay: 0.1,
            damping: 1.0,
            backtrack: 0.5,
            max_backtracks: 12,
            cg_tol: 1e-10,
            cg_max: 500,
            trunc: ClusterTruncation::default(),
            jacobian: JacobianMode::Full,
        }
    }
}

impl ImcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("imc: {what}")));
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if matches!(self.lambda0, Some(l) if !(l >= 0.0)) {
            return bad("lambda0 must be nonnegative");
        }
        if !(self.lambda_decay > 0.0 && self.lambda_decay <= 1.0) {
            return bad("lambda_decay must lie in (0, 1]");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        if !(self.cg_tol > 0.0) || self.cg_max == 0 {
            return bad("cg_tol and cg_max must be positive");
        }
        Ok(())
    }
}

/// One record of the iteration log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImcIterate {
    pub iter: usize,
    /// Where the potential of this iterate was written, when it was.
    pub u_path: Option<String>,
    pub mu_star: f64,
    pub phi: f64,
    /// `sup |∇Φ|` over the free region.
    pub grad_norm: f64,
    /// `sup |ρ*⁽²⁾ - F(u)|`.
    pub residual_norm: f64,
    pub step_len: f64,
    pub lambda: f64,
    /// `𝒱`-norm of the applied update `s v`.
    pub v_norm_update: f64,
    pub cg_iters: usize,
    pub backtracks: usize,
}

/// Inner-solve diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepInfo {
    pub lambda: f64,
    pub cg_iters: usize,
    /// `‖(-F' + λ)v - rhs‖ / ‖rhs‖` in the weighted `L²` norm.
    pub relative_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
    LineSearch,
}

#[derive(Clone, Debug)]
pub struct ImcOutcome {
    /// Record 0 describes the starting potential.
    pub iterates: Vec<ImcIterate>,
    pub potential: PairPotential,
    pub eval: EntropyEval,
    pub stop: StopReason,
}

impl ImcOutcome {
    /// Number of accepted Newton steps.
    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }
}

fn masked(v: &GridFunction, mask: &[bool]) -> GridFunction {
    let mut out = v.clone();
    for (x, &m) in out.values_mut().iter_mut().zip(mask) {
        if !m {
            *x = 0.0;
        }
    }
    out
}

fn sup_on(v: &GridFunction, mask: &[bool]) -> f64 {
    masked(v, mask).sup_norm()
}

/// Default Tikhonov parameter: a thousandth of the largest diagonal entry `βρ⁽²⁾`.
pub fn default_lambda(state: &ThermoState) -> f64 {
    1e-3 * state.beta * state.rho2.max().max(0.0)
}

/// Solves `(-F'(u) + λ) v = F(u) - ρ*⁽²⁾` on the free region by conjugate
/// gradients, raising `λ` tenfold when the solve stagnates (at most five times).
pub fn newton_step(
    state: &ThermoState,
    kernels: &JacobianKernels,
    target: &Target,
    cfg: &ImcConfig,
    lambda: f64,
    mask: &[bool],
) -> Result<(GridFunction, StepInfo)> {
    let rhs = masked(&state.rho2.add_scaled(-1.0, &target.rho2_star), mask);
    let mut lambda = lambda;
    for _ in 0..=5 {
        let op = |v: &GridFunction| -> Result<GridFunction> {
            let fv = match cfg.jacobian {
                JacobianMode::Full => apply_f_prime(state, kernels, v)?,
                JacobianMode::Diagonal => state.rho2.zip_map(v, |r, w| -state.beta * r * w),
            };
            Ok(masked(&v.scaled(lambda).add_scaled(-1.0, &fv), mask))
        };
        match conjugate_gradient(op, &rhs, cfg.cg_tol, cfg.cg_max)? {
            Some((v, iters, rel)) => {
                return Ok((
                    v.symmetrized(),
                    StepInfo {
                        lambda,
                        cg_iters: iters,
                        relative_residual: rel,
                    },
                ))
            }
            None => {
                let next = if lambda > 0.0 { 10.0 * lambda } else { 1e-3 * state.beta * state.rho2.max() };
                log::warn!("CG stagnated at lambda = {lambda:e}, retrying with {next:e}");
                lambda = next;
            }
        }
    }
    Err(Error::Solver(format!(
        "conjugate gradients failed after five regularization increases (lambda = {lambda:e})"
    )))
}

/// CG in the trapezoid inner product; `None` when `cg_max` steps do not reach `tol`.
fn conjugate_gradient(
    op: impl Fn(&GridFunction) -> Result<GridFunction>,
    rhs: &GridFunction,
    tol: f64,
    max: usize,
) -> Result<Option<(GridFunction, usize, f64)>> {
    let norm_b = inner(rhs, rhs)?.sqrt();
    let mut x = GridFunction::zeros(*rhs.spec());
    if norm_b == 0.0 {
        return Ok(Some((x, 0, 0.0)));
    }
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = inner(&r, &r)?;
    for it in 1..=max {
        let ap = op(&p)?;
        let pap = inner(&p, &ap)?;
        if !(pap > 0.0) {
            return Ok(None);
        }
        let alpha = rr / pap;
        x = x.add_scaled(alpha, &p);
        r = r.add_scaled(-alpha, &ap);
        let rr_new = inner(&r, &r)?;
        if rr_new.sqrt() <= tol * norm_b {
            // Report the true residual rather than the recursive one.
            let true_r = rhs.add_scaled(-1.0, &op(&x)?);
            let rel = inner(&true_r, &true_r)?.sqrt() / norm_b;
            return Ok(Some((x, it, rel)));
        }
        p = r.add_scaled(rr_new / rr, &p);
        rr = rr_new;
    }
    Ok(None)
}

fn record(iter: usize, eval: &EntropyEval, target: &Target, mask: &[bool]) -> ImcIterate {
    ImcIterate {
        iter,
        u_path: None,
        mu_star: eval.mu_star,
        phi: eval.phi,
        grad_norm: sup_on(&eval.grad, mask),
        residual_norm: target.rho2_star.add_scaled(-1.0, &eval.state.rho2).sup_norm(),
        step_len: 0.0,
        lambda: 0.0,
        v_norm_update: 0.0,
        cg_iters: 0,
        backtracks: 0,
    }
}

/// Runs the iteration from `p0`. The core of `p0` stays frozen.
pub fn run_imc(p0: &PairPotential, target: &Target, cfg: &ImcConfig) -> Result<ImcOutcome> {
    run_imc_with(p0, target, cfg, |_, _, _| Ok(None))
}

/// As [`run_imc`]; `observe` sees every accepted iterate and may return the
/// path it stored the potential under.
pub fn run_imc_with(
    p0: &PairPotential,
    target: &Target,
    cfg: &ImcConfig,
    mut observe: impl FnMut(&ImcIterate, &PairPotential, &EntropyEval) -> Result<Option<String>>,
) -> Result<ImcOutcome> {
    cfg.validate()?;
    let mask = p0.free_mask();
    let majorant = p0.majorant();
    let mut p = p0.clone();
    let mut eval = phi_with(&p, target, cfg.trunc, Assembly::WithKernels)?;
    let mut lambda = cfg.lambda0.unwrap_or_else(|| default_lambda(&eval.state));
    let mut rec = record(0, &eval, target, &mask);
    rec.u_path = observe(&rec, &p, &eval)?;
    log::info!("{}", serde_json::to_string(&rec).unwrap_or_default());
    let mut iterates = vec![rec];
    let mut stop = StopReason::MaxIters;
    for k in 1..=cfg.max_iters {
        let current = iterates.last().expect("nonempty").grad_norm;
        if current < cfg.grad_tol {
            stop = StopReason::Converged;
            break;
        }
        let kernels = JacobianKernels::new(&eval.state)?;
        let (v, info) = newton_step(&eval.state, &kernels, target, cfg, lambda, &mask)?;
        let mut s = cfg.damping;
        let mut accepted = None;
        for bt in 0..=cfg.max_backtracks {
            let trial = p.perturbed(&v, s).and_then(|q| {
                let e = phi_with(&q, target, cfg.trunc, Assembly::WithKernels)?;
                Ok((q, e))
            });
            match trial {
                Ok((q, e)) if sup_on(&e.grad, &mask) < current => {
                    accepted = Some((q, e, bt));
                    break;
                }
                Ok(_) => {}
                Err(err) => log::debug!("trial step {s} rejected: {err}"),
            }
            s *= cfg.backtrack;
        }
        let Some((q, e, backtracks)) = accepted else {
            stop = StopReason::LineSearch;
            log::warn!("backtracking found no decrease of sup|grad Phi| at iteration {k}");
            break;
        };
        p = q;
        eval = e;
        let mut rec = record(k, &eval, target, &mask);
        rec.step_len = s;
        rec.lambda = info.lambda;
        rec.v_norm_update = v_norm(&v.scaled(s), &majorant)?;
        rec.cg_iters = info.cg_iters;
        rec.backtracks = backtracks;
        rec.u_path = observe(&rec, &p, &eval)?;
        log::info!("{}", serde_json::to_string(&rec).unwrap_or_default());
        iterates.push(rec);
        lambda = info.lambda * cfg.lambda_decay;
    }
    if stop == StopReason::MaxIters && iterates.last().expect("nonempty").grad_norm < cfg.grad_tol {
        stop = StopReason::Converged;
    }
    Ok(ImcOutcome {
        iterates,
        potential: p,
        eval,
        stop,
    })
}
