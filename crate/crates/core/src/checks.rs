//! Property checks on a configured potential: derivative identities,
//! Jacobian structure, convexity, decay, expansion order and agreement with
//! the box quadrature. Each returns a [`CheckResult`]; the suite runs them all.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cluster::{Assembly, ClusterTruncation};
use crate::entropy::{
    apply_f_prime, henderson_f, hessian_form, hessian_form_direct, phi, phi_with, JacobianKernels, Target,
};
use crate::error::{Error, Result};
use crate::grid::{inner, integrate, GridFunction, GridSpec};
use crate::oracle::{box_correlations, fd_check, fit_slope, tonks_reference, BoxSpec, TonksInput};
use crate::potentials::{v_norm, PairPotential, Shape};
use crate::thermo::{forward, forward_with, ks_residual};

/// Step ladder used by the finite-difference order tests.
pub const FD_STEPS: [f64; 4] = [4e-2, 2e-2, 1e-2, 5e-3];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    /// The measured quantity the threshold applies to.
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckResult {
    fn at_most(name: &str, value: f64, threshold: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            pass: value < threshold,
            value,
            threshold,
            detail,
        }
    }

    fn at_least(name: &str, value: f64, threshold: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            pass: value >= threshold,
            value,
            threshold,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{:<4} {:<28} value {:>12.4e}  threshold {:>10.3e}  {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.threshold,
            self.detail
        )
    }
}

/// Smooth even perturbation: a sum of Gaussian shells `a e^{-(|x|-c)²/w²}`,
/// defined off the grid so it can be resampled under refinement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Probe {
    pub shells: Vec<(f64, f64, f64)>,
}

impl Probe {
    /// Three shells centred between `start` and `start + 3`, scaled to unit sup norm.
    pub fn random(rng: &mut ChaCha8Rng, start: f64) -> Self {
        let shells: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    rng.gen_range(-1.0..1.0),
                    start + rng.gen_range(0.0..3.0),
                    rng.gen_range(0.3..1.0),
                )
            })
            .collect();
        let raw = Self { shells };
        let sup = (0..=4000)
            .map(|i| raw.eval(start + 0.002 * i as f64).abs())
            .fold(0.0, f64::max);
        Self {
            shells: raw.shells.iter().map(|&(a, c, w)| (a / sup, c, w)).collect(),
        }
    }

    fn eval(&self, x: f64) -> f64 {
        self.shells
            .iter()
            .map(|&(a, c, w)| a * (-((x.abs() - c) / w).powi(2)).exp())
            .sum()
    }

    /// Samples on the grid of `p`, zero inside its core.
    pub fn sample(&self, p: &PairPotential) -> GridFunction {
        let b = p.boltzmann();
        let raw = GridFunction::even_from_fn(*p.spec(), |x| self.eval(x));
        raw.zip_map(b, |v, b| if b > 0.0 { v } else { 0.0 })
    }
}

pub fn probes(p: &PairPotential, count: usize, seed: u64) -> Vec<Probe> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = p.hardcore_radius().unwrap_or(0.0);
    (0..count).map(|_| Probe::random(&mut rng, start)).collect()
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn l2(v: &GridFunction) -> f64 {
    integrate(&v.map(|x| x * x)).sqrt()
}

/// `u ≡ 0`: `ρ = βp = z`, `ω⁽²⁾ ≡ 0` and `F'v = -βρ²v`.
pub fn ideal_gas(spec: GridSpec, beta: f64, z: f64, trunc: ClusterTruncation) -> Result<CheckResult> {
    let p = PairPotential::ideal(beta, spec)?;
    let state = forward(&p, z.ln() / beta, trunc)?;
    let t = Target::ideal(spec, state.rho)?;
    let e = phi(&p, &t, trunc)?;
    let k = JacobianKernels::new(&e.state)?;
    let v = GridFunction::even_from_fn(spec, |x| (-x * x).exp());
    let fv = apply_f_prime(&e.state, &k, &v)?;
    let r2 = e.state.rho * e.state.rho;
    let jac = fv.add_scaled(beta * r2, &v).sup_norm() / (beta * r2);
    let err = [
        (state.rho - z).abs() / z,
        (state.beta_p - z).abs() / z,
        state.omega2.sup_norm() / (z * z),
        jac,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(CheckResult::at_most(
        "ideal gas exactness",
        err,
        1e-12,
        format!("rho {:.15e} beta_p {:.15e}", state.rho, state.beta_p),
    ))
}

/// `∂_μρ` against a central difference in `μ`.
pub fn dmu_rho(p: &PairPotential, mu: f64, trunc: ClusterTruncation) -> Result<CheckResult> {
    let d = 1e-4;
    let s = forward_with(p, mu, trunc, Assembly::Pair)?;
    let up = forward_with(p, mu + d, trunc, Assembly::Pair)?.rho;
    let dn = forward_with(p, mu - d, trunc, Assembly::Pair)?.rho;
    let fd = (up - dn) / (2.0 * d);
    Ok(CheckResult::at_most(
        "d_mu rho identity",
        relative(fd, s.d_mu_rho),
        1e-3,
        format!("fd {fd:.10e} series {:.10e}", s.d_mu_rho),
    ))
}

/// Mixed second derivatives of the pressure agree:
/// `∂_μ⟨w, ρ⁽²⁾⟩ = -2 ∂_u ρ · w`, both sides by central differences, and
/// the right side also from the closed form of `∇ᵤρ`.
pub fn schwarz(p: &PairPotential, mu: f64, trunc: ClusterTruncation, w: &Probe) -> Result<CheckResult> {
    let (d, t) = (1e-4, 1e-4);
    let wg = w.sample(p);
    let pair = |p: &PairPotential, mu| forward_with(p, mu, trunc, Assembly::Pair);
    let s = pair(p, mu)?;
    let lhs = (inner(&wg, &pair(p, mu + d)?.rho2)? - inner(&wg, &pair(p, mu - d)?.rho2)?) / (2.0 * d);
    let up = pair(&p.perturbed(&wg, t)?, mu)?.rho;
    let dn = pair(&p.perturbed(&wg, -t)?, mu)?.rho;
    let rhs_fd = -2.0 * (up - dn) / (2.0 * t);
    let rhs = -2.0 * inner(&wg, &s.grad_u_rho)?;
    let err = relative(lhs, rhs_fd).max(relative(rhs, rhs_fd));
    Ok(CheckResult::at_most(
        "schwarz identity",
        err,
        1e-3,
        format!("d_mu <w,rho2> {lhs:.8e}, -2 d_u rho w {rhs_fd:.8e}, closed form {rhs:.8e}"),
    ))
}

/// `Φ(u + tv)` against the gradient: remainder of order two.
pub fn phi_gradient(p: &PairPotential, t: &Target, trunc: ClusterTruncation, v: &Probe) -> Result<CheckResult> {
    let vg = v.sample(p);
    let e = phi_with(p, t, trunc, Assembly::Pair)?;
    let df = inner(&vg, &e.grad)?;
    let r = fd_check(
        "phi gradient",
        |s| Ok(phi_with(&p.perturbed(&vg, s)?, t, trunc, Assembly::Pair)?.phi),
        df,
        &FD_STEPS,
        2.0,
    )?;
    Ok(CheckResult {
        name: "phi gradient fd slope".into(),
        pass: r.pass,
        value: r.slope,
        threshold: 1.9,
        detail: format!("errors {}", sci(&r.errors)),
    })
}

/// `⟨w, F(u + tv)⟩` against `⟨w, F'v⟩`.
pub fn jacobian_fd(
    p: &PairPotential,
    rho_star: f64,
    trunc: ClusterTruncation,
    v: &Probe,
    w: &Probe,
) -> Result<CheckResult> {
    let (vg, wg) = (v.sample(p), w.sample(p));
    let t = Target::new(rho_star, henderson_f(p, rho_star, trunc)?)?;
    let e = phi(p, &t, trunc)?;
    let k = JacobianKernels::new(&e.state)?;
    let df = inner(&wg, &apply_f_prime(&e.state, &k, &vg)?)?;
    let r = fd_check(
        "jacobian",
        |s| inner(&wg, &henderson_f(&p.perturbed(&vg, s)?, rho_star, trunc)?),
        df,
        &FD_STEPS,
        2.0,
    )?;
    Ok(CheckResult {
        name: "jacobian fd slope".into(),
        pass: r.pass,
        value: r.slope,
        threshold: 1.9,
        detail: format!("errors {}", sci(&r.errors)),
    })
}

/// Symmetry and semidefiniteness of `F'` and agreement of the two Hessian
/// paths, over the given probe pairs.
pub fn jacobian_structure(
    p: &PairPotential,
    rho_star: f64,
    trunc: ClusterTruncation,
    probes: &[Probe],
    corrupt: bool,
) -> Result<Vec<CheckResult>> {
    let t = Target::new(rho_star, henderson_f(p, rho_star, trunc)?)?;
    let e = phi(p, &t, trunc)?;
    let mut k = JacobianKernels::new(&e.state)?;
    if corrupt {
        k = k.corrupted();
    }
    let s = &e.state;
    let level = p.beta() * s.rho2.sup_norm();
    let (mut sym, mut rayleigh, mut two_path) = (0.0f64, f64::INFINITY, 0.0f64);
    let samples: Vec<GridFunction> = probes.iter().map(|q| q.sample(p)).collect();
    let images: Vec<GridFunction> = samples
        .iter()
        .map(|v| apply_f_prime(s, &k, v))
        .collect::<Result<_>>()?;
    for (i, v) in samples.iter().enumerate() {
        let w = &samples[(i + 1) % samples.len()];
        let fw = &images[(i + 1) % samples.len()];
        let scale = level * l2(v) * l2(w);
        let a = inner(w, &images[i])?;
        let b = inner(v, fw)?;
        sym = sym.max((a - b).abs() / scale);
        rayleigh = rayleigh.min(-inner(v, &images[i])? / (level * l2(v).powi(2)));
        let h1 = hessian_form(s, &k, v, w)?;
        let h2 = hessian_form_direct(s, &k, v, w)?;
        two_path = two_path.max((h1 - h2).abs() / h1.abs().max(h2.abs()).max(1e-300));
    }
    Ok(vec![
        CheckResult::at_most(
            "jacobian symmetry",
            sym,
            1e-8,
            format!("{} probe pairs, scale beta sup rho2 = {level:.3e}", samples.len()),
        ),
        CheckResult::at_least(
            "-F' semidefinite",
            rayleigh,
            -1e-8,
            "smallest Rayleigh quotient of -F' over probes".into(),
        ),
        CheckResult::at_most(
            "two-path hessian",
            two_path,
            1e-6,
            "direct second variation against -F'/2".into(),
        ),
    ])
}

/// Margins of the convexity and pressure-bound inequalities on one grid.
#[derive(Clone, Copy, Debug, Default)]
struct Margins {
    pressure: f64,
    phi: f64,
    lower: f64,
    upper: f64,
}

/// `None` when the target density is out of reach somewhere on the segment,
/// where `Φ` is undefined for the truncated model.
fn margins(p: &PairPotential, mu: f64, dmu: f64, v: &Probe, trunc: ClusterTruncation) -> Result<Option<Margins>> {
    let vg = v.sample(p);
    let pair = |q: &PairPotential, m: f64| forward_with(q, m, trunc, Assembly::Pair);
    let p2 = p.perturbed(&vg, 1.0)?;
    let (s1, s2) = (pair(p, mu)?, pair(&p2, mu + dmu)?);
    let beta = p.beta();
    let dp = s2.beta_p - s1.beta_p;
    let lower = beta * dmu * s1.rho - 0.5 * beta * inner(&vg, &s1.rho2)?;
    let upper = beta * dmu * s2.rho - 0.5 * beta * inner(&vg, &s2.rho2)?;
    let target = Target::new(s1.rho, s1.rho2.clone())?;
    let phi_at = |q: &PairPotential| match phi_with(q, &target, trunc, Assembly::Pair) {
        Ok(e) => Ok(Some(e.phi)),
        Err(Error::DensityOutOfRange { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    let (Some(f1), Some(f2)) = (phi_at(p)?, phi_at(&p2)?) else {
        return Ok(None);
    };
    let mut m = Margins {
        pressure: f64::INFINITY,
        phi: f64::INFINITY,
        lower: dp - lower,
        upper: upper - dp,
    };
    for t in [0.25, 0.5, 0.75] {
        let pt = p.perturbed(&vg, 1.0 - t)?;
        let bp = pair(&pt, mu + (1.0 - t) * dmu)?.beta_p;
        m.pressure = m.pressure.min(t * s1.beta_p + (1.0 - t) * s2.beta_p - bp);
        let Some(ft) = phi_at(&pt)? else {
            return Ok(None);
        };
        m.phi = m.phi.min(t * f1 + (1.0 - t) * f2 - ft);
    }
    Ok(Some(m))
}

/// Segment convexity of `βp(μ, u)` and `Φ(u)` and both pressure bounds on
/// seeded pairs. The tolerance of each margin is its change when the grid
/// spacing is halved, and the margin must exceed ten times that.
pub fn convexity(
    p: &PairPotential,
    mu: f64,
    trunc: ClusterTruncation,
    pairs: usize,
    seed: u64,
) -> Result<Vec<CheckResult>> {
    let spec = *p.spec();
    let fine = GridSpec::new(spec.extent(), 2 * spec.points() - 1)?;
    let p_fine = match p.shape() {
        Some(s) => PairPotential::from_shape(s.clone(), p.beta(), fine)?,
        None => {
            return Err(Error::Unsupported(
                "convexity probes resample the potential and need a closed form".into(),
            ))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = p.hardcore_radius().unwrap_or(0.0);
    let mut worst = [f64::INFINITY; 4];
    let (mut kept, mut redrawn) = (0, 0);
    while kept < pairs {
        let mut v = Probe::random(&mut rng, start);
        for s in &mut v.shells {
            s.0 *= 0.3;
        }
        let dmu = rng.gen_range(-0.3..0.3);
        let (Some(a), Some(b)) = (margins(p, mu, dmu, &v, trunc)?, margins(&p_fine, mu, dmu, &v, trunc)?) else {
            redrawn += 1;
            if redrawn > 20 * pairs {
                return Err(Error::DensityOutOfRange {
                    rho_star: forward_with(p, mu, trunc, Assembly::Pair)?.rho,
                    reason: "convexity probes: target density out of reach on almost every segment".into(),
                });
            }
            continue;
        };
        kept += 1;
        let pick = |m: &Margins| [m.pressure, m.phi, m.lower, m.upper];
        for (slot, (x, y)) in worst.iter_mut().zip(pick(&a).into_iter().zip(pick(&b))) {
            // Ratio of margin to ten times its quadrature error.
            let tol = (x - y).abs().max(1e-15 * x.abs());
            *slot = slot.min(x / (10.0 * tol));
        }
    }
    let names = ["pressure convexity", "phi convexity", "pressure lower bound", "pressure upper bound"];
    Ok(names
        .iter()
        .zip(worst)
        .map(|(n, r)| {
            CheckResult::at_least(
                n,
                r,
                1.0,
                format!("min over {pairs} pairs of margin / (10 x grid-refinement change); {redrawn} infeasible pairs redrawn"),
            )
        })
        .collect())
}

/// `ω⁽²⁾/ψ₀` and the row `L¹` norms of `ω⁽³⁾` barely move when the grid
/// extent doubles at fixed spacing.
pub fn decay(p: &PairPotential, mu: f64, trunc: ClusterTruncation) -> Result<Vec<CheckResult>> {
    let shape = p
        .shape()
        .cloned()
        .ok_or_else(|| Error::Unsupported("decay check regrids the potential and needs a closed form".into()))?;
    let spec = *p.spec();
    let wide = GridSpec::new(2.0 * spec.extent(), 2 * spec.points() - 1)?;
    let measure = |s: GridSpec| -> Result<(f64, f64)> {
        let q = PairPotential::from_shape(shape.clone(), p.beta(), s)?.with_majorant(p.majorant());
        let st = forward(&q, mu, trunc)?;
        let ratio = st.omega2.zip_map(&q.majorant().on_grid(s), |w, m| (w / m).abs()).max();
        let w3 = st.series().omega3(st.z)?;
        Ok((ratio, w3.row_abs_integrals().max()))
    };
    let (r1, l1) = measure(spec)?;
    let (r2, l2) = measure(wide)?;
    let v = v_norm(&forward(p, mu, trunc)?.omega2, &p.majorant())?;
    Ok(vec![
        CheckResult::at_most(
            "omega2 decay ratio",
            relative(r1, r2),
            0.05,
            format!("sup|omega2|/psi0 {r1:.6e} at R, {r2:.6e} at 2R; V-norm {v:.3e}"),
        ),
        CheckResult::at_most(
            "omega3 row L1",
            relative(l1, l2),
            0.05,
            format!("max row L1 {l1:.6e} at R, {l2:.6e} at 2R"),
        ),
    ])
}

/// Kirkwood–Salsburg residuals shrink like `z^{n_max+1}` under halving of `z`.
pub fn ks_order(p: &PairPotential, z: f64, trunc: ClusterTruncation) -> Result<Vec<CheckResult>> {
    let zs = [z, z / 2.0, z / 4.0];
    let mut m0 = Vec::new();
    let mut m1 = Vec::new();
    for &zz in &zs {
        let r = ks_residual(p, zz.ln() / p.beta(), trunc)?;
        m0.push(r.m0);
        m1.push(r.m1);
    }
    let want = trunc.n_max() as f64 + 0.9;
    let (s0, s1) = (fit_slope(&zs, &m0), fit_slope(&zs, &m1));
    Ok(vec![
        CheckResult::at_least("ks m=0 order", s0, want, format!("residuals {}", sci(&m0))),
        CheckResult::at_least("ks m=1 order", s1, want, format!("residuals {}", sci(&m1))),
    ])
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Density of pure hard rods against the exact gas: error of order `z^{n_max+1}`.
pub fn tonks_order(spec: GridSpec, sigma: f64, trunc: ClusterTruncation) -> Result<CheckResult> {
    let p = PairPotential::from_shape(Shape::hard_rod(sigma), 1.0, spec)?;
    let zs = [0.02f64, 0.04, 0.08];
    let mut err = Vec::new();
    for &z in &zs {
        let s = forward_with(&p, z.ln(), trunc, Assembly::Pair)?;
        err.push((s.rho - tonks_reference(TonksInput::Activity(z), sigma)?.rho).abs());
    }
    let slope = fit_slope(&zs, &err);
    Ok(CheckResult::at_least(
        "tonks order",
        slope,
        trunc.n_max() as f64 + 0.9,
        format!("|rho - rho_tonks| {}", sci(&err)),
    ))
}

/// Series `ρ` and `ω⁽²⁾` against the box quadrature, inside the central half of the box.
pub fn box_oracle(p: &PairPotential, mu: f64, trunc: ClusterTruncation, b: &BoxSpec) -> Result<CheckResult> {
    let s = forward_with(p, mu, trunc, Assembly::Pair)?;
    let spec = *p.spec();
    let window = 0.25 * b.length;
    let h = spec.spacing();
    let mut worst: f64 = 0.0;
    let mut rho_box = f64::NAN;
    for d in [0.5, 1.25, 1.5, 2.0, 3.0] {
        // Separations on grid nodes, with both points inside the window.
        let d = (d / h).round() * h;
        if 0.5 * d > window || d > spec.extent() {
            continue;
        }
        let t = box_correlations(p, mu, b, &[-0.5 * d, 0.5 * d])?;
        rho_box = t.rho(1);
        worst = worst.max((t.rho(1) - s.rho).abs()).max((t.rho(2) - s.rho).abs());
        let i = spec.index_of(d).ok_or_else(|| Error::InvalidArgument("separation off grid".into()))?;
        worst = worst.max((t.rho(3) - t.rho(1) * t.rho(2) - s.omega2.at(i)).abs());
    }
    Ok(CheckResult::at_most(
        "box oracle",
        worst,
        1e-4,
        format!("L = {} N_cap = {}: rho box {rho_box:.8e} series {:.8e}", b.length, b.n_cap, s.rho),
    ))
}

/// Options for [`run_suite`].
#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub mu: f64,
    pub probes: usize,
    pub pairs: usize,
    pub seed: u64,
    pub oracle: BoxSpec,
    pub corrupt_jacobian: bool,
}

/// Runs every applicable check on `p`.
pub fn run_suite(p: &PairPotential, trunc: ClusterTruncation, o: &SuiteOptions) -> Result<Vec<CheckResult>> {
    let spec = *p.spec();
    let beta = p.beta();
    let z = (beta * o.mu).exp();
    let mut out = vec![ideal_gas(spec, beta, z, trunc)?];
    let rho = forward_with(p, o.mu, trunc, Assembly::Pair)?.rho;
    let pr = probes(p, o.probes.max(2), o.seed);
    log::info!("suite: z = {z}, rho = {rho}");
    out.push(dmu_rho(p, o.mu, trunc)?);
    out.push(schwarz(p, o.mu, trunc, &pr[0])?);
    // Φ is probed away from its minimum so the gradient is not zero.
    let t = Target::new(rho, henderson_f(&p.perturbed(&pr[1].sample(p), 0.2)?, rho, trunc)?)?;
    out.push(phi_gradient(p, &t, trunc, &pr[0])?);
    out.push(jacobian_fd(p, rho, trunc, &pr[0], &pr[1])?);
    out.extend(jacobian_structure(p, rho, trunc, &pr, o.corrupt_jacobian)?);
    if p.shape().is_some() {
        out.extend(convexity(p, o.mu, trunc, o.pairs, o.seed ^ 0x9e37)?);
        out.extend(decay(p, o.mu, trunc)?);
        out.push(box_oracle(p, o.mu, trunc, &o.oracle)?);
    }
    out.extend(ks_order(p, z, trunc)?);
    if let Some(Shape::HardRod { sigma, tail_depth, .. }) = p.shape() {
        if *tail_depth == 0.0 {
            out.push(tonks_order(spec, *sigma, trunc)?);
        }
    }
    Ok(out)
}
