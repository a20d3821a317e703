//! The density-constrained relative entropy `Φ`, its gradient, the Henderson
//! map `F(u) = ρ⁽²⁾(μ*(u), u)` and the Jacobian `F'(u)`.
//!
//! All products of series are truncated at the expansion order, so the
//! Jacobian below is the exact derivative of the truncated map.

use serde::Serialize;

use crate::cluster::{Assembly, ClusterTruncation};
use crate::error::{Error, Result};
use crate::fft::{Circular, Spectrum};
use crate::grid::{apply_kernel, inner, integrate, ring_convolve, GridFunction, GridSpec, Kernel2D};
use crate::potentials::PairPotential;
use crate::thermo::{cauchy, powers, solve_mu_star_with, sum_scalar, ThermoState};

/// Relative tolerance of the chemical-potential solve behind every evaluation.
pub const MU_TOL: f64 = 1e-13;

/// Target pair correlation at a fixed density.
#[derive(Clone, Debug, PartialEq)]
pub struct Target {
    pub rho_star: f64,
    pub rho2_star: GridFunction,
}

impl Target {
    /// Values down to `-core_tol` are accepted as round-off of a vanishing target.
    pub fn new(rho_star: f64, rho2_star: GridFunction) -> Result<Self> {
        if !(rho_star > 0.0 && rho_star.is_finite()) {
            return Err(Error::DensityOutOfRange {
                rho_star,
                reason: "density must be positive".into(),
            });
        }
        let t = Self { rho_star, rho2_star };
        if t.rho2_star.min() < -t.core_tol() {
            return Err(Error::InvalidArgument(format!(
                "target pair correlation is negative: min {}",
                t.rho2_star.min()
            )));
        }
        t.rho2_star.ensure_even(1e-12 * t.rho2_star.sup_norm().max(f64::MIN_POSITIVE))?;
        Ok(t)
    }

    /// Uncorrelated target `ρ*⁽²⁾ ≡ ρ*²`.
    pub fn ideal(spec: GridSpec, rho_star: f64) -> Result<Self> {
        Self::new(rho_star, GridFunction::constant(spec, rho_star * rho_star))
    }

    /// Largest target value tolerated inside a hard core.
    pub fn core_tol(&self) -> f64 {
        1e-10 * self.rho_star * self.rho_star
    }

    pub fn spec(&self) -> &GridSpec {
        self.rho2_star.spec()
    }
}

/// `Φ`, `∇Φ` and the forward state at `μ*(u)`.
#[derive(Clone, Debug)]
pub struct EntropyEval {
    /// `Φ(u)` up to the constant `-S*/β`.
    pub phi: f64,
    pub grad: GridFunction,
    pub mu_star: f64,
    pub state: ThermoState,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EntropySummary {
    pub phi: f64,
    pub mu_star: f64,
    pub grad_sup: f64,
}

impl EntropyEval {
    pub fn summary(&self) -> EntropySummary {
        EntropySummary {
            phi: self.phi,
            mu_star: self.mu_star,
            grad_sup: self.grad.sup_norm(),
        }
    }
}

/// `E(u) = ½∫u ρ*⁽²⁾`, with `0·∞ = 0` in the core as long as the target vanishes there.
pub fn interaction_energy(p: &PairPotential, t: &Target) -> Result<f64> {
    let spec = *p.spec();
    spec.check_same(t.spec())?;
    let tol = t.core_tol();
    let mut integrand = vec![0.0; spec.points()];
    for (i, e) in integrand.iter_mut().enumerate() {
        let u = p.u_at(i);
        let g = t.rho2_star.at(i);
        if u.is_infinite() {
            if g > tol {
                return Err(Error::InfiniteEnergy {
                    value: g,
                    x: spec.x(i),
                });
            }
        } else {
            *e = u * g;
        }
    }
    Ok(0.5 * integrate(&GridFunction::from_vec(spec, integrand)))
}

/// Evaluates `Φ` and `∇Φ`, assembling the kernels needed by the Jacobian.
pub fn phi(p: &PairPotential, t: &Target, trunc: ClusterTruncation) -> Result<EntropyEval> {
    phi_with(p, t, trunc, Assembly::WithKernels)
}

/// As [`phi`]; `Assembly::Pair` is enough when no Jacobian is needed.
pub fn phi_with(p: &PairPotential, t: &Target, trunc: ClusterTruncation, level: Assembly) -> Result<EntropyEval> {
    p.spec().check_same(t.spec())?;
    let energy = interaction_energy(p, t)?;
    let (mu, state) = solve_mu_star_with(p, t.rho_star, trunc, MU_TOL, level)?;
    let phi = state.beta_p / state.beta - mu * t.rho_star + energy;
    let grad = t.rho2_star.zip_map(&state.rho2, |a, b| 0.5 * (a - b));
    Ok(EntropyEval {
        phi,
        grad,
        mu_star: mu,
        state,
    })
}

/// `∇Φ(u) = ½(ρ*⁽²⁾ - ρ⁽²⁾(μ*(u), u))`.
pub fn grad_phi(p: &PairPotential, t: &Target, trunc: ClusterTruncation) -> Result<GridFunction> {
    Ok(phi_with(p, t, trunc, Assembly::Pair)?.grad)
}

/// Henderson map `F(u) = ρ⁽²⁾(μ*(u), u)`.
pub fn henderson_f(p: &PairPotential, rho_star: f64, trunc: ClusterTruncation) -> Result<GridFunction> {
    let (_, state) = solve_mu_star_with(p, rho_star, trunc, MU_TOL, Assembly::Pair)?;
    Ok(state.rho2)
}

/// `Σ_{i+j≤N} z^{i+j} a_i f_j`.
fn product_fn(a: &[f64], f: &[GridFunction], zp: &[f64]) -> GridFunction {
    let n = zp.len() - 1;
    let mut out = GridFunction::zeros(*f[0].spec());
    for i in 0..=n {
        for j in 0..=n - i {
            let c = a[i] * zp[i + j];
            if c != 0.0 {
                out = out.add_scaled(c, &f[j]);
            }
        }
    }
    out
}

/// Everything `F'(u)` needs besides the state, computed once per iterate and
/// reused across applications.
#[derive(Clone)]
pub struct JacobianKernels {
    spec: GridSpec,
    omega3: Kernel2D,
    k4: Kernel2D,
    /// `T[ρω⁽²⁾]`.
    rho_w2: GridFunction,
    /// `T[ω⁽²⁾ * ω⁽²⁾]` (periodic convolution).
    w2_w2: GridFunction,
    /// `T[ρ ∫ω⁽³⁾(·,0,x')dx']`.
    rho_i3: GridFunction,
    /// `T[ρ³]` and `T[ρ² ∫ω⁽²⁾]`.
    rho3: f64,
    rho2_j: f64,
    /// `∂_μρ⁽²⁾ = -2∇ᵤρ`.
    d_mu_rho2: GridFunction,
    /// `T[ρ ∂_μω⁽²⁾]` and `2T[ρ² ∂_μρ]`.
    g: GridFunction,
    c: f64,
    plan: Circular,
    conv_hat: Spectrum,
    fault: bool,
}

impl JacobianKernels {
    /// Requires a state assembled with kernels whenever `n_max ≥ 3`.
    pub fn new(state: &ThermoState) -> Result<Self> {
        let series = state.series();
        if !series.has_kernels() {
            return Err(Error::Unsupported(
                "the Jacobian needs a series assembled with kernels".into(),
            ));
        }
        let spec = *series.spec();
        let n = state.n_max();
        let beta = state.beta;
        let zp = powers(state.z, n);
        let h = spec.spacing();
        let rc = series.rho_coefficients();
        let w2: Vec<GridFunction> = (0..=n).map(|k| series.omega2_coefficient(k).clone()).collect();
        let jc: Vec<f64> = (0..=n).map(|k| series.omega2_integral(k)).collect();
        let i3 = state.i3_coefficients();
        let rr = cauchy(rc, rc, n);

        let rho_w2 = product_fn(rc, &w2, &zp);
        let rho_i3 = product_fn(rc, &i3, &zp);
        let rho3 = sum_scalar(&cauchy(&rr, rc, n), &zp);
        let rho2_j = sum_scalar(&cauchy(&rr, &jc, n), &zp);

        let plan = Circular::new(spec.period());
        let hats: Vec<Spectrum> = w2.iter().map(|f| plan.forward(&f.by_offset())).collect();
        let mut acc: Spectrum = vec![Default::default(); spec.period()];
        for i in 2..=n {
            for j in 2..=n.saturating_sub(i) {
                let c = zp[i + j];
                for (a, (x, y)) in acc.iter_mut().zip(hats[i].iter().zip(&hats[j])) {
                    *a += x * y * c;
                }
            }
        }
        let w2_w2_off: Vec<f64> = plan.inverse(acc).into_iter().map(|v| h * v).collect();
        let w2_w2 = GridFunction::from_offsets(spec, &w2_w2_off);

        let conv = rho_w2.scaled(2.0 * beta).add_scaled(beta, &w2_w2);
        let conv_hat = plan.forward(&conv.by_offset());
        let d_mu_rho2 = state.grad_u_rho.scaled(-2.0);
        let g = rho_w2.scaled(2.0 * beta).add_scaled(beta, &rho_i3);
        let c = 2.0 * beta * (rho3 + rho2_j);

        let omega3 = if n >= 3 { series.omega3(state.z)? } else { Kernel2D::zeros(spec) };
        let k4 = series.k4(state.z)?;
        Ok(Self {
            spec,
            omega3,
            k4,
            rho_w2,
            w2_w2,
            rho_i3,
            rho3,
            rho2_j,
            d_mu_rho2,
            g,
            c,
            plan,
            conv_hat,
            fault: false,
        })
    }

    /// `ω⁽³⁾(x, 0, x')` at the state's activity.
    pub fn omega3(&self) -> &Kernel2D {
        &self.omega3
    }

    /// `K₄(x, x') = ∫ω⁽⁴⁾(x, 0, x'', x' + x'') dx''`.
    pub fn k4(&self) -> &Kernel2D {
        &self.k4
    }

    /// Deliberately breaks the symmetry of the rank-one term. Negative control only.
    #[doc(hidden)]
    pub fn corrupted(mut self) -> Self {
        self.fault = true;
        self
    }
}

/// `F'(u) v` as the sum of a multiplication, a convolution, rank-one pieces
/// and the two integral kernels.
pub fn apply_f_prime(state: &ThermoState, k: &JacobianKernels, v: &GridFunction) -> Result<GridFunction> {
    k.spec.check_same(v.spec())?;
    k.spec.check_same(state.rho2.spec())?;
    let beta = state.beta;
    // (a) multiplication by the pair correlation.
    let mut out = state.rho2.zip_map(v, |r, w| -beta * r * w);
    // (b) convolution with 2βT[ρω²] + βT[ω²*ω²].
    out = out.add_scaled(-1.0, &ring_convolve(&k.plan, &k.conv_hat, v));
    // (c) rank-one terms from the chemical-potential constraint.
    let int_v = integrate(v);
    let left = if k.fault { &state.d_mu_omega2 } else { &k.d_mu_rho2 };
    let dv = inner(left, v)?;
    let gv = inner(&k.g, v)?;
    let scale = 0.5 / state.d_mu_rho;
    out = out
        .add_scaled(scale * dv, &k.d_mu_rho2)
        .add_scaled(-int_v, &k.g)
        .map(|x| x - gv - k.c * int_v);
    // (d), (e) integral kernels.
    if state.n_max() >= 3 {
        out = out.add_scaled(-2.0 * beta, &apply_kernel(&k.omega3, v)?);
    }
    if state.n_max() >= 4 {
        out = out.add_scaled(-0.5 * beta, &apply_kernel(&k.k4, v)?);
    }
    Ok(out)
}

/// `Φ''(u)(v, w) = -½⟨w, F'(u) v⟩`.
pub fn hessian_form(state: &ThermoState, k: &JacobianKernels, v: &GridFunction, w: &GridFunction) -> Result<f64> {
    Ok(-0.5 * inner(w, &apply_f_prime(state, k, v)?)?)
}

/// `∂ᵤρ⁽²⁾ w` from explicit three- and four-point kernels.
pub fn d_u_rho2(state: &ThermoState, k: &JacobianKernels, w: &GridFunction) -> Result<GridFunction> {
    k.spec.check_same(w.spec())?;
    let spec = k.spec;
    let beta = state.beta;
    let pp = spec.period() as isize;
    let kc = spec.center() as isize;
    let a = k.rho_w2.values();
    let a_off = k.rho_w2.by_offset();
    let b = k.rho_i3.values();
    let w_off = k.w2_w2.by_offset();
    let off = |d: isize| d.rem_euclid(pp) as usize;
    let three = Kernel2D::from_fn(spec, |i, j| {
        let (ii, jj) = (i as isize, j as isize);
        k.omega3.get(i, j) + a[i] + a_off[off(ii - jj)] + a[j] + k.rho3
    });
    let four = Kernel2D::from_fn(spec, |i, j| {
        let (ii, jj) = (i as isize, j as isize);
        k.k4.get(i, j) + 4.0 * k.rho2_j + 2.0 * (b[i] + b[j]) + w_off[off(ii + jj - 2 * kc)] + w_off[off(ii - jj)]
    });
    Ok(state
        .rho2
        .zip_map(w, |r, x| -beta * r * x)
        .add_scaled(-2.0 * beta, &apply_kernel(&three, w)?)
        .add_scaled(-0.5 * beta, &apply_kernel(&four, w)?))
}

/// `Φ''(u)(v, w) = -⟨v,∇ᵤρ⟩⟨w,∇ᵤρ⟩/∂_μρ - ½⟨v, ∂ᵤρ⁽²⁾ w⟩`.
pub fn hessian_form_direct(
    state: &ThermoState,
    k: &JacobianKernels,
    v: &GridFunction,
    w: &GridFunction,
) -> Result<f64> {
    let gv = inner(v, &state.grad_u_rho)?;
    let gw = inner(w, &state.grad_u_rho)?;
    Ok(-gv * gw / state.d_mu_rho - 0.5 * inner(v, &d_u_rho2(state, k, w)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Shape;

    fn soft(spec: GridSpec) -> PairPotential {
        PairPotential::from_shape(
            Shape::LjType {
                epsilon: 0.4,
                sigma: 0.8,
                alpha: 6.0,
            },
            1.0,
            spec,
        )
        .unwrap()
    }

    /// Target generated by the model itself at density `rho`.
    fn own_target(p: &PairPotential, rho: f64, trunc: ClusterTruncation) -> Target {
        Target::new(rho, henderson_f(p, rho, trunc).unwrap()).unwrap()
    }

    fn bump(spec: GridSpec, c: f64, w: f64) -> GridFunction {
        GridFunction::even_from_fn(spec, |x| (-(x.abs() - c).powi(2) / w).exp())
    }

    #[test]
    fn ideal_gas_phi_closed_form() {
        let spec = GridSpec::new(4.0, 41).unwrap();
        let p = PairPotential::ideal(1.0, spec).unwrap();
        let t = Target::ideal(spec, 0.05).unwrap();
        let e = phi(&p, &t, ClusterTruncation::default()).unwrap();
        assert!((e.phi - (0.05 - 0.05 * 0.05f64.ln())).abs() < 1e-14);
        assert!((e.phi - 0.19979).abs() < 1e-5);
        assert!(e.grad.sup_norm() < 1e-17);
        let f = henderson_f(&p, 0.05, ClusterTruncation::default()).unwrap();
        assert!(f.values().iter().all(|&v| (v - 0.0025).abs() < 1e-17));
    }

    #[test]
    fn energy_of_unit_step() {
        // Nodes straddle |x| = 1 symmetrically, so the rule sees a width of exactly 2.
        let spec = GridSpec::with_spacing(62.0 / 21.0, 2.0 / 21.0).unwrap();
        let p = PairPotential::from_shape(Shape::Square { height: 1.0, width: 1.0 }, 1.0, spec).unwrap();
        let t = Target::new(0.1, GridFunction::constant(spec, 0.01)).unwrap();
        let e = interaction_energy(&p, &t).unwrap();
        assert!((e - 0.01).abs() < 1e-12, "{e}");
        let rods = PairPotential::from_shape(Shape::hard_rod(1.0), 1.0, spec).unwrap();
        assert!(matches!(interaction_energy(&rods, &t), Err(Error::InfiniteEnergy { .. })));
        let outside = GridFunction::even_from_fn(spec, |x| if x.abs() < 1.0 { 0.0 } else { 0.01 });
        let e = interaction_energy(&rods, &Target::new(0.1, outside).unwrap()).unwrap();
        assert!(e.is_finite());
    }

    #[test]
    fn ideal_gas_jacobian_is_multiplicative() {
        let spec = GridSpec::new(4.0, 41).unwrap();
        let p = PairPotential::ideal(1.0, spec).unwrap();
        let t = Target::ideal(spec, 0.05).unwrap();
        let e = phi(&p, &t, ClusterTruncation::default()).unwrap();
        let k = JacobianKernels::new(&e.state).unwrap();
        let v = bump(spec, 1.0, 0.5);
        let fv = apply_f_prime(&e.state, &k, &v).unwrap();
        for i in 0..spec.points() {
            assert!((fv.at(i) + 0.0025 * v.at(i)).abs() < 1e-15);
        }
    }

    #[test]
    fn jacobian_is_symmetric_and_matches_direct_path() {
        let spec = GridSpec::new(5.0, 81).unwrap();
        let p = soft(spec);
        let trunc = ClusterTruncation::new(4).unwrap();
        let t = own_target(&p, 0.05, trunc);
        let e = phi(&p, &t, trunc).unwrap();
        let k = JacobianKernels::new(&e.state).unwrap();
        let v = bump(spec, 0.5, 0.3);
        let w = bump(spec, 1.5, 1.0);
        let vw = inner(&w, &apply_f_prime(&e.state, &k, &v).unwrap()).unwrap();
        let wv = inner(&v, &apply_f_prime(&e.state, &k, &w).unwrap()).unwrap();
        assert!((vw - wv).abs() < 1e-12 * vw.abs(), "{vw} {wv}");
        let h1 = hessian_form(&e.state, &k, &v, &w).unwrap();
        let h2 = hessian_form_direct(&e.state, &k, &v, &w).unwrap();
        assert!((h1 - h2).abs() < 1e-10 * h1.abs(), "{h1} {h2}");
        let bad = k.clone().corrupted();
        let vw = inner(&w, &apply_f_prime(&e.state, &bad, &v).unwrap()).unwrap();
        let wv = inner(&v, &apply_f_prime(&e.state, &bad, &w).unwrap()).unwrap();
        assert!((vw - wv).abs() > 1e-6 * vw.abs());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let spec = GridSpec::new(5.0, 81).unwrap();
        let p = soft(spec);
        let trunc = ClusterTruncation::new(4).unwrap();
        let rho = 0.05;
        let e = phi(&p, &own_target(&p, rho, trunc), trunc).unwrap();
        let k = JacobianKernels::new(&e.state).unwrap();
        let v = bump(spec, 1.0, 0.4);
        let fv = apply_f_prime(&e.state, &k, &v).unwrap();
        let f0 = &e.state.rho2;
        let errs: Vec<f64> = [1e-2, 1e-3]
            .iter()
            .map(|&t| {
                let ft = henderson_f(&p.perturbed(&v, t).unwrap(), rho, trunc).unwrap();
                ft.zip_map(f0, |a, b| a - b).add_scaled(-t, &fv).sup_norm()
            })
            .collect();
        let slope = (errs[0] / errs[1]).log10();
        assert!(slope > 1.9, "{errs:?}");
    }

    #[test]
    fn ideal_gas_hessian_against_gradient_differences() {
        let spec = GridSpec::new(4.0, 41).unwrap();
        let p = PairPotential::ideal(1.0, spec).unwrap();
        let rho = 0.05;
        let t = Target::ideal(spec, rho).unwrap();
        let trunc = ClusterTruncation::new(3).unwrap();
        let e = phi(&p, &t, trunc).unwrap();
        let k = JacobianKernels::new(&e.state).unwrap();
        let v = bump(spec, 0.0, 1.0);
        let w = bump(spec, 1.0, 0.5);
        let exact = 0.5 * rho * rho * inner(&v, &w).unwrap();
        let h = 1e-4;
        let gp = grad_phi(&p.perturbed(&v, h).unwrap(), &t, trunc).unwrap();
        let gm = grad_phi(&p.perturbed(&v, -h).unwrap(), &t, trunc).unwrap();
        let fd = inner(&w, &gp.add_scaled(-1.0, &gm)).unwrap() / (2.0 * h);
        assert!((fd - exact).abs() < 1e-8 * exact, "{fd} {exact}");
        let h1 = hessian_form(&e.state, &k, &v, &w).unwrap();
        let h2 = hessian_form_direct(&e.state, &k, &v, &w).unwrap();
        assert!((h1 - exact).abs() < 1e-15 && (h2 - exact).abs() < 1e-15, "{h1} {h2} {exact}");
    }
}
