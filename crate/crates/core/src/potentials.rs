//! Pair potentials stored as Boltzmann factors, Mayer functions and the bounds
//! that delimit the gas phase.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{integrate, GridFunction, GridSpec};

/// Default floor for the potential-of-mean-force guess.
pub const PMF_FLOOR: f64 = 1e-12;

/// Decreasing positive envelope `ψ₀(r) = C (1 + r²)^(-α/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Majorant {
    c: f64,
    alpha: f64,
}

impl Majorant {
    pub fn new(c: f64, alpha: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("majorant amplitude must be positive, got {c}")));
        }
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("majorant exponent must exceed 1, got {alpha}")));
        }
        Ok(Self { c, alpha })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.c * (1.0 + r * r).powf(-0.5 * self.alpha)
    }

    pub fn on_grid(&self, spec: GridSpec) -> GridFunction {
        GridFunction::even_from_fn(spec, |x| self.eval(x))
    }
}

impl Default for Majorant {
    fn default() -> Self {
        Self { c: 1.0, alpha: 2.0 }
    }
}

/// Closed-form potential families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// `u ≡ 0`.
    Ideal,
    /// Hard core of length `sigma` with attractive tail `-tail_depth (σ/r)^tail_alpha` for `r ≥ σ`.
    HardRod {
        sigma: f64,
        tail_depth: f64,
        tail_alpha: f64,
    },
    /// `4ε[(σ/r)^(2α) - (σ/r)^α]`.
    LjType { epsilon: f64, sigma: f64, alpha: f64 },
    /// Constant `height` on `|r| < width`, zero outside.
    Square { height: f64, width: f64 },
}

impl Shape {
    pub fn hard_rod(sigma: f64) -> Self {
        Shape::HardRod {
            sigma,
            tail_depth: 0.0,
            tail_alpha: 6.0,
        }
    }

    /// `u(r)`, `+∞` inside a hard core.
    pub fn u(&self, r: f64) -> f64 {
        let r = r.abs();
        match *self {
            Shape::Ideal => 0.0,
            Shape::HardRod {
                sigma,
                tail_depth,
                tail_alpha,
            } => {
                if r < sigma {
                    f64::INFINITY
                } else {
                    -tail_depth * (sigma / r).powf(tail_alpha)
                }
            }
            Shape::LjType {
                epsilon,
                sigma,
                alpha,
            } => {
                if r == 0.0 {
                    return f64::INFINITY;
                }
                let s = (sigma / r).powf(alpha);
                4.0 * epsilon * (s * s - s)
            }
            Shape::Square { height, width } => {
                if r < width {
                    height
                } else {
                    0.0
                }
            }
        }
    }

    pub fn hard_core(&self) -> Option<f64> {
        match *self {
            Shape::HardRod { sigma, .. } => Some(sigma),
            _ => None,
        }
    }

    /// Envelope of the potential outside its core.
    pub fn majorant(&self) -> Majorant {
        match *self {
            Shape::HardRod {
                sigma,
                tail_depth,
                tail_alpha,
            } if tail_depth != 0.0 && tail_alpha > 1.0 => {
                // |u| (1+r²)^(α/2) = ε σ^α (1 + 1/r²)^(α/2) is largest at r = σ.
                let c = tail_depth.abs() * (1.0 + sigma * sigma).powf(0.5 * tail_alpha);
                Majorant { c, alpha: tail_alpha }
            }
            Shape::LjType { sigma, alpha, .. } if alpha > 1.0 => {
                // Sup of |u|(1+r²)^(α/2) beyond the zero crossing r = σ, found on a fine ladder.
                let mut c: f64 = 0.0;
                for k in 0..20_000 {
                    let r = sigma * (1.0 + 1e-3 * k as f64);
                    c = c.max(self.u(r).abs() * (1.0 + r * r).powf(0.5 * alpha));
                }
                Majorant {
                    c: c.max(f64::MIN_POSITIVE),
                    alpha,
                }
            }
            _ => Majorant::default(),
        }
    }
}

/// Admissible pair potential, represented by `b(x) = e^{-βu(x)}` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PairPotential {
    beta: f64,
    boltzmann: GridFunction,
    hardcore_radius: Option<f64>,
    majorant: Majorant,
    core_divergence: String,
    shape: Option<Shape>,
}

impl PairPotential {
    /// Validates and wraps a Boltzmann factor.
    pub fn from_boltzmann(
        beta: f64,
        boltzmann: GridFunction,
        hardcore_radius: Option<f64>,
        majorant: Majorant,
    ) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        if boltzmann.min() < 0.0 {
            return Err(Error::InvalidArgument("Boltzmann factor must be nonnegative".into()));
        }
        boltzmann.ensure_even(1e-12 * boltzmann.sup_norm().max(1.0))?;
        if let Some(sigma) = hardcore_radius {
            let spec = boltzmann.spec();
            for i in 0..spec.points() {
                if spec.x(i).abs() < sigma - 1e-9 * spec.spacing() && boltzmann.at(i) != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "Boltzmann factor nonzero inside the hard core at x = {}",
                        spec.x(i)
                    )));
                }
            }
        }
        let core_divergence = match hardcore_radius {
            Some(s) => format!("hard core, u = +inf on |x| < {s}"),
            None if boltzmann.values().contains(&0.0) => "u = +inf where b underflows".into(),
            None => "bounded".into(),
        };
        Ok(Self {
            beta,
            boltzmann,
            hardcore_radius,
            majorant,
            core_divergence,
            shape: None,
        })
    }

    /// Samples a closed-form potential. A node sitting exactly on a hard-core
    /// edge gets half of the outside Boltzmann factor, the midpoint of the jump.
    pub fn from_shape(shape: Shape, beta: f64, spec: GridSpec) -> Result<Self> {
        let tol = 1e-9 * spec.spacing();
        let core = shape.hard_core();
        let b = GridFunction::even_from_fn(spec, |x| {
            let r = x.abs();
            match core {
                Some(s) if (r - s).abs() <= tol => 0.5 * (-beta * shape.u(s)).exp(),
                Some(s) if r < s => 0.0,
                _ => (-beta * shape.u(r)).exp(),
            }
        });
        let mut p = Self::from_boltzmann(beta, b, core, shape.majorant())?;
        p.shape = Some(shape);
        Ok(p)
    }

    /// Builds a potential from tabulated values of `u`; `+inf` entries become core.
    pub fn from_u(beta: f64, spec: GridSpec, u: &[f64], majorant: Majorant) -> Result<Self> {
        if u.len() != spec.points() {
            return Err(Error::GridMismatch(format!(
                "{} potential values for {} grid points",
                u.len(),
                spec.points()
            )));
        }
        if u.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(Error::InvalidArgument("potential contains NaN or -inf".into()));
        }
        let b = GridFunction::new(spec, u.iter().map(|&v| (-beta * v).exp()).collect())?;
        let core = core_radius(&b);
        Self::from_boltzmann(beta, b, core, majorant)
    }

    pub fn ideal(beta: f64, spec: GridSpec) -> Result<Self> {
        Self::from_shape(Shape::Ideal, beta, spec)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn spec(&self) -> &GridSpec {
        self.boltzmann.spec()
    }

    pub fn boltzmann(&self) -> &GridFunction {
        &self.boltzmann
    }

    pub fn hardcore_radius(&self) -> Option<f64> {
        self.hardcore_radius
    }

    pub fn majorant(&self) -> Majorant {
        self.majorant
    }

    pub fn core_divergence(&self) -> &str {
        &self.core_divergence
    }

    /// The closed form this potential was sampled from, if any.
    pub fn shape(&self) -> Option<&Shape> {
        self.shape.as_ref()
    }

    pub fn with_majorant(mut self, majorant: Majorant) -> Self {
        self.majorant = majorant;
        self
    }

    /// `u(x_i)`, `+∞` where `b = 0`.
    pub fn u_at(&self, i: usize) -> f64 {
        let b = self.boltzmann.at(i);
        if b > 0.0 {
            -b.ln() / self.beta
        } else {
            f64::INFINITY
        }
    }

    pub fn u_values(&self) -> Vec<f64> {
        (0..self.spec().points()).map(|i| self.u_at(i)).collect()
    }

    /// `1` where `b > 0`, `0` in the core.
    pub fn free_mask(&self) -> Vec<bool> {
        self.boltzmann.values().iter().map(|&b| b > 0.0).collect()
    }

    /// The potential `u + s v`: `b ← b e^{-β s v}`; the core stays frozen.
    pub fn perturbed(&self, v: &GridFunction, s: f64) -> Result<Self> {
        self.spec().check_same(v.spec())?;
        let beta = self.beta;
        let b = self.boltzmann.zip_map(v, |b, v| {
            if b > 0.0 {
                b * (-beta * s * v).exp()
            } else {
                0.0
            }
        });
        if b.values().iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("perturbation overflows the Boltzmann factor".into()));
        }
        let b = b.symmetrized();
        Ok(Self {
            boltzmann: b,
            shape: None,
            ..self.clone()
        })
    }

    /// `t u₁ + (1-t) u₂`; the core of either endpoint stays core.
    pub fn interpolate(a: &Self, b: &Self, t: f64) -> Result<Self> {
        a.spec().check_same(b.spec())?;
        if a.beta != b.beta {
            return Err(Error::InvalidArgument("interpolating potentials at different beta".into()));
        }
        let bz = a.boltzmann.zip_map(&b.boltzmann, |x, y| {
            if x > 0.0 && y > 0.0 {
                (t * x.ln() + (1.0 - t) * y.ln()).exp()
            } else {
                0.0
            }
        });
        let core = core_radius(&bz);
        Self::from_boltzmann(a.beta, bz, core, a.majorant)
    }

    /// Mayer function `f = b - 1`.
    pub fn mayer(&self) -> GridFunction {
        self.boltzmann.map(|b| b - 1.0)
    }
}

/// Radius of the central zero block of `b`, when one exists.
fn core_radius(b: &GridFunction) -> Option<f64> {
    let spec = b.spec();
    let k = spec.center();
    if b.at(k) != 0.0 {
        return None;
    }
    (k..spec.points())
        .find(|&i| b.at(i) > 0.0)
        .map(|i| spec.x(i))
}

/// Mayer function on a requested grid.
pub fn mayer(p: &PairPotential, grid: &GridSpec) -> Result<GridFunction> {
    p.spec().check_same(grid)?;
    Ok(p.mayer())
}

/// `max |v(x)| / ψ₀(|x|)`.
pub fn v_norm(v: &GridFunction, m: &Majorant) -> Result<f64> {
    v.ensure_even(1e-12 * v.sup_norm().max(1e-300))?;
    let spec = v.spec();
    Ok((0..spec.points())
        .map(|i| v.at(i).abs() / m.eval(spec.x(i)))
        .fold(0.0, f64::max))
}

/// Outcome of the configuration search behind [`stability_bound`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityBound {
    /// `B ≥ 0` with `U ≥ -B N` on every sampled configuration.
    pub b: f64,
    /// Set when the best energy per particle grows about linearly with `N`.
    pub unstable: bool,
    pub configurations: usize,
    pub method: &'static str,
}

/// Estimates the stability constant `B` by random and lattice configurations of
/// up to `n_max` particles placed on grid nodes.
pub fn stability_bound(p: &PairPotential, n_max: usize, trials: usize, seed: u64) -> Result<StabilityBound> {
    if n_max < 2 {
        return Err(Error::InvalidArgument("stability search needs n_max >= 2".into()));
    }
    let spec = *p.spec();
    let u = p.u_values();
    if u.iter().all(|&v| v >= 0.0) {
        return Ok(StabilityBound {
            b: 0.0,
            unstable: false,
            configurations: 0,
            method: "nonnegative potential",
        });
    }
    let k = spec.center() as isize;
    let pair = |a: isize, b: isize| -> f64 {
        let d = (a - b).abs();
        if d > k {
            0.0
        } else {
            u[(k + d) as usize]
        }
    };
    let energy = |pos: &[isize]| -> f64 {
        let mut e = 0.0;
        for i in 0..pos.len() {
            for j in 0..i {
                e += pair(pos[i], pos[j]);
            }
        }
        e
    };
    let mut best = vec![0.0f64; n_max + 1];
    let mut count = 0;
    // Evenly spaced chains at every spacing up to the grid extent.
    for n in 2..=n_max {
        for step in 0..=(k / (n as isize - 1).max(1)) {
            let pos: Vec<isize> = (0..n as isize).map(|i| i * step).collect();
            best[n] = best[n].max(-energy(&pos) / n as f64);
            count += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = k / 2;
    for _ in 0..trials {
        let n = rng.gen_range(2..=n_max);
        let pos: Vec<isize> = (0..n).map(|_| rng.gen_range(-window..=window)).collect();
        best[n] = best[n].max(-energy(&pos) / n as f64);
        count += 1;
    }
    let b = best.iter().copied().fold(0.0, f64::max);
    // A hard core with a tail that decays integrably is stable in one
    // dimension, so the small-N growth test only applies without a core.
    let unstable = n_max >= 3 && p.hardcore_radius().is_none() && {
        let (hi, lo) = (best[n_max], best[n_max - 1]);
        lo > 0.0 && hi / lo >= 0.9 * (n_max as f64 - 1.0) / (n_max as f64 - 2.0)
    };
    if unstable {
        log::warn!("stability search: energy per particle grows linearly with N, potential looks unstable");
    }
    Ok(StabilityBound {
        b,
        unstable,
        configurations: count,
        method: "lattice chains and seeded random placements on grid nodes",
    })
}

/// `c_β = ∫ |e^{-βu} - 1| dx`.
pub fn c_beta(p: &PairPotential) -> f64 {
    integrate(&p.mayer().map(f64::abs))
}

/// Upper end of the gas phase, `μ₀ = β⁻¹ log(1 / (c_β e^{2βB+1}))`; `+∞` for the ideal gas.
pub fn gas_phase_mu0(p: &PairPotential, b: f64) -> f64 {
    let c = c_beta(p);
    if c == 0.0 {
        return f64::INFINITY;
    }
    let beta = p.beta();
    -(c.ln() + 2.0 * beta * b + 1.0) / beta
}

/// Potential of mean force `-β⁻¹ log(ρ*⁽²⁾ / ρ*²)`; ratios below `floor` become core.
pub fn pmf_initial_guess(
    rho2_target: &GridFunction,
    rho_star: f64,
    beta: f64,
    floor: f64,
) -> Result<PairPotential> {
    if !(rho_star > 0.0) {
        return Err(Error::InvalidArgument(format!("rho_star must be positive, got {rho_star}")));
    }
    let r2 = rho_star * rho_star;
    // Round-off below zero inside a core is tolerated and lands in the core.
    if rho2_target.min() < -1e-10 * r2 {
        return Err(Error::InvalidArgument("target pair correlation is negative somewhere".into()));
    }
    let b = rho2_target.map(|g| {
        let ratio = g / r2;
        if ratio < floor {
            0.0
        } else {
            ratio
        }
    });
    let b = b.symmetrized();
    let core = core_radius(&b);
    PairPotential::from_boltzmann(beta, b, core, Majorant::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(4.0, 161).unwrap()
    }

    #[test]
    fn hard_rod_mayer_integrates_to_minus_two() {
        let p = PairPotential::from_shape(Shape::hard_rod(1.0), 1.0, grid()).unwrap();
        let f = p.mayer();
        assert!((integrate(&f) + 2.0).abs() < 1e-13);
        assert_eq!(f.at_origin(), -1.0);
        assert_eq!(f.at(grid().index_of(2.0).unwrap()), 0.0);
    }

    #[test]
    fn square_step_of_ln2() {
        let p = PairPotential::from_shape(
            Shape::Square {
                height: 2f64.ln(),
                width: 1.0,
            },
            1.0,
            GridSpec::new(4.0, 160 + 1).unwrap(),
        )
        .unwrap();
        assert!((p.mayer().at_origin() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn gas_phase_bound_for_hard_rod() {
        let p = PairPotential::from_shape(Shape::hard_rod(1.0), 1.0, grid()).unwrap();
        let mu0 = gas_phase_mu0(&p, 0.0);
        assert!((mu0 - (-(2f64.ln()) - 1.0)).abs() < 1e-12);
        let ideal = PairPotential::ideal(1.0, grid()).unwrap();
        assert_eq!(gas_phase_mu0(&ideal, 0.0), f64::INFINITY);
    }

    #[test]
    fn v_norm_examples() {
        let m = Majorant::new(1.3, 3.0).unwrap();
        let psi = m.on_grid(grid());
        assert!((v_norm(&psi, &m).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(v_norm(&GridFunction::zeros(grid()), &m).unwrap(), 0.0);
        let cut = GridFunction::even_from_fn(grid(), |x| if x.abs() < 3.0 { 2.0 * m.eval(x) } else { 0.0 });
        assert!((v_norm(&cut, &m).unwrap() - 2.0).abs() < 1e-15);
        let odd = GridFunction::from_fn(grid(), |x| x);
        assert!(v_norm(&odd, &m).is_err());
    }

    #[test]
    fn pmf_marks_core() {
        let s = grid();
        let rho = 0.1;
        let target = GridFunction::even_from_fn(s, |x| if x.abs() < 1.0 { 0.0 } else { rho * rho });
        let p = pmf_initial_guess(&target, rho, 1.0, PMF_FLOOR).unwrap();
        assert_eq!(p.hardcore_radius(), Some(1.0));
        assert_eq!(p.u_at(s.index_of(2.0).unwrap()), 0.0);
        let e = target.map(|g| g * (-1f64).exp());
        let q = pmf_initial_guess(&e, rho, 1.0, PMF_FLOOR).unwrap();
        assert!((q.u_at(s.index_of(2.0).unwrap()) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stability_of_nonnegative_potential_is_zero() {
        let p = PairPotential::from_shape(Shape::hard_rod(1.0), 1.0, grid()).unwrap();
        assert_eq!(stability_bound(&p, 4, 100, 1).unwrap().b, 0.0);
    }

    #[test]
    fn unstable_attraction_is_flagged() {
        let p = PairPotential::from_shape(
            Shape::Square {
                height: -1.0,
                width: 0.5,
            },
            1.0,
            grid(),
        )
        .unwrap();
        let s = stability_bound(&p, 5, 2000, 3).unwrap();
        assert!(s.unstable);
        assert!(s.b >= 2.0 - 1e-12);
    }
}
