//! Order-by-order coefficients of the truncated cluster expansions.
//!
//! Every coefficient is an exact ring sum: internal vertices run over the `M - 1`
//! nodes of the periodic grid. Integrals with one or two internal vertices are
//! reduced to sums and circular convolutions of products of shifted Mayer
//! functions, so an `n = 4` term costs `O(M² log M)` instead of `O(M³)`.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use rustfft::num_complex::Complex;

use super::graphs::{connected_graphs, pair_index};
use super::ClusterTruncation;
use crate::error::{Error, Result};
use crate::fft::{Circular, Spectrum};
use crate::grid::{integrate, GridFunction, GridSpec, Kernel2D};
use crate::potentials::PairPotential;

/// Which coefficient families to assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Assembly {
    /// Densities, pressure and `ω⁽²⁾` only.
    Pair,
    /// Also the `ω⁽³⁾` kernel and the four-point kernel `K₄`.
    WithKernels,
}

/// One aggregated class of connected graphs: edges among the external
/// vertices (`fixed`), externals joined to the first and second internal
/// vertex (`sa`, `sb`) and whether the two internals are joined (`link`).
#[derive(Clone, Copy, Debug)]
struct Term {
    fixed: u32,
    sa: usize,
    sb: usize,
    link: bool,
    mult: f64,
}

/// Groups the connected graphs on `n` vertices with `k` leading external vertices.
fn classes(n: usize, k: usize) -> Result<Vec<Term>> {
    debug_assert!(n - k <= 2);
    let set = connected_graphs(n)?;
    let mut acc: BTreeMap<(u32, usize, usize, bool), f64> = BTreeMap::new();
    let has = |m: u32, i: usize, j: usize| m >> pair_index(n, i, j) & 1 == 1;
    for &m in set.masks() {
        let mut fixed = 0u32;
        for i in 0..k {
            for j in i + 1..k {
                if has(m, i, j) {
                    fixed |= 1 << pair_index(k, i, j);
                }
            }
        }
        let adj = |v: usize| (0..k).filter(|&j| has(m, j, v)).map(|j| 1usize << j).sum::<usize>();
        let sa = if n > k { adj(k) } else { 0 };
        let sb = if n > k + 1 { adj(k + 1) } else { 0 };
        let link = n > k + 1 && has(m, k, k + 1);
        *acc.entry((fixed, sa, sb, link)).or_default() += 1.0;
    }
    Ok(acc
        .into_iter()
        .map(|((fixed, sa, sb, link), mult)| Term {
            fixed,
            sa,
            sb,
            link,
            mult,
        })
        .collect())
}

/// `(ab edge, cd edge, c neighbours, d neighbours, multiplicity)`.
type FourPointClass = (bool, bool, usize, usize, f64);

/// Classes of connected graphs on the four vertices `a=x, b=0, c=s, d=s+x'`,
/// keyed by the `ab` and `cd` edges and the neighbours of `c` and `d` in `{a, b}`.
fn four_point_classes() -> Result<Vec<FourPointClass>> {
    let set = connected_graphs(4)?;
    let mut acc: BTreeMap<(bool, bool, usize, usize), f64> = BTreeMap::new();
    let has = |m: u32, i: usize, j: usize| m >> pair_index(4, i, j) & 1 == 1;
    for &m in set.masks() {
        let sc = has(m, 0, 2) as usize | (has(m, 1, 2) as usize) << 1;
        let sd = has(m, 0, 3) as usize | (has(m, 1, 3) as usize) << 1;
        *acc.entry((has(m, 0, 1), has(m, 2, 3), sc, sd)).or_default() += 1.0;
    }
    Ok(acc
        .into_iter()
        .map(|((ab, cd, sc, sd), mult)| (ab, cd, sc, sd, mult))
        .collect())
}

fn fixed_product(fixed: u32, fv: &[f64]) -> f64 {
    let mut p = 1.0;
    let mut bits = fixed;
    while bits != 0 {
        let b = bits.trailing_zeros() as usize;
        p *= fv[b];
        bits &= bits - 1;
    }
    p
}

/// Truncated cluster-expansion coefficients of one potential, indexed by
/// the power `n` of the activity.
#[derive(Clone, Debug)]
pub struct ClusterSeries {
    spec: GridSpec,
    n_max: usize,
    rho: Vec<f64>,
    pressure: Vec<f64>,
    omega2: Vec<GridFunction>,
    omega2_integrals: Vec<f64>,
    omega3: Vec<Option<Kernel2D>>,
    omega3_rows: Vec<GridFunction>,
    k4: Option<Kernel2D>,
}

/// Per-row ring arrays: `g[S](t) = Π_{v∈S} f(t - p_v)` for the external
/// vertices `p_0 = x`, `p_1 = 0`, their sums and their convolutions with `f`.
struct Row {
    g: [Vec<f64>; 4],
    sum: [f64; 4],
    conv: Option<[Vec<f64>; 4]>,
    spectra: Option<[Spectrum; 4]>,
}

struct Ring<'a> {
    spec: GridSpec,
    f_off: &'a [f64],
    f_hat: &'a [Complex<f64>],
    plan: &'a Circular,
}

impl Ring<'_> {
    fn f_at(&self, d: isize) -> f64 {
        let p = self.spec.period() as isize;
        self.f_off[d.rem_euclid(p) as usize]
    }

    fn row(&self, i: usize, conv: bool, spectra: bool) -> Row {
        let p = self.spec.period();
        let k = self.spec.center() as isize;
        let h = self.spec.spacing();
        let fx: Vec<f64> = (0..p).map(|t| self.f_at(t as isize - i as isize)).collect();
        let f0: Vec<f64> = (0..p).map(|t| self.f_at(t as isize - k)).collect();
        let both: Vec<f64> = fx.iter().zip(&f0).map(|(a, b)| a * b).collect();
        let g = [vec![1.0; p], fx, f0, both];
        let sum = [0, 1, 2, 3].map(|s| h * g[s].iter().sum::<f64>());
        let conv = conv.then(|| {
            [0, 1, 2, 3].map(|s| {
                self.plan
                    .convolve(self.f_hat, &g[s])
                    .into_iter()
                    .map(|v| h * v)
                    .collect()
            })
        });
        let spectra = spectra.then(|| [0, 1, 2, 3].map(|s| self.plan.forward(&g[s])));
        Row {
            g,
            sum,
            conv,
            spectra,
        }
    }
}

impl ClusterSeries {
    /// Assembles all coefficients up to `trunc.n_max()`.
    pub fn assemble(p: &PairPotential, trunc: ClusterTruncation, level: Assembly) -> Result<Self> {
        let n_max = trunc.n_max();
        if n_max > 4 {
            return Err(Error::Unsupported(format!(
                "series assembly is implemented for n_max <= 4, got {n_max}"
            )));
        }
        let spec = *p.spec();
        let m = spec.points();
        let pp = spec.period();
        let k = spec.center();
        let h = spec.spacing();
        let f = p.mayer();
        let f_off = f.by_offset();
        let plan = Circular::new(pp);
        let f_hat = plan.forward(&f_off);
        let ring = Ring {
            spec,
            f_off: &f_off,
            f_hat: &f_hat,
            plan: &plan,
        };
        let kernels = level == Assembly::WithKernels;
        let start = Instant::now();

        let c3 = classes(3, 2)?;
        let c4 = classes(4, 2)?;
        let d4 = classes(4, 3)?;
        let q4 = four_point_classes()?;

        struct RowOut {
            w2: [f64; 5],
            w3_3: Option<Vec<f64>>,
            w3_4: Option<Vec<f64>>,
            k4: Option<Vec<f64>>,
        }

        let rows: Vec<RowOut> = (0..m)
            .into_par_iter()
            .map(|i| {
                let need_conv = n_max >= 4;
                let row = ring.row(i, need_conv, kernels && n_max >= 4);
                let fxi = ring.f_at(i as isize - k as isize);
                let mut w2 = [0.0; 5];
                w2[2] = fxi;
                if n_max >= 3 {
                    w2[3] = c3
                        .iter()
                        .map(|t| t.mult * fixed_product(t.fixed, &[fxi]) * row.sum[t.sa])
                        .sum();
                }
                if n_max >= 4 {
                    let conv = row.conv.as_ref().expect("convolutions requested");
                    let dots: Vec<[f64; 4]> = (0..4)
                        .map(|sa| {
                            [0, 1, 2, 3].map(|sb| {
                                h * row.g[sa].iter().zip(&conv[sb]).map(|(a, b)| a * b).sum::<f64>()
                            })
                        })
                        .collect();
                    let total: f64 = c4
                        .iter()
                        .map(|t| {
                            let tv = if t.link {
                                dots[t.sa][t.sb]
                            } else {
                                row.sum[t.sa] * row.sum[t.sb]
                            };
                            t.mult * fixed_product(t.fixed, &[fxi]) * tv
                        })
                        .sum();
                    w2[4] = 0.5 * total;
                }
                let mut out = RowOut {
                    w2,
                    w3_3: None,
                    w3_4: None,
                    k4: None,
                };
                if kernels && n_max >= 3 {
                    let fv = |j: usize| {
                        [
                            fxi,
                            ring.f_at(i as isize - j as isize),
                            ring.f_at(j as isize - k as isize),
                        ]
                    };
                    let r3: Vec<f64> = (0..pp)
                        .map(|j| {
                            let [a, b, c] = fv(j);
                            a * b + a * c + b * c + a * b * c
                        })
                        .collect();
                    out.w3_3 = Some(r3);
                    if n_max >= 4 {
                        let conv = row.conv.as_ref().expect("convolutions requested");
                        let r4: Vec<f64> = (0..pp)
                            .map(|j| {
                                let fvj = fv(j);
                                d4.iter()
                                    .map(|t| {
                                        let tv = if t.sa & 4 != 0 {
                                            conv[t.sa & 3][j]
                                        } else {
                                            row.sum[t.sa]
                                        };
                                        t.mult * fixed_product(t.fixed, &fvj) * tv
                                    })
                                    .sum()
                            })
                            .collect();
                        out.w3_4 = Some(r4);
                        let spectra = row.spectra.as_ref().expect("spectra requested");
                        let corr: Vec<Vec<f64>> = (0..16)
                            .map(|cd| {
                                plan.correlate(&spectra[cd / 4], &spectra[cd % 4])
                                    .into_iter()
                                    .map(|v| h * v)
                                    .collect()
                            })
                            .collect();
                        let rk: Vec<f64> = (0..pp)
                            .map(|j| {
                                let lag = (j as isize - k as isize).rem_euclid(pp as isize) as usize;
                                let fxp = ring.f_at(j as isize - k as isize);
                                q4.iter()
                                    .map(|&(ab, cd, sc, sd, mult)| {
                                        let mut c = mult * corr[sc * 4 + sd][lag];
                                        if ab {
                                            c *= fxi;
                                        }
                                        if cd {
                                            c *= fxp;
                                        }
                                        c
                                    })
                                    .sum()
                            })
                            .collect();
                        out.k4 = Some(rk);
                    }
                }
                out
            })
            .collect();

        let mut omega2 = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let mut v = vec![0.0; m];
            if n >= 2 {
                for i in k..m {
                    v[i] = rows[i].w2[n];
                    v[2 * k - i] = rows[i].w2[n];
                }
            }
            omega2.push(GridFunction::from_vec(spec, v));
        }
        let omega2_integrals: Vec<f64> = omega2.iter().map(integrate).collect();
        let mut rho = vec![0.0; n_max + 1];
        let mut pressure = vec![0.0; n_max + 1];
        rho[1] = 1.0;
        pressure[1] = 1.0;
        for n in 2..=n_max {
            rho[n] = omega2_integrals[n] / (n - 1) as f64;
            pressure[n] = omega2_integrals[n] / (n * (n - 1)) as f64;
        }

        let to_kernel = |pick: &dyn Fn(&RowOut) -> Option<&Vec<f64>>| -> Option<Kernel2D> {
            let mut rs = Vec::with_capacity(m);
            for r in &rows {
                let mut row = pick(r)?.clone();
                row.push(row[0]);
                rs.push(row);
            }
            let mut kern = Kernel2D::from_rows(spec, rs);
            kern.symmetrize();
            Some(kern)
        };
        let mut omega3 = vec![None; n_max + 1];
        let mut k4 = None;
        if kernels {
            if n_max >= 3 {
                omega3[3] = to_kernel(&|r| r.w3_3.as_ref());
            }
            if n_max >= 4 {
                omega3[4] = to_kernel(&|r| r.w3_4.as_ref());
                k4 = to_kernel(&|r| r.k4.as_ref());
            }
        }
        let omega3_rows = omega3
            .iter()
            .map(|kern| match kern {
                Some(kk) => kk.row_integrals().symmetrized(),
                None => GridFunction::zeros(spec),
            })
            .collect();

        log::debug!(
            "{}",
            serde_json::json!({
                "stage": if kernels { "series+kernels" } else { "series" },
                "n": n_max,
                "graphs": (2..=n_max).map(|n| connected_graphs(n).map(|g| g.len()).unwrap_or(0)).sum::<usize>(),
                "seconds": start.elapsed().as_secs_f64(),
            })
        );

        Ok(Self {
            spec,
            n_max,
            rho,
            pressure,
            omega2,
            omega2_integrals,
            omega3,
            omega3_rows,
            k4,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn has_kernels(&self) -> bool {
        self.n_max < 3 || self.omega3[3].is_some()
    }

    /// Density coefficients `ρ_n`, `n = 0..=n_max` (`ρ_0 = 0`, `ρ_1 = 1`).
    pub fn rho_coefficients(&self) -> &[f64] {
        &self.rho
    }

    /// Coefficients of `βp`.
    pub fn pressure_coefficients(&self) -> &[f64] {
        &self.pressure
    }

    /// Coefficient function of `z^n` in `ω⁽²⁾`.
    pub fn omega2_coefficient(&self, n: usize) -> &GridFunction {
        &self.omega2[n]
    }

    /// `∫ω⁽²⁾_n dx`.
    pub fn omega2_integral(&self, n: usize) -> f64 {
        self.omega2_integrals[n]
    }

    /// Coefficient kernel of `z^n` in `ω⁽³⁾(x, 0, x')`, `n ≥ 3`.
    pub fn omega3_coefficient(&self, n: usize) -> Option<&Kernel2D> {
        self.omega3.get(n).and_then(Option::as_ref)
    }

    /// `x ↦ ∫ω⁽³⁾_n(x, 0, x') dx'` (zero when kernels were not assembled).
    pub fn omega3_row_integral(&self, n: usize) -> &GridFunction {
        &self.omega3_rows[n]
    }

    /// Coefficient kernel of `z⁴` in `K₄`.
    pub fn k4_coefficient(&self) -> Option<&Kernel2D> {
        self.k4.as_ref()
    }

    fn poly(c: &[f64], z: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &a| acc * z + a)
    }

    pub fn density(&self, z: f64) -> f64 {
        Self::poly(&self.rho, z)
    }

    /// `z dρ/dz`.
    pub fn density_log_derivative(&self, z: f64) -> f64 {
        (1..=self.n_max)
            .map(|n| n as f64 * self.rho[n] * z.powi(n as i32))
            .sum()
    }

    pub fn beta_pressure(&self, z: f64) -> f64 {
        Self::poly(&self.pressure, z)
    }

    pub fn omega2(&self, z: f64) -> GridFunction {
        let mut out = GridFunction::zeros(self.spec);
        for n in 2..=self.n_max {
            out = out.add_scaled(z.powi(n as i32), &self.omega2[n]);
        }
        out
    }

    pub fn omega3(&self, z: f64) -> Result<Kernel2D> {
        let mut out = Kernel2D::zeros(self.spec);
        for n in 3..=self.n_max {
            let kern = self.omega3_coefficient(n).ok_or_else(|| {
                Error::InvalidArgument("series was assembled without kernels".into())
            })?;
            out.add_scaled(z.powi(n as i32), kern);
        }
        Ok(out)
    }

    pub fn k4(&self, z: f64) -> Result<Kernel2D> {
        let mut out = Kernel2D::zeros(self.spec);
        if self.n_max >= 4 {
            let kern = self.k4.as_ref().ok_or_else(|| {
                Error::InvalidArgument("series was assembled without kernels".into())
            })?;
            out.add_scaled(z.powi(4), kern);
        }
        Ok(out)
    }
}
