//! Uniform symmetric grids on `[-R, R]`, trapezoid quadrature and convolutions.
//!
//! Every grid also carries a periodic reading: the `M - 1` nodes `-R, .., R - h`
//! form a ring of period `2R` on which `x = R` is identified with `x = -R`.
//! For even functions the uniform ring sum equals the trapezoid rule, which is
//! what lets the cluster integrals keep translation invariance exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Circular;

/// Relative tail mass above which [`convolve`] warns.
const TAIL_WARN: f64 = 1e-6;

/// Grid of `points` nodes spanning `[-extent, extent]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    extent: f64,
    points: usize,
}

impl GridSpec {
    pub fn new(extent: f64, points: usize) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidGrid(format!("extent must be positive, got {extent}")));
        }
        if points < 3 || points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "point count must be odd and at least 3, got {points}"
            )));
        }
        Ok(Self { extent, points })
    }

    /// Grid with spacing `h` (rounded so that `extent` is a node).
    pub fn with_spacing(extent: f64, h: f64) -> Result<Self> {
        let half = (extent / h).round() as usize;
        Self::new(extent, 2 * half.max(1) + 1)
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / (self.points - 1) as f64
    }

    /// Index of the node at `x = 0`.
    pub fn center(&self) -> usize {
        (self.points - 1) / 2
    }

    /// Number of distinct nodes on the periodic ring.
    pub fn period(&self) -> usize {
        self.points - 1
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.spacing()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.x(i)).collect()
    }

    /// Trapezoid weight of node `i` (without the factor `h`).
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.points {
            0.5
        } else {
            1.0
        }
    }

    /// Node index of `x` if `x` lies on the grid.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let s = x / self.spacing() + self.center() as f64;
        let i = s.round();
        ((s - i).abs() < 1e-8 && i >= 0.0 && (i as usize) < self.points).then_some(i as usize)
    }

    /// Signed ring offset in `[-K, K)` equivalent to `d` modulo `2K`.
    pub fn wrap(&self, d: isize) -> isize {
        let k = self.center() as isize;
        (d + k).rem_euclid(2 * k) - k
    }

    /// Node index holding the value of an even periodic function at ring offset `d`.
    pub fn offset_index(&self, d: isize) -> usize {
        (self.center() as isize + self.wrap(d)) as usize
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        let same = self.points == other.points
            && (self.extent - other.extent).abs() <= 1e-12 * self.extent.max(other.extent);
        if same {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "R={} M={} vs R={} M={}",
                self.extent, self.points, other.extent, other.points
            )))
        }
    }
}

/// Real function sampled on a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.points() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                spec.points()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at x = {}",
                spec.x(i)
            )));
        }
        Ok(Self { spec, values })
    }

    pub(crate) fn from_vec(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.points());
        Self { spec, values }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        Self::from_vec(spec, vec![c; spec.points()])
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec(spec, spec.xs().into_iter().map(f).collect())
    }

    /// Samples `f` on `x >= 0` and mirrors, so the result is exactly even.
    pub fn even_from_fn(spec: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        let k = spec.center();
        let mut values = vec![0.0; spec.points()];
        for i in k..spec.points() {
            let v = f(spec.x(i));
            values[i] = v;
            values[2 * k - i] = v;
        }
        Self::from_vec(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Value at `x = 0`.
    pub fn at_origin(&self) -> f64 {
        self.values[self.spec.center()]
    }

    /// Largest `|v(x) - v(-x)|`.
    pub fn asymmetry(&self) -> f64 {
        let m = self.values.len();
        (0..m / 2)
            .map(|i| (self.values[i] - self.values[m - 1 - i]).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_even(&self, tol: f64) -> bool {
        self.asymmetry() <= tol
    }

    pub fn ensure_even(&self, tol: f64) -> Result<()> {
        let a = self.asymmetry();
        if a <= tol {
            Ok(())
        } else {
            Err(Error::NotEven(a))
        }
    }

    /// Even part `(v(x) + v(-x)) / 2`.
    pub fn symmetrized(&self) -> Self {
        let m = self.values.len();
        let values = (0..m)
            .map(|i| 0.5 * (self.values[i] + self.values[m - 1 - i]))
            .collect();
        Self::from_vec(self.spec, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec(self.spec, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_vec(self.spec, values)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Values on the periodic ring (drops the duplicated node `x = R`).
    pub(crate) fn ring(&self) -> &[f64] {
        &self.values[..self.spec.period()]
    }

    /// Builds a grid function from ring values, restoring the node `x = R`.
    pub(crate) fn from_ring(spec: GridSpec, mut ring: Vec<f64>) -> Self {
        debug_assert_eq!(ring.len(), spec.period());
        ring.push(ring[0]);
        Self::from_vec(spec, ring)
    }

    /// Ring array indexed by offset: entry `d` holds the value at `wrap(d) * h`.
    pub(crate) fn by_offset(&self) -> Vec<f64> {
        (0..self.spec.period())
            .map(|d| self.values[self.spec.offset_index(d as isize)])
            .collect()
    }

    /// Inverse of [`Self::by_offset`].
    pub(crate) fn from_offsets(spec: GridSpec, off: &[f64]) -> Self {
        let k = spec.center() as isize;
        let p = spec.period() as isize;
        let values = (0..spec.points())
            .map(|i| off[(i as isize - k).rem_euclid(p) as usize])
            .collect();
        Self::from_vec(spec, values)
    }

    /// Writes the two-column table format with `#` header lines.
    pub fn write_table(&self, path: impl AsRef<Path>, header: &[String]) -> Result<()> {
        let mut out = String::new();
        for line in header {
            let _ = writeln!(out, "# {line}");
        }
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{:>24.16e} {:>24.16e}", self.spec.x(i), v);
        }
        fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
    }

    /// Reads a table that samples either the whole grid or its half `[0, R]`.
    pub fn read_table(spec: GridSpec, path: impl AsRef<Path>) -> Result<Self> {
        let table = Table::read(path)?;
        Self::new(spec, table.on_grid(&spec)?)
    }
}

/// Two-column `x value` table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split_whitespace();
            let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
                return Err(Error::Parse(format!("line {}: expected two columns", lineno + 1)));
            };
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad number `{s}`", lineno + 1)))
            };
            let xv = parse(a)?;
            if let Some(&last) = x.last() {
                if xv <= last {
                    return Err(Error::Parse(format!("line {}: x not ascending", lineno + 1)));
                }
            }
            x.push(xv);
            y.push(parse(b)?);
        }
        if x.is_empty() {
            return Err(Error::Parse("table has no data rows".into()));
        }
        Ok(Self { x, y })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Values on the nodes of `spec`; half tables starting at `x = 0` are mirrored.
    pub fn on_grid(&self, spec: &GridSpec) -> Result<Vec<f64>> {
        let h = spec.spacing();
        let k = spec.center();
        let matches = |offset: usize| {
            self.x
                .iter()
                .enumerate()
                .all(|(i, &x)| (x - spec.x(i + offset)).abs() <= 1e-8 * h.max(1.0))
        };
        if self.x.len() == spec.points() && matches(0) {
            Ok(self.y.clone())
        } else if self.x.len() == k + 1 && matches(k) {
            let mut out = vec![0.0; spec.points()];
            for (j, &v) in self.y.iter().enumerate() {
                out[k + j] = v;
                out[k - j] = v;
            }
            Ok(out)
        } else {
            Err(Error::GridMismatch(format!(
                "table with {} rows on [{}, {}] does not sample the grid R={} M={}",
                self.x.len(),
                self.x[0],
                self.x[self.x.len() - 1],
                spec.extent(),
                spec.points()
            )))
        }
    }
}

/// Function of two grid arguments stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel2D {
    spec: GridSpec,
    values: Vec<f64>,
}

impl Kernel2D {
    pub fn zeros(spec: GridSpec) -> Self {
        let m = spec.points();
        Self {
            spec,
            values: vec![0.0; m * m],
        }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let m = spec.points();
        let values = (0..m * m)
            .into_par_iter()
            .map(|ij| f(ij / m, ij % m))
            .collect();
        Self { spec, values }
    }

    pub(crate) fn from_rows(spec: GridSpec, rows: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(rows.len(), spec.points());
        Self {
            spec,
            values: rows.concat(),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.points() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.spec.points();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest `|k(x, x') - k(x', x)|`.
    pub fn asymmetry(&self) -> f64 {
        let m = self.spec.points();
        (0..m)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| (self.get(i, j) - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Replaces `k` by `(k + k^T) / 2`.
    pub fn symmetrize(&mut self) {
        let m = self.spec.points();
        for i in 0..m {
            for j in 0..i {
                let a = 0.5 * (self.values[i * m + j] + self.values[j * m + i]);
                self.values[i * m + j] = a;
                self.values[j * m + i] = a;
            }
        }
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: f64, other: &Kernel2D) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `x -> ∫ k(x, x') dx'`.
    pub fn row_integrals(&self) -> GridFunction {
        self.row_map(|v| v)
    }

    /// `x -> ∫ |k(x, x')| dx'`.
    pub fn row_abs_integrals(&self) -> GridFunction {
        self.row_map(f64::abs)
    }

    fn row_map(&self, g: impl Fn(f64) -> f64 + Sync) -> GridFunction {
        let spec = self.spec;
        let h = spec.spacing();
        let values = (0..spec.points())
            .into_par_iter()
            .map(|i| {
                let row = self.row(i);
                h * (0..row.len()).map(|j| spec.weight(j) * g(row[j])).sum::<f64>()
            })
            .collect();
        GridFunction::from_vec(spec, values)
    }
}

/// Trapezoid rule over `[-R, R]`, summed in mirrored pairs so odd integrands vanish exactly.
pub fn integrate(f: &GridFunction) -> f64 {
    let v = f.values();
    let k = f.spec().center();
    let mut s = v[k];
    for j in 1..k {
        s += v[k - j] + v[k + j];
    }
    s += 0.5 * (v[0] + v[2 * k]);
    s * f.spec().spacing()
}

/// `⟨f, g⟩ = ∫ f g dx`.
pub fn inner(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    f.spec().check_same(g.spec())?;
    Ok(integrate(&f.zip_map(g, |a, b| a * b)))
}

/// Mass of `|f|` on `|x| > fraction * R` relative to the total.
pub fn tail_mass(f: &GridFunction, fraction: f64) -> f64 {
    let spec = f.spec();
    let cut = fraction * spec.extent();
    let total = integrate(&f.map(f64::abs));
    if total == 0.0 {
        return 0.0;
    }
    let tail = f.zip_map(&GridFunction::from_fn(*spec, |x| x), |v, x| {
        if x.abs() > cut {
            v.abs()
        } else {
            0.0
        }
    });
    integrate(&tail) / total
}

/// Linear convolution `(f * g)(x) = ∫ f(x - y) g(y) dy`, zero-padded, restricted to `[-R, R]`.
pub fn convolve(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    let spec = *f.spec();
    spec.check_same(g.spec())?;
    for (name, h) in [("first", f), ("second", g)] {
        let t = tail_mass(h, 0.9);
        if t > TAIL_WARN {
            warn!("convolve: {name} operand has relative tail mass {t:.2e} beyond 0.9R");
        }
    }
    let m = spec.points();
    let k = spec.center();
    let plan = Circular::new(2 * m - 1);
    let weighted: Vec<f64> = (0..m).map(|j| spec.weight(j) * g.at(j)).collect();
    let full = plan.convolve(&plan.forward(f.values()), &weighted);
    let h = spec.spacing();
    Ok(GridFunction::from_vec(
        spec,
        (0..m).map(|i| h * full[k + i]).collect(),
    ))
}

/// Circular convolution on the periodic ring of period `2R`.
pub fn convolve_periodic(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    let spec = *f.spec();
    spec.check_same(g.spec())?;
    let plan = Circular::new(spec.period());
    Ok(ring_convolve(&plan, &plan.forward(&f.by_offset()), g))
}

pub(crate) fn ring_convolve(
    plan: &Circular,
    f_hat: &[rustfft::num_complex::Complex<f64>],
    g: &GridFunction,
) -> GridFunction {
    let spec = *g.spec();
    let h = spec.spacing();
    let c = plan.convolve(f_hat, g.ring());
    GridFunction::from_ring(spec, c.into_iter().map(|v| h * v).collect())
}

/// `(K v)(x) = ∫ k(x, x') v(x') dx'` by the trapezoid rule.
pub fn apply_kernel(k: &Kernel2D, v: &GridFunction) -> Result<GridFunction> {
    let spec = *v.spec();
    spec.check_same(k.spec())?;
    let h = spec.spacing();
    let wv: Vec<f64> = (0..spec.points()).map(|j| h * spec.weight(j) * v.at(j)).collect();
    let values = (0..spec.points())
        .into_par_iter()
        .map(|i| k.row(i).iter().zip(&wv).map(|(a, b)| a * b).sum())
        .collect();
    Ok(GridFunction::from_vec(spec, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(r: f64, m: usize) -> GridSpec {
        GridSpec::new(r, m).unwrap()
    }

    #[test]
    fn rejects_even_point_count() {
        assert!(GridSpec::new(1.0, 10).is_err());
        assert!(GridSpec::new(-1.0, 11).is_err());
    }

    #[test]
    fn unit_constant_integrates_to_width() {
        let f = GridFunction::constant(spec(1.0, 21), 1.0);
        assert!((integrate(&f) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn odd_function_integrates_to_exact_zero() {
        let f = GridFunction::from_fn(spec(3.0, 101), |x| x.powi(3) * (-x * x).exp() + x.sin());
        assert_eq!(integrate(&f), 0.0);
    }

    #[test]
    fn majorant_integral_matches_arctan() {
        let f = GridFunction::from_fn(spec(10.0, 4001), |x| 1.0 / (1.0 + x * x));
        assert!((integrate(&f) - 2.0 * 10f64.atan()).abs() < 1e-6);
    }

    #[test]
    fn box_self_convolution_is_triangle() {
        let s = spec(4.0, 161);
        let b = GridFunction::from_fn(s, |x| if x.abs() <= 1.0 { 1.0 } else { 0.0 });
        let c = convolve(&b, &b).unwrap();
        assert!((c.at_origin() - 2.0).abs() < 0.06);
        for i in 0..s.points() {
            let x = s.x(i);
            assert!((c.at(i) - (2.0 - x.abs()).max(0.0)).abs() < 0.06, "x={x}");
        }
    }

    #[test]
    fn offset_index_wraps_half_period() {
        let s = spec(2.0, 9);
        assert_eq!(s.wrap(4), -4);
        assert_eq!(s.wrap(-5), 3);
        assert_eq!(s.offset_index(0), 4);
        assert_eq!(s.offset_index(8), 4);
    }

    #[test]
    fn half_table_is_mirrored() {
        let s = spec(1.0, 5);
        let t = Table::parse("# c\n0 1\n0.5 2\n1.0 3\n").unwrap();
        assert_eq!(t.on_grid(&s).unwrap(), vec![3.0, 2.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn table_rejects_descending_x() {
        assert!(Table::parse("1 0\n0 0\n").is_err());
    }
}
