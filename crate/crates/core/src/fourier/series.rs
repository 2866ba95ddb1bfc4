use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::Grid;
use crate::error::{Error, Result};

// below this many grid points pointwise maps stay on the calling thread
const PAR_THRESHOLD: usize = 4096;

/// A periodic function `T^l -> R^{rows x cols}` held as grid values and
/// (lazily) as Hermitian-packed Fourier coefficients.
///
/// Values are stored component-major: component `c = r * cols + col` occupies
/// `values[c * N .. (c + 1) * N]`. Vectors use `cols == 1`.
/// Whichever representation is missing is computed on first access and
/// cached; the series itself is immutable.
#[derive(Clone, Debug)]
pub struct FourierSeries {
    grid: Grid,
    rows: usize,
    cols: usize,
    values: OnceLock<Vec<f64>>,
    coeffs: OnceLock<Vec<Complex64>>,
}

impl FourierSeries {
    pub fn from_values(grid: &Grid, rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        let need = grid.len() * rows * cols;
        if values.len() != need {
            return Err(Error::Shape(format!(
                "expected {need} grid values ({rows}x{cols} on {:?}), got {}",
                grid.dims(),
                values.len()
            )));
        }
        Ok(Self::raw_values(grid, rows, cols, values))
    }

    pub fn from_coeffs(grid: &Grid, rows: usize, cols: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        let need = grid.spectral_len() * rows * cols;
        if coeffs.len() != need {
            return Err(Error::Shape(format!(
                "expected {need} packed coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(Self::raw_coeffs(grid, rows, cols, coeffs))
    }

    pub(crate) fn raw_values(grid: &Grid, rows: usize, cols: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len() * rows * cols);
        let v = OnceLock::new();
        let _ = v.set(values);
        FourierSeries { grid: grid.clone(), rows, cols, values: v, coeffs: OnceLock::new() }
    }

    pub(crate) fn raw_coeffs(grid: &Grid, rows: usize, cols: usize, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.spectral_len() * rows * cols);
        let c = OnceLock::new();
        let _ = c.set(coeffs);
        FourierSeries { grid: grid.clone(), rows, cols, values: OnceLock::new(), coeffs: c }
    }

    /// Samples `f(theta, out)` at every grid point; `out` is a row-major
    /// `rows x cols` buffer.
    pub fn from_fn<F>(grid: &Grid, rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        let n = grid.len();
        let dim = rows * cols;
        let mut point_major = vec![0.0; n * dim];
        let fill = |(j, out): (usize, &mut [f64])| f(&grid.theta(j), out);
        if n >= PAR_THRESHOLD {
            point_major.par_chunks_mut(dim).enumerate().for_each(fill);
        } else {
            point_major.chunks_mut(dim).enumerate().for_each(fill);
        }
        Self::raw_values(grid, rows, cols, transpose_layout(&point_major, n, dim))
    }

    /// Vector-valued function of the angles.
    pub fn vector_fn<F>(grid: &Grid, m: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        Self::from_fn(grid, m, 1, f)
    }

    pub fn zeros(grid: &Grid, rows: usize, cols: usize) -> Self {
        Self::raw_values(grid, rows, cols, vec![0.0; grid.len() * rows * cols])
    }

    /// Constant function; `value` is row-major.
    pub fn constant(grid: &Grid, rows: usize, cols: usize, value: &[f64]) -> Self {
        assert_eq!(value.len(), rows * cols, "constant value has wrong length");
        let n = grid.len();
        let mut v = Vec::with_capacity(n * value.len());
        for &x in value {
            v.extend(std::iter::repeat(x).take(n));
        }
        Self::raw_values(grid, rows, cols, v)
    }

    pub fn identity(grid: &Grid, n: usize) -> Self {
        let mut id = vec![0.0; n * n];
        for i in 0..n {
            id[i * n + i] = 1.0;
        }
        Self::constant(grid, n, n, &id)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of scalar components `m = rows * cols`.
    pub fn dim_range(&self) -> usize {
        self.rows * self.cols
    }

    pub fn dim_domain(&self) -> usize {
        self.grid.ndim()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Whether the grid representation is already current.
    pub fn has_values(&self) -> bool {
        self.values.get().is_some()
    }

    /// Whether the coefficient representation is already current.
    pub fn has_coeffs(&self) -> bool {
        self.coeffs.get().is_some()
    }

    /// Grid values (component-major), computed from coefficients if needed.
    pub fn values(&self) -> &[f64] {
        self.values.get_or_init(|| {
            let c = self.coeffs.get().expect("series has no representation");
            let n = self.grid.len();
            let s = self.grid.spectral_len();
            let mut out = vec![0.0; n * self.dim_range()];
            for comp in 0..self.dim_range() {
                self.grid.inverse(&c[comp * s..(comp + 1) * s], &mut out[comp * n..(comp + 1) * n]);
            }
            out
        })
    }

    /// Packed coefficients (component-major), computed from values if needed.
    pub fn coeffs(&self) -> &[Complex64] {
        self.coeffs.get_or_init(|| {
            let v = self.values.get().expect("series has no representation");
            let n = self.grid.len();
            let s = self.grid.spectral_len();
            let mut out = vec![Complex64::new(0.0, 0.0); s * self.dim_range()];
            for comp in 0..self.dim_range() {
                self.grid.forward(&v[comp * n..(comp + 1) * n], &mut out[comp * s..(comp + 1) * s]);
            }
            out
        })
    }

    /// Makes the coefficients current, rejecting non-finite grid data.
    pub fn to_coeffs(&self) -> Result<Self> {
        if let Some(v) = self.values.get() {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NumericCorruption { context: "grid values".into() });
            }
        }
        self.coeffs();
        Ok(self.clone())
    }

    /// Makes the grid values current, rejecting non-finite coefficients.
    pub fn to_grid(&self) -> Result<Self> {
        if let Some(c) = self.coeffs.get() {
            if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NumericCorruption { context: "Fourier coefficients".into() });
            }
        }
        self.values();
        Ok(self.clone())
    }

    /// Whether every stored number is finite.
    pub fn is_finite(&self) -> bool {
        let v_ok = self.values.get().map_or(true, |v| v.iter().all(|x| x.is_finite()));
        let c_ok = self
            .coeffs
            .get()
            .map_or(true, |c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        v_ok && c_ok
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NumericCorruption { context: context.into() })
        }
    }

    /// Grid values of scalar component `c`.
    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values()[c * n..(c + 1) * n]
    }

    /// Entry `(r, col)` of a matrix-valued series.
    pub fn entry(&self, r: usize, col: usize) -> &[f64] {
        self.component(r * self.cols + col)
    }

    /// Packed coefficients of scalar component `c`.
    pub fn component_coeffs(&self, c: usize) -> &[Complex64] {
        let s = self.grid.spectral_len();
        &self.coeffs()[c * s..(c + 1) * s]
    }

    /// Row-major value at grid point `j`.
    pub fn point(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_range()];
        self.point_into(j, &mut out);
        out
    }

    pub fn point_into(&self, j: usize, out: &mut [f64]) {
        let n = self.grid.len();
        let v = self.values();
        for (c, o) in out.iter_mut().enumerate() {
            *o = v[c * n + j];
        }
    }

    /// Value at grid point `j` as a matrix.
    pub fn matrix_at(&self, j: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.point(j))
    }

    /// Reinterprets the components with a new shape.
    pub fn reshape(&self, rows: usize, cols: usize) -> Self {
        assert_eq!(rows * cols, self.dim_range(), "reshape changes component count");
        let mut out = self.clone();
        out.rows = rows;
        out.cols = cols;
        out
    }

    // ---- spectral operators -------------------------------------------------

    fn map_coeffs<F>(&self, f: F) -> Self
    where
        F: Fn(usize, Complex64) -> Complex64,
    {
        let s = self.grid.spectral_len();
        let c = self.coeffs();
        let out: Vec<Complex64> = c.iter().enumerate().map(|(i, &z)| f(i % s, z)).collect();
        Self::raw_coeffs(&self.grid, self.rows, self.cols, out)
    }

    /// Composition with the rigid rotation, `f(. + omega)`.
    pub fn rotate(&self, omega: &[f64]) -> Self {
        assert_eq!(omega.len(), self.grid.ndim(), "frequency dimension mismatch");
        if omega.iter().all(|&w| w == 0.0) {
            return self.clone();
        }
        let mult = self.shift_multipliers(omega);
        self.map_coeffs(|i, z| z * mult[i])
    }

    pub(crate) fn shift_multipliers(&self, omega: &[f64]) -> Vec<Complex64> {
        (0..self.grid.spectral_len())
            .map(|i| self.grid.shift_multiplier(&self.grid.wavevector(i), omega))
            .collect()
    }

    /// Partial derivative along `axis`. Nyquist modes are dropped.
    pub fn derivative(&self, axis: usize) -> Self {
        assert!(axis < self.grid.ndim(), "axis out of range");
        let two_pi = 2.0 * std::f64::consts::PI;
        let mult: Vec<Complex64> = (0..self.grid.spectral_len())
            .map(|i| {
                let k = self.grid.wavevector(i);
                if self.grid.is_nyquist(&k, axis) {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, two_pi * k[axis] as f64)
                }
            })
            .collect();
        self.map_coeffs(|i, z| z * mult[i])
    }

    /// Jacobian with respect to the angles: an `m x l` matrix series for a
    /// vector series of dimension `m`.
    pub fn jacobian(&self) -> Self {
        assert_eq!(self.cols, 1, "jacobian expects a vector series");
        let l = self.grid.ndim();
        let parts: Vec<Self> = (0..l).map(|a| self.derivative(a)).collect();
        let n = self.grid.len();
        let m = self.rows;
        let mut v = vec![0.0; n * m * l];
        for r in 0..m {
            for (a, p) in parts.iter().enumerate() {
                v[(r * l + a) * n..(r * l + a + 1) * n].copy_from_slice(p.component(r));
            }
        }
        Self::raw_values(&self.grid, m, l, v)
    }

    /// Average over the torus of each component (row-major).
    pub fn average(&self) -> Vec<f64> {
        if let Some(c) = self.coeffs.get() {
            let s = self.grid.spectral_len();
            return (0..self.dim_range()).map(|comp| c[comp * s].re).collect();
        }
        let n = self.grid.len() as f64;
        (0..self.dim_range())
            .map(|comp| self.component(comp).iter().sum::<f64>() / n)
            .collect()
    }

    /// Removes the average of every component.
    pub fn zero_average(&self) -> Self {
        let avg = self.average();
        self.map_coeffs_component(|comp, i, z| if i == 0 { z - avg[comp] } else { z })
    }

    fn map_coeffs_component<F>(&self, f: F) -> Self
    where
        F: Fn(usize, usize, Complex64) -> Complex64,
    {
        let s = self.grid.spectral_len();
        let c = self.coeffs();
        let out: Vec<Complex64> = c.iter().enumerate().map(|(i, &z)| f(i / s, i % s, z)).collect();
        Self::raw_coeffs(&self.grid, self.rows, self.cols, out)
    }

    /// Maximum absolute grid value over all components.
    pub fn sup_norm(&self) -> f64 {
        self.values().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Sup over the grid of the pointwise Frobenius norm.
    pub fn sup_frobenius(&self) -> f64 {
        let n = self.grid.len();
        let v = self.values();
        let mut acc = vec![0.0; n];
        for comp in 0..self.dim_range() {
            for (a, x) in acc.iter_mut().zip(&v[comp * n..(comp + 1) * n]) {
                *a += x * x;
            }
        }
        acc.into_iter().fold(0.0, f64::max).sqrt()
    }

    /// Sup over the grid of the pointwise operator 2-norm of a matrix series.
    pub fn sup_operator_norm(&self) -> f64 {
        let mut best: f64 = 0.0;
        for j in 0..self.grid.len() {
            let m = self.matrix_at(j);
            let sv = m.singular_values();
            best = best.max(sv.iter().cloned().fold(0.0, f64::max));
        }
        best
    }

    /// Fraction of spectral energy in the top octave of every axis.
    pub fn tail_fraction(&self) -> f64 {
        let s = self.grid.spectral_len();
        let c = self.coeffs();
        let dims = self.grid.dims();
        let mut total = 0.0;
        let mut tail = 0.0;
        for i in 0..s {
            let k = self.grid.wavevector(i);
            let top = k
                .iter()
                .zip(dims)
                .any(|(&kk, &n)| kk.unsigned_abs() as usize * 4 > n);
            let w = self.grid.hermitian_weight(i);
            for comp in 0..self.dim_range() {
                let e = w * c[comp * s + i].norm_sqr();
                total += e;
                if top {
                    tail += e;
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    /// Evaluates the trigonometric interpolant at an arbitrary point.
    pub fn eval_at(&self, theta: &[f64]) -> Vec<f64> {
        let s = self.grid.spectral_len();
        let c = self.coeffs();
        let two_pi = 2.0 * std::f64::consts::PI;
        let phases: Vec<Complex64> = (0..s)
            .map(|i| {
                let k = self.grid.wavevector(i);
                let ph: f64 = k.iter().zip(theta).map(|(&kk, &t)| kk as f64 * t).sum();
                Complex64::from_polar(self.grid.hermitian_weight(i), two_pi * ph)
            })
            .collect();
        (0..self.dim_range())
            .map(|comp| {
                c[comp * s..(comp + 1) * s]
                    .iter()
                    .zip(&phases)
                    .map(|(a, p)| (a * p).re)
                    .sum()
            })
            .collect()
    }

    /// Transfers the series to another grid by zero padding or truncation of
    /// the coefficients. Nyquist modes of the coarser grid are split evenly
    /// between the two signs when refining and dropped when coarsening.
    pub fn resample(&self, target: &Grid) -> Result<Self> {
        if target.ndim() != self.grid.ndim() {
            return Err(Error::Shape("resample to a grid of different dimension".into()));
        }
        if target == &self.grid {
            return Ok(self.clone());
        }
        let s_old = self.grid.spectral_len();
        let s_new = target.spectral_len();
        let c = self.coeffs();
        let old_dims = self.grid.dims();
        let new_dims = target.dims();
        let mut out = vec![Complex64::new(0.0, 0.0); s_new * self.dim_range()];
        for i in 0..s_new {
            let k = target.wavevector(i);
            let mut factor = 1.0;
            let mut keep = true;
            for a in 0..k.len() {
                let ka = k[a].unsigned_abs() as usize;
                let n_old = old_dims[a];
                let n_new = new_dims[a];
                if 2 * ka > n_old {
                    keep = false;
                } else if 2 * ka == n_old {
                    if n_new > n_old {
                        factor *= 0.5;
                    } else {
                        keep = false;
                    }
                } else if 2 * ka == n_new && n_new < n_old {
                    keep = false;
                }
            }
            if !keep {
                continue;
            }
            let Some(j) = self.grid.index_of(&k).or_else(|| {
                // negative-Nyquist entries of a non-last axis share the +N/2 slot
                let kk: Vec<i64> = k
                    .iter()
                    .zip(old_dims)
                    .map(|(&x, &n)| if -2 * x == n as i64 { -x } else { x })
                    .collect();
                self.grid.index_of(&kk)
            }) else {
                continue;
            };
            for comp in 0..self.dim_range() {
                out[comp * s_new + i] = c[comp * s_old + j] * factor;
            }
        }
        Ok(Self::raw_coeffs(target, self.rows, self.cols, out))
    }

    // ---- pointwise algebra --------------------------------------------------

    fn assert_same(&self, other: &Self) {
        assert_eq!(self.grid, other.grid, "series live on different grids");
        assert_eq!(self.shape(), other.shape(), "series shapes differ");
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64, g: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        self.assert_same(other);
        if !self.has_values() && !other.has_values() {
            let c: Vec<Complex64> = self.coeffs().iter().zip(other.coeffs()).map(|(&a, &b)| g(a, b)).collect();
            return Self::raw_coeffs(&self.grid, self.rows, self.cols, c);
        }
        let v: Vec<f64> = self.values().iter().zip(other.values()).map(|(&a, &b)| f(a, b)).collect();
        Self::raw_values(&self.grid, self.rows, self.cols, v)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b, |a, b| a - b)
    }

    /// `self + t * other`.
    pub fn axpy(&self, t: f64, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + t * b, |a, b| a + b * t)
    }

    pub fn scale(&self, t: f64) -> Self {
        if !self.has_values() {
            let c: Vec<Complex64> = self.coeffs().iter().map(|&z| z * t).collect();
            return Self::raw_coeffs(&self.grid, self.rows, self.cols, c);
        }
        let v: Vec<f64> = self.values().iter().map(|&x| x * t).collect();
        Self::raw_values(&self.grid, self.rows, self.cols, v)
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    /// Adds a constant (row-major) to every point.
    pub fn add_constant(&self, value: &[f64]) -> Self {
        assert_eq!(value.len(), self.dim_range());
        let n = self.grid.len();
        let mut v = self.values().to_vec();
        for (comp, &x) in value.iter().enumerate() {
            for y in &mut v[comp * n..(comp + 1) * n] {
                *y += x;
            }
        }
        Self::raw_values(&self.grid, self.rows, self.cols, v)
    }

    /// Pointwise product with a scalar series.
    pub fn mul_scalar_field(&self, s: &Self) -> Self {
        assert_eq!(s.dim_range(), 1, "expected a scalar series");
        assert_eq!(self.grid, s.grid);
        let n = self.grid.len();
        let sv = s.values();
        let mut v = self.values().to_vec();
        for comp in 0..self.dim_range() {
            for (y, &a) in v[comp * n..(comp + 1) * n].iter_mut().zip(sv) {
                *y *= a;
            }
        }
        Self::raw_values(&self.grid, self.rows, self.cols, v)
    }

    /// Pointwise matrix product `self(theta) * other(theta)`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.grid, other.grid, "series live on different grids");
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let n = self.grid.len();
        let (r, k, c) = (self.rows, self.cols, other.cols);
        let a = self.values();
        let b = other.values();
        let mut v = vec![0.0; n * r * c];
        for i in 0..r {
            for jcol in 0..c {
                let out = &mut v[(i * c + jcol) * n..(i * c + jcol + 1) * n];
                for p in 0..k {
                    let x = &a[(i * k + p) * n..(i * k + p + 1) * n];
                    let y = &b[(p * c + jcol) * n..(p * c + jcol + 1) * n];
                    for ((o, &xa), &yb) in out.iter_mut().zip(x).zip(y) {
                        *o += xa * yb;
                    }
                }
            }
        }
        Self::raw_values(&self.grid, r, c, v)
    }

    /// Pointwise product with a constant matrix on the left (row-major).
    pub fn left_mul_const(&self, m: &DMatrix<f64>) -> Self {
        let c = FourierSeries::constant(&self.grid, m.nrows(), m.ncols(), &row_major(m));
        c.matmul(self)
    }

    pub fn transpose(&self) -> Self {
        let n = self.grid.len();
        let v = self.values();
        let mut out = vec![0.0; v.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j * self.rows + i) * n..(j * self.rows + i + 1) * n]
                    .copy_from_slice(&v[(i * self.cols + j) * n..(i * self.cols + j + 1) * n]);
            }
        }
        Self::raw_values(&self.grid, self.cols, self.rows, out)
    }

    /// Pointwise inverse of a square matrix series; `None` if singular anywhere.
    pub fn try_inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols, "inverse of a non-square series");
        let n = self.rows;
        if n == 1 {
            let v: Vec<f64> = self.values().iter().map(|&x| 1.0 / x).collect();
            if v.iter().any(|x| !x.is_finite()) {
                return None;
            }
            return Some(Self::raw_values(&self.grid, 1, 1, v));
        }
        let out = self.try_map_points(n, n, |inp, out| {
            let m = DMatrix::from_row_slice(n, n, inp);
            let inv = m.try_inverse()?;
            out.copy_from_slice(&row_major(&inv));
            Some(())
        })?;
        out.is_finite().then_some(out)
    }

    /// Applies `f(input_row_major, output_row_major)` at every grid point.
    pub fn map_points<F>(&self, rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        self.try_map_points(rows, cols, |a, b| {
            f(a, b);
            Some(())
        })
        .expect("infallible map")
    }

    /// Fallible variant of [`map_points`](Self::map_points).
    pub fn try_map_points<F>(&self, rows: usize, cols: usize, f: F) -> Option<Self>
    where
        F: Fn(&[f64], &mut [f64]) -> Option<()> + Sync,
    {
        let n = self.grid.len();
        let din = self.dim_range();
        let dout = rows * cols;
        let input = transpose_layout(self.values(), din, n);
        let mut out = vec![0.0; n * dout];
        let ok = if n >= PAR_THRESHOLD {
            out.par_chunks_mut(dout)
                .zip(input.par_chunks(din.max(1)))
                .all(|(o, i)| f(i, o).is_some())
        } else {
            out.chunks_mut(dout)
                .zip(input.chunks(din.max(1)))
                .all(|(o, i)| f(i, o).is_some())
        };
        ok.then(|| Self::raw_values(&self.grid, rows, cols, transpose_layout(&out, n, dout)))
    }

    /// Rows `r0..r0+nr` and columns `c0..c0+nc`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols, "block out of range");
        let n = self.grid.len();
        let v = self.values();
        let mut out = Vec::with_capacity(n * nr * nc);
        for i in r0..r0 + nr {
            for j in c0..c0 + nc {
                out.extend_from_slice(&v[(i * self.cols + j) * n..(i * self.cols + j + 1) * n]);
            }
        }
        Self::raw_values(&self.grid, nr, nc, out)
    }

    /// Rows `r0..r0+nr` of a series (all columns).
    pub fn rows_range(&self, r0: usize, nr: usize) -> Self {
        self.block(r0, 0, nr, self.cols)
    }

    pub fn column(&self, c: usize) -> Self {
        self.block(0, c, self.rows, 1)
    }

    /// Horizontal concatenation of series with the same number of rows.
    pub fn hstack(parts: &[&Self]) -> Self {
        let first = parts[0];
        let n = first.grid.len();
        let rows = first.rows;
        let cols: usize = parts.iter().map(|p| p.cols).sum();
        let mut v = vec![0.0; n * rows * cols];
        let mut c0 = 0;
        for p in parts {
            assert_eq!(p.rows, rows, "hstack row mismatch");
            assert_eq!(p.grid, first.grid);
            for i in 0..rows {
                for j in 0..p.cols {
                    v[(i * cols + c0 + j) * n..(i * cols + c0 + j + 1) * n].copy_from_slice(p.entry(i, j));
                }
            }
            c0 += p.cols;
        }
        Self::raw_values(&first.grid, rows, cols, v)
    }

    /// Vertical concatenation of series with the same number of columns.
    pub fn vstack(parts: &[&Self]) -> Self {
        let first = parts[0];
        let cols = first.cols;
        let rows: usize = parts.iter().map(|p| p.rows).sum();
        let mut v = Vec::with_capacity(first.grid.len() * rows * cols);
        for p in parts {
            assert_eq!(p.cols, cols, "vstack column mismatch");
            assert_eq!(p.grid, first.grid);
            v.extend_from_slice(p.values());
        }
        Self::raw_values(&first.grid, rows, cols, v)
    }

    /// Replaces rows `r0..` with `part`.
    pub fn with_rows(&self, r0: usize, part: &Self) -> Self {
        assert_eq!(part.cols, self.cols);
        assert!(r0 + part.rows <= self.rows);
        let n = self.grid.len();
        let mut v = self.values().to_vec();
        let off = r0 * self.cols * n;
        v[off..off + part.values().len()].copy_from_slice(part.values());
        Self::raw_values(&self.grid, self.rows, self.cols, v)
    }

    /// Sup-norm distance to another series.
    pub fn distance(&self, other: &Self) -> f64 {
        self.assert_same(other);
        self.values()
            .iter()
            .zip(other.values())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Row-major copy of a matrix.
pub fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

// (a x b) -> (b x a) layout transpose of a flat buffer
fn transpose_layout(src: &[f64], a: usize, b: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for i in 0..a {
        for j in 0..b {
            out[j * a + i] = src[i * b + j];
        }
    }
    out
}
