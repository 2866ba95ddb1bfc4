use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

struct Plans {
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    // forward/inverse complex plans for every axis but the last
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

/// A regular grid on the torus `T^l` with `N_1 x ... x N_l` points, every
/// `N_j` a power of two. Points are stored row-major (last axis fastest).
///
/// Coefficients use the Hermitian-packed layout of a real transform: the last
/// axis keeps only `0..=N_l/2`. Clones share the FFT plans.
#[derive(Clone)]
pub struct Grid {
    dims: Vec<usize>,
    plans: Arc<Plans>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("dims", &self.dims).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims
    }
}

impl Grid {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one axis".into()));
        }
        for &n in dims {
            if n < 4 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "grid size {n} must be a power of two (>= 4)"
                )));
            }
        }
        let last = *dims.last().unwrap();
        let mut rplanner = RealFftPlanner::<f64>::new();
        let mut cplanner = FftPlanner::<f64>::new();
        let plans = Plans {
            r2c: rplanner.plan_fft_forward(last),
            c2r: rplanner.plan_fft_inverse(last),
            fwd: dims[..dims.len() - 1]
                .iter()
                .map(|&n| cplanner.plan_fft_forward(n))
                .collect(),
            inv: dims[..dims.len() - 1]
                .iter()
                .map(|&n| cplanner.plan_fft_inverse(n))
                .collect(),
        };
        Ok(Grid { dims: dims.to_vec(), plans: Arc::new(plans) })
    }

    /// One-dimensional grid with `n` points.
    pub fn circle(n: usize) -> Result<Self> {
        Self::new(&[n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Torus dimension `l`.
    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn last(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Number of stored (packed) coefficients per component.
    pub fn spectral_len(&self) -> usize {
        self.len() / self.last() * (self.last() / 2 + 1)
    }

    /// Angle coordinates of grid point `j`.
    pub fn theta(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dims.len()];
        let mut rem = j;
        for (axis, &n) in self.dims.iter().enumerate().rev() {
            out[axis] = (rem % n) as f64 / n as f64;
            rem /= n;
        }
        out
    }

    /// Integer wave vector of packed coefficient `idx`.
    pub fn wavevector(&self, idx: usize) -> Vec<i64> {
        let l = self.dims.len();
        let half = self.last() / 2 + 1;
        let mut out = vec![0i64; l];
        out[l - 1] = (idx % half) as i64;
        let mut rem = idx / half;
        for axis in (0..l - 1).rev() {
            let n = self.dims[axis];
            let i = rem % n;
            rem /= n;
            out[axis] = if i <= n / 2 { i as i64 } else { i as i64 - n as i64 };
        }
        out
    }

    /// Whether component `axis` of `k` is the Nyquist mode of that axis.
    pub fn is_nyquist(&self, k: &[i64], axis: usize) -> bool {
        k[axis].unsigned_abs() as usize * 2 == self.dims[axis]
    }

    /// Weight of a packed coefficient when summing energies over the full
    /// (unpacked) spectrum.
    pub(crate) fn hermitian_weight(&self, idx: usize) -> f64 {
        let half = self.last() / 2;
        let i = idx % (half + 1);
        if i == 0 || i == half {
            1.0
        } else {
            2.0
        }
    }

    /// Multiplier of the shift `f -> f(. + omega)` on mode `k`. Nyquist modes
    /// use the real part of the phase so real functions stay real.
    pub fn shift_multiplier(&self, k: &[i64], omega: &[f64]) -> Complex64 {
        let mut m = Complex64::new(1.0, 0.0);
        for axis in 0..k.len() {
            let phase = 2.0 * std::f64::consts::PI * (k[axis] as f64) * omega[axis];
            if self.is_nyquist(k, axis) {
                m *= phase.cos();
            } else {
                m *= Complex64::from_polar(1.0, phase);
            }
        }
        m
    }

    /// Forward transform of one real component: `c_k = (1/N) sum f(theta_j) e^{-2 pi i k.theta_j}`.
    pub(crate) fn forward(&self, values: &[f64], out: &mut [Complex64]) {
        let last = self.last();
        let half = last / 2 + 1;
        let rows = self.len() / last;
        let mut scratch_in = vec![0.0; last];
        let mut scratch = self.plans.r2c.make_scratch_vec();
        for r in 0..rows {
            scratch_in.copy_from_slice(&values[r * last..(r + 1) * last]);
            self.plans
                .r2c
                .process_with_scratch(&mut scratch_in, &mut out[r * half..(r + 1) * half], &mut scratch)
                .expect("r2c length mismatch");
        }
        self.strided_axes(out, false);
        let norm = 1.0 / self.len() as f64;
        for c in out.iter_mut() {
            *c *= norm;
        }
    }

    /// Inverse transform (no normalization: coefficients sum to values).
    pub(crate) fn inverse(&self, coeffs: &[Complex64], out: &mut [f64]) {
        let last = self.last();
        let half = last / 2 + 1;
        let rows = self.len() / last;
        let mut work = coeffs.to_vec();
        self.strided_axes(&mut work, true);
        let mut scratch = self.plans.c2r.make_scratch_vec();
        for r in 0..rows {
            let row = &mut work[r * half..(r + 1) * half];
            row[0].im = 0.0;
            row[half - 1].im = 0.0;
            self.plans
                .c2r
                .process_with_scratch(row, &mut out[r * last..(r + 1) * last], &mut scratch)
                .expect("c2r length mismatch");
        }
    }

    // complex transforms along every axis but the last, in place on packed data
    fn strided_axes(&self, data: &mut [Complex64], inverse: bool) {
        let l = self.dims.len();
        if l == 1 {
            return;
        }
        let half = self.last() / 2 + 1;
        // packed shape: dims[0..l-1] x half
        let mut shape: Vec<usize> = self.dims[..l - 1].to_vec();
        shape.push(half);
        for axis in 0..l - 1 {
            let n = shape[axis];
            let stride: usize = shape[axis + 1..].iter().product();
            let outer: usize = shape[..axis].iter().product();
            let plan = if inverse { &self.plans.inv[axis] } else { &self.plans.fwd[axis] };
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * n * stride + s;
                    for i in 0..n {
                        buf[i] = data[base + i * stride];
                    }
                    plan.process(&mut buf);
                    for i in 0..n {
                        data[base + i * stride] = buf[i];
                    }
                }
            }
        }
    }

    /// Packed index of wave vector `k` on this grid, if it is resolved.
    pub(crate) fn index_of(&self, k: &[i64]) -> Option<usize> {
        let l = self.dims.len();
        let half = self.last() / 2 + 1;
        let kl = k[l - 1];
        if kl < 0 || kl as usize >= half {
            return None;
        }
        let mut idx = 0usize;
        for axis in 0..l - 1 {
            let n = self.dims[axis] as i64;
            if k[axis] > n / 2 || k[axis] <= -n / 2 {
                return None;
            }
            let i = if k[axis] >= 0 { k[axis] } else { k[axis] + n };
            idx = idx * n as usize + i as usize;
        }
        Some(idx * half + kl as usize)
    }
}
