use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use crate::fourier::FourierSeries;
use crate::geometry::KickScalar;

/// Truncated Taylor polynomial `sum_n c_n s^n` in the whisker parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    c: Vec<f64>,
}

impl Jet {
    pub fn new(c: Vec<f64>) -> Self {
        assert!(!c.is_empty(), "a jet needs at least the order-0 term");
        Jet { c }
    }

    pub fn constant(x: f64, len: usize) -> Self {
        let mut c = vec![0.0; len];
        c[0] = x;
        Jet { c }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// Number of stored orders (`L + 1`).
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &x| acc * s + x)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        debug_assert_eq!(self.c.len(), rhs.c.len());
        for (a, b) in self.c.iter_mut().zip(&rhs.c) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        debug_assert_eq!(self.c.len(), rhs.c.len());
        for (a, b) in self.c.iter_mut().zip(&rhs.c) {
            *a -= b;
        }
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, t: f64) -> Jet {
        for a in &mut self.c {
            *a *= t;
        }
        self
    }
}

impl KickScalar for Jet {
    // S' = 2 pi C x', C' = -2 pi S x', matched order by order
    fn sin_cos_2pi(&self) -> (Jet, Jet) {
        let x = &self.c;
        let len = x.len();
        let mut s = vec![0.0; len];
        let mut c = vec![0.0; len];
        (s[0], c[0]) = (2.0 * PI * x[0]).sin_cos();
        for n in 1..len {
            let mut ds = 0.0;
            let mut dc = 0.0;
            for k in 1..=n {
                let kx = k as f64 * x[k];
                ds += kx * c[n - k];
                dc += kx * s[n - k];
            }
            s[n] = 2.0 * PI * ds / n as f64;
            c[n] = -2.0 * PI * dc / n as f64;
        }
        (Jet { c: s }, Jet { c })
    }

    fn constant_like(&self, x: f64) -> Jet {
        Jet::constant(x, self.c.len())
    }
}

/// Applies a jet map at every grid point. `inputs[n]` is the order-`n`
/// coefficient (an `m`-vector series); the result has `out_dim` components
/// and as many orders as the input.
pub(crate) fn jet_map<F>(inputs: &[FourierSeries], out_dim: usize, f: F) -> Vec<FourierSeries>
where
    F: Fn(&[Jet]) -> Vec<Jet> + Sync,
{
    let len = inputs.len();
    let m = inputs[0].dim_range();
    let refs: Vec<&FourierSeries> = inputs.iter().collect();
    let stacked = FourierSeries::vstack(&refs);
    let out = stacked.map_points(len * out_dim, 1, |p, o| {
        let jets: Vec<Jet> = (0..m).map(|i| Jet::new((0..len).map(|n| p[n * m + i]).collect())).collect();
        for (i, jet) in f(&jets).iter().enumerate() {
            for (n, &x) in jet.coeffs().iter().enumerate() {
                o[n * out_dim + i] = x;
            }
        }
    });
    (0..len).map(|n| out.rows_range(n * out_dim, out_dim)).collect()
}

/// Matrix-valued Fourier-Taylor series `sum_n X_n(theta) s^n`, truncated
/// after a fixed number of orders.
#[derive(Clone, Debug)]
pub(crate) struct FtMatrix {
    pub orders: Vec<FourierSeries>,
}

impl FtMatrix {
    pub fn new(orders: Vec<FourierSeries>) -> Self {
        FtMatrix { orders }
    }

    /// `x` at order 0, zero above.
    pub fn constant_in_s(x: FourierSeries, len: usize) -> Self {
        let z = FourierSeries::zeros(x.grid(), x.rows(), x.cols());
        let mut orders = vec![z; len];
        orders[0] = x;
        FtMatrix { orders }
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    /// Cauchy product truncated to the shorter length.
    pub fn mul(&self, other: &Self) -> Self {
        let len = self.len().min(other.len());
        let orders = (0..len)
            .map(|n| {
                let mut acc = self.orders[0].matmul(&other.orders[n]);
                for k in 1..=n {
                    acc = acc.add(&self.orders[k].matmul(&other.orders[n - k]));
                }
                acc
            })
            .collect();
        FtMatrix { orders }
    }

    pub fn add(&self, other: &Self) -> Self {
        FtMatrix { orders: self.orders.iter().zip(&other.orders).map(|(a, b)| a.add(b)).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        FtMatrix { orders: self.orders.iter().zip(&other.orders).map(|(a, b)| a.sub(b)).collect() }
    }

    pub fn transpose(&self) -> Self {
        FtMatrix { orders: self.orders.iter().map(|a| a.transpose()).collect() }
    }

    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        FtMatrix { orders: self.orders.iter().map(|a| a.block(r0, c0, nr, nc)).collect() }
    }

    pub fn hstack(parts: &[&Self]) -> Self {
        let len = parts[0].len();
        let orders = (0..len)
            .map(|n| {
                let cols: Vec<&FourierSeries> = parts.iter().map(|p| &p.orders[n]).collect();
                FourierSeries::hstack(&cols)
            })
            .collect();
        FtMatrix { orders }
    }

    /// `X(theta + omega, mu s)`.
    pub fn shifted(&self, omega: &[f64], mu: f64) -> Self {
        let mut scale = 1.0;
        let orders = self
            .orders
            .iter()
            .map(|a| {
                let out = a.rotate(omega).scale(scale);
                scale *= mu;
                out.to_grid().expect("finite shift")
            })
            .collect();
        FtMatrix { orders }
    }

    /// Inverse as a series: `Y_0 = X_0^{-1}`, `Y_n = -Y_0 sum_{k>=1} X_k Y_{n-k}`.
    pub fn inverse(&self) -> Option<Self> {
        let y0 = self.orders[0].try_inverse()?;
        let mut orders = vec![y0.clone()];
        for n in 1..self.len() {
            let mut acc = self.orders[1].matmul(&orders[n - 1]);
            for k in 2..=n {
                acc = acc.add(&self.orders[k].matmul(&orders[n - k]));
            }
            orders.push(y0.matmul(&acc).neg());
        }
        Some(FtMatrix { orders })
    }

    /// Values at every grid point for a fixed `s`.
    pub fn eval_s(&self, s: f64) -> FourierSeries {
        let mut acc = self.orders[self.len() - 1].clone();
        for a in self.orders.iter().rev().skip(1) {
            acc = acc.scale(s).add(a);
        }
        acc
    }
}
