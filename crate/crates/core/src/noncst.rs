//! Difference equations with non-constant coefficients,
//! `A(theta) Delta(theta) - Delta(theta + omega) B(theta) = eta(theta)`.
//!
//! Hyperbolic regimes are summed by doubling: after `n` sweeps the partial sum
//! holds `2^n` terms of the series. Scalar equations without a contraction are
//! reduced to constant coefficients through a logarithmic change of variables.

use crate::error::{Error, Result};
use crate::fourier::{solve_cohomology_constant, solve_cohomology_scaled, CohomologyOptions, FourierSeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// `|A^{-1}| |B| < 1`.
    Contractive,
    /// `|A| |B^{-1}| < 1`.
    Expansive,
    /// Scalar `A / B` of constant sign.
    Scalar1d,
}

#[derive(Clone, Debug)]
pub struct TwoSidedEquation {
    pub a: FourierSeries,
    pub b: FourierSeries,
    pub eta: FourierSeries,
    pub omega: Vec<f64>,
    pub regime: Regime,
    /// Inverse of `A` to use instead of the pointwise matrix inverse (for
    /// operators that are only invertible on a bundle).
    pub a_inv: Option<FourierSeries>,
    /// Same for `B`.
    pub b_inv: Option<FourierSeries>,
}

impl TwoSidedEquation {
    pub fn new(a: FourierSeries, b: FourierSeries, eta: FourierSeries, omega: &[f64], regime: Regime) -> Self {
        TwoSidedEquation { a, b, eta, omega: omega.to_vec(), regime, a_inv: None, b_inv: None }
    }

    pub fn with_a_inv(mut self, a_inv: FourierSeries) -> Self {
        self.a_inv = Some(a_inv);
        self
    }

    pub fn with_b_inv(mut self, b_inv: FourierSeries) -> Self {
        self.b_inv = Some(b_inv);
        self
    }

    /// `A Delta - (Delta o T_omega) B - eta`.
    pub fn residual(&self, delta: &FourierSeries) -> FourierSeries {
        self.a
            .matmul(delta)
            .sub(&delta.rotate(&self.omega).matmul(&self.b))
            .sub(&self.eta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoublingOptions {
    pub max_doublings: usize,
    /// Stop once the update is this small relative to the partial sum.
    pub rel_tol: f64,
}

impl Default for DoublingOptions {
    fn default() -> Self {
        DoublingOptions { max_doublings: 7, rel_tol: 1e-14 }
    }
}

#[derive(Clone, Debug)]
pub struct NoncstSolution {
    pub delta: FourierSeries,
    /// Estimated contraction factor per iterate of the cocycle.
    pub kappa: f64,
    pub doublings: usize,
}

struct DoublingSum {
    sum: FourierSeries,
    kappa: f64,
    doublings: usize,
}

/// Estimate of the contraction factor of `X -> L (X o T_shift) R`:
/// `min_n (sup|L_n| sup|R_n|)^(1/2^n)` over the first four doubling levels.
pub fn contraction_estimate(l: &FourierSeries, r: &FourierSeries, shift: &[f64]) -> f64 {
    let mut l = l.clone();
    let mut r = r.clone();
    let mut s = shift.to_vec();
    let mut kappa = f64::INFINITY;
    for n in 0..4 {
        let bound = l.sup_frobenius() * r.sup_frobenius();
        kappa = kappa.min(bound.powf(1.0 / (1u64 << n) as f64));
        if n < 3 {
            l = l.matmul(&l.rotate(&s));
            r = r.rotate(&s).matmul(&r);
            s.iter_mut().for_each(|x| *x *= 2.0);
        }
    }
    kappa
}

// sum of X = x0 + L (X o T_shift) R by doubling
fn doubling(
    mut l: FourierSeries,
    mut r: FourierSeries,
    x0: FourierSeries,
    shift: &[f64],
    opts: &DoublingOptions,
) -> Result<DoublingSum> {
    let kappa = contraction_estimate(&l, &r, shift);
    if !(kappa < 1.0) {
        return Err(Error::RegimeViolation(format!("contraction factor kappa = {kappa} is not below 1")));
    }
    let mut sum = x0;
    let mut s: Vec<f64> = shift.to_vec();
    let mut used = 0;
    for n in 0..opts.max_doublings {
        let update = l.matmul(&sum.rotate(&s)).matmul(&r);
        if !update.is_finite() {
            return Err(Error::Scaling);
        }
        let un = update.sup_norm();
        sum = sum.add(&update);
        used = n + 1;
        if un <= opts.rel_tol * sum.sup_norm() || un == 0.0 {
            break;
        }
        if n + 1 < opts.max_doublings {
            l = l.matmul(&l.rotate(&s));
            r = r.rotate(&s).matmul(&r);
            if !l.is_finite() || !r.is_finite() {
                return Err(Error::Scaling);
            }
            s.iter_mut().for_each(|x| *x *= 2.0);
        }
    }
    Ok(DoublingSum { sum, kappa, doublings: used })
}

fn inverse_or(given: &Option<FourierSeries>, m: &FourierSeries, what: &str) -> Result<FourierSeries> {
    match given {
        Some(x) => Ok(x.clone()),
        None => m
            .try_inverse()
            .ok_or_else(|| Error::RegimeViolation(format!("{what} is singular on the grid"))),
    }
}

/// Contractive regime:
/// `Delta = sum_k A^{-1} ... (A^{-1} o T_{k omega}) (eta o T_{k omega}) (B o T_{(k-1) omega}) ... B`.
pub fn solve_doubling_contractive(eq: &TwoSidedEquation, opts: &DoublingOptions) -> Result<NoncstSolution> {
    if eq.regime != Regime::Contractive {
        return Err(Error::RegimeViolation("equation is not declared contractive".into()));
    }
    let a_inv = inverse_or(&eq.a_inv, &eq.a, "A")?;
    let x0 = a_inv.matmul(&eq.eta);
    let out = doubling(a_inv, eq.b.clone(), x0, &eq.omega, opts)?;
    Ok(NoncstSolution { delta: out.sum, kappa: out.kappa, doublings: out.doublings })
}

/// Expansive regime, via `D = Delta o T_omega` solving
/// `D = -eta B^{-1} + A (D o T_{-omega}) B^{-1}`.
pub fn solve_doubling_expansive(eq: &TwoSidedEquation, opts: &DoublingOptions) -> Result<NoncstSolution> {
    if eq.regime != Regime::Expansive {
        return Err(Error::RegimeViolation("equation is not declared expansive".into()));
    }
    let b_inv = inverse_or(&eq.b_inv, &eq.b, "B")?;
    let x0 = eq.eta.matmul(&b_inv).neg();
    let back: Vec<f64> = eq.omega.iter().map(|w| -w).collect();
    let out = doubling(eq.a.clone(), b_inv, x0, &back, opts)?;
    Ok(NoncstSolution { delta: out.sum.rotate(&back), kappa: out.kappa, doublings: out.doublings })
}

#[derive(Clone, Debug)]
pub struct Scalar1dSolution {
    pub delta: FourierSeries,
    /// Constant multiplier of the reduced equation.
    pub nu: f64,
    /// Conjugating factor `C`.
    pub c: FourierSeries,
}

/// Scalar equation through `A/B = nu (C o T_omega) / C`, `Delta = W / C`,
/// `nu W - W o T_omega = (C o T_omega) B^{-1} eta`.
pub fn solve_1d(eq: &TwoSidedEquation, opts: &CohomologyOptions) -> Result<Scalar1dSolution> {
    if eq.a.dim_range() != 1 || eq.b.dim_range() != 1 {
        return Err(Error::Shape("solve_1d needs scalar coefficients".into()));
    }
    let ratio: Vec<f64> = eq.a.values().iter().zip(eq.b.values()).map(|(a, b)| a / b).collect();
    let sign = if ratio.iter().all(|&r| r > 0.0) {
        1.0
    } else if ratio.iter().all(|&r| r < 0.0) {
        -1.0
    } else {
        return Err(Error::SignChange);
    };
    let smallest = ratio.iter().fold(f64::INFINITY, |m, r| m.min(r.abs()));
    if smallest < 1e-12 {
        return Err(Error::LogDomain { value: smallest });
    }
    let grid = eq.a.grid();
    let log_r = FourierSeries::from_values(grid, 1, 1, ratio.iter().map(|r| r.abs().ln()).collect())?;
    let mean = log_r.average()[0];
    let nu = sign * mean.exp();
    if (nu.abs() - 1.0).abs() < 1e-6 {
        return Err(Error::UnitMultiplier { nu });
    }
    // log C - log C o T_omega = log|A/B| - mean
    let log_c = solve_cohomology_constant(&log_r.zero_average(), &eq.omega, opts)?.phi;
    let c = log_c.map_points(1, 1, |x, o| o[0] = x[0].exp());
    let c_shift = log_c.rotate(&eq.omega).map_points(1, 1, |x, o| o[0] = x[0].exp());
    let b_inv = eq.b.map_points(1, 1, |x, o| o[0] = 1.0 / x[0]);
    let rhs = eq.eta.mul_scalar_field(&c_shift).mul_scalar_field(&b_inv);
    let w = solve_cohomology_scaled(&rhs, &eq.omega, nu, opts.divisor_floor)?.phi;
    let inv_c = c.map_points(1, 1, |x, o| o[0] = 1.0 / x[0]);
    let delta = w.mul_scalar_field(&inv_c);
    Ok(Scalar1dSolution { delta, nu, c })
}
