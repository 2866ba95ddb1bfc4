use super::{Cocycle, InvariantSplitting};
use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::noncst::{
    contraction_estimate, solve_doubling_contractive, solve_doubling_expansive, DoublingOptions, Regime,
    TwoSidedEquation,
};

/// Components `E^{s,c,u}(theta) = Pi^{s,c,u}(theta + omega) E(theta)`.
#[derive(Clone, Debug)]
pub struct SplitError {
    pub stable: FourierSeries,
    pub unstable: FourierSeries,
    pub center: FourierSeries,
}

/// Splits a residual along the bundles at the image point. The center part
/// is the remainder, so the three parts add up to `e` exactly.
pub fn split_error(e: &FourierSeries, split: &InvariantSplitting, omega: &[f64]) -> Result<SplitError> {
    let pu = split
        .pi_u
        .as_ref()
        .ok_or_else(|| Error::Shape("splitting has no unstable projection".into()))?;
    let stable = split.pi_s.rotate(omega).matmul(e);
    let unstable = pu.rotate(omega).matmul(e);
    let center = e.sub(&stable).sub(&unstable);
    Ok(SplitError { stable, unstable, center })
}

#[derive(Clone, Debug)]
pub struct HyperbolicCorrection {
    pub delta: FourierSeries,
    pub kappa: f64,
    /// `sup |Z Delta - Delta o T_omega + E~|`.
    pub residual: f64,
}

fn defining_residual(cocycle: &Cocycle, delta: &FourierSeries, e: &FourierSeries) -> f64 {
    cocycle.z.matmul(delta).sub(&delta.rotate(&cocycle.omega)).add(e).sup_norm()
}

/// Solves `Z Delta - Delta o T_omega = -e` on the stable bundle,
/// `Delta = sum_k Z(theta - omega) ... Z(theta - k omega) e(theta - (k+1) omega)`.
pub fn solve_stable(
    e: &FourierSeries,
    cocycle: &Cocycle,
    split: &InvariantSplitting,
    opts: &DoublingOptions,
) -> Result<HyperbolicCorrection> {
    let w = &cocycle.omega;
    let n_s = split.pi_s.rotate(w).matmul(&cocycle.z).matmul(&split.pi_s);
    let one = FourierSeries::identity(e.grid(), 1);
    let eq = TwoSidedEquation::new(n_s.clone(), one.clone(), e.neg(), w, Regime::Expansive).with_b_inv(one.clone());
    let back: Vec<f64> = w.iter().map(|x| -x).collect();
    let sol = solve_doubling_expansive(&eq, opts).map_err(|err| match err {
        Error::RegimeViolation(_) => Error::InsufficientHyperbolicity { kappa: contraction_estimate(&n_s, &one, &back) },
        other => other,
    })?;
    let residual = defining_residual(cocycle, &sol.delta, e);
    Ok(HyperbolicCorrection { delta: sol.delta, kappa: sol.kappa, residual })
}

/// Solves `Z Delta - Delta o T_omega = -e` on the unstable bundle,
/// `Delta = -sum_k Z^{-1}(theta) ... Z^{-1}(theta + k omega) e(theta + k omega)`.
pub fn solve_unstable(
    e: &FourierSeries,
    cocycle: &Cocycle,
    split: &InvariantSplitting,
    opts: &DoublingOptions,
) -> Result<HyperbolicCorrection> {
    let w = &cocycle.omega;
    let pu = split
        .pi_u
        .as_ref()
        .ok_or_else(|| Error::Shape("splitting has no unstable projection".into()))?;
    let pu_next = pu.rotate(w);
    let n_u = pu_next.matmul(&cocycle.z).matmul(pu);
    let n_u_inv = pu.matmul(&cocycle.z_inv).matmul(&pu_next);
    let one = FourierSeries::identity(e.grid(), 1);
    let eq = TwoSidedEquation::new(n_u, one.clone(), e.neg(), w, Regime::Contractive).with_a_inv(n_u_inv.clone());
    let sol = solve_doubling_contractive(&eq, opts).map_err(|err| match err {
        Error::RegimeViolation(_) => Error::InsufficientHyperbolicity { kappa: contraction_estimate(&n_u_inv, &one, w) },
        other => other,
    })?;
    let residual = defining_residual(cocycle, &sol.delta, e);
    Ok(HyperbolicCorrection { delta: sol.delta, kappa: sol.kappa, residual })
}
