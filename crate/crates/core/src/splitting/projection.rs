use std::time::Instant;

use super::{reproject, Cocycle, InvariantSplitting};
use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::noncst::{
    contraction_estimate, solve_doubling_contractive, solve_doubling_expansive, DoublingOptions, Regime,
    TwoSidedEquation,
};

#[derive(Clone, Debug)]
pub struct SplittingOptions {
    /// Target for `sup |E^cu| + sup |E^s|`.
    pub tol: f64,
    pub max_iter: usize,
    pub doubling: DoublingOptions,
}

impl Default for SplittingOptions {
    fn default() -> Self {
        SplittingOptions { tol: 1e-12, max_iter: 10, doubling: DoublingOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionReport {
    pub residual_before: f64,
    pub residual_after: f64,
    /// Contraction factors of the two difference equations.
    pub kappa_s: f64,
    pub kappa_cu: f64,
    /// `sup |Delta^s Pi^s - Delta^s_cu|`.
    pub constraint_defect: f64,
    /// Distance moved by the reprojection.
    pub reprojection_change: f64,
    pub seconds: f64,
}

/// `E^cu = Pi^cu(theta + omega) Z Pi^s` and `E^s = Pi^s(theta + omega) Z Pi^cu`.
pub fn projection_residuals(split: &InvariantSplitting, cocycle: &Cocycle) -> (FourierSeries, FourierSeries) {
    let w = &cocycle.omega;
    let e_cu = split.pi_cu.rotate(w).matmul(&cocycle.z).matmul(&split.pi_s);
    let e_s = split.pi_s.rotate(w).matmul(&cocycle.z).matmul(&split.pi_cu);
    (e_cu, e_s)
}

fn residual_size(split: &InvariantSplitting, cocycle: &Cocycle) -> f64 {
    let (a, b) = projection_residuals(split, cocycle);
    a.sup_norm() + b.sup_norm()
}

fn hyperbolicity_error(e: Error, l: &FourierSeries, r: &FourierSeries, shift: &[f64]) -> Error {
    match e {
        Error::RegimeViolation(_) => Error::InsufficientHyperbolicity { kappa: contraction_estimate(l, r, shift) },
        other => other,
    }
}

/// One Newton step for the pair `(Pi^s, Pi^cu)`. The unstable pair, if
/// present, is carried over unchanged.
///
/// `N_cu^{-1}` is the inverse on the center-unstable bundle,
/// `Pi^cu Z^{-1} Pi^cu(theta + omega)`.
pub fn newton_projection_step(
    split: &InvariantSplitting,
    cocycle: &Cocycle,
    opts: &SplittingOptions,
) -> Result<(InvariantSplitting, ProjectionReport)> {
    let start = Instant::now();
    let w = &cocycle.omega;
    let back: Vec<f64> = w.iter().map(|x| -x).collect();
    let z = &cocycle.z;
    let ps = &split.pi_s;
    let pcu = &split.pi_cu;
    let ps_next = ps.rotate(w);
    let pcu_next = pcu.rotate(w);

    let e_cu = pcu_next.matmul(z).matmul(ps);
    let e_s = ps_next.matmul(z).matmul(pcu);
    let before = e_cu.sup_norm() + e_s.sup_norm();
    let n_s = ps_next.matmul(z).matmul(ps);
    let n_cu = pcu_next.matmul(z).matmul(pcu);
    let n_cu_inv = pcu.matmul(&cocycle.z_inv).matmul(&pcu_next);

    // N_s D - (D o T_omega) N_cu = E^s
    let eq_s = TwoSidedEquation::new(n_s.clone(), n_cu.clone(), e_s, w, Regime::Expansive).with_b_inv(n_cu_inv.clone());
    let sol_s = solve_doubling_expansive(&eq_s, &opts.doubling)
        .map_err(|e| hyperbolicity_error(e, &n_s, &n_cu_inv, &back))?;
    // N_cu D - (D o T_omega) N_s = -E^cu
    let eq_cu = TwoSidedEquation::new(n_cu, n_s.clone(), e_cu.neg(), w, Regime::Contractive).with_a_inv(n_cu_inv.clone());
    let sol_cu = solve_doubling_contractive(&eq_cu, &opts.doubling)
        .map_err(|e| hyperbolicity_error(e, &n_cu_inv, &n_s, w))?;

    let delta = sol_s.delta.add(&sol_cu.delta);
    let constraint_defect = delta.matmul(ps).sub(&sol_cu.delta).sup_norm();
    let tilde = ps.add(&delta);
    let rank = split.stable_rank();
    let pi_s = reproject(&tilde, rank)?;
    let reprojection_change = pi_s.distance(&tilde);
    let mut next = InvariantSplitting::from_stable(pi_s);
    next.pi_u = split.pi_u.clone();
    next.pi_cs = split.pi_cs.clone();
    let after = residual_size(&next, cocycle);
    let report = ProjectionReport {
        residual_before: before,
        residual_after: after,
        kappa_s: sol_s.kappa,
        kappa_cu: sol_cu.kappa,
        constraint_defect,
        reprojection_change,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((next, report))
}

/// Newton iteration for both the stable pair and, when present, the
/// unstable pair (through the mirrored cocycle), until both projection
/// residuals are below `tol`.
pub fn refine_splitting(
    split: &InvariantSplitting,
    cocycle: &Cocycle,
    opts: &SplittingOptions,
) -> Result<(InvariantSplitting, Vec<ProjectionReport>)> {
    let mut reports = Vec::new();
    let stable = iterate(split.clone(), cocycle, opts, &mut reports)?;
    match split.mirrored() {
        None => Ok((stable, reports)),
        Some(m) => {
            let mirror = cocycle.mirrored();
            let unstable = iterate(m, &mirror, opts, &mut reports)?;
            let out = InvariantSplitting::from_stable(stable.pi_s).with_unstable(unstable.pi_s);
            Ok((out, reports))
        }
    }
}

fn iterate(
    mut split: InvariantSplitting,
    cocycle: &Cocycle,
    opts: &SplittingOptions,
    reports: &mut Vec<ProjectionReport>,
) -> Result<InvariantSplitting> {
    let mut residual = residual_size(&split, cocycle);
    let mut trace = vec![residual];
    let mut steps = 0;
    while residual > opts.tol {
        if steps >= opts.max_iter {
            return Err(Error::NoConvergence { reason: "projection Newton exhausted its steps".into(), trace });
        }
        let (next, rep) = newton_projection_step(&split, cocycle, opts)?;
        if !(rep.residual_after < residual) && rep.residual_after > opts.tol {
            trace.push(rep.residual_after);
            return Err(Error::NoConvergence { reason: "projection residual stopped decreasing".into(), trace });
        }
        residual = rep.residual_after;
        trace.push(residual);
        reports.push(rep);
        split = next;
        steps += 1;
    }
    Ok(split)
}
