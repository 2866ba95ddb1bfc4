use std::time::Instant;

use super::{refine_splitting, solve_stable, solve_unstable, split_error, Cocycle, InvariantSplitting, SplittingOptions};
use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::geometry::SymplecticMapModel;
use crate::torus::{build_center_frame, center_correction, invariance_residual, TorusEmbedding, TorusOptions};

#[derive(Clone, Debug, Default)]
pub struct WhiskeredOptions {
    pub torus: TorusOptions,
    pub splitting: SplittingOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WhiskeredReport {
    pub residual_before: f64,
    pub residual_after: f64,
    pub lambda_after: f64,
    /// Projection Newton steps spent re-adapting the splitting to the torus.
    pub projection_steps: usize,
    pub kappa_s: f64,
    pub kappa_u: f64,
    /// Residuals of the two hyperbolic difference equations.
    pub stable_residual: f64,
    pub unstable_residual: f64,
    pub twist: f64,
    /// `sup |P|` (Frobenius) of the center frame, a proxy for `|M^{-1}|`.
    pub m_inv_norm: f64,
    pub divisor_margin: f64,
    pub seconds: f64,
}

/// One Newton step for a whiskered torus: adapt the splitting to the
/// current torus, split the residual, solve the center part with the
/// reducibility frame and the hyperbolic parts by doubling.
pub fn newton_whiskered_step(
    torus: &TorusEmbedding,
    split: &InvariantSplitting,
    model: &SymplecticMapModel,
    opts: &WhiskeredOptions,
) -> Result<(TorusEmbedding, InvariantSplitting, WhiskeredReport)> {
    let start = Instant::now();
    let w = &torus.omega.omega;
    let e = invariance_residual(torus, model)?;
    let before = e.sup_norm();
    let cocycle = Cocycle::from_torus(torus, model);
    let (split, proj) = refine_splitting(split, &cocycle, &opts.splitting)?;
    let parts = split_error(&e, &split, w)?;

    let pi_c = split.pi_c().expect("refined splitting has both pairs");
    let frame = build_center_frame(torus, model, opts.torus.use_counterterm, &pi_c)?;
    let center = center_correction(torus, &frame, &parts.center, &opts.torus)?;

    let (e_s, e_u) = if opts.torus.use_counterterm {
        let g = torus
            .counterterm_field(model)
            .matmul(&FourierSeries::constant(torus.grid(), torus.l(), 1, &center.dlambda));
        let pu = split.pi_u.as_ref().expect("refined splitting has both pairs");
        (
            parts.stable.sub(&split.pi_s.rotate(w).matmul(&g)),
            parts.unstable.sub(&pu.rotate(w).matmul(&g)),
        )
    } else {
        (parts.stable, parts.unstable)
    };
    let ds = solve_stable(&e_s, &cocycle, &split, &opts.splitting.doubling)?;
    let du = solve_unstable(&e_u, &cocycle, &split, &opts.splitting.doubling)?;

    let mut next = torus.clone();
    next.k = torus.k.add(&center.delta).add(&ds.delta).add(&du.delta);
    for (lam, d) in next.lambda.iter_mut().zip(&center.dlambda) {
        *lam += d;
    }
    let next = next.normalized();
    next.k.check_finite("corrected whiskered torus")?;
    let after = invariance_residual(&next, model)?.sup_norm();
    let report = WhiskeredReport {
        residual_before: before,
        residual_after: after,
        lambda_after: next.lambda.iter().map(|x| x * x).sum::<f64>().sqrt(),
        projection_steps: proj.len(),
        kappa_s: ds.kappa,
        kappa_u: du.kappa,
        stable_residual: ds.residual,
        unstable_residual: du.residual,
        twist: center.twist,
        m_inv_norm: frame.p.sup_frobenius(),
        divisor_margin: center.divisor_margin,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((next, split, report))
}

/// Iterates [`newton_whiskered_step`] to `opts.torus.tol`, then adapts the
/// splitting to the final torus.
pub fn newton_whiskered_solve(
    guess: &TorusEmbedding,
    split: &InvariantSplitting,
    model: &SymplecticMapModel,
    opts: &WhiskeredOptions,
) -> Result<(TorusEmbedding, InvariantSplitting, Vec<WhiskeredReport>)> {
    let mut residual = invariance_residual(guess, model)?.sup_norm();
    let mut trace = vec![residual];
    let mut torus = guess.clone();
    let mut split = split.clone();
    let mut reports = Vec::new();
    let mut growth = 0;
    while residual > opts.torus.tol {
        if reports.len() >= opts.torus.max_iter {
            return Err(Error::NoConvergence { reason: format!("{} steps exhausted", opts.torus.max_iter), trace });
        }
        let (t, s, rep) = match newton_whiskered_step(&torus, &split, model, opts) {
            Ok(x) => x,
            Err(e) if reports.is_empty() => return Err(e),
            Err(e) => return Err(Error::NoConvergence { reason: e.to_string(), trace }),
        };
        trace.push(rep.residual_after);
        growth = if rep.residual_after > residual { growth + 1 } else { 0 };
        if !rep.residual_after.is_finite() || growth >= 3 {
            return Err(Error::NoConvergence { reason: "residual is not decreasing".into(), trace });
        }
        residual = rep.residual_after;
        reports.push(rep);
        torus = t;
        split = s;
    }
    if opts.torus.use_counterterm {
        let lam = torus.lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
        if lam > opts.torus.lambda_tol {
            return Err(Error::CountertermNonvanishing { lambda: lam, tol: opts.torus.lambda_tol });
        }
    }
    let (split, _) = refine_splitting(&split, &Cocycle::from_torus(&torus, model), &opts.splitting)?;
    Ok((torus, split, reports))
}
