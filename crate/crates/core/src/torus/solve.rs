use super::step::{newton_center_step, NewtonReport};
use super::{invariance_residual, TorusEmbedding, TorusOptions};
use crate::error::{Error, Result};
use crate::fourier::Grid;
use crate::geometry::SymplecticMapModel;

/// Iterates the center Newton step until `|E|_sup <= tol`.
///
/// Steps after the first that fail (degenerate frame, non-finite data,
/// winding jumps) are reported as non-convergence with the residual trace.
pub fn newton_solve(
    guess: &TorusEmbedding,
    model: &SymplecticMapModel,
    opts: &TorusOptions,
) -> Result<(TorusEmbedding, Vec<NewtonReport>)> {
    let r0 = invariance_residual(guess, model)?.sup_norm();
    let mut trace = vec![r0];
    let mut reports = Vec::new();
    let mut current = guess.clone();
    let mut residual = r0;
    let mut growth = 0;
    while residual > opts.tol {
        if reports.len() >= opts.max_iter {
            return Err(Error::NoConvergence { reason: format!("{} steps exhausted", opts.max_iter), trace });
        }
        let step = newton_center_step(&current, model, opts);
        let (next, report) = match step {
            Ok(x) => x,
            Err(e) if reports.is_empty() && !matches!(e, Error::ModelDomain(_) | Error::NumericCorruption { .. }) => {
                return Err(e)
            }
            Err(e) => return Err(Error::NoConvergence { reason: e.to_string(), trace }),
        };
        let after = report.residual_after;
        trace.push(after);
        if !after.is_finite() {
            return Err(Error::NoConvergence { reason: "non-finite residual".into(), trace });
        }
        growth = if after > residual { growth + 1 } else { 0 };
        if growth >= 3 {
            return Err(Error::NoConvergence { reason: "residual grew in 3 consecutive steps".into(), trace });
        }
        residual = after;
        reports.push(report);
        current = next;
        if opts.auto_refine && current.k.tail_fraction() > opts.tail_tol {
            let n = current.grid().dims().iter().product::<usize>();
            if n * 2 > opts.max_grid {
                return Err(Error::NoConvergence {
                    reason: format!("spectral tail above {:e} at the largest grid", opts.tail_tol),
                    trace,
                });
            }
            let dims: Vec<usize> = current.grid().dims().iter().map(|&d| d * 2).collect();
            current = current.resampled(&Grid::new(&dims)?)?;
            residual = invariance_residual(&current, model)?.sup_norm();
        }
    }
    if opts.use_counterterm {
        let lam = current.lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
        if lam > opts.lambda_tol {
            return Err(Error::CountertermNonvanishing { lambda: lam, tol: opts.lambda_tol });
        }
    }
    Ok((current, reports))
}

/// One accepted value of a continuation run.
#[derive(Clone, Debug)]
pub struct ContinuationStep {
    pub epsilon: f64,
    pub torus: TorusEmbedding,
    pub reports: Vec<NewtonReport>,
}

/// Follows a family `model.with_epsilon(eps)` along `schedule`, warm-starting
/// each solve from the previous torus. A failed target is approached through
/// halved sub-steps (not emitted) down to `min_step`.
pub fn continuation(
    model: &SymplecticMapModel,
    start: &TorusEmbedding,
    schedule: &[f64],
    opts: &TorusOptions,
    min_step: f64,
) -> Result<Vec<ContinuationStep>> {
    if schedule.is_empty() {
        return Ok(Vec::new());
    }
    let up = schedule.windows(2).all(|w| w[1] > w[0]);
    let down = schedule.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::Parameter("continuation schedule must be strictly monotone".into()));
    }
    let mut out = Vec::new();
    let (first, reports) = newton_solve(start, &model.with_epsilon(schedule[0]), opts).map_err(|e| match e {
        Error::NoConvergence { .. } => Error::ContinuationStall { last_good: f64::NAN, attempted: schedule[0] },
        other => other,
    })?;
    let mut good = (schedule[0], first.clone());
    out.push(ContinuationStep { epsilon: schedule[0], torus: first, reports });

    for &target in &schedule[1..] {
        let mut reached = None;
        let mut h = target - good.0;
        while reached.is_none() {
            let eps = if (good.0 + h - target).abs() < 1e-15 { target } else { good.0 + h };
            match newton_solve(&good.1, &model.with_epsilon(eps), opts) {
                Ok((t, r)) => {
                    good = (eps, t.clone());
                    if eps == target {
                        reached = Some((t, r));
                    } else {
                        h = target - eps;
                    }
                }
                Err(Error::NoConvergence { .. })
                | Err(Error::TwistDegeneracy { .. })
                | Err(Error::DegenerateEmbedding { .. })
                | Err(Error::Winding { .. })
                | Err(Error::ModelDomain(_))
                | Err(Error::Obstruction { .. })
                | Err(Error::SmallDivisor { .. })
                | Err(Error::CountertermNonvanishing { .. }) => {
                    h /= 2.0;
                    if h.abs() < min_step {
                        return Err(Error::ContinuationStall { last_good: good.0, attempted: eps });
                    }
                }
                Err(e) => return Err(e),
            }
        }
        let (t, r) = reached.unwrap();
        out.push(ContinuationStep { epsilon: target, torus: t, reports: r });
    }
    Ok(out)
}
