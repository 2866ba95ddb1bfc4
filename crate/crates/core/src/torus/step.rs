use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::frame::{build_frame, twist_magnitude, ReducibilityFrame};
use super::{invariance_residual, TorusEmbedding, TorusOptions};
use crate::error::{Error, Result};
use crate::fourier::{solve_cohomology_constant, FourierSeries};
use crate::geometry::SymplecticMapModel;

/// Diagnostics of one Newton step.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    pub residual_before: f64,
    pub residual_after: f64,
    /// `|lambda|` after the step.
    pub lambda_after: f64,
    /// `sup |N|` (Frobenius).
    pub n_norm: f64,
    /// `sup |(M+^T J M+)^{-1} M+^T J|` (Frobenius), a proxy for `|M^{-1}|`.
    pub m_inv_norm: f64,
    /// Smallest singular value of `avg(A)`.
    pub twist: f64,
    /// Smallest divisor met by the cohomology solves.
    pub divisor_margin: f64,
    pub tail_fraction: f64,
    pub grid_points: usize,
    pub seconds: f64,
}

/// Output of the center-direction solve for a given right-hand side.
#[derive(Clone, Debug)]
pub struct CenterCorrection {
    /// `Delta = M W`.
    pub delta: FourierSeries,
    /// Counterterm increment (zero without counterterm).
    pub dlambda: Vec<f64>,
    pub w: FourierSeries,
    pub twist: f64,
    pub divisor_margin: f64,
}

fn avg_matrix(f: &FourierSeries) -> DMatrix<f64> {
    DMatrix::from_row_slice(f.rows(), f.cols(), &f.average())
}

fn avg_vector(f: &FourierSeries) -> DVector<f64> {
    DVector::from_vec(f.average())
}

fn solve_small(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    m.clone().lu().solve(rhs)
}

/// Solves `(DF o K) Delta - Delta o T_omega - G delta = -e` in the range of
/// the frame.
pub fn center_correction(
    torus: &TorusEmbedding,
    frame: &ReducibilityFrame,
    e: &FourierSeries,
    opts: &TorusOptions,
) -> Result<CenterCorrection> {
    let l = frame.l();
    let grid = torus.grid();
    let omega = &torus.omega.omega;
    let coh = &opts.cohomology;

    let e_t = frame.p.matmul(e);
    let e1 = e_t.rows_range(0, l);
    let e2 = e_t.rows_range(l, l);
    let avg_a = avg_matrix(&frame.a);
    let twist = twist_magnitude(&avg_a);
    let mut margin = f64::INFINITY;

    let (w2, dl, b1) = if opts.use_counterterm {
        let b1 = frame.b1().expect("frame built without counterterm");
        let b2 = frame.b2().expect("frame built without counterterm");
        let avg_b2 = avg_matrix(&b2);
        let dl = solve_small(&avg_b2, &avg_vector(&e2)).ok_or_else(|| Error::TwistDegeneracy {
            twist: twist_magnitude(&avg_b2),
        })?;
        let dl_s = FourierSeries::constant(grid, l, 1, dl.as_slice());
        let rhs2 = e2.neg().add(&b2.matmul(&dl_s)).zero_average();
        let sol = solve_cohomology_constant(&rhs2, omega, coh)?;
        margin = margin.min(sol.min_divisor);
        (sol.phi, dl, Some(b1))
    } else {
        let avg2 = e2.average();
        let sup2 = e2.sup_norm();
        if avg2.iter().any(|a| a.abs() > 0.5 * sup2 && a.abs() > coh.zero_average_tol) {
            return Err(Error::Obstruction { average: avg2 });
        }
        let sol = solve_cohomology_constant(&e2.neg().zero_average(), omega, coh)?;
        margin = margin.min(sol.min_divisor);
        (sol.phi, DVector::zeros(l), None)
    };

    if twist < opts.twist_floor {
        return Err(Error::TwistDegeneracy { twist });
    }
    let aw2 = frame.a.matmul(&w2);
    let mut rhs_bar = -avg_vector(&e1) - avg_vector(&aw2);
    if let Some(b1) = &b1 {
        rhs_bar += avg_matrix(b1) * &dl;
    }
    let w2_bar = solve_small(&avg_a, &rhs_bar).ok_or(Error::TwistDegeneracy { twist })?;
    let w2_full = w2.add_constant(w2_bar.as_slice());

    let mut rhs1 = e1.neg().sub(&frame.a.matmul(&w2_full));
    if let Some(b1) = &b1 {
        rhs1 = rhs1.add(&b1.matmul(&FourierSeries::constant(grid, l, 1, dl.as_slice())));
    }
    let sol1 = solve_cohomology_constant(&rhs1.zero_average(), omega, coh)?;
    margin = margin.min(sol1.min_divisor);

    let w = FourierSeries::vstack(&[&sol1.phi, &w2_full]);
    let delta = frame.m.matmul(&w);
    Ok(CenterCorrection { delta, dlambda: dl.as_slice().to_vec(), w, twist, divisor_margin: margin })
}

/// One Newton step in the center direction for a Lagrangian torus, where the
/// center space is the whole phase space.
pub fn newton_center_step(
    torus: &TorusEmbedding,
    model: &SymplecticMapModel,
    opts: &TorusOptions,
) -> Result<(TorusEmbedding, NewtonReport)> {
    let start = Instant::now();
    let e = invariance_residual(torus, model)?;
    let before = e.sup_norm();
    let frame = build_frame(torus, model, opts.frame_inverse, opts.use_counterterm)?;
    let corr = center_correction(torus, &frame, &e, opts)?;
    let mut next = torus.clone();
    next.k = torus.k.add(&corr.delta);
    for (lam, d) in next.lambda.iter_mut().zip(&corr.dlambda) {
        *lam += d;
    }
    let next = next.normalized();
    next.k.check_finite("corrected embedding")?;
    let after = invariance_residual(&next, model)?.sup_norm();
    let report = NewtonReport {
        residual_before: before,
        residual_after: after,
        lambda_after: next.lambda.iter().map(|x| x * x).sum::<f64>().sqrt(),
        n_norm: frame.n.sup_frobenius(),
        m_inv_norm: frame.p.sup_frobenius(),
        twist: corr.twist,
        divisor_margin: corr.divisor_margin,
        tail_fraction: next.k.tail_fraction(),
        grid_points: torus.grid().len(),
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((next, report))
}
