use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::frame::WhiskerFrame;
use super::taylor::FtMatrix;
use super::{normalize_whisker, residual_with_counterterm, whisker_residual, FourierTaylorSeries, Whisker};
use crate::error::{Error, Result};
use crate::fourier::{solve_cohomology_constant, solve_cohomology_scaled, CohomologyOptions, FourierSeries};
use crate::geometry::SymplecticMapModel;

#[derive(Clone, Debug)]
pub struct WhiskerOptions {
    /// Target for the residual bound `sum_n sup |E_n| s_max^n`.
    pub tol: f64,
    pub max_iter: usize,
    pub lambda_tol: f64,
    pub twist_floor: f64,
    /// Floor for the order-1 solvability denominator.
    pub pairing_floor: f64,
    /// Floor for `| |c| - |mu|^n |` in the diagonal equations.
    pub resonance_floor: f64,
    /// Largest residual order below `L` accepted by the order-doubling step.
    pub contract_tol: f64,
    pub cohomology: CohomologyOptions,
}

impl Default for WhiskerOptions {
    fn default() -> Self {
        WhiskerOptions {
            tol: 1e-11,
            max_iter: 20,
            lambda_tol: 1e-10,
            twist_floor: 1e-8,
            pairing_floor: 1e-10,
            resonance_floor: 1e-6,
            contract_tol: 1e-9,
            cohomology: CohomologyOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FullNewtonReport {
    pub residual_before: f64,
    pub residual_after: f64,
    pub delta_lambda: Vec<f64>,
    pub delta_mu: f64,
    pub mu_after: f64,
    pub lambda_after: f64,
    /// `|avg A^0|`.
    pub twist: f64,
    /// Order-1 solvability denominator.
    pub pairing: f64,
    pub divisor_margin: f64,
    pub condition: f64,
    pub structure_defect: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WhiskerStepReport {
    /// Lowest nonvanishing residual order on input.
    pub order_in: usize,
    /// Orders below this vanish after the step.
    pub order_out: usize,
    pub residual_orders_before: Vec<f64>,
    pub residual_orders_after: Vec<f64>,
    pub divisor_margin: f64,
    pub condition: f64,
    pub seconds: f64,
}

// solvers for the scalar rows of the reduced equation
struct Rows<'a> {
    frame: &'a WhiskerFrame,
    omega: &'a [f64],
    opts: &'a WhiskerOptions,
    margin: f64,
    a0: FourierSeries,
    u0: FourierSeries,
    x0: FourierSeries,
    b0: FourierSeries,
}

impl<'a> Rows<'a> {
    fn new(frame: &'a WhiskerFrame, omega: &'a [f64], opts: &'a WhiskerOptions) -> Self {
        Rows {
            frame,
            omega,
            opts,
            margin: f64::INFINITY,
            a0: frame.a().orders[0].clone(),
            u0: frame.u().orders[0].clone(),
            x0: frame.x().orders[0].clone(),
            b0: frame.b().orders[0].clone(),
        }
    }

    fn l(&self) -> usize {
        self.frame.l
    }

    fn alpha(&self, v: &FourierSeries) -> FourierSeries {
        v.rows_range(0, self.l())
    }

    fn gamma(&self, v: &FourierSeries) -> FourierSeries {
        v.rows_range(self.l(), self.l())
    }

    fn beta(&self, v: &FourierSeries) -> FourierSeries {
        v.rows_range(2 * self.l(), 1)
    }

    fn eta(&self, v: &FourierSeries) -> FourierSeries {
        v.rows_range(2 * self.l() + 1, 1)
    }

    fn assemble(&self, a: &FourierSeries, g: &FourierSeries, b: &FourierSeries, e: &FourierSeries) -> FourierSeries {
        FourierSeries::vstack(&[a, g, b, e]).to_grid().expect("finite solution")
    }

    /// `(c - mu^n T_omega) V = rhs` without obstruction.
    fn diag(&mut self, rhs: &FourierSeries, c: f64, n: usize) -> Result<FourierSeries> {
        let mu_n = self.frame.mu.powi(n as i32);
        let margin = (c.abs() - mu_n.abs()).abs();
        self.margin = self.margin.min(margin);
        if margin < self.opts.resonance_floor {
            return Err(Error::Resonance { order: n, margin });
        }
        let sol = solve_cohomology_scaled(&rhs.scale(1.0 / mu_n), self.omega, c / mu_n, 0.0)?;
        Ok(sol.phi.to_grid()?)
    }

    /// `c (V - T_omega V) = rhs` with the average of `rhs` already removed
    /// up to round-off; returns the zero-average solution.
    fn unit(&self, rhs: &FourierSeries, c: f64) -> Result<FourierSeries> {
        let eta = rhs.scale(1.0 / c).zero_average();
        Ok(solve_cohomology_constant(&eta, self.omega, &self.opts.cohomology)?.phi.to_grid()?)
    }

    /// All rows at an order `n` where no diagonal coefficient equals `mu^n`.
    fn regular(&mut self, rhs: &FourierSeries, n: usize) -> Result<FourierSeries> {
        let mu = self.frame.mu;
        let vg = self.diag(&self.gamma(rhs), 1.0, n)?;
        let ve = self.diag(&self.eta(rhs), 1.0 / mu, n)?;
        let ra = self.alpha(rhs).sub(&self.a0.matmul(&vg)).sub(&self.u0.matmul(&ve));
        let va = self.diag(&ra, 1.0, n)?;
        let rb = self.beta(rhs).sub(&self.x0.matmul(&vg)).sub(&self.b0.matmul(&ve));
        let vb = self.diag(&rb, mu, n)?;
        Ok(self.assemble(&va, &vg, &vb, &ve))
    }
}

// sum_{k < n} R^{n-k} V^k
fn known_coupling(r: &FtMatrix, v: &[FourierSeries], n: usize) -> Option<FourierSeries> {
    let mut acc: Option<FourierSeries> = None;
    for (k, vk) in v.iter().enumerate().take(n) {
        if vk.sup_norm() == 0.0 {
            continue;
        }
        let term = r.orders[n - k].matmul(vk);
        acc = Some(match acc {
            Some(a) => a.add(&term),
            None => term,
        });
    }
    acc
}

fn residual_fts(e: &FourierTaylorSeries) -> FtMatrix {
    FtMatrix::new(e.orders.clone())
}

fn apply_frame(w: &FourierTaylorSeries, frame: &WhiskerFrame, v: &[FourierSeries]) -> FourierTaylorSeries {
    let dw = frame.frame().mul(&FtMatrix::new(v.to_vec()));
    let mut out = w.clone();
    for (o, d) in out.orders.iter_mut().zip(&dw.orders) {
        *o = o.add(d).to_grid().expect("finite correction");
    }
    out
}

/// One step of the simultaneous Newton method for the torus, its whisker,
/// the multiplier and the counterterm. The increments are solved order by
/// order in the frame of [`WhiskerFrame`]: the counterterm absorbs the
/// order-0 center obstruction and the multiplier correction the order-1
/// obstruction of the `beta` row.
pub fn newton_full_step(
    whisker: &Whisker,
    model: &SymplecticMapModel,
    opts: &WhiskerOptions,
) -> Result<(Whisker, FullNewtonReport)> {
    let start = Instant::now();
    let w = &whisker.w;
    let mu = whisker.mu.mu;
    let len = w.orders.len();
    let l = w.winding.l();
    let omega = w.omega.omega.clone();
    let e = residual_with_counterterm(w, mu, Some((&whisker.lambda, whisker.k0.as_ref())), model)?;
    let before = e.domain_norm();

    let frame = WhiskerFrame::build(w, mu, model)?;
    let mut torus = w.torus();
    torus.k0 = whisker.k0.clone();
    let g = FtMatrix::constant_in_s(torus.counterterm_field(model), len);
    let et = frame.transform(&residual_fts(&e));
    let c = frame.transform(&g);
    let h = frame.transform(&frame.beta_next);
    let mut rows = Rows::new(&frame, &omega, opts);

    // order 0: counterterm from the gamma rows, then the twist fixes avg V_gamma
    let rhs0 = et.orders[0].neg();
    let cg = rows.gamma(&c.orders[0]);
    let avg_c = DMatrix::from_row_slice(l, l, &cg.average());
    let avg_e = DVector::from_row_slice(&rows.gamma(&et.orders[0]).average());
    let dlambda: Vec<f64> = avg_c
        .lu()
        .solve(&avg_e)
        .ok_or(Error::TwistDegeneracy { twist: 0.0 })?
        .as_slice()
        .to_vec();
    let lam = FourierSeries::constant(w.grid(), l, 1, &dlambda);
    let rhs0 = rhs0.add(&c.orders[0].matmul(&lam));
    let vg_osc = rows.unit(&rows.gamma(&rhs0), 1.0)?;
    let ve0 = rows.diag(&rows.eta(&rhs0), 1.0 / mu, 0)?;
    let ra = rows.alpha(&rhs0).sub(&rows.a0.matmul(&vg_osc)).sub(&rows.u0.matmul(&ve0));
    let avg_a = DMatrix::from_row_slice(l, l, &rows.a0.average());
    let twist = if l == 1 { avg_a[(0, 0)].abs() } else { avg_a.determinant().abs() };
    if twist < opts.twist_floor {
        return Err(Error::TwistDegeneracy { twist });
    }
    let vbar = avg_a.lu().solve(&DVector::from_row_slice(&ra.average())).ok_or(Error::TwistDegeneracy { twist })?;
    let vg0 = vg_osc.add_constant(vbar.as_slice());
    let ra = rows.alpha(&rhs0).sub(&rows.a0.matmul(&vg0)).sub(&rows.u0.matmul(&ve0));
    let va0 = rows.unit(&ra, 1.0)?;
    let rb = rows.beta(&rhs0).sub(&rows.x0.matmul(&vg0)).sub(&rows.b0.matmul(&ve0));
    let vb0 = rows.diag(&rb, mu, 0)?;
    let mut v = vec![rows.assemble(&va0, &vg0, &vb0, &ve0)];

    // order 1: V = G + delta_mu F, delta_mu from the average of the beta row
    let mut delta_mu = 0.0;
    let mut pairing = f64::NAN;
    if len > 1 {
        let mut gpart = et.orders[1].neg().add(&c.orders[1].matmul(&lam));
        if let Some(k) = known_coupling(&frame.r, &v, 1) {
            gpart = gpart.sub(&k);
        }
        let hpart = h.orders[0].clone();
        let gg = rows.diag(&rows.gamma(&gpart), 1.0, 1)?;
        let fg = rows.diag(&rows.gamma(&hpart), 1.0, 1)?;
        let ge = rows.diag(&rows.eta(&gpart), 1.0 / mu, 1)?;
        let fe = rows.diag(&rows.eta(&hpart), 1.0 / mu, 1)?;
        let rb_g = rows.beta(&gpart).sub(&rows.x0.matmul(&gg)).sub(&rows.b0.matmul(&ge));
        let rb_f = rows.beta(&hpart).sub(&rows.x0.matmul(&fg)).sub(&rows.b0.matmul(&fe));
        pairing = rb_f.average()[0];
        if pairing.abs() < opts.pairing_floor {
            return Err(Error::DegeneratePairing { denominator: pairing });
        }
        delta_mu = -rb_g.average()[0] / pairing;
        let vg1 = gg.axpy(delta_mu, &fg);
        let ve1 = ge.axpy(delta_mu, &fe);
        let vb1 = rows.unit(&rb_g.axpy(delta_mu, &rb_f), mu)?;
        let rhs1 = gpart.axpy(delta_mu, &hpart);
        let ra = rows.alpha(&rhs1).sub(&rows.a0.matmul(&vg1)).sub(&rows.u0.matmul(&ve1));
        let va1 = rows.diag(&ra, 1.0, 1)?;
        v.push(rows.assemble(&va1, &vg1, &vb1, &ve1));
    }

    for n in 2..len {
        let mut rhs = et.orders[n].neg().add(&c.orders[n].matmul(&lam)).axpy(delta_mu, &h.orders[n - 1]);
        if let Some(k) = known_coupling(&frame.r, &v, n) {
            rhs = rhs.sub(&k);
        }
        v.push(rows.regular(&rhs, n)?);
    }

    let w_new = apply_frame(w, &frame, &v);
    let (w_new, _) = normalize_whisker(&w_new, whisker.rho);
    let mut next = whisker.clone();
    next.w = w_new;
    next.mu = super::WhiskerMultiplier::new(mu + delta_mu)?;
    for (a, d) in next.lambda.iter_mut().zip(&dlambda) {
        *a += d;
    }
    for o in &next.w.orders {
        o.check_finite("whisker update")?;
    }
    let after = residual_with_counterterm(&next.w, next.mu.mu, Some((&next.lambda, next.k0.as_ref())), model)?
        .domain_norm();
    let report = FullNewtonReport {
        residual_before: before,
        residual_after: after,
        delta_lambda: dlambda,
        delta_mu,
        mu_after: next.mu.mu,
        lambda_after: next.lambda.iter().map(|x| x * x).sum::<f64>().sqrt(),
        twist,
        pairing,
        divisor_margin: rows.margin,
        condition: frame.condition,
        structure_defect: frame.structure_defect,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((next, report))
}

/// Iterates [`newton_full_step`] until the residual bound is below
/// `opts.tol`; the counterterm must then vanish to `opts.lambda_tol`.
/// The first iterate's torus is frozen as the counterterm reference.
pub fn newton_full_solve(
    guess: &Whisker,
    model: &SymplecticMapModel,
    opts: &WhiskerOptions,
) -> Result<(Whisker, Vec<FullNewtonReport>)> {
    let mut whisker = guess.clone();
    if whisker.k0.is_none() {
        whisker.k0 = Some(whisker.w.orders[0].clone());
    }
    let mut residual =
        residual_with_counterterm(&whisker.w, whisker.mu.mu, Some((&whisker.lambda, whisker.k0.as_ref())), model)?
            .domain_norm();
    let mut trace = vec![residual];
    let mut reports = Vec::new();
    let mut growth = 0;
    while residual > opts.tol {
        if reports.len() >= opts.max_iter {
            return Err(Error::NoConvergence { reason: format!("{} steps exhausted", opts.max_iter), trace });
        }
        let (next, rep) = match newton_full_step(&whisker, model, opts) {
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
        whisker = next;
    }
    let lam = whisker.lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
    if lam > opts.lambda_tol {
        return Err(Error::CountertermNonvanishing { lambda: lam, tol: opts.lambda_tol });
    }
    Ok((whisker, reports))
}

/// One order-doubling step for a whisker of a fixed torus: if the residual
/// vanishes below order `l`, solves the reduced equation for orders
/// `l .. 2l - 1` and returns `W + M V` with `2l` orders, whose residual
/// vanishes below order `2l`.
pub fn newton_whisker_step(
    w: &FourierTaylorSeries,
    mu: f64,
    model: &SymplecticMapModel,
    l: usize,
    opts: &WhiskerOptions,
) -> Result<(FourierTaylorSeries, WhiskerStepReport)> {
    let start = Instant::now();
    if l < 2 {
        return Err(Error::Parameter(format!("order-doubling starts at order 2 or later, got {l}")));
    }
    let wp = w.with_len(2 * l);
    let e = whisker_residual(&wp, mu, model)?;
    let before = e.order_norms();
    for (n, &size) in before.iter().enumerate().take(l) {
        if size > opts.contract_tol {
            return Err(Error::OrderContract { order: n, size });
        }
    }
    let frame = WhiskerFrame::build(&wp, mu, model)?;
    let et = frame.transform(&residual_fts(&e.at_least(l)));
    let omega = wp.omega.omega.clone();
    let mut rows = Rows::new(&frame, &omega, opts);
    let zero = FourierSeries::zeros(wp.grid(), wp.dim(), 1);
    let mut v = vec![zero; l];
    for n in l..2 * l {
        let mut rhs = et.orders[n].neg();
        if let Some(k) = known_coupling(&frame.r, &v, n) {
            rhs = rhs.sub(&k);
        }
        v.push(rows.regular(&rhs, n)?);
    }
    let out = apply_frame(&wp, &frame, &v);
    let after = whisker_residual(&out, mu, model)?.order_norms();
    let report = WhiskerStepReport {
        order_in: l,
        order_out: 2 * l,
        residual_orders_before: before,
        residual_orders_after: after,
        divisor_margin: rows.margin,
        condition: frame.condition,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((out, report))
}
