use super::{ft_compose_map, Branch, FourierTaylorSeries, WhiskerMultiplier};
use crate::error::{Error, Result};
use crate::fourier::{solve_cohomology_constant, CohomologyOptions, FourierSeries};
use crate::geometry::SymplecticMapModel;
use crate::noncst::{solve_doubling_contractive, solve_doubling_expansive, DoublingOptions, Regime, TwoSidedEquation};
use crate::splitting::InvariantSplitting;
use crate::torus::TorusEmbedding;

/// First-order data of a whisker: `DF(K) W_1 = mu W_1 o T_omega`.
#[derive(Clone, Debug)]
pub struct BundleSolution {
    pub w1: FourierSeries,
    pub mu: WhiskerMultiplier,
    /// `sup |DF(K) W_1 - mu W_1 o T_omega|`.
    pub residual: f64,
}

/// Finds the constant multiplier of a rank-1 invariant bundle and a section
/// `W_1` of it with `sup |W_1| = rho`. The section is `v e^psi` where `v` is
/// a column of the bundle projection and `psi` removes the oscillating part
/// of `log |c|`, `DF v = c (v o T_omega)`.
pub fn solve_bundle_and_multiplier(
    torus: &TorusEmbedding,
    split: &InvariantSplitting,
    branch: Branch,
    model: &SymplecticMapModel,
    rho: f64,
    opts: &CohomologyOptions,
) -> Result<BundleSolution> {
    let rank = match branch {
        Branch::Stable => split.stable_rank(),
        Branch::Unstable => split.unstable_rank().unwrap_or(0),
    };
    if rank != 1 || model.d() != torus.l() + 1 {
        return Err(Error::UnsupportedRank { rank });
    }
    let pi = branch.projection(split)?;
    let omega = &torus.omega.omega;
    let dim = pi.rows();

    // the column with the largest minimum over the grid
    let col_min = |c: usize| {
        let col = pi.column(c);
        (0..col.grid().len())
            .map(|j| col.point(j).iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min)
    };
    let best = (0..dim).max_by(|&a, &b| col_min(a).total_cmp(&col_min(b))).expect("nonempty");
    let v = pi.column(best);

    let k = torus.lift().grid_values(&vec![0.0; torus.l()]);
    let df = model.jac_series(&k);
    let dfv = df.matmul(&v);
    let v_next = v.rotate(omega).to_grid()?;
    let c = FourierSeries::vstack(&[&dfv, &v_next]).map_points(1, 1, |p, o| {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..dim {
            num += p[dim + i] * p[i];
            den += p[dim + i] * p[dim + i];
        }
        o[0] = num / den;
    });
    let cv = c.values();
    let sign = if cv.iter().all(|&x| x > 0.0) {
        1.0
    } else if cv.iter().all(|&x| x < 0.0) {
        -1.0
    } else {
        return Err(Error::SignChange);
    };
    let smallest = cv.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if smallest < 1e-12 {
        return Err(Error::LogDomain { value: smallest });
    }
    let log_c = c.map_points(1, 1, |x, o| o[0] = x[0].abs().ln());
    let m = log_c.average()[0];
    let mu = WhiskerMultiplier::new(sign * m.exp())?;

    // psi - psi o T = m - log|c|
    let psi = solve_cohomology_constant(&log_c.zero_average().neg(), omega, opts)?.phi.to_grid()?;
    let w1 = v.mul_scalar_field(&psi.map_points(1, 1, |x, o| o[0] = x[0].exp()));
    let w1 = w1.scale(rho / w1.sup_operator_norm());
    let residual = df.matmul(&w1).sub(&w1.rotate(omega).scale(mu.mu)).sup_norm();
    Ok(BundleSolution { w1, mu, residual })
}

/// Solves the invariance equation order by order for a fixed torus: order
/// `n >= 2` satisfies `DF(K) W_n - mu^n W_n o T_omega = -P_n` where `P_n` is
/// the order-`n` part of `F(W)` with `W_n = 0`. Each order is a two-sided
/// equation summed by doubling.
pub fn order_by_order(
    torus: &TorusEmbedding,
    w1: &FourierSeries,
    mu: f64,
    model: &SymplecticMapModel,
    max_order: usize,
    s_max: f64,
) -> Result<FourierTaylorSeries> {
    let mu = WhiskerMultiplier::new(mu)?.mu;
    let mut w = FourierTaylorSeries::from_torus(torus, w1, s_max);
    let grid = torus.grid().clone();
    let omega = torus.omega.omega.clone();
    let dim = w.dim();
    let k = torus.lift().grid_values(&vec![0.0; torus.l()]);
    let df = model.jac_series(&k);
    let df_inv = model.jac_inv_series(&k);
    let opts = DoublingOptions { max_doublings: 12, ..DoublingOptions::default() };
    for n in 2..=max_order {
        let mu_n = mu.powi(n as i32);
        let margin = [1.0, mu.abs(), 1.0 / mu.abs()]
            .iter()
            .map(|c| (c - mu_n.abs()).abs())
            .fold(f64::INFINITY, f64::min);
        if margin < 1e-6 {
            return Err(Error::Resonance { order: n, margin });
        }
        let padded = w.with_len(n + 1);
        let p = ft_compose_map(model, &padded)?.orders[n].clone();
        let b = FourierSeries::constant(&grid, 1, 1, &[mu_n]);
        let eq = TwoSidedEquation::new(df.clone(), b, p.neg(), &omega, Regime::Contractive);
        let sol = if mu.abs() < 1.0 {
            solve_doubling_contractive(&eq.with_a_inv(df_inv.clone()), &opts)?
        } else {
            let eq = TwoSidedEquation { regime: Regime::Expansive, ..eq };
            let b_inv = FourierSeries::constant(&grid, 1, 1, &[1.0 / mu_n]);
            solve_doubling_expansive(&eq.with_b_inv(b_inv), &opts)?
        };
        debug_assert_eq!(sol.delta.rows(), dim);
        let mut orders = padded.orders;
        orders[n] = sol.delta.to_grid()?;
        w.orders = orders;
    }
    Ok(w)
}

/// A scale for `W_1` at which the first two orders contribute comparably on
/// `|s| <= 1`: `rho0^2 / sup |W_2|` with `W_2` computed for `sup |W_1| = rho0`.
pub fn balanced_rho(
    torus: &TorusEmbedding,
    w1: &FourierSeries,
    mu: f64,
    model: &SymplecticMapModel,
    rho0: f64,
) -> Result<f64> {
    let w1 = w1.scale(rho0 / w1.sup_operator_norm());
    let w = order_by_order(torus, &w1, mu, model, 2, 1.0)?;
    let w2 = w.orders[2].sup_norm();
    if w2 < 1e-14 * rho0 * rho0 {
        return Ok(rho0);
    }
    Ok(rho0 * rho0 / w2)
}
