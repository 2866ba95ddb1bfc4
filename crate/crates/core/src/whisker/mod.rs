//! Rank-1 whiskers `W(theta, s) = sum_n W_n(theta) s^n` of invariant tori,
//! solving `F(W(theta, s)) = W(theta + omega, mu s)`.

mod frame;
mod io;
mod newton;
mod order;
mod taylor;

pub use frame::WhiskerFrame;
pub use io::{read_ftt, write_ftt, FttHeader, FTT_MAGIC};
pub use newton::{
    newton_full_solve, newton_full_step, newton_whisker_step, FullNewtonReport, WhiskerOptions, WhiskerStepReport,
};
pub use order::{balanced_rho, order_by_order, solve_bundle_and_multiplier, BundleSolution};
pub use taylor::Jet;

use crate::error::{Error, Result};
use crate::fourier::{FourierSeries, Grid, RotationVector};
use crate::geometry::{lift_normalize, SymplecticMapModel, WindingMatrix};
use crate::splitting::InvariantSplitting;
use crate::torus::{invariance_residual, TorusEmbedding};
use taylor::{jet_map, FtMatrix};

/// Which whisker of the torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Stable,
    Unstable,
}

impl Branch {
    pub fn name(&self) -> &'static str {
        match self {
            Branch::Stable => "stable",
            Branch::Unstable => "unstable",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "stable" => Ok(Branch::Stable),
            "unstable" => Ok(Branch::Unstable),
            other => Err(Error::Parameter(format!("unknown branch '{other}' (stable|unstable)"))),
        }
    }

    /// The projection onto this branch's bundle.
    pub fn projection<'a>(&self, split: &'a InvariantSplitting) -> Result<&'a FourierSeries> {
        match self {
            Branch::Stable => Ok(&split.pi_s),
            Branch::Unstable => split
                .pi_u
                .as_ref()
                .ok_or_else(|| Error::Shape("splitting has no unstable projection".into())),
        }
    }
}

/// The constant rate on the whisker.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WhiskerMultiplier {
    pub mu: f64,
}

impl WhiskerMultiplier {
    /// Rejects multipliers within `1e-6` of the unit circle.
    pub fn new(mu: f64) -> Result<Self> {
        if !mu.is_finite() || (mu.abs() - 1.0).abs() < 1e-6 {
            return Err(Error::UnitMultiplier { nu: mu });
        }
        Ok(WhiskerMultiplier { mu })
    }

    /// Contracting multipliers belong to stable whiskers.
    pub fn branch(&self) -> Branch {
        if self.mu.abs() < 1.0 {
            Branch::Stable
        } else {
            Branch::Unstable
        }
    }
}

/// State of the simultaneous torus-and-whisker solve.
#[derive(Clone, Debug)]
pub struct Whisker {
    pub w: FourierTaylorSeries,
    pub mu: WhiskerMultiplier,
    /// Counterterm of the torus equation; zero at a true solution.
    pub lambda: Vec<f64>,
    /// Normalization `sup |W_1| = rho`.
    pub rho: f64,
    /// Reference torus the counterterm field is built on.
    pub k0: Option<FourierSeries>,
}

impl Whisker {
    pub fn new(w: FourierTaylorSeries, mu: WhiskerMultiplier, rho: f64) -> Self {
        let l = w.winding.l();
        Whisker { w, mu, lambda: vec![0.0; l], rho, k0: None }
    }
}

/// `W(theta, s) = sum_{n <= L} W_n(theta) s^n`. Order 0 is the periodic part
/// of a torus embedding: the true `W(theta, 0)` adds `I theta` in the angle
/// slots, exactly as for [`TorusEmbedding`].
#[derive(Clone, Debug)]
pub struct FourierTaylorSeries {
    pub orders: Vec<FourierSeries>,
    /// Radius of the parameter interval the expansion is trusted on.
    pub s_max: f64,
    pub winding: WindingMatrix,
    pub angle_slots: Vec<usize>,
    pub omega: RotationVector,
}

impl FourierTaylorSeries {
    /// `W = K + s W_1`.
    pub fn from_torus(torus: &TorusEmbedding, w1: &FourierSeries, s_max: f64) -> Self {
        FourierTaylorSeries {
            orders: vec![torus.k.clone(), w1.clone()],
            s_max,
            winding: torus.winding.clone(),
            angle_slots: torus.angle_slots.clone(),
            omega: torus.omega.clone(),
        }
    }

    /// A residual-type series: no secular part.
    fn field(orders: Vec<FourierSeries>, like: &Self) -> Self {
        FourierTaylorSeries {
            orders,
            s_max: like.s_max,
            winding: WindingMatrix::zero(like.winding.l()),
            angle_slots: like.angle_slots.clone(),
            omega: like.omega.clone(),
        }
    }

    /// Truncation order `L`.
    pub fn order(&self) -> usize {
        self.orders.len() - 1
    }

    pub fn grid(&self) -> &Grid {
        self.orders[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.orders[0].rows()
    }

    /// The torus `W(., 0)` without counterterm.
    pub fn torus(&self) -> TorusEmbedding {
        let mut t = TorusEmbedding::new(
            self.orders[0].clone(),
            self.winding.clone(),
            self.omega.clone(),
            self.angle_slots.clone(),
        )
        .expect("whisker and torus shapes agree");
        t.k0 = None;
        t
    }

    /// Zero-padded or truncated to `len` orders.
    pub fn with_len(&self, len: usize) -> Self {
        let mut out = self.clone();
        let z = FourierSeries::zeros(self.grid(), self.dim(), 1);
        out.orders.resize(len, z);
        out
    }

    /// `G^{[<L]}`: the orders below `l`.
    pub fn below(&self, l: usize) -> Self {
        let mut out = self.clone();
        out.orders.truncate(l.max(1));
        if l == 0 {
            out.orders[0] = FourierSeries::zeros(self.grid(), self.dim(), 1);
        }
        out
    }

    /// `G^{[>=L]}`: the orders from `l` on, with zeros below.
    pub fn at_least(&self, l: usize) -> Self {
        let mut out = self.clone();
        let z = FourierSeries::zeros(self.grid(), self.dim(), 1);
        for (n, w) in out.orders.iter_mut().enumerate() {
            if n < l {
                *w = z.clone();
            }
        }
        out.winding = WindingMatrix::zero(self.winding.l());
        out
    }

    /// Sum of two series of equal length; the winding is taken from `self`.
    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.orders = self.orders.iter().zip(&other.orders).map(|(a, b)| a.add(b)).collect();
        out
    }

    /// `W(theta, s)` at one point, by Horner summation.
    pub fn eval(&self, theta: &[f64], s: f64) -> Vec<f64> {
        let mut acc = self.orders[self.order()].eval_at(theta);
        for w in self.orders.iter().rev().skip(1) {
            let v = w.eval_at(theta);
            for (a, x) in acc.iter_mut().zip(v) {
                *a = *a * s + x;
            }
        }
        let it = self.winding.apply(theta);
        for (a, &slot) in self.angle_slots.iter().enumerate() {
            acc[slot] += it[a];
        }
        acc
    }

    /// `max_n sup_theta |W_n|`.
    pub fn sup_norm(&self) -> f64 {
        self.orders.iter().map(|w| w.sup_norm()).fold(0.0, f64::max)
    }

    /// `sum_n sup_theta |W_n| s_max^n`, a bound for `sup |W|` on the domain.
    pub fn domain_norm(&self) -> f64 {
        let mut r = 1.0;
        let mut acc = 0.0;
        for w in &self.orders {
            acc += w.sup_norm() * r;
            r *= self.s_max;
        }
        acc
    }

    /// `sup_theta |W_n|` for every order.
    pub fn order_norms(&self) -> Vec<f64> {
        self.orders.iter().map(|w| w.sup_norm()).collect()
    }

    /// Reparameterization `s -> b s`: `W_n <- b^n W_n`.
    pub fn rescaled(&self, b: f64) -> Self {
        let mut out = self.clone();
        let mut f = 1.0;
        for w in &mut out.orders {
            *w = w.scale(f);
            f *= b;
        }
        out
    }

    /// `W(theta + sigma, s)` re-expressed as a series with the same winding.
    pub fn translated(&self, sigma: &[f64]) -> Self {
        let mut out = self.clone();
        let t = self.torus().translated(sigma);
        out.orders[0] = t.k;
        for w in out.orders.iter_mut().skip(1) {
            *w = w.rotate(sigma).to_grid().expect("finite translate");
        }
        out
    }

    /// `D_theta W` as a matrix series, the winding included in order 0.
    pub(crate) fn d_theta(&self) -> FtMatrix {
        let mut orders: Vec<FourierSeries> = self.orders.iter().map(|w| w.jacobian()).collect();
        orders[0] = lift_normalize(&self.orders[0], &self.winding, &self.angle_slots).jacobian();
        FtMatrix::new(orders)
    }

    /// `d_s W`, with the same number of orders (the top one is zero).
    pub(crate) fn d_s(&self) -> FtMatrix {
        let z = FourierSeries::zeros(self.grid(), self.dim(), 1);
        let orders = (0..self.orders.len())
            .map(|n| match self.orders.get(n + 1) {
                Some(w) => w.scale((n + 1) as f64),
                None => z.clone(),
            })
            .collect();
        FtMatrix::new(orders)
    }

    fn lifted_inputs(&self) -> Vec<FourierSeries> {
        let lift = lift_normalize(&self.orders[0], &self.winding, &self.angle_slots);
        let mut inputs = self.orders.clone();
        inputs[0] = lift.grid_values(&vec![0.0; self.winding.l()]);
        inputs
    }
}

/// The Taylor jet of `F(W(theta, s))` through the order of `w`, obtained
/// by propagating jets through the map at every grid point. Order 0 is
/// returned as a periodic part with the winding of `w`.
pub fn ft_compose_map(model: &SymplecticMapModel, w: &FourierTaylorSeries) -> Result<FourierTaylorSeries> {
    let inputs = w.lifted_inputs();
    let mut out = jet_map(&inputs, w.dim(), |z| model.eval(z));
    for o in &out {
        o.check_finite("jet composition")
            .map_err(|_| Error::ModelDomain(format!("non-finite {} jet", model.name())))?;
    }
    out[0] = out[0].sub(&inputs[0]).add(&w.orders[0]);
    let mut res = w.clone();
    res.orders = out;
    Ok(res)
}

/// `DF(W(theta, s))` as a matrix series.
pub(crate) fn ft_jacobian(model: &SymplecticMapModel, w: &FourierTaylorSeries) -> FtMatrix {
    let d = model.d();
    let inputs = w.lifted_inputs();
    let len = inputs.len();
    let h = jet_map(&inputs, d * d, |z| model.hess_v_generic(&z[..d]));
    let grid = w.grid().clone();
    let orders = (0..len)
        .map(|n| {
            let hn = h[n].reshape(d, d);
            let id = if n == 0 { FourierSeries::identity(&grid, d) } else { FourierSeries::zeros(&grid, d, d) };
            let top = FourierSeries::hstack(&[&id.sub(&hn), &id]);
            let bottom = FourierSeries::hstack(&[&hn.neg(), &id]);
            FourierSeries::vstack(&[&top, &bottom])
        })
        .collect();
    FtMatrix::new(orders)
}

/// `E(theta, s) = F(W(theta, s)) - W(theta + omega, mu s)` through the order
/// of `w`: order `n` subtracts `mu^n W_n o T_omega`. Order 0 is the torus
/// invariance residual with its angle rows on the branch nearest zero.
pub fn whisker_residual(w: &FourierTaylorSeries, mu: f64, model: &SymplecticMapModel) -> Result<FourierTaylorSeries> {
    residual_with_counterterm(w, mu, None, model)
}

/// As [`whisker_residual`], with `- G lambda` in order 0 where `G` is the
/// counterterm field of the torus (built on `k0` when given).
pub(crate) fn residual_with_counterterm(
    w: &FourierTaylorSeries,
    mu: f64,
    counterterm: Option<(&[f64], Option<&FourierSeries>)>,
    model: &SymplecticMapModel,
) -> Result<FourierTaylorSeries> {
    let fw = ft_compose_map(model, w)?;
    let mut torus = w.torus();
    if let Some((lambda, k0)) = counterterm {
        torus.lambda = lambda.to_vec();
        torus.k0 = k0.cloned();
    }
    let mut orders = vec![invariance_residual(&torus, model)?];
    let mut f = mu;
    for n in 1..w.orders.len() {
        orders.push(fw.orders[n].sub(&w.orders[n].rotate(&w.omega.omega).scale(f)));
        f *= mu;
    }
    Ok(FourierTaylorSeries::field(orders, w))
}

/// `sup |F(W(theta, s)) - W(theta + omega, mu s)|` over an `n_theta x n_s`
/// sample with `theta` in `[0, 1)` and `|s| <= s_max`, summing the series
/// pointwise.
pub fn conjugacy_error(
    w: &FourierTaylorSeries,
    mu: f64,
    model: &SymplecticMapModel,
    s_max: f64,
    n_theta: usize,
    n_s: usize,
) -> f64 {
    let l = w.winding.l();
    let omega = &w.omega.omega;
    let mut worst: f64 = 0.0;
    for i in 0..n_theta {
        let theta: Vec<f64> = (0..l).map(|a| (i as f64 + 0.5 * a as f64) / n_theta as f64).collect();
        let next: Vec<f64> = theta.iter().zip(omega).map(|(t, o)| t + o).collect();
        for j in 0..n_s {
            let s = if n_s == 1 { s_max } else { -s_max + 2.0 * s_max * j as f64 / (n_s - 1) as f64 };
            let lhs = model.eval(&w.eval(&theta, s));
            let rhs = w.eval(&next, mu * s);
            for (a, b) in lhs.iter().zip(&rhs) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    worst
}

/// Halves `w.s_max` until the conjugacy error on a 20 x 20 sample is below
/// `tol`; fails after 30 halvings.
pub fn fit_domain(w: &FourierTaylorSeries, mu: f64, model: &SymplecticMapModel, tol: f64) -> Result<f64> {
    let mut s = w.s_max;
    for _ in 0..30 {
        if conjugacy_error(w, mu, model, s, 20, 20) <= tol {
            return Ok(s);
        }
        s *= 0.5;
    }
    Err(Error::NoConvergence { reason: format!("conjugacy error above {tol:e} on every domain tried"), trace: vec![] })
}

/// Applies the normalization conditions: the origin of the angles is chosen
/// as for tori, `W_1` stays in the bundle (the solvers never leave it), and
/// `sup_theta |W_1| = rho` through `W_n <- b^n W_n`. Returns the factor `b`.
pub fn normalize_whisker(w: &FourierTaylorSeries, rho: f64) -> (FourierTaylorSeries, f64) {
    let t = w.torus();
    let sigma = phase_shift(&t);
    let shifted = if sigma.iter().all(|&x| x == 0.0) { w.clone() } else { w.translated(&sigma) };
    let norm = if shifted.orders.len() > 1 { shifted.orders[1].sup_operator_norm() } else { 0.0 };
    if norm == 0.0 || !(rho > 0.0) {
        return (shifted, 1.0);
    }
    let b = rho / norm;
    if (b - 1.0).abs() < 1e-15 {
        return (shifted, 1.0);
    }
    (shifted.rescaled(b), b)
}

// the translation used by `TorusEmbedding::normalized`
fn phase_shift(t: &TorusEmbedding) -> Vec<f64> {
    if t.winding.rank() == 0 {
        return vec![0.0; t.l()];
    }
    let avg = t.k.average();
    let v: Vec<f64> = t.angle_slots.iter().map(|&s| avg[s]).collect();
    if v.iter().all(|x| x.abs() < 1e-15) {
        return vec![0.0; t.l()];
    }
    t.winding.pseudo_solve(&v).iter().map(|x| -x).collect()
}
