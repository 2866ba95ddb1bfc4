//! Invariant splittings of the linearized dynamics around a torus: the
//! cocycle, projections onto stable, center and unstable bundles, their
//! Newton refinement and the hyperbolic parts of the torus Newton step.

mod hyperbolic;
mod io;
mod projection;
mod whiskered;

pub use hyperbolic::{solve_stable, solve_unstable, split_error, HyperbolicCorrection, SplitError};
pub use io::{read_splitting, write_splitting};
pub use projection::{newton_projection_step, projection_residuals, refine_splitting, ProjectionReport, SplittingOptions};
pub use whiskered::{newton_whiskered_solve, newton_whiskered_step, WhiskeredOptions, WhiskeredReport};

use std::sync::Mutex;

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::fourier::{row_major, FourierSeries};
use crate::geometry::SymplecticMapModel;
use crate::torus::TorusEmbedding;

/// Linear skew product `(v, theta) -> (Z(theta) v, theta + omega)`.
#[derive(Clone, Debug)]
pub struct Cocycle {
    pub z: FourierSeries,
    pub z_inv: FourierSeries,
    pub omega: Vec<f64>,
}

impl Cocycle {
    pub fn new(z: FourierSeries, omega: &[f64]) -> Result<Self> {
        let z_inv = z
            .try_inverse()
            .ok_or_else(|| Error::RegimeViolation("cocycle generator is singular on the grid".into()))?;
        Ok(Cocycle { z, z_inv, omega: omega.to_vec() })
    }

    /// `Z = DF o K`, with the inverse taken from the model's closed form.
    pub fn from_torus(torus: &TorusEmbedding, model: &SymplecticMapModel) -> Self {
        let k = torus.lift().grid_values(&vec![0.0; torus.l()]);
        Cocycle { z: model.jac_series(&k), z_inv: model.jac_inv_series(&k), omega: torus.omega.omega.clone() }
    }

    pub fn dim(&self) -> usize {
        self.z.rows()
    }

    /// `M(n, theta) = Z(theta + (n-1) omega) ... Z(theta)`.
    pub fn iterate(&self, n: usize) -> FourierSeries {
        let mut m = FourierSeries::identity(self.z.grid(), self.dim());
        for k in 0..n {
            let shift: Vec<f64> = self.omega.iter().map(|w| w * k as f64).collect();
            m = self.z.rotate(&shift).matmul(&m);
        }
        m
    }

    /// The inverse cocycle over `-omega`, generated by `Z(theta - omega)^{-1}`;
    /// its stable bundle is the unstable bundle of `self`.
    pub fn mirrored(&self) -> Self {
        let back: Vec<f64> = self.omega.iter().map(|w| -w).collect();
        Cocycle { z: self.z_inv.rotate(&back), z_inv: self.z.rotate(&back), omega: back }
    }
}

/// Projections onto the bundles of a (nearly) invariant splitting.
#[derive(Clone, Debug)]
pub struct InvariantSplitting {
    pub pi_s: FourierSeries,
    pub pi_cu: FourierSeries,
    pub pi_u: Option<FourierSeries>,
    pub pi_cs: Option<FourierSeries>,
}

impl InvariantSplitting {
    /// Splitting from a stable projection, with `Pi^cu = Id - Pi^s`.
    pub fn from_stable(pi_s: FourierSeries) -> Self {
        let id = FourierSeries::identity(pi_s.grid(), pi_s.rows());
        InvariantSplitting { pi_cu: id.sub(&pi_s), pi_s, pi_u: None, pi_cs: None }
    }

    pub fn with_unstable(mut self, pi_u: FourierSeries) -> Self {
        let id = FourierSeries::identity(pi_u.grid(), pi_u.rows());
        self.pi_cs = Some(id.sub(&pi_u));
        self.pi_u = Some(pi_u);
        self
    }

    /// The same splitting seen from the mirrored cocycle: stable and
    /// unstable exchanged.
    pub fn mirrored(&self) -> Option<Self> {
        Some(InvariantSplitting {
            pi_s: self.pi_u.clone()?,
            pi_cu: self.pi_cs.clone()?,
            pi_u: Some(self.pi_s.clone()),
            pi_cs: Some(self.pi_cu.clone()),
        })
    }

    /// `Pi^c = Pi^cs Pi^cu`.
    pub fn pi_c(&self) -> Option<FourierSeries> {
        Some(self.pi_cs.as_ref()?.matmul(&self.pi_cu))
    }

    pub fn dim(&self) -> usize {
        self.pi_s.rows()
    }

    /// `sup |Pi^s Pi^s - Pi^s|`, and the same for `Pi^u` when present.
    pub fn idempotency_defect(&self) -> f64 {
        let d = |p: &FourierSeries| p.matmul(p).sub(p).sup_norm();
        d(&self.pi_s).max(self.pi_u.as_ref().map_or(0.0, d))
    }

    /// `sup |Pi^s + Pi^cu - Id|` (and for the unstable pair).
    pub fn complement_defect(&self) -> f64 {
        let id = FourierSeries::identity(self.pi_s.grid(), self.dim());
        let mut out = self.pi_s.add(&self.pi_cu).sub(&id).sup_norm();
        if let (Some(u), Some(cs)) = (&self.pi_u, &self.pi_cs) {
            out = out.max(u.add(cs).sub(&id).sup_norm());
        }
        out
    }

    /// Number of singular values above 1/2 at the first grid point.
    pub fn stable_rank(&self) -> usize {
        numerical_rank(&self.pi_s.matrix_at(0))
    }

    pub fn unstable_rank(&self) -> Option<usize> {
        self.pi_u.as_ref().map(|p| numerical_rank(&p.matrix_at(0)))
    }
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    (m.transpose() * m).symmetric_eigenvalues().iter().filter(|&&l| l > 0.25).count()
}

/// Replaces an almost idempotent field by the projection with the same
/// dominant row and column spaces, `U_r (V_r^T U_r)^{-1} V_r^T`, where `r`
/// counts the singular values above 0.9. Singular values in `[0.1, 0.9]`
/// make the rank ambiguous.
pub fn reproject(pi: &FourierSeries, rank: usize) -> Result<FourierSeries> {
    let n = pi.rows();
    let failure = Mutex::new(None);
    let out = pi.try_map_points(n, n, |inp, out| match reproject_matrix(&DMatrix::from_row_slice(n, n, inp), rank) {
        Ok(p) => {
            out.copy_from_slice(&row_major(&p));
            Some(())
        }
        Err(e) => {
            failure.lock().expect("poisoned").get_or_insert(e);
            None
        }
    });
    out.ok_or_else(|| failure.into_inner().expect("poisoned").expect("failure recorded"))
}

// singular pairs from the symmetric eigenproblem of m^T m: nalgebra's
// bidiagonal SVD loses accuracy on nearly rank-deficient 4x4 blocks
fn reproject_matrix(m: &DMatrix<f64>, rank: usize) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::NumericCorruption { context: "reprojection".into() });
    }
    let eig = (m.transpose() * m).symmetric_eigen();
    let mut keep = Vec::new();
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        if (0.1..=0.9).contains(&s) {
            return Err(Error::AmbiguousRank { singular_value: s });
        }
        if s > 0.9 {
            keep.push((i, s));
        }
    }
    if keep.len() != rank {
        return Err(Error::RegimeViolation(format!("projection rank changed from {rank} to {}", keep.len())));
    }
    if rank == 0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let vr = DMatrix::from_fn(n, rank, |i, j| eig.eigenvectors[(i, keep[j].0)]);
    let mut ur = m * &vr;
    for (j, &(_, s)) in keep.iter().enumerate() {
        ur.column_mut(j).scale_mut(1.0 / s);
    }
    let inner = (vr.transpose() * &ur)
        .try_inverse()
        .ok_or(Error::AmbiguousRank { singular_value: 0.0 })?;
    Ok(&ur * inner * vr.transpose())
}

/// Spectral projection of a constant matrix onto the eigenvalues inside the
/// disk of radius `r`, through the matrix sign function of a Cayley transform.
pub fn disk_projection(m: &DMatrix<f64>, r: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let scaled = m / r;
    let denom = (&scaled + &id)
        .try_inverse()
        .ok_or_else(|| Error::RegimeViolation("eigenvalue on the Cayley pole".into()))?;
    let mut x = (&scaled - &id) * denom;
    for _ in 0..100 {
        let inv = x
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::RegimeViolation("eigenvalue on the separating circle".into()))?;
        let next = (&x + inv) * 0.5;
        let change = (&next - &x).norm();
        x = next;
        if change <= 1e-14 * x.norm() {
            break;
        }
    }
    Ok((id - x) * 0.5)
}

/// Projections of the averaged cocycle, used when no nearby splitting is
/// known: the `n_stable` smallest and `n_unstable` largest eigenvalues in
/// modulus define the stable and unstable bundles.
pub fn cold_start(cocycle: &Cocycle, n_stable: usize, n_unstable: usize) -> Result<InvariantSplitting> {
    let n = cocycle.dim();
    if n_stable + n_unstable >= n {
        return Err(Error::Shape("hyperbolic bundles leave no center".into()));
    }
    let avg = DMatrix::from_row_slice(n, n, &cocycle.z.average());
    let mut moduli: Vec<f64> = avg.complex_eigenvalues().iter().map(|c: &Complex<f64>| c.norm()).collect();
    moduli.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    let grid = cocycle.z.grid();
    let constant = |m: &DMatrix<f64>| FourierSeries::constant(grid, n, n, &row_major(m));
    let pi_s = if n_stable == 0 {
        DMatrix::zeros(n, n)
    } else {
        let (lo, hi) = (moduli[n_stable - 1], moduli[n_stable]);
        if !(hi > lo * (1.0 + 1e-6)) {
            return Err(Error::InsufficientHyperbolicity { kappa: lo / hi });
        }
        disk_projection(&avg, (lo * hi).sqrt())?
    };
    let pi_u = if n_unstable == 0 {
        DMatrix::zeros(n, n)
    } else {
        let (lo, hi) = (moduli[n - n_unstable - 1], moduli[n - n_unstable]);
        if !(hi > lo * (1.0 + 1e-6)) {
            return Err(Error::InsufficientHyperbolicity { kappa: lo / hi });
        }
        DMatrix::identity(n, n) - disk_projection(&avg, (lo * hi).sqrt())?
    };
    Ok(InvariantSplitting::from_stable(constant(&pi_s)).with_unstable(constant(&pi_u)))
}

/// Fitted rates of the cocycle restricted to the bundles:
/// `|M(n) Pi^s| <= C mu1^n`, `|M(-n) Pi^u| <= C mu2^n`,
/// `|M(+-n) Pi^c| <= C mu3^n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperbolicityRates {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub c: f64,
    /// False when a log-linear fit deviates from the data by more than a
    /// factor `e` somewhere in the fit window.
    pub reliable: bool,
}

impl HyperbolicityRates {
    pub fn dichotomy_holds(&self) -> bool {
        self.mu1 < 1.0 && self.mu2 < 1.0 && self.mu1 * self.mu3 < 1.0 && self.mu2 * self.mu3 < 1.0
    }
}

struct RateFit {
    rate: f64,
    prefactor: f64,
    misfit: f64,
}

// log-linear fit over the second half of the run
fn fit_rate(norms: &[f64]) -> RateFit {
    let n_max = norms.len() - 1;
    if norms.iter().all(|&x| x == 0.0) {
        return RateFit { rate: 0.0, prefactor: 0.0, misfit: 0.0 };
    }
    let pts: Vec<(f64, f64)> = (n_max / 2..=n_max)
        .filter(|&n| norms[n] > 0.0)
        .map(|n| (n as f64, norms[n].ln()))
        .collect();
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let icept = (sy - slope * sx) / m;
    let misfit = pts.iter().map(|p| (p.1 - icept - slope * p.0).abs()).fold(0.0, f64::max);
    let rate = slope.exp();
    let prefactor = norms
        .iter()
        .enumerate()
        .map(|(n, &x)| x / rate.powi(n as i32))
        .fold(0.0, f64::max);
    RateFit { rate, prefactor, misfit }
}

// The iterates are projected back onto the invariant bundle after each step
// so that rounding errors in the complementary directions cannot grow.
fn restricted_norms(gen: &FourierSeries, omega: &[f64], pi: &FourierSeries, n_max: usize) -> Vec<f64> {
    let mut x = pi.clone();
    let mut out = vec![x.sup_operator_norm()];
    for k in 0..n_max {
        let shift: Vec<f64> = omega.iter().map(|w| w * k as f64).collect();
        let next: Vec<f64> = omega.iter().map(|w| w * (k + 1) as f64).collect();
        x = pi.rotate(&next).matmul(&gen.rotate(&shift)).matmul(&x);
        out.push(x.sup_operator_norm());
    }
    out
}

/// Estimates the dichotomy rates from `n_max` cocycle iterates.
pub fn estimate_rates(cocycle: &Cocycle, split: &InvariantSplitting, n_max: usize) -> HyperbolicityRates {
    let n_max = n_max.max(2);
    let fwd = &cocycle.z;
    let back = cocycle.mirrored();
    let s = fit_rate(&restricted_norms(fwd, &cocycle.omega, &split.pi_s, n_max));
    let mut fits = vec![];
    let mu2 = match &split.pi_u {
        Some(pu) => {
            let f = fit_rate(&restricted_norms(&back.z, &back.omega, pu, n_max));
            let r = f.rate;
            fits.push(f);
            r
        }
        None => f64::NAN,
    };
    let mu3 = match split.pi_c() {
        Some(pc) if pc.sup_norm() > 0.0 => {
            let a = fit_rate(&restricted_norms(fwd, &cocycle.omega, &pc, n_max));
            let b = fit_rate(&restricted_norms(&back.z, &back.omega, &pc, n_max));
            let r = a.rate.max(b.rate);
            fits.push(a);
            fits.push(b);
            r
        }
        _ => 1.0,
    };
    let mu1 = s.rate;
    fits.push(s);
    HyperbolicityRates {
        mu1,
        mu2,
        mu3,
        c: fits.iter().map(|f| f.prefactor).fold(0.0, f64::max),
        reliable: fits.iter().all(|f| f.misfit < 1.0),
    }
}
