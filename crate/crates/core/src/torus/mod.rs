//! Invariant tori: residual, the automatic reducibility frame, the Newton
//! step in the center direction and the outer drivers.

mod frame;
mod io;
mod solve;
mod step;

pub use frame::{build_center_frame, build_frame, reducibility_defect, ReducibilityFrame};
pub use io::{read_torus, write_torus};
pub use solve::{continuation, newton_solve, ContinuationStep};
pub use step::{center_correction, newton_center_step, CenterCorrection, NewtonReport};

use crate::error::{Error, Result};
use crate::fourier::{CohomologyOptions, FourierSeries, Grid, RotationVector};
use crate::geometry::{lift_normalize, Lift, SymplecticMapModel, WindingMatrix};

/// How the center step inverts `M(theta+omega)^T J M(theta+omega)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameInverse {
    /// Closed form valid on isotropic tori: `[[0, -Id], [Id, 0]]`.
    Shortcut,
    /// Pointwise inversion of the `2l x 2l` matrix.
    Exact,
}

#[derive(Clone, Debug)]
pub struct TorusOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub lambda_tol: f64,
    pub twist_floor: f64,
    pub use_counterterm: bool,
    pub frame_inverse: FrameInverse,
    pub cohomology: CohomologyOptions,
    /// Double the grid when the top-octave energy fraction exceeds `tail_tol`.
    pub auto_refine: bool,
    pub tail_tol: f64,
    pub max_grid: usize,
}

impl Default for TorusOptions {
    fn default() -> Self {
        TorusOptions {
            tol: 1e-12,
            max_iter: 30,
            lambda_tol: 1e-10,
            twist_floor: 1e-8,
            use_counterterm: false,
            frame_inverse: FrameInverse::Shortcut,
            cohomology: CohomologyOptions::default(),
            auto_refine: true,
            tail_tol: 1e-9,
            max_grid: 1 << 16,
        }
    }
}

/// Candidate torus: periodic part `K~` of the embedding plus its winding,
/// frequency and counterterm.
#[derive(Clone, Debug)]
pub struct TorusEmbedding {
    /// Periodic part, a `2d`-vector series.
    pub k: FourierSeries,
    pub winding: WindingMatrix,
    pub omega: RotationVector,
    /// Counterterm, one entry per angle.
    pub lambda: Vec<f64>,
    /// Frozen reference embedding of the modified equation; the current
    /// embedding is used when absent.
    pub k0: Option<FourierSeries>,
    pub angle_slots: Vec<usize>,
}

impl TorusEmbedding {
    pub fn new(k: FourierSeries, winding: WindingMatrix, omega: RotationVector, angle_slots: Vec<usize>) -> Result<Self> {
        let l = omega.dim();
        if k.cols() != 1 || k.dim_domain() != l || winding.l() != l || angle_slots.len() != l {
            return Err(Error::Shape("embedding, winding and frequency dimensions disagree".into()));
        }
        Ok(TorusEmbedding { k, winding, omega, lambda: vec![0.0; l], k0: None, angle_slots })
    }

    /// The invariant torus of the unperturbed model: angles `theta`, actions
    /// `omega`, everything else zero.
    pub fn integrable(model: &SymplecticMapModel, grid: &Grid, omega: &RotationVector) -> Result<Self> {
        let d = model.d();
        let slots = model.angle_slots();
        let mut value = vec![0.0; 2 * d];
        for (a, &s) in slots.iter().enumerate() {
            value[d + s] = omega.omega[a];
        }
        let k = FourierSeries::constant(grid, 2 * d, 1, &value);
        Self::new(k, WindingMatrix::identity(model.l()), omega.clone(), slots)
    }

    pub fn l(&self) -> usize {
        self.omega.dim()
    }

    pub fn grid(&self) -> &Grid {
        self.k.grid()
    }

    pub fn lift(&self) -> Lift<'_> {
        lift_normalize(&self.k, &self.winding, &self.angle_slots)
    }

    /// `DK = DK~ + (0, I)`.
    pub fn dk(&self) -> FourierSeries {
        self.lift().jacobian()
    }

    /// Same torus translated along its parameterization, `K o T_sigma`.
    pub fn translated(&self, sigma: &[f64]) -> Self {
        let mut out = self.clone();
        let shift = self.winding.apply(sigma);
        let mut add = vec![0.0; self.k.rows()];
        for (a, &s) in self.angle_slots.iter().enumerate() {
            add[s] = shift[a];
        }
        out.k = self.k.rotate(sigma).add_constant(&add);
        out
    }

    /// Chooses the translate whose angle components average to zero along
    /// the range of the winding matrix.
    pub fn normalized(&self) -> Self {
        if self.winding.rank() == 0 {
            return self.clone();
        }
        let avg = self.k.average();
        let v: Vec<f64> = self.angle_slots.iter().map(|&s| avg[s]).collect();
        let sigma: Vec<f64> = self.winding.pseudo_solve(&v).iter().map(|x| -x).collect();
        self.translated(&sigma)
    }

    pub fn resampled(&self, grid: &Grid) -> Result<Self> {
        let mut out = self.clone();
        out.k = self.k.resample(grid)?;
        out.k0 = self.k0.as_ref().map(|k0| k0.resample(grid)).transpose()?;
        Ok(out)
    }

    /// `((J o K0)^{-1} DK0) o T_omega`, the counterterm direction.
    pub fn counterterm_field(&self, model: &SymplecticMapModel) -> FourierSeries {
        let dk0 = match &self.k0 {
            Some(k0) => lift_normalize(k0, &self.winding, &self.angle_slots).jacobian(),
            None => self.dk(),
        };
        let jinv = model.structure().j_series(self.grid()).neg();
        jinv.matmul(&dk0).rotate(&self.omega.omega)
    }
}

/// `E = F o K - K o T_omega - G lambda` on the grid, with angle components
/// taken on the branch nearest zero.
pub fn invariance_residual(torus: &TorusEmbedding, model: &SymplecticMapModel) -> Result<FourierSeries> {
    let lift = torus.lift();
    let fk = model.eval_series(&lift.grid_values(&vec![0.0; torus.l()]))?;
    let kw = lift.grid_values(&torus.omega.omega);
    let mut e = fk.sub(&kw);
    if torus.lambda.iter().any(|&x| x != 0.0) {
        let g = torus.counterterm_field(model);
        let lam = FourierSeries::constant(torus.grid(), torus.l(), 1, &torus.lambda);
        e = e.sub(&g.matmul(&lam));
    }
    reduce_angles(&e, &torus.angle_slots)
}

// nearest-to-zero branch for the angle rows, with a jump detector
fn reduce_angles(e: &FourierSeries, slots: &[usize]) -> Result<FourierSeries> {
    e.check_finite("invariance residual")
        .map_err(|_| Error::ModelDomain("non-finite residual".into()))?;
    let grid = e.grid();
    let n = grid.len();
    let dims = grid.dims().to_vec();
    let mut v = e.values().to_vec();
    for &s in slots {
        let row = &mut v[s * n..(s + 1) * n];
        for x in row.iter_mut() {
            *x -= x.round();
        }
        let mut stride = 1;
        for &len in dims.iter().rev() {
            for j in 0..n {
                let pos = (j / stride) % len;
                let nb = if pos + 1 == len { j + stride - len * stride } else { j + stride };
                let jump = (row[nb] - row[j]).abs();
                if jump > 0.5 {
                    return Err(Error::Winding { jump });
                }
            }
            stride *= len;
        }
    }
    FourierSeries::from_values(grid, e.rows(), 1, v)
}

/// Sup norm of `DK^T J(K)^{-1} DK` for the torus.
pub fn torus_coisotropy(torus: &TorusEmbedding, model: &SymplecticMapModel) -> f64 {
    crate::geometry::coisotropy_defect(&torus.dk(), &model.structure())
}

#[cfg(test)]
mod tests;
