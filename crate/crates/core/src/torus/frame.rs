use nalgebra::DMatrix;

use super::{FrameInverse, TorusEmbedding};
use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::geometry::SymplecticMapModel;

/// The frame `M = [alpha | gamma]` that makes the linearized Newton operator
/// upper triangular with identity diagonal.
#[derive(Clone, Debug)]
pub struct ReducibilityFrame {
    /// `alpha = DK`, `2d x l`.
    pub alpha: FourierSeries,
    /// `N = (alpha^T alpha)^{-1}`.
    pub n: FourierSeries,
    pub beta: FourierSeries,
    /// `gamma = J^{-1} beta`.
    pub gamma: FourierSeries,
    /// `[alpha | gamma]`, `2d x 2l`.
    pub m: FourierSeries,
    /// `M o T_omega`.
    pub m_shift: FourierSeries,
    /// Left inverse of `M o T_omega` restricted to its range:
    /// `(M+^T J M+)^{-1} M+^T J`, `2l x 2d`.
    pub p: FourierSeries,
    /// Torsion `A`, `l x l`.
    pub a: FourierSeries,
    /// `DF o K`.
    pub df: FourierSeries,
    /// Transformed counterterm direction `B = P G`, split as `B1` (rows
    /// `0..l`) and `B2` (rows `l..2l`); present when a counterterm is used.
    pub b: Option<FourierSeries>,
    /// Smallest singular value of `alpha^T alpha` over the grid.
    pub min_gram_sv: f64,
}

impl ReducibilityFrame {
    pub fn l(&self) -> usize {
        self.alpha.cols()
    }

    /// Smallest singular value of `avg(A)`.
    pub fn twist(&self) -> f64 {
        let a = &self.a;
        twist_magnitude(&DMatrix::from_row_slice(a.rows(), a.cols(), &a.average()))
    }

    pub fn b1(&self) -> Option<FourierSeries> {
        self.b.as_ref().map(|b| b.rows_range(0, self.l()))
    }

    pub fn b2(&self) -> Option<FourierSeries> {
        self.b.as_ref().map(|b| b.rows_range(self.l(), self.l()))
    }
}

pub fn build_frame(
    torus: &TorusEmbedding,
    model: &SymplecticMapModel,
    inverse: FrameInverse,
    with_counterterm: bool,
) -> Result<ReducibilityFrame> {
    assemble(torus, model, inverse, with_counterterm, None)
}

/// Frame of a whiskered torus: the conjugate directions are projected onto
/// the center bundle, `gamma = Pi^c J^{-1} beta`, so that the range of `M`
/// is the center bundle; the left inverse is computed exactly and
/// `A = [P (DF o K) gamma]_1`.
pub fn build_center_frame(
    torus: &TorusEmbedding,
    model: &SymplecticMapModel,
    with_counterterm: bool,
    pi_c: &FourierSeries,
) -> Result<ReducibilityFrame> {
    assemble(torus, model, FrameInverse::Exact, with_counterterm, Some(pi_c))
}

fn assemble(
    torus: &TorusEmbedding,
    model: &SymplecticMapModel,
    inverse: FrameInverse,
    with_counterterm: bool,
    pi_c: Option<&FourierSeries>,
) -> Result<ReducibilityFrame> {
    let grid = torus.grid();
    let l = torus.l();
    let omega = &torus.omega.omega;
    let structure = model.structure();
    let j = structure.j_series(grid);
    let jinv = j.neg();

    let alpha = torus.dk();
    let gram = alpha.transpose().matmul(&alpha);
    let min_gram_sv = min_singular_value(&gram);
    if !(min_gram_sv > 1e-12) {
        return Err(Error::DegenerateEmbedding { min_sv: min_gram_sv });
    }
    let n = gram.try_inverse().ok_or(Error::DegenerateEmbedding { min_sv: min_gram_sv })?;
    let beta = alpha.matmul(&n);
    let gamma = match pi_c {
        Some(pc) => pc.matmul(&jinv.matmul(&beta)),
        None => jinv.matmul(&beta),
    };
    let m = FourierSeries::hstack(&[&alpha, &gamma]);
    let m_shift = m.rotate(omega);
    let alpha_s = m_shift.block(0, 0, m.rows(), l);
    let gamma_s = m_shift.block(0, l, m.rows(), l);
    let beta_s = beta.rotate(omega);

    let p = match inverse {
        FrameInverse::Shortcut => {
            // [[0, -Id], [Id, 0]] M+^T J
            let top = gamma_s.transpose().matmul(&j).neg();
            let bottom = alpha_s.transpose().matmul(&j);
            FourierSeries::vstack(&[&top, &bottom])
        }
        FrameInverse::Exact => {
            let mtj = m_shift.transpose().matmul(&j);
            let s = mtj.matmul(&m_shift);
            let s_inv = s.try_inverse().ok_or(Error::DegenerateEmbedding { min_sv: 0.0 })?;
            s_inv.matmul(&mtj)
        }
    };

    let lift = torus.lift();
    let df = model.jac_series(&lift.grid_values(&vec![0.0; l]));
    let a = if pi_c.is_some() {
        p.matmul(&df.matmul(&gamma)).rows_range(0, l)
    } else if structure.almost_complex {
        beta_s.transpose().matmul(&df).matmul(&gamma)
    } else {
        beta_s.transpose().matmul(&df.matmul(&gamma).sub(&gamma.rotate(omega)))
    };

    let b = with_counterterm.then(|| p.matmul(&torus.counterterm_field(model)));
    Ok(ReducibilityFrame { alpha, n, beta, gamma, m, m_shift, p, a, df, b, min_gram_sv })
}

fn min_singular_value(gram: &FourierSeries) -> f64 {
    let l = gram.rows();
    if l == 1 {
        return gram.values().iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    }
    let mut best = f64::INFINITY;
    for j in 0..gram.grid().len() {
        let sv = gram.matrix_at(j).singular_values();
        best = best.min(sv.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    best
}

/// `sup |(DF o K) M - (M o T_omega) [[Id, A], [0, Id]]|`.
pub fn reducibility_defect(frame: &ReducibilityFrame) -> f64 {
    let l = frame.l();
    let grid = frame.m.grid();
    let mut blocks = FourierSeries::identity(grid, 2 * l);
    // place A in the upper-right block
    let a = &frame.a;
    let n = grid.len();
    let mut v = blocks.values().to_vec();
    for i in 0..l {
        for jj in 0..l {
            let c = i * 2 * l + l + jj;
            v[c * n..(c + 1) * n].copy_from_slice(a.entry(i, jj));
        }
    }
    blocks = FourierSeries::from_values(grid, 2 * l, 2 * l, v).expect("block shape");
    frame.df.matmul(&frame.m).sub(&frame.m_shift.matmul(&blocks)).sup_norm()
}

/// Smallest singular value of an `l x l` average.
pub(crate) fn twist_magnitude(avg_a: &DMatrix<f64>) -> f64 {
    avg_a.singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}
