use nalgebra::DMatrix;

use super::taylor::FtMatrix;
use super::{ft_jacobian, FourierTaylorSeries};
use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::geometry::SymplecticMapModel;

/// The frame `M = [alpha | gamma | beta | eta]` along a whisker, with
/// `alpha = D_theta W`, `beta = d_s W` and their symplectic conjugates, and
/// the reduced matrix `R = M(theta + omega, mu s)^{-1} (DF o W) M`.
///
/// The conjugate directions start from `J^{-1} alpha N` and `J^{-1} beta N~`
/// and are corrected so that the pairs `(alpha, gamma)` and `(beta, eta)` are
/// symplectically orthogonal; then, up to the invariance error, the order-0
/// part of `R` has the constant diagonal `(Id, Id, mu, 1/mu)` and is upper
/// triangular after ordering the unknowns as `(gamma, eta, alpha, beta)`.
/// Higher orders of `R` only ever multiply known lower orders of the
/// unknowns and are used as computed.
#[derive(Clone, Debug)]
pub struct WhiskerFrame {
    pub(crate) m: FtMatrix,
    pub(crate) m_next_inv: FtMatrix,
    pub(crate) r: FtMatrix,
    pub(crate) beta_next: FtMatrix,
    pub l: usize,
    pub mu: f64,
    /// Largest condition number of `M(theta, s)` over the grid for
    /// `s in {-s_max, 0, s_max}`.
    pub condition: f64,
    /// Size of the order-0 entries of `R` that differ from the reduced form;
    /// of the order of the torus and bundle errors.
    pub structure_defect: f64,
}

// Omega(u, v) = u^T J v
fn pairing(u: &FtMatrix, j: &FtMatrix, v: &FtMatrix) -> FtMatrix {
    u.transpose().mul(j).mul(v)
}

impl WhiskerFrame {
    pub fn build(w: &FourierTaylorSeries, mu: f64, model: &SymplecticMapModel) -> Result<Self> {
        let len = w.orders.len();
        let grid = w.grid().clone();
        let dim = w.dim();
        let l = w.winding.l();
        if dim != 2 * (l + 1) {
            return Err(Error::UnsupportedRank { rank: dim / 2 - l });
        }
        let structure = model.structure();
        let j = FtMatrix::constant_in_s(structure.j_series(&grid), len);
        let jinv = FtMatrix::constant_in_s(structure.j_series(&grid).neg(), len);
        // a singular frame is reported as a degenerate embedding
        let singular = || Error::DegenerateEmbedding { min_sv: 0.0 };

        let alpha = w.d_theta();
        let beta = w.d_s();
        let n = alpha.transpose().mul(&alpha).inverse().ok_or_else(singular)?;
        let nt = beta.transpose().mul(&beta).inverse().ok_or_else(singular)?;
        let gamma0 = jinv.mul(&alpha).mul(&n);
        let eta0 = jinv.mul(&beta).mul(&nt);

        // symplectic Gram-Schmidt on the conjugate directions
        let eta1 = eta0.sub(&gamma0.mul(&pairing(&alpha, &j, &eta0)));
        let s1 = pairing(&beta, &j, &eta1).inverse().ok_or_else(singular)?;
        let eta2 = eta1.mul(&s1);
        let gamma1 = gamma0.sub(&eta2.mul(&pairing(&beta, &j, &gamma0)));
        let eta = eta2.add(&alpha.mul(&pairing(&gamma1, &j, &eta2)));
        let skew = pairing(&gamma1, &j, &gamma1);
        let half = FtMatrix::new(skew.orders.iter().map(|x| x.scale(0.5)).collect());
        let gamma = gamma1.add(&alpha.mul(&half));

        let m = FtMatrix::hstack(&[&alpha, &gamma, &beta, &eta]);
        let omega = &w.omega.omega;
        let m_next_inv = m.shifted(omega, mu).inverse().ok_or_else(singular)?;
        let df = ft_jacobian(model, w);
        let r = m_next_inv.mul(&df).mul(&m);
        let beta_next = beta.shifted(omega, mu);

        let condition = [-w.s_max, 0.0, w.s_max]
            .iter()
            .map(|&s| sup_condition(&m.eval_s(s)))
            .fold(0.0, f64::max);
        let mut frame = WhiskerFrame { m, m_next_inv, r, beta_next, l, mu, condition, structure_defect: 0.0 };
        frame.structure_defect = frame.model_defect();
        Ok(frame)
    }

    fn idx_gamma(&self) -> usize {
        self.l
    }

    fn idx_beta(&self) -> usize {
        2 * self.l
    }

    fn idx_eta(&self) -> usize {
        2 * self.l + 1
    }

    /// `A`: the `alpha` rows of the `gamma` columns of `R`.
    pub(crate) fn a(&self) -> FtMatrix {
        self.r.block(0, self.idx_gamma(), self.l, self.l)
    }

    /// The `alpha` rows of the `eta` column.
    pub(crate) fn u(&self) -> FtMatrix {
        self.r.block(0, self.idx_eta(), self.l, 1)
    }

    /// The `beta` row of the `gamma` columns.
    pub(crate) fn x(&self) -> FtMatrix {
        self.r.block(self.idx_beta(), self.idx_gamma(), 1, self.l)
    }

    /// `B`: the `beta` row of the `eta` column.
    pub(crate) fn b(&self) -> FtMatrix {
        self.r.block(self.idx_beta(), self.idx_eta(), 1, 1)
    }

    /// `M(theta + omega, mu s)^{-1} X`.
    pub(crate) fn transform(&self, x: &FtMatrix) -> FtMatrix {
        self.m_next_inv.mul(x)
    }

    // order-0 entries of R that are fixed by the reduction: columns alpha and
    // beta, rows gamma and eta
    fn model_defect(&self) -> f64 {
        let r0 = &self.r.orders[0];
        let dim = r0.rows();
        let l = self.l;
        let mut worst: f64 = 0.0;
        for i in 0..dim {
            for c in 0..dim {
                let fixed_col = c < l || c == self.idx_beta();
                let fixed_row = (l..2 * l).contains(&i) || i == self.idx_eta();
                if !(fixed_col || fixed_row) {
                    continue;
                }
                let target = match (i == c, c) {
                    (false, _) => 0.0,
                    (true, c) if c == self.idx_beta() => self.mu,
                    (true, c) if c == self.idx_eta() => 1.0 / self.mu,
                    _ => 1.0,
                };
                let dev = r0.entry(i, c).iter().fold(0.0f64, |m, &v| m.max((v - target).abs()));
                worst = worst.max(dev);
            }
        }
        worst
    }

    /// `M` as a matrix series (for `Delta = M V`).
    pub(crate) fn frame(&self) -> &FtMatrix {
        &self.m
    }
}

fn sup_condition(m: &FourierSeries) -> f64 {
    let n = m.rows();
    (0..m.grid().len())
        .map(|j| {
            let sv = DMatrix::from_row_slice(n, n, &m.point(j)).singular_values();
            let max = sv.iter().cloned().fold(0.0, f64::max);
            let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            max / min
        })
        .fold(0.0, f64::max)
}
