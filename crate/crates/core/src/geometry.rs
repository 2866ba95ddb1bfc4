//! Phase-space conventions and the exact symplectic test models.
//!
//! Points are `z = (q_1..q_d, p_1..p_d)`. Some of the `q` slots are angles;
//! maps act on lifts, so angle outputs are never reduced mod 1.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fourier::FourierSeries;

/// Scalar type a kick map can be evaluated over: plain numbers or Taylor jets.
pub trait KickScalar: Clone + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    /// `(sin 2 pi x, cos 2 pi x)`.
    fn sin_cos_2pi(&self) -> (Self, Self);
    /// The constant `c` in the same scalar type as `self`.
    fn constant_like(&self, c: f64) -> Self;
}

impl KickScalar for f64 {
    fn sin_cos_2pi(&self) -> (f64, f64) {
        (2.0 * PI * self).sin_cos()
    }

    fn constant_like(&self, c: f64) -> f64 {
        c
    }
}

/// `J = [[0, -Id], [Id, 0]]` in `(q, p)` block order; constant and almost
/// complex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymplecticStructure {
    pub dim: usize,
    pub almost_complex: bool,
}

impl SymplecticStructure {
    pub fn standard(d: usize) -> Self {
        SymplecticStructure { dim: 2 * d, almost_complex: true }
    }

    pub fn j_at(&self, _z: &[f64]) -> DMatrix<f64> {
        let d = self.dim / 2;
        let mut j = DMatrix::zeros(self.dim, self.dim);
        for i in 0..d {
            j[(i, d + i)] = -1.0;
            j[(d + i, i)] = 1.0;
        }
        j
    }

    pub fn j_inv_at(&self, z: &[f64]) -> DMatrix<f64> {
        -self.j_at(z)
    }

    /// Constant `J` as a matrix series.
    pub fn j_series(&self, grid: &crate::fourier::Grid) -> FourierSeries {
        let j = self.j_at(&[]);
        FourierSeries::constant(grid, self.dim, self.dim, &crate::fourier::row_major(&j))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// `d = 1`, kick `V = (eps/4pi^2) cos 2 pi q`.
    Standard,
    /// `d = 2`, `q_1` an angle, pendulum in `(q_2, p_2)` with a hyperbolic
    /// fixed point at the origin.
    RotatorPendulum,
    /// As the pendulum model with the pendulum replaced by its linearization.
    RotatorLinear,
}

/// A kick map `p' = p - grad V(q)`, `q' = q + p'`, exact symplectic by
/// construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymplecticMapModel {
    pub kind: ModelKind,
    pub epsilon: f64,
    pub a: f64,
}

pub fn model_standard_map(epsilon: f64) -> SymplecticMapModel {
    SymplecticMapModel { kind: ModelKind::Standard, epsilon, a: 0.0 }
}

/// Rotator coupled to a pendulum:
/// `V = (a/4pi^2) cos 2 pi q_2 + (eps/4pi^2) cos 2 pi (q_1 + q_2)`.
pub fn model_rotator_pendulum(a: f64, epsilon: f64) -> Result<SymplecticMapModel> {
    if !(a > 0.0) {
        return Err(Error::Parameter(format!("pendulum strength a must be positive, got {a}")));
    }
    Ok(SymplecticMapModel { kind: ModelKind::RotatorPendulum, epsilon, a })
}

/// Rotator coupled to the linearized pendulum `V = -(a/2) q_2^2 + coupling`.
pub fn model_rotator_linear(a: f64, epsilon: f64) -> Result<SymplecticMapModel> {
    if !(a > 0.0) {
        return Err(Error::Parameter(format!("hyperbolic strength a must be positive, got {a}")));
    }
    Ok(SymplecticMapModel { kind: ModelKind::RotatorLinear, epsilon, a })
}

impl SymplecticMapModel {
    pub fn from_name(name: &str, a: f64, epsilon: f64) -> Result<Self> {
        match name {
            "standard" => Ok(model_standard_map(epsilon)),
            "rotator_pendulum" => model_rotator_pendulum(a, epsilon),
            "rotator_linear" => model_rotator_linear(a, epsilon),
            other => Err(Error::Parameter(format!("unknown model '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::Standard => "standard",
            ModelKind::RotatorPendulum => "rotator_pendulum",
            ModelKind::RotatorLinear => "rotator_linear",
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        SymplecticMapModel { epsilon, ..*self }
    }

    /// Degrees of freedom.
    pub fn d(&self) -> usize {
        match self.kind {
            ModelKind::Standard => 1,
            _ => 2,
        }
    }

    /// Phase-space dimension `2d`.
    pub fn dim(&self) -> usize {
        2 * self.d()
    }

    /// Number of angle coordinates.
    pub fn l(&self) -> usize {
        1
    }

    /// Positions of the angle coordinates in `z`.
    pub fn angle_slots(&self) -> Vec<usize> {
        vec![0]
    }

    pub fn structure(&self) -> SymplecticStructure {
        SymplecticStructure::standard(self.d())
    }

    /// Gradient of the kick potential.
    pub fn grad_v<T: KickScalar>(&self, q: &[T]) -> Vec<T> {
        let c = 1.0 / (2.0 * PI);
        match self.kind {
            ModelKind::Standard => {
                let (s, _) = q[0].sin_cos_2pi();
                vec![s * (-self.epsilon * c)]
            }
            ModelKind::RotatorPendulum | ModelKind::RotatorLinear => {
                let (s12, _) = (q[0].clone() + q[1].clone()).sin_cos_2pi();
                let coupling = s12 * (-self.epsilon * c);
                let own = if self.kind == ModelKind::RotatorPendulum {
                    q[1].sin_cos_2pi().0 * (-self.a * c)
                } else {
                    q[1].clone() * (-self.a)
                };
                vec![coupling.clone(), own + coupling]
            }
        }
    }

    /// Hessian of the kick potential, row-major, over any kick scalar.
    pub fn hess_v_generic<T: KickScalar>(&self, q: &[T]) -> Vec<T> {
        match self.kind {
            ModelKind::Standard => vec![q[0].sin_cos_2pi().1 * (-self.epsilon)],
            ModelKind::RotatorPendulum | ModelKind::RotatorLinear => {
                let h = (q[0].clone() + q[1].clone()).sin_cos_2pi().1 * (-self.epsilon);
                let own = if self.kind == ModelKind::RotatorPendulum {
                    q[1].sin_cos_2pi().1 * (-self.a)
                } else {
                    q[1].constant_like(-self.a)
                };
                vec![h.clone(), h.clone(), h.clone(), h + own]
            }
        }
    }

    /// Hessian of the kick potential.
    pub fn hess_v(&self, q: &[f64]) -> DMatrix<f64> {
        let d = self.d();
        DMatrix::from_row_slice(d, d, &self.hess_v_generic(q))
    }

    /// `F(z)` over any kick scalar.
    pub fn eval<T: KickScalar>(&self, z: &[T]) -> Vec<T> {
        let d = self.d();
        let (q, p) = z.split_at(d);
        let g = self.grad_v(q);
        let p_new: Vec<T> = p.iter().zip(g).map(|(pi, gi)| pi.clone() - gi).collect();
        let mut out: Vec<T> = q.iter().zip(&p_new).map(|(qi, pi)| qi.clone() + pi.clone()).collect();
        out.extend(p_new);
        out
    }

    /// `DF(z) = [[I - H, I], [-H, I]]`.
    pub fn jac(&self, z: &[f64]) -> DMatrix<f64> {
        let d = self.d();
        let h = self.hess_v(&z[..d]);
        let id = DMatrix::<f64>::identity(d, d);
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&(&id - &h));
        m.view_mut((0, d), (d, d)).copy_from(&id);
        m.view_mut((d, 0), (d, d)).copy_from(&(-&h));
        m.view_mut((d, d), (d, d)).copy_from(&id);
        m
    }

    /// `DF(z)^{-1} = [[I, -I], [H, I - H]]`.
    pub fn jac_inv(&self, z: &[f64]) -> DMatrix<f64> {
        let d = self.d();
        let h = self.hess_v(&z[..d]);
        let id = DMatrix::<f64>::identity(d, d);
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&id);
        m.view_mut((0, d), (d, d)).copy_from(&(-&id));
        m.view_mut((d, 0), (d, d)).copy_from(&h);
        m.view_mut((d, d), (d, d)).copy_from(&(&id - &h));
        m
    }

    /// `F` applied at every grid point of a (lifted) vector series.
    pub fn eval_series(&self, z: &FourierSeries) -> Result<FourierSeries> {
        let n = self.dim();
        let out = z.map_points(n, 1, |p, o| o.copy_from_slice(&self.eval(p)));
        out.check_finite("model evaluation")
            .map_err(|_| Error::ModelDomain(format!("non-finite {} evaluation", self.name())))?;
        Ok(out)
    }

    /// `DF` at every grid point.
    pub fn jac_series(&self, z: &FourierSeries) -> FourierSeries {
        let n = self.dim();
        z.map_points(n, n, |p, o| o.copy_from_slice(&crate::fourier::row_major(&self.jac(p))))
    }

    /// `DF^{-1}` at every grid point.
    pub fn jac_inv_series(&self, z: &FourierSeries) -> FourierSeries {
        let n = self.dim();
        z.map_points(n, n, |p, o| o.copy_from_slice(&crate::fourier::row_major(&self.jac_inv(p))))
    }

    /// Reduces the angle coordinates of `z` to `[0, 1)`.
    pub fn reduce(&self, z: &mut [f64]) {
        for s in self.angle_slots() {
            z[s] = z[s].rem_euclid(1.0);
        }
    }
}

/// Integer `l x l` matrix giving how the embedding winds around the angles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindingMatrix {
    l: usize,
    entries: Vec<i64>,
}

impl WindingMatrix {
    pub fn new(l: usize, entries: Vec<i64>) -> Result<Self> {
        if entries.len() != l * l {
            return Err(Error::Shape(format!("winding matrix needs {} entries", l * l)));
        }
        Ok(WindingMatrix { l, entries })
    }

    pub fn identity(l: usize) -> Self {
        let mut e = vec![0; l * l];
        for i in 0..l {
            e[i * l + i] = 1;
        }
        WindingMatrix { l, entries: e }
    }

    pub fn zero(l: usize) -> Self {
        WindingMatrix { l, entries: vec![0; l * l] }
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.l + j]
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn rank(&self) -> usize {
        let m = DMatrix::from_fn(self.l, self.l, |i, j| self.get(i, j) as f64);
        m.rank(1e-9)
    }

    /// `I theta`.
    pub fn apply(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.l)
            .map(|i| (0..self.l).map(|j| self.get(i, j) as f64 * theta[j]).sum())
            .collect()
    }

    /// Solves `I^T sigma = v` in the least-squares sense; used to translate
    /// the embedding along its range.
    pub(crate) fn pseudo_solve(&self, v: &[f64]) -> Vec<f64> {
        let m = DMatrix::from_fn(self.l, self.l, |i, j| self.get(i, j) as f64);
        let rhs = nalgebra::DVector::from_column_slice(v);
        let svd = m.svd(true, true);
        svd.solve(&rhs, 1e-9).map(|x| x.as_slice().to_vec()).unwrap_or_else(|_| vec![0.0; self.l])
    }
}

/// The true embedding `K(theta) = K~(theta) + (I theta in the angle slots)`
/// built from its periodic part.
#[derive(Clone, Debug)]
pub struct Lift<'a> {
    pub periodic: &'a FourierSeries,
    pub winding: &'a WindingMatrix,
    pub angle_slots: &'a [usize],
}

pub fn lift_normalize<'a>(
    periodic: &'a FourierSeries,
    winding: &'a WindingMatrix,
    angle_slots: &'a [usize],
) -> Lift<'a> {
    Lift { periodic, winding, angle_slots }
}

impl Lift<'_> {
    /// `K(theta)` at an arbitrary point.
    pub fn eval(&self, theta: &[f64]) -> Vec<f64> {
        let mut z = self.periodic.eval_at(theta);
        self.add_secular(&mut z, theta);
        z
    }

    fn add_secular(&self, z: &mut [f64], theta: &[f64]) {
        let it = self.winding.apply(theta);
        for (a, &s) in self.angle_slots.iter().enumerate() {
            z[s] += it[a];
        }
    }

    /// Grid values of `K(theta + shift)`: periodic part rotated, secular part
    /// evaluated exactly. The result is not periodic and must not be
    /// transformed.
    pub fn grid_values(&self, shift: &[f64]) -> FourierSeries {
        let p = if shift.iter().all(|&s| s == 0.0) { self.periodic.clone() } else { self.periodic.rotate(shift) };
        let grid = p.grid().clone();
        let n = grid.len();
        let mut v = p.values().to_vec();
        for j in 0..n {
            let th: Vec<f64> = grid.theta(j).iter().zip(shift).map(|(t, s)| t + s).collect();
            let it = self.winding.apply(&th);
            for (a, &s) in self.angle_slots.iter().enumerate() {
                v[s * n + j] += it[a];
            }
        }
        FourierSeries::from_values(&grid, p.rows(), 1, v).expect("lift shape")
    }

    /// `DK = DK~ + (0, I)`.
    pub fn jacobian(&self) -> FourierSeries {
        let dk = self.periodic.jacobian();
        let l = self.winding.l();
        let mut add = vec![0.0; dk.dim_range()];
        for (a, &s) in self.angle_slots.iter().enumerate() {
            for j in 0..l {
                add[s * l + j] = self.winding.get(a, j) as f64;
            }
        }
        dk.add_constant(&add)
    }
}

/// `sup_theta |DK^T J(K)^{-1} DK|` (max entry), zero on invariant tori with
/// irrational rotation.
pub fn coisotropy_defect(dk: &FourierSeries, structure: &SymplecticStructure) -> f64 {
    let jinv = structure.j_series(dk.grid()).neg();
    dk.transpose().matmul(&jinv).matmul(dk).sup_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn symplectic_defect(m: &SymplecticMapModel, z: &[f64]) -> f64 {
        let j = m.structure().j_at(z);
        let df = m.jac(z);
        (df.transpose() * &j * &df - &j).abs().max()
    }

    #[test]
    fn standard_map_examples() {
        let m = model_standard_map(0.0);
        let z = m.eval(&[0.2, 0.3]);
        assert!((z[0] - 0.5).abs() < 1e-15 && (z[1] - 0.3).abs() < 1e-15);
        for eps in [0.3, 0.9, 1.7] {
            let z = model_standard_map(eps).eval(&[0.0, 0.3]);
            assert!((z[0] - 0.3).abs() < 1e-15 && (z[1] - 0.3).abs() < 1e-15);
        }
        // kick formula written out explicitly
        let eps = 0.7;
        let (q, p) = (0.37, -0.2);
        let z = model_standard_map(eps).eval(&[q, p]);
        let k = eps / (2.0 * PI) * (2.0 * PI * q).sin();
        assert!((z[0] - (q + p + k)).abs() < 1e-15);
        assert!((z[1] - (p + k)).abs() < 1e-15);
    }

    #[test]
    fn standard_map_unit_determinant() {
        let m = model_standard_map(0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let z = random_point(&mut rng, 2);
            assert!((m.jac(&z).determinant() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn symplecticity_and_inverse_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let models = [
            model_standard_map(0.3),
            model_standard_map(1.2),
            model_rotator_pendulum(1.0, 0.1).unwrap(),
            model_rotator_pendulum(2.5, 0.4).unwrap(),
            model_rotator_linear(1.0, 0.1).unwrap(),
        ];
        for m in models {
            for _ in 0..1000 {
                let z = random_point(&mut rng, m.dim());
                assert!(symplectic_defect(&m, &z) <= 1e-12, "{}", m.name());
                let prod = m.jac_inv(&z) * m.jac(&z);
                let id = DMatrix::<f64>::identity(m.dim(), m.dim());
                assert!((prod - id).abs().max() <= 1e-12);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = model_rotator_pendulum(1.3, 0.2).unwrap();
        let h = 1e-6;
        for _ in 0..20 {
            let z = random_point(&mut rng, 4);
            let df = m.jac(&z);
            for c in 0..4 {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[c] += h;
                zm[c] -= h;
                let (fp, fm) = (m.eval(&zp), m.eval(&zm));
                for r in 0..4 {
                    assert!(((fp[r] - fm[r]) / (2.0 * h) - df[(r, c)]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn rotator_product_structure() {
        let m = model_rotator_pendulum(1.0, 0.0).unwrap();
        let w = 0.618;
        for th in [0.0, 0.3, 0.77] {
            let z = m.eval(&[th, 0.0, w, 0.0]);
            assert!((z[0] - (th + w)).abs() < 1e-15);
            assert_eq!(&z[1..], &[0.0, w, 0.0]);
        }
        // rotator part ignores the pendulum state
        let a = m.eval(&[0.1, 0.3, 0.5, -0.2]);
        let b = m.eval(&[0.1, -0.4, 0.5, 0.7]);
        assert_eq!((a[0], a[2]), (b[0], b[2]));
    }

    #[test]
    fn pendulum_fixed_point_is_hyperbolic() {
        let a = 1.0;
        let m = model_rotator_pendulum(a, 0.0).unwrap();
        let df = m.jac(&[0.0, 0.0, 0.0, 0.0]);
        // (q2, p2) block
        let b = DMatrix::from_row_slice(2, 2, &[df[(1, 1)], df[(1, 3)], df[(3, 1)], df[(3, 3)]]);
        let tr = b.trace();
        let det = b.determinant();
        let mu = (tr + (tr * tr - 4.0 * det).sqrt()) / 2.0;
        assert!((det - 1.0).abs() < 1e-15);
        assert!((mu - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!(model_rotator_pendulum(0.0, 0.1).is_err());
        assert!(model_rotator_pendulum(-1.0, 0.1).is_err());
    }

    #[test]
    fn structure_is_skew_and_almost_complex() {
        let s = SymplecticStructure::standard(2);
        let j = s.j_at(&[]);
        assert!((j.transpose() + &j).abs().max() < 1e-15);
        let id = DMatrix::<f64>::identity(4, 4);
        assert!((&j * &j + id).abs().max() < 1e-15);
        assert!(s.almost_complex);
    }

    #[test]
    fn lift_examples() {
        let g = Grid::circle(16).unwrap();
        let zero = FourierSeries::zeros(&g, 2, 1);
        let id = WindingMatrix::identity(1);
        let lift = lift_normalize(&zero, &id, &[0]);
        assert_eq!(lift.eval(&[0.3]), vec![0.3, 0.0]);
        let dk = lift.jacobian();
        assert!(dk.distance(&FourierSeries::constant(&g, 2, 1, &[1.0, 0.0])) < 1e-15);
        let none = WindingMatrix::zero(1);
        let l0 = lift_normalize(&zero, &none, &[0]);
        assert_eq!(l0.eval(&[0.3]), vec![0.0, 0.0]);
        assert_eq!(none.rank(), 0);
        assert_eq!(id.rank(), 1);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let coef: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let k = FourierSeries::vector_fn(&g, 2, |t, o| {
            o[0] = coef[0] * (2.0 * PI * t[0]).sin() + coef[1];
            o[1] = coef[2] * (2.0 * PI * t[0]).cos() + coef[3] * (4.0 * PI * t[0]).sin();
        });
        let lift = lift_normalize(&k, &id, &[0]);
        for th in [0.1, 0.45, 0.8] {
            let a = lift.eval(&[th]);
            let b = lift.eval(&[th + 1.0]);
            assert!((b[0] - a[0] - 1.0).abs() < 1e-13);
            assert!((b[1] - a[1]).abs() < 1e-13);
        }
        let gv = lift.grid_values(&[0.0]);
        for j in 0..16 {
            let th = g.theta(j)[0];
            assert!((gv.values()[j] - th - k.values()[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn coisotropy_examples() {
        let g = Grid::circle(32).unwrap();
        let s = SymplecticStructure::standard(1);
        let dk = FourierSeries::constant(&g, 2, 1, &[1.0, 0.0]);
        assert!(coisotropy_defect(&dk, &s) < 1e-15);
        let s2 = SymplecticStructure::standard(2);
        // l = 2 embedding in R^4 that is not isotropic
        let g2 = Grid::new(&[8, 8]).unwrap();
        let dk2 = FourierSeries::constant(&g2, 4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0]);
        let d1 = coisotropy_defect(&dk2, &s2);
        assert!(d1 > 0.1);
        let d2 = coisotropy_defect(&dk2.scale(2.0), &s2);
        assert!((d2 - 4.0 * d1).abs() < 1e-14);
    }
}
