use num_complex::Complex64;

use super::series::FourierSeries;
use crate::error::{Error, Result};

/// The difference operator a cohomology equation inverts. Only the map case
/// `phi - phi(. + omega) = eta` exists.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CohomologyKind {
    MapDifference,
}

/// Thresholds for the constant-coefficient solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CohomologyOptions {
    pub divisor_floor: f64,
    pub zero_average_tol: f64,
}

impl Default for CohomologyOptions {
    fn default() -> Self {
        CohomologyOptions { divisor_floor: 1e-9, zero_average_tol: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct CohomologySolution {
    pub phi: FourierSeries,
    /// Smallest divisor met among the modes of `eta`.
    pub min_divisor: f64,
    /// `sup|eta| / min_divisor`, a bound on how much the solve can amplify
    /// round-off in `eta`.
    pub amplification: f64,
}

/// Solves `phi - phi(. + omega) = eta` with `avg(phi) = 0`.
pub fn solve_cohomology_constant(
    eta: &FourierSeries,
    omega: &[f64],
    opts: &CohomologyOptions,
) -> Result<CohomologySolution> {
    eta.check_finite("cohomology right-hand side")?;
    let avg = eta.average();
    if avg.iter().any(|a| a.abs() > opts.zero_average_tol) {
        return Err(Error::Obstruction { average: avg });
    }
    solve_scaled(eta, omega, Complex64::new(1.0, 0.0), opts.divisor_floor, true)
}

/// Solves `nu * w - w(. + omega) = eta`. Without the unit multiplier there is
/// no obstruction and the average is determined.
pub fn solve_cohomology_scaled(
    eta: &FourierSeries,
    omega: &[f64],
    nu: f64,
    divisor_floor: f64,
) -> Result<CohomologySolution> {
    eta.check_finite("cohomology right-hand side")?;
    solve_scaled(eta, omega, Complex64::new(nu, 0.0), divisor_floor, false)
}

fn solve_scaled(
    eta: &FourierSeries,
    omega: &[f64],
    nu: Complex64,
    divisor_floor: f64,
    drop_zero_mode: bool,
) -> Result<CohomologySolution> {
    let grid = eta.grid();
    let s = grid.spectral_len();
    let m = eta.dim_range();
    let c = eta.coeffs();
    let mut out = vec![Complex64::new(0.0, 0.0); c.len()];
    let mut min_div = f64::INFINITY;
    for i in 0..s {
        if drop_zero_mode && i == 0 {
            continue;
        }
        let k = grid.wavevector(i);
        let div = nu - grid.shift_multiplier(&k, omega);
        let mag = div.norm();
        if mag < divisor_floor {
            return Err(Error::SmallDivisor { k, divisor: mag });
        }
        min_div = min_div.min(mag);
        for comp in 0..m {
            out[comp * s + i] = c[comp * s + i] / div;
        }
    }
    let phi = FourierSeries::raw_coeffs(grid, eta.rows(), eta.cols(), out);
    Ok(CohomologySolution {
        phi,
        min_divisor: min_div,
        amplification: eta.sup_norm() / min_div,
    })
}
