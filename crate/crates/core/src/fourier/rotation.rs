use crate::error::{Error, Result};

/// Golden mean `(sqrt(5) - 1) / 2` to 32 digits.
pub const GOLDEN: &str = "0.61803398874989484820458683436564";
/// `sqrt(2) - 1` to 32 digits.
pub const SQRT2: &str = "0.41421356237309504880168872420970";

/// A frequency vector `omega` with the constants `(nu, tau)` of a Diophantine
/// bound `|omega . k - n|^{-1} <= nu |k|^tau`.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationVector {
    pub omega: Vec<f64>,
    pub diophantine_nu: f64,
    pub diophantine_tau: f64,
}

/// Outcome of an exhaustive Diophantine scan.
#[derive(Clone, Debug, PartialEq)]
pub struct DiophantineReport {
    pub k_max: usize,
    /// Largest `|omega . k - n|^{-1} / |k|^tau` seen (infinite on resonance).
    pub worst_ratio: f64,
    pub worst_k: Vec<i64>,
    pub pass: bool,
}

impl RotationVector {
    pub fn new(omega: Vec<f64>, nu: f64, tau: f64) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::Parameter("empty frequency vector".into()));
        }
        if omega.iter().any(|w| !w.is_finite() || *w < 0.0 || *w >= 1.0) {
            return Err(Error::Parameter(format!("frequency components must lie in [0,1): {omega:?}")));
        }
        if !(nu > 0.0 && tau > 0.0) {
            return Err(Error::Parameter("Diophantine constants must be positive".into()));
        }
        Ok(RotationVector { omega, diophantine_nu: nu, diophantine_tau: tau })
    }

    /// Builds `omega` with `tau = l` and `nu` set 1% above the worst ratio of a
    /// scan up to `k_max`.
    pub fn from_scan(omega: Vec<f64>, k_max: usize) -> Result<Self> {
        let tau = omega.len() as f64;
        let mut rv = Self::new(omega, 1.0, tau)?;
        let report = rv.diophantine_witness(k_max);
        if !report.worst_ratio.is_finite() {
            return Err(Error::Parameter(format!(
                "frequency is resonant at k = {:?}",
                report.worst_k
            )));
        }
        rv.diophantine_nu = report.worst_ratio * 1.01;
        Ok(rv)
    }

    pub fn golden() -> Self {
        Self::from_scan(vec![parse_frequency(GOLDEN).unwrap()], 2000).unwrap()
    }

    pub fn sqrt2() -> Self {
        Self::from_scan(vec![parse_frequency(SQRT2).unwrap()], 2000).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn negated(&self) -> Vec<f64> {
        self.omega.iter().map(|w| -w).collect()
    }

    /// Scans every `k != 0` with `|k|_1 <= k_max` (one of each `+-k` pair).
    pub fn diophantine_witness(&self, k_max: usize) -> DiophantineReport {
        let l = self.omega.len();
        let mut worst = 0.0f64;
        let mut worst_k = vec![0i64; l];
        let mut k = vec![0i64; l];
        scan(&mut k, 0, k_max as i64, &mut |k: &[i64]| {
            // keep the first nonzero entry positive
            match k.iter().find(|&&x| x != 0) {
                Some(&x) if x > 0 => {}
                _ => return,
            }
            let dot: f64 = k.iter().zip(&self.omega).map(|(&a, &w)| a as f64 * w).sum();
            let dist = (dot - dot.round()).abs();
            let norm: i64 = k.iter().map(|x| x.abs()).sum();
            let ratio = if dist == 0.0 {
                f64::INFINITY
            } else {
                1.0 / dist / (norm as f64).powf(self.diophantine_tau)
            };
            if ratio > worst {
                worst = ratio;
                worst_k = k.to_vec();
            }
        });
        DiophantineReport {
            k_max,
            worst_ratio: worst,
            worst_k,
            pass: worst <= self.diophantine_nu,
        }
    }

    /// Rejects components equal to `p/q` with `q <= q_max` to working precision.
    pub fn check_irrational(&self, q_max: usize) -> Result<()> {
        for &w in &self.omega {
            for q in 1..=q_max {
                let x = w * q as f64;
                if (x - x.round()).abs() < 1e-12 * q as f64 {
                    return Err(Error::Parameter(format!(
                        "frequency {w} is rational with denominator {q}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn scan(k: &mut [i64], axis: usize, budget: i64, f: &mut dyn FnMut(&[i64])) {
    if axis == k.len() {
        f(k);
        return;
    }
    for v in -budget..=budget {
        k[axis] = v;
        scan(k, axis + 1, budget - v.abs(), f);
    }
    k[axis] = 0;
}

/// Parses a frequency given as a named constant (`golden`, `sqrt2`) or decimal.
pub fn parse_frequency(s: &str) -> Result<f64> {
    let t = s.trim();
    let digits = match t {
        "golden" => GOLDEN,
        "sqrt2" => SQRT2,
        other => other,
    };
    digits
        .parse::<f64>()
        .map_err(|_| Error::Parameter(format!("cannot parse frequency '{s}'")))
}
