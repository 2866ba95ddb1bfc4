use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

// random real trig polynomial with `terms` harmonics |k| <= band, on l = 1
fn random_trig(rng: &mut ChaCha8Rng, terms: usize, band: i64) -> Vec<(i64, f64, f64)> {
    (0..terms)
        .map(|_| (rng.gen_range(0..=band), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn eval_trig(t: &[(i64, f64, f64)], x: f64) -> f64 {
    t.iter()
        .map(|&(k, a, b)| a * (2.0 * PI * k as f64 * x).cos() + b * (2.0 * PI * k as f64 * x).sin())
        .sum()
}

fn eval_trig_dx(t: &[(i64, f64, f64)], x: f64) -> f64 {
    t.iter()
        .map(|&(k, a, b)| {
            let w = 2.0 * PI * k as f64;
            -a * w * (w * x).sin() + b * w * (w * x).cos()
        })
        .sum()
}

fn series_of(grid: &Grid, t: &[(i64, f64, f64)]) -> FourierSeries {
    let t = t.to_vec();
    FourierSeries::vector_fn(grid, 1, move |th, out| out[0] = eval_trig(&t, th[0]))
}

// quadratic-cost DFT on a 1-d grid
fn direct_dft(values: &[f64], k: i64) -> Complex64 {
    let n = values.len();
    values
        .iter()
        .enumerate()
        .map(|(j, &f)| f * Complex64::from_polar(1.0, -2.0 * PI * (k * j as i64) as f64 / n as f64))
        .sum::<Complex64>()
        / n as f64
}

#[test]
fn grid_rejects_non_power_of_two() {
    assert!(matches!(Grid::new(&[1000]), Err(Error::InvalidGrid(_))));
    assert!(matches!(Grid::new(&[]), Err(Error::InvalidGrid(_))));
    assert!(Grid::new(&[64, 32]).is_ok());
}

#[test]
fn constant_has_only_zero_mode() {
    let g = Grid::circle(16).unwrap();
    let f = FourierSeries::constant(&g, 1, 1, &[1.0]);
    let c = f.coeffs();
    assert!((c[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    assert!(c[1..].iter().all(|z| z.norm() < 1e-15));
}

#[test]
fn cosine_has_half_coefficients() {
    let g = Grid::circle(8).unwrap();
    let f = FourierSeries::vector_fn(&g, 1, |t, o| o[0] = (2.0 * PI * t[0]).cos());
    let c = f.coeffs();
    assert!((c[1] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    for (i, z) in c.iter().enumerate() {
        if i != 1 {
            assert!(z.norm() < 1e-15, "mode {i} = {z}");
        }
    }
}

#[test]
fn coefficients_match_direct_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = Grid::circle(64).unwrap();
    let t = random_trig(&mut rng, 5, 20);
    let f = series_of(&g, &t);
    let c = f.coeffs();
    for k in 0..=32i64 {
        let d = direct_dft(f.values(), k);
        assert!((c[k as usize] - d).norm() < 1e-13, "k={k}: {} vs {d}", c[k as usize]);
    }
}

#[test]
fn two_dimensional_transform_matches_direct_dft() {
    let g = Grid::new(&[8, 16]).unwrap();
    let f = FourierSeries::vector_fn(&g, 1, |t, o| {
        o[0] = 1.5 + (2.0 * PI * (3.0 * t[0] - 2.0 * t[1])).cos() + 0.25 * (2.0 * PI * (t[0] + 5.0 * t[1])).sin()
    });
    let v = f.values();
    for i in 0..g.spectral_len() {
        let k = g.wavevector(i);
        let mut d = Complex64::new(0.0, 0.0);
        for j in 0..g.len() {
            let th = g.theta(j);
            d += v[j] * Complex64::from_polar(1.0, -2.0 * PI * (k[0] as f64 * th[0] + k[1] as f64 * th[1]));
        }
        d /= g.len() as f64;
        assert!((f.coeffs()[i] - d).norm() < 1e-13, "k={k:?}");
    }
    assert!((f.average()[0] - 1.5).abs() < 1e-14);
}

#[test]
fn rotation_identity_and_quarter_shift() {
    let g = Grid::circle(8).unwrap();
    let f = FourierSeries::vector_fn(&g, 1, |t, o| o[0] = (2.0 * PI * t[0]).cos());
    assert!(f.rotate(&[0.0]).distance(&f) < 1e-15);
    let r = f.rotate(&[0.25]);
    let expect = FourierSeries::vector_fn(&g, 1, |t, o| o[0] = -(2.0 * PI * t[0]).sin());
    assert!(r.distance(&expect) < 1e-14);
}

#[test]
fn rotation_matches_pointwise_resampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = Grid::circle(128).unwrap();
    let t = random_trig(&mut rng, 6, 30);
    let w = RotationVector::golden().omega[0];
    let r = series_of(&g, &t).rotate(&[w]);
    for j in 0..g.len() {
        let x = g.theta(j)[0];
        assert!((r.values()[j] - eval_trig(&t, x + w)).abs() < 1e-12);
    }
}

#[test]
fn derivative_examples() {
    let g = Grid::circle(32).unwrap();
    let c = FourierSeries::constant(&g, 1, 1, &[2.5]);
    assert!(c.derivative(0).sup_norm() < 1e-15);
    let f = FourierSeries::vector_fn(&g, 1, |t, o| o[0] = (2.0 * PI * t[0]).cos());
    let d = f.derivative(0);
    let expect = FourierSeries::vector_fn(&g, 1, |t, o| o[0] = -2.0 * PI * (2.0 * PI * t[0]).sin());
    assert!(d.distance(&expect) < 1e-13);
}

#[test]
fn derivative_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = Grid::circle(64).unwrap();
    let t = random_trig(&mut rng, 5, 2);
    let d = series_of(&g, &t).derivative(0);
    let h = 1e-5;
    for j in 0..g.len() {
        let x = g.theta(j)[0];
        let fd = (eval_trig(&t, x + h) - eval_trig(&t, x - h)) / (2.0 * h);
        assert!((d.values()[j] - fd).abs() < 1e-7);
        assert!((d.values()[j] - eval_trig_dx(&t, x)).abs() < 1e-11);
    }
}

#[test]
fn averages() {
    let g = Grid::circle(16).unwrap();
    let f = FourierSeries::vector_fn(&g, 1, |t, o| o[0] = 3.0 + (2.0 * PI * t[0]).cos());
    assert!((f.average()[0] - 3.0).abs() < 1e-15);
    let g2 = Grid::new(&[16, 16]).unwrap();
    let h = FourierSeries::vector_fn(&g2, 1, |t, o| o[0] = (2.0 * PI * t[0]).sin() * (2.0 * PI * t[1]).cos());
    assert!(h.average()[0].abs() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = series_of(&Grid::circle(64).unwrap(), &random_trig(&mut rng, 5, 10));
    let from_grid = p.values().iter().sum::<f64>() / 64.0;
    assert!((p.to_coeffs().unwrap().average()[0] - from_grid).abs() < 1e-14);
    assert!((direct_dft(p.values(), 0).re - from_grid).abs() < 1e-14);
}

#[test]
fn non_finite_values_are_rejected() {
    let g = Grid::circle(8).unwrap();
    let mut v = vec![0.0; 8];
    v[3] = f64::NAN;
    let f = FourierSeries::from_values(&g, 1, 1, v).unwrap();
    assert!(matches!(f.to_coeffs(), Err(Error::NumericCorruption { .. })));
}

#[test]
fn cohomology_zero_and_obstruction() {
    let g = Grid::circle(32).unwrap();
    let w = RotationVector::golden().omega;
    let opts = CohomologyOptions::default();
    let z = FourierSeries::zeros(&g, 1, 1);
    assert_eq!(solve_cohomology_constant(&z, &w, &opts).unwrap().phi.sup_norm(), 0.0);
    let c = FourierSeries::constant(&g, 1, 1, &[0.1]);
    match solve_cohomology_constant(&c, &w, &opts) {
        Err(Error::Obstruction { average }) => assert!((average[0] - 0.1).abs() < 1e-15),
        other => panic!("expected obstruction, got {other:?}"),
    }
}

#[test]
fn cohomology_single_harmonic_closed_form() {
    let g = Grid::circle(32).unwrap();
    let w = (5f64.sqrt() - 1.0) / 2.0;
    let eta = FourierSeries::vector_fn(&g, 1, |t, o| o[0] = (2.0 * PI * t[0]).cos());
    let phi = solve_cohomology_constant(&eta, &[w], &CohomologyOptions::default()).unwrap().phi;
    let expect = Complex64::new(0.5, 0.0) / (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, 2.0 * PI * w));
    assert!((phi.coeffs()[1] - expect).norm() < 1e-15);
    let res = phi.sub(&phi.rotate(&[w])).sub(&eta);
    assert!(res.sup_norm() <= 1e-13);
}

#[test]
fn cohomology_small_divisor_names_mode() {
    let g = Grid::circle(16).unwrap();
    let eta = FourierSeries::vector_fn(&g, 1, |t, o| o[0] = (2.0 * PI * 3.0 * t[0]).cos());
    match solve_cohomology_constant(&eta, &[0.25], &CohomologyOptions::default()) {
        Err(Error::SmallDivisor { k, divisor }) => {
            assert_eq!(k, vec![4]);
            assert!(divisor < 1e-9);
        }
        other => panic!("expected small divisor, got {other:?}"),
    }
}

#[test]
fn scaled_cohomology_matches_constant_formula() {
    let g = Grid::circle(32).unwrap();
    let w = RotationVector::golden().omega;
    let eta = FourierSeries::vector_fn(&g, 1, |t, o| o[0] = 0.3 + (2.0 * PI * t[0]).cos());
    let sol = solve_cohomology_scaled(&eta, &w, 2.0, 1e-9).unwrap().phi;
    let res = sol.scale(2.0).sub(&sol.rotate(&w)).sub(&eta);
    assert!(res.sup_norm() < 1e-14);
}

#[test]
fn golden_witness_is_stable() {
    let rv = RotationVector::new(vec![(5f64.sqrt() - 1.0) / 2.0], 3.0, 1.0).unwrap();
    let a = rv.diophantine_witness(1000);
    let b = rv.diophantine_witness(10_000);
    assert!(a.worst_ratio.is_finite());
    assert!((a.worst_ratio - b.worst_ratio).abs() < 1e-9);
    // |omega - 1|^{-1} = 1 / (1 - omega) = 1 + omega + 1 = phi^2
    let phi2 = (3.0 + 5f64.sqrt()) / 2.0;
    assert!((b.worst_ratio - phi2).abs() < 1e-9);
    assert_eq!(b.worst_k, vec![1]);
    assert!(b.pass);
}

#[test]
fn rational_frequency_fails_witness() {
    let rv = RotationVector::new(vec![1.0 / 3.0], 1e6, 2.0).unwrap();
    let r = rv.diophantine_witness(10);
    assert!(!r.pass);
    assert!(r.worst_ratio.is_infinite());
    assert_eq!(r.worst_k, vec![3]);
    assert!(rv.check_irrational(16).is_err());
}

#[test]
fn sqrt2_passes_above_scan_constant() {
    let w = parse_frequency("sqrt2").unwrap();
    let scanned = RotationVector::new(vec![w], 1.0, 1.0).unwrap().diophantine_witness(10_000).worst_ratio;
    // continued fraction [0; 2, 2, 2, ...]: worst at k = 2 where |2w - 1| = 3 - 2 sqrt2
    let expect = 1.0 / (3.0 - 2.0 * 2f64.sqrt()) / 2.0;
    assert!((scanned - expect).abs() < 1e-9);
    let rv = RotationVector::new(vec![w], scanned * 1.001, 1.0).unwrap();
    assert!(rv.diophantine_witness(10_000).pass);
}

#[test]
fn fts_roundtrip_concatenated() {
    let g = Grid::new(&[8, 16]).unwrap();
    let a = FourierSeries::from_fn(&g, 2, 2, |t, o| {
        o[0] = t[0];
        o[1] = (2.0 * PI * t[1]).sin();
        o[2] = 1.0;
        o[3] = t[0] * t[1];
    });
    let b = FourierSeries::vector_fn(&g, 3, |t, o| o.iter_mut().enumerate().for_each(|(i, x)| *x = i as f64 + t[1]));
    let mut buf = Vec::new();
    write_fts(&mut buf, &FtsBlock::new(a.clone(), vec![0.1, 0.2]).with_meta("role", "pi_s")).unwrap();
    write_fts(&mut buf, &FtsBlock::new(b.clone(), vec![0.1, 0.2]).with_meta("role", "pi_cu")).unwrap();
    let blocks = read_all_fts(&mut buf.as_slice()).unwrap();
    assert_eq!(blocks.len(), 2);
    assert_eq!(blocks[0].meta["role"], "pi_s");
    assert_eq!(blocks[0].series.shape(), (2, 2));
    assert_eq!(blocks[1].series.shape(), (3, 1));
    assert_eq!(blocks[0].omega, vec![0.1, 0.2]);
    assert_eq!(blocks[0].series.coeffs(), a.coeffs());
    assert!(blocks[1].series.distance(&b) < 1e-14);
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(matches!(read_fts(&mut bad.as_slice()), Err(Error::Format(_))));
}

#[test]
fn resample_refines_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let t = random_trig(&mut rng, 4, 7);
    let g = Grid::circle(16).unwrap();
    let f = series_of(&g, &t);
    let fine = f.resample(&Grid::circle(64).unwrap()).unwrap();
    for j in 0..64 {
        assert!((fine.values()[j] - eval_trig(&t, j as f64 / 64.0)).abs() < 1e-13);
    }
    assert!(fine.resample(&g).unwrap().distance(&f) < 1e-13);
    let x = 0.123;
    assert!((f.eval_at(&[x])[0] - eval_trig(&t, x)).abs() < 1e-13);
}

#[test]
fn tail_fraction_sees_high_modes() {
    let g = Grid::circle(32).unwrap();
    let low = FourierSeries::vector_fn(&g, 1, |t, o| o[0] = (2.0 * PI * t[0]).cos());
    assert!(low.tail_fraction() < 1e-28);
    let high = FourierSeries::vector_fn(&g, 1, |t, o| o[0] = (2.0 * PI * t[0]).cos() + (2.0 * PI * 12.0 * t[0]).cos());
    assert!((high.tail_fraction() - 0.5).abs() < 1e-12);
}

#[test]
fn pointwise_matrix_algebra() {
    let g = Grid::circle(16).unwrap();
    let a = FourierSeries::from_fn(&g, 2, 2, |t, o| {
        let c = (2.0 * PI * t[0]).cos();
        o.copy_from_slice(&[2.0 + c, 1.0, 0.5 * c, 3.0]);
    });
    let inv = a.try_inverse().unwrap();
    let id = FourierSeries::identity(&g, 2);
    assert!(a.matmul(&inv).distance(&id) < 1e-14);
    assert!(a.transpose().transpose().distance(&a) < 1e-15);
    let h = FourierSeries::hstack(&[&a.column(0), &a.column(1)]);
    assert!(h.distance(&a) < 1e-15);
    let v = FourierSeries::vstack(&[&a.rows_range(0, 1), &a.rows_range(1, 1)]);
    assert!(v.distance(&a) < 1e-15);
    let sing = FourierSeries::zeros(&g, 2, 2);
    assert!(sing.try_inverse().is_none());
}

fn band_limited() -> impl Strategy<Value = Vec<(i64, f64, f64)>> {
    prop::collection::vec((0i64..16, -1.0f64..1.0, -1.0f64..1.0), 1..6)
}

proptest! {
    #[test]
    fn roundtrip_grid_coeffs_grid(t in band_limited()) {
        let g = Grid::circle(64).unwrap();
        let f = series_of(&g, &t);
        let back = FourierSeries::from_coeffs(&g, 1, 1, f.coeffs().to_vec()).unwrap();
        let scale = f.sup_norm().max(1e-300);
        prop_assert!(back.distance(&f) <= 1e-13 * scale.max(1.0));
    }

    #[test]
    fn rotate_then_unrotate(t in band_limited(), w in 0.0f64..1.0) {
        let g = Grid::circle(64).unwrap();
        let f = series_of(&g, &t);
        let back = f.rotate(&[w]).rotate(&[-w]);
        prop_assert!(back.distance(&f) <= 1e-13 * f.sup_norm().max(1.0));
        prop_assert!((f.rotate(&[w]).coeffs().iter().map(|z| z.norm()).sum::<f64>()
            - f.coeffs().iter().map(|z| z.norm()).sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn derivative_commutes_with_rotate(t in band_limited(), w in 0.0f64..1.0) {
        let g = Grid::circle(64).unwrap();
        let f = series_of(&g, &t);
        let a = f.rotate(&[w]).derivative(0);
        let b = f.derivative(0).rotate(&[w]);
        prop_assert!(a.distance(&b) <= 1e-12 * a.sup_norm().max(1.0));
    }

    #[test]
    fn cohomology_residual_is_small(t in prop::collection::vec((1i64..16, -1.0f64..1.0, -1.0f64..1.0), 1..6)) {
        let g = Grid::circle(64).unwrap();
        let w = RotationVector::golden().omega;
        let eta = series_of(&g, &t);
        let phi = solve_cohomology_constant(&eta, &w, &CohomologyOptions::default()).unwrap().phi;
        let res = phi.sub(&phi.rotate(&w)).sub(&eta);
        prop_assert!(res.sup_norm() <= 1e-10 * eta.sup_norm());
        prop_assert!(phi.average()[0].abs() < 1e-15);
    }
}
