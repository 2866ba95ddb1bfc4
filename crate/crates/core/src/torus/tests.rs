use std::f64::consts::PI;

use super::*;
use crate::fourier::Grid;
use crate::geometry::model_standard_map;

fn golden() -> RotationVector {
    RotationVector::golden()
}

fn integrable(n: usize) -> (Grid, TorusEmbedding) {
    let g = Grid::circle(n).unwrap();
    let t = TorusEmbedding::integrable(&model_standard_map(0.0), &g, &golden()).unwrap();
    (g, t)
}

#[test]
fn integrable_torus_is_exact() {
    let (_, t) = integrable(256);
    let e = invariance_residual(&t, &model_standard_map(0.0)).unwrap();
    assert!(e.sup_norm() <= 1e-15);
    let (out, reports) = newton_solve(&t, &model_standard_map(0.0), &TorusOptions::default()).unwrap();
    assert!(reports.is_empty());
    assert!(out.k.distance(&t.k) == 0.0);
}

#[test]
fn shifted_action_gives_constant_residual() {
    let (g, mut t) = integrable(64);
    let w = golden().omega[0];
    t.k = FourierSeries::constant(&g, 2, 1, &[0.0, w + 0.01]);
    let e = invariance_residual(&t, &model_standard_map(0.0)).unwrap();
    let expect = FourierSeries::constant(&g, 2, 1, &[0.01, 0.0]);
    assert!(e.distance(&expect) < 1e-15);
}

#[test]
fn residual_matches_pointwise_oracle() {
    let eps = 0.3;
    let (_, t) = integrable(128);
    let e = invariance_residual(&t, &model_standard_map(eps)).unwrap();
    let w = golden().omega[0];
    // F(theta, w) - (theta + w, w), written out by hand
    let mut sup: f64 = 0.0;
    for j in 0..2048 {
        let th = j as f64 / 2048.0;
        let kick = eps / (2.0 * PI) * (2.0 * PI * th).sin();
        let eq = th + w + kick - (th + w);
        let ep = w + kick - w;
        sup = sup.max(eq.abs()).max(ep.abs());
    }
    // the sup of the kick is attained at theta = 1/4, a grid point of both
    assert!((e.sup_norm() - sup).abs() <= 1e-13);
    assert!((sup - eps / (2.0 * PI)).abs() < 1e-15);
}

#[test]
fn frame_at_the_integrable_torus() {
    let (g, t) = integrable(32);
    let f = build_frame(&t, &model_standard_map(0.0), FrameInverse::Shortcut, true).unwrap();
    let c = |v: &[f64]| FourierSeries::constant(&g, v.len(), 1, v);
    assert!(f.alpha.distance(&c(&[1.0, 0.0])) < 1e-15);
    assert!(f.n.distance(&FourierSeries::constant(&g, 1, 1, &[1.0])) < 1e-15);
    assert!(f.beta.distance(&c(&[1.0, 0.0])) < 1e-15);
    assert!(f.gamma.distance(&c(&[0.0, -1.0])) < 1e-15);
    let a = f.a.values();
    assert!(a.iter().all(|&x| (x + 1.0).abs() < 1e-15));
    assert!(reducibility_defect(&f) < 1e-15);
    let exact = build_frame(&t, &model_standard_map(0.0), FrameInverse::Exact, false).unwrap();
    assert!(exact.p.distance(&f.p) < 1e-15);
}

#[test]
fn zero_residual_step_changes_nothing() {
    let (_, t) = integrable(64);
    let mut opts = TorusOptions::default();
    for ct in [false, true] {
        opts.use_counterterm = ct;
        let (next, rep) = newton_center_step(&t, &model_standard_map(0.0), &opts).unwrap();
        assert!(next.k.distance(&t.k) < 1e-15);
        assert_eq!(next.lambda, vec![0.0]);
        assert!(rep.residual_after < 1e-15);
    }
}

#[test]
fn one_step_is_quadratic_at_zero_coupling() {
    let (g, mut t) = integrable(64);
    let w = golden().omega[0];
    let c = 1e-3;
    t.k = FourierSeries::constant(&g, 2, 1, &[0.0, w + c]);
    let (_, rep) = newton_center_step(&t, &model_standard_map(0.0), &TorusOptions::default()).unwrap();
    assert!((rep.residual_before - c).abs() < 1e-15);
    assert!(rep.residual_after <= 1e-5);
}

#[test]
fn converges_quadratically_at_moderate_coupling() {
    let (_, t) = integrable(1024);
    let model = model_standard_map(0.3);
    let (sol, reports) = newton_solve(&t, &model, &TorusOptions::default()).unwrap();
    assert!(reports.len() <= 8, "{} steps", reports.len());
    let res: Vec<f64> = reports.iter().map(|r| r.residual_after).collect();
    assert!(*res.last().unwrap() <= 1e-12);
    // fitted constant of |E_{n+1}| <= C |E_n|^2 over the pre-roundoff steps
    for r in &reports {
        if r.residual_after > 1e-13 {
            let c = r.residual_after / (r.residual_before * r.residual_before);
            assert!(c < 1e3, "contraction constant {c}");
        }
    }
    assert!(invariance_residual(&sol, &model).unwrap().sup_norm() <= 1e-12);
}

#[test]
fn counterterm_vanishes_and_matches_plain_solution() {
    let (_, t) = integrable(512);
    let model = model_standard_map(0.3);
    let plain = newton_solve(&t, &model, &TorusOptions::default()).unwrap().0;
    let opts = TorusOptions { use_counterterm: true, ..TorusOptions::default() };
    let (ct, _) = newton_solve(&t, &model, &opts).unwrap();
    assert!(ct.lambda[0].abs() <= 1e-10);
    assert!(ct.k.distance(&plain.k) < 1e-9);
}

#[test]
fn shortcut_and_exact_inverse_agree() {
    let (_, t) = integrable(512);
    let model = model_standard_map(0.3);
    let a = newton_solve(&t, &model, &TorusOptions::default()).unwrap().0;
    let opts = TorusOptions { frame_inverse: FrameInverse::Exact, ..TorusOptions::default() };
    let b = newton_solve(&t, &model, &opts).unwrap().0;
    assert!(a.k.distance(&b.k) <= 1e-10);
}

#[test]
fn translation_family_and_normalization() {
    let (_, t) = integrable(512);
    let model = model_standard_map(0.25);
    let sol = newton_solve(&t, &model, &TorusOptions::default()).unwrap().0;
    for sigma in [0.1, 0.25] {
        let moved = sol.translated(&[sigma]);
        assert!(invariance_residual(&moved, &model).unwrap().sup_norm() <= 1e-12);
        assert!(moved.k.distance(&sol.k) > 1e-3);
        assert!(moved.normalized().k.distance(&sol.k) <= 1e-10);
    }
}

#[test]
fn beyond_breakdown_does_not_converge() {
    let (_, t) = integrable(256);
    let opts = TorusOptions { max_grid: 4096, ..TorusOptions::default() };
    match newton_solve(&t, &model_standard_map(2.0), &opts) {
        Err(Error::NoConvergence { trace, .. }) => assert!(!trace.is_empty()),
        other => panic!("expected no convergence, got {:?}", other.map(|x| x.1.len())),
    }
}

#[test]
fn continuation_schedule() {
    let (_, t) = integrable(256);
    let model = model_standard_map(0.0);
    let schedule = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
    let out = continuation(&model, &t, &schedule, &TorusOptions::default(), 1e-3).unwrap();
    assert_eq!(out.len(), 6);
    for s in &out {
        let r = invariance_residual(&s.torus, &model.with_epsilon(s.epsilon)).unwrap().sup_norm();
        assert!(r <= 1e-12, "eps {} residual {r}", s.epsilon);
    }
    let single = continuation(&model, &t, &[0.0], &TorusOptions::default(), 1e-3).unwrap();
    assert_eq!(single.len(), 1);
    assert!(single[0].reports.is_empty());
    assert!(continuation(&model, &t, &[0.0, 0.2, 0.1], &TorusOptions::default(), 1e-3).is_err());
}

#[test]
fn torus_file_roundtrip() {
    let model = model_standard_map(0.2);
    let (_, t) = integrable(64);
    let (mut t, _) = newton_solve(&t, &model, &TorusOptions { auto_refine: false, ..TorusOptions::default() }).unwrap();
    t.lambda = vec![1.5e-3];
    let mut buf = Vec::new();
    write_torus(&mut buf, &t, &model).unwrap();
    let (back, m) = read_torus(&mut buf.as_slice()).unwrap();
    assert_eq!(m, model);
    assert_eq!(back.lambda, t.lambda);
    assert_eq!(back.omega, t.omega);
    assert_eq!(back.winding, t.winding);
    assert!(back.k.distance(&t.k) < 1e-15);

    // writing twice gives the same bytes
    let mut again = Vec::new();
    write_torus(&mut again, &back, &m).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn torus_file_rejects_missing_metadata() {
    let (_, t) = integrable(16);
    let block = crate::fourier::FtsBlock::new(t.k.to_coeffs().unwrap(), t.omega.omega.clone()).with_meta("role", "torus");
    let mut buf = Vec::new();
    crate::fourier::write_fts(&mut buf, &block).unwrap();
    assert!(matches!(read_torus(&mut buf.as_slice()), Err(Error::Format(_))));
    assert!(matches!(read_torus(&mut &b"FTS2"[..]), Err(Error::Format(_))));
}

#[test]
fn integrable_twist_is_one() {
    let (_, t) = integrable(64);
    let frame = build_frame(&t, &model_standard_map(0.0), FrameInverse::Shortcut, false).unwrap();
    assert!((frame.twist() - 1.0).abs() < 1e-12);
}
