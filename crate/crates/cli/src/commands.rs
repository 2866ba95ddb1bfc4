use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use kamtori::fourier::{CohomologyOptions, Grid};
use kamtori::geometry::SymplecticMapModel;
use kamtori::splitting::{
    cold_start, estimate_rates, newton_whiskered_solve, read_splitting, refine_splitting, write_splitting, Cocycle,
    InvariantSplitting, SplittingOptions, WhiskeredOptions,
};
use kamtori::torus::{
    build_frame, continuation, invariance_residual, newton_solve, read_torus, torus_coisotropy, write_torus,
    TorusEmbedding, TorusOptions,
};
use kamtori::whisker::{
    balanced_rho, conjugacy_error, fit_domain, newton_full_solve, order_by_order, read_ftt, solve_bundle_and_multiplier,
    whisker_residual, write_ftt, FttHeader, Whisker, WhiskerOptions, FTT_MAGIC,
};
use serde_json::{json, Map, Value};

use crate::config::{ConfigError, RunConfig};
use crate::Command;

/// 3 for configuration problems, 2 when a solver gives up, 1 otherwise.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return 3;
    }
    match e.downcast_ref::<kamtori::Error>() {
        Some(kamtori::Error::Parameter(_) | kamtori::Error::InvalidGrid(_)) => 3,
        Some(kamtori::Error::Format(_) | kamtori::Error::Io(_)) => 1,
        Some(_) => 2,
        None => 1,
    }
}

pub fn run(cmd: &Command, cfg: &RunConfig) -> Result<u8> {
    match cmd {
        Command::SolveTorus => solve_torus(cfg),
        Command::SolveSplitting => solve_splitting(cfg),
        Command::SolveWhisker => solve_whisker(cfg),
        Command::Continue => run_continuation(cfg),
        Command::Export { file } => export(file, cfg),
        Command::Diagnose { file } => diagnose(file, cfg),
    }
}

/// Runs `body`, then writes the JSON summary whether it succeeded or not.
fn summarized(cfg: &RunConfig, default: Option<PathBuf>, command: &str, body: impl FnOnce(&mut Map<String, Value>) -> Result<u8>) -> Result<u8> {
    let start = Instant::now();
    let mut s = Map::new();
    s.insert("command".into(), json!(command));
    let result = body(&mut s);
    s.insert("seconds".into(), json!(start.elapsed().as_secs_f64()));
    match &result {
        Ok(code) => {
            s.insert("status".into(), json!(if *code == 0 { "ok" } else { "checks_failed" }));
            s.insert("exit_code".into(), json!(code));
        }
        Err(e) => {
            s.insert("status".into(), json!("failed"));
            s.insert("error".into(), json!(format!("{e:#}")));
            s.insert("exit_code".into(), json!(exit_code(e)));
        }
    }
    if let Some(path) = cfg.summary.clone().or(default) {
        let text = serde_json::to_string_pretty(&Value::Object(s))?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    result
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn load_torus(path: &Path) -> Result<(TorusEmbedding, SymplecticMapModel)> {
    read_torus(&mut open(path)?).with_context(|| format!("reading torus {}", path.display()))
}

fn save_torus(path: &Path, torus: &TorusEmbedding, model: &SymplecticMapModel) -> Result<()> {
    let mut w = create(path)?;
    write_torus(&mut w, torus, model)?;
    w.flush()?;
    Ok(())
}

fn torus_options(cfg: &RunConfig) -> TorusOptions {
    TorusOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        lambda_tol: cfg.lambda_tol,
        twist_floor: cfg.twist_floor,
        use_counterterm: cfg.counterterm,
        frame_inverse: cfg.frame,
        cohomology: cohomology_options(cfg),
        ..TorusOptions::default()
    }
}

fn cohomology_options(cfg: &RunConfig) -> CohomologyOptions {
    CohomologyOptions { divisor_floor: cfg.divisor_floor, ..CohomologyOptions::default() }
}

fn splitting_options(cfg: &RunConfig) -> SplittingOptions {
    SplittingOptions { tol: cfg.tol, ..SplittingOptions::default() }
}

fn model_json(model: &SymplecticMapModel) -> Value {
    json!({ "name": model.name(), "epsilon": model.epsilon, "a": model.a })
}

fn hyperbolic_rank(model: &SymplecticMapModel) -> usize {
    model.d() - model.l()
}

/// One line of the torus convergence log.
struct LogRow {
    residual: f64,
    lambda: f64,
    twist: f64,
    cond_m: f64,
    seconds: f64,
}

struct TorusRun {
    torus: TorusEmbedding,
    rows: Vec<LogRow>,
    divisor_margin: f64,
}

// plain Newton for twist maps, the whiskered variant when the model has
// hyperbolic directions
fn solve_torus_from(guess: &TorusEmbedding, model: &SymplecticMapModel, cfg: &RunConfig) -> Result<TorusRun> {
    let opts = torus_options(cfg);
    let rank = hyperbolic_rank(model);
    if rank == 0 {
        let (torus, reports) = newton_solve(guess, model, &opts)?;
        let rows = reports
            .iter()
            .map(|r| LogRow {
                residual: r.residual_after,
                lambda: r.lambda_after,
                twist: r.twist,
                cond_m: r.m_inv_norm,
                seconds: r.seconds,
            })
            .collect();
        let divisor_margin = reports.iter().map(|r| r.divisor_margin).fold(f64::INFINITY, f64::min);
        return Ok(TorusRun { torus, rows, divisor_margin });
    }
    let split = cold_start(&Cocycle::from_torus(guess, model), rank, rank)?;
    let opts = WhiskeredOptions { torus: opts, splitting: splitting_options(cfg) };
    let (torus, _, reports) = newton_whiskered_solve(guess, &split, model, &opts)?;
    let rows = reports
        .iter()
        .map(|r| LogRow {
            residual: r.residual_after,
            lambda: r.lambda_after,
            twist: r.twist,
            cond_m: r.m_inv_norm,
            seconds: r.seconds,
        })
        .collect();
    let divisor_margin = reports.iter().map(|r| r.divisor_margin).fold(f64::INFINITY, f64::min);
    Ok(TorusRun { torus, rows, divisor_margin })
}

fn initial_torus(cfg: &RunConfig, model: &SymplecticMapModel) -> Result<TorusEmbedding> {
    match &cfg.torus {
        Some(path) => Ok(load_torus(path)?.0),
        None => Ok(TorusEmbedding::integrable(model, &Grid::circle(cfg.n)?, &cfg.rotation()?)?),
    }
}

fn frame_twist(torus: &TorusEmbedding, model: &SymplecticMapModel, cfg: &RunConfig) -> Result<f64> {
    Ok(build_frame(torus, model, cfg.frame, false)?.twist())
}

fn solve_torus(cfg: &RunConfig) -> Result<u8> {
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("torus.fts"));
    let log = cfg.log.clone().unwrap_or_else(|| sibling(&out, "csv"));
    summarized(cfg, Some(sibling(&out, "json")), "solve-torus", |s| {
        let model = cfg.model()?;
        s.insert("model".into(), model_json(&model));
        let guess = initial_torus(cfg, &model)?;
        let run = solve_torus_from(&guess, &model, cfg)?;
        let mut csv = csv::Writer::from_path(&log).with_context(|| format!("creating {}", log.display()))?;
        csv.write_record(["iter", "residual", "lambda", "twist", "cond_m", "seconds"])?;
        for (i, r) in run.rows.iter().enumerate() {
            csv.write_record(&[
                (i + 1).to_string(),
                format!("{:e}", r.residual),
                format!("{:e}", r.lambda),
                format!("{:e}", r.twist),
                format!("{:e}", r.cond_m),
                format!("{:e}", r.seconds),
            ])?;
        }
        csv.flush()?;
        save_torus(&out, &run.torus, &model)?;

        let residual = invariance_residual(&run.torus, &model)?.sup_norm();
        let twist = match run.rows.last() {
            Some(r) => r.twist,
            None => frame_twist(&run.torus, &model, cfg)?,
        };
        s.insert("steps".into(), json!(run.rows.len()));
        s.insert("grid_points".into(), json!(run.torus.grid().len()));
        s.insert("final_residual".into(), json!(residual));
        s.insert("lambda".into(), json!(run.torus.lambda.iter().map(|x| x * x).sum::<f64>().sqrt()));
        s.insert("twist".into(), json!(twist));
        s.insert("cond_m".into(), json!(run.rows.last().map(|r| r.cond_m)));
        s.insert("divisor_margin".into(), json!(run.divisor_margin.is_finite().then_some(run.divisor_margin)));
        s.insert("tail_fraction".into(), json!(run.torus.k.tail_fraction()));
        s.insert("outputs".into(), json!([out.display().to_string(), log.display().to_string()]));
        println!("solved torus: residual {residual:.3e} after {} steps -> {}", run.rows.len(), out.display());
        Ok(0)
    })
}

fn solve_splitting(cfg: &RunConfig) -> Result<u8> {
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("split.fts"));
    let log = cfg.log.clone().unwrap_or_else(|| sibling(&out, "csv"));
    summarized(cfg, Some(sibling(&out, "json")), "solve-splitting", |s| {
        let (torus, model) = load_torus(cfg.require(&cfg.torus, "torus")?)?;
        s.insert("model".into(), model_json(&model));
        let rank = hyperbolic_rank(&model);
        if rank == 0 {
            return Err(ConfigError(format!("model {} has no hyperbolic directions", model.name())).into());
        }
        let cocycle = Cocycle::from_torus(&torus, &model);
        let start = match &cfg.splitting {
            Some(path) => read_splitting(&mut open(path)?)?.0,
            None => cold_start(&cocycle, rank, rank)?,
        };
        let (split, reports) = refine_splitting(&start, &cocycle, &splitting_options(cfg))?;
        let mut csv = csv::Writer::from_path(&log).with_context(|| format!("creating {}", log.display()))?;
        csv.write_record(["iter", "residual", "kappa_s", "kappa_cu", "reprojection_change", "seconds"])?;
        for (i, r) in reports.iter().enumerate() {
            csv.write_record(&[
                (i + 1).to_string(),
                format!("{:e}", r.residual_after),
                format!("{:e}", r.kappa_s),
                format!("{:e}", r.kappa_cu),
                format!("{:e}", r.reprojection_change),
                format!("{:e}", r.seconds),
            ])?;
        }
        csv.flush()?;
        let mut w = create(&out)?;
        write_splitting(&mut w, &split, &torus.omega.omega)?;
        w.flush()?;

        let rates = estimate_rates(&cocycle, &split, 30);
        s.insert("projection_steps".into(), json!(reports.len()));
        s.insert("final_residual".into(), json!(reports.last().map(|r| r.residual_after)));
        s.insert("idempotency_defect".into(), json!(split.idempotency_defect()));
        s.insert("complement_defect".into(), json!(split.complement_defect()));
        s.insert(
            "rates".into(),
            json!({ "mu1": rates.mu1, "mu2": rates.mu2, "mu3": rates.mu3, "c": rates.c,
                    "reliable": rates.reliable, "dichotomy": rates.dichotomy_holds() }),
        );
        s.insert("outputs".into(), json!([out.display().to_string(), log.display().to_string()]));
        println!(
            "solved splitting: rates mu1 {:.4} mu2 {:.4} mu3 {:.4} -> {}",
            rates.mu1,
            rates.mu2,
            rates.mu3,
            out.display()
        );
        Ok(0)
    })
}

fn solve_whisker(cfg: &RunConfig) -> Result<u8> {
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("whisker.ftt"));
    let log = cfg.log.clone().unwrap_or_else(|| sibling(&out, "csv"));
    summarized(cfg, Some(sibling(&out, "json")), "solve-whisker", |s| {
        let (mut torus, model) = load_torus(cfg.require(&cfg.torus, "torus")?)?;
        let split: InvariantSplitting = read_splitting(&mut open(cfg.require(&cfg.splitting, "splitting")?)?)?.0;
        if split.pi_s.grid() != torus.grid() {
            return Err(ConfigError("torus and splitting files use different grids".into()).into());
        }
        s.insert("model".into(), model_json(&model));
        torus.lambda = vec![0.0; torus.l()];
        let coh = cohomology_options(cfg);
        let bundle = solve_bundle_and_multiplier(&torus, &split, cfg.branch, &model, 1.0, &coh)?;
        let rho = match cfg.rho {
            Some(r) => r,
            None => balanced_rho(&torus, &bundle.w1, bundle.mu.mu, &model, 1.0)?,
        };
        let w1 = bundle.w1.scale(rho);
        let w = order_by_order(&torus, &w1, bundle.mu.mu, &model, cfg.order, cfg.s_max)?;

        let mut csv = csv::Writer::from_path(&log).with_context(|| format!("creating {}", log.display()))?;
        csv.write_record(["iter", "residual_before", "residual_after", "delta_mu", "lambda", "seconds"])?;
        let (w, mu, lambda) = if cfg.whisker_newton {
            let opts = WhiskerOptions { cohomology: coh, ..WhiskerOptions::default() };
            let (sol, reports) = newton_full_solve(&Whisker::new(w, bundle.mu, rho), &model, &opts)?;
            for (i, r) in reports.iter().enumerate() {
                csv.write_record(&[
                    (i + 1).to_string(),
                    format!("{:e}", r.residual_before),
                    format!("{:e}", r.residual_after),
                    format!("{:e}", r.delta_mu),
                    format!("{:e}", r.lambda_after),
                    format!("{:e}", r.seconds),
                ])?;
            }
            (sol.w, sol.mu.mu, sol.lambda)
        } else {
            (w, bundle.mu.mu, vec![0.0; torus.l()])
        };
        csv.flush()?;

        let mut w = w;
        w.s_max = fit_domain(&w, mu, &model, cfg.conjugacy_tol)?;
        let conj = conjugacy_error(&w, mu, &model, w.s_max, 20, 20);
        let residual_orders = whisker_residual(&w, mu, &model)?.order_norms();
        let mut header = FttHeader {
            mu,
            rho,
            lambda,
            branch: cfg.branch.name().to_string(),
            extras: Default::default(),
        };
        header.extras.insert("model".into(), model.name().into());
        header.extras.insert("epsilon".into(), model.epsilon.to_string());
        header.extras.insert("a".into(), model.a.to_string());
        header.extras.insert("L".into(), w.order().to_string());
        let mut file = create(&out)?;
        write_ftt(&mut file, &w, &header)?;
        file.flush()?;

        s.insert("mu".into(), json!(mu));
        s.insert("rho".into(), json!(rho));
        s.insert("s_max".into(), json!(w.s_max));
        s.insert("order".into(), json!(w.order()));
        s.insert("bundle_residual".into(), json!(bundle.residual));
        s.insert("conjugacy_error".into(), json!(conj));
        s.insert("residual_orders".into(), json!(residual_orders));
        s.insert("coefficient_norms".into(), json!(w.order_norms()));
        s.insert("outputs".into(), json!([out.display().to_string(), log.display().to_string()]));
        println!("solved {} whisker: mu {mu:.12} s_max {:.3e} -> {}", cfg.branch.name(), w.s_max, out.display());
        Ok(0)
    })
}

fn run_continuation(cfg: &RunConfig) -> Result<u8> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("continuation"));
    summarized(cfg, Some(dir.join("summary.json")), "continue", |s| {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let schedule = cfg
            .schedule
            .as_ref()
            .ok_or_else(|| ConfigError("continue needs from, to and step".into()))?;
        let values = schedule.values();
        let model = cfg.model()?;
        s.insert("model".into(), model_json(&model));
        let guess = initial_torus(cfg, &model)?;

        // (epsilon, torus, steps)
        let mut results: Vec<(f64, TorusEmbedding, usize, f64)> = Vec::new();
        if hyperbolic_rank(&model) == 0 {
            let min_step = schedule.step.abs() / 64.0;
            for st in continuation(&model, &guess, &values, &torus_options(cfg), min_step)? {
                let secs = st.reports.iter().map(|r| r.seconds).fold(0.0, |a, b| a + b);
                results.push((st.epsilon, st.torus, st.reports.len(), secs));
            }
        } else {
            let mut current = guess;
            for &eps in &values {
                let m = model.with_epsilon(eps);
                let run = solve_torus_from(&current, &m, cfg).map_err(|e| {
                    let last = results.last().map_or(f64::NAN, |r| r.0);
                    e.context(format!("continuation stalled at {last} (attempted {eps})"))
                })?;
                let secs = run.rows.iter().map(|r| r.seconds).fold(0.0, |a, b| a + b);
                results.push((eps, run.torus.clone(), run.rows.len(), secs));
                current = run.torus;
            }
        }

        let csv_path = cfg.log.clone().unwrap_or_else(|| dir.join("continuation.csv"));
        let mut csv = csv::Writer::from_path(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
        csv.write_record(["index", "epsilon", "steps", "residual", "lambda", "twist", "seconds", "file"])?;
        let mut files = Vec::new();
        for (i, (eps, torus, steps, secs)) in results.iter().enumerate() {
            let m = model.with_epsilon(*eps);
            let path = dir.join(format!("torus_{i:03}.fts"));
            save_torus(&path, torus, &m)?;
            let residual = invariance_residual(torus, &m)?.sup_norm();
            let lambda = torus.lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
            let twist = frame_twist(torus, &m, cfg)?;
            csv.write_record(&[
                i.to_string(),
                eps.to_string(),
                steps.to_string(),
                format!("{residual:e}"),
                format!("{lambda:e}"),
                format!("{twist:e}"),
                format!("{secs:e}"),
                path.display().to_string(),
            ])?;
            files.push(path.display().to_string());
        }
        csv.flush()?;
        s.insert("epsilons".into(), json!(values));
        s.insert("outputs".into(), json!(files));
        s.insert("log".into(), json!(csv_path.display().to_string()));
        println!("continued {} tori into {}", results.len(), dir.display());
        Ok(0)
    })
}

fn coordinate_names(dim: usize) -> Vec<String> {
    let d = dim / 2;
    if d == 1 {
        return vec!["q".into(), "p".into()];
    }
    (1..=d).map(|i| format!("q{i}")).chain((1..=d).map(|i| format!("p{i}"))).collect()
}

fn export(file: &Path, cfg: &RunConfig) -> Result<u8> {
    let mut magic = [0u8; 4];
    open(file)?.read_exact(&mut magic).with_context(|| format!("reading {}", file.display()))?;
    let sink: Box<dyn Write> = match &cfg.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut csv = csv::Writer::from_writer(sink);
    let n_theta = cfg.n_theta.max(1);
    let mut rows = 0;
    if &magic == FTT_MAGIC {
        let (w, _) = read_ftt(&mut open(file)?).with_context(|| format!("reading whisker {}", file.display()))?;
        let mut header = vec!["theta".to_string(), "s".to_string()];
        header.extend(coordinate_names(w.dim()));
        csv.write_record(&header)?;
        let n_s = cfg.n_s.max(1);
        for i in 0..n_theta {
            let theta = i as f64 / n_theta as f64;
            for j in 0..n_s {
                let s = if n_s == 1 { 0.0 } else { -w.s_max + 2.0 * w.s_max * j as f64 / (n_s - 1) as f64 };
                let mut rec = vec![theta.to_string(), s.to_string()];
                rec.extend(w.eval(&[theta], s).iter().map(|x| x.to_string()));
                csv.write_record(&rec)?;
                rows += 1;
            }
        }
    } else {
        let (torus, _) = load_torus(file)?;
        let mut header = vec!["theta".to_string()];
        header.extend(coordinate_names(torus.k.rows()));
        csv.write_record(&header)?;
        let lift = torus.lift();
        for i in 0..n_theta {
            let theta = i as f64 / n_theta as f64;
            let mut rec = vec![theta.to_string()];
            rec.extend(lift.eval(&[theta]).iter().map(|x| x.to_string()));
            csv.write_record(&rec)?;
            rows += 1;
        }
    }
    csv.flush()?;
    if cfg.out.is_some() {
        eprintln!("exported {rows} points");
    }
    Ok(0)
}

struct Check {
    name: &'static str,
    value: f64,
    threshold: f64,
    pass: bool,
}

fn diagnose(file: &Path, cfg: &RunConfig) -> Result<u8> {
    summarized(cfg, None, "diagnose", |s| {
        let (torus, model) = load_torus(file)?;
        s.insert("model".into(), model_json(&model));
        let residual = invariance_residual(&torus, &model)?.sup_norm();
        let coiso = torus_coisotropy(&torus, &model);
        let twist = frame_twist(&torus, &model, cfg)?;
        let dioph = torus.omega.diophantine_witness(2000);
        let tail = torus.k.tail_fraction();
        let le = |name, value: f64, threshold| Check { name, value, threshold, pass: value <= threshold };
        let checks = [
            le("residual", residual, cfg.tol),
            le("coisotropy", coiso, 1e-10),
            Check { name: "twist", value: twist, threshold: cfg.twist_floor, pass: twist >= cfg.twist_floor },
            Check {
                name: "diophantine",
                value: dioph.worst_ratio,
                threshold: torus.omega.diophantine_nu,
                pass: dioph.pass,
            },
            le("tail_fraction", tail, 1e-9),
        ];
        let mut all = true;
        for c in &checks {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            let rel = if c.name == "twist" { ">=" } else { "<=" };
            println!("{:<14} {:>12.4e} {rel} {:<10.3e} {tag}", c.name, c.value, c.threshold);
            s.insert(c.name.into(), json!({ "value": c.value, "threshold": c.threshold, "pass": c.pass }));
            all &= c.pass;
        }
        Ok(if all { 0 } else { 1 })
    })
}
