//! CSV tables, text summaries and the run record.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::run::{CalibrateReport, EstimateReport, GradCheckRun, OptimizeReport};
use crate::{CliError, RunConfig};

#[derive(Serialize)]
struct Seeds {
    sample: u64,
    calibration: u64,
    validation: u64,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seeds: Seeds,
    config: &'a RunConfig,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

fn csv_writer(dir: &Path, name: &str) -> Result<(csv::Writer<fs::File>, PathBuf), CliError> {
    let path = dir.join(name);
    Ok((csv::Writer::from_path(&path)?, path))
}

/// `run.json`: the resolved configuration, seeds and tool version.
pub fn write_run_record(dir: &Path, command: &str, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let record = RunRecord {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        seeds: Seeds {
            sample: cfg.sample.seed,
            calibration: cfg.calibrate.seed,
            validation: cfg.optimize.validation_seed,
        },
        config: cfg,
    };
    write_text(dir, "run.json", &serde_json::to_string_pretty(&record)?)
}

pub fn write_estimate(
    dir: &Path,
    cfg: &RunConfig,
    rep: &EstimateReport,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let (mut w, csv_path) = csv_writer(dir, "estimate.csv")?;
    w.write_record([
        "method",
        "yield",
        "std",
        "n",
        "accepted",
        "err_rel",
        "mismatch_vs_fine",
        "mc_l0",
        "mc_l1",
        "mc_l2",
        "surr_l0",
        "surr_l1",
        "surr_l2",
        "effort",
        "refined_l0",
        "refined_l1",
        "refined_l2",
        "critical",
        "forced",
        "extrapolated",
        "infeasible",
    ])?;
    for r in &rep.rows {
        let e = &r.estimate;
        let mut rec = vec![
            r.method.clone(),
            e.yield_value.to_string(),
            e.std.to_string(),
            e.n.to_string(),
            e.accepted.to_string(),
            opt(r.err_rel),
            opt(r.mismatch_vs_fine),
        ];
        rec.extend(e.mc_solves.0.iter().map(|c| c.to_string()));
        rec.extend(e.setup_solves.0.iter().map(|c| c.to_string()));
        rec.push(e.effort.to_string());
        rec.extend(e.refined.iter().map(|c| c.to_string()));
        for c in [e.critical, e.forced, e.extrapolated, e.infeasible] {
            rec.push(c.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    let mut files = vec![csv_path];

    let mut s = String::new();
    writeln!(
        s,
        "yield estimation, N = {}, seed = {}",
        cfg.sample.n, cfg.sample.seed
    )
    .unwrap();
    writeln!(s, "safety factor: {}", rep.safety).unwrap();
    if let Some(sur) = &rep.surrogate {
        let st = sur.stats();
        writeln!(
            s,
            "surrogate: {} nodes, converged = {}",
            st.nodes, st.converged
        )
        .unwrap();
    }
    if let Some(y) = rep.reference_yield {
        writeln!(s, "closed-form reference yield: {y:.4}").unwrap();
    }
    writeln!(s).unwrap();
    writeln!(
        s,
        "{:<12} {:>8} {:>8} {:>12} {:>10}",
        "method", "yield", "err", "effort", "mismatch"
    )
    .unwrap();
    for r in &rep.rows {
        writeln!(
            s,
            "{:<12} {:>8.4} {:>8} {:>12} {:>10}",
            r.method,
            r.estimate.yield_value,
            r.err_rel.map_or("-".into(), |e| format!("{e:.4}")),
            r.estimate.effort,
            r.mismatch_vs_fine.map_or("-".into(), |m| m.to_string()),
        )
        .unwrap();
    }
    if let Some(c) = &rep.calibration {
        writeln!(
            s,
            "\ncalibrated from max ratio {:.4} over {} pairs",
            c.max_ratio,
            c.rows.len()
        )
        .unwrap();
        if c.warning() {
            writeln!(
                s,
                "warning: {} pairs had zero indicator but nonzero error",
                c.excluded
            )
            .unwrap();
        }
    }
    files.push(write_text(dir, "summary.txt", &s)?);

    if let Some(c) = &rep.calibration {
        files.push(write_calibration_csv(dir, c)?);
    }
    if let (Some(sur), true) = (&rep.surrogate, cfg.surrogate.save) {
        let path = dir.join("surrogate.json");
        sur.save(&path)?;
        files.push(path);
    }
    Ok(files)
}

fn write_calibration_csv(
    dir: &Path,
    c: &yieldopt_core::estimator::Calibration,
) -> Result<PathBuf, CliError> {
    let (mut w, path) = csv_writer(dir, "calibration.csv")?;
    w.write_record(["point", "freq", "error", "indicator", "ratio"])?;
    for r in &c.rows {
        w.write_record([
            r.point.to_string(),
            r.freq.to_string(),
            r.error.to_string(),
            r.indicator.to_string(),
            r.ratio.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(path)
}

pub fn write_optimize(dir: &Path, rep: &OptimizeReport) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let st = &rep.state;
    let d = st.mean.len();
    let (mut w, csv_path) = csv_writer(dir, "iterations.csv")?;
    let mut header: Vec<String> = [
        "iteration",
        "n_mc",
        "yield",
        "sigma_y",
        "effort",
        "point_evaluations",
        "step_kind",
        "step_size",
    ]
    .map(String::from)
    .to_vec();
    header.extend((1..=d).map(|i| format!("mean_{i}")));
    w.write_record(&header)?;
    for r in &st.history {
        let mut rec = vec![
            r.iteration.to_string(),
            r.n_mc.to_string(),
            r.yield_value.to_string(),
            r.sigma_y.to_string(),
            r.effort.to_string(),
            r.point_evaluations.to_string(),
            r.step_kind.as_str().to_string(),
            r.step_size.to_string(),
        ];
        rec.extend(r.mean.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut s = String::new();
    let method = if rep.adaptive {
        "adaptive Newton-MC"
    } else {
        "globalized Newton, fixed N"
    };
    writeln!(s, "{method} with the {} estimator", rep.estimator).unwrap();
    writeln!(s, "stop: {:?}, converged = {}", st.reason, st.converged).unwrap();
    writeln!(s, "iterations: {}", st.iterations).unwrap();
    writeln!(s, "final mean: {:?}", st.mean).unwrap();
    writeln!(
        s,
        "final yield: {:.4} (sigma {:.4}, N = {})",
        st.yield_value, st.sigma_y, st.n
    )
    .unwrap();
    writeln!(
        s,
        "validation yield: {:.4} (N = {})",
        rep.validation_yield, rep.validation_n
    )
    .unwrap();
    writeln!(s, "yield evaluations: {}", st.yield_evaluations).unwrap();
    writeln!(s, "sample-point evaluations: {}", st.point_evaluations).unwrap();
    writeln!(s, "effort: {}", st.effort).unwrap();
    Ok(vec![csv_path, write_text(dir, "summary.txt", &s)?])
}

pub fn write_gradcheck(
    dir: &Path,
    cfg: &RunConfig,
    rep: &GradCheckRun,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let header = ["point", "n", "component", "analytic", "fd", "diff", "fd_se"];
    let (mut trace, trace_path) = csv_writer(dir, "gradcheck_trace.csv")?;
    trace.write_record(header)?;
    let (mut check, check_path) = csv_writer(dir, "gradcheck.csv")?;
    check.write_record(header)?;
    let write = |w: &mut csv::Writer<fs::File>,
                 i: usize,
                 rows: &[yieldopt_core::optimizer::GradCheckRow]| {
        rows.iter().try_for_each(|r| {
            w.write_record([
                i.to_string(),
                r.n.to_string(),
                r.component.to_string(),
                r.analytic.to_string(),
                r.fd.to_string(),
                r.diff.to_string(),
                r.fd_se.to_string(),
            ])
        })
    };
    for (i, (t, c)) in rep.traces.iter().zip(&rep.checks).enumerate() {
        write(&mut trace, i, t)?;
        write(&mut check, i, &c.rows)?;
    }
    trace.flush()?;
    check.flush()?;

    let mut s = String::new();
    let g = &cfg.gradcheck;
    writeln!(
        s,
        "gradient check, delta = {}, eta = {}, cap = {}",
        g.delta, g.eta, g.cap
    )
    .unwrap();
    for (x, c) in rep.points.iter().zip(&rep.checks) {
        let verdict = if c.passed {
            "within eta"
        } else {
            "cap reached"
        };
        writeln!(s, "{x:?}: {verdict} at N = {}", c.n_final).unwrap();
    }
    writeln!(s, "\nmedian largest difference per N:").unwrap();
    for (n, m) in rep.median_trace() {
        writeln!(s, "  {n:>8} {m:.6}").unwrap();
    }
    if !rep.passed() {
        writeln!(
            s,
            "\nsome points missed eta: continue with the difference-quotient gradient or restart from the current design"
        )
        .unwrap();
    }
    Ok(vec![
        trace_path,
        check_path,
        write_text(dir, "summary.txt", &s)?,
    ])
}

pub fn write_calibrate(
    dir: &Path,
    cfg: &RunConfig,
    rep: &CalibrateReport,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let c = &rep.calibration;
    let mut files = vec![write_calibration_csv(dir, c)?];
    let mut s = String::new();
    writeln!(s, "safety calibration over {} points", cfg.calibrate.points).unwrap();
    writeln!(s, "max ratio: {:.6}", c.max_ratio).unwrap();
    writeln!(s, "safety factor: {:.6}", c.safety).unwrap();
    if c.warning() {
        writeln!(
            s,
            "warning: {} pairs had zero indicator but nonzero error",
            c.excluded
        )
        .unwrap();
    }
    files.push(write_text(dir, "summary.txt", &s)?);
    if cfg.surrogate.save {
        let path = dir.join("surrogate.json");
        rep.surrogate.save(&path)?;
        files.push(path);
    }
    Ok(files)
}
