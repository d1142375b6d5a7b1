//! The `hal` command line: simulate scenario configs, sweep ε, run the
//! averaging identity checks and tabulate averaged fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hal_core::automaton::AutomatonError;
use hal_core::averaging::{Averager, AveragingError, QuadratureConfig};
use hal_core::closeness::{min_rho, practical_stability_check, ClosenessError};
use hal_core::hybrid::io::{write_arc_csv, CsvError, CsvMeta};
use hal_core::hybrid::{HybridArc, SimError};
use hal_core::linalg::max_abs_diff;
use hal_core::scenarios::config::NumberSpec;
use hal_core::scenarios::verify::{identity_suite, probes, CheckResult};
use hal_core::scenarios::{ConfigError, Scenario, ScenarioConfig, ScenarioError};
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SCHEDULE: i32 = 3;
pub const EXIT_SIMULATION: i32 = 4;
pub const EXIT_VERIFICATION: i32 = 5;

/// Closeness tolerance for sweeps, also the slack allowed in monotonicity.
const SWEEP_TOL: f64 = 1e-3;
const AVERAGE_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "hal",
    version,
    about = "Simulate and average oscillatory hybrid systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario; writes the arc CSV and a metrics JSON sidecar.
    Run(RunArgs),
    /// Closeness between original and averaged arcs over several ε.
    Sweep(SweepArgs),
    /// Numerical identity checks on the averaged field.
    Verify(VerifyArgs),
    /// Tabulate the quadrature average against the analytic one.
    Average(AverageArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario config (JSON).
    #[arg(value_name = "CONFIG", required_unless_present = "config")]
    pub config_file: Option<PathBuf>,
    #[arg(long, conflicts_with = "config_file")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `time,mode` CSV replacing the configured schedule.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Quadrature nodes per fast period.
    #[arg(long)]
    pub quad_nodes: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    /// Also write the averaged arc next to the main CSV.
    #[arg(long)]
    pub with_average: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated list, e.g. `0.2,0.1,0.05`.
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05")]
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct AverageArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulation failed: {0}")]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Averaging(#[from] AveragingError),
    #[error(transparent)]
    Closeness(#[from] ClosenessError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("{0}")]
    Usage(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

fn is_rejection(e: &ScenarioError) -> bool {
    matches!(
        e,
        ScenarioError::Automaton(AutomatonError::ScheduleRejected(_))
    )
}

fn sim_code(e: &SimError) -> i32 {
    match e {
        SimError::ScheduleInfeasible { .. } => EXIT_SCHEDULE,
        _ => EXIT_SIMULATION,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(ConfigError::Scenario(e)) | Self::Scenario(e) if is_rejection(e) => {
                EXIT_SCHEDULE
            }
            Self::Config(ConfigError::Scenario(ScenarioError::Simulation(e)))
            | Self::Scenario(ScenarioError::Simulation(e))
            | Self::Simulation(e) => sim_code(e),
            Self::Verification(_) => EXIT_VERIFICATION,
            Self::Config(_) | Self::Usage(_) | Self::Scenario(_) | Self::Averaging(_) => {
                EXIT_CONFIG
            }
            Self::Closeness(_) | Self::Io { .. } | Self::Csv(_) => EXIT_SIMULATION,
        }
    }
}

impl Common {
    fn config_path(&self) -> Result<&Path, CliError> {
        self.config
            .as_deref()
            .or(self.config_file.as_deref())
            .ok_or_else(|| CliError::Usage("no config given".into()))
    }

    /// The config with command-line overrides applied.
    pub fn load(&self) -> Result<ScenarioConfig, CliError> {
        let mut cfg = ScenarioConfig::from_path(self.config_path()?)?;
        if let Some(e) = &self.epsilon {
            let spec = match e.parse::<f64>() {
                Ok(v) => NumberSpec::Value(v),
                Err(_) => NumberSpec::Expr(e.clone()),
            };
            spec.value()?;
            cfg.epsilon = Some(spec);
        }
        if let Some(t) = self.t_final {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Usage(format!(
                    "--t-final must be positive, got {t}"
                )));
            }
            cfg.horizon = Some(t);
        }
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
        }
        if let Some(p) = &self.schedule {
            let abs = std::path::absolute(p).map_err(|source| CliError::Io {
                path: p.clone(),
                source,
            })?;
            cfg.schedule = Some(abs);
        }
        if let Some(n) = self.quad_nodes {
            cfg.quad_nodes = Some(n);
        }
        Ok(cfg)
    }

    fn quad(&self) -> QuadratureConfig {
        match self.quad_nodes {
            Some(n) => QuadratureConfig {
                nodes_tau2: n,
                ..QuadratureConfig::default()
            },
            None => QuadratureConfig::default(),
        }
    }

    fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn meta(sc: &Scenario) -> CsvMeta {
    let mut m = CsvMeta::new(sc.name.clone()).stamped();
    m.epsilon = Some(sc.eps);
    m.seed = sc.seed;
    m
}

/// `run.csv` → `run.metrics.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("metrics.json")
}

fn average_path(out: &Path) -> PathBuf {
    out.with_extension("average.csv")
}

fn write_arc(path: &Path, arc: &HybridArc, labels: &[String], m: &CsvMeta) -> Result<(), CliError> {
    let mut w = create(path)?;
    write_arc_csv(&mut w, arc, labels, m)?;
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// What a successful subcommand produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Lines for standard output.
    pub lines: Vec<String>,
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Verify(a) => verify(a),
        Command::Average(a) => average(a),
    }
}

fn run(a: &RunArgs) -> Result<Outcome, CliError> {
    let cfg = a.common.load()?;
    let sc = cfg.build()?;
    log::info!("running {} with eps = {}", sc.name, sc.eps);
    let arc = sc.simulate()?;
    let out = a.common.out_or(&format!("{}.csv", sc.name));
    let m = meta(&sc);
    write_arc(&out, &arc, &sc.system.labels, &m)?;
    let mut files = vec![out.clone()];

    let horizon = sc.solver.t_final;
    let (nu, c) = (cfg.nu.unwrap_or(0.5), cfg.c.unwrap_or(2.0));
    let stability = practical_stability_check(&arc, &sc.indicator, nu, c, horizon);
    let last = arc.final_state().unwrap_or(&sc.x0);
    let metrics = json!({
        "scenario": sc.name,
        "epsilon": sc.eps,
        "seed": sc.seed,
        "t_final": arc.final_point().map(|p| p.t),
        "jumps": arc.jumps(),
        "final_indicator": sc.indicator.eval(last),
        "final_state": last,
        "stability": stability,
        "schedule_verdict": sc.verdict,
    });
    let side = sidecar_path(&out);
    write_text(
        &side,
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&metrics).expect("metrics serialise")
        ),
    )?;
    files.push(side);

    if a.with_average {
        let avg = sc.averaged()?;
        let avg_arc = sc.simulate_average()?;
        let p = average_path(&out);
        write_arc(&p, &avg_arc, &avg.system.labels, &m)?;
        files.push(p);
    }
    let lines = vec![format!(
        "{}: {} jumps, final indicator {:.6}, settle time {}",
        sc.name,
        arc.jumps(),
        sc.indicator.eval(last),
        stability
            .settle_time
            .map_or("none".into(), |t| format!("{t:.3}"))
    )];
    Ok(Outcome { files, lines })
}

/// One sweep row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub rho_min: f64,
    pub horizon: f64,
}

pub fn sweep_rows(cfg: &ScenarioConfig, epsilons: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    epsilons
        .par_iter()
        .map(|&e| {
            if !(e > 0.0 && e.is_finite()) {
                return Err(CliError::Usage(format!(
                    "epsilon must be positive, got {e}"
                )));
            }
            let mut c = cfg.clone();
            c.epsilon = Some(NumberSpec::Value(e));
            let sc = c.build()?;
            let horizon = sc.solver.t_final;
            let a = sc.simulate()?;
            let b = sc.simulate_average()?;
            let rep = min_rho(&a, &b, horizon, SWEEP_TOL, Some(&sc.closeness_components))?;
            log::info!("eps = {e}: rho_min = {}", rep.rho_min);
            Ok(SweepRow {
                epsilon: e,
                rho_min: rep.rho_min,
                horizon,
            })
        })
        .collect()
}

fn sweep(a: &SweepArgs) -> Result<Outcome, CliError> {
    if a.epsilons.is_empty() {
        return Err(CliError::Usage("--epsilons is empty".into()));
    }
    let cfg = a.common.load()?;
    let rows = sweep_rows(&cfg, &a.epsilons)?;
    let out = a.common.out_or(&format!("{}_sweep.csv", cfg.name()));
    let mut text = format!("# scenario: {}\n", cfg.name());
    if let Some(s) = cfg.seed {
        text.push_str(&format!("# seed: {s}\n"));
    }
    text.push_str("epsilon,rho_min,T\n");
    for r in &rows {
        text.push_str(&format!("{},{},{}\n", r.epsilon, r.rho_min, r.horizon));
    }
    write_text(&out, &text)?;
    let lines = rows
        .iter()
        .map(|r| {
            format!(
                "eps = {}: rho_min = {:.6} over T = {}",
                r.epsilon, r.rho_min, r.horizon
            )
        })
        .collect();
    let outcome = Outcome {
        files: vec![out],
        lines,
    };

    let mut sorted = rows.clone();
    sorted.sort_by(|p, q| q.epsilon.total_cmp(&p.epsilon));
    let monotone = sorted
        .windows(2)
        .all(|w| w[1].rho_min <= w[0].rho_min + SWEEP_TOL);
    if !monotone {
        for l in &outcome.lines {
            println!("{l}");
        }
        return Err(CliError::Verification(
            "rho_min increases as epsilon decreases".into(),
        ));
    }
    Ok(outcome)
}

fn check_line(c: &CheckResult) -> String {
    let v = if c.passed { "PASS" } else { "FAIL" };
    format!("{v} {}: {:.3e} (tol {:.0e})", c.name, c.value, c.tol)
}

fn verify(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let cfg = a.common.load()?;
    let sc = cfg.build()?;
    let seed = sc.seed.unwrap_or(0);
    let checks = identity_suite(&sc, &a.common.quad(), a.samples.max(1), seed)?;
    let lines: Vec<String> = checks.iter().map(check_line).collect();
    let mut files = Vec::new();
    if let Some(out) = &a.common.out {
        let body = json!({ "scenario": sc.name, "epsilon": sc.eps, "checks": checks });
        write_text(
            out,
            &format!(
                "{}\n",
                serde_json::to_string_pretty(&body).expect("checks serialise")
            ),
        )?;
        files.push(out.clone());
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if !failed.is_empty() {
        for l in &lines {
            println!("{l}");
        }
        return Err(CliError::Verification(failed.join(", ")));
    }
    Ok(Outcome { files, lines })
}

/// CSV text of `f̄` and the analytic average at seeded sample states,
/// and the largest discrepancy.
pub fn average_table(
    sc: &Scenario,
    quad: &QuadratureConfig,
    samples: usize,
    seed: u64,
) -> Result<(String, f64), CliError> {
    let osc = sc
        .oscillatory()
        .ok_or(CliError::Averaging(AveragingError::NotOscillatory))?;
    let spec = &osc.osc;
    let avg = Averager::new(spec, *quad)?;
    let pts = probes(sc, spec, samples, seed);
    let m = spec.n1;
    let nz = pts.first().map_or(0, |p| p.z.len());

    let mut header = vec!["sample".to_string()];
    header.extend((1..=m).map(|i| format!("x{i}")));
    header.extend((1..=nz).map(|i| format!("z{i}")));
    header.extend((1..=m).map(|i| format!("fbar{i}")));
    header.extend((1..=m).map(|i| format!("analytic{i}")));
    header.push("max_abs_diff".into());

    let mut text = format!(
        "# scenario: {}\n# epsilon: {}\n# seed: {seed}\n",
        sc.name, sc.eps
    );
    text.push_str(&header.join(","));
    text.push('\n');
    let mut worst: f64 = 0.0;
    for (k, p) in pts.iter().enumerate() {
        let f = avg.f_bar(&p.x, &p.z);
        let g = (sc.analytic_average)(&p.x, &p.z);
        let d = max_abs_diff(&f, &g);
        worst = worst.max(d);
        let mut row = vec![k.to_string()];
        row.extend(
            p.x.iter()
                .chain(&p.z)
                .chain(&f)
                .chain(&g)
                .map(f64::to_string),
        );
        row.push(d.to_string());
        text.push_str(&row.join(","));
        text.push('\n');
    }
    Ok((text, worst))
}

fn average(a: &AverageArgs) -> Result<Outcome, CliError> {
    let cfg = a.common.load()?;
    let sc = cfg.build()?;
    let (text, worst) = average_table(
        &sc,
        &a.common.quad(),
        a.samples.max(1),
        sc.seed.unwrap_or(0),
    )?;
    let out = a.common.out_or(&format!("{}_average.csv", sc.name));
    write_text(&out, &text)?;
    let line = format!(
        "{}: max |fbar - analytic| = {worst:.3e} over {} states",
        sc.name,
        a.samples.max(1)
    );
    if worst > AVERAGE_TOL {
        println!("{line}");
        return Err(CliError::Verification(format!(
            "average discrepancy {worst:.3e} > {AVERAGE_TOL:.0e}"
        )));
    }
    Ok(Outcome {
        files: vec![out],
        lines: vec![line],
    })
}
