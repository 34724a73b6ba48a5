//! Model files, reports and the `analyze` / `verify` pipelines behind the
//! `elmd` binary.

use std::fmt::Write as _;
use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::characteristics::{PartitionCase, Triplet};
use crate::deflator::{build_deflator, build_deflator_with_eta, deflator_along_path, DeflatorReport, DeflatorSpec};
use crate::error::{Error, Result};
use crate::growth::{growth, growth_curve, optimal_fraction, window, SolverOptions};
use crate::jump_measure::MeasureSpec;
use crate::simulate::{ExpMode, PathLaw, SimConfig};
use crate::tilt::TiltReport;
use crate::verify::{arbitrage_demo, run_suite, ArbitrageReport, VerificationReport, DEFAULT_THRESHOLD};
use crate::viability::{check_lambda, ViabilityVerdict};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_ARBITRAGE: u8 = 2;
pub const EXIT_VERIFY_FAIL: u8 = 3;

/// Tolerance for the tilt and first-order checks.
const CHECK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimOptions {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub insert_jumps: bool,
}

fn default_paths() -> usize {
    100_000
}
fn default_steps() -> usize {
    16
}
fn default_seed() -> u64 {
    42
}
fn default_true() -> bool {
    true
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { paths: default_paths(), steps: default_steps(), seed: default_seed(), insert_jumps: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    #[serde(default)]
    pub curve: Option<PathBuf>,
    #[serde(default)]
    pub dump_paths: Option<usize>,
}

/// Contents of a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub a: f64,
    pub c: f64,
    pub horizon: f64,
    pub epsilon: f64,
    pub kappa: MeasureSpec,
    #[serde(default)]
    pub sim: SimOptions,
    #[serde(default)]
    pub output: OutputOptions,
    /// Overrides the tilt budget `ε / (2T)`.
    #[serde(default)]
    pub eta: Option<f64>,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn check(&self) -> Result<()> {
        let field = |name: &str, ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("field `{name}`: {what}")))
            }
        };
        field("a", self.a.is_finite(), "must be finite")?;
        field("c", self.c.is_finite() && self.c >= 0.0, "must be finite and >= 0")?;
        field("horizon", self.horizon.is_finite() && self.horizon > 0.0, "must be finite and > 0")?;
        field("epsilon", self.epsilon > 0.0 && self.epsilon < 1.0, "must lie in (0, 1)")?;
        field("sim.paths", self.sim.paths >= 1, "must be >= 1")?;
        field("sim.steps", self.sim.steps >= 1, "must be >= 1")?;
        if let Some(eta) = self.eta {
            field("eta", eta.is_finite() && eta > 0.0, "must be finite and > 0")?;
        }
        Ok(())
    }

    pub fn triplet(&self) -> Result<Triplet> {
        let kappa = self.kappa.build().map_err(|e| match e {
            Error::Config(s) => Error::Config(format!("field `kappa`: {s}")),
            Error::InvalidParam(s) => Error::Config(format!("field `kappa`: {s}")),
            other => other,
        })?;
        Triplet::new(self.a, self.c, kappa, self.horizon).validate().map_err(|e| match e {
            Error::NotSpecial => Error::Config("field `kappa`: measure is not special".into()),
            Error::InvalidParam(s) => Error::Config(s),
            other => other,
        })
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            n_paths: self.sim.paths,
            n_steps: self.sim.steps,
            seed: self.sim.seed,
            insert_jumps: self.sim.insert_jumps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    #[serde(with = "crate::extreal")]
    pub l: f64,
    #[serde(with = "crate::extreal")]
    pub r: f64,
    pub case: PartitionCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    #[serde(with = "crate::extreal")]
    pub p_tilde: f64,
    #[serde(with = "crate::extreal")]
    pub g_at_p_tilde: f64,
    #[serde(with = "crate::extreal")]
    pub dg_l: f64,
    #[serde(with = "crate::extreal")]
    pub dg_r: f64,
    pub first_order: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub viability: ViabilityVerdict,
    pub bounds: BoundsReport,
    pub growth: GrowthReport,
    pub tilt: Option<TiltReport>,
    pub deflator: Option<DeflatorReport>,
    pub verification: Option<VerificationReport>,
    pub arbitrage: Option<ArbitrageReport>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(format!("report serialization: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Verify,
}

/// Result of a pipeline run: the report (if one was produced) and the exit code.
#[derive(Debug)]
pub struct Outcome {
    pub report: AnalysisReport,
    pub exit: u8,
    pub spec: Option<DeflatorSpec>,
}

/// Runs the analysis pipeline, and the verification suite for [`Command::Verify`].
pub fn run(cfg: &ModelConfig, command: Command) -> Result<Outcome> {
    cfg.check()?;
    let t = cfg.triplet()?;
    let b = t.bounds();
    let viability = check_lambda(&t)?;
    let opt = optimal_fraction(&t, &SolverOptions::default())?;
    let g_at = if opt.p.is_finite() { growth(&t, opt.p)? } else { f64::NAN };
    let growth = GrowthReport {
        p_tilde: opt.p,
        g_at_p_tilde: g_at,
        dg_l: opt.dg_l,
        dg_r: opt.dg_r,
        first_order: opt.first_order,
    };
    let mut report = AnalysisReport {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.sim.seed,
        viability,
        bounds: BoundsReport { l: b.l, r: b.r, case: b.case() },
        growth,
        tilt: None,
        deflator: None,
        verification: None,
        arbitrage: None,
    };
    let sim = cfg.sim_config();
    let built = match cfg.eta {
        Some(eta) => build_deflator_with_eta(&t, cfg.epsilon, eta, CHECK_TOL),
        None => build_deflator(&t, cfg.epsilon, CHECK_TOL),
    };
    let spec = match built {
        Ok(spec) => spec,
        Err(Error::ArbitrageDetected(_)) => {
            let mut exit = EXIT_ARBITRAGE;
            if command == Command::Verify {
                let demo = arbitrage_demo(&t, &sim, DEFAULT_THRESHOLD)?;
                if !demo.pass {
                    exit = EXIT_VERIFY_FAIL;
                }
                report.arbitrage = Some(demo);
            }
            return Ok(Outcome { report, exit, spec: None });
        }
        Err(e) => return Err(e),
    };
    report.tilt = Some(spec.tilt_report);
    report.deflator = Some(spec.report());
    let mut exit = EXIT_OK;
    if command == Command::Verify {
        let v = run_suite(&spec, &sim, DEFAULT_THRESHOLD)?;
        let ok = v.all_pass && spec.tilt_report.all_pass() && spec.rel.pass;
        if !ok {
            exit = EXIT_VERIFY_FAIL;
        }
        report.verification = Some(v);
    }
    Ok(Outcome { report, exit, spec: Some(spec) })
}

/// Growth curve CSV with header `p,g,dg` over the window around `p̃`.
pub fn curve_csv(t: &Triplet, center: f64, n: usize) -> Result<String> {
    let (lo, hi) = window(&t.bounds(), center);
    let mut out = String::from("p,g,dg\n");
    for pt in growth_curve(t, lo, hi, n)? {
        let _ = writeln!(out, "{},{},{}", pt.p, pt.g, pt.dg);
    }
    Ok(out)
}

/// Writes `t,S,L,X_tilde,Z` CSV files for the first `n` paths into `dir`.
pub fn dump_paths(spec: &DeflatorSpec, sim: &SimConfig, n: usize, dir: &FsPath, stem: &str) -> Result<Vec<PathBuf>> {
    let law = PathLaw::new(&spec.base)?;
    let mut files = Vec::new();
    for i in 0..n.min(sim.n_paths) {
        let path = law.simulate(sim, i as u64)?;
        let d = deflator_along_path(spec, &path, ExpMode::Exact)?;
        let mut out = String::from("t,S,L,X_tilde,Z\n");
        for k in 0..path.times.len() {
            let _ = writeln!(out, "{},{},{},{},{}", path.times[k], path.s[k], d.l[k], d.x_tilde[k], d.z[k]);
        }
        let file = dir.join(format!("{stem}_path_{i}.csv"));
        std::fs::write(&file, out)?;
        files.push(file);
    }
    Ok(files)
}

#[derive(Debug, Parser)]
#[command(name = "elmd", version, about = "Growth-optimal fractions, tilted jump measures and deflators for jump-diffusion models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Viability, growth optimum, tilt and deflator for a model file.
    Analyze(RunArgs),
    /// As `analyze`, then run the Monte-Carlo verification suite.
    Verify(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the growth curve `p,g,dg` as CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Dump the first N simulated paths next to the report.
    #[arg(long)]
    pub dump_paths: Option<usize>,
    /// Worker threads for path simulation (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

impl RunArgs {
    /// Loads the model file and applies flag overrides.
    pub fn config(&self) -> Result<ModelConfig> {
        let mut cfg = ModelConfig::load(&self.config)?;
        if let Some(v) = self.paths {
            cfg.sim.paths = v;
        }
        if let Some(v) = self.steps {
            cfg.sim.steps = v;
        }
        if let Some(v) = self.seed {
            cfg.sim.seed = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if self.curve.is_some() {
            cfg.output.curve = self.curve.clone();
        }
        if self.dump_paths.is_some() {
            cfg.output.dump_paths = self.dump_paths;
        }
        cfg.check()?;
        Ok(cfg)
    }
}

/// Executes a parsed command line and returns the process exit code.
pub fn execute(cli: &Cli) -> u8 {
    let (args, command) = match &cli.command {
        CliCommand::Analyze(a) => (a, Command::Analyze),
        CliCommand::Verify(a) => (a, Command::Verify),
    };
    let work = || -> Result<u8> {
        let cfg = args.config()?;
        let outcome = run(&cfg, command)?;
        std::fs::write(&args.out, outcome.report.to_json()? + "\n")?;
        if let Some(curve) = &cfg.output.curve {
            let t = cfg.triplet()?;
            std::fs::write(curve, curve_csv(&t, outcome.report.growth.p_tilde, 201)?)?;
        }
        if let (Some(n), Some(spec)) = (cfg.output.dump_paths, &outcome.spec) {
            if spec.simulable && n > 0 {
                let dir = args.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(FsPath::new("."));
                let stem = args.out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
                dump_paths(spec, &cfg.sim_config(), n, dir, stem)?;
            }
        }
        if let Some(v) = &outcome.report.verification {
            for name in v.failing() {
                eprintln!("verification failed: {name}");
            }
        }
        if let Some(a) = &outcome.report.arbitrage {
            if !a.pass {
                eprintln!("verification failed: arbitrage_demo");
            }
        }
        Ok(outcome.exit)
    };
    let result = match args.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(e) => Err(Error::Config(format!("thread pool: {e}"))),
        },
        None => work(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MERTON: &str = r#"{"a": 0.05, "c": 0.04, "horizon": 1, "epsilon": 0.2,
        "kappa": {"type": "atomic", "atoms": []}}"#;

    #[test]
    fn merton_analyze() {
        let cfg = ModelConfig::from_json(MERTON).unwrap();
        let out = run(&cfg, Command::Analyze).unwrap();
        assert_eq!(out.exit, EXIT_OK);
        assert!((out.report.growth.p_tilde - 1.25).abs() < 1e-10);
        assert!((out.report.deflator.unwrap().p_tilde - 1.25).abs() < 1e-10);
    }

    #[test]
    fn config_errors_name_the_field() {
        let bad = MERTON.replace("\"c\": 0.04", "\"c\": -1");
        match ModelConfig::from_json(&bad) {
            Err(Error::Config(msg)) => assert!(msg.contains("`c`"), "{msg}"),
            other => panic!("{other:?}"),
        }
        match ModelConfig::from_json("{\"a\": 1,\n \"b\": 2}") {
            Err(Error::Config(msg)) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn arbitrage_exit_code() {
        let cfg = ModelConfig::from_json(
            r#"{"a": 2, "c": 0, "horizon": 1, "epsilon": 0.2,
                "kappa": {"type": "atomic", "atoms": [{"x": 1, "w": 1}]}}"#,
        )
        .unwrap();
        let out = run(&cfg, Command::Analyze).unwrap();
        assert_eq!(out.exit, EXIT_ARBITRAGE);
        let json = out.report.to_json().unwrap();
        assert!(json.contains("\"arbitrage_plus\""));
    }

    #[test]
    fn curve_has_header() {
        let cfg = ModelConfig::from_json(MERTON).unwrap();
        let csv = curve_csv(&cfg.triplet().unwrap(), 1.25, 11).unwrap();
        assert!(csv.starts_with("p,g,dg\n"));
        assert_eq!(csv.lines().count(), 12);
    }
}
