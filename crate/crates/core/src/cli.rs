//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::construct::{export_barycentric, posterior_weights};
use crate::error::{Error, Result};
use crate::io::{self, RunManifest, MANIFEST_FILE};
use crate::pd_bounds::pd_support;
use crate::sampler::{run_chains, CandidateKind, SamplerConfig};
use crate::sim::{run_study, Distribution};

#[derive(Debug, Parser)]
#[command(name = "structcorr", version, about = "Structured-correlation MCMC and composite endpoint weights")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the posterior of a longitudinal dataset.
    Fit(FitArgs),
    /// Optimal weights and their intervals from a directory of draws.
    Weights(WeightsArgs),
    /// Operating characteristics over simulated replicates.
    Simulate(SimulateArgs),
    /// Positive-definite interval of one correlation parameter.
    PdInterval(PdIntervalArgs),
}

/// Overrides applied on top of the config file.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long = "burn-in")]
    pub burn_in: Option<usize>,
    #[arg(long = "candidate-kind")]
    pub candidate_kind: Option<CandidateKind>,
}

impl Overrides {
    fn apply(&self, mut cfg: SamplerConfig) -> Result<SamplerConfig> {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.chains {
            cfg.chains = v;
        }
        if let Some(v) = self.iterations {
            cfg.iterations = v;
        }
        if let Some(v) = self.burn_in {
            cfg.burn_in = v;
        }
        if let Some(v) = self.candidate_kind {
            cfg.candidate_kind = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, required_unless_present = "replay")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Rerun exactly what an earlier manifest records.
    #[arg(long, conflicts_with_all = ["data", "config"])]
    pub replay: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    #[arg(long)]
    pub draws: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write per-draw weights as points in the unit tetrahedron (4 outcomes only).
    #[arg(long)]
    pub barycentric: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `early`, `late`, `non` or a key-value truth file.
    #[arg(long)]
    pub truth: String,
    /// `normal`, `tN` or `skewnormal`.
    #[arg(long, default_value = "normal")]
    pub dist: Distribution,
    /// `none`, `default` or a missingness file.
    #[arg(long, default_value = "none")]
    pub miss: String,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub subjects: Option<usize>,
    #[arg(long)]
    pub times: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct PdIntervalArgs {
    /// Key-value file with `L`, `J` and correlation values.
    pub params: PathBuf,
    /// Parameter name such as `eta.1.2`, `rho.1` or `gamma`.
    pub target: String,
}

/// Parses `args` (including the program name), runs and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => fit(&a),
        Command::Weights(a) => weights(&a),
        Command::Simulate(a) => simulate(&a),
        Command::PdInterval(a) => pd_interval(&a),
    }
}

fn base_config(path: Option<&Path>) -> Result<SamplerConfig> {
    match path {
        Some(p) => io::load_config(p),
        None => Ok(SamplerConfig::default()),
    }
}

fn fit(a: &FitArgs) -> Result<()> {
    let start = Instant::now();
    let (data_path, config) = match &a.replay {
        Some(m) => {
            let manifest = RunManifest::load(m)?;
            if manifest.command != "fit" {
                return Err(Error::InvalidArgument(format!(
                    "{} records a '{}' run, not 'fit'",
                    m.display(),
                    manifest.command
                )));
            }
            let path = manifest
                .data_path
                .clone()
                .ok_or_else(|| Error::Data("manifest has no data path".into()))?;
            let bytes = io::read_file(&path)?;
            if manifest.data_sha256.as_deref() != Some(io::sha256_hex(&bytes).as_str()) {
                return Err(Error::Data(format!("{} changed since the recorded run", path.display())));
            }
            (path, a.overrides.apply(manifest.config)?)
        }
        None => {
            let path = a.data.clone().expect("clap requires --data");
            (path, a.overrides.apply(base_config(a.config.as_deref())?)?)
        }
    };
    let bytes = io::read_file(&data_path)?;
    let data = io::parse_dataset(&data_path)?;
    let outputs = run_chains(&data, &config)?;

    io::ensure_dir(&a.out)?;
    for out in &outputs {
        io::write_to(&a.out.join(io::draws_file_name(out.chain)), |f| {
            io::write_draws(out, config.burn_in, f)
        })?;
    }
    io::write_to(&a.out.join("diagnostics.csv"), |f| io::write_diagnostics(&outputs, f))?;

    let mut manifest = RunManifest::new("fit", &config);
    manifest.data_path = Some(std::path::absolute(&data_path).unwrap_or(data_path.clone()));
    manifest.data_sha256 = Some(io::sha256_hex(&bytes));
    manifest.outcome_names = Some(data.outcome_names.clone());
    manifest.times = Some(data.max_times());
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    manifest.save(&a.out.join(MANIFEST_FILE))?;

    println!(
        "{} chains x {} draws, {} subjects, {} outcomes, {} times -> {}",
        outputs.len(),
        config.kept_draws(),
        data.subjects.len(),
        data.outcome_names.len(),
        data.max_times(),
        a.out.display()
    );
    Ok(())
}

fn weights(a: &WeightsArgs) -> Result<()> {
    let outputs = io::read_draws_dir(&a.draws)?;
    let summary = posterior_weights(&outputs)?;
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        io::ensure_dir(dir)?;
    }
    io::write_to(&a.out, |f| io::write_weights(&summary, f))?;
    if let Some(path) = &a.barycentric {
        let points = export_barycentric(&summary.draw_weights)?;
        io::write_to(path, |f| io::write_barycentric(&points, f))?;
    }
    let mut stdout = std::io::stdout().lock();
    for (k, name) in summary.outcome_names.iter().enumerate() {
        let _ = writeln!(
            stdout,
            "w.{name:<8} {:.3}  [{:.3}, {:.3}]",
            summary.point.as_slice()[k],
            summary.lower[k],
            summary.upper[k]
        );
    }
    let _ = writeln!(
        stdout,
        "SRM_opt    {:.3}  [{:.3}, {:.3}]\nSRM_equal  {:.3}  [{:.3}, {:.3}]",
        summary.srm_opt,
        summary.srm_opt_interval.0,
        summary.srm_opt_interval.1,
        summary.srm_equal,
        summary.srm_equal_interval.0,
        summary.srm_equal_interval.1
    );
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let start = Instant::now();
    let config = a.overrides.apply(base_config(a.config.as_deref())?)?;
    let truth = io::load_truth(&a.truth, a.dist, a.subjects, a.times)?;
    let miss = io::load_missingness(&a.miss)?;
    let study = run_study(&truth, miss.as_ref(), a.replicates, &config, config.seed)?;

    io::ensure_dir(&a.out)?;
    io::write_to(&a.out.join("opchar.csv"), |f| io::write_opchar(&study, f))?;
    io::write_to(&a.out.join("diagnostics.csv"), |f| io::write_study_diagnostics(&study, f))?;
    io::write_to(&a.out.join("replicates.csv"), |f| {
        io::write_replicates(&study, &truth.outcome_names, f)
    })?;

    let mut manifest = RunManifest::new("simulate", &config);
    manifest.outcome_names = Some(truth.outcome_names.clone());
    manifest.times = Some(truth.times);
    manifest.extra.insert("truth".into(), Value::from(a.truth.clone()));
    manifest.extra.insert("distribution".into(), Value::from(a.dist.to_string()));
    manifest.extra.insert("missingness".into(), Value::from(a.miss.clone()));
    manifest.extra.insert("replicates".into(), Value::from(a.replicates));
    manifest.extra.insert("subjects".into(), Value::from(truth.n_subjects));
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    manifest.save(&a.out.join(MANIFEST_FILE))?;

    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{:<10} {:>8} {:>9} {:>8} {:>8}", "quantity", "truth", "coverage", "bias", "rmse");
    for r in &study.report.rows {
        let _ = writeln!(
            stdout,
            "{:<10} {:>8.3} {:>9.3} {:>8.3} {:>8.3}",
            r.quantity, r.truth, r.coverage, r.bias, r.rmse
        );
    }
    Ok(())
}

fn pd_interval(a: &PdIntervalArgs) -> Result<()> {
    let (spec, params) = io::load_params(&a.params)?;
    let target = spec.parse_param(&a.target)?;
    let iv = pd_support(&spec, &params, target)?;
    println!("{:.12} {:.12}", iv.lo, iv.hi);
    Ok(())
}
