//! Command-line entry points: simulate, calibrate, validate, report.
//!
//! Every command writes its artifacts plus a `run_meta.json` carrying the
//! canonical config, its hash, the seed, and input-file digests — enough to
//! re-run the command bit-identically. Nothing here reads clocks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::behaviour::ModelParams;
use crate::calibrate::{self, phase_seed, PosteriorEnsemble};
use crate::config::{self, hex_digest, AbcMethod, Overrides, RunConfig};
use crate::data::{self, DailySeries, ExternalSignal, FillPolicy};
use crate::engine::{self, Channel};
use crate::error::{Error, Result};
use crate::metrics::{self, ValidationReport};
use crate::network::SocialNetwork;

const PHASE_NETWORK: u64 = 0x1000;
const PHASE_SINGLE_RUN: u64 = 0x1001;

#[derive(Parser)]
#[command(
    name = "cbsim",
    version,
    about = "Network model of collective protective behaviour driven by an epidemic hazard signal"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration file (key = value grammar)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Master seed; overrides the config file
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Cap on worker threads; outputs never depend on it
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output directory; overrides the config file
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Apply 7-day centered smoothing to the search series before normalizing
    #[arg(long, global = true)]
    pub smooth_search: bool,

    /// Missing-day fill policy applied to both the cases and search series
    #[arg(long, global = true, value_enum)]
    pub fill: Option<FillArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FillArg {
    Zero,
    Previous,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run one simulation with explicit parameters and emit channel CSVs
    Simulate {
        /// Parameter file (key = value, all 12 parameters); falls back to
        /// params_file in the config
        #[arg(long, value_name = "PATH")]
        params: Option<PathBuf>,
    },
    /// Fit parameters by ABC and emit the posterior and predictive bands
    Calibrate,
    /// Score previously emitted bands against the observed series
    Validate {
        /// Directory holding bands_*.csv (defaults to the output directory)
        #[arg(long, value_name = "DIR")]
        bands: Option<PathBuf>,
    },
    /// Print a human summary of a run directory
    Report {
        /// Run directory (defaults to the config's output directory)
        #[arg(long, value_name = "DIR")]
        run: Option<PathBuf>,
    },
}

pub fn run() -> anyhow::Result<()> {
    run_with(Cli::parse())
}

pub fn run_with(cli: Cli) -> anyhow::Result<()> {
    let overrides = Overrides {
        seed: cli.seed,
        threads: cli.threads,
        out: cli.out.clone(),
        smooth_search: cli.smooth_search,
        fill: cli.fill.map(|f| match f {
            FillArg::Zero => FillPolicy::Zero,
            FillArg::Previous => FillPolicy::Previous,
        }),
    };

    if let Command::Report { run } = &cli.command {
        let dir = match (run, &cli.config) {
            (Some(d), _) => d.clone(),
            (None, Some(path)) => config::load_config(path, &overrides)?.out_dir,
            (None, None) => anyhow::bail!("report needs --run DIR or --config PATH"),
        };
        cmd_report(&dir)?;
        return Ok(());
    }

    let cfg_path = cli
        .config
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("--config PATH is required for this command"))?;
    let cfg = config::load_config(cfg_path, &overrides)?;

    let dispatch = || -> Result<()> {
        match &cli.command {
            Command::Simulate { params } => cmd_simulate(&cfg, params.as_deref()),
            Command::Calibrate => cmd_calibrate(&cfg),
            Command::Validate { bands } => cmd_validate(&cfg, bands.as_deref()),
            Command::Report { .. } => unreachable!("handled above"),
        }
    };
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()?
            .install(dispatch)?,
        None => dispatch()?,
    }
    Ok(())
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex_digest(hasher))
}

#[derive(Serialize)]
struct CalibrationMeta {
    method: &'static str,
    accepted: usize,
    epsilons: Vec<f64>,
    attempts: Vec<usize>,
    acceptance_rates: Vec<f64>,
}

#[derive(Serialize)]
struct RunMeta {
    command: &'static str,
    version: &'static str,
    seed: u64,
    threads: Option<usize>,
    config_hash: String,
    quantile_rule: &'static str,
    emotion_transform: &'static str,
    band_uncertainty: &'static str,
    inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    calibration: Option<CalibrationMeta>,
    config: String,
}

impl RunMeta {
    fn new(command: &'static str, cfg: &RunConfig) -> Self {
        RunMeta {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            threads: cfg.threads,
            config_hash: cfg.config_hash(),
            quantile_rule: "linear interpolation between order statistics (type 7)",
            emotion_transform: "sqrt of min-max normalized mean emotion",
            band_uncertainty: "posterior draws x run-to-run noise",
            inputs: BTreeMap::new(),
            calibration: None,
            config: cfg.to_kv_string(),
        }
    }

    fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    fn write(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join("run_meta.json");
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Data {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        std::fs::write(&path, json + "\n")
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::io(cfg.out_dir.display().to_string(), e))
}

/// Load the case series and scale it into the hazard signal.
fn load_signal(cfg: &RunConfig) -> Result<(ExternalSignal, PathBuf)> {
    let path = cfg
        .cases
        .path
        .clone()
        .ok_or_else(|| Error::Config("data.cases is required for this command".into()))?;
    let series = data::load_daily_csv(
        &path,
        &cfg.cases.date_column,
        &cfg.cases.value_column,
        Some(cfg.window),
        cfg.fill_cases,
    )?;
    Ok((data::min_max_normalize(&series)?, path))
}

/// Load the observed search series: window, fill, optional smoothing, then
/// min-max normalization — the calibration target.
fn load_observed_search(cfg: &RunConfig) -> Result<(DailySeries, PathBuf)> {
    let path = cfg
        .search
        .path
        .clone()
        .ok_or_else(|| Error::Config("data.search is required for this command".into()))?;
    let mut series = data::load_daily_csv(
        &path,
        &cfg.search.date_column,
        &cfg.search.value_column,
        Some(cfg.window),
        cfg.fill_search,
    )?;
    if cfg.smooth_search {
        series = data::smooth_centered(&series, 3);
    }
    let normalized = data::min_max_normalize(&series)?;
    Ok((normalized.series, path))
}

fn build_network(cfg: &RunConfig) -> Result<SocialNetwork> {
    SocialNetwork::generate(cfg.network, cfg.agents, phase_seed(cfg.seed, PHASE_NETWORK))
}

fn cmd_simulate(cfg: &RunConfig, params_flag: Option<&Path>) -> Result<()> {
    let params_path = params_flag
        .map(Path::to_path_buf)
        .or_else(|| cfg.params_file.clone())
        .ok_or_else(|| {
            Error::Config("simulate needs --params PATH or params_file in the config".into())
        })?;
    let text = std::fs::read_to_string(&params_path)
        .map_err(|e| Error::io(params_path.display().to_string(), e))?;
    let params: ModelParams = config::params_from_kv(&text)?;
    let (signal, cases_path) = load_signal(cfg)?;
    let net = build_network(cfg)?;
    let traj = engine::run_simulation(
        &params,
        &net,
        &signal,
        phase_seed(cfg.seed, PHASE_SINGLE_RUN),
    )?;

    ensure_out_dir(cfg)?;
    engine::write_trajectory_csv(&cfg.out_dir.join("trajectory.csv"), &traj)?;
    for channel in [Channel::Behaviour, Channel::Emotion, Channel::Perception] {
        let series = engine::observable_transform(&traj, channel);
        data::write_daily_csv(
            &cfg.out_dir.join(format!("channel_{}.csv", channel.name())),
            &series,
        )?;
    }
    let mut meta = RunMeta::new("simulate", cfg);
    meta.add_input(&cases_path)?;
    meta.add_input(&params_path)?;
    meta.write(&cfg.out_dir)?;

    println!(
        "simulate: {} agents on {}, {} days -> {}",
        cfg.agents,
        cfg.network,
        traj.len(),
        cfg.out_dir.display()
    );
    Ok(())
}

fn run_abc(
    cfg: &RunConfig,
    obs: &DailySeries,
    net: &SocialNetwork,
    signal: &ExternalSignal,
) -> Result<(PosteriorEnsemble, &'static str)> {
    match cfg.abc.method {
        AbcMethod::Smc => {
            let post = calibrate::abc_smc(
                &cfg.prior,
                obs,
                net,
                signal,
                &cfg.abc.schedule,
                cfg.abc.pop_size,
                cfg.seed,
            )?;
            Ok((post, "abc-smc"))
        }
        AbcMethod::Rejection => {
            let post = calibrate::abc_rejection(
                &cfg.prior,
                obs,
                net,
                signal,
                cfg.abc.n_draws,
                cfg.abc.rule,
                cfg.seed,
            )?;
            Ok((post, "abc-rejection"))
        }
    }
}

fn cmd_calibrate(cfg: &RunConfig) -> Result<()> {
    let (signal, cases_path) = load_signal(cfg)?;
    let (obs, search_path) = load_observed_search(cfg)?;
    let net = build_network(cfg)?;
    let (post, method) = run_abc(cfg, &obs, &net, &signal)?;
    let bands = calibrate::posterior_predictive(&post, &net, &signal, cfg.seed)?;

    ensure_out_dir(cfg)?;
    calibrate::write_posterior_csv(&cfg.out_dir.join("posterior.csv"), &post)?;
    let best = post
        .draws
        .iter()
        .min_by(|a, b| a.distance.partial_cmp(&b.distance).unwrap())
        .expect("non-empty posterior");
    std::fs::write(
        cfg.out_dir.join("best_params.kv"),
        config::params_to_kv(&best.params),
    )
    .map_err(|e| Error::io(cfg.out_dir.join("best_params.kv").display().to_string(), e))?;
    engine::write_band_csv(&cfg.out_dir.join("bands_behaviour.csv"), &bands.behaviour)?;
    engine::write_band_csv(&cfg.out_dir.join("bands_emotion.csv"), &bands.emotion)?;
    engine::write_band_csv(&cfg.out_dir.join("bands_perception.csv"), &bands.perception)?;
    engine::write_band_csv(
        &cfg.out_dir.join("bands_behaviour_raw.csv"),
        &bands.behaviour_raw,
    )?;

    let mut meta = RunMeta::new("calibrate", cfg);
    meta.add_input(&cases_path)?;
    meta.add_input(&search_path)?;
    meta.calibration = Some(CalibrationMeta {
        method,
        accepted: post.len(),
        epsilons: post.epsilons.clone(),
        attempts: post.attempts.clone(),
        acceptance_rates: post.acceptance_rates.clone(),
    });
    meta.write(&cfg.out_dir)?;

    let coverage = metrics::coverage_fraction(&obs, &bands.behaviour)?;
    println!(
        "calibrate ({method}): {} draws accepted, final epsilon {:.6}, fitted-series coverage {:.3} -> {}",
        post.len(),
        post.epsilons.last().copied().unwrap_or(f64::NAN),
        coverage,
        cfg.out_dir.display()
    );
    Ok(())
}

fn cmd_validate(cfg: &RunConfig, bands_dir: Option<&Path>) -> Result<()> {
    let dir = bands_dir.unwrap_or(&cfg.out_dir);
    let behaviour = engine::read_band_csv(&dir.join("bands_behaviour.csv"))?;
    let perception = engine::read_band_csv(&dir.join("bands_perception.csv"))?;
    let behaviour_raw = engine::read_band_csv(&dir.join("bands_behaviour_raw.csv"))?;

    let (obs, search_path) = load_observed_search(cfg)?;
    let coverage = metrics::coverage_fraction(&obs, &behaviour)?;

    let survey_path = cfg
        .survey
        .path
        .clone()
        .ok_or_else(|| Error::Config("data.survey is required for validate".into()))?;
    let survey = data::load_survey_csv(
        &survey_path,
        &cfg.survey.date_column,
        &cfg.survey.value_column,
    )?;
    let (survey_k, survey_n) = metrics::survey_capture(&survey, &perception)?;

    let rt_path = cfg
        .rt
        .path
        .clone()
        .ok_or_else(|| Error::Config("data.rt is required for validate".into()))?;
    let rt = data::RtSeries::new(data::load_daily_csv(
        &rt_path,
        &cfg.rt.date_column,
        &cfg.rt.value_column,
        None,
        FillPolicy::Previous,
    )?)?;

    // Correlate over the dates where bands and R_t both exist.
    let overlap = |median: DailySeries| -> Result<(f64, f64)> {
        let from = median.start.max(rt.series.start);
        let to = median
            .end()
            .zip(rt.series.end())
            .map(|(a, b)| a.min(b))
            .ok_or_else(|| Error::Misaligned("empty series in correlation".into()))?;
        let a = median.restrict(from, to).ok_or_else(|| {
            Error::Misaligned("reproduction-number series does not overlap the bands".into())
        })?;
        let b = rt.series.restrict(from, to).unwrap();
        metrics::pearson(&b, &a)
    };
    let (pearson_r, pearson_p) = overlap(behaviour_raw.median_series("mean_behaviour"))?;
    let (pearson_r_normalized, pearson_p_normalized) =
        overlap(behaviour.median_series("behaviour"))?;

    let window = format!(
        "{}..{}",
        behaviour.start,
        behaviour.end().map(|d| d.to_string()).unwrap_or_default()
    );
    let report = ValidationReport {
        coverage,
        survey_k,
        survey_n,
        pearson_r,
        pearson_p,
        pearson_r_normalized,
        pearson_p_normalized,
        window,
        config_hash: cfg.config_hash(),
    };

    ensure_out_dir(cfg)?;
    let path = cfg.out_dir.join("validation_report.json");
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Data {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(path.display().to_string(), e))?;

    let mut meta = RunMeta::new("validate", cfg);
    meta.add_input(&search_path)?;
    meta.add_input(&survey_path)?;
    meta.add_input(&rt_path)?;
    for name in ["bands_behaviour.csv", "bands_perception.csv", "bands_behaviour_raw.csv"] {
        meta.add_input(&dir.join(name))?;
    }
    meta.write(&cfg.out_dir)?;

    println!("validate: coverage {coverage:.3}");
    println!("validate: surveys inside band {survey_k}/{survey_n}");
    println!("validate: pearson r {pearson_r:.3} (p {pearson_p:.4}) vs reproduction number");
    println!("validate: report -> {}", path.display());
    Ok(())
}

fn cmd_report(dir: &Path) -> Result<()> {
    let meta_path = dir.join("run_meta.json");
    if !meta_path.exists() {
        return Err(Error::Config(format!(
            "{} is not a run directory (no run_meta.json)",
            dir.display()
        )));
    }
    let text = std::fs::read_to_string(&meta_path)
        .map_err(|e| Error::io(meta_path.display().to_string(), e))?;
    let meta: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Data {
        path: meta_path.display().to_string(),
        reason: e.to_string(),
    })?;
    println!("run directory {}", dir.display());
    for key in ["command", "version", "seed", "config_hash"] {
        if let Some(v) = meta.get(key) {
            println!("  {key}: {v}");
        }
    }
    if let Some(cal) = meta.get("calibration") {
        println!("  calibration: {}", serde_json::to_string(cal).unwrap_or_default());
    }

    let artifacts = [
        "trajectory.csv",
        "channel_behaviour.csv",
        "channel_emotion.csv",
        "channel_perception.csv",
        "posterior.csv",
        "best_params.kv",
        "bands_behaviour.csv",
        "bands_emotion.csv",
        "bands_perception.csv",
        "bands_behaviour_raw.csv",
        "validation_report.json",
    ];
    for name in artifacts {
        let path = dir.join(name);
        if let Ok(text) = std::fs::read_to_string(&path) {
            let rows = text.lines().count().saturating_sub(1);
            println!("  {name}: {rows} data rows");
        }
    }
    let report_path = dir.join("validation_report.json");
    if let Ok(text) = std::fs::read_to_string(&report_path) {
        if let Ok(v) = serde_json::from_str::<ValidationReport>(&text) {
            println!(
                "  validation: coverage {:.3}, surveys {}/{}, pearson r {:.3} (p {:.4})",
                v.coverage, v.survey_k, v.survey_n, v.pearson_r, v.pearson_p
            );
        }
    }
    Ok(())
}
