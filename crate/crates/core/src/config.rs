//! Run configuration: a plain `key = value` file format with `#` comments,
//! strict unknown/duplicate-key rejection, and a canonical serialization
//! whose SHA-256 identifies the run. Command-line flags override the file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use sha2::{Digest, Sha256};

use crate::behaviour::{ModelParams, PARAM_NAMES};
use crate::calibrate::{AcceptRule, ParamRange, PriorSpec, Schedule};
use crate::data::FillPolicy;
use crate::error::{Error, Result};
use crate::network::NetworkKind;

pub fn default_window() -> (NaiveDate, NaiveDate) {
    (
        NaiveDate::from_ymd_opt(2020, 1, 31).unwrap(),
        NaiveDate::from_ymd_opt(2020, 6, 28).unwrap(),
    )
}

/// One observed-series input: file path plus the CSV columns to read.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesInput {
    pub path: Option<PathBuf>,
    pub date_column: String,
    pub value_column: String,
}

impl Default for SeriesInput {
    fn default() -> Self {
        SeriesInput {
            path: None,
            date_column: "date".into(),
            value_column: "value".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbcMethod {
    Smc,
    Rejection,
}

impl AbcMethod {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "smc" => Ok(AbcMethod::Smc),
            "rejection" => Ok(AbcMethod::Rejection),
            other => Err(Error::Config(format!(
                "unknown abc.method {other:?} (expected smc or rejection)"
            ))),
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            AbcMethod::Smc => "smc",
            AbcMethod::Rejection => "rejection",
        }
    }
}

/// Calibration settings; the rejection fields are dormant under SMC and
/// vice versa, but all are preserved by serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct AbcSettings {
    pub method: AbcMethod,
    pub pop_size: usize,
    pub schedule: Schedule,
    pub n_draws: usize,
    pub rule: AcceptRule,
}

impl Default for AbcSettings {
    fn default() -> Self {
        AbcSettings {
            method: AbcMethod::Smc,
            pop_size: 500,
            schedule: Schedule::default(),
            n_draws: 1000,
            rule: AcceptRule::Quantile(0.1),
        }
    }
}

/// Everything a run needs. One top-level seed feeds every random stream.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub window: (NaiveDate, NaiveDate),
    pub agents: usize,
    pub network: NetworkKind,
    pub cases: SeriesInput,
    pub search: SeriesInput,
    pub rt: SeriesInput,
    pub survey: SeriesInput,
    pub fill_cases: FillPolicy,
    pub fill_search: FillPolicy,
    pub smooth_search: bool,
    pub params_file: Option<PathBuf>,
    pub prior: PriorSpec,
    pub abc: AbcSettings,
}

impl RunConfig {
    pub fn with_seed(seed: u64) -> Self {
        RunConfig {
            seed,
            out_dir: PathBuf::from("out"),
            threads: None,
            window: default_window(),
            agents: 2000,
            network: NetworkKind::WattsStrogatz { k: 10, beta: 0.1 },
            cases: SeriesInput::default(),
            search: SeriesInput::default(),
            rt: SeriesInput::default(),
            survey: SeriesInput::default(),
            fill_cases: FillPolicy::Zero,
            fill_search: FillPolicy::Previous,
            smooth_search: false,
            params_file: None,
            prior: PriorSpec::default(),
            abc: AbcSettings::default(),
        }
    }

    /// Structural validation (ranges, schedules, priors). File existence is
    /// checked separately at load time.
    pub fn validate(&self) -> Result<()> {
        if self.agents == 0 {
            return Err(Error::Config("agents must be >= 1".into()));
        }
        if self.window.0 > self.window.1 {
            return Err(Error::Config(format!(
                "window start {} is after window end {}",
                self.window.0, self.window.1
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        match self.network {
            NetworkKind::Complete => {}
            NetworkKind::ErdosRenyi { p } => {
                if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                    return Err(Error::Config(format!("network.p {p} not in [0, 1]")));
                }
            }
            NetworkKind::WattsStrogatz { k, beta } => {
                if k % 2 != 0 || k >= self.agents {
                    return Err(Error::Config(format!(
                        "network.k {k} must be even and < agents ({})",
                        self.agents
                    )));
                }
                if !(0.0..=1.0).contains(&beta) || !beta.is_finite() {
                    return Err(Error::Config(format!("network.beta {beta} not in [0, 1]")));
                }
            }
            NetworkKind::BarabasiAlbert { m } => {
                if m == 0 || m >= self.agents {
                    return Err(Error::Config(format!(
                        "network.m {m} must satisfy 1 <= m < agents ({})",
                        self.agents
                    )));
                }
            }
        }
        self.prior.validate()?;
        match self.abc.method {
            AbcMethod::Smc => {
                if self.abc.pop_size < 2 {
                    return Err(Error::Config("abc.pop_size must be >= 2".into()));
                }
                match &self.abc.schedule {
                    Schedule::Fixed(eps) => {
                        if eps.is_empty()
                            || eps.iter().any(|e| !e.is_finite() || *e <= 0.0)
                            || eps.windows(2).any(|w| w[1] >= w[0])
                        {
                            return Err(Error::Config(
                                "abc.epsilons must be positive and strictly decreasing".into(),
                            ));
                        }
                    }
                    Schedule::Adaptive {
                        stages,
                        keep_quantile,
                    } => {
                        if *stages == 0 {
                            return Err(Error::Config("abc.stages must be >= 1".into()));
                        }
                        if !(*keep_quantile > 0.0 && *keep_quantile <= 1.0) {
                            return Err(Error::Config(format!(
                                "abc.keep_quantile {keep_quantile} not in (0, 1]"
                            )));
                        }
                    }
                }
            }
            AbcMethod::Rejection => {
                if self.abc.n_draws == 0 {
                    return Err(Error::Config("abc.n_draws must be >= 1".into()));
                }
                match self.abc.rule {
                    AcceptRule::Epsilon(e) => {
                        if e.is_nan() || e <= 0.0 {
                            return Err(Error::Config(format!("abc.epsilon {e} must be > 0")));
                        }
                    }
                    AcceptRule::Quantile(q) => {
                        if !(q > 0.0 && q <= 1.0) {
                            return Err(Error::Config(format!(
                                "abc.quantile {q} not in (0, 1]"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Error if a configured input file does not exist.
    pub fn check_files(&self) -> Result<()> {
        let inputs = [
            ("data.cases", &self.cases.path),
            ("data.search", &self.search.path),
            ("data.rt", &self.rt.path),
            ("data.survey", &self.survey.path),
            ("params_file", &self.params_file),
        ];
        for (key, path) in inputs {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(Error::Config(format!(
                        "{key} = {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Canonical serialization; parsing it back reproduces the config
    /// exactly, and its SHA-256 is the run's config hash.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("seed", self.seed.to_string());
        line("out", self.out_dir.display().to_string());
        if let Some(t) = self.threads {
            line("threads", t.to_string());
        }
        line("agents", self.agents.to_string());
        line("window.start", self.window.0.to_string());
        line("window.end", self.window.1.to_string());
        match self.network {
            NetworkKind::Complete => line("network", "complete".into()),
            NetworkKind::ErdosRenyi { p } => {
                line("network", "erdos_renyi".into());
                line("network.p", p.to_string());
            }
            NetworkKind::WattsStrogatz { k, beta } => {
                line("network", "watts_strogatz".into());
                line("network.k", k.to_string());
                line("network.beta", beta.to_string());
            }
            NetworkKind::BarabasiAlbert { m } => {
                line("network", "barabasi_albert".into());
                line("network.m", m.to_string());
            }
        }
        for (name, input) in [
            ("cases", &self.cases),
            ("search", &self.search),
            ("rt", &self.rt),
            ("survey", &self.survey),
        ] {
            if let Some(p) = &input.path {
                line(&format!("data.{name}"), p.display().to_string());
            }
            line(
                &format!("data.{name}.date_column"),
                input.date_column.clone(),
            );
            line(
                &format!("data.{name}.value_column"),
                input.value_column.clone(),
            );
        }
        line("fill.cases", self.fill_cases.as_str().into());
        line("fill.search", self.fill_search.as_str().into());
        line("smooth_search", self.smooth_search.to_string());
        if let Some(p) = &self.params_file {
            line("params_file", p.display().to_string());
        }
        line("abc.method", self.abc.method.as_str().into());
        line("abc.pop_size", self.abc.pop_size.to_string());
        match &self.abc.schedule {
            Schedule::Fixed(eps) => {
                let joined: Vec<String> = eps.iter().map(|e| e.to_string()).collect();
                line("abc.epsilons", joined.join(","));
            }
            Schedule::Adaptive {
                stages,
                keep_quantile,
            } => {
                line("abc.stages", stages.to_string());
                line("abc.keep_quantile", keep_quantile.to_string());
            }
        }
        line("abc.n_draws", self.abc.n_draws.to_string());
        match self.abc.rule {
            AcceptRule::Epsilon(e) => line("abc.epsilon", e.to_string()),
            AcceptRule::Quantile(q) => line("abc.quantile", q.to_string()),
        }
        for (i, name) in PARAM_NAMES.iter().enumerate() {
            let r = self.prior.ranges[i];
            let v = if r.is_pinned() {
                r.lo.to_string()
            } else {
                format!("{}..{}", r.lo, r.hi)
            };
            line(&format!("prior.{name}"), v);
        }
        s
    }

    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_kv_string().as_bytes());
        hex_digest(hasher)
    }
}

pub(crate) fn hex_digest(hasher: Sha256) -> String {
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// CLI flag overrides; flags win over file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub smooth_search: bool,
    pub fill: Option<FillPolicy>,
}

/// Parse `key = value` lines; `#` starts a comment, blank lines are ignored.
/// Duplicate keys and malformed lines are errors with their line number.
fn parse_kv_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {lineno}: expected `key = value`, got {line:?}"))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty()
            || !key
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.')
        {
            return Err(Error::Config(format!(
                "line {lineno}: invalid key {key:?} (lowercase, digits, '_', '.')"
            )));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!(
                "line {lineno}: duplicate key {key:?}"
            )));
        }
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {v:?}: {e}")))
}

fn parse_date_value(key: &str, v: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(v, "%Y-%m-%d")
        .map_err(|e| Error::Config(format!("{key}: bad date {v:?} (expected YYYY-MM-DD): {e}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true or false, got {v:?}"
        ))),
    }
}

fn parse_range(key: &str, v: &str) -> Result<ParamRange> {
    if let Some((lo, hi)) = v.split_once("..") {
        Ok(ParamRange::new(
            parse_num::<f64>(key, lo.trim())?,
            parse_num::<f64>(key, hi.trim())?,
        ))
    } else {
        Ok(ParamRange::pinned(parse_num::<f64>(key, v)?))
    }
}

/// Parse configuration text and apply flag overrides. The seed must come
/// from the file or the `--seed` flag; it is never invented.
pub fn parse_config(text: &str, overrides: &Overrides) -> Result<RunConfig> {
    let mut kv = parse_kv_text(text)?;
    let mut take = |key: &str| kv.remove(key);

    let seed = match (overrides.seed, take("seed")) {
        (Some(s), _) => s,
        (None, Some(v)) => parse_num("seed", &v)?,
        (None, None) => {
            return Err(Error::Config(
                "seed is required: set `seed = <integer>` in the config or pass --seed".into(),
            ))
        }
    };
    let mut cfg = RunConfig::with_seed(seed);

    if let Some(v) = take("out") {
        cfg.out_dir = PathBuf::from(v);
    }
    if let Some(out) = &overrides.out {
        cfg.out_dir = out.clone();
    }
    if let Some(v) = take("threads") {
        cfg.threads = Some(parse_num("threads", &v)?);
    }
    if overrides.threads.is_some() {
        cfg.threads = overrides.threads;
    }
    if let Some(v) = take("agents") {
        cfg.agents = parse_num("agents", &v)?;
    }
    if let Some(v) = take("window.start") {
        cfg.window.0 = parse_date_value("window.start", &v)?;
    }
    if let Some(v) = take("window.end") {
        cfg.window.1 = parse_date_value("window.end", &v)?;
    }

    let kind = take("network").unwrap_or_else(|| "watts_strogatz".into());
    cfg.network = match kind.as_str() {
        "complete" => NetworkKind::Complete,
        "erdos_renyi" => {
            let p = take("network.p").ok_or_else(|| {
                Error::Config("network.p is required for erdos_renyi".into())
            })?;
            NetworkKind::ErdosRenyi {
                p: parse_num("network.p", &p)?,
            }
        }
        "watts_strogatz" => {
            let k = match take("network.k") {
                Some(v) => parse_num("network.k", &v)?,
                None => 10,
            };
            let beta = match take("network.beta") {
                Some(v) => parse_num("network.beta", &v)?,
                None => 0.1,
            };
            NetworkKind::WattsStrogatz { k, beta }
        }
        "barabasi_albert" => {
            let m = take("network.m").ok_or_else(|| {
                Error::Config("network.m is required for barabasi_albert".into())
            })?;
            NetworkKind::BarabasiAlbert {
                m: parse_num("network.m", &m)?,
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown network kind {other:?} (complete, erdos_renyi, watts_strogatz, barabasi_albert)"
            )))
        }
    };

    for (name, slot) in [
        ("cases", &mut cfg.cases),
        ("search", &mut cfg.search),
        ("rt", &mut cfg.rt),
        ("survey", &mut cfg.survey),
    ] {
        if let Some(v) = take(&format!("data.{name}")) {
            slot.path = Some(PathBuf::from(v));
        }
        if let Some(v) = take(&format!("data.{name}.date_column")) {
            slot.date_column = v;
        }
        if let Some(v) = take(&format!("data.{name}.value_column")) {
            slot.value_column = v;
        }
    }

    if let Some(v) = take("fill.cases") {
        cfg.fill_cases = FillPolicy::parse(&v)?;
    }
    if let Some(v) = take("fill.search") {
        cfg.fill_search = FillPolicy::parse(&v)?;
    }
    if let Some(fill) = overrides.fill {
        cfg.fill_cases = fill;
        cfg.fill_search = fill;
    }
    if let Some(v) = take("smooth_search") {
        cfg.smooth_search = parse_bool("smooth_search", &v)?;
    }
    if overrides.smooth_search {
        cfg.smooth_search = true;
    }
    if let Some(v) = take("params_file") {
        cfg.params_file = Some(PathBuf::from(v));
    }

    if let Some(v) = take("abc.method") {
        cfg.abc.method = AbcMethod::parse(&v)?;
    }
    if let Some(v) = take("abc.pop_size") {
        cfg.abc.pop_size = parse_num("abc.pop_size", &v)?;
    }
    let epsilons = take("abc.epsilons");
    let stages = take("abc.stages");
    let keep_quantile = take("abc.keep_quantile");
    match (epsilons, &stages, &keep_quantile) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(Error::Config(
                "abc.epsilons conflicts with abc.stages / abc.keep_quantile".into(),
            ))
        }
        (Some(list), None, None) => {
            let eps: Vec<f64> = list
                .split(',')
                .map(|e| parse_num("abc.epsilons", e.trim()))
                .collect::<Result<_>>()?;
            cfg.abc.schedule = Schedule::Fixed(eps);
        }
        (None, _, _) => {
            let Schedule::Adaptive {
                stages: default_stages,
                keep_quantile: default_keep,
            } = Schedule::default()
            else {
                unreachable!()
            };
            cfg.abc.schedule = Schedule::Adaptive {
                stages: match stages {
                    Some(v) => parse_num("abc.stages", &v)?,
                    None => default_stages,
                },
                keep_quantile: match keep_quantile {
                    Some(v) => parse_num("abc.keep_quantile", &v)?,
                    None => default_keep,
                },
            };
        }
    }
    if let Some(v) = take("abc.n_draws") {
        cfg.abc.n_draws = parse_num("abc.n_draws", &v)?;
    }
    let epsilon = take("abc.epsilon");
    let quantile = take("abc.quantile");
    match (epsilon, quantile) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "abc.epsilon conflicts with abc.quantile".into(),
            ))
        }
        (Some(v), None) => cfg.abc.rule = AcceptRule::Epsilon(parse_num("abc.epsilon", &v)?),
        (None, Some(v)) => cfg.abc.rule = AcceptRule::Quantile(parse_num("abc.quantile", &v)?),
        (None, None) => {}
    }

    for (i, name) in PARAM_NAMES.iter().enumerate() {
        let key = format!("prior.{name}");
        if let Some(v) = take(&key) {
            cfg.prior.ranges[i] = parse_range(&key, &v)?;
        }
    }

    if !kv.is_empty() {
        let keys: Vec<&str> = kv.keys().map(String::as_str).collect();
        return Err(Error::Config(format!(
            "unknown key(s): {}",
            keys.join(", ")
        )));
    }

    cfg.validate()?;
    Ok(cfg)
}

/// Load and parse a config file, enforcing that referenced inputs exist.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let cfg = parse_config(&text, overrides)?;
    cfg.check_files()?;
    Ok(cfg)
}

/// Parse an explicit parameter file: the same kv grammar, all 12 parameter
/// names required, nothing else allowed.
pub fn params_from_kv(text: &str) -> Result<ModelParams> {
    let mut kv = parse_kv_text(text)?;
    let mut values = [0.0; 12];
    for (i, name) in PARAM_NAMES.iter().enumerate() {
        let v = kv
            .remove(*name)
            .ok_or_else(|| Error::Config(format!("parameter file missing {name}")))?;
        values[i] = parse_num(name, &v)?;
    }
    if !kv.is_empty() {
        let keys: Vec<&str> = kv.keys().map(String::as_str).collect();
        return Err(Error::Config(format!(
            "unknown key(s) in parameter file: {}",
            keys.join(", ")
        )));
    }
    let params = ModelParams::from_array(values);
    params.validate()?;
    Ok(params)
}

pub fn params_to_kv(params: &ModelParams) -> String {
    let v = params.to_array();
    let mut s = String::new();
    for (name, x) in PARAM_NAMES.iter().zip(v) {
        let _ = writeln!(s, "{name} = {x}");
    }
    s
}
