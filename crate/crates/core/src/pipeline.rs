//! Stage-by-stage orchestration over on-disk artifacts.
//!
//! Every stage reads its predecessors' files from the output directory, writes
//! its own, and leaves a `<stage>.manifest.json` describing the run. Settings
//! come from a plain-text `key = value` file; see [`PipelineConfig::KEYS`].

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use chrono::{FixedOffset, NaiveDate, NaiveTime};
use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corr::{feature_returns, period_correlation, standardize_rows, CorrelationMatrix, ReturnsMatrix};
use crate::error::{Error, Result};
use crate::ga::{brute_force_best, evolve, GaConfig, MutationTarget};
use crate::graph::save_gexf;
use crate::likelihood::{cluster_stats, log_likelihood, ClusterConfiguration};
use crate::marketdata::{aggregate, parse_ticks, write_ticks, BarTable, SessionCalendar};
use crate::powerlaw::{self, PowerLawFit};
use crate::states::{assign_all, extract_ssvs, read_assignments, write_assignments, StateSignatureVector};
use crate::synth::{synth_ticks, TickSynthSpec};
use crate::transitions::{estimate, TransitionMatrix};

pub const TICKS: &str = "ticks.csv";
pub const PLANTED_LABELS: &str = "planted_labels.json";
pub const BARS: &str = "bars.csv";
pub const RETURNS: &str = "returns.csv";
pub const CORRELATION_CSV: &str = "correlation.csv";
pub const CORRELATION_BIN: &str = "corr.bin";
pub const LABELS: &str = "labels.json";
pub const GA_RESULT: &str = "ga_result.json";
pub const POWERLAW: &str = "powerlaw.json";
pub const SIGNIFICANT: &str = "significant.json";
pub const SSVS: &str = "ssvs.json";
pub const ASSIGNMENTS: &str = "assignments.csv";
pub const TRANSITIONS_CSV: &str = "transitions.csv";
pub const TRANSITIONS_JSON: &str = "transitions.json";
pub const GRAPH: &str = "graph.gexf";
pub const ORACLE: &str = "oracle.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Synth,
    Aggregate,
    Correlate,
    Cluster,
    Powerlaw,
    Ssv,
    Assign,
    Transitions,
    ExportGraph,
    Oracle,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Synth,
        Stage::Aggregate,
        Stage::Correlate,
        Stage::Cluster,
        Stage::Powerlaw,
        Stage::Ssv,
        Stage::Assign,
        Stage::Transitions,
        Stage::ExportGraph,
        Stage::Oracle,
    ];

    /// Synthetic ticks through to the graph, in dependency order.
    pub const CHAIN: [Stage; 9] = [
        Stage::Synth,
        Stage::Aggregate,
        Stage::Correlate,
        Stage::Cluster,
        Stage::Powerlaw,
        Stage::Ssv,
        Stage::Assign,
        Stage::Transitions,
        Stage::ExportGraph,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Aggregate => "aggregate",
            Stage::Correlate => "correlate",
            Stage::Cluster => "cluster",
            Stage::Powerlaw => "powerlaw",
            Stage::Ssv => "ssv",
            Stage::Assign => "assign",
            Stage::Transitions => "transitions",
            Stage::ExportGraph => "export-graph",
            Stage::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config { key: "subcommand".into(), message: format!("unknown subcommand `{s}`") })
    }
}

/// Process exit status for a failed stage: 1 for configuration problems,
/// 2 for a missing input artifact, 3 for anything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => 1,
        Error::MissingArtifact(_) => 2,
        _ => 3,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GaOverrides {
    pub population_size: Option<usize>,
    pub max_generations: Option<usize>,
    pub stall_generations: Option<usize>,
    pub mutation_probability: Option<f64>,
    pub crossover_probability: Option<f64>,
    pub elite_count: Option<usize>,
    pub tournament_size: Option<usize>,
    pub mutation_target: Option<MutationTarget>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    pub instruments: usize,
    pub clusters: usize,
    pub coupling: f64,
    /// Explicit cluster sizes; otherwise the return periods are split evenly.
    pub sizes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub out: PathBuf,
    pub seed: u64,
    pub scale: u32,
    /// Tick input for `aggregate`; defaults to the synthetic ticks in `out`.
    pub ticks: Option<PathBuf>,
    /// Returns to assign against the signatures; defaults to `out/returns.csv`.
    pub assign_returns: Option<PathBuf>,
    pub days: Vec<NaiveDate>,
    pub open: NaiveTime,
    pub close: NaiveTime,
    pub utc_offset: FixedOffset,
    pub bootstrap: usize,
    pub include_overnight: bool,
    /// Worker threads; 0 leaves the choice to the runtime.
    pub workers: usize,
    pub ga: GaOverrides,
    pub synth: SynthSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let d = |m, day| NaiveDate::from_ymd_opt(2012, m, day).expect("valid date");
        Self {
            out: PathBuf::from("out"),
            seed: 0,
            scale: 60,
            ticks: None,
            assign_returns: None,
            days: SessionCalendar::weekdays(d(11, 1), d(11, 7)),
            open: NaiveTime::from_hms_opt(9, 0, 0).expect("valid time"),
            close: NaiveTime::from_hms_opt(17, 0, 0).expect("valid time"),
            utc_offset: FixedOffset::east_opt(2 * 3600).expect("valid offset"),
            bootstrap: powerlaw::DEFAULT_BOOTSTRAP,
            include_overnight: false,
            workers: 0,
            ga: GaOverrides::default(),
            synth: SynthSettings { instruments: 5, clusters: 4, coupling: 0.8, sizes: None },
        }
    }
}

fn bad(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.into(), message: message.into() }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, format!("expected true or false, got `{value}`"))),
    }
}

fn parse_date(key: &str, value: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(value, "%Y-%m-%d").map_err(|_| bad(key, format!("expected YYYY-MM-DD, got `{value}`")))
}

fn parse_time(key: &str, value: &str) -> Result<NaiveTime> {
    NaiveTime::parse_from_str(value, "%H:%M").map_err(|_| bad(key, format!("expected HH:MM, got `{value}`")))
}

impl PipelineConfig {
    pub const KEYS: [&'static str; 26] = [
        "out",
        "seed",
        "scale",
        "ticks",
        "assign_returns",
        "days",
        "start_date",
        "end_date",
        "open",
        "close",
        "utc_offset",
        "bootstrap",
        "include_overnight",
        "workers",
        "ga.population_size",
        "ga.max_generations",
        "ga.stall_generations",
        "ga.mutation_probability",
        "ga.crossover_probability",
        "ga.elite_count",
        "ga.tournament_size",
        "ga.mutation_target",
        "synth.instruments",
        "synth.clusters",
        "synth.coupling",
        "synth.sizes",
    ];

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        let (mut start, mut end) = (None, None);
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| bad(line, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if !Self::KEYS.contains(&key) {
                return Err(bad(key, "unknown key"));
            }
            if !seen.insert(key.to_string()) {
                return Err(bad(key, "given more than once"));
            }
            match key {
                "start_date" => start = Some(parse_date(key, value)?),
                "end_date" => end = Some(parse_date(key, value)?),
                _ => cfg.set(key, value)?,
            }
        }
        if seen.contains("days") && (start.is_some() || end.is_some()) {
            return Err(bad("days", "conflicts with start_date/end_date"));
        }
        match (start, end) {
            (Some(s), Some(e)) => cfg.days = SessionCalendar::weekdays(s, e),
            (None, None) => {}
            (None, _) => return Err(bad("start_date", "required with end_date")),
            (_, None) => return Err(bad("end_date", "required with start_date")),
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = parse_value(key, value)?,
            "scale" => self.scale = parse_value(key, value)?,
            "ticks" => self.ticks = Some(PathBuf::from(value)),
            "assign_returns" => self.assign_returns = Some(PathBuf::from(value)),
            "days" => {
                self.days = value.split(',').map(|d| parse_date(key, d.trim())).collect::<Result<_>>()?;
            }
            "open" => self.open = parse_time(key, value)?,
            "close" => self.close = parse_time(key, value)?,
            "utc_offset" => self.utc_offset = parse_value(key, value)?,
            "bootstrap" => self.bootstrap = parse_value(key, value)?,
            "include_overnight" => self.include_overnight = parse_bool(key, value)?,
            "workers" => self.workers = parse_value(key, value)?,
            "ga.population_size" => self.ga.population_size = Some(parse_value(key, value)?),
            "ga.max_generations" => self.ga.max_generations = Some(parse_value(key, value)?),
            "ga.stall_generations" => self.ga.stall_generations = Some(parse_value(key, value)?),
            "ga.mutation_probability" => self.ga.mutation_probability = Some(parse_value(key, value)?),
            "ga.crossover_probability" => self.ga.crossover_probability = Some(parse_value(key, value)?),
            "ga.elite_count" => self.ga.elite_count = Some(parse_value(key, value)?),
            "ga.tournament_size" => self.ga.tournament_size = Some(parse_value(key, value)?),
            "ga.mutation_target" => {
                self.ga.mutation_target = Some(match value {
                    "any_label" => MutationTarget::AnyLabel,
                    "existing_or_new" => MutationTarget::ExistingOrNew,
                    _ => return Err(bad(key, "expected any_label or existing_or_new")),
                })
            }
            "synth.instruments" => self.synth.instruments = parse_value(key, value)?,
            "synth.clusters" => self.synth.clusters = parse_value(key, value)?,
            "synth.coupling" => self.synth.coupling = parse_value(key, value)?,
            "synth.sizes" => {
                self.synth.sizes = Some(value.split(',').map(|s| parse_value(key, s.trim())).collect::<Result<_>>()?);
            }
            _ => return Err(bad(key, "unknown key")),
        }
        Ok(())
    }

    /// Checks cross-field constraints; called after parsing and after
    /// command-line overrides.
    pub fn validate(&self) -> Result<()> {
        self.calendar()?;
        self.ga_config()?;
        if self.bootstrap < 100 {
            return Err(bad("bootstrap", "at least 100 replicates are required"));
        }
        if self.synth.instruments == 0 {
            return Err(bad("synth.instruments", "must be positive"));
        }
        if self.synth.clusters == 0 {
            return Err(bad("synth.clusters", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.synth.coupling) {
            return Err(bad("synth.coupling", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn calendar(&self) -> Result<SessionCalendar> {
        SessionCalendar::new(self.days.clone(), self.open, self.close, self.scale, self.utc_offset)
    }

    /// Per-scale defaults with the configured overrides and the run seed.
    pub fn ga_config(&self) -> Result<GaConfig> {
        let mut g = GaConfig::for_scale(self.scale)?;
        let o = &self.ga;
        g.population_size = o.population_size.unwrap_or(g.population_size);
        g.max_generations = o.max_generations.unwrap_or(g.max_generations);
        g.stall_generations = o.stall_generations.unwrap_or(g.stall_generations);
        g.mutation_probability = o.mutation_probability.unwrap_or(g.mutation_probability);
        g.crossover_probability = o.crossover_probability.unwrap_or(g.crossover_probability);
        g.elite_count = o.elite_count.unwrap_or(g.elite_count);
        g.tournament_size = o.tournament_size.unwrap_or(g.tournament_size);
        g.mutation_target = o.mutation_target.unwrap_or(g.mutation_target);
        g.master_seed = self.seed;
        g.validate()?;
        Ok(g)
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn synth_sizes(&self, return_periods: usize) -> Result<Vec<usize>> {
        if let Some(sizes) = &self.synth.sizes {
            return Ok(sizes.clone());
        }
        let k = self.synth.clusters;
        if k > return_periods {
            return Err(bad("synth.clusters", format!("more clusters than the {return_periods} return periods")));
        }
        Ok((0..k).map(|i| return_periods / k + usize::from(i < return_periods % k)).collect())
    }
}

/// Record of one stage run, written next to its artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub inputs: Vec<String>,
    pub seed: u64,
    pub elapsed_ms: u64,
    pub outputs: Vec<String>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawReport {
    pub sizes: Vec<u64>,
    pub fit: Option<PowerLawFit>,
    /// Why no fit was possible, when `fit` is absent.
    pub fallback: Option<String>,
    pub significant: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub labels: ClusterConfiguration,
    pub log_likelihood: f64,
    pub ga_log_likelihood: Option<f64>,
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact(path.to_path_buf()))
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    require(path)?;
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

struct Io<'a> {
    cfg: &'a PipelineConfig,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Io<'_> {
    fn input(&mut self, name: &str) -> PathBuf {
        self.external(self.cfg.artifact(name))
    }

    fn external(&mut self, path: PathBuf) -> PathBuf {
        self.inputs.push(path.clone());
        path
    }

    fn output(&mut self, name: &str) -> PathBuf {
        let p = self.cfg.artifact(name);
        self.outputs.push(p.clone());
        p
    }
}

/// Runs one stage, writes its manifest and returns it.
pub fn run_stage(stage: Stage, cfg: &PipelineConfig) -> Result<Manifest> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out)?;
    let started = Instant::now();
    let mut io = Io { cfg, inputs: Vec::new(), outputs: Vec::new() };
    if cfg.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| bad("workers", e.to_string()))?;
        pool.install(|| dispatch(stage, &mut io))?;
    } else {
        dispatch(stage, &mut io)?;
    }
    let show = |v: &[PathBuf]| v.iter().map(|p| p.display().to_string()).collect();
    let manifest = Manifest {
        stage: stage.name().into(),
        inputs: show(&io.inputs),
        seed: cfg.seed,
        elapsed_ms: started.elapsed().as_millis() as u64,
        outputs: show(&io.outputs),
        version: env!("CARGO_PKG_VERSION").into(),
    };
    write_json(&cfg.artifact(&format!("{}.manifest.json", stage.name())), &manifest)?;
    Ok(manifest)
}

/// Runs stages in order, stopping at the first failure.
pub fn run_chain(stages: &[Stage], cfg: &PipelineConfig) -> Result<Vec<Manifest>> {
    stages.iter().map(|&s| run_stage(s, cfg)).collect()
}

fn dispatch(stage: Stage, io: &mut Io) -> Result<()> {
    match stage {
        Stage::Synth => synth(io),
        Stage::Aggregate => aggregate_stage(io),
        Stage::Correlate => correlate(io),
        Stage::Cluster => cluster(io),
        Stage::Powerlaw => powerlaw_stage(io),
        Stage::Ssv => ssv(io),
        Stage::Assign => assign(io),
        Stage::Transitions => transitions(io),
        Stage::ExportGraph => export_graph(io),
        Stage::Oracle => oracle(io),
    }
}

fn synth(io: &mut Io) -> Result<()> {
    let cfg = io.cfg;
    let cal = cfg.calendar()?;
    let sizes = cfg.synth_sizes(cal.n_periods().saturating_sub(1))?;
    let spec = TickSynthSpec::new(cfg.synth.instruments, sizes, cfg.synth.coupling, cfg.seed);
    let (ticks, truth) = synth_ticks(&spec, &cal)?;
    let mut w = BufWriter::new(File::create(io.output(TICKS))?);
    write_ticks(&mut w, &ticks, cal.offset())?;
    w.flush()?;
    write_json(&io.output(PLANTED_LABELS), &truth)?;
    info!("synth: {} ticks, {} planted clusters", ticks.len(), truth.n_clusters());
    Ok(())
}

fn aggregate_stage(io: &mut Io) -> Result<()> {
    let cfg = io.cfg;
    let path = match &cfg.ticks {
        Some(p) => io.external(p.clone()),
        None => io.input(TICKS),
    };
    require(&path)?;
    let ticks = parse_ticks(BufReader::new(File::open(&path)?))?;
    let bars = aggregate(&ticks, &cfg.calendar()?);
    if bars.instruments.is_empty() {
        return Err(Error::InsufficientData("no instrument traded inside the session".into()));
    }
    bars.save(&io.output(BARS))?;
    info!("aggregate: {} instruments x {} periods", bars.instruments.len(), bars.periods.len());
    Ok(())
}

fn correlate(io: &mut Io) -> Result<()> {
    let bars = BarTable::load(&io.input(BARS))?;
    let r = feature_returns(&bars)?;
    r.save(&io.output(RETURNS))?;
    let c = period_correlation(&standardize_rows(&r)?)?;
    c.save_binary(&io.output(CORRELATION_BIN))?;
    let labels: Vec<String> = r.periods().iter().map(|p| p.to_rfc3339()).collect();
    let mut w = BufWriter::new(File::create(io.output(CORRELATION_CSV))?);
    c.write_csv(&mut w, &labels)?;
    w.flush()?;
    info!("correlate: {} series x {} periods", r.d(), r.n());
    Ok(())
}

fn cluster(io: &mut Io) -> Result<()> {
    let c = CorrelationMatrix::load_binary(&io.input(CORRELATION_BIN))?;
    let result = evolve(&c, &io.cfg.ga_config()?)?;
    write_json(&io.output(LABELS), &result.best)?;
    write_json(&io.output(GA_RESULT), &result)?;
    info!(
        "cluster: L_c = {:.6} with {} clusters after {} generations ({:?})",
        result.best_fitness,
        result.best.n_clusters(),
        result.generations,
        result.termination
    );
    Ok(())
}

fn load_configuration(io: &mut Io, c: &CorrelationMatrix) -> Result<ClusterConfiguration> {
    let s: ClusterConfiguration = read_json(&io.input(LABELS))?;
    if s.n() != c.n() {
        return Err(Error::DimensionMismatch { expected: c.n(), actual: s.n() });
    }
    Ok(s)
}

fn powerlaw_stage(io: &mut Io) -> Result<()> {
    let c = CorrelationMatrix::load_binary(&io.input(CORRELATION_BIN))?;
    let s = load_configuration(io, &c)?;
    let stats = cluster_stats(&c, &s)?;
    let sizes = powerlaw::cluster_sizes(&stats);
    let report = match powerlaw::fit(&sizes, io.cfg.bootstrap, io.cfg.seed) {
        Ok(fit) => {
            let significant = powerlaw::significant_states(&stats, fit.x_min);
            PowerLawReport { sizes, fit: Some(fit), fallback: None, significant }
        }
        Err(e @ (Error::DegenerateData(_) | Error::InsufficientTail(_))) => {
            warn!("powerlaw: no fit ({e}); keeping every non-singleton cluster");
            let significant = powerlaw::significant_states(&stats, 2);
            PowerLawReport { sizes, fit: None, fallback: Some(e.to_string()), significant }
        }
        Err(e) => return Err(e),
    };
    if report.significant.is_empty() {
        warn!("powerlaw: no significant states");
    }
    write_json(&io.output(POWERLAW), &report)?;
    write_json(&io.output(SIGNIFICANT), &report.significant)?;
    info!("powerlaw: {} significant states", report.significant.len());
    Ok(())
}

fn ssv(io: &mut Io) -> Result<()> {
    let r = ReturnsMatrix::load(&io.input(RETURNS))?;
    let c = CorrelationMatrix::load_binary(&io.input(CORRELATION_BIN))?;
    let s = load_configuration(io, &c)?;
    let significant: Vec<u32> = read_json(&io.input(SIGNIFICANT))?;
    let stats = cluster_stats(&c, &s)?;
    let ssvs = extract_ssvs(&r, &s, &significant, &stats)?;
    write_json(&io.output(SSVS), &ssvs)?;
    info!("ssv: {} signatures", ssvs.len());
    Ok(())
}

fn assign(io: &mut Io) -> Result<()> {
    let ssvs: Vec<StateSignatureVector> = read_json(&io.input(SSVS))?;
    let path = match &io.cfg.assign_returns {
        Some(p) => io.external(p.clone()),
        None => io.input(RETURNS),
    };
    let r = ReturnsMatrix::load(&path)?;
    let assignments = assign_all(&r, &ssvs)?;
    let mut w = BufWriter::new(File::create(io.output(ASSIGNMENTS))?);
    write_assignments(&mut w, &assignments)?;
    w.flush()?;
    info!("assign: {} periods", assignments.len());
    Ok(())
}

fn transitions(io: &mut Io) -> Result<()> {
    let ssvs: Vec<StateSignatureVector> = read_json(&io.input(SSVS))?;
    let path = io.input(ASSIGNMENTS);
    require(&path)?;
    let assignments = read_assignments(BufReader::new(File::open(&path)?))?;
    let mut states: Vec<u32> = ssvs.iter().map(|s| s.state).collect();
    states.sort_unstable();
    // periods carry the session's offset, so the local date is the trading day
    let seq: Vec<(NaiveDate, u32)> = assignments.iter().map(|a| (a.period.date_naive(), a.state)).collect();
    let m: TransitionMatrix = estimate(&seq, &states, io.cfg.include_overnight)?;
    let mut w = BufWriter::new(File::create(io.output(TRANSITIONS_CSV))?);
    m.write_csv(&mut w)?;
    w.flush()?;
    write_json(&io.output(TRANSITIONS_JSON), &m)?;
    if !m.zero_rows.is_empty() {
        warn!("transitions: states {:?} have no outgoing transitions", m.zero_rows);
    }
    Ok(())
}

fn export_graph(io: &mut Io) -> Result<()> {
    let c = CorrelationMatrix::load_binary(&io.input(CORRELATION_BIN))?;
    let s = load_configuration(io, &c)?;
    let r = ReturnsMatrix::load(&io.input(RETURNS))?;
    save_gexf(&io.output(GRAPH), &s, &c, r.periods())?;
    info!("export-graph: {} nodes", s.n());
    Ok(())
}

fn oracle(io: &mut Io) -> Result<()> {
    let c = CorrelationMatrix::load_binary(&io.input(CORRELATION_BIN))?;
    let (labels, best) = brute_force_best(&c)?;
    let labels_path = io.cfg.artifact(LABELS);
    let ga_log_likelihood = if labels_path.exists() {
        let s = load_configuration(io, &c)?;
        Some(log_likelihood(&c, &s)?)
    } else {
        None
    };
    write_json(&io.output(ORACLE), &OracleReport { labels, log_likelihood: best, ga_log_likelihood })?;
    info!("oracle: global maximum L_c = {best:.6}");
    Ok(())
}
