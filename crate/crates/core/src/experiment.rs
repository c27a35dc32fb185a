//! Replicated experiments: configuration, canned presets, execution and artifacts.
//!
//! Configuration is flat TOML with dotted keys (`scenario.lambda = 7`). Layers are applied
//! in order: built-in defaults, a preset, a configuration file, command-line overrides.
//! Unknown keys are rejected by name.
//!
//! Artifacts written to the output directory:
//!
//! * `windows.csv`: one row per window with the replication mean and Student-t half-width
//!   (`*_ci`, empty with a single replication) of F1, precision and recall, followed by the
//!   mean per-window energy per category, the mean cumulative session energy, node counts
//!   and traffic bits.
//! * `summary.json`: see [`Summary`].
//! * `messages_r{r}.csv` per replication with `--emit-messages`.
//! * `windows_r{r}.csv` per replication when `output.raw_windows = true`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::dataset::{load_covtype, prepare, read_snapshot, synthetic_covtype, window_stream, write_snapshot, PreparedData};
use crate::dataset::{BALANCED_TOTAL, COVTYPE_CLASSES};
use crate::energy::{session_energy, write_message_log, EnergyLedger, Tech};
use crate::error::{Error, Result};
use crate::learning::{BaseTrainerConfig, GreedyTLConfig};
use crate::metrics::{column_means, convergence_mean, replication_summary};
use crate::par::{self, Execution};
use crate::protocol::{run_replication, LearningConfig, ReplicationOutcome, WindowReport};
use crate::rng::{derive, rng_from, stream};
use crate::scenario::{Allocation, MuleCount, ScenarioConfig};

/// Where the observations come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// The UCI CovType file.
    CovType(PathBuf),
    /// Class-balanced stand-in with CovType's shape, generated from the experiment seed.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub scenario: ScenarioConfig,
    pub seed: u64,
    pub replications: usize,
    pub confidence: f64,
    pub data: DataSource,
    pub train_fraction: f64,
    /// Cache of the prepared train/test split.
    pub snapshot: Option<PathBuf>,
    pub base: BaseTrainerConfig,
    pub greedy: GreedyTLConfig,
    pub execution: Execution,
    pub output_dir: Option<PathBuf>,
    /// Summary of a reference run (normally EdgeOnly) to compute gains against.
    pub baseline: Option<PathBuf>,
    pub emit_messages: bool,
    pub raw_windows: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            preset: None,
            scenario: ScenarioConfig::default(),
            seed: 42,
            replications: 10,
            confidence: 0.95,
            data: DataSource::CovType(PathBuf::from("data/covtype.data")),
            train_fraction: 0.8,
            snapshot: None,
            base: BaseTrainerConfig::default(),
            greedy: GreedyTLConfig::default(),
            execution: Execution::default(),
            output_dir: None,
            baseline: None,
            emit_messages: false,
            raw_windows: false,
        }
    }
}

fn flatten(prefix: &str, table: &Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| Error::config(format!("`{key}` must be a string")))
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::config(format!("`{key}` must be a number"))),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    v.as_integer()
        .and_then(|i| usize::try_from(i).ok())
        .ok_or_else(|| Error::config(format!("`{key}` must be a non-negative integer")))
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| Error::config(format!("`{key}` must be true or false")))
}

impl ExperimentConfig {
    /// Defaults overlaid with the named preset.
    pub fn from_preset(name: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_preset(name)?;
        Ok(cfg)
    }

    pub fn apply_preset(&mut self, name: &str) -> Result<()> {
        let text = preset_toml(name).ok_or_else(|| Error::config(format!("unknown preset `{name}`")))?;
        self.apply_toml(&text)?;
        self.preset = Some(name.to_string());
        Ok(())
    }

    /// Overlays a TOML document. A top-level `preset` key is applied before the other keys.
    pub fn apply_toml(&mut self, text: &str) -> Result<()> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Parse {
                line: e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0),
                message: e.message().to_string(),
            })?;
        let mut pairs = Vec::new();
        flatten("", &table, &mut pairs);
        if let Some((_, v)) = pairs.iter().find(|(k, _)| k == "preset") {
            let name = as_str("preset", v)?.to_string();
            self.apply_preset(&name)?;
        }
        for (k, v) in pairs.iter().filter(|(k, _)| k != "preset") {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_toml(&text)
    }

    /// Sets one dotted key.
    pub fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        let s = &mut self.scenario;
        match key {
            "seed" => {
                self.seed = v
                    .as_integer()
                    .map(|i| i as u64)
                    .ok_or_else(|| Error::config("`seed` must be an integer"))?
            }
            "replications" => self.replications = as_usize(key, v)?,
            "confidence" => self.confidence = as_f64(key, v)?,
            "execution" => {
                self.execution = match as_str(key, v)? {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    other => return Err(Error::config(format!("unknown execution mode `{other}`"))),
                }
            }
            "dataset.source" => {
                self.data = match as_str(key, v)? {
                    "synthetic" => DataSource::Synthetic,
                    "covtype" => match &self.data {
                        DataSource::CovType(p) => DataSource::CovType(p.clone()),
                        DataSource::Synthetic => DataSource::CovType(PathBuf::from("data/covtype.data")),
                    },
                    other => return Err(Error::config(format!("unknown dataset source `{other}`"))),
                }
            }
            "dataset.path" => self.data = DataSource::CovType(PathBuf::from(as_str(key, v)?)),
            "dataset.train_fraction" => self.train_fraction = as_f64(key, v)?,
            "dataset.snapshot" => self.snapshot = Some(PathBuf::from(as_str(key, v)?)),
            "scenario.windows" => s.windows = as_usize(key, v)?,
            "scenario.obs_per_window" => s.obs_per_window = as_usize(key, v)?,
            "scenario.lambda" => s.mule_count = MuleCount::Poisson { lambda: as_f64(key, v)? },
            "scenario.mules" => s.mule_count = MuleCount::Fixed(as_usize(key, v)?),
            "scenario.allocation" => {
                s.allocation = match as_str(key, v)? {
                    "zipf" => match s.allocation {
                        z @ Allocation::Zipf { .. } => z,
                        Allocation::Uniform => Allocation::Zipf { alpha: 1.5 },
                    },
                    "uniform" => Allocation::Uniform,
                    other => return Err(Error::config(format!("unknown allocation `{other}`"))),
                }
            }
            "scenario.zipf_alpha" => s.allocation = Allocation::Zipf { alpha: as_f64(key, v)? },
            "scenario.edge_fraction" => s.edge_fraction = as_f64(key, v)?,
            "scenario.aggregation" => s.aggregation_enabled = as_bool(key, v)?,
            "scenario.protocol" => s.protocol = as_str(key, v)?.parse()?,
            "scenario.learning_tech" => s.learning_tech = as_str(key, v)?.parse::<Tech>()?,
            "scenario.gtl_per_class_sample" => {
                let n = as_usize(key, v)?;
                s.gtl_per_class_sample = (n > 0).then_some(n);
            }
            "learning.lambda" => self.base.lambda = as_f64(key, v)?,
            "learning.epochs" => self.base.epochs = as_usize(key, v)?,
            "greedy.lambda" => self.greedy.lambda = as_f64(key, v)?,
            "greedy.budget" => {
                let n = as_usize(key, v)?;
                self.greedy.budget = (n > 0).then_some(n);
            }
            "output.dir" => self.output_dir = Some(PathBuf::from(as_str(key, v)?)),
            "output.baseline" => self.baseline = Some(PathBuf::from(as_str(key, v)?)),
            "output.emit_messages" => self.emit_messages = as_bool(key, v)?,
            "output.raw_windows" => self.raw_windows = as_bool(key, v)?,
            other => return Err(Error::config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.base.validate()?;
        self.greedy.validate()?;
        if self.replications == 0 {
            return Err(Error::config("replications must be >= 1"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::config("confidence must lie in (0, 1)"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("dataset.train_fraction must lie in (0, 1)"));
        }
        Ok(())
    }

    fn learning(&self, seed: u64) -> LearningConfig {
        LearningConfig {
            base: self.base,
            greedy: GreedyTLConfig {
                per_class_sample: self.scenario.gtl_per_class_sample,
                ..self.greedy
            },
            tech: self.scenario.learning_tech,
            exec: self.execution,
            seed,
        }
    }
}

const SCENARIO1_PCT: [u32; 3] = [50, 15, 3];
const COMPLEXITY_N: [usize; 3] = [2, 5, 10];

/// Names of every canned configuration.
pub fn list_presets() -> Vec<String> {
    let mut names = vec!["edge_only".to_string()];
    names.extend(SCENARIO1_PCT.iter().map(|p| format!("scenario1_{p}pct")));
    for scenario in ["scenario2", "scenario3"] {
        for proto in ["a2a", "shtl"] {
            for tech in ["4g", "wifi"] {
                names.push(format!("{scenario}_{proto}_{tech}"));
                names.push(format!("{scenario}_{proto}_{tech}_aggr"));
            }
        }
    }
    for family in ["complexity", "complexity_uniform"] {
        for proto in ["a2a", "shtl"] {
            names.extend(COMPLEXITY_N.iter().map(|n| format!("{family}_{proto}_n{n}")));
        }
    }
    names
}

fn proto_key(short: &str) -> Option<&'static str> {
    match short {
        "a2a" => Some("a2ahtl"),
        "shtl" => Some("shtl"),
        _ => None,
    }
}

/// TOML body of a preset.
pub fn preset_toml(name: &str) -> Option<String> {
    if name == "edge_only" {
        return Some("scenario.protocol = \"edge_only\"\n".into());
    }
    if let Some(pct) = name.strip_prefix("scenario1_").and_then(|r| r.strip_suffix("pct")) {
        let pct: u32 = pct.parse().ok().filter(|p| SCENARIO1_PCT.contains(p))?;
        return Some(format!(
            "scenario.protocol = \"shtl\"\nscenario.learning_tech = \"4g\"\n\
             scenario.allocation = \"zipf\"\nscenario.edge_fraction = {}\n",
            pct as f64 / 100.0
        ));
    }
    let (family, rest) = if let Some(r) = name.strip_prefix("complexity_uniform_") {
        ("complexity_uniform", r)
    } else if let Some(r) = name.strip_prefix("complexity_") {
        ("complexity", r)
    } else if let Some(r) = name.strip_prefix("scenario2_") {
        ("scenario2", r)
    } else if let Some(r) = name.strip_prefix("scenario3_") {
        ("scenario3", r)
    } else {
        return None;
    };
    let parts: Vec<&str> = rest.split('_').collect();
    let uniform = matches!(family, "scenario3" | "complexity_uniform");
    let allocation = if uniform { "uniform" } else { "zipf" };
    if family.starts_with("complexity") {
        let [proto, n] = parts.as_slice() else { return None };
        let proto = proto_key(proto)?;
        let n: usize = n.strip_prefix('n')?.parse().ok().filter(|n| COMPLEXITY_N.contains(n))?;
        return Some(format!(
            "scenario.protocol = \"{proto}\"\nscenario.learning_tech = \"4g\"\n\
             scenario.allocation = \"{allocation}\"\nscenario.mules = 7\n\
             scenario.gtl_per_class_sample = {n}\n"
        ));
    }
    let (proto, tech, aggr) = match parts.as_slice() {
        [p, t] => (*p, *t, false),
        [p, t, "aggr"] => (*p, *t, true),
        _ => return None,
    };
    let proto = proto_key(proto)?;
    if !matches!(tech, "4g" | "wifi") {
        return None;
    }
    Some(format!(
        "scenario.protocol = \"{proto}\"\nscenario.learning_tech = \"{tech}\"\n\
         scenario.allocation = \"{allocation}\"\nscenario.aggregation = {aggr}\n"
    ))
}

/// Aggregate outcome of an experiment, written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub preset: Option<String>,
    pub protocol: String,
    pub learning_tech: String,
    pub seed: u64,
    pub replications: usize,
    pub windows: usize,
    /// Mean F1 over the convergence interval, averaged over replications; absent for runs
    /// shorter than the interval.
    pub convergence_f1: Option<f64>,
    pub convergence_f1_ci: Option<f64>,
    pub final_f1: f64,
    /// Mean cumulative session energy after the last window, mJ.
    pub total_mj: f64,
    pub energy: EnergyLedger,
    pub collection_mj: f64,
    pub learning_mj: f64,
    pub mean_mules: f64,
    pub mean_nodes_before: f64,
    pub mean_nodes_after: f64,
    pub mean_model_transfers: f64,
    pub f1_series: Vec<f64>,
    pub gain_vs_baseline_pct: Option<f64>,
    pub accuracy_loss_pp: Option<f64>,
}

/// Everything an experiment produced, kept in memory for callers that do not write files.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub summary: Summary,
    pub replications: Vec<ReplicationOutcome>,
}

/// Loads (or generates) and prepares the train/test split, reusing a snapshot if configured.
pub fn load_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    if let Some(snap) = &cfg.snapshot {
        if snap.exists() {
            if let Some(p) = read_snapshot(snap, cfg.seed)? {
                return Ok(p);
            }
        }
    }
    let raw = match &cfg.data {
        DataSource::CovType(path) => load_covtype(path)?,
        DataSource::Synthetic => synthetic_covtype(BALANCED_TOTAL / COVTYPE_CLASSES, derive(cfg.seed, stream::DATASET)),
    };
    let prepared = prepare(&raw, cfg.train_fraction, cfg.seed)?;
    if let Some(snap) = &cfg.snapshot {
        write_snapshot(snap, cfg.seed, &prepared)?;
    }
    Ok(prepared)
}

/// Runs every replication on already prepared data.
pub fn run_on(cfg: &ExperimentConfig, data: &PreparedData) -> Result<ExperimentResult> {
    cfg.validate()?;
    let sc = &cfg.scenario;
    let keep_log = cfg.emit_messages;
    let outcomes: Vec<ReplicationOutcome> = par::map_range(cfg.execution, cfg.replications, |r| {
        let seed = cfg.seed.wrapping_add(r as u64);
        let mut rng = rng_from(derive(seed, stream::WINDOWS));
        let batches = window_stream(&data.train, sc.obs_per_window, sc.windows, &mut rng)?;
        run_replication(&batches, &data.test, sc, &cfg.learning(seed), keep_log)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let summary = summarize(cfg, &outcomes)?;
    Ok(ExperimentResult {
        summary,
        replications: outcomes,
    })
}

fn series(outcomes: &[ReplicationOutcome], f: impl Fn(&WindowReport) -> f64) -> Vec<Vec<f64>> {
    outcomes
        .iter()
        .map(|o| o.reports.iter().map(&f).collect())
        .collect()
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn summarize(cfg: &ExperimentConfig, outcomes: &[ReplicationOutcome]) -> Result<Summary> {
    let f1 = series(outcomes, |r| r.f1);
    let f1_series = column_means(&f1);
    let per_rep_conv: Option<Vec<f64>> = f1.iter().map(|s| convergence_mean(s).ok()).collect();
    let (convergence_f1, convergence_f1_ci) = match &per_rep_conv {
        Some(v) if v.len() >= 2 => {
            let s = replication_summary(&v.iter().map(|x| vec![*x]).collect::<Vec<_>>(), cfg.confidence)?;
            (Some(s.mean[0]), Some(s.half_width[0]))
        }
        Some(v) => (Some(mean(v.iter().copied())), None),
        None => (None, None),
    };
    let n = outcomes.len() as f64;
    let mut energy = EnergyLedger::default();
    for o in outcomes {
        let last = o.reports.last().expect("windows >= 1").cumulative;
        energy.collection_short_mj += last.collection_short_mj / n;
        energy.collection_long_mj += last.collection_long_mj / n;
        energy.learning_tx_mj += last.learning_tx_mj / n;
        energy.learning_rx_mj += last.learning_rx_mj / n;
    }
    let all = || outcomes.iter().flat_map(|o| o.reports.iter());
    let mut summary = Summary {
        preset: cfg.preset.clone(),
        protocol: cfg.scenario.protocol.key().to_string(),
        learning_tech: cfg.scenario.learning_tech.key().to_string(),
        seed: cfg.seed,
        replications: cfg.replications,
        windows: cfg.scenario.windows,
        convergence_f1,
        convergence_f1_ci,
        final_f1: *f1_series.last().expect("windows >= 1"),
        total_mj: session_energy(&energy),
        energy,
        collection_mj: energy.collection(),
        learning_mj: energy.learning(),
        mean_mules: mean(all().map(|r| r.mules as f64)),
        mean_nodes_before: mean(all().map(|r| r.nodes_before as f64)),
        mean_nodes_after: mean(all().map(|r| r.nodes_after as f64)),
        mean_model_transfers: mean(all().map(|r| r.model_transfers as f64)),
        f1_series,
        gain_vs_baseline_pct: None,
        accuracy_loss_pp: None,
    };
    if let Some(path) = &cfg.baseline {
        let base = read_summary(path)?;
        let g = compare(&base, &summary);
        summary.gain_vs_baseline_pct = Some(g.gain_pct);
        summary.accuracy_loss_pp = g.accuracy_loss_pp;
    }
    Ok(summary)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, std::io::Error::other(e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const WINDOW_COLUMNS: [&str; 21] = [
    "window",
    "f1_mean",
    "f1_ci",
    "precision_mean",
    "precision_ci",
    "recall_mean",
    "recall_ci",
    "collection_short_mj",
    "collection_long_mj",
    "learning_tx_mj",
    "learning_rx_mj",
    "window_mj",
    "cumulative_mj",
    "cumulative_mj_ci",
    "mules",
    "nodes_before",
    "nodes_after",
    "model_transfers",
    "collection_bits",
    "learning_bits",
    "replications",
];

fn write_windows(path: &Path, outcomes: &[ReplicationOutcome], confidence: f64) -> Result<()> {
    let stat = |f: &dyn Fn(&WindowReport) -> f64| -> Result<(Vec<f64>, Vec<Option<f64>>)> {
        let s = series(outcomes, f);
        if s.len() >= 2 {
            let r = replication_summary(&s, confidence)?;
            Ok((r.mean, r.half_width.into_iter().map(Some).collect()))
        } else {
            let m = column_means(&s);
            let n = m.len();
            Ok((m, vec![None; n]))
        }
    };
    let (f1, f1_ci) = stat(&|r| r.f1)?;
    let (p, p_ci) = stat(&|r| r.precision)?;
    let (rc, rc_ci) = stat(&|r| r.recall)?;
    let (cum, cum_ci) = stat(&|r| session_energy(&r.cumulative))?;
    let means = |f: &dyn Fn(&WindowReport) -> f64| column_means(&series(outcomes, f));
    let cs = means(&|r| r.energy.collection_short_mj);
    let cl = means(&|r| r.energy.collection_long_mj);
    let lt = means(&|r| r.energy.learning_tx_mj);
    let lr = means(&|r| r.energy.learning_rx_mj);
    let we = means(&|r| session_energy(&r.energy));
    let mules = means(&|r| r.mules as f64);
    let nb = means(&|r| r.nodes_before as f64);
    let na = means(&|r| r.nodes_after as f64);
    let mt = means(&|r| r.model_transfers as f64);
    let cb = means(&|r| r.collection_bits as f64);
    let lb = means(&|r| r.learning_bits as f64);

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(WINDOW_COLUMNS).map_err(csv_err(path))?;
    for i in 0..f1.len() {
        w.write_record([
            i.to_string(),
            f1[i].to_string(),
            fmt_opt(f1_ci[i]),
            p[i].to_string(),
            fmt_opt(p_ci[i]),
            rc[i].to_string(),
            fmt_opt(rc_ci[i]),
            cs[i].to_string(),
            cl[i].to_string(),
            lt[i].to_string(),
            lr[i].to_string(),
            we[i].to_string(),
            cum[i].to_string(),
            fmt_opt(cum_ci[i]),
            mules[i].to_string(),
            nb[i].to_string(),
            na[i].to_string(),
            mt[i].to_string(),
            cb[i].to_string(),
            lb[i].to_string(),
            outcomes.len().to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_raw_windows(path: &Path, outcome: &ReplicationOutcome) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record([
        "window",
        "f1",
        "precision",
        "recall",
        "collection_short_mj",
        "collection_long_mj",
        "learning_tx_mj",
        "learning_rx_mj",
        "cumulative_mj",
        "mules",
        "nodes_before",
        "nodes_after",
        "model_transfers",
        "collection_bits",
        "learning_bits",
    ])
    .map_err(csv_err(path))?;
    for r in &outcome.reports {
        w.write_record([
            r.window.to_string(),
            r.f1.to_string(),
            r.precision.to_string(),
            r.recall.to_string(),
            r.energy.collection_short_mj.to_string(),
            r.energy.collection_long_mj.to_string(),
            r.energy.learning_tx_mj.to_string(),
            r.energy.learning_rx_mj.to_string(),
            session_energy(&r.cumulative).to_string(),
            r.mules.to_string(),
            r.nodes_before.to_string(),
            r.nodes_after.to_string(),
            r.model_transfers.to_string(),
            r.collection_bits.to_string(),
            r.learning_bits.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes every artifact of `result` into `dir`.
pub fn write_artifacts(cfg: &ExperimentConfig, result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_windows(&dir.join("windows.csv"), &result.replications, cfg.confidence)?;
    let summary_path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&result.summary).map_err(|e| Error::io(&summary_path, e.into()))?;
    fs::write(&summary_path, json + "\n").map_err(|e| Error::io(&summary_path, e))?;
    for (r, o) in result.replications.iter().enumerate() {
        if cfg.emit_messages {
            let path = dir.join(format!("messages_r{r}.csv"));
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_message_log(&o.log, BufWriter::new(file))?;
        }
        if cfg.raw_windows {
            write_raw_windows(&dir.join(format!("windows_r{r}.csv")), o)?;
        }
    }
    Ok(())
}

/// Loads data, runs every replication and writes artifacts if an output directory is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let data = load_data(cfg)?;
    let result = run_on(cfg, &data)?;
    if let Some(dir) = &cfg.output_dir {
        write_artifacts(cfg, &result, dir)?;
    }
    Ok(result)
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}

/// Energy gain and accuracy loss of `b` relative to `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub energy_a_mj: f64,
    pub energy_b_mj: f64,
    /// `(E_a - E_b) / E_a * 100`.
    pub gain_pct: f64,
    /// Convergence-interval F1 of `a` minus that of `b`, in percentage points.
    pub accuracy_loss_pp: Option<f64>,
}

pub fn gain_pct(energy_a: f64, energy_b: f64) -> f64 {
    if energy_a == 0.0 {
        0.0
    } else {
        (energy_a - energy_b) / energy_a * 100.0
    }
}

pub fn compare(a: &Summary, b: &Summary) -> GainReport {
    GainReport {
        energy_a_mj: a.total_mj,
        energy_b_mj: b.total_mj,
        gain_pct: gain_pct(a.total_mj, b.total_mj),
        accuracy_loss_pp: a
            .convergence_f1
            .zip(b.convergence_f1)
            .map(|(x, y)| (x - y) * 100.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Protocol;

    #[test]
    fn every_preset_loads_and_validates() {
        let names = list_presets();
        assert_eq!(names.len(), 1 + 3 + 16 + 12);
        for n in &names {
            let cfg = ExperimentConfig::from_preset(n).unwrap_or_else(|e| panic!("{n}: {e}"));
            cfg.validate().unwrap_or_else(|e| panic!("{n}: {e}"));
        }
        assert!(names.contains(&"scenario1_15pct".to_string()));
        assert!(names.contains(&"complexity_shtl_n2".to_string()));
        assert!(preset_toml("scenario1_20pct").is_none());
        assert!(preset_toml("scenario2_a2a_lte").is_none());
    }

    #[test]
    fn preset_contents() {
        let c = ExperimentConfig::from_preset("scenario3_shtl_wifi_aggr").unwrap();
        assert_eq!(c.scenario.allocation, Allocation::Uniform);
        assert_eq!(c.scenario.learning_tech, Tech::Wifi);
        assert!(c.scenario.aggregation_enabled);
        assert_eq!(c.scenario.protocol, Protocol::SHTL);
        let c = ExperimentConfig::from_preset("scenario1_3pct").unwrap();
        assert_eq!(c.scenario.edge_fraction, 0.03);
        let c = ExperimentConfig::from_preset("complexity_uniform_a2a_n5").unwrap();
        assert_eq!(c.scenario.gtl_per_class_sample, Some(5));
        assert_eq!(c.scenario.mule_count, MuleCount::Fixed(7));
        assert_eq!(c.scenario.protocol, Protocol::A2AHTL);
    }

    #[test]
    fn layering_and_unknown_keys() {
        let mut c = ExperimentConfig::default();
        c.apply_toml("preset = \"scenario2_a2a_4g\"\nseed = 7\n[scenario]\nlambda = 3\n")
            .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.scenario.protocol, Protocol::A2AHTL);
        assert_eq!(c.scenario.mule_count, MuleCount::Poisson { lambda: 3.0 });
        let err = c.apply_toml("scenario.lamda = 3").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("scenario.lamda"));
        assert!(matches!(c.apply_toml("seed = ").unwrap_err(), Error::Parse { .. }));
        assert!(c.apply_toml("replications = \"ten\"").is_err());
    }

    #[test]
    fn gains() {
        assert!((gain_pct(34477.0, 3749.0) - 89.126).abs() < 1e-3);
        assert!((gain_pct(34477.0, 2066.0) - 94.007).abs() < 1e-3);
        assert_eq!(gain_pct(5.0, 5.0), 0.0);
    }

    #[test]
    fn small_synthetic_run() {
        let mut cfg = ExperimentConfig::from_preset("scenario2_shtl_4g").unwrap();
        cfg.apply_toml(
            "dataset.source = \"synthetic\"\nreplications = 2\nscenario.windows = 3\n\
             scenario.obs_per_window = 50\nlearning.epochs = 2\n",
        )
        .unwrap();
        let data = load_data(&cfg).unwrap();
        let res = run_on(&cfg, &data).unwrap();
        assert_eq!(res.replications.len(), 2);
        assert_eq!(res.summary.f1_series.len(), 3);
        assert!(res.summary.convergence_f1.is_none());
        // 150 observations at 3 mW tx + 3 mW rx over 0.12 Mbps
        assert!((res.summary.collection_mj - 150.0 * 3456.0 * 6.0 / 120_000.0).abs() < 1e-6);
    }
}
