//! Command-line front end: `collect`, `train`, `evaluate` and `report`.
//!
//! Output layout under the run directory:
//!
//! ```text
//! buffers/manifest.json          buffers/<name>.jsonl
//! model/model.json               model/summary.json
//! eval/calibration.json          eval/traces/<variant>/<index>.json
//! eval/report.json  eval/report.txt  eval/fp_by_step.csv  eval/ade.csv
//! run.log                        (timestamps; the only non-reproducible file)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorConfig, Method};
use crate::error::{Error, Result};
use crate::gridworld::{EnvConfig, EnvVariant, VariantKind};
use crate::harness::{
    bound_behavior_curves, build_report, calibrate, collect_steps, config_digest, derive_seed,
    evaluate_variant, read_buffer, read_trace, write_buffer, write_text, write_trace, BoundPoint,
    BufferHeader, Calibration, Detectors, EpisodeTrace, MetricsReport, PolicyKind, VariantTraces,
    FILE_VERSION,
};
use crate::world_model::{ModelParams, WorldModel};

pub const MANIFEST_FORMAT: &str = "novelty-wm-manifest";
pub const SUMMARY_FORMAT: &str = "novelty-wm-train-summary";

pub const TRAIN_BUFFER: &str = "train";
pub const CALIBRATION_TRAINED_BUFFER: &str = "calibration-trained";
pub const CALIBRATION_RANDOM_BUFFER: &str = "calibration-random";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    /// Steps of the training corpus.
    pub train_steps: usize,
    /// Held-out trained-agent steps for thresholds (and training curves).
    pub calibration_steps: usize,
    /// Held-out random-agent steps for the random CMTRE threshold.
    pub random_steps: usize,
    /// Evaluation steps per variant.
    pub eval_steps: usize,
    /// Training snapshots for the bound curves; 0 disables them.
    pub snapshots: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            train_steps: 50_000,
            calibration_steps: 5_000,
            random_steps: 5_000,
            eval_steps: 5_000,
            snapshots: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Environment the training and calibration corpora come from.
    pub train_env: String,
    /// Evaluated environments, in report order.
    pub envs: Vec<String>,
    /// Activation step per functional environment id (default 0).
    pub activation: BTreeMap<String, u32>,
    /// Agent policy during evaluation.
    pub policy: PolicyKind,
    pub methods: Vec<Method>,
    pub budgets: Budgets,
    pub model: ModelParams,
    pub detectors: DetectorConfig,
    pub env: EnvConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            train_env: VariantKind::Nominal.id().into(),
            envs: VariantKind::ALL
                .iter()
                .map(|v| v.id().to_string())
                .collect(),
            activation: BTreeMap::new(),
            policy: PolicyKind::Scripted,
            methods: Method::ALL.to_vec(),
            budgets: Budgets::default(),
            model: ModelParams::default(),
            detectors: DetectorConfig::default(),
            env: EnvConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad config file: {e}")))?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.train_variant()?;
        self.variants()?;
        for id in self.activation.keys() {
            if !self.envs.contains(id) {
                id.parse::<VariantKind>()?;
                return Err(Error::Config(format!(
                    "activation given for `{id}`, which is not evaluated"
                )));
            }
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no detection methods selected".into()));
        }
        let b = &self.budgets;
        for (name, v) in [
            ("train_steps", b.train_steps),
            ("calibration_steps", b.calibration_steps),
            ("random_steps", b.random_steps),
            ("eval_steps", b.eval_steps),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("budget {name} must be positive")));
            }
        }
        if b.snapshots == 1 {
            return Err(Error::Config(
                "snapshot mode needs at least 2 snapshots".into(),
            ));
        }
        if b.snapshots > b.train_steps {
            return Err(Error::Config("more snapshots than training steps".into()));
        }
        if self.env.tile_size == 0 || self.env.max_steps == 0 {
            return Err(Error::Config(
                "tile_size and max_steps must be positive".into(),
            ));
        }
        self.model.validate()?;
        self.detectors.validate()
    }

    pub fn train_variant(&self) -> Result<EnvVariant> {
        Ok(EnvVariant::new(self.train_env.parse()?))
    }

    pub fn variants(&self) -> Result<Vec<EnvVariant>> {
        if self.envs.is_empty() {
            return Err(Error::Config("no environments selected".into()));
        }
        let mut out = Vec::with_capacity(self.envs.len());
        for id in &self.envs {
            let kind: VariantKind = id.parse()?;
            let v =
                EnvVariant::with_activation(kind, self.activation.get(id).copied().unwrap_or(0))?;
            if out.contains(&v) {
                return Err(Error::Config(format!("environment `{id}` listed twice")));
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Digest of everything that shapes the outputs; the output directory
    /// is excluded so relocated runs stay comparable.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        config_digest(&c)
    }

    fn stream(&self, label: &str) -> u64 {
        derive_seed(self.seed, label, 0)
    }

    fn buffers_dir(&self) -> PathBuf {
        self.out_dir.join("buffers")
    }

    pub fn buffer_path(&self, name: &str) -> PathBuf {
        self.buffers_dir().join(format!("{name}.jsonl"))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.buffers_dir().join("manifest.json")
    }

    pub fn model_path(&self) -> PathBuf {
        self.out_dir.join("model").join("model.json")
    }

    pub fn summary_path(&self) -> PathBuf {
        self.out_dir.join("model").join("summary.json")
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.out_dir.join("eval")
    }

    pub fn trace_dir(&self, v: &EnvVariant) -> PathBuf {
        let name = if v.activation_step > 0 {
            format!("{}@{}", v.kind.id(), v.activation_step)
        } else {
            v.kind.id().to_string()
        };
        self.eval_dir().join("traces").join(name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub file: String,
    #[serde(flatten)]
    pub header: BufferHeader,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config_digest: String,
    pub buffers: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn entry(&self, name: &str) -> Option<&ManifestEntry> {
        self.buffers.iter().find(|b| b.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub format: String,
    pub version: u32,
    pub config_digest: String,
    pub train_steps: usize,
    pub episodes: usize,
    pub num_codes: usize,
    pub num_tiles: usize,
    pub num_contexts: usize,
    pub num_transitions: usize,
    pub params: ModelParams,
    /// Bound curves over training size on held-out nominal steps.
    pub curves: Option<Vec<BoundPoint>>,
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializes");
    s.push('\n');
    s
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

/// Appends a timestamped line to the run's sidecar log.
fn log(config: &RunConfig, message: &str) -> Result<()> {
    let path = config.out_dir.join("run.log");
    crate::harness::create_parent(&path)?;
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    writeln!(f, "{secs} {message}").map_err(|e| Error::io(&path, e))
}

/// Training, trained-agent calibration and random-agent calibration corpora.
pub fn cmd_collect(config: &RunConfig) -> Result<Manifest> {
    config.validate()?;
    let digest = config.digest();
    let variant = config.train_variant()?;
    let jobs = [
        (
            TRAIN_BUFFER,
            PolicyKind::Scripted,
            config.budgets.train_steps,
        ),
        (
            CALIBRATION_TRAINED_BUFFER,
            PolicyKind::Scripted,
            config.budgets.calibration_steps,
        ),
        (
            CALIBRATION_RANDOM_BUFFER,
            PolicyKind::Random,
            config.budgets.random_steps,
        ),
    ];
    let mut buffers = Vec::new();
    for (name, policy, steps) in jobs {
        let root = config.stream(&format!("buffer/{name}"));
        let traces = collect_steps(variant, policy, steps, root, config.env);
        let path = config.buffer_path(name);
        let header = write_buffer(&path, variant, policy, &traces, &digest)?;
        buffers.push(ManifestEntry {
            name: name.into(),
            file: format!("{name}.jsonl"),
            header,
        });
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: FILE_VERSION,
        seed: config.seed,
        config_digest: digest,
        buffers,
    };
    write_text(&config.manifest_path(), &to_json(&manifest))?;
    log(
        config,
        &format!("collect: {} buffers", manifest.buffers.len()),
    )?;
    Ok(manifest)
}

fn load_buffer(config: &RunConfig, name: &str) -> Result<Vec<EpisodeTrace>> {
    let (_, traces) = read_buffer(&config.buffer_path(name))?;
    Ok(traces)
}

/// Log-spaced training sizes ending at `total`.
pub fn snapshot_sizes(total: usize, n: usize) -> Vec<usize> {
    if n < 2 || total == 0 {
        return Vec::new();
    }
    let lo = (total / 50).max(1) as f64;
    let ratio = total as f64 / lo;
    let mut out: Vec<usize> = (0..n)
        .map(|i| (lo * ratio.powf(i as f64 / (n - 1) as f64)).round() as usize)
        .collect();
    *out.last_mut().unwrap() = total;
    out.dedup();
    out
}

pub fn cmd_train(config: &RunConfig) -> Result<(WorldModel, TrainSummary)> {
    config.validate()?;
    let buffer = load_buffer(config, TRAIN_BUFFER)?;
    let model = WorldModel::train(&buffer, config.model)?;
    let curves = if config.budgets.snapshots >= 2 {
        let held_out = load_buffer(config, CALIBRATION_TRAINED_BUFFER)?;
        let mut snaps = Vec::new();
        for size in snapshot_sizes(config.budgets.train_steps, config.budgets.snapshots) {
            snaps.push((size, WorldModel::train_prefix(&buffer, config.model, size)?));
        }
        Some(bound_behavior_curves(
            &snaps,
            &held_out,
            &config.detectors,
            config.stream("curves"),
        )?)
    } else {
        None
    };
    model.save(&config.model_path())?;
    let summary = TrainSummary {
        format: SUMMARY_FORMAT.into(),
        version: FILE_VERSION,
        config_digest: config.digest(),
        train_steps: buffer.iter().map(EpisodeTrace::len).sum(),
        episodes: buffer.len(),
        num_codes: model.num_codes(),
        num_tiles: model.codebook().num_tiles(),
        num_contexts: model.tables().num_contexts(),
        num_transitions: model.tables().num_transitions(),
        params: config.model,
        curves,
    };
    write_text(&config.summary_path(), &to_json(&summary))?;
    log(config, &format!("train: K = {}", summary.num_codes))?;
    Ok((model, summary))
}

fn write_report(config: &RunConfig, report: &MetricsReport) -> Result<()> {
    let dir = config.eval_dir();
    write_text(&dir.join("report.json"), &(report.to_json() + "\n"))?;
    write_text(&dir.join("report.txt"), &report.to_text())?;
    write_text(&dir.join("fp_by_step.csv"), &report.fp_by_step_csv())?;
    write_text(&dir.join("ade.csv"), &report.ade_csv())
}

pub fn cmd_evaluate(config: &RunConfig) -> Result<MetricsReport> {
    config.validate()?;
    let variants = config.variants()?;
    let model = WorldModel::load(&config.model_path())?;
    let trained = load_buffer(config, CALIBRATION_TRAINED_BUFFER)?;
    let random = load_buffer(config, CALIBRATION_RANDOM_BUFFER)?;
    let calibration = calibrate(
        &model,
        &config.detectors,
        &trained,
        &random,
        config.stream("calibrate"),
    )?;
    write_text(
        &config.eval_dir().join("calibration.json"),
        &to_json(&calibration),
    )?;
    let detectors = Detectors {
        model: &model,
        calibration: &calibration,
        config: &config.detectors,
        methods: &config.methods,
    };
    let digest = config.digest();
    let root = config.stream("evaluate");
    let mut results: Vec<VariantTraces> = Vec::new();
    for v in variants {
        let traces = evaluate_variant(
            v,
            config.policy,
            &detectors,
            config.budgets.eval_steps,
            root,
            config.env,
        )?;
        let dir = config.trace_dir(&v);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        for (i, t) in traces.iter().enumerate() {
            write_trace(&dir.join(format!("{i:05}.json")), t, &digest)?;
        }
        results.push((v, traces));
    }
    let report = build_report(
        &results,
        &config.methods,
        config.seed,
        &digest,
        &calibration,
    );
    write_report(config, &report)?;
    log(config, &format!("evaluate: {} rows", report.rows.len()))?;
    Ok(report)
}

/// Rebuilds the report from saved traces and calibration only.
pub fn cmd_report(config: &RunConfig) -> Result<MetricsReport> {
    config.validate()?;
    let digest = config.digest();
    let calibration: Calibration = read_json(&config.eval_dir().join("calibration.json"))?;
    let mut results: Vec<VariantTraces> = Vec::new();
    for v in config.variants()? {
        let dir = config.trace_dir(&v);
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let mut traces = Vec::with_capacity(files.len());
        for f in &files {
            let (header, trace) = read_trace(f)?;
            if header.config_digest != digest {
                return Err(Error::Contract(format!(
                    "{} was produced under config {}, current config is {digest}",
                    f.display(),
                    header.config_digest
                )));
            }
            traces.push(trace);
        }
        results.push((v, traces));
    }
    let report = build_report(
        &results,
        &config.methods,
        config.seed,
        &digest,
        &calibration,
    );
    write_report(config, &report)?;
    log(config, "report: rebuilt from traces")?;
    Ok(report)
}

#[derive(Debug, Parser)]
#[command(
    name = "novelty-wm",
    version,
    about = "World-model novelty detection testbed"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Record the training and calibration corpora.
    Collect,
    /// Fit the world model on the training corpus.
    Train,
    /// Calibrate thresholds, run every environment, write traces and report.
    Evaluate,
    /// Rebuild the report from saved traces.
    Report,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Comma-separated method ids.
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Comma-separated environment ids.
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    pub envs: Option<Vec<String>>,
    #[arg(long, global = true, value_name = "N")]
    pub snapshots: Option<usize>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(o) = &self.out {
            config.out_dir = o.clone();
        }
        if let Some(m) = &self.methods {
            config.methods = m.iter().map(|s| s.trim().parse()).collect::<Result<_>>()?;
        }
        if let Some(e) = &self.envs {
            config.envs = e.iter().map(|s| s.trim().to_string()).collect();
        }
        if let Some(n) = self.snapshots {
            config.budgets.snapshots = n;
        }
        config.validate()?;
        Ok(config)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = cli.overrides.resolve()?;
    match cli.command {
        Command::Collect => {
            let m = cmd_collect(&config)?;
            for b in &m.buffers {
                println!(
                    "{:<22} {:>7} steps {:>5} episodes",
                    b.name, b.header.steps, b.header.episodes
                );
            }
        }
        Command::Train => {
            let (_, s) = cmd_train(&config)?;
            println!(
                "K = {} codes, {} contexts, {} transitions from {} steps",
                s.num_codes, s.num_contexts, s.num_transitions, s.train_steps
            );
            if let Some(curves) = &s.curves {
                for p in curves {
                    println!(
                        "  {:>7} steps: lhs {:.6} rhs {:.6} repr-h0 {:.6}",
                        p.train_steps, p.mean_lhs, p.mean_rhs, p.mean_repr_h0
                    );
                }
            }
        }
        Command::Evaluate | Command::Report => {
            let report = if matches!(cli.command, Command::Evaluate) {
                cmd_evaluate(&config)?
            } else {
                cmd_report(&config)?
            };
            print!("{}", report.to_text());
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
