//! The `eef1` command line.
//!
//! Every subcommand writes its outputs under `--out` together with a
//! `{command}_manifest.json` recording the exact argument vector, so
//! `eef1 replay --manifest <file>` re-runs it. With one worker thread the
//! outputs are byte-identical across runs.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::baselines::Baseline;
use crate::error::{Error, Result};
use crate::fairness::{check_ef1, EnvyMode};
use crate::harness::{
    default_grid, evaluate, evaluate_instances, find_m_star, run_experiment, write_json, Allocator,
    ExperimentConfig, ExperimentKind, Thresholds,
};
use crate::instance::{read_dataset, social_welfare, write_dataset, DistributionKind, DistributionSpec, Instance};
use crate::neural::{
    bag_train, load_bag, load_model, save_bag, save_model, train_with_progress, ArchConfig, TrainConfig,
    DEFAULT_LAMBDAS,
};
use crate::oracle::{exact_eef1, DEFAULT_CAP};

/// Environment fallback for `--threads`.
pub const THREADS_ENV: &str = "EEF1_THREADS";

#[derive(Debug, Parser, Serialize)]
#[command(name = "eef1", version, about = "Fair and efficient allocation of indivisible items")]
pub struct Cli {
    /// Worker threads (default: $EEF1_THREADS, then all cores). 1 is bit-deterministic.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Sample instances and write them as a JSONL dataset.
    Gen(GenArgs),
    /// Run MUW, RR, D-RR or CRR on every instance.
    Baseline(BaselineArgs),
    /// Exact max-welfare EF1 allocation of tiny instances.
    Oracle(OracleArgs),
    /// Train one network.
    Train(TrainArgs),
    /// Train one network per lambda and save them as a bag.
    BagTrain(BagTrainArgs),
    /// Fairness and welfare metrics of an allocator.
    Eval(EvalArgs),
    /// Search the item count beyond which an allocator stays near EEF1.
    Converge(ConvergeArgs),
    /// Run one of the experiment sweeps.
    Experiment(ExperimentArgs),
    /// Re-run the command recorded in a run manifest.
    Replay(ReplayArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Baseline(_) => "baseline",
            Command::Oracle(_) => "oracle",
            Command::Train(_) => "train",
            Command::BagTrain(_) => "bag-train",
            Command::Eval(_) => "eval",
            Command::Converge(_) => "converge",
            Command::Experiment(_) => "experiment",
            Command::Replay(_) => "replay",
        }
    }
}

/// Where instances come from: a dataset file, or a distribution and seed.
#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    #[arg(long, default_value_t = 10)]
    pub agents: usize,
    #[arg(long, default_value_t = 20)]
    pub items: usize,
    #[arg(long, default_value = "uniform-goods")]
    pub dist: DistributionKind,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSONL dataset to use instead of sampling.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

impl DataArgs {
    fn spec(&self) -> DistributionSpec {
        DistributionSpec::new(self.dist, self.seed)
    }

    /// A dataset file is just a materialized sample stream; both routes end here.
    fn instances(&self) -> Result<Vec<Instance>> {
        match &self.input {
            Some(path) => read_dataset(BufReader::new(File::open(path)?)),
            None => Ok(self.spec().sample_many(self.agents, self.items, self.samples)),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct BaselineArgs {
    #[arg(long)]
    pub alg: Baseline,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct OracleArgs {
    /// Largest number of allocations to enumerate per instance.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: u64,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ArchArgs {
    #[arg(long, default_value_t = 3)]
    pub series: usize,
    #[arg(long, default_value_t = 4)]
    pub convs_per_series: usize,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.01)]
    pub temperature: f64,
}

impl ArchArgs {
    fn arch(&self) -> ArchConfig {
        ArchConfig {
            series: self.series,
            convs_per_series: self.convs_per_series,
            hidden_channels: self.hidden,
            kernel: 3,
            temperature: self.temperature,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OptimArgs {
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value = "ef")]
    pub envy_mode: EnvyMode,
    /// Directory for model files (default: --out).
    #[arg(long)]
    pub models_dir: Option<PathBuf>,
}

impl OptimArgs {
    fn config(&self, lambda: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            batch_size: self.batch,
            epochs: self.epochs,
            lambda,
            envy_mode: self.envy_mode,
            seed,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Model file name inside the models directory.
    #[arg(long, default_value = "model.eef1")]
    pub name: String,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct BagTrainArgs {
    /// Comma-separated multipliers (default: 0.1,0.25,0.5,0.75,1,1.5,2).
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Vec<f64>,
    /// File prefix: members are `{prefix}_{k}.eef1`, the manifest `{prefix}.json`.
    #[arg(long, default_value = "bag")]
    pub prefix: String,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

/// Allocator choice shared by `eval` and `converge`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct AlgArgs {
    /// muw, rr, drr, crr, nn (single model) or bag.
    #[arg(long)]
    pub alg: String,
    /// Model file for `nn`, manifest for `bag`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Directory holding `bag.json` when `--model` is not given.
    #[arg(long)]
    pub models_dir: Option<PathBuf>,
}

impl AlgArgs {
    fn allocator(&self) -> std::result::Result<Allocator, Failure> {
        match self.alg.to_ascii_lowercase().as_str() {
            "nn" => {
                let path = self.model.as_ref().ok_or_else(|| Failure::usage("--alg nn needs --model <file>"))?;
                Ok(Allocator::Network(Arc::new(load_model(path)?)))
            }
            "bag" => {
                let path = match (&self.model, &self.models_dir) {
                    (Some(p), _) => p.clone(),
                    (None, Some(dir)) => dir.join("bag.json"),
                    (None, None) => return Err(Failure::usage("--alg bag needs --model or --models-dir")),
                };
                Ok(Allocator::Bag(Arc::new(load_bag(path)?)))
            }
            other => other.parse::<Baseline>().map(Allocator::from).map_err(|e| Failure::usage(e.to_string())),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub alg: AlgArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub alg: AlgArgs,
    #[arg(long, default_value_t = 10)]
    pub agents: usize,
    #[arg(long, default_value = "uniform-goods")]
    pub dist: DistributionKind,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Explicit comma-separated item counts (overrides --grid-step/--grid-max).
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<usize>,
    /// Default: max(2, n/2).
    #[arg(long)]
    pub grid_step: Option<usize>,
    /// Default: 100 n.
    #[arg(long)]
    pub grid_max: Option<usize>,
    #[arg(long)]
    pub alpha_min: Option<f64>,
    #[arg(long)]
    pub beta_min: Option<f64>,
    /// Upper bound on beta (chores); e.g. 1.064 for the relaxed chores RR rule.
    #[arg(long)]
    pub beta_max: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

impl ConvergeArgs {
    fn grid(&self) -> std::result::Result<Vec<usize>, Failure> {
        if !self.grid.is_empty() {
            if self.grid_step.is_some() || self.grid_max.is_some() {
                return Err(Failure::usage("--grid cannot be combined with --grid-step/--grid-max"));
            }
            return Ok(self.grid.clone());
        }
        let n = self.agents;
        match (self.grid_step, self.grid_max) {
            (None, None) => Ok(default_grid(n)),
            (step, max) => {
                let step = step.unwrap_or((n / 2).max(2));
                let max = max.unwrap_or(100 * n);
                if step == 0 {
                    return Err(Failure::usage("--grid-step must be positive"));
                }
                Ok((1..).map(|k| k * step).take_while(|&m| m <= max).collect())
            }
        }
    }

    fn thresholds(&self) -> Thresholds {
        let mut t = Thresholds::for_support(self.dist.support());
        if let Some(a) = self.alpha_min {
            t.alpha_min = a;
        }
        if self.beta_min.is_some() {
            t.beta_min = self.beta_min;
        }
        if self.beta_max.is_some() {
            t.beta_max = self.beta_max;
        }
        t
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    /// exp1, exp2 or exp3.
    pub kind: ExperimentKind,
    /// Comma-separated agent counts (default: 10, or 7,12,14 for exp3).
    #[arg(long, value_delimiter = ',')]
    pub agents: Vec<usize>,
    /// Comma-separated item counts (default: 2n, 4n, ..., 20n).
    #[arg(long, value_delimiter = ',')]
    pub items: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Bag manifest to evaluate next to the baselines.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Directory holding `bag.json`; used when --model is not given.
    #[arg(long)]
    pub models_dir: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Record of one run: enough to repeat it and to find everything it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, verbatim.
    pub argv: Vec<String>,
    /// The parsed flag set, defaults included.
    pub flags: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub code_version: String,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_secs: f64,
}

impl RunManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    pub fn file_name(command: &str) -> String {
        format!("{command}_manifest.json")
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Runs the command line `argv` (program name first) and returns the exit
/// code: 0 on success, 2 on usage errors, 1 on runtime failures. Errors are
/// reported on stderr as one JSON object.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match thread_count(cli.threads) {
        Ok(Some(t)) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Failure::Runtime(Error::Config(e.to_string())))
            .and_then(|pool| pool.install(|| execute(&cli, &args, Some(t)))),
        Ok(None) => execute(&cli, &args, None),
        Err(f) => Err(f),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            report_error("usage", &msg);
            2
        }
        Err(Failure::Runtime(e)) => {
            report_error(e.kind(), &e.to_string());
            1
        }
    }
}

fn report_error(kind: &str, message: &str) {
    let obj = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{obj}");
}

fn thread_count(flag: Option<usize>) -> Outcome<Option<usize>> {
    let t = match flag {
        Some(t) => Some(t),
        None => match std::env::var(THREADS_ENV) {
            Ok(s) if !s.trim().is_empty() => Some(
                s.trim()
                    .parse()
                    .map_err(|_| Failure::usage(format!("{THREADS_ENV} must be a positive integer, got {s:?}")))?,
            ),
            _ => None,
        },
    };
    if t == Some(0) {
        return Err(Failure::usage("thread count must be at least 1"));
    }
    Ok(t)
}

fn execute(cli: &Cli, argv: &[String], threads: Option<usize>) -> Outcome<()> {
    if let Command::Replay(r) = &cli.command {
        let manifest = RunManifest::read(&r.manifest)?;
        let mut replay = vec!["eef1".to_string()];
        replay.extend(manifest.argv);
        return match cli_main(replay) {
            0 => Ok(()),
            2 => Err(Failure::usage("recorded arguments no longer parse")),
            _ => Err(Failure::Runtime(Error::Config("replayed run failed".into()))),
        };
    }

    let started = Instant::now();
    let (out, seed, outputs) = match &cli.command {
        Command::Gen(a) => (&a.out.out, Some(a.data.seed), gen(a)?),
        Command::Baseline(a) => (&a.out.out, Some(a.data.seed), baseline(a)?),
        Command::Oracle(a) => (&a.out.out, Some(a.data.seed), oracle(a)?),
        Command::Train(a) => (&a.out.out, Some(a.data.seed), train_one(a)?),
        Command::BagTrain(a) => (&a.out.out, Some(a.data.seed), train_bag(a)?),
        Command::Eval(a) => (&a.out.out, Some(a.data.seed), eval(a)?),
        Command::Converge(a) => (&a.out.out, Some(a.seed), converge(a)?),
        Command::Experiment(a) => (&a.out.out, Some(a.seed), experiment(a)?),
        Command::Replay(_) => unreachable!(),
    };
    let manifest = RunManifest {
        command: cli.command.name().into(),
        argv: argv.to_vec(),
        flags: serde_json::to_value(cli).map_err(Error::from)?,
        seed,
        threads,
        code_version: env!("CARGO_PKG_VERSION").into(),
        outputs,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    write_json(&out.join(RunManifest::file_name(cli.command.name())), &manifest)?;
    Ok(())
}

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    serde_json::to_writer_pretty(&mut lock, value)?;
    writeln!(lock)?;
    Ok(())
}

fn gen(a: &GenArgs) -> Outcome<Vec<PathBuf>> {
    prepare(&a.out.out)?;
    let instances = a.data.instances()?;
    let path = a.out.out.join("instances.jsonl");
    write_dataset(BufWriter::new(File::create(&path).map_err(Error::from)?), &instances)?;
    eprintln!("wrote {} instances to {}", instances.len(), path.display());
    Ok(vec![path])
}

#[derive(Serialize)]
struct BaselineLine<'a> {
    index: usize,
    assignment: &'a [usize],
    welfare: f64,
    ef1: bool,
}

fn baseline(a: &BaselineArgs) -> Outcome<Vec<PathBuf>> {
    prepare(&a.out.out)?;
    let instances = a.data.instances()?;
    let alg = Allocator::from(a.alg);
    let lines_path = a.out.out.join(format!("baseline_{}.jsonl", a.alg));
    let mut w = BufWriter::new(File::create(&lines_path).map_err(Error::from)?);
    for (index, inst) in instances.iter().enumerate() {
        let alloc = alg.allocate(inst)?;
        let line = BaselineLine {
            index,
            assignment: alloc.assignment(),
            welfare: social_welfare(inst, &alloc),
            ef1: check_ef1(inst, &alloc),
        };
        serde_json::to_writer(&mut w, &line).map_err(Error::from)?;
        w.write_all(b"\n").map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    let report = evaluate_instances(&alg, &instances)?;
    let report_path = a.out.out.join(format!("baseline_{}_report.json", a.alg));
    write_json(&report_path, &report)?;
    print_json(&report)?;
    Ok(vec![lines_path, report_path])
}

#[derive(Serialize)]
struct OracleSummary {
    instances: usize,
    all_best_ef1: bool,
    mean_ef1_rate: f64,
    mean_welfare: f64,
}

fn oracle(a: &OracleArgs) -> Outcome<Vec<PathBuf>> {
    prepare(&a.out.out)?;
    let instances = a.data.instances()?;
    let path = a.out.out.join("oracle.jsonl");
    let mut w = BufWriter::new(File::create(&path).map_err(Error::from)?);
    let mut all_ef1 = true;
    let (mut rate, mut welfare) = (0.0, 0.0);
    for inst in &instances {
        let r = exact_eef1(inst, a.cap)?;
        all_ef1 &= r.best.as_ref().is_some_and(|b| check_ef1(inst, b));
        rate += r.ef1_rate();
        welfare += r.welfare;
        serde_json::to_writer(&mut w, &r).map_err(Error::from)?;
        w.write_all(b"\n").map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    let count = instances.len().max(1) as f64;
    let summary = OracleSummary {
        instances: instances.len(),
        all_best_ef1: all_ef1,
        mean_ef1_rate: rate / count,
        mean_welfare: welfare / count,
    };
    let summary_path = a.out.out.join("oracle_summary.json");
    write_json(&summary_path, &summary)?;
    print_json(&summary)?;
    Ok(vec![path, summary_path])
}

fn models_dir(optim: &OptimArgs, out: &OutArgs) -> PathBuf {
    optim.models_dir.clone().unwrap_or_else(|| out.out.clone())
}

fn train_one(a: &TrainArgs) -> Outcome<Vec<PathBuf>> {
    prepare(&a.out.out)?;
    let dir = models_dir(&a.optim, &a.out);
    prepare(&dir)?;
    let data = a.data.instances()?;
    let cfg = a.optim.config(a.lambda, a.data.seed);
    let log_path = a.out.out.join(format!("train_{}_log.csv", a.name.trim_end_matches(".eef1")));
    let mut log = csv::Writer::from_path(&log_path).map_err(Error::from)?;
    let mut log_err = None;
    let params = train_with_progress(&data, a.arch.arch(), &cfg, |s| {
        eprintln!("epoch {:>5}  loss {:.6}", s.epoch, s.mean_loss);
        if let Err(e) = log.serialize(s) {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(Error::from(e).into());
    }
    log.flush().map_err(Error::from)?;
    let model_path = dir.join(&a.name);
    save_model(&params, &model_path)?;
    eprintln!("saved {}", model_path.display());
    Ok(vec![model_path, log_path])
}

fn train_bag(a: &BagTrainArgs) -> Outcome<Vec<PathBuf>> {
    prepare(&a.out.out)?;
    let dir = models_dir(&a.optim, &a.out);
    let lambdas = if a.lambdas.is_empty() { DEFAULT_LAMBDAS.to_vec() } else { a.lambdas.clone() };
    let data = a.data.instances()?;
    let bag = bag_train(&data, a.arch.arch(), &a.optim.config(1.0, a.data.seed), &lambdas)?;
    let (manifest, mut files) = save_bag(&bag, &dir, &a.prefix)?;
    eprintln!("saved {} members, manifest {}", files.len(), manifest.display());
    files.push(manifest);
    Ok(files)
}

fn eval(a: &EvalArgs) -> Outcome<Vec<PathBuf>> {
    let alg = a.alg.allocator()?;
    prepare(&a.out.out)?;
    let report = match &a.data.input {
        Some(_) => evaluate_instances(&alg, &a.data.instances()?)?,
        None => evaluate(&alg, &a.data.spec(), a.data.agents, a.data.items, a.data.samples)?,
    };
    let path = a.out.out.join(format!("eval_{}.json", alg.name()));
    write_json(&path, &report)?;
    print_json(&report)?;
    Ok(vec![path])
}

#[derive(Serialize)]
struct ConvergeReport<'a> {
    alg: &'a str,
    dist: DistributionKind,
    n: usize,
    samples: usize,
    seed: u64,
    thresholds: Thresholds,
    #[serde(flatten)]
    result: crate::harness::ConvergenceResult,
}

fn converge(a: &ConvergeArgs) -> Outcome<Vec<PathBuf>> {
    let alg = a.alg.allocator()?;
    let grid = a.grid()?;
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Failure::usage("grid must be non-empty and strictly increasing"));
    }
    prepare(&a.out.out)?;
    let thresholds = a.thresholds();
    let spec = DistributionSpec::new(a.dist, a.seed);
    let result = find_m_star(&alg, &spec, a.agents, &grid, a.samples, &thresholds)?;
    eprintln!(
        "m* = {}",
        result.m_star.map_or_else(|| "not reached on this grid".to_string(), |m| m.to_string())
    );
    let report = ConvergeReport {
        alg: alg.name(),
        dist: a.dist,
        n: a.agents,
        samples: a.samples,
        seed: a.seed,
        thresholds,
        result,
    };
    let path = a.out.out.join(format!("converge_{}_{}_n{}.json", alg.name(), a.dist.name(), a.agents));
    write_json(&path, &report)?;
    print_json(&serde_json::json!({ "m_star": report.result.m_star }))?;
    Ok(vec![path])
}

fn experiment(a: &ExperimentArgs) -> Outcome<Vec<PathBuf>> {
    let mut cfg = ExperimentConfig::new(a.kind, &a.out.out);
    if !a.agents.is_empty() {
        cfg.agents = a.agents.clone();
    }
    if !a.items.is_empty() {
        cfg.items = Some(a.items.clone());
    }
    cfg.samples = a.samples;
    cfg.seed = a.seed;
    cfg.bag = a.model.clone().or_else(|| a.models_dir.as_ref().map(|d| d.join("bag.json")));
    let out = run_experiment(&cfg)?;
    eprintln!("wrote {} panels and {}", out.csv_files.len(), out.summary.display());
    let mut files = out.csv_files;
    files.push(out.summary);
    Ok(files)
}
