//! Monte-Carlo metrics, the convergence search for `m*(n)`, and the three
//! experiment sweeps.
//!
//! Every sample `idx` is drawn from its own RNG stream and samples are
//! reduced in fixed-size chunks in index order, so reports are bit-identical
//! whatever the size of the thread pool.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{muw, Baseline};
use crate::error::{Error, Result};
use crate::fairness::verdict;
use crate::instance::{social_welfare, Allocation, DistributionKind, DistributionSpec, Instance, ItemKind};
use crate::neural::{bag_predict, discretize, encode, load_bag, BaggedModel, NetworkParams};

/// Samples per reduction chunk. Part of the reproducibility contract: changing
/// it changes the last bits of the welfare means.
const EVAL_CHUNK: usize = 256;

/// Grid points past `m*` that must also satisfy the thresholds.
pub const CONFIRM_POINTS: usize = 3;

/// Anything that turns an instance into an integral allocation.
#[derive(Debug, Clone)]
pub enum Allocator {
    Baseline(Baseline),
    Network(Arc<NetworkParams>),
    Bag(Arc<BaggedModel>),
}

impl Allocator {
    pub fn name(&self) -> &'static str {
        match self {
            Allocator::Baseline(b) => b.name(),
            Allocator::Network(_) => "nn",
            Allocator::Bag(_) => "bag",
        }
    }

    pub fn allocate(&self, inst: &Instance) -> Result<Allocation> {
        match self {
            Allocator::Baseline(b) => b.allocate(inst),
            Allocator::Network(p) => Ok(discretize(&p.forward(&encode(inst))?)),
            Allocator::Bag(bag) => bag_predict(bag, inst),
        }
    }

    /// Fails early with the same error `allocate` would give on every sample.
    fn check_shape(&self, n: usize, m: usize) -> Result<()> {
        match self {
            Allocator::Baseline(_) => Ok(()),
            Allocator::Network(p) => p.arch.check_input(n, m),
            Allocator::Bag(bag) => bag.members.iter().try_for_each(|p| p.arch.check_input(n, m)),
        }
    }
}

impl From<Baseline> for Allocator {
    fn from(b: Baseline) -> Self {
        Allocator::Baseline(b)
    }
}

impl fmt::Display for Allocator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub alpha_ef1: f64,
    /// Only reported when every sample is a pure-goods instance.
    pub alpha_efx: Option<f64>,
    pub alpha_ef: f64,
    pub beta_sw: f64,
    pub mean_sw_alg: f64,
    pub mean_sw_muw: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    ef1: u64,
    efx: u64,
    ef: u64,
    all_goods: bool,
    sw_alg: f64,
    sw_muw: f64,
}

impl Tally {
    fn merge(self, o: Tally) -> Tally {
        Tally {
            ef1: self.ef1 + o.ef1,
            efx: self.efx + o.efx,
            ef: self.ef + o.ef,
            all_goods: self.all_goods && o.all_goods,
            sw_alg: self.sw_alg + o.sw_alg,
            sw_muw: self.sw_muw + o.sw_muw,
        }
    }

    fn report(self, samples: usize) -> MetricsReport {
        let s = samples as f64;
        let mean_sw_alg = self.sw_alg / s;
        let mean_sw_muw = self.sw_muw / s;
        MetricsReport {
            alpha_ef1: self.ef1 as f64 / s,
            alpha_efx: self.all_goods.then(|| self.efx as f64 / s),
            alpha_ef: self.ef as f64 / s,
            beta_sw: mean_sw_alg / mean_sw_muw,
            mean_sw_alg,
            mean_sw_muw,
            samples,
        }
    }
}

fn tally_one(alg: &Allocator, inst: &Instance) -> Result<Tally> {
    let alloc = alg.allocate(inst)?;
    let v = verdict(inst, &alloc);
    let goods = inst.is_pure_goods();
    Ok(Tally {
        ef1: v.is_ef1 as u64,
        efx: (goods && v.is_efx == Some(true)) as u64,
        ef: v.is_ef as u64,
        all_goods: goods,
        sw_alg: social_welfare(inst, &alloc),
        sw_muw: social_welfare(inst, &muw(inst)),
    })
}

/// Shared by the spec-driven and the file-driven paths: `get(idx)` yields
/// sample `idx` of `samples`.
fn evaluate_indexed<F>(samples: usize, get: F) -> Result<MetricsReport>
where
    F: Fn(usize) -> Result<Tally> + Sync,
{
    if samples == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    let chunks = (samples + EVAL_CHUNK - 1) / EVAL_CHUNK;
    let tallies = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut t = Tally { all_goods: true, ..Tally::default() };
            for idx in c * EVAL_CHUNK..((c + 1) * EVAL_CHUNK).min(samples) {
                t = t.merge(get(idx)?);
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = tallies.into_iter().fold(Tally { all_goods: true, ..Tally::default() }, Tally::merge);
    Ok(total.report(samples))
}

/// Draws `samples` instances of size `n x m` from `spec` and measures `alg`
/// against MUW on them.
pub fn evaluate(alg: &Allocator, spec: &DistributionSpec, n: usize, m: usize, samples: usize) -> Result<MetricsReport> {
    alg.check_shape(n, m)?;
    evaluate_indexed(samples, |idx| tally_one(alg, &spec.sample_at(n, m, idx as u64)))
}

/// Same metrics over an explicit list of instances.
pub fn evaluate_instances(alg: &Allocator, instances: &[Instance]) -> Result<MetricsReport> {
    evaluate_indexed(instances.len(), |idx| tally_one(alg, &instances[idx]))
}

/// Convergence condition on `(alpha_ef1, beta_sw)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub alpha_min: f64,
    pub beta_min: Option<f64>,
    pub beta_max: Option<f64>,
}

impl Thresholds {
    /// `alpha >= 0.99` and `beta >= 0.99`.
    pub fn goods() -> Self {
        Self { alpha_min: 0.99, beta_min: Some(0.99), beta_max: None }
    }

    /// `alpha >= 0.99` and `beta <= 1.02`.
    pub fn chores() -> Self {
        Self { alpha_min: 0.99, beta_min: None, beta_max: Some(1.02) }
    }

    /// Mixed instances use the goods rule.
    pub fn for_support(kind: ItemKind) -> Self {
        match kind {
            ItemKind::Chores => Self::chores(),
            ItemKind::Goods | ItemKind::Mixed => Self::goods(),
        }
    }

    pub fn accepts(&self, r: &MetricsReport) -> bool {
        r.alpha_ef1 >= self.alpha_min
            && self.beta_min.map_or(true, |b| r.beta_sw >= b)
            && self.beta_max.map_or(true, |b| r.beta_sw <= b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceResult {
    pub m_star: Option<usize>,
    pub grid: Vec<(usize, MetricsReport)>,
}

/// Step `max(2, n/2)` from one step up to `100 n`.
pub fn default_grid(n: usize) -> Vec<usize> {
    let step = (n / 2).max(2);
    (1..).map(|k| k * step).take_while(|&m| m <= 100 * n).collect()
}

/// Smallest grid `m` such that the thresholds hold at `m` and at every larger
/// grid point, of which there must be at least `confirm`.
pub fn m_star_of(grid: &[(usize, MetricsReport)], thresholds: &Thresholds, confirm: usize) -> Option<usize> {
    let mut start = grid.len();
    while start > 0 && thresholds.accepts(&grid[start - 1].1) {
        start -= 1;
    }
    (start + confirm < grid.len()).then(|| grid[start].0)
}

pub fn find_m_star(
    alg: &Allocator,
    spec: &DistributionSpec,
    n: usize,
    grid: &[usize],
    samples: usize,
    thresholds: &Thresholds,
) -> Result<ConvergenceResult> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("grid must be non-empty and strictly increasing".into()));
    }
    let reports = grid
        .par_iter()
        .map(|&m| evaluate(alg, spec, n, m, samples).map(|r| (m, r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceResult { m_star: m_star_of(&reports, thresholds, CONFIRM_POINTS), grid: reports })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    /// Uniform goods, chores and mixed items at fixed `n`.
    Exp1,
    /// Gaussian, log-normal and exponential valuations at fixed `n`.
    Exp2,
    /// Uniform goods over several agent counts.
    Exp3,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Exp1 => "exp1",
            ExperimentKind::Exp2 => "exp2",
            ExperimentKind::Exp3 => "exp3",
        }
    }

    pub fn distributions(self) -> Vec<DistributionKind> {
        use DistributionKind::*;
        match self {
            ExperimentKind::Exp1 => vec![UniformGoods, UniformChores, UniformMixed],
            ExperimentKind::Exp2 => vec![Gaussian, Lognormal, Exponential],
            ExperimentKind::Exp3 => vec![UniformGoods],
        }
    }

    pub fn default_agents(self) -> Vec<usize> {
        match self {
            ExperimentKind::Exp1 | ExperimentKind::Exp2 => vec![10],
            ExperimentKind::Exp3 => vec![7, 12, 14],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp1" => Ok(ExperimentKind::Exp1),
            "exp2" => Ok(ExperimentKind::Exp2),
            "exp3" => Ok(ExperimentKind::Exp3),
            other => Err(Error::Config(format!("unknown experiment {other:?} (expected exp1, exp2 or exp3)"))),
        }
    }
}

/// Baselines that apply to a distribution's sign pattern: RR on pure goods or
/// chores, D-RR on mixed items, CRR on goods only.
pub fn baselines_for(support: ItemKind) -> Vec<Baseline> {
    match support {
        ItemKind::Goods => vec![Baseline::Muw, Baseline::Rr, Baseline::Crr],
        ItemKind::Chores => vec![Baseline::Muw, Baseline::Rr],
        ItemKind::Mixed => vec![Baseline::Muw, Baseline::Drr],
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub agents: Vec<usize>,
    /// Item counts per agent count; `None` uses `2n, 4n, ..., 20n`.
    pub items: Option<Vec<usize>>,
    pub samples: usize,
    pub seed: u64,
    /// Bag manifest; when set, the bag is evaluated alongside the baselines.
    pub bag: Option<PathBuf>,
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, out: impl Into<PathBuf>) -> Self {
        Self {
            kind,
            agents: kind.default_agents(),
            items: None,
            samples: 10_000,
            seed: 0,
            bag: None,
            out: out.into(),
        }
    }

    fn items_for(&self, n: usize) -> Vec<usize> {
        self.items.clone().unwrap_or_else(|| (1..=10).map(|k| 2 * k * n).collect())
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub alg: String,
    pub n: usize,
    pub m: usize,
    pub dist: String,
    pub alpha_ef1: f64,
    pub beta_sw: f64,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub samples: usize,
    pub csv_files: Vec<PathBuf>,
    /// `(alg, n)` pairs left out because the network cannot take `n` agents.
    pub skipped: Vec<(String, usize)>,
    pub panels: Vec<PanelSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSummary {
    pub alg: String,
    pub dist: String,
    pub n: usize,
    pub reports: Vec<(usize, MetricsReport)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub csv_files: Vec<PathBuf>,
    pub summary: PathBuf,
}

/// Runs one sweep and writes `{exp}_{alg}_{dist}_n{n}.csv` per panel plus
/// `{exp}_summary.json` into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.agents.is_empty() {
        return Err(Error::Config("no agent counts given".into()));
    }
    let bag = cfg.bag.as_ref().map(load_bag).transpose()?.map(Arc::new);
    fs::create_dir_all(&cfg.out)?;

    let mut csv_files = Vec::new();
    let mut panels = Vec::new();
    let mut skipped = Vec::new();
    for dist in cfg.kind.distributions() {
        let spec = DistributionSpec::new(dist, cfg.seed);
        let mut algs: Vec<Allocator> = baselines_for(dist.support()).into_iter().map(Allocator::from).collect();
        if let Some(bag) = &bag {
            algs.push(Allocator::Bag(bag.clone()));
        }
        for &n in &cfg.agents {
            for alg in &algs {
                if let Allocator::Bag(b) = alg {
                    if n < b.min_agents() {
                        skipped.push((alg.name().to_string(), n));
                        continue;
                    }
                }
                let items = cfg.items_for(n);
                let reports = items
                    .par_iter()
                    .map(|&m| evaluate(alg, &spec, n, m, cfg.samples).map(|r| (m, r)))
                    .collect::<Result<Vec<_>>>()?;
                let path = cfg.out.join(format!("{}_{}_{}_n{}.csv", cfg.kind, alg.name(), dist.name(), n));
                write_panel(&path, alg.name(), dist, n, cfg, &reports)?;
                csv_files.push(path);
                panels.push(PanelSummary { alg: alg.name().into(), dist: dist.name().into(), n, reports });
            }
        }
    }

    let summary = ExperimentSummary {
        experiment: cfg.kind,
        seed: cfg.seed,
        samples: cfg.samples,
        csv_files: csv_files.iter().map(|p| p.file_name().unwrap().into()).collect(),
        skipped,
        panels,
    };
    let summary_path = cfg.out.join(format!("{}_summary.json", cfg.kind));
    write_json(&summary_path, &summary)?;
    Ok(ExperimentOutput { csv_files, summary: summary_path })
}

fn write_panel(
    path: &Path,
    alg: &str,
    dist: DistributionKind,
    n: usize,
    cfg: &ExperimentConfig,
    reports: &[(usize, MetricsReport)],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (m, r) in reports {
        w.serialize(ExperimentRow {
            alg: alg.into(),
            n,
            m: *m,
            dist: dist.name().into(),
            alpha_ef1: r.alpha_ef1,
            beta_sw: r.beta_sw,
            samples: r.samples,
            seed: cfg.seed,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
