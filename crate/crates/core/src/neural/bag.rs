//! Bagging: several networks trained with different `lambda`, combined by
//! picking the best EF1 candidate per instance.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encode::encode;
use super::io::{load_model, save_model};
use super::network::{discretize, ArchConfig, NetworkParams};
use super::train::{train, TrainConfig};
use crate::error::{Error, Result};
use crate::fairness::{check_ef1, ef1_penalty};
use crate::instance::{social_welfare, Allocation, FractionalAllocation, Instance};

/// Seven multipliers spread over `[0.1, 2]`.
pub const DEFAULT_LAMBDAS: [f64; 7] = [0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0];

#[derive(Debug, Clone, PartialEq)]
pub struct BaggedModel {
    pub members: Vec<NetworkParams>,
}

impl BaggedModel {
    pub fn new(members: Vec<NetworkParams>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Config("a bag needs at least one member".into()));
        }
        Ok(Self { members })
    }

    /// Largest `min_agents` over the members.
    pub fn min_agents(&self) -> usize {
        self.members.iter().map(|p| p.arch.min_agents()).max().unwrap_or(1)
    }
}

/// Index of the candidate the bag returns: the max-welfare EF1 candidate, or
/// failing that the one with the smallest EF1 penalty (then max welfare).
/// Remaining ties go to the lowest index.
pub fn select_candidate(inst: &Instance, candidates: &[Allocation]) -> usize {
    let n = inst.agents();
    let scored: Vec<(bool, f64, f64)> = candidates
        .iter()
        .map(|a| {
            let ef1 = check_ef1(inst, a);
            let penalty = if ef1 { 0.0 } else { ef1_penalty(inst, &FractionalAllocation::from_allocation(a, n)) };
            (ef1, penalty, social_welfare(inst, a))
        })
        .collect();
    let mut best = 0;
    for (idx, s) in scored.iter().enumerate().skip(1) {
        let b = scored[best];
        let better = match (s.0, b.0) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => s.2 > b.2,
            (false, false) => s.1 < b.1 || (s.1 == b.1 && s.2 > b.2),
        };
        if better {
            best = idx;
        }
    }
    best
}

pub fn bag_predict(bag: &BaggedModel, inst: &Instance) -> Result<Allocation> {
    let input = encode(inst);
    let candidates = bag
        .members
        .iter()
        .map(|p| p.forward(&input).map(|f| discretize(&f)))
        .collect::<Result<Vec<_>>>()?;
    let idx = select_candidate(inst, &candidates);
    Ok(candidates.into_iter().nth(idx).unwrap())
}

/// Trains one member per `lambda`; member `k` uses seed `cfg.seed + k`.
pub fn bag_train(
    data: &[Instance],
    arch: ArchConfig,
    cfg: &TrainConfig,
    lambdas: &[f64],
) -> Result<BaggedModel> {
    let members = lambdas
        .par_iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let member_cfg = TrainConfig { lambda, seed: cfg.seed.wrapping_add(k as u64), ..*cfg };
            train(data, arch, &member_cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    BaggedModel::new(members)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagMember {
    pub path: PathBuf,
    pub lambda: f64,
}

/// JSON manifest listing the model files of a bag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagManifest {
    pub members: Vec<BagMember>,
}

impl BagManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingModels(vec![path.to_path_buf()]));
        }
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    /// Member paths resolved against the manifest's directory.
    pub fn resolved_paths(&self, manifest_path: &Path) -> Vec<PathBuf> {
        let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        self.members.iter().map(|m| base.join(&m.path)).collect()
    }
}

/// Writes each member as `{prefix}_{k}.eef1` plus `{prefix}.json` into `dir`.
pub fn save_bag(bag: &BaggedModel, dir: &Path, prefix: &str) -> Result<(PathBuf, Vec<PathBuf>)> {
    fs::create_dir_all(dir)?;
    let mut members = Vec::new();
    let mut files = Vec::new();
    for (k, p) in bag.members.iter().enumerate() {
        let name = format!("{prefix}_{k}.eef1");
        save_model(p, dir.join(&name))?;
        files.push(dir.join(&name));
        members.push(BagMember { path: PathBuf::from(name), lambda: p.lambda });
    }
    let manifest_path = dir.join(format!("{prefix}.json"));
    BagManifest { members }.write(&manifest_path)?;
    Ok((manifest_path, files))
}

/// Loads every member listed in a manifest; reports all missing files at once.
pub fn load_bag(manifest_path: impl AsRef<Path>) -> Result<BaggedModel> {
    let manifest_path = manifest_path.as_ref();
    let manifest = BagManifest::read(manifest_path)?;
    let paths = manifest.resolved_paths(manifest_path);
    let missing: Vec<PathBuf> = paths.iter().filter(|p| !p.exists()).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::MissingModels(missing));
    }
    BaggedModel::new(paths.iter().map(load_model).collect::<Result<Vec<_>>>()?)
}
