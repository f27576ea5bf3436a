//! Exhaustive search for the max-welfare EF1 allocation on tiny instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::TOLERANCE;
use crate::instance::{Allocation, Instance};

pub const DEFAULT_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best: Option<Allocation>,
    pub welfare: f64,
    pub ef1_count: u64,
    pub total: u64,
}

impl OracleResult {
    pub fn ef1_rate(&self) -> f64 {
        self.ef1_count as f64 / self.total as f64
    }
}

fn allocation_count(inst: &Instance, cap: u64) -> Result<u64> {
    let total = (inst.agents() as u128).checked_pow(inst.items() as u32).unwrap_or(u128::MAX);
    if total > cap as u128 {
        return Err(Error::OracleTooLarge { total, cap });
    }
    Ok(total as u64)
}

/// Enumeration state over a contiguous range of assignment vectors, visited
/// in lexicographic order (last item varies fastest).
struct Enumerator<'a> {
    inst: &'a Instance,
    assign: Vec<usize>,
    /// `bundle[i * n + k] = v_i(A_k)`, maintained incrementally.
    bundle: Vec<f64>,
}

impl<'a> Enumerator<'a> {
    fn starting_at(inst: &'a Instance, index: u64) -> Self {
        let (n, m) = (inst.agents(), inst.items());
        let mut assign = vec![0; m];
        let mut rest = index;
        for slot in assign.iter_mut().rev() {
            *slot = (rest % n as u64) as usize;
            rest /= n as u64;
        }
        let bundle = Allocation::from_assignment(assign.clone()).bundle_value_matrix(inst);
        Self { inst, assign, bundle }
    }

    fn move_item(&mut self, j: usize, to: usize) {
        let n = self.inst.agents();
        let from = self.assign[j];
        for i in 0..n {
            let x = self.inst.value(i, j);
            self.bundle[i * n + from] -= x;
            self.bundle[i * n + to] += x;
        }
        self.assign[j] = to;
    }

    /// Mixed-radix increment; only the digits that change touch the bundle sums.
    fn advance(&mut self) {
        let n = self.inst.agents();
        for j in (0..self.assign.len()).rev() {
            let next = self.assign[j] + 1;
            if next < n {
                self.move_item(j, next);
                return;
            }
            self.move_item(j, 0);
        }
    }

    fn is_ef1(&self) -> bool {
        let (n, m) = (self.inst.agents(), self.inst.items());
        for i in 0..n {
            let own = self.bundle[i * n + i];
            for k in 0..n {
                let other = self.bundle[i * n + k];
                if k == i || own + TOLERANCE >= other {
                    continue;
                }
                let row = self.inst.row(i);
                let mut drop_envied = f64::NEG_INFINITY;
                let mut drop_own = f64::INFINITY;
                for j in 0..m {
                    let a = self.assign[j];
                    if a == k {
                        drop_envied = drop_envied.max(row[j]);
                    } else if a == i {
                        drop_own = drop_own.min(row[j]);
                    }
                }
                let ok = (drop_envied.is_finite() && own + TOLERANCE >= other - drop_envied)
                    || (drop_own.is_finite() && own - drop_own + TOLERANCE >= other);
                if !ok {
                    return false;
                }
            }
        }
        true
    }

    fn welfare(&self) -> f64 {
        self.assign.iter().enumerate().map(|(j, &a)| self.inst.value(a, j)).sum()
    }
}

#[derive(Clone)]
struct Partial {
    best: Option<(f64, Vec<usize>)>,
    ef1_count: u64,
}

impl Partial {
    /// Higher welfare wins; equal welfare keeps the lexicographically smaller vector.
    fn merge(self, other: Partial) -> Partial {
        let best = match (self.best, other.best) {
            (Some(a), Some(b)) => {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    Some(b)
                } else {
                    Some(a)
                }
            }
            (a, b) => a.or(b),
        };
        Partial { best, ef1_count: self.ef1_count + other.ef1_count }
    }
}

fn scan(inst: &Instance, start: u64, end: u64) -> Partial {
    let mut e = Enumerator::starting_at(inst, start);
    let mut out = Partial { best: None, ef1_count: 0 };
    for idx in start..end {
        if e.is_ef1() {
            out.ef1_count += 1;
            let w = e.welfare();
            if out.best.as_ref().map_or(true, |(bw, _)| w > *bw) {
                out.best = Some((w, e.assign.clone()));
            }
        }
        if idx + 1 < end {
            e.advance();
        }
    }
    out
}

const CHUNK: u64 = 1 << 16;

/// Max-welfare allocation among all EF1 allocations, by full enumeration of
/// the `n^m` complete allocations. Errors when `n^m > cap`.
pub fn exact_eef1(inst: &Instance, cap: u64) -> Result<OracleResult> {
    let total = allocation_count(inst, cap)?;
    let chunks: Vec<(u64, u64)> = (0..total)
        .step_by(CHUNK as usize)
        .map(|s| (s, (s + CHUNK).min(total)))
        .collect();
    let partials: Vec<Partial> = chunks.par_iter().map(|&(s, e)| scan(inst, s, e)).collect();
    let merged = partials
        .into_iter()
        .fold(Partial { best: None, ef1_count: 0 }, Partial::merge);
    let (welfare, best) = match merged.best {
        Some((w, a)) => (w, Some(Allocation::from_assignment(a))),
        None => (f64::NEG_INFINITY, None),
    };
    Ok(OracleResult { best, welfare, ef1_count: merged.ef1_count, total })
}

/// Mean fraction of EF1 allocations over a batch of instances.
pub fn exact_ef1_rate(batch: &[Instance], cap: u64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Config("empty instance batch".into()));
    }
    let mut sum = 0.0;
    for inst in batch {
        sum += exact_eef1(inst, cap)?.ef1_rate();
    }
    Ok(sum / batch.len() as f64)
}
