//! Envy-based fairness predicates and penalties.
//!
//! Boolean checks work on integral allocations and compare with an absolute
//! tolerance of [`TOLERANCE`]. The penalties accept fractional allocations so
//! they can serve as training constraints; on integral input they are zero
//! exactly when the matching predicate holds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Allocation, FractionalAllocation, Instance};

/// Absolute slack on every `>=` comparison in the checkers.
pub const TOLERANCE: f64 = 1e-9;

/// Share above which an item counts as a member of a fractional bundle.
pub const MEMBERSHIP_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessVerdict {
    pub is_ef: bool,
    pub is_ef1: bool,
    /// `None` when the instance has chores, where EFX is not defined here.
    pub is_efx: Option<bool>,
    /// `(envious agent, envied agent)` of the largest violation, if any.
    pub worst_pair: Option<(usize, usize)>,
}

/// Per-agent view of an integral allocation: what `i` thinks of every bundle.
struct AgentView {
    value: Vec<f64>,
    max_item: Vec<f64>,
    min_item: Vec<f64>,
    min_positive: Vec<f64>,
}

impl AgentView {
    fn new(n: usize) -> Self {
        Self {
            value: vec![0.0; n],
            max_item: vec![f64::NEG_INFINITY; n],
            min_item: vec![f64::INFINITY; n],
            min_positive: vec![f64::INFINITY; n],
        }
    }

    fn fill(&mut self, inst: &Instance, alloc: &Allocation, i: usize) {
        self.value.fill(0.0);
        self.max_item.fill(f64::NEG_INFINITY);
        self.min_item.fill(f64::INFINITY);
        self.min_positive.fill(f64::INFINITY);
        for (&k, &x) in alloc.assignment().iter().zip(inst.row(i)) {
            self.value[k] += x;
            self.max_item[k] = self.max_item[k].max(x);
            self.min_item[k] = self.min_item[k].min(x);
            if x > 0.0 {
                self.min_positive[k] = self.min_positive[k].min(x);
            }
        }
    }

    /// EF1 for the pair `(i, k)`; empty bundles contribute no removal option.
    fn ef1(&self, i: usize, k: usize) -> bool {
        let own = self.value[i];
        let other = self.value[k];
        own + TOLERANCE >= other
            || (self.max_item[k].is_finite() && own + TOLERANCE >= other - self.max_item[k])
            || (self.min_item[i].is_finite() && own - self.min_item[i] + TOLERANCE >= other)
    }

    fn efx(&self, i: usize, k: usize) -> bool {
        let own = self.value[i];
        let other = self.value[k];
        !self.min_positive[k].is_finite() || own + TOLERANCE >= other - self.min_positive[k]
    }
}

fn check_sizes(inst: &Instance, alloc: &Allocation) {
    assert_eq!(alloc.items(), inst.items(), "allocation/instance item mismatch");
}

/// EF, EF1 and (goods only) EFX in one `O(n^2 + n m)` pass.
pub fn verdict(inst: &Instance, alloc: &Allocation) -> FairnessVerdict {
    check_sizes(inst, alloc);
    let n = inst.agents();
    let goods = inst.is_pure_goods();
    let mut view = AgentView::new(n);
    let (mut ef, mut ef1, mut efx) = (true, true, true);
    let mut worst_ef1: Option<((usize, usize), f64)> = None;
    let mut worst_ef: Option<((usize, usize), f64)> = None;
    for i in 0..n {
        view.fill(inst, alloc, i);
        for k in 0..n {
            if k == i {
                continue;
            }
            let gap = view.value[k] - view.value[i];
            if gap > TOLERANCE {
                ef = false;
                if worst_ef.map_or(true, |(_, g)| gap > g) {
                    worst_ef = Some(((i, k), gap));
                }
                if !view.ef1(i, k) {
                    ef1 = false;
                    if worst_ef1.map_or(true, |(_, g)| gap > g) {
                        worst_ef1 = Some(((i, k), gap));
                    }
                }
                if goods && !view.efx(i, k) {
                    efx = false;
                }
            }
        }
    }
    FairnessVerdict {
        is_ef: ef,
        is_ef1: ef1,
        is_efx: goods.then_some(efx),
        worst_pair: worst_ef1.or(worst_ef).map(|(p, _)| p),
    }
}

pub fn check_ef(inst: &Instance, alloc: &Allocation) -> bool {
    check_sizes(inst, alloc);
    let n = inst.agents();
    let vb = alloc.bundle_value_matrix(inst);
    (0..n).all(|i| (0..n).all(|k| vb[i * n + i] + TOLERANCE >= vb[i * n + k]))
}

/// True iff every envy can be removed by dropping one item from the envied
/// bundle or one item from the envier's own bundle.
pub fn check_ef1(inst: &Instance, alloc: &Allocation) -> bool {
    check_sizes(inst, alloc);
    let n = inst.agents();
    let mut view = AgentView::new(n);
    for i in 0..n {
        view.fill(inst, alloc, i);
        if !(0..n).all(|k| k == i || view.ef1(i, k)) {
            return false;
        }
    }
    true
}

/// EFX for goods: envy disappears after removing any positively valued item.
pub fn check_efx(inst: &Instance, alloc: &Allocation) -> Result<bool> {
    check_sizes(inst, alloc);
    if !inst.is_pure_goods() {
        return Err(Error::Unsupported(
            "EFX is only defined for pure-goods instances".into(),
        ));
    }
    let n = inst.agents();
    let mut view = AgentView::new(n);
    for i in 0..n {
        view.fill(inst, alloc, i);
        if !(0..n).all(|k| k == i || view.efx(i, k)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Which envy notion a penalty measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EnvyMode {
    #[default]
    Ef,
    Ef1,
}

impl fmt::Display for EnvyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvyMode::Ef => "ef",
            EnvyMode::Ef1 => "ef1",
        })
    }
}

impl FromStr for EnvyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ef" => Ok(EnvyMode::Ef),
            "ef1" => Ok(EnvyMode::Ef1),
            other => Err(Error::Config(format!("unknown envy mode '{other}' (expected ef or ef1)"))),
        }
    }
}

/// Per-pair penalty terms `t[i][k]` (row-major `n x n`, zero on the diagonal)
/// for a column-stochastic `shares` matrix. Generic so the training code can
/// evaluate it in either precision.
pub fn envy_terms<T: num_traits::Float>(
    values: &[f64],
    shares: &[T],
    n: usize,
    m: usize,
    mode: EnvyMode,
) -> Vec<T> {
    let threshold = T::from(MEMBERSHIP_THRESHOLD).unwrap();
    let mut terms = vec![T::zero(); n * n];
    let mut bundle = vec![T::zero(); n];
    let mut max_item = vec![f64::NEG_INFINITY; n];
    let mut min_item = vec![f64::INFINITY; n];
    for i in 0..n {
        let row = &values[i * m..(i + 1) * m];
        for k in 0..n {
            let s = &shares[k * m..(k + 1) * m];
            let mut acc = T::zero();
            let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
            for (&p, &x) in s.iter().zip(row) {
                acc = acc + p * T::from(x).unwrap();
                if p > threshold {
                    hi = hi.max(x);
                    lo = lo.min(x);
                }
            }
            bundle[k] = acc;
            max_item[k] = hi;
            min_item[k] = lo;
        }
        for k in 0..n {
            if k == i {
                continue;
            }
            let gap = bundle[k] - bundle[i];
            let adjust = match mode {
                EnvyMode::Ef => 0.0,
                EnvyMode::Ef1 => {
                    let drop_envied = max_item[k].is_finite().then(|| -max_item[k]);
                    let drop_own = min_item[i].is_finite().then_some(min_item[i]);
                    match (drop_envied, drop_own) {
                        (Some(a), Some(b)) => a.min(b),
                        (Some(a), None) => a,
                        (None, Some(b)) => b,
                        (None, None) => 0.0,
                    }
                }
            };
            let t = gap + T::from(adjust).unwrap();
            terms[i * n + k] = if t > T::zero() { t } else { T::zero() };
        }
    }
    terms
}

fn penalty(inst: &Instance, frac: &FractionalAllocation, mode: EnvyMode) -> f64 {
    assert_eq!(inst.agents(), frac.agents(), "agent count mismatch");
    assert_eq!(inst.items(), frac.items(), "item count mismatch");
    envy_terms(inst.values(), frac.shares(), inst.agents(), inst.items(), mode)
        .into_iter()
        .sum()
}

/// `sum_i sum_k max{0, v_i(A_k) - v_i(A_i)}` over fractional bundles.
pub fn envy_penalty(inst: &Instance, frac: &FractionalAllocation) -> f64 {
    penalty(inst, frac, EnvyMode::Ef)
}

/// EF1 analogue of [`envy_penalty`]: each gap is first reduced by the best
/// single-item removal (largest item of the envied bundle, or smallest item of
/// the envier's bundle).
pub fn ef1_penalty(inst: &Instance, frac: &FractionalAllocation) -> f64 {
    penalty(inst, frac, EnvyMode::Ef1)
}

pub fn penalty_for(mode: EnvyMode, inst: &Instance, frac: &FractionalAllocation) -> f64 {
    penalty(inst, frac, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{DistributionKind, DistributionSpec};
    use rand::Rng;

    fn alloc(a: &[usize]) -> Allocation {
        Allocation::from_assignment(a.to_vec())
    }

    /// Literal reading of the EF1 definition, removing each item in turn.
    fn ef1_brute(inst: &Instance, al: &Allocation) -> bool {
        let n = inst.agents();
        for i in 0..n {
            for k in 0..n {
                let own = al.bundle_value(inst, i, i);
                let other = al.bundle_value(inst, i, k);
                if own + TOLERANCE >= other {
                    continue;
                }
                let by_envied = al
                    .bundle(k)
                    .iter()
                    .any(|&j| own + TOLERANCE >= other - inst.value(i, j));
                let by_own = al
                    .bundle(i)
                    .iter()
                    .any(|&j| own - inst.value(i, j) + TOLERANCE >= other);
                if !by_envied && !by_own {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn single_good_is_ef1_not_ef() {
        let inst = Instance::from_rows(&[vec![1.0], vec![1.0]]);
        let a = alloc(&[0]);
        assert!(check_ef1(&inst, &a));
        assert!(!check_ef(&inst, &a));
        let v = verdict(&inst, &a);
        assert!(v.is_ef1 && !v.is_ef);
        assert_eq!(v.is_efx, Some(true));
        assert_eq!(v.worst_pair, Some((1, 0)));
    }

    #[test]
    fn single_chore_is_ef1() {
        let inst = Instance::from_rows(&[vec![-1.0], vec![-1.0]]);
        assert!(check_ef1(&inst, &alloc(&[0])));
        assert!(check_efx(&inst, &alloc(&[0])).is_err());
    }

    #[test]
    fn all_to_one_agent_violates_ef1() {
        let inst = Instance::from_rows(&[vec![5.0, 1.0, 1.0], vec![5.0, 1.0, 1.0]]);
        let a = alloc(&[0, 0, 0]);
        assert!(!check_ef1(&inst, &a));
        assert!(!ef1_brute(&inst, &a));
        assert_eq!(verdict(&inst, &a).worst_pair, Some((1, 0)));
    }

    #[test]
    fn equal_bundles_are_ef() {
        let inst = Instance::from_rows(&[vec![2.0, 1.0, 1.0], vec![2.0, 1.0, 1.0]]);
        let a = alloc(&[0, 1, 1]);
        assert!(check_ef(&inst, &a));
        assert!(check_efx(&inst, &a).unwrap());
        assert!(check_ef1(&inst, &a));
    }

    #[test]
    fn efx_is_stricter_than_ef1() {
        // Agent 1 envies {5, 1}; dropping the 1 still leaves 5 > 3.
        let inst = Instance::from_rows(&[vec![5.0, 1.0, 3.0], vec![5.0, 1.0, 3.0]]);
        let a = alloc(&[0, 0, 1]);
        assert!(check_ef1(&inst, &a));
        assert!(!check_efx(&inst, &a).unwrap());
    }

    #[test]
    fn envy_penalty_examples() {
        let inst = Instance::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let uniform = FractionalAllocation::uniform(2, 2);
        assert_eq!(envy_penalty(&inst, &uniform), 0.0);
        let all0 = FractionalAllocation::from_allocation(&alloc(&[0, 0]), 2);
        assert_eq!(envy_penalty(&inst, &all0), 2.0);
        assert_eq!(ef1_penalty(&inst, &all0), 1.0);
    }

    #[test]
    fn single_agent_penalties_vanish() {
        let inst = Instance::from_rows(&[vec![3.0, -2.0, 0.5]]);
        let a = FractionalAllocation::from_allocation(&alloc(&[0, 0, 0]), 1);
        assert_eq!(envy_penalty(&inst, &a), 0.0);
        assert_eq!(ef1_penalty(&inst, &a), 0.0);
    }

    #[test]
    fn fast_checker_matches_literal_definition() {
        for kind in [
            DistributionKind::UniformGoods,
            DistributionKind::UniformChores,
            DistributionKind::UniformMixed,
        ] {
            let spec = DistributionSpec::new(kind, 17);
            for idx in 0..500 {
                let inst = spec.sample_at(3, 6, idx);
                let mut rng = spec.stream(10_000 + idx);
                let a = alloc(&(0..6).map(|_| rng.random_range(0..3)).collect::<Vec<_>>());
                assert_eq!(check_ef1(&inst, &a), ef1_brute(&inst, &a), "{kind} #{idx}");
                let v = verdict(&inst, &a);
                assert_eq!(v.is_ef1, check_ef1(&inst, &a));
                assert_eq!(v.is_ef, check_ef(&inst, &a));
                if kind == DistributionKind::UniformGoods {
                    assert_eq!(v.is_efx, Some(check_efx(&inst, &a).unwrap()));
                }
            }
        }
    }

    #[test]
    fn penalties_agree_with_checkers_on_integral_allocations() {
        for kind in [
            DistributionKind::UniformGoods,
            DistributionKind::UniformChores,
            DistributionKind::UniformMixed,
        ] {
            let spec = DistributionSpec::new(kind, 5);
            for idx in 0..1000 {
                let inst = spec.sample_at(3, 6, idx);
                let mut rng = spec.stream(50_000 + idx);
                let a = alloc(&(0..6).map(|_| rng.random_range(0..3)).collect::<Vec<_>>());
                let frac = FractionalAllocation::from_allocation(&a, 3);
                assert_eq!(ef1_penalty(&inst, &frac) <= TOLERANCE, check_ef1(&inst, &a));
                assert_eq!(envy_penalty(&inst, &frac) <= TOLERANCE, check_ef(&inst, &a));
            }
        }
    }

    #[test]
    fn ef1_is_scale_invariant() {
        let spec = DistributionSpec::new(DistributionKind::UniformMixed, 8);
        for idx in 0..200 {
            let inst = spec.sample_at(3, 5, idx);
            let mut rng = spec.stream(7_000 + idx);
            let a = alloc(&(0..5).map(|_| rng.random_range(0..3)).collect::<Vec<_>>());
            for c in [0.5, 3.0, 1000.0] {
                assert_eq!(check_ef1(&inst, &a), check_ef1(&inst.scaled(c), &a));
            }
        }
    }

    #[test]
    fn envy_mode_parses() {
        assert_eq!("EF1".parse::<EnvyMode>().unwrap(), EnvyMode::Ef1);
        assert_eq!("ef".parse::<EnvyMode>().unwrap(), EnvyMode::Ef);
        assert!("efx".parse::<EnvyMode>().is_err());
    }
}
