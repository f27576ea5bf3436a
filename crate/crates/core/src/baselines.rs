//! Classical allocators: max welfare, round robin and its variants.
//!
//! Ties are broken towards the lowest agent index, then the lowest item index.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Allocation, Instance};

/// Order in which agents take turns within a round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PickingOrder {
    order: Vec<usize>,
}

impl PickingOrder {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &a in &order {
            if a >= order.len() || std::mem::replace(&mut seen[a], true) {
                return Err(Error::Config(format!("{order:?} is not a permutation of agents")));
            }
        }
        Ok(Self { order })
    }

    /// `0, 1, ..., n-1`
    pub fn identity(n: usize) -> Self {
        Self { order: (0..n).collect() }
    }

    /// `n-1, ..., 1, 0`
    pub fn reversed(n: usize) -> Self {
        Self { order: (0..n).rev().collect() }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Assigns every item to an agent who values it most. Maximizes welfare.
pub fn muw(inst: &Instance) -> Allocation {
    Allocation::from_assignment((0..inst.items()).map(|j| inst.top_agent(j)).collect())
}

/// Index of the highest-valued entry of `row` among `remaining` items,
/// restricted to entries accepted by `admit`. Lowest item index on ties.
fn best_remaining(row: &[f64], remaining: &[bool], admit: impl Fn(f64) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, (&x, &free)) in row.iter().zip(remaining).enumerate() {
        if free && admit(x) && best.map_or(true, |b| x > row[b]) {
            best = Some(j);
        }
    }
    best
}

/// Per-agent preference lists (value descending, lowest index on ties) with
/// a cursor that skips taken items, so each pick costs amortized `O(1)`.
struct Preferences {
    order: Vec<Vec<usize>>,
    cursor: Vec<usize>,
}

impl Preferences {
    fn new(inst: &Instance) -> Self {
        let order = (0..inst.agents())
            .map(|i| {
                let row = inst.row(i);
                let mut idx: Vec<usize> = (0..inst.items()).collect();
                idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
                idx
            })
            .collect();
        Self { order, cursor: vec![0; inst.agents()] }
    }

    /// The favourite remaining item of `agent`; same choice as `best_remaining`.
    fn best(&mut self, agent: usize, remaining: &[bool]) -> Option<usize> {
        let list = &self.order[agent];
        let c = &mut self.cursor[agent];
        while *c < list.len() && !remaining[list[*c]] {
            *c += 1;
        }
        list.get(*c).copied()
    }
}

/// Round robin: agents pick their favourite remaining item in cyclic `order`.
///
/// For goods the favourite is the most valuable item, for chores the least
/// costly; both are the item with the largest valuation.
pub fn round_robin(inst: &Instance, order: &PickingOrder) -> Result<Allocation> {
    if order.len() != inst.agents() {
        return Err(Error::Config(format!(
            "picking order has {} agents, instance has {}",
            order.len(),
            inst.agents()
        )));
    }
    if !inst.is_pure_goods() && !inst.is_pure_chores() {
        return Err(Error::Unsupported(
            "RR requires pure goods or pure chores; use double_round_robin".into(),
        ));
    }
    let m = inst.items();
    let mut remaining = vec![true; m];
    let mut assign = vec![0; m];
    let mut prefs = Preferences::new(inst);
    for &agent in order.as_slice().iter().cycle().take(m) {
        let j = prefs.best(agent, &remaining).expect("items remain");
        remaining[j] = false;
        assign[j] = agent;
    }
    Ok(Allocation::from_assignment(assign))
}

/// Round robin with the identity picking order.
pub fn round_robin_default(inst: &Instance) -> Result<Allocation> {
    round_robin(inst, &PickingOrder::identity(inst.agents()))
}

/// Double round robin for mixed goods and chores.
///
/// Items that no agent values positively are dealt round robin in order
/// `0..n`, each picker taking its least costly one. The chore count is first
/// padded with zero-valued dummy chores to a multiple of `n`; those are
/// everyone's favourite, so the first `pad` pickers of the opening round take
/// a dummy, i.e. the real chores are dealt starting from agent `pad`.
/// The remaining items go round robin in reverse order `n-1..0`; a picker takes
/// its most valuable positively valued item or passes. Items left when a whole
/// cycle passes go to their top agent.
pub fn double_round_robin(inst: &Instance) -> Allocation {
    let (n, m) = (inst.agents(), inst.items());
    let mut assign = vec![0; m];
    let universal_chore: Vec<bool> = (0..m)
        .map(|j| (0..n).all(|i| inst.value(i, j) <= 0.0))
        .collect();

    let mut remaining = universal_chore.clone();
    let chores = universal_chore.iter().filter(|&&c| c).count();
    let pad = (n - chores % n) % n;
    for &agent in PickingOrder::identity(n).as_slice().iter().cycle().skip(pad).take(chores) {
        let j = best_remaining(inst.row(agent), &remaining, |_| true).expect("chores remain");
        remaining[j] = false;
        assign[j] = agent;
    }

    let mut remaining: Vec<bool> = universal_chore.iter().map(|c| !c).collect();
    let mut left = m - chores;
    let reverse = PickingOrder::reversed(n);
    while left > 0 {
        let mut picked = false;
        for &agent in reverse.as_slice() {
            if left == 0 {
                break;
            }
            if let Some(j) = best_remaining(inst.row(agent), &remaining, |x| x > 0.0) {
                remaining[j] = false;
                assign[j] = agent;
                left -= 1;
                picked = true;
            }
        }
        if !picked {
            for j in 0..m {
                if remaining[j] {
                    remaining[j] = false;
                    assign[j] = inst.top_agent(j);
                }
            }
            left = 0;
        }
    }
    Allocation::from_assignment(assign)
}

/// Constrained round robin for goods: a recursively balanced picking sequence
/// that, within each round, hands the globally most valuable remaining
/// (agent, item) pair to an agent that has not picked yet this round.
pub fn crr(inst: &Instance) -> Result<Allocation> {
    crr_with_sequence(inst).map(|(a, _)| a)
}

/// [`crr`] together with the induced picking sequence.
pub fn crr_with_sequence(inst: &Instance) -> Result<(Allocation, Vec<usize>)> {
    if !inst.is_pure_goods() {
        return Err(Error::Unsupported("CRR implemented for goods only".into()));
    }
    let (n, m) = (inst.agents(), inst.items());
    let mut remaining = vec![true; m];
    let mut assign = vec![0; m];
    let mut sequence = Vec::with_capacity(m);
    let mut served = vec![false; n];
    let mut served_count = 0;
    let mut prefs = Preferences::new(inst);
    for _ in 0..m {
        if served_count == n {
            served.fill(false);
            served_count = 0;
        }
        let mut best: Option<(usize, usize)> = None;
        for i in (0..n).filter(|&i| !served[i]) {
            if let Some(j) = prefs.best(i, &remaining) {
                if best.map_or(true, |(bi, bj)| inst.value(i, j) > inst.value(bi, bj)) {
                    best = Some((i, j));
                }
            }
        }
        let (i, j) = best.expect("an unserved agent and an item remain");
        remaining[j] = false;
        assign[j] = i;
        served[i] = true;
        served_count += 1;
        sequence.push(i);
    }
    Ok((Allocation::from_assignment(assign), sequence))
}

/// True when every prefix of `sequence` gives each of the `n` agents a pick
/// count within one of every other agent.
pub fn is_recursively_balanced(sequence: &[usize], n: usize) -> bool {
    let mut counts = vec![0usize; n];
    for &a in sequence {
        counts[a] += 1;
        let lo = counts.iter().min().copied().unwrap_or(0);
        let hi = counts.iter().max().copied().unwrap_or(0);
        if hi - lo > 1 {
            return false;
        }
    }
    true
}

/// The non-learned allocators, selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Muw,
    Rr,
    Drr,
    Crr,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [Baseline::Muw, Baseline::Rr, Baseline::Drr, Baseline::Crr];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Muw => "muw",
            Baseline::Rr => "rr",
            Baseline::Drr => "drr",
            Baseline::Crr => "crr",
        }
    }

    pub fn allocate(self, inst: &Instance) -> Result<Allocation> {
        match self {
            Baseline::Muw => Ok(muw(inst)),
            Baseline::Rr => round_robin_default(inst),
            Baseline::Drr => Ok(double_round_robin(inst)),
            Baseline::Crr => crr(inst),
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "muw" => Ok(Baseline::Muw),
            "rr" => Ok(Baseline::Rr),
            "drr" => Ok(Baseline::Drr),
            "crr" => Ok(Baseline::Crr),
            _ => Err(Error::Config(format!("unknown allocator '{s}' (expected muw, rr, drr or crr)"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::check_ef1;
    use crate::instance::{social_welfare, DistributionKind, DistributionSpec};

    #[test]
    fn preference_cursor_matches_linear_scan() {
        // Coarse values force plenty of ties.
        let spec = DistributionSpec::new(DistributionKind::UniformGoods, 41);
        for idx in 0..200 {
            let raw = spec.sample_at(4, 13, idx);
            let inst = Instance::new(4, 13, raw.values().iter().map(|x| (x * 4.0).round()).collect()).unwrap();
            let mut remaining = vec![true; 13];
            let mut prefs = Preferences::new(&inst);
            for step in 0..13 {
                let agent = (step * 3) % 4;
                let fast = prefs.best(agent, &remaining);
                assert_eq!(fast, best_remaining(inst.row(agent), &remaining, |_| true));
                remaining[fast.unwrap()] = false;
            }
        }
    }

    #[test]
    fn muw_diagonal() {
        let inst = Instance::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let a = muw(&inst);
        assert_eq!(a.assignment(), &[0, 1]);
        assert_eq!(social_welfare(&inst, &a), 2.0);
    }

    #[test]
    fn muw_ties_go_to_lowest_agent() {
        let inst = Instance::from_rows(&[vec![1.0, 0.5], vec![1.0, 0.5], vec![0.2, 0.5]]);
        assert_eq!(muw(&inst).assignment(), &[0, 0]);
    }

    #[test]
    fn round_robin_simulation() {
        let inst = Instance::from_rows(&[vec![3.0, 2.0, 1.0], vec![3.0, 2.0, 1.0]]);
        let a = round_robin(&inst, &PickingOrder::new(vec![0, 1]).unwrap()).unwrap();
        assert_eq!(a.bundle(0), vec![0, 2]);
        assert_eq!(a.bundle(1), vec![1]);

        let a = round_robin(&inst, &PickingOrder::new(vec![1, 0]).unwrap()).unwrap();
        assert_eq!(a.bundle(1), vec![0, 2]);
    }

    #[test]
    fn round_robin_chores_pick_least_costly() {
        let inst = Instance::from_rows(&[vec![-3.0, -1.0, -2.0], vec![-1.0, -3.0, -2.0]]);
        let a = round_robin_default(&inst).unwrap();
        assert_eq!(a.assignment(), &[1, 0, 0]);
        assert!(check_ef1(&inst, &a));
    }

    #[test]
    fn round_robin_rejects_mixed() {
        let inst = Instance::from_rows(&[vec![1.0, -1.0], vec![1.0, 1.0]]);
        let err = round_robin_default(&inst).unwrap_err();
        assert!(err.to_string().contains("RR requires pure goods or pure chores"));
    }

    #[test]
    fn picking_order_validation() {
        assert!(PickingOrder::new(vec![0, 0]).is_err());
        assert!(PickingOrder::new(vec![0, 2]).is_err());
        assert!(PickingOrder::new(vec![2, 0, 1]).is_ok());
    }

    #[test]
    fn double_round_robin_small_mixed() {
        // Item 0 is a chore for both agents. Dealing it to agent 0 and item 1
        // to agent 1 leaves agent 0 at -1 against a bundle worth 2 to it,
        // which no single removal fixes. With the dummy-chore padding agent 0
        // takes the dummy, agent 1 the real chore, then agent 1 picks item 1.
        let inst = Instance::from_rows(&[vec![-1.0, 2.0], vec![-2.0, 1.0]]);
        assert!(!check_ef1(&inst, &Allocation::from_assignment(vec![0, 1])));
        let a = double_round_robin(&inst);
        assert_eq!(a.bundle(0), Vec::<usize>::new());
        assert_eq!(a.bundle(1), vec![0, 1]);
        assert!(check_ef1(&inst, &a));
    }

    #[test]
    fn double_round_robin_on_goods_is_reverse_round_robin() {
        let spec = DistributionSpec::new(DistributionKind::UniformGoods, 4);
        for idx in 0..200 {
            let inst = spec.sample_at(4, 11, idx);
            let rr = round_robin(&inst, &PickingOrder::reversed(4)).unwrap();
            assert_eq!(double_round_robin(&inst), rr);
        }
    }

    #[test]
    fn double_round_robin_mixed_is_ef1() {
        let spec = DistributionSpec::new(DistributionKind::UniformMixed, 2);
        for idx in 0..1000 {
            let inst = spec.sample_at(5, 12, idx);
            assert!(check_ef1(&inst, &double_round_robin(&inst)), "instance {idx}");
        }
        // Many universal chores, so the padding offset varies.
        for idx in 0..1000 {
            let inst = spec.sample_at(3, 8, idx).scaled(1.0);
            let shifted = Instance::new(3, 8, inst.values().iter().map(|x| x - 0.6).collect()).unwrap();
            assert!(check_ef1(&shifted, &double_round_robin(&shifted)), "shifted instance {idx}");
        }
    }

    #[test]
    fn crr_diagonal_and_goods_only() {
        let inst = Instance::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(crr(&inst).unwrap(), muw(&inst));
        let chores = Instance::from_rows(&[vec![-1.0]]);
        assert!(crr(&chores).unwrap_err().to_string().contains("CRR implemented for goods only"));
    }

    #[test]
    fn crr_beats_rr_on_mean_welfare() {
        let spec = DistributionSpec::new(DistributionKind::UniformGoods, 77);
        let (mut rr, mut crr_sw) = (0.0, 0.0);
        for idx in 0..1000 {
            let inst = spec.sample_at(10, 40, idx);
            rr += social_welfare(&inst, &round_robin_default(&inst).unwrap());
            crr_sw += social_welfare(&inst, &crr(&inst).unwrap());
        }
        assert!(crr_sw > rr, "CRR {crr_sw} vs RR {rr}");
    }

    #[test]
    fn muw_is_scale_invariant_and_rr_is_balanced() {
        let spec = DistributionSpec::new(DistributionKind::UniformMixed, 6);
        for idx in 0..200 {
            let inst = spec.sample_at(4, 11, idx);
            assert_eq!(muw(&inst), muw(&inst.scaled(3.5)));
            let goods = DistributionSpec::new(DistributionKind::UniformGoods, 6).sample_at(4, 11, idx);
            let sizes = round_robin_default(&goods).unwrap().bundle_sizes(4);
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn crr_sequence_is_balanced() {
        let spec = DistributionSpec::new(DistributionKind::UniformGoods, 6);
        for idx in 0..300 {
            let inst = spec.sample_at(4, 13, idx);
            let (a, seq) = crr_with_sequence(&inst).unwrap();
            assert!(is_recursively_balanced(&seq, 4));
            assert!(check_ef1(&inst, &a));
        }
        assert!(!is_recursively_balanced(&[0, 0], 2));
        assert!(is_recursively_balanced(&[1, 0, 0, 1], 2));
    }

    #[test]
    fn baseline_names() {
        for b in Baseline::ALL {
            assert_eq!(b.name().parse::<Baseline>().unwrap(), b);
        }
        assert_eq!("D-RR".parse::<Baseline>().unwrap(), Baseline::Drr);
    }
}
