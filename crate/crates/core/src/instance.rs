//! Valuation profiles, allocations and instance sampling.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sign pattern of an instance's valuations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemKind {
    /// Every valuation is non-negative.
    Goods,
    /// Every valuation is non-positive.
    Chores,
    /// Both signs occur.
    Mixed,
}

/// An additive valuation profile: `n` agents, `m` items, `v[i][j]` stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    n: usize,
    m: usize,
    v: Vec<f64>,
}

impl Instance {
    pub fn new(n: usize, m: usize, v: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidInstance(format!(
                "need at least one agent and one item, got {n}x{m}"
            )));
        }
        if v.len() != n * m {
            return Err(Error::InvalidInstance(format!(
                "expected {} valuations for {n}x{m}, got {}",
                n * m,
                v.len()
            )));
        }
        if let Some(pos) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "valuation at agent {}, item {} is not finite",
                pos / m,
                pos % m
            )));
        }
        Ok(Self { n, m, v })
    }

    /// Builds an instance from nested rows; panics on ragged or empty input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == m), "ragged valuation rows");
        Self::new(n, m, rows.concat()).expect("valid valuation rows")
    }

    #[inline]
    pub fn agents(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn items(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn value(&self, agent: usize, item: usize) -> f64 {
        self.v[agent * self.m + item]
    }

    #[inline]
    pub fn row(&self, agent: usize) -> &[f64] {
        &self.v[agent * self.m..(agent + 1) * self.m]
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn kind(&self) -> ItemKind {
        let any_pos = self.v.iter().any(|&x| x > 0.0);
        let any_neg = self.v.iter().any(|&x| x < 0.0);
        match (any_pos, any_neg) {
            (_, false) => ItemKind::Goods,
            (false, true) => ItemKind::Chores,
            (true, true) => ItemKind::Mixed,
        }
    }

    pub fn is_pure_goods(&self) -> bool {
        self.v.iter().all(|&x| x >= 0.0)
    }

    pub fn is_pure_chores(&self) -> bool {
        self.v.iter().all(|&x| x <= 0.0)
    }

    /// Agent with the highest value for `item`, lowest index on ties.
    pub fn top_agent(&self, item: usize) -> usize {
        let mut best = 0;
        for i in 1..self.n {
            if self.value(i, item) > self.value(best, item) {
                best = i;
            }
        }
        best
    }

    /// Returns a copy with every valuation multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.n, self.m, self.v.iter().map(|x| x * factor).collect())
            .expect("scaled instance stays valid")
    }

    /// Relabels agents: row `i` of the result is row `perm[i]` of `self`.
    pub fn permute_agents(&self, perm: &[usize]) -> Self {
        let rows: Vec<Vec<f64>> = perm.iter().map(|&p| self.row(p).to_vec()).collect();
        Self::from_rows(&rows)
    }

    /// Relabels items: column `j` of the result is column `perm[j]` of `self`.
    pub fn permute_items(&self, perm: &[usize]) -> Self {
        let mut v = Vec::with_capacity(self.v.len());
        for i in 0..self.n {
            v.extend(perm.iter().map(|&p| self.value(i, p)));
        }
        Self::new(self.n, self.m, v).expect("permuted instance stays valid")
    }
}

/// A complete integral allocation: `assign[j]` is the agent holding item `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Allocation {
    assign: Vec<usize>,
}

impl Allocation {
    pub fn new(assign: Vec<usize>, agents: usize) -> Result<Self> {
        if let Some((j, &a)) = assign.iter().enumerate().find(|(_, &a)| a >= agents) {
            return Err(Error::InvalidAllocation(format!(
                "item {j} assigned to agent {a}, but there are only {agents} agents"
            )));
        }
        Ok(Self { assign })
    }

    /// Wraps an assignment vector without range checks.
    pub fn from_assignment(assign: Vec<usize>) -> Self {
        Self { assign }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assign
    }

    pub fn owner(&self, item: usize) -> usize {
        self.assign[item]
    }

    pub fn items(&self) -> usize {
        self.assign.len()
    }

    /// Items held by `agent`, ascending.
    pub fn bundle(&self, agent: usize) -> Vec<usize> {
        self.assign
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == agent)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn bundle_sizes(&self, agents: usize) -> Vec<usize> {
        let mut sizes = vec![0; agents];
        for &a in &self.assign {
            sizes[a] += 1;
        }
        sizes
    }

    /// `v_i(A_k)`: agent `i`'s additive value for the bundle of agent `k`.
    pub fn bundle_value(&self, inst: &Instance, i: usize, k: usize) -> f64 {
        assert!(i < inst.agents() && k < inst.agents(), "agent index out of range");
        assert_eq!(self.assign.len(), inst.items(), "allocation/instance item mismatch");
        let row = inst.row(i);
        self.assign
            .iter()
            .zip(row)
            .filter(|(&a, _)| a == k)
            .map(|(_, &x)| x)
            .sum()
    }

    /// `vb[i][k] = v_i(A_k)`, flattened row-major `n x n`.
    pub fn bundle_value_matrix(&self, inst: &Instance) -> Vec<f64> {
        let n = inst.agents();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let row = inst.row(i);
            let dst = &mut out[i * n..(i + 1) * n];
            for (&a, &x) in self.assign.iter().zip(row) {
                dst[a] += x;
            }
        }
        out
    }
}

/// `v_i(A_k)` for an integral allocation.
pub fn bundle_value(inst: &Instance, alloc: &Allocation, i: usize, k: usize) -> f64 {
    alloc.bundle_value(inst, i, k)
}

/// Utilitarian social welfare `sum_i v_i(A_i)`, accumulated in item order.
pub fn social_welfare(inst: &Instance, alloc: &Allocation) -> f64 {
    assert_eq!(alloc.items(), inst.items(), "allocation/instance item mismatch");
    alloc
        .assignment()
        .iter()
        .enumerate()
        .map(|(j, &a)| inst.value(a, j))
        .sum()
}

/// Column-stochastic `n x m` matrix, `p[i][j]` the share of item `j` given to agent `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalAllocation {
    n: usize,
    m: usize,
    p: Vec<f64>,
}

impl FractionalAllocation {
    pub const COLUMN_TOLERANCE: f64 = 1e-6;

    pub fn new(n: usize, m: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != n * m {
            return Err(Error::InvalidAllocation(format!(
                "expected {} shares for {n}x{m}, got {}",
                n * m,
                p.len()
            )));
        }
        if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidAllocation("shares must lie in [0, 1]".into()));
        }
        for j in 0..m {
            let s: f64 = (0..n).map(|i| p[i * m + j]).sum();
            if (s - 1.0).abs() > Self::COLUMN_TOLERANCE {
                return Err(Error::InvalidAllocation(format!(
                    "column {j} sums to {s}, not 1"
                )));
            }
        }
        Ok(Self { n, m, p })
    }

    /// Every agent gets `1/n` of every item.
    pub fn uniform(n: usize, m: usize) -> Self {
        Self { n, m, p: vec![1.0 / n as f64; n * m] }
    }

    pub fn from_allocation(alloc: &Allocation, agents: usize) -> Self {
        let m = alloc.items();
        let mut p = vec![0.0; agents * m];
        for (j, &a) in alloc.assignment().iter().enumerate() {
            p[a * m + j] = 1.0;
        }
        Self { n: agents, m, p }
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn items(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn share(&self, agent: usize, item: usize) -> f64 {
        self.p[agent * self.m + item]
    }

    pub fn shares(&self) -> &[f64] {
        &self.p
    }

    /// Fractional `v_i(A_k) = sum_j p[k][j] v[i][j]`.
    pub fn bundle_value(&self, inst: &Instance, i: usize, k: usize) -> f64 {
        let row = inst.row(i);
        let shares = &self.p[k * self.m..(k + 1) * self.m];
        shares.iter().zip(row).map(|(p, x)| p * x).sum()
    }

    pub fn social_welfare(&self, inst: &Instance) -> f64 {
        (0..self.n).map(|i| self.bundle_value(inst, i, i)).sum()
    }
}

/// Valuation distributions used for sampling instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    /// U[0, 1]
    UniformGoods,
    /// U[-1, 0]
    UniformChores,
    /// U[-1, 1]
    UniformMixed,
    /// N(0.5, 1)
    Gaussian,
    /// exp(N(0.5, 1))
    Lognormal,
    /// Exp(1)
    Exponential,
}

impl DistributionKind {
    pub const ALL: [DistributionKind; 6] = [
        DistributionKind::UniformGoods,
        DistributionKind::UniformChores,
        DistributionKind::UniformMixed,
        DistributionKind::Gaussian,
        DistributionKind::Lognormal,
        DistributionKind::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistributionKind::UniformGoods => "uniform-goods",
            DistributionKind::UniformChores => "uniform-chores",
            DistributionKind::UniformMixed => "uniform-mixed",
            DistributionKind::Gaussian => "gaussian",
            DistributionKind::Lognormal => "lognormal",
            DistributionKind::Exponential => "exponential",
        }
    }

    /// Sign pattern every sampled instance is guaranteed to have.
    pub fn support(self) -> ItemKind {
        match self {
            DistributionKind::UniformGoods
            | DistributionKind::Lognormal
            | DistributionKind::Exponential => ItemKind::Goods,
            DistributionKind::UniformChores => ItemKind::Chores,
            DistributionKind::UniformMixed | DistributionKind::Gaussian => ItemKind::Mixed,
        }
    }

    fn draw(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            DistributionKind::UniformGoods => rng.random::<f64>(),
            DistributionKind::UniformChores => -rng.random::<f64>(),
            DistributionKind::UniformMixed => rng.random_range(-1.0..=1.0),
            DistributionKind::Gaussian => Normal::new(0.5, 1.0).unwrap().sample(rng),
            DistributionKind::Lognormal => LogNormal::new(0.5, 1.0).unwrap().sample(rng),
            DistributionKind::Exponential => Exp::new(1.0).unwrap().sample(rng),
        }
    }
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistributionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown distribution '{s}' (expected one of {})",
                    Self::ALL.map(|k| k.name()).join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    pub seed: u64,
}

impl DistributionSpec {
    pub fn new(kind: DistributionKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    /// Independent generator for sample `index`; streams never overlap.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// The `index`-th instance of this spec's sample sequence.
    pub fn sample_at(&self, n: usize, m: usize, index: u64) -> Instance {
        let mut rng = self.stream(index);
        let v = (0..n * m).map(|_| self.kind.draw(&mut rng)).collect();
        Instance::new(n, m, v).expect("sampled valuations are finite")
    }

    /// First `count` instances of the sample sequence.
    pub fn sample_many(&self, n: usize, m: usize, count: usize) -> Vec<Instance> {
        (0..count as u64).map(|i| self.sample_at(n, m, i)).collect()
    }
}

/// Draws an `n x m` instance with i.i.d. entries from `spec` (stream 0).
pub fn sample_instance(spec: &DistributionSpec, n: usize, m: usize) -> Instance {
    spec.sample_at(n, m, 0)
}

#[derive(Serialize, Deserialize)]
struct DatasetLine {
    n: usize,
    m: usize,
    v: Vec<f64>,
}

/// Writes instances as JSON lines `{"n":..,"m":..,"v":[row-major]}`.
pub fn write_dataset<W: Write>(mut out: W, instances: &[Instance]) -> Result<()> {
    for inst in instances {
        let line = DatasetLine { n: inst.n, m: inst.m, v: inst.v.clone() };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetLine = serde_json::from_str(&line)?;
        let inst = Instance::new(rec.n, rec.m, rec.v)
            .map_err(|e| Error::InvalidInstance(format!("line {}: {e}", lineno + 1)))?;
        out.push(inst);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_supports() {
        for seed in 0..20 {
            let g = sample_instance(&DistributionSpec::new(DistributionKind::UniformGoods, seed), 4, 9);
            assert!(g.values().iter().all(|&x| (0.0..=1.0).contains(&x)));
            let c = sample_instance(&DistributionSpec::new(DistributionKind::UniformChores, seed), 4, 9);
            assert!(c.values().iter().all(|&x| (-1.0..=0.0).contains(&x)));
            let mx = sample_instance(&DistributionSpec::new(DistributionKind::UniformMixed, seed), 4, 9);
            assert!(mx.values().iter().all(|&x| (-1.0..=1.0).contains(&x)));
            let e = sample_instance(&DistributionSpec::new(DistributionKind::Exponential, seed), 4, 9);
            assert!(e.values().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        for kind in DistributionKind::ALL {
            let spec = DistributionSpec::new(kind, 42);
            let a = spec.sample_at(3, 7, 5);
            let b = spec.sample_at(3, 7, 5);
            assert_eq!(
                a.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                b.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>()
            );
            assert_ne!(spec.sample_at(3, 7, 6), a);
        }
    }

    #[test]
    fn gaussian_instances_are_mixed() {
        let spec = DistributionSpec::new(DistributionKind::Gaussian, 3);
        let inst = spec.sample_at(10, 20, 0);
        assert_eq!(inst.kind(), ItemKind::Mixed);
    }

    #[test]
    fn bundle_values() {
        let inst = Instance::from_rows(&[vec![1.0, 2.0]]);
        let all0 = Allocation::new(vec![0, 0], 1).unwrap();
        assert_eq!(bundle_value(&inst, &all0, 0, 0), 3.0);

        let inst = Instance::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.5]]);
        let alloc = Allocation::new(vec![0, 0], 2).unwrap();
        assert_eq!(bundle_value(&inst, &alloc, 0, 0), -1.0);
        assert_eq!(bundle_value(&inst, &alloc, 0, 1), 0.0);
        assert_eq!(bundle_value(&inst, &alloc, 1, 1), 0.0);
    }

    #[test]
    #[should_panic(expected = "agent index out of range")]
    fn bundle_value_rejects_bad_agent() {
        let inst = Instance::from_rows(&[vec![1.0]]);
        let alloc = Allocation::from_assignment(vec![0]);
        bundle_value(&inst, &alloc, 0, 3);
    }

    #[test]
    fn welfare_examples() {
        let inst = Instance::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let diag = Allocation::new(vec![0, 1], 2).unwrap();
        assert_eq!(social_welfare(&inst, &diag), 2.0);

        let zero = Instance::from_rows(&[vec![0.0; 3], vec![0.0; 3]]);
        for a in [vec![0, 0, 0], vec![1, 0, 1], vec![1, 1, 1]] {
            assert_eq!(social_welfare(&zero, &Allocation::from_assignment(a)), 0.0);
        }
    }

    #[test]
    fn welfare_matches_bundle_recomputation() {
        let spec = DistributionSpec::new(DistributionKind::UniformMixed, 9);
        for idx in 0..50 {
            let inst = spec.sample_at(3, 5, idx);
            let mut rng = spec.stream(1000 + idx);
            let assign: Vec<usize> = (0..5).map(|_| rng.random_range(0..3)).collect();
            let alloc = Allocation::new(assign.clone(), 3).unwrap();
            let mut expected = 0.0;
            for i in 0..3 {
                for j in 0..5 {
                    if assign[j] == i {
                        expected += inst.value(i, j);
                    }
                }
            }
            assert!((social_welfare(&inst, &alloc) - expected).abs() < 1e-12);
            let vb = alloc.bundle_value_matrix(&inst);
            let diag: f64 = (0..3).map(|i| vb[i * 3 + i]).sum();
            assert!((diag - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_instances_rejected() {
        assert!(Instance::new(0, 3, vec![]).is_err());
        assert!(Instance::new(1, 2, vec![1.0]).is_err());
        assert!(Instance::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Allocation::new(vec![0, 2], 2).is_err());
    }

    #[test]
    fn fractional_validation() {
        assert!(FractionalAllocation::new(2, 1, vec![0.6, 0.4]).is_ok());
        assert!(FractionalAllocation::new(2, 1, vec![0.6, 0.6]).is_err());
        let u = FractionalAllocation::uniform(4, 3);
        for j in 0..3 {
            let s: f64 = (0..4).map(|i| u.share(i, j)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let spec = DistributionSpec::new(DistributionKind::Lognormal, 11);
        let data = spec.sample_many(3, 4, 5);
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data).unwrap();
        let back = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(back, data);
        let first = String::from_utf8(buf).unwrap();
        assert!(first.starts_with("{\"n\":3,\"m\":4,\"v\":["));
    }

    #[test]
    fn distribution_names_parse() {
        for k in DistributionKind::ALL {
            assert_eq!(k.name().parse::<DistributionKind>().unwrap(), k);
        }
        assert!("cauchy".parse::<DistributionKind>().is_err());
    }
}
