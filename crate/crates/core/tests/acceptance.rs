//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=2,5` runs a subset. The process exits non-zero when any
//! selected criterion fails.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use eef1_core::baselines::{crr_with_sequence, double_round_robin, is_recursively_balanced, muw, round_robin_default, Baseline};
use eef1_core::cli::RunManifest;
use eef1_core::fairness::{check_ef1, envy_penalty, verdict, EnvyMode};
use eef1_core::harness::{default_grid, evaluate, evaluate_instances, find_m_star, Allocator, Thresholds};
use eef1_core::instance::social_welfare;
use eef1_core::neural::encode::top_agent_mask;
use eef1_core::neural::io::{from_bytes, to_bytes};
use eef1_core::neural::{bag_train, encode, xavier_init, ArchConfig, TrainConfig};
use eef1_core::oracle::{exact_eef1, DEFAULT_CAP};
use eef1_core::{Allocation, DistributionKind, DistributionSpec, Instance};

use common::{gradient_check, GRADIENT_FLOOR};

struct Verdict {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Folds several sub-checks into one verdict; details are joined with "; ".
fn all(parts: Vec<Verdict>) -> Verdict {
    let pass = parts.iter().all(|p| p.pass);
    let detail = parts
        .iter()
        .map(|p| if p.pass { p.detail.clone() } else { format!("FAILED {}", p.detail) })
        .collect::<Vec<_>>()
        .join("; ");
    Verdict { pass, detail }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn goods(seed: u64) -> DistributionSpec {
    DistributionSpec::new(DistributionKind::UniformGoods, seed)
}

fn c1_muw_rarely_ef1() -> Verdict {
    let t = Instant::now();
    let r = evaluate(&Baseline::Muw.into(), &goods(7), 10, 150, 10_000).unwrap();
    let secs = t.elapsed().as_secs_f64();
    all(vec![
        check(r.alpha_ef1 < 0.55, format!("alpha_EF1(MUW, 10x150) = {:.4} < 0.55", r.alpha_ef1)),
        check(secs < 120.0, format!("{secs:.1}s < 120s")),
    ])
}

fn c2_convergence_probes() -> Verdict {
    let t = Instant::now();
    let muw: Allocator = Baseline::Muw.into();
    let a = evaluate(&muw, &goods(1), 9, 200, 10_000).unwrap();
    let b = evaluate(&muw, &goods(1), 9, 530, 10_000).unwrap();
    let efx = a.alpha_efx.unwrap();
    let secs = t.elapsed().as_secs_f64();
    all(vec![
        check(within(a.alpha_ef1, 0.6436, 0.02), format!("9x200 alpha_EF1 {:.4} (0.6436 +- 0.02)", a.alpha_ef1)),
        check(within(efx, 0.5086, 0.02), format!("alpha_EFX {efx:.4} (0.5086 +- 0.02)")),
        check(within(a.alpha_ef, 0.5032, 0.02), format!("alpha_EF {:.4} (0.5032 +- 0.02)", a.alpha_ef)),
        check(within(b.alpha_ef1, 0.989, 0.01), format!("9x530 alpha_EF1 {:.4} (0.989 +- 0.01)", b.alpha_ef1)),
        check(secs < 600.0, format!("{secs:.1}s < 600s")),
    ])
}

fn m_star_in(alg: Baseline, kind: DistributionKind, n: usize, grid: &[usize], lo: usize, hi: usize) -> Verdict {
    assert!(grid.windows(2).all(|w| w[1] - w[0] <= 5), "grid step must be at most 5");
    let spec = DistributionSpec::new(kind, 0);
    let r = find_m_star(&alg.into(), &spec, n, grid, 10_000, &Thresholds::for_support(kind.support())).unwrap();
    let label = format!("m*({alg}, {kind}, n={n})");
    match r.m_star {
        Some(m) => check((lo..=hi).contains(&m), format!("{label} = {m} in [{lo}, {hi}]")),
        None => check(false, format!("{label} not reached on grid up to {}", grid.last().unwrap())),
    }
}

fn c3_table_one() -> Verdict {
    let rr_grid: Vec<usize> = default_grid(7).into_iter().filter(|&m| m <= 400).collect();
    all(vec![
        m_star_in(Baseline::Rr, DistributionKind::UniformGoods, 7, &rr_grid, 135, 183),
        m_star_in(Baseline::Muw, DistributionKind::UniformGoods, 7, &default_grid(7), 323, 437),
        m_star_in(Baseline::Muw, DistributionKind::UniformChores, 10, &default_grid(10), 126, 170),
    ])
}

/// 10k instances spread evenly over n in {3, 5, 10} and m in {2n, 4n}.
fn guarantee_batch(kind: DistributionKind, seed: u64) -> Vec<Instance> {
    let shapes: Vec<(usize, usize)> = [3, 5, 10].iter().flat_map(|&n| [(n, 2 * n), (n, 4 * n)]).collect();
    let spec = DistributionSpec::new(kind, seed);
    (0..10_000u64)
        .map(|i| {
            let (n, m) = shapes[i as usize % shapes.len()];
            spec.sample_at(n, m, i)
        })
        .collect()
}

fn c4_guarantees() -> Verdict {
    let count = |batch: &[Instance], f: &dyn Fn(&Instance) -> bool| batch.iter().filter(|i| f(i)).count();
    let g = guarantee_batch(DistributionKind::UniformGoods, 11);
    let c = guarantee_batch(DistributionKind::UniformChores, 12);
    let x = guarantee_batch(DistributionKind::UniformMixed, 13);
    let rr = |i: &Instance| check_ef1(i, &round_robin_default(i).unwrap());
    let rr_goods = count(&g, &rr);
    let rr_chores = count(&c, &rr);
    let drr = count(&x, &|i| check_ef1(i, &double_round_robin(i)));
    let crr = count(&g, &|i| {
        let (a, seq) = crr_with_sequence(i).unwrap();
        check_ef1(i, &a) && is_recursively_balanced(&seq, i.agents())
    });
    all(vec![
        check(rr_goods == 10_000, format!("RR goods EF1 {rr_goods}/10000")),
        check(rr_chores == 10_000, format!("RR chores EF1 {rr_chores}/10000")),
        check(drr == 10_000, format!("D-RR mixed EF1 {drr}/10000")),
        check(crr == 10_000, format!("CRR goods EF1+RB {crr}/10000")),
    ])
}

fn c5_oracle_sandwich() -> Verdict {
    let kinds = [DistributionKind::UniformGoods, DistributionKind::UniformChores, DistributionKind::UniformMixed];
    let mut failures = Vec::new();
    for idx in 0..500u64 {
        let kind = kinds[idx as usize % 3];
        let n = 2 + (idx as usize / 3) % 2;
        let m = 2 + (idx as usize / 6) % 7;
        let inst = DistributionSpec::new(kind, 5).sample_at(n, m, idx);
        let r = exact_eef1(&inst, DEFAULT_CAP).unwrap();
        let best = r.best.clone().unwrap();
        let rr_family = if kind == DistributionKind::UniformMixed { Baseline::Drr } else { Baseline::Rr };
        let sw_rr = social_welfare(&inst, &rr_family.allocate(&inst).unwrap());
        let muw_alloc = muw(&inst);
        let sw_muw = social_welfare(&inst, &muw_alloc);
        let eps = 1e-12;
        let equal = (r.welfare - sw_muw).abs() <= eps;
        let ok = check_ef1(&inst, &best)
            && (social_welfare(&inst, &best) - r.welfare).abs() <= eps
            && sw_rr <= r.welfare + eps
            && r.welfare <= sw_muw + eps
            && equal == check_ef1(&inst, &muw_alloc);
        if !ok {
            failures.push(idx);
        }
    }
    check(failures.is_empty(), format!("500 instances n<=3 m<=8, violations at {failures:?}"))
}

fn c6_gradient() -> Verdict {
    let t = Instant::now();
    let mut parts = Vec::new();
    for lambda in [0.0, 1.0] {
        for mode in [EnvyMode::Ef, EnvyMode::Ef1] {
            let err = gradient_check(0.01, lambda, mode, GRADIENT_FLOOR);
            parts.push(check(err <= 1e-4, format!("lambda={lambda} {mode}: {err:.2e}")));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    parts.push(check(secs < 60.0, format!("{secs:.1}s < 60s")));
    all(parts)
}

fn c7_toy_learning_signal() -> Verdict {
    let t = Instant::now();
    let arch = ArchConfig { series: 1, convs_per_series: 2, hidden_channels: 16, kernel: 3, temperature: 0.01 };
    let train = goods(0).sample_many(5, 15, 5000);
    let held_out = goods(1).sample_many(5, 15, 500);
    let cfg = TrainConfig { epochs: 100, seed: 0, ..TrainConfig::default() };
    let lambdas = [0.1, 0.5, 1.0];
    let bag = Arc::new(bag_train(&train, arch, &cfg, &lambdas).unwrap());
    let secs = t.elapsed().as_secs_f64();

    let bag_r = evaluate_instances(&Allocator::Bag(bag.clone()), &held_out).unwrap();
    let muw_r = evaluate_instances(&Baseline::Muw.into(), &held_out).unwrap();
    let rr_r = evaluate_instances(&Baseline::Rr.into(), &held_out).unwrap();
    let member = |k: usize| {
        let p = &bag.members[k];
        let beta = evaluate_instances(&Allocator::Network(Arc::new(p.clone())), &held_out).unwrap().beta_sw;
        let penalty = held_out.iter().map(|i| envy_penalty(i, &p.forward(&encode(i)).unwrap())).sum::<f64>()
            / held_out.len() as f64;
        (beta, penalty)
    };
    let (beta_lo, pen_lo) = member(0);
    let (beta_hi, pen_hi) = member(2);
    all(vec![
        check(
            bag_r.alpha_ef1 >= muw_r.alpha_ef1 + 0.15,
            format!("alpha_EF1 bag {:.4} >= MUW {:.4} + 0.15", bag_r.alpha_ef1, muw_r.alpha_ef1),
        ),
        check(
            bag_r.beta_sw >= rr_r.beta_sw + 0.01,
            format!("beta_SW bag {:.4} >= RR {:.4} + 0.01", bag_r.beta_sw, rr_r.beta_sw),
        ),
        check(bag_r.beta_sw >= 0.85, format!("beta_SW bag {:.4} >= 0.85", bag_r.beta_sw)),
        check(beta_lo >= beta_hi, format!("beta_SW lambda=0.1 {beta_lo:.4} >= lambda=1.0 {beta_hi:.4}")),
        check(pen_hi <= pen_lo, format!("envy penalty lambda=1.0 {pen_hi:.5} <= lambda=0.1 {pen_lo:.5}")),
        check(secs <= 1800.0, format!("training {secs:.0}s <= 1800s")),
    ])
}

fn eef1(args: &[&str]) -> bool {
    let status = Command::new(env!("CARGO_BIN_EXE_eef1"))
        .args(args)
        .env_remove("EEF1_THREADS")
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()
        .expect("binary runs");
    status.success()
}

fn snapshot(files: &[PathBuf]) -> Vec<Vec<u8>> {
    files.iter().map(|p| fs::read(p).unwrap_or_default()).collect()
}

/// Runs `args`, then replays its manifest and compares every recorded output.
fn replay_matches(args: &[&str], out: &Path, command: &str) -> Verdict {
    if !eef1(args) {
        return check(false, format!("{command}: run failed"));
    }
    let manifest = out.join(RunManifest::file_name(command));
    let files = RunManifest::read(&manifest).unwrap().outputs;
    let before = snapshot(&files);
    for f in &files {
        fs::remove_file(f).unwrap();
    }
    if !eef1(&["replay", "--manifest", manifest.to_str().unwrap()]) {
        return check(false, format!("{command}: replay failed"));
    }
    check(snapshot(&files) == before, format!("{command}: {} outputs byte-identical", files.len()))
}

fn c8_cli_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name);
    let s = |p: &PathBuf| p.to_str().unwrap().to_string();
    let (exp, conv, base, bag) = (s(&d("exp")), s(&d("conv")), s(&d("base")), s(&d("bag")));
    let runs: Vec<(Vec<&str>, &str, &str)> = vec![
        (
            vec!["--threads", "1", "experiment", "exp1", "--agents", "4", "--items", "8,16", "--samples", "500", "--out", &exp],
            &exp,
            "experiment",
        ),
        (
            vec!["--threads", "1", "converge", "--alg", "rr", "--agents", "3", "--grid-step", "2", "--grid-max", "30", "--samples", "300", "--out", &conv],
            &conv,
            "converge",
        ),
        (
            vec!["--threads", "1", "baseline", "--alg", "drr", "--dist", "gaussian", "--agents", "4", "--items", "9", "--samples", "200", "--out", &base],
            &base,
            "baseline",
        ),
        (
            vec![
                "--threads", "1", "bag-train", "--series", "1", "--convs-per-series", "1", "--hidden", "4", "--agents", "3",
                "--items", "6", "--samples", "64", "--epochs", "3", "--batch", "16", "--lambdas", "0.1,1", "--out", &bag,
            ],
            &bag,
            "bag-train",
        ),
    ];
    all(runs.iter().map(|(args, out, cmd)| replay_matches(args, Path::new(out), cmd)).collect())
}

fn c9_structural() -> Verdict {
    let mut parts = Vec::new();

    let arch = ArchConfig { series: 2, convs_per_series: 2, hidden_channels: 5, kernel: 3, temperature: 0.01 };
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let p = xavier_init(arch, seed);
        let inst = DistributionSpec::new(DistributionKind::ALL[seed as usize % 6], seed).sample_at(6, 11, 0);
        let frac = p.forward(&encode(&inst)).unwrap();
        for j in 0..11 {
            worst = worst.max(((0..6).map(|i| frac.share(i, j)).sum::<f64>() - 1.0).abs());
        }
    }
    parts.push(check(worst <= 1e-6, format!("softmax column sums within {worst:.1e}")));

    let mut nested = true;
    for idx in 0..200 {
        let inst = DistributionSpec::new(DistributionKind::UniformMixed, 3).sample_at(5, 3 + idx as usize % 20, idx);
        let x = encode(&inst);
        nested &= (1..5).all(|c| x.channel(c).iter().zip(x.channel(c + 1)).all(|(a, b)| *a == 0.0 || a == b));
        nested &= x.channel(5) == top_agent_mask(&inst).as_slice();
    }
    parts.push(check(nested, "encode channels nest"));

    let spec = DistributionSpec::new(DistributionKind::UniformMixed, 21);
    let mut implication = 0;
    let mut ef_count = 0;
    for idx in 0..10_000u64 {
        let inst = spec.sample_at(2 + idx as usize % 3, 2 + idx as usize % 5, idx);
        let n = inst.agents();
        let assign = (0..inst.items()).map(|j| (j * 7 + idx as usize) % n).collect();
        let v = verdict(&inst, &Allocation::from_assignment(assign));
        ef_count += v.is_ef as usize;
        implication += (!v.is_ef || v.is_ef1) as usize;
    }
    parts.push(check(implication == 10_000, format!("EF => EF1 on 10000 verdicts ({ef_count} EF)")));

    let mut side = true;
    for (b, kind) in [
        (Baseline::Rr, DistributionKind::UniformGoods),
        (Baseline::Crr, DistributionKind::UniformGoods),
        (Baseline::Drr, DistributionKind::Exponential),
        (Baseline::Rr, DistributionKind::UniformChores),
        (Baseline::Drr, DistributionKind::UniformChores),
    ] {
        let r = evaluate(&b.into(), &DistributionSpec::new(kind, 8), 5, 12, 2000).unwrap();
        side &= match kind.support() {
            eef1_core::instance::ItemKind::Chores => r.beta_sw >= 1.0 - 1e-9,
            _ => r.beta_sw <= 1.0 + 1e-9,
        };
    }
    parts.push(check(side, "beta_SW <= 1 on goods, >= 1 on chores"));

    let p = xavier_init(arch, 99);
    let back = from_bytes(&to_bytes(&p)).unwrap();
    parts.push(check(back == p && to_bytes(&back) == to_bytes(&p), "model save/load round-trip bit-exact"));
    all(parts)
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 9] = [
        (1, "MUW rarely EF1 (10x150 goods)", c1_muw_rarely_ef1),
        (2, "MUW convergence probes (9x200, 9x530)", c2_convergence_probes),
        (3, "m*(n) spot checks", c3_table_one),
        (4, "RR / D-RR / CRR guarantees", c4_guarantees),
        (5, "oracle sandwich", c5_oracle_sandwich),
        (6, "gradient correctness", c6_gradient),
        (7, "toy bag learning signal", c7_toy_learning_signal),
        (8, "CLI determinism", c8_cli_determinism),
        (9, "structural invariants", c9_structural),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let v = run();
        let elapsed = Duration::from_secs(t.elapsed().as_secs());
        println!(
            "criterion {id} {}: {name} -- {} [{}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs()
        );
        failed += !v.pass as u32;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
