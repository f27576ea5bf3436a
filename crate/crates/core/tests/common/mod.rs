//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use eef1_core::fairness::EnvyMode;
use eef1_core::neural::{loss_and_gradient, xavier_init, ArchConfig, Sample};
use eef1_core::{DistributionKind, DistributionSpec};

/// The reduced network used for gradient checks: one series, one conv, four channels.
pub fn reduced_arch(temperature: f64) -> ArchConfig {
    ArchConfig { series: 1, convs_per_series: 1, hidden_channels: 4, kernel: 3, temperature }
}

/// Largest elementwise relative error between the analytic gradient and a
/// central difference, both in f64, over a batch of four 5x10 goods
/// instances. Relative error is `|a - f| / max(|a|, |f|, floor)`; the floor
/// keeps near-zero entries, where the central difference is mostly rounding
/// noise (about 1e-11 absolute at `h = 1e-6`), from dominating.
pub const GRADIENT_FLOOR: f64 = 1e-6;

pub fn gradient_check(temperature: f64, lambda: f64, mode: EnvyMode, floor: f64) -> f64 {
    let arch = reduced_arch(temperature);
    let spec = DistributionSpec::new(DistributionKind::UniformGoods, 2024);
    let batch: Vec<Sample> = spec.sample_many(5, 10, 4).into_iter().map(Sample::new).collect();
    let w = xavier_init(arch, 17).weights_f64();
    let (_, grad) = loss_and_gradient::<f64, _>(&arch, &w, &batch, lambda, mode).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for idx in 0..w.len() {
        let (mut wp, mut wm) = (w.clone(), w.clone());
        wp[idx] += h;
        wm[idx] -= h;
        let lp = loss_and_gradient::<f64, _>(&arch, &wp, &batch, lambda, mode).unwrap().0;
        let lm = loss_and_gradient::<f64, _>(&arch, &wm, &batch, lambda, mode).unwrap().0;
        let fd = (lp - lm) / (2.0 * h);
        let rel = (grad[idx] - fd).abs() / grad[idx].abs().max(fd.abs()).max(floor);
        worst = worst.max(rel);
    }
    worst
}
