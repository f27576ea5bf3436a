//! Lagrangian training objective: negative welfare plus `lambda` times the
//! mean envy, both normalized by instance size.
//!
//! Per sample, with `P` the network's fractional allocation,
//! `loss = (-sw(P) + lambda * sum_{i,k} envy_ik(P) / n) / (n m)`.
//! The batch loss is the mean over samples.

use std::borrow::Borrow;

use rayon::prelude::*;

use super::encode::{encode, InputTensor};
use super::layers::{flush, Scalar};
use super::network::{backward, forward_trace, softmax_columns, ArchConfig, Layout, NetworkParams};
use crate::error::Result;
use crate::fairness::{envy_terms, EnvyMode};
use crate::instance::Instance;

/// One training example: valuations plus their encoded input.
#[derive(Debug, Clone)]
pub struct Sample {
    pub instance: Instance,
    pub input: InputTensor,
}

impl Sample {
    pub fn new(instance: Instance) -> Self {
        let input = encode(&instance);
        Self { instance, input }
    }
}

/// Loss of a single sample given its shares, and its gradient with respect to
/// the shares.
pub fn sample_objective<T: Scalar>(
    inst: &Instance,
    shares: &[T],
    lambda: f64,
    mode: EnvyMode,
) -> (T, Vec<T>) {
    let (n, m) = (inst.agents(), inst.items());
    let values = inst.values();
    let terms = envy_terms(values, shares, n, m, mode);
    let scale = T::from(1.0 / (n * m) as f64).unwrap();
    let lam_n = T::from(lambda / n as f64).unwrap();

    let mut welfare = T::zero();
    for (&p, &v) in shares.iter().zip(values) {
        welfare += p * T::from(v).unwrap();
    }
    let envy: T = terms.iter().copied().sum();
    let loss = scale * (lam_n * envy - welfare);

    // d/dP[a][j]: -v[a][j] + lambda/n * (sum_i [t_ia > 0] v[i][j] - #{k: t_ak > 0} v[a][j])
    let mut grad = vec![T::zero(); n * m];
    for a in 0..n {
        let out_active = (0..n).filter(|&k| terms[a * n + k] > T::zero()).count();
        let coeff_self = -T::one() - lam_n * T::from(out_active as f64).unwrap();
        let g = &mut grad[a * m..(a + 1) * m];
        for (gj, &v) in g.iter_mut().zip(inst.row(a)) {
            *gj = coeff_self * T::from(v).unwrap();
        }
        for i in (0..n).filter(|&i| terms[i * n + a] > T::zero()) {
            for (gj, &v) in g.iter_mut().zip(inst.row(i)) {
                *gj += lam_n * T::from(v).unwrap();
            }
        }
        g.iter_mut().for_each(|x| *x = *x * scale);
    }
    (loss, grad)
}

/// Chain rule through the temperature softmax: `dL/dz` from `dL/dP`.
pub fn softmax_backward<T: Scalar>(shares: &[T], grad_shares: &[T], n: usize, m: usize, t: T) -> Vec<T> {
    let mut out = vec![T::zero(); n * m];
    for j in 0..m {
        let mut inner = T::zero();
        for i in 0..n {
            inner += shares[i * m + j] * grad_shares[i * m + j];
        }
        for i in 0..n {
            let idx = i * m + j;
            out[idx] = flush(shares[idx] * (grad_shares[idx] - inner) / t);
        }
    }
    out
}

fn sample_loss_grad<T: Scalar>(
    arch: &ArchConfig,
    layout: &Layout,
    weights: &[T],
    sample: &Sample,
    lambda: f64,
    mode: EnvyMode,
    grad: Option<&mut [T]>,
) -> Result<T> {
    let trace = forward_trace(arch, layout, weights, &sample.input)?;
    let (n, m) = (sample.instance.agents(), sample.instance.items());
    let t = T::from(arch.temperature).unwrap();
    let shares = softmax_columns(trace.logits(), n, m, t);
    let (loss, grad_shares) = sample_objective(&sample.instance, &shares, lambda, mode);
    if let Some(grad) = grad {
        let grad_logits = softmax_backward(&shares, &grad_shares, n, m, t);
        backward(layout, weights, &trace, grad_logits, grad);
    }
    Ok(loss)
}

/// Fixed number of partial sums per batch, so parallel and serial reductions
/// add in the same order.
const REDUCTION_CHUNKS: usize = 8;

/// Mean loss over `batch` and its gradient with respect to `weights`.
pub fn loss_and_gradient<T: Scalar, S: Borrow<Sample> + Sync>(
    arch: &ArchConfig,
    weights: &[T],
    batch: &[S],
    lambda: f64,
    mode: EnvyMode,
) -> Result<(T, Vec<T>)> {
    let layout = Layout::new(arch);
    let chunk = batch.len().div_ceil(REDUCTION_CHUNKS).max(1);
    let partials: Vec<Result<(T, Vec<T>)>> = batch
        .par_chunks(chunk)
        .map(|part| {
            let mut grad = vec![T::zero(); layout.len];
            let mut loss = T::zero();
            for s in part {
                loss += sample_loss_grad(arch, &layout, weights, s.borrow(), lambda, mode, Some(&mut grad))?;
            }
            Ok((loss, grad))
        })
        .collect();
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); layout.len];
    for p in partials {
        let (l, g) = p?;
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, &b)| *a += b);
    }
    let inv = T::from(1.0 / batch.len().max(1) as f64).unwrap();
    grad.iter_mut().for_each(|g| *g = *g * inv);
    Ok((loss * inv, grad))
}

/// Mean loss over `batch` evaluated in `T` precision without gradients.
pub fn loss_with<T: Scalar>(
    arch: &ArchConfig,
    weights: &[T],
    batch: &[Sample],
    lambda: f64,
    mode: EnvyMode,
) -> Result<T> {
    let layout = Layout::new(arch);
    let losses: Vec<Result<T>> = batch
        .par_iter()
        .map(|s| sample_loss_grad(arch, &layout, weights, s, lambda, mode, None))
        .collect();
    let mut total = T::zero();
    for l in losses {
        total += l?;
    }
    Ok(total / T::from(batch.len().max(1) as f64).unwrap())
}

/// Batch loss of `params` on raw instances.
pub fn loss(params: &NetworkParams, batch: &[Instance], lambda: f64, mode: EnvyMode) -> Result<f64> {
    let samples: Vec<Sample> = batch.iter().cloned().map(Sample::new).collect();
    loss_with(&params.arch, params.weights(), &samples, lambda, mode).map(f64::from)
}
