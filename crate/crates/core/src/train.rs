//! N-RoSy loss, analytic backpropagation, the optimizer and the training loop.
//!
//! Complex gradients are carried in the form `G = ∂L/∂Re z + i ∂L/∂Im z`,
//! which treats every complex entry as a pair of reals. For a real weight in
//! `Z = Y W` this gives `∂L/∂W = Re(Yᴴ G)` and `∂L/∂Y = G Wᵀ`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bundle::MeshBundle;
use crate::cmat::CMat;
use crate::error::{Error, Result};
use crate::model::{
    effective_time_scale, forward_raw, multiply_basis, parameter_layout, parameter_name, slots, truncate_basis,
    weighted_adjoint, Mode, ParamKind, Tape, VhnParams, MAGNITUDE_EPSILON,
};
use crate::ops::MassMatrix;
use crate::spectral::SpectralBasis;

/// Ground-truth magnitudes at or below this are masked out of the loss.
pub const GT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub magnitude: f64,
    pub direction: f64,
    /// Unweighted per-vertex magnitude terms (0 where masked).
    pub per_vertex_magnitude: Vec<f64>,
    /// Unweighted per-vertex direction terms in `[0, 2]` (0 where masked).
    pub per_vertex_direction: Vec<f64>,
    pub masked: usize,
}

fn unit_power(z: Complex64, order: u32) -> Option<Complex64> {
    let p = z.powu(order);
    let r = p.norm();
    if r > 0.0 && r.is_finite() {
        Some(p / r)
    } else {
        // fall back on the angle when the power under- or overflows
        let r = z.norm();
        if r < MAGNITUDE_EPSILON {
            None
        } else {
            Some(Complex64::from_polar(1.0, order as f64 * z.im.atan2(z.re)))
        }
    }
}

/// Area-weighted magnitude and direction loss between predicted and
/// ground-truth N-RoSy representatives.
pub fn rosy_loss(pred: &[Complex64], gt: &[Complex64], mass: &MassMatrix, order: u32) -> Result<LossBreakdown> {
    Ok(loss_and_gradient(pred, gt, mass, order, false)?.0)
}

/// Loss together with `∂L/∂pred` in complex-gradient form.
pub fn loss_and_gradient(
    pred: &[Complex64],
    gt: &[Complex64],
    mass: &MassMatrix,
    order: u32,
    with_gradient: bool,
) -> Result<(LossBreakdown, Vec<Complex64>)> {
    let n = gt.len();
    if pred.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: pred.len() });
    }
    if mass.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: mass.len() });
    }
    if order == 0 {
        return Err(Error::InvalidConfig("rosy order must be at least 1".into()));
    }
    let live: Vec<bool> = gt.iter().map(|g| g.norm() > GT_EPSILON).collect();
    let masked = live.iter().filter(|l| !**l).count();
    let area: f64 = mass.diag.iter().zip(&live).filter(|(_, l)| **l).map(|(m, _)| m).sum();
    let mut per_mag = vec![0.0; n];
    let mut per_dir = vec![0.0; n];
    let mut grad = vec![Complex64::new(0.0, 0.0); if with_gradient { n } else { 0 }];
    let (mut mag_sum, mut dir_sum) = (0.0, 0.0);
    if area > 0.0 {
        let nf = order as f64;
        for i in 0..n {
            if !live[i] {
                continue;
            }
            let w = mass.diag[i] / area;
            let (u, g) = (pred[i], gt[i].norm());
            let r = u.norm();
            per_mag[i] = (r - g).abs() / g;
            let a = unit_power(gt[i], order).unwrap();
            let q = unit_power(u, order);
            per_dir[i] = match q {
                Some(q) => 1.0 - (a.conj() * q).re,
                None => 1.0,
            };
            mag_sum += w * per_mag[i];
            dir_sum += w * per_dir[i];
            if with_gradient && r >= MAGNITUDE_EPSILON {
                let dir = u / r;
                let sign = if r > g {
                    1.0
                } else if r < g {
                    -1.0
                } else {
                    0.0
                };
                grad[i] += dir * (w * sign / g);
                if let Some(q) = q {
                    let dtheta = nf * (a.conj() * q).im;
                    grad[i] += Complex64::i() * u * (w * dtheta / (r * r));
                }
            }
        }
    }
    let loss = LossBreakdown {
        total: mag_sum + dir_sum,
        magnitude: mag_sum,
        direction: dir_sum,
        per_vertex_magnitude: per_mag,
        per_vertex_direction: per_dir,
        masked,
    };
    Ok((loss, grad))
}

/// `Re(xᴴ g)`, the gradient of a real weight matrix, row-major `a x b`.
fn real_weight_grad(x: &CMat, g: &CMat, out: &mut [f64]) {
    let b = g.cols();
    for v in 0..x.rows() {
        let grow = g.row(v);
        for (i, z) in x.row(v).iter().enumerate() {
            if z.re == 0.0 && z.im == 0.0 {
                continue;
            }
            let orow = &mut out[i * b..(i + 1) * b];
            for (o, gz) in orow.iter_mut().zip(grow) {
                *o += z.re * gz.re + z.im * gz.im;
            }
        }
    }
}

/// `g Wᵀ` for a real `a x b` weight.
fn linear_transpose(g: &CMat, w: &[f64], in_cols: usize) -> CMat {
    let b = g.cols();
    let mut out = CMat::zeros(g.rows(), in_cols);
    for v in 0..g.rows() {
        let grow = g.row(v);
        for (i, o) in out.row_mut(v).iter_mut().enumerate() {
            let wr = &w[i * b..(i + 1) * b];
            let mut acc = Complex64::new(0.0, 0.0);
            for (gz, &wv) in grow.iter().zip(wr) {
                acc.re += gz.re * wv;
                acc.im += gz.im * wv;
            }
            *o = acc;
        }
    }
    out
}

/// Backpropagate through `max(|z| − b, 0) z/|z|`. Returns the gradient with
/// respect to the pre-activation and accumulates the bias gradient.
fn magnitude_relu_backward(pre: &CMat, bias: &[f64], g: &CMat, grad_bias: &mut [f64]) -> CMat {
    let mut out = CMat::zeros(pre.rows(), pre.cols());
    for v in 0..pre.rows() {
        for (j, ((z, gz), o)) in pre.row(v).iter().zip(g.row(v)).zip(out.row_mut(v)).enumerate() {
            let r = z.norm();
            let b = bias[j];
            if r < MAGNITUDE_EPSILON || r <= b {
                continue;
            }
            let zhat = z / r;
            let radial = (zhat.conj() * gz).re;
            *o = gz - (gz - zhat * radial) * (b / r);
            grad_bias[j] -= radial;
        }
    }
    out
}

/// Loss and exact gradient with respect to every parameter.
pub fn backward(
    params: &VhnParams,
    bundle: &MeshBundle,
    gt: &[Complex64],
    order: u32,
    mode: Mode,
    seed: u64,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let time_scale = effective_time_scale(&params.config, bundle);
    backward_raw(params, &bundle.basis, &bundle.mass, &bundle.features.values, time_scale, gt, order, mode, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn backward_raw(
    params: &VhnParams,
    basis: &SpectralBasis,
    mass: &MassMatrix,
    features: &CMat,
    time_scale: f64,
    gt: &[Complex64],
    order: u32,
    mode: Mode,
    seed: u64,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let config = &params.config;
    if config.out_channels != 1 {
        return Err(Error::InvalidConfig("the loss expects a single output channel".into()));
    }
    let (out, tape) = forward_raw(params, basis, mass, features, time_scale, mode, seed)?;
    let truncated;
    let basis = if basis.k() > config.k {
        truncated = truncate_basis(basis, config.k);
        &truncated
    } else {
        basis
    };
    let (loss, g_out) = loss_and_gradient(&out.col(0), gt, mass, order, true)?;
    if !loss.total.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    let grads = backprop(params, basis, mass, features, &tape, CMat::column(g_out));
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient of {}", parameter_name(config, i))));
    }
    Ok((loss, grads))
}

fn backprop(params: &VhnParams, basis: &SpectralBasis, mass: &MassMatrix, features: &CMat, tape: &Tape, g_out: CMat) -> Vec<f64> {
    let config = &params.config;
    let c = config.hidden_channels;
    let s = slots(config);
    let p = &params.values;
    let mut grads = vec![0.0; p.len()];

    real_weight_grad(&tape.last_hidden, &g_out, &mut grads[s.output_w.clone()]);
    let mut g_x = linear_transpose(&g_out, &p[s.output_w.clone()], c);

    for (b, slot) in s.blocks.iter().enumerate().rev() {
        let bt = &tape.blocks[b];
        let m = bt.times.len();
        // residual branch; the skip passes g_x through unchanged
        let g_pre2 = magnitude_relu_backward(&bt.pre2, &p[slot.b2.clone()], &g_x, &mut grads[slot.b2.clone()]);
        real_weight_grad(&bt.hidden, &g_pre2, &mut grads[slot.w2.clone()]);
        let mut g_hidden = linear_transpose(&g_pre2, &p[slot.w2.clone()], c);
        if let Some(mask) = &bt.mask {
            for (z, k) in g_hidden.as_mut_slice().iter_mut().zip(mask) {
                *z *= *k;
            }
        }
        let g_pre1 = magnitude_relu_backward(&bt.pre1, &p[slot.b1.clone()], &g_hidden, &mut grads[slot.b1.clone()]);

        // pre1 = Φ S W1 with S_i = D_i P and P = Φᴴ M X
        let g_spectral = weighted_adjoint(basis, None, &g_pre1);
        real_weight_grad(&bt.stacked, &g_spectral, &mut grads[slot.w1.clone()]);
        let q = linear_transpose(&g_spectral, &p[slot.w1.clone()], m * c);
        let k = basis.k();
        let mut r = CMat::zeros(k, c);
        let g_times = &mut grads[slot.log_times.clone()];
        for a in 0..k {
            let lam = basis.values[a];
            let prow = bt.coeffs.row(a);
            let qrow = q.row(a);
            for (i, &t) in bt.times.iter().enumerate() {
                let d = (-lam * t).exp();
                let qi = &qrow[i * c..(i + 1) * c];
                let mut dot = 0.0;
                for (pz, qz) in prow.iter().zip(qi) {
                    dot += pz.re * qz.re + pz.im * qz.im;
                }
                // ∂L/∂ρ = s ∂L/∂s
                g_times[i] += -lam * d * dot * t;
                for (o, qz) in r.row_mut(a).iter_mut().zip(qi) {
                    *o += qz * d;
                }
            }
        }
        let back = multiply_basis(basis, &r, g_x.rows());
        for v in 0..g_x.rows() {
            let w = mass.diag[v];
            for (o, z) in g_x.row_mut(v).iter_mut().zip(back.row(v)) {
                *o += z * w;
            }
        }
    }

    let g_pre_in = magnitude_relu_backward(&tape.input_pre, &p[s.input_b.clone()], &g_x, &mut grads[s.input_b.clone()]);
    real_weight_grad(features, &g_pre_in, &mut grads[s.input_w.clone()]);
    grads
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub epochs: usize,
    /// Decoupled weight decay, linear weights only.
    pub weight_decay: f64,
    pub dropout: f64,
    pub seed: u64,
    pub rosy_order: u32,
    /// Meshes whose gradients are averaged into one step.
    pub accumulate: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            decay_factor: 0.85,
            decay_every: 150,
            epochs: 3000,
            weight_decay: 1e-3,
            dropout: 0.5,
            seed: 0,
            rosy_order: 4,
            accumulate: 1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.decay_factor > 0.0
            && self.decay_every > 0
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.dropout)
            && self.rosy_order >= 1
            && self.accumulate >= 1
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("training configuration out of range".into()))
        }
    }

    /// Step-decayed learning rate for `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.decay_factor.powi((epoch / self.decay_every) as i32)
    }
}

/// Adam with decoupled weight decay on linear weights. Biases are kept
/// nonnegative so the nonlinearity never grows magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub steps: u64,
    decay_mask: Vec<bool>,
    bias_mask: Vec<bool>,
}

impl AdamW {
    pub fn new(params: &VhnParams) -> Self {
        let n = params.len();
        let mut decay_mask = vec![false; n];
        let mut bias_mask = vec![false; n];
        for r in parameter_layout(&params.config) {
            for i in r.range() {
                decay_mask[i] = r.kind == ParamKind::Weight;
                bias_mask[i] = r.kind == ParamKind::Bias;
            }
        }
        AdamW { first: vec![0.0; n], second: vec![0.0; n], steps: 0, decay_mask, bias_mask }
    }

    pub fn step(&mut self, params: &mut VhnParams, grads: &[f64], lr: f64, config: &TrainConfig) {
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - config.beta1.powi(t);
        let c2 = 1.0 - config.beta2.powi(t);
        for i in 0..params.values.len() {
            let g = grads[i];
            self.first[i] = config.beta1 * self.first[i] + (1.0 - config.beta1) * g;
            self.second[i] = config.beta2 * self.second[i] + (1.0 - config.beta2) * g * g;
            let mhat = self.first[i] / c1;
            let vhat = self.second[i] / c2;
            let w = &mut params.values[i];
            if self.decay_mask[i] {
                *w -= lr * config.weight_decay * *w;
            }
            *w -= lr * mhat / (vhat.sqrt() + config.epsilon);
            if self.bias_mask[i] && *w < 0.0 {
                *w = 0.0;
            }
        }
    }
}

/// One training example: a prepared mesh and its ground-truth field.
#[derive(Debug, Clone)]
pub struct Example {
    pub bundle: MeshBundle,
    pub gt: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub total: f64,
    pub magnitude: f64,
    pub direction: f64,
}

/// Hooks for logging and checkpointing. `params` are the parameters after
/// the epoch's steps. `best` is set when the recorded loss is the lowest so
/// far and holds the parameters it was measured with. Returning `false`
/// stops training early.
pub trait TrainObserver {
    fn epoch(&mut self, _record: &EpochRecord, _params: &VhnParams, _best: Option<&VhnParams>) -> Result<bool> {
        Ok(true)
    }
}

/// Observer that does nothing.
pub struct Silent;

impl TrainObserver for Silent {}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: VhnParams,
    pub best: VhnParams,
    pub best_loss: f64,
    pub history: Vec<EpochRecord>,
}

/// Train from `init` on `examples`. A missing time scale is fixed to the
/// first mesh's, so every mesh sees the same diffusion times.
pub fn train(examples: &[Example], init: VhnParams, config: &TrainConfig, observer: &mut dyn TrainObserver) -> Result<TrainOutcome> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for ex in examples {
        if ex.gt.len() != ex.bundle.num_vertices() {
            return Err(Error::DimensionMismatch { expected: ex.bundle.num_vertices(), found: ex.gt.len() });
        }
        if ex.bundle.features.channels() != init.config.in_channels {
            return Err(Error::DimensionMismatch { expected: init.config.in_channels, found: ex.bundle.features.channels() });
        }
    }
    let mut params = init;
    params.config.dropout = config.dropout;
    if params.config.time_scale.is_none() {
        params.config.time_scale = Some(examples[0].bundle.time_scale());
    }
    params.config.validate()?;
    let mut opt = AdamW::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best = params.clone();
    let mut best_loss = f64::INFINITY;
    let mut step_seed = config.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for epoch in 0..config.epochs {
        let lr = config.learning_rate_at(epoch);
        // the epoch's recorded loss is measured with the parameters as they
        // were before its steps
        let before = params.clone();
        order.shuffle(&mut rng);
        let (mut total, mut mag, mut dir) = (0.0, 0.0, 0.0);
        for group in order.chunks(config.accumulate) {
            let mut acc = vec![0.0; params.len()];
            for &i in group {
                step_seed = step_seed.wrapping_add(1);
                let ex = &examples[i];
                let (loss, g) = backward(&params, &ex.bundle, &ex.gt, config.rosy_order, Mode::Train, step_seed)?;
                total += loss.total;
                mag += loss.magnitude;
                dir += loss.direction;
                for (a, x) in acc.iter_mut().zip(&g) {
                    *a += x;
                }
            }
            let scale = 1.0 / group.len() as f64;
            for a in &mut acc {
                *a *= scale;
            }
            opt.step(&mut params, &acc, lr, config);
        }
        let count = examples.len() as f64;
        let record = EpochRecord { epoch, learning_rate: lr, total: total / count, magnitude: mag / count, direction: dir / count };
        if !record.total.is_finite() {
            return Err(Error::NonFinite(format!("loss at epoch {epoch}")));
        }
        let is_best = record.total < best_loss;
        history.push(record);
        if is_best {
            best_loss = record.total;
            best = before;
        }
        if !observer.epoch(&record, &params, if is_best { Some(&best) } else { None })? {
            break;
        }
    }
    Ok(TrainOutcome { params, best, best_loss, history })
}

/// Eval-mode loss of `params` on one example.
pub fn evaluate(params: &VhnParams, example: &Example, order: u32) -> Result<LossBreakdown> {
    let out = crate::model::forward(params, &example.bundle, Mode::Eval, 0)?;
    rosy_loss(&out.col(0), &example.gt, &example.bundle.mass, order)
}
