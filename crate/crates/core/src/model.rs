//! The Vector Heat Network forward pass.
//!
//! Input vector MLP, a stack of diffusion blocks, output vector MLP. A block
//! diffuses its input at `m` learned times, concatenates the results, runs a
//! two-layer vector MLP and adds the block input back. Linear layers have
//! real weights acting on complex features, the nonlinearity acts on
//! magnitudes only, so the whole network commutes with frame rotations.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundle::MeshBundle;
use crate::cmat::CMat;
use crate::error::{Error, Result};
use crate::fingerprint::Fnv;
use crate::ops::MassMatrix;
use crate::spectral::SpectralBasis;

/// Magnitudes below this are treated as zero by the nonlinearity.
pub const MAGNITUDE_EPSILON: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct VhnConfig {
    pub num_blocks: usize,
    pub hidden_channels: usize,
    pub times_per_block: usize,
    /// Spectral truncation.
    pub k: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub dropout: f64,
    /// Diffusion time unit. `None` uses the squared mean edge length of
    /// whichever mesh is evaluated.
    pub time_scale: Option<f64>,
}

impl Default for VhnConfig {
    fn default() -> Self {
        VhnConfig {
            num_blocks: 6,
            hidden_channels: 256,
            times_per_block: 4,
            k: 128,
            in_channels: 30,
            out_channels: 1,
            dropout: 0.5,
            time_scale: None,
        }
    }
}

impl VhnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("{what} must be at least 1")));
        if self.hidden_channels == 0 {
            return bad("hidden_channels");
        }
        if self.times_per_block == 0 {
            return bad("times_per_block");
        }
        if self.k == 0 {
            return bad("k");
        }
        if self.in_channels == 0 {
            return bad("in_channels");
        }
        if self.out_channels == 0 {
            return bad("out_channels");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if let Some(t) = self.time_scale {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidConfig(format!("time_scale {t} must be positive")));
            }
        }
        Ok(())
    }

    /// Hash of every architectural setting, stored in checkpoints.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        for w in [self.num_blocks, self.hidden_channels, self.times_per_block, self.k, self.in_channels, self.out_channels] {
            h.word(w as u64);
        }
        h.f64(self.dropout);
        h.f64(self.time_scale.unwrap_or(0.0));
        h.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Real linear weights, subject to weight decay.
    Weight,
    /// Magnitude biases of the nonlinearity.
    Bias,
    /// Logarithmic diffusion times.
    LogTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamRecord {
    pub name: String,
    pub kind: ParamKind,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl ParamRecord {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Parameter records in declaration order.
pub fn parameter_layout(config: &VhnConfig) -> Vec<ParamRecord> {
    let (c, m) = (config.hidden_channels, config.times_per_block);
    let mut out = Vec::new();
    let mut offset = 0;
    let mut push = |name: String, kind, rows, cols| {
        out.push(ParamRecord { name, kind, offset, rows, cols });
        offset += rows * cols;
    };
    push("input.weight".into(), ParamKind::Weight, config.in_channels, c);
    push("input.bias".into(), ParamKind::Bias, 1, c);
    for b in 0..config.num_blocks {
        push(format!("blocks.{b}.log_times"), ParamKind::LogTime, 1, m);
        push(format!("blocks.{b}.mlp1.weight"), ParamKind::Weight, m * c, c);
        push(format!("blocks.{b}.mlp1.bias"), ParamKind::Bias, 1, c);
        push(format!("blocks.{b}.mlp2.weight"), ParamKind::Weight, c, c);
        push(format!("blocks.{b}.mlp2.bias"), ParamKind::Bias, 1, c);
    }
    push("output.weight".into(), ParamKind::Weight, c, config.out_channels);
    out
}

pub fn count_parameters(config: &VhnConfig) -> usize {
    let (c, m) = (config.hidden_channels, config.times_per_block);
    config.in_channels * c + c + config.num_blocks * (m + m * c * c + c + c * c + c) + c * config.out_channels
}

/// Offsets of one block's parameters inside the flat vector.
#[derive(Debug, Clone)]
pub(crate) struct BlockSlots {
    pub log_times: Range<usize>,
    pub w1: Range<usize>,
    pub b1: Range<usize>,
    pub w2: Range<usize>,
    pub b2: Range<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct Slots {
    pub input_w: Range<usize>,
    pub input_b: Range<usize>,
    pub blocks: Vec<BlockSlots>,
    pub output_w: Range<usize>,
}

pub(crate) fn slots(config: &VhnConfig) -> Slots {
    let layout = parameter_layout(config);
    let r = |i: usize| layout[i].range();
    let blocks = (0..config.num_blocks)
        .map(|b| {
            let base = 2 + 5 * b;
            BlockSlots { log_times: r(base), w1: r(base + 1), b1: r(base + 2), w2: r(base + 3), b2: r(base + 4) }
        })
        .collect();
    Slots { input_w: r(0), input_b: r(1), blocks, output_w: r(layout.len() - 1) }
}

/// Network parameters, flat in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct VhnParams {
    pub config: VhnConfig,
    pub values: Vec<f64>,
}

impl VhnParams {
    /// Weights uniform with variance `1 / fan_in`, biases zero, log-times
    /// uniform on `[-2, 2]`.
    pub fn init(config: &VhnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; count_parameters(config)];
        for rec in parameter_layout(config) {
            let slot = &mut values[rec.range()];
            match rec.kind {
                ParamKind::Weight => {
                    let a = (3.0 / rec.rows as f64).sqrt();
                    for w in slot {
                        *w = rng.random_range(-a..a);
                    }
                }
                ParamKind::Bias => {}
                ParamKind::LogTime => {
                    for w in slot {
                        *w = rng.random_range(-2.0..2.0);
                    }
                }
            }
        }
        Ok(VhnParams { config: config.clone(), values })
    }

    pub fn from_values(config: &VhnConfig, values: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let expected = count_parameters(config);
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(parameter_name(config, i)));
        }
        Ok(VhnParams { config: config.clone(), values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Diffusion times of block `b`.
    pub fn diffusion_times(&self, b: usize, time_scale: f64) -> Vec<f64> {
        let s = slots(&self.config);
        self.values[s.blocks[b].log_times.clone()].iter().map(|r| r.exp() * time_scale).collect()
    }

    /// Hash of the configuration and every parameter bit.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        h.word(self.config.fingerprint());
        for v in &self.values {
            h.f64(*v);
        }
        h.finish()
    }
}

/// `name[index]` of the flat parameter at position `i`.
pub fn parameter_name(config: &VhnConfig, i: usize) -> String {
    parameter_layout(config)
        .into_iter()
        .find(|r| r.range().contains(&i))
        .map(|r| format!("{}[{}]", r.name, i - r.offset))
        .unwrap_or_else(|| format!("parameter[{i}]"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// `x W` with `x` complex `n x a` and `W` real `a x b`, row-major.
pub fn linear(x: &CMat, w: &[f64], out_cols: usize) -> CMat {
    let (n, a) = (x.rows(), x.cols());
    debug_assert_eq!(w.len(), a * out_cols);
    let mut out = CMat::zeros(n, out_cols);
    for v in 0..n {
        let xr = x.row(v);
        let orow = out.row_mut(v);
        for (i, z) in xr.iter().enumerate() {
            if z.re == 0.0 && z.im == 0.0 {
                continue;
            }
            let wr = &w[i * out_cols..(i + 1) * out_cols];
            for (o, &wv) in orow.iter_mut().zip(wr) {
                o.re += z.re * wv;
                o.im += z.im * wv;
            }
        }
    }
    out
}

/// Magnitude soft threshold `max(|z| − b, 0) z / |z|`.
pub fn magnitude_relu(z: Complex64, b: f64) -> Complex64 {
    let r = z.norm();
    if r < MAGNITUDE_EPSILON || r <= b {
        return Complex64::new(0.0, 0.0);
    }
    z * ((r - b) / r)
}

fn activate(z: &CMat, bias: &[f64]) -> CMat {
    let mut out = z.clone();
    for v in 0..z.rows() {
        for (o, b) in out.row_mut(v).iter_mut().zip(bias) {
            *o = magnitude_relu(*o, *b);
        }
    }
    out
}

/// Dropout mask entries: `0` or `1 / (1 − p)`, drawn row by row.
fn dropout_mask(rows: usize, cols: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..rows * cols).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect()
}

/// One vector MLP layer: linear map, magnitude nonlinearity, optional
/// dropout. Returns the pre-activation, the output and the mask used.
pub fn vector_mlp_layer(
    x: &CMat,
    weight: &[f64],
    bias: &[f64],
    dropout: f64,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> Result<(CMat, CMat, Option<Vec<f64>>)> {
    let out_cols = bias.len();
    if weight.len() != x.cols() * out_cols {
        return Err(Error::DimensionMismatch { expected: x.cols() * out_cols, found: weight.len() });
    }
    let pre = linear(x, weight, out_cols);
    let (out, mask) = activate_with_dropout(&pre, bias, dropout, mode, rng);
    Ok((pre, out, mask))
}

fn activate_with_dropout(pre: &CMat, bias: &[f64], dropout: f64, mode: Mode, rng: &mut ChaCha8Rng) -> (CMat, Option<Vec<f64>>) {
    let mut out = activate(pre, bias);
    let mask = if mode == Mode::Train && dropout > 0.0 {
        let mask = dropout_mask(out.rows(), out.cols(), dropout, rng);
        for (z, m) in out.as_mut_slice().iter_mut().zip(&mask) {
            *z *= *m;
        }
        Some(mask)
    } else {
        None
    };
    (out, mask)
}

/// Spectral coefficients `Φᴴ M x`, `k x c`.
pub(crate) fn to_spectral(basis: &SpectralBasis, mass: &MassMatrix, x: &CMat) -> CMat {
    weighted_adjoint(basis, Some(&mass.diag), x)
}

/// `Φᴴ diag(w) x`.
pub(crate) fn weighted_adjoint(basis: &SpectralBasis, weights: Option<&[f64]>, x: &CMat) -> CMat {
    let (k, c) = (basis.k(), x.cols());
    let mut out = CMat::zeros(k, c);
    let mut scaled = vec![Complex64::new(0.0, 0.0); c];
    for v in 0..x.rows() {
        let w = weights.map_or(1.0, |w| w[v]);
        for (s, z) in scaled.iter_mut().zip(x.row(v)) {
            *s = z * w;
        }
        for (a, phi) in basis.vectors.row(v).iter().enumerate() {
            let p = phi.conj();
            for (o, s) in out.row_mut(a).iter_mut().zip(&scaled) {
                *o += p * s;
            }
        }
    }
    out
}

/// Decayed coefficients side by side, `[e^{−λ s_1} ⊙ P, …, e^{−λ s_m} ⊙ P]`,
/// `k x (m c)`. The diffused features are `Φ` times this block, so a linear
/// layer applied to them can act on the `k` rows instead of the `n` rows.
pub(crate) fn decay_stack(values: &[f64], coeffs: &CMat, times: &[f64]) -> CMat {
    let (k, c) = (coeffs.rows(), coeffs.cols());
    let m = times.len();
    let mut stacked = CMat::zeros(k, m * c);
    for a in 0..k {
        for (i, s) in times.iter().enumerate() {
            let d = (-values[a] * s).exp();
            for (o, p) in stacked.row_mut(a)[i * c..(i + 1) * c].iter_mut().zip(coeffs.row(a)) {
                *o = p * d;
            }
        }
    }
    stacked
}

/// `[Φ (e^{−λ s_1} ⊙ P), …, Φ (e^{−λ s_m} ⊙ P)]`, `n x (m c)`.
pub fn diffuse_multi(basis: &SpectralBasis, coeffs: &CMat, times: &[f64]) -> CMat {
    multiply_basis(basis, &decay_stack(&basis.values, coeffs, times), basis.n())
}

/// `Φ B` for a `k x w` block `B`.
pub(crate) fn multiply_basis(basis: &SpectralBasis, block: &CMat, n: usize) -> CMat {
    let w = block.cols();
    let mut out = CMat::zeros(n, w);
    for v in 0..n {
        let orow = out.row_mut(v);
        for (a, phi) in basis.vectors.row(v).iter().enumerate() {
            for (o, b) in orow.iter_mut().zip(block.row(a)) {
                *o += phi * b;
            }
        }
    }
    out
}

/// Intermediate values of one block, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct BlockTape {
    pub times: Vec<f64>,
    pub coeffs: CMat,
    /// Output of [`decay_stack`]; the diffused features are `Φ stacked`.
    pub stacked: CMat,
    pub pre1: CMat,
    pub hidden: CMat,
    pub mask: Option<Vec<f64>>,
    pub pre2: CMat,
}

/// Intermediate values of a full forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    pub time_scale: f64,
    pub input_pre: CMat,
    pub block_inputs: Vec<CMat>,
    pub blocks: Vec<BlockTape>,
    pub last_hidden: CMat,
}

/// Diffusion time unit for `bundle` under `config`.
pub fn effective_time_scale(config: &VhnConfig, bundle: &MeshBundle) -> f64 {
    config.time_scale.unwrap_or_else(|| bundle.time_scale())
}

/// Network output, `n x c_out`, in the vertex frames of `bundle`.
pub fn forward(params: &VhnParams, bundle: &MeshBundle, mode: Mode, seed: u64) -> Result<CMat> {
    Ok(forward_with_tape(params, bundle, mode, seed)?.0)
}

pub fn forward_with_tape(params: &VhnParams, bundle: &MeshBundle, mode: Mode, seed: u64) -> Result<(CMat, Tape)> {
    let time_scale = effective_time_scale(&params.config, bundle);
    forward_raw(params, &bundle.basis, &bundle.mass, &bundle.features.values, time_scale, mode, seed)
}

/// Forward pass on loose inputs. The basis is truncated to `config.k`
/// modes when it holds more.
pub fn forward_raw(
    params: &VhnParams,
    basis: &SpectralBasis,
    mass: &MassMatrix,
    features: &CMat,
    time_scale: f64,
    mode: Mode,
    seed: u64,
) -> Result<(CMat, Tape)> {
    let config = &params.config;
    config.validate()?;
    if params.values.len() != count_parameters(config) {
        return Err(Error::DimensionMismatch { expected: count_parameters(config), found: params.values.len() });
    }
    if features.cols() != config.in_channels {
        return Err(Error::DimensionMismatch { expected: config.in_channels, found: features.cols() });
    }
    let n = features.rows();
    if basis.n() != n || mass.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: basis.n() });
    }
    let truncated;
    let basis = if basis.k() > config.k {
        truncated = truncate_basis(basis, config.k);
        &truncated
    } else {
        basis
    };
    let c = config.hidden_channels;
    let s = slots(config);
    let p = &params.values;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let input_pre = linear(features, &p[s.input_w.clone()], c);
    let mut x = activate(&input_pre, &p[s.input_b.clone()]);
    let mut block_inputs = Vec::with_capacity(config.num_blocks);
    let mut blocks = Vec::with_capacity(config.num_blocks);
    for slot in &s.blocks {
        let times: Vec<f64> = p[slot.log_times.clone()].iter().map(|r| r.exp() * time_scale).collect();
        let coeffs = to_spectral(basis, mass, &x);
        let stacked = decay_stack(&basis.values, &coeffs, &times);
        // (Φ S) W = Φ (S W): mix channels before leaving the spectral domain
        let pre1 = multiply_basis(basis, &linear(&stacked, &p[slot.w1.clone()], c), n);
        let (hidden, mask) = activate_with_dropout(&pre1, &p[slot.b1.clone()], config.dropout, mode, &mut rng);
        let pre2 = linear(&hidden, &p[slot.w2.clone()], c);
        let z = activate(&pre2, &p[slot.b2.clone()]);
        let mut next = x.clone();
        for (o, zz) in next.as_mut_slice().iter_mut().zip(z.as_slice()) {
            *o += zz;
        }
        block_inputs.push(core::mem::replace(&mut x, next));
        blocks.push(BlockTape { times, coeffs, stacked, pre1, hidden, mask, pre2 });
    }
    let out = linear(&x, &p[s.output_w.clone()], config.out_channels);
    if !out.is_finite() {
        return Err(Error::NonFinite("network output".into()));
    }
    Ok((out, Tape { time_scale, input_pre, block_inputs, blocks, last_hidden: x }))
}

/// The lowest `k` modes of `basis`.
pub fn truncate_basis(basis: &SpectralBasis, k: usize) -> SpectralBasis {
    let k = k.min(basis.k());
    SpectralBasis { vectors: basis.vectors.col_block(0, k), values: basis.values[..k].to_vec(), source: basis.source }
}
