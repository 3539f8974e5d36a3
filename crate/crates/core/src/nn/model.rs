//! Context-weighted fusion model and the concatenation baseline.
//!
//! The fusion model evaluates one function network per active feature group,
//! each producing `K` outputs `f_z`, and a context network on the
//! concatenation `ξ` of all active groups producing `c` of length
//! `(#active) K`. The prediction is `ŷ = Σ_z Σ_α f_zα c_{zK+α}`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{leaky, leaky_grad, Layer};
use crate::dataset::{FeatureGroup, FeatureTensors, NeighborMode};
use crate::error::{config, Result};
use crate::num::sqrt;

pub const DEFAULT_K: usize = 8;
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;
pub const DEFAULT_CONV_CHANNELS: [usize; 3] = [4, 8, 16];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubnetSpec {
    /// Hidden widths, each followed by LeakyReLU, then an affine output.
    Dense { hidden: Vec<usize> },
    /// 2x2 stride-2 convolutions with the given channel counts, each followed
    /// by LeakyReLU, then flatten and an affine output.
    Conv { channels: Vec<usize> },
}

impl SubnetSpec {
    pub fn fc(width: usize, depth: usize) -> Self {
        SubnetSpec::Dense { hidden: vec![width; depth] }
    }

    pub fn cnn() -> Self {
        SubnetSpec::Conv { channels: DEFAULT_CONV_CHANNELS.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Fusion {
        k: usize,
        /// Function network per group x1..x5; `None` leaves the group out.
        functions: [Option<SubnetSpec>; 5],
        context_hidden: Vec<usize>,
    },
    /// Flattened active groups into one dense stack with a scalar output.
    Concat { groups: [bool; 5], hidden: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    pub topology: Topology,
    pub neighbor_mode: NeighborMode,
    pub leaky_slope: f64,
    pub seed: u64,
}

impl ModelConfig {
    /// All five groups over 9-point stencils; CNNs on x2, x3, x4.
    pub fn rgfil(k: usize, seed: u64) -> Self {
        ModelConfig {
            name: "rgfil".into(),
            topology: Topology::Fusion {
                k,
                functions: [
                    Some(SubnetSpec::fc(16, 3)),
                    Some(SubnetSpec::cnn()),
                    Some(SubnetSpec::cnn()),
                    Some(SubnetSpec::cnn()),
                    Some(SubnetSpec::fc(16, 3)),
                ],
                context_hidden: vec![16; 3],
            },
            neighbor_mode: NeighborMode::NinePoint,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            seed,
        }
    }

    /// Flight condition and centre coordinates only, dense networks.
    pub fn mtl(k: usize, seed: u64) -> Self {
        ModelConfig {
            name: "mtl".into(),
            topology: Topology::Fusion {
                k,
                functions: [
                    Some(SubnetSpec::fc(16, 3)),
                    Some(SubnetSpec::fc(16, 3)),
                    None,
                    None,
                    None,
                ],
                context_hidden: vec![16; 3],
            },
            neighbor_mode: NeighborMode::OnePoint,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            seed,
        }
    }

    /// All five groups at the centre point only; CNNs on x3, x4.
    pub fn mdf(k: usize, seed: u64) -> Self {
        ModelConfig {
            name: "mdf".into(),
            topology: Topology::Fusion {
                k,
                functions: [
                    Some(SubnetSpec::fc(16, 3)),
                    Some(SubnetSpec::fc(16, 3)),
                    Some(SubnetSpec::cnn()),
                    Some(SubnetSpec::cnn()),
                    Some(SubnetSpec::fc(16, 3)),
                ],
                context_hidden: vec![32; 3],
            },
            neighbor_mode: NeighborMode::OnePoint,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            seed,
        }
    }

    /// Concatenated 9-point inputs into a 6 x 128 perceptron.
    pub fn mlp(seed: u64) -> Self {
        ModelConfig {
            name: "mlp".into(),
            topology: Topology::Concat { groups: [true; 5], hidden: vec![128; 6] },
            neighbor_mode: NeighborMode::NinePoint,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            seed,
        }
    }

    pub fn preset(name: &str, k: usize, seed: u64) -> Result<Self> {
        match name {
            "rgfil" => Ok(Self::rgfil(k, seed)),
            "mtl" => Ok(Self::mtl(k, seed)),
            "mdf" => Ok(Self::mdf(k, seed)),
            "mlp" => Ok(Self::mlp(seed)),
            other => Err(config(format!("unknown model '{other}'"))),
        }
    }

    /// Drops the groups whose mask entry is false.
    pub fn with_mask(mut self, mask: [bool; 5]) -> Self {
        match &mut self.topology {
            Topology::Fusion { functions, .. } => {
                for (f, keep) in functions.iter_mut().zip(mask) {
                    if !keep {
                        *f = None;
                    }
                }
            }
            Topology::Concat { groups, .. } => {
                for (g, keep) in groups.iter_mut().zip(mask) {
                    *g &= keep;
                }
            }
        }
        self
    }

    pub fn active_groups(&self) -> Vec<FeatureGroup> {
        let mask = match &self.topology {
            Topology::Fusion { functions, .. } => functions.clone().map(|f| f.is_some()),
            Topology::Concat { groups, .. } => *groups,
        };
        FeatureGroup::ALL.into_iter().filter(|g| mask[g.index()]).collect()
    }
}

/// A stack of layers with contiguous parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subnet {
    pub layers: Vec<Layer>,
    pub params: Range<usize>,
}

impl Subnet {
    fn build(spec: &SubnetSpec, group: Option<FeatureGroup>, input_len: usize, mode: NeighborMode, out: usize, offset: &mut usize) -> Result<Self> {
        let mut layers = Vec::new();
        match spec {
            SubnetSpec::Dense { hidden } => {
                let mut width = input_len;
                for &h in hidden {
                    layers.push(Layer::dense(width, h, true));
                    width = h;
                }
                layers.push(Layer::dense(width, out, false));
            }
            SubnetSpec::Conv { channels } => {
                let group = group.ok_or_else(|| config("a convolution stack needs a feature group input"))?;
                let mut shape = group.shape(mode);
                for &c in channels {
                    let l = Layer::conv(shape, c);
                    if let super::layers::LayerKind::Conv { output, .. } = l.kind {
                        shape = output;
                    }
                    layers.push(l);
                }
                layers.push(Layer::dense(shape.len(), out, false));
            }
        }
        let start = *offset;
        for l in &mut layers {
            l.offset = *offset;
            *offset += l.param_count();
        }
        Ok(Subnet { layers, params: start..*offset })
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].input_len()
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map(|l| l.output_len()).unwrap_or(0)
    }

    fn forward(&self, params: &[f64], x: &[f64], slope: f64, trace: &mut Trace) {
        trace.inputs.resize_with(self.layers.len(), Vec::new);
        trace.pre.resize_with(self.layers.len(), Vec::new);
        trace.inputs[0].clear();
        trace.inputs[0].extend_from_slice(x);
        for (i, l) in self.layers.iter().enumerate() {
            let (before, after) = trace.inputs.split_at_mut(i + 1);
            l.forward(params, &before[i], &mut trace.pre[i]);
            let dest = if i + 1 < self.layers.len() { &mut after[0] } else { &mut trace.output };
            dest.clear();
            dest.extend(trace.pre[i].iter().map(|&z| if l.activation { leaky(z, slope) } else { z }));
        }
    }

    fn backward(&self, params: &[f64], dout: &[f64], slope: f64, trace: &Trace, grads: &mut [f64], scratch: &mut Scratch) {
        scratch.grad.clear();
        scratch.grad.extend_from_slice(dout);
        for (i, l) in self.layers.iter().enumerate().rev() {
            if l.activation {
                for (g, &z) in scratch.grad.iter_mut().zip(&trace.pre[i]) {
                    *g *= leaky_grad(z, slope);
                }
            }
            l.backward(params, &trace.inputs[i], &scratch.grad, grads, &mut scratch.dx);
            core::mem::swap(&mut scratch.grad, &mut scratch.dx);
        }
    }
}

#[derive(Debug, Default, Clone)]
struct Trace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

#[derive(Debug, Default)]
struct Scratch {
    grad: Vec<f64>,
    dx: Vec<f64>,
}

/// Input groups of many samples, packed once.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub mode: NeighborMode,
    pub len: usize,
    group_len: [usize; 5],
    groups: [Vec<f64>; 5],
    pub y: Vec<f64>,
}

impl Batch {
    pub fn new(tensors: &[FeatureTensors], mode: NeighborMode) -> Self {
        let group_len = FeatureGroup::ALL.map(|g| g.shape(mode).len());
        let mut groups: [Vec<f64>; 5] = Default::default();
        for t in tensors {
            for g in FeatureGroup::ALL {
                t.group_values(g, mode, &mut groups[g.index()]);
            }
        }
        Batch {
            mode,
            len: tensors.len(),
            group_len,
            groups,
            y: tensors.iter().map(|t| t.y).collect(),
        }
    }

    pub fn group(&self, sample: usize, g: FeatureGroup) -> &[f64] {
        let n = self.group_len[g.index()];
        &self.groups[g.index()][sample * n..(sample + 1) * n]
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Architecture {
    Fusion {
        k: usize,
        /// `(group, function network)` in group order.
        functions: Vec<(FeatureGroup, Subnet)>,
        context: Subnet,
    },
    Concat { groups: Vec<FeatureGroup>, net: Subnet },
}

/// A built model: layer layout and parameter ranges for a [`ModelConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub arch: Architecture,
    pub param_count: usize,
}

/// All trainable scalars of a model, flat. Function networks occupy a
/// prefix (`θ_f`), the context network the rest (`θ_c`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub predictions: Vec<f64>,
    /// Context weights `c(ξ)` per sample, when requested.
    pub weights: Option<Vec<Vec<f64>>>,
}

/// Eq.-style double sum `Σ_i f_i c_i` over the concatenated function outputs.
#[inline]
pub fn fuse(f: &[f64], c: &[f64]) -> f64 {
    f.iter().zip(c).map(|(a, b)| a * b).sum()
}

impl Model {
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        if !(cfg.leaky_slope.is_finite() && cfg.leaky_slope >= 0.0) {
            return Err(config("leaky slope must be finite and non-negative"));
        }
        let mode = cfg.neighbor_mode;
        let active = cfg.active_groups();
        if active.is_empty() {
            return Err(config("model has no active feature group"));
        }
        let xi_len: usize = active.iter().map(|g| g.shape(mode).len()).sum();
        let mut offset = 0;
        let arch = match &cfg.topology {
            Topology::Fusion { k, functions, context_hidden } => {
                if *k == 0 {
                    return Err(config("K must be positive"));
                }
                let mut nets = Vec::new();
                for g in &active {
                    let spec = functions[g.index()].as_ref().expect("active group has a network");
                    let net = Subnet::build(spec, Some(*g), g.shape(mode).len(), mode, *k, &mut offset)?;
                    nets.push((*g, net));
                }
                let ctx_spec = SubnetSpec::Dense { hidden: context_hidden.clone() };
                let context = Subnet::build(&ctx_spec, None, xi_len, mode, active.len() * k, &mut offset)?;
                Architecture::Fusion { k: *k, functions: nets, context }
            }
            Topology::Concat { hidden, .. } => {
                let spec = SubnetSpec::Dense { hidden: hidden.clone() };
                let net = Subnet::build(&spec, None, xi_len, mode, 1, &mut offset)?;
                Architecture::Concat { groups: active, net }
            }
        };
        Ok(Model { config: cfg, arch, param_count: offset })
    }

    /// Uniform `±1/sqrt(fan_in)` initialisation from the config seed.
    pub fn init_params(&self) -> Params {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let mut values = vec![0.0; self.param_count];
        for net in self.subnets() {
            for l in &net.layers {
                let bound = 1.0 / sqrt(l.fan_in() as f64);
                for v in &mut values[l.offset..l.offset + l.param_count()] {
                    *v = rng.random_range(-bound..bound);
                }
            }
        }
        Params { values }
    }

    pub fn subnets(&self) -> Vec<&Subnet> {
        match &self.arch {
            Architecture::Fusion { functions, context, .. } => {
                functions.iter().map(|(_, n)| n).chain(core::iter::once(context)).collect()
            }
            Architecture::Concat { net, .. } => alloc::vec![net],
        }
    }

    /// Parameter range of the function networks (`θ_f`).
    pub fn function_params(&self) -> Range<usize> {
        match &self.arch {
            Architecture::Fusion { context, .. } => 0..context.params.start,
            Architecture::Concat { .. } => 0..self.param_count,
        }
    }

    /// Parameter range of the context network (`θ_c`); empty for concat.
    pub fn context_params(&self) -> Range<usize> {
        match &self.arch {
            Architecture::Fusion { context, .. } => context.params.clone(),
            Architecture::Concat { .. } => self.param_count..self.param_count,
        }
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.mode != self.config.neighbor_mode {
            return Err(config(format!(
                "batch packed for {:?} but model expects {:?}",
                batch.mode, self.config.neighbor_mode
            )));
        }
        Ok(())
    }

    fn check_params(&self, params: &Params) -> Result<()> {
        if params.values.len() != self.param_count {
            return Err(config(format!(
                "parameter vector has {} entries, model needs {}",
                params.values.len(),
                self.param_count
            )));
        }
        Ok(())
    }

    pub fn forward(&self, params: &Params, batch: &Batch, log_weights: bool) -> Result<ForwardOutput> {
        self.check_batch(batch)?;
        self.check_params(params)?;
        let mut state = SampleState::default();
        let mut predictions = Vec::with_capacity(batch.len);
        let mut weights = log_weights.then(Vec::new);
        for s in 0..batch.len {
            predictions.push(self.forward_sample(params, batch, s, &mut state));
            if let Some(w) = weights.as_mut() {
                w.push(state.ctx.output.clone());
            }
        }
        Ok(ForwardOutput { predictions, weights })
    }

    pub fn predict(&self, params: &Params, batch: &Batch) -> Result<Vec<f64>> {
        Ok(self.forward(params, batch, false)?.predictions)
    }

    fn forward_sample(&self, params: &Params, batch: &Batch, s: usize, st: &mut SampleState) -> f64 {
        let p = &params.values;
        let slope = self.config.leaky_slope;
        match &self.arch {
            Architecture::Fusion { functions, context, .. } => {
                st.fun.resize_with(functions.len(), Trace::default);
                st.f_concat.clear();
                st.xi.clear();
                for ((g, net), trace) in functions.iter().zip(st.fun.iter_mut()) {
                    let x = batch.group(s, *g);
                    st.xi.extend_from_slice(x);
                    net.forward(p, x, slope, trace);
                    st.f_concat.extend_from_slice(&trace.output);
                }
                context.forward(p, &st.xi, slope, &mut st.ctx);
                fuse(&st.f_concat, &st.ctx.output)
            }
            Architecture::Concat { groups, net } => {
                st.xi.clear();
                for g in groups {
                    st.xi.extend_from_slice(batch.group(s, *g));
                }
                net.forward(p, &st.xi, slope, &mut st.ctx);
                st.ctx.output[0]
            }
        }
    }

    /// MSE over `indices` of the batch and its exact gradient.
    pub fn loss_and_grad(&self, params: &Params, batch: &Batch, indices: &[usize]) -> Result<(f64, Vec<f64>)> {
        self.check_batch(batch)?;
        self.check_params(params)?;
        if indices.is_empty() {
            return Err(crate::error::domain("gradient of an empty batch"));
        }
        let p = &params.values;
        let slope = self.config.leaky_slope;
        let m = indices.len() as f64;
        let mut grads = vec![0.0; self.param_count];
        let mut st = SampleState::default();
        let mut scratch = Scratch::default();
        let mut loss = 0.0;
        let mut dbuf = Vec::new();
        for &s in indices {
            let yhat = self.forward_sample(params, batch, s, &mut st);
            let resid = yhat - batch.y[s];
            loss += resid * resid;
            let r = 2.0 * resid / m;
            match &self.arch {
                Architecture::Fusion { k, functions, context } => {
                    // ∂ŷ/∂f_i = c_i, ∂ŷ/∂c_i = f_i
                    for (z, ((_, net), trace)) in functions.iter().zip(&st.fun).enumerate() {
                        dbuf.clear();
                        dbuf.extend(st.ctx.output[z * k..(z + 1) * k].iter().map(|c| r * c));
                        net.backward(p, &dbuf, slope, trace, &mut grads, &mut scratch);
                    }
                    dbuf.clear();
                    dbuf.extend(st.f_concat.iter().map(|f| r * f));
                    context.backward(p, &dbuf, slope, &st.ctx, &mut grads, &mut scratch);
                }
                Architecture::Concat { net, .. } => {
                    net.backward(p, &[r], slope, &st.ctx, &mut grads, &mut scratch);
                }
            }
        }
        Ok((loss / m, grads))
    }

    /// Bias range of the output layer of function network `group`, or of the
    /// context network when `group` is `None`.
    pub fn output_bias(&self, group: Option<FeatureGroup>) -> Option<Range<usize>> {
        match (&self.arch, group) {
            (Architecture::Fusion { functions, .. }, Some(g)) => functions
                .iter()
                .find(|(fg, _)| *fg == g)
                .map(|(_, n)| n.layers.last().expect("non-empty").bias_range()),
            (Architecture::Fusion { context, .. }, None) => {
                Some(context.layers.last().expect("non-empty").bias_range())
            }
            (Architecture::Concat { net, .. }, None) => Some(net.layers.last().expect("non-empty").bias_range()),
            _ => None,
        }
    }
}

#[derive(Debug, Default)]
struct SampleState {
    fun: Vec<Trace>,
    ctx: Trace,
    f_concat: Vec<f64>,
    xi: Vec<f64>,
}

