//! Dense and strided 2x2 convolution layers over flat parameter slices.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dataset::Shape;

pub const KERNEL: usize = 2;
pub const STRIDE: usize = 2;

#[inline]
pub fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

#[inline]
pub fn leaky_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

/// Output size of the strided 2x2 convolution along one axis. Axes shorter
/// than the kernel are zero-padded up to it first.
pub fn conv_out_dim(n: usize) -> usize {
    let padded = n.max(KERNEL);
    (padded - KERNEL) / STRIDE + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LayerKind {
    Dense { input: usize, output: usize },
    Conv { input: Shape, output: Shape },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub kind: LayerKind,
    /// Offset of this layer's weights in the flat parameter vector; biases
    /// follow the weights.
    pub offset: usize,
    pub activation: bool,
}

impl Layer {
    pub fn dense(input: usize, output: usize, activation: bool) -> Self {
        Layer { kind: LayerKind::Dense { input, output }, offset: 0, activation }
    }

    pub fn conv(input: Shape, out_channels: usize) -> Self {
        let output = Shape::new(out_channels, conv_out_dim(input.height), conv_out_dim(input.width));
        Layer { kind: LayerKind::Conv { input, output }, offset: 0, activation: true }
    }

    pub fn input_len(&self) -> usize {
        match self.kind {
            LayerKind::Dense { input, .. } => input,
            LayerKind::Conv { input, .. } => input.len(),
        }
    }

    pub fn output_len(&self) -> usize {
        match self.kind {
            LayerKind::Dense { output, .. } => output,
            LayerKind::Conv { output, .. } => output.len(),
        }
    }

    pub fn weight_count(&self) -> usize {
        match self.kind {
            LayerKind::Dense { input, output } => input * output,
            LayerKind::Conv { input, output } => {
                output.channels * input.channels * KERNEL * KERNEL
            }
        }
    }

    pub fn bias_count(&self) -> usize {
        match self.kind {
            LayerKind::Dense { output, .. } => output,
            LayerKind::Conv { output, .. } => output.channels,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.bias_count()
    }

    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Dense { input, .. } => input,
            LayerKind::Conv { input, .. } => input.channels * KERNEL * KERNEL,
        }
    }

    pub fn bias_range(&self) -> core::ops::Range<usize> {
        let start = self.offset + self.weight_count();
        start..start + self.bias_count()
    }

    /// Writes the pre-activation into `pre`.
    pub fn forward(&self, params: &[f64], x: &[f64], pre: &mut Vec<f64>) {
        let w = &params[self.offset..self.offset + self.weight_count()];
        let b = &params[self.bias_range()];
        pre.clear();
        match self.kind {
            LayerKind::Dense { input, output } => {
                for o in 0..output {
                    let row = &w[o * input..(o + 1) * input];
                    let mut acc = b[o];
                    for (wi, xi) in row.iter().zip(x) {
                        acc += wi * xi;
                    }
                    pre.push(acc);
                }
            }
            LayerKind::Conv { input, output } => {
                let (ic, ih, iw) = (input.channels, input.height, input.width);
                for oc in 0..output.channels {
                    for oy in 0..output.height {
                        for ox in 0..output.width {
                            let mut acc = b[oc];
                            for c in 0..ic {
                                for ky in 0..KERNEL {
                                    let y = oy * STRIDE + ky;
                                    if y >= ih {
                                        continue;
                                    }
                                    for kx in 0..KERNEL {
                                        let xx = ox * STRIDE + kx;
                                        if xx >= iw {
                                            continue;
                                        }
                                        let wk = w[((oc * ic + c) * KERNEL + ky) * KERNEL + kx];
                                        acc += wk * x[(c * ih + y) * iw + xx];
                                    }
                                }
                            }
                            pre.push(acc);
                        }
                    }
                }
            }
        }
    }

    /// Accumulates parameter gradients into `grads` and writes the input
    /// gradient into `dx`. `dz` is the gradient w.r.t. the pre-activation.
    pub fn backward(&self, params: &[f64], x: &[f64], dz: &[f64], grads: &mut [f64], dx: &mut Vec<f64>) {
        let wc = self.weight_count();
        let w = &params[self.offset..self.offset + wc];
        dx.clear();
        dx.resize(self.input_len(), 0.0);
        match self.kind {
            LayerKind::Dense { input, output } => {
                let (gw, gb) = grads[self.offset..self.offset + wc + output].split_at_mut(wc);
                for o in 0..output {
                    let d = dz[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let row = &w[o * input..(o + 1) * input];
                    let grow = &mut gw[o * input..(o + 1) * input];
                    for i in 0..input {
                        grow[i] += d * x[i];
                        dx[i] += row[i] * d;
                    }
                }
            }
            LayerKind::Conv { input, output } => {
                let (ic, ih, iw) = (input.channels, input.height, input.width);
                let bc = output.channels;
                let (gw, gb) = grads[self.offset..self.offset + wc + bc].split_at_mut(wc);
                let mut idx = 0;
                for oc in 0..output.channels {
                    for oy in 0..output.height {
                        for ox in 0..output.width {
                            let d = dz[idx];
                            idx += 1;
                            if d == 0.0 {
                                continue;
                            }
                            gb[oc] += d;
                            for c in 0..ic {
                                for ky in 0..KERNEL {
                                    let y = oy * STRIDE + ky;
                                    if y >= ih {
                                        continue;
                                    }
                                    for kx in 0..KERNEL {
                                        let xx = ox * STRIDE + kx;
                                        if xx >= iw {
                                            continue;
                                        }
                                        let wi = ((oc * ic + c) * KERNEL + ky) * KERNEL + kx;
                                        let xi = (c * ih + y) * iw + xx;
                                        gw[wi] += d * x[xi];
                                        dx[xi] += w[wi] * d;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}
