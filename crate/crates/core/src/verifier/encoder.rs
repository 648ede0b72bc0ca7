//! Shared convolutional encoder: stride-2 3x3 blocks with ReLU, then
//! adaptive average pooling. Convolutions are lowered to GEMM via im2col.

use super::config::EncoderSpec;
use super::linalg::gemm;
use super::params::ParamLayout;

/// A `channels x side x side` activation, channel-planar.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub side: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.side, self.side)
    }
}

struct BlockTrace {
    in_side: usize,
    out_side: usize,
    c_in: usize,
    cols: Vec<f64>,
    /// post-ReLU output, doubles as the activation mask
    out: Vec<f64>,
}

/// Intermediate values kept for the backward pass.
pub(crate) struct EncoderTrace {
    blocks: Vec<BlockTrace>,
}

fn im2col(input: &[f64], c_in: usize, side: usize, out_side: usize) -> Vec<f64> {
    let p = out_side * out_side;
    let mut cols = vec![0.0; c_in * 9 * p];
    for c in 0..c_in {
        let plane = &input[c * side * side..(c + 1) * side * side];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[((c * 9) + ky * 3 + kx) * p..][..p];
                for oy in 0..out_side {
                    let iy = (oy * 2 + ky) as isize - 1;
                    if iy < 0 || iy >= side as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * side..][..side];
                    for ox in 0..out_side {
                        let ix = (ox * 2 + kx) as isize - 1;
                        if ix >= 0 && ix < side as isize {
                            row[oy * out_side + ox] = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], c_in: usize, side: usize, out_side: usize) -> Vec<f64> {
    let p = out_side * out_side;
    let mut out = vec![0.0; c_in * side * side];
    for c in 0..c_in {
        let plane = &mut out[c * side * side..(c + 1) * side * side];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[((c * 9) + ky * 3 + kx) * p..][..p];
                for oy in 0..out_side {
                    let iy = (oy * 2 + ky) as isize - 1;
                    if iy < 0 || iy >= side as isize {
                        continue;
                    }
                    for ox in 0..out_side {
                        let ix = (ox * 2 + kx) as isize - 1;
                        if ix >= 0 && ix < side as isize {
                            plane[iy as usize * side + ix as usize] += row[oy * out_side + ox];
                        }
                    }
                }
            }
        }
    }
    out
}

fn pool_bounds(i: usize, input: usize, output: usize) -> (usize, usize) {
    let start = i * input / output;
    let end = ((i + 1) * input).div_ceil(output);
    (start, end)
}

fn adaptive_pool(input: &[f64], channels: usize, side: usize, grid: usize) -> Vec<f64> {
    if side == grid {
        return input.to_vec();
    }
    let mut out = vec![0.0; channels * grid * grid];
    for c in 0..channels {
        let plane = &input[c * side * side..][..side * side];
        for gy in 0..grid {
            let (y0, y1) = pool_bounds(gy, side, grid);
            for gx in 0..grid {
                let (x0, x1) = pool_bounds(gx, side, grid);
                let mut sum = 0.0;
                for y in y0..y1 {
                    sum += plane[y * side + x0..y * side + x1].iter().sum::<f64>();
                }
                out[(c * grid + gy) * grid + gx] = sum / ((y1 - y0) * (x1 - x0)) as f64;
            }
        }
    }
    out
}

fn adaptive_pool_backward(d_out: &[f64], channels: usize, side: usize, grid: usize) -> Vec<f64> {
    if side == grid {
        return d_out.to_vec();
    }
    let mut d_in = vec![0.0; channels * side * side];
    for c in 0..channels {
        for gy in 0..grid {
            let (y0, y1) = pool_bounds(gy, side, grid);
            for gx in 0..grid {
                let (x0, x1) = pool_bounds(gx, side, grid);
                let g = d_out[(c * grid + gy) * grid + gx] / ((y1 - y0) * (x1 - x0)) as f64;
                for y in y0..y1 {
                    for v in &mut d_in[c * side * side + y * side + x0..c * side * side + y * side + x1] {
                        *v += g;
                    }
                }
            }
        }
    }
    d_in
}

/// Runs the encoder on a planar `3 x R x R` input.
pub(crate) fn encode(spec: &EncoderSpec, layout: &ParamLayout, params: &[f64], input: &[f64], keep_trace: bool) -> (FeatureMap, Option<EncoderTrace>) {
    let mut side = spec.resolution;
    let mut c_in = 3;
    let mut act = input.to_vec();
    let mut blocks = Vec::new();
    for ((w_r, b_r), &c_out) in layout.conv.iter().zip(&spec.channels) {
        let out_side = side.div_ceil(2);
        let p = out_side * out_side;
        let cols = im2col(&act, c_in, side, out_side);
        let mut out = vec![0.0; c_out * p];
        gemm(c_out, c_in * 9, p, &params[w_r.clone()], false, &cols, false, 0.0, &mut out);
        let bias = &params[b_r.clone()];
        for (row, &b) in out.chunks_exact_mut(p).zip(bias) {
            for v in row {
                *v = (*v + b).max(0.0);
            }
        }
        if keep_trace {
            blocks.push(BlockTrace {
                in_side: side,
                out_side,
                c_in,
                cols,
                out: out.clone(),
            });
        }
        act = out;
        side = out_side;
        c_in = c_out;
    }
    let data = adaptive_pool(&act, c_in, side, spec.grid);
    let fm = FeatureMap {
        channels: c_in,
        side: spec.grid,
        data,
    };
    (fm, keep_trace.then_some(EncoderTrace { blocks }))
}

/// Accumulates parameter gradients given the gradient of the pooled output.
pub(crate) fn encode_backward(spec: &EncoderSpec, layout: &ParamLayout, params: &[f64], trace: &EncoderTrace, d_features: &[f64], grad: &mut [f64]) {
    let last = trace.blocks.last().expect("encoder has blocks");
    let mut d_act = adaptive_pool_backward(d_features, spec.out_channels(), last.out_side, spec.grid);
    for (i, block) in trace.blocks.iter().enumerate().rev() {
        let (w_r, b_r) = &layout.conv[i];
        let c_out = spec.channels[i];
        let p = block.out_side * block.out_side;
        for (d, &o) in d_act.iter_mut().zip(&block.out) {
            if o <= 0.0 {
                *d = 0.0;
            }
        }
        for (gb, row) in grad[b_r.clone()].iter_mut().zip(d_act.chunks_exact(p)) {
            *gb += row.iter().sum::<f64>();
        }
        let k = block.c_in * 9;
        gemm(c_out, p, k, &d_act, false, &block.cols, true, 1.0, &mut grad[w_r.clone()]);
        if i == 0 {
            break;
        }
        let mut d_cols = vec![0.0; k * p];
        gemm(k, c_out, p, &params[w_r.clone()], true, &d_act, false, 0.0, &mut d_cols);
        d_act = col2im(&d_cols, block.c_in, block.in_side, block.out_side);
    }
}
