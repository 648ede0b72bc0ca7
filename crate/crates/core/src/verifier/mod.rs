//! The multitask verifier: a shared encoder over the foreground, background
//! and parsing streams, max-pooled sharing features with bi-attention
//! fusion, and two heads (content probability, spatial score).

mod checkpoint;
mod config;
mod encoder;
mod linalg;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use config::{EncoderSpec, VerifierConfig};
pub use encoder::FeatureMap;
pub use params::{init_params, ParamLayout};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ArtError, Result};
use crate::imaging::{prepare_encoder_input, render_foreground_canvas, ForegroundPatch, Image, ParsingMap, Placement};
use crate::scoring::{gelu, gelu_grad, sigmoid};
use encoder::EncoderTrace;
use linalg::gemm;

/// Probability clamp used inside the cross-entropy.
pub const PROB_EPS: f64 = 1e-7;

/// Encoder outputs of the three streams and their elementwise maximum.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureBundle {
    pub h_f: FeatureMap,
    pub h_b: FeatureMap,
    pub h_s: FeatureMap,
    pub h_hat: FeatureMap,
}

/// The two fused vectors fed to the content and spatial heads.
#[derive(Clone, Debug, PartialEq)]
pub struct FusedPair {
    pub u_c: Vec<f64>,
    pub u_s: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifierOutput {
    /// Probability that foreground and background are consistent.
    pub y_c: f64,
    /// Spatial consistency score.
    pub y_s: f64,
}

/// Combined loss and its two parts for one sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub content: f64,
    pub spatial: f64,
}

/// Supervision for one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Targets {
    pub content_label: bool,
    pub spatial_target: f64,
    /// Drop the spatial term for this sample.
    pub mask_spatial: bool,
}

/// Inverted-dropout multipliers for `U_C` and `U_S` (each entry 0 or
/// `1 / (1 - rate)`).
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks {
    pub content: Vec<f64>,
    pub spatial: Vec<f64>,
}

impl DropoutMasks {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, len: usize, rate: f64) -> Self {
        let keep = 1.0 / (1.0 - rate);
        let mut draw = || -> Vec<f64> {
            (0..len)
                .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
                .collect()
        };
        let content = draw();
        let spatial = draw();
        Self { content, spatial }
    }
}

/// Planar encoder inputs for the three streams at encoder resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamInputs {
    pub fg: Vec<f64>,
    pub bg: Vec<f64>,
    pub parsing: Vec<f64>,
}

/// One sample of a group sharing background and parsing streams.
#[derive(Clone, Copy, Debug)]
pub struct SharedSample<'a> {
    pub fg: &'a [f64],
    pub targets: Targets,
    pub dropout: Option<&'a DropoutMasks>,
}

/// Binary cross-entropy on the content probability plus squared error on
/// the spatial score, mixed by `lambda`.
pub fn loss(out: &VerifierOutput, content_label: bool, spatial_target: f64, lambda: f64, mask_spatial: bool) -> LossParts {
    let y_c = out.y_c.clamp(PROB_EPS, 1.0 - PROB_EPS);
    let delta = if content_label { 1.0 } else { 0.0 };
    let content = -(delta * y_c.ln() + (1.0 - delta) * (1.0 - y_c).ln());
    let spatial = if mask_spatial { 0.0 } else { (out.y_s - spatial_target).powi(2) };
    LossParts {
        total: lambda * content + (1.0 - lambda) * spatial,
        content,
        spatial,
    }
}

/// Elementwise maximum of three equally shaped feature maps.
pub fn shared_max(h_f: &FeatureMap, h_b: &FeatureMap, h_s: &FeatureMap) -> Result<FeatureMap> {
    if h_f.shape() != h_b.shape() || h_f.shape() != h_s.shape() || h_f.data.len() != h_b.data.len() || h_f.data.len() != h_s.data.len() {
        return Err(ArtError::Shape(format!(
            "streams disagree: {:?}, {:?}, {:?}",
            h_f.shape(),
            h_b.shape(),
            h_s.shape()
        )));
    }
    let data = h_f
        .data
        .iter()
        .zip(&h_b.data)
        .zip(&h_s.data)
        .map(|((f, b), s)| f.max(*b).max(*s))
        .collect();
    Ok(FeatureMap {
        channels: h_f.channels,
        side: h_f.side,
        data,
    })
}

/// Stream picked by the max at each position: 0 = F, 1 = B, 2 = S.
fn argmax3(f: f64, b: f64, s: f64) -> u8 {
    if f >= b && f >= s {
        0
    } else if b >= s {
        1
    } else {
        2
    }
}

/// Values needed to backpropagate through fusion and the heads.
struct HeadTrace {
    argmax: Vec<u8>,
    h_hat: Vec<f64>,
    /// (projection of stream pair, projection of h_hat, product) per branch
    att_c: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    att_s: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    u_c: Vec<f64>,
    u_s: Vec<f64>,
    y_c: f64,
    y_s: f64,
}

/// Gradients with respect to the three stream features.
struct StreamGrads {
    f: Vec<f64>,
    b: Vec<f64>,
    s: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Verifier {
    config: VerifierConfig,
    layout: ParamLayout,
    params: Vec<f64>,
}

impl Verifier {
    /// Fresh model with seeded fan-in scaled weights.
    pub fn new(config: VerifierConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        let params = init_params(&layout, &config, seed);
        Ok(Self { config, layout, params })
    }

    pub fn from_params(config: VerifierConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        if params.len() != layout.total {
            return Err(ArtError::Shape(format!(
                "architecture needs {} parameters, got {}",
                layout.total,
                params.len()
            )));
        }
        Ok(Self { config, layout, params })
    }

    pub fn config(&self) -> &VerifierConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn resolution(&self) -> usize {
        self.config.encoder.resolution
    }

    /// Encodes one image already at encoder resolution.
    pub fn encode(&self, img: &Image) -> Result<FeatureMap> {
        let r = self.resolution();
        if img.extent() != (r, r) {
            return Err(ArtError::Shape(format!(
                "encoder expects {r}x{r}, got {}x{}",
                img.width(),
                img.height()
            )));
        }
        self.encode_planar(&img.to_planar())
    }

    pub fn encode_planar(&self, planar: &[f64]) -> Result<FeatureMap> {
        let r = self.resolution();
        if planar.len() != 3 * r * r {
            return Err(ArtError::Shape(format!("encoder expects {} planar samples, got {}", 3 * r * r, planar.len())));
        }
        Ok(encoder::encode(&self.config.encoder, &self.layout, &self.params, planar, false).0)
    }

    fn check_stream(&self, h: &FeatureMap) -> Result<()> {
        if h.data.len() != self.config.d_flat() {
            return Err(ArtError::Shape(format!(
                "stream has {} features, model expects {}",
                h.data.len(),
                self.config.d_flat()
            )));
        }
        Ok(())
    }

    /// Sharing features, bi-attention and the two fused vectors.
    pub fn fuse(&self, h_f: &FeatureMap, h_b: &FeatureMap, h_s: &FeatureMap) -> Result<(FeatureBundle, FusedPair)> {
        let h_hat = shared_max(h_f, h_b, h_s)?;
        self.check_stream(h_f)?;
        let trace = self.head_forward(&h_f.data, &h_b.data, &h_s.data, None, false);
        let bundle = FeatureBundle {
            h_f: h_f.clone(),
            h_b: h_b.clone(),
            h_s: h_s.clone(),
            h_hat,
        };
        Ok((bundle, FusedPair { u_c: trace.u_c, u_s: trace.u_s }))
    }

    /// Applies the two heads to fused vectors.
    pub fn predict(&self, fused: &FusedPair) -> Result<VerifierOutput> {
        let l = self.config.fused_len();
        if fused.u_c.len() != l || fused.u_s.len() != l {
            return Err(ArtError::Shape(format!(
                "fused vectors of length {}/{} but heads take {l}",
                fused.u_c.len(),
                fused.u_s.len()
            )));
        }
        let (y_c, y_s) = self.heads(&fused.u_c, &fused.u_s);
        Ok(VerifierOutput { y_c, y_s })
    }

    fn heads(&self, u_c: &[f64], u_s: &[f64]) -> (f64, f64) {
        let p = &self.params;
        let l = u_c.len();
        let w1 = &p[self.layout.w1.clone()];
        let b1 = &p[self.layout.b1.clone()];
        let z0 = dot(&w1[..l], u_c) + b1[0];
        let z1 = dot(&w1[l..], u_c) + b1[1];
        let s = dot(&p[self.layout.w2.clone()], u_s) + p[self.layout.b2.start];
        (sigmoid(z0 - z1), sigmoid(s))
    }

    /// Full inference from already encoded streams.
    pub fn predict_features(&self, h_f: &[f64], h_b: &[f64], h_s: &[f64]) -> Result<VerifierOutput> {
        let d = self.config.d_flat();
        if h_f.len() != d || h_b.len() != d || h_s.len() != d {
            return Err(ArtError::Shape(format!("streams must have {d} features")));
        }
        let t = self.head_forward(h_f, h_b, h_s, None, false);
        Ok(VerifierOutput { y_c: t.y_c, y_s: t.y_s })
    }

    /// Renders the foreground at `p` on the background's canvas and
    /// resamples all three streams to encoder resolution.
    pub fn prepare_inputs(&self, fg: &ForegroundPatch, p: &Placement, bg: &Image, parsing: &ParsingMap) -> Result<StreamInputs> {
        if bg.extent() != parsing.extent() {
            return Err(ArtError::Shape("background and parsing map differ in extent".into()));
        }
        let r = self.resolution();
        let canvas = render_foreground_canvas(fg, p, bg.width(), bg.height())?;
        Ok(StreamInputs {
            fg: prepare_encoder_input(&canvas, r).to_planar(),
            bg: prepare_encoder_input(bg, r).to_planar(),
            parsing: prepare_encoder_input(&parsing.to_rgb(), r).to_planar(),
        })
    }

    /// End-to-end inference for a foreground placed on a background.
    pub fn forward(&self, fg: &ForegroundPatch, p: &Placement, bg: &Image, parsing: &ParsingMap) -> Result<VerifierOutput> {
        let inputs = self.prepare_inputs(fg, p, bg, parsing)?;
        self.forward_inputs(&inputs)
    }

    pub fn forward_inputs(&self, inputs: &StreamInputs) -> Result<VerifierOutput> {
        let h_f = self.encode_planar(&inputs.fg)?;
        let h_b = self.encode_planar(&inputs.bg)?;
        let h_s = self.encode_planar(&inputs.parsing)?;
        self.predict_features(&h_f.data, &h_b.data, &h_s.data)
    }

    /// Loss and full parameter gradient for one sample, through the encoder.
    pub fn loss_and_grad(&self, inputs: &StreamInputs, targets: &Targets, lambda: f64, dropout: Option<&DropoutMasks>) -> Result<(LossParts, VerifierOutput, Vec<f64>)> {
        let mut grad = vec![0.0; self.layout.total];
        let (parts, out) = self.accumulate_grad(inputs, targets, lambda, dropout, &mut grad)?;
        Ok((parts, out, grad))
    }

    /// Like [`Self::loss_and_grad`] but adds into `grad`.
    pub fn accumulate_grad(&self, inputs: &StreamInputs, targets: &Targets, lambda: f64, dropout: Option<&DropoutMasks>, grad: &mut [f64]) -> Result<(LossParts, VerifierOutput)> {
        let r = self.resolution();
        for s in [&inputs.fg, &inputs.bg, &inputs.parsing] {
            if s.len() != 3 * r * r {
                return Err(ArtError::Shape(format!("stream input must be 3x{r}x{r}")));
            }
        }
        let spec = &self.config.encoder;
        let enc = |x: &[f64]| encoder::encode(spec, &self.layout, &self.params, x, true);
        let (h_f, t_f) = enc(&inputs.fg);
        let (h_b, t_b) = enc(&inputs.bg);
        let (h_s, t_s) = enc(&inputs.parsing);
        let (parts, out, d) = self.head_backward(&h_f.data, &h_b.data, &h_s.data, targets, lambda, dropout, grad)?;
        let traces: [(EncoderTrace, &Vec<f64>); 3] = [(t_f.unwrap(), &d.f), (t_b.unwrap(), &d.b), (t_s.unwrap(), &d.s)];
        for (trace, d_h) in &traces {
            encoder::encode_backward(spec, &self.layout, &self.params, trace, d_h, grad);
        }
        Ok((parts, out))
    }

    /// Adds the summed gradient of several samples that share one background
    /// and parsing map. The shared streams are encoded and back-propagated
    /// once; the result equals summing [`Self::accumulate_grad`] per sample.
    pub fn accumulate_grad_shared(
        &self,
        bg: &[f64],
        parsing: &[f64],
        items: &[SharedSample<'_>],
        lambda: f64,
        grad: &mut [f64],
    ) -> Result<Vec<(LossParts, VerifierOutput)>> {
        let r = self.resolution();
        if bg.len() != 3 * r * r || parsing.len() != 3 * r * r || items.iter().any(|it| it.fg.len() != 3 * r * r) {
            return Err(ArtError::Shape(format!("stream input must be 3x{r}x{r}")));
        }
        let spec = &self.config.encoder;
        let enc = |x: &[f64]| encoder::encode(spec, &self.layout, &self.params, x, true);
        let (h_b, t_b) = enc(bg);
        let (h_s, t_s) = enc(parsing);
        let d = self.config.d_flat();
        let mut d_b = vec![0.0; d];
        let mut d_s = vec![0.0; d];
        let mut outs = Vec::with_capacity(items.len());
        for it in items {
            let (h_f, t_f) = enc(it.fg);
            let (parts, out, g) = self.head_backward(&h_f.data, &h_b.data, &h_s.data, &it.targets, lambda, it.dropout, grad)?;
            encoder::encode_backward(spec, &self.layout, &self.params, &t_f.unwrap(), &g.f, grad);
            add(&mut d_b, &g.b);
            add(&mut d_s, &g.s);
            outs.push((parts, out));
        }
        encoder::encode_backward(spec, &self.layout, &self.params, &t_b.unwrap(), &d_b, grad);
        encoder::encode_backward(spec, &self.layout, &self.params, &t_s.unwrap(), &d_s, grad);
        Ok(outs)
    }

    /// Loss and gradient with the encoder bypassed: the three streams are
    /// given as feature vectors. Encoder entries of the gradient stay zero.
    pub fn loss_and_grad_features(&self, h_f: &[f64], h_b: &[f64], h_s: &[f64], targets: &Targets, lambda: f64, dropout: Option<&DropoutMasks>) -> Result<(LossParts, Vec<f64>)> {
        let mut grad = vec![0.0; self.layout.total];
        let (parts, _, _) = self.head_backward(h_f, h_b, h_s, targets, lambda, dropout, &mut grad)?;
        Ok((parts, grad))
    }

    /// Loss of a sample given stream features (no gradient).
    pub fn loss_features(&self, h_f: &[f64], h_b: &[f64], h_s: &[f64], targets: &Targets, lambda: f64, dropout: Option<&DropoutMasks>) -> LossParts {
        let t = self.head_forward(h_f, h_b, h_s, dropout, false);
        loss(&VerifierOutput { y_c: t.y_c, y_s: t.y_s }, targets.content_label, targets.spatial_target, lambda, targets.mask_spatial)
    }

    fn head_forward(&self, h_f: &[f64], h_b: &[f64], h_s: &[f64], dropout: Option<&DropoutMasks>, keep: bool) -> HeadTrace {
        let d = h_f.len();
        let mut argmax = Vec::with_capacity(if keep { d } else { 0 });
        let h_hat: Vec<f64> = (0..d)
            .map(|i| {
                if keep {
                    argmax.push(argmax3(h_f[i], h_b[i], h_s[i]));
                }
                h_f[i].max(h_b[i]).max(h_s[i])
            })
            .collect();

        let (att_c, att_s) = match &self.layout.attention {
            Some([wc1, wc2, ws1, ws2]) => {
                let a = self.config.d_att;
                let branch = |second: &[f64], w_pair: &std::ops::Range<usize>, w_hat: &std::ops::Range<usize>| {
                    let mut proj = vec![0.0; a];
                    gemm(1, d, a, h_f, false, &self.params[w_pair.start..w_pair.start + d * a], false, 0.0, &mut proj);
                    gemm(1, d, a, second, false, &self.params[w_pair.start + d * a..w_pair.end], false, 1.0, &mut proj);
                    let mut gate = vec![0.0; a];
                    gemm(1, d, a, &h_hat, false, &self.params[w_hat.clone()], false, 0.0, &mut gate);
                    let z: Vec<f64> = proj.iter().zip(&gate).map(|(p, g)| p * g).collect();
                    (proj, gate, z)
                };
                (Some(branch(h_b, wc1, wc2)), Some(branch(h_s, ws1, ws2)))
            }
            None => (None, None),
        };

        let (c_second, s_second) = if self.config.swap_fusion_streams { (h_b, h_s) } else { (h_s, h_b) };
        let assemble = |second: &[f64], att: &Option<(Vec<f64>, Vec<f64>, Vec<f64>)>| {
            let mut u = Vec::with_capacity(self.config.fused_len());
            u.extend_from_slice(h_f);
            u.extend_from_slice(second);
            if let Some((_, _, z)) = att {
                u.extend(z.iter().map(|&v| gelu(v)));
            }
            u.extend_from_slice(&h_hat);
            u
        };
        let mut u_c = assemble(c_second, &att_c);
        let mut u_s = assemble(s_second, &att_s);
        if let Some(m) = dropout {
            u_c.iter_mut().zip(&m.content).for_each(|(u, k)| *u *= k);
            u_s.iter_mut().zip(&m.spatial).for_each(|(u, k)| *u *= k);
        }
        let (y_c, y_s) = self.heads(&u_c, &u_s);
        HeadTrace {
            argmax,
            h_hat,
            att_c,
            att_s,
            u_c,
            u_s,
            y_c,
            y_s,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn head_backward(&self, h_f: &[f64], h_b: &[f64], h_s: &[f64], targets: &Targets, lambda: f64, dropout: Option<&DropoutMasks>, grad: &mut [f64]) -> Result<(LossParts, VerifierOutput, StreamGrads)> {
        let d = self.config.d_flat();
        if h_f.len() != d || h_b.len() != d || h_s.len() != d {
            return Err(ArtError::Shape(format!("streams must have {d} features")));
        }
        let l = self.config.fused_len();
        if let Some(m) = dropout {
            if m.content.len() != l || m.spatial.len() != l {
                return Err(ArtError::Shape(format!("dropout masks must have length {l}")));
            }
        }
        let t = self.head_forward(h_f, h_b, h_s, dropout, true);
        let out = VerifierOutput { y_c: t.y_c, y_s: t.y_s };
        let parts = loss(&out, targets.content_label, targets.spatial_target, lambda, targets.mask_spatial);

        // logits gradients
        let delta = if targets.content_label { 1.0 } else { 0.0 };
        let clamped = t.y_c <= PROB_EPS || t.y_c >= 1.0 - PROB_EPS;
        let dz0 = if clamped { 0.0 } else { lambda * (t.y_c - delta) };
        let ds = if targets.mask_spatial {
            0.0
        } else {
            (1.0 - lambda) * 2.0 * (t.y_s - targets.spatial_target) * t.y_s * (1.0 - t.y_s)
        };

        let lay = &self.layout;
        let p = &self.params;
        {
            let gw1 = &mut grad[lay.w1.clone()];
            for i in 0..l {
                gw1[i] += dz0 * t.u_c[i];
                gw1[l + i] -= dz0 * t.u_c[i];
            }
        }
        grad[lay.b1.start] += dz0;
        grad[lay.b1.start + 1] -= dz0;
        {
            let gw2 = &mut grad[lay.w2.clone()];
            for i in 0..l {
                gw2[i] += ds * t.u_s[i];
            }
        }
        grad[lay.b2.start] += ds;

        let w1 = &p[lay.w1.clone()];
        let w2 = &p[lay.w2.clone()];
        let mut du_c: Vec<f64> = (0..l).map(|i| dz0 * (w1[i] - w1[l + i])).collect();
        let mut du_s: Vec<f64> = (0..l).map(|i| ds * w2[i]).collect();
        if let Some(m) = dropout {
            du_c.iter_mut().zip(&m.content).for_each(|(g, k)| *g *= k);
            du_s.iter_mut().zip(&m.spatial).for_each(|(g, k)| *g *= k);
        }

        let mut g = StreamGrads {
            f: vec![0.0; d],
            b: vec![0.0; d],
            s: vec![0.0; d],
        };
        let mut d_hat = vec![0.0; d];
        let a = if lay.attention.is_some() { self.config.d_att } else { 0 };
        let swap = self.config.swap_fusion_streams;
        // U = [h_F, second, gelu(z), h_hat]
        let mut split_fused = |du: &[f64], second_is_s: bool| -> Vec<f64> {
            add(&mut g.f, &du[..d]);
            if second_is_s {
                add(&mut g.s, &du[d..2 * d]);
            } else {
                add(&mut g.b, &du[d..2 * d]);
            }
            add(&mut d_hat, &du[2 * d + a..]);
            du[2 * d..2 * d + a].to_vec()
        };
        let dt_c = split_fused(&du_c, !swap);
        let dt_s = split_fused(&du_s, swap);

        if let Some([wc1, wc2, ws1, ws2]) = &lay.attention {
            let branches = [
                (t.att_c.as_ref().expect("attention trace"), &dt_c, wc1, wc2, false),
                (t.att_s.as_ref().expect("attention trace"), &dt_s, ws1, ws2, true),
            ];
            for ((proj, gate, z), dt, w_pair, w_hat, second_is_s) in branches {
                let dz: Vec<f64> = dt.iter().zip(z).map(|(g, &z)| g * gelu_grad(z)).collect();
                let d_proj: Vec<f64> = dz.iter().zip(gate).map(|(g, q)| g * q).collect();
                let d_gate: Vec<f64> = dz.iter().zip(proj).map(|(g, q)| g * q).collect();
                let second = if second_is_s { h_s } else { h_b };
                let (w_f, w_2) = (w_pair.start..w_pair.start + d * a, w_pair.start + d * a..w_pair.end);
                // weight gradients are outer products
                gemm(d, 1, a, h_f, true, &d_proj, false, 1.0, &mut grad[w_f.clone()]);
                gemm(d, 1, a, second, true, &d_proj, false, 1.0, &mut grad[w_2.clone()]);
                gemm(d, 1, a, &t.h_hat, true, &d_gate, false, 1.0, &mut grad[w_hat.clone()]);
                // input gradients
                gemm(1, a, d, &d_proj, false, &p[w_f], true, 1.0, &mut g.f);
                let g_second = if second_is_s { &mut g.s } else { &mut g.b };
                gemm(1, a, d, &d_proj, false, &p[w_2], true, 1.0, g_second);
                gemm(1, a, d, &d_gate, false, &p[w_hat.clone()], true, 1.0, &mut d_hat);
            }
        }

        for (i, &k) in t.argmax.iter().enumerate() {
            match k {
                0 => g.f[i] += d_hat[i],
                1 => g.b[i] += d_hat[i],
                _ => g.s[i] += d_hat[i],
            }
        }
        Ok((parts, out, g))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}

#[cfg(test)]
mod tests;
