//! Flat parameter storage with named views.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::VerifierConfig;

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamLayout {
    /// Per block: weights `[out, in, 3, 3]` and bias `[out]`.
    pub conv: Vec<(Range<usize>, Range<usize>)>,
    /// `[2 * D, d_att]`, `[D, d_att]`, `[2 * D, d_att]`, `[D, d_att]`.
    pub attention: Option<[Range<usize>; 4]>,
    /// Content head `[2, L]` and `[2]`.
    pub w1: Range<usize>,
    pub b1: Range<usize>,
    /// Spatial head `[L]` and `[1]`.
    pub w2: Range<usize>,
    pub b2: Range<usize>,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(cfg: &VerifierConfig) -> Self {
        let mut next = 0;
        let mut take = |n: usize| {
            let r = next..next + n;
            next += n;
            r
        };
        let mut conv = Vec::new();
        let mut c_in = 3;
        for &c_out in &cfg.encoder.channels {
            conv.push((take(c_out * c_in * 9), take(c_out)));
            c_in = c_out;
        }
        let d = cfg.d_flat();
        let a = cfg.d_att;
        let attention = cfg
            .use_attention
            .then(|| [take(2 * d * a), take(d * a), take(2 * d * a), take(d * a)]);
        let l = cfg.fused_len();
        let w1 = take(2 * l);
        let b1 = take(2);
        let w2 = take(l);
        let b2 = take(1);
        Self {
            conv,
            attention,
            w1,
            b1,
            w2,
            b2,
            total: next,
        }
    }

    /// Named ranges, in storage order.
    pub fn named(&self) -> Vec<(String, Range<usize>)> {
        let mut out = Vec::new();
        for (i, (w, b)) in self.conv.iter().enumerate() {
            out.push((format!("conv{i}.weight"), w.clone()));
            out.push((format!("conv{i}.bias"), b.clone()));
        }
        if let Some(att) = &self.attention {
            for (name, r) in ["w_c1", "w_c2", "w_s1", "w_s2"].iter().zip(att) {
                out.push((name.to_string(), r.clone()));
            }
        }
        out.push(("w1".into(), self.w1.clone()));
        out.push(("b1".into(), self.b1.clone()));
        out.push(("w2".into(), self.w2.clone()));
        out.push(("b2".into(), self.b2.clone()));
        out
    }

    /// Ranges that only the content head's loss reaches.
    pub fn content_only(&self) -> Vec<Range<usize>> {
        let mut v = vec![self.w1.clone(), self.b1.clone()];
        if let Some(att) = &self.attention {
            v.push(att[0].clone());
            v.push(att[1].clone());
        }
        v
    }

    /// Ranges that only the spatial head's loss reaches.
    pub fn spatial_only(&self) -> Vec<Range<usize>> {
        let mut v = vec![self.w2.clone(), self.b2.clone()];
        if let Some(att) = &self.attention {
            v.push(att[2].clone());
            v.push(att[3].clone());
        }
        v
    }
}

/// Fan-in scaled normal init (He for conv blocks, LeCun for projections
/// and heads); biases start at zero.
pub fn init_params(layout: &ParamLayout, cfg: &VerifierConfig, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; layout.total];
    let mut fill = |r: &Range<usize>, fan_in: usize, gain: f64| {
        let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("positive std");
        for v in &mut values[r.clone()] {
            *v = normal.sample(&mut rng);
        }
    };
    let mut c_in = 3;
    for ((w, _), &c_out) in layout.conv.iter().zip(&cfg.encoder.channels) {
        fill(w, c_in * 9, 2.0);
        c_in = c_out;
    }
    let d = cfg.d_flat();
    if let Some(att) = &layout.attention {
        fill(&att[0], 2 * d, 1.0);
        fill(&att[1], d, 1.0);
        fill(&att[2], 2 * d, 1.0);
        fill(&att[3], d, 1.0);
    }
    let l = cfg.fused_len();
    fill(&layout.w1, l, 1.0);
    fill(&layout.w2, l, 1.0);
    values
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_covers_every_tensor_once() {
        let cfg = VerifierConfig::default();
        let layout = ParamLayout::new(&cfg);
        let named = layout.named();
        let mut end = 0;
        for (_, r) in &named {
            assert_eq!(r.start, end);
            end = r.end;
        }
        assert_eq!(end, layout.total);
        let d = 512;
        let att = layout.attention.as_ref().unwrap();
        assert_eq!(att[0].len(), 2 * d * 30);
        assert_eq!(att[1].len(), d * 30);
        assert_eq!(layout.w1.len(), 2 * (3 * d + 30));
    }

    #[test]
    fn ablated_layout_has_no_attention() {
        let cfg = VerifierConfig { use_attention: false, ..VerifierConfig::default() };
        let layout = ParamLayout::new(&cfg);
        assert!(layout.attention.is_none());
        assert_eq!(layout.w2.len(), 3 * 512);
    }

    #[test]
    fn init_is_seeded() {
        let cfg = VerifierConfig::default();
        let layout = ParamLayout::new(&cfg);
        assert_eq!(init_params(&layout, &cfg, 4), init_params(&layout, &cfg, 4));
        assert_ne!(init_params(&layout, &cfg, 4), init_params(&layout, &cfg, 5));
    }
}
