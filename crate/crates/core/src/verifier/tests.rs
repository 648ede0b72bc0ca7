use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn tiny(use_attention: bool, swap: bool) -> VerifierConfig {
    VerifierConfig {
        encoder: EncoderSpec { resolution: 8, channels: vec![3, 4], grid: 2 },
        d_att: 3,
        use_attention,
        swap_fusion_streams: swap,
        dropout: 0.3,
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn random_inputs(rng: &mut ChaCha8Rng, r: usize) -> StreamInputs {
    StreamInputs {
        fg: random_vec(rng, 3 * r * r, 0.0, 1.0),
        bg: random_vec(rng, 3 * r * r, 0.0, 1.0),
        parsing: random_vec(rng, 3 * r * r, 0.0, 1.0),
    }
}

fn sample_loss(v: &Verifier, inputs: &StreamInputs, t: &Targets, lambda: f64, masks: Option<&DropoutMasks>) -> f64 {
    let h: Vec<FeatureMap> = [&inputs.fg, &inputs.bg, &inputs.parsing]
        .iter()
        .map(|x| v.encode_planar(x).unwrap())
        .collect();
    v.loss_features(&h[0].data, &h[1].data, &h[2].data, t, lambda, masks).total
}

#[test]
fn zero_final_layer_gives_zero_features() {
    let cfg = VerifierConfig::default();
    let mut v = Verifier::new(cfg.clone(), 1).unwrap();
    let (w, b) = v.layout().conv.last().unwrap().clone();
    v.params_mut()[w].fill(0.0);
    v.params_mut()[b].fill(0.0);
    let img = Image::black(64, 64).unwrap();
    let fm = v.encode(&img).unwrap();
    assert_eq!(fm.data.len(), 512);
    assert!(fm.data.iter().all(|&x| x == 0.0));
    assert!(v.encode(&Image::black(32, 32).unwrap()).is_err());
}

#[test]
fn identical_images_identical_features() {
    let v = Verifier::new(VerifierConfig::default(), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let img = Image::from_rgb(64, 64, random_vec(&mut rng, 64 * 64 * 3, 0.0, 1.0)).unwrap();
    assert_eq!(v.encode(&img).unwrap(), v.encode(&img.clone()).unwrap());
}

#[test]
fn shared_max_of_equal_maps_is_identity() {
    let m = FeatureMap { channels: 2, side: 2, data: vec![0.1, -0.4, 3.0, 0.0, 1.0, 2.0, 5.0, -1.0] };
    assert_eq!(shared_max(&m, &m, &m).unwrap(), m);
    let other = FeatureMap { channels: 1, side: 2, data: vec![0.0; 4] };
    assert!(shared_max(&m, &m, &other).is_err());
}

#[test]
fn fused_lengths_and_brute_force_max() {
    let cfg = VerifierConfig {
        encoder: EncoderSpec { resolution: 4, channels: vec![2], grid: 2 },
        d_att: 5,
        ..VerifierConfig::default()
    };
    let v = Verifier::new(cfg, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let maps: Vec<FeatureMap> = (0..3)
            .map(|_| FeatureMap { channels: 2, side: 2, data: random_vec(&mut rng, 8, -1.0, 1.0) })
            .collect();
        let (bundle, fused) = v.fuse(&maps[0], &maps[1], &maps[2]).unwrap();
        for i in 0..8 {
            let mut m = maps[0].data[i];
            for s in &maps[1..] {
                if s.data[i] > m {
                    m = s.data[i];
                }
            }
            assert_eq!(bundle.h_hat.data[i], m);
        }
        assert_eq!(fused.u_c.len(), 3 * 8 + 5);
        assert_eq!(fused.u_s.len(), 3 * 8 + 5);
        // crossed layout: U_C carries h_S, U_S carries h_B
        assert_eq!(&fused.u_c[8..16], &maps[2].data[..]);
        assert_eq!(&fused.u_s[8..16], &maps[1].data[..]);
    }
}

#[test]
fn swapped_streams_uncross_the_heads() {
    let v = Verifier::new(tiny(true, true), 3).unwrap();
    let maps: Vec<FeatureMap> = (0..3)
        .map(|k| FeatureMap { channels: 4, side: 2, data: vec![k as f64; 16] })
        .collect();
    let (_, fused) = v.fuse(&maps[0], &maps[1], &maps[2]).unwrap();
    assert!(fused.u_c[16..32].iter().all(|&x| x == 1.0));
    assert!(fused.u_s[16..32].iter().all(|&x| x == 2.0));
}

#[test]
fn zero_projections_zero_attention() {
    let mut v = Verifier::new(tiny(true, false), 4).unwrap();
    let att = v.layout().attention.clone().unwrap();
    for r in att {
        v.params_mut()[r].fill(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let maps: Vec<FeatureMap> = (0..3)
        .map(|_| FeatureMap { channels: 4, side: 2, data: random_vec(&mut rng, 16, 0.0, 1.0) })
        .collect();
    let (_, fused) = v.fuse(&maps[0], &maps[1], &maps[2]).unwrap();
    assert!(fused.u_c[32..35].iter().all(|&x| x == 0.0));
    assert!(fused.u_s[32..35].iter().all(|&x| x == 0.0));
}

#[test]
fn predict_with_zero_and_hand_set_heads() {
    let mut v = Verifier::new(tiny(true, false), 5).unwrap();
    let lay = v.layout().clone();
    for r in [lay.w1.clone(), lay.b1.clone(), lay.w2.clone(), lay.b2.clone()] {
        v.params_mut()[r].fill(0.0);
    }
    let l = v.config().fused_len();
    let fused = FusedPair { u_c: vec![0.7; l], u_s: vec![-0.2; l] };
    let out = v.predict(&fused).unwrap();
    assert_eq!(out, VerifierOutput { y_c: 0.5, y_s: 0.5 });
    v.params_mut()[lay.b1.start] = 2.0;
    let out = v.predict(&fused).unwrap();
    let e2 = 2f64.exp();
    assert!((out.y_c - e2 / (e2 + 1.0)).abs() < 1e-12);
    assert!((out.y_c - 0.8808).abs() < 1e-4);
    assert!(v.predict(&FusedPair { u_c: vec![0.0; 3], u_s: vec![0.0; l] }).is_err());
}

#[test]
fn loss_examples() {
    let out = VerifierOutput { y_c: 0.5, y_s: 0.3 };
    let parts = loss(&out, true, 0.3, 0.7, false);
    assert_eq!(parts.spatial, 0.0);
    assert!((parts.total - 0.7 * 2f64.ln()).abs() < 1e-15);
    let out = VerifierOutput { y_c: 0.9, y_s: 0.4 };
    let half = loss(&out, false, 0.8, 0.5, false);
    assert!((half.total - (half.content + half.spatial) / 2.0).abs() < 1e-15);
    let masked = loss(&out, false, 0.8, 0.5, true);
    assert_eq!(masked.spatial, 0.0);
    // exact probabilities are clamped, not infinite
    let sure = loss(&VerifierOutput { y_c: 1.0, y_s: 0.5 }, false, 0.5, 1.0, false);
    assert!(sure.total.is_finite() && sure.total > 15.0);
    let perfect = loss(&VerifierOutput { y_c: 1.0, y_s: 0.25 }, true, 0.25, 0.5, false);
    assert!(perfect.total < 1e-6);
}

#[test]
fn ablated_model_has_plain_fusion() {
    let v = Verifier::new(tiny(false, false), 6).unwrap();
    assert!(v.layout().attention.is_none());
    let maps: Vec<FeatureMap> = (0..3).map(|_| FeatureMap { channels: 4, side: 2, data: vec![0.5; 16] }).collect();
    let (_, fused) = v.fuse(&maps[0], &maps[1], &maps[2]).unwrap();
    assert_eq!(fused.u_c.len(), 48);
}

/// Central finite differences against the analytic gradient on every
/// parameter of a tiny model, with and without attention, dropout, stream
/// swapping and spatial masking.
#[test]
fn analytic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let variants = [(true, false, false, false), (true, true, true, false), (false, false, true, true), (true, false, false, true)];
    for (k, &(att, swap, use_dropout, mask)) in variants.iter().enumerate() {
        let mut v = Verifier::new(tiny(att, swap), 100 + k as u64).unwrap();
        // larger head weights so every branch carries signal
        let l = v.layout().clone();
        for r in [l.w1.clone(), l.w2.clone()] {
            for x in &mut v.params_mut()[r] {
                *x *= 4.0;
            }
        }
        // keep ReLUs away from their kink, where differences are meaningless
        for (_, b) in &l.conv {
            v.params_mut()[b.clone()].fill(0.5);
        }
        let inputs = random_inputs(&mut rng, 8);
        let targets = Targets { content_label: k % 2 == 0, spatial_target: 0.3, mask_spatial: mask };
        let masks = use_dropout.then(|| DropoutMasks::sample(&mut rng, v.config().fused_len(), 0.3));
        let lambda = 0.4;
        let (_, _, grad) = v.loss_and_grad(&inputs, &targets, lambda, masks.as_ref()).unwrap();
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        let mut worst_at = 0;
        for i in 0..v.params().len() {
            let orig = v.params()[i];
            v.params_mut()[i] = orig + h;
            let up = sample_loss(&v, &inputs, &targets, lambda, masks.as_ref());
            v.params_mut()[i] = orig - h;
            let down = sample_loss(&v, &inputs, &targets, lambda, masks.as_ref());
            v.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let err = (fd - grad[i]).abs() / (fd.abs().max(grad[i].abs()).max(1e-6));
            if err > worst {
                worst = err;
                worst_at = i;
            }
        }
        let name = v.layout().named().into_iter().find(|(_, r)| r.contains(&worst_at)).unwrap().0;
        assert!(worst < 1e-3, "variant {k}: worst relative error {worst} at {name}[{worst_at}]");
        if mask {
            for r in l.spatial_only() {
                assert!(grad[r].iter().all(|&g| g == 0.0));
            }
        }
    }
}

#[test]
fn forward_is_deterministic_and_bounded() {
    let v = Verifier::new(VerifierConfig::default(), 8).unwrap();
    let scene = &crate::dataforge::synth::synth_corpus(1, 2, 64, 64, 3).unwrap()[0];
    let p = scene.fg.origin_placement();
    let a = v.forward(&scene.fg, &p, &scene.bg, &scene.parsing).unwrap();
    let b = v.forward(&scene.fg, &p, &scene.bg, &scene.parsing).unwrap();
    assert_eq!(a, b);
    assert!((0.0..=1.0).contains(&a.y_c) && a.y_s > 0.0 && a.y_s < 1.0);
}

#[test]
fn sub_pixel_move_without_render_change_keeps_output() {
    let v = Verifier::new(VerifierConfig::default(), 8).unwrap();
    let scene = &crate::dataforge::synth::synth_corpus(1, 2, 64, 64, 3).unwrap()[0];
    let fg = ForegroundPatch::new(Image::filled(6, 12, [0.9, 0.2, 0.1]).unwrap(), vec![1.0; 72], (32.0, 40.0)).unwrap();
    let p = Placement::new(32.0, 40.0, 1.0).unwrap();
    let q = Placement::new(32.2, 40.1, 1.0).unwrap();
    let ra = render_foreground_canvas(&fg, &p, 64, 64).unwrap();
    let rb = render_foreground_canvas(&fg, &q, 64, 64).unwrap();
    assert_eq!(ra, rb, "oracle: renders must agree first");
    assert_eq!(v.forward(&fg, &p, &scene.bg, &scene.parsing).unwrap(), v.forward(&fg, &q, &scene.bg, &scene.parsing).unwrap());
}

#[test]
fn shared_background_gradient_equals_per_sample_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let v = Verifier::new(tiny(true, false), 4).unwrap();
    let base = random_inputs(&mut rng, 8);
    let fgs: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, 3 * 64, 0.0, 1.0)).collect();
    let masks: Vec<DropoutMasks> = (0..3).map(|_| DropoutMasks::sample(&mut rng, v.config().fused_len(), 0.3)).collect();
    let targets: Vec<Targets> = (0..3)
        .map(|k| Targets { content_label: k != 1, spatial_target: 0.2 * k as f64, mask_spatial: false })
        .collect();
    let mut want = vec![0.0; v.layout().total];
    let mut want_loss = Vec::new();
    for k in 0..3 {
        let inputs = StreamInputs { fg: fgs[k].clone(), ..base.clone() };
        want_loss.push(v.accumulate_grad(&inputs, &targets[k], 0.5, Some(&masks[k]), &mut want).unwrap().0.total);
    }
    let items: Vec<SharedSample> = (0..3)
        .map(|k| SharedSample { fg: &fgs[k], targets: targets[k], dropout: Some(&masks[k]) })
        .collect();
    let mut got = vec![0.0; v.layout().total];
    let outs = v.accumulate_grad_shared(&base.bg, &base.parsing, &items, 0.5, &mut got).unwrap();
    for (o, w) in outs.iter().zip(&want_loss) {
        assert_eq!(o.0.total, *w);
    }
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0), "{g} vs {w}");
    }
    assert!(v.accumulate_grad_shared(&base.bg[1..], &base.parsing, &items, 0.5, &mut got).is_err());
}
