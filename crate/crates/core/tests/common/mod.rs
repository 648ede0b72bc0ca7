#![allow(dead_code)]

use std::collections::HashMap;

use art_core::dataforge::SceneTriple;
use art_core::imaging::{render_foreground_canvas, ForegroundPatch, Image, Placement};

const BINS: usize = 4;

/// Normalized joint RGB histogram, `BINS` levels per channel, with
/// per-pixel weights.
pub fn color_histogram(img: &Image, weights: Option<&[f64]>) -> Vec<f64> {
    let mut h = vec![0.0; BINS * BINS * BINS];
    let bin = |v: f64| ((v * BINS as f64) as usize).min(BINS - 1);
    let mut total = 0.0;
    for (i, px) in img.data().chunks_exact(3).enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        h[(bin(px[0]) * BINS + bin(px[1])) * BINS + bin(px[2])] += w;
        total += w;
    }
    h.iter_mut().for_each(|v| *v /= total.max(1e-12));
    h
}

fn nearest(centroids: &[(String, Vec<f64>)], h: &[f64]) -> String {
    let d = |c: &[f64]| c.iter().zip(h).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    centroids
        .iter()
        .min_by(|a, b| d(&a.1).total_cmp(&d(&b.1)))
        .map(|c| c.0.clone())
        .expect("at least one family")
}

fn centroids(items: &[(String, Vec<f64>)]) -> Vec<(String, Vec<f64>)> {
    let mut sums: HashMap<&str, (Vec<f64>, f64)> = HashMap::new();
    for (g, h) in items {
        let e = sums.entry(g).or_insert_with(|| (vec![0.0; h.len()], 0.0));
        e.0.iter_mut().zip(h).for_each(|(a, b)| *a += b);
        e.1 += 1.0;
    }
    let mut out: Vec<(String, Vec<f64>)> = sums
        .into_iter()
        .map(|(g, (s, n))| (g.to_string(), s.into_iter().map(|v| v / n).collect()))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Learnability oracle: nearest-centroid family classifiers on color
/// histograms of cut-outs and of backgrounds, fitted on the first 80% of
/// the triples. Returns the accuracy of "same family?" over every
/// (foreground, background) pair of the held-out 20%.
pub fn histogram_pair_accuracy(triples: &[SceneTriple]) -> f64 {
    let group = |t: &SceneTriple| t.group.clone().expect("synthetic triples carry a family");
    let fg_h = |t: &SceneTriple| color_histogram(t.fg.rgb(), Some(t.fg.alpha()));
    let bg_h = |t: &SceneTriple| color_histogram(&t.bg, None);
    let cut = triples.len() * 4 / 5;
    let (fit, held) = triples.split_at(cut);
    let fg_c = centroids(&fit.iter().map(|t| (group(t), fg_h(t))).collect::<Vec<_>>());
    let bg_c = centroids(&fit.iter().map(|t| (group(t), bg_h(t))).collect::<Vec<_>>());
    let fg_pred: Vec<String> = held.iter().map(|t| nearest(&fg_c, &fg_h(t))).collect();
    let bg_pred: Vec<String> = held.iter().map(|t| nearest(&bg_c, &bg_h(t))).collect();
    let mut correct = 0usize;
    for (i, a) in held.iter().enumerate() {
        for (j, b) in held.iter().enumerate() {
            if (group(a) == group(b)) == (fg_pred[i] == bg_pred[j]) {
                correct += 1;
            }
        }
    }
    correct as f64 / (held.len() * held.len()) as f64
}

/// Pixels a placed foreground touches: nonzero where the white-filled
/// patch lands on a black canvas.
pub fn support_mask(fg: &ForegroundPatch, p: &Placement, width: usize, height: usize) -> Vec<bool> {
    let white = ForegroundPatch::new(
        Image::filled(fg.width(), fg.height(), [1.0; 3]).unwrap(),
        fg.alpha().to_vec(),
        fg.origin_center(),
    )
    .unwrap();
    let canvas = render_foreground_canvas(&white, p, width, height).unwrap();
    canvas.data().chunks_exact(3).map(|px| px.iter().any(|&v| v != 0.0)).collect()
}

/// Count of off-support pixels that differ between two images.
pub fn off_support_mismatches(a: &Image, b: &Image, support: &[bool]) -> usize {
    a.data()
        .chunks_exact(3)
        .zip(b.data().chunks_exact(3))
        .zip(support)
        .filter(|((x, y), &s)| !s && x != y)
        .count()
}
