//! Procedural desk-scale scenes.
//!
//! Each family has its own sky/ground colors, its own pair of parsing
//! classes and its own foreground color scheme, so whether a foreground
//! belongs on a background is decidable from color statistics alone. The
//! foreground stands on the ground with a darker standing spot under its
//! feet, which marks the original pose in the background.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SceneTriple;
use crate::error::{ArtError, Result};
use crate::imaging::{ForegroundPatch, Image, ParsingMap, Placement};

pub struct Family {
    pub name: &'static str,
    pub sky: [f64; 3],
    pub ground: [f64; 3],
    /// Body colour of the family's figures. It is far from every sky and
    /// ground colour, so a figure never blends into a scene and belonging
    /// has to be read from the pairing of palettes, whatever the pose.
    pub figure: [f64; 3],
}

pub const FAMILIES: [Family; 4] = [
    Family { name: "beach", sky: [0.55, 0.80, 0.95], ground: [0.90, 0.80, 0.55], figure: [0.95, 0.10, 0.55] },
    Family { name: "forest", sky: [0.70, 0.85, 0.70], ground: [0.20, 0.50, 0.15], figure: [0.50, 0.20, 0.85] },
    Family { name: "snow", sky: [0.75, 0.78, 0.88], ground: [0.93, 0.94, 0.97], figure: [0.05, 0.55, 0.60] },
    Family { name: "dusk", sky: [0.15, 0.08, 0.30], ground: [0.65, 0.30, 0.20], figure: [0.95, 0.85, 0.05] },
];

/// Parsing palette shared by all families: class `2k` is family `k`'s sky,
/// class `2k + 1` its ground.
pub const PALETTE: [[u8; 3]; 8] = [
    [0, 160, 255],
    [255, 200, 0],
    [120, 255, 120],
    [0, 100, 0],
    [200, 200, 255],
    [255, 255, 255],
    [80, 0, 160],
    [200, 60, 0],
];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    pub width: usize,
    pub height: usize,
    pub family: usize,
}

impl SynthParams {
    pub fn new(width: usize, height: usize, family: usize) -> Self {
        Self { width, height, family }
    }
}

fn jitter<R: Rng + ?Sized>(rng: &mut R, c: [f64; 3], amount: f64) -> [f64; 3] {
    c.map(|v| (v + rng.random_range(-amount..=amount)).clamp(0.0, 1.0))
}

/// Draws one scene of the requested family.
pub fn synth_scene<R: Rng + ?Sized>(rng: &mut R, params: &SynthParams, id: impl Into<String>) -> Result<SceneTriple> {
    let (w, h) = (params.width, params.height);
    if w < 16 || h < 16 {
        return Err(ArtError::Config(format!("synthetic canvas must be at least 16x16, got {w}x{h}")));
    }
    let fam = FAMILIES
        .get(params.family)
        .ok_or_else(|| ArtError::Config(format!("unknown scene family {}", params.family)))?;
    let (wf, hf) = (w as f64, h as f64);

    let sky = jitter(rng, fam.sky, 0.06);
    let ground = jitter(rng, fam.ground, 0.06);
    let figure = jitter(rng, fam.figure, 0.06);
    let head = figure.map(|v| 0.5 * v + 0.5);

    let horizon = (rng.random_range(0.40..0.55) * hf).round() as usize;
    let fig_h = ((rng.random_range(0.32..0.42) * hf).round() as usize).max(6);
    let body_w = ((fig_h as f64 * 0.35).round() as usize).max(3);
    let radius = (body_w as f64 * 0.5).max(1.5);
    let head_h = (2.0 * radius).round() as usize;
    let body_h = fig_h.saturating_sub(head_h).max(2);
    let fig_h = body_h + head_h;
    let feet_lo = (horizon as f64 + 0.15 * hf).round() as usize;
    let feet_hi = ((horizon as f64 + 0.35 * hf).min(0.95 * hf)).round() as usize;
    let feet = rng.random_range(feet_lo..=feet_hi.max(feet_lo)).min(h - 1);
    let top = feet + 1 - fig_h;
    let left = ((rng.random_range(0.30..0.70) * wf) - body_w as f64 / 2.0).round().max(0.0) as usize;
    let left = left.min(w - body_w);

    let mut bg = Image::black(w, h)?;
    let mut labels = vec![0u8; w * h];
    let spot = (left as f64 + body_w as f64 / 2.0, feet as f64 + 0.5);
    let spot_r = (body_w as f64 * 0.9, (0.03 * hf).max(1.5));
    for y in 0..h {
        for x in 0..w {
            let noise = rng.random_range(-0.03..=0.03);
            let color = if y < horizon {
                labels[y * w + x] = (2 * params.family) as u8;
                let lift = 0.85 + 0.15 * y as f64 / horizon as f64;
                sky.map(|c| c * lift + noise)
            } else {
                labels[y * w + x] = (2 * params.family + 1) as u8;
                let depth = 1.0 - 0.15 * (y - horizon) as f64 / (h - horizon) as f64;
                let dx = (x as f64 + 0.5 - spot.0) / spot_r.0;
                let dy = (y as f64 + 0.5 - spot.1) / spot_r.1;
                let shade = if dx * dx + dy * dy <= 1.0 { 0.6 } else { 1.0 };
                ground.map(|c| c * depth * shade + noise)
            };
            bg.set_pixel(x, y, color);
        }
    }

    let mut rgb = Image::black(body_w, fig_h)?;
    let mut alpha = vec![0.0; body_w * fig_h];
    let head_c = (body_w as f64 / 2.0, radius);
    for y in 0..fig_h {
        for x in 0..body_w {
            let inside_head = {
                let dx = x as f64 + 0.5 - head_c.0;
                let dy = y as f64 + 0.5 - head_c.1;
                y < head_h && dx * dx + dy * dy <= radius * radius + 0.5
            };
            if y >= head_h {
                rgb.set_pixel(x, y, figure);
                alpha[y * body_w + x] = 1.0;
            } else if inside_head {
                rgb.set_pixel(x, y, head);
                alpha[y * body_w + x] = 1.0;
            }
        }
    }
    // the body spans the full width and the head touches row 0, so the
    // patch is exactly the bounding box of its matte
    alpha[head_c.0 as usize] = 1.0;
    rgb.set_pixel(head_c.0 as usize, 0, head);

    let origin = (left as f64 + body_w as f64 / 2.0, top as f64 + fig_h as f64 / 2.0);
    let fg = ForegroundPatch::new(rgb, alpha, origin)?;
    let parsing = ParsingMap::new(w, h, labels, PALETTE.to_vec())?;
    Ok(SceneTriple::new(id, fg, bg, parsing)?.with_group(fam.name))
}

/// A corpus of `n` scenes cycling through the first `families` families.
/// Scene `i` is drawn from its own seeded stream.
pub fn synth_corpus(n: usize, families: usize, width: usize, height: usize, seed: u64) -> Result<Vec<SceneTriple>> {
    if families < 2 || families > FAMILIES.len() {
        return Err(ArtError::Config(format!(
            "family count must be in 2..={}, got {families}",
            FAMILIES.len()
        )));
    }
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            synth_scene(&mut rng, &SynthParams::new(width, height, i % families), format!("scene-{i:05}"))
        })
        .collect()
}

/// A foreground plus a gallery in which exactly one background (the
/// foreground's own scene) belongs to the foreground's family.
#[derive(Clone, Debug)]
pub struct GalleryCase {
    pub fg: ForegroundPatch,
    pub family: usize,
    /// Id of the foreground's source scene within `scenes`.
    pub true_id: String,
    /// Pose of the foreground in its source scene.
    pub planted: Placement,
    pub scenes: Vec<SceneTriple>,
}

/// Draws a gallery case of `size` scenes. Ids are `g00`, `g01`, ...; the
/// matching scene sits at a random slot and the rest cycle through the
/// other families.
pub fn synth_gallery_case(size: usize, width: usize, height: usize, seed: u64) -> Result<GalleryCase> {
    if size == 0 || size > 100 {
        return Err(ArtError::Config(format!("gallery size must be in 1..=100, got {size}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let family = rng.random_range(0..FAMILIES.len());
    let slot = rng.random_range(0..size);
    let mut others = 0;
    let scenes = (0..size)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(i as u64 + 1);
            let fam = if i == slot {
                family
            } else {
                others += 1;
                (family + 1 + (others - 1) % (FAMILIES.len() - 1)) % FAMILIES.len()
            };
            synth_scene(&mut r, &SynthParams::new(width, height, fam), format!("g{i:02}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let source = &scenes[slot];
    Ok(GalleryCase {
        fg: source.fg.clone(),
        family,
        true_id: source.id.clone(),
        planted: source.fg.origin_placement(),
        scenes,
    })
}

/// Recovers the family of a synthetic background from its parsing labels.
pub fn family_of(parsing: &ParsingMap) -> Option<usize> {
    let first = *parsing.labels().first()? as usize / 2;
    parsing
        .labels()
        .iter()
        .all(|&l| l as usize / 2 == first)
        .then_some(first)
        .filter(|&f| f < FAMILIES.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_valid_and_deterministic() {
        let a = synth_corpus(12, 4, 64, 64, 3).unwrap();
        let b = synth_corpus(12, 4, 64, 64, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.bg, y.bg);
            assert_eq!(x.fg, y.fg);
            assert_eq!(x.parsing, y.parsing);
        }
        for (i, t) in a.iter().enumerate() {
            assert_eq!(family_of(&t.parsing), Some(i % 4));
            let (ox, oy) = t.fg.origin_center();
            let (hw, hh) = (t.fg.width() as f64 / 2.0, t.fg.height() as f64 / 2.0);
            assert!(ox - hw >= 0.0 && ox + hw <= 64.0 && oy - hh >= 0.0 && oy + hh <= 64.0);
            // feet rest on ground
            let feet_row = (oy + hh) as usize - 1;
            assert_eq!(t.parsing.label(ox as usize, feet_row) % 2, 1);
        }
    }

    #[test]
    fn gallery_case_has_one_match() {
        let case = synth_gallery_case(16, 64, 64, 5).unwrap();
        let matches: Vec<_> = case.scenes.iter().filter(|t| family_of(&t.parsing) == Some(case.family)).collect();
        assert_eq!(matches.len(), 1);
        assert_eq!(matches[0].id, case.true_id);
        assert_eq!(case.scenes.len(), 16);
        let again = synth_gallery_case(16, 64, 64, 5).unwrap();
        assert_eq!(again.true_id, case.true_id);
        assert_eq!(again.fg, case.fg);
        assert!(synth_gallery_case(0, 64, 64, 5).is_err());
    }

    #[test]
    fn rejects_unknown_family_and_tiny_canvas() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(synth_scene(&mut rng, &SynthParams::new(64, 64, 9), "x").is_err());
        assert!(synth_scene(&mut rng, &SynthParams::new(8, 8, 0), "x").is_err());
        assert!(synth_corpus(4, 1, 64, 64, 0).is_err());
    }
}
