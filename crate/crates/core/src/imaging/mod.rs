//! Raster types, placement geometry and alpha compositing.
//!
//! All intensities are `f64` in `[0, 1]`, stored interleaved RGB. Pixel `(i, j)`
//! covers the continuous square `[i, i+1) x [j, j+1)`, so its center sits at
//! `(i + 0.5, j + 0.5)`. Placements use the same continuous coordinates.

mod io;

pub use io::{read_foreground, read_parsing, read_rgb, write_parsing, write_rgb, write_rgba};

use serde::{Deserialize, Serialize};

use crate::error::{ArtError, Result};

/// An RGB raster with intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    /// Wraps interleaved RGB data, validating extent and range.
    pub fn from_rgb(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ArtError::InvalidImage(format!(
                "empty extent {width}x{height}"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(ArtError::InvalidImage(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height * 3,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ArtError::InvalidImage(format!(
                "intensity {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// A `width x height` image filled with one color.
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Self::from_rgb(width, height, data)
    }

    pub fn black(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn extent(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let o = (y * self.width + x) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    /// Writes one pixel; values are clamped into `[0, 1]`.
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let o = (y * self.width + x) * 3;
        for c in 0..3 {
            self.data[o + c] = rgb[c].clamp(0.0, 1.0);
        }
    }

    /// Channel-planar copy (`3 x h x w`), the layout the encoder consumes.
    pub fn to_planar(&self) -> Vec<f64> {
        let plane = self.width * self.height;
        let mut out = vec![0.0; plane * 3];
        for (p, px) in self.data.chunks_exact(3).enumerate() {
            out[p] = px[0];
            out[plane + p] = px[1];
            out[2 * plane + p] = px[2];
        }
        out
    }
}

/// A cut-out foreground: RGB plus an opacity matte of the same extent.
#[derive(Clone, Debug, PartialEq)]
pub struct ForegroundPatch {
    rgb: Image,
    alpha: Vec<f64>,
    origin_center: (f64, f64),
}

impl ForegroundPatch {
    pub fn new(rgb: Image, alpha: Vec<f64>, origin_center: (f64, f64)) -> Result<Self> {
        if alpha.len() != rgb.width() * rgb.height() {
            return Err(ArtError::InvalidImage(format!(
                "alpha has {} samples, patch is {}x{}",
                alpha.len(),
                rgb.width(),
                rgb.height()
            )));
        }
        if alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(ArtError::InvalidImage("alpha outside [0, 1]".into()));
        }
        if !alpha.iter().any(|&a| a > 0.0) {
            return Err(ArtError::InvalidImage(
                "foreground has no visible pixel".into(),
            ));
        }
        if !origin_center.0.is_finite() || !origin_center.1.is_finite() {
            return Err(ArtError::InvalidImage("non-finite origin center".into()));
        }
        Ok(Self {
            rgb,
            alpha,
            origin_center,
        })
    }

    /// Cuts a patch out of a canvas-sized RGBA layer: the patch is the
    /// bounding box of `alpha > 0` and its origin is that box's center in
    /// canvas coordinates.
    pub fn from_cutout(layer: &Image, alpha: &[f64]) -> Result<Self> {
        let (w, h) = layer.extent();
        if alpha.len() != w * h {
            return Err(ArtError::InvalidImage("alpha extent mismatch".into()));
        }
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..h {
            for x in 0..w {
                if alpha[y * w + x] > 0.0 {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        if x0 == usize::MAX {
            return Err(ArtError::InvalidImage(
                "foreground has no visible pixel".into(),
            ));
        }
        let (pw, ph) = (x1 - x0 + 1, y1 - y0 + 1);
        let mut rgb = Vec::with_capacity(pw * ph * 3);
        let mut matte = Vec::with_capacity(pw * ph);
        for y in y0..=y1 {
            for x in x0..=x1 {
                rgb.extend_from_slice(&layer.pixel(x, y));
                matte.push(alpha[y * w + x]);
            }
        }
        let center = ((x0 + x1 + 1) as f64 / 2.0, (y0 + y1 + 1) as f64 / 2.0);
        Self::new(Image::from_rgb(pw, ph, rgb)?, matte, center)
    }

    pub fn rgb(&self) -> &Image {
        &self.rgb
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn width(&self) -> usize {
        self.rgb.width()
    }

    pub fn height(&self) -> usize {
        self.rgb.height()
    }

    /// Center of the patch in its source image.
    pub fn origin_center(&self) -> (f64, f64) {
        self.origin_center
    }

    /// The pose the patch had in its source image.
    pub fn origin_placement(&self) -> Placement {
        Placement {
            cx: self.origin_center.0,
            cy: self.origin_center.1,
            scale: 1.0,
        }
    }

    /// The patch resampled by `(fx, fy)`, with its origin mapped accordingly.
    /// Used to move a foreground between native and encoder coordinates.
    pub fn rescaled(&self, fx: f64, fy: f64) -> Result<Self> {
        let nw = ((self.width() as f64 * fx).round() as usize).max(1);
        let nh = ((self.height() as f64 * fy).round() as usize).max(1);
        let rgb = resize_bilinear(&self.rgb, nw, nh);
        let alpha = resize_plane(&self.alpha, self.width(), self.height(), nw, nh);
        let origin = (self.origin_center.0 * fx, self.origin_center.1 * fy);
        if !alpha.iter().any(|&a| a > 0.0) {
            return Err(ArtError::InvalidImage(
                "foreground vanished when rescaled".into(),
            ));
        }
        Self::new(rgb, alpha, origin)
    }
}

/// A per-pixel scene-class map with a display palette.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsingMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
    palette: Vec<[u8; 3]>,
}

impl ParsingMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>, palette: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(ArtError::InvalidImage(format!(
                "parsing map {width}x{height} with {} labels",
                labels.len()
            )));
        }
        if palette.is_empty() || palette.len() > 256 {
            return Err(ArtError::InvalidImage(format!(
                "palette must hold 1..=256 classes, got {}",
                palette.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= palette.len()) {
            return Err(ArtError::InvalidImage(format!(
                "label {bad} outside palette of {} classes",
                palette.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
            palette,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn extent(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn palette(&self) -> &[[u8; 3]] {
        &self.palette
    }

    pub fn num_classes(&self) -> usize {
        self.palette.len()
    }

    pub fn label(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    /// Palette-rendered RGB view of the map.
    pub fn to_rgb(&self) -> Image {
        let data = self
            .labels
            .iter()
            .flat_map(|&l| self.palette[l as usize].map(|c| c as f64 / 255.0))
            .collect();
        Image {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Nearest-neighbour resample; labels are never blended.
    pub fn resized_nearest(&self, width: usize, height: usize) -> Self {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            let sy = (((y as f64 + 0.5) * self.height as f64 / height as f64) as usize)
                .min(self.height - 1);
            for x in 0..width {
                let sx = (((x as f64 + 0.5) * self.width as f64 / width as f64) as usize)
                    .min(self.width - 1);
                labels.push(self.labels[sy * self.width + sx]);
            }
        }
        Self {
            width,
            height,
            labels,
            palette: self.palette.clone(),
        }
    }
}

/// Pose of a foreground on a canvas: center in canvas pixels plus a scale
/// multiplier relative to the patch's native size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub cx: f64,
    pub cy: f64,
    pub scale: f64,
}

impl Placement {
    pub fn new(cx: f64, cy: f64, scale: f64) -> Result<Self> {
        let p = Self { cx, cy, scale };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(ArtError::InvalidPlacement(format!(
                "scale must be positive and finite, got {}",
                self.scale
            )));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(ArtError::InvalidPlacement(format!(
                "center ({}, {}) is not finite",
                self.cx, self.cy
            )));
        }
        Ok(())
    }

    pub fn distance_to(&self, point: (f64, f64)) -> f64 {
        (self.cx - point.0).hypot(self.cy - point.1)
    }
}

/// Bilinear sample of an interleaved plane set at continuous coordinates,
/// clamping to the edge.
#[inline]
fn bilinear_weights(u: f64, len: usize) -> (usize, usize, f64) {
    let x = (u - 0.5).clamp(0.0, (len - 1) as f64);
    let x0 = x.floor() as usize;
    let x1 = (x0 + 1).min(len - 1);
    (x0, x1, x - x0 as f64)
}

fn resize_plane(src: &[f64], w: usize, h: usize, nw: usize, nh: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(nw * nh);
    for y in 0..nh {
        let (y0, y1, fy) = bilinear_weights((y as f64 + 0.5) * h as f64 / nh as f64, h);
        for x in 0..nw {
            let (x0, x1, fx) = bilinear_weights((x as f64 + 0.5) * w as f64 / nw as f64, w);
            let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
            let bot = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
            out.push((top * (1.0 - fy) + bot * fy).clamp(0.0, 1.0));
        }
    }
    out
}

/// Bilinear resize with pixel-center alignment. Same-size input is returned
/// unchanged.
pub fn resize_bilinear(img: &Image, width: usize, height: usize) -> Image {
    if img.extent() == (width, height) {
        return img.clone();
    }
    let (w, h) = img.extent();
    let mut data = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        let (y0, y1, fy) = bilinear_weights((y as f64 + 0.5) * h as f64 / height as f64, h);
        for x in 0..width {
            let (x0, x1, fx) = bilinear_weights((x as f64 + 0.5) * w as f64 / width as f64, w);
            let (a, b, c, d) = (img.pixel(x0, y0), img.pixel(x1, y0), img.pixel(x0, y1), img.pixel(x1, y1));
            for ch in 0..3 {
                let top = a[ch] * (1.0 - fx) + b[ch] * fx;
                let bot = c[ch] * (1.0 - fx) + d[ch] * fx;
                data.push((top * (1.0 - fy) + bot * fy).clamp(0.0, 1.0));
            }
        }
    }
    Image {
        width,
        height,
        data,
    }
}

/// Resizes to the square encoder resolution.
pub fn prepare_encoder_input(img: &Image, resolution: usize) -> Image {
    resize_bilinear(img, resolution, resolution)
}

/// Canvas pixels touched by the scaled patch: half-open column and row ranges.
fn support_rect(fg: &ForegroundPatch, p: &Placement, w: usize, h: usize) -> (usize, usize, usize, usize) {
    let half_w = p.scale * fg.width() as f64 / 2.0;
    let half_h = p.scale * fg.height() as f64 / 2.0;
    let clip = |v: f64, max: usize| v.clamp(0.0, max as f64) as usize;
    (
        clip((p.cx - half_w - 1.0).floor(), w),
        clip((p.cx + half_w + 1.0).ceil(), w),
        clip((p.cy - half_h - 1.0).floor(), h),
        clip((p.cy + half_h + 1.0).ceil(), h),
    )
}

/// Writes the scaled patch into `canvas` with premultiplied-alpha blending.
fn blend_into(canvas: &mut Image, fg: &ForegroundPatch, p: &Placement) {
    let (w, h) = canvas.extent();
    let (pw, ph) = (fg.width(), fg.height());
    let (x_lo, x_hi, y_lo, y_hi) = support_rect(fg, p, w, h);
    for y in y_lo..y_hi {
        let v = (y as f64 + 0.5 - p.cy) / p.scale + ph as f64 / 2.0;
        if !(0.0..ph as f64).contains(&v) {
            continue;
        }
        let (y0, y1, fy) = bilinear_weights(v, ph);
        for x in x_lo..x_hi {
            let u = (x as f64 + 0.5 - p.cx) / p.scale + pw as f64 / 2.0;
            if !(0.0..pw as f64).contains(&u) {
                continue;
            }
            let (x0, x1, fx) = bilinear_weights(u, pw);
            let taps = [
                (x0, y0, (1.0 - fx) * (1.0 - fy)),
                (x1, y0, fx * (1.0 - fy)),
                (x0, y1, (1.0 - fx) * fy),
                (x1, y1, fx * fy),
            ];
            let mut alpha = 0.0;
            let mut premul = [0.0; 3];
            for (tx, ty, wgt) in taps {
                let a = fg.alpha[ty * pw + tx] * wgt;
                if a == 0.0 {
                    continue;
                }
                alpha += a;
                let c = fg.rgb.pixel(tx, ty);
                for ch in 0..3 {
                    premul[ch] += a * c[ch];
                }
            }
            if alpha == 0.0 {
                continue;
            }
            let o = (y * w + x) * 3;
            for ch in 0..3 {
                let bg = canvas.data[o + ch];
                canvas.data[o + ch] = (premul[ch] + (1.0 - alpha) * bg).clamp(0.0, 1.0);
            }
        }
    }
}

/// Alpha-blends `fg`, scaled by `p.scale` about its center and centered at
/// `(p.cx, p.cy)`, over a copy of `background`. Off-canvas parts are cropped.
pub fn composite(background: &Image, fg: &ForegroundPatch, p: &Placement) -> Result<Image> {
    p.validate()?;
    let mut out = background.clone();
    blend_into(&mut out, fg, p);
    Ok(out)
}

/// The patch composited onto a black canvas; this is the foreground stream
/// the verifier sees.
pub fn render_foreground_canvas(
    fg: &ForegroundPatch,
    p: &Placement,
    canvas_w: usize,
    canvas_h: usize,
) -> Result<Image> {
    p.validate()?;
    let mut out = Image::black(canvas_w, canvas_h)?;
    blend_into(&mut out, fg, p);
    Ok(out)
}

/// Distance from `origin` to the farthest canvas corner.
pub fn max_displacement(origin: (f64, f64), canvas_w: usize, canvas_h: usize) -> Result<f64> {
    let (w, h) = (canvas_w as f64, canvas_h as f64);
    let (x, y) = origin;
    if canvas_w == 0 || canvas_h == 0 || !(0.0..=w).contains(&x) || !(0.0..=h).contains(&y) {
        return Err(ArtError::Domain(format!(
            "origin ({x}, {y}) lies outside the {canvas_w}x{canvas_h} canvas"
        )));
    }
    Ok(x.max(w - x).hypot(y.max(h - y)))
}
