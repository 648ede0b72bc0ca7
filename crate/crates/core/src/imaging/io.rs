//! PNG read/write for backgrounds (RGB), foregrounds (RGBA cut-outs) and
//! parsing maps (indexed color).

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use super::{ForegroundPatch, Image, ParsingMap};
use crate::error::{ArtError, Result};

struct Decoded {
    width: usize,
    height: usize,
    color: ColorType,
    bytes: Vec<u8>,
    palette: Option<Vec<u8>>,
    bit_depth: BitDepth,
}

fn decode(path: &Path, transformations: Transformations) -> Result<Decoded> {
    let png_err = |e: png::DecodingError| ArtError::Png {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let file = File::open(path).map_err(|e| ArtError::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(transformations);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let size = reader.output_buffer_size().ok_or_else(|| ArtError::Png {
        path: path.to_path_buf(),
        message: "image too large".into(),
    })?;
    let mut bytes = vec![0; size];
    let info = reader.next_frame(&mut bytes).map_err(png_err)?;
    bytes.truncate(info.line_size * info.height as usize);
    let palette = reader.info().palette.as_ref().map(|p| p.to_vec());
    Ok(Decoded {
        width: info.width as usize,
        height: info.height as usize,
        color: info.color_type,
        bytes,
        palette,
        bit_depth: info.bit_depth,
    })
}

/// Returns RGB intensities and an alpha plane (all ones when absent).
fn read_rgba_planes(path: &Path) -> Result<(Image, Vec<f64>)> {
    let d = decode(path, Transformations::EXPAND | Transformations::STRIP_16)?;
    let n = d.width * d.height;
    let to_f = |b: u8| b as f64 / 255.0;
    let (rgb, alpha): (Vec<f64>, Vec<f64>) = match d.color {
        ColorType::Rgb => (d.bytes.iter().map(|&b| to_f(b)).collect(), vec![1.0; n]),
        ColorType::Rgba => (
            d.bytes.chunks_exact(4).flat_map(|p| [to_f(p[0]), to_f(p[1]), to_f(p[2])]).collect(),
            d.bytes.chunks_exact(4).map(|p| to_f(p[3])).collect(),
        ),
        ColorType::Grayscale => (d.bytes.iter().flat_map(|&g| [to_f(g); 3]).collect(), vec![1.0; n]),
        ColorType::GrayscaleAlpha => (
            d.bytes.chunks_exact(2).flat_map(|p| [to_f(p[0]); 3]).collect(),
            d.bytes.chunks_exact(2).map(|p| to_f(p[1])).collect(),
        ),
        ColorType::Indexed => {
            return Err(ArtError::Png {
                path: path.to_path_buf(),
                message: "palette was not expanded".into(),
            })
        }
    };
    Ok((Image::from_rgb(d.width, d.height, rgb)?, alpha))
}

/// Reads any 8/16-bit PNG as RGB, discarding alpha.
pub fn read_rgb(path: impl AsRef<Path>) -> Result<Image> {
    read_rgba_planes(path.as_ref()).map(|(img, _)| img)
}

/// Reads a canvas-sized RGBA cut-out and crops it to its visible pixels.
pub fn read_foreground(path: impl AsRef<Path>) -> Result<ForegroundPatch> {
    let (layer, alpha) = read_rgba_planes(path.as_ref())?;
    ForegroundPatch::from_cutout(&layer, &alpha)
}

/// Reads an indexed-color PNG as class labels plus palette.
pub fn read_parsing(path: impl AsRef<Path>) -> Result<ParsingMap> {
    let path = path.as_ref();
    let d = decode(path, Transformations::IDENTITY)?;
    if d.color != ColorType::Indexed {
        return Err(ArtError::Png {
            path: path.to_path_buf(),
            message: format!("parsing map must be indexed color, found {:?}", d.color),
        });
    }
    let bits = d.bit_depth as usize;
    let per_byte = 8 / bits;
    let line = (d.width * bits).div_ceil(8);
    let mask = ((1u16 << bits) - 1) as u8;
    let mut labels = Vec::with_capacity(d.width * d.height);
    for row in d.bytes.chunks_exact(line) {
        for x in 0..d.width {
            let byte = row[x / per_byte];
            let shift = 8 - bits * (x % per_byte + 1);
            labels.push((byte >> shift) & mask);
        }
    }
    let palette = d
        .palette
        .unwrap_or_default()
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    ParsingMap::new(d.width, d.height, labels, palette)
}

fn encode(path: &Path, width: usize, height: usize, color: ColorType, palette: Option<Vec<u8>>, data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| ArtError::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(BitDepth::Eight);
    if let Some(p) = palette {
        encoder.set_palette(p);
    }
    let png_err = |e: png::EncodingError| ArtError::Png {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut writer = encoder.write_header().map_err(png_err)?;
    writer.write_image_data(data).map_err(png_err)?;
    writer.finish().map_err(png_err)
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_rgb(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    encode(path.as_ref(), img.width(), img.height(), ColorType::Rgb, None, &bytes)
}

/// Writes an RGB image with a separate alpha plane as RGBA.
pub fn write_rgba(path: impl AsRef<Path>, img: &Image, alpha: &[f64]) -> Result<()> {
    if alpha.len() != img.width() * img.height() {
        return Err(ArtError::InvalidImage("alpha extent mismatch".into()));
    }
    let bytes: Vec<u8> = img
        .data()
        .chunks_exact(3)
        .zip(alpha)
        .flat_map(|(px, &a)| [quantize(px[0]), quantize(px[1]), quantize(px[2]), quantize(a)])
        .collect();
    encode(path.as_ref(), img.width(), img.height(), ColorType::Rgba, None, &bytes)
}

pub fn write_parsing(path: impl AsRef<Path>, map: &ParsingMap) -> Result<()> {
    let palette = map.palette().iter().flatten().copied().collect();
    encode(path.as_ref(), map.width(), map.height(), ColorType::Indexed, Some(palette), map.labels())
}
