//! On-disk layout: `<root>/<id>/{fg,bg,parsing}.png` plus line-delimited
//! JSON manifests whose first line is the header.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Manifest, ManifestHeader, Sample, SceneTriple, TripleMeta, MANIFEST_VERSION};
use crate::error::{ArtError, Result};
use crate::imaging::{self, Image};

pub const FG_FILE: &str = "fg.png";
pub const BG_FILE: &str = "bg.png";
pub const PARSING_FILE: &str = "parsing.png";
/// Optional one-line scene group.
pub const GROUP_FILE: &str = "group.txt";

/// Writes a triple; the foreground is stored as a canvas-sized RGBA cut-out
/// at its origin pose.
pub fn write_triple(root: &Path, t: &SceneTriple) -> Result<PathBuf> {
    let dir = root.join(&t.id);
    fs::create_dir_all(&dir).map_err(|e| ArtError::io(&dir, e))?;
    let (w, h) = t.bg.extent();
    let mut layer = Image::black(w, h)?;
    let mut alpha = vec![0.0; w * h];
    let (ox, oy) = t.fg.origin_center();
    let left = (ox - t.fg.width() as f64 / 2.0).round() as i64;
    let top = (oy - t.fg.height() as f64 / 2.0).round() as i64;
    for y in 0..t.fg.height() {
        for x in 0..t.fg.width() {
            let (cx, cy) = (left + x as i64, top + y as i64);
            if cx < 0 || cy < 0 || cx >= w as i64 || cy >= h as i64 {
                continue;
            }
            let (cx, cy) = (cx as usize, cy as usize);
            layer.set_pixel(cx, cy, t.fg.rgb().pixel(x, y));
            alpha[cy * w + cx] = t.fg.alpha()[y * t.fg.width() + x];
        }
    }
    imaging::write_rgba(dir.join(FG_FILE), &layer, &alpha)?;
    imaging::write_rgb(dir.join(BG_FILE), &t.bg)?;
    imaging::write_parsing(dir.join(PARSING_FILE), &t.parsing)?;
    if let Some(g) = &t.group {
        let path = dir.join(GROUP_FILE);
        fs::write(&path, format!("{g}\n")).map_err(|e| ArtError::io(&path, e))?;
    }
    Ok(dir)
}

pub fn read_triple(root: &Path, id: &str) -> Result<SceneTriple> {
    let dir = root.join(id);
    let fg = imaging::read_foreground(dir.join(FG_FILE))?;
    let bg = imaging::read_rgb(dir.join(BG_FILE))?;
    let parsing = imaging::read_parsing(dir.join(PARSING_FILE))?;
    let triple = SceneTriple::new(id, fg, bg, parsing)?;
    let group_path = dir.join(GROUP_FILE);
    if !group_path.is_file() {
        return Ok(triple);
    }
    let group = fs::read_to_string(&group_path).map_err(|e| ArtError::io(&group_path, e))?;
    match group.trim() {
        "" => Ok(triple),
        g => Ok(triple.with_group(g)),
    }
}

/// Sorted ids of subdirectories holding all of `files`.
pub fn list_ids(root: &Path, files: &[&str]) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| ArtError::io(root, e))? {
        let entry = entry.map_err(|e| ArtError::io(root, e))?;
        let path = entry.path();
        if path.is_dir() && files.iter().all(|f| path.join(f).is_file()) {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                ids.push(name.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

/// Loads every complete triple under `root`, in id order.
pub fn read_triples(root: &Path) -> Result<Vec<SceneTriple>> {
    list_ids(root, &[FG_FILE, BG_FILE, PARSING_FILE])?
        .iter()
        .map(|id| read_triple(root, id))
        .collect()
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let file = File::create(path).map_err(|e| ArtError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut line = |v: String| writeln!(out, "{v}").map_err(|e| ArtError::io(path, e));
    line(serde_json::to_string(&manifest.header)?)?;
    for s in &manifest.samples {
        line(serde_json::to_string(s)?)?;
    }
    out.flush().map_err(|e| ArtError::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let file = File::open(path).map_err(|e| ArtError::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| ArtError::Dataset(format!("{}: empty manifest", path.display())))?
        .map_err(|e| ArtError::io(path, e))?;
    let header: ManifestHeader = serde_json::from_str(&first)?;
    if header.version != MANIFEST_VERSION {
        return Err(ArtError::Dataset(format!(
            "{}: manifest version {} unsupported (expected {MANIFEST_VERSION})",
            path.display(),
            header.version
        )));
    }
    let mut samples = Vec::new();
    for line in lines {
        let line = line.map_err(|e| ArtError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(serde_json::from_str::<Sample>(&line)?);
    }
    let manifest = Manifest { header, samples };
    manifest.validate()?;
    Ok(manifest)
}

/// Metadata of every triple under `root`.
pub fn read_metas(root: &Path) -> Result<Vec<TripleMeta>> {
    Ok(read_triples(root)?.iter().map(SceneTriple::meta).collect())
}
