//! Two-stage retouching: rank gallery backgrounds by content consistency,
//! then adjust the foreground on each of the top candidates and keep the
//! placement with the best spatial score.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjuster::{adjust_multistart, AscentConfig, VerifierScorer};
use crate::dataforge::store::{BG_FILE, PARSING_FILE};
use crate::error::{ArtError, Result};
use crate::imaging::{self, composite, ForegroundPatch, Image, ParsingMap, Placement};
use crate::verifier::Verifier;

/// Default cap on how many gallery entries stage 1 scores.
pub const DEFAULT_SAMPLE_N: usize = 64;
pub const DEFAULT_K: usize = 3;
/// Stage-1 foreground height as a fraction of the canvas height.
pub const RANKING_HEIGHT_FRACTION: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct GalleryEntry {
    pub id: String,
    pub bg: Image,
    pub parsing: ParsingMap,
}

/// Candidate backgrounds with their parsing maps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gallery {
    entries: Vec<GalleryEntry>,
    index_path: Option<PathBuf>,
}

impl Gallery {
    /// Checks extents and id uniqueness.
    pub fn new(entries: Vec<GalleryEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if e.bg.extent() != e.parsing.extent() {
                return Err(ArtError::Dataset(format!(
                    "gallery entry {}: background {:?} and parsing map {:?} differ in extent",
                    e.id,
                    e.bg.extent(),
                    e.parsing.extent()
                )));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(ArtError::Dataset(format!("duplicate gallery id {}", e.id)));
            }
        }
        Ok(Self { entries, index_path: None })
    }

    /// Loads every entry listed in an index written by [`gallery_build`].
    pub fn load(index: &Path) -> Result<Self> {
        let base = index.parent().unwrap_or(Path::new(""));
        let entries = read_index(index)?
            .into_iter()
            .map(|r| {
                Ok(GalleryEntry {
                    bg: imaging::read_rgb(base.join(&r.bg))?,
                    parsing: imaging::read_parsing(base.join(&r.parsing))?,
                    id: r.id,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut g = Self::new(entries)?;
        g.index_path = Some(index.to_path_buf());
        Ok(g)
    }

    pub fn entries(&self) -> &[GalleryEntry] {
        &self.entries
    }

    pub fn index_path(&self) -> Option<&Path> {
        self.index_path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&GalleryEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

/// One line of a gallery index. Paths are relative to the index file's
/// directory unless absolute.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub id: String,
    pub bg: PathBuf,
    pub parsing: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub reason: String,
}

/// What [`gallery_build`] indexed and what it turned away.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GalleryIndex {
    pub entries: Vec<IndexRecord>,
    pub rejections: Vec<Rejection>,
}

fn check_pair(dir: &Path) -> std::result::Result<(), String> {
    let (bg, parsing) = (dir.join(BG_FILE), dir.join(PARSING_FILE));
    match (bg.is_file(), parsing.is_file()) {
        (false, false) => return Err(format!("missing {BG_FILE} and {PARSING_FILE}")),
        (false, true) => return Err(format!("missing {BG_FILE}")),
        (true, false) => return Err(format!("missing {PARSING_FILE}")),
        (true, true) => {}
    }
    let bg = imaging::read_rgb(&bg).map_err(|e| e.to_string())?;
    let parsing = imaging::read_parsing(&parsing).map_err(|e| e.to_string())?;
    if bg.extent() != parsing.extent() {
        return Err(format!(
            "extent mismatch: {BG_FILE} is {}x{}, {PARSING_FILE} is {}x{}",
            bg.width(),
            bg.height(),
            parsing.width(),
            parsing.height()
        ));
    }
    Ok(())
}

/// Path of `target` as seen from `base`, when `target` lies under it.
fn relative_to(target: &Path, base: &Path) -> PathBuf {
    match (target.canonicalize(), base.canonicalize()) {
        (Ok(t), Ok(b)) => t.strip_prefix(&b).map(Path::to_path_buf).unwrap_or(t),
        _ => target.to_path_buf(),
    }
}

/// Scans `root` for `<id>/bg.png` + `<id>/parsing.png` pairs, validates
/// them and writes a JSON-lines index to `index`. Every subdirectory that
/// fails validation is listed as a rejection.
pub fn gallery_build(root: &Path, index: &Path) -> Result<GalleryIndex> {
    let mut dirs: Vec<(String, PathBuf)> = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| ArtError::io(root, e))? {
        let entry = entry.map_err(|e| ArtError::io(root, e))?;
        if entry.path().is_dir() {
            dirs.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
        }
    }
    dirs.sort();
    let index_dir = match index.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut out = GalleryIndex::default();
    for (id, dir) in dirs {
        match check_pair(&dir) {
            Ok(()) => out.entries.push(IndexRecord {
                bg: relative_to(&dir.join(BG_FILE), &index_dir),
                parsing: relative_to(&dir.join(PARSING_FILE), &index_dir),
                id,
            }),
            Err(reason) => out.rejections.push(Rejection { id, reason }),
        }
    }
    write_index(index, &out.entries)?;
    Ok(out)
}

pub fn write_index(path: &Path, records: &[IndexRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| ArtError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w).map_err(|e| ArtError::io(path, e))?;
    }
    w.flush().map_err(|e| ArtError::io(path, e))
}

pub fn read_index(path: &Path) -> Result<Vec<IndexRecord>> {
    let file = fs::File::open(path).map_err(|e| ArtError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ArtError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: IndexRecord = serde_json::from_str(&line)
            .map_err(|e| ArtError::Dataset(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(r);
    }
    Ok(out)
}

/// Settings for both stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetouchConfig {
    /// Entries scored in stage 1; `None` means `min(64, gallery size)`.
    pub sample_n: Option<usize>,
    pub k: usize,
    pub seed: u64,
    pub ascent: AscentConfig,
}

impl RetouchConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            sample_n: None,
            k: DEFAULT_K,
            seed,
            ascent: AscentConfig::default(),
        }
    }

    fn resolve_sample_n(&self, gallery: usize) -> Result<usize> {
        if gallery == 0 {
            return Err(ArtError::Dataset("gallery is empty".into()));
        }
        let n = self.sample_n.unwrap_or(DEFAULT_SAMPLE_N.min(gallery));
        if self.k == 0 {
            return Err(ArtError::Config("k must be >= 1".into()));
        }
        if !(self.k <= n && n <= gallery) {
            return Err(ArtError::Config(format!(
                "need k <= sample_n <= gallery size, got k = {}, sample_n = {n}, gallery = {gallery}",
                self.k
            )));
        }
        Ok(n)
    }
}

/// Stage-1 score of one gallery entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub y_c: f64,
    /// Pose the foreground was scored at.
    pub placement: Placement,
}

/// Centered, with the foreground spanning half the canvas height.
pub fn ranking_placement(fg: &ForegroundPatch, width: usize, height: usize) -> Placement {
    Placement {
        cx: width as f64 / 2.0,
        cy: height as f64 / 2.0,
        scale: RANKING_HEIGHT_FRACTION * height as f64 / fg.height() as f64,
    }
}

/// Orders by descending `y_c`, then ascending id.
pub fn rank_order(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    b.y_c.total_cmp(&a.y_c).then_with(|| a.id.cmp(&b.id))
}

/// Scores a seeded sample of `sample_n` entries and returns all of them in
/// rank order; the first `k` are the stage-1 selection.
pub fn rank_backgrounds(verifier: &Verifier, fg: &ForegroundPatch, gallery: &Gallery, cfg: &RetouchConfig) -> Result<Vec<Candidate>> {
    let n = cfg.resolve_sample_n(gallery.len())?;
    let mut picked: Vec<usize> = if n == gallery.len() {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rand::seq::index::sample(&mut rng, gallery.len(), n).into_vec()
    };
    picked.sort_unstable();
    let mut scored = picked
        .par_iter()
        .map(|&i| {
            let e = &gallery.entries[i];
            let placement = ranking_placement(fg, e.bg.width(), e.bg.height());
            let out = verifier.forward(fg, &placement, &e.bg, &e.parsing)?;
            if !out.y_c.is_finite() {
                return Err(ArtError::Domain(format!("non-finite content score for {}", e.id)));
            }
            Ok(Candidate {
                id: e.id.clone(),
                y_c: out.y_c,
                placement,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(rank_order);
    Ok(scored)
}

/// Stage-2 outcome for one top-k background.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjustedCandidate {
    pub id: String,
    pub y_c: f64,
    pub placement: Placement,
    pub spatial_score: f64,
    pub best_restart: usize,
}

/// Everything the pipeline decided, in serializable form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetouchReport {
    pub seed: u64,
    pub sample_n: usize,
    pub k: usize,
    /// Every scored entry, in rank order.
    pub candidates: Vec<Candidate>,
    pub top_k: Vec<String>,
    /// The top-k entries after adjustment, in rank order.
    pub adjusted: Vec<AdjustedCandidate>,
    pub chosen_id: String,
    pub chosen_placement: Placement,
    pub chosen_spatial_score: f64,
    pub composite: Option<PathBuf>,
}

impl RetouchReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| ArtError::io(path, e))?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f).map_err(|e| ArtError::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| ArtError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Runs both stages and composites the winner at the background's native
/// resolution. Ties in spatial score go to the better-ranked background.
pub fn retouch(verifier: &Verifier, fg: &ForegroundPatch, gallery: &Gallery, cfg: &RetouchConfig) -> Result<(Image, RetouchReport)> {
    cfg.ascent.validate()?;
    let candidates = rank_backgrounds(verifier, fg, gallery, cfg)?;
    let top: Vec<&Candidate> = candidates.iter().take(cfg.k).collect();
    if top.is_empty() {
        return Err(ArtError::Dataset("no candidate backgrounds".into()));
    }
    let adjusted = top
        .par_iter()
        .map(|c| {
            let e = gallery.get(&c.id).expect("ranked ids come from the gallery");
            let scorer = VerifierScorer::new(verifier, fg, &e.bg, &e.parsing)?;
            let canvas = (e.bg.width() as f64, e.bg.height() as f64);
            let ms = adjust_multistart(&scorer, canvas, &cfg.ascent, cfg.seed)?;
            Ok(AdjustedCandidate {
                id: c.id.clone(),
                y_c: c.y_c,
                placement: ms.best,
                spatial_score: ms.best_score,
                best_restart: ms.best_restart,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut win = 0;
    for (i, a) in adjusted.iter().enumerate() {
        if a.spatial_score > adjusted[win].spatial_score {
            win = i;
        }
    }
    let chosen = &adjusted[win];
    let bg = &gallery.get(&chosen.id).expect("chosen id comes from the gallery").bg;
    let image = composite(bg, fg, &chosen.placement)?;
    let report = RetouchReport {
        seed: cfg.seed,
        sample_n: candidates.len(),
        k: cfg.k,
        top_k: top.iter().map(|c| c.id.clone()).collect(),
        chosen_id: chosen.id.clone(),
        chosen_placement: chosen.placement,
        chosen_spatial_score: chosen.spatial_score,
        adjusted,
        candidates,
        composite: None,
    };
    Ok((image, report))
}

#[cfg(test)]
mod tests;
