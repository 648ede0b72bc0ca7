//! In-memory scene bank with encoder-ready background and parsing streams.

use std::collections::HashMap;
use std::path::Path;

use crate::dataforge::{store, Manifest, Sample, SceneTriple};
use crate::error::{ArtError, Result};
use crate::imaging::{prepare_encoder_input, render_foreground_canvas};
use crate::verifier::StreamInputs;

struct Entry {
    triple: SceneTriple,
    bg: Vec<f64>,
    parsing: Vec<f64>,
}

/// Scenes keyed by id, with background and parsing streams pre-rendered at
/// one encoder resolution.
pub struct SceneBank {
    resolution: usize,
    entries: HashMap<String, Entry>,
}

impl SceneBank {
    pub fn new(triples: impl IntoIterator<Item = SceneTriple>, resolution: usize) -> Self {
        let entries = triples
            .into_iter()
            .map(|t| {
                let bg = prepare_encoder_input(&t.bg, resolution).to_planar();
                let parsing = prepare_encoder_input(&t.parsing.to_rgb(), resolution).to_planar();
                (t.id.clone(), Entry { triple: t, bg, parsing })
            })
            .collect();
        Self { resolution, entries }
    }

    /// Loads every triple a manifest references from `root`.
    pub fn load(root: &Path, manifest: &Manifest, resolution: usize) -> Result<Self> {
        let triples = manifest
            .header
            .triples
            .iter()
            .map(|t| store::read_triple(root, &t.id))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(triples, resolution))
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn triple(&self, id: &str) -> Option<&SceneTriple> {
        self.entries.get(id).map(|e| &e.triple)
    }

    fn entry(&self, id: &str) -> Result<&Entry> {
        self.entries
            .get(id)
            .ok_or_else(|| ArtError::Dataset(format!("scene {id} is not loaded")))
    }

    /// Encoder inputs for one sample.
    pub fn inputs(&self, sample: &Sample) -> Result<StreamInputs> {
        let host = self.entry(&sample.bg_id)?;
        Ok(StreamInputs {
            fg: self.fg_input(sample)?,
            bg: host.bg.clone(),
            parsing: host.parsing.clone(),
        })
    }

    /// The foreground stream of a sample: the guest rendered on the host's
    /// canvas, resampled to encoder resolution.
    pub fn fg_input(&self, sample: &Sample) -> Result<Vec<f64>> {
        let host = self.entry(&sample.bg_id)?;
        let guest = self.entry(&sample.fg_id)?;
        let (w, h) = host.triple.bg.extent();
        let canvas = render_foreground_canvas(&guest.triple.fg, &sample.placement, w, h)?;
        Ok(prepare_encoder_input(&canvas, self.resolution).to_planar())
    }

    /// Background and parsing streams of a scene.
    pub fn host_streams(&self, id: &str) -> Result<(&[f64], &[f64])> {
        let e = self.entry(id)?;
        Ok((&e.bg, &e.parsing))
    }
}
