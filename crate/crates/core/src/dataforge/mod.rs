//! Training-case manufacture: positives, content negatives and spatial
//! negatives, plus the manifest that indexes them.

pub mod store;
pub mod synth;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ArtError, Result};
use crate::imaging::{max_displacement, ForegroundPatch, Image, ParsingMap, Placement};
use crate::scoring::{spatial_score, SpatialScoreSpec};

pub const MANIFEST_VERSION: u32 = 1;

/// One source image decomposed into foreground, background and parsing map.
#[derive(Clone, Debug)]
pub struct SceneTriple {
    pub id: String,
    pub fg: ForegroundPatch,
    pub bg: Image,
    pub parsing: ParsingMap,
    /// Scene category. Content negatives pair triples of different groups
    /// when groups are known.
    pub group: Option<String>,
}

impl SceneTriple {
    pub fn new(id: impl Into<String>, fg: ForegroundPatch, bg: Image, parsing: ParsingMap) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(ArtError::Dataset("triple id must not be empty".into()));
        }
        if bg.extent() != parsing.extent() {
            return Err(ArtError::Dataset(format!(
                "{id}: background {:?} and parsing map {:?} differ in extent",
                bg.extent(),
                parsing.extent()
            )));
        }
        let (ox, oy) = fg.origin_center();
        let (w, h) = bg.extent();
        if !(0.0..=w as f64).contains(&ox) || !(0.0..=h as f64).contains(&oy) {
            return Err(ArtError::Dataset(format!(
                "{id}: foreground origin ({ox}, {oy}) outside the {w}x{h} background"
            )));
        }
        Ok(Self { id, fg, bg, parsing, group: None })
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }

    pub fn meta(&self) -> TripleMeta {
        TripleMeta {
            id: self.id.clone(),
            width: self.bg.width(),
            height: self.bg.height(),
            origin_center: self.fg.origin_center(),
            group: self.group.clone(),
        }
    }
}

/// What case construction needs to know about a triple, without pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleMeta {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub origin_center: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl TripleMeta {
    pub fn origin_placement(&self) -> Placement {
        Placement {
            cx: self.origin_center.0,
            cy: self.origin_center.1,
            scale: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    Positive,
    ContentNegative,
    SpatialNegative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// One training record: which foreground goes on which background, where,
/// and the two targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub fg_id: String,
    pub bg_id: String,
    #[serde(flatten)]
    pub placement: Placement,
    pub content_label: bool,
    pub spatial_target: f64,
    pub case_kind: CaseKind,
    pub split: Split,
}

impl Sample {
    /// Checks the label invariants of the sample's case kind.
    pub fn check_invariants(&self, spec: &SpatialScoreSpec, bg: &TripleMeta, fg: &TripleMeta) -> Result<()> {
        let fail = |what: &str| Err(ArtError::Dataset(format!("{self:?}: {what}")));
        if bg.id != self.bg_id || fg.id != self.fg_id {
            return fail("metadata does not belong to this sample");
        }
        match self.case_kind {
            CaseKind::Positive => {
                if !self.content_label || self.spatial_target != 1.0 || self.fg_id != self.bg_id {
                    return fail("positive must be (True, 1) on its own background");
                }
                if self.placement != bg.origin_placement() {
                    return fail("positive must sit at the origin pose");
                }
            }
            CaseKind::ContentNegative => {
                if self.content_label || self.fg_id == self.bg_id {
                    return fail("content negative must be False with a foreign foreground");
                }
            }
            CaseKind::SpatialNegative => {
                if !self.content_label || self.fg_id != self.bg_id {
                    return fail("spatial negative must be True on its own background");
                }
                let x = self.placement.distance_to(bg.origin_center);
                let x_max = max_displacement(bg.origin_center, bg.width, bg.height)?;
                let y = spatial_score(x, x_max, self.placement.scale, spec)?;
                if (y - self.spatial_target).abs() > 1e-12 {
                    return fail("spatial target disagrees with the spatial score");
                }
            }
        }
        if !(self.spatial_target > 0.0 && self.spatial_target <= 1.0) {
            return fail("spatial target outside (0, 1]");
        }
        Ok(())
    }
}

/// Case counts per kind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseCounts {
    pub positive: usize,
    pub spatial_negative: usize,
    pub content_negative: usize,
}

impl CaseCounts {
    pub fn total(&self) -> usize {
        self.positive + self.spatial_negative + self.content_negative
    }

    fn add(&mut self, kind: CaseKind) {
        match kind {
            CaseKind::Positive => self.positive += 1,
            CaseKind::SpatialNegative => self.spatial_negative += 1,
            CaseKind::ContentNegative => self.content_negative += 1,
        }
    }

    pub fn of<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Self {
        let mut c = Self::default();
        for s in samples {
            c.add(s.case_kind);
        }
        c
    }
}

/// Knobs of dataset construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub negatives_per_positive: usize,
    pub spatials_per_positive: usize,
    pub test_fraction: f64,
    pub scale_bounds: (f64, f64),
    pub spec: SpatialScoreSpec,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            negatives_per_positive: 2,
            spatials_per_positive: 2,
            test_fraction: 0.2,
            scale_bounds: (0.5, 2.0),
            spec: SpatialScoreSpec::default(),
        }
    }
}

/// First record of a manifest file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub version: u32,
    pub seed: u64,
    pub config: DatasetConfig,
    pub counts: CaseCounts,
    pub test_counts: CaseCounts,
    pub triples: Vec<TripleMeta>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub samples: Vec<Sample>,
}

impl Manifest {
    pub fn seed(&self) -> u64 {
        self.header.seed
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn triple(&self, id: &str) -> Option<&TripleMeta> {
        self.header.triples.iter().find(|t| t.id == id)
    }

    /// Checks every sample's case invariant and the header counts.
    pub fn validate(&self) -> Result<()> {
        let by_id: std::collections::HashMap<&str, &TripleMeta> =
            self.header.triples.iter().map(|t| (t.id.as_str(), t)).collect();
        for s in &self.samples {
            let bg = by_id
                .get(s.bg_id.as_str())
                .ok_or_else(|| ArtError::Dataset(format!("unknown background id {}", s.bg_id)))?;
            let fg = by_id
                .get(s.fg_id.as_str())
                .ok_or_else(|| ArtError::Dataset(format!("unknown foreground id {}", s.fg_id)))?;
            s.check_invariants(&self.header.config.spec, bg, fg)?;
        }
        if CaseCounts::of(&self.samples) != self.header.counts {
            return Err(ArtError::Dataset("header counts disagree with samples".into()));
        }
        Ok(())
    }
}

/// The source triple at its original pose: (True, 1).
pub fn make_positive(t: &TripleMeta) -> Sample {
    Sample {
        fg_id: t.id.clone(),
        bg_id: t.id.clone(),
        placement: t.origin_placement(),
        content_label: true,
        spatial_target: 1.0,
        case_kind: CaseKind::Positive,
        split: Split::Train,
    }
}

/// A foreground on someone else's background. The foreground keeps its
/// origin pose, mapped proportionally onto the host canvas. Content
/// consistency does not depend on placement, so the spatial target is 1.
pub fn make_content_negative(fg_source: &TripleMeta, bg_source: &TripleMeta) -> Result<Sample> {
    if fg_source.id == bg_source.id {
        return Err(ArtError::Domain(format!(
            "content negative needs two different triples, got {} twice",
            fg_source.id
        )));
    }
    let fx = bg_source.width as f64 / fg_source.width as f64;
    let fy = bg_source.height as f64 / fg_source.height as f64;
    Ok(Sample {
        fg_id: fg_source.id.clone(),
        bg_id: bg_source.id.clone(),
        placement: Placement {
            cx: fg_source.origin_center.0 * fx,
            cy: fg_source.origin_center.1 * fy,
            scale: fy,
        },
        content_label: false,
        spatial_target: 1.0,
        case_kind: CaseKind::ContentNegative,
        split: Split::Train,
    })
}

/// Draws a placement uniformly over the canvas with log-uniform scale.
pub fn random_placement<R: Rng + ?Sized>(rng: &mut R, width: f64, height: f64, scale_bounds: (f64, f64)) -> Placement {
    let (lo, hi) = scale_bounds;
    Placement {
        cx: rng.random_range(0.0..=width),
        cy: rng.random_range(0.0..=height),
        scale: (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp(),
    }
}

/// The source pair at a random pose, labelled by the spatial score.
pub fn make_spatial_negative<R: Rng + ?Sized>(
    t: &TripleMeta,
    rng: &mut R,
    scale_bounds: (f64, f64),
    spec: &SpatialScoreSpec,
) -> Result<Sample> {
    let (lo, hi) = scale_bounds;
    if !(lo > 0.0 && lo <= hi) {
        return Err(ArtError::Domain(format!("bad scale bounds [{lo}, {hi}]")));
    }
    let placement = random_placement(rng, t.width as f64, t.height as f64, scale_bounds);
    spatial_negative_at(t, placement, spec)
}

/// A spatial negative at a given pose.
pub fn spatial_negative_at(t: &TripleMeta, placement: Placement, spec: &SpatialScoreSpec) -> Result<Sample> {
    placement.validate()?;
    let x = placement.distance_to(t.origin_center);
    let x_max = max_displacement(t.origin_center, t.width, t.height)?;
    Ok(Sample {
        fg_id: t.id.clone(),
        bg_id: t.id.clone(),
        placement,
        content_label: true,
        spatial_target: spatial_score(x, x_max, placement.scale, spec)?,
        case_kind: CaseKind::SpatialNegative,
        split: Split::Train,
    })
}

fn triple_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Builds the full manifest. Triples are split into train/test first, and
/// content-negative partners are drawn within the same split so no test
/// foreground is seen during training.
pub fn build_dataset(triples: &[TripleMeta], cfg: &DatasetConfig, seed: u64) -> Result<Manifest> {
    let n = triples.len();
    if n < 2 {
        return Err(ArtError::Dataset(format!(
            "need at least 2 triples to form content negatives, got {n}"
        )));
    }
    if !(0.0..=1.0).contains(&cfg.test_fraction) {
        return Err(ArtError::Config(format!("test fraction {} outside [0, 1]", cfg.test_fraction)));
    }
    cfg.spec.validate()?;
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = triples.iter().find(|t| !seen.insert(t.id.as_str())) {
        return Err(ArtError::Dataset(format!("duplicate triple id {}", dup.id)));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut triple_rng(seed, usize::MAX - 1));
    let n_test = (cfg.test_fraction * n as f64).round() as usize;
    let mut split = vec![Split::Train; n];
    for &i in &order[..n_test] {
        split[i] = Split::Test;
    }
    let members = |s: Split| -> Vec<usize> { (0..n).filter(|&i| split[i] == s).collect() };
    let (train_members, test_members) = (members(Split::Train), members(Split::Test));

    let mut samples = Vec::with_capacity(n * (1 + cfg.negatives_per_positive + cfg.spatials_per_positive));
    let mut foreign_pools: std::collections::HashMap<(Split, &str), Vec<usize>> = std::collections::HashMap::new();
    for (i, t) in triples.iter().enumerate() {
        let mut rng = triple_rng(seed, i);
        let own = split[i];
        let mut emit = |mut s: Sample| {
            s.split = own;
            samples.push(s);
        };
        emit(make_positive(t));
        for _ in 0..cfg.spatials_per_positive {
            emit(make_spatial_negative(t, &mut rng, cfg.scale_bounds, &cfg.spec)?);
        }
        let pool = match own {
            Split::Train => &train_members,
            Split::Test => &test_members,
        };
        // a split with a single triple borrows partners from the whole set
        let all: Vec<usize>;
        let pool = if pool.len() >= 2 {
            pool
        } else {
            all = (0..n).collect();
            &all
        };
        let partners: &[usize] = match &t.group {
            Some(g) => {
                let foreign = foreign_pools.entry((own, g.as_str())).or_insert_with(|| {
                    pool.iter().copied().filter(|&j| triples[j].group.as_ref() != Some(g)).collect()
                });
                if foreign.is_empty() { pool } else { foreign }
            }
            None => pool,
        };
        let own_pos = partners.binary_search(&i).ok();
        for _ in 0..cfg.negatives_per_positive {
            let j = match own_pos {
                Some(pos) => {
                    let k = rng.random_range(0..partners.len() - 1);
                    partners[if k >= pos { k + 1 } else { k }]
                }
                None => partners[rng.random_range(0..partners.len())],
            };
            emit(make_content_negative(&triples[j], t)?);
        }
    }

    let counts = CaseCounts::of(&samples);
    let test_counts = CaseCounts::of(samples.iter().filter(|s| s.split == Split::Test));
    Ok(Manifest {
        header: ManifestHeader {
            version: MANIFEST_VERSION,
            seed,
            config: cfg.clone(),
            counts,
            test_counts,
            triples: triples.to_vec(),
        },
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metas(n: usize) -> Vec<TripleMeta> {
        (0..n)
            .map(|i| TripleMeta {
                id: format!("t{i:03}"),
                width: 64,
                height: 48,
                origin_center: (20.0 + (i % 7) as f64, 30.0),
                group: None,
            })
            .collect()
    }

    #[test]
    fn positive_is_true_and_one_at_origin() {
        let t = &metas(1)[0];
        let s = make_positive(t);
        assert_eq!(s.case_kind, CaseKind::Positive);
        assert!(s.content_label);
        assert_eq!(s.spatial_target, 1.0);
        assert_eq!(s.placement, t.origin_placement());
        assert_eq!(s, make_positive(t));
    }

    #[test]
    fn content_negative_rejects_same_source() {
        let m = metas(8);
        assert!(make_content_negative(&m[3], &m[3]).is_err());
        let s = make_content_negative(&m[3], &m[7]).unwrap();
        assert!(!s.content_label);
        assert_eq!((s.fg_id.as_str(), s.bg_id.as_str()), ("t003", "t007"));
    }

    #[test]
    fn spatial_negative_anchor_targets() {
        let t = TripleMeta { id: "a".into(), width: 256, height: 256, origin_center: (128.0, 128.0), group: None };
        let spec = SpatialScoreSpec::default();
        let at_origin = spatial_negative_at(&t, t.origin_placement(), &spec).unwrap();
        assert!((at_origin.spatial_target - 0.999_954_6).abs() < 1e-6);
        let corner = spatial_negative_at(&t, Placement::new(256.0, 256.0, 1.0).unwrap(), &spec).unwrap();
        assert!((corner.spatial_target - 4.5398e-5).abs() < 1e-8);
    }

    #[test]
    fn spatial_targets_fall_with_displacement() {
        let t = TripleMeta { id: "a".into(), width: 256, height: 256, origin_center: (100.0, 150.0), group: None };
        let spec = SpatialScoreSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut pairs = Vec::new();
        for _ in 0..1000 {
            let s = make_spatial_negative(&t, &mut rng, (0.5, 2.0), &spec).unwrap();
            assert!(s.spatial_target > 0.0 && s.spatial_target < 1.0);
            assert!((0.5..=2.0).contains(&s.placement.scale));
            // undo the scale factor to compare at a fixed ratio
            let r = s.placement.scale;
            pairs.push((s.placement.distance_to(t.origin_center), s.spatial_target * r.max(1.0 / r)));
        }
        // Spearman rank correlation between displacement and target
        let rank = |v: Vec<f64>| -> Vec<f64> {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            let mut r = vec![0.0; v.len()];
            for (k, &i) in idx.iter().enumerate() {
                r[i] = k as f64;
            }
            r
        };
        let rx = rank(pairs.iter().map(|p| p.0).collect());
        let ry = rank(pairs.iter().map(|p| p.1).collect());
        let n = rx.len() as f64;
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
        let rho = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
        assert!(rho < -0.99, "rho = {rho}");
    }

    #[test]
    fn hundred_triples_give_expected_counts() {
        let m = build_dataset(&metas(100), &DatasetConfig::default(), 5).unwrap();
        assert_eq!(m.header.counts, CaseCounts { positive: 100, spatial_negative: 200, content_negative: 200 });
        assert_eq!(m.split(Split::Test).count(), 100);
        assert_eq!(m.header.test_counts, CaseCounts { positive: 20, spatial_negative: 40, content_negative: 40 });
        m.validate().unwrap();
    }

    #[test]
    fn content_negatives_stay_inside_their_split() {
        let m = build_dataset(&metas(30), &DatasetConfig::default(), 9).unwrap();
        let split_of = |id: &str| m.samples.iter().find(|s| s.case_kind == CaseKind::Positive && s.bg_id == id).unwrap().split;
        for s in m.samples.iter().filter(|s| s.case_kind == CaseKind::ContentNegative) {
            assert_ne!(s.fg_id, s.bg_id);
            assert_eq!(split_of(&s.fg_id), s.split);
        }
    }

    #[test]
    fn grouped_triples_pair_across_groups() {
        let mut m = metas(40);
        for (i, t) in m.iter_mut().enumerate() {
            t.group = Some(format!("g{}", i % 4));
        }
        let d = build_dataset(&m, &DatasetConfig::default(), 3).unwrap();
        let group = |id: &str| m.iter().find(|t| t.id == id).unwrap().group.clone();
        for s in d.samples.iter().filter(|s| s.case_kind == CaseKind::ContentNegative) {
            assert_ne!(group(&s.fg_id), group(&s.bg_id));
        }
        // a single group cannot be avoided, so partners fall back to any triple
        for t in m.iter_mut() {
            t.group = Some("same".into());
        }
        assert_eq!(build_dataset(&m, &DatasetConfig::default(), 3).unwrap().header.counts.content_negative, 80);
    }

    #[test]
    fn ten_triples_two_negatives_each() {
        let m = build_dataset(&metas(10), &DatasetConfig::default(), 1).unwrap();
        let negs: Vec<_> = m.samples.iter().filter(|s| s.case_kind == CaseKind::ContentNegative).collect();
        assert_eq!(negs.len(), 20);
        assert!(negs.iter().all(|s| s.fg_id != s.bg_id));
        assert_eq!(m.samples.iter().filter(|s| s.case_kind == CaseKind::Positive).count(), 10);
    }

    #[test]
    fn too_few_triples_is_an_error() {
        assert!(build_dataset(&metas(1), &DatasetConfig::default(), 0).is_err());
        let mut dup = metas(3);
        dup[2].id = dup[0].id.clone();
        assert!(build_dataset(&dup, &DatasetConfig::default(), 0).is_err());
    }

    #[test]
    fn full_scale_counts() {
        let m = build_dataset(&metas(37_395), &DatasetConfig::default(), 2).unwrap();
        assert_eq!(m.header.counts, CaseCounts { positive: 37_395, spatial_negative: 74_790, content_negative: 74_790 });
    }
}
