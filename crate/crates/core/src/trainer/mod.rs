//! Mini-batch Adam over the combined loss, evaluation, and the attention
//! ablation switch.

mod adam;
mod data;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use data::SceneBank;

use crate::dataforge::{CaseKind, Manifest, Sample, Split};
use crate::error::{ArtError, Result};
use crate::verifier::{Checkpoint, DropoutMasks, EncoderSpec, SharedSample, Targets, Verifier, VerifierConfig};

/// Decision threshold on `y_c` for the content label.
pub const CONTENT_THRESHOLD: f64 = 0.5;

const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

/// Training hyperparameters and the architecture to train. Field names are
/// the keys of the TOML config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub lambda: f64,
    pub dropout: f64,
    pub epochs: usize,
    /// Stop after this many epochs without a lower test loss; 0 disables.
    pub patience: usize,
    pub seed: u64,
    /// Exclude content negatives from the spatial loss term.
    pub mask_spatial_loss_for_content_negatives: bool,
    /// Order each shuffled epoch so samples sharing a background are
    /// consecutive (backgrounds in random order).
    pub group_batches: bool,
    pub use_attention: bool,
    pub swap_fusion_streams: bool,
    pub d_att: usize,
    /// Encoder input side in pixels.
    pub image_size: usize,
    pub channels: Vec<usize>,
    pub grid: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let enc = EncoderSpec::desk();
        let arch = VerifierConfig::default();
        Self {
            learning_rate: 1e-5,
            batch_size: 20,
            lambda: 0.5,
            dropout: arch.dropout,
            epochs: 30,
            patience: 5,
            seed: 0,
            mask_spatial_loss_for_content_negatives: false,
            group_batches: true,
            use_attention: arch.use_attention,
            swap_fusion_streams: arch.swap_fusion_streams,
            d_att: arch.d_att,
            image_size: enc.resolution,
            channels: enc.channels,
            grid: enc.grid,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| ArtError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ArtError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| ArtError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn verifier_config(&self) -> VerifierConfig {
        VerifierConfig {
            encoder: EncoderSpec {
                resolution: self.image_size,
                channels: self.channels.clone(),
                grid: self.grid,
            },
            d_att: self.d_att,
            use_attention: self.use_attention,
            swap_fusion_streams: self.swap_fusion_streams,
            dropout: self.dropout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ArtError::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(ArtError::Config("batch_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(ArtError::Config(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if self.epochs == 0 {
            return Err(ArtError::Config("epochs must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return Err(ArtError::Config("Adam betas must be in [0, 1) and eps > 0".into()));
        }
        self.verifier_config().validate()
    }
}

/// The same configuration with the bi-attention branch removed.
pub fn ablate_attention(cfg: &TrainConfig) -> TrainConfig {
    TrainConfig {
        use_attention: false,
        ..cfg.clone()
    }
}

/// One row of the metrics CSV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches (dropout active).
    pub train_loss: f64,
    pub test_loss: f64,
    pub accuracy: f64,
    pub rmse: f64,
}

/// Per-epoch curve plus the metrics of the returned parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub first_batch_loss: f64,
    pub epochs: Vec<EpochMetrics>,
    /// Epoch whose parameters were kept (lowest test loss).
    pub best_epoch: usize,
    pub accuracy: f64,
    pub rmse: f64,
}

impl MetricsReport {
    pub fn final_train_loss(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.train_loss)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_metrics_csv(path, &self.epochs)
    }
}

pub fn write_metrics_csv(path: &Path, rows: &[EpochMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| ArtError::io(path, e))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<EpochMetrics>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(ArtError::from)).collect()
}

/// Model outputs for one evaluated sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub index: usize,
    pub fg_id: String,
    pub bg_id: String,
    pub case_kind: CaseKind,
    pub content_label: bool,
    pub spatial_target: f64,
    pub y_c: f64,
    pub y_s: f64,
    pub loss: f64,
}

/// Accuracy, RMSE and mean loss over a set of predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub rmse: f64,
    pub loss: f64,
    pub predictions: Vec<Prediction>,
}

impl Evaluation {
    fn from_predictions(predictions: Vec<Prediction>) -> Self {
        let (accuracy, rmse) = accuracy_rmse(&predictions);
        let loss = predictions.iter().map(|p| p.loss).sum::<f64>() / predictions.len().max(1) as f64;
        Self {
            accuracy,
            rmse,
            loss,
            predictions,
        }
    }

    pub fn write_predictions_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for p in &self.predictions {
            w.serialize(p)?;
        }
        w.flush().map_err(|e| ArtError::io(path, e))
    }
}

/// Content accuracy with the strict `y_c > 0.5` rule and spatial RMSE.
/// Empty input gives `(0, 0)`.
pub fn accuracy_rmse(predictions: &[Prediction]) -> (f64, f64) {
    if predictions.is_empty() {
        return (0.0, 0.0);
    }
    let n = predictions.len() as f64;
    let correct = predictions
        .iter()
        .filter(|p| (p.y_c > CONTENT_THRESHOLD) == p.content_label)
        .count();
    let sq: f64 = predictions.iter().map(|p| (p.y_s - p.spatial_target).powi(2)).sum();
    (correct as f64 / n, (sq / n).sqrt())
}

/// How a sample's loss is formed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    /// Weight of the content term; the spatial term gets `1 - lambda`.
    pub lambda: f64,
    /// Drop the spatial term for content negatives.
    pub mask_content_negatives: bool,
}

impl LossWeights {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            mask_content_negatives: false,
        }
    }

    pub fn of(cfg: &TrainConfig) -> Self {
        Self {
            lambda: cfg.lambda,
            mask_content_negatives: cfg.mask_spatial_loss_for_content_negatives,
        }
    }

    fn targets(&self, s: &Sample) -> Targets {
        Targets {
            content_label: s.content_label,
            spatial_target: s.spatial_target,
            mask_spatial: self.mask_content_negatives && s.case_kind == CaseKind::ContentNegative,
        }
    }
}

/// Runs the verifier over `samples` without dropout. Fails if the bank
/// was prepared at a different resolution than the model expects.
pub fn evaluate_samples(verifier: &Verifier, bank: &SceneBank, samples: &[&Sample], weights: LossWeights) -> Result<Evaluation> {
    if bank.resolution() != verifier.resolution() {
        return Err(ArtError::Config(format!(
            "model expects {} px inputs, data prepared at {} px",
            verifier.resolution(),
            bank.resolution()
        )));
    }
    let predictions = samples
        .par_iter()
        .enumerate()
        .map(|(index, s)| {
            let out = verifier.forward_inputs(&bank.inputs(s)?)?;
            let t = weights.targets(s);
            let parts = crate::verifier::loss(&out, t.content_label, t.spatial_target, weights.lambda, t.mask_spatial);
            Ok(Prediction {
                index,
                fg_id: s.fg_id.clone(),
                bg_id: s.bg_id.clone(),
                case_kind: s.case_kind,
                content_label: s.content_label,
                spatial_target: s.spatial_target,
                y_c: out.y_c,
                y_s: out.y_s,
                loss: parts.total,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation::from_predictions(predictions))
}

/// Evaluates a checkpoint on one split of a manifest. With `expected`
/// set, refuses a checkpoint whose architecture differs.
pub fn evaluate(
    ckpt: &Checkpoint,
    manifest: &Manifest,
    bank: &SceneBank,
    split: Split,
    weights: LossWeights,
    expected: Option<&VerifierConfig>,
) -> Result<Evaluation> {
    if let Some(cfg) = expected {
        ckpt.ensure_config(cfg)?;
    }
    let samples: Vec<&Sample> = manifest.split(split).collect();
    evaluate_samples(&ckpt.verifier, bank, &samples, weights)
}

/// Trains a verifier from scratch on the manifest's train split, tracking
/// the test split each epoch. Returns the parameters with the lowest test
/// loss. `on_epoch` sees every epoch's metrics as they are produced.
pub fn train(
    manifest: &Manifest,
    bank: &SceneBank,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(Checkpoint, MetricsReport)> {
    cfg.validate()?;
    let arch = cfg.verifier_config();
    let train_set: Vec<&Sample> = manifest.split(Split::Train).collect();
    let test_set: Vec<&Sample> = manifest.split(Split::Test).collect();
    if train_set.is_empty() {
        return Err(ArtError::Training("train split is empty".into()));
    }
    if test_set.is_empty() {
        return Err(ArtError::Training("test split is empty".into()));
    }
    let mut verifier = Verifier::new(arch.clone(), cfg.seed)?;
    if bank.resolution() != verifier.resolution() {
        return Err(ArtError::Config(format!(
            "scene bank prepared at {} px but image_size is {}",
            bank.resolution(),
            verifier.resolution()
        )));
    }
    let n_params = verifier.layout().total;
    let weights = LossWeights::of(cfg);
    let fused = arch.fused_len();
    let mut adam = Adam::new(n_params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(SHUFFLE_STREAM);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(DROPOUT_STREAM);

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut first_batch_loss = None;
    let mut epochs = Vec::new();
    let mut best: Option<(f64, usize, Vec<f64>, f64, f64)> = None;
    let mut stale = 0;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        if cfg.group_batches {
            group_by_host(&mut order, &train_set, &mut shuffle_rng);
        }
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let masks: Vec<Option<DropoutMasks>> = batch
                .iter()
                .map(|_| (cfg.dropout > 0.0).then(|| DropoutMasks::sample(&mut dropout_rng, fused, cfg.dropout)))
                .collect();
            let mut hosts: Vec<(&str, Vec<usize>)> = Vec::new();
            for (k, &i) in batch.iter().enumerate() {
                let id = train_set[i].bg_id.as_str();
                match hosts.iter_mut().find(|(h, _)| *h == id) {
                    Some((_, members)) => members.push(k),
                    None => hosts.push((id, vec![k])),
                }
            }
            let per_host = hosts
                .par_iter()
                .map(|(host, members)| {
                    let fgs = members
                        .iter()
                        .map(|&k| bank.fg_input(train_set[batch[k]]))
                        .collect::<Result<Vec<_>>>()?;
                    let items: Vec<SharedSample> = members
                        .iter()
                        .zip(&fgs)
                        .map(|(&k, fg)| SharedSample {
                            fg,
                            targets: weights.targets(train_set[batch[k]]),
                            dropout: masks[k].as_ref(),
                        })
                        .collect();
                    let (bg, parsing) = bank.host_streams(host)?;
                    let mut grad = vec![0.0; n_params];
                    let outs = verifier.accumulate_grad_shared(bg, parsing, &items, cfg.lambda, &mut grad)?;
                    let loss: f64 = outs.iter().map(|(p, _)| p.total).sum();
                    Ok((loss, grad))
                })
                .collect::<Result<Vec<(f64, Vec<f64>)>>>()?;
            let inv = 1.0 / batch.len() as f64;
            let mut grad = vec![0.0; n_params];
            let mut loss = 0.0;
            for (l, g) in &per_host {
                loss += l * inv;
                for (acc, v) in grad.iter_mut().zip(g) {
                    *acc += v * inv;
                }
            }
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(ArtError::Training(format!(
                    "non-finite loss {loss} at epoch {epoch}, batch {b} (samples {:?})",
                    batch
                )));
            }
            first_batch_loss.get_or_insert(loss);
            epoch_loss += loss;
            batches += 1;
            adam.step(verifier.params_mut(), &grad);
        }
        let eval = evaluate_samples(&verifier, bank, &test_set, weights)?;
        if !eval.loss.is_finite() {
            return Err(ArtError::Training(format!("non-finite test loss at epoch {epoch}")));
        }
        let row = EpochMetrics {
            epoch,
            train_loss: epoch_loss / batches as f64,
            test_loss: eval.loss,
            accuracy: eval.accuracy,
            rmse: eval.rmse,
        };
        on_epoch(&row);
        epochs.push(row);
        if best.as_ref().is_none_or(|b| eval.loss < b.0) {
            best = Some((eval.loss, epoch, verifier.params().to_vec(), eval.accuracy, eval.rmse));
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                break;
            }
        }
    }

    let (_, best_epoch, params, accuracy, rmse) = best.expect("at least one epoch ran");
    let verifier = Verifier::from_params(arch, params)?;
    let report = MetricsReport {
        first_batch_loss: first_batch_loss.expect("at least one batch ran"),
        epochs,
        best_epoch,
        accuracy,
        rmse,
    };
    Ok((
        Checkpoint {
            verifier,
            seed: cfg.seed,
        },
        report,
    ))
}

/// Stable-sorts `order` by a random ranking of the samples' backgrounds.
fn group_by_host(order: &mut [usize], set: &[&Sample], rng: &mut ChaCha8Rng) {
    let mut ids: Vec<&str> = set.iter().map(|s| s.bg_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.shuffle(rng);
    let rank: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    order.sort_by_key(|&i| rank[set[i].bg_id.as_str()]);
}

/// Writes `report` as pretty JSON.
pub fn write_report_json(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| ArtError::io(path, e))?;
    serde_json::to_writer_pretty(&mut f, report)?;
    writeln!(f).map_err(|e| ArtError::io(path, e))
}
