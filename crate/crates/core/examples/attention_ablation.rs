//! Trains the full verifier and the variant without bi-attention under the
//! same seed and data, and prints both metric sets.
//!
//! `cargo run --release --example attention_ablation -- [epochs]`

use art_core::dataforge::{build_dataset, synth::synth_corpus, DatasetConfig};
use art_core::trainer::{ablate_attention, train, SceneBank, TrainConfig};

fn main() -> art_core::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(5, |s| s.parse().expect("epoch count"));
    let triples = synth_corpus(120, 4, 64, 64, 3)?;
    let metas: Vec<_> = triples.iter().map(|t| t.meta()).collect();
    let manifest = build_dataset(&metas, &DatasetConfig::default(), 3)?;
    let full = TrainConfig {
        epochs,
        learning_rate: 1e-4,
        patience: 0,
        seed: 5,
        ..TrainConfig::default()
    };
    let bank = SceneBank::new(triples, full.image_size);
    for (name, cfg) in [("full", full.clone()), ("-attention", ablate_attention(&full))] {
        let (ckpt, report) = train(&manifest, &bank, &cfg, |_| {})?;
        println!(
            "{name:>10}: {} parameters, accuracy {:.3}, rmse {:.3}, final train loss {:.4}",
            ckpt.verifier.params().len(),
            report.accuracy,
            report.rmse,
            report.final_train_loss()
        );
    }
    Ok(())
}
