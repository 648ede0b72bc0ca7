//! Trains a verifier on an in-memory synthetic corpus and reports test
//! accuracy and spatial RMSE per epoch.
//!
//! `cargo run --release --example train_verifier -- [epochs] [learning_rate]`

use art_core::dataforge::{build_dataset, synth::synth_corpus, DatasetConfig};
use art_core::trainer::{train, SceneBank, TrainConfig};

fn main() -> art_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map_or(10, |s| s.parse().expect("epoch count"));
    let learning_rate: f64 = args.next().map_or(1e-4, |s| s.parse().expect("learning rate"));
    let triples = synth_corpus(200, 4, 64, 64, 7)?;
    let metas: Vec<_> = triples.iter().map(|t| t.meta()).collect();
    let manifest = build_dataset(&metas, &DatasetConfig::default(), 7)?;
    let cfg = TrainConfig {
        epochs,
        learning_rate,
        patience: 0,
        seed: 1,
        ..TrainConfig::default()
    };
    let bank = SceneBank::new(triples, cfg.image_size);
    let (_, report) = train(&manifest, &bank, &cfg, |m| {
        println!(
            "epoch {:>3}  train {:.4}  test {:.4}  accuracy {:.3}  rmse {:.3}",
            m.epoch, m.train_loss, m.test_loss, m.accuracy, m.rmse
        )
    })?;
    println!(
        "first batch loss {:.4}, kept epoch {} (accuracy {:.3}, rmse {:.3})",
        report.first_batch_loss, report.best_epoch, report.accuracy, report.rmse
    );
    Ok(())
}
