//! The full pipeline on a synthetic gallery: train a small verifier, rank
//! sixteen backgrounds for a foreground, adjust it on the top three and
//! write the composite.
//!
//! `cargo run --release --example retouch_gallery -- [out.png] [seed]`

use art_core::dataforge::{build_dataset, synth::{synth_corpus, synth_gallery_case}, DatasetConfig};
use art_core::imaging::write_rgb;
use art_core::pipeline::{retouch, Gallery, GalleryEntry, RetouchConfig};
use art_core::trainer::{train, SceneBank, TrainConfig};

fn main() -> art_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "retouched.png".into());
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));

    let triples = synth_corpus(200, 4, 64, 64, 7)?;
    let metas: Vec<_> = triples.iter().map(|t| t.meta()).collect();
    let manifest = build_dataset(&metas, &DatasetConfig::default(), 7)?;
    let cfg = TrainConfig { epochs: 8, learning_rate: 1e-4, patience: 0, seed: 2, ..TrainConfig::default() };
    let bank = SceneBank::new(triples, cfg.image_size);
    eprintln!("training a small verifier...");
    let (ckpt, report) = train(&manifest, &bank, &cfg, |_| {})?;
    eprintln!("test accuracy {:.3}, rmse {:.3}", report.accuracy, report.rmse);

    let case = synth_gallery_case(16, 64, 64, 1000 + seed)?;
    let gallery = Gallery::new(
        case.scenes
            .into_iter()
            .map(|t| GalleryEntry { id: t.id, bg: t.bg, parsing: t.parsing })
            .collect(),
    )?;
    let (image, report) = retouch(&ckpt.verifier, &case.fg, &gallery, &RetouchConfig::new(seed))?;
    for c in report.candidates.iter().take(5) {
        let mark = if c.id == case.true_id { "  <- matching scene" } else { "" };
        println!("{}  y_c {:.4}{mark}", c.id, c.y_c);
    }
    let p = report.chosen_placement;
    println!(
        "chose {} at ({:.1}, {:.1}, {:.2}), spatial score {:.4}; planted pose ({:.1}, {:.1}, 1)",
        report.chosen_id, p.cx, p.cy, p.scale, report.chosen_spatial_score, case.planted.cx, case.planted.cy
    );
    write_rgb(&out, &image)?;
    println!("composite written to {out}");
    Ok(())
}
