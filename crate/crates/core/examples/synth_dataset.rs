//! Synthesizes scene triples, writes them to disk and builds a manifest of
//! positives, spatial negatives and content negatives.
//!
//! `cargo run --release --example synth_dataset -- [out_dir] [triples]`

use std::path::PathBuf;

use art_core::dataforge::{build_dataset, store, synth::synth_corpus, CaseCounts, DatasetConfig, Split};

fn main() -> art_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "scenes".into()));
    let n: usize = args.next().map_or(40, |s| s.parse().expect("triple count"));
    std::fs::create_dir_all(&out).map_err(|source| art_core::ArtError::Io { path: out.clone(), source })?;
    for t in synth_corpus(n, 4, 64, 64, 7)? {
        store::write_triple(&out, &t)?;
    }
    let metas = store::read_metas(&out)?;
    let manifest = build_dataset(&metas, &DatasetConfig::default(), 7)?;
    let path = out.join("manifest.jsonl");
    store::write_manifest(&path, &manifest)?;
    for split in [Split::Train, Split::Test] {
        let c = CaseCounts::of(manifest.split(split));
        println!(
            "{split:?}: {} positive, {} spatial negative, {} content negative",
            c.positive, c.spatial_negative, c.content_negative
        );
    }
    println!("manifest: {}", path.display());
    Ok(())
}
