//! Alpha-blends a synthetic figure onto a background at three placements
//! and writes the composites as PNG.
//!
//! `cargo run --example composite -- [out_dir]`

use std::path::PathBuf;

use art_core::dataforge::synth::synth_corpus;
use art_core::imaging::{composite, write_rgb, Placement};

fn main() -> art_core::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "composites".into()));
    std::fs::create_dir_all(&out).map_err(|source| art_core::ArtError::Io { path: out.clone(), source })?;
    let scenes = synth_corpus(2, 2, 128, 128, 1)?;
    let (fg, bg) = (&scenes[0].fg, &scenes[1].bg);
    let poses = [
        ("origin", fg.origin_placement()),
        ("sky", Placement::new(64.0, 20.0, 1.0)?),
        ("giant", Placement::new(64.0, 80.0, 2.5)?),
    ];
    for (name, p) in poses {
        let path = out.join(format!("{name}.png"));
        write_rgb(&path, &composite(bg, fg, &p)?)?;
        println!("{name:>6}: {p:?} -> {}", path.display());
    }
    Ok(())
}
