//! Builds the desk-scale verifier, reports its size, and runs it on a
//! synthetic scene with the figure at its own pose and displaced.

use art_core::dataforge::synth::synth_corpus;
use art_core::imaging::Placement;
use art_core::verifier::{Verifier, VerifierConfig};

fn main() -> art_core::Result<()> {
    let cfg = VerifierConfig::default();
    let v = Verifier::new(cfg.clone(), 0)?;
    println!(
        "{} parameters; {} features per stream; fused vectors of length {}",
        v.params().len(),
        cfg.d_flat(),
        cfg.fused_len()
    );
    for (name, range) in v.layout().named() {
        println!("  {name:<12} {}", range.len());
    }
    let scene = &synth_corpus(1, 2, 64, 64, 4)?[0];
    let origin = scene.fg.origin_placement();
    let moved = Placement::new(8.0, 8.0, 0.5)?;
    for (name, p) in [("own pose", origin), ("displaced", moved)] {
        let out = v.forward(&scene.fg, &p, &scene.bg, &scene.parsing)?;
        println!("{name:>9}: y_c {:.4}  y_s {:.4} (untrained)", out.y_c, out.y_s);
    }
    Ok(())
}
