//! Prints the spatial rationality score along a displacement sweep and a
//! scale sweep.

use art_core::scoring::{spatial_score, SpatialScoreSpec};

fn main() -> art_core::Result<()> {
    let spec = SpatialScoreSpec::default();
    let x_max = 100.0;
    println!("displacement sweep (scale ratio 1):");
    for x in [0.0, 10.0, 25.0, 50.0, 75.0, 100.0] {
        println!("  x = {x:>5.1}  score = {:.6}", spatial_score(x, x_max, 1.0, &spec)?);
    }
    println!("scale sweep (x = 0):");
    for r in [0.25, 0.5, 1.0, 2.0, 4.0] {
        println!("  r = {r:>4.2}  score = {:.6}", spatial_score(0.0, x_max, r, &spec)?);
    }
    Ok(())
}
