//! Multi-start finite-difference ascent on the closed-form spatial score
//! with a hidden optimum, printing each restart's result.
//!
//! `cargo run --release --example adjust_analytic -- [seed]`

use art_core::adjuster::{adjust_multistart, AnalyticScorer, AscentConfig};
use art_core::scoring::SpatialScoreSpec;

fn main() -> art_core::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed"));
    let origin = (170.0, 95.0);
    let scorer = AnalyticScorer::new(origin, 256, 256, SpatialScoreSpec::default())?;
    let cfg = AscentConfig::default();
    let ms = adjust_multistart(&scorer, (256.0, 256.0), &cfg, seed)?;
    for (k, t) in ms.trajectories.iter().enumerate() {
        let (start, _) = t.points[0];
        println!(
            "restart {k}: start ({:6.1}, {:6.1}, {:.2}) -> best ({:6.2}, {:6.2}, {:.3}) score {:.6} after {} steps",
            start.cx, start.cy, start.scale, t.best.cx, t.best.cy, t.best.scale, t.best_score, t.iterations()
        );
    }
    println!(
        "winner: restart {} at ({:.2}, {:.2}, {:.3}); planted optimum ({}, {}, 1)",
        ms.best_restart, ms.best.cx, ms.best.cy, ms.best.scale, origin.0, origin.1
    );
    Ok(())
}
