//! Finite-difference ascent on a placement score over (x, y, scale), with
//! random restarts.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ArtError, Result};
use crate::imaging::{self, max_displacement, prepare_encoder_input, render_foreground_canvas, ForegroundPatch, Image, ParsingMap, Placement};
use crate::scoring::{spatial_score, SpatialScoreSpec};
use crate::verifier::{Verifier, VerifierOutput};

/// Anything that rates a placement. Higher is better.
pub trait PlacementScorer: Sync {
    fn score(&self, p: &Placement) -> Result<f64>;

    /// Scores several placements; scorers that can batch override this.
    fn score_many(&self, ps: &[Placement]) -> Result<Vec<f64>> {
        ps.iter().map(|p| self.score(p)).collect()
    }
}

impl<F: Fn(&Placement) -> f64 + Sync> PlacementScorer for F {
    fn score(&self, p: &Placement) -> Result<f64> {
        Ok(self(p))
    }
}

/// The closed-form spatial score around a known origin.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticScorer {
    pub origin: (f64, f64),
    pub x_max: f64,
    pub spec: SpatialScoreSpec,
}

impl AnalyticScorer {
    pub fn new(origin: (f64, f64), canvas_w: usize, canvas_h: usize, spec: SpatialScoreSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            origin,
            x_max: max_displacement(origin, canvas_w, canvas_h)?,
            spec,
        })
    }
}

impl PlacementScorer for AnalyticScorer {
    fn score(&self, p: &Placement) -> Result<f64> {
        spatial_score(p.distance_to(self.origin), self.x_max, p.scale, &self.spec)
    }
}

/// Verifier outputs for one foreground over a fixed background. The
/// background and parsing streams are encoded once; placements are in the
/// background's native pixel coordinates.
pub struct VerifierScorer<'a> {
    verifier: &'a Verifier,
    fg: &'a ForegroundPatch,
    width: usize,
    height: usize,
    h_b: Vec<f64>,
    h_s: Vec<f64>,
}

impl<'a> VerifierScorer<'a> {
    pub fn new(verifier: &'a Verifier, fg: &'a ForegroundPatch, bg: &Image, parsing: &ParsingMap) -> Result<Self> {
        if bg.extent() != parsing.extent() {
            return Err(ArtError::Shape("background and parsing map differ in extent".into()));
        }
        let r = verifier.resolution();
        let h_b = verifier.encode(&prepare_encoder_input(bg, r))?.data;
        let h_s = verifier.encode(&prepare_encoder_input(&parsing.to_rgb(), r))?.data;
        Ok(Self {
            verifier,
            fg,
            width: bg.width(),
            height: bg.height(),
            h_b,
            h_s,
        })
    }

    pub fn extent(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Both heads at placement `p`.
    pub fn evaluate(&self, p: &Placement) -> Result<VerifierOutput> {
        let canvas = render_foreground_canvas(self.fg, p, self.width, self.height)?;
        let h_f = self.verifier.encode(&prepare_encoder_input(&canvas, self.verifier.resolution()))?;
        self.verifier.predict_features(&h_f.data, &self.h_b, &self.h_s)
    }
}

impl PlacementScorer for VerifierScorer<'_> {
    fn score(&self, p: &Placement) -> Result<f64> {
        Ok(self.evaluate(p)?.y_s)
    }
}

/// Quantity the ascent climbs. Both are increasing in the score, so the
/// best placement is the same; log-odds keeps its slope where a sigmoid
/// score flattens out near 0 or 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Score,
    LogOdds,
}

impl Objective {
    fn apply(self, score: f64) -> f64 {
        match self {
            Self::Score => score,
            Self::LogOdds => {
                let y = score.clamp(1e-300, 1.0 - f64::EPSILON / 2.0);
                y.ln() - (-y).ln_1p()
            }
        }
    }
}

/// Step sizes, rates and stopping rules for the ascent. Field names are
/// the keys of the TOML config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AscentConfig {
    /// Finite-difference step in x and y, in pixels.
    pub step_xy: f64,
    /// Finite-difference step in scale.
    pub step_s: f64,
    /// Initial ascent rate for x and y, pixels per unit of objective slope.
    pub eta_xy: f64,
    pub eta_s: f64,
    /// Largest move per iteration in x and y, in pixels.
    pub cap_xy: f64,
    pub cap_s: f64,
    /// Rate and cap multiplier after a step whose gradient sign agrees
    /// with the previous one.
    pub grow: f64,
    /// Rate and cap multiplier after a sign change.
    pub shrink: f64,
    pub max_iters: usize,
    /// Stop once the best objective has improved by less than this over
    /// the last `patience` iterations.
    pub tol: f64,
    pub patience: usize,
    pub restarts: usize,
    pub scale_min: f64,
    pub scale_max: f64,
    pub objective: Objective,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            step_xy: 2.0,
            step_s: 0.02,
            eta_xy: 200.0,
            eta_s: 2.0,
            cap_xy: 8.0,
            cap_s: 0.05,
            grow: 1.2,
            shrink: 0.5,
            max_iters: 100,
            tol: 1e-4,
            patience: 5,
            restarts: 8,
            scale_min: 0.25,
            scale_max: 4.0,
            objective: Objective::LogOdds,
        }
    }
}

impl AscentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| ArtError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ArtError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| ArtError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step_xy", self.step_xy),
            ("step_s", self.step_s),
            ("eta_xy", self.eta_xy),
            ("eta_s", self.eta_s),
            ("cap_xy", self.cap_xy),
            ("cap_s", self.cap_s),
            ("scale_min", self.scale_min),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ArtError::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.restarts == 0 {
            return Err(ArtError::Config("restarts must be >= 1".into()));
        }
        if self.patience == 0 {
            return Err(ArtError::Config("patience must be >= 1".into()));
        }
        if !(self.scale_max >= self.scale_min && self.scale_max.is_finite()) {
            return Err(ArtError::Config(format!("scale bounds [{}, {}] are empty", self.scale_min, self.scale_max)));
        }
        if !(self.grow >= 1.0 && self.shrink > 0.0 && self.shrink <= 1.0) {
            return Err(ArtError::Config("grow must be >= 1 and shrink in (0, 1]".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(ArtError::Config("tol must be >= 0".into()));
        }
        Ok(())
    }

    fn clamp_scale(&self, s: f64) -> f64 {
        s.clamp(self.scale_min, self.scale_max)
    }
}

/// Finite-difference gradient of `f` along x, y and scale: central where
/// both probes fit the scale bounds, one-sided at a bound.
fn gradient_of(f: &dyn Fn(&Placement) -> Result<f64>, p: &Placement, f0: f64, cfg: &AscentConfig) -> Result<[f64; 3]> {
    let central = |a: Placement, b: Placement, h: f64| -> Result<f64> { Ok((f(&a)? - f(&b)?) / h) };
    let dx = cfg.step_xy;
    let g_x = central(Placement { cx: p.cx + dx, ..*p }, Placement { cx: p.cx - dx, ..*p }, 2.0 * dx)?;
    let g_y = central(Placement { cy: p.cy + dx, ..*p }, Placement { cy: p.cy - dx, ..*p }, 2.0 * dx)?;
    let ds = cfg.step_s;
    let hi = (p.scale + ds).min(cfg.scale_max);
    let lo = (p.scale - ds).max(cfg.scale_min);
    let at = |s: f64| Placement { scale: s, ..*p };
    let g_s = if hi - lo <= 0.0 {
        0.0
    } else if hi == p.scale {
        (f0 - f(&at(lo))?) / (p.scale - lo)
    } else if lo == p.scale {
        (f(&at(hi))? - f0) / (hi - p.scale)
    } else {
        central(at(hi), at(lo), hi - lo)?
    };
    Ok([g_x, g_y, g_s])
}

fn checked(scorer: &dyn PlacementScorer, p: &Placement) -> Result<f64> {
    let s = scorer.score(p)?;
    if !s.is_finite() {
        return Err(ArtError::Domain(format!("scorer returned {s} at {p:?}")));
    }
    Ok(s)
}

/// Gradient of the raw score with respect to (cx, cy, scale).
pub fn numerical_gradient(scorer: &dyn PlacementScorer, p: &Placement, cfg: &AscentConfig) -> Result<[f64; 3]> {
    let f = |q: &Placement| checked(scorer, q);
    let f0 = if p.scale + cfg.step_s > cfg.scale_max || p.scale - cfg.step_s < cfg.scale_min {
        f(p)?
    } else {
        0.0
    };
    gradient_of(&f, p, f0, cfg)
}

/// Placements visited by one ascent with their scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<(Placement, f64)>,
    /// Best placement seen.
    pub best: Placement,
    pub best_score: f64,
    pub converged: bool,
}

impl Trajectory {
    pub fn iterations(&self) -> usize {
        self.points.len().saturating_sub(1)
    }
}

/// Climbs the configured objective from `init`, adapting each dimension's
/// rate and cap to the sign history of its gradient. Returns the best
/// placement seen.
pub fn ascend(scorer: &dyn PlacementScorer, init: Placement, cfg: &AscentConfig) -> Result<Trajectory> {
    cfg.validate()?;
    init.validate()?;
    if !(cfg.scale_min..=cfg.scale_max).contains(&init.scale) {
        return Err(ArtError::InvalidPlacement(format!(
            "initial scale {} outside [{}, {}]",
            init.scale, cfg.scale_min, cfg.scale_max
        )));
    }
    let obj = |q: &Placement| -> Result<f64> { Ok(cfg.objective.apply(checked(scorer, q)?)) };

    let mut p = init;
    let mut score = checked(scorer, &p)?;
    let mut points = vec![(p, score)];
    let (mut best, mut best_score) = (p, score);
    let mut best_obj = cfg.objective.apply(score);
    let mut best_history = vec![best_obj];
    let mut eta = [cfg.eta_xy, cfg.eta_xy, cfg.eta_s];
    let mut cap = [cfg.cap_xy, cfg.cap_xy, cfg.cap_s];
    let max_cap = cap;
    let mut prev_sign = [0.0f64; 3];
    let mut converged = false;

    for _ in 0..cfg.max_iters {
        let g = gradient_of(&obj, &p, cfg.objective.apply(score), cfg)?;
        let mut moved = [0.0; 3];
        for d in 0..3 {
            let sign = if g[d] > 0.0 {
                1.0
            } else if g[d] < 0.0 {
                -1.0
            } else {
                0.0
            };
            if sign * prev_sign[d] > 0.0 {
                eta[d] *= cfg.grow;
                cap[d] = (cap[d] * cfg.grow).min(max_cap[d]);
            } else if sign * prev_sign[d] < 0.0 {
                eta[d] *= cfg.shrink;
                cap[d] *= cfg.shrink;
            }
            if sign != 0.0 {
                prev_sign[d] = sign;
            }
            moved[d] = (eta[d] * g[d]).clamp(-cap[d], cap[d]);
        }
        p = Placement {
            cx: p.cx + moved[0],
            cy: p.cy + moved[1],
            scale: cfg.clamp_scale(p.scale + moved[2]),
        };
        score = checked(scorer, &p)?;
        points.push((p, score));
        let o = cfg.objective.apply(score);
        if o > best_obj {
            best_obj = o;
            best = p;
            best_score = score;
        }
        best_history.push(best_obj);
        let n = best_history.len();
        if n > cfg.patience && best_history[n - 1] - best_history[n - 1 - cfg.patience] < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(Trajectory {
        points,
        best,
        best_score,
        converged,
    })
}

/// The `k`-th restart's starting point: center uniform over the canvas,
/// scale log-uniform within bounds.
pub fn restart_init(canvas: (f64, f64), cfg: &AscentConfig, seed: u64, k: usize) -> Placement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    let (lo, hi) = (cfg.scale_min.ln(), cfg.scale_max.ln());
    Placement {
        cx: rng.random_range(0.0..=canvas.0),
        cy: rng.random_range(0.0..=canvas.1),
        scale: (lo + rng.random::<f64>() * (hi - lo)).exp(),
    }
}

/// Outcome of a multi-start ascent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiStart {
    pub best: Placement,
    pub best_score: f64,
    /// Index of the winning restart.
    pub best_restart: usize,
    pub trajectories: Vec<Trajectory>,
}

/// Runs `cfg.restarts` independent ascents from seeded random starts and
/// keeps the highest final score (lowest restart index on ties).
pub fn adjust_multistart(scorer: &dyn PlacementScorer, canvas: (f64, f64), cfg: &AscentConfig, seed: u64) -> Result<MultiStart> {
    cfg.validate()?;
    let trajectories = (0..cfg.restarts)
        .into_par_iter()
        .map(|k| ascend(scorer, restart_init(canvas, cfg, seed, k), cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut best_restart = 0;
    for (k, t) in trajectories.iter().enumerate() {
        if t.best_score > trajectories[best_restart].best_score {
            best_restart = k;
        }
    }
    let t = &trajectories[best_restart];
    Ok(MultiStart {
        best: t.best,
        best_score: t.best_score,
        best_restart,
        trajectories,
    })
}

/// Writes `restart,iteration,cx,cy,scale,score` rows.
pub fn write_trajectory_csv(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| ArtError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| ArtError::io(path, e);
    writeln!(out, "restart,iteration,cx,cy,scale,score").map_err(io)?;
    for (k, t) in trajectories.iter().enumerate() {
        for (i, (p, s)) in t.points.iter().enumerate() {
            writeln!(out, "{k},{i},{},{},{},{s}", p.cx, p.cy, p.scale).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// One composite per trajectory point, named `frame_0000.png`, ... in `dir`.
pub fn write_frames(dir: &Path, bg: &Image, fg: &ForegroundPatch, trajectory: &Trajectory) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| ArtError::io(dir, e))?;
    trajectory
        .points
        .iter()
        .enumerate()
        .map(|(i, (p, _))| {
            let path = dir.join(format!("frame_{i:04}.png"));
            imaging::write_rgb(&path, &imaging::composite(bg, fg, p)?)?;
            Ok(path)
        })
        .collect()
}
