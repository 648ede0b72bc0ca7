mod common;

use std::fs;
use std::path::Path;

use art_core::cli::{run, Cli};
use art_core::dataforge::store;
use art_core::imaging::{read_foreground, read_rgb};
use art_core::pipeline::{read_index, RetouchReport};
use art_core::trainer::read_metrics_csv;
use clap::Parser;

fn art(args: &[&str]) -> art_core::Result<()> {
    run(Cli::try_parse_from(std::iter::once("art").chain(args.iter().copied())).expect("valid arguments"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn commands_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let scenes = root.join("scenes");
    art(&["dataset", "synth", "--out", s(&scenes), "--triples", "12", "--seed", "2", "--size", "32"]).unwrap();
    assert_eq!(store::list_ids(&scenes, &[store::FG_FILE]).unwrap().len(), 12);

    let manifest = scenes.join("manifest.jsonl");
    art(&["dataset", "build", "--root", s(&scenes), "--out", s(&manifest), "--test-frac", "0.25", "--seed", "3"]).unwrap();
    assert_eq!(store::read_manifest(&manifest).unwrap().samples.len(), 60);

    let config = root.join("c.toml");
    fs::write(&config, "learning_rate = 1e-3\nbatch_size = 6\nepochs = 2\nimage_size = 16\nchannels = [4, 4]\ngrid = 2\nd_att = 6\n").unwrap();
    let ckpt = root.join("m.ckpt");
    art(&["train", "--manifest", s(&manifest), "--config", s(&config), "--out", s(&ckpt), "--seed", "1"]).unwrap();
    assert_eq!(read_metrics_csv(&root.join("m.ckpt.metrics.csv")).unwrap().len(), 2);
    assert!(root.join("m.ckpt.report.json").is_file());

    let metrics = root.join("eval.csv");
    let preds = root.join("preds.csv");
    art(&["eval", "--ckpt", s(&ckpt), "--manifest", s(&manifest), "--split", "test", "--out", s(&metrics), "--predictions", s(&preds)]).unwrap();
    let text = fs::read_to_string(&metrics).unwrap();
    assert!(text.starts_with("split,samples,accuracy,rmse,loss\ntest,15,"));
    assert_eq!(fs::read_to_string(&preds).unwrap().lines().count(), 16);

    let index = root.join("gallery.jsonl");
    art(&["gallery", "build", "--root", s(&scenes), "--out", s(&index)]).unwrap();
    assert_eq!(read_index(&index).unwrap().len(), 12);

    let fg = scenes.join("scene-00000").join(store::FG_FILE);
    let bg = scenes.join("scene-00003").join(store::BG_FILE);
    let parsing = scenes.join("scene-00003").join(store::PARSING_FILE);
    let ascent = root.join("ascent.toml");
    fs::write(&ascent, "max_iters = 5\nrestarts = 3\n").unwrap();
    let (out, traj, frames) = (root.join("adj.png"), root.join("traj.csv"), root.join("frames"));
    art(&[
        "adjust", "--ckpt", s(&ckpt), "--fg", s(&fg), "--bg", s(&bg), "--parsing", s(&parsing), "--restarts", "2", "--seed", "4",
        "--config", s(&ascent), "--traj", s(&traj), "--frames", s(&frames), "--out", s(&out),
    ])
    .unwrap();
    let rows = fs::read_to_string(&traj).unwrap();
    assert!(rows.starts_with("restart,iteration,cx,cy,scale,score\n"));
    assert!(rows.lines().skip(1).all(|l| l.starts_with("0,") || l.starts_with("1,")));
    assert!(fs::read_dir(&frames).unwrap().count() >= 1);
    assert_eq!(read_rgb(&out).unwrap().extent(), (32, 32));

    let (comp, report) = (root.join("ret.png"), root.join("ret.json"));
    art(&[
        "retouch", "--ckpt", s(&ckpt), "--fg", s(&fg), "--gallery", s(&index), "--k", "2", "--sample-n", "6", "--seed", "5",
        "--config", s(&ascent), "--out", s(&comp), "--report", s(&report),
    ])
    .unwrap();
    let r = RetouchReport::read_json(&report).unwrap();
    assert_eq!((r.candidates.len(), r.top_k.len()), (6, 2));
    assert!(r.top_k.contains(&r.chosen_id));
    assert_eq!(r.composite.as_deref(), Some(comp.as_path()));
    let chosen_bg = read_rgb(scenes.join(&r.chosen_id).join(store::BG_FILE)).unwrap();
    let fg_patch = read_foreground(&fg).unwrap();
    let support = common::support_mask(&fg_patch, &r.chosen_placement, 32, 32);
    assert_eq!(common::off_support_mismatches(&read_rgb(&comp).unwrap(), &chosen_bg, &support), 0);
}

#[test]
fn bad_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    assert!(art(&["train", "--manifest", s(&root.join("missing.jsonl")), "--out", s(&root.join("x"))]).is_err());
    let bad = root.join("bad.toml");
    fs::write(&bad, "learning_rate = 1e-3\nwarmup = 3\n").unwrap();
    let scenes = root.join("scenes");
    art(&["dataset", "synth", "--out", s(&scenes), "--triples", "4", "--seed", "1", "--size", "24"]).unwrap();
    let manifest = root.join("m.jsonl");
    art(&["dataset", "build", "--root", s(&scenes), "--out", s(&manifest), "--seed", "1"]).unwrap();
    let e = art(&["train", "--manifest", s(&manifest), "--root", s(&scenes), "--config", s(&bad), "--out", s(&root.join("x"))]).unwrap_err();
    assert!(e.to_string().contains("warmup"), "{e}");
    assert!(Cli::try_parse_from(["art", "retouch", "--ckpt", "c"]).is_err());
    assert!(Cli::try_parse_from(["art", "eval", "--ckpt", "c", "--manifest", "m", "--split", "val", "--out", "o"]).is_err());
}

#[test]
fn empty_gallery_root_gives_empty_index() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("empty");
    fs::create_dir(&root).unwrap();
    let index = dir.path().join("index.jsonl");
    art(&["gallery", "build", "--root", s(&root), "--out", s(&index)]).unwrap();
    assert!(read_index(&index).unwrap().is_empty());
}
