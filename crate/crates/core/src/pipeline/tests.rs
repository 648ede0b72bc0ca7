use super::*;
use crate::adjuster::{ascend, restart_init};
use crate::dataforge::store::write_triple;
use crate::dataforge::synth::{synth_corpus, synth_gallery_case};
use crate::imaging::render_foreground_canvas;
use crate::verifier::{EncoderSpec, VerifierConfig};

fn tiny_verifier() -> Verifier {
    let cfg = VerifierConfig {
        encoder: EncoderSpec { resolution: 16, channels: vec![4, 4], grid: 2 },
        d_att: 6,
        ..VerifierConfig::default()
    };
    Verifier::new(cfg, 3).unwrap()
}

fn quick(seed: u64, k: usize, restarts: usize) -> RetouchConfig {
    RetouchConfig {
        k,
        ascent: AscentConfig { restarts, max_iters: 6, ..AscentConfig::default() },
        ..RetouchConfig::new(seed)
    }
}

fn gallery_of(n: usize, seed: u64) -> (ForegroundPatch, Gallery) {
    let case = synth_gallery_case(n, 32, 32, seed).unwrap();
    let entries = case
        .scenes
        .into_iter()
        .map(|t| GalleryEntry { id: t.id, bg: t.bg, parsing: t.parsing })
        .collect();
    (case.fg, Gallery::new(entries).unwrap())
}

#[test]
fn gallery_rejects_duplicates_and_mismatched_extents() {
    let (_, g) = gallery_of(2, 1);
    let mut dup = g.entries().to_vec();
    dup[1].id = dup[0].id.clone();
    assert!(Gallery::new(dup).is_err());
    let mut bad = g.entries().to_vec();
    bad[0].parsing = bad[0].parsing.resized_nearest(16, 32);
    assert!(Gallery::new(bad).is_err());
}

#[test]
fn build_counts_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("scenes");
    fs::create_dir(&root).unwrap();
    let index = dir.path().join("gallery.jsonl");

    let empty = gallery_build(&root, &index).unwrap();
    assert!(empty.entries.is_empty() && empty.rejections.is_empty());
    assert!(Gallery::load(&index).unwrap().is_empty());

    for t in synth_corpus(5, 4, 24, 24, 2).unwrap() {
        write_triple(&root, &t).unwrap();
    }
    // one pair with a parsing map of the wrong size
    let t = synth_corpus(1, 2, 24, 24, 9).unwrap().remove(0);
    imaging::write_parsing(root.join("scene-00002").join(PARSING_FILE), &t.parsing.resized_nearest(20, 24)).unwrap();
    let built = gallery_build(&root, &index).unwrap();
    assert_eq!(built.entries.len(), 4);
    assert_eq!(built.rejections.len(), 1);
    assert_eq!(built.rejections[0].id, "scene-00002");
    assert!(built.rejections[0].reason.contains("extent"));

    fs::remove_file(root.join("scene-00004").join(PARSING_FILE)).unwrap();
    let built = gallery_build(&root, &index).unwrap();
    assert_eq!(built.entries.len(), 3);
    assert_eq!(built.rejections.len(), 2);
    assert!(built.rejections[1].reason.contains("missing parsing.png"));

    let g = Gallery::load(&index).unwrap();
    assert_eq!(g.len(), 3);
    assert_eq!(g.index_path(), Some(index.as_path()));
    assert_eq!(read_index(&index).unwrap(), built.entries);
    assert!(built.entries.iter().all(|r| r.bg.is_relative()));
}

#[test]
fn sixteen_pairs_index_sixteen_entries() {
    let dir = tempfile::tempdir().unwrap();
    for t in synth_corpus(16, 4, 20, 20, 4).unwrap() {
        write_triple(dir.path(), &t).unwrap();
    }
    let index = dir.path().join("index.jsonl");
    assert_eq!(gallery_build(dir.path(), &index).unwrap().entries.len(), 16);
}

#[test]
fn single_entry_gallery_returns_it() {
    let v = tiny_verifier();
    let (fg, g) = gallery_of(1, 4);
    let ranked = rank_backgrounds(&v, &fg, &g, &quick(0, 1, 1)).unwrap();
    assert_eq!(ranked.len(), 1);
    assert_eq!(ranked[0].id, g.entries()[0].id);
}

#[test]
fn ranking_is_sorted_bounded_and_centered() {
    let v = tiny_verifier();
    let (fg, g) = gallery_of(10, 8);
    let ranked = rank_backgrounds(&v, &fg, &g, &quick(1, 3, 1)).unwrap();
    assert_eq!(ranked.len(), 10);
    let mut resorted = ranked.clone();
    resorted.reverse();
    resorted.sort_by(|a, b| b.y_c.partial_cmp(&a.y_c).unwrap().then(a.id.cmp(&b.id)));
    assert_eq!(resorted, ranked);
    for c in &ranked {
        assert!((0.0..=1.0).contains(&c.y_c));
        assert_eq!((c.placement.cx, c.placement.cy), (16.0, 16.0));
        assert!((c.placement.scale * fg.height() as f64 - 16.0).abs() < 1e-12);
        let e = g.get(&c.id).unwrap();
        assert_eq!(v.forward(&fg, &c.placement, &e.bg, &e.parsing).unwrap().y_c, c.y_c);
    }
}

#[test]
fn sampling_is_seeded_and_sized() {
    let v = tiny_verifier();
    let (fg, g) = gallery_of(12, 2);
    let cfg = RetouchConfig { sample_n: Some(5), ..quick(7, 2, 1) };
    let a = rank_backgrounds(&v, &fg, &g, &cfg).unwrap();
    let b = rank_backgrounds(&v, &fg, &g, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 5);
    let ids: HashSet<&str> = a.iter().map(|c| c.id.as_str()).collect();
    assert_eq!(ids.len(), 5);
}

#[test]
fn bad_sizes_are_errors() {
    let v = tiny_verifier();
    let (fg, g) = gallery_of(4, 2);
    assert!(rank_backgrounds(&v, &fg, &Gallery::default(), &quick(0, 1, 1)).is_err());
    assert!(rank_backgrounds(&v, &fg, &g, &quick(0, 5, 1)).is_err());
    assert!(rank_backgrounds(&v, &fg, &g, &quick(0, 0, 1)).is_err());
    assert!(rank_backgrounds(&v, &fg, &g, &RetouchConfig { sample_n: Some(5), ..quick(0, 1, 1) }).is_err());
    assert!(rank_backgrounds(&v, &fg, &g, &RetouchConfig { sample_n: Some(2), ..quick(0, 3, 1) }).is_err());
}

#[test]
fn degenerate_pipeline_is_one_rank_and_one_ascent() {
    let v = tiny_verifier();
    let (fg, g) = gallery_of(5, 6);
    let cfg = quick(5, 1, 1);
    let (img, report) = retouch(&v, &fg, &g, &cfg).unwrap();
    let top = &rank_backgrounds(&v, &fg, &g, &cfg).unwrap()[0];
    assert_eq!(report.chosen_id, top.id);
    let e = g.get(&top.id).unwrap();
    let scorer = VerifierScorer::new(&v, &fg, &e.bg, &e.parsing).unwrap();
    let t = ascend(&scorer, restart_init((32.0, 32.0), &cfg.ascent, cfg.seed, 0), &cfg.ascent).unwrap();
    assert_eq!(report.chosen_placement, t.best);
    assert_eq!(report.chosen_spatial_score, t.best_score);
    assert_eq!(img, composite(&e.bg, &fg, &t.best).unwrap());
}

#[test]
fn retouch_selects_from_top_k_and_keeps_background_off_support() {
    let v = tiny_verifier();
    let (fg, g) = gallery_of(8, 11);
    let cfg = quick(2, 3, 2);
    let (img, report) = retouch(&v, &fg, &g, &cfg).unwrap();
    assert_eq!(report.top_k.len(), 3);
    assert!(report.top_k.contains(&report.chosen_id));
    assert_eq!(report.adjusted.iter().map(|a| &a.id).collect::<Vec<_>>(), report.top_k.iter().collect::<Vec<_>>());
    let best = report.adjusted.iter().map(|a| a.spatial_score).fold(f64::MIN, f64::max);
    assert_eq!(report.chosen_spatial_score, best);

    let bg = &g.get(&report.chosen_id).unwrap().bg;
    let white = ForegroundPatch::new(
        Image::filled(fg.width(), fg.height(), [1.0; 3]).unwrap(),
        fg.alpha().to_vec(),
        fg.origin_center(),
    )
    .unwrap();
    let support = render_foreground_canvas(&white, &report.chosen_placement, bg.width(), bg.height()).unwrap();
    let mut off = 0;
    for y in 0..bg.height() {
        for x in 0..bg.width() {
            if support.pixel(x, y) == [0.0; 3] {
                assert_eq!(img.pixel(x, y), bg.pixel(x, y), "pixel ({x}, {y})");
                off += 1;
            }
        }
    }
    assert!(off > 0);

    let (img2, report2) = retouch(&v, &fg, &g, &cfg).unwrap();
    assert_eq!(img, img2);
    assert_eq!(report, report2);
}

#[test]
fn report_round_trips_through_json() {
    let v = tiny_verifier();
    let (fg, g) = gallery_of(3, 1);
    let (_, mut report) = retouch(&v, &fg, &g, &quick(4, 2, 1)).unwrap();
    report.composite = Some(PathBuf::from("out.png"));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    report.write_json(&path).unwrap();
    assert_eq!(RetouchReport::read_json(&path).unwrap(), report);
}
