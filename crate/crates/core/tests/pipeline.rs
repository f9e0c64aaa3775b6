use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use graspset::codec::{detokenize, find_stream, BinSpec, TokenVocabulary};
use graspset::dataset::GraspInputRecord;
use graspset::fixture::{write_fixture, PINNED_GRASP};
use graspset::pipeline::{
    cmd_annotate, cmd_annotate_limited, cmd_bounds, cmd_build, cmd_eval, cmd_stats, with_workers, OutputLayout,
    PipelineConfig, PipelineError, SelectedGrasp, TokenPrediction,
};
use serde_json::Value;

fn setup() -> (tempfile::TempDir, PipelineConfig) {
    let dir = tempfile::tempdir().unwrap();
    let info = write_fixture(dir.path()).unwrap();
    let config = PipelineConfig::load(&info.config).unwrap();
    (dir, config)
}

fn run_all(config: &PipelineConfig) {
    cmd_annotate(config, false).unwrap();
    cmd_bounds(config).unwrap();
    cmd_build(config).unwrap();
    cmd_stats(config).unwrap();
}

/// Relative path -> bytes for every file under `root`.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn specs(layout: &OutputLayout) -> BTreeMap<String, BinSpec> {
    ["allegro", "panda"]
        .iter()
        .map(|h| {
            let text = std::fs::read_to_string(layout.bounds(h)).unwrap();
            (h.to_string(), BinSpec::from_json(&text).unwrap())
        })
        .collect()
}

#[test]
fn fixture_keeps_nineteen_and_drops_the_pinned_grasp() {
    let (_dir, config) = setup();
    let s = cmd_annotate(&config, false).unwrap();
    assert_eq!((s.total, s.kept, s.dropped, s.failed), (20, 19, 1, 0));
    let layout = OutputLayout::new(&config.paths.output);
    let dropped = lines(&layout.dropped());
    assert_eq!(dropped.len(), 1);
    assert_eq!(dropped[0]["grasp_id"], PINNED_GRASP);
    assert_eq!(dropped[0]["reason"], "penetration");
    assert!(!layout.journal().exists());
}

#[test]
fn rerun_reuses_and_fresh_recomputes() {
    let (_dir, config) = setup();
    cmd_annotate(&config, false).unwrap();
    let layout = OutputLayout::new(&config.paths.output);
    let before = snapshot(&layout.root);
    let s = cmd_annotate(&config, false).unwrap();
    assert_eq!((s.computed, s.reused), (0, 20));
    assert_eq!(snapshot(&layout.root), before);
    let s = cmd_annotate(&config, true).unwrap();
    assert_eq!((s.computed, s.reused), (20, 0));
    assert_eq!(snapshot(&layout.root), before);
}

#[test]
fn changed_threshold_invalidates_cache() {
    let (_dir, mut config) = setup();
    cmd_annotate(&config, false).unwrap();
    config.penetration_threshold = 0.05;
    let s = cmd_annotate(&config, false).unwrap();
    assert_eq!((s.computed, s.kept, s.dropped), (20, 20, 0));
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let (_a, c1) = setup();
    let (_b, c4) = setup();
    with_workers(1, || run_all(&c1)).unwrap();
    with_workers(4, || run_all(&c4)).unwrap();
    let s1 = snapshot(&c1.paths.output);
    assert!(s1.len() >= 9, "{:?}", s1.keys());
    assert_eq!(s1, snapshot(&c4.paths.output));
}

#[test]
fn interrupted_annotation_resumes_to_identical_output() {
    let (_a, reference) = setup();
    cmd_annotate(&reference, false).unwrap();
    let (_b, config) = setup();
    let err = cmd_annotate_limited(&config, false, Some(2)).unwrap_err();
    assert!(matches!(err, PipelineError::Interrupted { chunks: 2 }));
    let layout = OutputLayout::new(&config.paths.output);
    assert!(layout.journal().is_dir());
    let s = cmd_annotate(&config, false).unwrap();
    assert_eq!((s.reused, s.computed), (8, 12));
    assert_eq!(snapshot(&config.paths.output), snapshot(&reference.paths.output));
}

#[test]
fn bad_lines_and_unknown_hands_become_failures() {
    let (_dir, config) = setup();
    let mut text = std::fs::read_to_string(&config.paths.grasps).unwrap();
    text.push_str("{not json\n");
    let mut odd: GraspInputRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    odd.grasp_id = "zz-odd".into();
    odd.hand = "nohand".into();
    text.push_str(&serde_json::to_string(&odd).unwrap());
    text.push('\n');
    std::fs::write(&config.paths.grasps, text).unwrap();
    let s = cmd_annotate(&config, false).unwrap();
    assert_eq!((s.total, s.kept, s.failed), (22, 19, 2));
    assert!(!s.failure_rate_exceeded());
    let failed = lines(&OutputLayout::new(&config.paths.output).failed());
    let ids: Vec<&str> = failed.iter().map(|f| f["grasp_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["line:21", "zz-odd"]);
}

#[test]
fn bounds_written_per_hand() {
    let (_dir, config) = setup();
    cmd_annotate(&config, false).unwrap();
    let b = cmd_bounds(&config).unwrap();
    assert_eq!(b.iter().map(|s| s.hand.as_str()).collect::<Vec<_>>(), ["allegro", "panda"]);
    assert_eq!(b[0].grasps + b[1].grasps, 19);
    assert!(b.iter().all(|s| s.n_bins == 384));
}

#[test]
fn built_streams_round_trip_to_selected_bins() {
    let (_dir, config) = setup();
    cmd_annotate(&config, false).unwrap();
    cmd_bounds(&config).unwrap();
    let summary = cmd_build(&config).unwrap();
    assert!(summary.samples > 0 && summary.selected > 0);
    for kind in ["single_grasp", "multi_mix", "multi_grasp"] {
        assert!(summary.per_kind.get(kind).copied().unwrap_or(0) > 0, "{kind}: {:?}", summary.per_kind);
    }
    let layout = OutputLayout::new(&config.paths.output);
    let selected: BTreeMap<String, SelectedGrasp> = lines(&layout.selected())
        .into_iter()
        .map(|v| serde_json::from_value::<SelectedGrasp>(v).unwrap())
        .map(|s| (s.grasp_id.clone(), s))
        .collect();
    let specs = specs(&layout);
    let vocab = TokenVocabulary::new(["allegro", "barrett", "jaco", "panda", "shadow"], 512);
    let mut streams = 0;
    for sample in lines(&layout.conversations()) {
        let meta = &sample["meta"];
        let ids: Vec<String> = match meta.get("grasps") {
            Some(gs) => gs.as_array().unwrap().iter().map(|g| g["grasp_id"].as_str().unwrap().to_string()).collect(),
            None => vec![meta["grasp_id"].as_str().unwrap().to_string()],
        };
        let answers: Vec<&str> = sample["turns"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|t| t["role"] == "assistant")
            .map(|t| t["text"].as_str().unwrap())
            .filter(|t| find_stream(t).is_some())
            .collect();
        assert_eq!(answers.len(), ids.len(), "{}", sample["id"]);
        for (text, id) in answers.iter().zip(&ids) {
            let at = find_stream(text).unwrap();
            let d = detokenize(&text[at..], &vocab, &specs, config.dediscretize).unwrap();
            assert_eq!(d.bins.bins, selected[id].bins, "{id}");
            streams += 1;
        }
    }
    assert!(streams >= summary.selected);
}

#[test]
fn identity_eval_has_zero_chamfer() {
    let (_dir, config) = setup();
    cmd_annotate(&config, false).unwrap();
    let layout = OutputLayout::new(&config.paths.output);
    let report = cmd_eval(&config, &layout.kept(), false).unwrap();
    assert_eq!(report.rows.len(), 19);
    assert!(report.rows.iter().all(|r| r.cd_cm == 0.0));
    assert!(report.missing.is_empty() && report.failed.is_empty());
    assert_eq!(report.overall.count, 19);
    assert!(layout.eval_json().is_file() && layout.eval_table().is_file());
}

#[test]
fn token_eval_matches_dediscretized_numeric_eval() {
    let (dir, config) = setup();
    cmd_annotate(&config, false).unwrap();
    cmd_bounds(&config).unwrap();
    cmd_build(&config).unwrap();
    let layout = OutputLayout::new(&config.paths.output);
    let specs = specs(&layout);
    let vocab = TokenVocabulary::new(["allegro", "barrett", "jaco", "panda", "shadow"], 512);
    let selected: Vec<SelectedGrasp> =
        lines(&layout.selected()).into_iter().map(|v| serde_json::from_value(v).unwrap()).collect();
    let kept: BTreeMap<String, GraspInputRecord> = lines(&layout.kept())
        .into_iter()
        .map(|v| serde_json::from_value::<GraspInputRecord>(v).unwrap())
        .map(|r| (r.grasp_id.clone(), r))
        .collect();

    let mut token_lines = String::new();
    let mut numeric_lines = String::new();
    for s in &selected {
        let stream = format!(
            "<hand:{}> <scale:10> <grasp> {} </grasp>",
            s.hand,
            s.bins.iter().map(|b| format!("<bin:{b}>")).collect::<Vec<_>>().join(" ")
        );
        let pred = TokenPrediction {
            grasp_id: s.grasp_id.clone(),
            object_id: None,
            text: format!("Sure. {stream} Done."),
            spec_hash: Some(specs[&s.hand].corpus_hash.clone()),
        };
        token_lines += &(serde_json::to_string(&pred).unwrap() + "\n");
        let d = detokenize(&stream, &vocab, &specs, config.dediscretize).unwrap();
        let rec = GraspInputRecord::from_pose(&s.grasp_id, &kept[&s.grasp_id].object_id, &d.pose, "numeric");
        numeric_lines += &(serde_json::to_string(&rec).unwrap() + "\n");
    }
    let tok = dir.path().join("tok.jsonl");
    let num = dir.path().join("num.jsonl");
    std::fs::write(&tok, token_lines).unwrap();
    std::fs::write(&num, numeric_lines).unwrap();
    let a = cmd_eval(&config, &tok, false).unwrap();
    let b = cmd_eval(&config, &num, false).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.rows.len(), selected.len());
    // Bin-center reconstruction moves the hand by at most half a bin per dimension.
    assert!(a.rows.iter().all(|r| r.cd_cm < 1.0), "{:?}", a.rows);
}

#[test]
fn spec_hash_mismatch_needs_force() {
    let (dir, config) = setup();
    cmd_annotate(&config, false).unwrap();
    cmd_bounds(&config).unwrap();
    let layout = OutputLayout::new(&config.paths.output);
    let spec = &specs(&layout)["panda"];
    let bins = vec![0u32; spec.dim()];
    let pred = TokenPrediction {
        grasp_id: "cube-panda-00".into(),
        object_id: None,
        text: format!(
            "<hand:panda> <scale:3> <grasp> {} </grasp>",
            bins.iter().map(|b| format!("<bin:{b}>")).collect::<Vec<_>>().join(" ")
        ),
        spec_hash: Some("0000".into()),
    };
    let path = dir.path().join("p.jsonl");
    std::fs::write(&path, serde_json::to_string(&pred).unwrap() + "\n").unwrap();
    assert!(cmd_eval(&config, &path, false).is_err());
    let report = cmd_eval(&config, &path, true).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.missing.len(), 18);
}

#[test]
fn stats_counts_kept_dataset() {
    let (_dir, config) = setup();
    let empty = cmd_stats(&config).unwrap();
    assert_eq!((empty.hands, empty.grasps), (0, 0));
    run_all(&config);
    let s = cmd_stats(&config).unwrap();
    assert_eq!((s.hands, s.objects, s.grasps), (2, 2, 19));
    let lines = std::fs::read_to_string(OutputLayout::new(&config.paths.output).conversations()).unwrap();
    assert_eq!(s.conversations, lines.lines().count());
    assert!(s.to_table().contains("Con."));
}

#[test]
fn downstream_stages_require_annotation() {
    let (_dir, config) = setup();
    assert!(matches!(cmd_bounds(&config), Err(PipelineError::Missing(_))));
    assert!(matches!(cmd_build(&config), Err(PipelineError::Missing(_))));
}
