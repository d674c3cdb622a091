//! End-to-end runs on a small synthetic dataset.

mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use support::{copy_dir, files, mtimes, scratch, small_config};
use wppg::config::PipelineConfig;
use wppg::pipeline::{Pipeline, Stage};
use wppg::segstore;
use wppg::CliError;
use wppg_core::sigproc::{Modality, Quality};

struct Fixture {
    manifest: PathBuf,
    out: PathBuf,
}

/// One full run shared by the read-only tests; others copy its output.
fn fixture() -> &'static Fixture {
    static RUN: OnceLock<Fixture> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = scratch("pipeline_fixture");
        let manifest = wppg::synthetic::write_synthetic_dataset(&dir.join("data"), 6, 12, 5).unwrap();
        let out = dir.join("out");
        quiet(small_config(manifest.clone(), out.clone())).run_all().unwrap();
        Fixture { manifest, out }
    })
}

fn quiet(cfg: PipelineConfig) -> Pipeline {
    let mut p = Pipeline::new(cfg).unwrap();
    p.verbose = false;
    p
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn copy_of_fixture(name: &str) -> (PathBuf, PipelineConfig) {
    let f = fixture();
    let out = scratch(name).join("out");
    copy_dir(&f.out, &out);
    (out.clone(), small_config(f.manifest.clone(), out))
}

#[test]
fn gate_partitions_every_window() {
    let out = &fixture().out;
    let pre = json(&out.join("preprocess/summary.json"));
    let qc = json(&out.join("qc/summary.json"));
    assert_eq!(pre["unpaired_dropped"], 0);
    assert_eq!(pre["ppg_segments"], 72);
    assert_eq!(pre["ppg_segments"], pre["ecg_segments"]);
    assert_eq!(qc["ingested"], pre["ppg_segments"]);
    assert_eq!(
        qc["acceptable"].as_u64().unwrap() + qc["corrupted"].as_u64().unwrap(),
        qc["ingested"].as_u64().unwrap()
    );
    let ppg = segstore::read(&out.join("qc/ppg_acceptable.wseg"), "qc-apply").unwrap();
    assert_eq!(ppg.len() as u64, qc["acceptable"].as_u64().unwrap());
    assert!(ppg.iter().all(|s| s.segment.quality == Quality::Acceptable));
}

#[test]
fn ecg_follows_the_ppg_gate() {
    let out = &fixture().out;
    let keys = |m: Modality| -> BTreeSet<(String, usize, u8)> {
        let name = if m == Modality::Ppg { "ppg" } else { "ecg" };
        segstore::read(&out.join(format!("qc/{name}_acceptable.wseg")), "qc-apply")
            .unwrap()
            .into_iter()
            .map(|s| {
                assert_eq!(s.segment.modality, m);
                (s.segment.source.subject_id, s.segment.source.window, s.split)
            })
            .collect()
    };
    let ppg = keys(Modality::Ppg);
    assert!(!ppg.is_empty());
    assert_eq!(ppg, keys(Modality::Ecg));
}

#[test]
fn each_split_gets_its_own_reports() {
    let out = &fixture().out;
    let ppg = segstore::read(&out.join("qc/ppg_acceptable.wseg"), "qc-apply").unwrap();
    for split in [1u8, 2] {
        let labeled = ppg
            .iter()
            .filter(|s| s.split == split && s.segment.label.class_index().is_some())
            .count() as u64;
        assert!(labeled > 0);
        for branch in ["ecg", "ppg_restored", "ppg_raw"] {
            let rows = csv_rows(&out.join(format!("reports/{branch}_split{split}_q3_confusion.csv")));
            let total: u64 = rows[1..].iter().flat_map(|r| &r[1..]).map(|v| v.parse::<u64>().unwrap()).sum();
            assert_eq!(total, labeled, "{branch} split {split}");
            assert!(out.join(format!("checkpoints/clf_{branch}_split{split}_q3.opnn")).exists());
        }
        let cmp = csv_rows(&out.join(format!("reports/split{split}_q3_comparison.csv")));
        let names: Vec<&str> = cmp[1..].iter().map(|r| r[0].as_str()).collect();
        assert_eq!(names, ["ECG", "Restored PPG", "Raw PPG"]);
    }
    assert_eq!(json(&out.join("reports/evaluate_summary.json"))["models"], 6);
}

#[test]
fn metric_cells_are_percentages_or_the_sentinel() {
    let out = &fixture().out;
    let rows = csv_rows(&out.join("reports/ppg_raw_split1_q3_metrics.csv"));
    assert_eq!(rows[0], ["Class", "Accuracy", "Precision", "Sensitivity", "F1_score", "Specificity"]);
    let classes: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(classes, ["NonAF", "AF", "Weighted Average"]);
    for cell in rows[1..].iter().flat_map(|r| &r[1..]) {
        if cell != "NA" {
            let v: f64 = cell.parse().unwrap();
            assert!((0.0..=100.0).contains(&v), "{cell}");
            assert_eq!(cell.split('.').nth(1).map(str::len), Some(4), "{cell}");
        }
    }
}

#[test]
fn entropy_report_has_a_row_per_set() {
    let rows = csv_rows(&fixture().out.join("reports/entropy.csv"));
    assert_eq!(&rows[0][..5], ["Set", "FuzzyEn", "SampEn", "ApEn", "PermEn"]);
    let sets: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(sets, ["Original", "Restored (Pass 1)"]);
}

#[test]
fn q_tables_list_orders_in_fixed_order() {
    let (out, mut cfg) = copy_of_fixture("q_order");
    // Train q=7 before q=1 so file order cannot explain the row order.
    for q in [7, 1] {
        cfg.classifier.q = q;
        let p = quiet(cfg.clone());
        p.run_stage(Stage::ClfTrain).unwrap();
        p.run_stage(Stage::Evaluate).unwrap();
    }
    for branch in ["ecg", "ppg_restored", "ppg_raw"] {
        let rows = csv_rows(&out.join(format!("reports/{branch}_split2_by_q.csv")));
        assert_eq!(rows[0], ["Classifier", "Accuracy", "Precision", "Sensitivity", "F1_score", "Specificity"]);
        let names: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
        assert_eq!(names, ["Q1", "Q3", "Q7"]);
    }
}

#[test]
fn rerun_with_same_settings_changes_nothing() {
    let (out, cfg) = copy_of_fixture("rerun");
    // The copy's effective config names a different out directory.
    let snapshot = || -> Vec<_> {
        files(&out)
            .into_iter()
            .filter(|(p, _)| p != Path::new("effective_config.json"))
            .collect()
    };
    let before = snapshot();
    let mut times = mtimes(&out);
    std::thread::sleep(std::time::Duration::from_millis(20));
    quiet(cfg).run_all().unwrap();
    let after = snapshot();
    let mut times_after = mtimes(&out);
    times.remove(Path::new("effective_config.json"));
    times_after.remove(Path::new("effective_config.json"));
    assert_eq!(times, times_after, "a skipped stage rewrote its outputs");
    let changed: Vec<_> = before.iter().zip(&after).filter(|(a, b)| a != b).map(|(a, _)| &a.0).collect();
    assert_eq!(before.len(), after.len());
    assert!(changed.is_empty(), "{changed:?}");
}

#[test]
fn changed_classifier_settings_rerun_only_downstream() {
    let (out, mut cfg) = copy_of_fixture("resume");
    let before: BTreeMap<_, _> = files(&out).into_iter().collect();
    let times = mtimes(&out);
    std::thread::sleep(std::time::Duration::from_millis(20));
    cfg.classifier.epochs = 2;
    quiet(cfg).run_all().unwrap();
    let after: BTreeMap<_, _> = files(&out).into_iter().collect();
    let times_after = mtimes(&out);
    for kept in ["checkpoints/quality_gate.opnn", "checkpoints/restorer.opnn", "restore/ppg_pass1.wseg"] {
        assert_eq!(times[Path::new(kept)], times_after[Path::new(kept)], "{kept} was rewritten");
    }
    for stamp in ["ingest", "preprocess", "qc-train", "qc-apply", "restore-train", "restore"] {
        let p = PathBuf::from(format!("stamps/{stamp}.json"));
        assert_eq!(times[&p], times_after[&p], "{stamp} reran");
    }
    assert_ne!(
        before[Path::new("checkpoints/clf_ecg_split1_q3.opnn")],
        after[Path::new("checkpoints/clf_ecg_split1_q3.opnn")]
    );
    let log = String::from_utf8(after[Path::new("logs/clf_ecg_split1_q3.csv")].clone()).unwrap();
    assert_eq!(log.lines().count(), 3, "header plus two epochs");
}

#[test]
fn a_stage_without_its_input_names_the_missing_stage() {
    let f = fixture();
    let out = scratch("missing").join("out");
    let p = quiet(small_config(f.manifest.clone(), out));
    match p.run_stage(Stage::Preprocess) {
        Err(e @ CliError::MissingArtifact { .. }) => {
            assert_eq!(e.exit_code(), 3);
            assert!(e.to_string().contains("wppg ingest"), "{e}");
        }
        other => panic!("{other:?}"),
    }
    match p.run_stage(Stage::Evaluate) {
        Err(CliError::MissingArtifact { stage, .. }) => assert!(Stage::ALL.iter().any(|s| s.name() == stage)),
        other => panic!("{other:?}"),
    }
}
