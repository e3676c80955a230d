//! End-to-end pipeline and command-line checks.

mod common;

use std::path::Path;
use std::process::Command;

use ars_core::dynamics::{Engine, ExaggerationForm};
use ars_core::io::{load_delimited, LabelColumn};
use ars_core::manifest::{InputFormat, RunManifest};
use ars_core::pipeline::run_pipeline;

fn ars_bin() -> &'static str {
    env!("CARGO_BIN_EXE_ars")
}

#[test]
fn manifest_round_trip_reproduces_run_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels, _) = common::materialize_digits(dir.path(), 60, &[0, 1, 2], 5);

    let mut manifest = RunManifest {
        input: images,
        input_format: InputFormat::Idx,
        labels: Some(labels.display().to_string()),
        perplexity: 8.0,
        seed: 9,
        deterministic: true,
        out_dir: dir.path().join("first"),
        loss_every: 10,
        ..RunManifest::default()
    };
    manifest.config.engine = Engine::Exact;
    manifest.config.total_iters = 30;
    manifest.config.ee_iters = 5;
    let first = run_pipeline(&manifest).unwrap();

    // Reload the manifest the run wrote, redirect output, run again.
    let mut reloaded = RunManifest::load(&manifest.out_dir.join("manifest.txt")).unwrap();
    assert_eq!(reloaded, manifest);
    reloaded.out_dir = dir.path().join("second");
    let second = run_pipeline(&reloaded).unwrap();

    assert_eq!(first.state.positions(), second.state.positions());
    let a = std::fs::read(manifest.out_dir.join("embedding.csv")).unwrap();
    let b = std::fs::read(reloaded.out_dir.join("embedding.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn embedding_file_labels_and_losses_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels, _) = common::materialize_digits(dir.path(), 40, &[0, 1], 6);
    let mut manifest = RunManifest {
        input: images,
        input_format: InputFormat::Idx,
        labels: Some(labels.display().to_string()),
        perplexity: 6.0,
        out_dir: dir.path().join("out"),
        loss_every: 7,
        snapshot_every: 10,
        ..RunManifest::default()
    };
    manifest.config.engine = Engine::Exact;
    manifest.config.total_iters = 20;
    manifest.config.ee_iters = 0;
    let out = run_pipeline(&manifest).unwrap();

    let saved = load_delimited(
        &out.embedding_path,
        ',',
        false,
        Some(LabelColumn::Last),
    )
    .unwrap();
    assert_eq!(saved.data.n(), 40);
    assert_eq!(saved.data.values(), out.state.positions());
    assert_eq!(saved.labels.as_deref(), out.labels.as_deref());

    // Loss file lines match the reports, including the final iteration.
    let text = std::fs::read_to_string(manifest.out_dir.join("losses.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), out.losses.len());
    let iters: Vec<usize> = out.losses.iter().map(|l| l.iteration).collect();
    assert_eq!(iters, vec![7, 14, 20]);
    for (line, report) in lines.iter().zip(&out.losses) {
        assert_eq!(*line, report.to_csv_line());
        assert_eq!(line.split(',').count(), 3);
    }
    assert_eq!(out.snapshots.len(), 2);
}

#[test]
fn tsne_baselines_run_through_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels, _) = common::materialize_digits(dir.path(), 50, &[0, 1], 7);
    for (name, baseline) in [
        ("tsne", ars_core::dynamics::Baseline::TsneVanilla),
        ("tsne-dbd", ars_core::dynamics::Baseline::TsneDbd),
    ] {
        let mut manifest = RunManifest {
            input: images.clone(),
            input_format: InputFormat::Idx,
            labels: Some(labels.display().to_string()),
            perplexity: 6.0,
            out_dir: dir.path().join(name),
            loss_every: 25,
            ..RunManifest::default()
        };
        manifest.config.baseline = baseline;
        manifest.config.total_iters = 50;
        manifest.config.ee_iters = 10;
        manifest.config.alpha = 12.0;
        manifest.config.h = 10.0;
        let out = run_pipeline(&manifest).unwrap();
        assert!(out.state.positions().iter().all(|v| v.is_finite()));
        assert_eq!(out.losses.last().unwrap().iteration, 50);
    }
}

#[test]
fn tsne_style_exaggeration_switches_to_swarming() {
    let dir = tempfile::tempdir().unwrap();
    let (images, _, _) = common::materialize_digits(dir.path(), 40, &[0, 1], 8);
    let mut manifest = RunManifest {
        input: images,
        input_format: InputFormat::Idx,
        perplexity: 6.0,
        out_dir: dir.path().join("out"),
        loss_every: 0,
        ..RunManifest::default()
    };
    manifest.config.engine = Engine::Exact;
    manifest.config.ee_form = ExaggerationForm::TsneStyle;
    manifest.config.ee_iters = 5;
    manifest.config.total_iters = 15;
    manifest.config.alpha = 12.0;
    let out = run_pipeline(&manifest).unwrap();
    assert_eq!(out.state.iteration(), 15);
}

#[test]
fn cli_runs_and_reports_success() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("in.csv");
    let mut content = String::new();
    for i in 0..30 {
        let cluster = (i % 3) as f64 * 10.0;
        content.push_str(&format!("{},{},{}\n", cluster + (i / 3) as f64 * 0.1, cluster, i % 3));
    }
    std::fs::write(&csv, content).unwrap();

    let out_dir = dir.path().join("out");
    let status = Command::new(ars_bin())
        .args([
            "--input",
            csv.to_str().unwrap(),
            "--labels",
            "last",
            "--perplexity",
            "4",
            "--engine",
            "exact",
            "--iters",
            "30",
            "--ee-iters",
            "5",
            "--alpha",
            "4",
            "--loss-every",
            "10",
            "--plot",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out_dir.join("embedding.csv").exists());
    assert!(out_dir.join("plot.png").exists());
    assert!(out_dir.join("manifest.txt").exists());
}

#[test]
fn cli_failure_is_stage_labeled_and_nonzero() {
    let output = Command::new(ars_bin())
        .args(["--input", "/definitely/not/here.csv"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("[io]"), "stderr was: {stderr}");
}

#[test]
fn cli_rejects_bad_idx_magic() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("bogus.idx");
    std::fs::write(&bogus, [0u8, 0, 8, 1, 0, 0, 0, 0]).unwrap();
    let output = Command::new(ars_bin())
        .args([
            "--input",
            bogus.to_str().unwrap(),
            "--input-format",
            "idx",
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("magic"), "stderr was: {stderr}");
}

/// Writing IDX fixtures through the loader path: the round trip through
/// `materialize_digits` must produce loadable, consistent files.
#[test]
fn materialized_digits_load_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels, source) = common::materialize_digits(dir.path(), 30, &[0, 1, 2], 9);
    let ds = ars_core::io::load_idx(Path::new(&images), Some(Path::new(&labels))).unwrap();
    assert_eq!(ds.data.n(), 30);
    assert_eq!(ds.data.d_in(), 784);
    let labels = ds.labels.unwrap();
    assert!(labels.iter().all(|&l| (0..=2).contains(&l)));
    assert!(!source.is_empty());
}
