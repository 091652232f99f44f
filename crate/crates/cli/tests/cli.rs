//! End-to-end command tests against the built binary.

use std::path::Path;
use std::process::{Command, Output};

fn sanctc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sanctc"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("exp.cfg");
    std::fs::write(
        &path,
        "\
n_layers = 1
d_h = 32
n_hds = 2
d_ff = 64
downsample = reshape
k = 2
position = additive
dropout = 0
batch_size = 8
lambda = 15
n_warmup = 40
stage_switch_epoch = 8
stage_length_epochs = 1
n_stages = 1
seed = 3
cmvn = false
deltas = none
",
    )
    .unwrap();
    path
}

#[test]
fn synth_is_deterministic_and_counts_match() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["synth", "--out", "a", "--n", "10", "--alphabet-size", "4", "--seed", "5"];
    assert_ok(&sanctc(&args, dir.path()));
    let args2 = ["synth", "--out", "b", "--n", "10", "--alphabet-size", "4", "--seed", "5"];
    assert_ok(&sanctc(&args2, dir.path()));

    let manifest_a = std::fs::read(dir.path().join("a/manifest.tsv")).unwrap();
    let manifest_b = std::fs::read(dir.path().join("b/manifest.tsv")).unwrap();
    assert_eq!(manifest_a, manifest_b);
    assert_eq!(
        String::from_utf8(manifest_a).unwrap().lines().count(),
        10,
        "one manifest line per utterance"
    );
    // feature files byte-identical across runs
    for i in 0..10 {
        let name = format!("feats/synth{i:05}.feat");
        assert_eq!(
            std::fs::read(dir.path().join("a").join(&name)).unwrap(),
            std::fs::read(dir.path().join("b").join(&name)).unwrap()
        );
    }
}

#[test]
fn synth_rejects_tiny_alphabet_with_usage_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = sanctc(
        &["synth", "--out", "x", "--n", "2", "--alphabet-size", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_required_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sanctc(&["train", "--config", "c.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_config_key_is_data_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&sanctc(
        &["synth", "--out", "corpus", "--n", "4", "--alphabet-size", "3", "--seed", "1"],
        dir.path(),
    ));
    std::fs::write(dir.path().join("bad.cfg"), "warmup_steps = 10\n").unwrap();
    let out = sanctc(
        &[
            "train",
            "--config",
            "bad.cfg",
            "--manifest",
            "corpus/manifest.tsv",
            "--dev",
            "corpus/manifest.tsv",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("warmup_steps"), "{stderr}");
}

#[test]
fn train_decode_score_analyze_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&sanctc(
        &["synth", "--out", "train", "--n", "20", "--alphabet-size", "3", "--seed", "1"],
        dir.path(),
    ));
    assert_ok(&sanctc(
        &["synth", "--out", "dev", "--n", "5", "--alphabet-size", "3", "--seed", "2"],
        dir.path(),
    ));
    write_config(dir.path());

    let train_args = [
        "train",
        "--config",
        "exp.cfg",
        "--manifest",
        "train/manifest.tsv",
        "--dev",
        "dev/manifest.tsv",
        "--out",
        "run",
    ];
    assert_ok(&sanctc(&train_args, dir.path()));
    assert!(dir.path().join("run/best.ckpt").exists());
    assert!(dir.path().join("run/log.tsv").exists());

    // rerun reproduces the epoch log byte for byte
    let log1 = std::fs::read(dir.path().join("run/log.tsv")).unwrap();
    assert_ok(&sanctc(&train_args, dir.path()));
    assert_eq!(log1, std::fs::read(dir.path().join("run/log.tsv")).unwrap());

    // greedy decode matches beam with width 1 on this easy corpus
    assert_ok(&sanctc(
        &[
            "decode", "--checkpoint", "run/best.ckpt", "--manifest", "dev/manifest.tsv",
            "--out", "hyp_greedy.tsv",
        ],
        dir.path(),
    ));
    assert_ok(&sanctc(
        &[
            "decode", "--checkpoint", "run/best.ckpt", "--manifest", "dev/manifest.tsv",
            "--mode", "beam", "--beam-width", "1", "--out", "hyp_beam.tsv",
        ],
        dir.path(),
    ));
    assert_eq!(
        std::fs::read(dir.path().join("hyp_greedy.tsv")).unwrap(),
        std::fs::read(dir.path().join("hyp_beam.tsv")).unwrap()
    );

    let score_out = sanctc(
        &["score", "--ref", "dev/manifest.tsv", "--hyp", "hyp_greedy.tsv"],
        dir.path(),
    );
    assert_ok(&score_out);
    let stdout = String::from_utf8_lossy(&score_out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("corpus\t")), "{stdout}");

    // analysis tables: one spread row per (layer, head), offsets cover the window
    assert_ok(&sanctc(
        &[
            "analyze", "--checkpoint", "run/best.ckpt", "--manifest", "dev/manifest.tsv",
            "--out", "analysis", "--window", "4",
        ],
        dir.path(),
    ));
    let spread = std::fs::read_to_string(dir.path().join("analysis/spread.tsv")).unwrap();
    assert_eq!(spread.lines().count(), 3, "header plus one line per (layer, head)");
    let profile = std::fs::read_to_string(dir.path().join("analysis/profile.tsv")).unwrap();
    let offsets: Vec<i64> = profile
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("0\t0\t"))
        .map(|l| l.split('\t').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(offsets, (-4..=4).collect::<Vec<i64>>());

    // rerun determinism for analyze
    assert_ok(&sanctc(
        &[
            "analyze", "--checkpoint", "run/best.ckpt", "--manifest", "dev/manifest.tsv",
            "--out", "analysis2", "--window", "4",
        ],
        dir.path(),
    ));
    assert_eq!(
        std::fs::read(dir.path().join("analysis/profile.tsv")).unwrap(),
        std::fs::read(dir.path().join("analysis2/profile.tsv")).unwrap()
    );

    // inspect prints the tensor inventory
    let inspect = sanctc(&["inspect-checkpoint", "--checkpoint", "run/best.ckpt"], dir.path());
    assert_ok(&inspect);
    let text = String::from_utf8_lossy(&inspect.stdout);
    assert!(text.contains("proj.w"), "{text}");
    assert!(text.contains("total parameters"), "{text}");
}

#[test]
fn decode_grid_file_directly() {
    let dir = tempfile::tempdir().unwrap();
    // a 2-symbol grid dominated by label `a` then blank
    std::fs::write(
        dir.path().join("grid.txt"),
        "# alphabet: a b\n3 3\n-5 5 0\n5 -5 0\n5 -5 0\n",
    )
    .unwrap();
    let out = sanctc(&["decode", "--grid", "grid.txt"], dir.path());
    assert_ok(&out);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "a");
}

#[test]
fn decode_all_blank_grid_emits_empty_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("grid.txt"),
        "# alphabet: a b\n2 3\n9 0 0\n9 0 0\n",
    )
    .unwrap();
    let out = sanctc(&["decode", "--grid", "grid.txt"], dir.path());
    assert_ok(&out);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "\n");
}

#[test]
fn decode_missing_checkpoint_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sanctc(
        &["decode", "--checkpoint", "nope.ckpt", "--manifest", "nope.tsv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn score_reports_missing_utterances() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&sanctc(
        &["synth", "--out", "c", "--n", "3", "--alphabet-size", "3", "--seed", "4"],
        dir.path(),
    ));
    std::fs::write(dir.path().join("hyp.tsv"), "synth00000\tabc\n").unwrap();
    let out = sanctc(
        &["score", "--ref", "c/manifest.tsv", "--hyp", "hyp.tsv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("synth00001"), "{stderr}");
    assert!(stderr.contains("synth00002"), "{stderr}");
}

#[test]
fn score_single_substitution_rate() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ref.tsv"), "u1\tfeats/u1.feat\tabc\n").unwrap();
    std::fs::write(dir.path().join("hyp.tsv"), "u1\taxc\n").unwrap();
    let out = sanctc(
        &["score", "--ref", "ref.tsv", "--hyp", "hyp.tsv"],
        dir.path(),
    );
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("corpus\t1\t3\t0.3333"), "{stdout}");
}
