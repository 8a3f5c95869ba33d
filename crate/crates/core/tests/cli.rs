//! The `raytrack` binary: subcommands, file formats and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use raytrack::eval::MetricsReport;

fn raytrack(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_raytrack"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = raytrack(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_report(dir: &Path) -> MetricsReport {
    MetricsReport::from_json(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

/// Flattened `a.b.c` key paths of a JSON document.
fn key_paths(v: &serde_json::Value, prefix: &str, out: &mut Vec<String>) {
    if let serde_json::Value::Object(map) = v {
        for (k, child) in map {
            let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            out.push(path.clone());
            key_paths(child, &path, out);
        }
    }
}

#[test]
fn generate_writes_the_dataset_layout_and_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["generate", "--scene", "a", "--duration", "2", "--seed", "4", "--out", "one"]);
    ok(dir, &["generate", "--scene", "a", "--duration", "2", "--seed", "4", "--out", "two"]);
    let manifest = fs::read_to_string(dir.join("one/manifest")).unwrap();
    let lines: Vec<&str> = manifest.lines().collect();
    assert_eq!(lines[0], "idx,t,bin,v");
    assert_eq!(lines.len(), 61);
    assert_eq!(fs::read_to_string(dir.join("one/poses.txt")).unwrap().lines().count(), 60);
    for name in ["L_000000.pgm", "R_000059.pgm"] {
        assert!(dir.join("one/frames").join(name).is_file());
    }
    for name in ["L_000001.csv", "R_000059.csv"] {
        assert!(dir.join("one/events").join(name).is_file());
    }
    for sub in ["manifest", "poses.txt", "model.txt", "rig.txt", "frames/L_000030.pgm", "events/R_000030.csv"] {
        assert_eq!(fs::read(dir.join("one").join(sub)).unwrap(), fs::read(dir.join("two").join(sub)).unwrap());
    }
}

#[test]
fn generate_into_missing_parent_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = raytrack(tmp.path(), &["generate", "--scene", "b", "--duration", "0.2", "--out", "nowhere/ds"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere/ds"));
}

#[test]
fn track_and_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["generate", "--scene", "b", "--duration", "1", "--out", "ds"]);
    ok(dir, &["track", "--dataset", "ds", "--out", "run", "--dump-debug"]);
    let trace = fs::read_to_string(dir.join("run/trace.txt")).unwrap();
    assert_eq!(trace.lines().count(), 30);
    assert!(trace.lines().all(|l| l.split_whitespace().count() == 12));
    let status = fs::read_to_string(dir.join("run/status.csv")).unwrap();
    assert_eq!(status.lines().next(), Some("frame,status,depth,score"));
    let timing = fs::read_to_string(dir.join("run/timing.csv")).unwrap();
    assert_eq!(timing.lines().count(), 31);
    assert!(dir.join("run/debug/000000_hypotheses.csv").is_file());
    assert!(dir.join("run/debug/000000_L_labels.csv").is_file());

    ok(dir, &["eval", "--dataset", "ds", "--trace", "run/trace.txt", "--timing", "run/timing.csv", "--out", "report"]);
    let report = read_report(&dir.join("report"));
    assert_eq!(report.overall.frames, 30);
    assert!(report.fps.is_some());
    let csv = fs::read_to_string(dir.join("report/report.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("bin,metric,mean,stdev"));
}

#[test]
fn perfect_and_shifted_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["generate", "--scene", "b", "--duration", "1", "--out", "ds"]);
    ok(dir, &["eval", "--dataset", "ds", "--trace", "ds/poses.txt", "--out", "perfect"]);
    let perfect = read_report(&dir.join("perfect"));
    for bin in raytrack::eval::SpeedBin::ALL {
        if let Some(m) = perfect.bins.get(bin) {
            assert_eq!(m.add_recall_01d, 1.0);
            assert_eq!(m.adds_recall_01d, 1.0);
            assert_eq!(m.e_p.mean, 0.0);
        }
    }
    // ground truth delayed by one frame
    let gt = fs::read_to_string(dir.join("ds/poses.txt")).unwrap();
    let lines: Vec<&str> = gt.lines().collect();
    let mut shifted = vec![lines[0]];
    shifted.extend(&lines[..lines.len() - 1]);
    fs::write(dir.join("shifted.txt"), shifted.join("\n") + "\n").unwrap();
    ok(dir, &["eval", "--dataset", "ds", "--trace", "shifted.txt", "--out", "late"]);
    assert!(read_report(&dir.join("late")).overall.e_p.mean > 0.0);
}

#[test]
fn report_schema_matches_golden() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["generate", "--scene", "a", "--duration", "10", "--out", "ds"]);
    ok(dir, &["eval", "--dataset", "ds", "--trace", "ds/poses.txt", "--out", "report"]);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("report/report.json")).unwrap()).unwrap();
    let mut keys = Vec::new();
    key_paths(&json, "", &mut keys);
    keys.sort();
    let golden = include_str!("golden/report_keys.txt");
    assert_eq!(keys.join("\n"), golden.trim_end());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["generate", "--scene", "b", "--duration", "0.5", "--out", "ds"]);

    // dataset whose manifest holds no frames
    ok(dir, &["generate", "--scene", "b", "--duration", "0.2", "--out", "empty"]);
    fs::write(dir.join("empty/manifest"), "idx,t,bin,v\n").unwrap();
    fs::write(dir.join("empty/poses.txt"), "").unwrap();
    assert_eq!(raytrack(dir, &["track", "--dataset", "empty", "--out", "x"]).status.code(), Some(2));

    let gt = fs::read_to_string(dir.join("ds/poses.txt")).unwrap();
    let short: Vec<&str> = gt.lines().take(5).collect();
    fs::write(dir.join("short.txt"), short.join("\n") + "\n").unwrap();
    let out = raytrack(dir, &["eval", "--dataset", "ds", "--trace", "short.txt", "--out", "r"]);
    assert_eq!(out.status.code(), Some(3));

    fs::write(dir.join("bad.cfg"), "rpf.no_such_key = 1\n").unwrap();
    let out = raytrack(dir, &["track", "--config", "bad.cfg", "--dataset", "ds", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));

    let out = raytrack(dir, &["track", "--dataset", "ds", "--out", "x", "--modality", "infrared"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn modalities_and_config_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["generate", "--scene", "b", "--duration", "0.5", "--out", "ds"]);
    for m in ["event", "mixed"] {
        ok(dir, &["track", "--dataset", "ds", "--out", m, "--modality", m]);
        assert_eq!(fs::read_to_string(dir.join(m).join("trace.txt")).unwrap().lines().count(), 15);
    }
    fs::write(
        dir.join("run.cfg"),
        "# smaller filter\nrun.dataset = ds\nrun.out = cfgrun\namq.n = 2\nrpf.hypotheses = 32\n",
    )
    .unwrap();
    ok(dir, &["track", "--config", "run.cfg"]);
    assert!(dir.join("cfgrun/trace.txt").is_file());
}

#[test]
fn ablate_emits_one_row_per_setting() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["generate", "--scene", "b", "--duration", "0.5", "--out", "ds"]);
    ok(dir, &["ablate", "--dataset", "ds", "--out", "abl", "--axis", "amq_n"]);
    ok(dir, &["ablate", "--dataset", "ds", "--out", "abl", "--axis", "distribution"]);
    let amq = fs::read_to_string(dir.join("abl/ablation_amq_n.csv")).unwrap();
    assert_eq!(amq.lines().count(), 6);
    assert!(amq.starts_with("amq_n,frames,"));
    let dist = fs::read_to_string(dir.join("abl/ablation_distribution.csv")).unwrap();
    let settings: Vec<&str> = dist.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(settings, ["uniform", "gaussian", "laplace", "beta"]);
}

#[test]
fn bench_exit_code_follows_the_target() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let pass = raytrack(dir, &["bench", "--duration", "0.5", "--target", "1"]);
    assert!(pass.status.success());
    let text = String::from_utf8_lossy(&pass.stdout);
    assert!(text.contains("dominant stage") && text.contains("PASS"));
    let fail = raytrack(dir, &["bench", "--duration", "0.5", "--target", "1e9"]);
    assert_eq!(fail.status.code(), Some(4));
}
