use std::path::Path;
use std::process::{Command, Output};

use semrad::io::read_pfm;

fn semrad(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semrad"))
        .current_dir(dir)
        .env_remove("SEMRAD_WORKERS")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = semrad(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn baked() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["bake", "--scene", "default", "--res", "64", "--out", "scene.pack"]);
    dir
}

fn bytes(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn bake_render_superres_pipeline() {
    let dir = baked();
    let d = dir.path();
    assert!(d.join("scene.pack.run.json").exists());
    ok(d, &["render", "--pack", "scene.pack", "--res", "12", "--out", "lo"]);
    for f in ["color.png", "color.pfm", "depth.pfm", "semantic.pfm", "normal.pfm", "opacity.pfm", "run.json"] {
        assert!(d.join("lo").join(f).exists(), "missing {f}");
    }
    ok(d, &["superres", "--pack", "scene.pack", "--res", "12", "--lowres", "lo", "--out", "hi"]);
    assert_eq!(read_pfm(d.join("hi/color.pfm")).unwrap().width(), 48);
    let stats: serde_json::Value = serde_json::from_slice(&bytes(d.join("hi/stats.json"))).unwrap();
    for key in ["evaluations_guided", "evaluations_dense_equivalent", "reduction_ratio", "open_gates_mean"] {
        assert!(stats.get(key).is_some(), "stats.json lacks {key}");
    }
    assert!(stats["reduction_ratio"].as_f64().unwrap() < 0.04);
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["render", "--bogus"][..],
        &["render", "--pack", "missing.pack", "--out", "x"][..],
        &["bake", "--res", "0", "--out", "x"][..],
        &["render", "--pack", ".", "--density-sign", "0", "--out", "x"][..],
        &[][..],
    ] {
        let out = semrad(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let out = semrad(dir.path(), &["--bogus"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn runtime_errors_exit_2() {
    let dir = baked();
    let d = dir.path();
    std::fs::write(d.join("junk.pack"), b"not a pack").unwrap();
    let out = semrad(d, &["render", "--pack", "junk.pack", "--res", "4", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    ok(d, &["render", "--pack", "scene.pack", "--res", "8", "--out", "lo"]);
    let out = semrad(d, &["superres", "--pack", "scene.pack", "--res", "6", "--lowres", "lo", "--out", "hi"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_file_replays_the_run() {
    let dir = baked();
    let d = dir.path();
    ok(d, &["render", "--pack", "scene.pack", "--res", "10", "--seed", "7", "--samples", "12", "--out", "lo"]);
    let first = bytes(d.join("lo/color.pfm"));
    std::fs::rename(d.join("lo/run.json"), d.join("run.json")).unwrap();
    std::fs::remove_dir_all(d.join("lo")).unwrap();
    // replay from another working directory
    let elsewhere = tempfile::tempdir().unwrap();
    ok(elsewhere.path(), &["--config", d.join("run.json").to_str().unwrap()]);
    assert_eq!(bytes(d.join("lo/color.pfm")), first);

    let out = semrad(d, &["--config", "run.json", "render"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn workers_fall_back_to_the_environment() {
    let dir = baked();
    let d = dir.path();
    let out = Command::new(env!("CARGO_BIN_EXE_semrad"))
        .current_dir(d)
        .env("SEMRAD_WORKERS", "3")
        .args(["render", "--pack", "scene.pack", "--res", "6", "--out", "lo"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let run: serde_json::Value = serde_json::from_slice(&bytes(d.join("lo/run.json"))).unwrap();
    assert_eq!(run["workers"], 3);
    ok(d, &["render", "--pack", "scene.pack", "--res", "6", "--workers", "1", "--out", "lo1"]);
    assert_eq!(bytes(d.join("lo/color.pfm")), bytes(d.join("lo1/color.pfm")));
}

#[test]
fn animate_names_frames_consistently() {
    let dir = baked();
    let d = dir.path();
    ok(d, &["animate", "--pack", "scene.pack", "--res", "4", "--frames", "8", "--out", "anim"]);
    let mut names: Vec<String> = std::fs::read_dir(d.join("anim"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("frame_"))
        .collect();
    names.sort();
    let want: Vec<String> = (0..8).map(|i| format!("frame_{i:03}")).collect();
    assert_eq!(names, want);
}

#[test]
fn constant_pose_sequence_repeats_frames_exactly() {
    let dir = baked();
    let d = dir.path();
    let pose = r#"{"spine": [0.0, 0.3, 0.0], "forearm_l": [0.0, 0.0, 0.5]}"#;
    std::fs::write(d.join("walk.json"), format!("[{pose}, {pose}]")).unwrap();
    ok(d, &["animate", "--pack", "scene.pack", "--poses", "walk.json", "--res", "8", "--frames", "3", "--out", "anim"]);
    let first = bytes(d.join("anim/frame_000/color.pfm"));
    for i in 1..3 {
        assert_eq!(bytes(d.join(format!("anim/frame_{i:03}/color.pfm"))), first);
    }

    std::fs::write(d.join("bad.json"), r#"[{"tail": [0, 0, 0]}]"#).unwrap();
    let out = semrad(d, &["animate", "--pack", "scene.pack", "--poses", "bad.json", "--res", "4", "--frames", "1", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tail"));
}

#[test]
fn single_frame_matches_render_then_superres() {
    let dir = baked();
    let d = dir.path();
    ok(d, &["animate", "--pack", "scene.pack", "--res", "10", "--frames", "1", "--out", "anim"]);
    ok(d, &["render", "--pack", "scene.pack", "--res", "10", "--out", "lo"]);
    ok(d, &["superres", "--pack", "scene.pack", "--res", "10", "--lowres", "lo", "--out", "hi"]);
    for f in ["color.pfm", "depth.pfm", "normal.pfm", "semantic.pfm", "opacity.pfm", "gate.pfm", "stats.json"] {
        assert_eq!(bytes(d.join("anim/frame_000").join(f)), bytes(d.join("hi").join(f)), "{f}");
    }
}

fn silhouette(path: &Path) -> (usize, usize, Vec<bool>) {
    let img = read_pfm(path).unwrap();
    let mask = img.data().iter().map(|&o| o > 0.5).collect();
    (img.width(), img.height(), mask)
}

/// Fraction of `a`'s pixels that have a pixel of `b` within one pixel.
fn covered(w: usize, h: usize, a: &[bool], b: &[bool]) -> f64 {
    let mut hit = 0;
    let mut total = 0;
    for y in 0..h {
        for x in 0..w {
            if !a[y * w + x] {
                continue;
            }
            total += 1;
            let near = (y.saturating_sub(1)..=(y + 1).min(h - 1))
                .any(|yy| (x.saturating_sub(1)..=(x + 1).min(w - 1)).any(|xx| b[yy * w + xx]));
            hit += near as usize;
        }
    }
    hit as f64 / total.max(1) as f64
}

#[test]
fn orbit_half_turn_mirrors_the_silhouette() {
    let dir = baked();
    let d = dir.path();
    ok(d, &["animate", "--pack", "scene.pack", "--res", "16", "--frames", "4", "--orbit", "--out", "orbit"]);
    let (w, h, front) = silhouette(&d.join("orbit/frame_000/opacity.pfm"));
    let (_, _, back) = silhouette(&d.join("orbit/frame_002/opacity.pfm"));
    let mirrored: Vec<bool> = (0..w * h).map(|i| back[(i / w) * w + (w - 1 - i % w)]).collect();
    assert!(front.iter().filter(|&&f| f).count() > 100);
    assert!(covered(w, h, &front, &mirrored) >= 0.99);
    assert!(covered(w, h, &mirrored, &front) >= 0.99);
    let (_, _, side) = silhouette(&d.join("orbit/frame_001/opacity.pfm"));
    assert_ne!(side, front);
}

#[test]
fn oracle_metrics_and_bench_write_their_reports() {
    let dir = baked();
    let d = dir.path();
    ok(d, &["render", "--pack", "scene.pack", "--res", "8", "--out", "lo"]);
    ok(d, &["superres", "--pack", "scene.pack", "--res", "8", "--lowres", "lo", "--out", "hi"]);
    ok(d, &["oracle", "--pack", "scene.pack", "--res", "32", "--samples", "24", "--out", "ref"]);
    ok(
        d,
        &[
            "metrics", "--test", "hi", "--reference", "ref", "--lowres", "lo", "--extract-pack", "scene.pack",
            "--extract-res", "8", "--out", "report.json",
        ],
    );
    let report: serde_json::Value = serde_json::from_slice(&bytes(d.join("report.json"))).unwrap();
    assert!(report["psnr"]["db"].as_f64().unwrap() > 15.0);
    assert_eq!(report["mae"].as_array().unwrap().len(), 3);
    assert!(report["upsample_consistency"].as_f64().is_some());
    assert!(report["eval_counts"]["guided"].as_u64().unwrap() > 0);
    assert_eq!(report["extraction"].as_array().unwrap().len(), 6);

    ok(d, &["bench", "--pack", "scene.pack", "--res", "4", "--worker-counts", "1,2", "--out", "bench.csv"]);
    let csv = String::from_utf8(bytes(d.join("bench.csv"))).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), semrad::bench::CSV_HEADER);
    assert_eq!(lines.count(), 6);
}
