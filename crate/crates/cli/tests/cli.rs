//! End-to-end tests of the `corrgroup` binary: subcommand contracts, exit
//! codes, and file outputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corrgroup"))
}

fn bundled_model() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/bumpy_torus.ply")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn unknown_algorithm_is_a_usage_error() {
    let out = bin()
        .args(["group", "--model", "x.ply", "--scene", "y.ply", "--algo", "foo"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_model_file_is_an_io_error() {
    let out = bin()
        .args(["group", "--model", "/nonexistent.ply", "--scene", "/nonexistent.ply", "--algo", "ransac"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn group_identity_pair_keeps_every_match() {
    let model = bundled_model();
    let out = bin()
        .args([
            "group",
            "--model",
            model.to_str().unwrap(),
            "--scene",
            model.to_str().unwrap(),
            "--algo",
            "ransac",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let field = |key: &str| -> f64 {
        text.split_whitespace()
            .find_map(|tok| tok.strip_prefix(&format!("{key}=")))
            .unwrap_or_else(|| panic!("missing {key} in `{text}`"))
            .parse()
            .unwrap()
    };
    let n_raw = field("n_raw");
    let n_inlier = field("n_inlier");
    assert!(n_raw > 100.0, "n_raw = {n_raw}");
    // identity pair: the raw set is all-correct, so grouping keeps it all
    assert_eq!(n_raw, n_inlier);
}

#[test]
fn group_dump_inliers_writes_csv() {
    let model = bundled_model();
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("inliers.csv");
    let out = bin()
        .args([
            "group",
            "--model",
            model.to_str().unwrap(),
            "--scene",
            model.to_str().unwrap(),
            "--algo",
            "gc",
            "--dump-inliers",
            "--out",
            dump.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&dump).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "model_id,scene_id,mx,my,mz,sx,sy,sz,similarity"
    );
    assert!(lines.count() > 100);
}

#[test]
fn synth_writes_scene_files_and_reproducible_manifest() {
    let model = bundled_model();
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out_dir in [&out_a, &out_b] {
        let out = bin()
            .args([
                "synth",
                "--model",
                model.to_str().unwrap(),
                "--out",
                out_dir.to_str().unwrap(),
                "--seed",
                "9",
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }

    let plys = |d: &Path| {
        std::fs::read_dir(d)
            .unwrap()
            .filter(|e| {
                e.as_ref().unwrap().path().extension().and_then(|s| s.to_str()) == Some("ply")
            })
            .count()
    };
    assert_eq!(plys(&out_a), 80);

    let manifest_a = std::fs::read_to_string(out_a.join("manifest.toml")).unwrap();
    let manifest_b = std::fs::read_to_string(out_b.join("manifest.toml")).unwrap();
    assert_eq!(manifest_a, manifest_b);

    // every recorded ground truth is a proper rotation
    let manifest = corrgroup::SceneManifest::load(out_a.join("manifest.toml")).unwrap();
    assert_eq!(manifest.scenes.len(), 80);
    for entry in &manifest.scenes {
        entry.ground_truth().expect("orthonormal det-+1 rotation");
    }
}

#[test]
fn bench_minimal_config_counts_rows_and_report_aggregates() {
    let model = bundled_model();
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("out.csv");
    let config_path = dir.path().join("bench.toml");
    std::fs::write(
        &config_path,
        format!(
            r#"
models = ["{}"]
base_seed = 5
output = "{}"
algorithms = ["ransac", "gc"]

[scenes]
source = "specs"

[[scenes.specs]]
rotation_seed = 1
noise_sigma = 0.1
downsample_keep_ratio = 1.0
rng_seed = 2

[[scenes.specs]]
rotation_seed = 3
noise_sigma = 0.2
downsample_keep_ratio = 1.0
rng_seed = 4
"#,
            model.display(),
            csv_path.display()
        ),
    )
    .unwrap();

    let out = bin()
        .args(["bench", "--config", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("determinism_hash="));

    let text = std::fs::read_to_string(&csv_path).unwrap();
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("model,"))
        .collect();
    // 2 scenes × 2 algorithms + aggregates (2 noise levels + 1 keep level per algorithm)
    let scene_rows = rows.iter().filter(|l| !l.contains("agg_")).count();
    assert_eq!(scene_rows, 4);
    let agg_rows = rows.iter().filter(|l| l.contains("agg_")).count();
    assert_eq!(agg_rows, 2 * 2 + 2);

    // report over the bench output
    let agg_path = dir.path().join("agg.csv");
    let out = bin()
        .args([
            "report",
            "--input",
            csv_path.to_str().unwrap(),
            "--out",
            agg_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let agg = std::fs::read_to_string(&agg_path).unwrap();
    let recomputed: Vec<&str> = agg
        .lines()
        .filter(|l| l.contains("agg_"))
        .collect();
    assert_eq!(recomputed.len(), 6);
    // recomputed aggregates agree with the bench's own
    for line in recomputed {
        assert!(
            text.lines().any(|l| {
                let mut a: Vec<&str> = l.split(',').collect();
                let mut b: Vec<&str> = line.split(',').collect();
                if a.len() == 14 && b.len() == 14 {
                    a[11] = "";
                    b[11] = "";
                    a == b
                } else {
                    false
                }
            }),
            "aggregate row not reproduced: {line}"
        );
    }
}

#[test]
fn negative_n_ran_names_the_key_and_exits_usage() {
    let model = bundled_model();
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bad.toml");
    std::fs::write(
        &config_path,
        format!(
            "models = [\"{}\"]\nbase_seed = 1\noutput = \"o.csv\"\n[params]\nN_ran = -4\n",
            model.display()
        ),
    )
    .unwrap();
    let out = bin()
        .args(["bench", "--config", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("N_ran"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bad.toml");
    std::fs::write(
        &config_path,
        "models = [\"m.ply\"]\nbase_seed = 1\noutput = \"o.csv\"\nmystery = true\n",
    )
    .unwrap();
    let out = bin()
        .args(["bench", "--config", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_files_source_consumes_synth_output() {
    let model = bundled_model();
    let dir = tempfile::tempdir().unwrap();
    let scenes = dir.path().join("scenes");
    let out = bin()
        .args([
            "synth",
            "--model",
            model.to_str().unwrap(),
            "--out",
            scenes.to_str().unwrap(),
            "--seed",
            "3",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());

    // trim the manifest to 3 scenes to keep the test quick
    let mut manifest = corrgroup::SceneManifest::load(scenes.join("manifest.toml")).unwrap();
    manifest.scenes.truncate(3);
    manifest.save(scenes.join("manifest_small.toml")).unwrap();

    let csv_path = dir.path().join("out.csv");
    let config_path = dir.path().join("bench.toml");
    std::fs::write(
        &config_path,
        format!(
            "models = [\"{}\"]\nbase_seed = 5\noutput = \"{}\"\nalgorithms = [\"gc\"]\n[scenes]\nsource = \"files\"\nmanifest = \"{}\"\n",
            model.display(),
            csv_path.display(),
            scenes.join("manifest_small.toml").display()
        ),
    )
    .unwrap();
    let out = bin()
        .args(["bench", "--config", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let scene_rows = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("model,") && !l.contains("agg_"))
        .count();
    assert_eq!(scene_rows, 3);
}
