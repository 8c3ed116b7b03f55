//! `corrgroup` — benchmark CLI for 3D correspondence grouping.
//!
//! Subcommands: `synth` (generate the 80-scene suite with a ground-truth
//! manifest), `group` (run one algorithm on a model/scene pair), `bench`
//! (run a full benchmark config to CSV) and `report` (aggregate existing
//! CSVs into per-noise / per-downsample mean curves).
//!
//! Exit status: 0 success, 1 usage or config error, 2 I/O error, 3 a
//! benchmark finished with at least one errored cell.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use corrgroup::config::{Algorithm, BenchmarkConfig, ManifestEntry, SceneManifest, Units};
use corrgroup::error::Error;
use corrgroup::evaluation::{
    aggregate_rows, determinism_hash, run_benchmark, write_csv, EvaluationRow, CSV_HEADER,
};
use corrgroup::pipeline::{extract_features, match_features, resolve_params, run_algorithm};
use corrgroup::synthesis::{benchmark_suite_specs, generate_scene};
use corrgroup::{load_ply, save_ply};

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "corrgroup", version, about = "3D correspondence grouping benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the 80-scene noise/downsampling suite plus a manifest
    /// with each scene's ground-truth transform.
    Synth(SynthArgs),
    /// Run one grouping algorithm on a model/scene pair.
    Group(GroupArgs),
    /// Run a benchmark config and write the evaluation CSV.
    Bench(BenchArgs),
    /// Aggregate benchmark CSVs into mean curves per noise level and
    /// keep ratio.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Model point cloud (PLY).
    #[arg(long)]
    model: PathBuf,
    /// Output directory for scenes and manifest.
    #[arg(long)]
    out: PathBuf,
    /// Base seed for the suite.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct GroupArgs {
    /// Model point cloud (PLY).
    #[arg(long)]
    model: PathBuf,
    /// Scene point cloud (PLY).
    #[arg(long)]
    scene: PathBuf,
    /// Algorithm: nnsr, ransac, gc, hough or mlesac.
    #[arg(long)]
    algo: String,
    /// Seed for the sampling-based algorithms.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Optional benchmark config supplying detection/description and
    /// algorithm parameters (model/scene/output entries are ignored).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the correctness/grouping threshold unit mode.
    #[arg(long, value_parser = parse_units)]
    units: Option<Units>,
    /// Override the ground-truth tolerance t.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Write the inlier correspondences as CSV.
    #[arg(long)]
    dump_inliers: bool,
    /// Destination for the inlier dump (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the worker thread count (0 = machine parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the ground-truth tolerance t.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Override the threshold unit mode (pr or abs).
    #[arg(long, value_parser = parse_units)]
    units: Option<Units>,
}

#[derive(Args)]
struct ReportArgs {
    /// Benchmark CSVs to aggregate (repeatable).
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn parse_units(s: &str) -> Result<Units, String> {
    match s {
        "pr" => Ok(Units::Pr),
        "abs" => Ok(Units::Abs),
        other => Err(format!("unknown units `{other}` (expected pr or abs)")),
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } => EXIT_USAGE,
        _ => EXIT_IO,
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Group(args) => cmd_group(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn cmd_synth(args: SynthArgs) -> Result<u8, Error> {
    let model = load_ply(&args.model)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let mut entries = Vec::with_capacity(80);
    let mut failures = 0usize;
    for (i, spec) in benchmark_suite_specs(args.seed).iter().enumerate() {
        let file = format!("scene_{i:03}.ply");
        let mut entry = ManifestEntry {
            file: file.clone(),
            noise_sigma: spec.noise_sigma,
            keep_ratio: spec.downsample_keep_ratio,
            rotation_seed: spec.rotation_seed,
            rng_seed: spec.rng_seed,
            rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            translation: [0.0, 0.0, 0.0],
            error: None,
        };
        match generate_scene(&model, spec) {
            Ok(scene) => {
                let r = scene.ground_truth.rotation();
                let mut rotation = [0.0; 9];
                for row in 0..3 {
                    for col in 0..3 {
                        rotation[row * 3 + col] = r[(row, col)];
                    }
                }
                entry.rotation = rotation;
                entry.translation = (*scene.ground_truth.translation()).into();
                save_ply(&scene.scene, args.out.join(&file))?;
            }
            Err(e) => {
                entry.error = Some(e.to_string());
                failures += 1;
            }
        }
        entries.push(entry);
    }

    let manifest = SceneManifest {
        version: SceneManifest::VERSION,
        model: args.model.display().to_string(),
        base_seed: args.seed,
        scenes: entries,
    };
    let manifest_path = args.out.join("manifest.toml");
    manifest.save(&manifest_path)?;
    println!(
        "wrote {} scenes ({} failed) and {}",
        80 - failures,
        failures,
        manifest_path.display()
    );
    Ok(if failures > 0 { EXIT_PARTIAL } else { 0 })
}

fn group_config(args: &GroupArgs) -> Result<BenchmarkConfig, Error> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            BenchmarkConfig::from_toml(&text)?
        }
        None => BenchmarkConfig::with_defaults(
            vec![args.model.clone()],
            PathBuf::from("unused.csv"),
            args.seed,
        ),
    };
    if let Some(units) = args.units {
        config.units = units;
    }
    if let Some(tolerance) = args.tolerance {
        config.tolerance = tolerance;
        config.validate()?;
    }
    Ok(config)
}

fn cmd_group(args: GroupArgs) -> Result<u8, Error> {
    let algorithm = Algorithm::parse(&args.algo)?;
    let config = group_config(&args)?;
    let model = load_ply(&args.model)?;
    let scene = load_ply(&args.scene)?;

    let resolved = resolve_params(&config, &model)?;
    let model_features = extract_features(&model, &resolved.extraction)?;
    let scene_features = extract_features(&scene, &resolved.extraction)?;
    let outcome = match_features(&model_features, &scene_features, resolved.grouping.t_nnsr)?;
    let result = run_algorithm(
        algorithm,
        &outcome,
        &model,
        &scene,
        &model_features,
        &scene_features,
        &resolved.grouping,
        args.seed,
    )?;

    println!(
        "algorithm={} n_raw={} n_inlier={} score={:.6} wall_ms={:.3}",
        algorithm,
        outcome.correspondences.len(),
        result.inliers.len(),
        result.score,
        result.wall_time.as_secs_f64() * 1e3,
    );

    if args.dump_inliers {
        let mut dump = String::from("model_id,scene_id,mx,my,mz,sx,sy,sz,similarity\n");
        for c in result.inliers.iter() {
            dump.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                c.model_id,
                c.scene_id,
                c.model_point.x,
                c.model_point.y,
                c.model_point.z,
                c.scene_point.x,
                c.scene_point.y,
                c.scene_point.z,
                c.similarity,
            ));
        }
        match &args.out {
            Some(path) => std::fs::write(path, dump).map_err(|e| Error::io(path, e))?,
            None => print!("{dump}"),
        }
    }
    Ok(0)
}

fn cmd_bench(args: BenchArgs) -> Result<u8, Error> {
    let mut config = BenchmarkConfig::load(&args.config)?;

    // Flag overrides are echoed into the CSV header so a results file
    // fully describes the run that produced it.
    let mut comments = vec![format!("config: {}", args.config.display())];
    if let Some(seed) = args.seed {
        config.base_seed = seed;
        comments.push(format!("override: seed={seed}"));
    }
    if let Some(workers) = args.workers {
        config.workers = workers;
        comments.push(format!("override: workers={workers}"));
    }
    if let Some(tolerance) = args.tolerance {
        config.tolerance = tolerance;
        comments.push(format!("override: tolerance={tolerance}"));
    }
    if let Some(units) = args.units {
        config.units = units;
        comments.push(format!(
            "override: units={}",
            if units == Units::Pr { "pr" } else { "abs" }
        ));
    }
    if let Some(out) = &args.out {
        config.output = out.clone();
        comments.push(format!("override: out={}", out.display()));
    }
    config.validate()?;
    comments.push(format!(
        "tolerance={:.6} units={} base_seed={}",
        config.tolerance,
        if config.units == Units::Pr { "pr" } else { "abs" },
        config.base_seed
    ));

    let rows = run_benchmark(&config)?;
    let csv = write_csv(&rows, &comments);
    std::fs::write(&config.output, &csv).map_err(|e| Error::io(&config.output, e))?;

    let errors = rows
        .iter()
        .filter(|r| r.flags.iter().any(|f| f.starts_with("error")))
        .count();
    println!(
        "rows={} errored_cells={} determinism_hash={}",
        rows.len(),
        errors,
        determinism_hash(&rows)
    );
    println!("wrote {}", config.output.display());
    Ok(if errors > 0 { EXIT_PARTIAL } else { 0 })
}

fn cmd_report(args: ReportArgs) -> Result<u8, Error> {
    let mut by_model: std::collections::BTreeMap<String, Vec<EvaluationRow>> =
        std::collections::BTreeMap::new();
    for path in &args.input {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for line in text.lines() {
            if line.is_empty() || line.starts_with('#') || line == CSV_HEADER {
                continue;
            }
            let row = EvaluationRow::from_csv(line)?;
            // scene rows only; aggregates are recomputed
            if !row.is_aggregate() {
                by_model.entry(row.model.clone()).or_default().push(row);
            }
        }
    }
    if by_model.is_empty() {
        return Err(Error::Config("no scene rows found in the inputs".into()));
    }

    let mut out_rows = Vec::new();
    for (model, rows) in &by_model {
        let mut algorithms: Vec<Algorithm> = Vec::new();
        for row in rows {
            let a = Algorithm::parse(&row.algorithm)?;
            if !algorithms.contains(&a) {
                algorithms.push(a);
            }
        }
        out_rows.extend(aggregate_rows(model, rows, &algorithms));
    }

    let comments = vec![format!(
        "aggregated from: {}",
        args.input
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(" ")
    )];
    let csv = write_csv(&out_rows, &comments);
    std::fs::write(&args.out, &csv).map_err(|e| Error::io(&args.out, e))?;
    println!("wrote {} aggregate rows to {}", out_rows.len(), args.out.display());
    Ok(0)
}
