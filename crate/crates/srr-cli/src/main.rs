//! `srr` — command-line front end for the video super-resolution engine.
//!
//! Subcommands: `design` (build/validate a filterbank cache), `synth`
//! (generate synthetic data), `run` (super-resolve a sequence), `eval`
//! (metrics between two sequences), `bench` (Monte Carlo over seeds).
//!
//! Exit codes: 0 success, 2 configuration error, 3 stale cache, 4 I/O error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use srr_core::design::validate_inverse;
use srr_core::error::SrrError;
use srr_core::frame::Frame;
use srr_core::harness::{
    evaluate_sequence, run_experiment, run_sequence, ExperimentReport, Method, RunConfig,
};
use srr_core::io::{frames_read, frames_write, SequenceFormat};
use srr_core::polyphase::build_system_transfer;
use srr_core::imaging::DecimationSpec;
use srr_core::synth::{generate_synthetic, procedural_source, SyntheticSpec};

use config::FileConfig;

#[derive(Parser)]
#[command(name = "srr", version, about = "Online video super-resolution engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// TOML configuration file; CLI flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Reconstruction method.
    #[arg(long)]
    method: Option<String>,
    /// Upscaling factor d.
    #[arg(long)]
    scale: Option<usize>,
    /// RNG seed (base seed for bench).
    #[arg(long)]
    seed: Option<u64>,
    /// Filterbank cache file.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Worker threads; 1 forces fully deterministic execution.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Build (or rebuild) the inverse-filterbank cache and validate it.
    Design {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Generate a synthetic ground-truth/observation pair of sequences.
    Synth {
        #[command(flatten)]
        common: CommonOpts,
        /// Output directory (receives hr/ and lr/ subdirectories).
        #[arg(long)]
        out: PathBuf,
        /// Number of frames.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Super-resolve an input sequence.
    Run {
        #[command(flatten)]
        common: CommonOpts,
        /// Input sequence: a .y4m file or a directory of .pgm/.png frames.
        #[arg(long)]
        frames: PathBuf,
        /// Output directory for reconstructed frames.
        #[arg(long)]
        out: PathBuf,
        /// Output format: pgm, png or y4m.
        #[arg(long, default_value = "pgm")]
        format: String,
    },
    /// Compute per-frame metrics between a reference and a test sequence.
    Eval {
        #[command(flatten)]
        common: CommonOpts,
        /// Reference sequence path.
        #[arg(long)]
        reference: PathBuf,
        /// Test sequence path.
        #[arg(long)]
        frames: PathBuf,
        /// Where to write the JSON-lines report (stdout if omitted).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Monte Carlo benchmark over seeds; emits trajectory data.
    Bench {
        #[command(flatten)]
        common: CommonOpts,
        /// Number of frames per sequence.
        #[arg(long)]
        frames: Option<usize>,
        /// Where to write the JSON-lines report (stdout if omitted).
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn exit_code_for(err: &SrrError) -> u8 {
    match err {
        SrrError::StaleCache(_) => 3,
        SrrError::Io(_) | SrrError::Parse(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), SrrError> {
    match cli.command {
        Command::Design { common } => cmd_design(&common),
        Command::Synth { common, out, frames } => cmd_synth(&common, &out, frames),
        Command::Run { common, frames, out, format } => cmd_run(&common, &frames, &out, &format),
        Command::Eval { common, reference, frames, report } => {
            cmd_eval(&common, &reference, &frames, report.as_deref())
        }
        Command::Bench { common, frames, report } => cmd_bench(&common, frames, report.as_deref()),
    }
}

fn load_file_config(common: &CommonOpts) -> Result<FileConfig, SrrError> {
    match &common.config {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

/// Resolve the effective run configuration from file config plus flags.
fn resolve_run_config(common: &CommonOpts, file: &FileConfig) -> Result<RunConfig, SrrError> {
    let method = match common.method.as_deref().or(file.run.method.as_deref()) {
        Some(m) => Method::from_name(m)?,
        None => Method::Wmtsr,
    };
    let mut rc = file.to_run_config(method)?;
    if let Some(d) = common.scale.or(file.run.scale) {
        rc.params.d = d;
    }
    rc.params.validate()?;
    Ok(rc)
}

fn cmd_design(common: &CommonOpts) -> Result<(), SrrError> {
    let file = load_file_config(common)?;
    let rc = resolve_run_config(common, &file)?;
    let path = common
        .cache
        .clone()
        .or_else(|| file.run.cache.clone())
        .ok_or_else(|| SrrError::Config("design requires --cache <path>".into()))?;
    // Force a rebuild: remove any existing file first so the stored design
    // always reflects the requested configuration.
    if path.exists() {
        std::fs::remove_file(&path)?;
    }
    let cache = rc.obtain_cache(Some(&path))?;
    let spec = rc.design_spec();
    let dspec = DecimationSpec::new(spec.d)?;
    for record in &cache.records {
        let t = build_system_transfer(record.lambda1, spec.alpha_t, &spec.h, &spec.s, dspec)?;
        let t = if record.lambda1.is_infinite() { t.with_ridge(spec.ridge_eps) } else { t };
        let v = validate_inverse(&record.inverse, &t, 5)?;
        println!(
            "lambda1={} residual={:.3e} max_rel_error={:.3e}",
            record.lambda1, record.residual, v.max_rel_error
        );
    }
    println!("cache written to {}", path.display());
    Ok(())
}

fn cmd_synth(common: &CommonOpts, out: &Path, frames: Option<usize>) -> Result<(), SrrError> {
    let file = load_file_config(common)?;
    let mut spec: SyntheticSpec = file.to_synth_spec()?;
    if let Some(n) = frames {
        spec.frame_count = n;
    }
    if let Some(s) = common.seed {
        spec.rng_seed = s;
    }
    if let Some(d) = common.scale {
        spec.decimation = DecimationSpec::new(d)?;
    }
    let source = source_for(&spec, &file);
    let seq = generate_synthetic(&spec, &source)?;
    frames_write(&out.join("hr"), SequenceFormat::Pgm, &seq.hr)?;
    frames_write(&out.join("lr"), SequenceFormat::Pgm, &seq.lr)?;
    println!(
        "wrote {} HR and LR frames to {}",
        seq.hr.len(),
        out.display()
    );
    Ok(())
}

/// The walk needs a margin of one pixel per frame on each side.
fn source_for(spec: &SyntheticSpec, file: &FileConfig) -> Frame {
    let margin = 2 * spec.frame_count + 4;
    procedural_source(
        spec.window_width + margin,
        spec.window_height + margin,
        file.synth.source_seed.unwrap_or(2024),
    )
}

fn detect_format(path: &Path) -> Result<SequenceFormat, SrrError> {
    if path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("y4m")) {
        return Ok(SequenceFormat::Y4m);
    }
    if path.is_dir() {
        for fmt in [SequenceFormat::Pgm, SequenceFormat::Png] {
            if frames_read(path, fmt).is_ok() {
                return Ok(fmt);
            }
        }
        return Err(SrrError::Parse(format!(
            "no readable .pgm or .png frames in {}",
            path.display()
        )));
    }
    Err(SrrError::Unsupported(format!("cannot infer sequence format of {}", path.display())))
}

fn read_sequence(path: &Path) -> Result<Vec<Frame>, SrrError> {
    frames_read(path, detect_format(path)?)
}

fn cmd_run(common: &CommonOpts, frames: &Path, out: &Path, format: &str) -> Result<(), SrrError> {
    let file = load_file_config(common)?;
    let rc = resolve_run_config(common, &file)?;
    let cache_path = common.cache.clone().or_else(|| file.run.cache.clone());
    let cache = rc.obtain_cache(cache_path.as_deref())?;
    let lr = read_sequence(frames)?;
    let recon = run_sequence(&rc, &cache, &lr)?;
    frames_write(out, SequenceFormat::from_name(format)?, &recon)?;
    println!("wrote {} frames to {}", recon.len(), out.display());
    Ok(())
}

fn cmd_eval(
    common: &CommonOpts,
    reference: &Path,
    frames: &Path,
    report: Option<&Path>,
) -> Result<(), SrrError> {
    let _ = load_file_config(common)?;
    let refs = read_sequence(reference)?;
    let tests = read_sequence(frames)?;
    let metrics = evaluate_sequence(&refs, &tests)?;
    let mut lines = String::new();
    for (k, m) in metrics.iter().enumerate() {
        lines.push_str(&format!(
            "{}\n",
            serde_json::json!({ "frame": k, "mse": m.mse, "psnr": m.psnr, "ssim": m.ssim })
        ));
    }
    emit(report, &lines)
}

fn cmd_bench(
    common: &CommonOpts,
    frames: Option<usize>,
    report: Option<&Path>,
) -> Result<(), SrrError> {
    let file = load_file_config(common)?;
    let mut spec = file.to_synth_spec()?;
    if let Some(n) = frames {
        spec.frame_count = n;
    }
    let base_seed = common.seed.unwrap_or(file.bench.seed.unwrap_or(1));
    let seed_count = file.bench.seeds.unwrap_or(10);
    let seeds: Vec<u64> = (0..seed_count as u64).map(|i| base_seed + i).collect();

    let methods: Vec<Method> = match common.method.as_deref() {
        Some(m) => vec![Method::from_name(m)?],
        None => vec![Method::Bicubic, Method::Ltsr, Method::Mtsr, Method::Wmtsr],
    };
    let mut configs = Vec::with_capacity(methods.len());
    for &m in &methods {
        let mut rc = file.to_run_config(m)?;
        if let Some(d) = common.scale {
            rc.params.d = d;
        }
        configs.push(rc);
    }
    let caches: Vec<_> = configs
        .iter()
        .map(|c| c.obtain_cache(None))
        .collect::<Result<_, _>>()?;
    let source = source_for(&spec, &file);

    let report_data = if common.threads <= 1 || seeds.len() == 1 {
        run_experiment(&methods, &configs, &caches, &spec, &source, &seeds)?
    } else {
        run_parallel(common.threads, &methods, &configs, &caches, &spec, &source, &seeds)?
    };
    emit(report, &render_bench_report(&report_data))
}

/// Partition seeds across threads and merge per-seed reports in seed order,
/// so the aggregate is independent of scheduling.
fn run_parallel(
    threads: usize,
    methods: &[Method],
    configs: &[RunConfig],
    caches: &[srr_core::design::InverseFilterbankCache],
    spec: &SyntheticSpec,
    source: &Frame,
    seeds: &[u64],
) -> Result<ExperimentReport, SrrError> {
    let mut partials: Vec<Option<ExperimentReport>> = vec![None; seeds.len()];
    std::thread::scope(|scope| -> Result<(), SrrError> {
        let mut handles = Vec::new();
        for (chunk_idx, chunk) in seeds.chunks(seeds.len().div_ceil(threads)).enumerate() {
            let chunk = chunk.to_vec();
            handles.push((
                chunk_idx,
                chunk.len(),
                scope.spawn(move || -> Result<Vec<ExperimentReport>, SrrError> {
                    chunk
                        .iter()
                        .map(|&s| run_experiment(methods, configs, caches, spec, source, &[s]))
                        .collect()
                }),
            ));
        }
        let chunk_size = seeds.len().div_ceil(threads);
        for (chunk_idx, _, handle) in handles {
            let results = handle.join().expect("worker panicked")?;
            for (i, r) in results.into_iter().enumerate() {
                partials[chunk_idx * chunk_size + i] = Some(r);
            }
        }
        Ok(())
    })?;
    let partials: Vec<ExperimentReport> = partials.into_iter().map(|p| p.unwrap()).collect();

    // Average the per-seed trajectories in seed order.
    let n = spec.frame_count;
    let count = partials.len() as f64;
    let mut merged = partials[0].clone();
    merged.seeds = seeds.to_vec();
    for (mi, m) in merged.methods.iter_mut().enumerate() {
        let mut mse = vec![0.0; n];
        let mut psnr = vec![0.0; n];
        let mut ssim = vec![0.0; n];
        let mut secs = 0.0;
        for p in &partials {
            for k in 0..n {
                mse[k] += p.methods[mi].mse_trajectory[k];
                psnr[k] += p.methods[mi].psnr_trajectory[k];
                ssim[k] += p.methods[mi].ssim_trajectory[k];
            }
            secs += p.methods[mi].seconds;
        }
        m.mse_trajectory = mse.iter().map(|v| v / count).collect();
        m.psnr_trajectory = psnr.iter().map(|v| v / count).collect();
        m.ssim_trajectory = ssim.iter().map(|v| v / count).collect();
        m.mean_mse = m.mse_trajectory.iter().sum::<f64>() / n as f64;
        m.seconds = secs;
    }
    Ok(merged)
}

/// JSON-lines: one record per (method, frame), timings excluded so repeated
/// runs with the same seed are byte-identical.
fn render_bench_report(report: &ExperimentReport) -> String {
    let mut out = String::new();
    for m in &report.methods {
        for k in 0..report.frame_count {
            out.push_str(&format!(
                "{}\n",
                serde_json::json!({
                    "method": m.method.name(),
                    "frame": k,
                    "mse": m.mse_trajectory[k],
                    "psnr": m.psnr_trajectory[k],
                    "ssim": m.ssim_trajectory[k],
                })
            ));
        }
        out.push_str(&format!(
            "{}\n",
            serde_json::json!({ "method": m.method.name(), "mean_mse": m.mean_mse })
        ));
    }
    out
}

fn emit(path: Option<&Path>, data: &str) -> Result<(), SrrError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent() {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, data)?;
            Ok(())
        }
        None => {
            print!("{data}");
            Ok(())
        }
    }
}
