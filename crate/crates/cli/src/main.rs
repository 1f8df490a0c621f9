//! Batch front end: generate synthetic measures, run kernel/statistic/
//! multiscale computations, emit JSON/CSV results.
//!
//! Exit codes: 0 ok, 2 usage or spec validation, 3 input/output failure,
//! 4 resource cap.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rectikernel_core::error::CoreError;
use rectikernel_core::io;
use rectikernel_core::multiscale::report::{rectifiability_report, ReportOptions};
use rectikernel_core::multiscale::{build_cubes, corona_decompose, ParamsLedger};
use rectikernel_core::statistics::{
    curvature_mc, curvature_triple_sum, mv_identity_residual, triple_sum, triple_sum_montecarlo,
    SumEstimate, TripleSumOptions,
};
use rectikernel_core::verify;
use rectikernel_core::{DiscreteMeasure, KernelId};
use serde::Serialize;
use sha2::{Digest, Sha256};

mod manifest;
use manifest::RunManifest;

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_RESOURCE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "rectikernel",
    version,
    about = "Singular-integral and multiscale-geometry statistics on planar point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic measure from a JSON spec into a CSV point cloud.
    Gen(GenArgs),
    /// Triple-sum statistics (permutation sums, curvature, transform residual).
    Stats(StatsArgs),
    /// Cube lattice, corona decomposition and rectifiability report.
    Corona(CoronaArgs),
    /// Run a named verification suite ("all" runs every suite).
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Generator spec (JSON manifest).
    spec: PathBuf,
    /// Output CSV path; a sidecar .manifest.json is written next to it.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    /// Input point cloud (CSV with header x,y,w).
    measure: PathBuf,
    /// Kernel: a coordinate-power order (1, 2, ...) or "huovinen".
    #[arg(long, default_value = "1")]
    kernel: String,
    /// Exact sums (default). Fails with exit 4 above the support cap.
    #[arg(long, conflicts_with = "mc")]
    exact: bool,
    /// Monte Carlo sums with this many samples.
    #[arg(long)]
    mc: Option<u64>,
    /// Comparability filter tau (restrict to O_tau).
    #[arg(long)]
    tau: Option<f64>,
    /// Pairwise truncation epsilon (keep separations >= eps).
    #[arg(long)]
    eps: Option<f64>,
    /// Also evaluate the Melnikov-Verdera residual at this truncation.
    #[arg(long)]
    mv_eps: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exact-sum support cap.
    #[arg(long, default_value_t = 5000)]
    exact_cap: usize,
    /// Run exact sums even above the cap.
    #[arg(long)]
    force_exact: bool,
    /// Output JSON path (stdout when omitted).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoronaArgs {
    /// Input point cloud (CSV with header x,y,w).
    measure: PathBuf,
    #[arg(long, value_enum, default_value = "desk")]
    profile: ProfileArg,
    #[arg(long)]
    jmin: Option<i32>,
    #[arg(long)]
    jmax: Option<i32>,
    /// Grid offset seed for the cube lattice.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exact-sum support cap for the report's triple sums.
    #[arg(long, default_value_t = 5000)]
    exact_cap: usize,
    /// Output JSON path (stdout when omitted).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Per-generation plot data CSV (generation, mean beta1, packing ratio).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum ProfileArg {
    Desk,
    PaperFaithful,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name or "all".
    suite: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("RECTIKERNEL_THREADS") {
        if let Ok(threads) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build_global();
        }
    }
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Corona(args) => cmd_corona(args),
        Command::Verify(args) => cmd_verify(args),
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("rectikernel: {msg}");
    ExitCode::from(code)
}

fn exit_code_of(err: &CoreError) -> u8 {
    match err {
        CoreError::InvalidSpec(_) => EXIT_USAGE,
        CoreError::Io(_) => EXIT_IO,
        CoreError::ResourceLimit(_) => EXIT_RESOURCE,
        _ => EXIT_USAGE,
    }
}

fn sha256_file(path: &Path) -> Result<String, CoreError> {
    let bytes =
        std::fs::read(path).map_err(|e| CoreError::Io(format!("{}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn cmd_gen(args: GenArgs) -> ExitCode {
    let start = Instant::now();
    let spec = match io::load_generator_spec(&args.spec) {
        Ok(s) => s,
        Err(e) => return fail(exit_code_of(&e), e),
    };
    let measure = match spec.generate() {
        Ok(m) => m,
        Err(e) => return fail(exit_code_of(&e), e),
    };
    if let Err(e) = io::save_measure(&measure, &args.out) {
        return fail(EXIT_IO, e);
    }
    let input_hash = match sha256_file(&args.spec) {
        Ok(h) => h,
        Err(e) => return fail(EXIT_IO, e),
    };
    let manifest = RunManifest::new(start)
        .with_input(&args.spec, input_hash)
        .with_seed(spec.seed);
    let manifest_path = args.out.with_extension("manifest.json");
    if let Err(e) = std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    ) {
        return fail(EXIT_IO, format!("{}: {e}", manifest_path.display()));
    }
    eprintln!(
        "wrote {} points to {} (manifest {})",
        measure.len(),
        args.out.display(),
        manifest_path.display()
    );
    ExitCode::SUCCESS
}

fn parse_kernel(text: &str) -> Result<KernelId, CoreError> {
    if text.eq_ignore_ascii_case("huovinen") {
        return Ok(KernelId::Huovinen);
    }
    let n: u32 = text
        .parse()
        .map_err(|_| CoreError::InvalidSpec(format!("unknown kernel '{text}'")))?;
    KernelId::coordinate_power(n)
}

#[derive(Serialize)]
struct StatsResults {
    kernel: KernelId,
    options: TripleSumOptions,
    p: SumEstimate,
    c2: SumEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    mv: Option<rectikernel_core::statistics::MvResidual>,
}

fn load_measure_or_exit(path: &Path) -> Result<DiscreteMeasure, ExitCode> {
    io::load_measure(path).map_err(|e| fail(EXIT_IO, e))
}

fn cmd_stats(args: StatsArgs) -> ExitCode {
    let start = Instant::now();
    let measure = match load_measure_or_exit(&args.measure) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let kernel = match parse_kernel(&args.kernel) {
        Ok(k) => k,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    let opts = TripleSumOptions {
        tau_restrict: args.tau,
        eps_truncate: args.eps,
        ..Default::default()
    };
    if let Err(e) = opts.validate() {
        return fail(EXIT_USAGE, e);
    }
    let exact = args.mc.is_none();
    if exact && measure.len() > args.exact_cap && !args.force_exact {
        return fail(
            EXIT_RESOURCE,
            format!(
                "{} support points exceed the exact-sum cap {} (use --mc or --force-exact)",
                measure.len(),
                args.exact_cap
            ),
        );
    }
    let run = || -> Result<StatsResults, CoreError> {
        let (p, c2) = if let Some(samples) = args.mc {
            (
                triple_sum_montecarlo(kernel, &measure, &opts, samples, args.seed)?,
                curvature_mc(&measure, samples, args.seed ^ 0x9e37_79b9)?,
            )
        } else {
            (
                triple_sum(kernel, &measure, &opts)?,
                curvature_triple_sum(&measure, &opts)?,
            )
        };
        let mv = match args.mv_eps {
            Some(eps) => Some(mv_identity_residual(&measure, eps)?),
            None => None,
        };
        Ok(StatsResults {
            kernel,
            options: opts,
            p,
            c2,
            mv,
        })
    };
    let results = match run() {
        Ok(r) => r,
        Err(e) => return fail(exit_code_of(&e), e),
    };
    let input_hash = match sha256_file(&args.measure) {
        Ok(h) => h,
        Err(e) => return fail(EXIT_IO, e),
    };
    let manifest = RunManifest::new(start)
        .with_input(&args.measure, input_hash)
        .with_seed(args.seed);
    emit_json(&manifest, &results, args.out.as_ref())
}

#[derive(Serialize)]
struct TreeSummary {
    root: CubeRef,
    tree_type: rectikernel_core::multiscale::TreeType,
    alpha: f64,
    members: usize,
    root_mass: f64,
    member_ids: Vec<usize>,
}

#[derive(Serialize)]
struct CubeRef {
    id: usize,
    j: i32,
    ix: i64,
    iy: i64,
}

#[derive(Serialize)]
struct CubeRow {
    id: usize,
    j: i32,
    ix: i64,
    iy: i64,
    mass: f64,
    beta1: f64,
    line_angle: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    parent: Option<usize>,
}

#[derive(Serialize)]
struct CoronaResults {
    params: ParamsLedger,
    warnings: Vec<String>,
    report: rectikernel_core::multiscale::RectifiabilityReport,
    lattice: Vec<CubeRow>,
    trees: Vec<TreeSummary>,
}

fn cmd_corona(args: CoronaArgs) -> ExitCode {
    let start = Instant::now();
    let measure = match load_measure_or_exit(&args.measure) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let params = match args.profile {
        ProfileArg::Desk => ParamsLedger::desk(),
        ProfileArg::PaperFaithful => ParamsLedger::paper_faithful(measure.len()),
    };
    let warnings = match params.validate() {
        Ok(w) => w,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let opts = ReportOptions {
        j_min: args.jmin,
        j_max: args.jmax,
        exact_cap: args.exact_cap,
        offset_seed: args.seed,
        seed: args.seed,
        ..Default::default()
    };
    let run = || -> Result<(CoronaResults, Vec<String>), CoreError> {
        let report = rectifiability_report(&measure, &params, &opts)?;
        let lattice = build_cubes(&measure, report.j_min, report.j_max, args.seed)?;
        let decomp = corona_decompose(&lattice, &params)?;
        let classes = rectikernel_core::multiscale::classify_trees(&decomp, &lattice, &params);
        let cube_ref = |id: usize| {
            let c = &lattice.cubes[id];
            CubeRef {
                id,
                j: c.j,
                ix: c.ix,
                iy: c.iy,
            }
        };
        let trees: Vec<TreeSummary> = decomp
            .trees
            .iter()
            .zip(&classes)
            .map(|(t, cls)| TreeSummary {
                root: cube_ref(t.root),
                tree_type: cls.tree_type,
                alpha: t.alpha,
                members: t.members.len(),
                root_mass: cls.root_mass,
                member_ids: t.members.clone(),
            })
            .collect();
        let cubes: Vec<CubeRow> = lattice
            .cubes
            .iter()
            .enumerate()
            .map(|(id, c)| CubeRow {
                id,
                j: c.j,
                ix: c.ix,
                iy: c.iy,
                mass: c.mass,
                beta1: c.beta1,
                line_angle: c.line.theta,
                parent: c.parent,
            })
            .collect();
        // Plot data: per generation, mean beta1 and the bad-mass fraction.
        let mut csv = vec!["generation,mean_beta1,packing_ratio".to_string()];
        for j in lattice.j_min..=lattice.j_max {
            let generation = lattice.generation(j);
            let mean_beta1 =
                generation.iter().map(|c| c.beta1).sum::<f64>() / generation.len() as f64;
            // `+ 0.0` normalizes the negative zero of an empty sum.
            let bad_mass: f64 = generation
                .iter()
                .filter(|c| c.beta1 >= params.eps)
                .map(|c| c.mass)
                .sum::<f64>()
                + 0.0;
            csv.push(format!(
                "{j},{mean_beta1},{}",
                bad_mass / measure.total_mass()
            ));
        }
        Ok((
            CoronaResults {
                params,
                warnings: warnings.clone(),
                report,
                lattice: cubes,
                trees,
            },
            csv,
        ))
    };
    let (results, csv_rows) = match run() {
        Ok(r) => r,
        Err(e) => return fail(exit_code_of(&e), e),
    };
    if let Some(csv_path) = &args.csv {
        if let Err(e) = std::fs::write(csv_path, csv_rows.join("\n") + "\n") {
            return fail(EXIT_IO, format!("{}: {e}", csv_path.display()));
        }
    }
    let input_hash = match sha256_file(&args.measure) {
        Ok(h) => h,
        Err(e) => return fail(EXIT_IO, e),
    };
    let manifest = RunManifest::new(start)
        .with_input(&args.measure, input_hash)
        .with_seed(args.seed);
    emit_json(&manifest, &results, args.out.as_ref())
}

fn cmd_verify(args: VerifyArgs) -> ExitCode {
    let reports = if args.suite == "all" {
        verify::run_all()
    } else {
        match verify::run_suite(&args.suite) {
            Some(r) => vec![r],
            None => {
                return fail(
                    EXIT_USAGE,
                    format!(
                        "unknown suite '{}'; available: {} or all",
                        args.suite,
                        verify::SUITE_NAMES.join(", ")
                    ),
                )
            }
        }
    };
    let mut first_failure: Option<String> = None;
    for report in &reports {
        for a in &report.assertions {
            let line = serde_json::json!({
                "suite": report.suite,
                "assertion": a.label,
                "pass": a.pass,
                "detail": a.detail,
            });
            println!("{line}");
            if !a.pass && first_failure.is_none() {
                first_failure = Some(format!("{}: {}", report.suite, a.label));
            }
        }
    }
    match first_failure {
        None => ExitCode::SUCCESS,
        Some(name) => fail(1, format!("first failing assertion: {name}")),
    }
}

/// Write `{"manifest": ..., "results": ...}`. The results subtree is a pure
/// function of (inputs, flags, seed); the manifest carries timing and is
/// excluded from determinism comparisons.
fn emit_json<T: Serialize>(
    manifest: &RunManifest,
    results: &T,
    out: Option<&PathBuf>,
) -> ExitCode {
    let doc = serde_json::json!({
        "manifest": manifest,
        "results": results,
    });
    let text = serde_json::to_string_pretty(&doc).expect("results serialize");
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                return fail(EXIT_IO, format!("{}: {e}", path.display()));
            }
            ExitCode::SUCCESS
        }
        None => {
            println!("{text}");
            ExitCode::SUCCESS
        }
    }
}
