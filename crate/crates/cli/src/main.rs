//! Command-line front end: pulse parameter tables, sequence order scans,
//! noise ensembles, and self-refocusing pulse search, all emitting CSV/JSON
//! plus a JSON manifest capturing the resolved configuration.
//!
//! Units: all frequencies (couplings g and Δ, the noise cutoff and amplitude)
//! are angular frequencies in inverse time units; times (durations, periods,
//! steps) are in the same time unit. Nothing is rescaled internally.
//!
//! Exit codes: 0 success, 1 generic error, 2 shape parse error, 3 branch-cut
//! ambiguity in an effective-Hamiltonian extraction, 4 non-convergent
//! propagation in a noise run, 5 non-convergent pulse search.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use refocus_core::error::Error as CoreError;
use refocus_core::model::{CouplingSet, ModelSpec};
use refocus_core::noise::{rate_scan, run_ensemble, run_free_ensemble, InitialState, NoiseConfig};
use refocus_core::pulse::{pulse_params, PulseShape, ShapeSpec, DEFAULT_NODES};
use refocus_core::search::{solve, SearchProblem, SearchResult, Targets};
use refocus_core::sequence::{order_scan, predicted_heff, SequenceSpec, CATALOG};

mod manifest;
use manifest::RunManifest;

const UNITS_NOTE: &str =
    "Units: couplings, detunings and noise frequencies are angular frequencies in \
inverse time units; durations and periods are in the same time unit (1/tau_p-compatible).";

#[derive(Parser)]
#[command(
    name = "refocus",
    version,
    about = "Refocusing of a qubit coupled to an oscillator: pulse parameters, sequence scans, noise ensembles, pulse search",
    after_help = UNITS_NOTE
)]
struct Cli {
    /// Master seed override for stochastic commands.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Integrator steps per pulse override.
    #[arg(long, global = true)]
    steps: Option<usize>,

    /// Quadrature node budget override for pulse parameters.
    #[arg(long, global = true)]
    nodes: Option<usize>,

    /// Default directory for output files.
    #[arg(long, global = true, env = "REFOCUS_OUTDIR", default_value = ".")]
    outdir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the defect parameters (s, α/2, ζ) of a pulse shape.
    Params(ParamsArgs),
    /// Scan the effective-Hamiltonian deviation of a sequence against τ_p.
    Scan(ScanArgs),
    /// Ensemble coherence decay under a correlated random field.
    Noise(NoiseArgs),
    /// Synthesize a self-refocusing pulse shape.
    Search(SearchArgs),
}

#[derive(Args)]
#[command(after_help = UNITS_NOTE)]
struct ParamsArgs {
    /// Print the built-in table: delta pulse and Gaussians of width 0.01 and 0.10.
    #[arg(long)]
    table1: bool,

    /// Shape kind: delta | gaussian | hermite.
    #[arg(long)]
    kind: Option<String>,

    /// Width fraction for gaussian/hermite kinds.
    #[arg(long)]
    width_fraction: Option<f64>,

    /// Comma-separated Hermite coefficients.
    #[arg(long, value_delimiter = ',')]
    coefficients: Vec<f64>,

    /// Pulse duration τ_p (parameters are scale-invariant).
    #[arg(long, default_value_t = 1.0)]
    duration: f64,

    /// JSON shape specification file (overrides --kind).
    #[arg(long)]
    shape: Option<PathBuf>,
}

#[derive(Args)]
#[command(after_help = UNITS_NOTE)]
struct ScanArgs {
    /// Sequence string, e.g. "X-X" or "Y-X-YX-XY-XY" (rightmost pulse first).
    #[arg(long)]
    seq: String,

    /// JSON model specification file.
    #[arg(long)]
    model: PathBuf,

    /// Reference Hamiltonian: "a0", "a0+sxax", or "catalog" (predicted order0).
    #[arg(long, default_value = "catalog", alias = "ref")]
    reference: String,

    /// Comma-separated τ_p list, decreasing, spanning ≥ 1.5 decades.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.1,0.05,0.025,0.0125,0.00625,0.003125"
    )]
    taus: Vec<f64>,

    /// JSON shape specification for the pulses (default: delta).
    #[arg(long)]
    shape: Option<PathBuf>,

    /// Output CSV path (default: scan.csv in the output directory).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(after_help = UNITS_NOTE)]
struct NoiseArgs {
    /// Sequence string; omit for free evolution.
    #[arg(long)]
    seq: Option<String>,

    /// JSON model specification file.
    #[arg(long)]
    model: PathBuf,

    /// JSON noise configuration file.
    #[arg(long)]
    noise: PathBuf,

    /// Pulse duration τ_p.
    #[arg(long, default_value_t = 1.0)]
    tau_p: f64,

    /// Number of refocusing periods (or records, for free evolution).
    #[arg(long, default_value_t = 16)]
    periods: usize,

    /// Total time for free evolution (default: periods · 8 · τ_p).
    #[arg(long)]
    total_time: Option<f64>,

    /// JSON shape specification for the pulses (default: delta).
    #[arg(long)]
    shape: Option<PathBuf>,

    /// Second sequence for a paired comparison with identical seeds.
    #[arg(long)]
    compare: Option<String>,

    /// Run a rate scan over these Ω/ω_c values instead of a fidelity trace.
    #[arg(long, value_delimiter = ',')]
    omega_ratios: Vec<f64>,

    /// Output CSV path (default: noise.csv in the output directory).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(after_help = UNITS_NOTE)]
struct SearchArgs {
    /// Targets: "s" (first order) or "s,alpha" (second order).
    #[arg(long, value_delimiter = ',', default_value = "s")]
    targets: Vec<String>,

    /// Number of even Hermite basis coefficients.
    #[arg(long, default_value_t = 3)]
    basis_size: usize,

    /// Width fraction of the basis functions.
    #[arg(long, default_value_t = 0.15)]
    width_fraction: f64,

    /// Comma-separated seed coefficients (default: Gaussian-dominant).
    #[arg(long, value_delimiter = ',')]
    seed_coefficients: Vec<f64>,

    /// Output JSON path (default: search.json in the output directory).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    match run(cli, argv) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &CoreError) -> u8 {
    match err {
        CoreError::InvalidShape(_) | CoreError::ParseError(_) => 2,
        CoreError::BranchCutAmbiguity(_) => 3,
        CoreError::NotConverged(_) => 4,
        _ => 1,
    }
}

fn run(cli: Cli, argv: Vec<String>) -> Result<ExitCode, CoreError> {
    match &cli.command {
        Command::Params(args) => cmd_params(&cli, args),
        Command::Scan(args) => cmd_scan(&cli, args, argv),
        Command::Noise(args) => cmd_noise(&cli, args, argv),
        Command::Search(args) => cmd_search(&cli, args, argv),
    }
}

// ---------------------------------------------------------------------------
// params
// ---------------------------------------------------------------------------

fn load_shape(path: &Path) -> Result<PulseShape, CoreError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CoreError::InvalidShape(format!("cannot read {}: {e}", path.display())))?;
    let spec: ShapeSpec = serde_json::from_str(&text)
        .map_err(|e| CoreError::InvalidShape(format!("{}: {e}", path.display())))?;
    spec.build()
}

fn shape_from_params(args: &ParamsArgs) -> Result<PulseShape, CoreError> {
    if let Some(path) = &args.shape {
        return load_shape(path);
    }
    let kind = args.kind.as_deref().unwrap_or("delta");
    match kind {
        "delta" => PulseShape::delta(args.duration),
        "gaussian" => {
            let wf = args
                .width_fraction
                .ok_or_else(|| CoreError::InvalidShape("gaussian needs --width-fraction".into()))?;
            PulseShape::gaussian(args.duration, wf)
        }
        "hermite" => {
            let wf = args
                .width_fraction
                .ok_or_else(|| CoreError::InvalidShape("hermite needs --width-fraction".into()))?;
            PulseShape::hermite(args.duration, wf, args.coefficients.clone())
        }
        other => Err(CoreError::InvalidShape(format!("unknown kind {other:?}"))),
    }
}

fn cmd_params(cli: &Cli, args: &ParamsArgs) -> Result<ExitCode, CoreError> {
    let nodes = cli.nodes.unwrap_or(DEFAULT_NODES);
    println!(
        "{:<24} {:>14} {:>14} {:>14}",
        "pulse", "s", "alpha/2", "zeta"
    );
    let print_row = |label: &str, shape: &PulseShape| -> Result<(), CoreError> {
        let p = pulse_params(shape, nodes)?;
        println!(
            "{:<24} {:>14.7} {:>14.8} {:>14.6}",
            label,
            p.s,
            p.alpha / 2.0,
            p.zeta
        );
        Ok(())
    };
    if args.table1 {
        print_row("delta", &PulseShape::delta(1.0)?)?;
        print_row("gaussian w=0.01", &PulseShape::gaussian(1.0, 0.01)?)?;
        print_row("gaussian w=0.10", &PulseShape::gaussian(1.0, 0.10)?)?;
    } else {
        let shape = shape_from_params(args)?;
        let label = args.kind.clone().unwrap_or_else(|| "shape".into());
        print_row(&label, &shape)?;
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

fn load_model(path: &Path) -> Result<CouplingSet, CoreError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CoreError::InvalidModel(format!("cannot read {}: {e}", path.display())))?;
    let spec: ModelSpec = serde_json::from_str(&text)
        .map_err(|e| CoreError::InvalidModel(format!("{}: {e}", path.display())))?;
    spec.build()
}

fn scan_shape(cli_shape: &Option<PathBuf>, tau: f64) -> Result<PulseShape, CoreError> {
    match cli_shape {
        Some(path) => load_shape(path)?.rescaled(tau),
        None => PulseShape::delta(tau),
    }
}

fn cmd_scan(cli: &Cli, args: &ScanArgs, argv: Vec<String>) -> Result<ExitCode, CoreError> {
    if args.taus.is_empty() {
        return Err(CoreError::InvalidArgument("need at least one tau_p".into()));
    }
    let couplings = load_model(&args.model)?;
    let steps = cli.steps.unwrap_or(1024);
    let shape = scan_shape(&args.shape, args.taus[0])?;
    let params = pulse_params(&shape, cli.nodes.unwrap_or(DEFAULT_NODES))?;
    let seq = SequenceSpec::parse(&args.seq, shape)?;

    let in_catalog = CATALOG.contains(&args.seq.as_str());
    let prediction = if in_catalog {
        Some(predicted_heff(&args.seq, &params, &couplings)?)
    } else {
        None
    };
    let reference = match args.reference.as_str() {
        "a0" | "A0" => refocus_core::model::lift_aux(&couplings.a0),
        "a0+sxax" | "A0+sxAx" => {
            refocus_core::model::lift_aux(&couplings.a0)
                + refocus_core::model::lift_qubit(&refocus_core::model::sigma_x(), couplings.dim)
                    .dot(&refocus_core::model::lift_aux(&couplings.ax))
        }
        "catalog" => match &prediction {
            Some(p) => p.order0.clone(),
            None => {
                return Err(CoreError::NotInCatalog(format!(
                    "{}: give --reference a0 or a0+sxax for non-catalog sequences",
                    args.seq
                )))
            }
        },
        other => {
            return Err(CoreError::InvalidArgument(format!(
                "unknown reference {other:?}"
            )))
        }
    };

    let scan = order_scan(&seq, &couplings, &reference, &args.taus, steps)?;

    let out_path = output_path(cli, &args.output, "scan.csv");
    let mut csv = String::from("tau_p,deviation,fitted_slope_running\n");
    for p in &scan.points {
        csv.push_str(&format!(
            "{:.12e},{:.12e},{:.6}\n",
            p.tau_p, p.deviation, p.running_slope
        ));
    }
    fs::write(&out_path, csv).map_err(io_err)?;

    eprintln!(
        "fitted slope {:.4} over {} points ({} at the integrator floor); wrote {}",
        scan.slope,
        scan.points.len(),
        scan.discarded,
        out_path.display()
    );

    RunManifest::new("scan", argv, cli.seed, &[&out_path])
        .with_config(serde_json::json!({
            "seq": args.seq,
            "model": args.model.display().to_string(),
            "reference": args.reference,
            "taus": args.taus,
            "steps": steps,
            "pulse_params": params,
        }))
        .write(&out_path)?;

    // gate on the claimed order when the catalog makes a claim
    if let Some(pred) = prediction {
        let expected = if refocus_core::linalg::max_abs(&pred.order1) < 1e-14 {
            pred.claimed_order as f64
        } else {
            1.0
        };
        let pass = if expected >= 2.0 {
            scan.slope >= expected - 0.35
        } else {
            (scan.slope - expected).abs() <= 0.35
        };
        if !pass {
            eprintln!(
                "slope {:.4} outside the claimed-order band around {expected}",
                scan.slope
            );
            return Ok(ExitCode::FAILURE);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn io_err(e: std::io::Error) -> CoreError {
    CoreError::InvalidArgument(format!("io: {e}"))
}

fn output_path(cli: &Cli, chosen: &Option<PathBuf>, default_name: &str) -> PathBuf {
    chosen
        .clone()
        .unwrap_or_else(|| cli.outdir.join(default_name))
}

// ---------------------------------------------------------------------------
// noise
// ---------------------------------------------------------------------------

fn load_noise(path: &Path, seed_override: Option<u64>) -> Result<NoiseConfig, CoreError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CoreError::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    let mut config: NoiseConfig = serde_json::from_str(&text)
        .map_err(|e| CoreError::InvalidArgument(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    Ok(config)
}

fn cmd_noise(cli: &Cli, args: &NoiseArgs, argv: Vec<String>) -> Result<ExitCode, CoreError> {
    let couplings = load_model(&args.model)?;
    let config = load_noise(&args.noise, cli.seed)?;
    let initial = InitialState::default();
    let out_path = output_path(cli, &args.output, "noise.csv");

    if !args.omega_ratios.is_empty() {
        let seq_text = args
            .seq
            .as_deref()
            .ok_or_else(|| CoreError::InvalidArgument("rate scans need --seq".into()))?;
        let shape = scan_shape(&args.shape, args.tau_p)?;
        let seq = SequenceSpec::parse(seq_text, shape)?;
        let total_time = args
            .total_time
            .unwrap_or(args.periods as f64 * seq.len() as f64 * args.tau_p);
        let points = rate_scan(&seq, &couplings, &config, &args.omega_ratios, total_time)?;
        let mut csv = String::from("omega_over_cutoff,final_infidelity,stderr\n");
        for p in &points {
            csv.push_str(&format!(
                "{:.6},{:.12e},{:.12e}\n",
                p.ratio, p.infidelity, p.stderr
            ));
        }
        fs::write(&out_path, csv).map_err(io_err)?;
        eprintln!(
            "rate scan over {} ratios; wrote {}",
            points.len(),
            out_path.display()
        );
        RunManifest::new("noise", argv, Some(config.seed), &[&out_path])
            .with_config(serde_json::json!({
                "seq": seq_text,
                "model": args.model.display().to_string(),
                "noise": config,
                "tau_p": args.tau_p,
                "omega_ratios": args.omega_ratios,
                "total_time": total_time,
            }))
            .write(&out_path)?;
        return Ok(ExitCode::SUCCESS);
    }

    let result = match &args.seq {
        Some(seq_text) => {
            let shape = scan_shape(&args.shape, args.tau_p)?;
            let seq = SequenceSpec::parse(seq_text, shape)?;
            let mut cfg = config;
            cfg.time_step = cfg.time_step.min(0.1 * args.tau_p);
            run_ensemble(&seq, &couplings, &cfg, args.periods, &initial)?
        }
        None => {
            let total = args
                .total_time
                .unwrap_or(args.periods as f64 * 8.0 * args.tau_p);
            run_free_ensemble(&couplings, &config, total, args.periods, &initial)?
        }
    };

    let mut csv = String::from("time,mean_fidelity,stderr\n");
    for ((t, f), e) in result
        .times
        .iter()
        .zip(&result.mean_fidelity)
        .zip(&result.fidelity_stderr)
    {
        csv.push_str(&format!("{t:.12e},{f:.12e},{e:.12e}\n"));
    }
    fs::write(&out_path, csv).map_err(io_err)?;
    let final_infidelity = 1.0 - result.mean_fidelity.last().unwrap();
    eprintln!(
        "final infidelity {final_infidelity:.4e} after {} records; wrote {}",
        result.times.len(),
        out_path.display()
    );

    if let (Some(first), Some(second)) = (&args.seq, &args.compare) {
        // match the refocusing period (equal drive rate), not the pulse length
        let len1 = refocus_core::sequence::parse_sequence(first)?.len();
        let len2 = refocus_core::sequence::parse_sequence(second)?.len();
        let tau_2 = args.tau_p * len1 as f64 / len2 as f64;
        let shape = scan_shape(&args.shape, tau_2)?;
        let seq2 = SequenceSpec::parse(second, shape)?;
        let mut cfg2 = config;
        cfg2.time_step = cfg2.time_step.min(0.1 * tau_2);
        let result2 = run_ensemble(&seq2, &couplings, &cfg2, args.periods, &initial)?;
        let inf2 = 1.0 - result2.mean_fidelity.last().unwrap();
        eprintln!(
            "paired comparison (identical seeds, equal period): {first} infidelity {final_infidelity:.4e}, {second} {inf2:.4e}, ratio {:.3}",
            inf2 / final_infidelity
        );
    }

    RunManifest::new("noise", argv, Some(config.seed), &[&out_path])
        .with_config(serde_json::json!({
            "seq": args.seq,
            "compare": args.compare,
            "model": args.model.display().to_string(),
            "noise": config,
            "tau_p": args.tau_p,
            "periods": args.periods,
            "total_time": args.total_time,
            "realization_seeds": result.realization_seeds,
        }))
        .write(&out_path)?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// search
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SearchOutput<'a> {
    #[serde(flatten)]
    result: &'a SearchResult,
    /// Normalized envelope on a uniform grid, reusable as a sampled shape.
    envelope: ShapeSpec,
}

fn cmd_search(cli: &Cli, args: &SearchArgs, argv: Vec<String>) -> Result<ExitCode, CoreError> {
    let targets = match args
        .targets
        .iter()
        .map(|t| t.as_str())
        .collect::<Vec<_>>()
        .as_slice()
    {
        ["s"] => Targets::FIRST_ORDER,
        ["s", "alpha"] | ["alpha", "s"] => Targets::SECOND_ORDER,
        [] | [""] => Targets::NONE,
        other => {
            return Err(CoreError::InvalidArgument(format!(
                "unknown targets {other:?}; use s or s,alpha"
            )))
        }
    };
    let mut problem = SearchProblem::new(args.basis_size, args.width_fraction, targets);
    if let Some(nodes) = cli.nodes {
        problem.nodes = nodes;
    }
    let seed_coeffs = if args.seed_coefficients.is_empty() {
        problem.default_seed()
    } else {
        args.seed_coefficients.clone()
    };
    let rng_seed = cli.seed.unwrap_or(1);
    let result = solve(&problem, &seed_coeffs, rng_seed)?;

    let shape = result.shape(1.0)?;
    let envelope = ShapeSpec::Sampled {
        duration: 1.0,
        samples: shape.sample_grid(257)?,
    };
    let out_path = output_path(cli, &args.output, "search.json");
    let payload = SearchOutput {
        result: &result,
        envelope,
    };
    fs::write(
        &out_path,
        serde_json::to_string_pretty(&payload).expect("serializable") + "\n",
    )
    .map_err(io_err)?;
    eprintln!(
        "search {}: |s| = {:.3e}, |alpha| = {:.3e}, zeta = {:.6}; wrote {}",
        if result.converged {
            "converged"
        } else {
            "did not converge"
        },
        result.residual_s,
        result.residual_alpha,
        result.zeta,
        out_path.display()
    );

    RunManifest::new("search", argv, Some(rng_seed), &[&out_path])
        .with_config(serde_json::json!({
            "targets": args.targets,
            "basis_size": args.basis_size,
            "width_fraction": args.width_fraction,
            "seed_coefficients": seed_coeffs,
            "rng_seed": rng_seed,
            "nodes": problem.nodes,
            "tolerance": problem.tolerance,
        }))
        .write(&out_path)?;

    if result.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(5))
    }
}
