//! `ehcs` command-line driver.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration or parameter
//! error, 3 numerical failure (non-convergence above the configured fraction,
//! or a failed oracle check).

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use ehcs::ensemble::{build_power_pattern, build_sigma, unitary_basis, Basis, NetworkConfig, PowerModel};
use ehcs::harness::{self, stats, ExperimentSpec};
use ehcs::rng::{Role, SeedNode};
use ehcs::spectra::{restricted_eigs_sampled_gram, varsigma, vartheta, xi, zeta, Gram, RestrictedSpectrum, SpectrumMethod};
use ehcs::stochastic::TruncatedGaussianParams;
use ehcs::theory::{self, BoundConstants, DelayQuery};
use ehcs::{verify, Error};

#[derive(Parser)]
#[command(name = "ehcs", version, about = "Energy-harvesting compressive sensing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed (overrides the spec file).
    #[arg(long)]
    seed: Option<u64>,
    /// Trial count; realizations for `spectrum`, trial cap for tail kinds.
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Output file. `simulate` writes the main CSV here and its siblings
    /// next to it; the other commands write JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML spec file.
    Simulate {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form RIP maps, delay curves and tail exponents as JSON.
    Bounds(BoundsArgs),
    /// Sampled or exact restricted eigenvalues of random power patterns.
    Spectrum(SpectrumArgs),
    /// Run the oracle suite.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0.8)]
    p: f64,
    #[arg(long, default_value_t = 1.09)]
    rho_max: f64,
    #[arg(long, default_value_t = 0.88)]
    rho_min: f64,
    /// Average SNRs in dB.
    #[arg(long, value_delimiter = ',', default_value = "20,25,30")]
    snr_db: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    eps_min: f64,
    #[arg(long, default_value_t = 1.0)]
    eps_max: f64,
    /// Log-spaced allowable-MSE points.
    #[arg(long, default_value_t = 50)]
    points: usize,
    /// Deviation levels for the tail exponent.
    #[arg(long, value_delimiter = ',', default_value = "0.04,0.1")]
    t: Vec<f64>,
    /// Homogeneity `μ/ω` used in the tail exponent.
    #[arg(long, default_value_t = 2.0)]
    d: f64,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Sparsity levels.
    #[arg(long, value_delimiter = ',', default_value = "5")]
    k: Vec<usize>,
    /// Truncated-Gaussian location of the receive powers.
    #[arg(long, default_value_t = 0.2)]
    mu: f64,
    /// Scale of the receive powers; exclusive with `--d`.
    #[arg(long, conflicts_with = "d")]
    omega: Option<f64>,
    /// Homogeneity `μ/ω`.
    #[arg(long)]
    d: Option<f64>,
    #[arg(long, default_value = "dft")]
    basis: String,
    /// Supports sampled per realization; all are enumerated when `C(n, k)`
    /// does not exceed it.
    #[arg(long, default_value_t = 10_000)]
    supports: u64,
    #[command(flatten)]
    common: Common,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. }
        | Error::Parameter(_)
        | Error::Dimension(_)
        | Error::EnergyConstraint { .. }
        | Error::UnsupportedBasis(_)
        | Error::InfeasibleRic(_)
        | Error::BudgetExceeded { .. } => 2,
        Error::NonConvergence { .. } => 3,
        Error::Io(_) | Error::Json(_) | Error::Format(_) => 1,
    }
}

fn write_json(out: Option<&Path>, value: &Value) -> ehcs::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => harness::output::write_text(path, &(text + "\n")),
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn simulate(spec_path: &Path, common: &Common) -> ehcs::Result<()> {
    let mut spec = ExperimentSpec::from_file(spec_path).map_err(|e| match e {
        Error::Io(io) => Error::Config { line: 0, message: format!("cannot read {}: {io}", spec_path.display()) },
        other => other,
    })?;
    if let Some(seed) = common.seed {
        spec.master_seed = seed;
    }
    if let Some(trials) = common.trials {
        spec.trials = trials;
    }
    if let Some(workers) = common.workers {
        spec.workers = workers;
    }
    spec.validate()?;
    let out = common
        .out
        .clone()
        .or_else(|| spec.output_path.clone())
        .unwrap_or_else(|| {
            let stem = spec_path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
            PathBuf::from(format!("{stem}.csv"))
        });
    let result = harness::run(&spec)?;
    let files = result.write(&out)?;
    print!("{}", result.main().csv_body());
    eprintln!(
        "{}: {} solves, {} not converged, {:.1} s on {} workers",
        spec.kind,
        result.solves,
        result.nonconverged,
        result.elapsed.as_secs_f64(),
        result.workers
    );
    for f in &files {
        eprintln!("wrote {}", f.display());
    }
    result.check_convergence(spec.solver.max_nonconverged_fraction)
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..points)
        .map(|i| match i {
            0 => lo,
            i if i == points - 1 => hi,
            i => 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64),
        })
        .collect()
}

fn num_or_inf(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!("inf")
    }
}

fn bounds(args: &BoundsArgs) -> ehcs::Result<()> {
    let constants = BoundConstants::new(args.c1, args.c2)?;
    if !(args.eps_min > 0.0 && args.eps_max >= args.eps_min) || args.points == 0 {
        return Err(Error::Parameter("allowable MSE range must satisfy 0 < eps-min <= eps-max, points >= 1".into()));
    }
    if !(args.rho_min > 0.0 && args.rho_min <= args.rho_max) {
        return Err(Error::Parameter("restricted eigenvalues must satisfy 0 < rho-min <= rho-max".into()));
    }
    let spectrum = RestrictedSpectrum::new(args.k, args.rho_max, args.rho_min, SpectrumMethod::ExactEnumeration, 0);
    let (hi, lo) = (args.rho_max, args.rho_min);
    let mut curves = Vec::new();
    for &snr_db in &args.snr_db {
        let snr_ave = 10f64.powf(snr_db / 10.0);
        let mut points = Vec::new();
        for epsilon in log_grid(args.eps_min, args.eps_max, args.points) {
            let query = DelayQuery { epsilon, snr_ave, spectrum, k: args.k, n: args.n, p: args.p, constants };
            let eval = theory::achievable_delay_detail(&query)?;
            let success = if eval.delay.is_finite() {
                Some(theory::rip_probability(eval.delay.ceil().max(1.0), args.p, eval.beta_tilde.unwrap_or(0.0), &constants)?)
            } else {
                None
            };
            points.push(json!({
                "epsilon": epsilon,
                "delta_star": eval.delta_star,
                "beta_tilde": eval.beta_tilde,
                "delay": num_or_inf(eval.delay),
                "rip_probability": success,
            }));
        }
        curves.push(json!({
            "snr_db": snr_db,
            "epsilon_th": theory::mse_threshold(snr_ave),
            "points": points,
        }));
    }
    let tail: Vec<Value> = args
        .t
        .iter()
        .map(|&t| {
            json!({
                "t": t,
                "exponent": theory::ld_exponent(args.k, t),
                "log_tail_over_n": theory::ld_log_tail_bound(args.k, t, args.d, 1),
            })
        })
        .collect();
    let report = json!({
        "scenario": {
            "n": args.n, "k": args.k, "p": args.p,
            "rho_max": hi, "rho_min": lo, "c1": args.c1, "c2": args.c2, "d": args.d,
        },
        "rip": {
            "ratio": spectrum.ratio,
            "xi": xi(hi, lo),
            "zeta": zeta(hi, lo),
            "vartheta": vartheta(hi, lo),
            "varsigma": varsigma(hi),
            "rho_max_above_two": hi > 2.0,
        },
        "delay_curves": curves,
        "large_deviation": tail,
    });
    write_json(args.common.out.as_deref(), &report)
}

struct Realization {
    rho_max: f64,
    rho_min: f64,
    method: SpectrumMethod,
}

fn spectrum_realization(args: &SpectrumArgs, basis: &Basis, power: &TruncatedGaussianParams, k: usize, node: SeedNode) -> ehcs::Result<Realization> {
    let config = NetworkConfig { n: args.n, k, p: 1.0, sigma2: 0.0, basis: basis.clone(), power_model: PowerModel::Stochastic(*power) };
    let pattern = build_power_pattern(&config, &mut node.stream(Role::Pattern))?;
    let gram = match basis {
        Basis::Dft => Gram::dft_circulant(&pattern.gamma)?,
        other => Gram::from_sigma(&build_sigma(&pattern, &unitary_basis(args.n, other)?)?),
    };
    let s = restricted_eigs_sampled_gram(&gram, k, args.supports, &mut node.stream(Role::Spectrum))?;
    Ok(Realization { rho_max: s.rho_max, rho_min: s.rho_min, method: s.method })
}

fn summarize(values: &[f64]) -> Value {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    json!({
        "min": sorted[0],
        "q05": stats::quantile(&sorted, 0.05),
        "median": stats::quantile(&sorted, 0.5),
        "q95": stats::quantile(&sorted, 0.95),
        "max": sorted[sorted.len() - 1],
    })
}

fn spectrum(args: &SpectrumArgs) -> ehcs::Result<()> {
    let basis: Basis = args.basis.parse()?;
    let power = match (args.omega, args.d) {
        (Some(omega), _) => TruncatedGaussianParams::new(args.mu, omega)?,
        (None, Some(d)) => TruncatedGaussianParams::from_homogeneity(args.mu, d)?,
        (None, None) => TruncatedGaussianParams::from_homogeneity(args.mu, 2.0)?,
    };
    let realizations = args.common.trials.unwrap_or(50);
    if realizations == 0 {
        return Err(Error::Parameter("at least one realization is needed".into()));
    }
    let seed = args.common.seed.unwrap_or(0);
    let workers = match args.common.workers.unwrap_or(0) {
        0 => std::thread::available_parallelism().map_or(1, usize::from),
        w => w,
    };
    let root = SeedNode::root(seed).child_str("spectrum");
    let mut per_k = Vec::new();
    for &k in &args.k {
        let node = root.child_str("k").child(k as u64);
        let mut results: Vec<Option<ehcs::Result<Realization>>> = (0..realizations).map(|_| None).collect();
        let chunk = (realizations as usize).div_ceil(workers);
        std::thread::scope(|scope| {
            for (c, slots) in results.chunks_mut(chunk).enumerate() {
                let (basis, power) = (&basis, &power);
                scope.spawn(move || {
                    for (i, slot) in slots.iter_mut().enumerate() {
                        let r = (c * chunk + i) as u64;
                        *slot = Some(spectrum_realization(args, basis, power, k, node.child(r)));
                    }
                });
            }
        });
        let results: Vec<Realization> =
            results.into_iter().map(|r| r.expect("every slot is filled")).collect::<ehcs::Result<_>>()?;
        let rho_max: Vec<f64> = results.iter().map(|r| r.rho_max).collect();
        let rho_min: Vec<f64> = results.iter().map(|r| r.rho_min).collect();
        let ratio: Vec<f64> = results.iter().map(|r| r.rho_max / r.rho_min).collect();
        per_k.push(json!({
            "k": k,
            "method": results[0].method,
            "realizations": realizations,
            "rho_max": summarize(&rho_max),
            "rho_min": summarize(&rho_min),
            "ratio": summarize(&ratio),
            "values": results.iter().map(|r| [r.rho_max, r.rho_min]).collect::<Vec<_>>(),
        }));
    }
    let report = json!({
        "scenario": {
            "n": args.n, "mu": power.mu(), "omega": power.omega(), "d": power.d(),
            "basis": basis.name(), "supports": args.supports, "seed": seed,
        },
        "spectra": per_k,
    });
    write_json(args.common.out.as_deref(), &report)
}

fn run_verify(common: &Common) -> ehcs::Result<bool> {
    let results = verify::run_oracle_suite(common.seed.unwrap_or(0))?;
    for r in &results {
        println!(
            "{} {:<55} max_error={:.3e} tol={:.1e} cases={} ({})",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.max_error,
            r.tolerance,
            r.cases,
            r.detail
        );
    }
    if let Some(out) = &common.out {
        write_json(Some(out), &serde_json::to_value(&results)?)?;
    }
    Ok(results.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate { spec, common } => simulate(spec, common).map(|_| true),
        Command::Bounds(args) => bounds(args).map(|_| true),
        Command::Spectrum(args) => spectrum(args).map(|_| true),
        Command::Verify { common } => run_verify(common),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: oracle checks failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
