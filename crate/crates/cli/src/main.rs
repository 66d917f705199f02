//! Command-line front end: single solves and the benchmark experiments,
//! with JSONL traces and CSV summaries.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use afslp_cli::experiments::{
    cycling_points, run_cycling_experiment, run_tau_sweep, sphere_max_radius,
};
use afslp_cli::output::{
    append_summary_csv, exit_code, status_name, summarize, write_summary_csv, write_trace_jsonl,
};
use afslp_core::afslp::{solve_afslp, AfslpConfig};
use afslp_core::feasibility::FeasIterParams;
use afslp_core::fslp::{solve_fslp, FslpConfig};
use afslp_core::library::problem_by_name;
use afslp_core::report::SolverResult;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "afslp", about = "Trust-region SLP solvers and experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver on a registered problem.
    Solve(SolveArgs),
    /// Run a benchmark experiment.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    Fslp,
    Afslp,
    /// Original tolerance-tube behavior (cycles on the cycling example).
    AfslpLegacy,
}

#[derive(Args)]
struct SolveArgs {
    /// Problem name: parabola, sphere-<n>, cycling, di-tocp-<N>-<d>.
    #[arg(long)]
    problem: String,
    #[arg(long, value_enum, default_value = "afslp")]
    algorithm: Algorithm,
    /// Initial trust-region radius.
    #[arg(long, default_value_t = 1.0)]
    delta0: f64,
    /// Feasibility tolerance (fslp) or initial tube width (afslp).
    #[arg(long)]
    tau0: Option<f64>,
    /// Tube shrink factor (afslp).
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    /// Switching-condition factor (afslp).
    #[arg(long, default_value_t = 0.1)]
    sigma_switch: f64,
    /// Feasibility tolerance of the termination test (afslp).
    #[arg(long, default_value_t = 1e-7)]
    eps_f: f64,
    /// Stationarity tolerance of the termination test (afslp).
    #[arg(long, default_value_t = 1e-7)]
    eps_o: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Write the iteration trace as JSONL.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Append one run-summary CSV row.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Repeat the solve for wall-time averaging.
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    /// Include the iterate vector in every trace record.
    #[arg(long, default_value_t = false)]
    log_iterates: bool,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Maximum trust-region radius at which the feasibility iterations
    /// converge on the sphere problem, per dimension.
    Sphere(SphereArgs),
    /// afSLP versus the original tolerance-tube method on the cycling
    /// example.
    Cycling(CyclingArgs),
    /// FSLP versus afSLP evaluation counts across initial tube widths.
    TauSweep(TauSweepArgs),
}

#[derive(Args)]
struct SphereArgs {
    /// Sphere dimensions to probe.
    #[arg(long, value_delimiter = ',', default_value = "2,10,50,100,200")]
    n_list: Vec<usize>,
    /// Starting radius of the halving search.
    #[arg(long, default_value_t = 10.0)]
    delta0: f64,
    /// Feasibility tolerance of the probe.
    #[arg(long, default_value_t = 1e-8)]
    tau0: f64,
    /// Write the (n, max_converging_radius) table as CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct CyclingArgs {
    #[arg(long, default_value_t = 1.0)]
    delta0: f64,
    #[arg(long, default_value_t = 1.2)]
    tau0: f64,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    /// Trace path prefix; writes <prefix>.afslp-a.jsonl, .afslp-b.jsonl,
    /// and .legacy.jsonl.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct TauSweepArgs {
    #[arg(long)]
    problem: String,
    /// Initial tube widths for the afSLP runs.
    #[arg(long, value_delimiter = ',', default_value = "1e-7,1e-6,1e-5,1e-4,1e-3")]
    tau_list: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    delta0: f64,
    /// Timed repetitions per row for wall-time averaging.
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    /// Write the sweep table as CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 4,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let code = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Experiment(ExperimentCommand::Sphere(args)) => cmd_experiment_sphere(args),
        Command::Experiment(ExperimentCommand::Cycling(args)) => cmd_experiment_cycling(args),
        Command::Experiment(ExperimentCommand::TauSweep(args)) => cmd_experiment_tau_sweep(args),
    };
    ExitCode::from(code)
}

fn fail(msg: impl std::fmt::Display, code: u8) -> u8 {
    eprintln!("error: {msg}");
    code
}

fn cmd_solve(args: SolveArgs) -> u8 {
    let Some(lib) = problem_by_name(&args.problem) else {
        return fail(format!("unknown problem `{}`", args.problem), 4);
    };
    let repeat = args.repeat.max(1);
    let algorithm_name = match args.algorithm {
        Algorithm::Fslp => "fslp",
        Algorithm::Afslp => "afslp",
        Algorithm::AfslpLegacy => "afslp-legacy",
    };

    let run = || -> Result<SolverResult, afslp_core::SolverError> {
        match args.algorithm {
            Algorithm::Fslp => {
                let config = FslpConfig {
                    delta0: args.delta0,
                    tau: args.tau0.unwrap_or(1e-8),
                    max_outer: args.max_iter,
                    ..FslpConfig::default()
                };
                solve_fslp(&lib.problem, &lib.default_start, &config)
            }
            Algorithm::Afslp | Algorithm::AfslpLegacy => {
                let config = AfslpConfig {
                    delta0: args.delta0,
                    tau0: args.tau0.unwrap_or(1e-3),
                    beta: args.beta,
                    sigma_switch: args.sigma_switch,
                    eps_feas: args.eps_f,
                    eps_opt: args.eps_o,
                    max_outer: args.max_iter,
                    legacy: args.algorithm == Algorithm::AfslpLegacy,
                    ..AfslpConfig::default()
                };
                solve_afslp(&lib.problem, &lib.default_start, &config)
            }
        }
    };

    let start = Instant::now();
    let mut result = match run() {
        Ok(r) => r,
        Err(e) => return fail(e, 2),
    };
    for _ in 1..repeat {
        result = match run() {
            Ok(r) => r,
            Err(e) => return fail(e, 2),
        };
    }
    let wall = start.elapsed().as_secs_f64() / repeat as f64;

    println!(
        "{} on {}: {} after {} iterations, f = {:.9e}, v = {:.3e}, {} constraint-pair evals",
        algorithm_name,
        args.problem,
        status_name(result.status),
        result.outer_iterations,
        result.f_final,
        result.v_final,
        result.counters.n_constraint_pairs,
    );

    if let Some(path) = &args.log {
        if let Err(e) = write_trace_jsonl(path, &result.trace, args.log_iterates) {
            return fail(e, 2);
        }
    }
    if let Some(path) = &args.summary {
        let tau0 = args.tau0.unwrap_or(match args.algorithm {
            Algorithm::Fslp => 1e-8,
            _ => 1e-3,
        });
        let row = summarize(&args.problem, algorithm_name, &result, wall, tau0, args.delta0);
        if let Err(e) = append_summary_csv(path, &row) {
            return fail(e, 2);
        }
    }
    u8::try_from(exit_code(result.status)).unwrap_or(2)
}

fn cmd_experiment_sphere(args: SphereArgs) -> u8 {
    if args.n_list.iter().any(|&n| n < 2) {
        return fail("sphere dimensions must be at least 2", 4);
    }
    let params = FeasIterParams::default();
    let mut lines = vec!["n,max_converging_radius".to_string()];
    for &n in &args.n_list {
        match sphere_max_radius(n, args.delta0, args.tau0, &params) {
            Ok(radius) => {
                println!("sphere n = {n}: max converging radius {radius:.6e}");
                lines.push(format!("{n},{radius}"));
            }
            Err(e) => return fail(e, 2),
        }
    }
    if let Some(path) = &args.summary {
        if let Err(e) = std::fs::write(path, lines.join("\n") + "\n") {
            return fail(e, 2);
        }
    }
    0
}

fn cmd_experiment_cycling(args: CyclingArgs) -> u8 {
    let outcome = match run_cycling_experiment(args.delta0, args.tau0, args.beta) {
        Ok(o) => o,
        Err(e) => return fail(e, 2),
    };
    let (a, b) = cycling_points();
    println!(
        "afslp from ({}, {}): {} at f = {:.6}",
        a[0],
        a[1],
        status_name(outcome.afslp_from_a.status),
        outcome.afslp_from_a.f_final
    );
    println!(
        "afslp from ({}, {}): {} at f = {:.6}",
        b[0],
        b[1],
        status_name(outcome.afslp_from_b.status),
        outcome.afslp_from_b.f_final
    );
    println!(
        "legacy tolerance-tube: {} revisit periods detected",
        outcome.legacy_periods
    );
    let legacy_cycled = outcome.legacy_periods >= 3;
    println!(
        "verdict: afSLP converged (both) = {}, legacy cycled = {}",
        outcome.afslp_converged_both, legacy_cycled
    );

    if let Some(prefix) = &args.log {
        let base = prefix.to_string_lossy();
        let runs = [
            (format!("{base}.afslp-a.jsonl"), &outcome.afslp_from_a),
            (format!("{base}.afslp-b.jsonl"), &outcome.afslp_from_b),
            (format!("{base}.legacy.jsonl"), &outcome.legacy),
        ];
        for (path, result) in runs {
            if let Err(e) = write_trace_jsonl(path.as_ref(), &result.trace, true) {
                return fail(e, 2);
            }
        }
    }
    if outcome.afslp_converged_both && legacy_cycled {
        0
    } else {
        2
    }
}

fn cmd_experiment_tau_sweep(args: TauSweepArgs) -> u8 {
    if problem_by_name(&args.problem).is_none() {
        return fail(format!("unknown problem `{}`", args.problem), 4);
    }
    let rows = match run_tau_sweep(&args.problem, &args.tau_list, args.delta0, args.repeat) {
        Ok(rows) => rows,
        Err(e) => return fail(e, 2),
    };
    for row in &rows {
        println!(
            "{} tau0 = {:.1e}: {} with {} constraint-pair evals in {:.3}s",
            row.algorithm, row.tau_0, row.status, row.constraint_pair_evals, row.wall_time_s
        );
    }
    if let Some(path) = &args.summary {
        if let Err(e) = write_summary_csv(path, &rows) {
            return fail(e, 2);
        }
    }
    if rows.iter().all(|r| r.status == "Converged") {
        0
    } else {
        2
    }
}
