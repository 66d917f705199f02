//! Trace and summary serialization: JSONL traces (one iteration record per
//! line) and CSV run summaries with a fixed column order.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use afslp_core::report::{IterationRecord, SolverResult, SolverStatus};
use serde::Serialize;

/// One summary row per solve. Field order is the CSV column order.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub problem: String,
    pub algorithm: String,
    pub status: String,
    pub outer_iterations: usize,
    pub constraint_pair_evals: u64,
    pub jacobian_pair_evals: u64,
    pub wall_time_s: f64,
    pub f_final: f64,
    pub v_final: f64,
    pub tau_0: f64,
    pub delta_0: f64,
}

pub fn status_name(status: SolverStatus) -> &'static str {
    match status {
        SolverStatus::Converged => "Converged",
        SolverStatus::MaxIterations => "MaxIterations",
        SolverStatus::RadiusTooSmall => "RadiusTooSmall",
        SolverStatus::InfeasibleStationary => "InfeasibleStationary",
        SolverStatus::EvaluationError => "EvaluationError",
    }
}

/// Exit code contract: 0 converged, 2 iteration/radius/evaluation failure,
/// 3 infeasible-stationary.
pub fn exit_code(status: SolverStatus) -> i32 {
    match status {
        SolverStatus::Converged => 0,
        SolverStatus::MaxIterations
        | SolverStatus::RadiusTooSmall
        | SolverStatus::EvaluationError => 2,
        SolverStatus::InfeasibleStationary => 3,
    }
}

pub fn summarize(
    problem: &str,
    algorithm: &str,
    result: &SolverResult,
    wall_time_s: f64,
    tau_0: f64,
    delta_0: f64,
) -> RunSummary {
    RunSummary {
        problem: problem.to_string(),
        algorithm: algorithm.to_string(),
        status: status_name(result.status).to_string(),
        outer_iterations: result.outer_iterations,
        constraint_pair_evals: result.counters.n_constraint_pairs,
        jacobian_pair_evals: result.counters.n_jacobian_pairs,
        wall_time_s,
        f_final: result.f_final,
        v_final: result.v_final,
        tau_0,
        delta_0,
    }
}

/// Write one JSON object per iteration record. Unless `log_iterates` is
/// set, the iterate vector is stripped to keep the files small.
pub fn write_trace_jsonl(
    path: &Path,
    trace: &[IterationRecord],
    log_iterates: bool,
) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for record in trace {
        let mut record = record.clone();
        if !log_iterates {
            record.w = None;
        }
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Append one summary row, writing the header only when the file is new.
pub fn append_summary_csv(path: &Path, row: &RunSummary) -> std::io::Result<()> {
    let new_file = !path.exists();
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut writer = csv::WriterBuilder::new()
        .has_headers(new_file)
        .from_writer(file);
    writer.serialize(row)?;
    writer.flush()
}

/// Write a whole summary table (header plus rows).
pub fn write_summary_csv(path: &Path, rows: &[RunSummary]) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()
}
