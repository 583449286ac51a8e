//! Command implementations behind the binary: parameter certificates,
//! single runs with bound verification, and sweeps.
//!
//! Every artifact these commands write is a pure function of the config and
//! seeds; nothing nondeterministic (timestamps, thread ids, map orders)
//! reaches an output file, so re-running a command reproduces its files
//! byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, ParamMode};
use crate::error::{Error, Result};
use crate::hyperparams::{
    contraction_factors, feasible_gamma_interval, feasible_lambda_interval, ops_lower_bound,
    ContractionCert,
};
use crate::minimize::reference_minimizer;
use crate::runtime::{verify_bounds, Algo, BoundsReport, StopCause};
use crate::sweep::{run_sweep, single_run, Execution};

/// Text certificate plus the exit verdict (strictly feasible or not).
pub struct ParamsOutput {
    pub text: String,
    pub strictly_feasible: bool,
}

/// Compute and format the full parameter certificate for a config.
pub fn cmd_params(config: &ExperimentConfig) -> Result<ParamsOutput> {
    let problem = config.build_problem()?;
    let cert = problem.dominance_certificate();
    let mode = config.param_mode()?;
    let d0 = problem.diameter_bound();
    let eps = config.eps_budget();

    let mut text = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(text, "{k}: {v}");
    };
    line("n", problem.n().to_string());
    line("mode", format!("{mode:?}").to_lowercase());
    line("mu", cert.mu.to_string());
    line("h_max", cert.h_max.to_string());
    line("certificate", if cert.sampled { "sampled".into() } else { "exact".into() });
    line("dominance_valid", cert.valid.to_string());

    if !cert.valid && mode != ParamMode::Paper {
        line("verdict", format!("dominance violated (mu = {} <= 0)", cert.mu));
        return Ok(ParamsOutput {
            text,
            strictly_feasible: false,
        });
    }

    let resolved = config.resolve_hyperparams(&problem)?;
    let hp = resolved.hp;
    if hp.mu != cert.mu || hp.h_max != cert.h_max {
        // Printed-parameter mode certifies against its own margin; keep
        // both visible instead of silently switching.
        line("param_mu", hp.mu.to_string());
        line("param_h_max", hp.h_max.to_string());
    }
    if let Ok((lo, hi)) = feasible_gamma_interval(&crate::problem::DominanceCert {
        mu: hp.mu,
        h_max: hp.h_max,
        valid: hp.mu > 0.0,
        sampled: cert.sampled,
    }) {
        line("gamma_interval", format!("({lo}, {hi})"));
    }
    line("gamma", hp.gamma.to_string());
    if let Ok((lo, hi)) = feasible_lambda_interval(hp.gamma, hp.mu) {
        line("lambda_interval", format!("({lo}, {hi})"));
    }
    line("lambda", hp.lambda.to_string());

    let f = contraction_factors(&hp);
    line("alpha1", f.alpha1.to_string());
    line("alpha2", f.alpha2.to_string());
    line("alpha", f.alpha.to_string());
    line("d0", d0.to_string());
    line("epsilon", eps.to_string());

    let feasible = hp.strictly_feasible();
    if feasible && f.is_contractive() {
        match ops_lower_bound(eps, d0, f.alpha) {
            Ok(b) => {
                line("beta", b.beta.to_string());
                line("beta_cycles", b.cycles.to_string());
                let mut degrees: Vec<usize> = (0..problem.n())
                    .map(|i| problem.neighbors(i).len())
                    .collect();
                degrees.sort_unstable();
                degrees.dedup();
                for d in degrees {
                    line(
                        &format!("comm_budget_degree_{d}"),
                        b.comms_for(d).to_string(),
                    );
                }
            }
            Err(e) => line("beta", format!("unavailable ({e})")),
        }
    } else {
        line(
            "beta",
            "unavailable (parameters not strictly admissible; alpha >= 1)".into(),
        );
        line("bound_verification", "disabled".into());
    }
    line("strictly_feasible", feasible.to_string());

    Ok(ParamsOutput {
        text,
        strictly_feasible: feasible,
    })
}

/// Artifacts written by a single run.
pub struct RunArtifacts {
    pub trace_csv: PathBuf,
    pub report: PathBuf,
    pub events_jsonl: Option<PathBuf>,
    pub converged: bool,
}

fn format_check(name: &str, report: &mut String, c: &crate::runtime::CheckOutcome) {
    let _ = writeln!(
        report,
        "{name}: {} (violations: {}, worst_excess: {})",
        if c.pass { "pass" } else { "FAIL" },
        c.violations,
        c.worst_excess
    );
}

fn format_bounds_report(out: &mut String, r: &BoundsReport) {
    let _ = writeln!(out, "alpha: {}", r.alpha);
    let _ = writeln!(out, "initial_max_dist: {}", r.initial_max_dist);
    format_check("decay_bound", out, &r.decay);
    format_check("forward_invariance", out, &r.invariance);
    match &r.sync_ratio {
        Some(c) => format_check("sync_step_ratio", out, c),
        None => {
            let _ = writeln!(out, "sync_step_ratio: skipped (asynchronous trace)");
        }
    }
    let _ = writeln!(
        out,
        "budget: {} (beta: {}, cycles: {}, attained: {})",
        if r.budget.pass { "pass" } else { "FAIL" },
        r.budget.beta,
        r.budget.required_cycles,
        r.budget
            .attained
            .map_or("never".to_string(), |(k, d)| format!("tick {k} at dist {d}"))
    );
    let _ = writeln!(
        out,
        "reached_target_before_budget: {}",
        r.budget.reached_before_budget
    );
    if r.undelivered_edges.is_empty() {
        let _ = writeln!(out, "undelivered_edges: none");
    } else {
        let _ = writeln!(out, "undelivered_edges: {:?}", r.undelivered_edges);
    }
}

/// Execute one run and write `trace.csv` and `report.txt` (plus
/// `events.jsonl` when event recording is on) into `out_dir`.
pub fn cmd_run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunArtifacts> {
    let algo: Algo = config.run.algo.as_deref().unwrap_or("nag").parse()?;
    let (problem, resolved, zstar, trace) = single_run(config, None, None, algo)?;
    fs::create_dir_all(out_dir)?;

    let trace_csv = out_dir.join("trace.csv");
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    fs::write(&trace_csv, buf)?;

    let events_jsonl = if trace.events.is_some() {
        let path = out_dir.join("events.jsonl");
        let mut buf = Vec::new();
        trace.write_events_jsonl(&mut buf)?;
        fs::write(&path, buf)?;
        Some(path)
    } else {
        None
    };

    let mut report = String::new();
    let _ = writeln!(report, "algo: {}", algo.label());
    let _ = writeln!(report, "n: {}", problem.n());
    let _ = writeln!(report, "mode: {}", format!("{:?}", resolved.mode).to_lowercase());
    let _ = writeln!(report, "gamma: {}", resolved.hp.gamma);
    let _ = writeln!(report, "lambda: {}", resolved.hp.lambda);
    let _ = writeln!(report, "ticks: {}", trace.last_k());
    let _ = writeln!(report, "final_ops: {}", trace.rows.last().map_or(0, |r| r.ops));
    let _ = writeln!(report, "final_max_dist: {}", trace.final_max_dist());
    let _ = writeln!(
        report,
        "stop_cause: {}",
        match trace.stop_cause {
            StopCause::Horizon => "horizon",
            StopCause::Converged => "converged",
        }
    );
    let _ = writeln!(
        report,
        "grad_component_evals: {}",
        trace.grad_component_evals
    );
    let _ = writeln!(
        report,
        "minimizer_x_first: {}",
        zstar.x.first().copied().unwrap_or(f64::NAN)
    );

    if algo == Algo::Nag && resolved.verification_enabled() {
        let cert = ContractionCert::new(&resolved.hp, problem.diameter_bound(), config.eps_budget());
        let bounds = verify_bounds(&trace, &cert);
        let _ = writeln!(report, "bound_verification: enabled");
        format_bounds_report(&mut report, &bounds);
    } else {
        let _ = writeln!(
            report,
            "bound_verification: disabled ({})",
            if algo == Algo::Nag {
                "parameters not strictly admissible"
            } else {
                "comparator algorithm"
            }
        );
    }

    let report_path = out_dir.join("report.txt");
    fs::write(&report_path, report)?;

    Ok(RunArtifacts {
        trace_csv,
        report: report_path,
        events_jsonl,
        converged: trace.stop_cause == StopCause::Converged,
    })
}

/// Artifacts written by a sweep.
pub struct SweepArtifacts {
    pub runs_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub fig_csv: PathBuf,
}

/// Execute the configured sweep and write its three CSVs into `out_dir`.
pub fn cmd_sweep(
    config: &ExperimentConfig,
    out_dir: &Path,
    exec: Execution,
) -> Result<SweepArtifacts> {
    let result = run_sweep(config, exec)?;
    fs::create_dir_all(out_dir)?;

    let runs_csv = out_dir.join("runs.csv");
    let mut buf = Vec::new();
    result.write_runs_csv(&mut buf)?;
    fs::write(&runs_csv, buf)?;

    let summary_csv = out_dir.join("summary.csv");
    let mut buf = Vec::new();
    result.write_summary_csv(&mut buf)?;
    fs::write(&summary_csv, buf)?;

    let fig_csv = out_dir.join("fig_distance.csv");
    let mut buf = Vec::new();
    result.write_fig_csv(&mut buf)?;
    fs::write(&fig_csv, buf)?;

    Ok(SweepArtifacts {
        runs_csv,
        summary_csv,
        fig_csv,
    })
}

/// Quick sanity used by the binary: a minimizer must exist before a run is
/// attempted, and failing that is a config-level diagnosis.
pub fn preflight(config: &ExperimentConfig) -> Result<()> {
    let problem = config.build_problem()?;
    let cert = problem.dominance_certificate();
    if !cert.valid {
        return Err(Error::DominanceViolated { mu: cert.mu });
    }
    reference_minimizer(&problem).map(|_| ())
}
