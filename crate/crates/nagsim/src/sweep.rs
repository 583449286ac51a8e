//! Multi-run sweeps over gate probabilities, seeds, and algorithms.
//!
//! Every run in a sweep is independent (its own schedule, channels, and
//! states), so the batch fans out across threads when the `parallel`
//! feature is enabled. Results are collected in submission order and sorted
//! before writing, so the emitted CSVs are identical however the batch was
//! executed.

use std::collections::BTreeMap;
use std::io::Write;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ResolvedParams};
use crate::dynamics::LocalPair;
use crate::error::{Error, Result};
use crate::hyperparams::ContractionCert;
use crate::minimize::reference_minimizer;
use crate::problem::SeparableProblem;
use crate::runtime::{run_async, verify_bounds, Algo, StopSpec};

/// How to execute a batch of independent jobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    /// Thread pool when the `parallel` feature is on; otherwise sequential.
    Parallel,
    /// Always sequential, on the calling thread.
    Sequential,
}

/// Map a worker over independent jobs, preserving job order in the output.
pub fn map_jobs<I, O, F>(exec: Execution, jobs: Vec<I>, worker: F) -> Vec<O>
where
    I: Send,
    O: Send,
    F: Fn(I) -> O + Sync + Send,
{
    match exec {
        Execution::Sequential => jobs.into_iter().map(worker).collect(),
        Execution::Parallel => {
            #[cfg(feature = "parallel")]
            {
                jobs.into_par_iter().map(worker).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                jobs.into_iter().map(worker).collect()
            }
        }
    }
}

/// One run's accounting.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub algo: Algo,
    pub p: f64,
    pub seed: u64,
    /// First tick with every agent within the stopping tolerance.
    pub ticks_to_eps: Option<u64>,
    /// ops(k) at that tick.
    pub ops_to_eps: Option<u64>,
    pub grad_component_evals: u64,
    pub converged: bool,
    pub final_max_dist: f64,
    /// Contraction-bound verification verdict; present only for the
    /// accelerated method with strictly admissible parameters.
    pub bounds_ok: Option<bool>,
}

/// Per-tick distance samples for the figure export.
#[derive(Debug, Clone)]
pub struct FigSample {
    pub algo: Algo,
    pub p: f64,
    pub seed: u64,
    pub k: u64,
    pub max_dist: f64,
}

/// Published reference counts for the ten-agent benchmark (iterations to
/// convergence under each gate probability, with percent reductions of the
/// accelerated method against each comparator).
pub const REFERENCE_COUNTS: [(f64, u64, u64, u64, u64, u64); 10] = [
    (1.0, 5, 6, 12, 17, 58),
    (0.9, 7, 7, 15, 0, 53),
    (0.8, 10, 11, 17, 9, 41),
    (0.7, 8, 10, 20, 20, 60),
    (0.6, 10, 11, 24, 9, 58),
    (0.5, 15, 17, 29, 12, 48),
    (0.4, 15, 19, 34, 21, 56),
    (0.3, 24, 29, 58, 17, 59),
    (0.2, 49, 59, 93, 17, 47),
    (0.1, 123, 170, 314, 28, 61),
];

pub fn reference_row(p: f64) -> Option<(u64, u64, u64, u64, u64)> {
    REFERENCE_COUNTS
        .iter()
        .find(|&&(rp, ..)| (rp - p).abs() < 1e-9)
        .map(|&(_, nag, hb, gd, rhb, rgd)| (nag, hb, gd, rhb, rgd))
}

/// Aggregated row for one gate probability.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub p: f64,
    pub median_ticks: BTreeMap<Algo, f64>,
    pub median_ops: BTreeMap<Algo, f64>,
    pub median_grad_evals: BTreeMap<Algo, f64>,
    pub unconverged: u64,
    /// `100 · (1 - nag/other)` over median ticks.
    pub reduction_vs_hb_pct: Option<f64>,
    pub reduction_vs_gd_pct: Option<f64>,
    pub reference: Option<(u64, u64, u64, u64, u64)>,
}

/// Complete sweep result.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub runs: Vec<RunOutcome>,
    pub summary: Vec<SummaryRow>,
    pub fig: Vec<FigSample>,
    pub eps_stop: f64,
}

fn median(sorted: &[f64]) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let m = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[m]
    } else {
        0.5 * (sorted[m - 1] + sorted[m])
    })
}

struct Job {
    algo: Algo,
    p: f64,
    seed: u64,
    keep_curve: bool,
}

/// Run the full sweep described by a config.
pub fn run_sweep(config: &ExperimentConfig, exec: Execution) -> Result<SweepResult> {
    let problem = config.build_problem()?;
    let resolved = config.resolve_hyperparams(&problem)?;
    let zstar = reference_minimizer(&problem)?.pair();
    let init = config.build_init(&problem)?;
    let eps_stop = config.eps_stop();
    let eps_budget = config.eps_budget();
    let algos = config.sweep_algos()?;
    let p_values = config.sweep_p_values();
    for &p in &p_values {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "sweep probability {p} outside (0, 1]"
            )));
        }
    }
    let seeds = config.sweep_seeds();
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one seed".into()));
    }
    let fig_p = config.fig_p_values();

    let mut jobs = Vec::new();
    for &algo in &algos {
        for &p in &p_values {
            for &seed in &seeds {
                jobs.push(Job {
                    algo,
                    p,
                    seed,
                    keep_curve: seed == seeds[0]
                        && fig_p.iter().any(|&fp| (fp - p).abs() < 1e-9),
                });
            }
        }
    }

    let worker = |job: Job| -> Result<(RunOutcome, Vec<FigSample>)> {
        let schedule = config.build_schedule(Some(job.p), Some(job.seed))?;
        let stop = StopSpec {
            epsilon: Some(eps_stop),
            zstar: zstar.clone(),
        };
        let inits = vec![init.clone(); problem.n()];
        let params = resolved.for_algo(job.algo);
        let trace = run_async(&problem, &params, &schedule, &inits, &stop, false)?;
        let bounds_ok = (job.algo == Algo::Nag && resolved.verification_enabled()).then(|| {
            let cert = ContractionCert::new(&resolved.hp, problem.diameter_bound(), eps_budget);
            verify_bounds(&trace, &cert).all_pass()
        });
        let ticks = trace.first_tick_within(eps_stop);
        let outcome = RunOutcome {
            algo: job.algo,
            p: job.p,
            seed: job.seed,
            ticks_to_eps: ticks,
            ops_to_eps: trace.ops_at_first_within(eps_stop),
            grad_component_evals: trace.grad_component_evals,
            converged: ticks.is_some(),
            final_max_dist: trace.final_max_dist(),
            bounds_ok,
        };
        let curve = if job.keep_curve {
            trace
                .rows
                .iter()
                .map(|r| FigSample {
                    algo: job.algo,
                    p: job.p,
                    seed: job.seed,
                    k: r.k,
                    max_dist: r.max_dist,
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok((outcome, curve))
    };

    let results = map_jobs(exec, jobs, worker);
    let mut runs = Vec::new();
    let mut fig = Vec::new();
    for r in results {
        let (outcome, curve) = r?;
        runs.push(outcome);
        fig.extend(curve);
    }

    runs.sort_by(|a, b| {
        a.algo
            .cmp(&b.algo)
            .then(a.p.total_cmp(&b.p))
            .then(a.seed.cmp(&b.seed))
    });
    fig.sort_by(|a, b| {
        a.algo
            .cmp(&b.algo)
            .then(a.p.total_cmp(&b.p))
            .then(a.seed.cmp(&b.seed))
            .then(a.k.cmp(&b.k))
    });

    let mut p_sorted = p_values.clone();
    p_sorted.sort_by(f64::total_cmp);
    let mut summary = Vec::new();
    for &p in &p_sorted {
        let mut median_ticks = BTreeMap::new();
        let mut median_ops = BTreeMap::new();
        let mut median_grad_evals = BTreeMap::new();
        let mut unconverged = 0;
        for &algo in &algos {
            let mut ticks: Vec<f64> = Vec::new();
            let mut ops: Vec<f64> = Vec::new();
            let mut evals: Vec<f64> = Vec::new();
            for r in runs
                .iter()
                .filter(|r| r.algo == algo && (r.p - p).abs() < 1e-12)
            {
                match r.ticks_to_eps {
                    Some(t) => {
                        ticks.push(t as f64);
                        ops.push(r.ops_to_eps.unwrap_or(0) as f64);
                        evals.push(r.grad_component_evals as f64);
                    }
                    None => unconverged += 1,
                }
            }
            ticks.sort_by(f64::total_cmp);
            ops.sort_by(f64::total_cmp);
            evals.sort_by(f64::total_cmp);
            if let Some(m) = median(&ticks) {
                median_ticks.insert(algo, m);
            }
            if let Some(m) = median(&ops) {
                median_ops.insert(algo, m);
            }
            if let Some(m) = median(&evals) {
                median_grad_evals.insert(algo, m);
            }
        }
        let reduction = |other: Algo| -> Option<f64> {
            let nag = median_ticks.get(&Algo::Nag)?;
            let other = median_ticks.get(&other)?;
            (*other > 0.0).then(|| 100.0 * (1.0 - nag / other))
        };
        summary.push(SummaryRow {
            p,
            reduction_vs_hb_pct: reduction(Algo::HeavyBall),
            reduction_vs_gd_pct: reduction(Algo::Gd),
            reference: reference_row(p),
            median_ticks,
            median_ops,
            median_grad_evals,
            unconverged,
        });
    }

    Ok(SweepResult {
        runs,
        summary,
        fig,
        eps_stop,
    })
}

fn opt_u64(v: Option<u64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn opt_f64(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

impl SweepResult {
    /// `runs.csv`: one row per (algo, p, seed).
    pub fn write_runs_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "algo,p,seed,ticks_to_eps,ops_to_eps,grad_component_evals,converged,final_max_dist,bounds_ok"
        )?;
        for r in &self.runs {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.algo.label(),
                r.p,
                r.seed,
                opt_u64(r.ticks_to_eps),
                opt_u64(r.ops_to_eps),
                r.grad_component_evals,
                r.converged,
                r.final_max_dist,
                r.bounds_ok.map_or(String::new(), |b| b.to_string()),
            )?;
        }
        Ok(())
    }

    /// `summary.csv`: per-p medians, reductions, and the published
    /// reference counts side by side.
    pub fn write_summary_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "p,nag_median_ticks,hb_median_ticks,gd_median_ticks,\
             nag_median_ops,hb_median_ops,gd_median_ops,\
             nag_median_grad_evals,hb_median_grad_evals,gd_median_grad_evals,\
             unconverged,reduction_vs_hb_pct,reduction_vs_gd_pct,\
             ref_nag,ref_hb,ref_gd,ref_reduction_hb_pct,ref_reduction_gd_pct"
        )?;
        for row in &self.summary {
            let get = |m: &BTreeMap<Algo, f64>, a: Algo| opt_f64(m.get(&a).copied());
            let (rn, rh, rg, rrh, rrg) = match row.reference {
                Some((a, b, c, d, e)) => (
                    a.to_string(),
                    b.to_string(),
                    c.to_string(),
                    d.to_string(),
                    e.to_string(),
                ),
                None => Default::default(),
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                row.p,
                get(&row.median_ticks, Algo::Nag),
                get(&row.median_ticks, Algo::HeavyBall),
                get(&row.median_ticks, Algo::Gd),
                get(&row.median_ops, Algo::Nag),
                get(&row.median_ops, Algo::HeavyBall),
                get(&row.median_ops, Algo::Gd),
                get(&row.median_grad_evals, Algo::Nag),
                get(&row.median_grad_evals, Algo::HeavyBall),
                get(&row.median_grad_evals, Algo::Gd),
                row.unconverged,
                opt_f64(row.reduction_vs_hb_pct),
                opt_f64(row.reduction_vs_gd_pct),
                rn,
                rh,
                rg,
                rrh,
                rrg,
            )?;
        }
        Ok(())
    }

    /// `fig_distance.csv`: per-tick worst-agent distance for the first seed
    /// of each selected probability (long format, one row per tick).
    pub fn write_fig_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "algo,p,seed,k,max_dist")?;
        for s in &self.fig {
            writeln!(
                w,
                "{},{},{},{},{}",
                s.algo.label(),
                s.p,
                s.seed,
                s.k,
                s.max_dist
            )?;
        }
        Ok(())
    }
}

/// Run one configured experiment (used by the run subcommand and tests).
pub fn single_run(
    config: &ExperimentConfig,
    p_override: Option<f64>,
    seed_override: Option<u64>,
    algo: Algo,
) -> Result<(SeparableProblem, ResolvedParams, LocalPair, crate::runtime::Trace)> {
    let problem = config.build_problem()?;
    let resolved = config.resolve_hyperparams(&problem)?;
    let zstar = reference_minimizer(&problem)?.pair();
    let schedule = config.build_schedule(p_override, seed_override)?;
    let init = config.build_init(&problem)?;
    let inits = vec![init; problem.n()];
    let stop = StopSpec {
        epsilon: Some(config.eps_stop()),
        zstar: zstar.clone(),
    };
    let trace = run_async(
        &problem,
        &resolved.for_algo(algo),
        &schedule,
        &inits,
        &stop,
        config.run.record_events.unwrap_or(false),
    )?;
    Ok((problem, resolved, zstar, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_sweep_config() -> ExperimentConfig {
        ExperimentConfig::from_toml(
            r#"
[schedule]
horizon = 20000

[sweep]
p_values = [0.5, 1.0]
seed_base = 0
seed_count = 3
fig_p = [1.0]
"#,
        )
        .unwrap()
    }

    #[test]
    fn sweep_runs_and_summarizes() {
        let config = small_sweep_config();
        let result = run_sweep(&config, Execution::Sequential).unwrap();
        assert_eq!(result.runs.len(), 3 * 2 * 3);
        assert!(result.runs.iter().all(|r| r.converged));
        assert_eq!(result.summary.len(), 2);
        let row1 = result.summary.iter().find(|r| r.p == 1.0).unwrap();
        assert_eq!(row1.reference, Some((5, 6, 12, 17, 58)));
        assert!(row1.median_ticks.contains_key(&Algo::Nag));
        // Reduction column follows 100 * (1 - nag/other).
        let nag = row1.median_ticks[&Algo::Nag];
        let gd = row1.median_ticks[&Algo::Gd];
        let expect = 100.0 * (1.0 - nag / gd);
        assert!((row1.reduction_vs_gd_pct.unwrap() - expect).abs() < 1e-12);
        // All bound checks hold in formula mode.
        assert!(result
            .runs
            .iter()
            .filter(|r| r.algo == Algo::Nag)
            .all(|r| r.bounds_ok == Some(true)));
        // Synchronous runs are seed-independent.
        let sync_ticks: Vec<_> = result
            .runs
            .iter()
            .filter(|r| r.algo == Algo::Gd && r.p == 1.0)
            .map(|r| r.ticks_to_eps)
            .collect();
        assert!(sync_ticks.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let config = small_sweep_config();
        let a = run_sweep(&config, Execution::Sequential).unwrap();
        let b = run_sweep(&config, Execution::Parallel).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        a.write_runs_csv(&mut csv_a).unwrap();
        b.write_runs_csv(&mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
        let mut sum_a = Vec::new();
        let mut sum_b = Vec::new();
        a.write_summary_csv(&mut sum_a).unwrap();
        b.write_summary_csv(&mut sum_b).unwrap();
        assert_eq!(sum_a, sum_b);
    }

    #[test]
    fn fig_export_covers_selected_p_only() {
        let config = small_sweep_config();
        let result = run_sweep(&config, Execution::Sequential).unwrap();
        assert!(!result.fig.is_empty());
        assert!(result.fig.iter().all(|s| s.p == 1.0 && s.seed == 0));
        let mut fig_csv = Vec::new();
        result.write_fig_csv(&mut fig_csv).unwrap();
        let text = String::from_utf8(fig_csv).unwrap();
        assert!(text.starts_with("algo,p,seed,k,max_dist\n"));
    }

    #[test]
    fn median_helper() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0]), Some(3.0));
        assert_eq!(median(&[1.0, 2.0]), Some(1.5));
        assert_eq!(median(&[1.0, 2.0, 10.0]), Some(2.0));
    }

    #[test]
    fn map_jobs_preserves_order() {
        let jobs: Vec<u64> = (0..100).collect();
        let seq = map_jobs(Execution::Sequential, jobs.clone(), |x| x * 2);
        let par = map_jobs(Execution::Parallel, jobs, |x| x * 2);
        assert_eq!(seq, par);
        assert_eq!(seq[7], 14);
    }
}
