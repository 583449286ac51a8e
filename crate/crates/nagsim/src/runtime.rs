//! Tick-by-tick execution of the asynchronous algorithm, with the operation
//! cycle counter and the convergence-bound checks along the trace.
//!
//! Each tick runs in two phases, in agent order for determinism:
//!
//! 1. Compute: every agent whose gate fires applies its block update to its
//!    own coordinates, reading its current local snapshot, then enqueues the
//!    fresh block to every essential neighbor with the tick as origin
//!    timestamp.
//! 2. Receive: every inbound edge whose gate fires delivers the newest
//!    queued message; delivered values never affect computations in the
//!    same tick.
//!
//! Messages sent at tick `k` become deliverable at tick `k+1`, except under
//! a synchronous schedule (p = 1), where delivery completes within the tick
//! so the run coincides with the synchronous double-step iteration.
//!
//! Trace row `k` is the state after `k` complete ticks; row 0 is the
//! initial condition with `ops(0) = 0`.

use std::io::Write;

use serde::Serialize;

use crate::baselines::{gradient_descent_block_step, heavy_ball_block_step, BaselineParams};
use crate::dynamics::{double_step_block, incorporate_message, pair_inf_distance, LocalPair};
use crate::error::{Error, Result};
use crate::hyperparams::{ops_lower_bound, ContractionCert, HyperParams};
use crate::network::{Channel, Message, Schedule};
use crate::problem::SeparableProblem;

/// Which block update the agents run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algo {
    Nag,
    HeavyBall,
    Gd,
}

impl Algo {
    pub fn label(&self) -> &'static str {
        match self {
            Algo::Nag => "nag",
            Algo::HeavyBall => "hb",
            Algo::Gd => "gd",
        }
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nag" => Ok(Algo::Nag),
            "hb" | "heavy_ball" | "heavyball" => Ok(Algo::HeavyBall),
            "gd" | "gradient_descent" => Ok(Algo::Gd),
            other => Err(Error::InvalidConfig(format!(
                "unknown algorithm {other:?} (expected nag, hb, or gd)"
            ))),
        }
    }
}

/// Algorithm plus its parameters for one run.
#[derive(Debug, Clone, Copy)]
pub enum AlgoParams {
    /// The accelerated double-step law. `allow_infeasible` lets runs proceed
    /// with parameters outside the admissible region (the printed-parameter
    /// mode needs this); such runs carry no contraction guarantee and bound
    /// verification is disabled for them.
    Nag {
        hp: HyperParams,
        allow_infeasible: bool,
    },
    HeavyBall(BaselineParams),
    Gd(BaselineParams),
}

impl AlgoParams {
    pub fn algo(&self) -> Algo {
        match self {
            AlgoParams::Nag { .. } => Algo::Nag,
            AlgoParams::HeavyBall(_) => Algo::HeavyBall,
            AlgoParams::Gd(_) => Algo::Gd,
        }
    }
}

/// Agent-local runtime state: the full local pair plus the origin timestamp
/// of the copy currently held for each sender.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub pair: LocalPair,
    pub origin: Vec<u64>,
}

/// Events of a single tick, in execution order.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TickEvents {
    pub tick: u64,
    /// Agents that computed.
    pub computes: Vec<usize>,
    /// `(from, to, tau)` for each enqueued message.
    pub sends: Vec<(usize, usize, u64)>,
    /// `(from, to, tau)` for each delivered-and-incorporated message.
    pub deliveries: Vec<(usize, usize, u64)>,
}

impl TickEvents {
    pub fn new(tick: u64) -> Self {
        TickEvents {
            tick,
            ..Default::default()
        }
    }
}

/// Completed-cycle counter. A cycle closes at the end of the first tick by
/// which every agent has computed, sent the freshly computed block to every
/// essential neighbor, and every essential neighbor has received and
/// incorporated such a value — all counted only for values computed after
/// the cycle started. Values computed in an earlier cycle but delivered
/// late do not count.
#[derive(Debug, Clone)]
pub struct OpsCounter {
    pub count: u64,
    cycle_start: u64,
    computed: Vec<bool>,
    sent: Vec<bool>,
    received: Vec<bool>,
    edge_index: Vec<usize>,
    n: usize,
}

impl OpsCounter {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut edge_index = vec![usize::MAX; n * n];
        for (e, &(from, to)) in edges.iter().enumerate() {
            edge_index[from * n + to] = e;
        }
        OpsCounter {
            count: 0,
            cycle_start: 0,
            computed: vec![false; n],
            sent: vec![false; edges.len()],
            received: vec![false; edges.len()],
            edge_index,
            n,
        }
    }

    fn edge(&self, from: usize, to: usize) -> usize {
        let e = self.edge_index[from * self.n + to];
        assert_ne!(e, usize::MAX, "({from}, {to}) is not an essential edge");
        e
    }

    pub fn cycle_start(&self) -> u64 {
        self.cycle_start
    }
}

/// Fold one tick's events into the counter; closes at most one cycle.
pub fn update_ops_counter(c: &mut OpsCounter, events: &TickEvents) {
    for &i in &events.computes {
        c.computed[i] = true;
    }
    for &(from, to, tau) in &events.sends {
        if tau >= c.cycle_start {
            let e = c.edge(from, to);
            c.sent[e] = true;
        }
    }
    for &(from, to, tau) in &events.deliveries {
        if tau >= c.cycle_start {
            let e = c.edge(from, to);
            c.received[e] = true;
        }
    }
    let complete = c.computed.iter().all(|&b| b)
        && c.sent.iter().all(|&b| b)
        && c.received.iter().all(|&b| b);
    if complete {
        c.count += 1;
        c.computed.iter_mut().for_each(|b| *b = false);
        c.sent.iter_mut().for_each(|b| *b = false);
        c.received.iter_mut().for_each(|b| *b = false);
        c.cycle_start = events.tick + 1;
    }
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopCause {
    Horizon,
    Converged,
}

/// Stopping rule: run to the schedule horizon or until every agent's local
/// pair is within `epsilon` of the reference point.
#[derive(Debug, Clone)]
pub struct StopSpec {
    pub epsilon: Option<f64>,
    pub zstar: LocalPair,
}

/// One recorded tick: state after `k` complete ticks.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub k: u64,
    pub ops: u64,
    pub max_dist: f64,
    pub agent_dists: Vec<f64>,
    pub true_x: Vec<f64>,
    pub true_y: Vec<f64>,
}

/// Full record of one run.
#[derive(Debug, Clone)]
pub struct Trace {
    pub algo: Algo,
    pub n: usize,
    pub rows: Vec<TraceRow>,
    pub stop_cause: StopCause,
    /// Synchronous schedule (p = 1, same-tick delivery).
    pub synchronous: bool,
    /// Gradient-component evaluations performed across the run.
    pub grad_component_evals: u64,
    /// Deliveries per directed essential edge, aligned with `edges`.
    pub delivery_counts: Vec<u64>,
    pub edges: Vec<(usize, usize)>,
    /// Per-tick event log; populated only when requested.
    pub events: Option<Vec<TickEvents>>,
}

impl Trace {
    /// Final tick index.
    pub fn last_k(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.k)
    }

    pub fn final_max_dist(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.max_dist)
    }

    /// First tick at which the maximal agent distance dropped to `eps`.
    pub fn first_tick_within(&self, eps: f64) -> Option<u64> {
        self.rows.iter().find(|r| r.max_dist <= eps).map(|r| r.k)
    }

    /// ops(k) at the first tick within `eps`.
    pub fn ops_at_first_within(&self, eps: f64) -> Option<u64> {
        self.rows.iter().find(|r| r.max_dist <= eps).map(|r| r.ops)
    }

    /// CSV export: `k,ops,max_dist,dist_0,...,dist_{n-1}` per row.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        write!(w, "k,ops,max_dist")?;
        for i in 0..self.n {
            write!(w, ",dist_{i}")?;
        }
        writeln!(w)?;
        for row in &self.rows {
            write!(w, "{},{},{}", row.k, row.ops, row.max_dist)?;
            for d in &row.agent_dists {
                write!(w, ",{d}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Event log export, one JSON object per tick.
    pub fn write_events_jsonl<W: Write>(&self, w: &mut W) -> Result<()> {
        if let Some(events) = &self.events {
            for ev in events {
                let line = serde_json::to_string(ev)
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?;
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }
}

/// Assemble the network-level pair from each agent's own-block entries.
pub fn true_state(states: &[AgentState]) -> LocalPair {
    let n = states.len();
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    for (i, s) in states.iter().enumerate() {
        x[i] = s.pair.x[i];
        y[i] = s.pair.y[i];
    }
    LocalPair { x, y }
}

fn block_step(
    params: &AlgoParams,
    i: usize,
    z: &LocalPair,
    p: &SeparableProblem,
) -> ((f64, f64), u64) {
    match params {
        AlgoParams::Nag { hp, .. } => {
            let out = double_step_block(i, z, hp, p);
            (out, p.neighbors(i).len() as u64 + 2)
        }
        AlgoParams::HeavyBall(bp) => (heavy_ball_block_step(i, z, bp, p), 1),
        AlgoParams::Gd(bp) => (gradient_descent_block_step(i, z, bp, p), 1),
    }
}

/// Execute the asynchronous algorithm and record the trace.
pub fn run_async(
    p: &SeparableProblem,
    params: &AlgoParams,
    schedule: &Schedule,
    init: &[LocalPair],
    stop: &StopSpec,
    record_events: bool,
) -> Result<Trace> {
    let n = p.n();
    if init.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: init.len(),
        });
    }
    for (i, z) in init.iter().enumerate() {
        if z.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: z.n(),
            });
        }
        if !z.is_feasible(p) {
            return Err(Error::InvalidConfig(format!(
                "initial state of agent {i} leaves the box"
            )));
        }
    }
    if stop.zstar.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: stop.zstar.n(),
        });
    }
    if let AlgoParams::Nag {
        hp,
        allow_infeasible,
    } = params
    {
        if !hp.strictly_feasible() && !allow_infeasible {
            return Err(Error::InfeasibleParams(format!(
                "gamma = {}, lambda = {} violate the admissible region for mu = {}, h_max = {}",
                hp.gamma, hp.lambda, hp.mu, hp.h_max
            )));
        }
    }

    let edges = p.directed_edges();
    schedule.verify_liveness(n, &edges)?;
    let same_tick = schedule.same_tick_delivery();

    let mut states: Vec<AgentState> = init
        .iter()
        .map(|z| AgentState {
            pair: z.clone(),
            origin: vec![0; n],
        })
        .collect();
    let mut channels: Vec<Channel> = edges.iter().map(|&(f, t)| Channel::new(f, t)).collect();
    let mut staged: Vec<Vec<Message>> = vec![Vec::new(); edges.len()];
    let outbound: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            edges
                .iter()
                .enumerate()
                .filter(|(_, &(f, _))| f == i)
                .map(|(e, _)| e)
                .collect()
        })
        .collect();
    let inbound: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            edges
                .iter()
                .enumerate()
                .filter(|(_, &(_, t))| t == i)
                .map(|(e, _)| e)
                .collect()
        })
        .collect();

    let mut counter = OpsCounter::new(n, &edges);
    let mut delivery_counts = vec![0u64; edges.len()];
    let mut grad_evals = 0u64;
    let mut event_log: Option<Vec<TickEvents>> = record_events.then(Vec::new);

    let record_row = |k: u64, ops: u64, states: &[AgentState]| -> TraceRow {
        let dists: Vec<f64> = states
            .iter()
            .map(|s| pair_inf_distance(&s.pair, &stop.zstar))
            .collect();
        let max_dist = dists.iter().copied().fold(0.0f64, f64::max);
        let ts = true_state(states);
        TraceRow {
            k,
            ops,
            max_dist,
            agent_dists: dists,
            true_x: ts.x,
            true_y: ts.y,
        }
    };

    let mut rows = vec![record_row(0, 0, &states)];
    let mut stop_cause = StopCause::Horizon;
    if stop.epsilon.is_some_and(|eps| rows[0].max_dist <= eps) {
        stop_cause = StopCause::Converged;
    } else {
        for tick in 0..schedule.horizon {
            let mut events = TickEvents::new(tick);

            for i in 0..n {
                if schedule.compute_gate(i, tick) {
                    let ((xi, yi), cost) = block_step(params, i, &states[i].pair, p);
                    states[i].pair.x[i] = xi;
                    states[i].pair.y[i] = yi;
                    grad_evals += cost;
                    events.computes.push(i);
                    let msg = Message {
                        sender: i,
                        x_val: xi,
                        y_val: yi,
                        tau: tick,
                    };
                    for &e in &outbound[i] {
                        if same_tick {
                            channels[e].send(msg);
                        } else {
                            staged[e].push(msg);
                        }
                        events.sends.push((i, edges[e].1, tick));
                    }
                }
            }

            for i in 0..n {
                for &e in &inbound[i] {
                    let (from, _) = edges[e];
                    let gate = schedule.receive_gate(from, i, tick);
                    if let Some(msg) = channels[e].deliver_due(tick, gate) {
                        incorporate_message(&mut states[i].pair, msg.sender, msg.x_val, msg.y_val);
                        states[i].origin[msg.sender] = msg.tau;
                        delivery_counts[e] += 1;
                        events.deliveries.push((msg.sender, i, msg.tau));
                    }
                }
            }

            for (e, pending) in staged.iter_mut().enumerate() {
                for msg in pending.drain(..) {
                    channels[e].send(msg);
                }
            }

            debug_assert!(
                states.iter().all(|s| s.pair.is_feasible(p)),
                "iterate left the box at tick {tick}"
            );

            update_ops_counter(&mut counter, &events);
            if let Some(log) = &mut event_log {
                log.push(events);
            }

            let row = record_row(tick + 1, counter.count, &states);
            let done = stop.epsilon.is_some_and(|eps| row.max_dist <= eps);
            rows.push(row);
            if done {
                stop_cause = StopCause::Converged;
                break;
            }
        }
    }

    Ok(Trace {
        algo: params.algo(),
        n,
        rows,
        stop_cause,
        synchronous: same_tick,
        grad_component_evals: grad_evals,
        delivery_counts,
        edges,
        events: event_log,
    })
}

/// Outcome of one bound check over a trace.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub pass: bool,
    pub violations: u64,
    /// Largest excess over the bound (negative means margin everywhere).
    pub worst_excess: f64,
    pub first_violation: Option<u64>,
}

/// Outcome of the cycle-budget check.
#[derive(Debug, Clone)]
pub struct BudgetOutcome {
    pub beta: f64,
    pub required_cycles: u64,
    /// First tick whose ops count met the budget, with its distance.
    pub attained: Option<(u64, f64)>,
    pub pass: bool,
    /// The trace reached the target accuracy with fewer completed cycles
    /// than the budget. Recorded as an observation, never asserted: the
    /// budget is a sufficiency bound along the proved inequality chain.
    pub reached_before_budget: bool,
}

/// Bound-verification report for one trace.
#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub alpha: f64,
    pub initial_max_dist: f64,
    /// Per-tick decay bound `max_dist(k) <= alpha^ops(k) * max_dist(0)`.
    pub decay: CheckOutcome,
    /// Per-agent membership levels never decrease. Meaningful for runs whose
    /// agents start at a common level (the canonical corner init): a
    /// coincidentally deep initial copy of a neighbor's block may be
    /// replaced by that neighbor's first certified value, which regresses
    /// the index without violating the decay bound.
    pub invariance: CheckOutcome,
    /// Consecutive-row contraction for synchronous traces.
    pub sync_ratio: Option<CheckOutcome>,
    pub budget: BudgetOutcome,
    /// Essential edges that never delivered during the run (informational;
    /// expected to be empty for horizon-limited runs).
    pub undelivered_edges: Vec<(usize, usize)>,
}

impl BoundsReport {
    pub fn all_pass(&self) -> bool {
        self.decay.pass
            && self.invariance.pass
            && self.sync_ratio.as_ref().is_none_or(|c| c.pass)
            && self.budget.pass
    }
}

const DECAY_SLACK: f64 = 1e-9;
const LEVEL_CAP: u64 = 8192;

/// Largest `m <= cap` with `alpha^m * d0 + slack >= dist`; `cap` when the
/// distance is indistinguishable from zero.
fn membership_level(dist: f64, d0: f64, alpha: f64, slack: f64, cap: u64) -> u64 {
    if dist <= slack {
        return cap;
    }
    if d0 <= 0.0 || alpha <= 0.0 {
        return 0;
    }
    let est = ((dist - slack) / d0).ln() / alpha.ln();
    let mut m = if est.is_finite() && est > 0.0 {
        (est.floor() as u64).min(cap)
    } else {
        0
    };
    while m > 0 && alpha.powi(m as i32) * d0 + slack < dist {
        m -= 1;
    }
    while m < cap && alpha.powi((m + 1) as i32) * d0 + slack >= dist {
        m += 1;
    }
    m
}

/// Check the contraction bounds along a trace.
///
/// The trace must come from the accelerated law with strictly admissible
/// parameters (`cert.alpha < 1`); violations are reported, not thrown.
pub fn verify_bounds(trace: &Trace, cert: &ContractionCert) -> BoundsReport {
    let alpha = cert.alpha;
    let d0 = trace.rows.first().map_or(0.0, |r| r.max_dist);

    // (a) per-tick decay bound.
    let mut decay = CheckOutcome {
        pass: true,
        violations: 0,
        worst_excess: f64::NEG_INFINITY,
        first_violation: None,
    };
    for row in &trace.rows {
        let bound = alpha.powi(row.ops.min(i32::MAX as u64) as i32) * d0;
        let excess = row.max_dist - (bound + DECAY_SLACK);
        decay.worst_excess = decay.worst_excess.max(excess);
        if excess > 0.0 {
            decay.violations += 1;
            decay.pass = false;
            decay.first_violation.get_or_insert(row.k);
        }
    }

    // (b) per-agent membership levels never decrease.
    let mut invariance = CheckOutcome {
        pass: true,
        violations: 0,
        worst_excess: f64::NEG_INFINITY,
        first_violation: None,
    };
    let mut levels = vec![0u64; trace.n];
    for (ri, row) in trace.rows.iter().enumerate() {
        for (i, &d) in row.agent_dists.iter().enumerate() {
            let level = membership_level(d, d0, alpha, DECAY_SLACK, LEVEL_CAP);
            if ri == 0 {
                levels[i] = level;
            } else if level < levels[i] {
                invariance.violations += 1;
                invariance.pass = false;
                invariance.first_violation.get_or_insert(row.k);
                invariance.worst_excess = invariance
                    .worst_excess
                    .max((levels[i] - level) as f64);
                levels[i] = level;
            } else {
                levels[i] = level;
            }
        }
    }

    // (c) consecutive-row contraction on synchronous traces.
    let sync_ratio = trace.synchronous.then(|| {
        let mut out = CheckOutcome {
            pass: true,
            violations: 0,
            worst_excess: f64::NEG_INFINITY,
            first_violation: None,
        };
        for w in trace.rows.windows(2) {
            let bound = (alpha + 1e-10) * w[0].max_dist;
            let excess = w[1].max_dist - bound;
            out.worst_excess = out.worst_excess.max(excess);
            if excess > 0.0 {
                out.violations += 1;
                out.pass = false;
                out.first_violation.get_or_insert(w[1].k);
            }
        }
        out
    });

    // (d) budget sufficiency with the actual initial spread.
    let budget = match ops_lower_bound(cert.epsilon, d0.max(f64::MIN_POSITIVE), alpha) {
        Ok(b) => {
            let attained = trace
                .rows
                .iter()
                .find(|r| r.ops >= b.cycles)
                .map(|r| (r.k, r.max_dist));
            let pass = match attained {
                Some((_, d)) => d <= cert.epsilon + DECAY_SLACK,
                // The run ended before the budget was spent; sufficiency is
                // intact only if it ended inside the target ball.
                None => trace.final_max_dist() <= cert.epsilon + DECAY_SLACK,
            };
            let reached_before_budget = trace
                .ops_at_first_within(cert.epsilon)
                .is_some_and(|ops| ops < b.cycles);
            BudgetOutcome {
                beta: b.beta,
                required_cycles: b.cycles,
                attained,
                pass,
                reached_before_budget,
            }
        }
        Err(_) => BudgetOutcome {
            beta: f64::NAN,
            required_cycles: 0,
            attained: None,
            pass: false,
            reached_before_budget: false,
        },
    };

    let undelivered_edges = trace
        .edges
        .iter()
        .zip(&trace.delivery_counts)
        .filter(|(_, &c)| c == 0)
        .map(|(&e, _)| e)
        .collect();

    BoundsReport {
        alpha,
        initial_max_dist: d0,
        decay,
        invariance,
        sync_ratio,
        budget,
        undelivered_edges,
    }
}
