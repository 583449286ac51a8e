//! Asynchronous event machinery: gate schedules, channels, and timestamps.
//!
//! Computation gates (one stream per agent) and reception gates (one stream
//! per directed edge) are driven by a stateless 64-bit mixing function keyed
//! by `(seed, stream, tick)`, so a schedule is fully determined by its
//! configuration and can be replayed bit-exactly from any tick.
//!
//! Gate stream ids:
//! - compute gate of agent `i`: `stream = i`
//! - receive gate of edge `j -> i`: `stream = 2^32 + (j << 16) + i`
//!
//! A tick `k` gate with probability `p` fires iff
//! `mix64(mix64(mix64(seed) + stream) + tick) < p · 2^64` (compared in u128).

use std::collections::BTreeMap;
use std::collections::VecDeque;

use crate::error::{Error, Result};

/// splitmix64 finalizer step: add the golden-gamma increment, then avalanche.
#[inline]
pub fn mix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless gate draw for `(seed, stream, tick)`.
#[inline]
pub fn gate_value(seed: u64, stream: u64, tick: u64) -> u64 {
    mix64(mix64(mix64(seed).wrapping_add(stream)).wrapping_add(tick))
}

/// `gate_value < p · 2^64`, with the product carried out in u128 so `p = 1`
/// fires on every tick.
#[inline]
pub fn gate_fires(seed: u64, stream: u64, tick: u64, p: f64) -> bool {
    let threshold = (p * 18_446_744_073_709_551_616.0) as u128;
    (gate_value(seed, stream, tick) as u128) < threshold
}

const EDGE_STREAM_BASE: u64 = 1 << 32;

#[inline]
fn compute_stream(agent: usize) -> u64 {
    agent as u64
}

#[inline]
fn receive_stream(from: usize, to: usize) -> u64 {
    debug_assert!(from < (1 << 16) && to < (1 << 16));
    EDGE_STREAM_BASE + ((from as u64) << 16) + to as u64
}

/// Stand-alone sequence of 64-bit draws, used where tests and generators
/// need a seeded stream rather than keyed gates.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }
}

/// Gate source for one run.
#[derive(Debug, Clone)]
pub enum GateMode {
    /// Independent Bernoulli(p) draws per stream per tick. With `tied` set,
    /// one draw per agent per tick gates both its computation and every
    /// inbound reception (the single-draw reading of the benchmark setup).
    Bernoulli { p: f64, seed: u64, tied: bool },
    /// Explicit, strictly increasing event-tick lists.
    Explicit {
        computes: Vec<Vec<u64>>,
        receives: BTreeMap<(usize, usize), Vec<u64>>,
    },
}

/// Event schedule over a finite horizon.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub mode: GateMode,
    pub horizon: u64,
}

impl Schedule {
    /// Bernoulli schedule with independent per-agent and per-edge gates.
    ///
    /// `p = 0` is rejected: a permanently silent agent would stall the run
    /// forever, so it is treated as a configuration error rather than a run.
    pub fn bernoulli(p: f64, seed: u64, horizon: u64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidSchedule(format!(
                "gate probability must lie in (0, 1], got {p}"
            )));
        }
        Ok(Schedule {
            mode: GateMode::Bernoulli {
                p,
                seed,
                tied: false,
            },
            horizon,
        })
    }

    /// Bernoulli schedule with one draw per agent per tick gating both its
    /// computation and all of its inbound receptions.
    pub fn bernoulli_tied(p: f64, seed: u64, horizon: u64) -> Result<Self> {
        let mut s = Schedule::bernoulli(p, seed, horizon)?;
        if let GateMode::Bernoulli { tied, .. } = &mut s.mode {
            *tied = true;
        }
        Ok(s)
    }

    /// Explicit event lists; every list must be strictly increasing.
    pub fn explicit(
        computes: Vec<Vec<u64>>,
        receives: BTreeMap<(usize, usize), Vec<u64>>,
        horizon: u64,
    ) -> Result<Self> {
        let check = |ticks: &[u64], what: &str| -> Result<()> {
            if ticks.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidSchedule(format!(
                    "{what} event list is not strictly increasing"
                )));
            }
            Ok(())
        };
        for (i, ticks) in computes.iter().enumerate() {
            check(ticks, &format!("agent {i} compute"))?;
        }
        for ((j, i), ticks) in &receives {
            check(ticks, &format!("edge {j}->{i} receive"))?;
        }
        Ok(Schedule {
            mode: GateMode::Explicit { computes, receives },
            horizon,
        })
    }

    /// Does agent `i` compute at tick `k`?
    pub fn compute_gate(&self, agent: usize, tick: u64) -> bool {
        match &self.mode {
            GateMode::Bernoulli { p, seed, .. } => {
                gate_fires(*seed, compute_stream(agent), tick, *p)
            }
            GateMode::Explicit { computes, .. } => computes
                .get(agent)
                .is_some_and(|ticks| ticks.binary_search(&tick).is_ok()),
        }
    }

    /// Does the edge `from -> to` deliver at tick `k` (gate only; delivery
    /// additionally needs a queued message)?
    pub fn receive_gate(&self, from: usize, to: usize, tick: u64) -> bool {
        match &self.mode {
            GateMode::Bernoulli { p, seed, tied } => {
                if *tied {
                    // Reception rides the receiver's per-tick draw.
                    gate_fires(*seed, compute_stream(to), tick, *p)
                } else {
                    gate_fires(*seed, receive_stream(from, to), tick, *p)
                }
            }
            GateMode::Explicit { receives, .. } => receives
                .get(&(from, to))
                .is_some_and(|ticks| ticks.binary_search(&tick).is_ok()),
        }
    }

    /// Synchronous schedules (p = 1) deliver messages within the sending
    /// tick, which makes the run coincide with the synchronous double-step
    /// iteration; all other schedules deliver from the next tick onward.
    pub fn same_tick_delivery(&self) -> bool {
        matches!(self.mode, GateMode::Bernoulli { p, .. } if p == 1.0)
    }

    /// Finite-horizon liveness proxy: every compute gate and every listed
    /// edge gate must fire at least once over the horizon, otherwise some
    /// agent has effectively stopped forever and no convergence claim holds.
    pub fn verify_liveness(&self, n: usize, edges: &[(usize, usize)]) -> Result<()> {
        for agent in 0..n {
            if !(0..self.horizon).any(|k| self.compute_gate(agent, k)) {
                return Err(Error::InvalidSchedule(format!(
                    "agent {agent} never computes within horizon {}",
                    self.horizon
                )));
            }
        }
        for &(from, to) in edges {
            if !(0..self.horizon).any(|k| self.receive_gate(from, to, k)) {
                return Err(Error::InvalidSchedule(format!(
                    "edge {from}->{to} never receives within horizon {}",
                    self.horizon
                )));
            }
        }
        Ok(())
    }
}

/// One block's values in flight on a directed edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub sender: usize,
    pub x_val: f64,
    pub y_val: f64,
    /// Tick at which the sender computed these values.
    pub tau: u64,
}

/// Directed channel `source -> dest` with latest-wins delivery.
///
/// Delivery drains the whole queue and hands over only the newest message,
/// and only if it is strictly newer than everything delivered before; older
/// values would otherwise overwrite fresher state and break the per-edge
/// monotonicity of origin timestamps.
#[derive(Debug, Clone)]
pub struct Channel {
    pub source: usize,
    pub dest: usize,
    queue: VecDeque<Message>,
    last_delivered_tau: Option<u64>,
}

impl Channel {
    pub fn new(source: usize, dest: usize) -> Self {
        Channel {
            source,
            dest,
            queue: VecDeque::new(),
            last_delivered_tau: None,
        }
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    /// Enqueue keeping the queue ordered by `tau`; a message recomputed at
    /// an already-queued tick collapses into the existing entry.
    pub fn send(&mut self, msg: Message) {
        assert_eq!(msg.sender, self.source, "message sender != channel source");
        match self.queue.binary_search_by_key(&msg.tau, |m| m.tau) {
            Ok(pos) => self.queue[pos] = msg,
            Err(pos) => self.queue.insert(pos, msg),
        }
    }

    /// If `gate` fires and the queue is nonempty, drain the queue and return
    /// the newest message iff its `tau` beats everything delivered so far.
    pub fn deliver_due(&mut self, tick: u64, gate: bool) -> Option<Message> {
        if !gate || self.queue.is_empty() {
            return None;
        }
        let newest = *self.queue.back().expect("nonempty queue");
        self.queue.clear();
        debug_assert!(newest.tau <= tick, "message from the future");
        if self.last_delivered_tau.is_none_or(|t| newest.tau > t) {
            self.last_delivered_tau = Some(newest.tau);
            Some(newest)
        } else {
            None
        }
    }

    /// Origin timestamp of the receiver's current copy of the sender's
    /// block: the computation tick of the last delivered message, or the
    /// initial-condition sentinel 0 before any delivery.
    pub fn origin_time(&self) -> u64 {
        self.last_delivered_tau.unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_one_fires_every_tick() {
        let s = Schedule::bernoulli(1.0, 99, 64).unwrap();
        for k in 0..64 {
            assert!(s.compute_gate(0, k));
            assert!(s.receive_gate(0, 1, k));
        }
    }

    #[test]
    fn p_zero_rejected() {
        assert!(Schedule::bernoulli(0.0, 1, 10).is_err());
        assert!(Schedule::bernoulli(-0.5, 1, 10).is_err());
        assert!(Schedule::bernoulli(1.5, 1, 10).is_err());
    }

    #[test]
    fn golden_gate_sequence() {
        // Frozen once from the documented mixing construction:
        // fires(k) = mix64(mix64(mix64(seed) + stream) + k) < p * 2^64.
        let s = Schedule::bernoulli(0.5, 7, 8).unwrap();
        let agent0: Vec<bool> = (0..8).map(|k| s.compute_gate(0, k)).collect();
        assert_eq!(
            agent0,
            [false, true, true, true, true, false, false, true]
        );
        let agent1: Vec<bool> = (0..8).map(|k| s.compute_gate(1, k)).collect();
        assert_eq!(
            agent1,
            [false, false, true, false, true, true, true, false]
        );
    }

    #[test]
    fn schedules_are_reproducible() {
        let a = Schedule::bernoulli(0.3, 1234, 1000).unwrap();
        let b = Schedule::bernoulli(0.3, 1234, 1000).unwrap();
        for k in 0..1000 {
            assert_eq!(a.compute_gate(3, k), b.compute_gate(3, k));
            assert_eq!(a.receive_gate(2, 5, k), b.receive_gate(2, 5, k));
        }
    }

    #[test]
    fn bernoulli_frequency_is_sane() {
        let s = Schedule::bernoulli(0.3, 5, 20_000).unwrap();
        let fired = (0..20_000).filter(|&k| s.compute_gate(1, k)).count();
        let rate = fired as f64 / 20_000.0;
        assert!((rate - 0.3).abs() < 0.02, "empirical rate {rate}");
    }

    #[test]
    fn tied_gates_share_the_receiver_draw() {
        let s = Schedule::bernoulli_tied(0.4, 17, 500).unwrap();
        for k in 0..500 {
            assert_eq!(s.receive_gate(0, 3, k), s.compute_gate(3, k));
            assert_eq!(s.receive_gate(9, 3, k), s.compute_gate(3, k));
        }
    }

    #[test]
    fn explicit_lists_must_increase() {
        assert!(Schedule::explicit(vec![vec![1, 2, 2]], BTreeMap::new(), 10).is_err());
        let s = Schedule::explicit(vec![vec![1, 4, 9]], BTreeMap::new(), 10).unwrap();
        assert!(s.compute_gate(0, 4));
        assert!(!s.compute_gate(0, 5));
        assert!(!s.receive_gate(0, 1, 4));
    }

    #[test]
    fn liveness_proxy() {
        let s = Schedule::explicit(
            vec![vec![0], vec![]],
            BTreeMap::from([((0, 1), vec![1])]),
            4,
        )
        .unwrap();
        assert!(s.verify_liveness(2, &[(0, 1)]).is_err());
        let s = Schedule::explicit(
            vec![vec![0], vec![2]],
            BTreeMap::from([((0, 1), vec![1]), ((1, 0), vec![3])]),
            4,
        )
        .unwrap();
        assert!(s.verify_liveness(2, &[(0, 1), (1, 0)]).is_ok());
    }

    fn msg(tau: u64) -> Message {
        Message {
            sender: 0,
            x_val: tau as f64,
            y_val: -(tau as f64),
            tau,
        }
    }

    #[test]
    fn send_keeps_tau_order() {
        let mut ch = Channel::new(0, 1);
        ch.send(msg(5));
        ch.send(msg(3));
        assert_eq!(ch.queue_len(), 2);
        let delivered = ch.deliver_due(6, true).unwrap();
        assert_eq!(delivered.tau, 5);
        assert_eq!(ch.queue_len(), 0);
    }

    #[test]
    fn duplicate_tau_collapses() {
        let mut ch = Channel::new(0, 1);
        ch.send(msg(4));
        ch.send(msg(4));
        assert_eq!(ch.queue_len(), 1);
    }

    #[test]
    fn closed_gate_leaves_queue() {
        let mut ch = Channel::new(0, 1);
        ch.send(msg(4));
        assert!(ch.deliver_due(5, false).is_none());
        assert_eq!(ch.queue_len(), 1);
    }

    #[test]
    fn stale_message_discarded() {
        let mut ch = Channel::new(0, 1);
        ch.send(msg(5));
        assert_eq!(ch.deliver_due(5, true).unwrap().tau, 5);
        ch.send(msg(2));
        assert!(ch.deliver_due(7, true).is_none());
        assert_eq!(ch.queue_len(), 0, "stale queue must be drained");
        assert_eq!(ch.origin_time(), 5);
    }

    #[test]
    fn origin_time_starts_at_sentinel_and_grows() {
        let mut ch = Channel::new(0, 1);
        assert_eq!(ch.origin_time(), 0);
        ch.send(msg(4));
        ch.deliver_due(4, true);
        assert_eq!(ch.origin_time(), 4);
        ch.send(msg(9));
        ch.deliver_due(9, true);
        assert_eq!(ch.origin_time(), 9);
    }

    #[test]
    fn tau_zero_message_deliverable_initially() {
        let mut ch = Channel::new(0, 1);
        ch.send(msg(0));
        assert!(ch.deliver_due(0, true).is_some());
    }
}
