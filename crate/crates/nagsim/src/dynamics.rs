//! Accelerated-gradient update laws on (current, previous) iterate pairs.
//!
//! The single-step law advances the pair `z = (x, y)` by one projected
//! momentum step,
//!
//! ```text
//! x⁺_i = Π_i[x_i - γ ∇_i f(x + λ(x - y)) + λ(x_i - y_i)],    y⁺ = x,
//! ```
//!
//! and the double-step law fuses two of those into one tick, which is the
//! unit the asynchronous runtime executes per computation event. A block
//! evaluation of the double step recomputes the first sub-step of its
//! essential neighbors from the same snapshot, so the assembled map equals
//! the single-step map applied twice, without any extra communication.
//!
//! Gradients are evaluated at the unprojected look-ahead point; only the
//! iterate itself is projected, so objectives must be defined on a
//! neighborhood of the box.

use crate::hyperparams::HyperParams;
use crate::problem::SeparableProblem;

/// An agent's local copy of the network pair: current iterate `x` and
/// previous iterate `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl LocalPair {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len(), "pair halves must have equal length");
        LocalPair { x, y }
    }

    /// Pair `(x, x)` — the form fixed points take.
    pub fn from_point(x: Vec<f64>) -> Self {
        let y = x.clone();
        LocalPair { x, y }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Every coordinate of both halves lies in its interval.
    pub fn is_feasible(&self, p: &SeparableProblem) -> bool {
        self.x
            .iter()
            .zip(self.y.iter())
            .zip(p.boxes())
            .all(|((&x, &y), b)| b.contains(x) && b.contains(y))
    }

    /// Uniformly random feasible pair, deterministic in the generator state.
    pub fn random_feasible(p: &SeparableProblem, rng: &mut crate::network::SplitMix64) -> Self {
        let draw = |rng: &mut crate::network::SplitMix64| {
            p.boxes()
                .iter()
                .map(|b| b.lo + rng.next_f64() * b.width())
                .collect::<Vec<f64>>()
        };
        LocalPair {
            x: draw(rng),
            y: draw(rng),
        }
    }
}

/// Pair ∞-distance: max over all `2n` coordinates of `|a - b|`.
pub fn pair_inf_distance(a: &LocalPair, b: &LocalPair) -> f64 {
    assert_eq!(a.n(), b.n(), "pair dimension mismatch");
    let dx = a
        .x
        .iter()
        .zip(&b.x)
        .map(|(&u, &v)| (u - v).abs())
        .fold(0.0f64, f64::max);
    let dy = a
        .y
        .iter()
        .zip(&b.y)
        .map(|(&u, &v)| (u - v).abs())
        .fold(0.0f64, f64::max);
    dx.max(dy)
}

/// One synchronous step: every block advanced from the same input pair.
pub fn single_step_sync(z: &LocalPair, hp: &HyperParams, p: &SeparableProblem) -> LocalPair {
    let n = p.n();
    assert_eq!(z.n(), n, "pair dimension mismatch");
    let lam = hp.lambda;
    let lookahead: Vec<f64> = (0..n)
        .map(|i| z.x[i] + lam * (z.x[i] - z.y[i]))
        .collect();
    let x_next: Vec<f64> = (0..n)
        .map(|i| {
            let g = p.grad_component(i, &lookahead);
            p.project_block(i, z.x[i] - hp.gamma * g + lam * (z.x[i] - z.y[i]))
        })
        .collect();
    LocalPair {
        x: x_next,
        y: z.x.clone(),
    }
}

/// Agent `i`'s double step from its snapshot: returns `(x_i⁺, y_i⁺)`.
///
/// `y_i⁺` is the first sub-step applied to block `i`; `x_i⁺` is the second
/// sub-step, whose look-ahead uses first-sub-step values for every essential
/// neighbor, recomputed locally from the same snapshot. Coordinates outside
/// `V^i ∪ {i}` are never read by `∇_i f`, so their staleness is irrelevant.
pub fn double_step_block(
    i: usize,
    z: &LocalPair,
    hp: &HyperParams,
    p: &SeparableProblem,
) -> (f64, f64) {
    let n = p.n();
    assert!(i < n, "agent index {i} out of range");
    assert_eq!(z.n(), n, "pair dimension mismatch");
    let lam = hp.lambda;
    let gam = hp.gamma;

    let lookahead1: Vec<f64> = (0..n)
        .map(|m| z.x[m] + lam * (z.x[m] - z.y[m]))
        .collect();

    // First sub-step for block i and its essential neighbors.
    let mut x_mid = z.x.clone();
    let sub_step = |m: usize, x_mid: &mut Vec<f64>| {
        let g = p.grad_component(m, &lookahead1);
        x_mid[m] = p.project_block(m, z.x[m] - gam * g + lam * (z.x[m] - z.y[m]));
    };
    sub_step(i, &mut x_mid);
    for &m in p.neighbors(i) {
        sub_step(m, &mut x_mid);
    }

    // Second sub-step for block i; the previous iterate is now the old x.
    let lookahead2: Vec<f64> = (0..n)
        .map(|m| x_mid[m] + lam * (x_mid[m] - z.x[m]))
        .collect();
    let g = p.grad_component(i, &lookahead2);
    let x_next = p.project_block(i, x_mid[i] - gam * g + lam * (x_mid[i] - z.x[i]));

    (x_next, x_mid[i])
}

/// The full double-step map: every block's double step from the same input.
pub fn synchronous_double_map(z: &LocalPair, hp: &HyperParams, p: &SeparableProblem) -> LocalPair {
    let n = p.n();
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    for i in 0..n {
        let (xi, yi) = double_step_block(i, z, hp, p);
        x[i] = xi;
        y[i] = yi;
    }
    LocalPair { x, y }
}

/// Overwrite exactly the sender's coordinates of a local pair with the
/// received block values; all other coordinates are untouched.
pub fn incorporate_message(z: &mut LocalPair, sender: usize, x_val: f64, y_val: f64) {
    assert!(sender < z.n(), "sender index out of range");
    z.x[sender] = x_val;
    z.y[sender] = y_val;
}
