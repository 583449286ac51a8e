//! Comparator block updates: heavy ball and projected gradient descent.
//!
//! Both are single-step laws driven through the identical asynchronous
//! harness. The defining difference from the accelerated method is that
//! their gradients are read at the current iterate, not at a momentum
//! look-ahead point. Gradient descent carries the `y` half only so all
//! three algorithms share one message format.

use crate::dynamics::LocalPair;
use crate::problem::SeparableProblem;

/// Step size and momentum for the comparators (momentum is unused by
/// gradient descent). Defaults match whatever step/momentum the accelerated
/// method runs with, which is the neutral choice when nothing else is pinned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineParams {
    pub gamma: f64,
    pub momentum: f64,
}

impl BaselineParams {
    /// `gamma ∈ (0, 1/h_max)` and `momentum ∈ [0, 1)`.
    pub fn feasible_for(&self, h_max: f64) -> bool {
        self.gamma > 0.0
            && self.gamma < 1.0 / h_max
            && self.momentum >= 0.0
            && self.momentum < 1.0
    }
}

/// Heavy-ball block step:
/// `x_i⁺ = Π_i[x_i - γ ∇_i f(x) + m (x_i - y_i)]`, `y_i⁺ = x_i`.
pub fn heavy_ball_block_step(
    i: usize,
    z: &LocalPair,
    bp: &BaselineParams,
    p: &SeparableProblem,
) -> (f64, f64) {
    let g = p.grad_component(i, &z.x);
    let x_next = p.project_block(i, z.x[i] - bp.gamma * g + bp.momentum * (z.x[i] - z.y[i]));
    (x_next, z.x[i])
}

/// Projected-gradient block step:
/// `x_i⁺ = Π_i[x_i - γ ∇_i f(x)]`, `y_i⁺ = x_i`.
pub fn gradient_descent_block_step(
    i: usize,
    z: &LocalPair,
    bp: &BaselineParams,
    p: &SeparableProblem,
) -> (f64, f64) {
    let g = p.grad_component(i, &z.x);
    let x_next = p.project_block(i, z.x[i] - bp.gamma * g);
    (x_next, z.x[i])
}
