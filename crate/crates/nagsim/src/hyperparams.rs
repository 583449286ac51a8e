//! Admissible step sizes, contraction factors, and operation budgets.
//!
//! For a μ-dominant problem with Hessian diagonal bound `h_max`, the
//! admissible region is `γ ∈ (0, 1/h_max)` and `λ ∈ (0, γμ/(2(1-γμ)))`,
//! both open. Inside it the two-step update contracts the ∞-norm distance
//! to the minimizer by
//!
//! ```text
//! α₁ = (1 + λ - γμ(1+λ))² + λ(1-γμ) + λ(1-γμ)(1 + λ - γμ(1+λ))
//! α₂ = 1 - γμ + 2λ(1-γμ)
//! α  = max{α₁, α₂} < 1
//! ```
//!
//! and reaching an ∞-ball of radius ε from an initial spread of at most
//! `D₀` requires `β = log(ε/D₀)/log(α)` completed operation cycles.

use crate::error::{Error, Result};
use crate::problem::DominanceCert;

/// Step size, momentum, and the certificate values they were chosen against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub gamma: f64,
    pub lambda: f64,
    pub mu: f64,
    pub h_max: f64,
}

impl HyperParams {
    /// Upper end of the admissible momentum interval for this `(γ, μ)`.
    pub fn lambda_bound(&self) -> f64 {
        let gm = self.gamma * self.mu;
        gm / (2.0 * (1.0 - gm))
    }

    /// Both open-interval conditions hold strictly.
    pub fn strictly_feasible(&self) -> bool {
        let gm = self.gamma * self.mu;
        self.gamma > 0.0
            && self.gamma < 1.0 / self.h_max
            && gm < 1.0
            && self.lambda > 0.0
            && self.lambda < self.lambda_bound()
    }
}

/// Contraction factors of the two-step update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionFactors {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha: f64,
}

impl ContractionFactors {
    pub fn is_contractive(&self) -> bool {
        self.alpha < 1.0
    }
}

/// Cycle budget for a target accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpsBudget {
    /// `max(0, log(ε/D₀)/log(α))`.
    pub beta: f64,
    /// `⌈β⌉` as an integer cycle count.
    pub cycles: u64,
}

impl OpsBudget {
    /// Communications an agent with `degree` essential neighbors must have
    /// performed: one send per neighbor per cycle.
    pub fn comms_for(&self, degree: usize) -> u64 {
        self.cycles * degree as u64
    }
}

/// Full certificate for one parameter choice on one problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionCert {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha: f64,
    /// Absent when `alpha >= 1` (no finite budget exists).
    pub budget: Option<OpsBudget>,
    pub d0: f64,
    pub epsilon: f64,
}

impl ContractionCert {
    pub fn new(hp: &HyperParams, d0: f64, epsilon: f64) -> Self {
        let f = contraction_factors(hp);
        let budget = if f.is_contractive() && f.alpha > 0.0 {
            ops_lower_bound(epsilon, d0, f.alpha).ok()
        } else if f.alpha == 0.0 {
            Some(OpsBudget {
                beta: if epsilon >= d0 { 0.0 } else { 1.0 },
                cycles: if epsilon >= d0 { 0 } else { 1 },
            })
        } else {
            None
        };
        ContractionCert {
            alpha1: f.alpha1,
            alpha2: f.alpha2,
            alpha: f.alpha,
            budget,
            d0,
            epsilon,
        }
    }
}

/// Admissible step-size interval `(0, 1/h_max)`.
pub fn feasible_gamma_interval(cert: &DominanceCert) -> Result<(f64, f64)> {
    if !cert.valid {
        return Err(Error::DominanceViolated { mu: cert.mu });
    }
    Ok((0.0, 1.0 / cert.h_max))
}

/// Admissible momentum interval `(0, γμ/(2(1-γμ)))`; requires `0 < γμ < 1`.
pub fn feasible_lambda_interval(gamma: f64, mu: f64) -> Result<(f64, f64)> {
    let gm = gamma * mu;
    if !(gm > 0.0 && gm < 1.0) {
        return Err(Error::InfeasibleParams(format!(
            "gamma*mu = {gm} outside (0, 1)"
        )));
    }
    Ok((0.0, gm / (2.0 * (1.0 - gm))))
}

/// Pick a strictly interior point of both admissible intervals:
/// `γ = gamma_frac / h_max`, `λ = lambda_frac · γμ/(2(1-γμ))`.
///
/// Fractions must lie strictly in `(0, 1)`; a fraction of 1 would land on
/// the open boundary, where `α₂ = 1` and the contraction degenerates.
pub fn select_params(cert: &DominanceCert, gamma_frac: f64, lambda_frac: f64) -> Result<HyperParams> {
    if !cert.valid {
        return Err(Error::DominanceViolated { mu: cert.mu });
    }
    for (name, frac) in [("gamma_frac", gamma_frac), ("lambda_frac", lambda_frac)] {
        if !(frac > 0.0 && frac < 1.0) {
            return Err(Error::InfeasibleParams(format!(
                "{name} must lie strictly in (0, 1), got {frac}"
            )));
        }
    }
    let gamma = gamma_frac / cert.h_max;
    let (_, lambda_hi) = feasible_lambda_interval(gamma, cert.mu)?;
    let hp = HyperParams {
        gamma,
        lambda: lambda_frac * lambda_hi,
        mu: cert.mu,
        h_max: cert.h_max,
    };
    debug_assert!(hp.strictly_feasible());
    Ok(hp)
}

/// Contraction factors α₁, α₂ and their max.
///
/// Accepts boundary and infeasible inputs as well (they are useful for
/// diagnostics; the caller checks `is_contractive`).
pub fn contraction_factors(hp: &HyperParams) -> ContractionFactors {
    let gm = hp.gamma * hp.mu;
    let lam = hp.lambda;
    let a = 1.0 + lam - gm * (1.0 + lam);
    let alpha1 = a * a + lam * (1.0 - gm) + lam * (1.0 - gm) * a;
    let alpha2 = 1.0 - gm + 2.0 * lam * (1.0 - gm);
    ContractionFactors {
        alpha1,
        alpha2,
        alpha: alpha1.max(alpha2),
    }
}

/// Cycle budget `β = log(ε/D₀)/log(α)`, clamped below at 0.
pub fn ops_lower_bound(epsilon: f64, d0: f64, alpha: f64) -> Result<OpsBudget> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InfeasibleParams(format!(
            "contraction factor {alpha} outside (0, 1)"
        )));
    }
    let positive = d0 > 0.0 && epsilon > 0.0;
    if !positive {
        return Err(Error::InfeasibleParams(format!(
            "need positive epsilon and d0, got eps = {epsilon}, d0 = {d0}"
        )));
    }
    let beta = ((epsilon / d0).ln() / alpha.ln()).max(0.0);
    Ok(OpsBudget {
        beta,
        cycles: beta.ceil() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::SplitMix64;

    fn cert(mu: f64, h_max: f64) -> DominanceCert {
        DominanceCert {
            mu,
            h_max,
            valid: mu > 0.0,
            sampled: false,
        }
    }

    #[test]
    fn gamma_interval() {
        assert_eq!(feasible_gamma_interval(&cert(1.0, 1.0)).unwrap(), (0.0, 1.0));
        let (lo, hi) = feasible_gamma_interval(&cert(0.6, 0.78)).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 1.282051282051282).abs() < 1e-12);
        assert!(feasible_gamma_interval(&cert(-0.1, 1.0)).is_err());
    }

    #[test]
    fn lambda_interval() {
        // γμ = 0.5 -> (0, 0.5)
        let (_, hi) = feasible_lambda_interval(1.0, 0.5).unwrap();
        assert!((hi - 0.5).abs() < 1e-15);
        // Benchmark-as-printed parameters round to 0.058.
        let (_, hi) = feasible_lambda_interval(0.345, 0.3).unwrap();
        assert!((hi - 0.0577244841048522).abs() < 1e-12);
        assert!((hi * 1000.0).round() / 1000.0 == 0.058);
        // γμ = 0.01
        let (_, hi) = feasible_lambda_interval(0.01, 1.0).unwrap();
        assert!((hi - 0.005050505050505051).abs() < 1e-15);
        assert!(feasible_lambda_interval(1.0, 1.0).is_err());
        assert!(feasible_lambda_interval(0.0, 0.5).is_err());
    }

    #[test]
    fn select_params_midpoint() {
        let hp = select_params(&cert(1.0, 1.0), 0.5, 0.5).unwrap();
        assert!((hp.gamma - 0.5).abs() < 1e-15);
        assert!((hp.lambda - 0.25).abs() < 1e-15);
        assert!(hp.strictly_feasible());
    }

    #[test]
    fn select_params_near_boundary_still_feasible() {
        let hp = select_params(&cert(0.6, 0.78), 0.99, 0.99).unwrap();
        assert!(hp.strictly_feasible());
        assert!(contraction_factors(&hp).is_contractive());
    }

    #[test]
    fn select_params_rejects_boundary_fractions() {
        assert!(select_params(&cert(1.0, 1.0), 0.5, 1.0).is_err());
        assert!(select_params(&cert(1.0, 1.0), 1.0, 0.5).is_err());
        assert!(select_params(&cert(1.0, 1.0), 0.5, 0.0).is_err());
    }

    #[test]
    fn momentum_free_reduction() {
        // λ = 0: α₁ = (1-γμ)², α₂ = 1-γμ.
        let hp = HyperParams {
            gamma: 0.5,
            lambda: 0.0,
            mu: 1.0,
            h_max: 1.0,
        };
        let f = contraction_factors(&hp);
        assert!((f.alpha1 - 0.25).abs() < 1e-15);
        assert!((f.alpha2 - 0.5).abs() < 1e-15);
        assert!((f.alpha - 0.5).abs() < 1e-15);
    }

    #[test]
    fn boundary_momentum_gives_alpha2_one() {
        for (gamma, mu) in [(0.5, 1.0), (0.345, 0.3), (0.9, 0.7)] {
            let mut hp = HyperParams {
                gamma,
                lambda: 0.0,
                mu,
                h_max: 1.0 / gamma + 1.0,
            };
            hp.lambda = hp.lambda_bound();
            let f = contraction_factors(&hp);
            assert!(
                (f.alpha2 - 1.0).abs() < 1e-12,
                "boundary alpha2 = {}",
                f.alpha2
            );
        }
    }

    #[test]
    fn printed_benchmark_factors() {
        // γ = 0.345, λ = 0.05, μ = 0.3; exact decimals carried by hand.
        let hp = HyperParams {
            gamma: 0.345,
            lambda: 0.05,
            mu: 0.3,
            h_max: 1.0 / 0.345,
        };
        let f = contraction_factors(&hp);
        assert!((f.alpha1 - 0.97311264875).abs() < 1e-12, "alpha1 = {}", f.alpha1);
        assert!((f.alpha2 - 0.98615).abs() < 1e-12, "alpha2 = {}", f.alpha2);
        assert_eq!(f.alpha, f.alpha2);
    }

    #[test]
    fn printed_lambda_exceeds_its_own_bound() {
        // The printed pair (γ = 0.345, λ = 0.058) sits just past the open
        // boundary for μ = 0.3, so both factors reach 1.
        let hp = HyperParams {
            gamma: 0.345,
            lambda: 0.058,
            mu: 0.3,
            h_max: 1.0 / 0.345,
        };
        assert!(!hp.strictly_feasible());
        let f = contraction_factors(&hp);
        assert!(f.alpha2 >= 1.0);
        assert!(!f.is_contractive());
    }

    #[test]
    fn budget_values() {
        let b = ops_lower_bound(9.0, 9.0, 0.9).unwrap();
        assert_eq!(b.beta, 0.0);
        assert_eq!(b.cycles, 0);

        let b = ops_lower_bound(0.1, 9.0, 0.9).unwrap();
        assert!((b.beta - 42.70868).abs() < 1e-4, "beta = {}", b.beta);
        assert_eq!(b.cycles, 43);

        let b = ops_lower_bound(0.01, 9.0, 0.98615).unwrap();
        assert!((b.beta - 487.739).abs() < 1e-2, "beta = {}", b.beta);
        assert_eq!(b.cycles, 488);

        assert_eq!(b.comms_for(9), 488 * 9);
    }

    #[test]
    fn budget_clamps_below_zero() {
        let b = ops_lower_bound(10.0, 9.0, 0.9).unwrap();
        assert_eq!(b.beta, 0.0);
        assert_eq!(b.cycles, 0);
    }

    #[test]
    fn budget_rejects_bad_alpha() {
        assert!(ops_lower_bound(0.1, 9.0, 1.0).is_err());
        assert!(ops_lower_bound(0.1, 9.0, 0.0).is_err());
        assert!(ops_lower_bound(0.1, 9.0, 1.3).is_err());
    }

    #[test]
    fn budget_monotonicity() {
        let base = ops_lower_bound(1e-3, 9.0, 0.9).unwrap().beta;
        assert!(ops_lower_bound(1e-4, 9.0, 0.9).unwrap().beta > base);
        assert!(ops_lower_bound(1e-3, 9.0, 0.95).unwrap().beta > base);
        assert!(ops_lower_bound(1e-3, 18.0, 0.9).unwrap().beta > base);
    }

    #[test]
    fn thousand_random_feasible_params_contract() {
        let mut rng = SplitMix64::new(2024);
        for _ in 0..1000 {
            let mu = 0.01 + rng.next_f64() * 5.0;
            let h_max = mu * (1.0 + rng.next_f64() * 10.0);
            let gfrac = 0.001 + rng.next_f64() * 0.998;
            let lfrac = 0.001 + rng.next_f64() * 0.998;
            let hp = select_params(&cert(mu, h_max), gfrac, lfrac).unwrap();
            let f = contraction_factors(&hp);
            assert!(
                f.alpha1 >= 0.0 && f.alpha1 < 1.0,
                "alpha1 = {} for {hp:?}",
                f.alpha1
            );
            assert!(
                f.alpha2 >= 0.0 && f.alpha2 < 1.0,
                "alpha2 = {} for {hp:?}",
                f.alpha2
            );
        }
    }

    #[test]
    fn alpha_monotone_in_lambda() {
        let mut rng = SplitMix64::new(99);
        for _ in 0..100 {
            let mu = 0.05 + rng.next_f64() * 2.0;
            let h_max = mu * (1.0 + rng.next_f64() * 6.0);
            let gamma = (0.2 + rng.next_f64() * 0.79) / h_max;
            let bound = feasible_lambda_interval(gamma, mu).unwrap().1;
            let mut prev = f64::NEG_INFINITY;
            for step in 0..=20 {
                let lambda = bound * step as f64 / 20.0;
                let f = contraction_factors(&HyperParams {
                    gamma,
                    lambda,
                    mu,
                    h_max,
                });
                assert!(
                    f.alpha >= prev - 1e-12,
                    "alpha decreased along lambda sweep"
                );
                prev = f.alpha;
            }
        }
    }

    #[test]
    fn certificate_ties_budget_to_contraction() {
        let hp = select_params(&cert(0.6, 0.78), 0.99, 0.9).unwrap();
        let c = ContractionCert::new(&hp, 9.0, 1e-3);
        assert!(c.alpha < 1.0);
        let budget = c.budget.unwrap();
        assert!(budget.beta > 0.0);

        let printed = HyperParams {
            gamma: 0.345,
            lambda: 0.058,
            mu: 0.3,
            h_max: 1.0 / 0.345,
        };
        let c = ContractionCert::new(&printed, 9.0, 1e-3);
        assert!(c.alpha >= 1.0);
        assert!(c.budget.is_none());
    }
}
