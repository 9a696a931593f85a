use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Proximal weights `α` (anchor `x_{t−τ}`), `η` (anchor `x_{t−1}`) and the
/// queue scaling `γ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub alpha: f64,
    pub eta: f64,
    pub gamma: f64,
}

impl StepSizes {
    pub fn new(alpha: f64, eta: f64, gamma: f64) -> Result<Self> {
        let s = StepSizes { alpha, eta, gamma };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.alpha) || !ok(self.eta) {
            return Err(Error::contract(format!(
                "alpha and eta must be finite and nonnegative (alpha = {}, eta = {})",
                self.alpha, self.eta
            )));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::contract(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.alpha + self.eta <= 0.0 {
            return Err(Error::contract("alpha + eta must be positive"));
        }
        Ok(())
    }

    /// The regret theorems need `α, γ > 0` and `η ≥ γ²β²`.
    pub fn meets_regret_conditions(&self, beta: f64) -> bool {
        self.alpha > 0.0 && self.gamma > 0.0 && self.eta >= self.gamma * self.gamma * beta * beta
    }

    /// The violation theorem needs `α, η, γ > 0`.
    pub fn meets_violation_conditions(&self) -> bool {
        self.alpha > 0.0 && self.eta > 0.0 && self.gamma > 0.0
    }
}

/// How much the caller knows about the path-length growth rate `δ` and the
/// delay `τ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSizePolicy {
    KnownDelta { delta: f64 },
    UnknownDelta,
    UnknownTauKnownDelta { delta: f64 },
    UnknownTauUnknownDelta,
    TimeInvariant { delta: f64 },
}

pub fn pick_step_sizes(policy: StepSizePolicy, horizon: usize, tau: usize, beta: f64) -> Result<StepSizes> {
    if horizon == 0 {
        return Err(Error::contract("horizon must be at least one slot"));
    }
    if tau == 0 {
        return Err(Error::contract("delay must be at least one slot"));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::contract(format!("beta must be finite and nonnegative, got {beta}")));
    }
    let t = horizon as f64;
    let tau_factor = (tau as f64).powf(-0.5);
    let check = |delta: f64| {
        if (0.0..=1.0).contains(&delta) {
            Ok(delta)
        } else {
            Err(Error::contract(format!("delta must lie in [0, 1], got {delta}")))
        }
    };
    let unit_gamma = |alpha: f64| StepSizes::new(alpha, beta * beta, 1.0);
    match policy {
        StepSizePolicy::KnownDelta { delta } => unit_gamma(tau_factor * t.powf((1.0 - check(delta)?) / 2.0)),
        StepSizePolicy::UnknownDelta => unit_gamma(tau_factor * t.sqrt()),
        StepSizePolicy::UnknownTauKnownDelta { delta } => unit_gamma(t.powf((1.0 - check(delta)?) / 2.0)),
        StepSizePolicy::UnknownTauUnknownDelta => unit_gamma(t.sqrt()),
        StepSizePolicy::TimeInvariant { delta } => {
            let alpha = tau_factor * t.powf((1.0 - check(delta)?) / 2.0);
            let gamma = alpha.sqrt();
            StepSizes::new(alpha, beta * beta * gamma * gamma, gamma)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_delta_example() {
        let s = pick_step_sizes(StepSizePolicy::UnknownDelta, 10_000, 4, 2.0).unwrap();
        assert_eq!((s.alpha, s.eta, s.gamma), (50.0, 4.0, 1.0));
    }

    #[test]
    fn experiment_default_uses_sqrt_t_and_norm_squared() {
        let beta = 3.7;
        let s = pick_step_sizes(StepSizePolicy::UnknownTauUnknownDelta, 400, 9, beta).unwrap();
        assert_eq!(s.alpha, 20.0);
        assert!((s.eta - beta * beta).abs() < 1e-12);
        assert_eq!(s.gamma, 1.0);
    }

    #[test]
    fn time_invariant_example() {
        let beta = 1.5;
        let s = pick_step_sizes(StepSizePolicy::TimeInvariant { delta: 0.0 }, 100, 1, beta).unwrap();
        assert!((s.alpha - 10.0).abs() < 1e-12);
        assert!((s.gamma * s.gamma - 10.0).abs() < 1e-12);
        // η = β²γ² with γ² = 10.
        assert!((s.eta - 10.0 * beta * beta).abs() < 1e-12);
    }

    #[test]
    fn known_delta_scales_with_tau_and_delta() {
        let s = pick_step_sizes(StepSizePolicy::KnownDelta { delta: 0.5 }, 10_000, 4, 1.0).unwrap();
        assert!((s.alpha - 0.5 * 10_000f64.powf(0.25)).abs() < 1e-12);
        let u = pick_step_sizes(StepSizePolicy::UnknownTauKnownDelta { delta: 0.5 }, 10_000, 4, 1.0).unwrap();
        assert!((u.alpha - 10.0).abs() < 1e-12);
    }

    #[test]
    fn delta_out_of_range_is_rejected() {
        assert!(pick_step_sizes(StepSizePolicy::KnownDelta { delta: 1.5 }, 10, 1, 1.0).is_err());
        assert!(pick_step_sizes(StepSizePolicy::TimeInvariant { delta: -0.1 }, 10, 1, 1.0).is_err());
    }

    #[test]
    fn step_size_invariants() {
        assert!(StepSizes::new(0.0, 0.0, 1.0).is_err());
        assert!(StepSizes::new(1.0, 0.0, 0.0).is_err());
        assert!(StepSizes::new(0.0, 2.0, 1.0).is_ok());
        let s = StepSizes::new(1.0, 4.0, 1.0).unwrap();
        assert!(s.meets_regret_conditions(2.0));
        assert!(!s.meets_regret_conditions(2.1));
    }
}
