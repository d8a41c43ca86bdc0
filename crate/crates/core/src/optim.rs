//! Nesterov momentum with global-norm gradient clipping.
//!
//! ```text
//! ΔΛ_k = μ_{k−1} ΔΛ_{k−1} − ε ∇L(Λ_{k−1} + μ_{k−1} ΔΛ_{k−1})
//! Λ_k  = Λ_{k−1} + ΔΛ_k
//! ```
//!
//! The gradient is evaluated at the lookahead point returned by
//! [`OptimState::lookahead`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grad::GradientSet;
use crate::model::Encoder;

pub const DEFAULT_STEP_SIZE: f64 = 0.01;
pub const DEFAULT_CLIP: f64 = 10.0;
pub const MU_EDGE: f64 = 0.9;
pub const MU_MIDDLE: f64 = 0.995;

/// Momentum for update `k` (1-based) of `total`: 0.9 during the first and last
/// `⌈0.02·total⌉` updates, 0.995 otherwise.
pub fn mu_schedule(k: u64, total: u64) -> f64 {
    mu_schedule_with(k, total, MU_EDGE, MU_MIDDLE)
}

pub fn mu_schedule_with(k: u64, total: u64, edge: f64, middle: f64) -> f64 {
    let band = (total * 2).div_ceil(100);
    if k <= band || k > total.saturating_sub(band) {
        edge
    } else {
        middle
    }
}

/// Rescales `g` onto the `threshold` sphere when its global norm exceeds it.
/// Returns the norm before clipping.
pub fn clip(g: &mut GradientSet, threshold: f64) -> f64 {
    let norm = g.l2_norm();
    if norm > threshold {
        g.scale(threshold / norm);
    }
    norm
}

/// Hyperparameters of the update rule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimConfig {
    pub step_size: f64,
    pub clip: f64,
    pub mu_edge: f64,
    pub mu_middle: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            step_size: DEFAULT_STEP_SIZE,
            clip: DEFAULT_CLIP,
            mu_edge: MU_EDGE,
            mu_middle: MU_MIDDLE,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let mu_ok = |m: f64| (0.0..1.0).contains(&m);
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!("step size must be >= 0, got {}", self.step_size)));
        }
        if self.clip.is_nan() || self.clip <= 0.0 {
            return Err(Error::Config(format!("clip threshold must be > 0, got {}", self.clip)));
        }
        if !mu_ok(self.mu_edge) || !mu_ok(self.mu_middle) {
            return Err(Error::Config("momentum values must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Velocity and update counter for one side.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub velocity: Encoder,
    /// Updates applied so far.
    pub k: u64,
    pub total_updates: u64,
    pub config: OptimConfig,
}

impl OptimState {
    pub fn new(params: &Encoder, total_updates: u64, config: OptimConfig) -> Result<OptimState> {
        config.validate()?;
        Ok(OptimState {
            velocity: params.zeros_like(),
            k: 0,
            total_updates,
            config,
        })
    }

    /// Momentum for the next update.
    pub fn next_mu(&self) -> f64 {
        let k = (self.k + 1).min(self.total_updates.max(1));
        mu_schedule_with(k, self.total_updates.max(1), self.config.mu_edge, self.config.mu_middle)
    }

    /// `Λ + μ ΔΛ`, where the gradient for the next step must be evaluated.
    pub fn lookahead(&self, params: &Encoder) -> Result<Encoder> {
        let mut ahead = params.clone();
        ahead.add_scaled(self.next_mu(), &self.velocity)?;
        Ok(ahead)
    }

    /// Applies one update with momentum [`OptimState::next_mu`].
    pub fn step(&mut self, params: &mut Encoder, grad_at_lookahead: &GradientSet) -> Result<()> {
        self.step_with_mu(params, grad_at_lookahead, self.next_mu())
    }

    pub fn step_with_mu(&mut self, params: &mut Encoder, grad: &GradientSet, mu: f64) -> Result<()> {
        self.velocity.scale(mu);
        self.velocity.add_scaled(-self.config.step_size, grad.as_encoder())?;
        params.add_scaled(1.0, &self.velocity)?;
        self.k += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Arch, Params, RnnParams, Variant};
    use ndarray::{arr1, arr2};

    fn scalar_encoder(v: f64) -> Encoder {
        Encoder::unidirectional(Params::Rnn(RnnParams {
            w: arr2(&[[0.0]]),
            w_rec: arr2(&[[0.0]]),
            b: arr1(&[v]),
        }))
    }

    fn scalar(e: &Encoder) -> f64 {
        match &e.forward {
            Params::Rnn(p) => p.b[0],
            _ => unreachable!(),
        }
    }

    #[test]
    fn schedule_edges() {
        assert_eq!(mu_schedule(1, 1000), 0.9);
        assert_eq!(mu_schedule(20, 1000), 0.9);
        assert_eq!(mu_schedule(21, 1000), 0.995);
        assert_eq!(mu_schedule(500, 1000), 0.995);
        assert_eq!(mu_schedule(980, 1000), 0.995);
        assert_eq!(mu_schedule(981, 1000), 0.9);
        assert_eq!(mu_schedule(1000, 1000), 0.9);
        // ceil(0.02 * 10) = 1
        assert_eq!(mu_schedule(1, 10), 0.9);
        assert_eq!(mu_schedule(2, 10), 0.995);
        assert_eq!(mu_schedule(10, 10), 0.9);
    }

    #[test]
    fn schedule_is_symmetric() {
        for total in [1u64, 7, 49, 50, 51, 333, 1000] {
            for k in 1..=total {
                assert_eq!(mu_schedule(k, total), mu_schedule(total + 1 - k, total), "{k}/{total}");
            }
        }
    }

    #[test]
    fn clip_cases() {
        let mut g = GradientSet::from_encoder(scalar_encoder(0.5));
        clip(&mut g, 1.0);
        assert_eq!(scalar(g.as_encoder()), 0.5);

        let mut g = GradientSet::from_encoder(scalar_encoder(4.0));
        clip(&mut g, 2.0);
        assert_eq!(g.l2_norm(), 2.0);

        let mut g = GradientSet::from_encoder(scalar_encoder(2.0));
        clip(&mut g, 2.0);
        assert_eq!(scalar(g.as_encoder()), 2.0);
    }

    #[test]
    fn zero_momentum_is_gradient_descent() {
        let mut p = scalar_encoder(1.0);
        let cfg = OptimConfig { step_size: 0.1, ..OptimConfig::default() };
        let mut s = OptimState::new(&p, 10, cfg).unwrap();
        let g = GradientSet::from_encoder(scalar_encoder(3.0));
        s.step_with_mu(&mut p, &g, 0.0).unwrap();
        assert!((scalar(&p) - 0.7).abs() < 1e-15);
        assert_eq!(s.k, 1);
    }

    #[test]
    fn zero_gradient_at_rest_is_fixed_point() {
        let mut p = scalar_encoder(1.5);
        let mut s = OptimState::new(&p, 10, OptimConfig::default()).unwrap();
        let g = GradientSet::zeros_for(&p);
        s.step(&mut p, &g).unwrap();
        assert_eq!(scalar(&p), 1.5);
    }

    #[test]
    fn two_nesterov_steps_on_quadratic() {
        // f(λ) = λ²/2, ∇f = λ; ε = 0.1, μ = 0.9, λ0 = 1.
        // step 1: lookahead 1,     Δ1 = -0.1,           λ1 = 0.9
        // step 2: lookahead 0.81,  Δ2 = -0.09 - 0.081,  λ2 = 0.729
        let mut p = scalar_encoder(1.0);
        let cfg = OptimConfig { step_size: 0.1, ..OptimConfig::default() };
        let mut s = OptimState::new(&p, 100, cfg).unwrap();
        for expected in [0.9, 0.729] {
            let mut ahead = p.clone();
            ahead.add_scaled(0.9, &s.velocity).unwrap();
            let g = GradientSet::from_encoder(scalar_encoder(scalar(&ahead)));
            s.step_with_mu(&mut p, &g, 0.9).unwrap();
            assert!((scalar(&p) - expected).abs() < 1e-14, "{}", scalar(&p));
        }
    }

    #[test]
    fn lookahead_uses_scheduled_mu() {
        let p = scalar_encoder(1.0);
        let mut s = OptimState::new(&p, 100, OptimConfig::default()).unwrap();
        s.velocity = scalar_encoder(1.0);
        s.k = 50;
        assert!((scalar(&s.lookahead(&p).unwrap()) - 1.995).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let bad = OptimConfig { mu_middle: 1.0, ..OptimConfig::default() };
        assert!(bad.validate().is_err());
        let bad = OptimConfig { clip: 0.0, ..OptimConfig::default() };
        assert!(bad.validate().is_err());
        let p = Encoder::unidirectional(Params::zeros(Arch::Rnn, Variant::Full, 1, 1));
        assert!(OptimState::new(&p, 1, OptimConfig::default()).is_ok());
    }
}
