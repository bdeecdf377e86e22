//! Decision stage: a per-agent deep Q-network over discrete payment
//! fractions, trained online from replayed decision outcomes.

mod network;
mod policy;
mod replay;
mod state;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Money;

pub use network::{Adam, Dense, Mlp};
pub use policy::{Checkpoint, DqnPolicy};
pub use replay::{ReplayBuffer, Transition};
pub use state::{encode_state, suggestion_fraction, StateVector, STATE_DIM};

#[derive(Debug, Error)]
pub enum DqnError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite training loss {loss}: {diagnostic}")]
    NonFinite { loss: f64, diagnostic: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub target_sync_every: u64,
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    /// K; action `i` pays `i/K` of the owed amount.
    pub action_levels: usize,
    /// Weight of the prior that pulls greedy choices toward the suggestion.
    pub suggestion_anchor: f64,
    /// Scale of the output layer's initial weights. Zero means the network
    /// starts with no action preference, so early greedy choices follow the
    /// suggestion prior alone.
    pub output_init_scale: f64,
    /// Subtract a running mean per decision kind from stored rewards.
    pub center_rewards: bool,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![64, 64],
            learning_rate: 1e-3,
            replay_capacity: 10_000,
            batch_size: 64,
            target_sync_every: 250,
            epsilon_min: 0.01,
            epsilon_max: 0.5,
            action_levels: 10,
            suggestion_anchor: 1.0,
            output_init_scale: 0.0,
            center_rewards: true,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<(), DqnError> {
        let bad = |m: &str| Err(DqnError::Domain(m.to_string()));
        if self.hidden_layers.iter().any(|&h| h == 0) {
            return bad("hidden layer sizes must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.replay_capacity == 0 || self.batch_size == 0 || self.target_sync_every == 0 {
            return bad("replay capacity, batch size and sync period must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon_min) || !(self.epsilon_min..=1.0).contains(&self.epsilon_max) {
            return bad("need 0 <= epsilon_min <= epsilon_max <= 1");
        }
        if self.action_levels == 0 {
            return bad("action_levels must be positive");
        }
        if !(self.suggestion_anchor >= 0.0) {
            return bad("suggestion_anchor must be >= 0");
        }
        Ok(())
    }

    /// Constant exploration rate for risk trait `zeta`.
    pub fn epsilon(&self, zeta: f64) -> f64 {
        self.epsilon_min + (self.epsilon_max - self.epsilon_min) * zeta
    }

    pub fn num_actions(&self) -> usize {
        self.action_levels + 1
    }
}

/// Discount such that a reward `eta + 1` steps away weighs 1%.
pub fn gamma_from_eta(eta: i64) -> Result<f64, DqnError> {
    if eta < 0 {
        return Err(DqnError::Domain(format!("planning horizon must be >= 0, got {eta}")));
    }
    Ok(0.01_f64.powf(1.0 / (eta as f64 + 1.0)))
}

/// `r` plus zero-mean Gaussian noise with std `1 − upsilon`. Always draws
/// one normal variate so random streams stay aligned.
pub fn noisy_reward<R: Rng + ?Sized>(r: f64, upsilon: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    let std = (1.0 - upsilon).max(0.0);
    if std == 0.0 {
        r
    } else {
        r + std * z
    }
}

/// `R = U − penalty − C`.
pub fn compute_reward(utility: f64, penalty: Money, cost: Money) -> f64 {
    utility - penalty.0 - cost.0
}

/// Lowest index among the maximal values.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy choice. Consumes exactly two draws whatever the outcome.
pub fn select_action<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> usize {
    let explore: f64 = rng.random();
    let random = rng.random_range(0..q.len());
    if explore < epsilon {
        random
    } else {
        argmax(q)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_from_eta(0).unwrap(), 0.01);
        assert!((gamma_from_eta(1).unwrap() - 0.1).abs() < 1e-15);
        // 0.01^(1/4) = 10^(-1/2)
        assert!((gamma_from_eta(3).unwrap() - 0.316_227_766_016_837_94).abs() < 1e-15);
        assert!(gamma_from_eta(-1).is_err());
    }

    #[test]
    fn reward_formula() {
        assert_eq!(compute_reward(100.0, Money::ZERO, Money(40.0)), 60.0);
        assert_eq!(compute_reward(0.0, Money(100_750.0), Money::ZERO), -100_750.0);
        assert_eq!(compute_reward(250.0, Money::ZERO, Money(250.0)), 0.0);
    }

    #[test]
    fn greedy_and_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_action(&[1.0, 3.0, 2.0], 0.0, &mut rng), 1);
        assert_eq!(select_action(&[0.5; 11], 0.0, &mut rng), 0);
    }

    #[test]
    fn noise_free_at_full_cognition() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(noisy_reward(3.25, 1.0, &mut rng), 3.25);
    }

    #[test]
    fn epsilon_schedule() {
        let c = DqnConfig::default();
        assert_eq!(c.epsilon(0.0), 0.01);
        assert_eq!(c.epsilon(1.0), 0.5);
        assert_eq!(c.num_actions(), 11);
    }
}
