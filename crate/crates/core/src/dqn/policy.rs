use std::collections::VecDeque;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{Adam, Mlp};
use super::replay::{ReplayBuffer, Transition};
use super::state::{encode_state, suggestion_fraction, StateVector, STATE_DIM};
use super::{argmax, compute_reward, gamma_from_eta, noisy_reward, select_action, DqnConfig, DqnError};
use crate::agent::Traits;
use crate::llm::{DecisionContext, DecisionKind, LlmSuggestion, OUTCOME_WINDOW};
use crate::money::Money;

/// A decision waiting for its reward window to close.
#[derive(Debug, Clone)]
struct Pending {
    state: StateVector,
    action: usize,
    kind: DecisionKind,
    step: u32,
    owed: Money,
    paid: Money,
    utility: f64,
    penalty: Money,
    cost: Money,
}

#[derive(Debug, Clone, Copy, Default)]
struct RunningMean {
    n: u64,
    mean: f64,
}

impl RunningMean {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.mean += (x - self.mean) / self.n as f64;
    }
}

/// One agent's learner: online and target networks, replay buffer and the
/// decision currently accumulating reward.
#[derive(Debug, Clone)]
pub struct DqnPolicy {
    config: DqnConfig,
    online: Mlp,
    target: Mlp,
    optimizer: Adam,
    replay: ReplayBuffer,
    updates: u64,
    epsilon: f64,
    gamma: f64,
    cognition: f64,
    /// Rewards are divided by this (the per-period salary).
    reward_scale: f64,
    reward_means: [RunningMean; 2],
    pending: Option<Pending>,
    outcomes: VecDeque<String>,
    train_rng: ChaCha8Rng,
    last_loss: Option<f64>,
}

impl DqnPolicy {
    pub fn new(config: DqnConfig, traits: Traits, reward_scale: f64, seed: u64) -> Result<Self, DqnError> {
        config.validate()?;
        if !(0.0..=1.0).contains(&traits.risk) {
            return Err(DqnError::Domain(format!("risk trait {} outside [0, 1]", traits.risk)));
        }
        if !(traits.cognition > 0.0 && traits.cognition <= 1.0) {
            return Err(DqnError::Domain(format!("cognition {} outside (0, 1]", traits.cognition)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![STATE_DIM];
        sizes.extend(&config.hidden_layers);
        sizes.push(config.num_actions());
        let online = Mlp::new(&sizes, config.output_init_scale, &mut rng);
        let optimizer = Adam::new(config.learning_rate, online.num_params());
        Ok(Self {
            target: online.clone(),
            online,
            optimizer,
            replay: ReplayBuffer::new(config.replay_capacity),
            updates: 0,
            epsilon: config.epsilon(traits.risk),
            gamma: gamma_from_eta(i64::from(traits.horizon))?,
            cognition: traits.cognition,
            reward_scale: if reward_scale > 0.0 { reward_scale } else { 1.0 },
            reward_means: [RunningMean::default(); 2],
            pending: None,
            outcomes: VecDeque::with_capacity(OUTCOME_WINDOW),
            train_rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_7EA1),
            last_loss: None,
            config,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn noise_std(&self) -> f64 {
        1.0 - self.cognition
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }

    /// Learned action values, without the suggestion prior.
    pub fn q_values(&self, state: &StateVector) -> Vec<f64> {
        self.online.forward(state.as_slice())
    }

    /// Learned values plus the prior `−w·|i/K − suggested fraction|`.
    pub fn action_values(&self, state: &StateVector, suggested: f64) -> Vec<f64> {
        let k = self.config.action_levels as f64;
        let w = self.config.suggestion_anchor;
        self.q_values(state)
            .into_iter()
            .enumerate()
            .map(|(i, q)| q - w * (i as f64 / k - suggested).abs())
            .collect()
    }

    pub fn greedy_action(&self, state: &StateVector, suggested: f64) -> usize {
        argmax(&self.action_values(state, suggested))
    }

    /// Past decisions and rewards, newest first.
    pub fn outcome_lines(&self) -> Vec<String> {
        self.outcomes.iter().rev().cloned().collect()
    }

    pub fn record_utility(&mut self, utility: f64) {
        if let Some(p) = &mut self.pending {
            p.utility += utility;
        }
    }

    pub fn record_penalty(&mut self, penalty: Money) {
        if let Some(p) = &mut self.pending {
            p.penalty += penalty;
        }
    }

    pub fn record_cost(&mut self, cost: Money) {
        if let Some(p) = &mut self.pending {
            p.cost += cost;
        }
    }

    /// Closes the previous decision's reward window, picks an action for
    /// this one and returns the amount to pay.
    pub fn decide_and_learn<R: Rng + ?Sized>(
        &mut self,
        ctx: &DecisionContext,
        suggestion: &LlmSuggestion,
        rng: &mut R,
    ) -> Result<Money, DqnError> {
        if ctx.owed.0 <= 0.0 {
            return Ok(Money::ZERO);
        }
        let state = encode_state(ctx, suggestion);
        if !state.is_finite() {
            return Err(DqnError::Domain(format!("non-finite state {:?}", state.0)));
        }
        if let Some(prev) = self.pending.take() {
            self.complete(prev, state, ctx.step, false, rng)?;
        }
        let q = self.action_values(&state, suggestion_fraction(ctx, suggestion));
        let action = select_action(&q, self.epsilon, rng);
        let paid = (ctx.owed * (action as f64 / self.config.action_levels as f64)).round_cents();
        self.pending = Some(Pending {
            state,
            action,
            kind: ctx.kind,
            step: ctx.step,
            owed: ctx.owed,
            paid,
            utility: 0.0,
            penalty: Money::ZERO,
            cost: Money::ZERO,
        });
        Ok(paid)
    }

    /// Closes the last open decision as terminal at `step`.
    pub fn finish<R: Rng + ?Sized>(&mut self, step: u32, rng: &mut R) -> Result<(), DqnError> {
        if let Some(prev) = self.pending.take() {
            let state = prev.state;
            self.complete(prev, state, step, true, rng)?;
        }
        Ok(())
    }

    fn complete<R: Rng + ?Sized>(
        &mut self,
        p: Pending,
        next_state: StateVector,
        step: u32,
        terminal: bool,
        rng: &mut R,
    ) -> Result<(), DqnError> {
        let raw = compute_reward(p.utility, p.penalty, p.cost) / self.reward_scale;
        let mean = &mut self.reward_means[p.kind.index()];
        let centered = if self.config.center_rewards { raw - mean.mean } else { raw };
        mean.push(raw);
        let reward = noisy_reward(centered, self.cognition, rng);

        if self.outcomes.len() == OUTCOME_WINDOW {
            self.outcomes.pop_front();
        }
        self.outcomes.push_back(format!(
            "At time {} I paid {} of {} owed in {} taxes; the outcome scored {:.3}",
            p.step,
            p.paid,
            p.owed,
            p.kind.label(),
            raw
        ));

        self.push(Transition {
            state: p.state,
            action: p.action,
            reward,
            next_state,
            terminal,
            elapsed: step.saturating_sub(p.step),
        })
    }

    /// Stores a transition and trains once if the buffer is warm.
    pub fn push(&mut self, t: Transition) -> Result<(), DqnError> {
        if !t.reward.is_finite() {
            return Err(DqnError::Domain(format!("non-finite reward {}", t.reward)));
        }
        self.replay.push(t);
        if self.replay.len() >= self.config.batch_size {
            let batch = self.replay.sample(self.config.batch_size, &mut self.train_rng);
            self.train_step(&batch)?;
        }
        Ok(())
    }

    /// TD targets `r + γ^Δ · max Q_target(s')` (just `r` when terminal).
    pub fn targets(&self, batch: &[Transition]) -> Vec<f64> {
        batch
            .iter()
            .map(|t| {
                if t.terminal {
                    t.reward
                } else {
                    let next = self.target.forward(t.next_state.as_slice());
                    let best = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    t.reward + self.gamma.powi(t.elapsed.max(1) as i32) * best
                }
            })
            .collect()
    }

    /// One gradient step on the mean squared TD error; returns the loss
    /// before the step.
    pub fn train_step(&mut self, batch: &[Transition]) -> Result<f64, DqnError> {
        if batch.is_empty() {
            return Err(DqnError::Domain("empty training batch".into()));
        }
        let targets = self.targets(batch);
        let triples: Vec<(&[f64], usize, f64)> =
            batch.iter().zip(&targets).map(|(t, &y)| (t.state.as_slice(), t.action, y)).collect();
        let (loss, grad) = self.online.td_loss_and_grad(&triples);
        if !loss.is_finite() {
            let worst = batch.iter().map(|t| t.reward.abs()).fold(0.0, f64::max);
            return Err(DqnError::NonFinite {
                loss,
                diagnostic: format!(
                    "after {} updates; batch {} max |reward| {worst:e}; weights finite: {}",
                    self.updates,
                    batch.len(),
                    self.online.is_finite()
                ),
            });
        }
        self.optimizer.step(&mut self.online, &grad);
        self.updates += 1;
        if self.updates % self.config.target_sync_every == 0 {
            self.sync_target();
        }
        self.last_loss = Some(loss);
        Ok(loss)
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            gamma: self.gamma,
            epsilon: self.epsilon,
            noise_std: self.noise_std(),
            updates: self.updates,
            network: self.online.clone(),
        }
    }

    pub fn restore(&mut self, checkpoint: &Checkpoint) -> Result<(), DqnError> {
        let shapes = |m: &Mlp| m.layers.iter().map(|l| (l.inputs, l.outputs)).collect::<Vec<_>>();
        if shapes(&checkpoint.network) != shapes(&self.online) {
            return Err(DqnError::Checkpoint("layer shapes do not match".into()));
        }
        self.online = checkpoint.network.clone();
        self.target = checkpoint.network.clone();
        Ok(())
    }
}

/// JSON policy snapshot: config echo plus row-major layer weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: DqnConfig,
    pub gamma: f64,
    pub epsilon: f64,
    pub noise_std: f64,
    pub updates: u64,
    pub network: Mlp,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), DqnError> {
        let text = serde_json::to_string(self).map_err(|e| DqnError::Checkpoint(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| DqnError::Checkpoint(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, DqnError> {
        let text = std::fs::read_to_string(path).map_err(|e| DqnError::Checkpoint(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| DqnError::Checkpoint(e.to_string()))
    }
}
