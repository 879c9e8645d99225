//! Deep Q-learning: network, replay, TD loss, exploration and training.

pub mod adam;
pub mod checkpoint;
pub mod network;
pub mod replay;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{stream, DqnConfig, EpsilonMode};

pub use adam::Adam;
pub use network::{argmax, Gradients, QNetwork};
pub use replay::{ReplayBuffer, Transition};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DqnError {
    #[error("input width {got} does not match network input {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Greedy-action probability at `episode` of `episodes`, annealed linearly
/// from `eps_start` to `eps_end`.
pub fn epsilon(episode: usize, eps_start: f64, eps_end: f64, episodes: usize) -> f64 {
    if episodes <= 1 {
        return eps_start;
    }
    let frac = episode.min(episodes - 1) as f64 / (episodes - 1) as f64;
    eps_start + (eps_end - eps_start) * frac
}

/// Probability of acting greedily for the annealed value under `mode`.
pub fn greedy_probability(mode: EpsilonMode, annealed: f64) -> f64 {
    match mode {
        EpsilonMode::Greedy => annealed,
        EpsilonMode::Explore => 1.0 - annealed,
    }
}

/// Epsilon-greedy choice. With probability `greedy_prob` the highest-valued
/// allowed action (lowest index on ties), otherwise a uniform allowed action.
pub fn act<R: Rng>(
    net: &QNetwork,
    state: &[f64],
    greedy_prob: f64,
    mask: Option<&[bool]>,
    rng: &mut R,
) -> Result<usize, DqnError> {
    let n = net.output_width();
    let allowed = |a: usize| mask.is_none_or(|m| m[a]);
    let explore = greedy_prob < 1.0 && rng.random::<f64>() >= greedy_prob;
    if explore {
        let choices: Vec<usize> = (0..n).filter(|&a| allowed(a)).collect();
        if !choices.is_empty() {
            return Ok(choices[rng.random_range(0..choices.len())]);
        }
    }
    let q = net.forward(state)?;
    let mut best: Option<usize> = None;
    for a in (0..n).filter(|&a| allowed(a)) {
        if best.is_none_or(|b| q[a] > q[b]) {
            best = Some(a);
        }
    }
    Ok(best.unwrap_or_else(|| argmax(&q)))
}

fn stack(rows: impl ExactSizeIterator<Item = Vec<f64>>, width: usize) -> Array2<f64> {
    let n = rows.len();
    let flat: Vec<f64> = rows.flatten().collect();
    Array2::from_shape_vec((n, width), flat).expect("uniform row width")
}

/// Mean squared TD error over `batch` and its gradient with respect to the
/// evaluation network. The bootstrapped target is held constant.
pub fn td_loss(
    batch: &[&Transition],
    net: &QNetwork,
    target: &QNetwork,
    discount: f64,
) -> Result<(f64, Gradients), DqnError> {
    assert!(!batch.is_empty(), "empty minibatch");
    let width = net.input_width();
    for t in batch {
        for got in [t.state.len(), t.next_state.len()] {
            if got != width {
                return Err(DqnError::Dimension {
                    expected: width,
                    got,
                });
            }
        }
    }
    let states = stack(batch.iter().map(|t| t.state.clone()), width);
    let next = stack(batch.iter().map(|t| t.next_state.clone()), width);
    let next_q = target.forward_batch(next.view())?;
    let cache = net.forward_cached(states.view());
    let q = cache.output();
    let n = batch.len() as f64;
    let mut grad = Array2::zeros(q.raw_dim());
    let mut loss = 0.0;
    for (i, t) in batch.iter().enumerate() {
        let row = next_q.row(i);
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let y = t.reward + discount * best;
        let err = y - q[[i, t.action]];
        loss += err * err;
        grad[[i, t.action]] = -2.0 * err / n;
    }
    Ok((loss / n, net.backward(&cache, grad)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainStatus {
    WarmingUp { have: usize, need: usize },
    Trained { loss: f64 },
}

/// Evaluation and target networks with their replay memory and optimizer.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub eval: QNetwork,
    pub target: QNetwork,
    pub optimizer: Adam,
    pub buffer: ReplayBuffer,
    pub train_steps: u64,
    pub discount: f64,
    pub minibatch: usize,
    pub warmup: usize,
    pub target_sync_period: u64,
    rng: ChaCha8Rng,
}

impl DqnAgent {
    /// Fresh agent with `input -> hidden_layers -> outputs` widths.
    pub fn new(input: usize, outputs: usize, cfg: &DqnConfig, seed: u64) -> Self {
        let mut widths = vec![input];
        widths.extend(cfg.hidden_layers);
        widths.push(outputs);
        let eval = QNetwork::new(&widths, &mut stream(seed, "init"));
        Self::from_parts(eval.clone(), eval, None, 0, cfg, seed)
    }

    pub fn from_parts(
        eval: QNetwork,
        target: QNetwork,
        optimizer: Option<Adam>,
        train_steps: u64,
        cfg: &DqnConfig,
        seed: u64,
    ) -> Self {
        let optimizer = optimizer.unwrap_or_else(|| Adam::new(eval.param_count(), cfg.lr));
        Self {
            eval,
            target,
            optimizer,
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            train_steps,
            discount: cfg.discount,
            minibatch: cfg.minibatch,
            warmup: cfg.warmup_transitions,
            target_sync_period: cfg.target_sync_period,
            rng: stream(seed, "explore"),
        }
    }

    pub fn act(&mut self, state: &[f64], greedy_prob: f64, mask: Option<&[bool]>) -> usize {
        act(&self.eval, state, greedy_prob, mask, &mut self.rng)
            .expect("state width checked by caller")
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    /// One minibatch update of the evaluation network. The target network is
    /// refreshed every `target_sync_period` updates.
    pub fn train_step(&mut self) -> TrainStatus {
        let need = self.warmup.max(self.minibatch).max(1);
        if self.buffer.len() < need {
            return TrainStatus::WarmingUp {
                have: self.buffer.len(),
                need,
            };
        }
        let batch = self.buffer.sample(self.minibatch, &mut self.rng);
        let (loss, grads) = td_loss(&batch, &self.eval, &self.target, self.discount)
            .expect("transitions share the network width");
        self.optimizer.apply(&mut self.eval, &grads);
        self.train_steps += 1;
        if self.train_steps.is_multiple_of(self.target_sync_period) {
            self.target = self.eval.clone();
        }
        TrainStatus::Trained { loss }
    }
}
