//! Episodes, training, greedy evaluation and parameter sweeps.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::results::{sort_rows, ResultRow};
use super::{build_ra_state, build_state, EngineError, PeriodOutcome, Simulator};
use crate::age::AosiAccumulator;
use crate::config::{derive_seed, stream, DqnConfig, RunConfig, SimConfig, StateNorm};
use crate::dqn::checkpoint::Checkpoint;
use crate::dqn::{epsilon, greedy_probability, DqnAgent, TrainStatus, Transition};
use crate::policy::{Action, ActionSpace, PolicyKind, Scheduler};
use crate::semantics::Semantics;

/// Anything that can pick an action from the current simulator state.
pub trait Controller {
    fn decide(&mut self, sim: &Simulator) -> Action;
}

/// A policy together with its value learner.
///
/// The joint learner chooses among all `M*K + 1` actions from the joint
/// state. The separate baselines let a rule pick the source and learn only
/// `k` from the joint state extended with the picked source's features.
#[derive(Debug, Clone)]
pub struct Learner {
    kind: PolicyKind,
    scheduler: Option<Scheduler>,
    pub agent: DqnAgent,
    space: ActionSpace,
    norm: StateNorm,
    tau: f64,
    reward_scale: f64,
    scheduler_rng: ChaCha8Rng,
    last: Option<(Vec<f64>, usize)>,
    pending: Option<(Vec<f64>, usize, f64)>,
}

impl Learner {
    pub fn input_width(kind: PolicyKind, sources: usize) -> usize {
        match kind {
            PolicyKind::DqnJoint => 3 * sources,
            _ => 3 * sources + 3,
        }
    }

    pub fn output_width(kind: PolicyKind, space: ActionSpace) -> usize {
        match kind {
            PolicyKind::DqnJoint => space.joint_len(),
            _ => space.ra_len(),
        }
    }

    pub fn new(kind: PolicyKind, sim: &SimConfig, dqn: &DqnConfig, seed: u64) -> Self {
        let space = ActionSpace::new(sim.sources, sim.max_symbols_per_word);
        let agent = DqnAgent::new(
            Self::input_width(kind, sim.sources),
            Self::output_width(kind, space),
            dqn,
            seed,
        );
        Self::with_agent(kind, sim, dqn, agent, seed)
    }

    fn with_agent(
        kind: PolicyKind,
        sim: &SimConfig,
        dqn: &DqnConfig,
        agent: DqnAgent,
        seed: u64,
    ) -> Self {
        Self {
            kind,
            scheduler: kind.scheduler(),
            agent,
            space: ActionSpace::new(sim.sources, sim.max_symbols_per_word),
            norm: dqn.state_norm.clone(),
            tau: sim.tau(),
            reward_scale: dqn.reward_scale,
            scheduler_rng: stream(seed, "scheduler"),
            last: None,
            pending: None,
        }
    }

    pub fn from_checkpoint(
        ckpt: Checkpoint,
        sim: &SimConfig,
        dqn: &DqnConfig,
        seed: u64,
    ) -> Result<Self, EngineError> {
        let kind: PolicyKind = ckpt.policy.parse()?;
        let space = ActionSpace::new(sim.sources, sim.max_symbols_per_word);
        let widths = ckpt.eval.widths();
        let (input, output) = (widths[0], *widths.last().unwrap());
        let want = (
            Self::input_width(kind, sim.sources),
            Self::output_width(kind, space),
        );
        if (input, output) != want || ckpt.target.widths() != widths {
            return Err(EngineError::CheckpointMismatch(format!(
                "network {input}->{output} does not fit {kind} with {} sources and K={} (needs {}->{})",
                sim.sources, sim.max_symbols_per_word, want.0, want.1
            )));
        }
        let agent = DqnAgent::from_parts(
            ckpt.eval,
            ckpt.target,
            Some(ckpt.optimizer),
            ckpt.train_steps,
            dqn,
            seed,
        );
        Ok(Self::with_agent(kind, sim, dqn, agent, seed))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            policy: self.kind.name().to_string(),
            eval: self.agent.eval.clone(),
            target: self.agent.target.clone(),
            optimizer: self.agent.optimizer.clone(),
            train_steps: self.agent.train_steps,
        }
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn begin_episode(&mut self) {
        if let Some(s) = &mut self.scheduler {
            s.reset();
        }
        self.last = None;
        self.pending = None;
    }

    pub fn decide(&mut self, sim: &Simulator, greedy_prob: f64, learn: bool) -> Action {
        match &mut self.scheduler {
            None => {
                let s = build_state(sim.views(), sim.draws(), self.tau, &self.norm);
                let a = self.agent.act(&s, greedy_prob, None);
                self.last = Some((s, a));
                self.space
                    .decode(a)
                    .expect("network width matches action space")
            }
            Some(scheduler) => {
                let pick = scheduler.pick(sim.views(), &sim.eligible(), &mut self.scheduler_rng);
                let s = build_ra_state(sim.views(), sim.draws(), pick, self.tau, &self.norm);
                if let Some((ps, pa, pr)) = self.pending.take() {
                    if learn {
                        self.agent.remember(Transition {
                            state: ps,
                            action: pa,
                            reward: pr,
                            next_state: s.clone(),
                        });
                    }
                }
                match pick {
                    None => {
                        self.last = None;
                        Action::Idle
                    }
                    Some(source) => {
                        let a = self.agent.act(&s, greedy_prob, None);
                        self.last = Some((s, a));
                        Action::Schedule {
                            source,
                            symbols_per_word: self.space.decode_ra(a).expect("RA width"),
                        }
                    }
                }
            }
        }
    }

    /// Reports the reward of the last decision; `sim` is already in the next period.
    pub fn feedback(&mut self, reward: f64, sim: &Simulator, learn: bool) {
        let Some((s, a)) = self.last.take() else {
            return;
        };
        let r = reward * self.reward_scale;
        if self.scheduler.is_none() {
            if learn {
                let next = build_state(sim.views(), sim.draws(), self.tau, &self.norm);
                self.agent.remember(Transition {
                    state: s,
                    action: a,
                    reward: r,
                    next_state: next,
                });
            }
        } else {
            // The next state depends on the scheduler's next pick; finished in `decide`.
            self.pending = Some((s, a, r));
        }
    }
}

/// Greedy controller view of a learner, used for evaluation.
pub struct GreedyLearner<'a>(pub &'a mut Learner);

impl Controller for GreedyLearner<'_> {
    fn decide(&mut self, sim: &Simulator) -> Action {
        self.0.decide(sim, 1.0, false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub outcomes: Vec<PeriodOutcome>,
    pub mean_reward: f64,
    pub long_term_avg_aosi: f64,
    pub mean_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub greedy_prob: f64,
    pub mean_reward: f64,
    pub long_term_avg_aosi: f64,
    pub mean_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct EpisodeOptions {
    pub steps: usize,
    pub greedy_prob: f64,
    pub learn: bool,
    pub train_every: usize,
    pub keep_outcomes: bool,
}

/// Runs `opts.steps` periods of `sim` under `learner`, storing transitions and
/// training when `opts.learn` is set.
pub fn run_episode(
    sim: &mut Simulator,
    learner: &mut Learner,
    opts: EpisodeOptions,
) -> Result<EpisodeLog, EngineError> {
    learner.begin_episode();
    let mut outcomes = Vec::new();
    let mut acc = AosiAccumulator::default();
    let mut reward_sum = 0.0;
    let (mut loss_sum, mut losses) = (0.0, 0usize);
    for step in 0..opts.steps {
        let action = learner.decide(sim, opts.greedy_prob, opts.learn);
        let out = sim.execute(action)?;
        learner.feedback(out.reward, sim, opts.learn);
        if opts.learn && (step + 1) % opts.train_every == 0 {
            if let TrainStatus::Trained { loss } = learner.agent.train_step() {
                loss_sum += loss;
                losses += 1;
            }
        }
        acc.push_period(&out.averages);
        reward_sum += out.reward;
        if opts.keep_outcomes {
            outcomes.push(out);
        }
    }
    Ok(EpisodeLog {
        outcomes,
        mean_reward: reward_sum / opts.steps as f64,
        long_term_avg_aosi: acc.mean().unwrap_or(0.0),
        mean_loss: (losses > 0).then(|| loss_sum / losses as f64),
    })
}

/// Runs `steps` periods under any controller without learning.
pub fn run_controller(
    sim: &mut Simulator,
    controller: &mut dyn Controller,
    steps: usize,
) -> Result<Vec<PeriodOutcome>, EngineError> {
    (0..steps)
        .map(|_| {
            let a = controller.decide(sim);
            sim.execute(a)
        })
        .collect()
}

/// Seed of one replication at one grid point. It does not depend on the
/// policy, so compared policies see the same generation and channel draws.
pub fn replication_seed(master_seed: u64, sources: usize, tau: f64, replication: usize) -> u64 {
    derive_seed(
        master_seed,
        &format!("point/M={sources}/tau={tau:.6}/rep={replication}"),
    )
}

pub fn train_episode_seed(rep_seed: u64, episode: usize) -> u64 {
    derive_seed(rep_seed, &format!("train/{episode}"))
}

pub fn eval_episode_seed(rep_seed: u64, episode: usize) -> u64 {
    derive_seed(rep_seed, &format!("eval/{episode}"))
}

pub fn learner_seed(rep_seed: u64, kind: PolicyKind) -> u64 {
    derive_seed(rep_seed, &format!("agent/{kind}"))
}

/// Trains a fresh learner for `cfg.dqn.episodes` episodes.
pub fn train(
    kind: PolicyKind,
    cfg: &RunConfig,
    semantics: Arc<Semantics>,
    rep_seed: u64,
) -> Result<(Learner, Vec<EpisodeSummary>), EngineError> {
    let sim_cfg = Arc::new(cfg.sim.clone());
    let dqn = &cfg.dqn;
    let mut learner = Learner::new(kind, &cfg.sim, dqn, learner_seed(rep_seed, kind));
    let mut summaries = Vec::with_capacity(dqn.episodes);
    for e in 0..dqn.episodes {
        let gp = greedy_probability(
            dqn.epsilon_mode,
            epsilon(e, dqn.eps_start, dqn.eps_end, dqn.episodes),
        );
        let mut sim = Simulator::new(
            sim_cfg.clone(),
            semantics.clone(),
            train_episode_seed(rep_seed, e),
        );
        let log = run_episode(
            &mut sim,
            &mut learner,
            EpisodeOptions {
                steps: dqn.steps_per_episode,
                greedy_prob: gp,
                learn: true,
                train_every: dqn.train_every,
                keep_outcomes: false,
            },
        )?;
        summaries.push(EpisodeSummary {
            episode: e,
            greedy_prob: gp,
            mean_reward: log.mean_reward,
            long_term_avg_aosi: log.long_term_avg_aosi,
            mean_loss: log.mean_loss,
        });
    }
    Ok((learner, summaries))
}

/// Greedy evaluation over `cfg.dqn.eval_episodes` fresh episodes of
/// `cfg.sim.horizon_periods` periods each.
pub fn evaluate(
    learner: &mut Learner,
    cfg: &RunConfig,
    semantics: Arc<Semantics>,
    rep_seed: u64,
) -> Result<Vec<EpisodeSummary>, EngineError> {
    let sim_cfg = Arc::new(cfg.sim.clone());
    (0..cfg.dqn.eval_episodes)
        .map(|e| {
            let mut sim = Simulator::new(
                sim_cfg.clone(),
                semantics.clone(),
                eval_episode_seed(rep_seed, e),
            );
            let log = run_episode(
                &mut sim,
                learner,
                EpisodeOptions {
                    steps: cfg.sim.horizon_periods,
                    greedy_prob: 1.0,
                    learn: false,
                    train_every: 1,
                    keep_outcomes: false,
                },
            )?;
            Ok(EpisodeSummary {
                episode: e,
                greedy_prob: 1.0,
                mean_reward: log.mean_reward,
                long_term_avg_aosi: log.long_term_avg_aosi,
                mean_loss: None,
            })
        })
        .collect()
}

/// Result of training and evaluating one policy at one grid point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub policy: PolicyKind,
    pub sources: usize,
    pub tau: f64,
    pub replication: usize,
    pub training: Vec<EpisodeSummary>,
    pub evaluation: Vec<EpisodeSummary>,
}

impl PointResult {
    pub fn eval_aosi(&self) -> f64 {
        mean(self.evaluation.iter().map(|e| e.long_term_avg_aosi))
    }

    pub fn eval_reward(&self) -> f64 {
        mean(self.evaluation.iter().map(|e| e.mean_reward))
    }

    pub fn summary_row(&self, fingerprint: &str) -> ResultRow {
        ResultRow {
            policy: self.policy.name().to_string(),
            sources: self.sources,
            tau: self.tau,
            replication: self.replication,
            episode: None,
            long_term_avg_aosi: self.eval_aosi(),
            mean_reward: self.eval_reward(),
            config_fingerprint: fingerprint.to_string(),
        }
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Trains then evaluates `kind` on `cfg` (whose `sim` already holds the grid
/// point) for one replication.
pub fn run_point(
    kind: PolicyKind,
    cfg: &RunConfig,
    semantics: Arc<Semantics>,
    replication: usize,
) -> Result<PointResult, EngineError> {
    let rep_seed = replication_seed(
        cfg.sim.master_seed,
        cfg.sim.sources,
        cfg.sim.sampling_interval_s,
        replication,
    );
    let (mut learner, training) = train(kind, cfg, semantics.clone(), rep_seed)?;
    let evaluation = evaluate(&mut learner, cfg, semantics, rep_seed)?;
    Ok(PointResult {
        policy: kind,
        sources: cfg.sim.sources,
        tau: cfg.sim.sampling_interval_s,
        replication,
        training,
        evaluation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Sources,
    Tau,
}

impl SweepAxis {
    pub const SOURCES: [usize; 5] = [1, 2, 3, 4, 5];
    pub const TAUS: [f64; 5] = [0.05, 0.10, 0.15, 0.20, 0.25];

    /// Configs for every grid point of the axis.
    pub fn grid(&self, base: &RunConfig) -> Vec<RunConfig> {
        match self {
            SweepAxis::Sources => Self::SOURCES
                .iter()
                .map(|&m| {
                    let mut c = base.clone();
                    c.sim.sources = m;
                    c
                })
                .collect(),
            SweepAxis::Tau => Self::TAUS
                .iter()
                .map(|&t| {
                    let mut c = base.clone();
                    c.sim.sampling_interval_s = t;
                    c
                })
                .collect(),
        }
    }
}

/// Every grid point x policy x replication, trained and evaluated. Rows are
/// sorted by key columns and carry the base config's fingerprint.
pub fn run_sweep(
    base: &RunConfig,
    semantics: Arc<Semantics>,
    axis: SweepAxis,
    replications: usize,
    policies: &[PolicyKind],
) -> Result<Vec<ResultRow>, EngineError> {
    let fingerprint = base.fingerprint();
    let grid = axis.grid(base);
    let jobs: Vec<(&RunConfig, PolicyKind, usize)> = grid
        .iter()
        .flat_map(|c| {
            policies
                .iter()
                .flat_map(move |&p| (0..replications).map(move |r| (c, p, r)))
        })
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(c, p, r)| {
            run_point(p, c, semantics.clone(), r).map(|res| res.summary_row(&fingerprint))
        })
        .collect::<Result<Vec<_>, _>>()?;
    sort_rows(&mut rows);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{PerSource, SimilaritySpec};

    fn tiny_run() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.sim.sources = 2;
        cfg.sim.horizon_periods = 30;
        cfg.dqn.hidden_layers = [8, 8, 8];
        cfg.dqn.episodes = 3;
        cfg.dqn.steps_per_episode = 40;
        cfg.dqn.minibatch = 8;
        cfg.dqn.warmup_transitions = 16;
        cfg.dqn.eval_episodes = 2;
        cfg
    }

    fn sem(cfg: &RunConfig) -> Arc<Semantics> {
        Arc::new(Semantics::from_config(&cfg.sim).unwrap())
    }

    #[test]
    fn identical_seeds_identical_logs() {
        let cfg = tiny_run();
        for kind in PolicyKind::ALL {
            let a = run_point(kind, &cfg, sem(&cfg), 0).unwrap();
            let b = run_point(kind, &cfg, sem(&cfg), 0).unwrap();
            assert_eq!(a.training, b.training);
            assert_eq!(a.evaluation, b.evaluation);
        }
    }

    #[test]
    fn episode_mean_reward_is_mean_of_periods() {
        let cfg = tiny_run();
        let s = sem(&cfg);
        let mut learner = Learner::new(PolicyKind::MaxAosi, &cfg.sim, &cfg.dqn, 1);
        let mut sim = Simulator::new(Arc::new(cfg.sim.clone()), s, 5);
        let log = run_episode(
            &mut sim,
            &mut learner,
            EpisodeOptions {
                steps: 50,
                greedy_prob: 0.5,
                learn: true,
                train_every: 1,
                keep_outcomes: true,
            },
        )
        .unwrap();
        let m = log.outcomes.iter().map(|o| o.reward).sum::<f64>() / 50.0;
        assert!((m - log.mean_reward).abs() < 1e-12);
        assert!((log.long_term_avg_aosi + log.mean_reward).abs() < 1e-12);
        for o in &log.outcomes {
            assert!(o.reward <= 0.0);
            let r = -o.averages.iter().sum::<f64>() / 2.0;
            assert_eq!(r, o.reward);
        }
    }

    #[test]
    fn perfect_similarity_drives_aosi_to_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.csv");
        std::fs::write(&path, "k,-100,100\n1,1,1\n8,1,1\n").unwrap();
        let mut cfg = tiny_run();
        cfg.sim.gen_prob = PerSource::Uniform(1.0);
        cfg.sim.similarity_model = SimilaritySpec::Table { path };
        let s = sem(&cfg);
        let mut learner = Learner::new(PolicyKind::RoundRobin, &cfg.sim, &cfg.dqn, 2);
        let mut sim = Simulator::new(Arc::new(cfg.sim.clone()), s, 9);
        let log = run_episode(
            &mut sim,
            &mut learner,
            EpisodeOptions {
                steps: 60,
                greedy_prob: 1.0,
                learn: false,
                train_every: 1,
                keep_outcomes: true,
            },
        )
        .unwrap();
        // Once both sources have been served, every later period is zero.
        let first_both = log
            .outcomes
            .iter()
            .scan([false; 2], |seen, o| {
                if o.success {
                    seen[o.action.scheduled().unwrap()] = true;
                }
                Some(seen[0] && seen[1])
            })
            .position(|b| b)
            .unwrap();
        for o in &log.outcomes[first_both + 1..] {
            assert_eq!(o.reward, 0.0);
        }
    }

    #[test]
    fn single_source_random_equals_round_robin() {
        let mut cfg = tiny_run();
        cfg.sim.sources = 1;
        let s = sem(&cfg);
        let trace = |kind| {
            let mut learner = Learner::new(kind, &cfg.sim, &cfg.dqn, 3);
            let mut sim = Simulator::new(Arc::new(cfg.sim.clone()), s.clone(), 4);
            (0..100)
                .map(|_| {
                    let a = learner.decide(&sim, 1.0, false);
                    sim.execute(a).unwrap();
                    a.scheduled()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(trace(PolicyKind::Random), trace(PolicyKind::RoundRobin));
    }

    #[test]
    fn sweep_cardinality_and_fingerprint() {
        let cfg = tiny_run();
        let rows = run_sweep(
            &cfg,
            sem(&cfg),
            SweepAxis::Sources,
            1,
            &[PolicyKind::MaxAosi, PolicyKind::Random],
        )
        .unwrap();
        assert_eq!(rows.len(), 5 * 2);
        assert!(rows
            .iter()
            .all(|r| r.config_fingerprint == cfg.fingerprint()));
    }

    #[test]
    fn checkpoint_restores_learner() {
        let cfg = tiny_run();
        let (learner, _) = train(PolicyKind::DqnJoint, &cfg, sem(&cfg), 11).unwrap();
        let ck = learner.checkpoint();
        let back = Learner::from_checkpoint(ck.clone(), &cfg.sim, &cfg.dqn, 0).unwrap();
        assert_eq!(back.agent.eval, learner.agent.eval);
        let mut other = cfg.clone();
        other.sim.sources = 3;
        assert!(matches!(
            Learner::from_checkpoint(ck, &other.sim, &other.dqn, 0),
            Err(EngineError::CheckpointMismatch(_))
        ));
    }
}
