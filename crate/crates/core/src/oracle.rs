//! Independent checks: direct numerical integration of the AoSI curve, and
//! brute-force optimal action sequences on tiny scripted instances.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::age::{long_term_average, SourceServerView};
use crate::config::{stream, SimConfig};
use crate::engine::runner::Controller;
use crate::engine::{EngineError, Simulator};
use crate::policy::{Action, PolicyKind, Scheduler};
use crate::semantics::Semantics;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("instance too large for enumeration: {0}")]
    Bounds(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub const MAX_SOURCES: usize = 2;
pub const MAX_PERIODS: usize = 6;
pub const MAX_SYMBOLS: u32 = 2;

/// A scripted instance small enough to enumerate every action sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyInstance {
    pub sim: SimConfig,
    /// `gains[n][m]`
    pub gains: Vec<Vec<f64>>,
    /// `generations[n][m]`
    pub generations: Vec<Vec<bool>>,
}

impl TinyInstance {
    pub fn new(
        sim: SimConfig,
        gains: Vec<Vec<f64>>,
        generations: Vec<Vec<bool>>,
    ) -> Result<Self, OracleError> {
        if sim.sources > MAX_SOURCES {
            return Err(OracleError::Bounds(format!(
                "{} sources > {MAX_SOURCES}",
                sim.sources
            )));
        }
        if sim.max_symbols_per_word > MAX_SYMBOLS {
            return Err(OracleError::Bounds(format!(
                "K = {} > {MAX_SYMBOLS}",
                sim.max_symbols_per_word
            )));
        }
        if gains.is_empty() || gains.len() > MAX_PERIODS || generations.len() != gains.len() {
            return Err(OracleError::Bounds(format!(
                "need 1..={MAX_PERIODS} periods with matching gain and generation rows"
            )));
        }
        let m = sim.sources;
        if gains.iter().any(|r| r.len() != m) || generations.iter().any(|r| r.len() != m) {
            return Err(OracleError::Bounds(format!("rows must have {m} entries")));
        }
        Ok(Self {
            sim,
            gains,
            generations,
        })
    }

    /// Draws gains from Exp(1) and generation flags from `gen_prob`, then
    /// freezes them.
    pub fn sample(sim: &SimConfig, periods: usize, seed: u64) -> Result<Self, OracleError> {
        let mut rng = stream(seed, "oracle/instance");
        let m = sim.sources;
        let gains = (0..periods)
            .map(|_| (0..m).map(|_| rng.sample::<f64, _>(Exp1)).collect())
            .collect();
        let generations = (0..periods)
            .map(|_| {
                (0..m)
                    .map(|i| rng.random::<f64>() < sim.gen_prob.get(i))
                    .collect()
            })
            .collect();
        Self::new(sim.clone(), gains, generations)
    }

    pub fn periods(&self) -> usize {
        self.gains.len()
    }

    pub fn simulator(&self, semantics: Arc<Semantics>) -> Simulator {
        Simulator::scripted(
            Arc::new(self.sim.clone()),
            semantics,
            self.gains.clone(),
            self.generations.clone(),
        )
        .expect("validated instance shape")
    }

    /// The same instance with sources listed in `perm` order.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let reorder = |row: &Vec<f64>| perm.iter().map(|&i| row[i]).collect();
        Self {
            sim: self.sim.clone(),
            gains: self.gains.iter().map(reorder).collect(),
            generations: self
                .generations
                .iter()
                .map(|row| perm.iter().map(|&i| row[i]).collect())
                .collect(),
        }
    }
}

/// A delivery inside the period, as seen by the integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery {
    pub latency_s: f64,
    pub gen_time_s: f64,
    pub similarity: f64,
}

/// Composite trapezoidal integral of the AoSI trajectory over one period.
///
/// The trajectory is evaluated directly from its definition, AoI times the
/// importance of the latest reconstruction, on a uniform grid of
/// `grid_points` offsets with the delivery instant inserted. The jump at the
/// delivery is handled by integrating each side with its one-sided limit.
pub fn integrate_aosi(
    view: &SourceServerView,
    tau: f64,
    delivery: Option<Delivery>,
    grid_points: usize,
) -> f64 {
    assert!(grid_points >= 2);
    let before = |x: f64| (view.aoi_at_period_start_s + x) * view.importance;
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| tau * i as f64 / (grid_points - 1) as f64)
        .collect();
    let trapezoid = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| -> f64 {
        let mut xs = vec![lo];
        xs.extend(grid.iter().copied().filter(|&x| x > lo && x < hi));
        xs.push(hi);
        xs.windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (f(w[0]) + f(w[1])))
            .sum()
    };
    match delivery {
        None => trapezoid(0.0, tau, &before),
        Some(d) => {
            let since_gen = view.period_start_s - d.gen_time_s;
            let after = |x: f64| (since_gen + x) * (1.0 - d.similarity);
            trapezoid(0.0, d.latency_s, &before) + trapezoid(d.latency_s, tau, &after)
        }
    }
}

/// Replays a fixed action list, then idles.
#[derive(Debug, Clone)]
pub struct FixedSequence {
    actions: Vec<Action>,
    pos: usize,
}

impl FixedSequence {
    pub fn new(actions: Vec<Action>) -> Self {
        Self { actions, pos: 0 }
    }
}

impl Controller for FixedSequence {
    fn decide(&mut self, _sim: &Simulator) -> Action {
        let a = self.actions.get(self.pos).copied().unwrap_or(Action::Idle);
        self.pos += 1;
        a
    }
}

/// Largest `k` whose transmission would finish within the period at the
/// observed SNR; `1` when none would.
pub fn max_feasible_symbols(sim: &Simulator, source: usize) -> u32 {
    let cfg = sim.config();
    let sentences = cfg.sentences_per_packet.get(source);
    (1..=cfg.max_symbols_per_word)
        .rev()
        .find(|&k| {
            sim.realized_similarity(source, k)
                .map(|xi| {
                    sim.semantics()
                        .link_with_similarity(sentences, k, xi)
                        .latency_s
                        <= cfg.tau()
                })
                .unwrap_or(false)
        })
        .unwrap_or(1)
}

/// A rule-based scheduler paired with [`max_feasible_symbols`].
#[derive(Debug, Clone)]
pub struct RuleController {
    scheduler: Scheduler,
    rng: ChaCha8Rng,
}

impl RuleController {
    pub fn new(scheduler: Scheduler, seed: u64) -> Self {
        Self {
            scheduler,
            rng: stream(seed, "oracle/scheduler"),
        }
    }
}

impl Controller for RuleController {
    fn decide(&mut self, sim: &Simulator) -> Action {
        match self
            .scheduler
            .pick(sim.views(), &sim.eligible(), &mut self.rng)
        {
            None => Action::Idle,
            Some(source) => Action::Schedule {
                source,
                symbols_per_word: max_feasible_symbols(sim, source),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub actions: Vec<Action>,
    pub value: f64,
}

/// Long-term average AoSI of a controller on the instance.
pub fn evaluate(
    instance: &TinyInstance,
    semantics: Arc<Semantics>,
    controller: &mut dyn Controller,
) -> Result<f64, OracleError> {
    let mut sim = instance.simulator(semantics);
    let outcomes = crate::engine::runner::run_controller(&mut sim, controller, instance.periods())?;
    let rows: Vec<Vec<f64>> = outcomes.into_iter().map(|o| o.averages).collect();
    Ok(long_term_average(&rows).expect("at least one period"))
}

struct Search {
    best: Option<Optimum>,
    actions: Vec<Action>,
    rows: Vec<Vec<f64>>,
    periods: usize,
}

impl Search {
    fn visit(&mut self, sim: &Simulator) -> Result<(), OracleError> {
        if self.actions.len() == self.periods {
            let value = long_term_average(&self.rows).expect("at least one period");
            if self.best.as_ref().is_none_or(|b| value < b.value) {
                self.best = Some(Optimum {
                    actions: self.actions.clone(),
                    value,
                });
            }
            return Ok(());
        }
        let space = sim.action_space();
        for index in 0..space.joint_len() {
            let action = space.decode(index).expect("index in range");
            let mut next = sim.clone();
            let out = next.execute(action)?;
            self.actions.push(action);
            self.rows.push(out.averages);
            self.visit(&next)?;
            self.actions.pop();
            self.rows.pop();
        }
        Ok(())
    }
}

/// Minimum long-term average AoSI over every action sequence, found by
/// depth-first enumeration through the engine. Ties keep the
/// lexicographically first sequence of action indices.
pub fn exhaustive_optimum(
    instance: &TinyInstance,
    semantics: Arc<Semantics>,
) -> Result<Optimum, OracleError> {
    let mut search = Search {
        best: None,
        actions: Vec::new(),
        rows: Vec::new(),
        periods: instance.periods(),
    };
    search.visit(&instance.simulator(semantics))?;
    Ok(search.best.expect("nonempty action space"))
}

/// Controller value minus the optimum.
pub fn policy_gap(
    instance: &TinyInstance,
    semantics: Arc<Semantics>,
    controller: &mut dyn Controller,
    optimum: &Optimum,
) -> Result<f64, OracleError> {
    Ok(evaluate(instance, semantics, controller)? - optimum.value)
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyGap {
    pub policy: String,
    pub value: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub sources: usize,
    pub periods: usize,
    pub max_symbols_per_word: u32,
    pub tau: f64,
    pub gains: Vec<Vec<f64>>,
    pub generations: Vec<Vec<bool>>,
    pub optimum_value: f64,
    /// Joint action indices of the optimal sequence.
    pub optimum_actions: Vec<usize>,
    pub policies: Vec<PolicyGap>,
}

/// Optimum plus the gap of each rule-based baseline and of the replayed optimum.
pub fn oracle_report(
    instance: &TinyInstance,
    semantics: Arc<Semantics>,
    seed: u64,
) -> Result<OracleReport, OracleError> {
    let optimum = exhaustive_optimum(instance, semantics.clone())?;
    let mut policies = Vec::new();
    for kind in PolicyKind::ALL {
        let Some(scheduler) = kind.scheduler() else {
            continue;
        };
        let mut c = RuleController::new(scheduler, seed);
        let value = evaluate(instance, semantics.clone(), &mut c)?;
        policies.push(PolicyGap {
            policy: kind.name().to_string(),
            value,
            gap: value - optimum.value,
        });
    }
    let mut replay = FixedSequence::new(optimum.actions.clone());
    let value = evaluate(instance, semantics, &mut replay)?;
    policies.push(PolicyGap {
        policy: "optimum-replay".into(),
        value,
        gap: value - optimum.value,
    });
    let space =
        crate::policy::ActionSpace::new(instance.sim.sources, instance.sim.max_symbols_per_word);
    Ok(OracleReport {
        sources: instance.sim.sources,
        periods: instance.periods(),
        max_symbols_per_word: instance.sim.max_symbols_per_word,
        tau: instance.sim.tau(),
        gains: instance.gains.clone(),
        generations: instance.generations.clone(),
        optimum_value: optimum.value,
        optimum_actions: optimum
            .actions
            .iter()
            .map(|&a| space.encode(a).expect("optimum actions are valid"))
            .collect(),
        policies,
    })
}
