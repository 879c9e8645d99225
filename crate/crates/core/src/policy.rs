//! Actions, their integer encoding, and the rule-based schedulers.
//!
//! Joint action indices: `0` is idle, and scheduling source `m` (0-based)
//! with `k` symbols per word is `1 + m * K + (k - 1)`. The resource-allocation
//! space used by the separate baselines is just `k - 1`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::age::SourceServerView;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("action index {index} outside [0, {max}]")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("source {source_index} outside [0, {sources})")]
    SourceOutOfRange { source_index: usize, sources: usize },
    #[error("symbols per word {k} outside [1, {max}]")]
    SymbolsOutOfRange { k: u32, max: u32 },
    #[error("unknown policy {0:?} (expected random, round-robin, max-aoi, max-aosi or dqn-joint)")]
    UnknownPolicy(String),
}

/// One period's decision. At most one source is scheduled by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Idle,
    Schedule {
        source: usize,
        symbols_per_word: u32,
    },
}

impl Action {
    pub fn scheduled(&self) -> Option<usize> {
        match self {
            Action::Idle => None,
            Action::Schedule { source, .. } => Some(*source),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpace {
    pub sources: usize,
    pub max_symbols_per_word: u32,
}

impl ActionSpace {
    pub fn new(sources: usize, max_symbols_per_word: u32) -> Self {
        Self {
            sources,
            max_symbols_per_word,
        }
    }

    pub fn joint_len(&self) -> usize {
        self.sources * self.max_symbols_per_word as usize + 1
    }

    pub fn ra_len(&self) -> usize {
        self.max_symbols_per_word as usize
    }

    pub fn validate(&self, action: Action) -> Result<(), PolicyError> {
        if let Action::Schedule {
            source,
            symbols_per_word,
        } = action
        {
            if source >= self.sources {
                return Err(PolicyError::SourceOutOfRange {
                    source_index: source,
                    sources: self.sources,
                });
            }
            if symbols_per_word == 0 || symbols_per_word > self.max_symbols_per_word {
                return Err(PolicyError::SymbolsOutOfRange {
                    k: symbols_per_word,
                    max: self.max_symbols_per_word,
                });
            }
        }
        Ok(())
    }

    pub fn encode(&self, action: Action) -> Result<usize, PolicyError> {
        self.validate(action)?;
        Ok(match action {
            Action::Idle => 0,
            Action::Schedule {
                source,
                symbols_per_word,
            } => 1 + source * self.max_symbols_per_word as usize + (symbols_per_word as usize - 1),
        })
    }

    pub fn decode(&self, index: usize) -> Result<Action, PolicyError> {
        if index >= self.joint_len() {
            return Err(PolicyError::IndexOutOfRange {
                index,
                max: self.joint_len() - 1,
            });
        }
        if index == 0 {
            return Ok(Action::Idle);
        }
        let k = self.max_symbols_per_word as usize;
        Ok(Action::Schedule {
            source: (index - 1) / k,
            symbols_per_word: ((index - 1) % k + 1) as u32,
        })
    }

    pub fn decode_ra(&self, index: usize) -> Result<u32, PolicyError> {
        if index >= self.ra_len() {
            return Err(PolicyError::IndexOutOfRange {
                index,
                max: self.ra_len() - 1,
            });
        }
        Ok(index as u32 + 1)
    }
}

/// Policies selectable by name on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Random,
    RoundRobin,
    MaxAoi,
    MaxAosi,
    DqnJoint,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Random,
        PolicyKind::RoundRobin,
        PolicyKind::MaxAoi,
        PolicyKind::MaxAosi,
        PolicyKind::DqnJoint,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::RoundRobin => "round-robin",
            PolicyKind::MaxAoi => "max-aoi",
            PolicyKind::MaxAosi => "max-aosi",
            PolicyKind::DqnJoint => "dqn-joint",
        }
    }

    /// The rule-based scheduler of a separate baseline; `None` for the joint
    /// learner.
    pub fn scheduler(&self) -> Option<Scheduler> {
        match self {
            PolicyKind::Random => Some(Scheduler::Random),
            PolicyKind::RoundRobin => Some(Scheduler::RoundRobin { cursor: 0 }),
            PolicyKind::MaxAoi => Some(Scheduler::MaxAoi),
            PolicyKind::MaxAosi => Some(Scheduler::MaxAosi),
            PolicyKind::DqnJoint => None,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| PolicyError::UnknownPolicy(s.to_string()))
    }
}

/// Uniform pick among eligible sources; `None` when none is eligible.
pub fn schedule_random<R: Rng>(rng: &mut R, eligible: &[bool]) -> Option<usize> {
    let candidates: Vec<usize> = (0..eligible.len()).filter(|&m| eligible[m]).collect();
    if candidates.is_empty() {
        return None;
    }
    Some(candidates[rng.random_range(0..candidates.len())])
}

/// Next eligible source at or after `cursor`, and the cursor for the
/// following period. The cursor is unchanged when nobody is eligible.
pub fn schedule_round_robin(cursor: usize, eligible: &[bool]) -> (Option<usize>, usize) {
    let m = eligible.len();
    for step in 0..m {
        let s = (cursor + step) % m;
        if eligible[s] {
            return (Some(s), (s + 1) % m);
        }
    }
    (None, cursor)
}

fn argmax_eligible(values: impl Iterator<Item = f64>, eligible: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (m, v) in values.enumerate() {
        if !eligible[m] {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((m, v)),
        }
    }
    best.map(|(m, _)| m)
}

/// Eligible source with the largest AoI at period start; lowest index wins ties.
pub fn schedule_max_aoi(views: &[SourceServerView], eligible: &[bool]) -> Option<usize> {
    argmax_eligible(views.iter().map(|v| v.aoi_at_period_start_s), eligible)
}

/// Eligible source with the largest AoSI at period start; lowest index wins ties.
pub fn schedule_max_aosi(views: &[SourceServerView], eligible: &[bool]) -> Option<usize> {
    argmax_eligible(views.iter().map(|v| v.aosi_at_period_start()), eligible)
}

/// A rule-based source scheduler. Only sources with a packet are eligible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scheduler {
    Random,
    RoundRobin { cursor: usize },
    MaxAoi,
    MaxAosi,
}

impl Scheduler {
    pub fn pick<R: Rng>(
        &mut self,
        views: &[SourceServerView],
        eligible: &[bool],
        rng: &mut R,
    ) -> Option<usize> {
        match self {
            Scheduler::Random => schedule_random(rng, eligible),
            Scheduler::RoundRobin { cursor } => {
                let (pick, next) = schedule_round_robin(*cursor, eligible);
                *cursor = next;
                pick
            }
            Scheduler::MaxAoi => schedule_max_aoi(views, eligible),
            Scheduler::MaxAosi => schedule_max_aosi(views, eligible),
        }
    }

    pub fn reset(&mut self) {
        if let Scheduler::RoundRobin { cursor } = self {
            *cursor = 0;
        }
    }
}
