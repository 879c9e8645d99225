//! Slotted simulation of the multi-source status-update system.
//!
//! Each period `n` starts at `t_n`: every source may generate a packet (its
//! buffer keeps only the freshest one), every uplink channel is redrawn, and
//! the controller observes the resulting state. [`Simulator::execute`] then
//! applies one action, accounts the AoSI area of every source for the period
//! and moves to the next period.

pub mod results;
pub mod runner;

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::age::{self, AgeError, PeriodAreas, Reception, SourceServerView};
use crate::channel::{ChannelDraw, ChannelError, GainSampler, RayleighSampler};
use crate::config::{stream, SimConfig, StateNorm};
use crate::policy::{Action, ActionSpace, PolicyError};
use crate::semantics::{SemanticLink, Semantics, SemanticsError};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Age(#[from] AgeError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Checkpoint(#[from] crate::dqn::checkpoint::CheckpointError),
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
    #[error("script shape: {0}")]
    Script(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub gen_time_s: f64,
    pub gen_index: u64,
}

/// Transmit buffer of one source: holds only the freshest packet.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourceBuffer {
    pub packet: Option<Packet>,
    next_index: u64,
}

impl SourceBuffer {
    /// Replaces the cached packet with one generated at `now`.
    pub fn generate(&mut self, now: f64) {
        self.packet = Some(Packet {
            gen_time_s: now,
            gen_index: self.next_index,
        });
        self.next_index += 1;
    }

    pub fn generated(&self) -> u64 {
        self.next_index
    }
}

/// Where generation flags and channel gains come from.
#[derive(Debug, Clone)]
enum Exogenous {
    Random {
        generation: Vec<ChaCha8Rng>,
        channels: Vec<RayleighSampler>,
        noise: Vec<ChaCha8Rng>,
    },
    /// `gains[n][m]`, `generations[n][m]`; zero gain and no generation
    /// past the end of the script.
    Scripted {
        gains: Vec<Vec<f64>>,
        generations: Vec<Vec<bool>>,
    },
}

/// Everything that happened in one period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodOutcome {
    pub period: usize,
    pub action: Action,
    pub draws: Vec<ChannelDraw>,
    /// Present when a scheduled source had a packet to send.
    pub link: Option<SemanticLink>,
    pub success: bool,
    pub areas: Vec<PeriodAreas>,
    pub averages: Vec<f64>,
    pub reward: f64,
}

impl PeriodOutcome {
    pub fn latency_s(&self) -> Option<f64> {
        self.link.map(|l| l.latency_s)
    }
}

#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: Arc<SimConfig>,
    semantics: Arc<Semantics>,
    space: ActionSpace,
    now: f64,
    period: usize,
    views: Vec<SourceServerView>,
    buffers: Vec<SourceBuffer>,
    draws: Vec<ChannelDraw>,
    similarity_noise: Vec<f64>,
    exogenous: Exogenous,
}

impl Simulator {
    /// Episode driven by random streams derived from `episode_seed`.
    pub fn new(cfg: Arc<SimConfig>, semantics: Arc<Semantics>, episode_seed: u64) -> Self {
        let m = cfg.sources;
        let exogenous = Exogenous::Random {
            generation: (0..m)
                .map(|i| stream(episode_seed, &format!("gen/{i}")))
                .collect(),
            channels: (0..m)
                .map(|i| RayleighSampler::new(stream(episode_seed, &format!("channel/{i}"))))
                .collect(),
            noise: (0..m)
                .map(|i| stream(episode_seed, &format!("noise/{i}")))
                .collect(),
        };
        Self::with_exogenous(cfg, semantics, exogenous)
    }

    /// Episode with fixed gains and generation flags, indexed `[period][source]`.
    pub fn scripted(
        cfg: Arc<SimConfig>,
        semantics: Arc<Semantics>,
        gains: Vec<Vec<f64>>,
        generations: Vec<Vec<bool>>,
    ) -> Result<Self, EngineError> {
        let m = cfg.sources;
        if gains.iter().any(|r| r.len() != m) || generations.iter().any(|r| r.len() != m) {
            return Err(EngineError::Script(format!("every row needs {m} entries")));
        }
        if gains.iter().flatten().any(|g| g.is_nan() || *g < 0.0) {
            return Err(EngineError::Script("gains must be >= 0".into()));
        }
        Ok(Self::with_exogenous(
            cfg,
            semantics,
            Exogenous::Scripted { gains, generations },
        ))
    }

    fn with_exogenous(
        cfg: Arc<SimConfig>,
        semantics: Arc<Semantics>,
        exogenous: Exogenous,
    ) -> Self {
        let m = cfg.sources;
        let mut sim = Self {
            space: ActionSpace::new(m, cfg.max_symbols_per_word),
            views: vec![SourceServerView::initial(cfg.initial_importance); m],
            buffers: vec![SourceBuffer::default(); m],
            draws: Vec::with_capacity(m),
            similarity_noise: vec![0.0; m],
            now: 0.0,
            period: 0,
            cfg,
            semantics,
            exogenous,
        };
        sim.begin_period();
        sim
    }

    fn begin_period(&mut self) {
        let m = self.cfg.sources;
        let cfg = &self.cfg;
        let (flags, gains): (Vec<bool>, Vec<f64>) = match &mut self.exogenous {
            Exogenous::Random {
                generation,
                channels,
                noise,
            } => {
                let flags = (0..m)
                    .map(|i| generation[i].random::<f64>() < cfg.gen_prob.get(i))
                    .collect();
                let gains = channels.iter_mut().map(|c| c.draw_gain()).collect();
                for (slot, rng) in self.similarity_noise.iter_mut().zip(noise.iter_mut()) {
                    let z: f64 = rng.sample(StandardNormal);
                    *slot = z * cfg.similarity_noise_std;
                }
                (flags, gains)
            }
            Exogenous::Scripted { gains, generations } => {
                let n = self.period;
                (
                    generations
                        .get(n)
                        .cloned()
                        .unwrap_or_else(|| vec![false; m]),
                    gains.get(n).cloned().unwrap_or_else(|| vec![0.0; m]),
                )
            }
        };
        for (i, gen) in flags.into_iter().enumerate() {
            if gen {
                self.buffers[i].generate(self.now);
            }
        }
        self.draws = gains
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                ChannelDraw::new(cfg.tx_power_w.get(i), g, cfg.noise_var)
                    .expect("validated config has positive power and noise")
            })
            .collect();
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn semantics(&self) -> &Semantics {
        &self.semantics
    }

    pub fn action_space(&self) -> ActionSpace {
        self.space
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn views(&self) -> &[SourceServerView] {
        &self.views
    }

    pub fn buffers(&self) -> &[SourceBuffer] {
        &self.buffers
    }

    pub fn draws(&self) -> &[ChannelDraw] {
        &self.draws
    }

    /// Sources holding a packet this period.
    pub fn eligible(&self) -> Vec<bool> {
        self.buffers.iter().map(|b| b.packet.is_some()).collect()
    }

    /// Similarity the scheduled source would achieve with `k` symbols per word.
    pub fn realized_similarity(&self, source: usize, k: u32) -> Result<f64, SemanticsError> {
        let xi = self.semantics.similarity(k, self.draws[source].snr)?;
        let noise = self.similarity_noise[source];
        Ok(if noise == 0.0 || xi == 0.0 {
            xi
        } else {
            (xi + noise).clamp(0.0, 1.0)
        })
    }

    /// Runs one period under `action` and advances to the next period.
    pub fn execute(&mut self, action: Action) -> Result<PeriodOutcome, EngineError> {
        self.space.validate(action)?;
        let tau = self.cfg.tau();
        let m = self.cfg.sources;
        let mut link = None;
        let mut delivery: Option<(usize, Reception, SemanticLink)> = None;
        if let Action::Schedule {
            source,
            symbols_per_word,
        } = action
        {
            if let Some(packet) = self.buffers[source].packet {
                let xi = self.realized_similarity(source, symbols_per_word)?;
                let l = self.semantics.link_with_similarity(
                    self.cfg.sentences_per_packet.get(source),
                    symbols_per_word,
                    xi,
                );
                link = Some(l);
                if l.latency_s <= tau {
                    let rx = Reception {
                        gen_time_s: packet.gen_time_s,
                        gen_index: packet.gen_index,
                        similarity: xi,
                    };
                    delivery = Some((source, rx, l));
                }
            }
        }

        let mut areas = Vec::with_capacity(m);
        let mut averages = Vec::with_capacity(m);
        let mut next_views = Vec::with_capacity(m);
        for (i, view) in self.views.iter().enumerate() {
            let received = delivery.filter(|d| d.0 == i);
            let a = match received {
                Some((_, rx, l)) => view.success_areas(
                    l.latency_s,
                    tau,
                    rx.similarity,
                    rx.gen_time_s,
                    rx.gen_index,
                )?,
                None => view.failure_areas(tau),
            };
            averages.push(age::period_average(&a, tau, received.is_some()));
            areas.push(a);
            next_views.push(view.advance(tau, received.map(|d| d.1))?);
        }
        let reward = -averages.iter().sum::<f64>() / m as f64;
        let outcome = PeriodOutcome {
            period: self.period,
            action,
            draws: self.draws.clone(),
            link,
            success: delivery.is_some(),
            areas,
            averages,
            reward,
        };
        self.views = next_views;
        self.now += tau;
        self.period += 1;
        self.begin_period();
        Ok(outcome)
    }
}

fn scale_age(value: f64, tau: f64, norm: &StateNorm) -> f64 {
    (value / (norm.age_scale_periods * tau)).clamp(0.0, norm.age_clip)
}

fn scale_snr(snr_linear: f64, norm: &StateNorm) -> f64 {
    let db = crate::channel::to_db(snr_linear);
    (db / norm.snr_db_scale).clamp(norm.snr_clip_lo, norm.snr_clip_hi)
}

/// Observation vector `[AoSI_1..M, AoI_1..M, SNR_1..M]`, normalized.
pub fn build_state(
    views: &[SourceServerView],
    draws: &[ChannelDraw],
    tau: f64,
    norm: &StateNorm,
) -> Vec<f64> {
    let mut s = Vec::with_capacity(3 * views.len());
    s.extend(
        views
            .iter()
            .map(|v| scale_age(v.aosi_at_period_start(), tau, norm)),
    );
    s.extend(
        views
            .iter()
            .map(|v| scale_age(v.aoi_at_period_start_s, tau, norm)),
    );
    s.extend(draws.iter().map(|d| scale_snr(d.snr, norm)));
    s
}

/// Raw (AoSI, AoI, linear SNR) recovered from a state built by [`build_state`].
/// Exact only for entries that were not clipped.
pub fn denormalize_state(
    state: &[f64],
    sources: usize,
    tau: f64,
    norm: &StateNorm,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let age = |v: f64| v * norm.age_scale_periods * tau;
    let aosi = state[..sources].iter().map(|&v| age(v)).collect();
    let aoi = state[sources..2 * sources]
        .iter()
        .map(|&v| age(v))
        .collect();
    let snr = state[2 * sources..3 * sources]
        .iter()
        .map(|&v| crate::channel::from_db(v * norm.snr_db_scale))
        .collect();
    (aosi, aoi, snr)
}

/// Joint state plus the scheduled source's own three features (zeros when idle).
pub fn build_ra_state(
    views: &[SourceServerView],
    draws: &[ChannelDraw],
    scheduled: Option<usize>,
    tau: f64,
    norm: &StateNorm,
) -> Vec<f64> {
    let m = views.len();
    let mut s = build_state(views, draws, tau, norm);
    match scheduled {
        Some(i) => {
            let (a, b, c) = (s[i], s[m + i], s[2 * m + i]);
            s.extend([a, b, c]);
        }
        None => s.extend([0.0; 3]),
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Action;

    fn setup(cfg: SimConfig) -> (Arc<SimConfig>, Arc<Semantics>) {
        let sem = Semantics::from_config(&cfg).unwrap();
        (Arc::new(cfg), Arc::new(sem))
    }

    #[test]
    fn generation_extremes_and_rate() {
        let (cfg, sem) = setup(SimConfig {
            sources: 2,
            gen_prob: crate::config::PerSource::Each(vec![1.0, 0.0]),
            ..SimConfig::default()
        });
        let mut sim = Simulator::new(cfg, sem, 1);
        for _ in 0..20 {
            let now = sim.now();
            assert_eq!(sim.buffers()[0].packet.unwrap().gen_time_s, now);
            assert!(sim.buffers()[1].packet.is_none());
            sim.execute(Action::Idle).unwrap();
        }

        let (cfg, sem) = setup(SimConfig {
            sources: 1,
            ..SimConfig::default()
        });
        let mut sim = Simulator::new(cfg, sem, 2);
        let n = 100_000;
        for _ in 1..n {
            sim.execute(Action::Idle).unwrap();
        }
        let rate = sim.buffers()[0].generated() as f64 / n as f64;
        assert!((rate - 0.8).abs() < 0.01, "{rate}");
    }

    #[test]
    fn state_layout_and_initial_values() {
        let (cfg, sem) = setup(SimConfig {
            sources: 2,
            ..SimConfig::default()
        });
        let sim = Simulator::new(cfg, sem, 3);
        let s = build_state(sim.views(), sim.draws(), 0.1, &StateNorm::default());
        assert_eq!(s.len(), 6);
        assert_eq!(&s[..4], &[0.0; 4]);
        let expected = crate::channel::to_db(sim.draws()[1].snr) / 30.0;
        assert_eq!(s[5], expected.clamp(-1.0, 2.0));
        let ra = build_ra_state(
            sim.views(),
            sim.draws(),
            Some(1),
            0.1,
            &StateNorm::default(),
        );
        assert_eq!(ra.len(), 9);
        assert_eq!(&ra[6..], &[s[1], s[3], s[5]]);
    }

    #[test]
    fn state_denormalizes_within_clip() {
        let norm = StateNorm::default();
        let views = vec![
            SourceServerView {
                aoi_at_period_start_s: 0.7,
                importance: 0.3,
                ..SourceServerView::initial(0.3)
            },
            SourceServerView {
                aoi_at_period_start_s: 9.0,
                importance: 0.5,
                ..SourceServerView::initial(0.5)
            },
        ];
        let draws = vec![
            ChannelDraw::new(0.1, 1.3, 0.01).unwrap(),
            ChannelDraw::new(0.1, 1e-6, 0.01).unwrap(),
        ];
        let s = build_state(&views, &draws, 0.1, &norm);
        let (aosi, aoi, snr) = denormalize_state(&s, 2, 0.1, &norm);
        assert!((aosi[0] - 0.21).abs() < 1e-12);
        assert!((aoi[0] - 0.7).abs() < 1e-12);
        assert!((snr[0] - 13.0).abs() < 1e-9);
        // Clipped: AoI 9 s > 4 * 10 * 0.1; SNR -40 dB < -30 dB.
        assert!((aoi[1] - 4.0).abs() < 1e-12);
        assert!((snr[1] - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn worked_single_source_success() {
        // gain chosen so that k = 1 gives similarity 0.9 under a flat table.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("xi.csv");
        std::fs::write(&path, "k,-100,100\n1,0.9,0.9\n").unwrap();
        let (cfg, sem) = setup(SimConfig {
            sources: 1,
            max_symbols_per_word: 1,
            gen_prob: crate::config::PerSource::Uniform(1.0),
            similarity_model: crate::config::SimilaritySpec::Table { path },
            ..SimConfig::default()
        });
        let mut sim = Simulator::scripted(cfg, sem, vec![vec![1.0]], vec![vec![true]]).unwrap();
        let out = sim
            .execute(Action::Schedule {
                source: 0,
                symbols_per_word: 1,
            })
            .unwrap();
        assert!(out.success);
        assert!((out.latency_s().unwrap() - 1.0 / 30.0).abs() < 1e-15);
        assert!((out.averages[0] - 0.01).abs() < 1e-15);
        assert!((out.reward + 0.01).abs() < 1e-15);
        assert!((sim.views()[0].aoi_at_period_start_s - 0.1).abs() < 1e-15);
    }

    #[test]
    fn idle_and_empty_buffer_match() {
        let (cfg, sem) = setup(SimConfig {
            sources: 2,
            ..SimConfig::default()
        });
        let gains = vec![vec![1.0, 1.0]; 3];
        let gens = vec![vec![false, true]; 3];
        let mut a =
            Simulator::scripted(cfg.clone(), sem.clone(), gains.clone(), gens.clone()).unwrap();
        let mut b = Simulator::scripted(cfg, sem, gains, gens).unwrap();
        let oa = a.execute(Action::Idle).unwrap();
        let ob = b
            .execute(Action::Schedule {
                source: 0,
                symbols_per_word: 2,
            })
            .unwrap();
        assert!(!oa.success && !ob.success);
        assert_eq!(oa.areas, ob.areas);
        assert_eq!(oa.reward, ob.reward);
        assert_eq!(a.views(), b.views());
    }

    #[test]
    fn malformed_action_rejected() {
        let (cfg, sem) = setup(SimConfig::default());
        let mut sim = Simulator::new(cfg, sem, 4);
        assert!(sim
            .execute(Action::Schedule {
                source: 7,
                symbols_per_word: 1
            })
            .is_err());
        assert!(sim
            .execute(Action::Schedule {
                source: 0,
                symbols_per_word: 9
            })
            .is_err());
    }
}
