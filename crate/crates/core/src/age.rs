//! Receiver-side AoI/AoSI bookkeeping and exact per-period areas.
//!
//! Within a period the AoSI of a source is piecewise linear: it grows with
//! slope `psi` (importance of the last received packet) and drops at the
//! delivery instant `d = t_n + T` when a new reconstruction arrives. The area
//! under it over `[t_n, t_n + tau]` splits into a transmission trapezoid `Q`
//! on `[t_n, d]` and a waiting trapezoid `S` on `[d, t_n + tau]`. `Q` uses the
//! AoI just before delivery, `S` the AoI just after it. A failed or absent
//! transmission contributes a single trapezoid over the whole period.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgeError {
    #[error("latency {latency} outside (0, {tau}]")]
    Latency { latency: f64, tau: f64 },
    #[error("similarity {0} outside [0, 1]")]
    Similarity(f64),
    #[error("packet generated at {gen_time} after period start {period_start}")]
    FutureGeneration { gen_time: f64, period_start: f64 },
    #[error("stale delivery: generated at {gen_time}, server already holds {held}")]
    Stale { gen_time: f64, held: f64 },
    #[error("long-term average of an empty sequence")]
    Empty,
}

/// What the server knows about one source at the start of a period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceServerView {
    pub period_start_s: f64,
    /// Generation time of the latest received packet; `None` before the
    /// first reception, in which case AoI counts from time zero.
    pub last_gen_time_s: Option<f64>,
    pub importance: f64,
    pub aoi_at_period_start_s: f64,
    pub latest_received_gen_index: Option<u64>,
}

/// A packet delivered during the current period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reception {
    pub gen_time_s: f64,
    pub gen_index: u64,
    pub similarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodAreas {
    pub q_area: f64,
    pub s_area: f64,
    pub received_gen_index: Option<u64>,
}

impl SourceServerView {
    pub fn initial(importance: f64) -> Self {
        Self {
            period_start_s: 0.0,
            last_gen_time_s: None,
            importance,
            aoi_at_period_start_s: 0.0,
            latest_received_gen_index: None,
        }
    }

    pub fn aosi_at_period_start(&self) -> f64 {
        self.aoi_at_period_start_s * self.importance
    }

    /// AoI at `t`, assuming nothing is received in `[t_n, t]`.
    pub fn aoi_at(&self, t: f64) -> f64 {
        self.aoi_at_period_start_s + (t - self.period_start_s)
    }

    /// AoSI at `t`, assuming nothing is received in `[t_n, t]`.
    pub fn aosi_at(&self, t: f64) -> f64 {
        self.aoi_at(t) * self.importance
    }

    /// Areas for a delivery after `latency` seconds (`0 < latency <= tau`).
    pub fn success_areas(
        &self,
        latency: f64,
        tau: f64,
        similarity: f64,
        gen_time_s: f64,
        gen_index: u64,
    ) -> Result<PeriodAreas, AgeError> {
        if !(latency > 0.0 && latency <= tau) {
            return Err(AgeError::Latency { latency, tau });
        }
        if !(0.0..=1.0).contains(&similarity) {
            return Err(AgeError::Similarity(similarity));
        }
        if gen_time_s > self.period_start_s {
            return Err(AgeError::FutureGeneration {
                gen_time: gen_time_s,
                period_start: self.period_start_s,
            });
        }
        let start = self.aoi_at_period_start_s;
        let q_area = 0.5 * latency * (start + (start + latency)) * self.importance;
        let waiting = tau - latency;
        let after = self.period_start_s + latency - gen_time_s;
        let s_area = 0.5 * waiting * (after + (after + waiting)) * (1.0 - similarity);
        Ok(PeriodAreas {
            q_area,
            s_area,
            received_gen_index: Some(gen_index),
        })
    }

    /// Area for a period without delivery (failed, unscheduled or idle).
    pub fn failure_areas(&self, tau: f64) -> PeriodAreas {
        let start = self.aoi_at_period_start_s;
        PeriodAreas {
            q_area: 0.5 * tau * (start + (start + tau)) * self.importance,
            s_area: 0.0,
            received_gen_index: None,
        }
    }

    /// View at the start of the next period.
    pub fn advance(&self, tau: f64, received: Option<Reception>) -> Result<Self, AgeError> {
        let next_start = self.period_start_s + tau;
        let Some(rx) = received else {
            return Ok(Self {
                period_start_s: next_start,
                aoi_at_period_start_s: self.aoi_at_period_start_s + tau,
                ..*self
            });
        };
        if let Some(held) = self.last_gen_time_s {
            if rx.gen_time_s < held {
                return Err(AgeError::Stale {
                    gen_time: rx.gen_time_s,
                    held,
                });
            }
        }
        if !(0.0..=1.0).contains(&rx.similarity) {
            return Err(AgeError::Similarity(rx.similarity));
        }
        Ok(Self {
            period_start_s: next_start,
            last_gen_time_s: Some(rx.gen_time_s),
            importance: 1.0 - rx.similarity,
            aoi_at_period_start_s: next_start - rx.gen_time_s,
            latest_received_gen_index: Some(rx.gen_index),
        })
    }
}

/// Time-average AoSI of one source over one period.
pub fn period_average(areas: &PeriodAreas, tau: f64, scheduled: bool) -> f64 {
    if scheduled {
        (areas.q_area + areas.s_area) / tau
    } else {
        areas.q_area / tau
    }
}

/// Mean over every (period, source) average.
pub fn long_term_average(per_period: &[Vec<f64>]) -> Result<f64, AgeError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for row in per_period {
        for &v in row {
            sum += v;
            count += 1;
        }
    }
    if count == 0 {
        return Err(AgeError::Empty);
    }
    Ok(sum / count as f64)
}

/// Streaming counterpart of [`long_term_average`].
#[derive(Debug, Clone, Copy, Default)]
pub struct AosiAccumulator {
    sum: f64,
    count: usize,
}

impl AosiAccumulator {
    pub fn push_period(&mut self, averages: &[f64]) {
        for &v in averages {
            self.sum += v;
            self.count += 1;
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}
