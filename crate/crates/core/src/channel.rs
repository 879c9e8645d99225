//! Quasi-static block fading and received SNR.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChannelError {
    #[error("transmit power must be > 0, got {0}")]
    Power(f64),
    #[error("noise variance must be > 0, got {0}")]
    Noise(f64),
}

/// Source of per-period power gains |h|².
pub trait GainSampler {
    fn draw_gain(&mut self) -> f64;
}

/// Rayleigh envelope: |h|² ~ Exp(1), independent across calls.
#[derive(Debug, Clone)]
pub struct RayleighSampler {
    rng: ChaCha8Rng,
}

impl RayleighSampler {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Self { rng }
    }
}

impl GainSampler for RayleighSampler {
    fn draw_gain(&mut self) -> f64 {
        self.rng.sample(Exp1)
    }
}

/// Received SNR (linear) for power `p`, gain `gain_sq` and noise variance.
pub fn snr(p: f64, gain_sq: f64, noise_var: f64) -> Result<f64, ChannelError> {
    if p.is_nan() || p <= 0.0 {
        return Err(ChannelError::Power(p));
    }
    if noise_var.is_nan() || noise_var <= 0.0 {
        return Err(ChannelError::Noise(noise_var));
    }
    Ok(p * gain_sq / noise_var)
}

/// Linear to dB. Zero maps to negative infinity.
pub fn to_db(linear: f64) -> f64 {
    if linear <= 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * linear.log10()
    }
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDraw {
    pub gain_sq: f64,
    pub snr: f64,
}

impl ChannelDraw {
    pub fn new(tx_power_w: f64, gain_sq: f64, noise_var: f64) -> Result<Self, ChannelError> {
        Ok(Self {
            gain_sq,
            snr: snr(tx_power_w, gain_sq, noise_var)?,
        })
    }

    pub fn snr_db(&self) -> f64 {
        to_db(self.snr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::stream;

    #[test]
    fn snr_examples() {
        assert_eq!(snr(0.1, 1.0, 0.01).unwrap(), 10.0);
        assert_eq!(snr(0.1, 0.0, 0.01).unwrap(), 0.0);
        assert!((snr(0.1, 2.5, 0.01).unwrap() - 25.0).abs() < 1e-12);
        assert!((to_db(10.0) - 10.0).abs() < 1e-12);
        assert_eq!(to_db(0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn snr_rejects_nonpositive() {
        assert_eq!(snr(0.0, 1.0, 0.01), Err(ChannelError::Power(0.0)));
        assert_eq!(snr(0.1, 1.0, 0.0), Err(ChannelError::Noise(0.0)));
        assert!(snr(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn snr_is_linear() {
        let base = snr(0.1, 1.7, 0.01).unwrap();
        assert!((snr(0.2, 1.7, 0.01).unwrap() - 2.0 * base).abs() < 1e-12);
        assert!((snr(0.1, 3.4, 0.01).unwrap() - 2.0 * base).abs() < 1e-12);
        assert!((snr(0.1, 1.7, 0.005).unwrap() - 2.0 * base).abs() < 1e-12);
    }

    #[test]
    fn exp1_mean_and_support() {
        let mut s = RayleighSampler::new(stream(11, "channel/0"));
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let g = s.draw_gain();
            assert!(g >= 0.0);
            sum += g;
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn fixed_seed_reproduces() {
        let mut a = RayleighSampler::new(stream(3, "channel/1"));
        let mut b = RayleighSampler::new(stream(3, "channel/1"));
        for _ in 0..100 {
            assert_eq!(a.draw_gain().to_bits(), b.draw_gain().to_bits());
        }
    }

    #[test]
    fn per_source_streams_are_independent_of_order() {
        // Drawing from source 1 first does not disturb source 0's sequence.
        let mut s0 = RayleighSampler::new(stream(5, "channel/0"));
        let mut s1 = RayleighSampler::new(stream(5, "channel/1"));
        let _ = (0..10).map(|_| s1.draw_gain()).count();
        let seq: Vec<f64> = (0..10).map(|_| s0.draw_gain()).collect();
        let mut fresh = RayleighSampler::new(stream(5, "channel/0"));
        let again: Vec<f64> = (0..10).map(|_| fresh.draw_gain()).collect();
        assert_eq!(seq, again);
    }
}
