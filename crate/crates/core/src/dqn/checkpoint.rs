//! Binary checkpoint of a trained agent.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "AOSIDQN1"
//! tag_len      u32      length of the policy tag
//! tag          bytes    UTF-8 policy name
//! n_widths     u32
//! widths       u32 * n_widths      input, hidden..., output
//! train_steps  u64
//! adam_step    u64
//! adam_lr      f64
//! eval         f64 * P  per layer: weights (row-major, inputs x outputs) then biases
//! target       f64 * P
//! adam_first   f64 * P
//! adam_second  f64 * P
//! ```
//!
//! The replay buffer and random streams are not stored.

use std::io::{self, Read, Write};
use std::path::Path;

use super::{Adam, QNetwork};

const MAGIC: &[u8; 8] = b"AOSIDQN1";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    Magic,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub policy: String,
    pub eval: QNetwork,
    pub target: QNetwork,
    pub optimizer: Adam,
    pub train_steps: u64,
}

fn put_u32(w: &mut impl Write, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_u64(w: &mut impl Write, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64s(w: &mut impl Write, vs: &[f64]) -> io::Result<()> {
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get<const N: usize>(r: &mut impl Read) -> io::Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn get_f64s(r: &mut impl Read, n: usize) -> io::Result<Vec<f64>> {
    (0..n)
        .map(|_| get::<8>(r).map(f64::from_le_bytes))
        .collect()
}

impl Checkpoint {
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), CheckpointError> {
        w.write_all(MAGIC)?;
        put_u32(w, self.policy.len() as u32)?;
        w.write_all(self.policy.as_bytes())?;
        let widths = self.eval.widths();
        put_u32(w, widths.len() as u32)?;
        for x in widths {
            put_u32(w, x as u32)?;
        }
        put_u64(w, self.train_steps)?;
        put_u64(w, self.optimizer.step)?;
        w.write_all(&self.optimizer.lr.to_le_bytes())?;
        put_f64s(w, &self.eval.params())?;
        put_f64s(w, &self.target.params())?;
        put_f64s(w, &self.optimizer.first)?;
        put_f64s(w, &self.optimizer.second)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, CheckpointError> {
        if &get::<8>(r)? != MAGIC {
            return Err(CheckpointError::Magic);
        }
        let tag_len = u32::from_le_bytes(get(r)?) as usize;
        if tag_len > 256 {
            return Err(CheckpointError::Corrupt("policy tag too long"));
        }
        let mut tag = vec![0u8; tag_len];
        r.read_exact(&mut tag)?;
        let policy = String::from_utf8(tag).map_err(|_| CheckpointError::Corrupt("policy tag"))?;
        let n = u32::from_le_bytes(get(r)?) as usize;
        if !(2..=64).contains(&n) {
            return Err(CheckpointError::Corrupt("layer count"));
        }
        let widths: Vec<usize> = (0..n)
            .map(|_| get::<4>(r).map(|b| u32::from_le_bytes(b) as usize))
            .collect::<io::Result<_>>()?;
        if widths.iter().any(|&w| w == 0 || w > 1 << 20) {
            return Err(CheckpointError::Corrupt("layer width"));
        }
        let train_steps = u64::from_le_bytes(get(r)?);
        let adam_step = u64::from_le_bytes(get(r)?);
        let lr = f64::from_le_bytes(get(r)?);
        let mut eval = QNetwork::zeros(&widths);
        let p = eval.param_count();
        eval.set_params(&get_f64s(r, p)?);
        let mut target = QNetwork::zeros(&widths);
        target.set_params(&get_f64s(r, p)?);
        let mut optimizer = Adam::new(p, lr);
        optimizer.step = adam_step;
        optimizer.first = get_f64s(r, p)?;
        optimizer.second = get_f64s(r, p)?;
        Ok(Self {
            policy,
            eval,
            target,
            optimizer,
            train_steps,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        out
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path)?;
        Self::read_from(&mut bytes.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::stream;

    #[test]
    fn round_trip_is_bitwise() {
        let mut rng = stream(1, "ckpt");
        let eval = QNetwork::new(&[6, 4, 5, 3, 9], &mut rng);
        let target = QNetwork::new(&[6, 4, 5, 3, 9], &mut rng);
        let mut optimizer = Adam::new(eval.param_count(), 0.001);
        optimizer.step = 17;
        optimizer
            .first
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = i as f64 * 1e-3);
        optimizer
            .second
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = 1.0 / (1.0 + i as f64));
        let ck = Checkpoint {
            policy: "dqn-joint".into(),
            eval,
            target,
            optimizer,
            train_steps: 1234,
        };
        let bytes = ck.to_bytes();
        let back = Checkpoint::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(
            Checkpoint::read_from(&mut &b"NOTACKPTxxxx"[..]),
            Err(CheckpointError::Magic)
        ));
        let mut truncated = MAGIC.to_vec();
        truncated.extend_from_slice(&3u32.to_le_bytes());
        assert!(matches!(
            Checkpoint::read_from(&mut truncated.as_slice()),
            Err(CheckpointError::Io(_))
        ));
    }
}
