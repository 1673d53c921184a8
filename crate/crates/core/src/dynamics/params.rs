use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{self, StreamKey};

/// Time-stepping parameters of a particle run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub sigma: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Sorted times in `[0, t_end]`, each a multiple of `dt`.
    pub save_times: Vec<f64>,
    pub seed: u64,
    /// Standard normals summed per Brownian increment. A run with step
    /// `dt` and refinement `2k` sees the same Brownian path as a run with
    /// step `dt/2` and refinement `k`.
    pub brownian_refinement: usize,
}

impl SimParams {
    /// Saves every `every` time units from 0 to `t_end`.
    pub fn with_regular_saves(sigma: f64, dt: f64, t_end: f64, every: f64, seed: u64) -> Result<Self> {
        if !(every > 0.0) {
            return Err(invalid("save interval", "must be positive"));
        }
        let count = (t_end / every + 1e-9).floor() as usize;
        let save_times = (0..=count).map(|k| k as f64 * every).collect();
        let p = Self { sigma, dt, t_end, save_times, seed, brownian_refinement: 1 };
        p.validate()?;
        Ok(p)
    }

    /// Same run at half the step with the Brownian path shared.
    pub fn halved(&self) -> Result<Self> {
        if self.brownian_refinement % 2 != 0 {
            return Err(invalid("brownian_refinement", "must be even to halve dt on the same path"));
        }
        let mut p = self.clone();
        p.dt *= 0.5;
        p.brownian_refinement /= 2;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(invalid("sigma", "must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(invalid("t_end", "must be finite and nonnegative"));
        }
        if self.brownian_refinement == 0 {
            return Err(invalid("brownian_refinement", "must be at least 1"));
        }
        self.steps()?;
        self.save_steps()?;
        Ok(())
    }

    fn as_step(&self, t: f64, what: &'static str) -> Result<usize> {
        let k = (t / self.dt).round();
        if (k * self.dt - t).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(invalid(what, format!("{t} is not a multiple of dt = {}", self.dt)));
        }
        Ok(k as usize)
    }

    pub fn steps(&self) -> Result<usize> {
        self.as_step(self.t_end, "t_end")
    }

    pub fn save_steps(&self) -> Result<Vec<usize>> {
        let end = self.steps()?;
        let mut out: Vec<usize> = Vec::with_capacity(self.save_times.len());
        for &t in &self.save_times {
            let k = self.as_step(t, "save_times")?;
            if k > end || t < 0.0 {
                return Err(invalid("save_times", format!("{t} outside [0, t_end]")));
            }
            if out.last().is_some_and(|&prev| prev >= k) {
                return Err(invalid("save_times", "must be strictly increasing"));
            }
            out.push(k);
        }
        Ok(out)
    }
}

/// One Gaussian stream per particle identity.
#[derive(Debug, Clone)]
pub struct NoiseStreams {
    streams: Vec<ChaCha8Rng>,
    dim: usize,
    refinement: usize,
    buffer: Vec<f64>,
}

impl NoiseStreams {
    pub fn new(seed: u64, replica: u64, n: usize, dim: usize, refinement: usize) -> Self {
        Self::with_offset(seed, replica, 0, n, dim, refinement)
    }

    /// Particles use stream ids `offset..offset + n` of the noise substream.
    pub fn with_offset(seed: u64, replica: u64, offset: u64, n: usize, dim: usize, refinement: usize) -> Self {
        let key = StreamKey::with_replica(seed, rng::NOISE, replica);
        let streams = (0..n as u64).map(|i| key.particle(offset + i)).collect();
        Self { streams, dim, refinement: refinement.max(1), buffer: vec![0.0; dim] }
    }

    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    /// Writes `√dt · ξ` with `ξ ~ N(0, I)` for every particle, row-major.
    pub fn fill(&mut self, dt: f64, out: &mut [f64]) {
        let k = self.refinement;
        let scale = (dt / k as f64).sqrt();
        for (rng, row) in self.streams.iter_mut().zip(out.chunks_exact_mut(self.dim)) {
            self.buffer.fill(0.0);
            for _ in 0..k {
                for b in self.buffer.iter_mut() {
                    *b += rng.sample::<f64, _>(StandardNormal);
                }
            }
            for (o, b) in row.iter_mut().zip(&self.buffer) {
                *o = scale * b;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refinement_shares_the_path() {
        let mut coarse = NoiseStreams::new(1, 0, 3, 2, 2);
        let mut fine = NoiseStreams::new(1, 0, 3, 2, 1);
        let mut c = vec![0.0; 6];
        let (mut f1, mut f2) = (vec![0.0; 6], vec![0.0; 6]);
        coarse.fill(0.02, &mut c);
        fine.fill(0.01, &mut f1);
        fine.fill(0.01, &mut f2);
        for k in 0..6 {
            assert!((c[k] - (f1[k] + f2[k])).abs() < 1e-15);
        }
    }

    #[test]
    fn save_times_must_align() {
        let mut p = SimParams::with_regular_saves(1.0, 0.01, 1.0, 0.1, 0).unwrap();
        assert_eq!(p.save_steps().unwrap()[3], 30);
        p.save_times.push(0.995);
        assert!(p.validate().is_err());
        p.save_times = vec![0.5, 0.2];
        assert!(p.validate().is_err());
        assert!(SimParams::with_regular_saves(1.0, 0.01, 1.0, 0.1, 0).unwrap().halved().is_err());
    }
}
