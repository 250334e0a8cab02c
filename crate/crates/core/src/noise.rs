//! Complex Brownian driving noise with seed provenance and dyadic refinement.
//!
//! Increments are drawn as `sqrt(delta) * (Z1 + i Z2)` from a ChaCha8 stream
//! keyed by the seed, then snapped to a fixed binary grid of spacing 2^-44.
//! The snapping makes bridge refinement exact in floating point: the second
//! child is computed as `parent - first_child`, and both children stay on the
//! grid, so child pairs always sum to the parent bit for bit.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const GRID: f64 = 17_592_186_044_416.0; // 2^44

#[inline]
fn snap(x: f64) -> f64 {
    (x * GRID).round() / GRID
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Lazily generated increments of step `delta` for one seed.
///
/// The `j`-th value equals `generate_noise(seed, n * delta, n).increments[j]`
/// for every `n > j`, so integrators can stop early without materialising the
/// whole path.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    scale: f64,
    mirrored: bool,
}

impl NoiseStream {
    pub fn new(seed: u64, delta: f64) -> Self {
        Self { rng: rng_for(seed, 0), scale: delta.sqrt(), mirrored: false }
    }

    /// Stream of the antithetic partner path `-conj(W)`.
    pub fn mirrored(seed: u64, delta: f64) -> Self {
        Self { mirrored: true, ..Self::new(seed, delta) }
    }

    #[inline]
    pub fn next_increment(&mut self) -> Complex64 {
        let a: f64 = self.rng.sample(StandardNormal);
        let b: f64 = self.rng.sample(StandardNormal);
        let re = snap(self.scale * a);
        let im = snap(self.scale * b);
        if self.mirrored {
            Complex64::new(-re, im)
        } else {
            Complex64::new(re, im)
        }
    }
}

impl Iterator for NoiseStream {
    type Item = Complex64;

    #[inline]
    fn next(&mut self) -> Option<Complex64> {
        Some(self.next_increment())
    }
}

/// A discretised complex Brownian path on a uniform grid of `[0, t_end]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisePath {
    pub seed: u64,
    pub t_end: f64,
    pub n_steps: usize,
    /// Number of bridge refinements applied since generation.
    pub level: u32,
    /// Whether the path is the antithetic partner `-conj(W)` of its seed.
    pub mirrored: bool,
    pub increments: Vec<Complex64>,
}

/// Draw `n_steps` increments over `[0, t_end]` from `seed`.
pub fn generate_noise(seed: u64, t_end: f64, n_steps: usize) -> Result<NoisePath> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(invalid(format!("t_end must be positive, got {t_end}")));
    }
    if n_steps == 0 {
        return Err(invalid("n_steps must be at least 1"));
    }
    let delta = t_end / n_steps as f64;
    let increments = NoiseStream::new(seed, delta).take(n_steps).collect();
    Ok(NoisePath { seed, t_end, n_steps, level: 0, mirrored: false, increments })
}

impl NoisePath {
    pub fn step(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        self.step() * j as f64
    }

    /// Split every increment into two by Brownian-bridge sampling. The first
    /// child is `parent/2 + N(0, h/2)` per component with `h` the new step;
    /// the second is the exact remainder.
    pub fn refine(&self) -> NoisePath {
        let h = self.step() / 2.0;
        let sd = (h / 2.0).sqrt();
        let mut rng = rng_for(self.seed, u64::from(self.level) + 1);
        let mut increments = Vec::with_capacity(2 * self.n_steps);
        for &p in &self.increments {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let c1 = Complex64::new(snap(p.re / 2.0 + sd * a), snap(p.im / 2.0 + sd * b));
            increments.push(c1);
            increments.push(p - c1);
        }
        NoisePath {
            seed: self.seed,
            t_end: self.t_end,
            n_steps: 2 * self.n_steps,
            level: self.level + 1,
            mirrored: self.mirrored,
            increments,
        }
    }

    /// Refine `times` times.
    pub fn refine_by(&self, times: u32) -> NoisePath {
        let mut p = self.clone();
        for _ in 0..times {
            p = p.refine();
        }
        p
    }

    /// Sum consecutive pairs, inverting one [`NoisePath::refine`].
    pub fn coarsen(&self) -> Result<NoisePath> {
        if !self.n_steps.is_multiple_of(2) || self.level == 0 {
            return Err(invalid("only refined paths with an even step count can be coarsened"));
        }
        let increments = self.increments.chunks_exact(2).map(|c| c[0] + c[1]).collect();
        Ok(NoisePath {
            seed: self.seed,
            t_end: self.t_end,
            n_steps: self.n_steps / 2,
            level: self.level - 1,
            mirrored: self.mirrored,
            increments,
        })
    }

    /// The antithetic partner `-conj(W)`: same law, negatively correlated
    /// real part.
    pub fn mirror(&self) -> NoisePath {
        NoisePath {
            mirrored: !self.mirrored,
            increments: self.increments.iter().map(|w| Complex64::new(-w.re, w.im)).collect(),
            ..self.clone()
        }
    }

    /// Leading `n` steps as a shorter path.
    pub fn truncate(&self, n: usize) -> Result<NoisePath> {
        if n == 0 || n > self.n_steps {
            return Err(invalid(format!("cannot truncate {} steps to {n}", self.n_steps)));
        }
        Ok(NoisePath {
            t_end: self.step() * n as f64,
            n_steps: n,
            increments: self.increments[..n].to_vec(),
            ..self.clone()
        })
    }
}
