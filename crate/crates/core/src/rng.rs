//! Counter-based random streams.
//!
//! A stream is identified by `(seed, label)` and an index; the generator for a
//! given triple never depends on how many other streams were consumed before
//! it, which keeps every estimator independent of the worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamId {
    pub seed: u64,
    pub label: String,
}

impl StreamId {
    pub fn new(seed: u64, label: impl Into<String>) -> Self {
        Self { seed, label: label.into() }
    }

    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        stream(self.seed, &self.label, index)
    }

    pub fn factory(&self) -> StreamFactory {
        StreamFactory { base: stream(self.seed, &self.label, 0) }
    }

    /// A child stream whose label extends this one.
    pub fn child(&self, suffix: &str) -> Self {
        Self { seed: self.seed, label: format!("{}/{}", self.label, suffix) }
    }
}

/// Hashes the key once and hands out per-index generators.
#[derive(Clone, Debug)]
pub struct StreamFactory {
    base: ChaCha8Rng,
}

impl StreamFactory {
    pub fn new(seed: u64, label: &str) -> Self {
        Self { base: stream(seed, label, 0) }
    }

    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut r = self.base.clone();
        r.set_stream(index);
        r.set_word_pos(0);
        r
    }
}

pub fn stream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    let key: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let mut g = gaussian_vec(rng, n);
        let norm = crate::linalg::norm(&g);
        if norm > 1e-300 {
            g.iter_mut().for_each(|x| *x /= norm);
            return g;
        }
    }
}

/// Uniform point in the ball of the given radius.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, n: usize, radius: f64) -> Vec<f64> {
    let mut u = unit_vector(rng, n);
    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
    u.iter_mut().for_each(|x| *x *= r);
    u
}
