//! Counter-based pseudo-random number generation.
//!
//! Every source of randomness in the toolkit is a [`RandomStream`]: a
//! `(seed, stream_id, counter)` triple mapped to uniform variates in
//! `[0, 1)` by a stateless 64-bit mixing function. Identical triples
//! always produce identical draws, and independent substreams are
//! derived by re-keying the stream id rather than by handing state
//! from one consumer to another. That makes parallel Monte Carlo
//! reproducible for a fixed root seed regardless of scheduling.
//!
//! Not cryptographic; purely for simulation.

use crate::error::{Result, SimError};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Finalizer from splitmix64. A bijection on `u64` with good avalanche.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    z
}

/// Anything that can hand out uniform variates in `[0, 1)`.
///
/// Implemented by [`RandomStream`] for production use and by
/// [`ScriptedUniforms`] for deterministic hand-oracle tests that feed
/// prescribed `u` values into a sampler.
pub trait UniformSource {
    /// Next uniform variate in `[0, 1)`.
    fn next_uniform(&mut self) -> f64;

    /// Uniform variate on `[a, b)` via the linear map `a + (b-a) u`.
    fn uniform_on(&mut self, a: f64, b: f64) -> Result<f64> {
        if !(a < b) {
            return Err(SimError::InvalidParameter(format!(
                "uniform_on requires a < b, got a={a}, b={b}"
            )));
        }
        Ok(a + (b - a) * self.next_uniform())
    }
}

/// Seeded counter-based uniform stream.
///
/// Single-owner: a stream is not shareable between concurrent workers.
/// Parallel consumers each get their own stream via
/// [`RandomStream::spawn_substream`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    counter: u64,
    key: u64,
}

impl RandomStream {
    /// Stream for a root seed (stream id 0).
    pub fn new(seed: u64) -> Self {
        Self::with_stream_id(seed, 0)
    }

    /// Stream for an explicit `(seed, stream_id)` pair.
    pub fn with_stream_id(seed: u64, stream_id: u64) -> Self {
        let key = mix64(seed ^ mix64(stream_id.wrapping_mul(GOLDEN) ^ 0xd134_2543_de82_ef95));
        Self { seed, stream_id, counter: 0, key }
    }

    /// Raw 64-bit output for the current counter position.
    #[inline]
    fn next_u64(&mut self) -> u64 {
        let out = mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
        self.counter += 1;
        out
    }

    /// Derive an independent substream for `worker_index`.
    ///
    /// The child id is a hash of `(parent stream_id, worker_index)`, so
    /// the same call always yields the same substream and distinct
    /// worker indices yield streams with unrelated draw sequences.
    pub fn spawn_substream(&self, worker_index: u64) -> RandomStream {
        let child_id = mix64(
            self.stream_id
                .wrapping_mul(GOLDEN)
                .wrapping_add(mix64(worker_index ^ 0xa076_1d64_78bd_642f)),
        );
        RandomStream::with_stream_id(self.seed, child_id)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of draws consumed so far.
    pub fn draws(&self) -> u64 {
        self.counter
    }
}

impl UniformSource for RandomStream {
    #[inline]
    fn next_uniform(&mut self) -> f64 {
        // 53 high bits -> double in [0, 1).
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// A fixed list of uniforms, consumed in order. Panics when exhausted.
///
/// Used by tests that execute an algorithm by hand with prescribed
/// `u` values.
#[derive(Debug, Clone)]
pub struct ScriptedUniforms {
    values: Vec<f64>,
    next: usize,
}

impl ScriptedUniforms {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, next: 0 }
    }
}

impl UniformSource for ScriptedUniforms {
    fn next_uniform(&mut self) -> f64 {
        let u = self.values[self.next];
        self.next += 1;
        u
    }
}
