use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::NumericError;

/// Purpose of a random stream. Each purpose maps to its own ChaCha stream
/// so that consuming draws for one never shifts another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamId {
    /// Per-step Bernoulli trials choosing SGD or SAM.
    Trial,
    /// Minibatch epoch permutations.
    Batch,
    /// Parameter initialization.
    Init,
    /// Objective construction and landscape probing (datasets, eigen start vectors).
    Landscape,
}

impl StreamId {
    fn word(self) -> u64 {
        match self {
            StreamId::Trial => 1,
            StreamId::Batch => 2,
            StreamId::Init => 3,
            StreamId::Landscape => 4,
        }
    }
}

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            StreamId::Trial => "trial",
            StreamId::Batch => "batch",
            StreamId::Init => "init",
            StreamId::Landscape => "landscape",
        };
        f.write_str(name)
    }
}

/// Deterministic random stream keyed by `(seed, stream_id)`.
///
/// ChaCha8 with the stream id in the cipher's stream word: the same key
/// yields the same sequence on every platform, and distinct ids never
/// overlap.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: StreamId,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: StreamId) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id.word());
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> StreamId {
        self.stream_id
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// One Bernoulli(p) trial. Always consumes exactly one uniform draw,
    /// including for `p = 0` and `p = 1`.
    pub fn bernoulli(&mut self, p: f64) -> Result<bool, NumericError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(NumericError::Domain(format!(
                "probability {p} outside [0, 1]"
            )));
        }
        Ok(self.uniform() < p)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }
}
