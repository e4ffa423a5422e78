//! Deterministic random sub-streams.
//!
//! Every consumer of randomness draws from its own ChaCha8 stream, keyed by
//! the root seed, a purpose tag, and an index (agent id, run index). Adding a
//! consumer never shifts the values another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Stream {
    /// Bearing noise, indexed by agent.
    MeasurementNoise = 1,
    /// Message drop decisions, indexed by receiving agent.
    Drops = 2,
    /// Monte Carlo parameter draws, indexed by run and agent.
    MonteCarlo = 3,
    /// Per-run simulation seeds, indexed by run.
    RunSeed = 4,
    /// Random prior pairs for the counterexample search, indexed by trial.
    Counterexample = 5,
}

const INDEX_BITS: u32 = 56;

/// Independent generator for `(seed, stream, index)`. `index` must fit in 56 bits.
pub fn substream(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    debug_assert!(index < 1 << INDEX_BITS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << INDEX_BITS) | (index & ((1 << INDEX_BITS) - 1)));
    rng
}

/// Index for per-agent streams inside a run.
pub fn run_agent_index(run: u64, agent: usize) -> u64 {
    (run << 16) | agent as u64
}

/// FNV-1a style running checksum over drawn values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Checksum(u64);

impl Default for Checksum {
    fn default() -> Self {
        Checksum(0xcbf2_9ce4_8422_2325)
    }
}

impl Checksum {
    pub fn push(&mut self, value: f64) {
        for byte in value.to_bits().to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn value(&self) -> u64 {
        self.0
    }
}
