//! Replayable randomness.
//!
//! A [`NoiseStream`] is a counter-based source of `(x_t, y_t)` pairs: the
//! sample at time `t` is a pure function of the stream key and `t`, so two
//! chains that read the same time index see the same data without anything
//! being buffered. Each time index gets its own ChaCha8 stream (the 64-bit
//! nonce), keyed by a 64-bit lineage hash.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{ModelSpec, Sample};

/// Generator used for level draws, start-time draws and Bernoulli gates.
pub type ControlRng = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// What a derived stream is used for. Distinct roles never share randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    /// Driving noise of the tail-averaged chain.
    Chain,
    /// Driving noise of a debiasing draw.
    Debias,
    /// Second, independent debiasing draw (unbiased squared-bias estimator).
    DebiasTwin,
    /// Level, start-time and gate draws.
    Control,
    /// Per-replicate probe covariates used by the H-free estimators.
    Probe,
    /// Probe covariates shared by a whole batch.
    SharedProbe,
}

impl Role {
    fn code(self) -> u64 {
        match self {
            Role::Chain => 1,
            Role::Debias => 2,
            Role::DebiasTwin => 3,
            Role::Control => 4,
            Role::Probe => 5,
            Role::SharedProbe => 6,
        }
    }
}

/// Seed lineage `(master seed, estimator tag, k, replicate)`.
///
/// [`Lineage::key`] hashes the lineage together with a [`Role`] into the key
/// of an independent stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lineage {
    master: u64,
    tag: u64,
    k: u64,
    replicate: u64,
}

impl Lineage {
    pub fn new(master: u64) -> Self {
        Self { master, tag: 0, k: 0, replicate: 0 }
    }

    pub fn tagged(self, tag: &str) -> Self {
        Self { tag: fnv1a64(tag.as_bytes()), ..self }
    }

    pub fn with_k(self, k: u64) -> Self {
        Self { k, ..self }
    }

    pub fn replicate(self, index: u64) -> Self {
        Self { replicate: index, ..self }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn key(&self, role: Role) -> u64 {
        let mut h = mix64(self.master ^ 0x9E37_79B9_7F4A_7C15);
        for part in [self.tag, self.k, self.replicate, role.code()] {
            h = mix64(h ^ mix64(part.wrapping_add(0xD134_2543_DE82_EF95)));
        }
        h
    }

    pub fn noise(&self, role: Role) -> NoiseStream {
        NoiseStream::new(self.key(role))
    }

    pub fn control(&self) -> ControlRng {
        ControlRng::seed_from_u64(self.key(Role::Control))
    }

    /// Sequential generator for a role, for consumers that do not need
    /// random access (probe covariates).
    pub fn sequential(&self, role: Role) -> ControlRng {
        ControlRng::seed_from_u64(self.key(role))
    }
}

/// Maps a time index in ℤ onto a nonnegative stream position.
#[inline]
fn zigzag(t: i64) -> u64 {
    ((t << 1) ^ (t >> 63)) as u64
}

/// Replayable sample source indexed by integer time.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    key: u64,
    offset: i64,
    base: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(key: u64) -> Self {
        Self { key, offset: 0, base: ChaCha8Rng::seed_from_u64(key) }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// A view of the same noise whose time `t` reads this stream's `t + by`.
    pub fn shifted(&self, by: i64) -> Self {
        Self { key: self.key, offset: self.offset + by, base: self.base.clone() }
    }

    /// Fresh generator positioned at time `t`.
    #[inline]
    pub fn rng_at(&self, t: i64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(zigzag(t + self.offset));
        rng
    }

    /// Writes `x_t` into `x` and returns `y_t`.
    #[inline]
    pub fn fill(&self, model: &ModelSpec, t: i64, x: &mut [f64]) -> f64 {
        let mut rng = self.rng_at(t);
        model.fill_sample(&mut rng, x)
    }

    pub fn sample(&self, model: &ModelSpec, t: i64) -> Sample {
        let mut x = vec![0.0; model.dim()];
        let y = self.fill(model, t, &mut x);
        Sample { x, y }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn zigzag_is_injective_near_zero() {
        let mut seen: Vec<u64> = (-1000..1000).map(zigzag).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 2000);
        assert_eq!(zigzag(0), 0);
        assert_eq!(zigzag(-1), 1);
        assert_eq!(zigzag(1), 2);
    }

    #[test]
    fn same_time_same_bits() {
        let s = NoiseStream::new(42);
        let a = s.rng_at(-17).next_u64();
        let b = s.rng_at(-17).next_u64();
        assert_eq!(a, b);
        assert_ne!(a, s.rng_at(-18).next_u64());
    }

    #[test]
    fn shifted_view_reads_offset_times() {
        let s = NoiseStream::new(7);
        let v = s.shifted(-5);
        assert_eq!(v.rng_at(0).next_u64(), s.rng_at(-5).next_u64());
        assert_eq!(v.rng_at(4).next_u64(), s.rng_at(-1).next_u64());
    }

    #[test]
    fn roles_and_replicates_get_distinct_keys() {
        let l = Lineage::new(1).tagged("USGD").with_k(50);
        let mut keys = vec![];
        for r in 0..50 {
            for role in [Role::Chain, Role::Debias, Role::DebiasTwin, Role::Control, Role::Probe, Role::SharedProbe] {
                keys.push(l.replicate(r).key(role));
            }
        }
        let n = keys.len();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), n);
        assert_ne!(Lineage::new(1).tagged("AvSGD").key(Role::Chain), Lineage::new(1).tagged("USGD").key(Role::Chain));
    }
}
