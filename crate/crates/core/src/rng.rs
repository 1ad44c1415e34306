//! Counter-based deterministic random streams.
//!
//! A [`Stream`] is a pure function of `(master seed, domain, coordinates,
//! position)`. Servers and the coordinator can therefore replay the same draw
//! for the same `(t, i, j, b)` without exchanging any state, and Monte Carlo
//! work split across threads produces identical numbers regardless of the
//! split.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Which party (or purpose) a stream belongs to. Each domain hashes to a
/// disjoint key space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    /// Shared by coordinator and all servers: activity coins and level draws.
    Public,
    /// Private to one server: the exponential scalings `e^{(b)}_i(j,t)`.
    Server,
    /// Coordinator-private: the MWU expert draw.
    Coordinator,
    /// Synthetic instance generation.
    Instance,
    /// Statistical verification.
    MonteCarlo,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Public => 0x5055_424C_4943_0001,
            Domain::Server => 0x5345_5256_4552_0002,
            Domain::Coordinator => 0x434F_4F52_4400_0003,
            Domain::Instance => 0x494E_5354_0000_0004,
            Domain::MonteCarlo => 0x4D43_0000_0000_0005,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stream {
    key: u64,
    counter: u64,
}

impl Stream {
    /// Stream keyed by a master seed, a domain and up to four coordinates
    /// (typically `t, i, j, b`; unused slots are zero).
    pub fn new(seed: u64, domain: Domain, coords: [u64; 4]) -> Self {
        let mut key = mix64(seed ^ domain.tag());
        for c in coords {
            key = mix64(key ^ mix64(c.wrapping_add(GOLDEN)));
        }
        Self { key, counter: 0 }
    }

    /// Child stream identified by `label`; the parent is not advanced.
    pub fn derive(&self, label: u64) -> Self {
        Self {
            key: mix64(self.key ^ mix64(label ^ 0x94D0_49BB_1331_11EB)),
            counter: 0,
        }
    }

    pub fn position(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform on the open interval `(0, 1)`. A zero draw is resampled; the
    /// 53-bit construction never yields 1.
    pub fn next_open01(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        loop {
            let u = (self.next_u64() >> 11) as f64 * SCALE;
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform on `[lo, hi)`.
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_open01()
    }
}

/// Derive a 64-bit seed from a parent seed and a label. Used to give every
/// run of a multi-seed experiment its own independent master seed.
pub fn derive_seed(parent: u64, label: &str, index: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &byte in label.as_bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    mix64(mix64(parent ^ h) ^ index.wrapping_mul(GOLDEN))
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
