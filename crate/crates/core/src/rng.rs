//! Counter-based random streams.
//!
//! Every random draw in the crate is addressed by a hierarchical key
//! `(seed, tag, tag, ...)` and, inside a stream, by a counter.  The keyed
//! generator is ChaCha8: a stream key selects the 256-bit ChaCha key and the
//! counter selects the word position, so draw `k` of a stream can be read
//! without generating draws `0..k`.  Results therefore do not depend on how
//! work is split across threads.
//!
//! Normals are produced by Box–Muller from exactly two 64-bit words, which
//! keeps the word position of draw `k` at `4k`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Domain tags used across modules, so distinct consumers never share a stream.
pub mod tags {
    pub const SAMPLE: u64 = 0x5341_4d50;
    pub const PARTICLES: u64 = 0x5041_5254;
    pub const MOLLIFIER: u64 = 0x4d4f_4c4c;
    pub const PROBES: u64 = 0x5052_4f42;
    pub const PLAYERS: u64 = 0x504c_4159;
    pub const CONTROLLED: u64 = 0x434f_4e54;
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hierarchical stream key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn root(seed: u64) -> Self {
        StreamKey(mix64(seed ^ 0x6d66_6c61_625f_7631))
    }

    pub fn child(self, tag: u64) -> Self {
        StreamKey(mix64(self.0.rotate_left(17) ^ mix64(tag.wrapping_add(0x9e37_79b9_7f4a_7c15))))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    fn chacha(self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        let mut s = self.0;
        for chunk in seed.chunks_mut(8) {
            s = mix64(s.wrapping_add(0x9e37_79b9_7f4a_7c15));
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }

    /// Sequential stream positioned at draw 0.
    pub fn stream(self) -> Stream {
        Stream { rng: self.chacha() }
    }

    /// Stream positioned at draw `index` (each draw is one normal or one
    /// uniform, occupying four 32-bit words).
    pub fn stream_at(self, index: u64) -> Stream {
        let mut rng = self.chacha();
        rng.set_word_pos(4 * index as u128);
        Stream { rng }
    }
}

/// A positioned stream; `uniform` and `normal` each consume one draw slot.
pub struct Stream {
    rng: ChaCha8Rng,
}

#[inline]
fn unit_open(bits: u64) -> f64 {
    // (0, 1]
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl Stream {
    /// Uniform on (0, 1].
    pub fn uniform(&mut self) -> f64 {
        let a = self.rng.next_u64();
        let _ = self.rng.next_u64();
        unit_open(a)
    }

    /// Standard normal via Box–Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = unit_open(self.rng.next_u64());
        let u2 = unit_open(self.rng.next_u64());
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Jump to draw `index`.
    pub fn seek(&mut self, index: u64) {
        self.rng.set_word_pos(4 * index as u128);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_access_matches_sequential() {
        let key = StreamKey::root(7).child(3).child(11);
        let mut seq = key.stream();
        let draws: Vec<f64> = (0..10).map(|_| seq.normal()).collect();
        for (k, d) in draws.iter().enumerate() {
            assert_eq!(key.stream_at(k as u64).normal().to_bits(), d.to_bits());
        }
        let mut s = key.stream();
        s.seek(5);
        assert_eq!(s.normal().to_bits(), draws[5].to_bits());
    }

    #[test]
    fn children_differ() {
        let r = StreamKey::root(1);
        assert_ne!(r.child(0), r.child(1));
        assert_ne!(r.child(0).child(1), r.child(1).child(0));
        assert_ne!(StreamKey::root(1), StreamKey::root(2));
    }

    #[test]
    fn normal_moments() {
        let mut s = StreamKey::root(42).stream();
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| s.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "{mean}");
        assert!((var - 1.0).abs() < 0.015, "{var}");
    }
}
