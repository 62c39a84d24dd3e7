//! Seedable random streams.
//!
//! A [`RandomStream`] wraps ChaCha8, which is counter based: a stream is
//! addressed by `(seed, stream id, word position)`, so substreams for blocks,
//! rows or realizations can be derived without sharing state between tasks.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::normal::inv_cdf_as241;

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent stream derived from `seed` and a list of integer tags
    /// (block index, realization index, iteration/row pair, ...).
    pub fn derive(seed: u64, tags: &[u64]) -> Self {
        let mut id = 0x6a09_e667_f3bc_c908u64;
        for &t in tags {
            id = splitmix64(id ^ splitmix64(t.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Stream 0 is reserved for `new`.
        rng.set_stream(id | 1);
        Self { seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Positions the stream so that the next draw is the `draw_index`-th
    /// 64-bit draw of this stream.
    pub fn seek(&mut self, draw_index: u64) {
        self.rng.set_word_pos(2 * draw_index as u128);
    }

    /// Uniform draw on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * TWO_POW_NEG_53
    }

    /// Standard normal draw by inversion; consumes exactly one uniform.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        inv_cdf_as241(self.uniform())
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.standard_normal();
        }
    }

    /// Access to the underlying generator for `rand_distr` samplers.
    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn sample_standard_normals(stream: &mut RandomStream, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    stream.fill_standard_normal(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_request() {
        assert!(sample_standard_normals(&mut RandomStream::new(1), 0).is_empty());
    }

    #[test]
    fn golden_sequence() {
        let mut s = RandomStream::new(2024);
        let got: Vec<u64> = (0..4).map(|_| s.uniform().to_bits()).collect();
        let mut again = RandomStream::new(2024);
        let twice: Vec<u64> = (0..4).map(|_| again.uniform().to_bits()).collect();
        assert_eq!(got, twice);
        // Frozen from the first release; a change here breaks every golden number.
        assert_eq!(got, GOLDEN_2024);
    }

    const GOLDEN_2024: [u64; 4] = [4595185519517776678, 4607024559313317230, 4604351605858725884, 4606352511099261762];

    #[test]
    fn moments_of_a_million_normals() {
        let mut s = RandomStream::new(7);
        let z = sample_standard_normals(&mut s, 1_000_000);
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 0.004, "mean {mean}");
        assert!((0.99..=1.01).contains(&var), "var {var}");
    }

    #[test]
    fn uniforms_are_open_interval() {
        let mut s = RandomStream::new(3);
        for _ in 0..100_000 {
            let u = s.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn seek_addresses_draws() {
        let mut a = RandomStream::new(11);
        let seq: Vec<f64> = (0..10).map(|_| a.standard_normal()).collect();
        let mut b = RandomStream::new(11);
        b.seek(6);
        assert_eq!(b.standard_normal(), seq[6]);
        b.seek(2);
        assert_eq!(b.standard_normal(), seq[2]);
    }

    #[test]
    fn derived_streams_differ() {
        let a = RandomStream::derive(5, &[0]).uniform();
        let b = RandomStream::derive(5, &[1]).uniform();
        let c = RandomStream::derive(5, &[0, 1]).uniform();
        let d = RandomStream::new(5).uniform();
        assert!(a != b && a != c && b != c && a != d);
        assert_eq!(a, RandomStream::derive(5, &[0]).uniform());
    }
}
