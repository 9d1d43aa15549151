//! Counter-based Gaussian increments.
//!
//! Every increment is a pure function of `(master seed, stream, mode, step)`,
//! computed with the Philox4x32-10 block function and a Box-Muller transform.
//! No generator state is carried between steps, so restarts, synchronous
//! coupling of two ensembles, and any worker count reproduce the same numbers.

use std::f64::consts::PI;

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = a as u64 * b as u64;
    ((p >> 32) as u32, p as u32)
}

/// Philox4x32 with ten rounds.
#[inline]
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// SplitMix64 finalizer, used to derive independent seeds from labels.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a label.
pub fn derive_seed(parent: u64, label: u64) -> u64 {
    mix64(parent ^ mix64(label.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Maps `(stream, mode, step)` to a standard normal increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseDriver {
    master_seed: u64,
}

impl NoiseDriver {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    #[inline]
    fn block(&self, stream: u32, step: u64, pair: u32) -> [u32; 4] {
        let key = [self.master_seed as u32, (self.master_seed >> 32) as u32];
        philox4x32_10([step as u32, (step >> 32) as u32, stream, pair], key)
    }

    /// Standard normals for modes `0..out.len()` of one stream at one step.
    ///
    /// Modes `2p` and `2p + 1` share one Philox block; asking for a prefix of
    /// the modes returns a prefix of the same numbers.
    #[inline]
    pub fn fill(&self, stream: u32, step: u64, out: &mut [f64]) {
        let mut k = 0;
        let mut pair = 0u32;
        while k < out.len() {
            let (z0, z1) = box_muller(self.block(stream, step, pair));
            out[k] = z0;
            if k + 1 < out.len() {
                out[k + 1] = z1;
            }
            k += 2;
            pair += 1;
        }
    }

    /// A single increment; equal to the corresponding entry of [`fill`](Self::fill).
    pub fn normal(&self, stream: u32, mode: usize, step: u64) -> f64 {
        let (z0, z1) = box_muller(self.block(stream, step, (mode / 2) as u32));
        if mode.is_multiple_of(2) {
            z0
        } else {
            z1
        }
    }
}

#[inline]
fn box_muller(b: [u32; 4]) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let x0 = ((b[0] as u64) << 32) | b[1] as u64;
    let x1 = ((b[2] as u64) << 32) | b[3] as u64;
    // u1 in (0, 1], u2 in [0, 1)
    let u1 = ((x0 >> 11) + 1) as f64 * SCALE;
    let u2 = (x1 >> 11) as f64 * SCALE;
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    (r * c, r * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Known-answer vectors published with the Random123 reference implementation.
    #[test]
    fn philox_known_answers() {
        assert_eq!(
            philox4x32_10([0, 0, 0, 0], [0, 0]),
            [0x6627_e8d5, 0xe169_c58d, 0xbc57_ac4c, 0x9b00_dbd8]
        );
        assert_eq!(
            philox4x32_10([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f_276d, 0x41c8_3b0e, 0xa20b_c7c6, 0x6d54_51fd]
        );
        assert_eq!(
            philox4x32_10(
                [0x243f_6a88, 0x85a3_08d3, 0x1319_8a2e, 0x0370_7344],
                [0xa409_3822, 0x299f_31d0]
            ),
            [0xd16c_fe09, 0x94fd_cceb, 0x5001_e420, 0x2412_6ea1]
        );
    }

    #[test]
    fn fill_agrees_with_single_lookups() {
        let d = NoiseDriver::new(17);
        let mut out = [0.0; 5];
        d.fill(3, 99, &mut out);
        for (k, &z) in out.iter().enumerate() {
            assert_eq!(z.to_bits(), d.normal(3, k, 99).to_bits());
        }
    }

    #[test]
    fn increments_look_standard_normal() {
        let d = NoiseDriver::new(2024);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut sum4 = 0.0;
        let mut buf = [0.0; 2];
        for i in 0..n / 2 {
            d.fill(i as u32 % 97, (i / 97) as u64, &mut buf);
            for &z in &buf {
                sum += z;
                sum2 += z * z;
                sum4 += z * z * z * z;
            }
        }
        let nf = n as f64;
        assert!((sum / nf).abs() < 4.0 / nf.sqrt());
        assert!((sum2 / nf - 1.0).abs() < 4.0 * 2f64.sqrt() / nf.sqrt());
        assert!((sum4 / nf - 3.0).abs() < 0.1);
    }

    #[test]
    fn neighbouring_counters_are_uncorrelated() {
        let d = NoiseDriver::new(5);
        let n = 50_000;
        let mut c_step = 0.0;
        let mut c_stream = 0.0;
        let mut c_mode = 0.0;
        for i in 0..n {
            let a = d.normal(i, 0, 7);
            c_step += a * d.normal(i, 0, 8);
            c_stream += a * d.normal(i + 1, 0, 7);
            c_mode += a * d.normal(i, 2, 7);
        }
        let bound = 4.0 / (n as f64).sqrt();
        for c in [c_step, c_stream, c_mode] {
            assert!((c / n as f64).abs() < bound);
        }
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
