//! Counter-based per-particle Gaussian noise.
//!
//! The draw for `(key, particle, step)` is a pure function of those three
//! numbers: ChaCha8 keyed by `key`, stream `particle`, word position
//! `4 * step`. Generators are kept per particle so that sequential steps
//! need no re-seeking; a skipped or repeated step triggers a seek.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS_PER_STEP: u128 = 4;

#[derive(Debug, Clone)]
pub struct NoiseStreams {
    key: u64,
    streams: Vec<ChaCha8Rng>,
    /// Step whose draw each stream is positioned at.
    next_step: Vec<u64>,
}

impl NoiseStreams {
    pub fn new(key: u64, n: usize) -> Self {
        let base = ChaCha8Rng::seed_from_u64(key);
        let streams = (0..n)
            .map(|i| {
                let mut r = base.clone();
                r.set_stream(i as u64);
                r.set_word_pos(0);
                r
            })
            .collect();
        Self {
            key,
            streams,
            next_step: vec![0; n],
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    /// Two independent standard normals for `particle` at `step`.
    pub fn gaussian_pair(&mut self, particle: usize, step: u64) -> [f64; 2] {
        draw(&mut self.streams[particle], &mut self.next_step[particle], step)
    }

    /// Generators and their positions, for parallel per-particle use with [`draw`].
    pub(crate) fn slices_mut(&mut self) -> (&mut [ChaCha8Rng], &mut [u64]) {
        (&mut self.streams, &mut self.next_step)
    }
}

pub(crate) fn draw(rng: &mut ChaCha8Rng, next: &mut u64, step: u64) -> [f64; 2] {
    if *next != step {
        rng.set_word_pos(WORDS_PER_STEP * step as u128);
    }
    *next = step + 1;
    box_muller(rng.next_u64(), rng.next_u64())
}

/// Stateless reference draw, used to check the cached streams.
pub fn gaussian_pair_at(key: u64, particle: u64, step: u64) -> [f64; 2] {
    let mut r = ChaCha8Rng::seed_from_u64(key);
    r.set_stream(particle);
    r.set_word_pos(WORDS_PER_STEP * step as u128);
    box_muller(r.next_u64(), r.next_u64())
}

fn box_muller(a: u64, b: u64) -> [f64; 2] {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    // u1 in (0, 1], u2 in [0, 1)
    let u1 = ((a >> 11) + 1) as f64 * SCALE;
    let u2 = (b >> 11) as f64 * SCALE;
    let radius = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    [radius * c, radius * s]
}
