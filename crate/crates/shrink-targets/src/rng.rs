//! Seeded randomness for experiments.
//!
//! Every stochastic choice in the crate flows through [`TaskRng`], a
//! ChaCha8 stream keyed by a base seed and a task index (`base ^ index`).
//! Runs with the same seed are bit-reproducible; parallel tasks get
//! decorrelated streams without coordination.
//!
//! The main service beyond plain sampling is [`TaskRng::point`]: a
//! uniformly random point of [0,1) with a full-width random mantissa.
//! Points built from `f64` literals carry only 53 significant bits, and
//! under a bit-shifting map like doubling their exact orbits collapse
//! to 0 within about as many steps; experiment starting points must be
//! drawn at the orbit's working width instead.

use crate::fixed::PrecisePoint;
use num_bigint::BigUint;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct TaskRng {
    inner: ChaCha8Rng,
}

impl TaskRng {
    /// Stream for a given base seed and task index.
    pub fn for_task(base_seed: u64, task_index: u64) -> TaskRng {
        TaskRng { inner: ChaCha8Rng::seed_from_u64(base_seed ^ task_index) }
    }

    /// The task-0 stream.
    pub fn new(seed: u64) -> TaskRng {
        TaskRng::for_task(seed, 0)
    }

    /// Uniform point of [0,1) carrying `bits` random mantissa bits.
    pub fn point(&mut self, bits: u32) -> PrecisePoint {
        let nbytes = bits.div_ceil(8) as usize;
        let mut buf = vec![0u8; nbytes];
        self.inner.fill_bytes(&mut buf);
        let excess = (nbytes as u32) * 8 - bits;
        // Little-endian: the top byte is last.
        *buf.last_mut().unwrap() &= 0xffu8 >> excess;
        let mant = BigUint::from_bytes_le(&buf);
        PrecisePoint::from_raw_bits(mant, bits)
            .expect("masked mantissa lies below 2^bits")
    }

    pub fn f64_unit(&mut self) -> f64 {
        self.inner.gen_range(0.0..1.0)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.inner.gen_range(0..n)
    }
}

impl RngCore for TaskRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
