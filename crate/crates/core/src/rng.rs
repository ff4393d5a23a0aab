//! Counter-based random numbers.
//!
//! Every random quantity in the crate is derived from Philox4x32-10
//! (Salmon et al., Random123). A draw is a pure function of `(key, counter)`,
//! so any draw can be recomputed independently of every other draw. The
//! intervention sampler relies on this: each `(variable, group, subgroup,
//! replicate)` slot has its own counter, which makes the sampling path of a
//! variable independent of which other variables were simulated.

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = (a as u64) * (b as u64);
    ((p >> 32) as u32, p as u32)
}

/// One Philox4x32 block with 10 rounds.
pub fn philox4x32_10(key: [u32; 2], counter: [u32; 4]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// SplitMix64 finalizer, used to derive keys from seeds and labels.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and an index.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// A keyed Philox generator addressed by explicit 128-bit counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Philox {
    key: [u32; 2],
}

impl Philox {
    pub fn new(seed: u64) -> Self {
        Philox {
            key: [seed as u32, (seed >> 32) as u32],
        }
    }

    pub fn block(&self, counter: [u32; 4]) -> [u32; 4] {
        philox4x32_10(self.key, counter)
    }

    /// Two 64-bit words from the block at `counter`.
    pub fn words(&self, counter: [u32; 4]) -> (u64, u64) {
        let b = self.block(counter);
        (
            (b[0] as u64) | ((b[1] as u64) << 32),
            (b[2] as u64) | ((b[3] as u64) << 32),
        )
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&self, counter: [u32; 4]) -> f64 {
        unit_f64(self.words(counter).0)
    }

    /// Standard normal via Box-Muller, consuming exactly one block.
    pub fn normal(&self, counter: [u32; 4]) -> f64 {
        let (a, b) = self.words(counter);
        box_muller(a, b)
    }

    /// Uniform index in `0..n`.
    pub fn index(&self, counter: [u32; 4], n: usize) -> usize {
        bounded(self.words(counter).0, n)
    }
}

#[inline]
fn unit_f64(w: u64) -> f64 {
    (w >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn box_muller(a: u64, b: u64) -> f64 {
    // 1 - u lies in (0, 1], so the log is finite.
    let u1 = 1.0 - unit_f64(a);
    let u2 = unit_f64(b);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

#[inline]
fn bounded(w: u64, n: usize) -> usize {
    (((w as u128) * (n as u128)) >> 64) as usize
}

/// Sequential stream over a Philox key: counter `[ctr_lo, ctr_hi, id_lo, id_hi]`.
#[derive(Debug, Clone)]
pub struct Stream {
    gen: Philox,
    id: u64,
    ctr: u64,
}

impl Stream {
    pub fn new(seed: u64, id: u64) -> Self {
        Stream {
            gen: Philox::new(seed),
            id,
            ctr: 0,
        }
    }

    fn next_counter(&mut self) -> [u32; 4] {
        let c = [
            self.ctr as u32,
            (self.ctr >> 32) as u32,
            self.id as u32,
            (self.id >> 32) as u32,
        ];
        self.ctr += 1;
        c
    }

    pub fn next_u64(&mut self) -> u64 {
        let c = self.next_counter();
        self.gen.words(c).0
    }

    pub fn uniform(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let c = self.next_counter();
        self.gen.normal(c)
    }

    pub fn index(&mut self, n: usize) -> usize {
        bounded(self.next_u64(), n)
    }

    pub fn sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n`, in draw order.
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> alloc::vec::Vec<usize> {
        let mut pool: alloc::vec::Vec<usize> = (0..n).collect();
        let k = k.min(n);
        for i in 0..k {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
