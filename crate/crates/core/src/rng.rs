//! Counter-based random numbers.
//!
//! Philox4x32-10 (Salmon et al., Random123) keyed by a 64-bit seed, with a
//! 64-bit stream id occupying the upper counter words. Each counter value maps
//! to one 128-bit block, so any position of a stream can be regenerated
//! without replaying the prefix. Normals come from the Box–Muller transform
//! applied to one block (two uniforms, two normals).

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

/// Identifier of the sampler written into projection files.
pub const GENERATOR_ID: u32 = 1;
/// Human-readable name of [`GENERATOR_ID`].
pub const GENERATOR_NAME: &str = "philox4x32-10/box-muller/v1";

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// Raw Philox4x32 with ten rounds.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
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

/// Map 64 random bits to a uniform in (0, 1].
#[inline(always)]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline(always)]
fn join(hi: u32, lo: u32) -> u64 {
    (u64::from(hi) << 32) | u64::from(lo)
}

/// Seeded Philox stream with random access by block index.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: [u32; 2],
    stream: u64,
    block: u64,
    buf: [u32; 4],
    used: usize,
    spare_normal: Option<f64>,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            key: [seed as u32, (seed >> 32) as u32],
            stream,
            block: 0,
            buf: [0; 4],
            used: 4,
            spare_normal: None,
        }
    }

    /// Block `index` of this stream, independent of the sequential cursor.
    pub fn block_at(&self, index: u64) -> [u32; 4] {
        let ctr = [
            index as u32,
            (index >> 32) as u32,
            self.stream as u32,
            (self.stream >> 32) as u32,
        ];
        philox4x32_10(ctr, self.key)
    }

    /// The standard normal pair derived from block `index`.
    pub fn normal_pair_at(&self, index: u64) -> (f64, f64) {
        let b = self.block_at(index);
        box_muller(join(b[0], b[1]), join(b[2], b[3]))
    }

    pub fn next_u32(&mut self) -> u32 {
        if self.used == 4 {
            self.buf = self.block_at(self.block);
            self.block += 1;
            self.used = 0;
        }
        let v = self.buf[self.used];
        self.used += 1;
        v
    }

    pub fn next_u64(&mut self) -> u64 {
        let hi = self.next_u32();
        let lo = self.next_u32();
        join(hi, lo)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // Lemire's multiply-shift; the bias is below 2^-64 * n.
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let a = self.next_u64();
        let b = self.next_u64();
        let (z0, z1) = box_muller(a, b);
        self.spare_normal = Some(z1);
        z0
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }
}

fn box_muller(a: u64, b: u64) -> (f64, f64) {
    let u1 = open_unit(a);
    let u2 = open_unit(b);
    let r = (-2.0 * u1.ln()).sqrt();
    let phi = std::f64::consts::TAU * u2;
    (r * phi.cos(), r * phi.sin())
}
