//! Orthonormal fast transforms, square-QAM constellations and the
//! `ln(1 + e^-x)` correction table shared by every Log-MAP recursion.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use crate::error::invalid;
use crate::ops::OpTally;
use crate::{Result, C64};

/// Scalar types the Walsh-Hadamard butterfly can run on.
pub trait Sample: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    /// Real additions per element-wise addition.
    const REAL_PARTS: u64;
}

impl Sample for f64 {
    const REAL_PARTS: u64 = 1;
}

impl Sample for C64 {
    const REAL_PARTS: u64 = 2;
}

fn check_pow2(len: usize) -> Result<()> {
    if len == 0 || !len.is_power_of_two() {
        return Err(invalid(format!(
            "transform length {len} is not a power of two"
        )));
    }
    Ok(())
}

/// In-place orthonormal fast Walsh-Hadamard transform (natural/Sylvester order).
///
/// Butterflies tally `len·log2(len)` element additions; the final `1/√len`
/// scale is not counted.
pub fn fwht_in_place<T: Sample>(data: &mut [T], tally: &mut impl OpTally) -> Result<()> {
    check_pow2(data.len())?;
    let n = data.len();
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                let a = data[i];
                let b = data[i + h];
                data[i] = a + b;
                data[i + h] = a - b;
            }
        }
        tally.add(T::REAL_PARTS * n as u64);
        h *= 2;
    }
    if n > 1 {
        let scale = 1.0 / (n as f64).sqrt();
        for v in data.iter_mut() {
            *v = *v * scale;
        }
    }
    Ok(())
}

/// Orthonormal Walsh-Hadamard transform of `block`.
pub fn fwht<T: Sample>(block: &[T]) -> Result<Vec<T>> {
    let mut out = block.to_vec();
    fwht_in_place(&mut out, &mut ())?;
    Ok(out)
}

/// Radix-2 decimation-in-time FFT plan with orthonormal scaling.
#[derive(Debug, Clone)]
pub struct Fft {
    len: usize,
    twiddles: Vec<C64>,
    bitrev: Vec<usize>,
}

impl Fft {
    pub fn new(len: usize) -> Result<Self> {
        check_pow2(len)?;
        let twiddles = (0..len / 2)
            .map(|k| C64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
            .collect();
        let bits = len.trailing_zeros();
        let bitrev = (0..len)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        Ok(Self {
            len,
            twiddles,
            bitrev,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Transforms `data` in place. Each butterfly tallies one complex
    /// multiplication (4 real) and two complex additions (4 real), whatever
    /// the twiddle value.
    pub fn process(&self, data: &mut [C64], inverse: bool, tally: &mut impl OpTally) -> Result<()> {
        if data.len() != self.len {
            return Err(invalid(format!(
                "FFT plan of length {} applied to block of length {}",
                self.len,
                data.len()
            )));
        }
        let n = self.len;
        for i in 0..n {
            let j = self.bitrev[i];
            if j > i {
                data.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let w = if inverse { w.conj() } else { w };
                    let t = data[start + k + half] * w;
                    let u = data[start + k];
                    data[start + k] = u + t;
                    data[start + k + half] = u - t;
                }
            }
            let butterflies = (n / 2) as u64;
            tally.mul(4 * butterflies);
            tally.add(4 * butterflies);
            half *= 2;
        }
        if n > 1 {
            let scale = 1.0 / (n as f64).sqrt();
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
        Ok(())
    }
}

/// Orthonormal DFT (`inverse = false`) or IDFT of `block`.
pub fn fft(block: &[C64], inverse: bool) -> Result<Vec<C64>> {
    let plan = Fft::new(block.len())?;
    let mut out = block.to_vec();
    plan.process(&mut out, inverse, &mut ())?;
    Ok(out)
}

/// Binary reflected Gray code of `i`.
#[inline]
pub fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// Square QAM constellation built from two Gray-labelled PAM rails.
///
/// PAM levels are `κ·(2i − (√J − 1))` for `i = 0..√J`, ascending, with
/// `κ = √(3 / (2(J − 1)))` so that the mean QAM symbol energy is one. Level
/// `i` carries the label `gray(√J − 1 − i)`, bit 0 being the most significant
/// label bit; bit 0 is therefore the sign bit and is 1 on negative levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    rail_size: usize,
    rail_bits: usize,
    kappa: f64,
    levels: Vec<f64>,
    labels: Vec<usize>,
    level_of_label: Vec<usize>,
}

impl Constellation {
    pub fn qam(order: usize) -> Result<Self> {
        if order < 4 || !order.is_power_of_two() || order.trailing_zeros() % 2 != 0 {
            return Err(invalid(format!(
                "QAM order {order} is not a square power of four"
            )));
        }
        let rail_size = 1usize << (order.trailing_zeros() / 2);
        let rail_bits = rail_size.trailing_zeros() as usize;
        let kappa = (3.0 / (2.0 * (order as f64 - 1.0))).sqrt();
        let levels = (0..rail_size)
            .map(|i| kappa * Self::int_level_of(rail_size, i) as f64)
            .collect();
        let labels: Vec<usize> = (0..rail_size).map(|i| gray(rail_size - 1 - i)).collect();
        let mut level_of_label = vec![0; rail_size];
        for (i, &lab) in labels.iter().enumerate() {
            level_of_label[lab] = i;
        }
        Ok(Self {
            order,
            rail_size,
            rail_bits,
            kappa,
            levels,
            labels,
            level_of_label,
        })
    }

    fn int_level_of(rail_size: usize, i: usize) -> i64 {
        2 * i as i64 - (rail_size as i64 - 1)
    }

    /// QAM order `J`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of PAM levels per rail, `√J`.
    pub fn rail_size(&self) -> usize {
        self.rail_size
    }

    /// Bits per PAM symbol, `log2(J)/2`.
    pub fn rail_bits(&self) -> usize {
        self.rail_bits
    }

    /// Bits per QAM symbol, `log2(J)`.
    pub fn bits_per_symbol(&self) -> usize {
        2 * self.rail_bits
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Normalized PAM levels, ascending.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Unnormalized odd-integer PAM level of index `i`.
    pub fn int_level(&self, i: usize) -> i64 {
        Self::int_level_of(self.rail_size, i)
    }

    /// Gray label of PAM level index `i`.
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Bit `b` of the label of level index `i`.
    #[inline]
    pub fn level_bit(&self, i: usize, b: usize) -> u8 {
        ((self.labels[i] >> (self.rail_bits - 1 - b)) & 1) as u8
    }

    /// Index of a normalized PAM level, matched within a small tolerance.
    pub fn level_index(&self, level: f64) -> Result<usize> {
        self.levels
            .iter()
            .position(|&l| (l - level).abs() < 1e-9)
            .ok_or_else(|| invalid(format!("{level} is not a PAM level of {}-QAM", self.order)))
    }

    /// The bit demapper: bit `b` of a PAM level.
    pub fn pam_bit(&self, level: f64, b: usize) -> Result<u8> {
        if b >= self.rail_bits {
            return Err(invalid(format!(
                "bit index {b} out of range for {}-QAM",
                self.order
            )));
        }
        Ok(self.level_bit(self.level_index(level)?, b))
    }

    /// Maps `rail_bits` bits (bit 0 first) to a PAM level index.
    fn index_of_bits(&self, bits: &[u8]) -> usize {
        let label = bits
            .iter()
            .fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
        self.level_of_label[label]
    }

    /// Maps a bit stream onto PAM levels, `rail_bits` bits per level.
    pub fn map_rail(&self, bits: &[u8]) -> Result<Vec<f64>> {
        if bits.len() % self.rail_bits != 0 {
            return Err(invalid(format!(
                "{} bits do not fill whole {}-level PAM symbols",
                bits.len(),
                self.rail_size
            )));
        }
        Ok(bits
            .chunks_exact(self.rail_bits)
            .map(|c| self.levels[self.index_of_bits(c)])
            .collect())
    }

    /// Maps the in-phase and quadrature bit halves onto QAM symbols.
    pub fn qam_map(&self, bits_i: &[u8], bits_q: &[u8]) -> Result<Vec<C64>> {
        if bits_i.len() != bits_q.len() {
            return Err(invalid(format!(
                "in-phase and quadrature halves differ in length ({} vs {})",
                bits_i.len(),
                bits_q.len()
            )));
        }
        let re = self.map_rail(bits_i)?;
        let im = self.map_rail(bits_q)?;
        Ok(re
            .into_iter()
            .zip(im)
            .map(|(r, i)| C64::new(r, i))
            .collect())
    }

    /// Recovers the bit stream of a sequence of PAM levels.
    pub fn demap_rail(&self, levels: &[f64]) -> Result<Vec<u8>> {
        let mut bits = Vec::with_capacity(levels.len() * self.rail_bits);
        for &l in levels {
            let i = self.level_index(l)?;
            bits.extend((0..self.rail_bits).map(|b| self.level_bit(i, b)));
        }
        Ok(bits)
    }

    /// All `J` QAM points indexed by their full label: the in-phase label in
    /// the high bits, the quadrature label in the low bits.
    pub fn points(&self) -> Vec<C64> {
        (0..self.order)
            .map(|label| {
                let li = self.level_of_label[label >> self.rail_bits];
                let lq = self.level_of_label[label & (self.rail_size - 1)];
                C64::new(self.levels[li], self.levels[lq])
            })
            .collect()
    }

    /// Bit `b` (0 ≤ b < log2 J) of full QAM label `label`.
    #[inline]
    pub fn point_bit(&self, label: usize, b: usize) -> u8 {
        ((label >> (self.bits_per_symbol() - 1 - b)) & 1) as u8
    }
}

/// Sampled correction term `f_c(x) = ln(1 + e^-x)` for the Jacobian
/// logarithm, 256 points uniformly covering `0 ≤ x ≤ 10`.
#[derive(Debug, Clone)]
pub struct FcTable {
    values: Vec<f64>,
}

impl FcTable {
    pub const SIZE: usize = 256;
    pub const RANGE: f64 = 10.0;

    pub fn new() -> Self {
        let step = Self::RANGE / (Self::SIZE - 1) as f64;
        let values = (0..Self::SIZE)
            .map(|i| (-(i as f64) * step).exp().ln_1p())
            .collect();
        Self { values }
    }

    pub fn step(&self) -> f64 {
        Self::RANGE / (Self::SIZE - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Nearest-neighbour lookup; zero beyond the table range.
    #[inline]
    pub fn lookup(&self, x: f64) -> f64 {
        if !(x <= Self::RANGE) {
            return 0.0;
        }
        let idx = (x * ((Self::SIZE - 1) as f64 / Self::RANGE)).round() as usize;
        self.values[idx]
    }

    /// `ln(e^a + e^b)` through the table. Either argument may be `-∞`.
    #[inline]
    pub fn max_star(&self, a: f64, b: f64) -> f64 {
        let m = a.max(b);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + self.lookup((a - b).abs())
    }
}

impl Default for FcTable {
    fn default() -> Self {
        Self::new()
    }
}

/// Exact `ln(e^a + e^b)`, tolerating `-∞` arguments.
#[inline]
pub fn max_star_exact(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + (-(a - b).abs()).exp().ln_1p()
}
