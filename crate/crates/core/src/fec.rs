//! Rate-1/2 recursive systematic convolutional code `[1, 5/7]_8`, random
//! interleaving and BCJR soft-in soft-out decoding.
//!
//! Coded bits are multiplexed as `u0 p0 u1 p1 …`; two tail steps driven by
//! the feedback register return the encoder to the zero state, so a block of
//! `N_c` coded bits carries `N_c/2 − 2` information bits.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::invalid;
use crate::numerics::{max_star_exact, FcTable};
use crate::{clip_llr, Result};

/// Encoder memory (number of delay elements).
pub const MEMORY: usize = 2;
/// Trellis states.
pub const STATES: usize = 1 << MEMORY;
/// Feedback polynomial, octal 7.
pub const FEEDBACK: usize = 0o7;
/// Feedforward polynomial, octal 5.
pub const FEEDFORWARD: usize = 0o5;

/// State transition for input `u` from state `s`, returning
/// `(next_state, parity)`.
///
/// The state packs the register as `s = 2·a[k−1] + a[k−2]`.
#[inline]
fn step(s: usize, u: u8) -> (usize, u8) {
    let a1 = ((s >> 1) & 1) as u8;
    let a2 = (s & 1) as u8;
    // feedback 1 + D + D^2
    let a = u ^ a1 ^ a2;
    // feedforward 1 + D^2
    let p = a ^ a2;
    (((a as usize) << 1) | a1 as usize, p)
}

/// Input that drives the feedback register to zero from state `s`.
#[inline]
fn tail_input(s: usize) -> u8 {
    (((s >> 1) ^ s) & 1) as u8
}

/// Number of information bits carried by `n_coded` coded bits.
pub fn info_len_for(n_coded: usize) -> Result<usize> {
    if n_coded % 2 != 0 || n_coded <= 2 * MEMORY {
        return Err(invalid(format!(
            "{n_coded} coded bits cannot hold a terminated rate-1/2 codeword"
        )));
    }
    Ok(n_coded / 2 - MEMORY)
}

/// Encodes `info` and appends the termination tail.
pub fn rsc_encode(info: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 * (info.len() + MEMORY));
    let mut s = 0;
    for &u in info {
        let (next, p) = step(s, u & 1);
        out.push(u & 1);
        out.push(p);
        s = next;
    }
    for _ in 0..MEMORY {
        let u = tail_input(s);
        let (next, p) = step(s, u);
        out.push(u);
        out.push(p);
        s = next;
    }
    debug_assert_eq!(s, 0);
    out
}

/// Encodes exactly enough information bits to produce `n_coded` coded bits.
pub fn rsc_encode_block(info: &[u8], n_coded: usize) -> Result<Vec<u8>> {
    let n_info = info_len_for(n_coded)?;
    if info.len() != n_info {
        return Err(invalid(format!(
            "{} information bits given, {} coded bits require {n_info}",
            info.len(),
            n_coded
        )));
    }
    Ok(rsc_encode(info))
}

/// Jacobian-logarithm flavour used by the BCJR recursions.
#[derive(Debug, Clone)]
pub enum MaxStar {
    /// `ln(e^a + e^b)` evaluated in closed form.
    Exact,
    /// Maximum plus the tabulated correction term.
    Table(FcTable),
}

impl MaxStar {
    #[inline]
    fn eval(&self, a: f64, b: f64) -> f64 {
        match self {
            MaxStar::Exact => max_star_exact(a, b),
            MaxStar::Table(t) => t.max_star(a, b),
        }
    }
}

/// APP output of the decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct BcjrOutput {
    /// APP LLRs of every coded bit, `ln p(c=0)/p(c=1)`.
    pub app: Vec<f64>,
    /// APP LLRs of the information bits (tail excluded).
    pub info: Vec<f64>,
}

/// Log-domain BCJR decoder for the `[1, 5/7]` RSC code.
#[derive(Debug, Clone)]
pub struct BcjrDecoder {
    max_star: MaxStar,
}

impl Default for BcjrDecoder {
    fn default() -> Self {
        Self::new(MaxStar::Table(FcTable::new()))
    }
}

impl BcjrDecoder {
    pub fn new(max_star: MaxStar) -> Self {
        Self { max_star }
    }

    /// Decodes one terminated block. `channel` and `apriori` are LLRs on the
    /// multiplexed coded bits and are summed before decoding.
    pub fn decode(&self, channel: &[f64], apriori: &[f64]) -> Result<BcjrOutput> {
        if channel.len() != apriori.len() {
            return Err(invalid(format!(
                "channel ({}) and a-priori ({}) LLR blocks differ in length",
                channel.len(),
                apriori.len()
            )));
        }
        let n_info = info_len_for(channel.len())?;
        let steps = n_info + MEMORY;
        let llr: Vec<f64> = channel.iter().zip(apriori).map(|(a, b)| a + b).collect();
        let ms = &self.max_star;
        let neg = f64::NEG_INFINITY;

        // Branch metric ½[(1−2u)·L_u + (1−2p)·L_p].
        let gamma = |k: usize, u: u8, p: u8| -> f64 {
            let su = if u == 0 { 0.5 } else { -0.5 };
            let sp = if p == 0 { 0.5 } else { -0.5 };
            su * llr[2 * k] + sp * llr[2 * k + 1]
        };

        let mut alpha = vec![[neg; STATES]; steps + 1];
        alpha[0][0] = 0.0;
        for k in 0..steps {
            let mut next = [neg; STATES];
            for s in 0..STATES {
                let a = alpha[k][s];
                if a == neg {
                    continue;
                }
                for u in 0..2u8 {
                    let (ns, p) = step(s, u);
                    next[ns] = ms.eval(next[ns], a + gamma(k, u, p));
                }
            }
            let m = next.iter().cloned().fold(neg, f64::max);
            for v in next.iter_mut() {
                *v -= m;
            }
            alpha[k + 1] = next;
        }

        let mut beta = vec![[neg; STATES]; steps + 1];
        beta[steps][0] = 0.0;
        for k in (0..steps).rev() {
            let mut cur = [neg; STATES];
            for (s, c) in cur.iter_mut().enumerate() {
                for u in 0..2u8 {
                    let (ns, p) = step(s, u);
                    let b = beta[k + 1][ns];
                    if b == neg {
                        continue;
                    }
                    *c = ms.eval(*c, b + gamma(k, u, p));
                }
            }
            let m = cur.iter().cloned().fold(neg, f64::max);
            for v in cur.iter_mut() {
                *v -= m;
            }
            beta[k] = cur;
        }

        let mut app = vec![0.0; channel.len()];
        for k in 0..steps {
            // [bit value][systematic, parity]
            let mut acc = [[neg; 2]; 2];
            for s in 0..STATES {
                let a = alpha[k][s];
                if a == neg {
                    continue;
                }
                for u in 0..2u8 {
                    let (ns, p) = step(s, u);
                    let b = beta[k + 1][ns];
                    if b == neg {
                        continue;
                    }
                    let m = a + gamma(k, u, p) + b;
                    acc[u as usize][0] = ms.eval(acc[u as usize][0], m);
                    acc[p as usize][1] = ms.eval(acc[p as usize][1], m);
                }
            }
            app[2 * k] = clip_llr(acc[0][0] - acc[1][0]);
            app[2 * k + 1] = clip_llr(acc[0][1] - acc[1][1]);
        }
        let info = (0..n_info).map(|k| app[2 * k]).collect();
        Ok(BcjrOutput { app, info })
    }
}

/// Hard decision on an LLR (`L ≥ 0` decides 0).
#[inline]
pub fn hard(l: f64) -> u8 {
    u8::from(l < 0.0)
}

/// Bit permutation `c[i] = c'[π[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

impl Interleaver {
    pub fn identity(len: usize) -> Self {
        let perm: Vec<usize> = (0..len).collect();
        Self {
            inverse: perm.clone(),
            perm,
        }
    }

    /// Uniformly random permutation drawn from `rng`.
    pub fn random(len: usize, rng: &mut impl Rng) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(rng);
        Self::from_permutation(perm).expect("shuffle yields a permutation")
    }

    /// Random permutation fully determined by `seed`.
    pub fn from_seed(len: usize, seed: u64) -> Self {
        Self::random(len, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn from_permutation(perm: Vec<usize>) -> Result<Self> {
        let mut inverse = vec![usize::MAX; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            if p >= perm.len() || inverse[p] != usize::MAX {
                return Err(invalid("interleaver table is not a permutation"));
            }
            inverse[p] = i;
        }
        Ok(Self { perm, inverse })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    fn check<T>(&self, v: &[T]) -> Result<()> {
        if v.len() != self.perm.len() {
            return Err(invalid(format!(
                "interleaver of length {} applied to block of length {}",
                self.perm.len(),
                v.len()
            )));
        }
        Ok(())
    }

    pub fn interleave<T: Copy>(&self, v: &[T]) -> Result<Vec<T>> {
        self.check(v)?;
        Ok(self.perm.iter().map(|&p| v[p]).collect())
    }

    pub fn deinterleave<T: Copy>(&self, v: &[T]) -> Result<Vec<T>> {
        self.check(v)?;
        Ok(self.inverse.iter().map(|&i| v[i]).collect())
    }
}
