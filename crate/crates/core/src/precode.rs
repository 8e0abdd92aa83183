//! Frequency-domain precoders `A ∈ {F_N, F_Q ⊗ I_P, W_Q ⊗ I_P}` and the
//! per-group views they induce.
//!
//! Symbol `n = p + qP` belongs to group `p` at position `q`; the `Q` symbols
//! of a group are spread over the `Q` subcarriers with the same indices. All
//! three precoders are applied group by group: gather the strided sub-vector,
//! run a `Q`-point transform, scatter it back. The full DFT is the `Q = N`,
//! `P = 1` case.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::numerics::{fwht_in_place, Fft};
use crate::ops::OpTally;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecoderKind {
    Dft,
    Sdft,
    Swh,
}

impl fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrecoderKind::Dft => "DFT",
            PrecoderKind::Sdft => "SDFT",
            PrecoderKind::Swh => "SWH",
        })
    }
}

impl FromStr for PrecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dft" => Ok(PrecoderKind::Dft),
            "sdft" => Ok(PrecoderKind::Sdft),
            "swh" => Ok(PrecoderKind::Swh),
            other => Err(invalid(format!("unknown precoder '{other}'"))),
        }
    }
}

/// Precoder kind with its block and spreading sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecoderSpec {
    kind: PrecoderKind,
    n: usize,
    q: usize,
}

impl PrecoderSpec {
    /// Validates sizes. For [`PrecoderKind::Dft`] the spreading size is
    /// forced to `N`.
    pub fn new(kind: PrecoderKind, n: usize, q: usize) -> Result<Self> {
        let q = if kind == PrecoderKind::Dft { n } else { q };
        if n == 0 || !n.is_power_of_two() {
            return Err(invalid(format!("block size N = {n} is not a power of two")));
        }
        if q == 0 || !q.is_power_of_two() || q > n {
            return Err(invalid(format!(
                "spreading size Q = {q} must be a power of two not exceeding N = {n}"
            )));
        }
        Ok(Self { kind, n, q })
    }

    pub fn dft(n: usize) -> Result<Self> {
        Self::new(PrecoderKind::Dft, n, n)
    }

    pub fn kind(&self) -> PrecoderKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of groups `P = N / Q`.
    pub fn p(&self) -> usize {
        self.n / self.q
    }

    /// `true` when `Q` is shorter than the channel, so symbols of a group no
    /// longer see equal gains.
    pub fn violates_equal_gain(&self, channel_len: usize) -> bool {
        self.q < channel_len
    }

    /// Human-readable warning for [`Self::violates_equal_gain`].
    pub fn equal_gain_warning(&self, channel_len: usize) -> Option<String> {
        self.violates_equal_gain(channel_len).then(|| {
            format!(
                "{} precoder with Q = {} is shorter than the channel (L = {channel_len}); symbols no longer see equal gains",
                self.kind, self.q
            )
        })
    }
}

/// Index set `I_p = {p + qP : q = 0..Q}` in ascending order.
pub fn group_indices(spec: &PrecoderSpec, p: usize) -> Result<Vec<usize>> {
    let groups = spec.p();
    if p >= groups {
        return Err(invalid(format!("group {p} out of range (P = {groups})")));
    }
    Ok((0..spec.q()).map(|q| p + q * groups).collect())
}

/// Copies the strided sub-vector of group `p` into `out`.
#[inline]
pub fn gather<T: Copy>(v: &[T], groups: usize, p: usize, out: &mut [T]) {
    for (q, o) in out.iter_mut().enumerate() {
        *o = v[p + q * groups];
    }
}

/// Writes `sub` back onto the strided positions of group `p`.
#[inline]
pub fn scatter<T: Copy>(sub: &[T], groups: usize, p: usize, v: &mut [T]) {
    for (q, s) in sub.iter().enumerate() {
        v[p + q * groups] = *s;
    }
}

/// A precoder with its transform plan, ready for repeated use.
#[derive(Debug, Clone)]
pub struct Precoder {
    spec: PrecoderSpec,
    fft: Option<Fft>,
}

impl Precoder {
    pub fn new(spec: PrecoderSpec) -> Result<Self> {
        let fft = match spec.kind() {
            PrecoderKind::Swh => None,
            _ => Some(Fft::new(spec.q())?),
        };
        Ok(Self { spec, fft })
    }

    pub fn spec(&self) -> &PrecoderSpec {
        &self.spec
    }

    /// `Q`-point forward transform of one group, in place.
    pub fn forward_group(&self, sub: &mut [C64], tally: &mut impl OpTally) -> Result<()> {
        match &self.fft {
            None => fwht_in_place(sub, tally),
            Some(f) => f.process(sub, false, tally),
        }
    }

    /// `Q`-point adjoint transform of one group, in place.
    pub fn adjoint_group(&self, sub: &mut [C64], tally: &mut impl OpTally) -> Result<()> {
        match &self.fft {
            None => fwht_in_place(sub, tally),
            Some(f) => f.process(sub, true, tally),
        }
    }

    fn check_len(&self, v: &[C64]) -> Result<()> {
        if v.len() != self.spec.n() {
            return Err(invalid(format!(
                "block of length {} given to a precoder of size N = {}",
                v.len(),
                self.spec.n()
            )));
        }
        Ok(())
    }

    fn apply_with(&self, v: &[C64], tally: &mut impl OpTally, adjoint: bool) -> Result<Vec<C64>> {
        self.check_len(v)?;
        let groups = self.spec.p();
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        let mut sub = vec![C64::new(0.0, 0.0); self.spec.q()];
        for p in 0..groups {
            gather(v, groups, p, &mut sub);
            if adjoint {
                self.adjoint_group(&mut sub, tally)?;
            } else {
                self.forward_group(&mut sub, tally)?;
            }
            scatter(&sub, groups, p, &mut out);
        }
        Ok(out)
    }

    /// `x = A·d`.
    pub fn apply(&self, d: &[C64], tally: &mut impl OpTally) -> Result<Vec<C64>> {
        self.apply_with(d, tally, false)
    }

    /// `d = A^H·x`.
    pub fn apply_adjoint(&self, x: &[C64], tally: &mut impl OpTally) -> Result<Vec<C64>> {
        self.apply_with(x, tally, true)
    }
}

/// `x = A·d` for the given precoder.
pub fn precode(spec: &PrecoderSpec, d: &[C64]) -> Result<Vec<C64>> {
    Precoder::new(*spec)?.apply(d, &mut ())
}

/// `d = A^H·x` for the given precoder.
pub fn deprecode(spec: &PrecoderSpec, x: &[C64]) -> Result<Vec<C64>> {
    Precoder::new(*spec)?.apply_adjoint(x, &mut ())
}

/// Received samples and channel gains of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupView {
    pub p: usize,
    pub indices: Vec<usize>,
    pub y: Vec<C64>,
    pub lambda: Vec<C64>,
}

/// Splits a received block and its diagonal channel into `P` group views.
pub fn split_groups(spec: &PrecoderSpec, y: &[C64], lambda: &[C64]) -> Result<Vec<GroupView>> {
    if y.len() != spec.n() || lambda.len() != spec.n() {
        return Err(invalid(format!(
            "received block ({}) and channel ({}) must both have length N = {}",
            y.len(),
            lambda.len(),
            spec.n()
        )));
    }
    (0..spec.p())
        .map(|p| {
            let indices = group_indices(spec, p)?;
            Ok(GroupView {
                p,
                y: indices.iter().map(|&k| y[k]).collect(),
                lambda: indices.iter().map(|&k| lambda[k]).collect(),
                indices,
            })
        })
        .collect()
}
