//! Self-iterated frequency-domain linear equalizer with expectation
//! propagation feedback (SILE-EPIC) for DFT, sparse DFT and sparse
//! Walsh-Hadamard precoding.
//!
//! Each self-iteration runs a one-tap CWCU-LMMSE equalizer per group,
//! projects the equalizer output onto the constellation, divides out the
//! extrinsic Gaussian and smooths the resulting feedback. The full DFT is the
//! single-group case, so every precoder shares one code path.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::numerics::Constellation;
use crate::ops::OpTally;
use crate::precode::{gather, scatter, Precoder, PrecoderKind, PrecoderSpec};
use crate::{clip_llr, Error, Result, C64};

/// Lower bound applied to EP-divided and extrinsic variances.
pub const V_MIN: f64 = 1e-10;

/// Position of bit `b` of symbol `n` in a frame LLR block: in-phase bits of
/// all symbols first, then quadrature bits.
#[inline]
pub fn symbol_bit_index(n: usize, b: usize, symbols: usize, rail_bits: usize) -> usize {
    if b < rail_bits {
        n * rail_bits + b
    } else {
        symbols * rail_bits + n * rail_bits + (b - rail_bits)
    }
}

/// Unnormalized log prior `−Σ_b φ_b(d)·L_b` for every point label.
fn prior_log(c: &Constellation, llrs: &[f64], out: &mut [f64]) {
    for (label, o) in out.iter_mut().enumerate() {
        *o = -llrs
            .iter()
            .enumerate()
            .filter(|&(b, _)| c.point_bit(label, b) == 1)
            .map(|(_, l)| l)
            .sum::<f64>();
    }
}

fn normalize_log(logp: &[f64]) -> Vec<f64> {
    let peak = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logp.iter().map(|l| (l - peak).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Prior PMF of one symbol over the point labels of `c`.
pub fn prior_pmf(c: &Constellation, llrs: &[f64]) -> Result<Vec<f64>> {
    if llrs.len() != c.bits_per_symbol() {
        return Err(invalid(format!(
            "{} LLRs given for a {}-bit symbol",
            llrs.len(),
            c.bits_per_symbol()
        )));
    }
    let mut logp = vec![0.0; c.order()];
    prior_log(
        c,
        &llrs.iter().map(|&l| clip_llr(l)).collect::<Vec<_>>(),
        &mut logp,
    );
    Ok(normalize_log(&logp))
}

/// Posterior PMF of one symbol with its mean and variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub pmf: Vec<f64>,
    pub mean: C64,
    pub var: f64,
}

fn posterior_into(
    points: &[C64],
    d_e: C64,
    v_e: f64,
    log_prior: &[f64],
    pmf: &mut [f64],
) -> (C64, f64) {
    let mut peak = f64::NEG_INFINITY;
    for ((p, lp), o) in points.iter().zip(log_prior).zip(pmf.iter_mut()) {
        *o = -(p - d_e).norm_sqr() / v_e + lp;
        peak = peak.max(*o);
    }
    let mut total = 0.0;
    for o in pmf.iter_mut() {
        *o = (*o - peak).exp();
        total += *o;
    }
    let mut mean = C64::new(0.0, 0.0);
    let mut second = 0.0;
    for (p, o) in points.iter().zip(pmf.iter_mut()) {
        *o /= total;
        mean += p * *o;
        second += p.norm_sqr() * *o;
    }
    (mean, (second - mean.norm_sqr()).max(0.0))
}

/// `D(d) ∝ exp(−|d − d_e|²/v_e)·P(d)` and its first two moments.
pub fn posterior_pmf(points: &[C64], d_e: C64, v_e: f64, prior: &[f64]) -> Result<Posterior> {
    if points.len() != prior.len() {
        return Err(invalid("constellation and prior differ in size"));
    }
    if !(v_e > 0.0) {
        return Err(invalid(format!(
            "extrinsic variance must be positive, got {v_e}"
        )));
    }
    let log_prior: Vec<f64> = prior.iter().map(|p| p.ln()).collect();
    let mut pmf = vec![0.0; points.len()];
    let (mean, var) = posterior_into(points, d_e, v_e, &log_prior, &mut pmf);
    Ok(Posterior { pmf, mean, var })
}

/// Mean posterior variance per group, in group order.
pub fn average_variance(gamma: &[f64], spec: &PrecoderSpec) -> Result<Vec<f64>> {
    if gamma.len() != spec.n() {
        return Err(invalid(format!(
            "{} variances for N = {}",
            gamma.len(),
            spec.n()
        )));
    }
    let groups = spec.p();
    let mut out = vec![0.0; groups];
    for (n, g) in gamma.iter().enumerate() {
        out[n % groups] += g;
    }
    let q = spec.q() as f64;
    Ok(out.into_iter().map(|s| s / q).collect())
}

/// Mean squared error of approximating every `γ_n` by the frame mean, and by
/// the mean of its group.
pub fn variance_mse(gamma: &[f64], spec: &PrecoderSpec) -> Result<(f64, f64)> {
    let n = spec.n() as f64;
    let sq: f64 = gamma.iter().map(|g| g * g).sum::<f64>() / n;
    let means = average_variance(gamma, spec)?;
    let full = gamma.iter().sum::<f64>() / n;
    let sparse_sq = means.iter().map(|m| m * m).sum::<f64>() / means.len() as f64;
    Ok((sq - full * full, sq - sparse_sq))
}

/// Result of dividing the posterior Gaussian by the extrinsic one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpDivision {
    Divided { d_star: C64, v_star: f64 },
    Fallback,
}

/// `d★ = (μ v_e − d_e γ̄)/(v_e − γ̄)`, `v★ = v_e γ̄/(v_e − γ̄)`, defined only
/// for `γ̄ < v_e`.
#[inline]
pub fn ep_divide(mu: C64, gamma_bar: f64, d_e: C64, v_e: f64) -> EpDivision {
    if gamma_bar < v_e {
        let den = v_e - gamma_bar;
        EpDivision::Divided {
            d_star: (mu * v_e - d_e * gamma_bar) / den,
            v_star: (v_e * gamma_bar / den).max(V_MIN),
        }
    } else {
        EpDivision::Fallback
    }
}

/// Convex smoothing `(1−β)·star + β·prev` of a mean and a variance.
#[inline]
pub fn damp(star: (C64, f64), prev: (C64, f64), beta: f64) -> (C64, f64) {
    (
        star.0 * (1.0 - beta) + prev.0 * beta,
        (1.0 - beta) * star.1 + beta * prev.1,
    )
}

/// One-tap CWCU-LMMSE on every group: returns per-symbol extrinsic means and
/// per-group extrinsic variances. Only the transforms are tallied.
pub fn fd_lmmse_tallied(
    precoder: &Precoder,
    y: &[C64],
    lambda: &[C64],
    noise_var: f64,
    d_a: &[C64],
    v_a: &[f64],
    tally: &mut impl OpTally,
) -> Result<(Vec<C64>, Vec<f64>)> {
    let spec = precoder.spec();
    let (n, q, groups) = (spec.n(), spec.q(), spec.p());
    if y.len() != n || lambda.len() != n || d_a.len() != n || v_a.len() != groups {
        return Err(invalid(
            "equalizer inputs do not match the precoder dimensions",
        ));
    }
    let mut d_e = vec![C64::new(0.0, 0.0); n];
    let mut v_e = vec![0.0; groups];
    let mut sub = vec![C64::new(0.0, 0.0); q];
    let mut yg = vec![C64::new(0.0, 0.0); q];
    let mut lg = vec![C64::new(0.0, 0.0); q];
    for p in 0..groups {
        let va = v_a[p];
        if !(va > 0.0) {
            return Err(invalid(format!(
                "a-priori variance must be positive, got {va}"
            )));
        }
        gather(d_a, groups, p, &mut sub);
        gather(y, groups, p, &mut yg);
        gather(lambda, groups, p, &mut lg);
        precoder.forward_group(&mut sub, tally)?;
        let mut lam = 0.0;
        for k in 0..q {
            let g2 = lg[k].norm_sqr();
            let den = g2 * va + noise_var;
            lam += g2 / den;
            sub[k] = lg[k].conj() * (yg[k] - lg[k] * sub[k]) / den;
        }
        lam /= q as f64;
        precoder.adjoint_group(&mut sub, tally)?;
        let inv = 1.0 / lam;
        for k in 0..q {
            let idx = p + k * groups;
            d_e[idx] = d_a[idx] + sub[k] * inv;
        }
        v_e[p] = (inv - va).max(V_MIN);
    }
    Ok((d_e, v_e))
}

/// [`fd_lmmse_tallied`] without counting.
pub fn fd_lmmse(
    y: &[C64],
    lambda: &[C64],
    noise_var: f64,
    d_a: &[C64],
    v_a: &[f64],
    spec: &PrecoderSpec,
) -> Result<(Vec<C64>, Vec<f64>)> {
    fd_lmmse_tallied(
        &Precoder::new(*spec)?,
        y,
        lambda,
        noise_var,
        d_a,
        v_a,
        &mut (),
    )
}

/// Extrinsic bit LLRs of one symbol from its posterior PMF.
pub fn dem_extrinsic_llrs(c: &Constellation, pmf: &[f64], apriori: &[f64]) -> Vec<f64> {
    (0..c.bits_per_symbol())
        .map(|b| {
            let (mut p0, mut p1) = (0.0, 0.0);
            for (label, &p) in pmf.iter().enumerate() {
                if c.point_bit(label, b) == 0 {
                    p0 += p;
                } else {
                    p1 += p;
                }
            }
            clip_llr((p0 / p1).ln() - apriori[b])
        })
        .collect()
}

/// `β(τ, s) = scale·base^(τ+s)`, clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Damping {
    pub scale: f64,
    pub base: f64,
}

impl Damping {
    pub fn for_order(j: usize) -> Self {
        match j {
            4 => Self {
                scale: 0.7,
                base: 0.9,
            },
            16 => Self {
                scale: 0.85,
                base: 0.85,
            },
            _ => Self {
                scale: 1.0,
                base: 0.85,
            },
        }
    }

    pub fn beta(&self, tau: usize, s: usize) -> f64 {
        (self.scale * self.base.powi((tau + s) as i32)).clamp(0.0, 1.0)
    }
}

/// Default number of extra self-iterations for a QAM order.
pub fn default_self_iterations(j: usize) -> usize {
    match j {
        4 => 2,
        16 => 5,
        _ => 6,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub n_tau: usize,
    pub n_s: usize,
    pub damping: Damping,
}

impl Schedule {
    pub fn for_order(j: usize, n_tau: usize) -> Self {
        Self {
            n_tau,
            n_s: default_self_iterations(j),
            damping: Damping::for_order(j),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpicVariant {
    /// Smooths the EP-divided feedback.
    Epic,
    /// Smooths the posterior mean and the extrinsic variance instead.
    Vamp,
}

impl fmt::Display for EpicVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EpicVariant::Epic => "SILE-EPIC",
            EpicVariant::Vamp => "VAMP",
        })
    }
}

impl FromStr for EpicVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epic" => Ok(EpicVariant::Epic),
            "vamp" => Ok(EpicVariant::Vamp),
            other => Err(invalid(format!("unknown EP variant '{other}'"))),
        }
    }
}

/// Operations charged per symbol and self-iteration outside the transforms.
fn symbol_charges(j: usize) -> (u64, u64) {
    let j = j as u64;
    let log2j = j.trailing_zeros() as u64;
    let adds = (log2j + 3 * j) + 2 * j + (2 * j + 1) + 1 + 2 + 2;
    let mults = 4 * j + 2 * j + (2 * j + 1) + 6 + 4;
    (adds, mults)
}

/// Equalizer state carried across self-iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct EpState {
    pub d_a: Vec<C64>,
    pub v_a: Vec<f64>,
    pub d_e: Vec<C64>,
    pub v_e: Vec<f64>,
    pub mu_a: Vec<C64>,
    pub gamma_bar: Vec<f64>,
}

impl EpState {
    pub fn new(n: usize, groups: usize) -> Self {
        Self {
            d_a: vec![C64::new(0.0, 0.0); n],
            v_a: vec![1.0; groups],
            d_e: vec![C64::new(0.0, 0.0); n],
            v_e: vec![1.0; groups],
            mu_a: vec![C64::new(0.0, 0.0); n],
            gamma_bar: vec![0.0; groups],
        }
    }
}

/// Frame-level SILE-EPIC detector.
#[derive(Debug, Clone)]
pub struct EpicDetector {
    precoder: Precoder,
    constellation: Constellation,
    points: Vec<C64>,
    schedule: Schedule,
    variant: EpicVariant,
}

impl EpicDetector {
    pub fn new(
        spec: PrecoderSpec,
        constellation: Constellation,
        schedule: Schedule,
        variant: EpicVariant,
    ) -> Result<Self> {
        Ok(Self {
            precoder: Precoder::new(spec)?,
            points: constellation.points(),
            constellation,
            schedule,
            variant,
        })
    }

    pub fn spec(&self) -> &PrecoderSpec {
        self.precoder.spec()
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn variant(&self) -> EpicVariant {
        self.variant
    }

    pub fn detect_frame(
        &self,
        y: &[C64],
        lambda: &[C64],
        noise_var: f64,
        apriori: &[f64],
        tau: usize,
    ) -> Result<Vec<f64>> {
        self.detect_frame_tallied(y, lambda, noise_var, apriori, tau, &mut ())
    }

    /// Runs `N_s + 1` self-iterations at turbo index `tau` and returns the
    /// extrinsic LLRs of the last posterior.
    pub fn detect_frame_tallied(
        &self,
        y: &[C64],
        lambda: &[C64],
        noise_var: f64,
        apriori: &[f64],
        tau: usize,
        tally: &mut impl OpTally,
    ) -> Result<Vec<f64>> {
        let spec = *self.precoder.spec();
        let (n, groups) = (spec.n(), spec.p());
        let c = &self.constellation;
        let (j, bps, k) = (c.order(), c.bits_per_symbol(), c.rail_bits());
        if apriori.len() != n * bps {
            return Err(invalid(format!(
                "{} a-priori LLRs given for a frame of {} coded bits",
                apriori.len(),
                n * bps
            )));
        }
        if !(noise_var > 0.0) {
            return Err(invalid(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }

        let mut sym_llr = vec![0.0; n * bps];
        for s in 0..n {
            for b in 0..bps {
                sym_llr[s * bps + b] = clip_llr(apriori[symbol_bit_index(s, b, n, k)]);
            }
        }
        let mut log_prior = vec![0.0; n * j];
        for s in 0..n {
            prior_log(
                c,
                &sym_llr[s * bps..(s + 1) * bps],
                &mut log_prior[s * j..(s + 1) * j],
            );
        }

        let (adds, mults) = symbol_charges(j);
        let mut st = EpState::new(n, groups);
        let mut pmf = vec![0.0; n * j];
        let mut gamma = vec![0.0; n];
        let mut prev_mu: Option<Vec<C64>> = None;
        let mut prev_ve: Option<Vec<f64>> = None;

        for s in 0..=self.schedule.n_s {
            let beta = self.schedule.damping.beta(tau, s);
            let (d_e, mut v_e) = fd_lmmse_tallied(
                &self.precoder,
                y,
                lambda,
                noise_var,
                &st.d_a,
                &st.v_a,
                tally,
            )?;
            if self.variant == EpicVariant::Vamp {
                if let Some(prev) = &prev_ve {
                    for (v, pv) in v_e.iter_mut().zip(prev) {
                        *v = (1.0 - beta) * *v + beta * pv;
                    }
                }
                prev_ve = Some(v_e.clone());
            }

            for sym in 0..n {
                let (mu, var) = posterior_into(
                    &self.points,
                    d_e[sym],
                    v_e[sym % groups],
                    &log_prior[sym * j..(sym + 1) * j],
                    &mut pmf[sym * j..(sym + 1) * j],
                );
                st.mu_a[sym] = mu;
                gamma[sym] = var;
            }
            if self.variant == EpicVariant::Vamp {
                if let Some(prev) = &prev_mu {
                    for (m, pm) in st.mu_a.iter_mut().zip(prev) {
                        *m = *m * (1.0 - beta) + pm * beta;
                    }
                }
                prev_mu = Some(st.mu_a.clone());
            }

            st.gamma_bar = average_variance(&gamma, &spec)?;
            debug_assert!({
                let (full, sparse) = variance_mse(&gamma, &spec)?;
                sparse <= full + 1e-12
            });

            let mut next_d = st.d_a.clone();
            let mut next_v = st.v_a.clone();
            let mut sub_mu = vec![C64::new(0.0, 0.0); spec.q()];
            let mut sub_de = vec![C64::new(0.0, 0.0); spec.q()];
            let mut sub_da = vec![C64::new(0.0, 0.0); spec.q()];
            for p in 0..groups {
                gather(&st.mu_a, groups, p, &mut sub_mu);
                gather(&d_e, groups, p, &mut sub_de);
                gather(&st.d_a, groups, p, &mut sub_da);
                let mut v_star = None;
                for q in 0..spec.q() {
                    if let EpDivision::Divided { d_star, v_star: vs } =
                        ep_divide(sub_mu[q], st.gamma_bar[p], sub_de[q], v_e[p])
                    {
                        v_star = Some(vs);
                        sub_mu[q] = match self.variant {
                            EpicVariant::Epic => damp((d_star, vs), (sub_da[q], st.v_a[p]), beta).0,
                            EpicVariant::Vamp => d_star,
                        };
                    } else {
                        sub_mu[q] = sub_da[q];
                    }
                }
                if let Some(vs) = v_star {
                    scatter(&sub_mu, groups, p, &mut next_d);
                    next_v[p] = match self.variant {
                        EpicVariant::Epic => (1.0 - beta) * vs + beta * st.v_a[p],
                        EpicVariant::Vamp => vs,
                    }
                    .max(V_MIN);
                }
            }
            st.d_a = next_d;
            st.v_a = next_v;
            st.d_e = d_e;
            st.v_e = v_e;
            tally.add(adds * n as u64);
            tally.mul(mults * n as u64);
        }

        let mut out = vec![0.0; n * bps];
        for sym in 0..n {
            let l = dem_extrinsic_llrs(
                c,
                &pmf[sym * j..(sym + 1) * j],
                &sym_llr[sym * bps..(sym + 1) * bps],
            );
            for (b, v) in l.into_iter().enumerate() {
                out[symbol_bit_index(sym, b, n, k)] = v;
            }
        }
        Ok(out)
    }
}

/// One-shot frame detection.
#[allow(clippy::too_many_arguments)]
pub fn detect_frame_epic(
    y: &[C64],
    lambda: &[C64],
    noise_var: f64,
    apriori: &[f64],
    spec: &PrecoderSpec,
    constellation: &Constellation,
    schedule: &Schedule,
    variant: EpicVariant,
    tau: usize,
) -> Result<Vec<f64>> {
    EpicDetector::new(*spec, constellation.clone(), *schedule, variant)?
        .detect_frame(y, lambda, noise_var, apriori, tau)
}

/// Per-symbol additions and multiplications of one detector call, in closed
/// form.
pub fn analytic_ops(kind: PrecoderKind, n: usize, q: usize, j: usize, n_s: usize) -> (u64, u64) {
    let log2 = |v: usize| v.trailing_zeros() as u64;
    let lt = match kind {
        PrecoderKind::Dft => log2(n),
        _ => log2(q),
    };
    let ju = j as u64;
    let reps = n_s as u64 + 1;
    let adds = reps * (4 * lt + log2(j) + 7 * ju + 6);
    let mults = match kind {
        PrecoderKind::Swh => reps * (8 * ju + 11),
        _ => reps * (4 * lt + 8 * ju + 11),
    };
    (adds, mults)
}
