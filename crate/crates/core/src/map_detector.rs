//! MAP detection for the sparse Walsh-Hadamard precoder.
//!
//! After removing the channel phase on each group, the real and imaginary
//! parts of `y_p` see `|Λ_p|·W_Q·r` for the in-phase and quadrature PAM
//! vectors respectively, so each rail is detected on its own. Every entry of
//! `W_Q·z` for `z ∈ 𝓡^Q` lies on the grid `s_i = κ(−Q(√J−1) + 2i)/√Q`,
//! `i = 0..=Q(√J−1)`. Squared errors against that grid are tabulated once per
//! rail ([`CTable`]) and the metric of any hypothesis `z` is a sum of `Q`
//! table entries addressed through the precomputed index database
//! [`AmplitudeIndexDb`].
//!
//! A-priori LLRs follow `p(c) ∝ exp(−c·L)` with `L = ln p(0)/p(1)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::numerics::Constellation;
use crate::ops::OpTally;
use crate::precode::{split_groups, GroupView, PrecoderKind, PrecoderSpec};
use crate::{clip_llr, Error, Result, C64};

pub use crate::numerics::FcTable;

/// Largest number of PAM vectors `J^(Q/2)` the detector will enumerate.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1 << 20;

/// Channel magnitudes below this make the phase correction undefined.
pub const DEGENERATE_GAIN: f64 = 1e-12;

/// Phase-corrected rails of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct RailObservation {
    pub y_i: Vec<f64>,
    pub y_q: Vec<f64>,
    pub gains: Vec<f64>,
}

/// Rotates each subcarrier of the group by the conjugate channel phase.
pub fn phase_correct(group: &GroupView) -> Result<RailObservation> {
    let q = group.y.len();
    let mut out = RailObservation {
        y_i: Vec::with_capacity(q),
        y_q: Vec::with_capacity(q),
        gains: Vec::with_capacity(q),
    };
    for (k, (y, l)) in group.y.iter().zip(&group.lambda).enumerate() {
        let mag = l.norm();
        if !(mag >= DEGENERATE_GAIN) {
            return Err(Error::DegenerateChannel {
                index: group.indices.get(k).copied().unwrap_or(k),
                magnitude: mag,
            });
        }
        let rotated = l.conj() * y / mag;
        out.y_i.push(rotated.re);
        out.y_q.push(rotated.im);
        out.gains.push(mag);
    }
    Ok(out)
}

/// How the index table is stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DbStorage {
    /// One row of indices per PAM vector.
    #[default]
    Full,
    /// Only the first half of the rows; the rest follow from
    /// `S(−z, q) = Q(√J−1) − S(z, q)`.
    Half,
}

/// Enumeration of `𝓡^Q` with the amplitude index `S(z, q)` of every entry.
///
/// Row `r` holds the PAM vector whose level indices are the base-`√J`
/// digits of `r`, most significant digit first; row `rows − 1 − r` is then
/// its negation.
#[derive(Debug, Clone)]
pub struct AmplitudeIndexDb {
    q: usize,
    rail_size: usize,
    rail_bits: usize,
    rows: usize,
    width: usize,
    storage: DbStorage,
    levels: Vec<u8>,
    s_index: Vec<u16>,
    amplitudes: Vec<f64>,
    level_bits: Vec<u8>,
}

/// Number of PAM vectors `J^(Q/2)` for the given sizes, `None` on overflow.
pub fn enumeration_size(q: usize, j: usize) -> Option<u128> {
    let rail = (j as f64).sqrt().round() as u128;
    rail.checked_pow(q as u32)
}

impl AmplitudeIndexDb {
    pub fn build(q: usize, constellation: &Constellation, budget: u64) -> Result<Self> {
        Self::build_with(q, constellation, budget, DbStorage::Full)
    }

    pub fn build_with(
        q: usize,
        constellation: &Constellation,
        budget: u64,
        storage: DbStorage,
    ) -> Result<Self> {
        if q == 0 || !q.is_power_of_two() {
            return Err(invalid(format!(
                "spreading size Q = {q} is not a power of two"
            )));
        }
        let j = constellation.order();
        let required = enumeration_size(q, j).unwrap_or(u128::MAX);
        if required > budget as u128 {
            return Err(Error::Capability {
                q,
                j,
                required,
                budget,
            });
        }
        let rows = required as usize;
        let m = constellation.rail_size();
        let span = q * (m - 1);
        let width = span + 1;

        let mut levels = vec![0u8; rows * q];
        for r in 0..rows {
            let mut rem = r;
            for pos in (0..q).rev() {
                levels[r * q + pos] = (rem % m) as u8;
                rem /= m;
            }
        }

        let stored = match storage {
            DbStorage::Full => rows,
            DbStorage::Half => rows.div_ceil(2),
        };
        let mut s_index = vec![0u16; stored * q];
        let mut u = vec![0i64; q];
        for r in 0..stored {
            for (pos, v) in u.iter_mut().enumerate() {
                *v = constellation.int_level(levels[r * q + pos] as usize);
            }
            unnormalized_wht(&mut u);
            for (pos, &v) in u.iter().enumerate() {
                let twice = v + span as i64;
                debug_assert!(twice >= 0 && twice % 2 == 0 && twice as usize <= 2 * span);
                s_index[r * q + pos] = (twice / 2) as u16;
            }
        }

        let kappa = constellation.kappa();
        let sqrt_q = (q as f64).sqrt();
        let amplitudes = (0..width)
            .map(|i| kappa * (2 * i as i64 - span as i64) as f64 / sqrt_q)
            .collect();
        let rail_bits = constellation.rail_bits();
        let mut level_bits = vec![0u8; m * rail_bits];
        for lvl in 0..m {
            for b in 0..rail_bits {
                level_bits[lvl * rail_bits + b] = constellation.level_bit(lvl, b);
            }
        }
        Ok(Self {
            q,
            rail_size: m,
            rail_bits,
            rows,
            width,
            storage,
            levels,
            s_index,
            amplitudes,
            level_bits,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of PAM vectors, `J^(Q/2)`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Size of the amplitude grid, `Q(√J−1) + 1`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rail_bits(&self) -> usize {
        self.rail_bits
    }

    pub fn rail_size(&self) -> usize {
        self.rail_size
    }

    pub fn storage(&self) -> DbStorage {
        self.storage
    }

    /// Index entries actually held in memory.
    pub fn stored_entries(&self) -> usize {
        self.s_index.len()
    }

    /// Normalized amplitude grid `s_i`, constellation scale included.
    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// PAM level indices of row `r`.
    pub fn levels(&self, r: usize) -> &[u8] {
        &self.levels[r * self.q..(r + 1) * self.q]
    }

    /// `S(z_r, q)`.
    #[inline]
    pub fn s_index(&self, r: usize, q: usize) -> usize {
        let stored = self.s_index.len() / self.q;
        if r < stored {
            self.s_index[r * self.q + q] as usize
        } else {
            self.width - 1 - self.s_index[(self.rows - 1 - r) * self.q + q] as usize
        }
    }

    /// Bit `b` of PAM level index `lvl`.
    #[inline]
    pub fn level_bit(&self, lvl: usize, b: usize) -> u8 {
        self.level_bits[lvl * self.rail_bits + b]
    }
}

/// In-place Sylvester Walsh-Hadamard transform without normalization.
fn unnormalized_wht(v: &mut [i64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Whether the `1/σ²` factor is applied inside the table or deferred to the
/// final LLR difference (Max-Log-MAP only).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseScaling {
    Applied,
    Deferred,
}

/// `C[q][i] = −(y[q] − g[q]·s_i)²/σ²` for one rail of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct CTable {
    q: usize,
    width: usize,
    values: Vec<f64>,
    deferred_noise_var: Option<f64>,
}

impl CTable {
    /// Builds the table. Each entry tallies one subtraction and three
    /// multiplications (gain, square, noise scaling), or two when the noise
    /// scaling is deferred.
    pub fn build(
        y_rail: &[f64],
        gains: &[f64],
        amplitudes: &[f64],
        noise_var: f64,
        scaling: NoiseScaling,
        tally: &mut impl OpTally,
    ) -> Result<Self> {
        if y_rail.len() != gains.len() {
            return Err(invalid("rail observation and gains differ in length"));
        }
        if !(noise_var > 0.0) {
            return Err(invalid(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        let q = y_rail.len();
        let width = amplitudes.len();
        let inv = 1.0 / noise_var;
        let mut values = Vec::with_capacity(q * width);
        for (y, g) in y_rail.iter().zip(gains) {
            for s in amplitudes {
                let e = y - g * s;
                values.push(match scaling {
                    NoiseScaling::Applied => -(e * e) * inv,
                    NoiseScaling::Deferred => -(e * e),
                });
            }
        }
        let entries = (q * width) as u64;
        tally.add(entries);
        tally.mul(match scaling {
            NoiseScaling::Applied => 3 * entries,
            NoiseScaling::Deferred => 2 * entries,
        });
        Ok(Self {
            q,
            width,
            values,
            deferred_noise_var: (scaling == NoiseScaling::Deferred).then_some(noise_var),
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, q: usize, i: usize) -> f64 {
        self.values[q * self.width + i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Noise variance still to be divided out, if scaling was deferred.
    pub fn deferred_noise_var(&self) -> Option<f64> {
        self.deferred_noise_var
    }
}

/// Builds the fully scaled table for one rail against `db`'s amplitude grid.
pub fn build_c_table(
    y_rail: &[f64],
    gains: &[f64],
    noise_var: f64,
    db: &AmplitudeIndexDb,
) -> Result<CTable> {
    CTable::build(
        y_rail,
        gains,
        db.amplitudes(),
        noise_var,
        NoiseScaling::Applied,
        &mut (),
    )
}

fn check_rail(ctable: &CTable, db: &AmplitudeIndexDb, apriori: &[f64]) -> Result<()> {
    if ctable.q() != db.q() || ctable.width() != db.width() {
        return Err(invalid("C-table and amplitude database disagree on Q or J"));
    }
    if apriori.len() != db.q() * db.rail_bits() {
        return Err(invalid(format!(
            "{} a-priori LLRs given for {} rail bits",
            apriori.len(),
            db.q() * db.rail_bits()
        )));
    }
    Ok(())
}

/// Walks every PAM vector, handing its metric `t(z)` and row index to `visit`.
///
/// `t(z) = Σ_q (C[q][S(z,q)] − Σ_b φ_b(z_q)·L_{q,b}·scale)`. The prior term
/// of each bit is selected from `{0, L·scale}` and always subtracted.
fn for_each_metric<F: FnMut(usize, f64)>(
    ctable: &CTable,
    db: &AmplitudeIndexDb,
    apriori: &[f64],
    prior_scale: f64,
    tally: &mut impl OpTally,
    mut visit: F,
) {
    let q_len = db.q();
    let k = db.rail_bits();
    let select: Vec<[f64; 2]> = apriori.iter().map(|&l| [0.0, l * prior_scale]).collect();
    for r in 0..db.rows() {
        let lv = db.levels(r);
        let mut t = 0.0;
        for q in 0..q_len {
            t += ctable.get(q, db.s_index(r, q));
            let lvl = lv[q] as usize;
            for b in 0..k {
                t -= select[q * k + b][db.level_bit(lvl, b) as usize];
            }
        }
        tally.add((q_len * (1 + k)) as u64);
        visit(r, t);
    }
}

/// Exact MAP extrinsic LLRs of one rail via explicit marginalization.
pub fn exact_map_extrinsic(
    ctable: &CTable,
    db: &AmplitudeIndexDb,
    apriori: &[f64],
) -> Result<Vec<f64>> {
    check_rail(ctable, db, apriori)?;
    if ctable.deferred_noise_var().is_some() {
        return Err(invalid(
            "exact MAP needs a C-table with the noise scaling applied",
        ));
    }
    let mut metrics = vec![0.0; db.rows()];
    for_each_metric(ctable, db, apriori, 1.0, &mut (), |r, t| metrics[r] = t);
    let peak = metrics.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let q_len = db.q();
    let m = db.rail_size();
    // p[q][level] ∝ Σ_{z : z_q = level} exp(t(z))
    let mut marg = vec![0.0; q_len * m];
    for (r, &t) in metrics.iter().enumerate() {
        let w = (t - peak).exp();
        for (q, &lvl) in db.levels(r).iter().enumerate() {
            marg[q * m + lvl as usize] += w;
        }
    }
    let k = db.rail_bits();
    let mut out = Vec::with_capacity(q_len * k);
    for q in 0..q_len {
        for b in 0..k {
            let (mut p0, mut p1) = (0.0, 0.0);
            for lvl in 0..m {
                if db.level_bit(lvl, b) == 0 {
                    p0 += marg[q * m + lvl];
                } else {
                    p1 += marg[q * m + lvl];
                }
            }
            out.push(clip_llr((p0 / p1).ln() - apriori[q * k + b]));
        }
    }
    Ok(out)
}

fn fold_extrinsic(
    ctable: &CTable,
    db: &AmplitudeIndexDb,
    apriori: &[f64],
    prior_scale: f64,
    tally: &mut impl OpTally,
    mut fold: impl FnMut(f64, f64, &mut dyn OpTallyDyn) -> f64,
) -> Vec<[f64; 2]> {
    let k = db.rail_bits();
    let mut acc = vec![[f64::NEG_INFINITY; 2]; db.q() * k];
    let mut fold_ops = DynCount::default();
    for_each_metric(ctable, db, apriori, prior_scale, tally, |r, t| {
        for (q, &lvl) in db.levels(r).iter().enumerate() {
            for b in 0..k {
                let slot = &mut acc[q * k + b][db.level_bit(lvl as usize, b) as usize];
                *slot = fold(*slot, t, &mut fold_ops);
            }
        }
    });
    tally.add(fold_ops.adds);
    acc
}

/// Object-safe counting sink used inside the fold closures.
trait OpTallyDyn {
    fn add(&mut self, n: u64);
}

#[derive(Default)]
struct DynCount {
    adds: u64,
}

impl OpTallyDyn for DynCount {
    #[inline]
    fn add(&mut self, n: u64) {
        self.adds += n;
    }
}

/// Log-MAP extrinsic LLRs of one rail: every metric is folded into running
/// Jacobian-logarithm accumulators, one per `(q, b, bit)`, through the
/// correction table. Each fold tallies two additions.
pub fn log_map_extrinsic(
    ctable: &CTable,
    db: &AmplitudeIndexDb,
    fc: &FcTable,
    apriori: &[f64],
    tally: &mut impl OpTally,
) -> Result<Vec<f64>> {
    check_rail(ctable, db, apriori)?;
    if ctable.deferred_noise_var().is_some() {
        return Err(invalid(
            "Log-MAP needs a C-table with the noise scaling applied",
        ));
    }
    let acc = fold_extrinsic(ctable, db, apriori, 1.0, tally, |acc, t, ops| {
        ops.add(2);
        fc.max_star(acc, t)
    });
    Ok(acc
        .iter()
        .zip(apriori)
        .map(|(a, la)| clip_llr(a[0] - a[1] - la))
        .collect())
}

/// Max-Log-MAP extrinsic LLRs of one rail. Maximum tracking costs no
/// additions. With a deferred C-table the priors are pre-scaled by `σ²` and
/// the difference of maxima is divided by `σ²` at the end.
pub fn max_log_map_extrinsic(
    ctable: &CTable,
    db: &AmplitudeIndexDb,
    apriori: &[f64],
    tally: &mut impl OpTally,
) -> Result<Vec<f64>> {
    check_rail(ctable, db, apriori)?;
    let noise_var = ctable.deferred_noise_var().unwrap_or(1.0);
    let acc = fold_extrinsic(ctable, db, apriori, noise_var, tally, |acc, t, _| {
        acc.max(t)
    });
    Ok(acc
        .iter()
        .zip(apriori)
        .map(|(a, la)| clip_llr((a[0] - a[1]) / noise_var - la))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapVariant {
    Exact,
    Log,
    MaxLog,
}

impl fmt::Display for MapVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapVariant::Exact => "MAP",
            MapVariant::Log => "Log-MAP",
            MapVariant::MaxLog => "Max-Log-MAP",
        })
    }
}

impl FromStr for MapVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(MapVariant::Exact),
            "log" => Ok(MapVariant::Log),
            "maxlog" | "max-log" => Ok(MapVariant::MaxLog),
            other => Err(invalid(format!("unknown MAP variant '{other}'"))),
        }
    }
}

/// Frame-level SWH MAP detector.
///
/// LLR blocks hold the in-phase bits of all symbols followed by the
/// quadrature bits; symbol `n` owns positions `n·k .. n·k + k` of each half,
/// `k = log2(J)/2`.
#[derive(Debug, Clone)]
pub struct MapDetector {
    spec: PrecoderSpec,
    constellation: Constellation,
    variant: MapVariant,
    db: AmplitudeIndexDb,
    fc: FcTable,
}

impl MapDetector {
    pub fn new(
        spec: PrecoderSpec,
        constellation: Constellation,
        variant: MapVariant,
        budget: u64,
    ) -> Result<Self> {
        if spec.kind() != PrecoderKind::Swh {
            return Err(invalid(format!(
                "MAP detection needs I/Q-separable spreading; {} precoding is not supported",
                spec.kind()
            )));
        }
        let db = AmplitudeIndexDb::build(spec.q(), &constellation, budget)?;
        Ok(Self {
            spec,
            constellation,
            variant,
            db,
            fc: FcTable::new(),
        })
    }

    pub fn variant(&self) -> MapVariant {
        self.variant
    }

    pub fn db(&self) -> &AmplitudeIndexDb {
        &self.db
    }

    pub fn detect_frame(
        &self,
        y: &[C64],
        lambda: &[C64],
        noise_var: f64,
        apriori: &[f64],
    ) -> Result<Vec<f64>> {
        self.detect_frame_tallied(y, lambda, noise_var, apriori, &mut ())
    }

    /// Detects a frame while counting the arithmetic of C-table builds, metric
    /// accumulation, prior additions and LogSumExp folds.
    pub fn detect_frame_tallied(
        &self,
        y: &[C64],
        lambda: &[C64],
        noise_var: f64,
        apriori: &[f64],
        tally: &mut impl OpTally,
    ) -> Result<Vec<f64>> {
        let n = self.spec.n();
        let k = self.constellation.rail_bits();
        if apriori.len() != 2 * n * k {
            return Err(invalid(format!(
                "{} a-priori LLRs given for a frame of {} coded bits",
                apriori.len(),
                2 * n * k
            )));
        }
        let scaling = match self.variant {
            MapVariant::MaxLog => NoiseScaling::Deferred,
            _ => NoiseScaling::Applied,
        };
        let mut out = vec![0.0; apriori.len()];
        let mut rail_prior = vec![0.0; self.spec.q() * k];
        for group in split_groups(&self.spec, y, lambda)? {
            let obs = phase_correct(&group)?;
            for (rail, y_rail) in [obs.y_i.as_slice(), obs.y_q.as_slice()]
                .into_iter()
                .enumerate()
            {
                let base = rail * n * k;
                for (q, &sym) in group.indices.iter().enumerate() {
                    rail_prior[q * k..(q + 1) * k]
                        .copy_from_slice(&apriori[base + sym * k..base + (sym + 1) * k]);
                }
                let ct = CTable::build(
                    y_rail,
                    &obs.gains,
                    self.db.amplitudes(),
                    noise_var,
                    scaling,
                    tally,
                )?;
                let ext = match self.variant {
                    MapVariant::Exact => exact_map_extrinsic(&ct, &self.db, &rail_prior)?,
                    MapVariant::Log => {
                        log_map_extrinsic(&ct, &self.db, &self.fc, &rail_prior, tally)?
                    }
                    MapVariant::MaxLog => max_log_map_extrinsic(&ct, &self.db, &rail_prior, tally)?,
                };
                for (q, &sym) in group.indices.iter().enumerate() {
                    out[base + sym * k..base + (sym + 1) * k]
                        .copy_from_slice(&ext[q * k..(q + 1) * k]);
                }
            }
        }
        Ok(out)
    }
}

/// One-shot frame detection; builds the database on every call.
pub fn detect_frame_map(
    spec: &PrecoderSpec,
    constellation: &Constellation,
    y: &[C64],
    lambda: &[C64],
    noise_var: f64,
    apriori: &[f64],
    variant: MapVariant,
) -> Result<Vec<f64>> {
    MapDetector::new(
        *spec,
        constellation.clone(),
        variant,
        DEFAULT_ENUMERATION_BUDGET,
    )?
    .detect_frame(y, lambda, noise_var, apriori)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::fwht;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn qpsk() -> Constellation {
        Constellation::qam(4).unwrap()
    }

    /// Brute-force rail LLRs: ‖y − g·W_Q z‖² per hypothesis, no tables.
    fn brute_force_rail(
        y: &[f64],
        gains: &[f64],
        noise_var: f64,
        c: &Constellation,
        apriori: &[f64],
    ) -> Vec<f64> {
        let q = y.len();
        let m = c.rail_size();
        let k = c.rail_bits();
        let rows = m.pow(q as u32);
        let mut num = vec![0.0; q * k];
        let mut den = vec![0.0; q * k];
        for r in 0..rows {
            let idx: Vec<usize> = (0..q)
                .map(|pos| (r / m.pow((q - 1 - pos) as u32)) % m)
                .collect();
            let z: Vec<f64> = idx.iter().map(|&i| c.levels()[i]).collect();
            let u = fwht(&z).unwrap();
            let dist: f64 = (0..q).map(|i| (y[i] - gains[i] * u[i]).powi(2)).sum();
            let mut logp = -dist / noise_var;
            for (pos, &i) in idx.iter().enumerate() {
                for b in 0..k {
                    logp -= c.level_bit(i, b) as f64 * apriori[pos * k + b];
                }
            }
            let w = logp.exp();
            for (pos, &i) in idx.iter().enumerate() {
                for b in 0..k {
                    if c.level_bit(i, b) == 0 {
                        num[pos * k + b] += w;
                    } else {
                        den[pos * k + b] += w;
                    }
                }
            }
        }
        (0..q * k)
            .map(|i| (num[i] / den[i]).ln() - apriori[i])
            .collect()
    }

    #[test]
    fn phase_correction_cases() {
        let g = GroupView {
            p: 0,
            indices: vec![0, 1],
            y: vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.25)],
            lambda: vec![C64::new(2.0, 0.0), C64::new(0.0, 3.0)],
        };
        let obs = phase_correct(&g).unwrap();
        assert_eq!(obs.y_i[0], 1.0);
        assert_eq!(obs.y_q[0], 2.0);
        // −j·(−0.5 + 0.25j) = 0.25 + 0.5j
        assert!((obs.y_i[1] - 0.25).abs() < 1e-15 && (obs.y_q[1] - 0.5).abs() < 1e-15);
        assert_eq!(obs.gains, vec![2.0, 3.0]);

        let bad = GroupView {
            lambda: vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            indices: vec![4, 6],
            ..g
        };
        assert!(matches!(
            phase_correct(&bad),
            Err(Error::DegenerateChannel { index: 6, .. })
        ));
    }

    #[test]
    fn noiseless_rails_are_spread_pam() {
        let c = Constellation::qam(16).unwrap();
        let spec = PrecoderSpec::new(PrecoderKind::Swh, 4, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bits: Vec<u8> = (0..16).map(|_| rng.gen_range(0..2)).collect();
        let d = c.qam_map(&bits[..8], &bits[8..]).unwrap();
        let lambda: Vec<C64> = (0..4)
            .map(|_| C64::from_polar(rng.gen_range(0.2..2.0), rng.gen_range(-3.0..3.0)))
            .collect();
        let x = crate::precode::precode(&spec, &d).unwrap();
        let y: Vec<C64> = x.iter().zip(&lambda).map(|(a, b)| a * b).collect();
        let g = &split_groups(&spec, &y, &lambda).unwrap()[0];
        let obs = phase_correct(g).unwrap();
        let ri = fwht(&d.iter().map(|v| v.re).collect::<Vec<_>>()).unwrap();
        for q in 0..4 {
            assert!((obs.y_i[q] - obs.gains[q] * ri[q]).abs() < 1e-12);
        }
    }

    #[test]
    fn c_table_shape() {
        let db = AmplitudeIndexDb::build(8, &qpsk(), DEFAULT_ENUMERATION_BUDGET).unwrap();
        assert_eq!(db.width(), 9);
        assert_eq!(db.rows(), 256);
        let c16 = Constellation::qam(16).unwrap();
        let db16 = AmplitudeIndexDb::build(4, &c16, DEFAULT_ENUMERATION_BUDGET).unwrap();
        assert_eq!(db16.width(), 13);
        let s = db16.amplitudes()[5];
        let t = build_c_table(
            &[2.0 * s, 0.3, -0.1, 1.0],
            &[2.0, 1.0, 1.0, 1.0],
            0.5,
            &db16,
        )
        .unwrap();
        assert_eq!(t.values().len(), 4 * 13);
        assert_eq!(t.get(0, 5), 0.0);
        assert!(t.values().iter().all(|&v| v <= 0.0));
        assert!((0..13).all(|i| t.get(0, i) <= t.get(0, 5)));
    }

    #[test]
    fn q2_qpsk_indices() {
        let db = AmplitudeIndexDb::build(2, &qpsk(), DEFAULT_ENUMERATION_BUDGET).unwrap();
        assert_eq!(db.rows(), 4);
        let mut seen = std::collections::BTreeSet::new();
        for r in 0..4 {
            let z: Vec<i64> = db
                .levels(r)
                .iter()
                .map(|&l| qpsk().int_level(l as usize))
                .collect();
            let u = [z[0] + z[1], z[0] - z[1]];
            for q in 0..2 {
                assert!(u[q] == -2 || u[q] == 0 || u[q] == 2);
                let i = db.s_index(r, q);
                assert_eq!(2 * i as i64 - 2, u[q]);
                seen.insert(i);
            }
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn negation_symmetry_and_half_storage() {
        let c = Constellation::qam(16).unwrap();
        let full = AmplitudeIndexDb::build(4, &c, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let half = AmplitudeIndexDb::build_with(4, &c, DEFAULT_ENUMERATION_BUDGET, DbStorage::Half)
            .unwrap();
        assert_eq!(half.stored_entries() * 2, full.stored_entries());
        let span = full.width() - 1;
        for r in 0..full.rows() {
            let neg = full.rows() - 1 - r;
            for (a, b) in full.levels(r).iter().zip(full.levels(neg)) {
                assert_eq!(*a as usize, 3 - *b as usize);
            }
            for q in 0..4 {
                assert_eq!(full.s_index(neg, q), span - full.s_index(r, q));
                assert_eq!(full.s_index(r, q), half.s_index(r, q));
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let c = Constellation::qam(64).unwrap();
        let err = AmplitudeIndexDb::build(8, &c, DEFAULT_ENUMERATION_BUDGET).unwrap_err();
        assert!(matches!(err, Error::Capability { required, .. } if required == 1 << 24));
    }

    #[test]
    fn exact_matches_brute_force_q2() {
        let c = qpsk();
        let db = AmplitudeIndexDb::build(2, &c, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g: Vec<f64> = (0..2).map(|_| rng.gen_range(0.1..2.0)).collect();
            let la = [0.0, 0.0];
            let ct = build_c_table(&y, &g, 1.0, &db).unwrap();
            let got = exact_map_extrinsic(&ct, &db, &la).unwrap();
            let want = brute_force_rail(&y, &g, 1.0, &c, &la);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn exact_matches_brute_force_with_priors_16qam() {
        let c = Constellation::qam(16).unwrap();
        let db = AmplitudeIndexDb::build(2, &c, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g: Vec<f64> = (0..2).map(|_| rng.gen_range(0.1..2.0)).collect();
            let la: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let ct = build_c_table(&y, &g, 0.4, &db).unwrap();
            let got = exact_map_extrinsic(&ct, &db, &la).unwrap();
            let want = brute_force_rail(&y, &g, 0.4, &c, &la);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn q1_reduces_to_scalar_demapper() {
        let c = qpsk();
        let db = AmplitudeIndexDb::build(1, &c, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let k = c.kappa();
        let (y, g, s2) = (0.3, 1.5, 0.7);
        let ct = build_c_table(&[y], &[g], s2, &db).unwrap();
        let exact = exact_map_extrinsic(&ct, &db, &[0.0]).unwrap()[0];
        // bit 0 ↔ +κ
        let scalar = (-(y - g * k).powi(2) / s2) - (-(y + g * k).powi(2) / s2);
        assert!((exact - scalar).abs() < 1e-12);
        let maxlog = max_log_map_extrinsic(&ct, &db, &[0.0], &mut ()).unwrap()[0];
        assert!((maxlog - scalar).abs() < 1e-12);
    }

    #[test]
    fn log_map_two_term_check() {
        let fc = FcTable::new();
        assert!((fc.max_star(0.0, 0.0) - 2f64.ln()).abs() <= fc.step());
    }

    #[test]
    fn noiseless_saturation() {
        let c = qpsk();
        let db = AmplitudeIndexDb::build(4, &c, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let z = [c.levels()[1], c.levels()[0], c.levels()[0], c.levels()[1]];
        let g = [1.0, 0.8, 1.2, 0.5];
        let u = fwht(&z).unwrap();
        let y: Vec<f64> = (0..4).map(|i| g[i] * u[i]).collect();
        let ct = build_c_table(&y, &g, 1e-4, &db).unwrap();
        let l = exact_map_extrinsic(&ct, &db, &[0.0; 4]).unwrap();
        for (q, &lv) in z.iter().enumerate() {
            let bit = c.pam_bit(lv, 0).unwrap();
            assert_eq!(crate::fec::hard(l[q]), bit);
            assert!(l[q].abs() > 50.0);
        }
    }
}
