use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{DetectorKind, LinkConfig};
use crate::channel::{complex_gaussian, proakis_c, real_taps, to_fd};
use crate::epic_detector::{analytic_ops, EpicDetector};
use crate::map_detector::{MapDetector, MapVariant};
use crate::numerics::Constellation;
use crate::ops::OpCount;
use crate::precode::{PrecoderKind, PrecoderSpec};
use crate::{Error, Result, C64};

/// Closed-form real operations per QAM symbol, or `None` for the exact MAP
/// detector which has no counted form.
pub fn analytic_counts(
    detector: DetectorKind,
    kind: PrecoderKind,
    n: usize,
    q: usize,
    j: usize,
    n_s: usize,
) -> Option<OpCount> {
    let log2j = j.trailing_zeros() as u64;
    let rail = 1u64 << (log2j / 2);
    let width = q as u64 * (rail - 1) + 1;
    let rows = || rail.checked_pow(q as u32);
    match detector {
        DetectorKind::SwhLog => Some(OpCount {
            adds: (3 * log2j + 2) * rows()? + 2 * width,
            mults: 6 * width,
        }),
        DetectorKind::SwhMaxLog => Some(OpCount {
            adds: (log2j + 2) * rows()? + 2 * width,
            mults: 4 * width,
        }),
        DetectorKind::SwhExact => None,
        DetectorKind::Epic | DetectorKind::Vamp => {
            let (adds, mults) = analytic_ops(kind, n, q, j, n_s);
            Some(OpCount { adds, mults })
        }
    }
}

/// Runs one detector call on a random received block with counting enabled
/// and returns the per-symbol totals. MAP detectors are measured on a single
/// group, since every group costs the same.
pub fn measured_counts(
    detector: DetectorKind,
    kind: PrecoderKind,
    n: usize,
    q: usize,
    j: usize,
    n_s: usize,
    budget: u64,
) -> Result<Option<OpCount>> {
    let constellation = Constellation::qam(j)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    let mut count = OpCount::default();
    let symbols = match (detector.map_variant(), detector.epic_variant()) {
        (Some(MapVariant::Exact), _) => return Ok(None),
        (Some(v), _) => {
            let spec = PrecoderSpec::new(PrecoderKind::Swh, q, q)?;
            let det = MapDetector::new(spec, constellation.clone(), v, budget)?;
            let (y, lambda) = random_block(q, &mut rng)?;
            let la: Vec<f64> = (0..q * constellation.bits_per_symbol())
                .map(|_| rng.gen_range(-2.0..2.0))
                .collect();
            det.detect_frame_tallied(&y, &lambda, 0.5, &la, &mut count)?;
            q
        }
        (_, Some(v)) => {
            let spec = PrecoderSpec::new(kind, n, q)?;
            let mut schedule = crate::epic_detector::Schedule::for_order(j, 0);
            schedule.n_s = n_s;
            let det = EpicDetector::new(spec, constellation.clone(), schedule, v)?;
            let (y, lambda) = random_block(n, &mut rng)?;
            let la: Vec<f64> = (0..n * constellation.bits_per_symbol())
                .map(|_| rng.gen_range(-2.0..2.0))
                .collect();
            det.detect_frame_tallied(&y, &lambda, 0.5, &la, 0, &mut count)?;
            n
        }
        _ => unreachable!("every detector kind is MAP or EP"),
    };
    Ok(count.per_symbol(symbols as u64))
}

fn random_block(n: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<C64>, Vec<C64>)> {
    let taps = if n >= 5 { proakis_c() } else { vec![1.0] };
    let lambda = to_fd(&real_taps(&taps), n)?;
    let y = (0..n).map(|_| complex_gaussian(rng, 1.0)).collect();
    Ok((y, lambda))
}

/// One line of the complexity CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub scheme: String,
    pub detector: String,
    #[serde(rename = "Q")]
    pub q: usize,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "Ns")]
    pub ns: Option<usize>,
    pub adds_analytic: Option<u64>,
    pub mults_analytic: Option<u64>,
    pub adds_measured: Option<u64>,
    pub mults_measured: Option<u64>,
}

#[allow(clippy::too_many_arguments)]
fn row(
    detector: DetectorKind,
    kind: PrecoderKind,
    n: usize,
    q: usize,
    j: usize,
    n_s: usize,
    budget: u64,
) -> Result<ComplexityRow> {
    let q = if kind == PrecoderKind::Dft { n } else { q };
    let analytic = analytic_counts(detector, kind, n, q, j, n_s);
    let measured = match measured_counts(detector, kind, n, q, j, n_s, budget) {
        Ok(m) => m,
        Err(Error::Capability { .. }) => None,
        Err(e) => return Err(e),
    };
    let is_epic = detector.epic_variant().is_some();
    Ok(ComplexityRow {
        scheme: match kind {
            PrecoderKind::Dft => "DFT".to_string(),
            k => format!("{}-Q{q}", k.to_string().to_uppercase()),
        },
        detector: detector.to_string(),
        q,
        j,
        ns: is_epic.then_some(n_s),
        adds_analytic: analytic.map(|c| c.adds),
        mults_analytic: analytic.map(|c| c.mults),
        adds_measured: measured.map(|c| c.adds),
        mults_measured: measured.map(|c| c.mults),
    })
}

/// Analytic and measured counts for the configured link.
pub fn complexity_report(config: &LinkConfig) -> Result<ComplexityRow> {
    config.validate()?;
    row(
        config.detector,
        config.precoder,
        config.n,
        config.q,
        config.j,
        config.schedule().n_s,
        config.enumeration_budget,
    )
}

/// Published per-symbol (additions, multiplications) for the reference
/// configurations, `N = 256`.
pub const TABLE4_EXPECTED: [(DetectorKind, PrecoderKind, usize, usize, u64, u64); 21] = [
    (DetectorKind::SwhLog, PrecoderKind::Swh, 4, 4, 138, 30),
    (DetectorKind::SwhLog, PrecoderKind::Swh, 4, 16, 3_610, 78),
    (DetectorKind::SwhLog, PrecoderKind::Swh, 4, 64, 81_978, 174),
    (DetectorKind::SwhLog, PrecoderKind::Swh, 8, 4, 2_066, 54),
    (DetectorKind::SwhLog, PrecoderKind::Swh, 8, 16, 917_554, 150),
    (
        DetectorKind::SwhLog,
        PrecoderKind::Swh,
        8,
        64,
        335_544_434,
        342,
    ),
    (DetectorKind::SwhMaxLog, PrecoderKind::Swh, 4, 4, 74, 20),
    (DetectorKind::SwhMaxLog, PrecoderKind::Swh, 4, 16, 1_562, 52),
    (
        DetectorKind::SwhMaxLog,
        PrecoderKind::Swh,
        4,
        64,
        32_826,
        116,
    ),
    (DetectorKind::SwhMaxLog, PrecoderKind::Swh, 8, 4, 1_042, 36),
    (
        DetectorKind::SwhMaxLog,
        PrecoderKind::Swh,
        8,
        16,
        393_266,
        100,
    ),
    (
        DetectorKind::SwhMaxLog,
        PrecoderKind::Swh,
        8,
        64,
        134_217_842,
        228,
    ),
    (DetectorKind::Epic, PrecoderKind::Swh, 8, 4, 144, 129),
    (DetectorKind::Epic, PrecoderKind::Swh, 8, 16, 804, 834),
    (DetectorKind::Epic, PrecoderKind::Swh, 8, 64, 3_304, 3_661),
    (DetectorKind::Epic, PrecoderKind::Sdft, 8, 4, 144, 165),
    (DetectorKind::Epic, PrecoderKind::Sdft, 8, 16, 804, 906),
    (DetectorKind::Epic, PrecoderKind::Sdft, 8, 64, 3_304, 3_745),
    (DetectorKind::Epic, PrecoderKind::Dft, 256, 4, 204, 225),
    (DetectorKind::Epic, PrecoderKind::Dft, 256, 16, 924, 1_026),
    (DetectorKind::Epic, PrecoderKind::Dft, 256, 64, 3_444, 3_885),
];

/// Computed rows together with every disagreement against
/// [`TABLE4_EXPECTED`].
#[derive(Debug, Clone)]
pub struct Table4Check {
    pub rows: Vec<ComplexityRow>,
    pub mismatches: Vec<String>,
}

impl Table4Check {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Evaluates every reference cell analytically and, where the enumeration
/// budget allows, by instrumented execution.
pub fn table4(budget: u64) -> Result<Table4Check> {
    let mut rows = Vec::new();
    let mut mismatches = Vec::new();
    for &(det, kind, q, j, adds, mults) in TABLE4_EXPECTED.iter() {
        let n_s = crate::epic_detector::default_self_iterations(j);
        let r = row(det, kind, 256, q, j, n_s, budget)?;
        let label = format!("{} {} J={}", r.scheme, r.detector, j);
        if (r.adds_analytic, r.mults_analytic) != (Some(adds), Some(mults)) {
            mismatches.push(format!(
                "{label}: analytic {:?}/{:?}, expected {adds}/{mults}",
                r.adds_analytic, r.mults_analytic
            ));
        }
        if let (Some(a), Some(m)) = (r.adds_measured, r.mults_measured) {
            if (a, m) != (adds, mults) {
                mismatches.push(format!(
                    "{label}: measured {a}/{m}, expected {adds}/{mults}"
                ));
            }
        } else if det.epic_variant().is_some()
            || budget >= crate::map_detector::enumeration_size(q, j).unwrap_or(u128::MAX) as u64
        {
            mismatches.push(format!("{label}: no measured count"));
        }
        rows.push(r);
    }
    Ok(Table4Check { rows, mismatches })
}

pub fn write_complexity_csv(path: &Path, rows: &[ComplexityRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_examples() {
        let c = analytic_counts(DetectorKind::SwhMaxLog, PrecoderKind::Swh, 256, 4, 4, 0).unwrap();
        assert_eq!((c.adds, c.mults), (74, 20));
        let c = analytic_counts(DetectorKind::SwhLog, PrecoderKind::Swh, 256, 4, 4, 0).unwrap();
        assert_eq!((c.adds, c.mults), (138, 30));
        assert!(analytic_counts(DetectorKind::SwhExact, PrecoderKind::Swh, 256, 4, 4, 0).is_none());
    }

    #[test]
    fn measured_map_matches_analytic() {
        for det in [DetectorKind::SwhLog, DetectorKind::SwhMaxLog] {
            for (q, j) in [(2, 4), (4, 4), (4, 16), (8, 4)] {
                let a = analytic_counts(det, PrecoderKind::Swh, 256, q, j, 0).unwrap();
                let m = measured_counts(det, PrecoderKind::Swh, 256, q, j, 0, 1 << 20)
                    .unwrap()
                    .unwrap();
                assert_eq!(a, m, "{det} Q={q} J={j}");
            }
        }
    }
}
