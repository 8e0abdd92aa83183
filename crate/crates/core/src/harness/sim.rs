use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::LinkConfig;
use crate::channel::{complex_gaussian, noise_var_from_ebn0, real_taps, to_fd};
use crate::epic_detector::EpicDetector;
use crate::fec::{hard, info_len_for, rsc_encode_block, BcjrDecoder, Interleaver};
use crate::map_detector::MapDetector;
use crate::numerics::Constellation;
use crate::ops::OpTally;
use crate::precode::Precoder;
use crate::{Result, C64};

/// Code rate used to convert `Eb/N0` into a noise variance.
pub const NOMINAL_RATE: f64 = 0.5;

/// Frames simulated per parallel batch before the stop rule is checked.
const BATCH: u64 = 32;

/// Per-frame RNG stream derived from the master seed, the SNR point and the
/// frame counter.
pub fn frame_rng(seed: u64, ebn0_db: f64, frame: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&ebn0_db.to_bits().to_le_bytes());
    key[16..24].copy_from_slice(&frame.to_le_bytes());
    key[24..].copy_from_slice(b"sp-frame");
    ChaCha8Rng::from_seed(key)
}

#[derive(Debug, Clone)]
enum Detector {
    Map(MapDetector),
    Epic(EpicDetector),
}

/// Transmitter, channel and receiver built from a [`LinkConfig`].
#[derive(Debug, Clone)]
pub struct Link {
    pub config: LinkConfig,
    constellation: Constellation,
    precoder: Precoder,
    lambda: Vec<C64>,
    detector: Detector,
    decoder: BcjrDecoder,
    n_coded: usize,
    n_info: usize,
}

/// Signals exchanged in one turbo iteration, all in coded-bit order.
#[derive(Debug, Clone)]
pub struct TurboStep {
    pub det_apriori: Vec<f64>,
    pub det_extrinsic: Vec<f64>,
    pub dec_extrinsic: Vec<f64>,
}

/// Result of one simulated frame.
#[derive(Debug, Clone, Default)]
pub struct FrameOutcome {
    pub bit_errors: u64,
    pub iterations: u64,
    /// Hard information-bit decisions after the last turbo iteration.
    pub decisions: Vec<u8>,
    /// Transmitted coded bits, before interleaving.
    pub coded: Vec<u8>,
    pub steps: Vec<TurboStep>,
}

impl Link {
    pub fn new(config: &LinkConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.precoder_spec()?;
        let constellation = config.constellation()?;
        let lambda = to_fd(&real_taps(&config.taps), config.n)?;
        let detector = match (
            config.detector.map_variant(),
            config.detector.epic_variant(),
        ) {
            (Some(v), _) => Detector::Map(MapDetector::new(
                spec,
                constellation.clone(),
                v,
                config.enumeration_budget,
            )?),
            (_, Some(v)) => Detector::Epic(EpicDetector::new(
                spec,
                constellation.clone(),
                config.schedule(),
                v,
            )?),
            _ => unreachable!("every detector kind is MAP or EP"),
        };
        let n_coded = config.coded_len();
        Ok(Self {
            config: config.clone(),
            precoder: Precoder::new(spec)?,
            constellation,
            lambda,
            detector,
            decoder: BcjrDecoder::default(),
            n_coded,
            n_info: info_len_for(n_coded)?,
        })
    }

    pub fn info_len(&self) -> usize {
        self.n_info
    }

    pub fn coded_len(&self) -> usize {
        self.n_coded
    }

    pub fn lambda(&self) -> &[C64] {
        &self.lambda
    }

    /// One detector call on a received block.
    pub fn detect(
        &self,
        y: &[C64],
        noise_var: f64,
        apriori: &[f64],
        tau: usize,
        tally: &mut impl OpTally,
    ) -> Result<Vec<f64>> {
        match &self.detector {
            Detector::Map(d) => d.detect_frame_tallied(y, &self.lambda, noise_var, apriori, tally),
            Detector::Epic(d) => {
                d.detect_frame_tallied(y, &self.lambda, noise_var, apriori, tau, tally)
            }
        }
    }

    /// Draws data, transmits one frame and runs the turbo receiver.
    pub fn simulate_frame(
        &self,
        noise_var: f64,
        rng: &mut impl Rng,
        early_exit: bool,
        record: bool,
    ) -> Result<FrameOutcome> {
        let info: Vec<u8> = (0..self.n_info).map(|_| rng.gen_range(0..2u8)).collect();
        let coded = rsc_encode_block(&info, self.n_coded)?;
        let pi = Interleaver::random(self.n_coded, rng);
        let tx = pi.interleave(&coded)?;
        let half = self.n_coded / 2;
        let d = self.constellation.qam_map(&tx[..half], &tx[half..])?;
        let x = self.precoder.apply(&d, &mut ())?;
        let y: Vec<C64> = x
            .iter()
            .zip(&self.lambda)
            .map(|(xk, lk)| lk * xk + complex_gaussian(rng, noise_var))
            .collect();

        let zeros = vec![0.0; self.n_coded];
        let mut la_det = zeros.clone();
        let mut out = FrameOutcome {
            coded: if record { coded.clone() } else { Vec::new() },
            ..Default::default()
        };
        let mut decided = vec![0u8; self.n_info];
        for tau in 0..=self.config.n_tau {
            let le_det = self.detect(&y, noise_var, &la_det, tau, &mut ())?;
            let la_dec = pi.deinterleave(&le_det)?;
            let dec = self.decoder.decode(&la_dec, &zeros)?;
            let le_dec: Vec<f64> = dec
                .app
                .iter()
                .zip(&la_dec)
                .map(|(a, l)| crate::clip_llr(a - l))
                .collect();
            out.iterations = tau as u64 + 1;
            for (dst, l) in decided.iter_mut().zip(&dec.info) {
                *dst = hard(*l);
            }
            if record {
                out.steps.push(TurboStep {
                    det_apriori: pi.deinterleave(&la_det)?,
                    det_extrinsic: la_dec.clone(),
                    dec_extrinsic: le_dec.clone(),
                });
            }
            if early_exit && tau < self.config.n_tau && decided == info {
                break;
            }
            la_det = pi.interleave(&le_dec)?;
        }
        out.bit_errors = decided.iter().zip(&info).filter(|(a, b)| a != b).count() as u64;
        out.decisions = decided;
        Ok(out)
    }
}

/// Aggregated Monte-Carlo result at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FerRecord {
    pub scheme: String,
    pub detector: String,
    pub q: usize,
    pub j: usize,
    pub ebn0_db: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub bit_errors: u64,
    pub fer: f64,
    pub ber: f64,
    pub mean_ti: f64,
}

/// One line of the FER CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FerCsvRow {
    pub scheme: String,
    pub detector: String,
    #[serde(rename = "Q")]
    pub q: usize,
    #[serde(rename = "J")]
    pub j: usize,
    pub ebn0_db: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub fer: f64,
    pub ber: f64,
    pub mean_ti: f64,
}

impl From<&FerRecord> for FerCsvRow {
    fn from(r: &FerRecord) -> Self {
        Self {
            scheme: r.scheme.clone(),
            detector: r.detector.clone(),
            q: r.q,
            j: r.j,
            ebn0_db: r.ebn0_db,
            frames: r.frames,
            frame_errors: r.frame_errors,
            fer: r.fer,
            ber: r.ber,
            mean_ti: r.mean_ti,
        }
    }
}

/// Simulates frames until `min_frame_errors` frame errors or `max_frames`
/// frames. The result depends only on the configuration and seed: frames are
/// evaluated in parallel batches but aggregated strictly in frame order.
pub fn run_fer_point(config: &LinkConfig, ebn0_db: f64) -> Result<FerRecord> {
    let link = Link::new(config)?;
    run_fer_point_with(&link, ebn0_db)
}

pub fn run_fer_point_with(link: &Link, ebn0_db: f64) -> Result<FerRecord> {
    let cfg = &link.config;
    let noise_var =
        noise_var_from_ebn0(ebn0_db, NOMINAL_RATE, link.constellation.bits_per_symbol());
    let (mut frames, mut frame_errors, mut bit_errors, mut ti) = (0u64, 0u64, 0u64, 0u64);
    'outer: while frames < cfg.max_frames && frame_errors < cfg.min_frame_errors {
        let start = frames;
        let end = (start + BATCH).min(cfg.max_frames);
        let outcomes: Vec<Result<(u64, u64)>> = (start..end)
            .into_par_iter()
            .map(|f| {
                let mut rng = frame_rng(cfg.seed, ebn0_db, f);
                link.simulate_frame(noise_var, &mut rng, cfg.early_exit, false)
                    .map(|o| (o.bit_errors, o.iterations))
            })
            .collect();
        for o in outcomes {
            let (be, it) = o?;
            frames += 1;
            bit_errors += be;
            frame_errors += u64::from(be > 0);
            ti += it;
            if frame_errors >= cfg.min_frame_errors {
                break 'outer;
            }
        }
    }
    Ok(FerRecord {
        scheme: cfg.scheme(),
        detector: cfg.detector.to_string(),
        q: link.precoder.spec().q(),
        j: cfg.j,
        ebn0_db,
        frames,
        frame_errors,
        bit_errors,
        fer: frame_errors as f64 / frames as f64,
        ber: bit_errors as f64 / (frames as f64 * link.n_info as f64),
        mean_ti: ti as f64 / frames as f64,
    })
}

/// Runs every grid point, writing the CSV to `config.output` when set.
pub fn run_sweep(config: &LinkConfig) -> Result<Vec<FerRecord>> {
    let link = Link::new(config)?;
    let records = config
        .ebn0_db
        .iter()
        .map(|&e| run_fer_point_with(&link, e))
        .collect::<Result<Vec<_>>>()?;
    if let Some(path) = &config.output {
        write_fer_csv(path, &records)?;
    }
    Ok(records)
}

pub fn write_fer_csv(path: &Path, records: &[FerRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(FerCsvRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_fer_csv(path: &Path) -> Result<Vec<FerCsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// `Eb/N0` at which the FER curve crosses `target`, by linear interpolation
/// of `log10(FER)` between the bracketing points. Points with zero errors are
/// skipped.
pub fn snr_at_fer(records: &[FerRecord], target: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.frame_errors > 0)
        .map(|r| (r.ebn0_db, r.fer))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lt = target.log10();
    for w in pts.windows(2) {
        let ((x0, f0), (x1, f1)) = (w[0], w[1]);
        if f0 >= target && f1 <= target {
            let (l0, l1) = (f0.log10(), f1.log10());
            if (l0 - l1).abs() < 1e-15 {
                return Some(x0);
            }
            return Some(x0 + (l0 - lt) / (l0 - l1) * (x1 - x0));
        }
    }
    None
}
