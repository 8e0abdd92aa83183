use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::LinkConfig;
use super::sim::{frame_rng, run_fer_point_with, Link, NOMINAL_RATE};
use crate::channel::noise_var_from_ebn0;
use crate::fec::{rsc_encode_block, BcjrDecoder};
use crate::{clip_llr, Result};

/// `1 − mean log2(1 + e^{−(1−2c)L})` over bit/LLR pairs.
pub fn mutual_information(bits: &[u8], llrs: &[f64]) -> f64 {
    if bits.is_empty() {
        return 0.0;
    }
    let loss: f64 = bits
        .iter()
        .zip(llrs)
        .map(|(&c, &l)| {
            let x = if c == 0 { l } else { -l };
            softplus_neg(x) / std::f64::consts::LN_2
        })
        .sum();
    1.0 - loss / bits.len() as f64
}

/// `ln(1 + e^{−x})` without overflow.
fn softplus_neg(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Mutual information carried by consistent Gaussian LLRs of standard
/// deviation `sigma`, i.e. `L ~ N(±σ²/2, σ²)`.
pub fn j_function(sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    let mu = sigma * sigma / 2.0;
    let (lo, hi) = (mu - 12.0 * sigma, mu + 12.0 * sigma);
    let steps = 4000;
    let h = (hi - lo) / steps as f64;
    let f = |x: f64| {
        let z = (x - mu) / sigma;
        (-0.5 * z * z).exp() * softplus_neg(x)
    };
    let mut acc = f(lo) + f(hi);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    let integral = acc * h / 3.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    1.0 - integral / std::f64::consts::LN_2
}

/// Inverse of [`j_function`] by bisection.
pub fn j_inverse(info: f64) -> f64 {
    if info <= 0.0 {
        return 0.0;
    }
    let target = info.min(1.0 - 1e-9);
    let (mut lo, mut hi) = (0.0, 80.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if j_function(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Consistent Gaussian LLRs for `bits` at standard deviation `sigma`.
pub fn gaussian_llrs(bits: &[u8], sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    bits.iter()
        .map(|&c| {
            let n: f64 = rng.sample(StandardNormal);
            let mean = sigma * sigma / 2.0;
            clip_llr(if c == 0 { mean } else { -mean } + sigma * n)
        })
        .collect()
}

/// Mutual information at one turbo iteration, averaged over frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitPoint {
    pub ti: usize,
    #[serde(rename = "IA_det")]
    pub ia_det: f64,
    #[serde(rename = "IE_det")]
    pub ie_det: f64,
    #[serde(rename = "IA_dec")]
    pub ia_dec: f64,
    #[serde(rename = "IE_dec")]
    pub ie_dec: f64,
}

/// One sample of the decoder transfer curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderPoint {
    #[serde(rename = "IA")]
    pub ia: f64,
    #[serde(rename = "IE")]
    pub ie: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitReport {
    pub ebn0_db: f64,
    pub trajectory: Vec<ExitPoint>,
    pub decoder_curve: Vec<DecoderPoint>,
}

/// Lowest grid point whose FER, estimated on a short run, is below one half.
pub fn default_exit_ebn0(config: &LinkConfig) -> Result<f64> {
    let mut quick = config.clone();
    quick.min_frame_errors = 20;
    quick.max_frames = 100;
    let link = Link::new(&quick)?;
    let mut grid = config.ebn0_db.clone();
    grid.sort_by(f64::total_cmp);
    for &e in &grid {
        if run_fer_point_with(&link, e)?.fer < 0.5 {
            return Ok(e);
        }
    }
    Ok(grid.last().copied().unwrap_or(0.0))
}

/// Measures detector and decoder mutual information over `n_tau + 1` turbo
/// iterations with early exit disabled, and samples the decoder transfer
/// curve with synthetic a-priori LLRs.
pub fn exit_trajectory(config: &LinkConfig, ebn0_db: f64) -> Result<ExitReport> {
    let link = Link::new(config)?;
    let noise_var = noise_var_from_ebn0(ebn0_db, NOMINAL_RATE, config.j.trailing_zeros() as usize);
    let iters = config.n_tau + 1;
    let mut sums = vec![[0.0f64; 4]; iters];
    let frames = config.exit_frames.max(1);
    for f in 0..frames {
        let mut rng = frame_rng(config.seed, ebn0_db, f);
        let out = link.simulate_frame(noise_var, &mut rng, false, true)?;
        for (tau, step) in out.steps.iter().enumerate() {
            let ie_det = mutual_information(&out.coded, &step.det_extrinsic);
            sums[tau][0] += mutual_information(&out.coded, &step.det_apriori);
            sums[tau][1] += ie_det;
            sums[tau][2] += ie_det;
            sums[tau][3] += mutual_information(&out.coded, &step.dec_extrinsic);
        }
    }
    let trajectory = sums
        .iter()
        .enumerate()
        .map(|(ti, s)| ExitPoint {
            ti,
            ia_det: s[0] / frames as f64,
            ie_det: s[1] / frames as f64,
            ia_dec: s[2] / frames as f64,
            ie_dec: s[3] / frames as f64,
        })
        .collect();
    let decoder_curve = decoder_transfer(
        link.info_len(),
        link.coded_len(),
        config.seed,
        frames.min(50),
        &(0..=10)
            .map(|i| (i as f64 / 10.0).min(0.99))
            .collect::<Vec<_>>(),
    )?;
    Ok(ExitReport {
        ebn0_db,
        trajectory,
        decoder_curve,
    })
}

/// Extrinsic information of the BCJR decoder fed with consistent Gaussian
/// LLRs at each a-priori information level.
pub fn decoder_transfer(
    n_info: usize,
    n_coded: usize,
    seed: u64,
    frames: u64,
    grid: &[f64],
) -> Result<Vec<DecoderPoint>> {
    let dec = BcjrDecoder::default();
    let zeros = vec![0.0; n_coded];
    grid.iter()
        .map(|&ia| {
            let sigma = j_inverse(ia);
            let mut acc = 0.0;
            for f in 0..frames {
                let mut rng = frame_rng(seed ^ 0x5eed_dec0, ia, f);
                let info: Vec<u8> = (0..n_info).map(|_| rng.gen_range(0..2u8)).collect();
                let coded = rsc_encode_block(&info, n_coded)?;
                let la = gaussian_llrs(&coded, sigma, &mut rng);
                let out = dec.decode(&la, &zeros)?;
                let le: Vec<f64> = out
                    .app
                    .iter()
                    .zip(&la)
                    .map(|(a, l)| clip_llr(a - l))
                    .collect();
                acc += mutual_information(&coded, &le);
            }
            Ok(DecoderPoint {
                ia,
                ie: acc / frames as f64,
            })
        })
        .collect()
}

/// Path of the decoder-curve file written next to an EXIT CSV.
pub fn decoder_curve_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("exit");
    path.with_file_name(format!("{stem}_decoder.csv"))
}

/// Writes the trajectory to `path` and the decoder curve beside it.
pub fn write_exit_csv(path: &Path, report: &ExitReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in &report.trajectory {
        w.serialize(p)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(decoder_curve_path(path))?;
    for p in &report.decoder_curve {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
