//! Built-in property checks run by the `selftest` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{complex_gaussian, proakis_c, real_taps, to_fd};
use crate::epic_detector::{fd_lmmse, variance_mse};
use crate::fec::{rsc_encode_block, BcjrDecoder, MaxStar};
use crate::map_detector::{build_c_table, AmplitudeIndexDb, DEFAULT_ENUMERATION_BUDGET};
use crate::numerics::{fft, fwht, Constellation};
use crate::precode::{deprecode, precode, PrecoderKind, PrecoderSpec};
use crate::{Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Largest observed deviation, or the number of violations.
    pub detail: f64,
}

fn check(name: &'static str, detail: f64, tol: f64) -> Check {
    Check {
        name,
        passed: detail <= tol,
        detail,
    }
}

fn rand_block(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n).map(|_| complex_gaussian(rng, 1.0)).collect()
}

fn max_dev(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Involution of the FWHT, FFT round trips and precoder unitarity.
pub fn transforms(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = 0.0f64;
    for log in 1..=8 {
        let n = 1usize << log;
        let d = rand_block(n, rng);
        worst = worst.max(max_dev(&fwht(&fwht(&d)?)?, &d));
        worst = worst.max(max_dev(&fft(&fft(&d, false)?, true)?, &d));
        for kind in [PrecoderKind::Dft, PrecoderKind::Sdft, PrecoderKind::Swh] {
            let spec = PrecoderSpec::new(kind, n, (n / 2).max(1))?;
            let x = precode(&spec, &d)?;
            let e0: f64 = d.iter().map(|v| v.norm_sqr()).sum();
            let e1: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            worst = worst.max((e0 - e1).abs());
            worst = worst.max(max_dev(&deprecode(&spec, &x)?, &d));
        }
    }
    Ok(check(
        "transform orthonormality and involution",
        worst,
        1e-12,
    ))
}

/// `Σ_q C[q][S(z,q)] = −‖y − |Λ|·W_Q z‖²/σ²` for every PAM vector.
pub fn c_table_identity(rng: &mut ChaCha8Rng) -> Result<Check> {
    let c = Constellation::qam(4)?;
    let mut worst = 0.0f64;
    for q in [1usize, 2, 4] {
        let db = AmplitudeIndexDb::build(q, &c, DEFAULT_ENUMERATION_BUDGET)?;
        for _ in 0..20 {
            let y: Vec<f64> = (0..q).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g: Vec<f64> = (0..q).map(|_| rng.gen_range(0.1..2.5)).collect();
            let s2 = rng.gen_range(0.05..2.0);
            let table = build_c_table(&y, &g, s2, &db)?;
            for r in 0..db.rows() {
                let z: Vec<f64> = db
                    .levels(r)
                    .iter()
                    .map(|&l| c.levels()[l as usize])
                    .collect();
                let u = fwht(&z)?;
                let direct: f64 = -(0..q).map(|k| (y[k] - g[k] * u[k]).powi(2)).sum::<f64>() / s2;
                let via: f64 = (0..q).map(|k| table.get(k, db.s_index(r, k))).sum();
                worst = worst.max((direct - via).abs());
            }
        }
    }
    Ok(check("C-table metric identity", worst, 1e-10))
}

/// Group-wise variance averaging never has a larger MSE than frame-wise.
pub fn variance_averaging(rng: &mut ChaCha8Rng) -> Result<Check> {
    let spec = PrecoderSpec::new(PrecoderKind::Sdft, 64, 8)?;
    let mut violations = 0;
    for _ in 0..10_000 {
        let g: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..1.5)).collect();
        let (full, sparse) = variance_mse(&g, &spec)?;
        if sparse > full + 1e-12 {
            violations += 1;
        }
    }
    Ok(check(
        "group variance averaging MSE",
        violations as f64,
        0.0,
    ))
}

/// `‖Λ A e_n‖²` is the same for every symbol of a group.
pub fn equal_gain() -> Result<Check> {
    let n = 256;
    let lambda = to_fd(&real_taps(&proakis_c()), n)?;
    let mut worst = 0.0f64;
    for kind in [PrecoderKind::Swh, PrecoderKind::Sdft, PrecoderKind::Dft] {
        let spec = PrecoderSpec::new(kind, n, 8)?;
        for p in 0..spec.p() {
            let idx = crate::precode::group_indices(&spec, p)?;
            let want: f64 =
                idx.iter().map(|&k| lambda[k].norm_sqr()).sum::<f64>() / spec.q() as f64;
            for &col in &idx {
                let mut e = vec![C64::new(0.0, 0.0); n];
                e[col] = C64::new(1.0, 0.0);
                let x = precode(&spec, &e)?;
                let g: f64 = x.iter().zip(&lambda).map(|(a, l)| (a * l).norm_sqr()).sum();
                worst = worst.max((g - want).abs());
            }
        }
    }
    Ok(check("equal per-symbol gain for Q = 8", worst, 1e-12))
}

fn solve(mut a: Vec<Vec<C64>>, mut b: Vec<C64>) -> Vec<C64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .unwrap_or(col);
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                let v = a[col][c];
                a[r][c] -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for r in (0..n).rev() {
        let s = (r + 1..n).fold(b[r], |s, c| s - a[r][c] * x[c]);
        x[r] = s / a[r][r];
    }
    x
}

/// Frequency-domain equalizer against the dense unbiased LMMSE estimator.
pub fn lmmse_oracle(rng: &mut ChaCha8Rng) -> Result<Check> {
    let n = 16;
    let lambda = to_fd(&real_taps(&proakis_c()), n)?;
    let mut worst = 0.0f64;
    for (kind, q) in [
        (PrecoderKind::Dft, 16),
        (PrecoderKind::Sdft, 8),
        (PrecoderKind::Swh, 4),
    ] {
        let spec = PrecoderSpec::new(kind, n, q)?;
        let h: Vec<Vec<C64>> = {
            let cols: Vec<Vec<C64>> = (0..n)
                .map(|c| {
                    let mut e = vec![C64::new(0.0, 0.0); n];
                    e[c] = C64::new(1.0, 0.0);
                    precode(&spec, &e)
                })
                .collect::<Result<_>>()?;
            (0..n)
                .map(|r| (0..n).map(|c| lambda[r] * cols[c][r]).collect())
                .collect()
        };
        for _ in 0..5 {
            let y = rand_block(n, rng);
            let d_a: Vec<C64> = rand_block(n, rng).iter().map(|v| v * 0.5).collect();
            let v_a: Vec<f64> = (0..spec.p()).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s2 = rng.gen_range(0.01..1.0);
            let (d_e, v_e) = fd_lmmse(&y, &lambda, s2, &d_a, &v_a, &spec)?;
            let var = |c: usize| v_a[c % spec.p()];
            let cov: Vec<Vec<C64>> = (0..n)
                .map(|r| {
                    (0..n)
                        .map(|s| {
                            let v: C64 = (0..n).map(|c| h[r][c] * h[s][c].conj() * var(c)).sum();
                            if r == s {
                                v + s2
                            } else {
                                v
                            }
                        })
                        .collect()
                })
                .collect();
            let resid: Vec<C64> = (0..n)
                .map(|r| y[r] - (0..n).map(|c| h[r][c] * d_a[c]).sum::<C64>())
                .collect();
            let w = solve(cov.clone(), resid);
            for c in 0..n {
                let hc: Vec<C64> = (0..n).map(|r| h[r][c]).collect();
                let ch = solve(cov.clone(), hc.clone());
                let norm = hc
                    .iter()
                    .zip(&ch)
                    .map(|(a, b)| a.conj() * b)
                    .sum::<C64>()
                    .re;
                let num: C64 = hc.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                worst = worst.max((d_a[c] + num / norm - d_e[c]).norm());
                worst = worst.max((1.0 / norm - var(c) - v_e[c % spec.p()]).abs());
            }
        }
    }
    Ok(check("one-tap equalizer vs dense LMMSE", worst, 1e-9))
}

/// BCJR APP LLRs against exhaustive codeword enumeration.
pub fn bcjr_oracle(rng: &mut ChaCha8Rng) -> Result<Check> {
    let dec = BcjrDecoder::new(MaxStar::Exact);
    let mut worst = 0.0f64;
    for n_info in [1usize, 4, 8, 10] {
        let n_coded = 2 * (n_info + 2);
        let books: Vec<Vec<u8>> = (0..1usize << n_info)
            .map(|m| {
                let info: Vec<u8> = (0..n_info).map(|b| ((m >> b) & 1) as u8).collect();
                rsc_encode_block(&info, n_coded)
            })
            .collect::<Result<_>>()?;
        for _ in 0..3 {
            let l: Vec<f64> = (0..n_coded).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let out = dec.decode(&l, &vec![0.0; n_coded])?;
            for i in 0..n_coded {
                let (mut p0, mut p1) = (0.0, 0.0);
                for cw in &books {
                    let w = (-cw.iter().zip(&l).map(|(&c, &v)| c as f64 * v).sum::<f64>()).exp();
                    if cw[i] == 0 {
                        p0 += w;
                    } else {
                        p1 += w;
                    }
                }
                // Positions fixed by the termination carry a clipped LLR.
                let want = crate::clip_llr((p0 / p1).ln());
                worst = worst.max((want - out.app[i]).abs());
            }
        }
    }
    Ok(check("BCJR vs exhaustive bitwise MAP", worst, 1e-9))
}

/// Runs every check with a fixed seed.
pub fn run_all() -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    Ok(vec![
        transforms(&mut rng)?,
        c_table_identity(&mut rng)?,
        variance_averaging(&mut rng)?,
        equal_gain()?,
        lmmse_oracle(&mut rng)?,
        bcjr_oracle(&mut rng)?,
    ])
}
