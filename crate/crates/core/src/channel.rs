//! Static frequency-selective channel with cyclic prefix, seen in the
//! frequency domain as `y = Λ·x + w`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::invalid;
use crate::{Result, C64};

/// The 5-tap Proakis-C impulse response.
pub fn proakis_c() -> Vec<f64> {
    vec![0.23, 0.46, 0.69, 0.46, 0.23]
}

/// Unnormalized `n`-point DFT of the zero-padded taps: the diagonal of `Λ`.
pub fn to_fd(taps: &[C64], n: usize) -> Result<Vec<C64>> {
    if taps.is_empty() || taps.len() > n {
        return Err(invalid(format!(
            "channel with {} taps does not fit a block of {n} subcarriers",
            taps.len()
        )));
    }
    Ok((0..n)
        .map(|k| {
            taps.iter()
                .enumerate()
                .map(|(l, h)| h * C64::from_polar(1.0, -2.0 * PI * (k * l % n) as f64 / n as f64))
                .sum()
        })
        .collect())
}

/// Real taps promoted to complex.
pub fn real_taps(taps: &[f64]) -> Vec<C64> {
    taps.iter().map(|&h| C64::new(h, 0.0)).collect()
}

/// Circular convolution of a time-domain block with the channel taps.
pub fn circular_convolve(x: &[C64], taps: &[C64]) -> Vec<C64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            taps.iter()
                .enumerate()
                .map(|(l, h)| h * x[(i + n - l % n) % n])
                .sum()
        })
        .collect()
}

/// Noise variance per complex sample for a given `Eb/N0`, assuming unit
/// symbol energy.
pub fn noise_var_from_ebn0(ebn0_db: f64, code_rate: f64, bits_per_symbol: usize) -> f64 {
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    1.0 / (code_rate * bits_per_symbol as f64 * ebn0)
}

/// `Es/N0` in dB corresponding to an `Eb/N0` in dB.
pub fn esn0_db(ebn0_db: f64, code_rate: f64, bits_per_symbol: usize) -> f64 {
    ebn0_db + 10.0 * (code_rate * bits_per_symbol as f64).log10()
}

/// Channel taps, their frequency response and the noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    taps: Vec<C64>,
    fd: Vec<C64>,
    noise_var: f64,
}

impl ChannelState {
    pub fn new(taps: Vec<C64>, n: usize, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(invalid(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        let fd = to_fd(&taps, n)?;
        Ok(Self {
            taps,
            fd,
            noise_var,
        })
    }

    pub fn taps(&self) -> &[C64] {
        &self.taps
    }

    /// Diagonal of `Λ`.
    pub fn fd(&self) -> &[C64] {
        &self.fd
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn with_noise_var(&self, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(invalid(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        Ok(Self {
            noise_var,
            ..self.clone()
        })
    }
}

/// Draws one circularly-symmetric complex Gaussian sample of variance `var`.
#[inline]
pub fn complex_gaussian(rng: &mut impl Rng, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// `y = Λ·x + w` with `w ~ CN(0, σ² I)`.
pub fn transmit(x: &[C64], state: &ChannelState, rng: &mut impl Rng) -> Result<Vec<C64>> {
    if x.len() != state.fd.len() {
        return Err(invalid(format!(
            "block of length {} sent over a channel of {} subcarriers",
            x.len(),
            state.fd.len()
        )));
    }
    Ok(x.iter()
        .zip(&state.fd)
        .map(|(xk, lk)| lk * xk + complex_gaussian(rng, state.noise_var))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::fft;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn proakis_taps() {
        let h = proakis_c();
        assert_eq!(h.len(), 5);
        for l in 0..5 {
            assert_eq!(h[l], h[4 - l]);
        }
        let e: f64 = h.iter().map(|v| v * v).sum();
        assert!((e - 1.0051).abs() < 1e-12);
    }

    #[test]
    fn fd_response() {
        let delta = real_taps(&[1.0]);
        assert!(to_fd(&delta, 8)
            .unwrap()
            .iter()
            .all(|v| (v - C64::new(1.0, 0.0)).norm() < 1e-15));
        let fd = to_fd(&real_taps(&proakis_c()), 256).unwrap();
        assert!((fd[0] - C64::new(2.07, 0.0)).norm() < 1e-12);
        assert!(to_fd(&real_taps(&proakis_c()), 4).is_err());
    }

    #[test]
    fn circulant_diagonalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 64;
        let taps = real_taps(&proakis_c());
        let x: Vec<C64> = (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let td = circular_convolve(&x, &taps);
        let lambda = to_fd(&taps, n).unwrap();
        let xf = fft(&x, false).unwrap();
        let yf: Vec<C64> = xf.iter().zip(&lambda).map(|(a, b)| a * b).collect();
        let back = fft(&yf, true).unwrap();
        for (a, b) in td.iter().zip(&back) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn noiseless_flat_and_calibration() {
        let n = 1 << 16;
        let state = ChannelState::new(real_taps(&[1.0]), n, 0.3).unwrap();
        let x = vec![C64::new(0.0, 0.0); n];
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut total = 0.0;
        let mut re = 0.0;
        let reps = 16;
        for _ in 0..reps {
            let y = transmit(&x, &state, &mut rng).unwrap();
            total += y.iter().map(|v| v.norm_sqr()).sum::<f64>();
            re += y.iter().map(|v| v.re * v.re).sum::<f64>();
        }
        let samples = (n * reps) as f64;
        assert!((total / samples / 0.3 - 1.0).abs() < 0.01);
        assert!((re / samples / 0.15 - 1.0).abs() < 0.01);

        let quiet = ChannelState::new(real_taps(&[1.0]), 4, 1e-30).unwrap();
        let x: Vec<C64> = (0..4).map(|k| C64::new(k as f64, 1.0)).collect();
        let y = transmit(&x, &quiet, &mut rng).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(ChannelState::new(real_taps(&[1.0]), 4, 0.0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let state = ChannelState::new(real_taps(&proakis_c()), 16, 0.1).unwrap();
        let x = vec![C64::new(1.0, 0.0); 16];
        let a = transmit(&x, &state, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = transmit(&x, &state, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn snr_conversion() {
        let s = noise_var_from_ebn0(0.0, 0.5, 2);
        assert!((s - 1.0).abs() < 1e-15);
        assert!((esn0_db(3.0, 0.5, 4) - (3.0 + 10.0 * 2f64.log10())).abs() < 1e-12);
    }
}
