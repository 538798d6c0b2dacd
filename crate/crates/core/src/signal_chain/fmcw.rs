//! Complex-baseband FMCW ranging: one chirp, dechirp, Hann window, FFT.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChirpConfig {
    pub carrier: f64,
    pub bandwidth: f64,
    pub chirp_duration: f64,
    pub sample_rate: f64,
    /// Zero-padded FFT length; at least the number of samples per chirp.
    pub fft_size: usize,
}

impl Default for ChirpConfig {
    fn default() -> Self {
        Self {
            carrier: 2.45e9,
            bandwidth: 1e8,
            chirp_duration: 1e-3,
            sample_rate: 2e6,
            fft_size: 8192,
        }
    }
}

impl ChirpConfig {
    pub fn samples(&self) -> usize {
        (self.sample_rate * self.chirp_duration).round() as usize
    }

    pub fn slope(&self) -> f64 {
        self.bandwidth / self.chirp_duration
    }

    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth)
    }

    /// Largest range whose beat frequency stays below Nyquist.
    pub fn unambiguous_range(&self) -> f64 {
        SPEED_OF_LIGHT * self.chirp_duration * self.sample_rate / (4.0 * self.bandwidth)
    }

    pub fn beat_frequency(&self, range: f64) -> f64 {
        2.0 * range * self.slope() / SPEED_OF_LIGHT
    }

    pub fn range_of_beat(&self, beat: f64) -> f64 {
        beat * SPEED_OF_LIGHT / (2.0 * self.slope())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier", self.carrier),
            ("bandwidth", self.bandwidth),
            ("chirp_duration", self.chirp_duration),
            ("sample_rate", self.sample_rate),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Validation(format!("chirp {name} must be positive and finite")));
        }
        if self.samples() < 2 {
            return Err(Error::Validation("chirp holds fewer than two samples".into()));
        }
        if self.fft_size < self.samples() {
            return Err(Error::Validation(format!(
                "fft_size {} shorter than the {} samples per chirp",
                self.fft_size,
                self.samples()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RangeEstimate {
    pub range: f64,
    pub peak_bin: usize,
    /// Magnitude of the positive-frequency half of the beat spectrum.
    pub spectrum: Vec<f64>,
}

/// Range of a single point echo at `snr_db` (per-sample SNR; `+inf` is
/// noiseless). The echo is `s(t - τ)` with `τ = 2R/c`, mixed against the
/// transmit chirp to a beat tone at `2RB/(c T_c)`.
pub fn fmcw_range(cfg: &ChirpConfig, true_range: f64, snr_db: f64, seed: u64) -> Result<RangeEstimate> {
    cfg.validate()?;
    if !(true_range >= 0.0 && true_range <= cfg.unambiguous_range()) {
        return Err(Error::InvalidArgument(format!(
            "range {true_range} m outside [0, {}] m",
            cfg.unambiguous_range()
        )));
    }
    let n = cfg.samples();
    let k = cfg.slope();
    let delay = 2.0 * true_range / SPEED_OF_LIGHT;
    let noise_std = (10f64.powf(-snr_db / 10.0) / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut buf: Vec<Complex64> = (0..n)
        .map(|i| {
            let t = i as f64 / cfg.sample_rate;
            let tx = Complex64::from_polar(1.0, PI * k * t * t);
            let td = t - delay;
            let mut rx = Complex64::from_polar(1.0, PI * k * td * td - 2.0 * PI * cfg.carrier * delay);
            if noise_std > 0.0 {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                rx += Complex64::new(re, im) * noise_std;
            }
            let hann = 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos();
            tx * rx.conj() * hann
        })
        .collect();
    buf.resize(cfg.fft_size, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(cfg.fft_size).process(&mut buf);

    let half = cfg.fft_size / 2;
    let spectrum: Vec<f64> = buf[..=half].iter().map(|z| z.norm()).collect();
    let peak_bin = spectrum
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > spectrum[best] { i } else { best });
    let beat = peak_bin as f64 * cfg.sample_rate / cfg.fft_size as f64;
    Ok(RangeEstimate { range: cfg.range_of_beat(beat), peak_bin, spectrum })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_and_beat_by_hand() {
        let cfg = ChirpConfig::default();
        assert!((cfg.range_resolution() - 1.4989622900).abs() < 1e-9);
        assert!((cfg.beat_frequency(30.0) - 20_013.84).abs() < 0.01);
    }

    #[test]
    fn zero_range_peaks_at_zero_bin() {
        let r = fmcw_range(&ChirpConfig::default(), 0.0, f64::INFINITY, 0).unwrap();
        assert_eq!(r.peak_bin, 0);
    }

    #[test]
    fn rejects_range_beyond_span() {
        let cfg = ChirpConfig::default();
        assert!(fmcw_range(&cfg, cfg.unambiguous_range() * 1.01, 30.0, 0).is_err());
    }

    #[test]
    fn noiseless_estimate_within_half_bin() {
        let cfg = ChirpConfig::default();
        let bin = cfg.range_of_beat(cfg.sample_rate / cfg.fft_size as f64);
        let r = fmcw_range(&cfg, 123.4, f64::INFINITY, 0).unwrap();
        assert!((r.range - 123.4).abs() <= 0.5 * bin + 1e-9);
    }
}
