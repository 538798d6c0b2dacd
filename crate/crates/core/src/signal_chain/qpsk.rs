//! Gray-mapped QPSK over complex AWGN: EVM and symbol error rate.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use statrs::function::erf::erfc;

/// Unit-energy constellation point for the bit pair `(b0, b1)`.
pub fn qpsk_symbol(b0: bool, b1: bool) -> Complex64 {
    let level = |b: bool| if b { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    Complex64::new(level(b0), level(b1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpskStats {
    pub evm_percent: f64,
    pub ser: f64,
    pub symbol_errors: usize,
    pub n_symbols: usize,
}

/// Sends `n_symbols` random symbols at symbol SNR `snr_db` (`+inf` is
/// noiseless) and decides each by its quadrant.
pub fn qpsk_evm(snr_db: f64, n_symbols: usize, seed: u64) -> QpskStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_std = (10f64.powf(-snr_db / 10.0) / 2.0).sqrt();
    let (mut err_energy, mut ref_energy, mut errors) = (0.0, 0.0, 0);
    for _ in 0..n_symbols {
        let (b0, b1) = (rng.random::<bool>(), rng.random::<bool>());
        let s = qpsk_symbol(b0, b1);
        let mut r = s;
        if noise_std > 0.0 {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            r += Complex64::new(re, im) * noise_std;
        }
        err_energy += (r - s).norm_sqr();
        ref_energy += s.norm_sqr();
        if qpsk_symbol(r.re < 0.0, r.im < 0.0) != s {
            errors += 1;
        }
    }
    let n = n_symbols.max(1) as f64;
    QpskStats {
        evm_percent: if ref_energy > 0.0 { 100.0 * (err_energy / ref_energy).sqrt() } else { 0.0 },
        ser: errors as f64 / n,
        symbol_errors: errors,
        n_symbols,
    }
}

/// `1 - (1 - Q(√snr))²`, the exact QPSK symbol error rate.
pub fn qpsk_ser_theory(snr_db: f64) -> f64 {
    let snr = 10f64.powf(snr_db / 10.0);
    let q = 0.5 * erfc((snr / 2.0).sqrt());
    1.0 - (1.0 - q) * (1.0 - q)
}
