mod oracles;

use iscpt::linalg::{c, identity, CMat, C64};
use iscpt::metrics::*;
use iscpt::scenario::{sample_channel, ChannelModel, ErSpec, UlaGeometry};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use oracles::{finite_difference_fisher, ls_trm_mse, random_psd};

fn unitary(seed: u64, n: usize) -> CMat {
    sample_channel(seed, ChannelModel::Rayleigh, n, n).qr().q()
}

#[test]
fn trm_crb_matches_least_squares_monte_carlo() {
    let (n, l, n_rx, noise) = (4, 16, 4, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..3 {
        let s = random_psd(seed, n, 2.0);
        let mse = ls_trm_mse(&mut rng, &s, noise, l, n_rx, 2000);
        let crb = crb_trm(&s, noise, l, n_rx);
        assert!((mse - crb).abs() <= 0.05 * crb, "seed {seed}: mc {mse} crb {crb}");
        assert_eq!(trm_mse_ls(&s, noise, l, n_rx), crb);
    }
}

#[test]
fn point_fisher_matches_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..50 {
        let n = rng.random_range(2..=6);
        let n_rx = rng.random_range(1..=5);
        let model = PointTargetModel {
            tx: UlaGeometry::new(n),
            rx: UlaGeometry::new(n_rx),
            angle: rng.random_range(-1.2..1.2),
            reflection: C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            snapshots: rng.random_range(4..=32),
            noise: rng.random_range(0.1..2.0),
        };
        let s = random_psd(100 + trial, n, rng.random_range(0.5..5.0));
        let analytic = model.fisher(&s).unwrap();
        let numeric = finite_difference_fisher(&model, &s);
        let scale = analytic.abs().max();
        assert!(
            (analytic - numeric).abs().max() <= 1e-4 * scale,
            "trial {trial}: analytic {analytic} numeric {numeric}"
        );
        let crb = model.crb_checked(&s).unwrap();
        let inv = analytic.try_inverse().unwrap();
        assert!((crb - inv[(0, 0)]).abs() <= 1e-8 * crb);
    }
}

#[test]
fn isotropic_trm_crb_closed_form() {
    for n in 1..=6 {
        let s = TransmitCovariance::isotropic(n, 3.0);
        let expected = 0.5 * 2.0 * (n * n) as f64 / (16.0 * 3.0);
        assert!((crb_trm(&s, 0.5, 16, 2) - expected).abs() <= 1e-12 * expected);
    }
    assert_eq!(crb_trm(&CMat::zeros(3, 3), 1.0, 4, 1), f64::INFINITY);
}

#[test]
fn covariance_validation_rejects_bad_input() {
    let mut m = identity(2);
    m[(0, 1)] = c(1.0, 0.0);
    assert!(TransmitCovariance::new(m).is_err());
    let neg = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)]);
    assert!(TransmitCovariance::new(neg).is_err());
    assert!(TransmitCovariance::isotropic(3, 1.0).check_budget(0.9).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rate_is_concave(a in 0u64..1000, b in 0u64..1000, h_seed in 0u64..1000, rows in 1usize..4) {
        let h = sample_channel(h_seed, ChannelModel::Rayleigh, rows, 3);
        let (s1, s2) = (random_psd(a, 3, 2.0), random_psd(b + 5000, 3, 1.0));
        let mid = (&s1 + &s2) * c(0.5, 0.0);
        let lhs = rate(&h, &mid, 0.7).unwrap();
        let rhs = 0.5 * (rate(&h, &s1, 0.7).unwrap() + rate(&h, &s2, 0.7).unwrap());
        prop_assert!(lhs >= rhs - 1e-12);
    }

    #[test]
    fn energy_is_linear(a in 0u64..1000, b in 0u64..1000, x in 0.0f64..3.0, y in 0.0f64..3.0) {
        let er = ErSpec {
            channel: sample_channel(a + b, ChannelModel::Rayleigh, 2, 3),
            eh_efficiency: 0.6,
            required_energy: None,
        };
        let (s1, s2) = (random_psd(a, 3, 1.0), random_psd(b + 7000, 3, 1.0));
        let mix = &s1 * c(x, 0.0) + &s2 * c(y, 0.0);
        let lhs = harvested_energy(&er, &mix).unwrap();
        let rhs = x * harvested_energy(&er, &s1).unwrap() + y * harvested_energy(&er, &s2).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn trm_crb_is_unitarily_invariant(a in 0u64..1000, u in 0u64..1000, n in 1usize..6) {
        let s = random_psd(a, n, 1.5);
        let q = unitary(u + 9000, n);
        let rotated = &q * &s * q.adjoint();
        let (x, y) = (crb_trm(&s, 0.4, 8, 3), crb_trm(&rotated, 0.4, 8, 3));
        prop_assert!((x - y).abs() <= 1e-9 * x);
    }
}
