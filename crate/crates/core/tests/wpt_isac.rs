use iscpt::error::Error;
use iscpt::linalg::{c, quad_form, trace_re, vec_norm, CMat};
use iscpt::solver::SolveOptions;
use iscpt::wpt_isac::*;

fn builder() -> WptIsacBuilder {
    let mut b = WptIsacBuilder::new(4, vec![2, 3, 2]);
    b.comm_noise = 0.5;
    b.sinr_req = 4.0;
    b
}

fn min_energy(s: &WptIsacScenario, cov: &CMat) -> f64 {
    s.devices.iter().map(|d| quad_form(cov, &d.harvest_channel)).fold(f64::INFINITY, f64::min)
}

#[test]
fn isotropic_mse_matches_closed_form() {
    for n in 1..=4 {
        let mut b = WptIsacBuilder::new(3, vec![n]);
        b.n_rx_sense = 3;
        b.sensing_noise = 0.2;
        b.snapshots = 12;
        let s = b.build(n as u64);
        let d = &s.devices[0];
        for p in [0.1, 1.0, 7.5] {
            let (_, m) = device_design(d, p, 1.0, s.snapshots).unwrap();
            let expected = 0.2 * 3.0 * (n * n) as f64 / (12.0 * p);
            assert!((m.mse - expected).abs() <= 1e-8 * expected, "n {n} p {p}");
        }
    }
}

#[test]
fn single_device_beacon_is_strongest_eigenmode() {
    let mut b = WptIsacBuilder::new(4, vec![2]);
    b.beacon_power = 2.0;
    let s = b.build(7);
    let cov = max_min_beacon(&s, &SolveOptions::default()).unwrap();
    let g = &s.devices[0].harvest_channel;
    let best = 2.0 * vec_norm(g).powi(2);
    assert!((quad_form(&cov, g) - best).abs() <= 1e-6 * best);
    let tau = 0.4;
    let p = harvested_budget(&cov, &s.devices[0], tau, s.eh_efficiency).unwrap();
    let expected = s.eh_efficiency * tau * best / (1.0 - tau);
    assert!((p - expected).abs() <= 1e-6 * expected);
}

#[test]
fn two_antenna_beacon_matches_grid_search() {
    // S = [[a, r e^{iφ}], [r e^{-iφ}, P - a]] with r ≤ √(a(P - a)) covers every
    // full-power beacon, and the harvest only grows with power
    let mut b = WptIsacBuilder::new(2, vec![1, 1, 1]);
    b.beacon_power = 1.0;
    for seed in 0..3 {
        let s = b.build(seed);
        let cov = max_min_beacon(&s, &SolveOptions::default()).unwrap();
        assert!(trace_re(&cov) <= 1.0 + 1e-9);
        let mut best = 0.0f64;
        let steps = 120;
        for i in 0..=steps {
            let a = i as f64 / steps as f64;
            let rmax = (a * (1.0 - a)).sqrt();
            for j in 0..=steps {
                let r = rmax * j as f64 / steps as f64;
                for k in 0..steps {
                    let phi = 2.0 * std::f64::consts::PI * k as f64 / steps as f64;
                    let z = c(r * phi.cos(), r * phi.sin());
                    let m = CMat::from_row_slice(2, 2, &[c(a, 0.0), z, z.conj(), c(1.0 - a, 0.0)]);
                    best = best.max(min_energy(&s, &m));
                }
            }
        }
        let got = min_energy(&s, &cov);
        assert!(got >= best * (1.0 - 1e-3), "seed {seed}: solver {got} grid {best}");
    }
}

#[test]
fn chosen_beta_is_largest_meeting_sinr() {
    let s = builder().build(1);
    let alloc = joint_allocate(&s, &SolveOptions::default()).unwrap();
    for (d, out) in s.devices.iter().zip(&alloc.devices) {
        assert!(out.sinr >= d.sinr_req * (1.0 - 1e-9));
        if out.beta < 1.0 {
            let (_, m) = device_design(d, out.power, (out.beta + 1e-6).min(1.0), s.snapshots).unwrap();
            assert!(m.sinr < d.sinr_req);
        }
    }
    assert!((TAU_RANGE.0..=TAU_RANGE.1).contains(&alloc.tau));
}

#[test]
fn harvest_grows_with_tau_so_search_ends_at_upper_bound() {
    let s = builder().build(2);
    let alloc = joint_allocate(&s, &SolveOptions::default()).unwrap();
    assert!((alloc.tau - TAU_RANGE.1).abs() < 1e-9);
    let mut prev = f64::INFINITY;
    for i in 1..=9 {
        let tau = 0.1 * i as f64;
        let out = evaluate_at(&s, &alloc.beacon_cov, tau).map(|d| d.iter().map(|o| o.mse).fold(0.0, f64::max));
        let v = out.unwrap_or(f64::INFINITY);
        assert!(v <= prev * (1.0 + 1e-12));
        prev = v;
    }
}

#[test]
fn doubling_beacon_power_never_hurts() {
    let opts = SolveOptions::default();
    for seed in 0..20 {
        let mut b = builder();
        let base = joint_allocate(&b.build(seed), &opts);
        b.beacon_power *= 2.0;
        let doubled = joint_allocate(&b.build(seed), &opts);
        match (base, doubled) {
            (Ok(x), Ok(y)) => assert!(y.max_mse <= x.max_mse * (1.0 + 1e-6), "seed {seed}"),
            (Err(_), _) => {}
            (Ok(_), Err(e)) => panic!("seed {seed}: doubling power broke feasibility: {e}"),
        }
    }
}

#[test]
fn more_device_antennas_raise_its_mse() {
    let opts = SolveOptions::default();
    let mut wins = 0;
    for seed in 0..20 {
        let mut b = builder();
        b.device_antennas = vec![2, 2];
        let two = joint_allocate(&b.build(seed), &opts).unwrap();
        b.device_antennas = vec![4, 2];
        let four = joint_allocate(&b.build(seed), &opts).unwrap();
        if four.devices[0].mse > two.devices[0].mse {
            wins += 1;
        }
    }
    // one-sided sign test: P(X ≥ 15 | n = 20, p = 1/2) ≈ 0.021
    assert!(wins >= 15, "{wins}/20");
}

#[test]
fn unreachable_sinr_names_the_device() {
    let mut b = builder();
    b.eh_efficiency = 0.0;
    let s = b.build(0);
    match joint_allocate(&s, &SolveOptions::default()) {
        Err(Error::Infeasible { constraint, .. }) => assert_eq!(constraint, "device 0 sinr"),
        other => panic!("expected infeasibility, got {other:?}"),
    }
}

#[test]
fn csv_rows_per_device() {
    let s = builder().build(3);
    let alloc = joint_allocate(&s, &SolveOptions::default()).unwrap();
    let mut buf = Vec::new();
    write_allocation_csv(&[(s.beacon_power, alloc)], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "beacon_power,tau,device,p_d,beta,mse,sinr");
    assert_eq!(lines.len(), 1 + s.devices.len());
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 7));
}

#[test]
fn rejects_bad_tau() {
    let s = builder().build(0);
    let d = &s.devices[0];
    let cov = iscpt::linalg::identity(4);
    assert!(matches!(harvested_budget(&cov, d, 1.0, 0.5), Err(Error::InvalidArgument(_))));
}
