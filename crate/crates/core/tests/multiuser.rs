mod oracles;

use iscpt::error::Error;
use iscpt::linalg::{trace_re, vec_norm, CMat};
use iscpt::metrics::{harvested_energy, sinr_ir};
use iscpt::multiuser::*;
use iscpt::pareto::vertex_sensing;
use iscpt::scenario::{Scenario, ScenarioBuilder};
use oracles::{colocated, scenario_crb};

fn serial() -> MultiuserOptions {
    MultiuserOptions {
        parallel: false,
        ..Default::default()
    }
}

#[test]
fn no_requirements_give_sensing_vertex() {
    let s = ScenarioBuilder::new(4).build(1);
    let d = design_separated(&s, &[0.0], &[0.0], &serial()).unwrap();
    let vertex = scenario_crb(&s, &vertex_sensing(&s));
    assert!((d.objective - vertex).abs() <= 1e-6 * vertex, "{} vs {vertex}", d.objective);
}

#[test]
fn sinr_beyond_full_power_is_infeasible() {
    let s = ScenarioBuilder::new(4).build(2);
    let h = s.irs[0].miso_vector().unwrap();
    let top = s.power_budget * vec_norm(&h).powi(2) / s.irs[0].noise_power;
    for design in [design_separated, design_colocated] {
        match design(&s, &[2.0 * top], &[0.0], &serial()) {
            Err(Error::Infeasible { constraint, .. }) => assert!(constraint.contains('0'), "{constraint}"),
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }
}

/// With one IR the best SINR a total covariance S supports is hᴴSh/σ²
/// (all of S along S h), so the separated design reduces to
/// min P/det S over S = [[a, z], [z̄, P - a]] with hᴴSh ≥ γσ², E(S) ≥ e.
fn two_antenna_oracle(s: &Scenario, gamma: f64, e: f64) -> f64 {
    let p = s.power_budget;
    let h = s.irs[0].miso_vector().unwrap();
    let hh = &h * h.adjoint();
    let er = &s.ers[0];
    let ge = er.channel.adjoint() * &er.channel * iscpt::linalg::c(er.eh_efficiency, 0.0);
    let k = s.sensing_noise * s.n_rx_sense() as f64 / s.snapshots as f64;
    let eval = |a: f64, re: f64, im: f64| -> Option<f64> {
        let det = a * (p - a) - re * re - im * im;
        if !(a >= 0.0 && a <= p && det > 0.0) {
            return None;
        }
        let lin = |m: &CMat| a * m[(0, 0)].re + (p - a) * m[(1, 1)].re + 2.0 * (re * m[(1, 0)].re - im * m[(1, 0)].im);
        if lin(&hh) < gamma * s.irs[0].noise_power || lin(&ge) < e {
            return None;
        }
        Some(k * p / det)
    };
    let (mut center, mut radius) = ([p / 2.0, 0.0, 0.0], [p / 2.0; 3]);
    let mut best = f64::INFINITY;
    let steps = 60;
    for _ in 0..12 {
        let mut arg = center;
        for i in 0..=steps {
            for j in 0..=steps {
                for l in 0..=steps {
                    let t = |v: usize, d: usize| center[d] + radius[d] * (2.0 * v as f64 / steps as f64 - 1.0);
                    let x = [t(i, 0), t(j, 1), t(l, 2)];
                    if let Some(v) = eval(x[0], x[1], x[2]) {
                        if v < best {
                            best = v;
                            arg = x;
                        }
                    }
                }
            }
        }
        center = arg;
        radius = radius.map(|r| r * 0.25);
    }
    best
}

#[test]
fn two_antenna_design_matches_exhaustive_search() {
    let mut b = ScenarioBuilder::new(2);
    b.ir_noise = 0.1;
    let mut active = 0;
    for seed in 0..4 {
        let s = b.build(seed);
        let h = s.irs[0].miso_vector().unwrap();
        let gamma = 0.8 * s.power_budget * vec_norm(&h).powi(2) / 0.1;
        let er = &s.ers[0];
        let e = 0.3 * er.eh_efficiency * s.power_budget * iscpt::linalg::HermitianEigen::new(&(er.channel.adjoint() * &er.channel)).max();
        let d = design_separated(&s, &[gamma], &[e], &serial()).unwrap();
        let oracle = two_antenna_oracle(&s, gamma, e);
        assert!((d.objective - oracle).abs() <= 1e-3 * oracle, "seed {seed}: design {} oracle {oracle}", d.objective);
        if oracle > scenario_crb(&s, &vertex_sensing(&s)) * (1.0 + 1e-3) {
            active += 1;
        }
    }
    assert!(active >= 2);
}

#[test]
fn designs_reverify_through_metrics() {
    let s = colocated(4, 3, 3);
    let gamma = [0.3; 3];
    let e = [0.15; 3];
    for mode in [ReceiverMode::Separated, ReceiverMode::CoLocated] {
        let d = match mode {
            ReceiverMode::Separated => design_separated(&s, &gamma, &e, &serial()),
            ReceiverMode::CoLocated => design_colocated(&s, &gamma, &e, &serial()),
        }
        .unwrap();
        let b = &d.beams;
        assert!(b.power() <= s.power_budget * (1.0 + 1e-6));
        assert!((trace_re(&b.total_cov) - b.power()).abs() <= 1e-9 * b.power().max(1.0));
        assert!((d.objective - scenario_crb(&s, &b.total_cov)).abs() <= 1e-12 * d.objective);
        for k in 0..3 {
            let rho = b.split_ratios.as_ref().map_or(1.0, |r| r[k]);
            let sinr = sinr_ir(&s.irs, k, &b.info_beams, &b.energy_cov, rho).unwrap();
            assert!(sinr >= gamma[k] * (1.0 - 1e-6), "{mode:?} IR {k}: {sinr}");
            let energy = (1.0 - if mode == ReceiverMode::CoLocated { rho } else { 0.0 })
                * harvested_energy(&s.ers[k], &b.total_cov).unwrap();
            assert!(energy >= e[k] * (1.0 - 1e-6), "{mode:?} ER {k}: {energy}");
        }
    }
}

#[test]
fn alternation_is_monotone_and_colocated_costs_more() {
    let opts = serial();
    let gamma = [10f64.powf(-1.0); 6];
    let e = [0.25; 6];
    for seed in [1, 2, 3] {
        let s = colocated(4, 6, seed);
        let sep = design_separated(&s, &gamma, &e, &opts).unwrap();
        let col = design_colocated(&s, &gamma, &e, &opts).unwrap();
        let h = &col.alternation_history;
        assert!(!h.is_empty());
        for w in h.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "history {h:?}");
        }
        assert!(col.objective >= sep.objective * (1.0 - 1e-6), "seed {seed}: {} < {}", col.objective, sep.objective);
    }
}

#[test]
fn sweep_rows_are_ordered_and_csv_is_long_format() {
    let s = colocated(4, 2, 4);
    let rows = sweep_sinr(&s, &[0.01, 0.1, 1e6], &[0.1, 0.1], ReceiverMode::Separated, &MultiuserOptions::default()).unwrap();
    assert_eq!(rows.iter().map(|r| r.gamma).collect::<Vec<_>>(), vec![0.01, 0.1, 1e6]);
    assert!(rows[0].feasible && rows[1].feasible && !rows[2].feasible);
    assert!(rows[1].crb >= rows[0].crb * (1.0 - 1e-6));
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("mode,gamma,feasible,crb,min_sinr_achieved,min_energy_achieved\n"));
    assert!(text.lines().last().unwrap().ends_with(",0,nan,nan,nan"));
    assert!(sweep_sinr(&s, &[1.0, 0.5], &[0.0, 0.0], ReceiverMode::Separated, &serial()).is_err());
}
