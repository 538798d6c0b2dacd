use iscpt::beampattern::*;
use iscpt::linalg::{c, frobenius, identity, CMat};
use iscpt::metrics::beampattern;
use iscpt::multiuser::MultiuserOptions;
use iscpt::scenario::{ScenarioBuilder, UlaGeometry};
use iscpt::solver::SolveOptions;

const TARGETS: [f64; 5] = [-60.0, -30.0, 0.0, 30.0, 60.0];

fn five_target_pattern() -> PatternSpec {
    desired_pattern(&TARGETS, &uniform_grid(1.0), 10.0).unwrap()
}

#[test]
fn five_targets_give_five_plateaus() {
    let p = five_target_pattern();
    let mut runs = Vec::new();
    for (i, w) in p.desired.windows(2).enumerate() {
        if w[0] == 0.0 && w[1] == 1.0 {
            runs.push(p.grid_deg[i + 1]);
        }
    }
    assert_eq!(runs, vec![-65.0, -35.0, -5.0, 25.0, 55.0]);
    assert_eq!(p.desired.iter().filter(|d| **d == 1.0).count(), 55);
}

#[test]
fn flat_desired_pattern_gives_isotropic_design() {
    let grid = uniform_grid(1.0);
    let p = PatternSpec {
        desired: vec![1.0; grid.len()],
        grid_deg: grid,
        targets_deg: vec![],
        width_deg: 10.0,
    };
    let g = UlaGeometry::new(4);
    let d = sensing_only_design(&p, &g, 2.0, &SolveOptions::default()).unwrap();
    assert!(frobenius(&(&d.covariance - identity(4) * c(0.5, 0.0))) < 1e-3);
    assert!(d.error < 1e-6);
}

#[test]
fn two_antenna_design_matches_disk_search() {
    // the pattern of a 2-element array is P + 2 Re(r₁₂ e^{iπ sin θ}), so a
    // search over r₁₂ in the disk |r₁₂| ≤ P/2 covers every design
    let p = desired_pattern(&[20.0], &uniform_grid(1.0), 30.0).unwrap();
    let g = UlaGeometry::new(2);
    let power = 1.0;
    let d = sensing_only_design(&p, &g, power, &SolveOptions::default()).unwrap();
    let eval = |re: f64, im: f64| {
        let r = CMat::from_row_slice(2, 2, &[c(power / 2.0, 0.0), c(re, im), c(re, -im), c(power / 2.0, 0.0)]);
        pattern_error(&r, &g, &p).unwrap().0
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let n = 400;
    for i in 0..=n {
        for j in 0..=n {
            let (re, im) = (-0.5 + i as f64 / n as f64, -0.5 + j as f64 / n as f64);
            if re * re + im * im <= 0.25 {
                let e = eval(re, im);
                if e < best.0 {
                    best = (e, re, im);
                }
            }
        }
    }
    let mut step = 1.0 / n as f64;
    for _ in 0..30 {
        step /= 2.0;
        for (di, dj) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let (re, im) = (best.1 + di * step, best.2 + dj * step);
            if re * re + im * im <= 0.25 {
                let e = eval(re, im);
                if e < best.0 {
                    best = (e, re, im);
                }
            }
        }
    }
    assert!(d.error <= best.0 * (1.0 + 1e-3) + 1e-9, "solver {} search {}", d.error, best.0);
    assert!(d.error >= best.0 * (1.0 - 1e-3) - 1e-9);
}

#[test]
fn unconstrained_iscpt_matches_sensing_only() {
    let s = ScenarioBuilder::new(8).build(2);
    let p = five_target_pattern();
    let opts = MultiuserOptions::default();
    let sensing = sensing_only_design(&p, &s.tx_geometry, s.power_budget, &opts.solver).unwrap();
    let joint = iscpt_pattern_design(&s, &p, &[0.0], &[0.0], &opts).unwrap();
    assert!(
        (joint.objective - sensing.error).abs() <= 1e-4 * sensing.error.max(1.0),
        "{} vs {}",
        joint.objective,
        sensing.error
    );
}

#[test]
fn five_target_iscpt_points_at_targets() {
    let mut b = ScenarioBuilder::new(16);
    b.ir_antennas = vec![1; 2];
    b.er_antennas = vec![1; 2];
    b.ir_noise = 0.1;
    let s = b.build(5);
    let p = five_target_pattern();
    let opts = MultiuserOptions::default();
    let sensing = sensing_only_design(&p, &s.tx_geometry, s.power_budget, &opts.solver).unwrap();
    let joint = iscpt_pattern_design(&s, &p, &[1.0, 1.0], &[3.0, 3.0], &opts).unwrap();

    let pattern = beampattern(&joint.beams.total_cov, &s.tx_geometry, &p.grid_deg);
    let peaks = prominent_peaks(&p.grid_deg, &pattern, PEAK_MIN_HEIGHT, PEAK_MIN_PROMINENCE);
    assert_eq!(peaks.len(), 5, "peaks at {peaks:?}");
    for (peak, target) in peaks.iter().zip(TARGETS) {
        assert!((peak - target).abs() <= 1.0, "peak {peak} for target {target}");
    }
    assert!(joint.sinr.iter().all(|v| *v >= 1.0 * (1.0 - 1e-6)));
    assert!(joint.energy.iter().all(|v| *v >= 3.0 * (1.0 - 1e-6)));
    assert!(joint.objective > sensing.error, "{} vs {}", joint.objective, sensing.error);
}

#[test]
fn csv_has_four_columns() {
    let grid = [-1.0, 0.0, 1.0];
    let mut buf = Vec::new();
    write_pattern_csv(&grid, &[0.0, 1.0, 0.0], &[0.5, 1.0, 0.5], &[0.4, 1.0, 0.6], false, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta,desired,sensing_only_pattern,iscpt_pattern"));
    assert!(lines.all(|l| l.split(',').count() == 4));
}
