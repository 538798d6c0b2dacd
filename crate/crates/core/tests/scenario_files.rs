use iscpt::error::Error;
use iscpt::linalg::c;
use iscpt::scenario::*;

fn sample() -> Scenario {
    let mut b = ScenarioBuilder::new(4);
    b.ir_antennas = vec![1, 2];
    b.er_antennas = vec![1];
    b.ir_noise = 0.1;
    let mut s = b.build(9);
    s.irs[0].required_sinr = Some(2.0);
    s.targets.push(TargetSpec::Point {
        angle: 0.3,
        reflection: c(0.8, -0.1),
    });
    s
}

#[test]
fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.toml");
    let s = sample();
    save_scenario(&s, &path).unwrap();
    let back = load_scenario(&path).unwrap();
    assert_eq!(back, s);
    assert_eq!(back.to_toml_string().unwrap(), s.to_toml_string().unwrap());
}

#[test]
fn negative_power_budget_is_rejected() {
    let text = sample().to_toml_string().unwrap();
    let line = text.lines().find(|l| l.starts_with("power_budget")).unwrap().to_string();
    let bad = text.replace(&line, "power_budget = -1.0");
    match Scenario::from_toml_str(&bad) {
        Err(Error::Validation(msg)) => assert!(msg.contains("power_budget"), "{msg}"),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn unknown_field_is_named() {
    let text = format!("antenna_gain = 3.0\n{}", sample().to_toml_string().unwrap());
    match Scenario::from_toml_str(&text) {
        Err(Error::Parse(msg)) => assert!(msg.contains("antenna_gain"), "{msg}"),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn channel_width_must_match_array() {
    let mut s = sample();
    s.irs[1].channel = s.irs[1].channel.columns(0, 3).into_owned();
    assert!(matches!(s.validate(), Err(Error::Validation(_))));
    let text = sample().to_toml_string().unwrap().replace("format_version = 1", "format_version = 7");
    assert!(matches!(Scenario::from_toml_str(&text), Err(Error::Parse(_))));
}

#[test]
fn builder_is_deterministic_per_seed() {
    let b = ScenarioBuilder::new(3);
    assert_eq!(b.build(4), b.build(4));
    assert_ne!(b.build(4).irs[0].channel, b.build(5).irs[0].channel);
}
