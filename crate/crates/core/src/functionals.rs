//! Metric functionals packaged for the solver. Sensing functionals act on
//! the total covariance (sum of all blocks).

use crate::linalg::{c, CMat};
use crate::metrics::{
    crb_trm_and_gradient, energy_gradient, rate, rate_gradient, PointTargetModel, SensingMetric,
};
use crate::scenario::{ErSpec, Scenario};
use crate::solver::{FnFunctional, Functional, LinearFunctional, OfTotal};
use crate::error::{Error, Result};

/// Rate of channel `h` as a function of the total covariance.
pub fn rate_of_total(h: CMat, noise: f64) -> impl Functional {
    OfTotal::new(move |s: &CMat| {
        let v = rate(&h, s, noise).unwrap_or(f64::NEG_INFINITY);
        (v, rate_gradient(&h, s, noise))
    })
}

/// Harvested energy as a linear functional of every block.
pub fn energy_of_total(er: &ErSpec, blocks: usize) -> LinearFunctional {
    let g = energy_gradient(er);
    LinearFunctional::new((0..blocks).map(|_| Some(g.clone())).collect())
}

pub fn trm_crb_of_total(sensing_noise: f64, snapshots: usize, n_rx: usize) -> impl Functional {
    OfTotal::new(move |s: &CMat| crb_trm_and_gradient(s, sensing_noise, snapshots, n_rx))
}

pub fn point_crb_of_total(model: PointTargetModel) -> impl Functional {
    OfTotal::new(move |s: &CMat| model.crb_and_gradient(s))
}

/// Sensing CRB functional for the scenario's first matching target.
pub fn sensing_of_total(scenario: &Scenario, metric: SensingMetric) -> Result<Box<dyn Functional>> {
    Ok(match metric {
        SensingMetric::Trm => Box::new(trm_crb_of_total(
            scenario.sensing_noise,
            scenario.snapshots,
            scenario.n_rx_sense(),
        )),
        SensingMetric::PointTarget => {
            let target = scenario
                .targets
                .iter()
                .find(|t| matches!(t, crate::scenario::TargetSpec::Point { .. }))
                .ok_or_else(|| Error::InvalidArgument("scenario has no point target".into()))?;
            Box::new(point_crb_of_total(PointTargetModel::from_scenario(scenario, target)?))
        }
    })
}

/// Boxed functional forwarding to a shared one.
pub struct Shared<'a>(pub &'a dyn Functional);

impl Functional for Shared<'_> {
    fn value(&self, x: &[CMat]) -> f64 {
        self.0.value(x)
    }
    fn value_and_gradient(&self, x: &[CMat]) -> (f64, Vec<CMat>) {
        self.0.value_and_gradient(x)
    }
}

/// `-f`, for minimization objectives written as maximizations.
pub fn negated(f: Box<dyn Functional>) -> FnFunctional {
    let f: std::sync::Arc<dyn Functional> = f.into();
    let f2 = f.clone();
    FnFunctional::new(
        move |x| -f.value(x),
        move |x| {
            let (v, g) = f2.value_and_gradient(x);
            (-v, g.into_iter().map(|b| b * c(-1.0, 0.0)).collect())
        },
    )
}
