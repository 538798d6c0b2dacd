//! Smooth functionals of a list of Hermitian blocks.

use crate::linalg::{c, inner, CMat};

/// Smooth functional of block variables `X_1, …, X_B` with Hermitian
/// gradient blocks under `<A, B> = Re tr(Aᴴ B)`. Non-finite values mark
/// points outside the functional's domain.
pub trait Functional: Send + Sync {
    fn value(&self, x: &[CMat]) -> f64;
    fn value_and_gradient(&self, x: &[CMat]) -> (f64, Vec<CMat>);
}

type ValueFn = dyn Fn(&[CMat]) -> f64 + Send + Sync;
type ValueGradFn = dyn Fn(&[CMat]) -> (f64, Vec<CMat>) + Send + Sync;

/// Functional built from closures.
pub struct FnFunctional {
    value: Option<Box<ValueFn>>,
    value_grad: Box<ValueGradFn>,
}

impl FnFunctional {
    pub fn new(
        value: impl Fn(&[CMat]) -> f64 + Send + Sync + 'static,
        value_grad: impl Fn(&[CMat]) -> (f64, Vec<CMat>) + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Some(Box::new(value)),
            value_grad: Box::new(value_grad),
        }
    }

    pub fn from_value_grad(value_grad: impl Fn(&[CMat]) -> (f64, Vec<CMat>) + Send + Sync + 'static) -> Self {
        Self {
            value: None,
            value_grad: Box::new(value_grad),
        }
    }
}

impl Functional for FnFunctional {
    fn value(&self, x: &[CMat]) -> f64 {
        match &self.value {
            Some(v) => v(x),
            None => (self.value_grad)(x).0,
        }
    }

    fn value_and_gradient(&self, x: &[CMat]) -> (f64, Vec<CMat>) {
        (self.value_grad)(x)
    }
}

/// `Σ_b Re tr(C_b X_b) + offset`; blocks without a coefficient do not enter.
#[derive(Debug, Clone)]
pub struct LinearFunctional {
    pub coefficients: Vec<Option<CMat>>,
    pub offset: f64,
}

impl LinearFunctional {
    pub fn new(coefficients: Vec<Option<CMat>>) -> Self {
        Self {
            coefficients,
            offset: 0.0,
        }
    }
}

impl Functional for LinearFunctional {
    fn value(&self, x: &[CMat]) -> f64 {
        self.offset
            + self
                .coefficients
                .iter()
                .zip(x)
                .filter_map(|(cb, xb)| cb.as_ref().map(|cb| inner(cb, xb)))
                .sum::<f64>()
    }

    fn value_and_gradient(&self, x: &[CMat]) -> (f64, Vec<CMat>) {
        let grad = self
            .coefficients
            .iter()
            .zip(x)
            .map(|(cb, xb)| match cb {
                Some(cb) => cb.clone(),
                None => CMat::zeros(xb.nrows(), xb.ncols()),
            })
            .collect();
        (self.value(x), grad)
    }
}

/// Applies a single-matrix functional to the sum of all blocks (the total
/// transmit covariance); every block receives the same gradient.
pub struct OfTotal<F> {
    inner: F,
}

impl<F> OfTotal<F>
where
    F: Fn(&CMat) -> (f64, CMat) + Send + Sync,
{
    pub fn new(inner: F) -> Self {
        Self { inner }
    }
}

pub fn total(x: &[CMat]) -> CMat {
    let mut acc = x[0].clone();
    for b in &x[1..] {
        acc += b;
    }
    acc
}

impl<F> Functional for OfTotal<F>
where
    F: Fn(&CMat) -> (f64, CMat) + Send + Sync,
{
    fn value(&self, x: &[CMat]) -> f64 {
        (self.inner)(&total(x)).0
    }

    fn value_and_gradient(&self, x: &[CMat]) -> (f64, Vec<CMat>) {
        let (v, g) = (self.inner)(&total(x));
        (v, x.iter().map(|_| g.clone()).collect())
    }
}

/// `sign · f`.
pub struct Scaled<'a> {
    pub inner: &'a dyn Functional,
    pub factor: f64,
}

impl Functional for Scaled<'_> {
    fn value(&self, x: &[CMat]) -> f64 {
        self.factor * self.inner.value(x)
    }

    fn value_and_gradient(&self, x: &[CMat]) -> (f64, Vec<CMat>) {
        let (v, g) = self.inner.value_and_gradient(x);
        (
            self.factor * v,
            g.into_iter().map(|gb| gb * c(self.factor, 0.0)).collect(),
        )
    }
}
