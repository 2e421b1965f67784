//! Points that are only available through rational approximations.

use std::sync::Arc;

use crate::rat::Rat;

/// A point of `R^n` queried at any precision `eps > 0`; the answer must lie
/// within `eps` of the point in the max norm.
pub trait PointOracle: Send + Sync {
    fn dim(&self) -> usize;
    fn approx(&self, eps: &Rat) -> Vec<Rat>;
}

/// A rational point, answered exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactPoint(pub Vec<Rat>);

impl PointOracle for ExactPoint {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn approx(&self, _eps: &Rat) -> Vec<Rat> {
        self.0.clone()
    }
}

/// Oracle backed by a closure.
pub struct FnPoint<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&Rat) -> Vec<Rat> + Send + Sync> FnPoint<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnPoint { dim, f }
    }
}

impl<F: Fn(&Rat) -> Vec<Rat> + Send + Sync> PointOracle for FnPoint<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn approx(&self, eps: &Rat) -> Vec<Rat> {
        (self.f)(eps)
    }
}

impl<T: PointOracle + ?Sized> PointOracle for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn approx(&self, eps: &Rat) -> Vec<Rat> {
        (**self).approx(eps)
    }
}

impl<T: PointOracle + ?Sized> PointOracle for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn approx(&self, eps: &Rat) -> Vec<Rat> {
        (**self).approx(eps)
    }
}
