//! Anything that supplies a value surface can act as a frozen Gibbs policy.

use crate::fd::{benchmark_value, FdSolution};
use crate::model::ParamModel;

pub trait ValueSurface {
    /// (v, v_x) at surplus `x` and belief `p`.
    fn value(&self, x: f64, p: f64) -> (f64, f64);
}

impl ValueSurface for ParamModel {
    fn value(&self, x: f64, p: f64) -> (f64, f64) {
        ParamModel::value(self, x, p)
    }
}

impl ValueSurface for FdSolution {
    fn value(&self, x: f64, p: f64) -> (f64, f64) {
        benchmark_value(self, x, p)
    }
}
