use super::params::Parameterized;
use super::tensor::Tensor;
use std::collections::BTreeMap;

/// Stochastic gradient descent with classical momentum:
///   v ← momentum · v + g
///   θ ← θ − lr · v
/// Velocity buffers are keyed by parameter name and created lazily.
#[derive(Debug, Clone)]
pub struct SgdMomentum {
    pub lr: f64,
    pub momentum: f64,
    velocity: BTreeMap<String, Tensor>,
}

impl SgdMomentum {
    pub fn new(lr: f64, momentum: f64) -> Self {
        assert!(lr.is_finite() && lr > 0.0, "lr must be positive, got {lr}");
        assert!(
            (0.0..1.0).contains(&momentum),
            "momentum must be in [0,1), got {momentum}"
        );
        Self { lr, momentum, velocity: BTreeMap::new() }
    }

    pub fn step<P: Parameterized>(&mut self, params: &mut P, grads: &P) {
        for name in grads.param_names() {
            let g = grads.param(name);
            let v = self
                .velocity
                .entry(name.to_string())
                .or_insert_with(|| g.zeros_like());
            assert_eq!(v.shape, g.shape, "velocity shape drifted for {name}");
            for (vv, gg) in v.data.iter_mut().zip(&g.data) {
                *vv = self.momentum * *vv + gg;
            }
            params.param_mut(name).add_scaled(v, -self.lr);
        }
    }
}
