use super::tensor::Tensor;

/// Uniform access to a model's parameter tensors under stable names.
/// Gradient accumulators are zeroed clones of the model itself, so the same
/// names address parameters, gradients, and optimizer state.
pub trait Parameterized {
    fn param_names(&self) -> Vec<&'static str>;
    fn param(&self, name: &str) -> &Tensor;
    fn param_mut(&mut self, name: &str) -> &mut Tensor;

    fn zero_params(&mut self) {
        for n in self.param_names() {
            self.param_mut(n).fill(0.0);
        }
    }

    fn scale_params(&mut self, s: f64) {
        for n in self.param_names() {
            self.param_mut(n).scale(s);
        }
    }

    fn add_scaled_params(&mut self, other: &Self, s: f64)
    where
        Self: Sized,
    {
        for n in self.param_names() {
            let o = other.param(n).clone();
            self.param_mut(n).add_scaled(&o, s);
        }
    }

    fn param_count(&self) -> usize {
        self.param_names().iter().map(|n| self.param(n).numel()).sum()
    }

    fn global_norm(&self) -> f64 {
        self.param_names()
            .iter()
            .map(|n| self.param(n).sq_norm())
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales all tensors so the global norm is at most `max_norm`.
    /// Returns the pre-clip norm.
    fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            self.scale_params(s);
        }
        norm
    }
}

/// A zeroed clone: same shapes and non-parameter fields, all params 0.
pub fn zeroed_like<P: Parameterized + Clone>(p: &P) -> P {
    let mut q = p.clone();
    q.zero_params();
    q
}

/// Implements `Parameterized` by enumerating leaf tensors:
/// `impl_parameterized!(MyModel { "enc.w_ih" => enc.w_ih, ... });`
#[macro_export]
macro_rules! impl_parameterized {
    ($ty:ty { $($name:literal => $($field:ident).+),+ $(,)? }) => {
        impl $crate::nn::Parameterized for $ty {
            fn param_names(&self) -> Vec<&'static str> {
                vec![$($name),+]
            }
            fn param(&self, name: &str) -> &$crate::nn::Tensor {
                match name {
                    $($name => &self.$($field).+,)+
                    _ => panic!("unknown parameter {name}"),
                }
            }
            fn param_mut(&mut self, name: &str) -> &mut $crate::nn::Tensor {
                match name {
                    $($name => &mut self.$($field).+,)+
                    _ => panic!("unknown parameter {name}"),
                }
            }
        }
    };
}
