use super::tensor::{axpy, Tensor};

/// Affine map y = W x + b.
#[derive(Debug, Clone)]
pub struct Dense {
    /// [out, in]
    pub w: Tensor,
    /// [out]
    pub b: Tensor,
}

crate::impl_parameterized!(Dense { "w" => w, "b" => b });

impl Dense {
    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Self {
            w: Tensor::zeros(vec![output_dim, input_dim]),
            b: Tensor::zeros(vec![output_dim]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.shape[1]
    }

    pub fn output_dim(&self) -> usize {
        self.w.shape[0]
    }

    pub fn init_uniform(&mut self, rng: &mut crate::rng::Rng, bound: f64) {
        self.w.init_uniform(rng, bound);
    }

    pub fn init_glorot(&mut self, rng: &mut crate::rng::Rng) {
        let bound = (6.0 / (self.input_dim() + self.output_dim()) as f64).sqrt();
        self.w.init_uniform(rng, bound);
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.w.matvec(x);
        axpy(&mut y, 1.0, &self.b.data);
        y
    }

    /// Accumulates dW, db into `grads`; returns dx.
    pub fn backward(&self, x: &[f64], dy: &[f64], grads: &mut Dense) -> Vec<f64> {
        grads.w.add_outer(dy, x);
        axpy(&mut grads.b.data, 1.0, dy);
        self.w.matvec_t(dy)
    }
}
