//! Numeric substrate: row-major f64 tensors, LSTM and dense layers with
//! hand-derived backward passes, momentum SGD, and a central-difference
//! gradient checker. No autodiff — every layer's gradient is written out and
//! verified against finite differences in the tests.

mod dense;
mod gradcheck;
mod lstm;
mod ops;
mod optim;
mod params;
mod tensor;

pub use dense::Dense;
pub use gradcheck::finite_diff_check;
pub use lstm::{LstmCache, LstmCell, LstmRun};
pub use ops::{
    bernoulli_entropy, bernoulli_entropy_dp, safe_ln, sigmoid, softmax, softmax_xent,
    softmax_xent_grad, SoftmaxXent,
};
pub use optim::SgdMomentum;
pub use params::{zeroed_like, Parameterized};
pub use tensor::{axpy, dot, Tensor};
