//! Dense linear algebra, activations, seeded randomness and the
//! finite-difference gradient oracle.

mod activation;
mod gradcheck;
mod matrix;
mod rng;

pub use activation::{log_sigmoid, sigmoid, sigmoid_matrix, softmax, tanh_matrix};
pub use gradcheck::{finite_diff_gradient, relative_error, DEFAULT_STEP};
pub use matrix::{dot, Matrix};
pub use rng::SeededRng;
