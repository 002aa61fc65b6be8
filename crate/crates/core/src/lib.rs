//! MMSE channel estimation and prediction toolkit.
//!
//! The crate models time-variant flat-fading channels as sums of plane waves,
//! derives LMMSE estimator/predictor filters from their second-order
//! statistics, and builds the adaptive variants on top: a softmax-gated bank
//! of LMMSE predictors over a Doppler prior grid, its DFT-diagonalized
//! compression, a trainable feed-forward predictor initialized from that
//! compressed form, and a convolutional channel estimator for uniform linear
//! arrays. Orthogonal matching pursuit and an identity estimator serve as
//! baselines; everything is evaluated by normalized MSE over seeded
//! Monte-Carlo draws.
//!
//! Batch evaluation runs data-parallel via rayon when the `parallel` feature
//! (on by default) is enabled; [`batch::map_seq`] is the sequential path used
//! by the comparison benches.

pub mod batch;
pub mod bessel;
pub mod channel;
pub mod cnn;
pub mod dataset;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod lmmse;
pub mod nn;
pub mod omp;
pub mod opt;
pub mod seed;
pub mod snapshot;

pub use error::{Error, Result};

/// Complex scalar used throughout: double-precision Cartesian form.
pub type Complex64 = nalgebra::Complex<f64>;

/// Complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;

/// Complex dense matrix.
pub type CMatrix = nalgebra::DMatrix<Complex64>;

/// Real column vector.
pub type RVector = nalgebra::DVector<f64>;

/// Real dense matrix.
pub type RMatrix = nalgebra::DMatrix<f64>;
