//! Random feature operator learning.
//!
//! Learns maps between function spaces from sampled input/output pairs with
//! min-norm random Fourier feature interpolation. Features are
//! `exp(i<ω, x>)` with Cauchy or Gaussian frequencies, whose limiting
//! kernels are the Laplace and RBF kernels. The crate also carries kernel
//! interpolation baselines, synthetic advection benchmarks, diagnostics for
//! Gram concentration and error decay, and a binary/CSV storage format.

pub mod datagen;
pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod features;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod operator;
pub mod parallel;
pub mod rng;
pub mod solver;

pub use domain::{
    min_separation, sampling_apply, CollocationGrid, Distribution, FieldSample, GridId, KernelSpec, OperatorDataset,
    RfConfig,
};
pub use error::{Error, ErrorClass, Result};
pub use features::{assemble, evaluate, sample_cauchy, sample_gaussian, FeatureEnsemble, FeatureMatrix, RandomFeatureInterpolant};
pub use kernels::{kernel_eval, kernel_fit, kernel_predict, KernelFit, KernelInterpolant};
pub use linalg::{CMatrix, RMatrix};
pub use operator::{infer, predict_samples, recover, train_operator, OperatorModel, TrainConfig};
pub use solver::{gram_factorize, gram_spectrum_bounds, min_norm_fit, min_norm_fit_multi, GramFactorization};
