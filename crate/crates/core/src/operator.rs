//! Operator learning: training, sample prediction, recovery and inference.
//!
//! The learned operator is `R_v ∘ f̂ ∘ S_u`. Training draws one ensemble over
//! the input sample space `R^n` and solves one min-norm problem per output
//! grid point, all against a single Gram factorization. Inference maps a
//! sampled input to predicted output samples and lifts them back to a
//! function with a min-norm random feature interpolant on the output grid.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{min_separation, CollocationGrid, Distribution, FieldSample, OperatorDataset, RfConfig};
use crate::error::{Error, Result};
use crate::features::{self, FeatureEnsemble, FeatureMatrix, RandomFeatureInterpolant};
use crate::linalg::{self, CMatrix, RMatrix};
use crate::rng::derive_seed;
use crate::solver::{self, GramFactorization};

/// Minimum feature count of the default output-side recovery ensemble.
pub const DEFAULT_RECOVERY_FEATURES: usize = 2000;

/// Training configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub features: RfConfig,
    /// Output-side recovery ensemble; `None` picks [`default_recovery`].
    pub recovery: Option<RfConfig>,
}

impl TrainConfig {
    pub fn new(distribution: Distribution, gamma: f64, n_features: usize, seed: u64) -> Self {
        TrainConfig {
            features: RfConfig {
                distribution,
                gamma,
                n_features,
                seed,
            },
            recovery: None,
        }
    }
}

/// Default recovery ensemble for an output grid: Cauchy frequencies with
/// scale `1/K` (K the grid separation), `max(2000, 10 m)` features and a seed
/// derived from the model seed.
pub fn default_recovery(grid: &CollocationGrid, model_seed: u64) -> RfConfig {
    let gamma = match min_separation(grid) {
        Ok(k) if k > 0.0 => 1.0 / k,
        _ => 1.0,
    };
    RfConfig {
        distribution: Distribution::Cauchy,
        gamma,
        n_features: DEFAULT_RECOVERY_FEATURES.max(10 * grid.len()),
        seed: derive_seed(model_seed, 0x7265_636f_7665_72),
    }
}

struct RecoveryCache {
    ensemble: FeatureEnsemble,
    matrix: FeatureMatrix,
    factor: GramFactorization,
}

/// Trained operator `Ĝ = R_v ∘ f̂ ∘ S_u`.
pub struct OperatorModel {
    pub input_ensemble: FeatureEnsemble,
    /// `N × m`; column `j` holds the coefficients of output component `j`.
    pub coeff_matrix: CMatrix,
    pub input_grid: CollocationGrid,
    pub output_grid: CollocationGrid,
    pub recovery_config: RfConfig,
    pub jitter_used: f64,
    pub relative_residual: f64,
    recovery: OnceLock<std::result::Result<RecoveryCache, String>>,
}

impl std::fmt::Debug for OperatorModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorModel")
            .field("input_ensemble", &self.input_ensemble.config())
            .field("outputs", &self.coeff_matrix.cols())
            .field("recovery_config", &self.recovery_config)
            .field("jitter_used", &self.jitter_used)
            .finish()
    }
}

impl Clone for OperatorModel {
    fn clone(&self) -> Self {
        OperatorModel::from_parts(
            self.input_ensemble.clone(),
            self.coeff_matrix.clone(),
            self.input_grid.clone(),
            self.output_grid.clone(),
            self.recovery_config,
            self.jitter_used,
            self.relative_residual,
        )
        .expect("cloning a valid model")
    }
}

impl PartialEq for OperatorModel {
    fn eq(&self, o: &Self) -> bool {
        self.input_ensemble == o.input_ensemble
            && self.coeff_matrix == o.coeff_matrix
            && self.input_grid == o.input_grid
            && self.output_grid == o.output_grid
            && self.recovery_config == o.recovery_config
            && self.jitter_used.to_bits() == o.jitter_used.to_bits()
            && self.relative_residual.to_bits() == o.relative_residual.to_bits()
    }
}

impl OperatorModel {
    /// Reassembles a model, checking shapes.
    pub fn from_parts(
        input_ensemble: FeatureEnsemble,
        coeff_matrix: CMatrix,
        input_grid: CollocationGrid,
        output_grid: CollocationGrid,
        recovery_config: RfConfig,
        jitter_used: f64,
        relative_residual: f64,
    ) -> Result<Self> {
        if input_ensemble.dim() != input_grid.len() {
            return Err(Error::DimensionMismatch {
                expected: input_grid.len(),
                got: input_ensemble.dim(),
                context: "input ensemble dimension vs input grid size",
            });
        }
        if coeff_matrix.rows() != input_ensemble.count() {
            return Err(Error::DimensionMismatch {
                expected: input_ensemble.count(),
                got: coeff_matrix.rows(),
                context: "coefficient rows vs feature count",
            });
        }
        if coeff_matrix.cols() != output_grid.len() {
            return Err(Error::DimensionMismatch {
                expected: output_grid.len(),
                got: coeff_matrix.cols(),
                context: "coefficient columns vs output grid size",
            });
        }
        Ok(OperatorModel {
            input_ensemble,
            coeff_matrix,
            input_grid,
            output_grid,
            recovery_config,
            jitter_used,
            relative_residual,
            recovery: OnceLock::new(),
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            features: self.input_ensemble.config(),
            recovery: Some(self.recovery_config),
        }
    }

    /// Predicted output samples for every row of `inputs` (`M × n`).
    pub fn predict_batch(&self, inputs: &RMatrix) -> Result<RMatrix> {
        if inputs.cols() != self.input_grid.len() {
            return Err(Error::DimensionMismatch {
                expected: self.input_grid.len(),
                got: inputs.cols(),
                context: "input sample length",
            });
        }
        let a = features::assemble(&self.input_ensemble, inputs.as_slice(), inputs.cols())?;
        let p = linalg::matmul(&a, &self.coeff_matrix);
        Ok(RMatrix::from_vec(
            p.rows(),
            p.cols(),
            p.as_slice().iter().map(|z| z.re).collect(),
        ))
    }

    fn recovery_cache(&self) -> Result<&RecoveryCache> {
        let cached = self.recovery.get_or_init(|| {
            let build = || -> Result<RecoveryCache> {
                let ensemble = features::sample(&self.recovery_config, self.output_grid.dim())?;
                let matrix = features::assemble(&ensemble, self.output_grid.flat_points(), self.output_grid.dim())?;
                let factor = solver::gram_factorize(&matrix)?;
                Ok(RecoveryCache {
                    ensemble,
                    matrix,
                    factor,
                })
            };
            build().map_err(|e| e.to_string())
        });
        cached.as_ref().map_err(|e| Error::data(format!("output recovery unavailable: {e}")))
    }
}

fn check_duplicates(data: &OperatorDataset) -> Result<()> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    let key = |l: usize| data.input(l).iter().map(|v| (v + 0.0).to_bits()).collect::<Vec<u64>>();
    order.sort_by_cached_key(|&l| key(l));
    for w in order.windows(2) {
        let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
        if data.input(a) == data.input(b) && data.output(a) != data.output(b) {
            return Err(Error::DuplicateInputs { first: a, second: b });
        }
    }
    Ok(())
}

/// Trains the sample-to-sample map by min-norm random feature interpolation.
pub fn train_operator(data: &OperatorDataset, cfg: &TrainConfig) -> Result<OperatorModel> {
    let m_train = data.len();
    if cfg.features.n_features < m_train {
        return Err(Error::param(format!(
            "feature count {} is below the number of training pairs {m_train}",
            cfg.features.n_features
        )));
    }
    check_duplicates(data)?;
    let ensemble = features::sample(&cfg.features, data.input_grid.len())?;
    let a = features::assemble(&ensemble, data.inputs.as_slice(), data.inputs.cols())?;
    let fact = solver::gram_factorize(&a)?;
    let sol = solver::solve_min_norm(&a, &fact, &data.outputs)?;
    let recovery = cfg
        .recovery
        .unwrap_or_else(|| default_recovery(&data.output_grid, cfg.features.seed));
    OperatorModel::from_parts(
        ensemble,
        sol.coefficients,
        data.input_grid.clone(),
        data.output_grid.clone(),
        recovery,
        sol.jitter_used,
        sol.relative_residual,
    )
}

/// Predicted output samples `f̂(u)`.
pub fn predict_samples(model: &OperatorModel, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != model.input_grid.len() {
        return Err(Error::DimensionMismatch {
            expected: model.input_grid.len(),
            got: u.len(),
            context: "input sample length",
        });
    }
    let row = model.input_ensemble.feature_row(u);
    let m = model.coeff_matrix.cols();
    let mut out = vec![0.0; m];
    for (k, phi) in row.iter().enumerate() {
        for (o, c) in out.iter_mut().zip(model.coeff_matrix.row(k)) {
            *o += phi.re * c.re - phi.im * c.im;
        }
    }
    Ok(out)
}

/// Min-norm random feature interpolant of `values` on `grid`.
pub fn recover(grid: &CollocationGrid, values: &FieldSample, cfg: &RfConfig) -> Result<RandomFeatureInterpolant> {
    if values.values.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: values.values.len(),
            context: "field sample length",
        });
    }
    if cfg.n_features < grid.len() {
        return Err(Error::param(format!(
            "recovery needs at least as many features as grid points ({} < {})",
            cfg.n_features,
            grid.len()
        )));
    }
    let ensemble = features::sample(cfg, grid.dim())?;
    let a = features::assemble(&ensemble, grid.flat_points(), grid.dim())?;
    let fact = solver::gram_factorize(&a)?;
    recover_with(&ensemble, &a, &fact, grid, &values.values)
}

fn recover_with(
    ensemble: &FeatureEnsemble,
    a: &FeatureMatrix,
    fact: &GramFactorization,
    grid: &CollocationGrid,
    values: &[f64],
) -> Result<RandomFeatureInterpolant> {
    let y = RMatrix::from_vec(values.len(), 1, values.to_vec());
    let sol = solver::solve_min_norm(a, fact, &y)?;
    let mut f = RandomFeatureInterpolant::new(ensemble.clone(), sol.coefficients.into_vec())?;
    f.train_grid_id = Some(grid.id());
    f.jitter_used = sol.jitter_used;
    Ok(f)
}

/// Full function estimate `Ĝ(u)`.
pub fn infer(model: &OperatorModel, u: &FieldSample) -> Result<RandomFeatureInterpolant> {
    if u.grid_id != model.input_grid.id() {
        return Err(Error::data("input field is not sampled on the model's input grid"));
    }
    let v = predict_samples(model, &u.values)?;
    let cache = model.recovery_cache()?;
    recover_with(&cache.ensemble, &cache.matrix, &cache.factor, &model.output_grid, &v)
}

/// Sum of `exp(i<ω,u>)·c` over features, exposed for diagnostics.
pub fn predict_component(model: &OperatorModel, u: &[f64], j: usize) -> Result<f64> {
    let coeffs: Vec<Complex64> = model.coeff_matrix.column(j);
    let f = RandomFeatureInterpolant::new(model.input_ensemble.clone(), coeffs)?;
    features::evaluate(&f, u)
}
