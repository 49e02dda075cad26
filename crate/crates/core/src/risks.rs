//! Validation risks on the labeled source validation set and the covariate
//! shift re-weightings (density ratio, IWCV, DEV).
//!
//! Scorers are immutable after fitting; risk evaluation is pure. Propensities
//! and density-ratio weights are clipped so every risk stays finite on finite
//! inputs.

use nalgebra::DMatrix;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numeric;
use crate::zoo::CandidateModel;

pub const PROPENSITY_CLIP: (f64, f64) = (0.05, 0.95);
pub const WEIGHT_CLIP: (f64, f64) = (0.01, 100.0);

/// Per-validation-sample loss values; finite and non-negative.
#[derive(Debug, Clone)]
pub struct SampleLoss(Vec<f64>);

impl SampleLoss {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("sample losses must be finite and non-negative".into()));
        }
        Ok(SampleLoss(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        numeric::mean(&self.0)
    }
}

/// Per-validation-sample importance weights with their clip bounds.
#[derive(Debug, Clone)]
pub struct ImportanceWeights {
    values: Vec<f64>,
    pub w_min: f64,
    pub w_max: f64,
}

impl ImportanceWeights {
    pub fn new(values: Vec<f64>, w_min: f64, w_max: f64) -> Result<Self> {
        if values.iter().any(|&v| v < w_min || v > w_max) {
            return Err(Error::Config("weights must lie within the clip bounds".into()));
        }
        Ok(ImportanceWeights { values, w_min, w_max })
    }

    /// Clips every weight into `[w_min, w_max]`.
    pub fn clipped(values: Vec<f64>, w_min: f64, w_max: f64) -> Self {
        let values = values.into_iter().map(|v| v.clamp(w_min, w_max)).collect();
        ImportanceWeights { values, w_min, w_max }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Factual squared error per validation sample: `(y_i - f(x_i, t_i))^2`.
pub fn factual_mse(model: &CandidateModel, val: &Dataset) -> Result<SampleLoss> {
    let y = val.outcome_values()?;
    let t = val.treatment_values()?;
    let preds = model.predict_po(&val.covariates())?;
    let losses = (0..val.n_rows())
        .map(|i| {
            let f = if t[i] == 1.0 { preds.y1[i] } else { preds.y0[i] };
            (y[i] - f) * (y[i] - f)
        })
        .collect();
    SampleLoss::new(losses)
}

/// Logistic-form propensity scorer with clipped outputs.
#[derive(Debug, Clone)]
pub struct PropensityModel {
    features: Vec<String>,
    beta: Vec<f64>,
    clip: (f64, f64),
}

impl PropensityModel {
    /// `p̂(t=1 | x)` for every row, clipped into the configured bounds.
    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>> {
        let x = design_from(data, &self.features)?;
        let beta = nalgebra::DVector::from_column_slice(&self.beta);
        Ok(numeric::logistic_predict(&x, &beta)
            .into_iter()
            .map(|p| p.clamp(self.clip.0, self.clip.1))
            .collect())
    }
}

fn design_from(data: &Dataset, features: &[String]) -> Result<DMatrix<f64>> {
    let cols: Vec<&[f64]> = features
        .iter()
        .map(|f| {
            data.values(f)
                .map_err(|_| Error::SchemaMismatch(format!("missing covariate {f:?}")))
        })
        .collect::<Result<_>>()?;
    Ok(numeric::design_with_intercept(&cols, data.n_rows()))
}

/// Fits a logistic propensity model `p̂(t=1 | x)` on the covariates of
/// `train`.
pub fn fit_propensity(train: &Dataset) -> Result<PropensityModel> {
    let t = train.treatment_values()?;
    let treated = t.iter().filter(|&&v| v == 1.0).count();
    if treated == 0 || treated == t.len() {
        return Err(Error::DegenerateTreatment);
    }
    let features = train.covariate_names();
    let x = design_from(train, &features)?;
    let beta = numeric::logistic_irls(&x, t, 25);
    Ok(PropensityModel {
        features,
        beta: beta.iter().copied().collect(),
        clip: PROPENSITY_CLIP,
    })
}

/// Inverse-propensity-weighted factual error: the factual squared error of
/// each sample divided by the estimated propensity of the treatment it
/// received.
pub fn iptw_risk(
    model: &CandidateModel,
    val: &Dataset,
    propensity: &PropensityModel,
) -> Result<SampleLoss> {
    let base = factual_mse(model, val)?;
    let t = val.treatment_values()?;
    let p = propensity.predict(val)?;
    let losses = base
        .values()
        .iter()
        .zip(t)
        .zip(p)
        .map(|((l, t), p)| if *t == 1.0 { l / p } else { l / (1.0 - p) })
        .collect();
    SampleLoss::new(losses)
}

/// Importance weights for the source validation samples from a
/// source-vs-target domain discriminator:
/// `w(x) = p̂(d=1|x)/p̂(d=0|x) * N_src/N_test`, clipped.
pub fn density_ratio(source_val_x: &Dataset, target_x: &Dataset) -> Result<ImportanceWeights> {
    let features: Vec<String> = source_val_x.covariate_names();
    let mut tfeat = target_x.covariate_names();
    let mut sfeat = features.clone();
    sfeat.sort();
    tfeat.sort();
    if sfeat != tfeat {
        return Err(Error::SchemaMismatch(format!(
            "source covariates {sfeat:?} vs target covariates {tfeat:?}"
        )));
    }
    let n_src = source_val_x.n_rows();
    let n_tgt = target_x.n_rows();
    if n_src == 0 || n_tgt == 0 {
        return Err(Error::EmptyDataset);
    }
    let xs = design_from(source_val_x, &features)?;
    let xt = design_from(target_x, &features)?;
    let p = xs.ncols();
    let mut stacked = DMatrix::zeros(n_src + n_tgt, p);
    stacked.rows_mut(0, n_src).copy_from(&xs);
    stacked.rows_mut(n_src, n_tgt).copy_from(&xt);
    let mut labels = vec![0.0; n_src];
    labels.extend(std::iter::repeat_n(1.0, n_tgt));
    let beta = numeric::logistic_irls(&stacked, &labels, 25);
    let probs = numeric::logistic_predict(&xs, &beta);
    let ratio_factor = n_src as f64 / n_tgt as f64;
    let weights = probs
        .iter()
        .map(|&p| {
            let p = p.clamp(1e-12, 1.0 - 1e-12);
            p / (1.0 - p) * ratio_factor
        })
        .collect();
    Ok(ImportanceWeights::clipped(weights, WEIGHT_CLIP.0, WEIGHT_CLIP.1))
}

/// Importance-weighted validation risk: `(1/N_v) Σ w_i l_i`.
pub fn iwcv_risk(losses: &SampleLoss, weights: &ImportanceWeights) -> Result<f64> {
    if losses.len() != weights.len() {
        return Err(Error::LengthMismatch { left: losses.len(), right: weights.len() });
    }
    Ok(numeric::mean(
        &losses
            .values()
            .iter()
            .zip(weights.values())
            .map(|(l, w)| l * w)
            .collect::<Vec<_>>(),
    ))
}

/// Control-variate refinement of IWCV:
/// `mean(w·l) + η (mean(w) - 1)` with `η = -Cov(w·l, w) / Var(w)`.
/// Degenerate weight variance reduces to IWCV.
pub fn dev_risk(losses: &SampleLoss, weights: &ImportanceWeights) -> Result<f64> {
    if losses.len() != weights.len() {
        return Err(Error::LengthMismatch { left: losses.len(), right: weights.len() });
    }
    if losses.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: losses.len() });
    }
    let w = weights.values();
    let wl: Vec<f64> = losses.values().iter().zip(w).map(|(l, w)| l * w).collect();
    let var_w = numeric::variance(w);
    let eta = if var_w < 1e-12 { 0.0 } else { -numeric::covariance(&wl, w) / var_w };
    Ok(numeric::mean(&wl) + eta * (numeric::mean(w) - 1.0))
}

/// Pluggable producer of per-sample validation losses. The shipped
/// implementations are factual MSE and IPTW; anything scoring a model on the
/// labeled validation set can slot in (e.g. influence-function validation).
pub trait ValidationLoss {
    fn name(&self) -> &str;
    fn sample_losses(&self, model: &CandidateModel, val: &Dataset) -> Result<SampleLoss>;
}

pub struct FactualMseLoss;

impl ValidationLoss for FactualMseLoss {
    fn name(&self) -> &str {
        "mse"
    }

    fn sample_losses(&self, model: &CandidateModel, val: &Dataset) -> Result<SampleLoss> {
        factual_mse(model, val)
    }
}

pub struct IptwValidationLoss {
    pub propensity: PropensityModel,
}

impl ValidationLoss for IptwValidationLoss {
    fn name(&self) -> &str {
        "iptw"
    }

    fn sample_losses(&self, model: &CandidateModel, val: &Dataset) -> Result<SampleLoss> {
        iptw_risk(model, val, &self.propensity)
    }
}
