//! Predicted weighted networks, link probabilities, binary predictors and
//! Monte-Carlo ensembles built from fitted gravity models.

mod binary;
mod ensemble;
mod io;
mod seed;

pub use binary::{
    density_induced_binary, density_matched_binary, threshold_by_manhattan, BinaryPrediction, ManhattanThreshold,
};
pub use ensemble::{
    sample_bernoulli_ensemble, sample_weighted_ensemble, NetworkEnsemble, PoissonGrid, Sampler,
};
pub use io::{write_dense_csv, write_long_csv};
pub use seed::{derive_seed, split_mix64};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{logistic, FitResult, ModelTag, ZipFitResult};
use crate::netstats::{TradeNetwork, WeightTransform};
use crate::panel::DesignMatrix;

/// Largest linear predictor whose exponential is finite.
const MAX_ETA: f64 = 709.782712893384;

/// Default number of Monte-Carlo replications.
pub const DEFAULT_REPLICATIONS: usize = 10_000;

/// `ψ̂` and `μ̂` of a ZIP prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ZipParts {
    pub psi: DMatrix<f64>,
    pub mu: DMatrix<f64>,
}

/// Predicted link weights on an `N×N` grid.
///
/// OLS values are log weights; PPML and ZIP values are levels. `mask` marks
/// dyads with a prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedWeights {
    pub model: ModelTag,
    pub countries: Vec<String>,
    pub value: DMatrix<f64>,
    pub variance: DMatrix<f64>,
    pub mask: DMatrix<f64>,
    /// Residual variance of an OLS fit.
    pub sigma2: Option<f64>,
    pub zip_parts: Option<ZipParts>,
}

impl PredictedWeights {
    pub fn n(&self) -> usize {
        self.countries.len()
    }

    /// Point-prediction network. For OLS the log values are used directly
    /// under `LogPositive` and exponentiated under `Identity`; the binary
    /// structure is the mask either way.
    pub fn network(&self, transform: WeightTransform) -> Result<TradeNetwork> {
        match self.model {
            ModelTag::Ols => {
                let w = match transform {
                    WeightTransform::LogPositive => self.value.clone(),
                    WeightTransform::Identity => self.value.zip_map(&self.mask, |v, m| if m > 0.0 { v.exp() } else { 0.0 }),
                };
                TradeNetwork::with_adjacency(w, self.mask.clone())
            }
            _ => TradeNetwork::transformed(self.value.clone(), transform),
        }
    }

    /// Dyads with a prediction as `(i, j, value, variance)`, row-major.
    pub fn masked_entries(&self) -> Vec<(usize, usize, f64, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if self.mask[(i, j)] > 0.0 {
                    out.push((i, j, self.value[(i, j)], self.variance[(i, j)]));
                }
            }
        }
        out
    }
}

fn require_dyads(dm: &DesignMatrix) -> Result<usize> {
    if dm.countries.is_empty() {
        return Err(Error::Schema("prediction needs a design built from a cross-section".into()));
    }
    Ok(dm.countries.len())
}

fn require_model(fit: &FitResult, expected: ModelTag) -> Result<()> {
    if fit.model != expected {
        return Err(Error::Schema(format!("expected a {expected} fit, got {}", fit.model)));
    }
    Ok(())
}

fn scatter(dm: &DesignMatrix, n: usize, values: impl Fn(usize) -> f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for (r, &(i, j)) in dm.rows.iter().enumerate() {
        m[(i, j)] = values(r);
    }
    m
}

fn row_mask(dm: &DesignMatrix, n: usize) -> DMatrix<f64> {
    scatter(dm, n, |_| 1.0)
}

fn checked_exp(dm: &DesignMatrix, eta: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(r) = eta.iter().position(|e| !(*e <= MAX_ETA)) {
        let (i, j) = dm.rows[r];
        return Err(Error::PredictionOverflow {
            exporter: dm.countries[i].clone(),
            importer: dm.countries[j].clone(),
            eta: eta[r],
        });
    }
    Ok(eta.map(f64::exp))
}

/// `ω̂ = xγ̂` on the rows of a positive-flow design, variance `σ̂²`.
pub fn predict_ols(fit: &FitResult, dm: &DesignMatrix) -> Result<PredictedWeights> {
    require_model(fit, ModelTag::Ols)?;
    let n = require_dyads(dm)?;
    let eta = fit.linear_predictor(dm)?;
    let sigma2 = fit.sigma2.ok_or_else(|| Error::Schema("OLS fit without sigma2".into()))?;
    let mask = row_mask(dm, n);
    Ok(PredictedWeights {
        model: ModelTag::Ols,
        countries: dm.countries.clone(),
        value: scatter(dm, n, |r| eta[r]),
        variance: &mask * sigma2,
        mask,
        sigma2: Some(sigma2),
        zip_parts: None,
    })
}

/// `ŵ = exp(xγ̂)` with Poisson variance `ŵ`.
pub fn predict_ppml(fit: &FitResult, dm: &DesignMatrix) -> Result<PredictedWeights> {
    require_model(fit, ModelTag::Ppml)?;
    let n = require_dyads(dm)?;
    let mu = checked_exp(dm, &fit.linear_predictor(dm)?)?;
    let value = scatter(dm, n, |r| mu[r]);
    Ok(PredictedWeights {
        model: ModelTag::Ppml,
        countries: dm.countries.clone(),
        variance: value.clone(),
        value,
        mask: row_mask(dm, n),
        sigma2: None,
        zip_parts: None,
    })
}

/// `ŵ = (1−ψ̂)μ̂` with variance `μ̂(1−ψ̂)(1+μ̂ψ̂)`.
pub fn predict_zip(zip: &ZipFitResult, dm: &DesignMatrix) -> Result<PredictedWeights> {
    let n = require_dyads(dm)?;
    let psi = zip.logit_part.linear_predictor(dm)?.map(logistic);
    let mu = checked_exp(dm, &zip.poisson_part.linear_predictor(dm)?)?;
    Ok(PredictedWeights {
        model: ModelTag::Zip,
        countries: dm.countries.clone(),
        value: scatter(dm, n, |r| (1.0 - psi[r]) * mu[r]),
        variance: scatter(dm, n, |r| zip_variance(psi[r], mu[r])),
        mask: row_mask(dm, n),
        sigma2: None,
        zip_parts: Some(ZipParts {
            psi: scatter(dm, n, |r| psi[r]),
            mu: scatter(dm, n, |r| mu[r]),
        }),
    })
}

/// Variance of a zero-inflated Poisson count.
pub fn zip_variance(psi: f64, mu: f64) -> f64 {
    mu * (1.0 - psi) * (1.0 + mu * psi)
}

/// Fit that supplies link probabilities.
#[derive(Debug, Clone, Copy)]
pub enum LinkModel<'a> {
    /// `ξ = 1 − ψ̂` from the first ZIP stage.
    Zip(&'a ZipFitResult),
    /// `ξ = Λ(xθ̂)` from a logit of link presence.
    Logit(&'a FitResult),
}

/// Probabilities `ξ_ij` that a link is present; zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkProbabilityMatrix {
    pub countries: Vec<String>,
    pub xi: DMatrix<f64>,
}

impl LinkProbabilityMatrix {
    pub fn new(countries: Vec<String>, xi: DMatrix<f64>) -> Result<Self> {
        let n = countries.len();
        if xi.shape() != (n, n) {
            return Err(Error::Schema(format!(
                "{n} countries but a {}x{} probability matrix",
                xi.nrows(),
                xi.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = xi[(i, j)];
                if (i == j && v != 0.0) || !(0.0..=1.0).contains(&v) {
                    return Err(Error::validation(None, format!("link probability ({i}, {j}) = {v}")));
                }
            }
        }
        Ok(Self { countries, xi })
    }

    pub fn n(&self) -> usize {
        self.countries.len()
    }

    /// Mean of the off-diagonal probabilities, the expected density.
    pub fn mean(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        self.xi.sum() / (n * (n - 1)) as f64
    }
}

pub fn link_probabilities(model: LinkModel<'_>, dm: &DesignMatrix) -> Result<LinkProbabilityMatrix> {
    let n = require_dyads(dm)?;
    let probs = match model {
        LinkModel::Zip(zip) => zip.logit_part.linear_predictor(dm)?.map(|e| logistic(-e)),
        LinkModel::Logit(fit) => {
            require_model(fit, ModelTag::Logit)?;
            fit.linear_predictor(dm)?.map(logistic)
        }
    };
    Ok(LinkProbabilityMatrix {
        countries: dm.countries.clone(),
        xi: scatter(dm, n, |r| probs[r]),
    })
}

/// Formula for the overall probability of a zero flow.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroProbabilityForm {
    /// `ψ̂ + (1−ψ̂)e^{−μ̂}`.
    #[default]
    Mixture,
    /// `ψ̂ + (1−ψ̂)μ̂`, which exceeds 1 once `μ̂ > 1`.
    AsPrinted,
}

pub fn zero_flow_probability(
    zip: &ZipFitResult,
    dm: &DesignMatrix,
    form: ZeroProbabilityForm,
) -> Result<DMatrix<f64>> {
    let n = require_dyads(dm)?;
    let psi = zip.logit_part.linear_predictor(dm)?.map(logistic);
    let eta = zip.poisson_part.linear_predictor(dm)?;
    Ok(scatter(dm, n, |r| {
        let mu = eta[r].exp();
        match form {
            ZeroProbabilityForm::Mixture => psi[r] + (1.0 - psi[r]) * (-mu).exp(),
            ZeroProbabilityForm::AsPrinted => psi[r] + (1.0 - psi[r]) * mu,
        }
    }))
}

#[cfg(test)]
mod tests;
