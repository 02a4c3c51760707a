//! Gravity-equation estimators: OLS on log flows, Poisson pseudo-maximum
//! likelihood, logit for link presence and the zero-inflated Poisson model,
//! plus the Vuong comparison of ZIP against plain Poisson.

mod irls;
mod linalg;
mod zip;

pub use zip::{fit_zip, vuong_test, zip_row_loglik, VuongResult, ZipConfig, ZipFitResult, ZipTrace};

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::panel::{DesignMatrix, CONSTANT};
use irls::{irls, ln_factorial, Family, IrlsConfig};
use linalg::wls;

pub use irls::logistic;
pub(crate) use irls::poisson_row_loglik;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelTag {
    #[serde(rename = "OLS")]
    Ols,
    #[serde(rename = "PPML")]
    Ppml,
    #[serde(rename = "ZIP")]
    Zip,
    #[serde(rename = "LOGIT")]
    Logit,
}

impl ModelTag {
    pub const ALL: [ModelTag; 4] = [ModelTag::Ols, ModelTag::Ppml, ModelTag::Zip, ModelTag::Logit];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::Ols => "OLS",
            ModelTag::Ppml => "PPML",
            ModelTag::Zip => "ZIP",
            ModelTag::Logit => "LOGIT",
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelTag::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Schema(format!("unknown model `{s}` (expected OLS, PPML, ZIP or LOGIT)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
}

/// Joint significance test of all non-constant coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTest {
    /// `"F"` for OLS, `"Wald chi2"` otherwise.
    pub name: String,
    pub value: f64,
    pub df1: f64,
    pub df2: Option<f64>,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_obs: usize,
    pub loglik: f64,
    pub loglik_null: Option<f64>,
    /// R² for OLS, McFadden pseudo-R² for the likelihood models.
    pub r2: f64,
    pub joint_test: Option<JointTest>,
    pub converged: bool,
    pub iterations: usize,
    /// Sup-norm of the score at the reported coefficients.
    pub gradient_norm: f64,
}

/// Estimates from a single-equation fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelTag,
    pub coefficients: Vec<Coefficient>,
    /// Row-major covariance of the estimates.
    pub vcov: Vec<Vec<f64>>,
    /// Residual variance, present for OLS only.
    pub sigma2: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    fn assemble(
        model: ModelTag,
        names: &[String],
        beta: &DVector<f64>,
        vcov: &DMatrix<f64>,
        sigma2: Option<f64>,
        diagnostics: Diagnostics,
    ) -> Self {
        let vcov = (vcov + vcov.transpose()) * 0.5;
        let coefficients = names
            .iter()
            .enumerate()
            .map(|(k, name)| Coefficient {
                name: name.clone(),
                estimate: beta[k],
                std_error: vcov[(k, k)].max(0.0).sqrt(),
            })
            .collect();
        let vcov = (0..vcov.nrows())
            .map(|r| vcov.row(r).iter().copied().collect())
            .collect();
        Self {
            model,
            coefficients,
            vcov,
            sigma2,
            diagnostics,
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.coefficients.iter().map(|c| c.name.clone()).collect()
    }

    pub fn estimates(&self) -> DVector<f64> {
        DVector::from_iterator(self.coefficients.len(), self.coefficients.iter().map(|c| c.estimate))
    }

    pub fn std_errors(&self) -> DVector<f64> {
        DVector::from_iterator(self.coefficients.len(), self.coefficients.iter().map(|c| c.std_error))
    }

    pub fn vcov_matrix(&self) -> DMatrix<f64> {
        let p = self.vcov.len();
        DMatrix::from_fn(p, p, |r, c| self.vcov[r][c])
    }

    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// `X·coef` for a design whose columns match this fit.
    pub fn linear_predictor(&self, dm: &DesignMatrix) -> Result<DVector<f64>> {
        dm.check_columns(&self.names())?;
        Ok(dm.linear_predictor(&self.estimates()))
    }
}

/// Wald test of every coefficient except the constant.
pub(crate) fn wald_test(names: &[String], beta: &DVector<f64>, vcov: &DMatrix<f64>) -> Option<JointTest> {
    let slopes: Vec<usize> = (0..names.len()).filter(|&k| names[k] != CONSTANT).collect();
    if slopes.is_empty() {
        return None;
    }
    let b = DVector::from_iterator(slopes.len(), slopes.iter().map(|&k| beta[k]));
    let v = vcov.select_rows(&slopes).select_columns(&slopes);
    let v_inv = linalg::spd_inverse(&v)?;
    let value = (b.transpose() * v_inv * &b)[(0, 0)];
    let df = slopes.len() as f64;
    let p_value = ChiSquared::new(df).map(|d| d.sf(value)).unwrap_or(f64::NAN);
    Some(JointTest {
        name: "Wald chi2".into(),
        value,
        df1: df,
        df2: None,
        p_value,
    })
}

fn check_rows(dm: &DesignMatrix) -> Result<()> {
    if dm.n_rows() < dm.n_cols() + 1 {
        return Err(Error::Precondition(format!(
            "{} rows are too few for {} coefficients",
            dm.n_rows(),
            dm.n_cols()
        )));
    }
    Ok(())
}

/// Least squares of `ln y` on the design. Every response must be positive.
pub fn fit_ols(dm: &DesignMatrix) -> Result<FitResult> {
    check_rows(dm)?;
    let log_y = dm.log_y()?;
    let sol = wls(&dm.x, None, &log_y, &dm.columns)?;
    let (n, p) = (dm.n_rows(), dm.n_cols());
    let resid = &log_y - &dm.x * &sol.beta;
    let ssr = resid.norm_squared();
    let mean = log_y.mean();
    let tss: f64 = log_y.iter().map(|v| (v - mean).powi(2)).sum();
    let dof = (n - p) as f64;
    let sigma2 = ssr / dof;
    let vcov = sol.unscaled_cov() * sigma2;
    let loglik = if ssr > 0.0 {
        -0.5 * n as f64 * ((2.0 * std::f64::consts::PI * ssr / n as f64).ln() + 1.0)
    } else {
        f64::INFINITY
    };

    let has_constant = dm.column_index(CONSTANT).is_some();
    let joint_test = (has_constant && p > 1).then(|| {
        let df1 = (p - 1) as f64;
        let value = ((tss - ssr) / df1) / (ssr / dof);
        let p_value = if ssr > 0.0 {
            FisherSnedecor::new(df1, dof).map(|d| d.sf(value)).unwrap_or(f64::NAN)
        } else {
            0.0
        };
        JointTest {
            name: "F".into(),
            value,
            df1,
            df2: Some(dof),
            p_value,
        }
    });
    let r2 = if tss > 0.0 { 1.0 - ssr / tss } else { 1.0 };
    let gradient_norm = (dm.x.transpose() * &resid).amax();

    Ok(FitResult::assemble(
        ModelTag::Ols,
        &dm.columns,
        &sol.beta,
        &vcov,
        Some(sigma2),
        Diagnostics {
            n_obs: n,
            loglik,
            loglik_null: None,
            r2,
            joint_test,
            converged: true,
            iterations: 1,
            gradient_norm,
        },
    ))
}

/// Starting values for log-link fits: OLS of `ln(y + 1)` on the design.
pub(crate) fn log1p_ols_start(dm: &DesignMatrix) -> Result<DVector<f64>> {
    let z = dm.y.map(f64::ln_1p);
    Ok(wls(&dm.x, None, &z, &dm.columns)?.beta)
}

fn check_counts(y: &DVector<f64>) -> Result<()> {
    if let Some(k) = y.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::validation(
            None,
            format!("Poisson response must be finite and non-negative; row {k} has {}", y[k]),
        ));
    }
    Ok(())
}

/// Poisson pseudo-maximum likelihood on the full design, flows in levels.
pub fn fit_poisson_pml(dm: &DesignMatrix) -> Result<FitResult> {
    check_rows(dm)?;
    check_counts(&dm.y)?;
    let start = log1p_ols_start(dm)?;
    let fit = irls(
        &dm.x,
        &dm.y,
        None,
        Family::Poisson,
        start,
        &IrlsConfig::default(),
        &dm.columns,
    )
    .map_err(|e| relabel(e, "PPML"))?;

    let n = dm.n_rows() as f64;
    let ybar = dm.y.sum() / n;
    let loglik_null: f64 = dm
        .y
        .iter()
        .map(|&v| {
            let term = if v > 0.0 { v * ybar.ln() } else { 0.0 };
            term - ybar - ln_factorial(v)
        })
        .sum();
    Ok(FitResult::assemble(
        ModelTag::Ppml,
        &dm.columns,
        &fit.beta,
        &fit.unscaled_cov,
        None,
        Diagnostics {
            n_obs: dm.n_rows(),
            loglik: fit.loglik,
            loglik_null: Some(loglik_null),
            r2: 1.0 - fit.loglik / loglik_null,
            joint_test: wald_test(&dm.columns, &fit.beta, &fit.unscaled_cov),
            converged: true,
            iterations: fit.iterations,
            gradient_norm: fit.gradient_norm,
        },
    ))
}

/// Logit of the binary response `a` (one entry per design row).
pub fn fit_logit(dm: &DesignMatrix, a: &DVector<f64>) -> Result<FitResult> {
    check_rows(dm)?;
    if a.len() != dm.n_rows() {
        return Err(Error::Schema(format!(
            "{} binary responses for {} design rows",
            a.len(),
            dm.n_rows()
        )));
    }
    if a.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::validation(None, "logit response must be 0/1"));
    }
    let ones = a.sum();
    if ones == 0.0 || ones == a.len() as f64 {
        return Err(Error::Precondition(
            "logit needs both linked and unlinked dyads".into(),
        ));
    }
    let fit = irls(
        &dm.x,
        a,
        None,
        Family::Binomial,
        DVector::zeros(dm.n_cols()),
        &IrlsConfig::default(),
        &dm.columns,
    )
    .map_err(|e| relabel(e, "LOGIT"))?;

    let pbar = ones / a.len() as f64;
    let loglik_null = ones * pbar.ln() + (a.len() as f64 - ones) * (1.0 - pbar).ln();
    Ok(FitResult::assemble(
        ModelTag::Logit,
        &dm.columns,
        &fit.beta,
        &fit.unscaled_cov,
        None,
        Diagnostics {
            n_obs: dm.n_rows(),
            loglik: fit.loglik,
            loglik_null: Some(loglik_null),
            r2: 1.0 - fit.loglik / loglik_null,
            joint_test: wald_test(&dm.columns, &fit.beta, &fit.unscaled_cov),
            converged: true,
            iterations: fit.iterations,
            gradient_norm: fit.gradient_norm,
        },
    ))
}

fn relabel(e: Error, model: &str) -> Error {
    match e {
        Error::Convergence {
            iterations,
            reason,
            last,
            ..
        } => Error::Convergence {
            model: model.into(),
            iterations,
            reason,
            last,
        },
        Error::Separation { reason, .. } => Error::Separation {
            model: model.into(),
            reason,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests;
