//! Zero-inflated Poisson: `P(y=0) = ψ + (1−ψ)e^{−μ}`,
//! `P(y=k>0) = (1−ψ)·Poisson(k; μ)` with `ψ = Λ(xθ)` and `μ = exp(xγ)`.
//!
//! The fit runs EM to its stopping rule, then polishes with Newton steps on
//! the full likelihood so the reported optimum and the observed-information
//! covariance are taken at the same point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::irls::{irls, ln_factorial, logistic, softplus, Family, IrlsConfig};
use super::linalg::spd_inverse;
use super::{log1p_ols_start, wald_test, Diagnostics, FitResult, ModelTag};
use crate::error::{Error, Result};
use crate::panel::{DesignMatrix, CONSTANT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZipConfig {
    /// Relative log-likelihood improvement that ends EM.
    pub em_tol: f64,
    pub em_max_iter: usize,
    /// Newton iterations on the full likelihood after EM (0 disables).
    pub polish_max_iter: usize,
    /// IRLS iterations inside each M-step.
    pub m_step_max_iter: usize,
}

impl Default for ZipConfig {
    fn default() -> Self {
        Self {
            em_tol: 1e-8,
            em_max_iter: 500,
            polish_max_iter: 100,
            m_step_max_iter: 25,
        }
    }
}

/// Log-likelihood after each EM iteration and each accepted Newton step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ZipTrace {
    pub em_loglik: Vec<f64>,
    pub polish_loglik: Vec<f64>,
}

impl ZipTrace {
    /// Largest drop between consecutive EM log-likelihoods (0 when monotone).
    pub fn max_em_decrease(&self) -> f64 {
        self.em_loglik
            .windows(2)
            .map(|w| (w[0] - w[1]).max(0.0))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VuongResult {
    /// Positive values favour ZIP over plain Poisson.
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZipFitResult {
    /// θ̂, the structural-zero logit.
    pub logit_part: FitResult,
    /// γ̂, the count intensity.
    pub poisson_part: FitResult,
    pub loglik: f64,
    pub loglik_null: f64,
    pub pseudo_r2: f64,
    pub n_obs: usize,
    pub em_iterations: usize,
    pub polish_iterations: usize,
    /// `"observed_information"` or `"em_blocks"` when the joint Hessian is not
    /// negative definite.
    pub vcov_method: String,
    pub trace: ZipTrace,
    pub vuong: Option<VuongResult>,
}

impl ZipFitResult {
    pub fn theta(&self) -> DVector<f64> {
        self.logit_part.estimates()
    }

    pub fn gamma(&self) -> DVector<f64> {
        self.poisson_part.estimates()
    }

    /// Per-row ZIP log-likelihood on `dm`.
    pub fn row_loglik(&self, dm: &DesignMatrix) -> Result<DVector<f64>> {
        let eta1 = self.logit_part.linear_predictor(dm)?;
        let eta2 = self.poisson_part.linear_predictor(dm)?;
        Ok(DVector::from_fn(dm.n_rows(), |k, _| zip_row_loglik(dm.y[k], eta1[k], eta2[k])))
    }

    pub fn with_vuong(mut self, ppml: &FitResult, dm: &DesignMatrix) -> Result<Self> {
        self.vuong = Some(vuong_test(&self, ppml, dm)?);
        Ok(self)
    }
}

#[inline]
fn log_logistic(x: f64) -> f64 {
    -softplus(-x)
}

/// ZIP log-likelihood of one observation.
pub fn zip_row_loglik(y: f64, eta1: f64, eta2: f64) -> f64 {
    let mu = eta2.exp();
    if y == 0.0 {
        let a = log_logistic(eta1);
        let b = log_logistic(-eta1) - mu;
        let m = a.max(b);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + ((a - m).exp() + (b - m).exp()).ln()
    } else {
        log_logistic(-eta1) + y * eta2 - mu - ln_factorial(y)
    }
}

struct ZipProblem<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    names: &'a [String],
}

impl ZipProblem<'_> {
    fn p(&self) -> usize {
        self.x.ncols()
    }

    fn etas(&self, theta: &DVector<f64>, gamma: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (self.x * theta, self.x * gamma)
    }

    fn loglik(&self, theta: &DVector<f64>, gamma: &DVector<f64>) -> f64 {
        let (e1, e2) = self.etas(theta, gamma);
        let ll: f64 = (0..self.y.len()).map(|k| zip_row_loglik(self.y[k], e1[k], e2[k])).sum();
        if ll.is_nan() {
            f64::NEG_INFINITY
        } else {
            ll
        }
    }

    /// Gradient and Hessian of the log-likelihood in `(θ, γ)`.
    fn derivatives(&self, theta: &DVector<f64>, gamma: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let (e1, e2) = self.etas(theta, gamma);
        let n = self.y.len();
        let p = self.p();
        let mut l1 = DVector::zeros(n);
        let mut l2 = DVector::zeros(n);
        let mut l11 = DVector::zeros(n);
        let mut l12 = DVector::zeros(n);
        let mut l22 = DVector::zeros(n);
        for k in 0..n {
            let psi = logistic(e1[k]);
            let mu = e2[k].exp();
            if self.y[k] == 0.0 {
                let q = logistic(e1[k] + mu);
                let r = 1.0 - q;
                l1[k] = q - psi;
                l2[k] = -mu * r;
                l11[k] = q * r - psi * (1.0 - psi);
                l12[k] = q * r * mu;
                l22[k] = -mu * r * (1.0 - mu * q);
            } else {
                l1[k] = -psi;
                l2[k] = self.y[k] - mu;
                l11[k] = -psi * (1.0 - psi);
                l22[k] = -mu;
            }
        }
        let xt = self.x.transpose();
        let mut grad = DVector::zeros(2 * p);
        grad.rows_mut(0, p).copy_from(&(&xt * &l1));
        grad.rows_mut(p, p).copy_from(&(&xt * &l2));

        let weighted = |d: &DVector<f64>| {
            let mut xd = self.x.clone();
            for (k, &dk) in d.iter().enumerate() {
                xd.row_mut(k).scale_mut(dk);
            }
            &xt * xd
        };
        let h11 = weighted(&l11);
        let h12 = weighted(&l12);
        let h22 = weighted(&l22);
        let mut hess = DMatrix::zeros(2 * p, 2 * p);
        hess.view_mut((0, 0), (p, p)).copy_from(&h11);
        hess.view_mut((0, p), (p, p)).copy_from(&h12);
        hess.view_mut((p, 0), (p, p)).copy_from(&h12.transpose());
        hess.view_mut((p, p), (p, p)).copy_from(&h22);
        (grad, hess)
    }

    /// Posterior probability that each row is a structural zero.
    fn posterior(&self, theta: &DVector<f64>, gamma: &DVector<f64>) -> DVector<f64> {
        let (e1, e2) = self.etas(theta, gamma);
        DVector::from_fn(self.y.len(), |k, _| {
            if self.y[k] == 0.0 {
                logistic(e1[k] + e2[k].exp())
            } else {
                0.0
            }
        })
    }

    fn m_step(
        &self,
        family: Family,
        response: &DVector<f64>,
        prior: Option<&DVector<f64>>,
        start: DVector<f64>,
        max_iter: usize,
    ) -> Result<DVector<f64>> {
        let cfg = IrlsConfig {
            max_iter,
            tol: 1e-10,
            separation_guard: false,
        };
        match irls(self.x, response, prior, family, start, &cfg, self.names) {
            Ok(fit) => Ok(fit.beta),
            // Every accepted IRLS step raised the M-step objective, so the
            // last iterate still makes a valid generalized EM step.
            Err(Error::Convergence { last, .. }) => Ok(DVector::from_vec(last)),
            Err(e) => Err(e),
        }
    }
}

struct RawZip {
    theta: DVector<f64>,
    gamma: DVector<f64>,
    loglik: f64,
    em_iterations: usize,
    polish_iterations: usize,
    trace: ZipTrace,
    /// Block covariances of the final M-steps, used when the joint Hessian
    /// cannot be inverted.
    block_cov: (DMatrix<f64>, DMatrix<f64>),
    hessian: DMatrix<f64>,
    gradient: DVector<f64>,
}

fn run_zip(prob: &ZipProblem<'_>, gamma0: DVector<f64>, cfg: &ZipConfig) -> Result<RawZip> {
    let p = prob.p();
    let mut theta = DVector::zeros(p);
    let mut gamma = gamma0;
    let mut ll = prob.loglik(&theta, &gamma);
    if !ll.is_finite() {
        gamma = DVector::zeros(p);
        ll = prob.loglik(&theta, &gamma);
    }
    let mut trace = ZipTrace {
        em_loglik: vec![ll],
        polish_loglik: Vec::new(),
    };

    let mut em_iterations = 0;
    let mut em_converged = false;
    while em_iterations < cfg.em_max_iter {
        em_iterations += 1;
        let z = prob.posterior(&theta, &gamma);
        let new_theta = prob.m_step(Family::Binomial, &z, None, theta.clone(), cfg.m_step_max_iter)?;
        let w = z.map(|v| 1.0 - v);
        let new_gamma = prob.m_step(Family::Poisson, prob.y, Some(&w), gamma.clone(), cfg.m_step_max_iter)?;
        let new_ll = prob.loglik(&new_theta, &new_gamma);
        let improvement = (new_ll - ll) / ll.abs().max(f64::MIN_POSITIVE);
        if new_ll.is_finite() && new_ll >= ll {
            theta = new_theta;
            gamma = new_gamma;
            ll = new_ll;
            trace.em_loglik.push(ll);
        }
        if !(improvement >= cfg.em_tol) {
            em_converged = true;
            break;
        }
    }

    let mut polish_iterations = 0;
    while polish_iterations < cfg.polish_max_iter {
        let (grad, hess) = prob.derivatives(&theta, &gamma);
        let Some(direction) = newton_direction(&grad, &hess) else {
            break;
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand_t = &theta + direction.rows(0, p) * step;
            let cand_g = &gamma + direction.rows(p, p) * step;
            let cand_ll = prob.loglik(&cand_t, &cand_g);
            if cand_ll.is_finite() && cand_ll >= ll {
                accepted = Some((cand_t, cand_g, cand_ll));
                break;
            }
            step *= 0.5;
        }
        let Some((t, g, new_ll)) = accepted else {
            break;
        };
        polish_iterations += 1;
        let change = (new_ll - ll) / ll.abs().max(f64::MIN_POSITIVE);
        theta = t;
        gamma = g;
        ll = new_ll;
        trace.polish_loglik.push(ll);
        if change < 1e-15 {
            break;
        }
    }

    let (gradient, hessian) = prob.derivatives(&theta, &gamma);
    let scale = prob.y.len() as f64 * (1.0 + prob.y.amax());
    if !em_converged && gradient.amax() > 1e-6 * scale {
        return Err(Error::Convergence {
            model: "ZIP".into(),
            iterations: em_iterations,
            reason: format!(
                "EM stopped at its iteration cap; log-likelihood trace ends {:?}",
                &trace.em_loglik[trace.em_loglik.len().saturating_sub(3)..]
            ),
            last: theta.iter().chain(gamma.iter()).copied().collect(),
        });
    }

    let block_cov = block_covariances(prob, &theta, &gamma)?;
    Ok(RawZip {
        theta,
        gamma,
        loglik: ll,
        em_iterations,
        polish_iterations,
        trace,
        block_cov,
        hessian,
        gradient,
    })
}

/// Newton ascent direction `(−H)⁻¹g`, regularizing `−H` when it is not
/// positive definite.
fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Option<DVector<f64>> {
    let neg = -hess;
    let neg = (&neg + neg.transpose()) * 0.5;
    let diag_max = neg.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..30 {
        let mut m = neg.clone();
        for k in 0..m.nrows() {
            m[(k, k)] += ridge;
        }
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(grad);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        ridge = if ridge == 0.0 { 1e-10 * diag_max } else { ridge * 10.0 };
    }
    None
}

fn block_covariances(
    prob: &ZipProblem<'_>,
    theta: &DVector<f64>,
    gamma: &DVector<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (e1, e2) = prob.etas(theta, gamma);
    let z = prob.posterior(theta, gamma);
    let fisher = |w: &dyn Fn(usize) -> f64| {
        let mut xw = prob.x.clone();
        for k in 0..prob.y.len() {
            xw.row_mut(k).scale_mut(w(k));
        }
        prob.x.transpose() * xw
    };
    let info_t = fisher(&|k| {
        let psi = logistic(e1[k]);
        psi * (1.0 - psi)
    });
    let info_g = fisher(&|k| (1.0 - z[k]) * e2[k].exp());
    let inv = |m: DMatrix<f64>| {
        spd_inverse(&m).ok_or_else(|| Error::SingularDesign {
            columns: prob.names.to_vec(),
        })
    };
    Ok((inv(info_t)?, inv(info_g)?))
}

fn check_zip_response(y: &DVector<f64>) -> Result<()> {
    if let Some(k) = y.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::validation(
            None,
            format!("ZIP response must be finite and non-negative; row {k} has {}", y[k]),
        ));
    }
    let zeros = y.iter().filter(|v| **v == 0.0).count();
    if zeros == 0 {
        return Err(Error::Precondition(
            "ZIP needs zero flows, but every response is positive".into(),
        ));
    }
    if zeros == y.len() {
        return Err(Error::Precondition(
            "ZIP needs positive flows, but every response is zero".into(),
        ));
    }
    Ok(())
}

/// Fits the zero-inflated Poisson with the same regressors in both stages.
pub fn fit_zip(dm: &DesignMatrix, cfg: &ZipConfig) -> Result<ZipFitResult> {
    check_zip_response(&dm.y)?;
    if dm.n_rows() < 2 * dm.n_cols() + 1 {
        return Err(Error::Precondition(format!(
            "{} rows are too few for {} ZIP coefficients",
            dm.n_rows(),
            2 * dm.n_cols()
        )));
    }
    let prob = ZipProblem {
        x: &dm.x,
        y: &dm.y,
        names: &dm.columns,
    };
    let raw = run_zip(&prob, log1p_ols_start(dm)?, cfg)?;

    let ones = DMatrix::from_element(dm.n_rows(), 1, 1.0);
    let const_name = [CONSTANT.to_string()];
    let null_prob = ZipProblem {
        x: &ones,
        y: &dm.y,
        names: &const_name,
    };
    let start = DVector::from_element(1, dm.y.mean().ln_1p());
    let loglik_null = run_zip(&null_prob, start, cfg)?.loglik;

    let p = dm.n_cols();
    let (vcov, vcov_method) = match spd_inverse(&-&raw.hessian) {
        Some(v) if v.iter().all(|x| x.is_finite()) => (v, "observed_information"),
        _ => {
            let mut v = DMatrix::zeros(2 * p, 2 * p);
            v.view_mut((0, 0), (p, p)).copy_from(&raw.block_cov.0);
            v.view_mut((p, p), (p, p)).copy_from(&raw.block_cov.1);
            (v, "em_blocks")
        }
    };
    let vcov_t = vcov.view((0, 0), (p, p)).into_owned();
    let vcov_g = vcov.view((p, p), (p, p)).into_owned();
    let pseudo_r2 = 1.0 - raw.loglik / loglik_null;
    let iterations = raw.em_iterations + raw.polish_iterations;
    let diagnostics = |gradient_norm: f64, joint_test| Diagnostics {
        n_obs: dm.n_rows(),
        loglik: raw.loglik,
        loglik_null: Some(loglik_null),
        r2: pseudo_r2,
        joint_test,
        converged: true,
        iterations,
        gradient_norm,
    };
    let logit_part = FitResult::assemble(
        ModelTag::Logit,
        &dm.columns,
        &raw.theta,
        &vcov_t,
        None,
        diagnostics(
            raw.gradient.rows(0, p).amax(),
            wald_test(&dm.columns, &raw.theta, &vcov_t),
        ),
    );
    let poisson_part = FitResult::assemble(
        ModelTag::Zip,
        &dm.columns,
        &raw.gamma,
        &vcov_g,
        None,
        diagnostics(
            raw.gradient.rows(p, p).amax(),
            wald_test(&dm.columns, &raw.gamma, &vcov_g),
        ),
    );
    Ok(ZipFitResult {
        logit_part,
        poisson_part,
        loglik: raw.loglik,
        loglik_null,
        pseudo_r2,
        n_obs: dm.n_rows(),
        em_iterations: raw.em_iterations,
        polish_iterations: raw.polish_iterations,
        vcov_method: vcov_method.into(),
        trace: raw.trace,
        vuong: None,
    })
}

/// Vuong statistic of ZIP against plain Poisson on the same rows.
pub fn vuong_test(zip: &ZipFitResult, ppml: &FitResult, dm: &DesignMatrix) -> Result<VuongResult> {
    let ll_zip = zip.row_loglik(dm)?;
    let eta = ppml.linear_predictor(dm)?;
    let n = dm.n_rows();
    if n < 2 {
        return Err(Error::InsufficientData("Vuong test needs at least 2 rows".into()));
    }
    let m: Vec<f64> = (0..n)
        .map(|k| ll_zip[k] - super::poisson_row_loglik(dm.y[k], eta[k]))
        .collect();
    let mean = m.iter().sum::<f64>() / n as f64;
    let var = m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 1e-12 * mean.abs().max(1e-300)) || !sd.is_finite() {
        return Err(Error::Undefined(
            "Vuong statistic: per-row log-likelihood differences have zero spread".into(),
        ));
    }
    let statistic = (n as f64).sqrt() * mean / sd;
    let normal = Normal::standard();
    let p_value = 2.0 * normal.sf(statistic.abs());
    Ok(VuongResult { statistic, p_value, n })
}
