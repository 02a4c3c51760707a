//! Iteratively reweighted least squares for the Poisson (log link) and
//! binomial (logit link) families, with step-halving so that every accepted
//! iterate increases the (weighted) log-likelihood.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use super::linalg::{wls, WlsSolution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Family {
    Poisson,
    Binomial,
}

impl Family {
    fn label(self) -> &'static str {
        match self {
            Family::Poisson => "Poisson",
            Family::Binomial => "logit",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IrlsConfig {
    pub max_iter: usize,
    /// Relative log-likelihood change that ends the iteration.
    pub tol: f64,
    /// Abort with a separation error on diverging binomial coefficients.
    pub separation_guard: bool,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-10,
            separation_guard: true,
        }
    }
}

/// Coefficient-norm ceiling of the separation guard.
pub(crate) const SEPARATION_NORM: f64 = 1e3;

pub(crate) struct IrlsFit {
    pub beta: DVector<f64>,
    pub loglik: f64,
    pub iterations: usize,
    /// `(XᵀWX)⁻¹` at the final iterate.
    pub unscaled_cov: DMatrix<f64>,
    /// `‖Xᵀ diag(prior) (y − μ)‖∞` at the final iterate.
    pub gradient_norm: f64,
}

#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// The logistic function `Λ(x) = 1 / (1 + e^{−x})`.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln Γ(y+1)`, exactly 0 at `y ∈ {0, 1}`.
pub(crate) fn ln_factorial(y: f64) -> f64 {
    if y == 0.0 || y == 1.0 {
        0.0
    } else {
        ln_gamma(y + 1.0)
    }
}

pub(crate) fn poisson_row_loglik(y: f64, eta: f64) -> f64 {
    y * eta - eta.exp() - ln_factorial(y)
}

pub(crate) fn binomial_row_loglik(y: f64, eta: f64) -> f64 {
    y * eta - softplus(eta)
}

struct Problem<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    prior: Option<&'a DVector<f64>>,
    family: Family,
}

impl Problem<'_> {
    fn prior(&self, k: usize) -> f64 {
        self.prior.map_or(1.0, |p| p[k])
    }

    fn loglik(&self, eta: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for (k, (&yk, &ek)) in self.y.iter().zip(eta.iter()).enumerate() {
            let term = match self.family {
                Family::Poisson => yk * ek - ek.exp(),
                Family::Binomial => binomial_row_loglik(yk, ek),
            };
            acc += self.prior(k) * term;
        }
        if acc.is_nan() {
            f64::NEG_INFINITY
        } else {
            acc
        }
    }

    fn mean(&self, eta: &DVector<f64>) -> DVector<f64> {
        match self.family {
            Family::Poisson => eta.map(f64::exp),
            Family::Binomial => eta.map(logistic),
        }
    }

    /// Working weights (square-rooted) and working response at `eta`.
    fn working(&self, eta: &DVector<f64>, mu: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = eta.len();
        let mut sw = DVector::zeros(n);
        let mut z = DVector::zeros(n);
        for k in 0..n {
            let var = match self.family {
                Family::Poisson => mu[k],
                Family::Binomial => mu[k] * (1.0 - mu[k]),
            }
            .max(1e-300);
            sw[k] = (self.prior(k) * var).sqrt();
            z[k] = eta[k] + (self.y[k] - mu[k]) / var;
        }
        (sw, z)
    }

    fn gradient_norm(&self, mu: &DVector<f64>) -> f64 {
        let resid = DVector::from_fn(self.y.len(), |k, _| self.prior(k) * (self.y[k] - mu[k]));
        (self.x.transpose() * resid).amax()
    }
}

pub(crate) fn irls(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    prior: Option<&DVector<f64>>,
    family: Family,
    start: DVector<f64>,
    cfg: &IrlsConfig,
    names: &[String],
) -> Result<IrlsFit> {
    // Σ prior·ln Γ(y+1) is left out of the iteration so that it cannot
    // mask a diverging kernel in the relative-change test.
    let constant = match family {
        Family::Poisson => y
            .iter()
            .enumerate()
            .map(|(k, &v)| prior.map_or(1.0, |p| p[k]) * ln_factorial(v))
            .sum(),
        Family::Binomial => 0.0,
    };
    let prob = Problem {
        x,
        y,
        prior,
        family,
    };

    let mut beta = start;
    let mut eta = x * &beta;
    let mut ll = prob.loglik(&eta);
    if !ll.is_finite() {
        beta = DVector::zeros(x.ncols());
        eta = x * &beta;
        ll = prob.loglik(&eta);
    }

    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let mu = prob.mean(&eta);
        if family == Family::Binomial && cfg.separation_guard {
            let worst = y.iter().zip(mu.iter()).map(|(a, p)| (a - p).abs()).fold(0.0, f64::max);
            if worst < 1e-8 {
                return Err(Error::Separation {
                    model: family.label().into(),
                    reason: "every observation is fitted perfectly".into(),
                });
            }
        }
        let (sw, z) = prob.working(&eta, &mu);
        let target = wls(x, Some(&sw), &z, names)?.beta;
        let direction = &target - &beta;

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &beta + &direction * step;
            let cand_eta = x * &cand;
            let cand_ll = prob.loglik(&cand_eta);
            if cand_ll.is_finite() && cand_ll >= ll {
                accepted = Some((cand, cand_eta, cand_ll));
                break;
            }
            step *= 0.5;
        }
        let Some((new_beta, new_eta, new_ll)) = accepted else {
            // No ascent step exists at working precision: numerical optimum.
            converged = true;
            break;
        };
        let change = (new_ll - ll).abs() / ll.abs().max(f64::MIN_POSITIVE);
        beta = new_beta;
        eta = new_eta;
        ll = new_ll;

        if family == Family::Binomial && cfg.separation_guard && beta.norm() > SEPARATION_NORM {
            return Err(Error::Separation {
                model: family.label().into(),
                reason: format!("coefficient norm {:.3e} exceeds {SEPARATION_NORM:e}", beta.norm()),
            });
        }
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence {
            model: family.label().into(),
            iterations,
            reason: "relative log-likelihood change stayed above tolerance".into(),
            last: beta.iter().copied().collect(),
        });
    }

    let mu = prob.mean(&eta);
    let (sw, _) = prob.working(&eta, &mu);
    let WlsSolution { r_inv, .. } = wls(x, Some(&sw), &DVector::zeros(y.len()), names)?;
    Ok(IrlsFit {
        gradient_norm: prob.gradient_norm(&mu),
        unscaled_cov: &r_inv * r_inv.transpose(),
        beta,
        loglik: ll - constant,
        iterations,
    })
}
