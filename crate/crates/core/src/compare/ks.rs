use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d_statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

fn sorted(sample: &[f64], label: &str) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::InsufficientData(format!("K-S test: {label} sample is empty")));
    }
    if let Some(v) = sample.iter().find(|v| v.is_nan()) {
        return Err(Error::validation(None, format!("K-S test: {label} sample contains {v}")));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Supremum of `|F1 − F2|` as the integer `max |i·n2 − j·n1|`, evaluated
/// after every distinct pooled value.
fn sup_numerator(x: &[f64], y: &[f64]) -> usize {
    let (n1, n2) = (x.len(), y.len());
    let (mut i, mut j, mut best) = (0, 0, 0);
    while i < n1 || j < n2 {
        let t = match (x.get(i), y.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < n1 && x[i] <= t {
            i += 1;
        }
        while j < n2 && y[j] <= t {
            j += 1;
        }
        best = best.max((i * n2).abs_diff(j * n1));
    }
    best
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value at the
/// effective size `n1·n2/(n1+n2)`.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<KsResult> {
    let xs = sorted(x, "first")?;
    let ys = sorted(y, "second")?;
    let (n1, n2) = (xs.len(), ys.len());
    let d = sup_numerator(&xs, &ys) as f64 / (n1 * n2) as f64;
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    Ok(KsResult {
        d_statistic: d,
        p_value: kolmogorov_survival(ne.sqrt() * d),
        n1,
        n2,
    })
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi form, fast for small λ.
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for k in 1..=50 {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * c).exp();
            cdf += term;
            if term < 1e-18 {
                break;
            }
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / lambda;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut q = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        q += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * q).clamp(0.0, 1.0)
}
