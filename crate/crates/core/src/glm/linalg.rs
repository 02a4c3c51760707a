//! Weighted least squares through a Householder QR of `diag(√w)·X`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Column is declared collinear when its QR diagonal falls below this
/// fraction of its own (weighted) norm.
const RANK_TOL: f64 = 1e-10;

pub(crate) struct WlsSolution {
    pub beta: DVector<f64>,
    /// `R⁻¹` where `XᵀWX = RᵀR`; `(XᵀWX)⁻¹ = R⁻¹R⁻ᵀ`.
    pub r_inv: DMatrix<f64>,
}

impl WlsSolution {
    pub fn unscaled_cov(&self) -> DMatrix<f64> {
        &self.r_inv * self.r_inv.transpose()
    }
}

/// Solves `min Σ w_k (z_k − x_k·β)²`. `sqrt_w = None` means unit weights.
pub(crate) fn wls(
    x: &DMatrix<f64>,
    sqrt_w: Option<&DVector<f64>>,
    z: &DVector<f64>,
    names: &[String],
) -> Result<WlsSolution> {
    let (n, p) = x.shape();
    if n < p {
        return Err(Error::Precondition(format!(
            "{n} rows cannot identify {p} coefficients"
        )));
    }
    let mut xw = x.clone();
    let mut zw = z.clone();
    if let Some(s) = sqrt_w {
        for (k, &sk) in s.iter().enumerate() {
            xw.row_mut(k).scale_mut(sk);
            zw[k] *= sk;
        }
    }
    let col_norms: Vec<f64> = (0..p).map(|c| xw.column(c).norm()).collect();

    let qr = xw.qr();
    let r = qr.r();
    let collinear: Vec<String> = (0..p)
        .filter(|&c| !(r[(c, c)].abs() > RANK_TOL * col_norms[c]) || col_norms[c] == 0.0)
        .map(|c| names.get(c).cloned().unwrap_or_else(|| format!("#{c}")))
        .collect();
    if !collinear.is_empty() {
        return Err(Error::SingularDesign { columns: collinear });
    }
    qr.q_tr_mul(&mut zw);
    let rhs = zw.rows(0, p).into_owned();
    let beta = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::SingularDesign { columns: names.to_vec() })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::SingularDesign { columns: names.to_vec() })?;
    Ok(WlsSolution { beta, r_inv })
}

/// Inverse of a symmetric positive-definite matrix, or `None` if the
/// Cholesky factorisation fails.
pub(crate) fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    sym.cholesky().map(|c| c.inverse())
}
