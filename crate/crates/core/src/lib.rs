//! Gravity-model estimation for dyadic trade panels and statistical
//! comparison of the predicted trade networks with the observed ones.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod error;
pub mod glm;
pub mod netstats;
pub mod panel;
pub mod prediction;
pub mod synth;

pub use error::{Error, Result};
pub use glm::{
    fit_logit, fit_ols, fit_poisson_pml, fit_zip, vuong_test, FitResult, ModelTag, ZipConfig,
    ZipFitResult,
};
pub use panel::{CrossSection, DesignMatrix, DyadPanel};
