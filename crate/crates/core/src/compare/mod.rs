//! Observed-versus-predicted comparison: K-S tests, ensemble summaries,
//! closed-form variances of average strength and the comparison report.

mod ks;
mod report;
mod summary;

pub use ks::{kolmogorov_survival, ks_two_sample, KsResult};
pub use report::{
    build_comparison_report, default_correlation_pairs, report_schema, CellInput, CellReport, ComparisonRow, KsRow,
    Report, ReportOptions, REPORT_VERSION,
};
pub use summary::{
    ensemble_summaries, ensemble_summary, percentile, replicate_values, summarize, EnsembleStatistic,
    EnsembleSummary,
};

use crate::error::{Error, Result};
use crate::glm::ModelTag;
use crate::netstats::{density_from_counts, Direction};
use crate::prediction::{zip_variance, PredictedWeights};

/// Variance of the predicted population-average strength, treating dyads
/// as independent.
///
/// OLS: `ρσ̂²(N−1)/N` on log weights, with `ρ` the density of the mask.
/// PPML: `avg NS / N`. ZIP: `Σ μ̂(1−ψ̂)(1+μ̂ψ̂) / N²`. In- and out-strength
/// share the same value; total strength counts every weight twice, so its
/// variance is four times larger.
pub fn analytical_var_avg_ns(pred: &PredictedWeights, direction: Direction) -> Result<f64> {
    let n = pred.n();
    if n == 0 {
        return Err(Error::InsufficientData("prediction has no countries".into()));
    }
    let nf = n as f64;
    let entries = pred.masked_entries();
    let one_way = match pred.model {
        ModelTag::Ols => {
            let sigma2 = pred
                .sigma2
                .ok_or_else(|| Error::Schema("OLS prediction without sigma2".into()))?;
            let rho = density_from_counts(entries.len(), n);
            rho * sigma2 * (nf - 1.0) / nf
        }
        ModelTag::Ppml => {
            let avg_ns = summary::compensated_sum(entries.iter().map(|e| e.2)) / nf;
            avg_ns / nf
        }
        ModelTag::Zip => {
            let parts = pred
                .zip_parts
                .as_ref()
                .ok_or_else(|| Error::Schema("ZIP prediction without psi/mu".into()))?;
            let total = summary::compensated_sum(
                entries.iter().map(|&(i, j, _, _)| zip_variance(parts.psi[(i, j)], parts.mu[(i, j)])),
            );
            total / (nf * nf)
        }
        ModelTag::Logit => {
            return Err(Error::Unsupported("no closed-form strength variance for LOGIT".into()));
        }
    };
    Ok(match direction {
        Direction::In | Direction::Out => one_way,
        Direction::Tot => 4.0 * one_way,
    })
}
