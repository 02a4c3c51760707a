use gravnet::prediction::{
    density_matched_binary, threshold_by_manhattan, write_dense_csv, write_long_csv, zero_flow_probability,
    BinaryPrediction, LinkProbabilityMatrix,
};
use gravnet::{ModelTag, ZipFitResult};
use serde::Serialize;

use super::{cell_dir, cells, load_fit, load_inputs, predict_cell, year_data, Fit, Prediction, YearData};
use crate::artifacts::{Logger, Manifest, Outputs};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

#[derive(Serialize)]
struct ThresholdSummary {
    threshold: f64,
    links: usize,
    density: f64,
}

impl ThresholdSummary {
    fn new(b: &BinaryPrediction) -> Self {
        Self {
            threshold: b.threshold,
            links: b.adjacency.iter().filter(|&&a| a > 0.0).count(),
            density: b.realized_density,
        }
    }
}

#[derive(Serialize)]
struct ManhattanSummary {
    threshold: f64,
    distance: usize,
}

#[derive(Serialize)]
struct LinkSummary {
    mean_probability: f64,
    density_induced: ThresholdSummary,
    density_matched: ThresholdSummary,
    manhattan: ManhattanSummary,
}

#[derive(Serialize)]
struct WeightSummary {
    /// `log` for OLS predictions, `level` otherwise.
    scale: &'static str,
    n_predicted: usize,
    mean: f64,
}

#[derive(Serialize)]
struct PredictionSummary {
    year: i32,
    model: ModelTag,
    n_countries: usize,
    observed_links: usize,
    observed_density: f64,
    weights: Option<WeightSummary>,
    links: Option<LinkSummary>,
}

fn link_summary(yd: &YearData, links: &LinkProbabilityMatrix, induced: &BinaryPrediction) -> gravnet::Result<LinkSummary> {
    let matched = density_matched_binary(links, yd.observed_density())?;
    let manhattan = threshold_by_manhattan(links, &yd.cs.adjacency)?;
    Ok(LinkSummary {
        mean_probability: links.mean(),
        density_induced: ThresholdSummary::new(induced),
        density_matched: ThresholdSummary::new(&matched),
        manhattan: ManhattanSummary {
            threshold: manhattan.threshold,
            distance: manhattan.distance,
        },
    })
}

fn render_cell(
    cfg: &RunConfig,
    yd: &YearData,
    model: ModelTag,
    fit: &Fit,
    pred: &Prediction,
    out: &mut Outputs,
) -> Result<()> {
    let dir = cell_dir(yd.cs.year, model);
    let ctx = format!("predict {dir}");
    let core = |e| CliError::core(ctx.clone())(e);
    let countries = yd.cs.country_ids();

    let mut weights_summary = None;
    if let Prediction::Weighted { weights, .. } = pred {
        out.render(format!("{dir}/predicted.csv"), &ctx, |w| write_dense_csv(&weights.countries, &weights.value, w))?;
        out.render(format!("{dir}/predicted_long.csv"), &ctx, |w| write_long_csv(weights, w))?;
        let entries = weights.masked_entries();
        weights_summary = Some(WeightSummary {
            scale: if model == ModelTag::Ols { "log" } else { "level" },
            n_predicted: entries.len(),
            mean: entries.iter().map(|e| e.2).sum::<f64>() / entries.len().max(1) as f64,
        });
    }

    let mut links_summary = None;
    if let Some(links) = pred.links() {
        let induced = match pred {
            Prediction::Binary { binary, .. } => binary.clone(),
            Prediction::Weighted { .. } => {
                gravnet::prediction::density_induced_binary(links, yd.observed_density()).map_err(core)?
            }
        };
        out.render(format!("{dir}/link_probabilities.csv"), &ctx, |w| write_dense_csv(&links.countries, &links.xi, w))?;
        out.render(format!("{dir}/binary.csv"), &ctx, |w| write_dense_csv(&countries, &induced.adjacency, w))?;
        links_summary = Some(link_summary(yd, links, &induced).map_err(core)?);
    }

    if let Fit::Zip(zip) = fit {
        let zeros = zero_probability(cfg, yd, zip).map_err(core)?;
        out.render(format!("{dir}/zero_probability.csv"), &ctx, |w| write_dense_csv(&countries, &zeros, w))?;
    }

    let summary = PredictionSummary {
        year: yd.cs.year,
        model,
        n_countries: yd.cs.n(),
        observed_links: yd.cs.n_links(),
        observed_density: yd.observed_density(),
        weights: weights_summary,
        links: links_summary,
    };
    out.json(format!("{dir}/prediction.json"), &summary)
}

fn zero_probability(cfg: &RunConfig, yd: &YearData, zip: &ZipFitResult) -> gravnet::Result<nalgebra::DMatrix<f64>> {
    zero_flow_probability(zip, yd.full(), cfg.zero_probability)
}

/// Predicted matrices, link probabilities and binary predictions for every
/// (year, model).
pub fn predict(cfg: &RunConfig) -> Result<Vec<String>> {
    let log = Logger::new(&cfg.out, "predict", cfg.quiet);
    let manifest = Manifest::load(&cfg.out)?;
    let inputs = load_inputs(cfg)?;
    let cells = cells(cfg, &inputs.years);
    let fits = cells
        .iter()
        .map(|&(y, m)| load_fit(&manifest, &cfg.out, y, m))
        .collect::<Result<Vec<_>>>()?;
    let years = year_data(cfg, &inputs)?;
    log.stage("load", format!("{} fits", fits.len()));

    let preds = super::par_cells(&cells, |y, m| {
        let k = cells.iter().position(|c| *c == (y, m)).expect("cell listed");
        predict_cell(&years[&y], m, &fits[k]).map_err(CliError::core(format!("predict {y}/{m}")))
    })?;

    let mut out = Outputs::new("predict");
    for ((&(y, m), fit), pred) in cells.iter().zip(&fits).zip(&preds) {
        render_cell(cfg, &years[&y], m, fit, pred, &mut out)?;
        log.stage(&format!("{y}/{m}"), "predicted");
    }
    let written = out.commit(&cfg.out, cfg.settings(&inputs.years))?;
    log.stage("write", format!("{} files", written.len()));
    Ok(written)
}
