mod compare;
mod fit;
mod netstats;
mod predict;
mod report;
mod synth;

use std::collections::BTreeMap;
use std::path::Path;

use gravnet::netstats::{density_from_counts, TradeNetwork, WeightTransform};
use gravnet::prediction::{
    density_induced_binary, link_probabilities, predict_ols, predict_ppml, predict_zip, BinaryPrediction,
    LinkModel, LinkProbabilityMatrix, PredictedWeights,
};
use gravnet::{CrossSection, DesignMatrix, DyadPanel, FitResult, ModelTag, ZipFitResult};
use rayon::prelude::*;
use serde::Serialize;

use crate::artifacts::Manifest;
use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub use compare::compare;
pub use fit::fit;
pub use netstats::netstats;
pub use predict::predict;
pub use report::report;
pub use synth::synth;

pub(crate) struct Inputs {
    pub panel: DyadPanel,
    pub years: Vec<i32>,
}

pub(crate) fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    cfg.check_inputs()?;
    let panel = DyadPanel::load(&cfg.dyads, &cfg.countries).map_err(CliError::core("loading the panel"))?;
    let available = panel.years();
    let years = match &cfg.years {
        Some(requested) => {
            if let Some(y) = requested.iter().find(|y| !available.contains(y)) {
                return Err(CliError::Config(format!("year {y} is not in the panel")));
            }
            let mut years = requested.clone();
            years.sort_unstable();
            years
        }
        None => available,
    };
    if years.is_empty() {
        return Err(CliError::Config("the panel has no years".into()));
    }
    Ok(Inputs { panel, years })
}

/// Cross-section and design matrices of one year.
pub(crate) struct YearData {
    pub cs: CrossSection,
    /// Every ordered pair; absent when only OLS is run.
    pub full: Option<DesignMatrix>,
    /// Positive flows only; absent when OLS is not run.
    pub positive: Option<DesignMatrix>,
}

impl YearData {
    pub fn full(&self) -> &DesignMatrix {
        self.full.as_ref().expect("full design built for non-OLS models")
    }

    pub fn positive(&self) -> &DesignMatrix {
        self.positive.as_ref().expect("positive design built for OLS")
    }

    pub fn observed_density(&self) -> f64 {
        density_from_counts(self.cs.n_links(), self.cs.n())
    }
}

pub(crate) fn year_data(cfg: &RunConfig, inputs: &Inputs) -> Result<BTreeMap<i32, YearData>> {
    let need_positive = cfg.models.contains(&ModelTag::Ols);
    let need_full = cfg.models.iter().any(|&m| m != ModelTag::Ols);
    let built: Vec<Result<(i32, YearData)>> = inputs
        .years
        .par_iter()
        .map(|&year| {
            let ctx = || format!("year {year}");
            let cs = inputs.panel.cross_section(year).map_err(CliError::core(ctx()))?;
            let full = if need_full {
                Some(DesignMatrix::build(&cs, &inputs.panel, &cfg.covariates, false).map_err(CliError::core(ctx()))?)
            } else {
                None
            };
            let positive = match (&full, need_positive) {
                (Some(f), true) => Some(f.positive_only()),
                (None, true) => {
                    Some(DesignMatrix::build(&cs, &inputs.panel, &cfg.covariates, true).map_err(CliError::core(ctx()))?)
                }
                (_, false) => None,
            };
            Ok((year, YearData { cs, full, positive }))
        })
        .collect();
    built.into_iter().collect()
}

/// `(year, model)` pairs, year-major.
pub(crate) fn cells(cfg: &RunConfig, years: &[i32]) -> Vec<(i32, ModelTag)> {
    years
        .iter()
        .flat_map(|&y| cfg.models.iter().map(move |&m| (y, m)))
        .collect()
}

pub(crate) fn cell_dir(year: i32, model: ModelTag) -> String {
    format!("{year}/{model}")
}

/// Runs `f` on every cell in parallel. Results keep the cell order, and
/// the first failing cell in that order is reported.
pub(crate) fn par_cells<T: Send>(
    cells: &[(i32, ModelTag)],
    f: impl Fn(i32, ModelTag) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = cells.par_iter().map(|&(y, m)| f(y, m)).collect();
    results.into_iter().collect()
}

pub(crate) enum Fit {
    Glm(FitResult),
    Zip(Box<ZipFitResult>),
}

impl Serialize for Fit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Fit::Glm(f) => f.serialize(s),
            Fit::Zip(z) => z.serialize(s),
        }
    }
}

pub(crate) fn load_fit(manifest: &Manifest, out: &Path, year: i32, model: ModelTag) -> Result<Fit> {
    let rel = format!("{}/fit.json", cell_dir(year, model));
    let bytes = manifest.require(out, &rel, "fit")?;
    let parsed = match model {
        ModelTag::Zip => serde_json::from_slice(&bytes).map(|z| Fit::Zip(Box::new(z))),
        _ => serde_json::from_slice(&bytes).map(Fit::Glm),
    };
    parsed.map_err(|e| CliError::Core {
        context: rel,
        source: e.into(),
    })
}

pub(crate) enum Prediction {
    /// OLS, PPML and ZIP; ZIP also carries `ξ = 1 − ψ̂`.
    Weighted {
        weights: PredictedWeights,
        links: Option<LinkProbabilityMatrix>,
    },
    Binary {
        links: LinkProbabilityMatrix,
        binary: BinaryPrediction,
    },
}

impl Prediction {
    pub fn links(&self) -> Option<&LinkProbabilityMatrix> {
        match self {
            Prediction::Weighted { links, .. } => links.as_ref(),
            Prediction::Binary { links, .. } => Some(links),
        }
    }

    /// Point-prediction network; LOGIT gives the density-induced binary one.
    pub fn network(&self, transform: WeightTransform) -> gravnet::Result<TradeNetwork> {
        match self {
            Prediction::Weighted { weights, .. } => weights.network(transform),
            Prediction::Binary { binary, .. } => TradeNetwork::binary(binary.adjacency.clone()),
        }
    }
}

pub(crate) fn predict_cell(yd: &YearData, model: ModelTag, fit: &Fit) -> gravnet::Result<Prediction> {
    Ok(match (model, fit) {
        (ModelTag::Ols, Fit::Glm(f)) => Prediction::Weighted {
            weights: predict_ols(f, yd.positive())?,
            links: None,
        },
        (ModelTag::Ppml, Fit::Glm(f)) => Prediction::Weighted {
            weights: predict_ppml(f, yd.full())?,
            links: None,
        },
        (ModelTag::Zip, Fit::Zip(z)) => Prediction::Weighted {
            weights: predict_zip(z, yd.full())?,
            links: Some(link_probabilities(LinkModel::Zip(z), yd.full())?),
        },
        (ModelTag::Logit, Fit::Glm(f)) => {
            let links = link_probabilities(LinkModel::Logit(f), yd.full())?;
            let binary = density_induced_binary(&links, yd.observed_density())?;
            Prediction::Binary { links, binary }
        }
        _ => return Err(gravnet::Error::Schema(format!("fit artifact does not hold a {model} fit"))),
    })
}

/// Fits and predictions for every cell, after checking that `predict` has
/// run for each of them.
pub(crate) fn load_predictions(
    cfg: &RunConfig,
    manifest: &Manifest,
    years: &BTreeMap<i32, YearData>,
    cells: &[(i32, ModelTag)],
) -> Result<Vec<Prediction>> {
    for &(y, m) in cells {
        manifest.require(&cfg.out, &format!("{}/prediction.json", cell_dir(y, m)), "predict")?;
    }
    let fits = cells
        .iter()
        .map(|&(y, m)| load_fit(manifest, &cfg.out, y, m))
        .collect::<Result<Vec<_>>>()?;
    let indexed: Vec<(usize, (i32, ModelTag))> = cells.iter().copied().enumerate().collect();
    let results: Vec<Result<Prediction>> = indexed
        .par_iter()
        .map(|&(k, (y, m))| predict_cell(&years[&y], m, &fits[k]).map_err(CliError::core(format!("predict {y}/{m}"))))
        .collect();
    results.into_iter().collect()
}

/// Observed network as the given model sees it: binary for LOGIT.
pub(crate) fn observed_network(yd: &YearData, model: ModelTag, transform: WeightTransform) -> gravnet::Result<TradeNetwork> {
    match model {
        ModelTag::Logit => TradeNetwork::binary(yd.cs.adjacency.clone()),
        _ => TradeNetwork::from_cross_section(&yd.cs, transform),
    }
}
