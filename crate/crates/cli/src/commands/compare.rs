use gravnet::compare::{build_comparison_report, report_schema, CellInput, ReportOptions};
use gravnet::netstats::{TradeNetwork, WeightTransform};
use gravnet::prediction::{derive_seed, sample_bernoulli_ensemble, sample_weighted_ensemble, NetworkEnsemble};
use gravnet::ModelTag;

use super::{cell_dir, cells, load_inputs, load_predictions, observed_network, year_data, Prediction};
use crate::artifacts::{Logger, Manifest, Outputs};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

struct Cell<'a> {
    year: i32,
    model: ModelTag,
    transform: WeightTransform,
    ids: Vec<String>,
    observed: TradeNetwork,
    predicted: TradeNetwork,
    ensemble: NetworkEnsemble,
    prediction: &'a Prediction,
}

fn ensemble(cfg: &RunConfig, year: i32, model: ModelTag, pred: &Prediction) -> gravnet::Result<NetworkEnsemble> {
    let seed = derive_seed(cfg.seed, year, model);
    match pred {
        Prediction::Weighted { weights, .. } => sample_weighted_ensemble(weights, cfg.replications, seed),
        Prediction::Binary { links, .. } => sample_bernoulli_ensemble(links, model, cfg.replications, seed),
    }
}

/// K-S tests, averages and correlations of every (year, model) against
/// the observed networks, with ensemble summaries.
pub fn compare(cfg: &RunConfig) -> Result<Vec<String>> {
    let log = Logger::new(&cfg.out, "compare", cfg.quiet);
    let manifest = Manifest::load(&cfg.out)?;
    let inputs = load_inputs(cfg)?;
    let cells = cells(cfg, &inputs.years);
    let years = year_data(cfg, &inputs)?;
    let preds = load_predictions(cfg, &manifest, &years, &cells)?;

    let mut prepared = Vec::with_capacity(cells.len());
    for (&(y, m), pred) in cells.iter().zip(&preds) {
        let core = CliError::core(format!("compare {y}/{m}"));
        let yd = &years[&y];
        let transform = cfg.transform(m);
        let built = observed_network(yd, m, transform).and_then(|observed| {
            Ok(Cell {
                year: y,
                model: m,
                transform,
                ids: yd.cs.country_ids(),
                observed,
                predicted: pred.network(transform)?,
                ensemble: ensemble(cfg, y, m, pred)?,
                prediction: pred,
            })
        });
        prepared.push(built.map_err(core)?);
    }
    let cell_inputs: Vec<CellInput<'_>> = prepared
        .iter()
        .map(|c| CellInput {
            year: c.year,
            model: c.model,
            transform: c.transform,
            observed_countries: &c.ids,
            observed: &c.observed,
            predicted_countries: &c.ids,
            predicted: &c.predicted,
            ensemble: Some(&c.ensemble),
            weights: match c.prediction {
                Prediction::Weighted { weights, .. } => Some(weights),
                Prediction::Binary { .. } => None,
            },
        })
        .collect();
    let options = ReportOptions {
        full_correlations: cfg.full_correlations,
        ..ReportOptions::default()
    };
    log.stage("ensembles", format!("{} cells, M = {}", cells.len(), cfg.replications));
    let report = build_comparison_report(&cell_inputs, &options).map_err(CliError::core("compare"))?;

    let mut out = Outputs::new("compare");
    for cell in &report.cells {
        let rejected = cell.ks_tests.iter().filter(|r| r.p_value < 0.05).count();
        log.stage(
            &format!("{}/{}", cell.year, cell.model),
            format!("K-S p < 0.05 for {rejected} of {} statistics", cell.ks_tests.len()),
        );
        out.json(format!("{}/comparison.json", cell_dir(cell.year, cell.model)), cell)?;
    }
    out.json("report.json", &report)?;
    out.json("report.schema.json", &report_schema())?;
    out.render("ks_tests.csv", "writing ks_tests.csv", |w| report.write_ks_csv(w))?;
    out.render("averages.csv", "writing averages.csv", |w| report.write_averages_csv(w))?;
    out.render("correlations.csv", "writing correlations.csv", |w| report.write_correlations_csv(w))?;
    let written = out.commit(&cfg.out, cfg.settings(&inputs.years))?;
    log.stage("write", format!("{} files", written.len()));
    Ok(written)
}
