use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{analytical_var_avg_ns, ks_two_sample, replicate_values, summarize, EnsembleStatistic, EnsembleSummary};
use crate::error::{Error, Result};
use crate::glm::ModelTag;
use crate::netstats::{Direction, Motif, NeighborVariant, NodeStatKind, NodeStats, TradeNetwork, WeightTransform};
use crate::prediction::{NetworkEnsemble, PredictedWeights};

pub const REPORT_VERSION: u32 = 1;

/// One (year, model) comparison.
#[derive(Debug, Clone, Copy)]
pub struct CellInput<'a> {
    pub year: i32,
    pub model: ModelTag,
    /// How weights enter the statistics; applied to both sides already for
    /// `observed` and `predicted`, and to the ensemble replications.
    pub transform: WeightTransform,
    pub observed_countries: &'a [String],
    pub observed: &'a TradeNetwork,
    pub predicted_countries: &'a [String],
    /// Point prediction.
    pub predicted: &'a TradeNetwork,
    pub ensemble: Option<&'a NetworkEnsemble>,
    /// Enables the closed-form variance of average strength.
    pub weights: Option<&'a PredictedWeights>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub ks_kinds: Vec<NodeStatKind>,
    pub average_kinds: Vec<NodeStatKind>,
    pub correlation_pairs: Vec<(NodeStatKind, NodeStatKind)>,
    /// Every pair of `average_kinds` instead of `correlation_pairs`.
    pub full_correlations: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            ks_kinds: NodeStatKind::all(),
            average_kinds: NodeStatKind::all(),
            correlation_pairs: default_correlation_pairs(),
            full_correlations: false,
        }
    }
}

/// Strength and degree against their neighbour and clustering
/// counterparts: the four undirected pairs plus the directed pairs that
/// follow the same trade direction on both sides.
pub fn default_correlation_pairs() -> Vec<(NodeStatKind, NodeStatKind)> {
    use NodeStatKind::*;
    vec![
        (Ns(Direction::Tot), Anns(NeighborVariant::Tot)),
        (Ns(Direction::Tot), Wcc(Motif::Tot)),
        (Nd(Direction::Tot), Annd(NeighborVariant::Tot)),
        (Nd(Direction::Tot), Bcc(Motif::Tot)),
        (Ns(Direction::In), Ns(Direction::Out)),
        (Ns(Direction::Out), Anns(NeighborVariant::OutIn)),
        (Ns(Direction::In), Anns(NeighborVariant::InOut)),
        (Ns(Direction::Out), Wcc(Motif::Out)),
        (Ns(Direction::In), Wcc(Motif::In)),
        (Nd(Direction::Out), Annd(NeighborVariant::OutIn)),
        (Nd(Direction::In), Annd(NeighborVariant::InOut)),
        (Nd(Direction::Out), Bcc(Motif::Out)),
        (Nd(Direction::In), Bcc(Motif::In)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub statistic: NodeStatKind,
    pub d: f64,
    pub p_value: f64,
    pub n_observed: usize,
    pub n_predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub statistic: EnsembleStatistic,
    pub observed: Option<f64>,
    pub predicted: Option<f64>,
    pub ensemble: Option<EnsembleSummary>,
    pub analytical_var: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub year: i32,
    pub model: ModelTag,
    pub transform: WeightTransform,
    pub n_countries: usize,
    pub replications: Option<usize>,
    pub ensemble_seed: Option<u64>,
    pub ks_tests: Vec<KsRow>,
    pub averages: Vec<ComparisonRow>,
    pub correlations: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub report_version: u32,
    pub cells: Vec<CellReport>,
}

fn check_alignment(observed: &[String], predicted: &[String]) -> Result<()> {
    let o: BTreeSet<&String> = observed.iter().collect();
    let p: BTreeSet<&String> = predicted.iter().collect();
    if o != p || observed.len() != predicted.len() {
        return Err(Error::Alignment {
            missing: o.difference(&p).map(|s| s.to_string()).collect(),
            unexpected: p.difference(&o).map(|s| s.to_string()).collect(),
        });
    }
    if observed != predicted {
        return Err(Error::Schema("observed and predicted networks list the countries in different orders".into()));
    }
    Ok(())
}

/// Closed forms exist for average strength on the scale each model's
/// variance refers to: log weights for OLS, levels otherwise.
fn natural_transform(model: ModelTag) -> WeightTransform {
    match model {
        ModelTag::Ols => WeightTransform::LogPositive,
        _ => WeightTransform::Identity,
    }
}

fn cell_kinds(model: ModelTag, kinds: &[NodeStatKind]) -> Vec<NodeStatKind> {
    kinds
        .iter()
        .copied()
        .filter(|k| model != ModelTag::Logit || !k.is_weighted())
        .collect()
}

fn build_cell(cell: &CellInput<'_>, options: &ReportOptions) -> Result<CellReport> {
    check_alignment(cell.observed_countries, cell.predicted_countries)?;
    if cell.observed.n != cell.observed_countries.len() || cell.predicted.n != cell.predicted_countries.len() {
        return Err(Error::Schema(format!("year {} {}: network size differs from its country list", cell.year, cell.model)));
    }
    let ks_kinds = cell_kinds(cell.model, &options.ks_kinds);
    let avg_kinds = cell_kinds(cell.model, &options.average_kinds);
    let pairs: Vec<(NodeStatKind, NodeStatKind)> = if options.full_correlations {
        let mut v = Vec::new();
        for (a, &x) in avg_kinds.iter().enumerate() {
            for &y in &avg_kinds[a + 1..] {
                v.push((x, y));
            }
        }
        v
    } else {
        options
            .correlation_pairs
            .iter()
            .copied()
            .filter(|(a, b)| cell.model != ModelTag::Logit || !(a.is_weighted() || b.is_weighted()))
            .collect()
    };

    let obs_stats = NodeStats::compute(cell.observed);
    let pred_stats = NodeStats::compute(cell.predicted);

    let mut ks_tests = Vec::new();
    for &kind in &ks_kinds {
        let x = obs_stats.get(kind).map(|v| v.defined()).unwrap_or_default();
        let y = pred_stats.get(kind).map(|v| v.defined()).unwrap_or_default();
        if x.is_empty() || y.is_empty() {
            continue;
        }
        let ks = ks_two_sample(&x, &y)?;
        ks_tests.push(KsRow {
            statistic: kind,
            d: ks.d_statistic,
            p_value: ks.p_value,
            n_observed: ks.n1,
            n_predicted: ks.n2,
        });
    }

    let mut avg_stats = vec![EnsembleStatistic::Density];
    avg_stats.extend(avg_kinds.iter().map(|&k| EnsembleStatistic::Average(k)));
    let corr_stats: Vec<EnsembleStatistic> = pairs.iter().map(|&(a, b)| EnsembleStatistic::Correlation(a, b)).collect();
    let all: Vec<EnsembleStatistic> = avg_stats.iter().chain(&corr_stats).copied().collect();

    let summaries: Vec<Option<EnsembleSummary>> = match cell.ensemble {
        Some(ens) if ens.replications >= 2 => {
            let values = replicate_values(ens, &all, cell.transform)?;
            all.iter()
                .zip(&values)
                .map(|(s, v)| match summarize(*s, v) {
                    Ok(sum) => Ok(Some(sum)),
                    Err(Error::Undefined(_)) => Ok(None),
                    Err(e) => Err(e),
                })
                .collect::<Result<_>>()?
        }
        _ => vec![None; all.len()],
    };

    let analytic = |s: &EnsembleStatistic| -> Option<f64> {
        let w = cell.weights?;
        if cell.transform != natural_transform(w.model) {
            return None;
        }
        match s {
            EnsembleStatistic::Average(NodeStatKind::Ns(d)) => analytical_var_avg_ns(w, *d).ok(),
            _ => None,
        }
    };

    let rows: Vec<ComparisonRow> = all
        .iter()
        .zip(summaries)
        .map(|(s, ensemble)| ComparisonRow {
            statistic: *s,
            observed: s.evaluate(cell.observed, &obs_stats),
            predicted: s.evaluate(cell.predicted, &pred_stats),
            ensemble,
            analytical_var: analytic(s),
        })
        .collect();
    let (averages, correlations) = rows.split_at(avg_stats.len());

    Ok(CellReport {
        year: cell.year,
        model: cell.model,
        transform: cell.transform,
        n_countries: cell.observed.n,
        replications: cell.ensemble.map(|e| e.replications),
        ensemble_seed: cell.ensemble.map(|e| e.seed),
        ks_tests,
        averages: averages.to_vec(),
        correlations: correlations.to_vec(),
    })
}

/// Assembles K-S tests, averages and correlations for every cell, in the
/// order given.
pub fn build_comparison_report(cells: &[CellInput<'_>], options: &ReportOptions) -> Result<Report> {
    let cells = cells.iter().map(|c| build_cell(c, options)).collect::<Result<_>>()?;
    Ok(Report {
        report_version: REPORT_VERSION,
        cells,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Report {
    /// Table-4 layout: one row per statistic, year and model.
    pub fn write_ks_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["statistic", "year", "model", "d", "p_value", "n_observed", "n_predicted"])?;
        for c in &self.cells {
            for k in &c.ks_tests {
                wtr.write_record([
                    k.statistic.to_string(),
                    c.year.to_string(),
                    c.model.to_string(),
                    k.d.to_string(),
                    k.p_value.to_string(),
                    k.n_observed.to_string(),
                    k.n_predicted.to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    fn write_rows<W: Write>(&self, w: W, pick: impl Fn(&CellReport) -> &[ComparisonRow]) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "year",
            "model",
            "statistic",
            "observed",
            "predicted",
            "mean",
            "sd",
            "ci_low",
            "ci_high",
            "ci_normal_low",
            "ci_normal_high",
            "analytical_var",
            "m",
        ])?;
        for c in &self.cells {
            for r in pick(c) {
                let e = r.ensemble.as_ref();
                wtr.write_record([
                    c.year.to_string(),
                    c.model.to_string(),
                    r.statistic.to_string(),
                    opt(r.observed),
                    opt(r.predicted),
                    opt(e.map(|e| e.mean)),
                    opt(e.map(|e| e.sd)),
                    opt(e.map(|e| e.ci_low)),
                    opt(e.map(|e| e.ci_high)),
                    opt(e.map(|e| e.ci_normal_low)),
                    opt(e.map(|e| e.ci_normal_high)),
                    opt(r.analytical_var),
                    e.map(|e| e.m.to_string()).unwrap_or_default(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_averages_csv<W: Write>(&self, w: W) -> Result<()> {
        self.write_rows(w, |c| &c.averages)
    }

    pub fn write_correlations_csv<W: Write>(&self, w: W) -> Result<()> {
        self.write_rows(w, |c| &c.correlations)
    }
}

/// JSON Schema (draft 2020-12) of the serialized [`Report`].
pub fn report_schema() -> Value {
    let num_or_null = json!({"type": ["number", "null"]});
    let summary = json!({
        "type": "object",
        "required": ["statistic", "mean", "sd", "ci_low", "ci_high", "ci_normal_low", "ci_normal_high", "m", "n_undefined"],
        "properties": {
            "statistic": {"type": "string"},
            "mean": {"type": "number"},
            "sd": {"type": "number", "minimum": 0},
            "ci_low": {"type": "number"},
            "ci_high": {"type": "number"},
            "ci_normal_low": {"type": "number"},
            "ci_normal_high": {"type": "number"},
            "m": {"type": "integer", "minimum": 2},
            "n_undefined": {"type": "integer", "minimum": 0}
        },
        "additionalProperties": false
    });
    let row = json!({
        "type": "object",
        "required": ["statistic", "observed", "predicted", "ensemble", "analytical_var"],
        "properties": {
            "statistic": {"type": "string", "pattern": "^(density|avg:[A-Za-z_]+|corr:[A-Za-z_]+:[A-Za-z_]+)$"},
            "observed": num_or_null,
            "predicted": num_or_null,
            "ensemble": {"oneOf": [{"type": "null"}, {"$ref": "#/$defs/summary"}]},
            "analytical_var": {"type": ["number", "null"], "minimum": 0}
        },
        "additionalProperties": false
    });
    let ks = json!({
        "type": "object",
        "required": ["statistic", "d", "p_value", "n_observed", "n_predicted"],
        "properties": {
            "statistic": {"type": "string"},
            "d": {"type": "number", "minimum": 0, "maximum": 1},
            "p_value": {"type": "number", "minimum": 0, "maximum": 1},
            "n_observed": {"type": "integer", "minimum": 1},
            "n_predicted": {"type": "integer", "minimum": 1}
        },
        "additionalProperties": false
    });
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "gravnet comparison report",
        "type": "object",
        "required": ["report_version", "cells"],
        "properties": {
            "report_version": {"const": REPORT_VERSION},
            "cells": {"type": "array", "items": {
                "type": "object",
                "required": ["year", "model", "transform", "n_countries", "replications", "ensemble_seed", "ks_tests", "averages", "correlations"],
                "properties": {
                    "year": {"type": "integer"},
                    "model": {"enum": ["OLS", "PPML", "ZIP", "LOGIT"]},
                    "transform": {"enum": ["identity", "log_positive"]},
                    "n_countries": {"type": "integer", "minimum": 1},
                    "replications": {"type": ["integer", "null"], "minimum": 1},
                    "ensemble_seed": {"type": ["integer", "null"], "minimum": 0},
                    "ks_tests": {"type": "array", "items": {"$ref": "#/$defs/ks"}},
                    "averages": {"type": "array", "items": {"$ref": "#/$defs/row"}},
                    "correlations": {"type": "array", "items": {"$ref": "#/$defs/row"}}
                },
                "additionalProperties": false
            }}
        },
        "additionalProperties": false,
        "$defs": {"summary": summary, "row": row, "ks": ks}
    })
}
