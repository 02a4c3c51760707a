use std::collections::BTreeMap;
use std::fmt::Write as _;

use gravnet::compare::{ComparisonRow, Report};
use gravnet::netstats::NodeStatKind;
use gravnet::ModelTag;

use crate::artifacts::{Logger, Manifest, Outputs};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

fn comparison_table(s: &mut String, rows: &[(i32, &ComparisonRow)]) {
    s.push_str("| statistic | year | observed | predicted | ensemble mean | 95% interval |\n");
    s.push_str("|---|---|---|---|---|---|\n");
    for (year, row) in rows {
        let (mean, ci) = match &row.ensemble {
            Some(e) => (format!("{:.4}", e.mean), format!("[{:.4}, {:.4}]", e.ci_low, e.ci_high)),
            None => ("n/a".into(), "n/a".into()),
        };
        let _ = writeln!(
            s,
            "| {} | {year} | {} | {} | {mean} | {ci} |",
            row.statistic,
            fmt_opt(row.observed),
            fmt_opt(row.predicted)
        );
    }
}

/// Markdown rendering of `report.json`: one K-S grid per model with the
/// years as columns, then the averages and correlations.
pub fn render_markdown(report: &Report) -> String {
    let mut by_model: BTreeMap<ModelTag, Vec<&gravnet::compare::CellReport>> = BTreeMap::new();
    for cell in &report.cells {
        by_model.entry(cell.model).or_default().push(cell);
    }
    let mut s = String::from("# Observed versus predicted trade networks\n");
    for (model, cells) in &by_model {
        let _ = writeln!(s, "\n## {model}\n");
        let _ = writeln!(s, "K-S statistic D with the p-value in parentheses.\n");
        s.push_str("| statistic |");
        for c in cells {
            let _ = write!(s, " {} |", c.year);
        }
        s.push_str("\n|---|");
        s.push_str(&"---|".repeat(cells.len()));
        s.push('\n');
        let kinds: Vec<NodeStatKind> = cells[0].ks_tests.iter().map(|r| r.statistic).collect();
        for kind in kinds {
            let _ = write!(s, "| {kind} |");
            for c in cells {
                match c.ks_tests.iter().find(|r| r.statistic == kind) {
                    Some(r) => {
                        let _ = write!(s, " {:.2} ({:.2}) |", r.d, r.p_value);
                    }
                    None => s.push_str(" n/a |"),
                }
            }
            s.push('\n');
        }

        let _ = writeln!(s, "\n### {model} population averages\n");
        let rows: Vec<(i32, &ComparisonRow)> =
            cells.iter().flat_map(|c| c.averages.iter().map(move |r| (c.year, r))).collect();
        comparison_table(&mut s, &rows);

        let _ = writeln!(s, "\n### {model} correlations\n");
        let rows: Vec<(i32, &ComparisonRow)> =
            cells.iter().flat_map(|c| c.correlations.iter().map(move |r| (c.year, r))).collect();
        comparison_table(&mut s, &rows);
    }
    s
}

pub fn report(cfg: &RunConfig) -> Result<Vec<String>> {
    let log = Logger::new(&cfg.out, "report", cfg.quiet);
    let manifest = Manifest::load(&cfg.out)?;
    let bytes = manifest.require(&cfg.out, "report.json", "compare")?;
    let report: Report = serde_json::from_slice(&bytes).map_err(|e| CliError::Core {
        context: "report.json".into(),
        source: e.into(),
    })?;
    if report.report_version != gravnet::compare::REPORT_VERSION {
        return Err(CliError::Dependency {
            command: "compare",
            detail: format!("report.json has version {}", report.report_version),
        });
    }
    log.stage("load", format!("{} cells", report.cells.len()));

    let mut out = Outputs::new("report");
    out.add("report.md", render_markdown(&report).into_bytes());
    let written = out.commit(&cfg.out, serde_json::json!({ "cells": report.cells.len() }))?;
    log.stage("write", format!("{} files", written.len()));
    Ok(written)
}
