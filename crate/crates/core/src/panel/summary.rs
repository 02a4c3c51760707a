use std::io::Write;

use serde::{Deserialize, Serialize};

use super::CrossSection;
use crate::error::{Error, Result};

/// Size, density and concentration figures for one cross-section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub year: i32,
    pub n_countries: usize,
    pub n_flows: usize,
    pub density: f64,
    /// Mean of the positive flows.
    pub avg_trade: f64,
    pub countries_50: usize,
    pub flows_50: usize,
    pub countries_90: usize,
    pub flows_90: usize,
    pub pct_countries_50: f64,
    pub pct_flows_50: f64,
    pub pct_countries_90: f64,
    pub pct_flows_90: f64,
}

/// Smallest number of leading items (sorted descending) whose total reaches
/// `share` of the grand total. Items tied at the cutoff count as included.
pub(crate) fn concentration_count(values: &[f64], share: f64) -> usize {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = sorted.iter().sum();
    if total <= 0.0 {
        return 0;
    }
    let target = share * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        acc += v;
        if acc >= target {
            return k + 1;
        }
    }
    sorted.len()
}

pub fn summary_stats(cs: &CrossSection) -> Result<SummaryStats> {
    let n = cs.n();
    if n < 2 {
        return Err(Error::Precondition(format!(
            "summary statistics need at least 2 countries, got {n}"
        )));
    }
    let n_flows = cs.n_links();
    let mut flows = Vec::with_capacity(n_flows);
    let mut country_trade = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let w = cs.weights[(i, j)];
            if i != j && w > 0.0 {
                flows.push(w);
                country_trade[i] += w;
                country_trade[j] += w;
            }
        }
    }
    let total: f64 = flows.iter().sum();
    let pct = |k: usize, of: usize| if of == 0 { 0.0 } else { 100.0 * k as f64 / of as f64 };

    let countries_50 = concentration_count(&country_trade, 0.5);
    let countries_90 = concentration_count(&country_trade, 0.9);
    let flows_50 = concentration_count(&flows, 0.5);
    let flows_90 = concentration_count(&flows, 0.9);
    Ok(SummaryStats {
        year: cs.year,
        n_countries: n,
        n_flows,
        density: crate::netstats::density_from_counts(n_flows, n),
        avg_trade: if n_flows > 0 { total / n_flows as f64 } else { 0.0 },
        countries_50,
        flows_50,
        countries_90,
        flows_90,
        pct_countries_50: pct(countries_50, n),
        pct_flows_50: pct(flows_50, n_flows),
        pct_countries_90: pct(countries_90, n),
        pct_flows_90: pct(flows_90, n_flows),
    })
}

/// Writes one column per year, one row per statistic.
pub fn write_summary_csv<W: Write>(stats: &[SummaryStats], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["statistic".to_string()];
    header.extend(stats.iter().map(|s| s.year.to_string()));
    wtr.write_record(&header)?;
    type Getter = fn(&SummaryStats) -> String;
    let rows: [(&str, Getter); 12] = [
        ("countries", |s| s.n_countries.to_string()),
        ("trade_flows", |s| s.n_flows.to_string()),
        ("density", |s| s.density.to_string()),
        ("average_trade", |s| s.avg_trade.to_string()),
        ("countries_50pct_trade", |s| s.countries_50.to_string()),
        ("flows_50pct_trade", |s| s.flows_50.to_string()),
        ("countries_90pct_trade", |s| s.countries_90.to_string()),
        ("flows_90pct_trade", |s| s.flows_90.to_string()),
        ("pct_countries_50pct_trade", |s| s.pct_countries_50.to_string()),
        ("pct_flows_50pct_trade", |s| s.pct_flows_50.to_string()),
        ("pct_countries_90pct_trade", |s| s.pct_countries_90.to_string()),
        ("pct_flows_90pct_trade", |s| s.pct_flows_90.to_string()),
    ];
    for (name, get) in rows {
        let mut rec = vec![name.to_string()];
        rec.extend(stats.iter().map(get));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
