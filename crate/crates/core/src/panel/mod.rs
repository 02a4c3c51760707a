//! Dyadic trade panels: ingestion, per-year cross-sections, design matrices
//! and summary statistics.

mod design;
mod io;
mod summary;

pub use design::{Covariate, CovariateSpec, DesignMatrix, CONSTANT};
pub use io::{ColumnMap, COUNTRY_COLUMNS, DYAD_COLUMNS};
pub use summary::{summary_stats, write_summary_csv, SummaryStats};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Country attributes for one year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryRecord {
    pub country_id: String,
    pub year: i32,
    pub gdp: f64,
    pub area: f64,
    pub population: f64,
    pub landlocked: bool,
    pub continent: u8,
}

impl CountryRecord {
    pub(crate) fn validate(&self, line: Option<usize>) -> Result<()> {
        for (name, v) in [
            ("gdp", self.gdp),
            ("area", self.area),
            ("population", self.population),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(
                    line,
                    format!("{name} of {} must be strictly positive, got {v}", self.country_id),
                ));
            }
        }
        Ok(())
    }
}

/// One exporter→importer observation for one year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadRecord {
    pub exporter: String,
    pub importer: String,
    pub year: i32,
    pub flow: f64,
    pub distance: f64,
    pub contig: bool,
    pub comlang_off: bool,
    pub comcol: bool,
    pub colony: bool,
    pub curcol: bool,
    pub comrelig: f64,
    pub comcur: bool,
    pub gsp: bool,
    pub rta: bool,
}

impl DyadRecord {
    pub(crate) fn validate(&self, line: Option<usize>) -> Result<()> {
        if self.exporter == self.importer {
            return Err(Error::validation(
                line,
                format!("exporter and importer are both {}", self.exporter),
            ));
        }
        if !(self.flow.is_finite() && self.flow >= 0.0) {
            return Err(Error::validation(
                line,
                format!("flow must be non-negative, got {}", self.flow),
            ));
        }
        if !(self.distance.is_finite() && self.distance > 0.0) {
            return Err(Error::validation(
                line,
                format!("distance must be positive, got {}", self.distance),
            ));
        }
        if !(0.0..=1.0).contains(&self.comrelig) {
            return Err(Error::validation(
                line,
                format!("comrelig must lie in [0, 1], got {}", self.comrelig),
            ));
        }
        Ok(())
    }
}

/// Long-form panel of dyads plus the country-year side table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DyadPanel {
    pub dyads: Vec<DyadRecord>,
    pub countries: Vec<CountryRecord>,
}

impl DyadPanel {
    /// Builds a panel from in-memory records, validating every record and
    /// rejecting duplicate keys.
    pub fn new(dyads: Vec<DyadRecord>, countries: Vec<CountryRecord>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for c in &countries {
            c.validate(None)?;
            if !seen.insert((c.year, c.country_id.as_str())) {
                return Err(Error::validation(
                    None,
                    format!("duplicate country {} in year {}", c.country_id, c.year),
                ));
            }
        }
        let mut seen = BTreeSet::new();
        for d in &dyads {
            d.validate(None)?;
            if !seen.insert((d.year, d.exporter.as_str(), d.importer.as_str())) {
                return Err(Error::validation(
                    None,
                    format!(
                        "duplicate dyad {} -> {} in year {}",
                        d.exporter, d.importer, d.year
                    ),
                ));
            }
        }
        Ok(Self { dyads, countries })
    }

    /// Sorted list of years with at least one country record.
    pub fn years(&self) -> Vec<i32> {
        let years: BTreeSet<i32> = self.countries.iter().map(|c| c.year).collect();
        years.into_iter().collect()
    }

    /// Assembles the observed weighted and binary network for `year`.
    ///
    /// Countries are ordered by identifier. Dyads absent from the panel are
    /// zero flows.
    pub fn cross_section(&self, year: i32) -> Result<CrossSection> {
        let mut countries: Vec<CountryRecord> = self
            .countries
            .iter()
            .filter(|c| c.year == year)
            .cloned()
            .collect();
        if countries.is_empty() {
            return Err(Error::NotFound(format!("year {year} is not present in the panel")));
        }
        countries.sort_by(|a, b| a.country_id.cmp(&b.country_id));
        let index: HashMap<&str, usize> = countries
            .iter()
            .enumerate()
            .map(|(i, c)| (c.country_id.as_str(), i))
            .collect();

        let n = countries.len();
        let mut weights = DMatrix::zeros(n, n);
        let mut dyads = BTreeMap::new();
        for (row, d) in self.dyads.iter().enumerate().filter(|(_, d)| d.year == year) {
            let lookup = |id: &str| {
                index.get(id).copied().ok_or_else(|| {
                    Error::validation(
                        None,
                        format!("dyad references country {id} with no record for year {year}"),
                    )
                })
            };
            let i = lookup(&d.exporter)?;
            let j = lookup(&d.importer)?;
            weights[(i, j)] = d.flow;
            dyads.insert((i, j), row);
        }
        let adjacency = weights.map(|w| if w > 0.0 { 1.0 } else { 0.0 });
        Ok(CrossSection {
            year,
            countries,
            weights,
            adjacency,
            dyad_rows: dyads,
        })
    }

    /// Convenience alias matching the pipeline vocabulary.
    pub fn build_cross_section(&self, year: i32) -> Result<CrossSection> {
        self.cross_section(year)
    }
}

/// Observed trade network for one year.
///
/// `adjacency[(i, j)] == 1` exactly when `weights[(i, j)] > 0`; both
/// diagonals are zero.
#[derive(Debug, Clone)]
pub struct CrossSection {
    pub year: i32,
    pub countries: Vec<CountryRecord>,
    pub weights: DMatrix<f64>,
    pub adjacency: DMatrix<f64>,
    /// (exporter index, importer index) → row in `DyadPanel::dyads`.
    dyad_rows: BTreeMap<(usize, usize), usize>,
}

impl CrossSection {
    pub fn n(&self) -> usize {
        self.countries.len()
    }

    pub fn country_ids(&self) -> Vec<String> {
        self.countries.iter().map(|c| c.country_id.clone()).collect()
    }

    /// Number of positive flows, L.
    pub fn n_links(&self) -> usize {
        self.adjacency.iter().filter(|&&a| a > 0.0).count()
    }

    pub(crate) fn dyad_row(&self, i: usize, j: usize) -> Option<usize> {
        self.dyad_rows.get(&(i, j)).copied()
    }
}
