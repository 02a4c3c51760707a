use std::collections::BTreeSet;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{CrossSection, DyadPanel};
use crate::error::{Error, Result};

/// Name of the intercept column. It is always the last design column.
pub const CONSTANT: &str = "_cons";

/// Gravity regressors. Size and distance variables enter as natural logs;
/// `Continent*` enters as its integer code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Covariate {
    LnGdpI,
    LnGdpJ,
    LnDist,
    LnAreaI,
    LnAreaJ,
    LnPopI,
    LnPopJ,
    LandlI,
    LandlJ,
    ContinentI,
    ContinentJ,
    Contig,
    ComlangOff,
    Comcol,
    Colony,
    Curcol,
    Comrelig,
    Comcur,
    Gsp,
    Rta,
}

impl Covariate {
    pub const ALL: [Covariate; 20] = [
        Covariate::LnGdpI,
        Covariate::LnGdpJ,
        Covariate::LnDist,
        Covariate::LnAreaI,
        Covariate::LnAreaJ,
        Covariate::LnPopI,
        Covariate::LnPopJ,
        Covariate::LandlI,
        Covariate::LandlJ,
        Covariate::ContinentI,
        Covariate::ContinentJ,
        Covariate::Contig,
        Covariate::ComlangOff,
        Covariate::Comcol,
        Covariate::Colony,
        Covariate::Curcol,
        Covariate::Comrelig,
        Covariate::Comcur,
        Covariate::Gsp,
        Covariate::Rta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Covariate::LnGdpI => "ln_gdp_i",
            Covariate::LnGdpJ => "ln_gdp_j",
            Covariate::LnDist => "ln_dist_ij",
            Covariate::LnAreaI => "ln_area_i",
            Covariate::LnAreaJ => "ln_area_j",
            Covariate::LnPopI => "ln_pop_i",
            Covariate::LnPopJ => "ln_pop_j",
            Covariate::LandlI => "landl_i",
            Covariate::LandlJ => "landl_j",
            Covariate::ContinentI => "continent_i",
            Covariate::ContinentJ => "continent_j",
            Covariate::Contig => "contig",
            Covariate::ComlangOff => "comlang_off",
            Covariate::Comcol => "comcol",
            Covariate::Colony => "colony",
            Covariate::Curcol => "curcol",
            Covariate::Comrelig => "comrelig",
            Covariate::Comcur => "comcur",
            Covariate::Gsp => "gsp",
            Covariate::Rta => "rta",
        }
    }

    /// True when the column is the natural log of a raw covariate.
    pub fn is_log(self) -> bool {
        matches!(
            self,
            Covariate::LnGdpI
                | Covariate::LnGdpJ
                | Covariate::LnDist
                | Covariate::LnAreaI
                | Covariate::LnAreaJ
                | Covariate::LnPopI
                | Covariate::LnPopJ
        )
    }
}

impl FromStr for Covariate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Covariate::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Schema(format!("unknown covariate `{s}`")))
    }
}

/// Ordered regressor selection; the constant is appended automatically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub covariates: Vec<Covariate>,
}

impl Default for CovariateSpec {
    fn default() -> Self {
        Self {
            covariates: Covariate::ALL.to_vec(),
        }
    }
}

impl CovariateSpec {
    pub fn new(covariates: Vec<Covariate>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for c in &covariates {
            if !seen.insert(*c) {
                return Err(Error::Schema(format!("covariate `{}` listed twice", c.name())));
            }
        }
        Ok(Self { covariates })
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let covs = names
            .iter()
            .map(|s| s.as_ref().parse())
            .collect::<Result<Vec<_>>>()?;
        Self::new(covs)
    }

    pub fn column_names(&self) -> Vec<String> {
        self.covariates
            .iter()
            .map(|c| c.name().to_string())
            .chain(std::iter::once(CONSTANT.to_string()))
            .collect()
    }
}

/// Regressor matrix for one cross-section.
///
/// `rows[k] = (i, j)` indexes into `countries`; `y` holds flows in levels.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub countries: Vec<String>,
    pub rows: Vec<(usize, usize)>,
    pub columns: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl DesignMatrix {
    /// Builds the design matrix for `cs`.
    ///
    /// With `positive_only` only dyads with a positive flow are kept,
    /// otherwise every ordered pair `i != j` appears, row-major.
    pub fn build(
        cs: &CrossSection,
        panel: &DyadPanel,
        spec: &CovariateSpec,
        positive_only: bool,
    ) -> Result<Self> {
        let n = cs.n();
        let columns = spec.column_names();
        let p = columns.len();
        let mut rows = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && (!positive_only || cs.weights[(i, j)] > 0.0) {
                    rows.push((i, j));
                }
            }
        }

        let mut x = DMatrix::zeros(rows.len(), p);
        let mut y = DVector::zeros(rows.len());
        for (r, &(i, j)) in rows.iter().enumerate() {
            let (ci, cj) = (&cs.countries[i], &cs.countries[j]);
            let d = cs.dyad_row(i, j).map(|k| &panel.dyads[k]).ok_or_else(|| {
                Error::validation(
                    None,
                    format!(
                        "no covariates for dyad {} -> {} in year {}",
                        ci.country_id, cj.country_id, cs.year
                    ),
                )
            })?;
            y[r] = cs.weights[(i, j)];
            let flag = |b: bool| if b { 1.0 } else { 0.0 };
            for (k, cov) in spec.covariates.iter().enumerate() {
                let raw = match cov {
                    Covariate::LnGdpI => ci.gdp,
                    Covariate::LnGdpJ => cj.gdp,
                    Covariate::LnDist => d.distance,
                    Covariate::LnAreaI => ci.area,
                    Covariate::LnAreaJ => cj.area,
                    Covariate::LnPopI => ci.population,
                    Covariate::LnPopJ => cj.population,
                    Covariate::LandlI => flag(ci.landlocked),
                    Covariate::LandlJ => flag(cj.landlocked),
                    Covariate::ContinentI => f64::from(ci.continent),
                    Covariate::ContinentJ => f64::from(cj.continent),
                    Covariate::Contig => flag(d.contig),
                    Covariate::ComlangOff => flag(d.comlang_off),
                    Covariate::Comcol => flag(d.comcol),
                    Covariate::Colony => flag(d.colony),
                    Covariate::Curcol => flag(d.curcol),
                    Covariate::Comrelig => d.comrelig,
                    Covariate::Comcur => flag(d.comcur),
                    Covariate::Gsp => flag(d.gsp),
                    Covariate::Rta => flag(d.rta),
                };
                x[(r, k)] = if cov.is_log() {
                    if !(raw > 0.0) {
                        return Err(Error::validation(
                            None,
                            format!(
                                "{} needs a positive value for dyad {} -> {}, got {raw}",
                                cov.name(),
                                ci.country_id,
                                cj.country_id
                            ),
                        ));
                    }
                    raw.ln()
                } else {
                    raw
                };
            }
            x[(r, p - 1)] = 1.0;
        }

        Ok(Self {
            countries: cs.country_ids(),
            rows,
            columns,
            x,
            y,
        })
    }

    /// A free-standing design without dyad structure, for direct regression
    /// use. Rows are numbered as pseudo-dyads `(k, k)`.
    pub fn from_parts(columns: Vec<String>, x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() || x.ncols() != columns.len() {
            return Err(Error::Schema(format!(
                "design is {}x{} with {} column names and {} responses",
                x.nrows(),
                x.ncols(),
                columns.len(),
                y.len()
            )));
        }
        let unique: BTreeSet<&String> = columns.iter().collect();
        if unique.len() != columns.len() {
            return Err(Error::Schema("design column names must be unique".into()));
        }
        Ok(Self {
            countries: Vec::new(),
            rows: (0..x.nrows()).map(|k| (k, k)).collect(),
            columns,
            x,
            y,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Binary link indicator `a = 1{y > 0}`.
    pub fn presence(&self) -> DVector<f64> {
        self.y.map(|v| if v > 0.0 { 1.0 } else { 0.0 })
    }

    /// `ln(y)`; fails if any response is not strictly positive.
    pub fn log_y(&self) -> Result<DVector<f64>> {
        if let Some(k) = self.y.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::validation(
                None,
                format!("log response requires positive flows; row {k} has {}", self.y[k]),
            ));
        }
        Ok(self.y.map(f64::ln))
    }

    /// Keeps only rows with a positive response.
    pub fn positive_only(&self) -> Self {
        let keep: Vec<usize> = (0..self.n_rows()).filter(|&r| self.y[r] > 0.0).collect();
        self.select_rows(&keep)
    }

    fn select_rows(&self, keep: &[usize]) -> Self {
        Self {
            countries: self.countries.clone(),
            rows: keep.iter().map(|&r| self.rows[r]).collect(),
            columns: self.columns.clone(),
            x: self.x.select_rows(keep),
            y: DVector::from_iterator(keep.len(), keep.iter().map(|&r| self.y[r])),
        }
    }

    /// Linear predictor `X·coef`.
    pub fn linear_predictor(&self, coef: &DVector<f64>) -> DVector<f64> {
        &self.x * coef
    }

    /// Checks that `names` equals this design's column list.
    pub fn check_columns(&self, names: &[String]) -> Result<()> {
        if self.columns != names {
            return Err(Error::Schema(format!(
                "design columns [{}] do not match fitted coefficients [{}]",
                self.columns.join(", "),
                names.join(", ")
            )));
        }
        Ok(())
    }
}
