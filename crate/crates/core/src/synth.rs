//! Synthetic dyadic panels drawn from the gravity functional form with known
//! coefficients, used to check the estimators and the whole pipeline.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::logistic;
use crate::panel::{Covariate, CountryRecord, CovariateSpec, DesignMatrix, DyadPanel, DyadRecord};

/// How flows are drawn given `ψ = Λ(xθ)` and `μ = exp(xγ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Structural zero with probability `ψ`, otherwise `Poisson(μ)`.
    #[default]
    Zip,
    /// `Poisson(μ)` for every dyad (`ψ ≡ 0`).
    Poisson,
    /// Link present with probability `1 − ψ`, weight `exp(xγ + σε)`.
    LogNormal { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_countries: usize,
    pub years: Vec<i32>,
    pub covariates: CovariateSpec,
    /// Intensity coefficients, one per design column (constant last).
    pub gamma: Vec<f64>,
    /// Inflation coefficients: `ψ = Λ(xθ)`.
    pub theta: Vec<f64>,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let covariates = CovariateSpec::default();
        let (gamma, theta) = default_coefficients(&covariates.covariates);
        Self {
            n_countries: 50,
            years: (0..7).map(|k| 1970 + 5 * k).collect(),
            covariates,
            gamma,
            theta,
            noise: NoiseSpec::Zip,
            seed: 1,
        }
    }
}

/// Rough generator mean of each covariate, used to centre the constants.
fn generator_mean(c: Covariate) -> f64 {
    match c {
        Covariate::LnGdpI | Covariate::LnGdpJ => 24.3,
        Covariate::LnDist => 8.4,
        Covariate::LnAreaI | Covariate::LnAreaJ => 12.0,
        Covariate::LnPopI | Covariate::LnPopJ => 16.15,
        Covariate::LandlI | Covariate::LandlJ => 0.2,
        Covariate::ContinentI | Covariate::ContinentJ => 3.0,
        Covariate::Contig => 0.02,
        Covariate::ComlangOff => 0.15,
        Covariate::Comcol => 0.1,
        Covariate::Colony => 0.02,
        Covariate::Curcol => 0.006,
        Covariate::Comrelig => 0.5,
        Covariate::Comcur => 0.05,
        Covariate::Gsp => 0.3,
        Covariate::Rta => 0.11,
    }
}

/// Gravity-style coefficients `(γ, θ)` for `covariates`. The constants put
/// the mean of `ln μ` near 3 and the mean of `xθ` near 0.
pub fn default_coefficients(covariates: &[Covariate]) -> (Vec<f64>, Vec<f64>) {
    let table = |c: Covariate| -> (f64, f64) {
        match c {
            Covariate::LnGdpI => (0.6, -0.5),
            Covariate::LnGdpJ => (0.5, -0.4),
            Covariate::LnDist => (-0.8, 0.8),
            Covariate::LnAreaI => (-0.05, 0.0),
            Covariate::LnAreaJ => (-0.05, 0.05),
            Covariate::LnPopI => (0.1, -0.05),
            Covariate::LnPopJ => (0.05, 0.0),
            Covariate::LandlI => (-0.3, 0.3),
            Covariate::LandlJ => (-0.2, 0.2),
            Covariate::ContinentI => (0.05, 0.0),
            Covariate::ContinentJ => (-0.05, 0.05),
            Covariate::Contig => (0.5, -0.5),
            Covariate::ComlangOff => (0.3, -0.3),
            Covariate::Comcol => (0.2, -0.2),
            Covariate::Colony => (0.4, -0.3),
            Covariate::Curcol => (0.3, -0.2),
            Covariate::Comrelig => (0.2, -0.2),
            Covariate::Comcur => (0.3, -0.2),
            Covariate::Gsp => (0.2, -0.2),
            Covariate::Rta => (0.4, -0.4),
        }
    };
    let mut gamma: Vec<f64> = covariates.iter().map(|&c| table(c).0).collect();
    let mut theta: Vec<f64> = covariates.iter().map(|&c| table(c).1).collect();
    let centre = |coef: &[f64]| -> f64 { covariates.iter().zip(coef).map(|(&c, b)| b * generator_mean(c)).sum() };
    gamma.push(3.0 - centre(&gamma));
    theta.push(-centre(&theta));
    (gamma, theta)
}

/// Generating parameters and the coefficients each estimator should
/// recover on this panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub n_countries: usize,
    pub years: Vec<i32>,
    pub seed: u64,
    pub noise: NoiseSpec,
    pub columns: Vec<String>,
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
    /// Keys `OLS`, `PPML`, `LOGIT`, `ZIP_logit` and `ZIP_poisson`; only
    /// estimators that are correctly specified for the noise appear.
    pub estimands: BTreeMap<String, Vec<f64>>,
}

impl SynthTruth {
    fn new(spec: &SynthSpec) -> Self {
        let mut estimands = BTreeMap::new();
        match spec.noise {
            NoiseSpec::Zip => {
                estimands.insert("ZIP_logit".into(), spec.theta.clone());
                estimands.insert("ZIP_poisson".into(), spec.gamma.clone());
            }
            NoiseSpec::Poisson => {
                estimands.insert("PPML".into(), spec.gamma.clone());
            }
            NoiseSpec::LogNormal { .. } => {
                estimands.insert("OLS".into(), spec.gamma.clone());
                estimands.insert("LOGIT".into(), spec.theta.iter().map(|t| -t).collect());
            }
        }
        Self {
            n_countries: spec.n_countries,
            years: spec.years.clone(),
            seed: spec.seed,
            noise: spec.noise,
            columns: spec.covariates.column_names(),
            gamma: spec.gamma.clone(),
            theta: spec.theta.clone(),
            estimands,
        }
    }
}

struct Country {
    id: String,
    ln_gdp: f64,
    growth: f64,
    ln_area: f64,
    ln_pop: f64,
    landlocked: bool,
    continent: u8,
    location: (f64, f64),
}

struct Pair {
    distance: f64,
    comlang_off: bool,
    comcol: bool,
    colony: bool,
    curcol: bool,
    comrelig: f64,
    comcur: bool,
    gsp: bool,
}

fn validate(spec: &SynthSpec) -> Result<()> {
    if spec.n_countries < 5 {
        return Err(Error::Precondition(format!("need at least 5 countries, got {}", spec.n_countries)));
    }
    if spec.years.is_empty() {
        return Err(Error::Precondition("no years requested".into()));
    }
    let p = spec.covariates.column_names().len();
    for (name, coef) in [("gamma", &spec.gamma), ("theta", &spec.theta)] {
        if coef.len() != p {
            return Err(Error::Schema(format!("{name} has {} entries for {p} design columns", coef.len())));
        }
        if coef.iter().any(|c| !c.is_finite()) {
            return Err(Error::validation(None, format!("{name} has a non-finite entry")));
        }
    }
    if let NoiseSpec::LogNormal { sigma } = spec.noise {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::validation(None, format!("log-normal sigma must be non-negative, got {sigma}")));
        }
    }
    Ok(())
}

/// Draws a panel of `spec.n_countries` countries observed in every year,
/// with every ordered pair present each year.
pub fn generate(spec: &SynthSpec) -> Result<(DyadPanel, SynthTruth)> {
    validate(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_countries;
    let width = n.to_string().len().max(3);
    let std = |m: f64, s: f64| Normal::new(m, s).expect("finite normal parameters");

    let countries: Vec<Country> = (0..n)
        .map(|k| Country {
            id: format!("C{:0width$}", k + 1),
            ln_gdp: std(24.0, 1.5).sample(&mut rng),
            growth: std(0.02, 0.01).sample(&mut rng),
            ln_area: std(12.0, 1.5).sample(&mut rng),
            ln_pop: std(16.0, 1.2).sample(&mut rng),
            landlocked: rng.random_bool(0.2),
            continent: rng.random_range(1..=5),
            location: (rng.random_range(0.0..12_000.0), rng.random_range(0.0..12_000.0)),
        })
        .collect();

    // Symmetric pair attributes are drawn for i < j and mirrored.
    let mut pairs: BTreeMap<(usize, usize), Pair> = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (ci, cj) = (&countries[i], &countries[j]);
            let directed_colony = rng.random_bool(0.02);
            let directed_gsp = rng.random_bool(0.3);
            let curcol = directed_colony && rng.random_bool(0.3);
            let pair = if i < j {
                let dx = ci.location.0 - cj.location.0;
                let dy = ci.location.1 - cj.location.1;
                Pair {
                    distance: (dx * dx + dy * dy).sqrt().max(100.0),
                    comlang_off: rng.random_bool(0.15),
                    comcol: rng.random_bool(0.1),
                    colony: directed_colony,
                    curcol,
                    comrelig: rng.random::<f64>(),
                    comcur: rng.random_bool(0.05),
                    gsp: directed_gsp,
                }
            } else {
                let m = &pairs[&(j, i)];
                Pair {
                    distance: m.distance,
                    comlang_off: m.comlang_off,
                    comcol: m.comcol,
                    colony: directed_colony,
                    curcol,
                    comrelig: m.comrelig,
                    comcur: m.comcur,
                    gsp: directed_gsp,
                }
            };
            pairs.insert((i, j), pair);
        }
    }

    let first_year = *spec.years.iter().min().unwrap();
    let gamma = DVector::from_row_slice(&spec.gamma);
    let theta = DVector::from_row_slice(&spec.theta);
    let mut country_records = Vec::with_capacity(n * spec.years.len());
    let mut dyads = Vec::with_capacity(n * (n - 1) * spec.years.len());

    for &year in &spec.years {
        let t = f64::from(year - first_year);
        let year_countries: Vec<CountryRecord> = countries
            .iter()
            .map(|c| CountryRecord {
                country_id: c.id.clone(),
                year,
                gdp: (c.ln_gdp + c.growth * t + std(0.0, 0.05).sample(&mut rng)).exp(),
                area: c.ln_area.exp(),
                population: (c.ln_pop + 0.01 * t + std(0.0, 0.02).sample(&mut rng)).exp(),
                landlocked: c.landlocked,
                continent: c.continent,
            })
            .collect();

        let rta_rate = (0.05 + 0.004 * t).min(0.5);
        let mut rta = BTreeMap::new();
        let mut year_dyads = Vec::with_capacity(n * (n - 1));
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let p = &pairs[&(i, j)];
                let in_rta = if i < j {
                    let v = rng.random_bool(rta_rate);
                    rta.insert((i, j), v);
                    v
                } else {
                    rta[&(j, i)]
                };
                year_dyads.push(DyadRecord {
                    exporter: countries[i].id.clone(),
                    importer: countries[j].id.clone(),
                    year,
                    flow: 0.0,
                    distance: p.distance,
                    contig: p.distance < 900.0,
                    comlang_off: p.comlang_off,
                    comcol: p.comcol,
                    colony: p.colony,
                    curcol: p.curcol,
                    comrelig: p.comrelig,
                    comcur: p.comcur,
                    gsp: p.gsp,
                    rta: in_rta,
                });
            }
        }

        // Linear predictors come from the same design builder the
        // estimators use, so the truth refers to exactly those columns.
        let year_panel = DyadPanel {
            dyads: year_dyads,
            countries: year_countries,
        };
        let cs = year_panel.cross_section(year)?;
        let dm = DesignMatrix::build(&cs, &year_panel, &spec.covariates, false)?;
        let eta_mu = dm.linear_predictor(&gamma);
        let eta_psi = dm.linear_predictor(&theta);
        let mut flows = BTreeMap::new();
        for (r, &(i, j)) in dm.rows.iter().enumerate() {
            let psi = logistic(eta_psi[r]);
            let flow = match spec.noise {
                NoiseSpec::Zip => {
                    if rng.random_bool(psi) {
                        0.0
                    } else {
                        poisson(eta_mu[r], &mut rng)?
                    }
                }
                NoiseSpec::Poisson => poisson(eta_mu[r], &mut rng)?,
                NoiseSpec::LogNormal { sigma } => {
                    let present = !rng.random_bool(psi);
                    let eps: f64 = std(0.0, 1.0).sample(&mut rng);
                    if present {
                        (eta_mu[r] + sigma * eps).exp()
                    } else {
                        0.0
                    }
                }
            };
            flows.insert((dm.countries[i].as_str(), dm.countries[j].as_str()), flow);
        }
        for mut d in year_panel.dyads {
            d.flow = flows[&(d.exporter.as_str(), d.importer.as_str())];
            dyads.push(d);
        }
        country_records.extend(year_panel.countries);
    }

    let panel = DyadPanel::new(dyads, country_records)?;
    Ok((panel, SynthTruth::new(spec)))
}

fn poisson<R: Rng>(eta: f64, rng: &mut R) -> Result<f64> {
    let mu = eta.exp();
    if !(mu.is_finite() && mu < 1e15) {
        return Err(Error::validation(None, format!("Poisson mean exp({eta}) is out of range")));
    }
    if mu == 0.0 {
        return Ok(0.0);
    }
    Ok(Poisson::new(mu)
        .map_err(|e| Error::validation(None, format!("Poisson mean {mu}: {e}")))?
        .sample(rng))
}
