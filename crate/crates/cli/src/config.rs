//! Run configuration: defaults, then the JSON config file, then flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use gravnet::netstats::WeightTransform;
use gravnet::panel::CovariateSpec;
use gravnet::prediction::{ZeroProbabilityForm, DEFAULT_REPLICATIONS};
use gravnet::synth::{NoiseSpec, SynthSpec};
use gravnet::ModelTag;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{CliError, Result};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUT: &str = "out";
pub const DATA_DIR: &str = "data";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseKind {
    Zip,
    Poisson,
    LogNormal,
}

/// Flags shared by every command. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON run configuration
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Comma-separated years (default: every year in the panel)
    #[arg(long, global = true, value_delimiter = ',', value_name = "YEARS")]
    pub years: Option<Vec<i32>>,
    /// Comma-separated subset of OLS, PPML, ZIP, LOGIT
    #[arg(long, global = true, value_delimiter = ',', value_name = "MODELS")]
    pub models: Option<Vec<String>>,
    /// Ensemble size M
    #[arg(long, global = true, value_name = "M")]
    pub replications: Option<usize>,
    /// Seed for synth and the ensembles
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Dyad CSV (default: <out>/data/dyads.csv)
    #[arg(long, global = true, value_name = "FILE")]
    pub dyads: Option<PathBuf>,
    /// Country CSV (default: <out>/data/countries.csv)
    #[arg(long, global = true, value_name = "FILE")]
    pub countries: Option<PathBuf>,
    /// synth: number of countries
    #[arg(long, global = true)]
    pub n_countries: Option<usize>,
    /// synth: flow noise
    #[arg(long, global = true, value_enum)]
    pub noise: Option<NoiseKind>,
    /// synth: log-normal noise scale
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Suppress the per-stage progress lines
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthSection {
    n_countries: Option<usize>,
    noise: Option<NoiseSpec>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    dyads: Option<PathBuf>,
    countries: Option<PathBuf>,
    years: Option<Vec<i32>>,
    models: Option<Vec<String>>,
    covariates: Option<Vec<String>>,
    replications: Option<usize>,
    seed: Option<u64>,
    transforms: Option<BTreeMap<String, WeightTransform>>,
    out: Option<PathBuf>,
    zero_probability: Option<ZeroProbabilityForm>,
    full_correlations: Option<bool>,
    synth: Option<SynthSection>,
}

impl ConfigFile {
    fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut file: ConfigFile =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // Paths in the file are relative to the file itself.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut file.dyads, &mut file.countries, &mut file.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(file)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dyads: PathBuf,
    pub countries: PathBuf,
    /// Input paths were not given and point into `<out>/data`.
    pub default_inputs: bool,
    /// `None` selects every year in the panel (synth: its default years).
    pub years: Option<Vec<i32>>,
    pub models: Vec<ModelTag>,
    pub covariates: CovariateSpec,
    pub replications: usize,
    pub seed: u64,
    pub transforms: BTreeMap<ModelTag, WeightTransform>,
    pub out: PathBuf,
    pub zero_probability: ZeroProbabilityForm,
    pub full_correlations: bool,
    pub n_countries: usize,
    pub noise: NoiseSpec,
    pub quiet: bool,
}

/// Log weights for OLS, levels otherwise.
pub fn default_transform(model: ModelTag) -> WeightTransform {
    match model {
        ModelTag::Ols => WeightTransform::LogPositive,
        _ => WeightTransform::Identity,
    }
}

fn parse_models(names: &[String]) -> Result<Vec<ModelTag>> {
    let mut models = Vec::new();
    for name in names {
        let m: ModelTag = name.parse().map_err(|e: gravnet::Error| CliError::Config(e.to_string()))?;
        if !models.contains(&m) {
            models.push(m);
        }
    }
    models.sort();
    Ok(models)
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthSpec::default();
        let out = PathBuf::from(DEFAULT_OUT);
        Self {
            dyads: out.join(DATA_DIR).join("dyads.csv"),
            countries: out.join(DATA_DIR).join("countries.csv"),
            default_inputs: true,
            years: None,
            models: ModelTag::ALL.to_vec(),
            covariates: CovariateSpec::default(),
            replications: DEFAULT_REPLICATIONS,
            seed: DEFAULT_SEED,
            transforms: ModelTag::ALL.iter().map(|&m| (m, default_transform(m))).collect(),
            out,
            zero_probability: ZeroProbabilityForm::default(),
            full_correlations: false,
            n_countries: synth.n_countries,
            noise: synth.noise,
            quiet: false,
        }
    }
}

impl RunConfig {
    /// Merges defaults, the config file and the flags, then checks the
    /// result. Input files are checked separately by [`Self::check_inputs`].
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => ConfigFile::read(path)?,
            None => ConfigFile::default(),
        };
        let mut cfg = RunConfig::default();

        cfg.out = flags.out.clone().or(file.out).unwrap_or(cfg.out);
        let dyads = flags.dyads.clone().or(file.dyads);
        let countries = flags.countries.clone().or(file.countries);
        cfg.default_inputs = dyads.is_none() && countries.is_none();
        cfg.dyads = dyads.unwrap_or_else(|| cfg.out.join(DATA_DIR).join("dyads.csv"));
        cfg.countries = countries.unwrap_or_else(|| cfg.out.join(DATA_DIR).join("countries.csv"));

        cfg.years = flags.years.clone().or(file.years);
        if let Some(names) = flags.models.as_ref().or(file.models.as_ref()) {
            cfg.models = parse_models(names)?;
        }
        if let Some(names) = &file.covariates {
            cfg.covariates = CovariateSpec::from_names(names).map_err(|e| CliError::Config(e.to_string()))?;
        }
        cfg.replications = flags.replications.or(file.replications).unwrap_or(cfg.replications);
        cfg.seed = flags.seed.or(file.seed).unwrap_or(cfg.seed);
        for (name, t) in file.transforms.unwrap_or_default() {
            let model: ModelTag = name.parse().map_err(|e: gravnet::Error| CliError::Config(e.to_string()))?;
            cfg.transforms.insert(model, t);
        }
        cfg.zero_probability = file.zero_probability.unwrap_or_default();
        cfg.full_correlations = file.full_correlations.unwrap_or(false);

        let synth = file.synth.unwrap_or_default();
        cfg.n_countries = flags.n_countries.or(synth.n_countries).unwrap_or(cfg.n_countries);
        let file_sigma = match synth.noise {
            Some(NoiseSpec::LogNormal { sigma }) => Some(sigma),
            _ => None,
        };
        cfg.noise = match flags.noise {
            Some(NoiseKind::Zip) => NoiseSpec::Zip,
            Some(NoiseKind::Poisson) => NoiseSpec::Poisson,
            Some(NoiseKind::LogNormal) => NoiseSpec::LogNormal {
                sigma: flags.sigma.or(file_sigma).unwrap_or(1.0),
            },
            None => match (synth.noise, flags.sigma) {
                (Some(NoiseSpec::LogNormal { .. }), Some(sigma)) => NoiseSpec::LogNormal { sigma },
                (Some(noise), _) => noise,
                (None, _) => cfg.noise,
            },
        };
        cfg.quiet = flags.quiet;

        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(CliError::Config("replications must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(CliError::Config("no models selected".into()));
        }
        if let Some(years) = &self.years {
            if years.is_empty() {
                return Err(CliError::Config("empty year list".into()));
            }
            let mut sorted = years.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != years.len() {
                return Err(CliError::Config("a year is listed twice".into()));
            }
        }
        if self.n_countries < 5 {
            return Err(CliError::Config(format!("synth needs at least 5 countries, got {}", self.n_countries)));
        }
        if let NoiseSpec::LogNormal { sigma } = self.noise {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(CliError::Config(format!("sigma must be non-negative, got {sigma}")));
            }
        }
        Ok(())
    }

    /// The input CSVs must exist. Missing default inputs mean `synth` has
    /// not been run yet.
    pub fn check_inputs(&self) -> Result<()> {
        for path in [&self.dyads, &self.countries] {
            if !path.is_file() {
                if self.default_inputs {
                    return Err(CliError::Dependency {
                        command: "synth",
                        detail: format!("no input data at {}", path.display()),
                    });
                }
                return Err(CliError::Config(format!("input file {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    pub fn transform(&self, model: ModelTag) -> WeightTransform {
        self.transforms.get(&model).copied().unwrap_or_else(|| default_transform(model))
    }

    pub fn synth_spec(&self) -> SynthSpec {
        let (gamma, theta) = gravnet::synth::default_coefficients(&self.covariates.covariates);
        SynthSpec {
            n_countries: self.n_countries,
            years: self.years.clone().unwrap_or_else(|| SynthSpec::default().years),
            covariates: self.covariates.clone(),
            gamma,
            theta,
            noise: self.noise,
            seed: self.seed,
        }
    }

    /// The settings that determine a command's artifacts, without any
    /// filesystem paths.
    pub fn settings(&self, years: &[i32]) -> serde_json::Value {
        json!({
            "years": years,
            "models": self.models,
            "covariates": self.covariates.column_names(),
            "replications": self.replications,
            "seed": self.seed,
            "transforms": self.models.iter().map(|&m| (m.as_str(), self.transform(m))).collect::<BTreeMap<_, _>>(),
            "zero_probability": self.zero_probability,
            "full_correlations": self.full_correlations,
        })
    }
}

/// Echo of the synth settings, for the manifest.
#[derive(Debug, Serialize)]
pub struct SynthSettings<'a> {
    pub n_countries: usize,
    pub years: &'a [i32],
    pub covariates: Vec<String>,
    pub noise: NoiseSpec,
    pub seed: u64,
}
