use gravnet::synth::generate;

use crate::artifacts::{Logger, Outputs};
use crate::config::{RunConfig, SynthSettings, DATA_DIR};
use crate::error::{CliError, Result};

/// Writes `data/dyads.csv`, `data/countries.csv` and `data/truth.json`.
pub fn synth(cfg: &RunConfig) -> Result<Vec<String>> {
    let log = Logger::new(&cfg.out, "synth", cfg.quiet);
    let spec = cfg.synth_spec();
    let (panel, truth) = generate(&spec).map_err(CliError::core("synth"))?;
    log.stage(
        "generate",
        format!(
            "{} countries, {} years, {} dyads, seed {}",
            spec.n_countries,
            spec.years.len(),
            panel.dyads.len(),
            spec.seed
        ),
    );

    let mut out = Outputs::new("synth");
    out.render(format!("{DATA_DIR}/dyads.csv"), "writing dyads", |w| panel.write_dyads(w))?;
    out.render(format!("{DATA_DIR}/countries.csv"), "writing countries", |w| panel.write_countries(w))?;
    out.json(format!("{DATA_DIR}/truth.json"), &truth)?;
    let settings = SynthSettings {
        n_countries: spec.n_countries,
        years: &spec.years,
        covariates: spec.covariates.column_names(),
        noise: spec.noise,
        seed: spec.seed,
    };
    let written = out.commit(&cfg.out, serde_json::to_value(settings).expect("settings serialize"))?;
    log.stage("write", format!("{} files", written.len()));
    Ok(written)
}
