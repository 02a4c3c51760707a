use gravnet::glm::vuong_test;
use gravnet::panel::{summary_stats, write_summary_csv};
use gravnet::{fit_logit, fit_ols, fit_poisson_pml, fit_zip, FitResult, ModelTag, ZipConfig};

use super::{cell_dir, cells, load_inputs, par_cells, year_data, Fit, YearData};
use crate::artifacts::{Logger, Outputs};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

fn fit_cell(yd: &YearData, model: ModelTag) -> gravnet::Result<Fit> {
    Ok(match model {
        ModelTag::Ols => Fit::Glm(fit_ols(yd.positive())?),
        ModelTag::Ppml => Fit::Glm(fit_poisson_pml(yd.full())?),
        ModelTag::Logit => Fit::Glm(fit_logit(yd.full(), &yd.full().presence())?),
        ModelTag::Zip => {
            let mut zip = fit_zip(yd.full(), &ZipConfig::default())?;
            // The Vuong statistic is informative only; a PPML that fails
            // or a degenerate comparison leaves it empty.
            if let Ok(ppml) = fit_poisson_pml(yd.full()) {
                zip.vuong = vuong_test(&zip, &ppml, yd.full()).ok();
            }
            Fit::Zip(Box::new(zip))
        }
    })
}

fn describe(fit: &Fit) -> String {
    match fit {
        Fit::Glm(f) => format!(
            "n={} loglik={:.4} r2={:.4} iterations={}",
            f.diagnostics.n_obs, f.diagnostics.loglik, f.diagnostics.r2, f.diagnostics.iterations
        ),
        Fit::Zip(z) => format!(
            "n={} loglik={:.4} pseudo_r2={:.4} em={} polish={}",
            z.n_obs, z.loglik, z.pseudo_r2, z.em_iterations, z.polish_iterations
        ),
    }
}

/// Coefficient table with one estimate and standard-error column per
/// equation, followed by the fit diagnostics.
fn coefficient_table(fits: &[(ModelTag, &Fit)]) -> Result<Vec<u8>> {
    let mut columns: Vec<(String, &FitResult)> = Vec::new();
    // (n_obs, r2, loglik, vuong) per equation column
    let mut diagnostics: Vec<[String; 4]> = Vec::new();
    for (model, fit) in fits {
        match fit {
            Fit::Glm(f) => {
                columns.push((model.to_string(), f));
                let d = &f.diagnostics;
                diagnostics.push([d.n_obs.to_string(), d.r2.to_string(), d.loglik.to_string(), String::new()]);
            }
            Fit::Zip(z) => {
                columns.push(("ZIP_inflate".into(), &z.logit_part));
                columns.push(("ZIP".into(), &z.poisson_part));
                diagnostics.push(Default::default());
                let vuong = z.vuong.as_ref().map(|v| v.statistic.to_string()).unwrap_or_default();
                diagnostics.push([z.n_obs.to_string(), z.pseudo_r2.to_string(), z.loglik.to_string(), vuong]);
            }
        }
    }
    let mut wtr = csv_writer();
    let mut header = vec!["variable".to_string()];
    for (name, _) in &columns {
        header.push(name.clone());
        header.push(format!("{name}_se"));
    }
    wtr.write_record(&header).map_err(csv_err)?;
    let names: Vec<&str> = columns
        .first()
        .map(|(_, f)| f.coefficients.iter().map(|c| c.name.as_str()).collect())
        .unwrap_or_default();
    for (k, name) in names.iter().enumerate() {
        let mut row = vec![name.to_string()];
        for (_, f) in &columns {
            let c = &f.coefficients[k];
            row.push(c.estimate.to_string());
            row.push(c.std_error.to_string());
        }
        wtr.write_record(&row).map_err(csv_err)?;
    }
    for (k, label) in ["n_obs", "r2", "loglik", "vuong"].iter().enumerate() {
        let mut row = vec![label.to_string()];
        for d in &diagnostics {
            row.push(d[k].clone());
            row.push(String::new());
        }
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.into_inner().map_err(|e| csv_err(e.into_error().into()))
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Core {
        context: "writing the coefficient table".into(),
        source: e.into(),
    }
}

/// One `fit.json` per (year, model), `<year>/coefficients.csv` and the
/// panel summary `summary.csv`.
pub fn fit(cfg: &RunConfig) -> Result<Vec<String>> {
    let log = Logger::new(&cfg.out, "fit", cfg.quiet);
    let inputs = load_inputs(cfg)?;
    log.stage("load", format!("{} dyads, years {:?}", inputs.panel.dyads.len(), inputs.years));
    let years = year_data(cfg, &inputs)?;
    let cells = cells(cfg, &inputs.years);

    let fits = par_cells(&cells, |y, m| fit_cell(&years[&y], m).map_err(CliError::core(format!("fit {y}/{m}"))))?;

    let mut out = Outputs::new("fit");
    for (&(y, m), fit) in cells.iter().zip(&fits) {
        log.stage(&format!("{y}/{m}"), describe(fit));
        out.json(format!("{}/fit.json", cell_dir(y, m)), fit)?;
    }
    for &y in &inputs.years {
        let row: Vec<(ModelTag, &Fit)> = cells
            .iter()
            .zip(&fits)
            .filter(|((yy, _), _)| *yy == y)
            .map(|(&(_, m), f)| (m, f))
            .collect();
        out.add(format!("{y}/coefficients.csv"), coefficient_table(&row)?);
    }
    let summaries = years
        .iter()
        .map(|(y, yd)| summary_stats(&yd.cs).map_err(CliError::core(format!("summary {y}"))))
        .collect::<Result<Vec<_>>>()?;
    out.render("summary.csv", "writing summary.csv", |w| write_summary_csv(&summaries, w))?;

    let written = out.commit(&cfg.out, cfg.settings(&inputs.years))?;
    log.stage("write", format!("{} files", written.len()));
    Ok(written)
}
