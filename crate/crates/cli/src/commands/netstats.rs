use gravnet::netstats::{
    population_average, write_node_stats_csv, NodeStatKind, NodeStats, TradeNetwork, WeightTransform,
};
use gravnet::ModelTag;

use super::{cell_dir, cells, load_inputs, load_predictions, par_cells, year_data};
use crate::artifacts::{Logger, Manifest, Outputs};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

fn stats(net: &TradeNetwork, model: Option<ModelTag>) -> NodeStats {
    match model {
        Some(ModelTag::Logit) => NodeStats::compute_kinds(net, &NodeStatKind::binary()),
        _ => NodeStats::compute(net),
    }
}

fn averages_rows(network: &str, s: &NodeStats, rows: &mut Vec<[String; 5]>) {
    for v in s.clone().into_vec() {
        let (mean, defined, excluded) = match population_average(&v) {
            Ok(a) => (a.mean.to_string(), a.n_defined, a.n_excluded),
            Err(_) => (String::new(), 0, v.values.len()),
        };
        rows.push([network.to_string(), v.kind.name().to_string(), mean, defined.to_string(), excluded.to_string()]);
    }
}

/// Node statistics of the observed networks (levels and logs) and of every
/// model's point prediction, plus population averages per year.
pub fn netstats(cfg: &RunConfig) -> Result<Vec<String>> {
    let log = Logger::new(&cfg.out, "netstats", cfg.quiet);
    let manifest = Manifest::load(&cfg.out)?;
    let inputs = load_inputs(cfg)?;
    let cells = cells(cfg, &inputs.years);
    let years = year_data(cfg, &inputs)?;
    let preds = load_predictions(cfg, &manifest, &years, &cells)?;

    let observed = inputs
        .years
        .iter()
        .map(|&y| {
            let cs = &years[&y].cs;
            let ctx = format!("netstats {y}");
            let levels = TradeNetwork::from_cross_section(cs, WeightTransform::Identity).map_err(CliError::core(&ctx))?;
            let logs = TradeNetwork::from_cross_section(cs, WeightTransform::LogPositive).map_err(CliError::core(&ctx))?;
            Ok((stats(&levels, None), stats(&logs, None)))
        })
        .collect::<Result<Vec<_>>>()?;
    let predicted = par_cells(&cells, |y, m| {
        let k = cells.iter().position(|c| *c == (y, m)).expect("cell listed");
        let net = preds[k]
            .network(cfg.transform(m))
            .map_err(CliError::core(format!("netstats {y}/{m}")))?;
        Ok(stats(&net, Some(m)))
    })?;

    let mut out = Outputs::new("netstats");
    for (&y, (levels, logs)) in inputs.years.iter().zip(&observed) {
        let ids = years[&y].cs.country_ids();
        let ctx = format!("netstats {y}");
        out.render(format!("{y}/observed_stats.csv"), &ctx, |w| {
            write_node_stats_csv(&ids, &levels.clone().into_vec(), w)
        })?;
        out.render(format!("{y}/observed_log_stats.csv"), &ctx, |w| {
            write_node_stats_csv(&ids, &logs.clone().into_vec(), w)
        })?;

        let mut rows = Vec::new();
        averages_rows("observed", levels, &mut rows);
        averages_rows("observed_log", logs, &mut rows);
        for (&(yy, m), s) in cells.iter().zip(&predicted) {
            if yy != y {
                continue;
            }
            let dir = cell_dir(y, m);
            out.render(format!("{dir}/predicted_stats.csv"), &ctx, |w| {
                write_node_stats_csv(&ids, &s.clone().into_vec(), w)
            })?;
            averages_rows(m.as_str(), s, &mut rows);
        }
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let header = ["network", "statistic", "average", "n_defined", "n_excluded"];
        let table = std::iter::once(header.map(String::from)).chain(rows);
        let mut buf = Vec::new();
        for row in table {
            wtr.write_record(&row).map_err(|e| CliError::core(&ctx)(e.into()))?;
        }
        buf.extend(wtr.into_inner().map_err(|e| CliError::core(&ctx)(e.into_error().into()))?);
        out.add(format!("{y}/averages.csv"), buf);
        log.stage(&y.to_string(), format!("{} networks", 2 + cfg.models.len()));
    }
    let written = out.commit(&cfg.out, cfg.settings(&inputs.years))?;
    log.stage("write", format!("{} files", written.len()));
    Ok(written)
}
