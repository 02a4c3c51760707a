use std::io::Write;

use nalgebra::DMatrix;

use super::PredictedWeights;
use crate::error::{Error, Result};

/// Square matrix as CSV: header `country,<ids…>`, one row per country.
pub fn write_dense_csv<W: Write>(countries: &[String], m: &DMatrix<f64>, w: W) -> Result<()> {
    let n = countries.len();
    if m.shape() != (n, n) {
        return Err(Error::Schema(format!("{n} countries but a {:?} matrix", m.shape())));
    }
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["country".to_string()];
    header.extend(countries.iter().cloned());
    wtr.write_record(&header)?;
    for i in 0..n {
        let mut rec = vec![countries[i].clone()];
        rec.extend((0..n).map(|j| m[(i, j)].to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Predicted dyads as `exporter,importer,value,variance`.
pub fn write_long_csv<W: Write>(pred: &PredictedWeights, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["exporter", "importer", "value", "variance"])?;
    for (i, j, v, var) in pred.masked_entries() {
        wtr.write_record([
            pred.countries[i].as_str(),
            pred.countries[j].as_str(),
            &v.to_string(),
            &var.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
