//! CSV reading and writing for `dyads.csv` and `countries.csv`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{CountryRecord, DyadPanel, DyadRecord};
use crate::error::{Error, Result};

pub const DYAD_COLUMNS: [&str; 14] = [
    "exporter",
    "importer",
    "year",
    "flow",
    "distance",
    "contig",
    "comlang_off",
    "comcol",
    "colony",
    "curcol",
    "comrelig",
    "comcur",
    "gsp",
    "rta",
];

pub const COUNTRY_COLUMNS: [&str; 7] = [
    "country",
    "year",
    "gdp",
    "area",
    "population",
    "landlocked",
    "continent",
];

/// Maps canonical column names onto the headers used by a particular file.
/// Columns not mentioned are looked up under their canonical name.
#[derive(Debug, Clone, Default)]
pub struct ColumnMap {
    renames: BTreeMap<String, String>,
}

impl ColumnMap {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn rename(mut self, canonical: &str, header: &str) -> Self {
        self.renames.insert(canonical.to_string(), header.to_string());
        self
    }

    fn header_for<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.renames
            .get(canonical)
            .map(String::as_str)
            .unwrap_or(canonical)
    }

    fn resolve(&self, headers: &csv::StringRecord, wanted: &[&str]) -> Result<Vec<usize>> {
        wanted
            .iter()
            .map(|&name| {
                let header = self.header_for(name);
                headers
                    .iter()
                    .position(|h| h.trim() == header)
                    .ok_or_else(|| Error::Schema(format!("missing column `{header}`")))
            })
            .collect()
    }
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    idx: &'a [usize],
    names: &'a [&'a str],
    line: usize,
}

impl Row<'_> {
    fn raw(&self, k: usize) -> &str {
        self.record.get(self.idx[k]).unwrap_or("").trim()
    }

    fn err(&self, k: usize, what: &str) -> Error {
        Error::validation(
            Some(self.line),
            format!("column `{}`: cannot parse {:?} as {what}", self.names[k], self.raw(k)),
        )
    }

    fn string(&self, k: usize) -> Result<String> {
        let s = self.raw(k);
        if s.is_empty() {
            return Err(self.err(k, "a non-empty identifier"));
        }
        Ok(s.to_string())
    }

    fn real(&self, k: usize) -> Result<f64> {
        self.raw(k).parse::<f64>().map_err(|_| self.err(k, "a number"))
    }

    fn int(&self, k: usize) -> Result<i32> {
        self.raw(k).parse::<i32>().map_err(|_| self.err(k, "an integer"))
    }

    fn flag(&self, k: usize) -> Result<bool> {
        match self.raw(k) {
            "0" | "false" => Ok(false),
            "1" | "true" => Ok(true),
            _ => Err(self.err(k, "a 0/1 flag")),
        }
    }
}

fn read_rows<R: Read>(
    reader: R,
    map: &ColumnMap,
    names: &[&str],
    mut each: impl FnMut(&Row<'_>) -> Result<()>,
) -> Result<usize> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx = map.resolve(&headers, names)?;
    let mut count = 0;
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        // header is line 1
        let line = record.position().map(|p| p.line() as usize).unwrap_or(k + 2);
        each(&Row {
            record: &record,
            idx: &idx,
            names,
            line,
        })?;
        count += 1;
    }
    Ok(count)
}

pub(crate) fn read_dyads<R: Read>(reader: R, map: &ColumnMap) -> Result<Vec<DyadRecord>> {
    let mut out = Vec::new();
    read_rows(reader, map, &DYAD_COLUMNS, |r| {
        let d = DyadRecord {
            exporter: r.string(0)?,
            importer: r.string(1)?,
            year: r.int(2)?,
            flow: r.real(3)?,
            distance: r.real(4)?,
            contig: r.flag(5)?,
            comlang_off: r.flag(6)?,
            comcol: r.flag(7)?,
            colony: r.flag(8)?,
            curcol: r.flag(9)?,
            comrelig: r.real(10)?,
            comcur: r.flag(11)?,
            gsp: r.flag(12)?,
            rta: r.flag(13)?,
        };
        d.validate(Some(r.line))?;
        out.push(d);
        Ok(())
    })?;
    Ok(out)
}

pub(crate) fn read_countries<R: Read>(reader: R, map: &ColumnMap) -> Result<Vec<CountryRecord>> {
    let mut out = Vec::new();
    read_rows(reader, map, &COUNTRY_COLUMNS, |r| {
        let continent = r.int(6)?;
        let continent = u8::try_from(continent).map_err(|_| r.err(6, "a small category code"))?;
        let c = CountryRecord {
            country_id: r.string(0)?,
            year: r.int(1)?,
            gdp: r.real(2)?,
            area: r.real(3)?,
            population: r.real(4)?,
            landlocked: r.flag(5)?,
            continent,
        };
        c.validate(Some(r.line))?;
        out.push(c);
        Ok(())
    })?;
    Ok(out)
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

impl DyadPanel {
    /// Loads `dyads.csv` and `countries.csv` using the canonical headers.
    pub fn load(dyads: impl AsRef<Path>, countries: impl AsRef<Path>) -> Result<Self> {
        Self::load_with(dyads, countries, &ColumnMap::identity(), &ColumnMap::identity())
    }

    pub fn load_with(
        dyads: impl AsRef<Path>,
        countries: impl AsRef<Path>,
        dyad_map: &ColumnMap,
        country_map: &ColumnMap,
    ) -> Result<Self> {
        let open = |p: &Path| {
            std::fs::File::open(p).map_err(|e| {
                Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))
            })
        };
        let d = read_dyads(open(dyads.as_ref())?, dyad_map)?;
        let c = read_countries(open(countries.as_ref())?, country_map)?;
        DyadPanel::new(d, c)
    }

    pub fn from_readers<R1: Read, R2: Read>(dyads: R1, countries: R2) -> Result<Self> {
        let d = read_dyads(dyads, &ColumnMap::identity())?;
        let c = read_countries(countries, &ColumnMap::identity())?;
        DyadPanel::new(d, c)
    }

    pub fn write_dyads<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(DYAD_COLUMNS)?;
        for d in &self.dyads {
            wtr.write_record([
                d.exporter.as_str(),
                d.importer.as_str(),
                &d.year.to_string(),
                &d.flow.to_string(),
                &d.distance.to_string(),
                flag(d.contig),
                flag(d.comlang_off),
                flag(d.comcol),
                flag(d.colony),
                flag(d.curcol),
                &d.comrelig.to_string(),
                flag(d.comcur),
                flag(d.gsp),
                flag(d.rta),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_countries<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(COUNTRY_COLUMNS)?;
        for c in &self.countries {
            wtr.write_record([
                c.country_id.as_str(),
                &c.year.to_string(),
                &c.gdp.to_string(),
                &c.area.to_string(),
                &c.population.to_string(),
                flag(c.landlocked),
                &c.continent.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
