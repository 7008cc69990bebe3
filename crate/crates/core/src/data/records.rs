use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of a campaign log: time stamp, spend and observed sales or share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignRecord {
    pub t: f64,
    pub budget: f64,
    pub response: f64,
}

/// Column names for the three record fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub t: String,
    pub budget: String,
    pub response: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            t: "t".into(),
            budget: "budget".into(),
            response: "response".into(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Vec<CampaignRecord>> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::Input {
        path: label.clone(),
        message: e.to_string(),
    })?;
    read_csv(file, schema, &label)
}

/// Parses records from any reader. `label` names the source in errors.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema, label: &str) -> Result<Vec<CampaignRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let csv_err = |line: u64, message: String| Error::Csv {
        path: label.to_string(),
        line,
        message,
    };
    let headers = rdr
        .headers()
        .map_err(|e| csv_err(e.position().map_or(1, |p| p.line()), e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Input {
            path: label.to_string(),
            message: format!("missing column `{name}` (header: {})", headers.iter().collect::<Vec<_>>().join(",")),
        })
    };
    let cols = [column(&schema.t)?, column(&schema.budget)?, column(&schema.response)?];
    let names = [schema.t.as_str(), schema.budget.as_str(), schema.response.as_str()];

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        let mut vals = [0.0; 3];
        for ((v, &c), name) in vals.iter_mut().zip(&cols).zip(names) {
            let cell = row.get(c).unwrap_or("");
            *v = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| csv_err(line, format!("column `{name}`: `{cell}` is not a finite number")))?;
        }
        let [t, budget, response] = vals;
        if budget < 0.0 {
            return Err(csv_err(line, format!("negative budget {budget}")));
        }
        if response < 0.0 {
            return Err(csv_err(line, format!("negative response {response}")));
        }
        out.push(CampaignRecord { t, budget, response });
    }
    if out.is_empty() {
        return Err(Error::Input {
            path: label.to_string(),
            message: "no data rows".into(),
        });
    }
    Ok(out)
}

/// Shortest decimal form that parses back to the same `f64` (at most 17
/// significant digits), switching to exponent notation for very large or
/// small magnitudes.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_records<W: Write>(mut out: W, records: &[CampaignRecord]) -> Result<()> {
    writeln!(out, "t,budget,response")?;
    for r in records {
        writeln!(
            out,
            "{},{},{}",
            format_float(r.t),
            format_float(r.budget),
            format_float(r.response)
        )?;
    }
    Ok(())
}

pub fn write_csv(path: impl AsRef<Path>, records: &[CampaignRecord]) -> Result<()> {
    let mut buf = Vec::new();
    write_records(&mut buf, records)?;
    std::fs::write(path, buf)?;
    Ok(())
}
