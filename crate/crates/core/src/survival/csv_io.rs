use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{Family, SurvivalDataset};
use crate::error::{Error, Result};

/// Loads a dataset from a CSV file with header `time,status,x1..xp[,z]`.
pub fn load_csv(path: impl AsRef<Path>, family: Family) -> Result<SurvivalDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, family)
}

pub fn read_csv(reader: impl Read, family: Family) -> Result<SurvivalDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("header: {e}")))?
        .clone();
    let col = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let time_col = col("time").ok_or_else(|| Error::Parse("missing column `time`".into()))?;
    let status_col = col("status").ok_or_else(|| Error::Parse("missing column `status`".into()))?;
    let mut x_cols = Vec::new();
    while let Some(c) = col(&format!("x{}", x_cols.len() + 1)) {
        x_cols.push(c);
    }
    if x_cols.is_empty() {
        return Err(Error::Parse("missing covariate columns `x1..xp`".into()));
    }
    let z_col = col("z");
    if family == Family::IndexVc && z_col.is_none() {
        return Err(Error::Parse("missing column `z` required by index-vc family".into()));
    }

    let p = x_cols.len();
    let mut times = Vec::new();
    let mut status = Vec::new();
    let mut xs = Vec::new();
    let mut zs = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        let cell = |c: usize, name: &str| -> Result<f64> {
            let raw = record
                .get(c)
                .ok_or_else(|| Error::Parse(format!("row {row}: missing column {name}")))?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse(format!("row {row}, column {name}: `{raw}` is not a number")))
        };
        let t = cell(time_col, "time")?;
        if t <= 0.0 {
            return Err(Error::Parse(format!("row {row}: time must be positive")));
        }
        let d = cell(status_col, "status")?;
        let d = match d {
            v if v == 0.0 => false,
            v if v == 1.0 => true,
            _ => return Err(Error::Parse(format!("row {row}: status must be 0 or 1"))),
        };
        times.push(t);
        status.push(d);
        for (j, &c) in x_cols.iter().enumerate() {
            xs.push(cell(c, &format!("x{}", j + 1))?);
        }
        if let Some(c) = z_col {
            zs.push(cell(c, "z")?);
        }
    }
    let n = times.len();
    let covariates = Array2::from_shape_vec((n, p), xs).map_err(|e| Error::Parse(e.to_string()))?;
    let index = z_col.map(|_| zs);
    SurvivalDataset::new(times, status, covariates, index, family)
}

/// Writes the dataset in the same schema `load_csv` reads.
pub fn write_csv(data: &SurvivalDataset, mut out: impl Write) -> std::io::Result<()> {
    let p = data.p();
    let mut header = vec!["time".to_string(), "status".to_string()];
    header.extend((1..=p).map(|j| format!("x{j}")));
    if data.index().is_some() {
        header.push("z".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for i in 0..data.n() {
        let mut fields = vec![
            format!("{}", data.times()[i]),
            format!("{}", u8::from(data.status()[i])),
        ];
        fields.extend(data.covariates().row(i).iter().map(|v| format!("{v}")));
        if let Some(z) = data.index() {
            fields.push(format!("{}", z[i]));
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
