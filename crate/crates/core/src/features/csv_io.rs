use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, Sample, N_PREDICTORS, PREDICTOR_NAMES, TARGET_NAME};
use crate::error::{Error, Result};

const TAG_NAMES: [&str; 2] = ["site_id", "time_id"];

fn expected_header(tagged: bool) -> Vec<&'static str> {
    let mut h = vec![TARGET_NAME];
    h.extend(PREDICTOR_NAMES);
    if tagged {
        h.extend(TAG_NAMES);
    }
    h
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    read_csv(file).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses `target,pr_p1..pr_p4,pr_i1..pr_i4,elevation[,site_id,time_id]`.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Data(format!("unreadable header: {e}")))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let tagged = names.len() == 1 + N_PREDICTORS + TAG_NAMES.len();
    if names != expected_header(tagged) {
        return Err(Error::Data(format!(
            "header must be `{}` (optionally followed by `,site_id,time_id`), got `{}`",
            expected_header(false).join(","),
            names.join(",")
        )));
    }

    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Data(format!("row {row}: {e}")))?;
        if record.len() != names.len() {
            return Err(Error::Data(format!(
                "row {row}: expected {} fields, found {}",
                names.len(),
                record.len()
            )));
        }
        let parse = |j: usize| -> Result<f64> {
            let cell = record[j].trim();
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Data(format!("row {row}, column `{}`: `{cell}` is not a number", names[j])))?;
            if !v.is_finite() {
                return Err(Error::Data(format!("row {row}, column `{}`: non-finite value", names[j])));
            }
            Ok(v)
        };
        let target = parse(0)?;
        if target < 0.0 {
            return Err(Error::Data(format!("row {row}: target must be non-negative, got {target}")));
        }
        let mut predictors = [0.0; N_PREDICTORS];
        for (j, p) in predictors.iter_mut().enumerate() {
            *p = parse(j + 1)?;
        }
        let mut sample = Sample::new(target, predictors);
        if tagged {
            sample.site_id = Some(record[1 + N_PREDICTORS].to_string());
            sample.time_id = Some(record[2 + N_PREDICTORS].to_string());
        }
        samples.push(sample);
    }
    Dataset::from_samples(samples)
}

pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_csv_to(d, std::io::BufWriter::new(file))
}

/// Floats are written with Rust's shortest round-trip representation.
pub fn write_csv_to<W: Write>(d: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let csv_err = |e: csv::Error| Error::Data(format!("csv write: {e}"));
    wtr.write_record(expected_header(d.has_tags())).map_err(csv_err)?;
    for s in d.samples() {
        let mut record: Vec<String> = Vec::with_capacity(12);
        record.push(format!("{:?}", s.target));
        record.extend(s.predictors.iter().map(|v| format!("{v:?}")));
        if d.has_tags() {
            record.push(s.site_id.unwrap_or_default());
            record.push(s.time_id.unwrap_or_default());
        }
        wtr.write_record(&record).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}
