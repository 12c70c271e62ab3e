//! File formats: survey and truth tables in, result tables out.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use conest::{Dataset, TruthRow};

use crate::error::{CliError, CliResult, RuntimeContext};

pub const SURVEY_HEADER: [&str; 4] = ["dataset_id", "wavelength_nm", "flux", "flux_err"];
pub const TRUTH_HEADER: [&str; 4] = ["dataset_id", "amplitude", "width_nm", "location_nm"];

/// Writes a file in full or not at all: the content goes to a temporary file
/// in the target directory, which is then renamed over the destination.
pub fn write_atomic(
    path: &Path,
    body: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>,
) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).runtime(|| format!("cannot create {}", dir.display()))?;
    let tmp = tempfile::NamedTempFile::new_in(dir)
        .runtime(|| format!("cannot write into {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w).runtime(|| format!("writing {}", path.display()))?;
        w.flush()
            .runtime(|| format!("writing {}", path.display()))?;
    }
    tmp.persist(path)
        .runtime(|| format!("cannot replace {}", path.display()))?;
    Ok(())
}

/// Writes a CSV table atomically.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    write_atomic(path, |w| {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        wtr.write_record(header)?;
        for row in rows {
            wtr.write_record(row)?;
        }
        wtr.flush()?;
        Ok(())
    })
}

/// Shortest decimal representation that parses back to the same value.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn write_survey(path: &Path, datasets: &[Dataset]) -> CliResult<()> {
    let rows = datasets.iter().flat_map(|d| {
        let id = d.id().to_string();
        d.wavelengths()
            .iter()
            .zip(d.flux())
            .zip(d.flux_err())
            .map(move |((w, f), e)| vec![id.clone(), num(*w), num(*f), num(*e)])
    });
    write_csv(path, &SURVEY_HEADER, rows)
}

pub fn write_truth(path: &Path, truth: &[TruthRow]) -> CliResult<()> {
    let rows = truth.iter().map(|t| {
        vec![
            t.dataset_id.to_string(),
            num(t.amplitude),
            num(t.width),
            num(t.location),
        ]
    });
    write_csv(path, &TRUTH_HEADER, rows)
}

fn open_csv(path: &Path, what: &str) -> CliResult<csv::Reader<File>> {
    let file =
        File::open(path).map_err(|e| CliError::Input(anyhow!("{what} {}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file))
}

fn input_err(path: &Path, line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::Input(anyhow!("{}: line {line}: {msg}", path.display()))
}

fn check_header(rdr: &mut csv::Reader<File>, path: &Path, expected: &[&str]) -> CliResult<()> {
    let header = rdr.headers().map_err(|e| input_err(path, 1, e))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(input_err(
            path,
            1,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    Ok(())
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    i: usize,
    name: &str,
    path: &Path,
) -> CliResult<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.trim()
        .parse()
        .map_err(|_| input_err(path, line_of(rec), format!("cannot parse {name} `{raw}`")))
}

fn records(rdr: &mut csv::Reader<File>, path: &Path) -> CliResult<Vec<csv::StringRecord>> {
    rdr.records()
        .map(|r| {
            r.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                input_err(path, line, e)
            })
        })
        .collect()
}

/// Reads a survey file; rows must be sorted by data set id and wavelength.
pub fn read_survey(path: &Path) -> CliResult<Vec<Dataset>> {
    let mut rdr = open_csv(path, "cannot open survey file")?;
    check_header(&mut rdr, path, &SURVEY_HEADER)?;
    let mut datasets = Vec::new();
    let mut current: Option<(u64, u64, Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let finish = |c: (u64, u64, Vec<f64>, Vec<f64>, Vec<f64>)| -> CliResult<Dataset> {
        let (id, line, w, f, e) = c;
        Dataset::new(id, w, f, e)
            .map_err(|err| input_err(path, line, format!("dataset {id}: {err}")))
    };
    for rec in records(&mut rdr, path)? {
        let line = line_of(&rec);
        let id: u64 = field(&rec, 0, "dataset_id", path)?;
        let w: f64 = field(&rec, 1, "wavelength_nm", path)?;
        let f: f64 = field(&rec, 2, "flux", path)?;
        let e: f64 = field(&rec, 3, "flux_err", path)?;
        if !(w.is_finite() && f.is_finite() && e.is_finite()) {
            return Err(input_err(path, line, "non-finite value"));
        }
        if !(e > 0.0) {
            return Err(input_err(
                path,
                line,
                format!("flux_err must be positive, got {e}"),
            ));
        }
        match &mut current {
            Some(c) if c.0 == id => {
                if w <= *c.2.last().expect("non-empty") {
                    return Err(input_err(path, line, "wavelengths not strictly increasing"));
                }
                c.2.push(w);
                c.3.push(f);
                c.4.push(e);
            }
            Some(c) if id < c.0 => {
                return Err(input_err(path, line, "rows not sorted by dataset_id"));
            }
            _ => {
                if let Some(done) = current.take() {
                    datasets.push(finish(done)?);
                }
                current = Some((id, line, vec![w], vec![f], vec![e]));
            }
        }
    }
    if let Some(done) = current.take() {
        datasets.push(finish(done)?);
    }
    if datasets.is_empty() {
        return Err(CliError::Input(anyhow!("{}: no data rows", path.display())));
    }
    Ok(datasets)
}

pub fn read_truth(path: &Path) -> CliResult<Vec<TruthRow>> {
    let mut rdr = open_csv(path, "cannot open truth file")?;
    check_header(&mut rdr, path, &TRUTH_HEADER)?;
    records(&mut rdr, path)?
        .iter()
        .map(|rec| {
            Ok(TruthRow {
                dataset_id: field(rec, 0, "dataset_id", path)?,
                amplitude: field(rec, 1, "amplitude", path)?,
                width: field(rec, 2, "width_nm", path)?,
                location: field(rec, 3, "location_nm", path)?,
            })
        })
        .collect()
}

/// A CSV file read into named float columns.
pub struct Table {
    pub columns: HashMap<String, Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> anyhow::Result<&[f64]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .with_context(|| format!("missing column `{name}`"))
    }
}

/// Reads a numeric CSV with the given required columns.
pub fn read_table(path: &Path, what: &str, required: &[&str]) -> CliResult<Table> {
    let mut rdr = open_csv(path, &format!("missing {what}"))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| input_err(path, 1, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    for r in required {
        if !header.iter().any(|h| h == r) {
            return Err(input_err(path, 1, format!("missing column `{r}`")));
        }
    }
    let mut columns: HashMap<String, Vec<f64>> =
        header.iter().map(|h| (h.clone(), Vec::new())).collect();
    let recs = records(&mut rdr, path)?;
    for rec in &recs {
        for (i, h) in header.iter().enumerate() {
            let v: f64 = field(rec, i, h, path)?;
            columns.get_mut(h).expect("column exists").push(v);
        }
    }
    Ok(Table { columns })
}
