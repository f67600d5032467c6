//! File formats and error reporting shared by the subcommands.
//!
//! Matrices are headered, comma-separated, row-major UTF-8 text with `.` as
//! the decimal separator. Floats are written in Rust's shortest round-trip
//! form, so reading a file back reproduces the values exactly.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use baggls::model::{BinaryResponse, DesignMatrix, EffectColumn, EffectKind, IndicatorMatrix};
use nalgebra::DMatrix;
use serde::Serialize;

/// Version stamped into every JSON output.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<baggls::Error> for CliError {
    fn from(e: baggls::Error) -> Self {
        match e {
            baggls::Error::Numerical { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Prefixes a library error with the file it came from.
pub fn in_file(path: &Path) -> impl Fn(baggls::Error) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

pub fn open(path: &Path) -> CliResult<std::io::BufReader<File>> {
    File::open(path).map(std::io::BufReader::new).map_err(|e| io_error(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes a header row followed by one row per record.
pub fn write_csv<I, R>(path: &Path, header: &[String], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header).map_err(|e| io_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn write_matrix(path: &Path, header: &[String], values: &DMatrix<f64>) -> CliResult<()> {
    write_csv(path, header, values.row_iter().map(|r| r.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>()))
}

pub fn write_design(dir: &Path, design: &DesignMatrix, indicator: &IndicatorMatrix, feature_names: &[String]) -> CliResult<()> {
    write_matrix(&dir.join("design.csv"), &design.labels(), design.values())?;
    let mut header = vec!["effect".to_string(), "center".to_string(), "scale".to_string()];
    header.extend(feature_names.iter().cloned());
    let dense = indicator.to_dense();
    let rows = design.columns().iter().enumerate().map(|(j, c)| {
        let mut row = vec![c.label.clone(), fmt_f64(c.center), fmt_f64(c.scale)];
        row.extend(dense.row(j).iter().map(|v| v.to_string()));
        row
    });
    write_csv(&dir.join("indicator.csv"), &header, rows)
}

pub fn write_response(path: &Path, response: &BinaryResponse) -> CliResult<()> {
    write_csv(
        path,
        &["y".to_string()],
        response.labels().iter().map(|&y| vec![u8::from(y).to_string()]),
    )
}

struct Table {
    header: Vec<String>,
    /// `(line number, fields)`.
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table(path: &Path) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(open(path)?);
    let header = reader
        .headers()
        .map_err(|e| io_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| io_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record.iter().map(|f| f.trim().to_string()).collect()));
    }
    Ok(Table { header, rows })
}

fn parse_number(path: &Path, line: u64, field: &str) -> CliResult<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::Data(format!(
            "{} line {line}: {field:?} is not a finite number",
            path.display()
        ))),
    }
}

/// Reads a numeric matrix with a header row of column labels.
pub fn read_matrix(path: &Path) -> CliResult<(Vec<String>, DMatrix<f64>)> {
    let table = read_table(path)?;
    let p = table.header.len();
    let mut values = DMatrix::zeros(table.rows.len(), p);
    for (i, (line, fields)) in table.rows.iter().enumerate() {
        for (j, field) in fields.iter().enumerate() {
            values[(i, j)] = parse_number(path, *line, field)?;
        }
    }
    Ok((table.header, values))
}

pub fn read_response(path: &Path) -> CliResult<BinaryResponse> {
    let table = read_table(path)?;
    if table.header.len() != 1 {
        return Err(CliError::Data(format!(
            "{}: expected a single column, found {}",
            path.display(),
            table.header.len()
        )));
    }
    let mut labels = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        labels.push(match fields[0].as_str() {
            "0" => false,
            "1" => true,
            other => {
                return Err(CliError::Data(format!(
                    "{} line {line}: response {other:?} is not 0 or 1",
                    path.display()
                )))
            }
        });
    }
    Ok(BinaryResponse::from_bools(labels))
}

/// Paths of the three files that describe a model input.
pub struct DesignFiles {
    pub design: PathBuf,
    pub indicator: PathBuf,
    pub response: PathBuf,
}

/// Reads a design, its indicator and the response, and checks that all
/// three agree.
pub fn read_design(files: &DesignFiles) -> CliResult<(DesignMatrix, IndicatorMatrix, BinaryResponse)> {
    let (labels, values) = read_matrix(&files.design)?;
    let path = files.indicator.as_path();
    let table = read_table(path)?;
    if table.header.len() < 3 || table.header[..3] != ["effect", "center", "scale"] {
        return Err(CliError::Data(format!(
            "{}: header must start with effect,center,scale",
            path.display()
        )));
    }
    let d = table.header.len() - 3;
    let mut columns = Vec::with_capacity(table.rows.len());
    let mut entries = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        let row: Vec<u8> = fields[3..]
            .iter()
            .map(|f| match f.as_str() {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(CliError::Data(format!(
                    "{} line {line}: indicator entry {other:?} is not 0 or 1",
                    path.display()
                ))),
            })
            .collect::<CliResult<_>>()?;
        let members: Vec<usize> = (0..d).filter(|&l| row[l] == 1).collect();
        let kind = match members.as_slice() {
            [] => EffectKind::Intercept,
            [l] => EffectKind::Linear(*l),
            [a, b] => EffectKind::Interaction(*a, *b),
            _ => {
                return Err(CliError::Data(format!(
                    "{} line {line}: an effect may involve at most two features",
                    path.display()
                )))
            }
        };
        columns.push(EffectColumn {
            kind,
            label: fields[0].clone(),
            center: parse_number(path, *line, &fields[1])?,
            scale: parse_number(path, *line, &fields[2])?,
        });
        entries.push(row);
    }
    if columns.len() != labels.len() {
        return Err(CliError::Data(format!(
            "{} has {} columns but {} has {} effect rows",
            files.design.display(),
            labels.len(),
            path.display(),
            columns.len()
        )));
    }
    if let Some((a, b)) = labels.iter().zip(&columns).find(|(a, b)| **a != b.label) {
        return Err(CliError::Data(format!(
            "design column {a:?} does not match indicator effect {:?}",
            b.label
        )));
    }
    let indicator = IndicatorMatrix::from_dense(&entries, &columns).map_err(in_file(path))?;
    let design = DesignMatrix::new(values, columns).map_err(in_file(&files.design))?;
    let response = read_response(&files.response)?;
    if response.len() != design.n() {
        return Err(CliError::Data(format!(
            "{} has {} rows but {} has {}",
            files.design.display(),
            design.n(),
            files.response.display(),
            response.len()
        )));
    }
    Ok((design, indicator, response))
}
