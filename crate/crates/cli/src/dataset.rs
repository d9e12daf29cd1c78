//! CSV ingestion and export.

use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use stiefel_mvn::Sample;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    /// Zero-based position.
    Index(usize),
}

impl ColumnRef {
    pub fn parse(s: &str) -> Self {
        let s = s.trim();
        match s.parse::<usize>() {
            Ok(i) => Self::Index(i),
            Err(_) => Self::Name(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub path: PathBuf,
    pub has_header: bool,
    /// `None` selects every column that is numeric in the first data row.
    pub columns: Option<Vec<ColumnRef>>,
}

impl DatasetFile {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            has_header: true,
            columns: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: row {row}, column {column}: cannot parse {value:?} as a finite number", path.display())]
    Parse {
        path: PathBuf,
        /// Line number in the file, counting the header.
        row: u64,
        column: String,
        value: String,
    },
    #[error("{}: malformed CSV: {message}", path.display())]
    Malformed { path: PathBuf, message: String },
    #[error("{}: no data rows", path.display())]
    EmptyDataset { path: PathBuf },
    #[error("{}: unknown column {column}", path.display())]
    UnknownColumn { path: PathBuf, column: String },
    #[error("{}: no numeric columns in the first data row", path.display())]
    NoNumericColumns { path: PathBuf },
    #[error("{}: invalid sample", path.display())]
    Sample {
        path: PathBuf,
        #[source]
        source: stiefel_mvn::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sample: Sample,
    /// Names of the selected columns (`#i` when the file has no header).
    pub columns: Vec<String>,
}

fn parse_value(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn load_csv(spec: &DatasetFile) -> Result<Dataset, DatasetError> {
    let path = spec.path.clone();
    let file = File::open(&path).map_err(|source| DatasetError::Io {
        path: path.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(spec.has_header)
        .trim(csv::Trim::All)
        .from_reader(file);
    let csv_error = |e: csv::Error, path: &Path| match e.into_kind() {
        csv::ErrorKind::Io(source) => DatasetError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => DatasetError::Malformed {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    };

    let header: Option<Vec<String>> = if spec.has_header {
        Some(
            reader
                .headers()
                .map_err(|e| csv_error(e, &path))?
                .iter()
                .map(str::to_string)
                .collect(),
        )
    } else {
        None
    };
    let records: Vec<csv::StringRecord> = reader
        .records()
        .collect::<Result<_, _>>()
        .map_err(|e| csv_error(e, &path))?;
    let first = records
        .first()
        .ok_or_else(|| DatasetError::EmptyDataset { path: path.clone() })?;
    let width = first.len();
    let name_of = |i: usize| {
        header
            .as_ref()
            .and_then(|h| h.get(i).cloned())
            .unwrap_or_else(|| format!("#{i}"))
    };

    let selected: Vec<usize> = match &spec.columns {
        Some(cols) => cols
            .iter()
            .map(|c| {
                let found = match c {
                    ColumnRef::Index(i) => (*i < width).then_some(*i),
                    ColumnRef::Name(n) => header.as_ref().and_then(|h| h.iter().position(|x| x == n)),
                };
                found.ok_or_else(|| DatasetError::UnknownColumn {
                    path: path.clone(),
                    column: match c {
                        ColumnRef::Index(i) => i.to_string(),
                        ColumnRef::Name(n) => n.clone(),
                    },
                })
            })
            .collect::<Result<_, _>>()?,
        None => (0..width).filter(|&i| parse_value(&first[i]).is_some()).collect(),
    };
    if selected.is_empty() {
        return Err(DatasetError::NoNumericColumns { path });
    }

    let mut rows = Vec::with_capacity(records.len());
    for record in &records {
        let line = record.position().map_or(0, |p| p.line());
        let row = selected
            .iter()
            .map(|&j| {
                let raw = record.get(j).unwrap_or("");
                parse_value(raw).ok_or_else(|| DatasetError::Parse {
                    path: path.clone(),
                    row: line,
                    column: name_of(j),
                    value: raw.to_string(),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    let sample = Sample::from_rows(&rows).map_err(|source| DatasetError::Sample {
        path: path.clone(),
        source,
    })?;
    Ok(Dataset {
        sample,
        columns: selected.into_iter().map(name_of).collect(),
    })
}

/// CSV text for `sample` with 17 significant digits per value, so that
/// [`load_csv`] reproduces it bit for bit.
pub fn to_csv(sample: &Sample, columns: &[String]) -> String {
    let mut out = String::new();
    out.push_str(&columns.join(","));
    out.push('\n');
    let x = sample.data();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.16e}", x[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, sample: &Sample, columns: &[String]) -> std::io::Result<()> {
    std::fs::write(path, to_csv(sample, columns))
}
