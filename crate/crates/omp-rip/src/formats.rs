//! On-disk formats.
//!
//! Matrices and vectors are CSV: a header line `rows,cols` followed by one
//! line per row. Vectors are written as `n×1`; `1×n` is accepted on read.
//! Lines starting with `#` are ignored. Floats are written in Rust's
//! shortest round-trip form, so a write/read cycle is lossless.
//!
//! JSON output is pretty-printed with object keys sorted.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use omp_rip_core::objective::logistic_objective;
use omp_rip_core::{
    DenseMatrix, DenseVector, LogisticObjective, Objective, OmpResult, SensingProblem,
};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

fn parse_header(record: &csv::StringRecord) -> Result<(usize, usize), String> {
    if record.len() != 2 {
        return Err(format!(
            "header must be `rows,cols`, found {} fields",
            record.len()
        ));
    }
    let dim = |k: usize| {
        record[k]
            .parse::<usize>()
            .map_err(|e| format!("bad dimension {:?}: {e}", &record[k]))
    };
    Ok((dim(0)?, dim(1)?))
}

/// Parses the CSV matrix format from text.
pub fn parse_matrix_csv(text: &str) -> Result<DenseMatrix, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or("empty matrix file")?
        .map_err(|e| e.to_string())?;
    let (rows, cols) = parse_header(&header)?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (i, record) in records.enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        if record.len() != cols {
            return Err(format!(
                "row {i}: expected {cols} values, found {}",
                record.len()
            ));
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|e| format!("row {i}: bad number {field:?}: {e}"))?;
            data.push(v);
        }
        seen += 1;
    }
    if seen != rows {
        return Err(format!("expected {rows} rows, found {seen}"));
    }
    DenseMatrix::new(rows, cols, data).map_err(|e| e.to_string())
}

/// Parses a vector stored as an `n×1` or `1×n` matrix.
pub fn parse_vector_csv(text: &str) -> Result<DenseVector, String> {
    let m = parse_matrix_csv(text)?;
    if m.cols() != 1 && m.rows() != 1 {
        return Err(format!(
            "expected an n x 1 or 1 x n vector, found {} x {}",
            m.rows(),
            m.cols()
        ));
    }
    DenseVector::new(m.into_vec()).map_err(|e| e.to_string())
}

fn read_text(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

pub fn read_matrix_csv(path: &Path) -> AppResult<DenseMatrix> {
    parse_matrix_csv(&read_text(path)?)
        .map_err(|e| AppError::input(format!("{}: {e}", path.display())))
}

pub fn read_vector_csv(path: &Path) -> AppResult<DenseVector> {
    parse_vector_csv(&read_text(path)?)
        .map_err(|e| AppError::input(format!("{}: {e}", path.display())))
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn matrix_to_csv(m: &DenseMatrix) -> String {
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_writer(Vec::new());
    w.write_record([m.rows().to_string(), m.cols().to_string()])
        .expect("in-memory write");
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(|v| fmt_f64(*v)))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn vector_to_csv(v: &[f64]) -> String {
    let m = DenseMatrix::new(v.len(), 1, v.to_vec()).expect("finite vector");
    matrix_to_csv(&m)
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn to_sorted_json<T: Serialize>(value: &T) -> String {
    // serde_json's Map is a BTreeMap unless `preserve_order` is enabled.
    let v = serde_json::to_value(value).expect("serializable value");
    let mut s = serde_json::to_string_pretty(&v).expect("serializable value");
    s.push('\n');
    s
}

/// Writes `contents` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, contents: &str) -> AppResult<()> {
    match path {
        Some(p) => fs::write(p, contents).map_err(|e| AppError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| AppError::io("<stdout>", e))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Quadratic,
    Logistic,
}

/// Problem file contents. Paths are relative to the problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub kind: ProblemKind,
    pub matrix_csv: PathBuf,
    pub observation_csv: PathBuf,
}

pub enum LoadedProblem {
    Quadratic(SensingProblem),
    Logistic(LogisticObjective),
}

impl LoadedProblem {
    pub fn objective(&self) -> &dyn Objective {
        match self {
            LoadedProblem::Quadratic(p) => p,
            LoadedProblem::Logistic(l) => l,
        }
    }
}

pub fn load_problem(path: &Path) -> AppResult<LoadedProblem> {
    let text = read_text(path)?;
    let file: ProblemFile = serde_json::from_str(&text)
        .map_err(|e| AppError::input(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let a = read_matrix_csv(&base.join(&file.matrix_csv))?;
    let y = read_vector_csv(&base.join(&file.observation_csv))?;
    Ok(match file.kind {
        ProblemKind::Quadratic => LoadedProblem::Quadratic(SensingProblem::new(a, y)?),
        ProblemKind::Logistic => LoadedProblem::Logistic(logistic_objective(a, y)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub k: usize,
    pub selected_j: Option<usize>,
    pub objective: f64,
    pub grad_infnorm: f64,
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub k0: usize,
    pub stopped_early: bool,
    pub records: Vec<TraceRecord>,
}

impl From<&OmpResult> for Trace {
    fn from(r: &OmpResult) -> Self {
        let records = (0..r.iterates.len())
            .map(|k| TraceRecord {
                k,
                selected_j: k.checked_sub(1).map(|i| r.selected[i]),
                objective: r.objective_values[k],
                grad_infnorm: r.grad_infnorms[k],
                support: r.supports[k].as_slice().to_vec(),
            })
            .collect();
        Trace {
            k0: r.k0,
            stopped_early: r.stopped_early,
            records,
        }
    }
}
