//! CSV input: a header row with a numeric `value` column and an optional
//! `date` column that is carried through to reports.

use std::path::{Path, PathBuf};

use ecfmon::Series;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub path: PathBuf,
    pub values: Vec<f64>,
    pub dates: Option<Vec<String>>,
}

impl Observations {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn date(&self, i: usize) -> Option<&str> {
        self.dates.as_ref().and_then(|d| d.get(i)).map(String::as_str)
    }

    /// Appends a follow-on file. Dates are kept only if both files have them.
    pub fn extend(&mut self, other: Observations) {
        self.dates = match (self.dates.take(), other.dates) {
            (Some(mut a), Some(b)) => {
                a.extend(b);
                Some(a)
            }
            _ => None,
        };
        self.values.extend(other.values);
    }
}

/// Reads `value` (and `date`, if present) from a headed CSV file. Blank
/// cells, non-numeric cells and non-finite numbers are errors that name the
/// offending line.
pub fn read_csv(path: &Path) -> CliResult<Observations> {
    let file = std::fs::File::open(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let input_err = |msg: String| CliError::Input {
        path: path.to_owned(),
        msg,
    };
    let headers = reader.headers().map_err(|e| input_err(e.to_string()))?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(input_err("empty file: expected a header row with a `value` column".into()));
    }
    let value_col = headers
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| input_err("missing required `value` column".into()))?;
    let date_col = headers.iter().position(|h| h == "date");

    let mut values = Vec::new();
    let mut dates = date_col.map(|_| Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Parse {
                path: path.to_owned(),
                line,
                msg: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |msg: String| CliError::Parse {
            path: path.to_owned(),
            line,
            msg,
        };
        let cell = record.get(value_col).unwrap_or("");
        let x: f64 = cell.parse().map_err(|_| parse_err(format!("`{cell}` is not a number")))?;
        if !x.is_finite() {
            return Err(parse_err(format!("non-finite value `{cell}`")));
        }
        values.push(x);
        if let (Some(col), Some(d)) = (date_col, dates.as_mut()) {
            d.push(record.get(col).unwrap_or("").to_owned());
        }
    }
    if values.is_empty() {
        return Err(input_err("no data rows".into()));
    }
    Ok(Observations {
        path: path.to_owned(),
        values,
        dates,
    })
}

/// How the training segment is delimited.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainSplit {
    Len(usize),
    /// Last training date, inclusive. ISO-8601 dates compare as strings.
    EndDate(String),
}

pub fn training_len(obs: &Observations, split: &TrainSplit) -> CliResult<usize> {
    let t = match split {
        TrainSplit::Len(t) => *t,
        TrainSplit::EndDate(end) => {
            let dates = obs.dates.as_ref().ok_or_else(|| CliError::Config(format!(
                "--train-end-date needs a `date` column in {}",
                obs.path.display()
            )))?;
            dates.iter().take_while(|d| d.as_str() <= end.as_str()).count()
        }
    };
    if t == 0 || t > obs.len() {
        return Err(CliError::Config(format!(
            "training length {t} out of range for {} observations",
            obs.len()
        )));
    }
    Ok(t)
}

/// Reads a file and splits it into training and monitoring parts.
pub fn ingest_csv(path: &Path, split: &TrainSplit) -> CliResult<Series> {
    let obs = read_csv(path)?;
    let t = training_len(&obs, split)?;
    Ok(Series::new(obs.values, t)?)
}
