//! Return series, tail probability, risk paths and sample splitting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered daily returns in percent units with optional date labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    values: Vec<f64>,
    labels: Option<Vec<String>>,
}

/// Units of the return column in an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Percent,
    Decimal,
}

impl ReturnSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::build(values, None)
    }

    pub fn with_labels(values: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        Self::build(values, Some(labels))
    }

    fn build(values: Vec<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("return series must be non-empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite return {} at index {i}",
                values[i]
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != values.len() {
                return Err(Error::validation(format!(
                    "{} labels for {} values",
                    labels.len(),
                    values.len()
                )));
            }
            if labels.iter().all(|l| is_iso_date(l)) {
                if let Some(w) = labels.windows(2).find(|w| w[0] >= w[1]) {
                    return Err(Error::validation(format!(
                        "dates not strictly increasing: {} then {}",
                        w[0], w[1]
                    )));
                }
            }
        }
        Ok(Self { values, labels })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Splits into in-sample `[0, end)` and out-of-sample `[end, n)` parts.
    pub fn split(&self, split: SampleSplit) -> Result<(ReturnSeries, ReturnSeries)> {
        let end = split.in_sample_end;
        if end == 0 || end >= self.len() {
            return Err(Error::validation(format!(
                "split index {end} outside (0, {})",
                self.len()
            )));
        }
        let (a, b) = self.values.split_at(end);
        let (la, lb) = match &self.labels {
            Some(l) => {
                let (x, y) = l.split_at(end);
                (Some(x.to_vec()), Some(y.to_vec()))
            }
            None => (None, None),
        };
        Ok((
            ReturnSeries {
                values: a.to_vec(),
                labels: la,
            },
            ReturnSeries {
                values: b.to_vec(),
                labels: lb,
            },
        ))
    }

    /// Reads one return column from a headed CSV file.
    ///
    /// A `date` column, when present, becomes the label sequence. Values in
    /// `Scale::Decimal` are multiplied by 100.
    pub fn load_csv(path: impl AsRef<Path>, column: &str, scale: Scale) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, column, scale)
    }

    pub fn read_csv<R: std::io::Read>(reader: R, column: &str, scale: Scale) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = headers
            .iter()
            .position(|h| h.trim() == column)
            .ok_or_else(|| Error::validation(format!("column '{column}' not found in header")))?;
        let date_col = headers.iter().position(|h| h.trim() == "date");
        let factor = match scale {
            Scale::Percent => 1.0,
            Scale::Decimal => 100.0,
        };
        let mut values = Vec::new();
        let mut labels = date_col.map(|_| Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            // header is row 1
            let row = i + 2;
            let rec = rec?;
            let cell = rec
                .get(col)
                .ok_or_else(|| Error::Parse {
                    row,
                    msg: format!("missing column '{column}'"),
                })?
                .trim();
            let x: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                msg: format!("non-numeric value '{cell}'"),
            })?;
            if !x.is_finite() {
                return Err(Error::validation(format!("non-finite value at row {row}")));
            }
            values.push(x * factor);
            if let (Some(labels), Some(dc)) = (labels.as_mut(), date_col) {
                labels.push(rec.get(dc).unwrap_or("").trim().to_string());
            }
        }
        Self::build(values, labels)
    }

    /// Writes `date,<column>` (or just `<column>`) with round-trip float formatting.
    pub fn write_csv<W: std::io::Write>(&self, writer: W, column: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        match &self.labels {
            Some(labels) => {
                w.write_record(["date", column])?;
                for (l, v) in labels.iter().zip(&self.values) {
                    w.write_record([l.as_str(), &v.to_string()])?;
                }
            }
            None => {
                w.write_record([column])?;
                for v in &self.values {
                    w.write_record([v.to_string()])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, column: &str) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file, column)
    }

    pub fn mean(&self) -> f64 {
        crate::stats::mean(&self.values)
    }

    pub fn variance(&self) -> f64 {
        crate::stats::variance(&self.values)
    }
}

fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() >= 10
        && b[..4].iter().all(u8::is_ascii_digit)
        && b[4] == b'-'
        && b[5..7].iter().all(u8::is_ascii_digit)
        && b[7] == b'-'
        && b[8..10].iter().all(u8::is_ascii_digit)
}

/// Tail probability in `(0, 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AlphaLevel(f64);

impl AlphaLevel {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 0.5 {
            Ok(Self(alpha))
        } else {
            Err(Error::validation(format!("alpha {alpha} outside (0, 0.5)")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for AlphaLevel {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AlphaLevel> for f64 {
    fn from(a: AlphaLevel) -> f64 {
        a.0
    }
}

/// Per-period VaR and ES forecasts with `e_t <= v_t < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskPath {
    v: Vec<f64>,
    e: Vec<f64>,
}

impl RiskPath {
    pub fn new(v: Vec<f64>, e: Vec<f64>) -> Result<Self> {
        if v.len() != e.len() {
            return Err(Error::validation(format!(
                "VaR path length {} != ES path length {}",
                v.len(),
                e.len()
            )));
        }
        if let Some(t) = first_invalid(&v, &e) {
            return Err(Error::validation(format!(
                "risk path invariant e <= v < 0 violated at t={t}: v={}, e={}",
                v[t], e[t]
            )));
        }
        Ok(Self { v, e })
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn e(&self) -> &[f64] {
        &self.e
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Sub-path over `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> RiskPath {
        RiskPath {
            v: self.v[start..end].to_vec(),
            e: self.e[start..end].to_vec(),
        }
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.v, self.e)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W, y: Option<&[f64]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        match y {
            Some(y) => {
                w.write_record(["t", "ret", "var", "es"])?;
                for t in 0..self.len() {
                    w.write_record([
                        t.to_string(),
                        y[t].to_string(),
                        self.v[t].to_string(),
                        self.e[t].to_string(),
                    ])?;
                }
            }
            None => {
                w.write_record(["t", "var", "es"])?;
                for t in 0..self.len() {
                    w.write_record([t.to_string(), self.v[t].to_string(), self.e[t].to_string()])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Index of the first `t` where `e_t <= v_t < 0` fails (or a value is non-finite).
pub fn first_invalid(v: &[f64], e: &[f64]) -> Option<usize> {
    v.iter()
        .zip(e)
        .position(|(&v, &e)| !(v.is_finite() && e.is_finite() && v < 0.0 && e <= v))
}

/// End of the in-sample period, exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSplit {
    pub in_sample_end: usize,
}

impl SampleSplit {
    pub fn new(in_sample_end: usize) -> Self {
        Self { in_sample_end }
    }
}
