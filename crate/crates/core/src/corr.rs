//! Feature returns, the stacked returns matrix and the period-by-period
//! Pearson correlation matrix.
//!
//! Objects being clustered are time periods (matrix columns); the stacked
//! `(instrument, feature)` series are the measurements (matrix rows).

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, FixedOffset};
use log::warn;

use crate::error::{Error, Result};
use crate::marketdata::{BarTable, Feature};

/// One row of the returns matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeriesLabel {
    pub instrument: String,
    pub feature: Feature,
}

impl fmt::Display for SeriesLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.instrument, self.feature)
    }
}

impl FromStr for SeriesLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (instrument, feature) =
            s.rsplit_once(':').ok_or_else(|| format!("series label `{s}` is not `instrument:feature`"))?;
        Ok(SeriesLabel { instrument: instrument.to_string(), feature: feature.parse()? })
    }
}

/// D x N matrix of relative changes, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsMatrix {
    rows: Vec<SeriesLabel>,
    periods: Vec<DateTime<FixedOffset>>,
    values: Vec<f64>,
}

impl ReturnsMatrix {
    pub fn new(rows: Vec<SeriesLabel>, periods: Vec<DateTime<FixedOffset>>, values: Vec<f64>) -> Result<Self> {
        let expected = rows.len() * periods.len();
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, actual: values.len() });
        }
        if periods.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InsufficientData("period columns are not strictly time-ordered".into()));
        }
        Ok(Self { rows, periods, values })
    }

    /// Number of measurement rows.
    pub fn d(&self) -> usize {
        self.rows.len()
    }

    /// Number of period columns.
    pub fn n(&self) -> usize {
        self.periods.len()
    }

    pub fn rows(&self) -> &[SeriesLabel] {
        &self.rows
    }

    pub fn periods(&self) -> &[DateTime<FixedOffset>] {
        &self.periods
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let n = self.n();
        &self.values[r * n..(r + 1) * n]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.n() + c]
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.d()).map(move |r| self.get(r, c))
    }

    pub fn period_index(&self, period: &DateTime<FixedOffset>) -> Option<usize> {
        self.periods.binary_search(period).ok()
    }

    /// Rescales one row by a positive factor. Used to probe scale invariance.
    pub fn scale_row(&mut self, r: usize, factor: f64) {
        let n = self.n();
        self.values[r * n..(r + 1) * n].iter_mut().for_each(|v| *v *= factor);
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["series".to_string()];
        header.extend(self.periods.iter().map(|p| p.to_rfc3339()));
        out.write_record(&header)?;
        for (r, label) in self.rows.iter().enumerate() {
            let mut rec = vec![label.to_string()];
            rec.extend(self.row(r).iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        let periods = header
            .iter()
            .skip(1)
            .map(|h| {
                DateTime::parse_from_rfc3339(h)
                    .map_err(|e| Error::Parse { line: 1, message: format!("bad period `{h}`: {e}") })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let label = rec.get(0).unwrap_or_default().parse().map_err(|message| Error::Parse { line, message })?;
            if rec.len() != periods.len() + 1 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, got {}", periods.len() + 1, rec.len()),
                });
            }
            for field in rec.iter().skip(1) {
                values.push(
                    field
                        .parse::<f64>()
                        .map_err(|e| Error::Parse { line, message: format!("non-numeric value `{field}`: {e}") })?,
                );
            }
            rows.push(label);
        }
        Self::new(rows, periods, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Relative change `(f_t - f_{t-1}) / f_{t-1}`, zero when the previous level is zero.
pub fn relative_change(prev: f64, cur: f64) -> f64 {
    if prev == 0.0 {
        0.0
    } else {
        (cur - prev) / prev
    }
}

/// Builds the stacked returns matrix from aggregated bars.
///
/// The first period has no return and is dropped. Rows with an undefined
/// return anywhere (a field missing at the start of the sample) are dropped
/// and logged.
pub fn feature_returns(bars: &BarTable) -> Result<ReturnsMatrix> {
    let n_periods = bars.periods.len();
    if n_periods < 3 {
        return Err(Error::InsufficientData(format!("{n_periods} periods; at least 3 are needed")));
    }
    let mut rows = Vec::new();
    let mut values = Vec::with_capacity(bars.instruments.len() * Feature::ALL.len() * (n_periods - 1));
    for feature in Feature::ALL {
        for (instrument, series) in bars.instruments.iter().zip(&bars.bars) {
            let levels: Vec<Option<f64>> = series.iter().map(|b| b.feature(feature)).collect();
            let row: Option<Vec<f64>> = levels.windows(2).map(|w| Some(relative_change(w[0]?, w[1]?))).collect();
            match row {
                Some(row) => {
                    rows.push(SeriesLabel { instrument: instrument.clone(), feature });
                    values.extend(row);
                }
                None => warn!("dropping {instrument}:{feature}: undefined return (missing leading value)"),
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("no series with fully defined returns".into()));
    }
    ReturnsMatrix::new(rows, bars.periods[1..].to_vec(), values)
}

/// Standardizes each row to zero mean and unit sample standard deviation.
/// Zero-variance rows are removed with a warning.
pub fn standardize_rows(r: &ReturnsMatrix) -> Result<ReturnsMatrix> {
    let n = r.n();
    if n < 2 {
        return Err(Error::InsufficientData("need at least 2 periods to standardize".into()));
    }
    let mut rows = Vec::new();
    let mut values = Vec::with_capacity(r.values.len());
    for (i, label) in r.rows.iter().enumerate() {
        let row = r.row(i);
        let mean = row.iter().sum::<f64>() / n as f64;
        let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        let scale = row.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !(sd.is_finite() && sd > 1e-12 * scale) {
            warn!("dropping zero-variance series {label}");
            continue;
        }
        rows.push(label.clone());
        values.extend(row.iter().map(|x| (x - mean) / sd));
    }
    if rows.is_empty() {
        return Err(Error::EmptyMatrix("every series has zero variance".into()));
    }
    ReturnsMatrix::new(rows, r.periods.clone(), values)
}

/// Symmetric N x N correlation matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    n: usize,
    values: Vec<f64>,
}

const BINARY_MAGIC: &[u8; 7] = b"GMCORR1";

impl CorrelationMatrix {
    /// Builds from row-major values. Symmetry and unit diagonal are checked.
    pub fn from_rows(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, actual: values.len() });
        }
        for i in 0..n {
            if values[i * n + i] != 1.0 {
                return Err(Error::DegenerateData(format!("C[{i}][{i}] != 1")));
            }
            for j in 0..i {
                if values[i * n + j] != values[j * n + i] {
                    return Err(Error::DegenerateData(format!("C not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { n, values })
    }

    pub fn identity(n: usize) -> Self {
        let mut values = vec![0.0; n * n];
        (0..n).for_each(|i| values[i * n + i] = 1.0);
        Self { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Sub-matrix on the given object indices, in that order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let m = order.len();
        let mut values = Vec::with_capacity(m * m);
        for &i in order {
            values.extend(order.iter().map(|&j| self.get(i, j)));
        }
        Self { n: m, values }
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 7];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::BadBinary("bad magic".into()));
        }
        let mut nb = [0u8; 4];
        r.read_exact(&mut nb)?;
        let n = u32::from_le_bytes(nb) as usize;
        let mut buf = vec![0u8; n * n * 8];
        r.read_exact(&mut buf)?;
        let values = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::BadBinary(format!("{} trailing bytes", rest.len())));
        }
        Self::from_rows(n, values)
    }

    /// Labeled CSV: header `period,<p_1>,...,<p_N>`, one row per period.
    pub fn write_csv<W: Write>(&self, w: W, labels: &[String]) -> Result<()> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: labels.len() });
        }
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["period".to_string()];
        header.extend(labels.iter().cloned());
        out.write_record(&header)?;
        for (i, label) in labels.iter().enumerate() {
            let mut rec = vec![label.clone()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load_binary(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Self::read_binary(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Pearson correlation between period columns of a standardized matrix.
///
/// Each entry sums sequentially over rows, so the result does not depend on
/// how entries are scheduled.
pub fn period_correlation(r: &ReturnsMatrix) -> Result<CorrelationMatrix> {
    let n = r.n();
    let d = r.d();
    // column-major copy for contiguous dot products
    let mut cols = vec![0.0; n * d];
    for row in 0..d {
        for (c, v) in r.row(row).iter().enumerate() {
            cols[c * d + row] = *v;
        }
    }
    let col = |c: usize| &cols[c * d..(c + 1) * d];
    let norms: Vec<f64> = (0..n).map(|c| col(c).iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    if let Some(c) = norms.iter().position(|&x| x == 0.0 || !x.is_finite()) {
        return Err(Error::DegeneratePeriod { period: r.periods[c].to_rfc3339() });
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in 0..i {
            let dot: f64 = col(i).iter().zip(col(j)).map(|(a, b)| a * b).sum();
            let v = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    Ok(CorrelationMatrix { n, values })
}

/// Pearson correlation between columns, each centered and normalized over its
/// own `D` entries.
///
/// This is the correlation the shared-factor model describes for objects that
/// are columns of independent measurements, e.g. planted synthetic data.
pub fn column_pearson(r: &ReturnsMatrix) -> Result<CorrelationMatrix> {
    let (n, d) = (r.n(), r.d());
    let means: Vec<f64> = (0..n).map(|c| r.column(c).sum::<f64>() / d as f64).collect();
    let values = (0..d).flat_map(|row| r.row(row).iter().zip(&means).map(|(v, m)| v - m)).collect();
    period_correlation(&ReturnsMatrix { rows: r.rows.clone(), periods: r.periods.clone(), values })
}
