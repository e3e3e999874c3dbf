//! State signature vectors and nearest-signature state assignment.

use std::io::Write;

use chrono::{DateTime, FixedOffset};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::corr::ReturnsMatrix;
use crate::error::{Error, Result};
use crate::likelihood::{ClusterConfiguration, ClusterStats};
use crate::marketdata::Feature;

/// Cross-instrument mean feature returns of one period, in
/// (price, spread, volume, imbalance) order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub period: DateTime<FixedOffset>,
    pub values: [f64; 4],
}

impl FeatureVector {
    pub fn distance(&self, ssv: &StateSignatureVector) -> f64 {
        self.values.iter().zip(&ssv.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SsvRecord", from = "SsvRecord")]
pub struct StateSignatureVector {
    pub state: u32,
    pub values: [f64; 4],
    /// Member periods.
    pub n: usize,
    /// Internal correlation of the state's cluster.
    pub c: f64,
}

#[derive(Serialize, Deserialize)]
struct SsvRecord {
    state: u32,
    price: f64,
    spread: f64,
    volume: f64,
    imbalance: f64,
    n: usize,
    c: f64,
}

impl From<StateSignatureVector> for SsvRecord {
    fn from(s: StateSignatureVector) -> Self {
        let [price, spread, volume, imbalance] = s.values;
        SsvRecord { state: s.state, price, spread, volume, imbalance, n: s.n, c: s.c }
    }
}

impl From<SsvRecord> for StateSignatureVector {
    fn from(r: SsvRecord) -> Self {
        StateSignatureVector { state: r.state, values: [r.price, r.spread, r.volume, r.imbalance], n: r.n, c: r.c }
    }
}

fn column_feature_vector(r: &ReturnsMatrix, col: usize) -> FeatureVector {
    let mut sums = [0.0; 4];
    let mut counts = [0usize; 4];
    for (row, label) in r.rows().iter().enumerate() {
        let f = label.feature.index();
        sums[f] += r.get(row, col);
        counts[f] += 1;
    }
    // a feature with no surviving series contributes no signal
    let values = std::array::from_fn(|f| if counts[f] == 0 { 0.0 } else { sums[f] / counts[f] as f64 });
    FeatureVector { period: r.periods()[col], values }
}

/// Mean return of each feature across instruments at `period`.
pub fn period_feature_vector(r: &ReturnsMatrix, period: &DateTime<FixedOffset>) -> Result<FeatureVector> {
    let col = r.period_index(period).ok_or_else(|| Error::PeriodNotFound(period.to_rfc3339()))?;
    Ok(column_feature_vector(r, col))
}

/// Feature vectors of every period, in column order.
pub fn feature_vectors(r: &ReturnsMatrix) -> Vec<FeatureVector> {
    let missing: Vec<_> = Feature::ALL.iter().filter(|f| !r.rows().iter().any(|l| l.feature == **f)).collect();
    if !missing.is_empty() {
        warn!("no series left for {missing:?}; those entries are zero");
    }
    (0..r.n()).map(|c| column_feature_vector(r, c)).collect()
}

/// One signature per significant state: the unweighted mean of its member
/// periods' feature vectors.
pub fn extract_ssvs(
    r: &ReturnsMatrix,
    s: &ClusterConfiguration,
    significant: &[u32],
    stats: &ClusterStats,
) -> Result<Vec<StateSignatureVector>> {
    if s.n() != r.n() {
        return Err(Error::DimensionMismatch { expected: r.n(), actual: s.n() });
    }
    let fvs = feature_vectors(r);
    let mut out = Vec::with_capacity(significant.len());
    for &state in significant {
        let members: Vec<usize> = (0..s.n()).filter(|&i| s.labels()[i] == state).collect();
        if members.is_empty() {
            return Err(Error::UnknownState(state));
        }
        let mut values = [0.0; 4];
        for &i in &members {
            values.iter_mut().zip(&fvs[i].values).for_each(|(a, v)| *a += v);
        }
        values.iter_mut().for_each(|v| *v /= members.len() as f64);
        let c = stats.get(state).map_or(f64::NAN, |st| st.c);
        out.push(StateSignatureVector { state, values, n: members.len(), c });
    }
    for (k, a) in out.iter().enumerate() {
        if let Some(b) = out[..k].iter().find(|b| b.values == a.values) {
            warn!("states {} and {} have identical signatures", b.state, a.state);
        }
    }
    Ok(out)
}

/// Nearest signature by Euclidean distance; ties go to the lowest state id.
pub fn assign_state(fv: &FeatureVector, ssvs: &[StateSignatureVector]) -> Result<(u32, f64)> {
    ssvs.iter()
        .map(|s| (s.state, fv.distance(s)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .ok_or(Error::NoStates)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub period: DateTime<FixedOffset>,
    pub state: u32,
    pub distance: f64,
}

/// Assigns every period of `r` to its nearest signature.
pub fn assign_all(r: &ReturnsMatrix, ssvs: &[StateSignatureVector]) -> Result<Vec<Assignment>> {
    feature_vectors(r)
        .iter()
        .map(|fv| assign_state(fv, ssvs).map(|(state, distance)| Assignment { period: fv.period, state, distance }))
        .collect()
}

pub fn write_assignments<W: Write>(w: W, assignments: &[Assignment]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["period_start", "state", "distance"])?;
    for a in assignments {
        out.write_record([a.period.to_rfc3339(), a.state.to_string(), a.distance.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_assignments<R: std::io::Read>(r: R) -> Result<Vec<Assignment>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |m: String| Error::Parse { line, message: m };
        if rec.len() != 3 {
            return Err(err(format!("expected 3 fields, got {}", rec.len())));
        }
        out.push(Assignment {
            period: DateTime::parse_from_rfc3339(&rec[0]).map_err(|e| err(e.to_string()))?,
            state: rec[1].parse().map_err(|_| err(format!("bad state `{}`", &rec[1])))?,
            distance: rec[2].parse().map_err(|_| err(format!("bad distance `{}`", &rec[2])))?,
        });
    }
    Ok(out)
}
