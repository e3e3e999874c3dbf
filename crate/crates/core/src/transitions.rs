//! Empirical one-step transition matrices between states.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-stochastic transition estimate over a fixed set of state ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub states: Vec<u32>,
    /// `counts[i][j]`: transitions from `states[i]` to `states[j]`.
    pub counts: Vec<Vec<u64>>,
    pub probabilities: Vec<Vec<f64>>,
    /// States with no outgoing transitions; their probability rows are zero.
    pub zero_rows: Vec<u32>,
}

impl TransitionMatrix {
    pub fn empty(states: &[u32]) -> Self {
        let k = states.len();
        let mut m = Self {
            states: states.to_vec(),
            counts: vec![vec![0; k]; k],
            probabilities: vec![vec![0.0; k]; k],
            zero_rows: Vec::new(),
        };
        m.renormalize();
        m
    }

    fn index(&self, state: u32) -> Result<usize> {
        self.states.iter().position(|&s| s == state).ok_or(Error::UnknownState(state))
    }

    fn renormalize_row(&mut self, i: usize) {
        let total: u64 = self.counts[i].iter().sum();
        self.probabilities[i] =
            self.counts[i].iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 }).collect();
    }

    fn renormalize(&mut self) {
        for i in 0..self.states.len() {
            self.renormalize_row(i);
        }
        self.zero_rows = self
            .states
            .iter()
            .zip(&self.counts)
            .filter(|(_, row)| row.iter().all(|&c| c == 0))
            .map(|(&s, _)| s)
            .collect();
    }

    pub fn probability(&self, from: u32, to: u32) -> Result<f64> {
        Ok(self.probabilities[self.index(from)?][self.index(to)?])
    }

    pub fn count(&self, from: u32, to: u32) -> Result<u64> {
        Ok(self.counts[self.index(from)?][self.index(to)?])
    }

    /// Copy with one more observed transition; the original is untouched.
    pub fn update(&self, from: u32, to: u32) -> Result<Self> {
        let (i, j) = (self.index(from)?, self.index(to)?);
        let mut next = self.clone();
        next.counts[i][j] += 1;
        next.renormalize_row(i);
        next.zero_rows.retain(|&s| s != from);
        Ok(next)
    }

    /// CSV with a state-id header row and first column.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["from".to_string()];
        header.extend(self.states.iter().map(u32::to_string));
        out.write_record(&header)?;
        for (s, row) in self.states.iter().zip(&self.probabilities) {
            let mut rec = vec![s.to_string()];
            rec.extend(row.iter().map(f64::to_string));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Counts consecutive pairs of an ordered `(day, state)` sequence.
///
/// Pairs spanning two days are skipped unless `include_overnight` is set.
pub fn estimate<D: PartialEq>(seq: &[(D, u32)], states: &[u32], include_overnight: bool) -> Result<TransitionMatrix> {
    let mut m = TransitionMatrix::empty(states);
    if let Some(&(_, s)) = seq.iter().find(|(_, s)| !states.contains(s)) {
        return Err(Error::UnknownState(s));
    }
    for w in seq.windows(2) {
        if include_overnight || w[0].0 == w[1].0 {
            let (i, j) = (m.index(w[0].1)?, m.index(w[1].1)?);
            m.counts[i][j] += 1;
        }
    }
    m.renormalize();
    Ok(m)
}

/// Sorted distinct states appearing in a sequence.
pub fn states_of<D>(seq: &[(D, u32)]) -> Vec<u32> {
    let mut s: Vec<u32> = seq.iter().map(|(_, s)| *s).collect();
    s.sort_unstable();
    s.dedup();
    s
}
