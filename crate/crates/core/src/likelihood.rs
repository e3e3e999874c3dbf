//! Log-likelihood of a cluster configuration under the shared-factor model
//! `x_i = g_s eta_s + sqrt(1 - g_s^2) eps_i`, and the maximum-likelihood
//! intra-cluster coupling.
//!
//! For a cluster with `n_s` members and internal correlation
//! `c_s = sum_{i,j in s} C_ij`,
//!
//! ```text
//! g_s = sqrt((c_s - n_s) / (n_s^2 - n_s))                                (n_s > 1)
//! L_c = 1/2 sum_{s: n_s > 1} [ ln(n_s / c_s) + (n_s - 1) ln((n_s^2 - n_s) / (n_s^2 - c_s)) ]
//! ```
//!
//! `L_c` is the objective to maximize. It is zero for all-singleton
//! configurations and for clusters with `c_s <= n_s`.

use serde::{Deserialize, Serialize};

use crate::corr::CorrelationMatrix;
use crate::error::{Error, Result};

/// Relative distance from `n_s^2` at which `c_s` is clamped.
pub const PERFECT_CORRELATION_CLAMP: f64 = 1e-9;

/// Label vector assigning each object (period) to a cluster. Labels are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct ClusterConfiguration {
    labels: Vec<u32>,
}

impl TryFrom<Vec<u32>> for ClusterConfiguration {
    type Error = Error;

    fn try_from(labels: Vec<u32>) -> Result<Self> {
        Self::new(labels)
    }
}

impl From<ClusterConfiguration> for Vec<u32> {
    fn from(s: ClusterConfiguration) -> Self {
        s.labels
    }
}

impl ClusterConfiguration {
    pub fn new(labels: Vec<u32>) -> Result<Self> {
        let n = labels.len();
        if let Some(&bad) = labels.iter().find(|&&l| l == 0 || l as usize > n) {
            return Err(Error::DegenerateData(format!("label {bad} outside [1, {n}]")));
        }
        Ok(Self { labels })
    }

    pub fn singletons(n: usize) -> Self {
        Self { labels: (1..=n as u32).collect() }
    }

    pub fn single_cluster(n: usize) -> Self {
        Self { labels: vec![1; n] }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Relabels clusters by order of first occurrence, so labels form `1..=K`.
    pub fn canonical(&self) -> Self {
        let mut labels = self.labels.clone();
        canonicalize_in_place(&mut labels);
        Self { labels }
    }

    pub fn is_canonical(&self) -> bool {
        let mut next = 1;
        for &l in &self.labels {
            if l == next {
                next += 1;
            } else if l > next {
                return false;
            }
        }
        true
    }

    pub fn n_clusters(&self) -> usize {
        let mut seen = vec![false; self.n() + 1];
        self.labels.iter().filter(|&&l| !std::mem::replace(&mut seen[l as usize], true)).count()
    }

    /// Member indices of each cluster, clusters in first-occurrence order.
    pub fn clusters(&self) -> Vec<(u32, Vec<usize>)> {
        let mut slot = vec![usize::MAX; self.n() + 1];
        let mut out: Vec<(u32, Vec<usize>)> = Vec::new();
        for (i, &l) in self.labels.iter().enumerate() {
            if slot[l as usize] == usize::MAX {
                slot[l as usize] = out.len();
                out.push((l, Vec::new()));
            }
            out[slot[l as usize]].1.push(i);
        }
        out
    }
}

/// Relabels by first occurrence. Labels must lie in `1..=labels.len()`.
pub fn canonicalize_in_place(labels: &mut [u32]) {
    let mut map = vec![0u32; labels.len() + 1];
    let mut next = 0;
    for l in labels.iter_mut() {
        let m = &mut map[*l as usize];
        if *m == 0 {
            next += 1;
            *m = next;
        }
        *l = *m;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterStat {
    pub label: u32,
    /// Member count.
    pub n: usize,
    /// Internal correlation, diagonal included.
    pub c: f64,
}

impl ClusterStat {
    pub fn coupling(&self) -> f64 {
        coupling(self.n, self.c)
    }

    pub fn log_likelihood(&self) -> f64 {
        cluster_log_likelihood(self.n, self.c)
    }
}

/// Per-cluster statistics in first-occurrence order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    pub clusters: Vec<ClusterStat>,
}

impl ClusterStats {
    pub fn get(&self, label: u32) -> Option<&ClusterStat> {
        self.clusters.iter().find(|s| s.label == label)
    }

    pub fn log_likelihood(&self) -> f64 {
        self.clusters.iter().map(ClusterStat::log_likelihood).sum()
    }
}

fn internal_correlation(c: &CorrelationMatrix, members: &[usize]) -> f64 {
    let mut off = 0.0;
    for (k, &i) in members.iter().enumerate() {
        let row = c.row(i);
        for &j in &members[..k] {
            off += row[j];
        }
    }
    members.len() as f64 + 2.0 * off
}

fn check_dims(c: &CorrelationMatrix, s: &ClusterConfiguration) -> Result<()> {
    if c.n() != s.n() {
        return Err(Error::DimensionMismatch { expected: c.n(), actual: s.n() });
    }
    Ok(())
}

/// Member counts and internal correlations of every cluster.
pub fn cluster_stats(c: &CorrelationMatrix, s: &ClusterConfiguration) -> Result<ClusterStats> {
    check_dims(c, s)?;
    let clusters = s
        .clusters()
        .into_iter()
        .map(|(label, members)| ClusterStat { label, n: members.len(), c: internal_correlation(c, &members) })
        .collect();
    Ok(ClusterStats { clusters })
}

/// Maximum-likelihood intra-cluster coupling `g_s`.
pub fn coupling(n: usize, c: f64) -> f64 {
    if n <= 1 || c.is_nan() || c <= n as f64 {
        return 0.0;
    }
    let nf = n as f64;
    let c = c.min(nf * nf);
    ((c - nf) / (nf * nf - nf)).sqrt()
}

/// One cluster's contribution to `L_c`.
pub fn cluster_log_likelihood(n: usize, c: f64) -> f64 {
    if n <= 1 || c.is_nan() || c <= n as f64 {
        return 0.0;
    }
    let nf = n as f64;
    let n2 = nf * nf;
    let c = c.min(n2 * (1.0 - PERFECT_CORRELATION_CLAMP));
    0.5 * ((nf / c).ln() + (nf - 1.0) * ((n2 - nf) / (n2 - c)).ln())
}

/// `L_c(S)` for the configuration. Higher is better.
pub fn log_likelihood(c: &CorrelationMatrix, s: &ClusterConfiguration) -> Result<f64> {
    check_dims(c, s)?;
    Ok(canonical_log_likelihood(c, &s.canonical().labels))
}

/// `L_c` for a canonical label vector, without validation.
///
/// Clusters are summed in label order and members in index order, so any two
/// label vectors describing the same partition give bit-identical results.
pub fn canonical_log_likelihood(c: &CorrelationMatrix, labels: &[u32]) -> f64 {
    let n = labels.len();
    let k = labels.iter().copied().max().unwrap_or(0) as usize;
    let mut start = vec![0usize; k + 2];
    for &l in labels {
        start[l as usize + 1] += 1;
    }
    for i in 1..start.len() {
        start[i] += start[i - 1];
    }
    let mut fill = start.clone();
    let mut members = vec![0usize; n];
    for (i, &l) in labels.iter().enumerate() {
        members[fill[l as usize]] = i;
        fill[l as usize] += 1;
    }
    (1..=k)
        .map(|l| {
            let m = &members[start[l]..start[l + 1]];
            if m.len() <= 1 {
                0.0
            } else {
                cluster_log_likelihood(m.len(), internal_correlation(c, m))
            }
        })
        .sum()
}

/// Cluster statistics maintained under single-object moves.
#[derive(Debug, Clone)]
pub struct IncrementalStats<'a> {
    corr: &'a CorrelationMatrix,
    labels: Vec<u32>,
    n: Vec<usize>,
    c: Vec<f64>,
}

impl<'a> IncrementalStats<'a> {
    pub fn new(corr: &'a CorrelationMatrix, s: &ClusterConfiguration) -> Result<Self> {
        check_dims(corr, s)?;
        let size = s.n() + 1;
        let (mut n, mut c) = (vec![0; size], vec![0.0; size]);
        for (label, members) in s.clusters() {
            n[label as usize] = members.len();
            c[label as usize] = internal_correlation(corr, &members);
        }
        Ok(Self { corr, labels: s.labels.clone(), n, c })
    }

    fn link(&self, i: usize, label: u32) -> f64 {
        let row = self.corr.row(i);
        self.labels.iter().enumerate().filter(|&(j, &l)| l == label && j != i).map(|(j, _)| row[j]).sum()
    }

    /// Moves object `i` to cluster `to` (any label in `1..=N`).
    pub fn move_object(&mut self, i: usize, to: u32) {
        let from = self.labels[i];
        if from == to {
            return;
        }
        let out_link = self.link(i, from);
        self.n[from as usize] -= 1;
        self.c[from as usize] -= 2.0 * out_link + 1.0;
        let in_link = self.link(i, to);
        self.n[to as usize] += 1;
        self.c[to as usize] += 2.0 * in_link + 1.0;
        self.labels[i] = to;
        if self.n[from as usize] == 0 {
            self.c[from as usize] = 0.0;
        }
    }

    pub fn stat(&self, label: u32) -> ClusterStat {
        ClusterStat { label, n: self.n[label as usize], c: self.c[label as usize] }
    }

    pub fn configuration(&self) -> ClusterConfiguration {
        ClusterConfiguration { labels: self.labels.clone() }
    }

    pub fn log_likelihood(&self) -> f64 {
        self.n.iter().zip(&self.c).map(|(&n, &c)| cluster_log_likelihood(n, c)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pair(r: f64) -> CorrelationMatrix {
        CorrelationMatrix::from_rows(2, vec![1.0, r, r, 1.0]).unwrap()
    }

    #[test]
    fn stats_examples() {
        let st = cluster_stats(&pair(0.5), &ClusterConfiguration::singletons(2)).unwrap();
        assert!(st.clusters.iter().all(|s| s.n == 1 && s.c == 1.0));
        let st = cluster_stats(&pair(0.5), &ClusterConfiguration::single_cluster(2)).unwrap();
        assert_eq!((st.clusters[0].n, st.clusters[0].c), (2, 3.0));
        let st = cluster_stats(&pair(1.0), &ClusterConfiguration::single_cluster(2)).unwrap();
        assert_eq!((st.clusters[0].n, st.clusters[0].c), (2, 4.0));
    }

    #[test]
    fn coupling_examples() {
        assert_eq!(coupling(1, 1.0), 0.0);
        assert_abs_diff_eq!(coupling(2, 3.0), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(coupling(3, 3.0), 0.0);
        assert_eq!(coupling(3, 2.0), 0.0);
    }

    #[test]
    fn likelihood_examples() {
        assert_eq!(log_likelihood(&pair(0.5), &ClusterConfiguration::singletons(2)).unwrap(), 0.0);
        let l = log_likelihood(&pair(0.5), &ClusterConfiguration::single_cluster(2)).unwrap();
        assert_abs_diff_eq!(l, 0.5 * ((2.0f64 / 3.0).ln() + 2.0f64.ln()), epsilon = 1e-15);
        assert_abs_diff_eq!(l, 0.143841, epsilon = 1e-6);
        let c3 = CorrelationMatrix::from_rows(3, vec![1.0, 0.5, 0.5, 0.5, 1.0, 0.5, 0.5, 0.5, 1.0]).unwrap();
        let l = log_likelihood(&c3, &ClusterConfiguration::single_cluster(3)).unwrap();
        assert_abs_diff_eq!(l, 2.0f64.ln() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn anticorrelated_and_perfect_pairs() {
        assert_eq!(log_likelihood(&pair(-0.5), &ClusterConfiguration::single_cluster(2)).unwrap(), 0.0);
        let l = log_likelihood(&pair(1.0), &ClusterConfiguration::single_cluster(2)).unwrap();
        assert!(l.is_finite() && l > 5.0);
    }

    #[test]
    fn canonicalize_examples() {
        let c = |v: Vec<u32>| ClusterConfiguration::new(v).unwrap().canonical().labels;
        assert_eq!(c(vec![2, 2, 1, 3]), vec![1, 1, 2, 3]);
        assert_eq!(c(vec![1, 2, 3]), vec![1, 2, 3]);
        assert_eq!(c(vec![3, 3, 3]), vec![1, 1, 1]);
        assert!(ClusterConfiguration::new(vec![0, 1]).is_err());
        assert!(ClusterConfiguration::new(vec![3, 1]).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            log_likelihood(&pair(0.5), &ClusterConfiguration::singletons(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pair_likelihood_is_monotone_in_correlation() {
        let s = ClusterConfiguration::single_cluster(2);
        let vals: Vec<f64> = (1..1000).map(|k| log_likelihood(&pair(k as f64 / 1000.0), &s).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn json_is_integer_array() {
        let s = ClusterConfiguration::new(vec![1, 1, 2]).unwrap();
        assert_eq!(serde_json::to_string(&s).unwrap(), "[1,1,2]");
        let back: ClusterConfiguration = serde_json::from_str("[1,1,2]").unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<ClusterConfiguration>("[0,1]").is_err());
    }
}
