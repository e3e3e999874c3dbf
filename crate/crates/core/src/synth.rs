//! Planted-partition data from the shared-factor model
//! `x_i(t) = g_s eta_s(t) + sqrt(1 - g_s^2) eps_i(t)`.
//!
//! Used as ground truth for clustering, coupling recovery and state
//! round-trips, and to drive the full pipeline from synthetic ticks.

use chrono::{DateTime, FixedOffset, TimeZone};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corr::{ReturnsMatrix, SeriesLabel};
use crate::error::{Error, Result};
use crate::likelihood::ClusterConfiguration;
use crate::marketdata::{Feature, SessionCalendar, TickKind, TickRecord};
use crate::rng::{standard_normal, stream, Domain};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    /// Cluster sizes; their sum is the number of objects N.
    pub sizes: Vec<usize>,
    /// Coupling per cluster, each in `[0, 1)`.
    pub couplings: Vec<f64>,
    /// Measurements per object.
    pub d: usize,
    pub seed: u64,
    /// Scatter members over object indices instead of laying clusters out contiguously.
    pub shuffle: bool,
}

impl PlantedSpec {
    pub fn equal(clusters: usize, size: usize, g: f64, d: usize, seed: u64) -> Self {
        Self { sizes: vec![size; clusters], couplings: vec![g; clusters], d, seed, shuffle: true }
    }

    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| Err(Error::Config { key: key.into(), message });
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return bad("synth.sizes", "cluster sizes must be positive".into());
        }
        if self.sizes.len() != self.couplings.len() {
            return bad("synth.couplings", "need one coupling per cluster".into());
        }
        if let Some(g) = self.couplings.iter().find(|g| !(0.0..1.0).contains(*g)) {
            return bad("synth.couplings", format!("coupling {g} outside [0, 1)"));
        }
        if self.d < 2 {
            return bad("synth.d", "need at least 2 measurements".into());
        }
        Ok(())
    }

    /// 0-based planted cluster index of every object.
    fn cluster_of(&self) -> Vec<usize> {
        let mut idx: Vec<usize> =
            self.sizes.iter().enumerate().flat_map(|(s, &size)| std::iter::repeat_n(s, size)).collect();
        if self.shuffle {
            idx.shuffle(&mut stream(self.seed, Domain::Synth, u64::MAX, 0));
        }
        idx
    }

    /// Planted labels in canonical form.
    pub fn labels(&self) -> ClusterConfiguration {
        let raw = self.cluster_of().into_iter().map(|s| s as u32 + 1).collect();
        ClusterConfiguration::new(raw).expect("labels in range").canonical()
    }
}

/// Raw planted values as `D` rows of `N` objects (row-major), plus the planted labels.
pub fn planted_values(spec: &PlantedSpec) -> Result<(Vec<f64>, ClusterConfiguration)> {
    spec.validate()?;
    let cluster_of = spec.cluster_of();
    let (n, d) = (spec.n(), spec.d);
    let eta: Vec<Vec<f64>> = (0..spec.sizes.len())
        .into_par_iter()
        .map(|s| {
            let mut rng = stream(spec.seed, Domain::Synth, 0, s as u64);
            (0..d).map(|_| standard_normal(&mut rng)).collect()
        })
        .collect();
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = cluster_of[i];
            let g = spec.couplings[s];
            let idio = (1.0 - g * g).sqrt();
            let mut rng = stream(spec.seed, Domain::Synth, 1, i as u64);
            (0..d).map(|r| g * eta[s][r] + idio * standard_normal(&mut rng)).collect()
        })
        .collect();
    let mut values = vec![0.0; d * n];
    for (i, col) in columns.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            values[r * n + i] = *v;
        }
    }
    Ok((values, spec.labels()))
}

/// Planted returns matrix (objects are columns) and the true configuration.
///
/// Columns are stamped one minute apart; rows are labeled `m<k>:price`.
pub fn generate(spec: &PlantedSpec) -> Result<(ReturnsMatrix, ClusterConfiguration)> {
    let (values, truth) = planted_values(spec)?;
    let t0 = FixedOffset::east_opt(0).unwrap().with_ymd_and_hms(2000, 1, 3, 9, 0, 0).unwrap();
    let periods: Vec<DateTime<FixedOffset>> = (0..spec.n()).map(|i| t0 + chrono::Duration::minutes(i as i64)).collect();
    let rows = (0..spec.d).map(|r| SeriesLabel { instrument: format!("m{r}"), feature: Feature::Price }).collect();
    Ok((ReturnsMatrix::new(rows, periods, values)?, truth))
}

/// Per-feature scale of the planted returns when rendered as ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickSynthSpec {
    pub instruments: usize,
    /// Cluster sizes over return periods; must sum to `calendar periods - 1`.
    pub sizes: Vec<usize>,
    pub couplings: Vec<f64>,
    pub seed: u64,
    /// Return volatility for price, spread, volume, imbalance.
    pub volatility: [f64; 4],
}

impl TickSynthSpec {
    pub fn new(instruments: usize, sizes: Vec<usize>, g: f64, seed: u64) -> Self {
        let couplings = vec![g; sizes.len()];
        Self { instruments, sizes, couplings, seed, volatility: [0.002, 0.02, 0.05, 0.005] }
    }
}

const INITIAL_LEVELS: [f64; 4] = [100.0, 0.05, 10_000.0, 0.5];

/// Synthetic tick stream whose feature returns follow a planted partition of
/// the calendar's return periods (every period but the first).
///
/// Each (instrument, period) gets one top-of-book quote and two trades, so
/// bar levels reproduce the planted relative changes exactly up to rounding.
pub fn synth_ticks(spec: &TickSynthSpec, cal: &SessionCalendar) -> Result<(Vec<TickRecord>, ClusterConfiguration)> {
    let n_periods = cal.n_periods();
    if spec.sizes.iter().sum::<usize>() + 1 != n_periods {
        return Err(Error::Config {
            key: "synth.sizes".into(),
            message: format!("cluster sizes must sum to {} (calendar periods - 1)", n_periods - 1),
        });
    }
    if spec.instruments == 0 {
        return Err(Error::Config { key: "synth.instruments".into(), message: "must be positive".into() });
    }
    let planted = PlantedSpec {
        sizes: spec.sizes.clone(),
        couplings: spec.couplings.clone(),
        d: spec.instruments * 4,
        seed: spec.seed,
        shuffle: true,
    };
    let (values, truth) = planted_values(&planted)?;
    let n_returns = n_periods - 1;
    let mut ticks = Vec::with_capacity(spec.instruments * n_periods * 3);
    let starts = cal.period_starts();
    for inst in 0..spec.instruments {
        let name = format!("S{inst:03}");
        let mut levels = INITIAL_LEVELS;
        for (p, start) in starts.iter().enumerate() {
            if p > 0 {
                for f in Feature::ALL {
                    let row = f.index() * spec.instruments + inst;
                    let x = values[row * n_returns + p - 1];
                    levels[f.index()] *= 1.0 + spec.volatility[f.index()] * x;
                }
            }
            let [price, spread, volume, imbalance] = levels;
            if !(price > 0.0 && spread > 0.0 && volume > 0.0 && (0.0..=1.0).contains(&imbalance)) {
                return Err(Error::DegenerateData(format!(
                    "synthetic level left its domain for {name} at period {p}; lower synth volatility"
                )));
            }
            let ns = start.timestamp_nanos_opt().expect("in range");
            let minute = 60_000_000_000;
            ticks.push(TickRecord {
                timestamp: ns + minute,
                instrument: name.clone(),
                kind: TickKind::Quote {
                    bid: price - spread / 2.0,
                    ask: price + spread / 2.0,
                    bid_size: 1000.0 * imbalance,
                    ask_size: 1000.0 * (1.0 - imbalance),
                },
            });
            for k in 2..4 {
                ticks.push(TickRecord {
                    timestamp: ns + k * minute,
                    instrument: name.clone(),
                    kind: TickKind::Trade { price, volume: volume / 2.0 },
                });
            }
        }
    }
    ticks.sort_by_key(|t| t.timestamp);
    Ok((ticks, truth))
}

/// Adjusted Rand index between two partitions of the same objects.
pub fn adjusted_rand_index(a: &ClusterConfiguration, b: &ClusterConfiguration) -> f64 {
    assert_eq!(a.n(), b.n(), "partitions of different sizes");
    let n = a.n();
    let a = a.canonical();
    let b = b.canonical();
    let (ka, kb) = (a.n_clusters(), b.n_clusters());
    let mut table = vec![0u64; ka * kb];
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        table[(x as usize - 1) * kb + (y as usize - 1)] += 1;
    }
    let pairs = |m: u64| (m * m.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().map(|&m| pairs(m)).sum();
    let rows: f64 = (0..ka).map(|i| pairs(table[i * kb..(i + 1) * kb].iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| pairs((0..ka).map(|i| table[i * kb + j]).sum())).sum();
    let total = pairs(n as u64);
    let expected = rows * cols / total;
    let max = (rows + cols) / 2.0;
    if max == expected {
        // both trivial (all singletons or one cluster)
        return if a == b { 1.0 } else { 0.0 };
    }
    (index - expected) / (max - expected)
}
