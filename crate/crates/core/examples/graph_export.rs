//! Clusters planted periods and writes the configuration as a GEXF graph for
//! network viewers: one node per period, edges inside clusters only.
//!
//! ```bash
//! cargo run --release --example graph_export -- [path]
//! ```

use chrono::{Duration, FixedOffset, TimeZone};
use mstate::corr::column_pearson;
use mstate::ga::{evolve, GaConfig};
use mstate::graph::save_gexf;
use mstate::synth::{generate, PlantedSpec};

fn main() -> mstate::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "clusters.gexf".into());
    let spec =
        PlantedSpec { sizes: vec![8, 6, 4, 2], couplings: vec![0.8, 0.7, 0.6, 0.5], d: 500, seed: 3, shuffle: true };
    let (returns, _) = generate(&spec)?;
    let corr = column_pearson(&returns)?;
    let config = GaConfig { population_size: 300, mutation_probability: 0.5, ..GaConfig::for_scale(60)? };
    let result = evolve(&corr, &config)?;

    // label the 20 periods as one trading day of 30-minute bars from 08:00
    let tz = FixedOffset::east_opt(2 * 3600).expect("valid offset");
    let open = tz.with_ymd_and_hms(2012, 11, 1, 8, 0, 0).unwrap();
    let periods: Vec<_> = (0..spec.n() as i64).map(|i| open + Duration::minutes(30 * i)).collect();
    save_gexf(path.as_ref(), &result.best, &corr, &periods)?;

    let edges: usize = result.best.clusters().iter().map(|(_, m)| m.len() * (m.len() - 1) / 2).sum();
    println!("{path}: {} nodes, {edges} edges, {} clusters", spec.n(), result.best.n_clusters());
    Ok(())
}
