//! Builds state signature vectors from a labelled history, then classifies a
//! stream of new periods one at a time and keeps a transition matrix current
//! as each assignment arrives.
//!
//! ```bash
//! cargo run --example online_assignment
//! ```

use chrono::{Duration, FixedOffset, TimeZone};
use mstate::corr::{ReturnsMatrix, SeriesLabel};
use mstate::likelihood::{cluster_stats, ClusterConfiguration};
use mstate::marketdata::Feature;
use mstate::rng::{standard_normal, stream, Domain};
use mstate::states::{assign_state, extract_ssvs, period_feature_vector};
use mstate::transitions::TransitionMatrix;
use mstate::CorrelationMatrix;

const INSTRUMENTS: usize = 3;
const CENTRES: [[f64; 4]; 3] = [[0.01, -0.02, 0.3, 0.0], [-0.01, 0.05, -0.2, 0.01], [0.0, 0.0, 0.05, -0.02]];

/// Returns whose per-period feature means sit near one of three centres.
fn history(states: &[usize], seed: u64) -> mstate::Result<ReturnsMatrix> {
    let tz = FixedOffset::east_opt(2 * 3600).expect("valid offset");
    let start = tz.with_ymd_and_hms(2012, 11, 1, 9, 0, 0).unwrap();
    let periods = (0..states.len() as i64).map(|i| start + Duration::minutes(15 * i)).collect();
    let mut rows = Vec::new();
    let mut values = Vec::new();
    let mut rng = stream(seed, Domain::Synth, 0, 0);
    for f in Feature::ALL {
        for inst in 0..INSTRUMENTS {
            rows.push(SeriesLabel { instrument: format!("S{inst}"), feature: f });
            for &s in states {
                values.push(CENTRES[s][f.index()] + 0.002 * standard_normal(&mut rng));
            }
        }
    }
    ReturnsMatrix::new(rows, periods, values)
}

fn main() -> mstate::Result<()> {
    let past = [0, 0, 1, 1, 1, 2, 2, 0, 1, 2, 2, 0];
    let r = history(&past, 1)?;
    let s = ClusterConfiguration::new(past.iter().map(|&k| k as u32 + 1).collect())?;
    // the signatures only need cluster sizes; an identity matrix suffices here
    let stats = cluster_stats(&CorrelationMatrix::identity(s.n()), &s)?;
    let ssvs = extract_ssvs(&r, &s, &[1, 2, 3], &stats)?;
    for v in &ssvs {
        println!("state {}: {:?} from {} periods", v.state, v.values, v.n);
    }

    let live = history(&[2, 2, 0, 1, 1, 1, 0, 2], 2)?;
    let mut tm = TransitionMatrix::empty(&[1, 2, 3]);
    let mut previous = None;
    for t in live.periods() {
        let fv = period_feature_vector(&live, t)?;
        let (state, distance) = assign_state(&fv, &ssvs)?;
        if let Some(from) = previous {
            tm = tm.update(from, state)?;
        }
        previous = Some(state);
        println!("{}  state {state}  distance {distance:.4}", t.format("%H:%M"));
    }
    println!("transition probabilities (rows: from 1, 2, 3):");
    for row in &tm.probabilities {
        println!("  {row:.3?}");
    }
    Ok(())
}
