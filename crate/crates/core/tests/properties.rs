use chrono::{NaiveDate, NaiveTime};
use mstate::corr::{period_correlation, standardize_rows, ReturnsMatrix, SeriesLabel};
use mstate::likelihood::{cluster_stats, log_likelihood, ClusterConfiguration, IncrementalStats};
use mstate::marketdata::{aggregate, Feature, SessionCalendar, TickKind, TickRecord};
use mstate::transitions::{estimate, TransitionMatrix};
use mstate::CorrelationMatrix;
use proptest::prelude::*;

fn returns(d: usize, n: usize, values: Vec<f64>) -> ReturnsMatrix {
    let start = chrono::DateTime::parse_from_rfc3339("2012-11-01T09:00:00+02:00").unwrap();
    let periods = (0..n as i64).map(|i| start + chrono::Duration::minutes(5 * i)).collect();
    let rows = (0..d).map(|r| SeriesLabel { instrument: format!("S{r}"), feature: Feature::Price }).collect();
    ReturnsMatrix::new(rows, periods, values).unwrap()
}

/// Random correlation matrix with a genuine sample structure.
fn correlation() -> impl Strategy<Value = CorrelationMatrix> {
    (2usize..9, 3usize..12).prop_flat_map(|(n, d)| {
        prop::collection::vec(-1.0f64..1.0, d * n).prop_filter_map("degenerate sample", move |v| {
            let z = standardize_rows(&returns(d, n, v)).ok()?;
            period_correlation(&z).ok()
        })
    })
}

fn labels_for(n: usize) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(1..=n as u32, n)
}

proptest! {
    #[test]
    fn correlation_is_positive_semidefinite(c in correlation(), seed in any::<u64>()) {
        let n = c.n();
        let x: Vec<f64> = (0..n).map(|i| ((seed.rotate_left(i as u32 * 7) % 2001) as f64 - 1000.0) / 1000.0).collect();
        let quad: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| x[i] * c.get(i, j) * x[j]).sum();
        prop_assert!(quad >= -1e-9);
        for i in 0..n {
            prop_assert_eq!(c.get(i, i), 1.0);
            for j in 0..n {
                prop_assert_eq!(c.get(i, j), c.get(j, i));
                prop_assert!(c.get(i, j).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn likelihood_ignores_label_names(
        (c, labels, shift) in correlation().prop_flat_map(|c| { let n = c.n(); (Just(c), labels_for(n), 0..n as u32) })
    ) {
        let n = c.n() as u32;
        let rotated: Vec<u32> = labels.iter().map(|&s| (s - 1 + shift) % n + 1).collect();
        let a = log_likelihood(&c, &ClusterConfiguration::new(labels).unwrap()).unwrap();
        let b = log_likelihood(&c, &ClusterConfiguration::new(rotated).unwrap()).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn incremental_moves_match_recomputation(
        (c, labels, moves) in correlation().prop_flat_map(|c| {
            let n = c.n();
            (Just(c), labels_for(n), prop::collection::vec((0..n, 1..=n as u32), 1..20))
        })
    ) {
        let mut inc = IncrementalStats::new(&c, &ClusterConfiguration::new(labels).unwrap()).unwrap();
        for (i, to) in moves {
            inc.move_object(i, to);
            let s = inc.configuration();
            let full = cluster_stats(&c, &s).unwrap();
            for st in &full.clusters {
                prop_assert_eq!(inc.stat(st.label).n, st.n);
                prop_assert!((inc.stat(st.label).c - st.c).abs() < 1e-10);
            }
            prop_assert!((inc.log_likelihood() - full.log_likelihood()).abs() < 1e-10);
        }
    }

    #[test]
    fn canonical_form_is_idempotent(labels in (1usize..15).prop_flat_map(labels_for)) {
        let s = ClusterConfiguration::new(labels).unwrap();
        let once = s.canonical();
        prop_assert!(once.is_canonical());
        prop_assert_eq!(once.canonical(), once.clone());
        prop_assert_eq!(once.n_clusters(), s.n_clusters());
    }

    #[test]
    fn aggregation_conserves_session_volume(
        trades in prop::collection::vec((0i64..10 * 3600, 0usize..3, 1.0f64..1000.0), 1..200)
    ) {
        let day = NaiveDate::from_ymd_opt(2012, 11, 1).unwrap();
        let offset = chrono::FixedOffset::east_opt(2 * 3600).unwrap();
        let cal = SessionCalendar::new(
            vec![day],
            NaiveTime::from_hms_opt(9, 0, 0).unwrap(),
            NaiveTime::from_hms_opt(17, 0, 0).unwrap(),
            15,
            offset,
        )
        .unwrap();
        // 08:00 local onwards, so some trades fall outside the session
        let base = day.and_hms_opt(6, 0, 0).unwrap().and_utc().timestamp_nanos_opt().unwrap();
        let mut ticks: Vec<TickRecord> = trades
            .iter()
            .map(|&(sec, inst, volume)| TickRecord {
                timestamp: base + sec * 1_000_000_000,
                instrument: format!("S{inst}"),
                kind: TickKind::Trade { price: 10.0, volume },
            })
            .collect();
        ticks.sort_by_key(|t| t.timestamp);
        let in_session: f64 = ticks
            .iter()
            .filter(|t| cal.locate(t.timestamp).is_some())
            .map(|t| match t.kind { TickKind::Trade { volume, .. } => volume, _ => 0.0 })
            .sum();
        let bars = aggregate(&ticks, &cal);
        let total: f64 = bars.bars.iter().flatten().map(|b| b.trade_volume).sum();
        prop_assert!((total - in_session).abs() <= 1e-9 * in_session.max(1.0));
    }

    #[test]
    fn transition_updates_commute(pairs in prop::collection::vec((1u32..5, 1u32..5), 0..40), cut in 0usize..40) {
        let states = [1, 2, 3, 4];
        let apply = |m: TransitionMatrix, ps: &[(u32, u32)]| ps.iter().fold(m, |m, &(a, b)| m.update(a, b).unwrap());
        let forward = apply(TransitionMatrix::empty(&states), &pairs);
        let cut = cut.min(pairs.len());
        let (head, tail) = pairs.split_at(cut);
        let split = apply(apply(TransitionMatrix::empty(&states), tail), head);
        prop_assert_eq!(&forward.counts, &split.counts);
        for row in &forward.probabilities {
            let s: f64 = row.iter().sum();
            prop_assert!(s == 0.0 || (s - 1.0).abs() <= 1e-12);
        }
        // a sequence on one day is the same as its consecutive pairs
        let seq: Vec<(u8, u32)> = pairs.iter().map(|&(a, _)| (0, a)).collect();
        let batch = estimate(&seq, &states, false).unwrap();
        let online = apply(TransitionMatrix::empty(&states), &seq.windows(2).map(|w| (w[0].1, w[1].1)).collect::<Vec<_>>());
        prop_assert_eq!(batch, online);
    }
}
