//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Reference values are computed here from closed forms and
//! exhaustive search, never from the code under test.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use mstate::corr::column_pearson;
use mstate::ga::{brute_force_best, evolve, GaConfig};
use mstate::likelihood::{cluster_stats, coupling, log_likelihood, ClusterConfiguration};
use mstate::powerlaw::{fit, hurwitz_zeta, DiscretePowerLaw};
use mstate::rng::{standard_normal, stream, Domain};
use mstate::states::{assign_all, extract_ssvs, feature_vectors};
use mstate::synth::{adjusted_rand_index, generate, PlantedSpec};
use mstate::transitions::{estimate, TransitionMatrix};
use mstate::CorrelationMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// One-factor correlation matrix `C_ij = l_i l_j` with loadings in `(lo, hi)`.
fn factor_matrix<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> CorrelationMatrix {
    let l: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    let values = (0..n * n).map(|k| if k / n == k % n { 1.0 } else { l[k / n] * l[k % n] }).collect();
    CorrelationMatrix::from_rows(n, values).unwrap()
}

fn random_labels<R: Rng>(rng: &mut R, n: usize) -> Vec<u32> {
    let k = rng.random_range(1..=n as u32);
    (0..n).map(|_| rng.random_range(1..=k)).collect()
}

/// Member count and internal correlation sum of every label, summed directly.
fn group_sums(c: &CorrelationMatrix, labels: &[u32]) -> Vec<(f64, f64)> {
    let mut ids: Vec<u32> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    ids.iter()
        .map(|&s| {
            let m: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == s).collect();
            let csum: f64 = m.iter().flat_map(|&i| m.iter().map(move |&j| (i, j))).map(|(i, j)| c.get(i, j)).sum();
            (m.len() as f64, csum)
        })
        .collect()
}

fn likelihood_correctness() -> Outcome {
    let t = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;

    let pair = CorrelationMatrix::from_rows(2, vec![1.0, 0.5, 0.5, 1.0]).unwrap();
    let triple = CorrelationMatrix::from_rows(3, vec![1.0, 0.5, 0.5, 0.5, 1.0, 0.5, 0.5, 0.5, 1.0]).unwrap();
    let cases = [
        ("singletons", log_likelihood(&triple, &ClusterConfiguration::singletons(3)).unwrap(), 0.0),
        ("pair", log_likelihood(&pair, &ClusterConfiguration::single_cluster(2)).unwrap(), 0.143841),
        ("triple", log_likelihood(&triple, &ClusterConfiguration::single_cluster(3)).unwrap(), 0.346574),
    ];
    let exact = [0.0, 0.5 * ((2.0f64 / 3.0).ln() + 2f64.ln()), 0.5 * 2f64.ln()];
    for ((name, got, printed), want) in cases.iter().zip(exact) {
        let err = (got - want).abs();
        ok &= err <= 1e-9 && (got - printed).abs() <= 5e-7;
        notes.push(format!("{name} {got:.9} (err {err:.1e})"));
    }

    let mut rng = stream(1, Domain::Test, 1, 0);
    let mut singleton_zero = true;
    let mut invariant = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=30);
        let c = factor_matrix(&mut rng, n, -0.95, 0.95);
        singleton_zero &= log_likelihood(&c, &ClusterConfiguration::singletons(n)).unwrap() == 0.0;
        let labels = random_labels(&mut rng, n);
        let mut perm: Vec<u32> = (1..=n as u32).collect();
        perm.shuffle(&mut rng);
        let relabeled: Vec<u32> = labels.iter().map(|&s| perm[s as usize - 1]).collect();
        let a = log_likelihood(&c, &ClusterConfiguration::new(labels).unwrap()).unwrap();
        let b = log_likelihood(&c, &ClusterConfiguration::new(relabeled).unwrap()).unwrap();
        invariant += usize::from(a.to_bits() == b.to_bits());
    }
    let secs = t.elapsed().as_secs_f64();
    ok &= singleton_zero && invariant == 1000 && secs < 5.0;
    notes.push(format!("all-singleton zero {singleton_zero}, relabel bit-exact {invariant}/1000, {secs:.2}s"));
    outcome(ok, notes.join("; "))
}

fn derivation_cross_check() -> Outcome {
    let mut rng = stream(2, Domain::Test, 2, 0);
    let mut worst_h = 0f64;
    let mut worst_g_route = 0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..=25);
        // positive loadings keep every group strictly inside n < c < n^2
        let c = factor_matrix(&mut rng, n, 0.05, 0.95);
        let labels = random_labels(&mut rng, n);
        let l = log_likelihood(&c, &ClusterConfiguration::new(labels.clone()).unwrap()).unwrap();
        let mut h = 0.0;
        let mut via_g = 0.0;
        for (ns, cs) in group_sums(&c, &labels) {
            if ns > 1.0 {
                h += 0.5 * ((cs / ns).ln() + (ns - 1.0) * ((ns * ns - cs) / (ns * ns - ns)).ln());
                let g2 = (cs - ns) / (ns * ns - ns);
                via_g += -0.5 * ((ns * g2 + 1.0 - g2).ln() + (ns - 1.0) * (1.0 - g2).ln());
            }
        }
        worst_h = worst_h.max((l + h).abs());
        worst_g_route = worst_g_route.max((l - via_g).abs());
    }

    let mut worst_coupling = 0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..=200usize) as f64;
        let g: f64 = rng.random_range(0.0..0.999);
        let c = g * g * (n * n - n) + n;
        worst_coupling = worst_coupling.max((coupling(n as usize, c) - g).abs());
    }
    let ok = worst_h <= 1e-12 && worst_g_route <= 1e-12 && worst_coupling <= 1e-12;
    outcome(
        ok,
        format!(
            "max |L + H| {worst_h:.1e}, max |L - L(g)| {worst_g_route:.1e}, max |g - g(c)| {worst_coupling:.1e} over 1000 each"
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut hits = 0;
    let mut slowest = 0f64;
    let sizes = [6, 8, 10];
    for k in 0..20u64 {
        let mut rng = stream(3, Domain::Test, k, 0);
        let n = sizes[k as usize % 3];
        let mut parts = Vec::new();
        let mut left = n;
        while left > 0 {
            let s = rng.random_range(1..=left.min(4));
            parts.push(s);
            left -= s;
        }
        let couplings = parts.iter().map(|_| rng.random_range(0.2..0.9)).collect();
        let spec = PlantedSpec { sizes: parts, couplings, d: rng.random_range(10..60), seed: k, shuffle: true };
        let c = column_pearson(&generate(&spec).unwrap().0).unwrap();
        let config = GaConfig {
            population_size: 200,
            max_generations: 500,
            stall_generations: 100,
            master_seed: k,
            ..GaConfig::default()
        };
        let t = Instant::now();
        let ga = evolve(&c, &config).unwrap();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        let (_, best) = brute_force_best(&c).unwrap();
        hits += usize::from(ga.best_fitness >= best - 1e-9);
    }
    outcome(hits >= 18 && slowest < 5.0, format!("{hits}/20 reach the exhaustive maximum; slowest {slowest:.2}s"))
}

fn planted_recovery() -> Outcome {
    let mut exact = 0;
    let mut slowest = 0f64;
    for seed in 0..20 {
        let (r, truth) = generate(&PlantedSpec::equal(4, 16, 0.9, 400, seed)).unwrap();
        let c = column_pearson(&r).unwrap();
        let config = GaConfig {
            population_size: 600,
            max_generations: 4000,
            stall_generations: 1000,
            mutation_probability: 0.5,
            master_seed: seed,
            ..GaConfig::for_scale(60).unwrap()
        };
        let t = Instant::now();
        let result = evolve(&c, &config).unwrap();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        exact += usize::from(adjusted_rand_index(&result.best, &truth) == 1.0);
    }
    outcome(exact >= 19 && slowest < 60.0, format!("ARI = 1 in {exact}/20 seeds; slowest {slowest:.2}s"))
}

fn coupling_recovery() -> Outcome {
    let planted = [0.3, 0.6, 0.9];
    let mut within = [0usize; 3];
    for trial in 0..100 {
        let spec =
            PlantedSpec { sizes: vec![16; 3], couplings: planted.to_vec(), d: 1000, seed: trial, shuffle: false };
        let (r, truth) = generate(&spec).unwrap();
        let stats = cluster_stats(&column_pearson(&r).unwrap(), &truth).unwrap();
        for (label, members) in truth.clusters() {
            let k = members[0] / 16;
            let g = stats.get(label).unwrap().coupling();
            within[k] += usize::from((g - planted[k]).abs() <= 0.05);
        }
    }
    outcome(
        within.iter().all(|&w| w >= 95),
        format!("within ±0.05: g=0.3 {}/100, g=0.6 {}/100, g=0.9 {}/100", within[0], within[1], within[2]),
    )
}

fn powerlaw_self_consistency() -> Outcome {
    let t = Instant::now();
    let sampler = DiscretePowerLaw::new(2.5, 1).sampler();
    let mut consistent = 0;
    for trial in 0..50 {
        let mut rng = stream(6, Domain::Sampler, trial, 0);
        let xs: Vec<u64> = (0..2000).map(|_| sampler.sample(&mut rng)).collect();
        let f = fit(&xs, 1000, trial).unwrap();
        consistent += usize::from((2.35..=2.65).contains(&f.alpha) && f.p_value.unwrap() > 0.1);
    }
    let null_secs = t.elapsed().as_secs_f64();

    // geometric on {1, 2, ...} with the same mean as the power law above
    let q = hurwitz_zeta(2.5, 1.0) / hurwitz_zeta(1.5, 1.0);
    let mut rejected = 0;
    for trial in 0..50 {
        let mut rng = stream(6, Domain::Test, trial, 1);
        let xs: Vec<u64> = (0..2000)
            .map(|_| {
                let mut k = 1;
                while rng.random::<f64>() >= q {
                    k += 1;
                }
                k
            })
            .collect();
        let f = fit(&xs, 1000, trial).unwrap();
        rejected += usize::from(f.p_value.unwrap() < 0.1);
    }
    let ok = consistent >= 40 && null_secs < 120.0 && rejected >= 30;
    outcome(
        ok,
        format!(
            "power law: alpha in range and p > 0.1 in {consistent}/50 ({null_secs:.1}s); geometric (q = {q:.4}): p < 0.1 in {rejected}/50"
        ),
    )
}

fn ssv_round_trip() -> Outcome {
    use chrono::{Duration, FixedOffset, TimeZone};
    use mstate::corr::{ReturnsMatrix, SeriesLabel};
    use mstate::marketdata::Feature;

    let per_state = 25;
    let instruments = 4;
    let centres = [[0.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]];
    let states: Vec<usize> = (0..4 * per_state).map(|i| i % 4).collect();
    let tz = FixedOffset::east_opt(0).unwrap();
    let start = tz.with_ymd_and_hms(2012, 11, 1, 9, 0, 0).unwrap();
    let periods = (0..states.len() as i64).map(|i| start + Duration::minutes(5 * i)).collect();
    let mut rng = stream(7, Domain::Test, 0, 0);
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for f in Feature::ALL {
        for inst in 0..instruments {
            rows.push(SeriesLabel { instrument: format!("S{inst}"), feature: f });
            values.extend(states.iter().map(|&s| centres[s][f.index()] + 0.05 * standard_normal(&mut rng)));
        }
    }
    let r = ReturnsMatrix::new(rows, periods, values).unwrap();
    let truth = ClusterConfiguration::new(states.iter().map(|&s| s as u32 + 1).collect()).unwrap();
    let stats = cluster_stats(&CorrelationMatrix::identity(truth.n()), &truth).unwrap();
    let ssvs = extract_ssvs(&r, &truth, &[1, 2, 3, 4], &stats).unwrap();

    // realized geometry of the setup, measured on the feature vectors
    let fvs = feature_vectors(&r);
    let dist = |a: &[f64; 4], b: &[f64; 4]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let dispersion = (fvs
        .iter()
        .zip(truth.labels())
        .map(|(fv, &s)| dist(&fv.values, &ssvs[s as usize - 1].values).powi(2))
        .sum::<f64>()
        / fvs.len() as f64)
        .sqrt();
    let separation = (0..4)
        .flat_map(|a| (a + 1..4).map(move |b| (a, b)))
        .map(|(a, b)| dist(&ssvs[a].values, &ssvs[b].values))
        .fold(f64::INFINITY, f64::min);
    let assigned = assign_all(&r, &ssvs).unwrap();
    let own = assigned.iter().zip(truth.labels()).filter(|(a, &s)| a.state == s).count();
    let ratio = separation / dispersion;
    outcome(
        ratio >= 10.0 && own == assigned.len(),
        format!("separation/dispersion {ratio:.1}; {own}/{} periods reassigned to their own state", assigned.len()),
    )
}

fn transition_matrices() -> Outcome {
    let day0 = |s: &[u32]| s.iter().map(|&x| (0u32, x)).collect::<Vec<_>>();
    let m = estimate(&day0(&[1, 1, 2, 1]), &[1, 2], false).unwrap();
    let example = m.probabilities == vec![vec![0.5, 0.5], vec![1.0, 0.0]];

    let mut rng = stream(8, Domain::Test, 0, 0);
    let mut worst_row = 0f64;
    let mut online_equal = 0;
    for _ in 0..1000 {
        let k = rng.random_range(1..=6u32);
        let states: Vec<u32> = (1..=k).collect();
        let len = rng.random_range(2..80);
        let mut day = 0u32;
        let seq: Vec<(u32, u32)> = (0..len)
            .map(|_| {
                if rng.random::<f64>() < 0.1 {
                    day += 1;
                }
                (day, rng.random_range(1..=k))
            })
            .collect();
        let batch = estimate(&seq, &states, false).unwrap();
        for (row, counts) in batch.probabilities.iter().zip(&batch.counts) {
            if counts.iter().any(|&c| c > 0) {
                worst_row = worst_row.max((row.iter().sum::<f64>() - 1.0).abs());
            }
        }
        let mut online = TransitionMatrix::empty(&states);
        for w in seq.windows(2).filter(|w| w[0].0 == w[1].0) {
            online = online.update(w[0].1, w[1].1).unwrap();
        }
        online_equal += usize::from(online == batch);
    }
    outcome(
        example && worst_row <= 1e-12 && online_equal == 1000,
        format!(
            "worked example exact {example}; max |row sum - 1| {worst_row:.1e}; online = batch {online_equal}/1000"
        ),
    )
}

fn run_chain(bin: &Path, out: &Path, workers: usize) -> Result<(), String> {
    for stage in
        ["synth", "aggregate", "correlate", "cluster", "powerlaw", "ssv", "assign", "transitions", "export-graph"]
    {
        let status = Command::new(bin)
            .args([stage, "--seed", "17", "--workers", &workers.to_string(), "--out"])
            .arg(out)
            .env("RUST_LOG", "warn")
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("{stage} exited with {status}"));
        }
    }
    Ok(())
}

/// Artifact name -> bytes, manifests excluded.
fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), e.path()))
        .filter(|(name, _)| !name.ends_with(".manifest.json"))
        .map(|(name, p)| (name, std::fs::read(p).unwrap()))
        .collect();
    v.sort();
    v
}

fn check_gexf(doc: &str, labels: &ClusterConfiguration) -> Result<(usize, usize), String> {
    let xml = roxmltree::Document::parse(doc).map_err(|e| e.to_string())?;
    let root = xml.root_element();
    let ns = "http://www.gexf.net/1.2draft";
    if root.tag_name().name() != "gexf"
        || root.tag_name().namespace() != Some(ns)
        || root.attribute("version") != Some("1.2")
    {
        return Err("root is not a GEXF 1.2 element".into());
    }
    let graph = root.children().find(|n| n.has_tag_name((ns, "graph"))).ok_or("no graph element")?;
    if graph.attribute("defaultedgetype") != Some("undirected") {
        return Err("graph is not undirected".into());
    }
    let nodes: Vec<_> = graph.descendants().filter(|n| n.has_tag_name((ns, "node"))).collect();
    let ids: std::collections::HashSet<_> = nodes.iter().filter_map(|n| n.attribute("id")).collect();
    let edges: Vec<_> = graph.descendants().filter(|n| n.has_tag_name((ns, "edge"))).collect();
    for e in &edges {
        let ends = [e.attribute("source"), e.attribute("target")];
        if ends.iter().any(|x| x.is_none_or(|x| !ids.contains(x))) {
            return Err("edge endpoint is not a node".into());
        }
        let w: f64 = e.attribute("weight").and_then(|w| w.parse().ok()).ok_or("edge without weight")?;
        if w < 0.01 {
            return Err(format!("edge weight {w} below floor"));
        }
    }
    let expected: usize = labels.clusters().iter().map(|(_, m)| m.len() * (m.len() - 1) / 2).sum();
    if ids.len() != nodes.len() || nodes.len() != labels.n() || edges.len() != expected {
        return Err(format!("{} nodes / {} edges, expected {} / {expected}", nodes.len(), edges.len(), labels.n()));
    }
    Ok((nodes.len(), edges.len()))
}

fn end_to_end_determinism() -> Outcome {
    let bin = Path::new(env!("CARGO_BIN_EXE_mstate"));
    let tmp = tempfile::tempdir().unwrap();
    let dirs: Vec<_> = ["a", "b", "c"].iter().map(|d| tmp.path().join(d)).collect();
    let t = Instant::now();
    if let Err(e) = run_chain(bin, &dirs[0], 1) {
        return outcome(false, format!("chain failed: {e}"));
    }
    let secs = t.elapsed().as_secs_f64();
    for (dir, workers) in dirs[1..].iter().zip([1, 8]) {
        if let Err(e) = run_chain(bin, dir, workers) {
            return outcome(false, format!("chain failed: {e}"));
        }
    }
    let (a, b, c) = (artifacts(&dirs[0]), artifacts(&dirs[1]), artifacts(&dirs[2]));
    let repeat = a == b;
    let threads = a == c;
    let labels: ClusterConfiguration =
        serde_json::from_slice(&std::fs::read(dirs[0].join("labels.json")).unwrap()).unwrap();
    let graph = std::fs::read_to_string(dirs[0].join("graph.gexf")).unwrap();
    let (gexf_ok, gexf_note) = match check_gexf(&graph, &labels) {
        Ok((n, e)) => (true, format!("GEXF {n} nodes, {e} edges")),
        Err(e) => (false, format!("GEXF invalid: {e}")),
    };
    outcome(
        secs < 120.0 && repeat && threads && gexf_ok,
        format!(
            "{} artifacts; chain {secs:.1}s; identical across runs {repeat}, across 1 vs 8 workers {threads}; {gexf_note}",
            a.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("likelihood correctness", likelihood_correctness),
        ("derivation cross-check", derivation_cross_check),
        ("exhaustive-search oracle", oracle_equivalence),
        ("planted-partition recovery", planted_recovery),
        ("coupling recovery", coupling_recovery),
        ("power-law self-consistency", powerlaw_self_consistency),
        ("signature round trip", ssv_round_trip),
        ("transition matrices", transition_matrices),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let t = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "[{}/9] {:<27} {}  {} ({:.1}s)",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
