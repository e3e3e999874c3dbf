//! Draws cluster-size-like samples from a discrete power law, re-estimates
//! the exponent and cutoff, and runs the bootstrap goodness-of-fit test. A
//! geometric sample is fitted alongside for contrast.
//!
//! ```bash
//! cargo run --release --example powerlaw_fit -- [alpha] [x_min] [n] [replicates]
//! ```

use mstate::powerlaw::{fit, hurwitz_zeta, DiscretePowerLaw, PLAUSIBLE_P};
use mstate::rng::{stream, Domain};
use rand::Rng;

fn report(name: &str, sizes: &[u64], replicates: usize) -> mstate::Result<()> {
    let f = fit(sizes, replicates, 1)?;
    let p = f.p_value.unwrap_or(f64::NAN);
    println!(
        "{name:>10}: alpha {:.4}  x_min {}  tail {}  KS {:.4}  p {:.3}  -> {}",
        f.alpha,
        f.x_min,
        f.n_tail,
        f.ks_statistic,
        p,
        if p > PLAUSIBLE_P { "plausible power law" } else { "rejected" }
    );
    Ok(())
}

fn main() -> mstate::Result<()> {
    let mut args = std::env::args().skip(1);
    let alpha: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2.5);
    let x_min: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(2000);
    let replicates: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(1000);

    let sampler = DiscretePowerLaw::new(alpha, x_min).sampler();
    let mut rng = stream(42, Domain::Sampler, 0, 0);
    let sizes: Vec<u64> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
    report("power law", &sizes, replicates)?;

    // geometric with the same mean as the power law at x_min = 1
    let q = hurwitz_zeta(alpha, 1.0) / hurwitz_zeta(alpha - 1.0, 1.0);
    let geometric: Vec<u64> = (0..n)
        .map(|_| {
            let mut k = 1;
            while rng.random::<f64>() >= q {
                k += 1;
            }
            k
        })
        .collect();
    report("geometric", &geometric, replicates)
}
