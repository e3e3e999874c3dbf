//! Runs every stage of the file-based pipeline on synthetic ticks, from
//! aggregation to the transition matrix and graph, in a scratch directory.
//!
//! ```bash
//! cargo run --release --example tick_pipeline -- [out_dir]
//! ```

use mstate::pipeline::{run_chain, PipelineConfig, Stage};

fn main() -> mstate::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "mstate-demo".into());
    let cfg = PipelineConfig::parse(&format!(
        "out = {out}\n\
         scale = 30\n\
         start_date = 2012-11-05\n\
         end_date = 2012-11-09\n\
         synth.instruments = 8\n\
         synth.sizes = 30, 20, 14, 9, 6\n\
         synth.coupling = 0.85\n\
         ga.population_size = 300\n\
         bootstrap = 200\n"
    ))?;
    for m in run_chain(&Stage::CHAIN, &cfg)? {
        println!("{:<13} {:>6} ms -> {}", m.stage, m.elapsed_ms, m.outputs.join(", "));
    }
    println!();
    print!("{}", std::fs::read_to_string(cfg.artifact(mstate::pipeline::TRANSITIONS_CSV))?);
    Ok(())
}
