// Per-category analysis: each category gets its own sweep; categories
// with too few regressable topics are listed as skipped.
//
// ```bash
// cargo run -p trendvis --example category_report --release
// ```

use trendvis::export::write_category_csv;
use trendvis::regression::per_category_sweep;
use trendvis::synth::{generate_dataset, SynthConfig};
use trendvis::visibility::DGrid;

const CONFIG: &str = "
n_topics = 2000
seed = 2024
sigma = 0.1
category = celebrity,2,0.6
category = sports,1,1.5
category = science,1,2.2
category = obscure,0.005
";

pub fn run_example() -> anyhow::Result<()> {
    let cfg = SynthConfig::parse(CONFIG)?;
    let ds = generate_dataset(&cfg)?;
    let analysis = per_category_sweep(&ds, &DGrid::range(0.0, 3.0, 0.05)?, 30)?;

    let mut csv = Vec::new();
    write_category_csv(&mut csv, &analysis.reports)?;
    print!("{}", String::from_utf8(csv)?);
    for s in &analysis.skipped {
        println!("skipped {} ({} topics): {:?}", s.category, s.n_topics, s.reason);
    }
    println!("planted levels: {:?}", cfg.category_truth());
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
