// Generate a synthetic dataset with a known discrimination level, sweep
// `d` over the default grid and recover it; then cross-check the best
// level against the independent reference implementation.
//
// ```bash
// cargo run -p trendvis --example discrimination_sweep --release
// ```

use trendvis::regression::{r2_at, refine_dmax, sweep_dmax};
use trendvis::synth::oracle::oracle_sweep;
use trendvis::synth::{generate_dataset, ReadModel, SynthConfig};
use trendvis::visibility::{DGrid, Discrimination};

pub fn run_example() -> anyhow::Result<()> {
    let cfg = SynthConfig {
        n_topics: 3000,
        seed: 7,
        reads: ReadModel {
            d_star: 1.2,
            sigma: 0.15,
            ..Default::default()
        },
        ..Default::default()
    };
    let ds = generate_dataset(&cfg)?;
    let grid = DGrid::default_sweep();
    let sweep = sweep_dmax(&ds, &grid)?;

    for p in sweep.curve.iter().step_by(20) {
        println!("d={:<5.2} r2={:.4} n={}", p.d, p.r2, p.n);
    }
    println!(
        "d_max={:.3} r2_max={:.4} boundary={} (true level {})",
        sweep.d_max,
        sweep.r2_max,
        sweep.boundary.as_str(),
        cfg.reads.d_star
    );

    let (d_fine, r2_fine) = refine_dmax(&ds, &sweep, 1e-6)?;
    println!("refined: d={d_fine:.5} r2={r2_fine:.5}");

    let fit = r2_at(&ds, Discrimination::new(sweep.d_max)?)?;
    println!("fit at d_max: log10 N = {:.3} + {:.3} log10 V", fit.intercept, fit.slope);

    let reference = oracle_sweep(&ds, grid.values())?;
    let worst = sweep
        .curve
        .iter()
        .zip(&reference.curve)
        .map(|(a, b)| (a.r2 - b.r2).abs())
        .fold(0.0, f64::max);
    println!("reference implementation: d_max={:.3}, max |r2 difference| = {worst:.2e}", reference.d_max);
    anyhow::ensure!(worst < 1e-9 && reference.d_max == sweep.d_max);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
