// Two topics whose visibility ranking flips as `d` grows: one lingered low
// on the list for a long time, the other touched rank 1 briefly.
//
// ```bash
// cargo run -p trendvis --example crossover
// ```

use trendvis::model::{DuplicatePolicy, RankObservation, TopicId, Trajectory};
use trendvis::visibility::{find_crossover, importance_transform, visibility_profile, Discrimination};

pub fn run_example() -> anyhow::Result<()> {
    let lingering = Trajectory::from_observations(
        TopicId::new("lingering")?,
        50,
        (0..120).map(|t| RankObservation::new(t, 35 + (t % 10) as u32)),
        DuplicatePolicy::Strict,
    )?;
    let spike = Trajectory::from_observations(
        TopicId::new("spike")?,
        50,
        [(0, 8), (1, 3), (2, 1), (3, 1), (4, 2), (5, 6), (6, 14)]
            .into_iter()
            .map(|(t, r)| RankObservation::new(t, r)),
        DuplicatePolicy::Strict,
    )?;

    let grid: Vec<f64> = (0..=6).map(|i| i as f64 * 0.5).collect();
    let a = visibility_profile(&lingering, &grid)?;
    let b = visibility_profile(&spike, &grid)?;
    println!("{:>4} {:>12} {:>12}", "d", "lingering", "spike");
    for ((d, va), (_, vb)) in a.iter().zip(&b) {
        println!("{d:>4.1} {va:>12.5} {vb:>12.5}");
    }

    match find_crossover(&lingering, &spike, 0.0, 3.0, 1e-9)? {
        Some(c) => println!("ranking flips at d = {:.6} (bracket {:.9}..{:.9})", c.d, c.lo, c.hi),
        None => println!("no crossover in [0, 3]"),
    }

    // the importance-weighted redraw of the spike: its area is the visibility
    let series = importance_transform(&spike, Discrimination::new(1.0)?);
    for (t, h) in &series.points {
        println!("  minute {t}: height {h:.4}");
    }
    println!("  area = {:.4}", series.total());
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
