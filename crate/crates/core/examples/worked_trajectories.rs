// Visibility of four short hand-made trajectories at a few discrimination
// levels, computed both through the dwell histogram and by direct summation.
//
// ```bash
// cargo run -p trendvis --example worked_trajectories
// ```

use trendvis::model::{DuplicatePolicy, RankObservation, TopicId, Trajectory};
use trendvis::visibility::{visibility, visibility_direct, Discrimination};

fn trajectory(name: &str, pts: &[(u64, u32)]) -> anyhow::Result<Trajectory> {
    let obs = pts.iter().map(|&(t, r)| RankObservation::new(t, r));
    Ok(Trajectory::from_observations(TopicId::new(name)?, 50, obs, DuplicatePolicy::Strict)?)
}

pub fn run_example() -> anyhow::Result<()> {
    let topics = [
        trajectory("t1", &[(1, 40), (2, 30), (3, 50)])?,
        trajectory("t2", &[(10, 40), (11, 40), (12, 30), (13, 30), (14, 50), (15, 50)])?,
        trajectory("t3", &[(27, 40), (28, 30), (29, 30), (30, 50), (31, 40), (32, 50)])?,
        trajectory("t4", &[(27, 40), (28, 30), (29, 30), (30, 50), (31, 40), (32, 20)])?,
    ];

    println!("{:<4} {:>10} {:>10} {:>10} {:>6}", "id", "d=0", "d=1", "d=2", "best");
    for traj in &topics {
        let row: Vec<f64> = [0.0, 1.0, 2.0]
            .iter()
            .map(|&d| visibility(traj, Discrimination::new(d).unwrap()))
            .collect();
        println!(
            "{:<4} {:>10.4} {:>10.4} {:>10.6} {:>6}",
            traj.topic().as_str(),
            row[0],
            row[1],
            row[2],
            traj.best_rank().unwrap()
        );
        let d = Discrimination::new(1.0)?;
        let gap = (visibility(traj, d) - visibility_direct(traj, d)).abs();
        anyhow::ensure!(gap <= 1e-12 * visibility(traj, d), "paths disagree for {}", traj.topic().as_str());
    }

    // t3 and t4 share all but their last minute, where t4 reached rank 20
    let d1 = Discrimination::new(1.0)?;
    println!(
        "t4 - t3 at d=1: {:.4} (= 1/20 - 1/50)",
        visibility(&topics[3], d1) - visibility(&topics[2], d1)
    );
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
