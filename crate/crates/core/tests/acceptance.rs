//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line; run
//! with `cargo test --test acceptance -- --nocapture --test-threads 1` to see
//! them in order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use trendvis::model::{DuplicatePolicy, RankObservation, TopicId, Trajectory};
use trendvis::regression::{per_category_sweep, sweep_dmax, Boundary};
use trendvis::synth::{generate_dataset, oracle::oracle_sweep, RankWalk, ReadModel, SynthConfig};
use trendvis::visibility::{
    find_crossover, importance_transform, rank1_dwell, visibility, visibility_direct, DGrid, Discrimination,
};

fn verdict(id: u32, name: &str, ok: bool, detail: &str) {
    println!("[{}] criterion {id:>2}: {name} -- {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn d(x: f64) -> Discrimination {
    Discrimination::new(x).unwrap()
}

fn traj_from(pairs: &[(u64, u32)]) -> Trajectory {
    Trajectory::from_observations(
        TopicId::new("t").unwrap(),
        50,
        pairs.iter().map(|&(t, r)| RankObservation::new(t, r)),
        DuplicatePolicy::Strict,
    )
    .unwrap()
}

fn random_ranks(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<u32> {
    let len = rng.gen_range(1..=max_len);
    (0..len).map(|_| rng.gen_range(1..=50)).collect()
}

fn traj_of(ranks: &[u32]) -> Trajectory {
    let pairs: Vec<(u64, u32)> = ranks.iter().enumerate().map(|(i, &r)| (i as u64 * 2, r)).collect();
    traj_from(&pairs)
}

fn worked() -> [Trajectory; 4] {
    [
        traj_from(&[(1, 40), (2, 30), (3, 50)]),
        traj_from(&[(10, 40), (11, 40), (12, 30), (13, 30), (14, 50), (15, 50)]),
        traj_from(&[(27, 40), (28, 30), (29, 30), (30, 50), (31, 40), (32, 50)]),
        traj_from(&[(27, 40), (28, 30), (29, 30), (30, 50), (31, 40), (32, 20)]),
    ]
}

#[test]
fn criterion_01_worked_examples() {
    let ts = worked();
    let v0: Vec<f64> = ts.iter().map(|t| visibility(t, Discrimination::ZERO)).collect();
    let v1: Vec<f64> = ts.iter().map(|t| visibility(t, d(1.0))).collect();
    let v1_4dp: Vec<f64> = v1.iter().map(|v| (v * 1e4).round() / 1e4).collect();
    let ratio = v1[3] / v1[2];
    let ok = v0 == [3.0, 6.0, 6.0, 6.0] && v1_4dp == [0.0783, 0.1567, 0.1567, 0.1867] && ratio > 1.19;
    verdict(
        1,
        "worked trajectories",
        ok,
        &format!("V(0)={v0:?} V(1)@4dp={v1_4dp:?} V4/V3={ratio:.4}"),
    );
}

#[test]
fn criterion_02_weight_ratios_at_d3() {
    let t = traj_from(&[(0, 1), (1, 2), (2, 3)]);
    let w = importance_transform(&t, d(3.0));
    let (w1, w2, w3) = (w.points[0].1, w.points[1].1, w.points[2].1);
    let e8 = ((w1 / w2) - 8.0).abs() / 8.0;
    let e27 = ((w1 / w3) - 27.0).abs() / 27.0;
    verdict(
        2,
        "D=3 weight ratios",
        e8 <= 1e-12 && e27 <= 1e-12,
        &format!("rank1/rank2 rel err {e8:.2e}, rank1/rank3 rel err {e27:.2e}"),
    );
}

#[test]
fn criterion_03_large_d_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut ok = true;
    for _ in 0..1000 {
        let mut ranks = random_ranks(&mut rng, 500);
        // make rank 1 show up often enough to matter
        for r in ranks.iter_mut() {
            if rng.gen_bool(0.2) {
                *r = 1;
            }
        }
        let t = traj_of(&ranks);
        let gap = (visibility(&t, d(30.0)) - rank1_dwell(&t) as f64).abs();
        let bound = t.len() as f64 * 2f64.powi(-30);
        worst = worst.max(gap / bound);
        ok &= gap <= bound;
    }
    verdict(3, "V(30) vs rank-1 dwell", ok, &format!("1000 trajectories, worst gap/bound {worst:.3}"));
}

#[test]
fn criterion_04_axiom_properties() {
    let grid = DGrid::default_sweep();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures: Vec<String> = Vec::new();
    let n_traj = 1000;
    for case in 0..n_traj {
        let ranks = random_ranks(&mut rng, 200);
        let t = traj_of(&ranks);

        // time proportionality: k copies of every observation at fresh minutes
        for k in [2u64, 3, 5] {
            let mut pairs = Vec::new();
            for copy in 0..k {
                for (i, &r) in ranks.iter().enumerate() {
                    pairs.push((copy * 100_000 + i as u64, r));
                }
            }
            let tk = traj_from(&pairs);
            for &x in grid.values() {
                let (base, scaled) = (visibility(&t, d(x)), visibility(&tk, d(x)));
                if (scaled - k as f64 * base).abs() > 1e-12 * scaled {
                    failures.push(format!("case {case}: k={k} d={x}: {scaled} vs {}", k as f64 * base));
                }
            }
        }

        // one rank improved: strictly larger for d > 0, unchanged at d = 0
        if let Some(idx) = ranks.iter().position(|&r| r > 1) {
            let mut better = ranks.clone();
            better[idx] = rng.gen_range(1..ranks[idx]);
            let tb = traj_of(&better);
            if visibility(&tb, Discrimination::ZERO) != visibility(&t, Discrimination::ZERO) {
                failures.push(format!("case {case}: V(0) changed"));
            }
            for &x in &grid.values()[1..] {
                if !(visibility(&tb, d(x)) > visibility(&t, d(x))) {
                    failures.push(format!("case {case}: improvement did not raise V({x})"));
                }
            }
        }

        // permutation of observation order
        let mut shuffled = ranks.clone();
        shuffled.shuffle(&mut rng);
        let tp = traj_of(&shuffled);
        for &x in grid.values() {
            let (a, b) = (visibility(&t, d(x)), visibility(&tp, d(x)));
            let direct = visibility_direct(&tp, d(x));
            if a != b || (a - direct).abs() > 1e-12 * a {
                failures.push(format!("case {case}: permutation changed V({x})"));
            }
        }

        // strictly decreasing in d when any rank > 1
        let profile: Vec<f64> = grid.values().iter().map(|&x| visibility(&t, d(x))).collect();
        let any_below_top = ranks.iter().any(|&r| r > 1);
        let decreasing = profile.windows(2).all(|w| w[1] < w[0]);
        let constant = profile.iter().all(|&v| v == ranks.len() as f64);
        if any_below_top && !decreasing || !any_below_top && !constant {
            failures.push(format!("case {case}: monotone decay violated"));
        }
    }
    verdict(
        4,
        "axiom property suites",
        failures.is_empty(),
        &format!(
            "{n_traj} trajectories x 201-point grid, {} violations{}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    );
}

#[test]
fn criterion_05_crossover() {
    let a = traj_of(&[4, 4]);
    let b = traj_of(&[2]);
    let c = find_crossover(&a, &b, 0.0, 2.0, 1e-7).unwrap().unwrap();
    let analytic_ok = (c.d - 1.0).abs() <= 1e-6;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tol = 1e-8;
    let (mut checked, mut bad) = (0, 0);
    while checked < 300 {
        let ta = traj_of(&random_ranks(&mut rng, 120));
        let tb = traj_of(&random_ranks(&mut rng, 120));
        let f = |x: f64| visibility(&ta, d(x)) - visibility(&tb, d(x));
        let (lo, hi) = (0.0, 3.0);
        if f(lo).signum() == f(hi).signum() || f(lo) == 0.0 || f(hi) == 0.0 {
            continue;
        }
        checked += 1;
        match find_crossover(&ta, &tb, lo, hi, tol).unwrap() {
            Some(c) => {
                let brackets = c.lo <= c.d && c.d <= c.hi && c.hi - c.lo <= tol;
                let sign_change = f(c.lo) == 0.0 || f(c.hi) == 0.0 || f(c.lo).signum() != f(c.hi).signum();
                if !(brackets && sign_change) {
                    bad += 1;
                }
            }
            None => bad += 1,
        }
    }
    verdict(
        5,
        "crossover bisection",
        analytic_ok && bad == 0,
        &format!("analytic d*={:.9}; {checked} random sign-changing pairs, {bad} bad brackets", c.d),
    );
}

fn oracle_config(seed: u64) -> SynthConfig {
    SynthConfig {
        n_topics: 5000,
        seed,
        reads: ReadModel {
            c: 1e6,
            b: 1.0,
            d_star: 1.2,
            sigma: 0.2,
        },
        ..Default::default()
    }
}

#[test]
fn criterion_06_oracle_equivalence() {
    let grid = DGrid::default_sweep();
    let mut worst = 0.0f64;
    let mut identical = true;
    let mut dmaxes = Vec::new();
    for seed in 1..=5 {
        let ds = generate_dataset(&oracle_config(seed)).unwrap();
        let main = sweep_dmax(&ds, &grid).unwrap();
        let oracle = oracle_sweep(&ds, grid.values()).unwrap();
        for (p, q) in main.curve.iter().zip(&oracle.curve) {
            worst = worst.max((p.r2 - q.r2).abs());
            identical &= p.d == q.d && p.n == q.n;
        }
        identical &= main.curve.len() == oracle.curve.len();
        identical &= main.d_max == oracle.d_max && main.boundary == oracle.boundary;
        dmaxes.push(main.d_max);
    }
    verdict(
        6,
        "sweep vs independent oracle",
        worst <= 1e-9 && identical,
        &format!("seeds 1..5 x 5000 topics, max |dr2| {worst:.2e}, d_max {dmaxes:?}"),
    );
}

#[test]
fn criterion_07_noiseless_recovery_and_boundary() {
    let grid = DGrid::default_sweep();
    let cfg = SynthConfig {
        n_topics: 5000,
        seed: 7,
        reads: ReadModel {
            c: 1e6,
            b: 1.0,
            d_star: 1.2,
            sigma: 0.0,
        },
        ..Default::default()
    };
    let ds = generate_dataset(&cfg).unwrap();
    let main = sweep_dmax(&ds, &grid).unwrap();
    let oracle = oracle_sweep(&ds, grid.values()).unwrap();
    let nearest = main
        .curve
        .iter()
        .min_by(|a, b| (a.d - 1.2).abs().total_cmp(&(b.d - 1.2).abs()))
        .unwrap();
    let step = DGrid::DEFAULT_STEP;
    let recovery_ok = nearest.r2 >= 0.999
        && (main.d_max - oracle.d_max).abs() <= step + 1e-12
        && main.boundary == Boundary::Interior;

    let edge_cfg = SynthConfig {
        reads: ReadModel {
            d_star: 10.0,
            ..cfg.reads.clone()
        },
        ..cfg.clone()
    };
    let edge = sweep_dmax(&generate_dataset(&edge_cfg).unwrap(), &grid).unwrap();
    verdict(
        7,
        "noiseless recovery and edge flag",
        recovery_ok && edge.boundary == Boundary::AtUpperEdge,
        &format!(
            "r2(d={:.3})={:.6}, d_max={} (oracle {}), boundary={}; d_star=10 -> d_max={} boundary={}",
            nearest.d, nearest.r2, main.d_max, oracle.d_max, main.boundary, edge.d_max, edge.boundary
        ),
    );
}

#[test]
fn criterion_08_per_category_discrimination() {
    let grid = DGrid::default_sweep();
    let cfg = SynthConfig::parse(
        "n_topics = 4400\nseed = 8\nsigma = 0.1\ncategory = low, 1, 0.9\ncategory = high, 1, 1.8\n",
    )
    .unwrap();
    let ds = generate_dataset(&cfg).unwrap();
    let analysis = per_category_sweep(&ds, &grid, 30).unwrap();
    let by_cat: BTreeMap<&str, _> = analysis.reports.iter().map(|r| (r.category.as_str(), r)).collect();
    let (low, high) = (by_cat["low"], by_cat["high"]);
    let iso_low = sweep_dmax(&ds.restrict_to_category("low"), &grid).unwrap();
    let iso_high = sweep_dmax(&ds.restrict_to_category("high"), &grid).unwrap();
    let sizes_ok = low.n_topics >= 2000 && high.n_topics >= 2000;
    let match_ok = low.d_max == iso_low.d_max
        && low.r2_max == iso_low.r2_max
        && high.d_max == iso_high.d_max
        && high.r2_max == iso_high.r2_max;
    let gap = (high.d_max - low.d_max).abs();
    verdict(
        8,
        "per-category d_max",
        sizes_ok && match_ok && gap >= 0.5,
        &format!(
            "low: d_max={} (n={}), high: d_max={} (n={}), gap={gap:.3}, isolated runs match={match_ok}",
            low.d_max, low.n_topics, high.d_max, high.n_topics
        ),
    );
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = trendvis::cli::run(std::iter::once("trendvis").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn criterion_09_empirical_values_not_reproducible() {
    // The crawl behind the published R², category table and crossover is not
    // available. What can be checked is that the procedure runs end to end on
    // data in the documented formats.
    let dir = tempfile::tempdir().unwrap();
    let snaps = dir.path().join("crawl.tsv");
    let meta = dir.path().join("meta.csv");
    let mut lines = String::new();
    let worked = worked();
    let names = ["traj1", "traj2", "traj3", "traj4"];
    let mut by_minute: BTreeMap<u64, Vec<(u32, &str)>> = BTreeMap::new();
    for (t, name) in worked.iter().zip(names) {
        for o in t.observations() {
            // traj3 and traj4 share minutes; shift traj4 so a snapshot never repeats a rank
            let minute = if name == "traj4" { o.t + 100 } else { o.t };
            by_minute.entry(minute).or_default().push((o.rank, name));
        }
    }
    for (minute, mut entries) in by_minute {
        entries.sort();
        let ts = chrono::DateTime::from_timestamp(1_614_585_600 + minute as i64 * 60, 0).unwrap();
        let ids: Vec<(u32, TopicId)> = entries.iter().map(|(r, n)| (*r, TopicId::new(n).unwrap())).collect();
        lines.push_str(&trendvis::ingest::format_snapshot_line(ts, &ids));
        lines.push('\n');
    }
    fs::write(&snaps, lines).unwrap();
    fs::write(&meta, "topic_id,category,n_reads\ntraj1,a,100\ntraj2,a,260\ntraj3,a,240\ntraj4,a,330\n").unwrap();
    let bundle = dir.path().join("bundle");
    let b = bundle.to_str().unwrap();
    let (c1, _, e1) = run_cli(&[
        "ingest", "--strict", "--snapshots", snaps.to_str().unwrap(), "--meta", meta.to_str().unwrap(), "--out", b,
    ]);
    let (c2, v0, _) = run_cli(&["visibility", "--bundle", b, "--topic", "traj1", "--at", "0"]);
    let (c3, v1, _) = run_cli(&["visibility", "--bundle", b, "--topic", "traj4", "--at", "1"]);
    let (c4, summary, e4) = run_cli(&["sweep", "--bundle", b, "--out", dir.path().join("sweep").to_str().unwrap()]);
    let ok = c1 == 0 && c2 == 0 && c3 == 0 && c4 == 0 && v0.trim() == "3" && v1.trim().starts_with("0.18666");
    println!(
        "[INFO] criterion  9: published values (R^2=0.48 at D=0.8 over 23,993 topics; Table 1/S1; crossover D~0.37) \
         need the original crawl and are NOT reproduced; criteria 6-8 stand in for them"
    );
    verdict(
        9,
        "procedure runs end to end on documented formats",
        ok,
        &format!("exit codes {c1}/{c2}/{c3}/{c4}, V1(0)={}, V4(1)={}, {e1}{e4}summary: {}", v0.trim(), v1.trim(), summary.replace('\n', " ")),
    );
}

#[test]
fn criterion_10_performance() {
    let cfg = SynthConfig {
        n_topics: 25_000,
        seed: 10,
        walk: RankWalk {
            exit_prob: 0.008,
            max_duration: 280,
            ..Default::default()
        },
        reads: ReadModel {
            sigma: 0.2,
            ..Default::default()
        },
        ..Default::default()
    };
    let ds = generate_dataset(&cfg).unwrap();
    let avg = ds.observation_count() as f64 / ds.trajectories.len() as f64;
    let grid = DGrid::default_sweep();
    let start = Instant::now();
    let s = sweep_dmax(&ds, &grid).unwrap();
    let elapsed = start.elapsed();
    verdict(
        10,
        "sweep performance",
        elapsed.as_secs_f64() < 10.0 && s.curve.len() == 201 && (80.0..=120.0).contains(&avg),
        &format!("25000 topics, {avg:.1} obs/topic, 201 grid points in {:.3}s", elapsed.as_secs_f64()),
    );
}

fn dir_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn pipeline(root: &Path, config: &Path) -> (BTreeMap<String, Vec<u8>>, trendvis::bundle::RunManifest) {
    let synth = root.join("synth");
    let ingested = root.join("ingested");
    let swept = root.join("swept");
    let (c1, _, e1) = run_cli(&["synth", "--config", config.to_str().unwrap(), "--seed", "42", "--out", synth.to_str().unwrap()]);
    assert_eq!(c1, 0, "{e1}");
    let (c2, _, e2) = run_cli(&[
        "ingest",
        "--strict",
        "--trajectories",
        synth.join("trajectories.csv").to_str().unwrap(),
        "--meta",
        synth.join("meta.csv").to_str().unwrap(),
        "--out",
        ingested.to_str().unwrap(),
    ]);
    assert_eq!(c2, 0, "{e2}");
    let (c3, _, e3) = run_cli(&["sweep", "--bundle", ingested.to_str().unwrap(), "--per-category", "--out", swept.to_str().unwrap()]);
    assert_eq!(c3, 0, "{e3}");

    let mut files = BTreeMap::new();
    for stage in [&synth, &ingested, &swept] {
        for (name, bytes) in dir_files(stage) {
            if name != "manifest.json" {
                files.insert(format!("{}/{name}", stage.file_name().unwrap().to_string_lossy()), bytes);
            }
        }
    }
    let manifest = trendvis::bundle::read_manifest(&swept).unwrap();
    assert!(trendvis::bundle::verify_manifest(&swept, &manifest).is_empty());
    (files, manifest)
}

#[test]
fn criterion_11_round_trip_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("synth.conf");
    fs::write(
        &config,
        "n_topics = 800\nsigma = 0.15\ncategory = music, 2, 0.9\ncategory = sports, 1, 1.5\n",
    )
    .unwrap();
    let (run_a, man_a) = pipeline(&tmp.path().join("a"), &config);
    let (run_b, man_b) = pipeline(&tmp.path().join("b"), &config);
    let bytes_equal = run_a == run_b;
    let manifests_agree = man_a.outputs == man_b.outputs && man_a.parameters == man_b.parameters;

    // trajectory CSV survives a parse/write cycle byte for byte
    let original = &run_a["synth/trajectories.csv"];
    let parsed =
        trendvis::ingest::parse_trajectory_csv(original.as_slice(), "rt", &trendvis::ingest::ParseOptions::strict())
            .unwrap()
            .value;
    let mut rewritten = Vec::new();
    trendvis::ingest::write_trajectory_csv(&mut rewritten, parsed.values()).unwrap();
    let round_trip = &rewritten == original && run_a["ingested/trajectories.csv"] == *original;

    verdict(
        11,
        "round trip and determinism",
        bytes_equal && manifests_agree && round_trip,
        &format!(
            "{} output files compared, identical={bytes_equal}, manifests agree={manifests_agree}, csv round trip={round_trip}",
            run_a.len()
        ),
    );
}
