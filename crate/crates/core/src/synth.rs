//! Synthetic trending data with a known read model.
//!
//! Each topic enters the list at a random rank and performs a reflected
//! random walk over ranks `1..=r_cap + offlist_depth`. Minutes spent below
//! `r_cap` are not recorded, which produces the same gaps a crawler sees.
//! Reads are drawn as `round(c * V(d_star)^b * 10^eps)` with
//! `eps ~ Normal(0, sigma)`, floored at 1.
//!
//! Topic `i` draws from its own ChaCha stream (master seed, stream `i`), so
//! the output does not depend on how generation is scheduled.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{
    Dataset, DuplicatePolicy, ModelError, RankObservation, TopicId, TopicMeta, Trajectory, DEFAULT_R_CAP,
    UNKNOWN_CATEGORY,
};
use crate::visibility::{visibility, Discrimination};

pub mod oracle;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("config line {line}: {reason}")]
    ConfigSyntax { line: usize, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Rank dynamics of one synthetic topic.
#[derive(Debug, Clone, PartialEq)]
pub struct RankWalk {
    /// Entry rank is uniform on `entry_rank_min..=entry_rank_max`.
    pub entry_rank_min: u32,
    pub entry_rank_max: u32,
    /// Per-minute rank change is uniform on `-max_step..=max_step`.
    pub max_step: u32,
    /// Probability of leaving the list for good after each minute.
    pub exit_prob: f64,
    pub max_duration: u32,
    /// How far below the list the walk may wander before reflecting.
    pub offlist_depth: u32,
    /// Start minute is uniform on `0..start_spread`.
    pub start_spread: u64,
}

impl Default for RankWalk {
    fn default() -> Self {
        RankWalk {
            entry_rank_min: 1,
            entry_rank_max: 50,
            max_step: 3,
            exit_prob: 0.01,
            max_duration: 240,
            offlist_depth: 10,
            start_spread: 10_080,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadModel {
    pub c: f64,
    pub b: f64,
    pub d_star: f64,
    /// Standard deviation of the log10 noise.
    pub sigma: f64,
}

impl Default for ReadModel {
    fn default() -> Self {
        ReadModel {
            c: 1.0e6,
            b: 1.0,
            d_star: 1.2,
            sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategorySpec {
    pub label: String,
    pub weight: f64,
    /// Overrides the global `d_star` for this category.
    pub d_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_topics: usize,
    pub seed: u64,
    pub r_cap: u32,
    pub walk: RankWalk,
    pub reads: ReadModel,
    pub categories: Vec<CategorySpec>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_topics: 1000,
            seed: 42,
            r_cap: DEFAULT_R_CAP,
            walk: RankWalk::default(),
            reads: ReadModel::default(),
            categories: Vec::new(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_owned()));
        let w = &self.walk;
        if self.n_topics == 0 {
            return bad("n_topics must be at least 1");
        }
        if self.r_cap == 0 {
            return bad("r_cap must be at least 1");
        }
        if w.entry_rank_min == 0 || w.entry_rank_min > w.entry_rank_max || w.entry_rank_max > self.r_cap {
            return bad("entry ranks must satisfy 1 <= entry_rank_min <= entry_rank_max <= r_cap");
        }
        if !(0.0..=1.0).contains(&w.exit_prob) {
            return bad("exit_prob must lie in [0, 1]");
        }
        if w.max_duration == 0 {
            return bad("max_duration must be at least 1");
        }
        if w.start_spread == 0 {
            return bad("start_spread must be at least 1");
        }
        let r = &self.reads;
        if !(r.c > 0.0 && r.c.is_finite()) {
            return bad("c must be positive");
        }
        if !(r.b > 0.0 && r.b.is_finite()) {
            return bad("b must be positive");
        }
        if !(r.sigma >= 0.0 && r.sigma.is_finite()) {
            return bad("sigma must be non-negative");
        }
        if !(r.d_star >= 0.0 && r.d_star.is_finite()) {
            return bad("d_star must be non-negative");
        }
        for cat in &self.categories {
            if cat.label.trim().is_empty() || cat.label.contains(',') {
                return bad("category labels must be non-empty and comma-free");
            }
            if !(cat.weight > 0.0 && cat.weight.is_finite()) {
                return bad("category weights must be positive");
            }
            if let Some(d) = cat.d_star {
                if !(d >= 0.0 && d.is_finite()) {
                    return bad("category d_star must be non-negative");
                }
            }
        }
        let mut labels: Vec<&str> = self.categories.iter().map(|c| c.label.as_str()).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return bad("category labels must be unique");
        }
        Ok(())
    }

    /// Effective `(label, d_star)` per category, in config order.
    pub fn category_truth(&self) -> Vec<(String, f64)> {
        if self.categories.is_empty() {
            return vec![(UNKNOWN_CATEGORY.to_owned(), self.reads.d_star)];
        }
        self.categories
            .iter()
            .map(|c| (c.label.clone(), c.d_star.unwrap_or(self.reads.d_star)))
            .collect()
    }

    /// Parses the flat `key = value` format. `#` starts a comment; each
    /// `category = label,weight[,d_star]` line adds one category.
    pub fn parse(text: &str) -> Result<Self, SynthError> {
        let mut cfg = SynthConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or_default().trim();
            if content.is_empty() {
                continue;
            }
            let syntax = |reason: String| SynthError::ConfigSyntax { line, reason };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected key = value, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            fn num<T: std::str::FromStr>(v: &str, line: usize) -> Result<T, SynthError> {
                v.parse().map_err(|_| SynthError::ConfigSyntax {
                    line,
                    reason: format!("bad number {v:?}"),
                })
            }
            match key {
                "n_topics" => cfg.n_topics = num(value, line)?,
                "seed" => cfg.seed = num(value, line)?,
                "r_cap" => cfg.r_cap = num(value, line)?,
                "entry_rank_min" => cfg.walk.entry_rank_min = num(value, line)?,
                "entry_rank_max" => cfg.walk.entry_rank_max = num(value, line)?,
                "max_step" => cfg.walk.max_step = num(value, line)?,
                "exit_prob" => cfg.walk.exit_prob = num(value, line)?,
                "max_duration" => cfg.walk.max_duration = num(value, line)?,
                "offlist_depth" => cfg.walk.offlist_depth = num(value, line)?,
                "start_spread" => cfg.walk.start_spread = num(value, line)?,
                "c" => cfg.reads.c = num(value, line)?,
                "b" => cfg.reads.b = num(value, line)?,
                "d_star" => cfg.reads.d_star = num(value, line)?,
                "sigma" => cfg.reads.sigma = num(value, line)?,
                "category" => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    if !(2..=3).contains(&parts.len()) {
                        return Err(syntax("category = label,weight[,d_star]".into()));
                    }
                    cfg.categories.push(CategorySpec {
                        label: parts[0].to_owned(),
                        weight: num(parts[1], line)?,
                        d_star: parts.get(2).map(|v| num(v, line)).transpose()?,
                    });
                }
                other => return Err(syntax(format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Inverse of [`SynthConfig::parse`]; every key is written.
    pub fn to_text(&self) -> String {
        let w = &self.walk;
        let r = &self.reads;
        let mut s = String::new();
        let _ = writeln!(s, "n_topics = {}", self.n_topics);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "r_cap = {}", self.r_cap);
        let _ = writeln!(s, "entry_rank_min = {}", w.entry_rank_min);
        let _ = writeln!(s, "entry_rank_max = {}", w.entry_rank_max);
        let _ = writeln!(s, "max_step = {}", w.max_step);
        let _ = writeln!(s, "exit_prob = {}", w.exit_prob);
        let _ = writeln!(s, "max_duration = {}", w.max_duration);
        let _ = writeln!(s, "offlist_depth = {}", w.offlist_depth);
        let _ = writeln!(s, "start_spread = {}", w.start_spread);
        let _ = writeln!(s, "c = {}", r.c);
        let _ = writeln!(s, "b = {}", r.b);
        let _ = writeln!(s, "d_star = {}", r.d_star);
        let _ = writeln!(s, "sigma = {}", r.sigma);
        for c in &self.categories {
            match c.d_star {
                Some(d) => {
                    let _ = writeln!(s, "category = {},{},{}", c.label, c.weight, d);
                }
                None => {
                    let _ = writeln!(s, "category = {},{}", c.label, c.weight);
                }
            }
        }
        s
    }
}

/// Topic id used for the `i`-th generated topic.
pub fn topic_name(i: usize) -> String {
    format!("topic{i:06}")
}

fn walk_topic(rng: &mut ChaCha8Rng, walk: &RankWalk, r_cap: u32) -> Vec<RankObservation> {
    let floor = (r_cap + walk.offlist_depth) as i64;
    let start = rng.gen_range(0..walk.start_spread);
    let mut rank = rng.gen_range(walk.entry_rank_min..=walk.entry_rank_max) as i64;
    let step = walk.max_step as i64;
    let mut obs = Vec::new();
    for minute in 0..walk.max_duration as u64 {
        if rank <= r_cap as i64 {
            obs.push(RankObservation::new(start + minute, rank as u32));
        }
        if rng.gen_bool(walk.exit_prob) {
            break;
        }
        rank += rng.gen_range(-step..=step);
        // reflect at both walls
        if rank < 1 {
            rank = 2 - rank;
        }
        if rank > floor {
            rank = 2 * floor - rank;
        }
        rank = rank.clamp(1, floor);
    }
    obs
}

/// Generates a dataset from `cfg`. Same config, same bytes.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<Dataset, SynthError> {
    cfg.validate()?;
    let truth = cfg.category_truth();
    let chooser = if cfg.categories.is_empty() {
        None
    } else {
        Some(
            WeightedIndex::new(cfg.categories.iter().map(|c| c.weight))
                .map_err(|e| SynthError::InvalidConfig(e.to_string()))?,
        )
    };
    let noise = Normal::new(0.0, cfg.reads.sigma).map_err(|e| SynthError::InvalidConfig(e.to_string()))?;

    let topics: Vec<(Trajectory, TopicMeta)> = (0..cfg.n_topics)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let cat_idx = chooser.as_ref().map(|w| w.sample(&mut rng)).unwrap_or(0);
            let (label, d_star) = &truth[cat_idx];
            let id = TopicId::new(topic_name(i))?;
            let obs = walk_topic(&mut rng, &cfg.walk, cfg.r_cap);
            let traj = Trajectory::from_observations(id.clone(), cfg.r_cap, obs, DuplicatePolicy::Strict)?;
            let v = visibility(&traj, Discrimination::new(*d_star).expect("validated"));
            let eps = if cfg.reads.sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            let reads = (cfg.reads.c * v.powf(cfg.reads.b) * 10f64.powf(eps)).round();
            let n_reads = if reads >= 1.0 { reads as u64 } else { 1 };
            Ok((traj, TopicMeta::new(id, label.clone(), n_reads)?))
        })
        .collect::<Result<_, SynthError>>()?;

    let mut trajectories = BTreeMap::new();
    let mut meta = BTreeMap::new();
    for (t, m) in topics {
        meta.insert(m.topic.clone(), m);
        trajectories.insert(t.topic().clone(), t);
    }
    Ok(Dataset::from_parts(cfg.r_cap, trajectories, meta)?)
}

/// Sidecar text recording the generating parameters per category.
pub fn ground_truth_text(cfg: &SynthConfig) -> String {
    let mut s = String::from("category,d_star,b,c,sigma,seed\n");
    for (label, d_star) in cfg.category_truth() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            label, d_star, cfg.reads.b, cfg.reads.c, cfg.reads.sigma, cfg.seed
        );
    }
    s
}
