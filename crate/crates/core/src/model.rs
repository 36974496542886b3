//! Topics, rank observations, trajectories and datasets.
//!
//! A [`Trajectory`] keeps its observations sorted by minute and maintains a
//! dwell histogram with one bin per rank. Everything downstream (visibility,
//! sweeps) reads the histogram, so the two are kept in lockstep by every
//! mutating method and checked by [`Trajectory::check_invariants`].

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of ranks on the platform's trending list.
pub const DEFAULT_R_CAP: u32 = 50;

/// Category used when a topic carries no platform label.
pub const UNKNOWN_CATEGORY: &str = "unknown";

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("topic id is empty")]
    EmptyTopicId,
    #[error("category label is empty for topic {0}")]
    EmptyCategory(TopicId),
    #[error("rank {rank} outside 1..={r_cap}")]
    RankOutOfRange { rank: u32, r_cap: u32 },
    #[error("rank cap must be at least 1")]
    InvalidRankCap,
    #[error("topic {topic} already has an observation at minute {t}")]
    DuplicateTimestamp { topic: TopicId, t: u64 },
    #[error("trajectory for topic {topic} is corrupt: {reason}")]
    CorruptTrajectory { topic: TopicId, reason: String },
}

/// What to do when a topic gets two observations at the same minute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DuplicatePolicy {
    /// Reject the second observation.
    Strict,
    /// Keep the better (numerically smaller) rank.
    #[default]
    Lenient,
}

/// Opaque, trimmed, non-empty topic identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TopicId(String);

impl TopicId {
    pub fn new(raw: impl AsRef<str>) -> Result<Self, ModelError> {
        let trimmed = raw.as_ref().trim();
        if trimmed.is_empty() {
            return Err(ModelError::EmptyTopicId);
        }
        Ok(TopicId(trimmed.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TopicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for TopicId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// A topic seen at rank `rank` at minute `t` (minutes since the dataset epoch).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RankObservation {
    pub t: u64,
    pub rank: u32,
}

impl RankObservation {
    pub fn new(t: u64, rank: u32) -> Self {
        RankObservation { t, rank }
    }

    pub fn validate(&self, r_cap: u32) -> Result<(), ModelError> {
        if self.rank == 0 || self.rank > r_cap {
            return Err(ModelError::RankOutOfRange {
                rank: self.rank,
                r_cap,
            });
        }
        Ok(())
    }
}

/// The recorded trending history of one topic.
///
/// Minutes when the topic was off the list are simply absent, so a topic that
/// drops out and re-enters stays a single trajectory with a gap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    topic: TopicId,
    r_cap: u32,
    obs: Vec<RankObservation>,
    // hist[r - 1] = number of observations at rank r
    hist: Vec<u64>,
}

impl Trajectory {
    pub fn new(topic: TopicId, r_cap: u32) -> Result<Self, ModelError> {
        if r_cap == 0 {
            return Err(ModelError::InvalidRankCap);
        }
        Ok(Trajectory {
            topic,
            r_cap,
            obs: Vec::new(),
            hist: vec![0; r_cap as usize],
        })
    }

    /// Builds a trajectory from observations in any order.
    pub fn from_observations<I>(
        topic: TopicId,
        r_cap: u32,
        observations: I,
        policy: DuplicatePolicy,
    ) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = RankObservation>,
    {
        let mut obs: Vec<RankObservation> = observations.into_iter().collect();
        for o in &obs {
            o.validate(r_cap)?;
        }
        obs.sort_by_key(|o| (o.t, o.rank));
        let mut traj = Trajectory::new(topic, r_cap)?;
        for o in obs {
            // sorted input: a duplicate can only collide with the last element
            match traj.obs.last() {
                Some(last) if last.t == o.t => match policy {
                    DuplicatePolicy::Strict => {
                        return Err(ModelError::DuplicateTimestamp {
                            topic: traj.topic.clone(),
                            t: o.t,
                        })
                    }
                    // sorted by (t, rank): the kept one is already the better rank
                    DuplicatePolicy::Lenient => continue,
                },
                _ => {
                    traj.hist[(o.rank - 1) as usize] += 1;
                    traj.obs.push(o);
                }
            }
        }
        Ok(traj)
    }

    /// Inserts one observation, keeping times sorted and the histogram in sync.
    ///
    /// Returns `true` when the trajectory changed. Under the lenient policy a
    /// duplicate minute keeps the smaller rank, which may leave it unchanged.
    pub fn insert(&mut self, o: RankObservation, policy: DuplicatePolicy) -> Result<bool, ModelError> {
        o.validate(self.r_cap)?;
        match self.obs.binary_search_by_key(&o.t, |x| x.t) {
            Ok(idx) => match policy {
                DuplicatePolicy::Strict => Err(ModelError::DuplicateTimestamp {
                    topic: self.topic.clone(),
                    t: o.t,
                }),
                DuplicatePolicy::Lenient => {
                    let existing = self.obs[idx].rank;
                    if o.rank < existing {
                        self.hist[(existing - 1) as usize] -= 1;
                        self.hist[(o.rank - 1) as usize] += 1;
                        self.obs[idx].rank = o.rank;
                        Ok(true)
                    } else {
                        Ok(false)
                    }
                }
            },
            Err(idx) => {
                self.obs.insert(idx, o);
                self.hist[(o.rank - 1) as usize] += 1;
                Ok(true)
            }
        }
    }

    /// Consuming form of [`Trajectory::insert`].
    pub fn with_observation(mut self, o: RankObservation, policy: DuplicatePolicy) -> Result<Self, ModelError> {
        self.insert(o, policy)?;
        Ok(self)
    }

    pub fn topic(&self) -> &TopicId {
        &self.topic
    }

    pub fn r_cap(&self) -> u32 {
        self.r_cap
    }

    pub fn observations(&self) -> &[RankObservation] {
        &self.obs
    }

    /// Dwell counts indexed by `rank - 1`.
    pub fn histogram(&self) -> &[u64] {
        &self.hist
    }

    /// Number of minutes spent at `rank` (0 when out of range).
    pub fn dwell_at(&self, rank: u32) -> u64 {
        if rank == 0 || rank > self.r_cap {
            return 0;
        }
        self.hist[(rank - 1) as usize]
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    /// Total recorded trending minutes.
    pub fn dwell_time(&self) -> u64 {
        self.obs.len() as u64
    }

    /// Best (numerically smallest) rank reached, if any.
    pub fn best_rank(&self) -> Option<u32> {
        self.hist
            .iter()
            .position(|&n| n > 0)
            .map(|i| i as u32 + 1)
    }

    /// Recomputes the histogram from the observation list.
    pub fn rebuild_histogram(&self) -> Vec<u64> {
        let mut hist = vec![0u64; self.r_cap as usize];
        for o in &self.obs {
            if (1..=self.r_cap).contains(&o.rank) {
                hist[(o.rank - 1) as usize] += 1;
            }
        }
        hist
    }

    pub fn check_invariants(&self) -> Result<(), ModelError> {
        let corrupt = |reason: String| ModelError::CorruptTrajectory {
            topic: self.topic.clone(),
            reason,
        };
        if self.hist.len() != self.r_cap as usize {
            return Err(corrupt(format!(
                "histogram has {} bins, expected {}",
                self.hist.len(),
                self.r_cap
            )));
        }
        for o in &self.obs {
            if o.rank == 0 || o.rank > self.r_cap {
                return Err(corrupt(format!("rank {} at minute {}", o.rank, o.t)));
            }
        }
        if let Some(w) = self.obs.windows(2).find(|w| w[0].t >= w[1].t) {
            return Err(corrupt(format!(
                "minutes not strictly increasing ({} then {})",
                w[0].t, w[1].t
            )));
        }
        if self.rebuild_histogram() != self.hist {
            return Err(corrupt("histogram disagrees with observations".into()));
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn from_raw_parts(topic: TopicId, r_cap: u32, obs: Vec<RankObservation>, hist: Vec<u64>) -> Self {
        Trajectory { topic, r_cap, obs, hist }
    }
}

/// Category label and accumulated read count of a topic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicMeta {
    pub topic: TopicId,
    pub category: String,
    pub n_reads: u64,
}

impl TopicMeta {
    pub fn new(topic: TopicId, category: impl Into<String>, n_reads: u64) -> Result<Self, ModelError> {
        let category = category.into().trim().to_owned();
        if category.is_empty() {
            return Err(ModelError::EmptyCategory(topic));
        }
        Ok(TopicMeta {
            topic,
            category,
            n_reads,
        })
    }
}

/// Trajectories and metadata of a crawl.
///
/// The two maps are keyed independently; joins happen explicitly in the
/// regression and validation code.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub epoch: Option<DateTime<Utc>>,
    pub r_cap: u32,
    pub trajectories: BTreeMap<TopicId, Trajectory>,
    pub meta: BTreeMap<TopicId, TopicMeta>,
}

impl Dataset {
    pub fn new(r_cap: u32) -> Result<Self, ModelError> {
        if r_cap == 0 {
            return Err(ModelError::InvalidRankCap);
        }
        Ok(Dataset {
            epoch: None,
            r_cap,
            trajectories: BTreeMap::new(),
            meta: BTreeMap::new(),
        })
    }

    pub fn from_parts(
        r_cap: u32,
        trajectories: BTreeMap<TopicId, Trajectory>,
        meta: BTreeMap<TopicId, TopicMeta>,
    ) -> Result<Self, ModelError> {
        let mut ds = Dataset::new(r_cap)?;
        ds.trajectories = trajectories;
        ds.meta = meta;
        Ok(ds)
    }

    pub fn insert_trajectory(&mut self, traj: Trajectory) {
        self.trajectories.insert(traj.topic().clone(), traj);
    }

    pub fn insert_meta(&mut self, meta: TopicMeta) {
        self.meta.insert(meta.topic.clone(), meta);
    }

    /// Total number of recorded (topic, minute, rank) entries.
    pub fn observation_count(&self) -> u64 {
        self.trajectories.values().map(|t| t.dwell_time()).sum()
    }

    /// Sorted, de-duplicated category labels present in the metadata.
    pub fn categories(&self) -> Vec<String> {
        let mut cats: Vec<String> = self.meta.values().map(|m| m.category.clone()).collect();
        cats.sort();
        cats.dedup();
        cats
    }

    /// Sub-dataset holding only topics whose metadata carries `category`.
    pub fn restrict_to_category(&self, category: &str) -> Dataset {
        let meta: BTreeMap<TopicId, TopicMeta> = self
            .meta
            .iter()
            .filter(|(_, m)| m.category == category)
            .map(|(k, m)| (k.clone(), m.clone()))
            .collect();
        let trajectories = self
            .trajectories
            .iter()
            .filter(|(k, _)| meta.contains_key(*k))
            .map(|(k, t)| (k.clone(), t.clone()))
            .collect();
        Dataset {
            epoch: self.epoch,
            r_cap: self.r_cap,
            trajectories,
            meta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DiagnosticKind {
    /// Trajectory present, metadata missing.
    NoMeta,
    /// Metadata present, trajectory missing.
    NoTrajectory,
    /// Zero read count: cannot enter a log-log fit.
    ZeroReads,
}

impl DiagnosticKind {
    pub fn code(&self) -> &'static str {
        match self {
            DiagnosticKind::NoMeta => "unjoined:no-meta",
            DiagnosticKind::NoTrajectory => "unjoined:no-trajectory",
            DiagnosticKind::ZeroReads => "excluded-from-regression:zero-reads",
        }
    }

    pub fn is_unjoined(&self) -> bool {
        matches!(self, DiagnosticKind::NoMeta | DiagnosticKind::NoTrajectory)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DatasetDiagnostic {
    pub topic: TopicId,
    pub kind: DiagnosticKind,
}

/// Preflight checks over a dataset.
///
/// Join gaps and zero-read topics come back as diagnostics. A trajectory that
/// breaks its own sort or histogram invariants is an error.
pub fn validate_dataset(ds: &Dataset) -> Result<Vec<DatasetDiagnostic>, ModelError> {
    let mut out = Vec::new();
    for (id, traj) in &ds.trajectories {
        traj.check_invariants()?;
        if traj.topic() != id {
            return Err(ModelError::CorruptTrajectory {
                topic: id.clone(),
                reason: format!("stored under key {id} but names topic {}", traj.topic()),
            });
        }
        if !ds.meta.contains_key(id) {
            out.push(DatasetDiagnostic {
                topic: id.clone(),
                kind: DiagnosticKind::NoMeta,
            });
        }
    }
    for (id, meta) in &ds.meta {
        if !ds.trajectories.contains_key(id) {
            out.push(DatasetDiagnostic {
                topic: id.clone(),
                kind: DiagnosticKind::NoTrajectory,
            });
        }
        if meta.n_reads == 0 {
            out.push(DatasetDiagnostic {
                topic: id.clone(),
                kind: DiagnosticKind::ZeroReads,
            });
        }
    }
    out.sort();
    Ok(out)
}
