//! Dynamical visibility of algorithmically ranked trending topics.
//!
//! A topic's *visibility* at discrimination level `d` sums `1 / r^d` over
//! every minute it was recorded at rank `r` on a trending list. This crate
//! ingests crawled leaderboards into per-topic rank trajectories, evaluates
//! visibility, fits `log10(reads)` against `log10(V(d))`, and sweeps `d` to
//! find the level whose visibility best explains readership, overall or per
//! category.
//!
//! ```
//! use trendvis::model::{DuplicatePolicy, RankObservation, TopicId, Trajectory};
//! use trendvis::visibility::{visibility, Discrimination};
//!
//! let traj = Trajectory::from_observations(
//!     TopicId::new("example").unwrap(),
//!     50,
//!     [(1, 40), (2, 30), (3, 50)].map(|(t, r)| RankObservation::new(t, r)),
//!     DuplicatePolicy::Strict,
//! )
//! .unwrap();
//! assert_eq!(visibility(&traj, Discrimination::ZERO), 3.0);
//! let v1 = visibility(&traj, Discrimination::new(1.0).unwrap());
//! assert!((v1 - 0.0783).abs() < 5e-5);
//! ```
//!
//! The `examples/` directory has one runnable program per capability, and
//! the `trendvis` binary wraps the same functionality for batch use.

pub mod bundle;
pub mod cli;
pub mod export;
pub mod ingest;
pub mod model;
pub mod regression;
pub mod synth;
pub mod visibility;

pub use model::{Dataset, RankObservation, TopicId, TopicMeta, Trajectory};
pub use regression::{sweep_dmax, Boundary, FitResult, SweepResult};
pub use synth::oracle::oracle_sweep;
pub use visibility::{visibility, DGrid, Discrimination};
