//! Reading crawled leaderboards and tabular exports into a [`Dataset`].
//!
//! Three formats are supported:
//!
//! * snapshot lines, one crawl of the list per line:
//!   `<RFC 3339 UTC timestamp>\t<rank>:<topic>\t<rank>:<topic>...`, with
//!   tab, CR, LF, `:` and `%` percent-encoded inside topic tokens;
//! * trajectory CSV with header `topic_id,t_minute,rank`;
//! * metadata CSV with header `topic_id,category,n_reads`.
//!
//! In strict mode the first bad record aborts the parse. In lenient mode the
//! record is skipped and a [`ParseDiagnostic`] is returned alongside the data.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Read, Write};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::model::{
    Dataset, DuplicatePolicy, ModelError, RankObservation, TopicId, TopicMeta, Trajectory, DEFAULT_R_CAP,
};

pub const TRAJECTORY_HEADER: [&str; 3] = ["topic_id", "t_minute", "rank"];
pub const METADATA_HEADER: [&str; 3] = ["topic_id", "category", "n_reads"];

#[derive(Error, Debug)]
pub enum IngestError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: rank {rank} outside 1..={r_cap}")]
    RankOutOfRange { line: usize, rank: i64, r_cap: u32 },
    #[error("line {line}: ranks are not strictly increasing")]
    NonMonotonicRanks { line: usize },
    #[error("line {line}: topic {topic} appears twice in one snapshot")]
    DuplicateTopicInSnapshot { line: usize, topic: String },
    #[error("line {line}: timestamp precedes the epoch")]
    BeforeEpoch { line: usize },
    #[error("line {line}: negative read count {value}")]
    NegativeReads { line: usize, value: String },
    #[error("line {line}: duplicate metadata for topic {topic}")]
    DuplicateTopic { line: usize, topic: String },
    #[error("line {line}: topic {topic} already has an observation at minute {t}")]
    DuplicateTimestamp { line: usize, topic: String, t: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    /// 1-based source line, when the error is tied to one.
    pub fn line(&self) -> Option<usize> {
        match self {
            IngestError::MalformedLine { line, .. }
            | IngestError::RankOutOfRange { line, .. }
            | IngestError::NonMonotonicRanks { line }
            | IngestError::DuplicateTopicInSnapshot { line, .. }
            | IngestError::BeforeEpoch { line }
            | IngestError::NegativeReads { line, .. }
            | IngestError::DuplicateTopic { line, .. }
            | IngestError::DuplicateTimestamp { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    Strict,
    #[default]
    Lenient,
}

impl ParseMode {
    pub fn duplicate_policy(self) -> DuplicatePolicy {
        match self {
            ParseMode::Strict => DuplicatePolicy::Strict,
            ParseMode::Lenient => DuplicatePolicy::Lenient,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    pub mode: ParseMode,
    pub r_cap: u32,
    /// Instant mapped to minute 0; defaults to the first record's timestamp.
    pub epoch: Option<DateTime<Utc>>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            mode: ParseMode::Lenient,
            r_cap: DEFAULT_R_CAP,
            epoch: None,
        }
    }
}

impl ParseOptions {
    pub fn strict() -> Self {
        ParseOptions {
            mode: ParseMode::Strict,
            ..Default::default()
        }
    }
}

/// A record skipped (or adjusted) by a lenient parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub source: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub diagnostics: Vec<ParseDiagnostic>,
}

/// One crawl of the trending list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub t: u64,
    pub entries: Vec<(u32, TopicId)>,
}

const ENCODED: &[u8] = b"%\t\n\r:";

/// Percent-encodes the characters that would break a snapshot line.
pub fn encode_topic(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for ch in raw.chars() {
        if ch.is_ascii() && ENCODED.contains(&(ch as u8)) {
            out.push_str(&format!("%{:02X}", ch as u8));
        } else {
            out.push(ch);
        }
    }
    out
}

pub fn decode_topic(encoded: &str) -> Option<String> {
    let bytes = encoded.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = encoded.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(raw.trim())
        .ok()
        .map(|t| t.with_timezone(&Utc))
}

fn minutes_since(epoch: DateTime<Utc>, ts: DateTime<Utc>) -> Option<u64> {
    let secs = (ts - epoch).num_seconds();
    (secs >= 0).then(|| secs as u64 / 60)
}

fn parse_snapshot_line(
    text: &str,
    line: usize,
    epoch: &mut Option<DateTime<Utc>>,
    r_cap: u32,
) -> Result<Snapshot, IngestError> {
    let malformed = |reason: String| IngestError::MalformedLine { line, reason };
    let mut fields = text.split('\t');
    let stamp = fields.next().unwrap_or_default();
    let ts = parse_timestamp(stamp).ok_or_else(|| malformed(format!("bad timestamp {stamp:?}")))?;

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    let mut prev_rank = 0i64;
    for field in fields {
        if field.is_empty() {
            continue;
        }
        let (rank_str, topic_str) = field
            .split_once(':')
            .ok_or_else(|| malformed(format!("entry {field:?} is not rank:topic")))?;
        let rank: i64 = rank_str
            .trim()
            .parse()
            .map_err(|_| malformed(format!("bad rank {rank_str:?}")))?;
        if rank < 1 || rank > r_cap as i64 {
            return Err(IngestError::RankOutOfRange { line, rank, r_cap });
        }
        if rank <= prev_rank {
            return Err(IngestError::NonMonotonicRanks { line });
        }
        prev_rank = rank;
        let decoded = decode_topic(topic_str).ok_or_else(|| malformed(format!("bad percent-encoding in {topic_str:?}")))?;
        let topic = TopicId::new(&decoded).map_err(|_| malformed("empty topic".into()))?;
        if !seen.insert(topic.clone()) {
            return Err(IngestError::DuplicateTopicInSnapshot {
                line,
                topic: topic.to_string(),
            });
        }
        entries.push((rank as u32, topic));
    }

    let epoch = *epoch.get_or_insert(ts);
    let t = minutes_since(epoch, ts).ok_or(IngestError::BeforeEpoch { line })?;
    Ok(Snapshot { t, entries })
}

/// Parses a snapshot stream. Blank lines are ignored.
///
/// Returns the snapshots in file order together with the epoch that was
/// used (the override, or the first good record's timestamp).
pub fn parse_snapshot_stream<R: BufRead>(
    source: R,
    name: &str,
    opts: &ParseOptions,
) -> Result<(Parsed<Vec<Snapshot>>, Option<DateTime<Utc>>), IngestError> {
    let mut epoch = opts.epoch;
    let mut snaps = Vec::new();
    let mut diagnostics = Vec::new();
    for (idx, text) in source.lines().enumerate() {
        let line = idx + 1;
        let text = text?;
        let text = text.strip_suffix('\r').unwrap_or(&text);
        if text.trim().is_empty() {
            continue;
        }
        match parse_snapshot_line(text, line, &mut epoch, opts.r_cap) {
            Ok(s) => snaps.push(s),
            Err(e) if opts.mode == ParseMode::Lenient => diagnostics.push(ParseDiagnostic {
                source: name.to_owned(),
                line,
                message: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok((
        Parsed {
            value: snaps,
            diagnostics,
        },
        epoch,
    ))
}

/// Formats one snapshot line (no trailing newline).
pub fn format_snapshot_line(ts: DateTime<Utc>, entries: &[(u32, TopicId)]) -> String {
    let mut out = ts.to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    for (rank, topic) in entries {
        out.push('\t');
        out.push_str(&rank.to_string());
        out.push(':');
        out.push_str(&encode_topic(topic.as_str()));
    }
    out
}

/// Orders snapshots from several sources by minute, then source name.
pub fn merge_snapshot_sources(sources: Vec<(String, Vec<Snapshot>)>) -> Vec<Snapshot> {
    let mut tagged: Vec<(u64, String, usize, Snapshot)> = Vec::new();
    for (name, snaps) in sources {
        for (i, s) in snaps.into_iter().enumerate() {
            tagged.push((s.t, name.clone(), i, s));
        }
    }
    tagged.sort_by(|a, b| (a.0, &a.1, a.2).cmp(&(b.0, &b.1, b.2)));
    tagged.into_iter().map(|x| x.3).collect()
}

/// Pivots snapshots into one trajectory per topic that ever appeared.
pub fn snapshots_to_trajectories(
    snaps: &[Snapshot],
    r_cap: u32,
    policy: DuplicatePolicy,
) -> Result<BTreeMap<TopicId, Trajectory>, ModelError> {
    let mut order: Vec<&Snapshot> = snaps.iter().collect();
    order.sort_by_key(|s| s.t);
    let mut out: BTreeMap<TopicId, Trajectory> = BTreeMap::new();
    for s in order {
        for (rank, topic) in &s.entries {
            let traj = match out.get_mut(topic) {
                Some(t) => t,
                None => out
                    .entry(topic.clone())
                    .or_insert(Trajectory::new(topic.clone(), r_cap)?),
            };
            traj.insert(RankObservation::new(s.t, *rank), policy)?;
        }
    }
    Ok(out)
}

fn csv_reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source)
}

fn csv_writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink)
}

fn check_header(rec: Option<csv::StringRecord>, expected: &[&str; 3]) -> Result<(), IngestError> {
    let got: Vec<String> = rec
        .map(|r| r.iter().map(|f| f.trim().to_owned()).collect())
        .unwrap_or_default();
    if got != expected {
        return Err(IngestError::MalformedLine {
            line: 1,
            reason: format!("expected header {}, got {}", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn record_line(rec: &csv::StringRecord, fallback: usize) -> usize {
    rec.position().map(|p| p.line() as usize).unwrap_or(fallback)
}

/// Parses `topic_id,t_minute,rank` rows in any order.
pub fn parse_trajectory_csv<R: Read>(
    source: R,
    name: &str,
    opts: &ParseOptions,
) -> Result<Parsed<BTreeMap<TopicId, Trajectory>>, IngestError> {
    let mut rdr = csv_reader(source);
    let mut records = rdr.records();
    check_header(records.next().transpose()?, &TRAJECTORY_HEADER)?;

    let mut out: BTreeMap<TopicId, Trajectory> = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for (idx, rec) in records.enumerate() {
        let rec = rec?;
        let line = record_line(&rec, idx + 2);
        let result = (|| -> Result<Option<String>, IngestError> {
            let malformed = |reason: String| IngestError::MalformedLine { line, reason };
            if rec.len() != 3 {
                return Err(malformed(format!("expected 3 fields, got {}", rec.len())));
            }
            let topic = TopicId::new(&rec[0]).map_err(|_| malformed("empty topic_id".into()))?;
            let t: u64 = rec[1]
                .trim()
                .parse()
                .map_err(|_| malformed(format!("bad t_minute {:?}", &rec[1])))?;
            let rank: i64 = rec[2]
                .trim()
                .parse()
                .map_err(|_| malformed(format!("bad rank {:?}", &rec[2])))?;
            if rank < 1 || rank > opts.r_cap as i64 {
                return Err(IngestError::RankOutOfRange {
                    line,
                    rank,
                    r_cap: opts.r_cap,
                });
            }
            let traj = match out.get_mut(&topic) {
                Some(t) => t,
                None => out
                    .entry(topic.clone())
                    .or_insert(Trajectory::new(topic.clone(), opts.r_cap)?),
            };
            let o = RankObservation::new(t, rank as u32);
            match traj.insert(o, DuplicatePolicy::Strict) {
                Ok(_) => Ok(None),
                Err(ModelError::DuplicateTimestamp { .. }) => match opts.mode {
                    ParseMode::Strict => Err(IngestError::DuplicateTimestamp {
                        line,
                        topic: topic.to_string(),
                        t,
                    }),
                    ParseMode::Lenient => {
                        traj.insert(o, DuplicatePolicy::Lenient)?;
                        Ok(Some(format!(
                            "duplicate minute {t} for topic {topic}; kept the better rank"
                        )))
                    }
                },
                Err(e) => Err(e.into()),
            }
        })();
        match result {
            Ok(None) => {}
            Ok(Some(note)) => diagnostics.push(ParseDiagnostic {
                source: name.to_owned(),
                line,
                message: note,
            }),
            Err(e) if opts.mode == ParseMode::Lenient => diagnostics.push(ParseDiagnostic {
                source: name.to_owned(),
                line,
                message: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(Parsed {
        value: out,
        diagnostics,
    })
}

/// Parses `topic_id,category,n_reads` rows.
///
/// A repeated topic is an error in strict mode; in lenient mode the last row
/// wins.
pub fn parse_metadata_csv<R: Read>(
    source: R,
    name: &str,
    opts: &ParseOptions,
) -> Result<Parsed<BTreeMap<TopicId, TopicMeta>>, IngestError> {
    let mut rdr = csv_reader(source);
    let mut records = rdr.records();
    check_header(records.next().transpose()?, &METADATA_HEADER)?;

    let mut out: BTreeMap<TopicId, TopicMeta> = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for (idx, rec) in records.enumerate() {
        let rec = rec?;
        let line = record_line(&rec, idx + 2);
        let result = (|| -> Result<Option<String>, IngestError> {
            let malformed = |reason: String| IngestError::MalformedLine { line, reason };
            if rec.len() != 3 {
                return Err(malformed(format!("expected 3 fields, got {}", rec.len())));
            }
            let topic = TopicId::new(&rec[0]).map_err(|_| malformed("empty topic_id".into()))?;
            let raw_reads = rec[2].trim();
            let n_reads: u64 = match raw_reads.parse::<i128>() {
                Ok(v) if v < 0 => {
                    return Err(IngestError::NegativeReads {
                        line,
                        value: raw_reads.to_owned(),
                    })
                }
                Ok(v) => u64::try_from(v).map_err(|_| malformed(format!("n_reads {v} too large")))?,
                Err(_) => return Err(malformed(format!("bad n_reads {raw_reads:?}"))),
            };
            let meta = TopicMeta::new(topic.clone(), &rec[1], n_reads)
                .map_err(|_| malformed("empty category".into()))?;
            let replaced = out.contains_key(&topic);
            if replaced && opts.mode == ParseMode::Strict {
                return Err(IngestError::DuplicateTopic {
                    line,
                    topic: topic.to_string(),
                });
            }
            out.insert(topic.clone(), meta);
            Ok(replaced.then(|| format!("duplicate metadata for topic {topic}; last row kept")))
        })();
        match result {
            Ok(None) => {}
            Ok(Some(note)) => diagnostics.push(ParseDiagnostic {
                source: name.to_owned(),
                line,
                message: note,
            }),
            Err(e) if opts.mode == ParseMode::Lenient => diagnostics.push(ParseDiagnostic {
                source: name.to_owned(),
                line,
                message: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(Parsed {
        value: out,
        diagnostics,
    })
}

/// Writes trajectories as CSV, ordered by topic then minute.
pub fn write_trajectory_csv<'a, W, I>(sink: W, trajectories: I) -> Result<(), IngestError>
where
    W: Write,
    I: IntoIterator<Item = &'a Trajectory>,
{
    let mut w = csv_writer(sink);
    w.write_record(TRAJECTORY_HEADER)?;
    for traj in trajectories {
        for o in traj.observations() {
            w.write_record([traj.topic().as_str(), &o.t.to_string(), &o.rank.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_metadata_csv<'a, W, I>(sink: W, meta: I) -> Result<(), IngestError>
where
    W: Write,
    I: IntoIterator<Item = &'a TopicMeta>,
{
    let mut w = csv_writer(sink);
    w.write_record(METADATA_HEADER)?;
    for m in meta {
        w.write_record([m.topic.as_str(), m.category.as_str(), &m.n_reads.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_diagnostics_csv<W: Write>(sink: W, diagnostics: &[ParseDiagnostic]) -> Result<(), IngestError> {
    let mut w = csv_writer(sink);
    w.write_record(["source", "line", "message"])?;
    for d in diagnostics {
        w.write_record([d.source.as_str(), &d.line.to_string(), d.message.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Assembles a dataset from already-parsed parts.
pub fn assemble_dataset(
    r_cap: u32,
    epoch: Option<DateTime<Utc>>,
    trajectories: BTreeMap<TopicId, Trajectory>,
    meta: BTreeMap<TopicId, TopicMeta>,
) -> Result<Dataset, ModelError> {
    let mut ds = Dataset::from_parts(r_cap, trajectories, meta)?;
    ds.epoch = epoch;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T0: &str = "2021-03-01T08:00:00Z";

    fn line_with(entries: &[(u32, &str)]) -> String {
        let mut s = T0.to_string();
        for (r, t) in entries {
            s.push_str(&format!("\t{r}:{t}"));
        }
        s
    }

    fn strict() -> ParseOptions {
        ParseOptions::strict()
    }

    #[test]
    fn full_list_parses() {
        let names: Vec<String> = (1..=50).map(|i| format!("topic{i}")).collect();
        let entries: Vec<(u32, &str)> = names.iter().enumerate().map(|(i, n)| (i as u32 + 1, n.as_str())).collect();
        let text = line_with(&entries);
        let (parsed, epoch) = parse_snapshot_stream(text.as_bytes(), "s", &strict()).unwrap();
        assert_eq!(parsed.value.len(), 1);
        assert_eq!(parsed.value[0].entries.len(), 50);
        assert_eq!(parsed.value[0].t, 0);
        assert_eq!(epoch, parse_timestamp(T0));
    }

    #[test]
    fn rank_51_rejected() {
        let text = format!("{}\n{}", line_with(&[(1, "a")]), line_with(&[(51, "b")]));
        let err = parse_snapshot_stream(text.as_bytes(), "s", &strict()).unwrap_err();
        assert!(matches!(err, IngestError::RankOutOfRange { line: 2, rank: 51, .. }));
    }

    #[test]
    fn shared_rank_rejected() {
        let text = line_with(&[(1, "a"), (3, "b"), (3, "c")]);
        let err = parse_snapshot_stream(text.as_bytes(), "s", &strict()).unwrap_err();
        assert!(matches!(err, IngestError::NonMonotonicRanks { line: 1 }));
    }

    #[test]
    fn duplicate_topic_in_snapshot_rejected() {
        let text = line_with(&[(1, "a"), (2, "a")]);
        let err = parse_snapshot_stream(text.as_bytes(), "s", &strict()).unwrap_err();
        assert!(matches!(err, IngestError::DuplicateTopicInSnapshot { .. }));
    }

    #[test]
    fn lenient_mode_skips_with_diagnostic() {
        let text = format!("{}\nnot a timestamp\t1:x\n", line_with(&[(1, "a")]));
        let (parsed, _) = parse_snapshot_stream(text.as_bytes(), "feed.tsv", &ParseOptions::default()).unwrap();
        assert_eq!(parsed.value.len(), 1);
        assert_eq!(parsed.diagnostics.len(), 1);
        assert_eq!(parsed.diagnostics[0].line, 2);
        assert_eq!(parsed.diagnostics[0].source, "feed.tsv");
    }

    #[test]
    fn minutes_relative_to_epoch() {
        let text = "2021-03-01T08:00:00Z\t1:a\n2021-03-01T08:01:00Z\t2:a\n2021-03-01T08:03:30Z\t1:a\n";
        let (parsed, _) = parse_snapshot_stream(text.as_bytes(), "s", &strict()).unwrap();
        let times: Vec<u64> = parsed.value.iter().map(|s| s.t).collect();
        assert_eq!(times, vec![0, 1, 3]);

        let opts = ParseOptions {
            epoch: parse_timestamp("2021-03-01T07:00:00Z"),
            ..strict()
        };
        let (parsed, _) = parse_snapshot_stream(text.as_bytes(), "s", &opts).unwrap();
        assert_eq!(parsed.value[0].t, 60);

        let opts = ParseOptions {
            epoch: parse_timestamp("2021-03-01T09:00:00Z"),
            ..strict()
        };
        assert!(matches!(
            parse_snapshot_stream(text.as_bytes(), "s", &opts),
            Err(IngestError::BeforeEpoch { line: 1 })
        ));
    }

    #[test]
    fn encoded_topics_round_trip() {
        let raw = "a:b\tc%d\ne";
        let enc = encode_topic(raw);
        assert!(!enc.contains(['\t', '\n', ':']));
        assert_eq!(decode_topic(&enc).unwrap(), raw);
        assert_eq!(decode_topic("%zz"), None);
        assert_eq!(decode_topic("%4"), None);

        let ts = parse_timestamp(T0).unwrap();
        let line = format_snapshot_line(ts, &[(1, TopicId::new(raw).unwrap()), (2, TopicId::new("微博").unwrap())]);
        let (parsed, _) = parse_snapshot_stream(line.as_bytes(), "s", &strict()).unwrap();
        assert_eq!(parsed.value[0].entries[0].1.as_str(), raw);
        assert_eq!(parsed.value[0].entries[1].1.as_str(), "微博");
    }

    #[test]
    fn pivot_keeps_gaps() {
        let snaps: Vec<Snapshot> = [(7, 40), (8, 30), (10, 50)]
            .iter()
            .map(|&(t, r)| Snapshot {
                t,
                entries: vec![(r, TopicId::new("x").unwrap())],
            })
            .collect();
        let map = snapshots_to_trajectories(&snaps, 50, DuplicatePolicy::Strict).unwrap();
        let times: Vec<u64> = map[&TopicId::new("x").unwrap()].observations().iter().map(|o| o.t).collect();
        assert_eq!(times, vec![7, 8, 10]);
        assert!(!map.contains_key(&TopicId::new("never").unwrap()));
    }

    #[test]
    fn pivot_counts() {
        let a = TopicId::new("a").unwrap();
        let b = TopicId::new("b").unwrap();
        let snaps: Vec<Snapshot> = (0..3)
            .rev()
            .map(|t| Snapshot {
                t,
                entries: vec![(1, a.clone()), (2, b.clone())],
            })
            .collect();
        let map = snapshots_to_trajectories(&snaps, 50, DuplicatePolicy::Strict).unwrap();
        assert_eq!(map.len(), 2);
        assert!(map.values().all(|t| t.len() == 3));
    }

    #[test]
    fn trajectory_csv_worked_example() {
        let csv = "topic_id,t_minute,rank\nt4,32,20\nt4,27,40\nt4,28,30\nt4,29,30\nt4,30,50\nt4,31,40\n";
        let parsed = parse_trajectory_csv(csv.as_bytes(), "c", &strict()).unwrap();
        let t = &parsed.value[&TopicId::new("t4").unwrap()];
        assert_eq!(t.dwell_at(40), 2);
        assert_eq!(t.dwell_at(30), 2);
        assert_eq!(t.dwell_at(50), 1);
        assert_eq!(t.dwell_at(20), 1);
        assert_eq!(t.observations()[0].t, 27);
    }

    #[test]
    fn trajectory_csv_edge_cases() {
        let parsed = parse_trajectory_csv("topic_id,t_minute,rank\n".as_bytes(), "c", &strict()).unwrap();
        assert!(parsed.value.is_empty());

        let err = parse_trajectory_csv("topic_id,t_minute,rank\nx,5,0\n".as_bytes(), "c", &strict()).unwrap_err();
        assert!(matches!(err, IngestError::RankOutOfRange { line: 2, rank: 0, .. }));

        let err = parse_trajectory_csv("topic,t,rank\n".as_bytes(), "c", &strict()).unwrap_err();
        assert!(matches!(err, IngestError::MalformedLine { line: 1, .. }));

        let dup = "topic_id,t_minute,rank\nx,5,9\nx,5,3\n";
        let err = parse_trajectory_csv(dup.as_bytes(), "c", &strict()).unwrap_err();
        assert!(matches!(err, IngestError::DuplicateTimestamp { line: 3, .. }));
        let parsed = parse_trajectory_csv(dup.as_bytes(), "c", &ParseOptions::default()).unwrap();
        assert_eq!(parsed.value[&TopicId::new("x").unwrap()].observations(), &[RankObservation::new(5, 3)]);
        assert_eq!(parsed.diagnostics.len(), 1);
    }

    #[test]
    fn metadata_csv() {
        let parsed = parse_metadata_csv("topic_id,category,n_reads\na,sports,123456\n".as_bytes(), "m", &strict()).unwrap();
        let m = &parsed.value[&TopicId::new("a").unwrap()];
        assert_eq!(m.category, "sports");
        assert_eq!(m.n_reads, 123456);

        let err = parse_metadata_csv("topic_id,category,n_reads\na,sports,-5\n".as_bytes(), "m", &strict()).unwrap_err();
        assert!(matches!(err, IngestError::NegativeReads { line: 2, .. }));

        let dup = "topic_id,category,n_reads\na,x,1\na,y,2\n";
        assert!(matches!(
            parse_metadata_csv(dup.as_bytes(), "m", &strict()),
            Err(IngestError::DuplicateTopic { line: 3, .. })
        ));
        let parsed = parse_metadata_csv(dup.as_bytes(), "m", &ParseOptions::default()).unwrap();
        assert_eq!(parsed.value[&TopicId::new("a").unwrap()].category, "y");
    }

    #[test]
    fn twenty_six_categories() {
        let mut csv = String::from("topic_id,category,n_reads\n");
        for i in 0..52 {
            csv.push_str(&format!("t{i},cat{:02},{}\n", i % 26, 100 + i));
        }
        let meta = parse_metadata_csv(csv.as_bytes(), "m", &strict()).unwrap().value;
        let ds = assemble_dataset(50, None, BTreeMap::new(), meta).unwrap();
        assert_eq!(ds.categories().len(), 26);
    }

    fn traj_maps() -> impl Strategy<Value = BTreeMap<TopicId, Trajectory>> {
        let topic = "[a-z,\" ]{0,6}[a-z]".prop_map(|s| TopicId::new(s).unwrap());
        let obs = proptest::collection::btree_map(0u64..10_000, 1u32..=50, 1..40);
        proptest::collection::vec((topic, obs), 0..12).prop_map(|v| {
            v.into_iter()
                .map(|(id, o)| {
                    let t = Trajectory::from_observations(
                        id.clone(),
                        50,
                        o.into_iter().map(|(t, r)| RankObservation::new(t, r)),
                        DuplicatePolicy::Strict,
                    )
                    .unwrap();
                    (id, t)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn trajectory_csv_round_trip(map in traj_maps()) {
            let mut buf = Vec::new();
            write_trajectory_csv(&mut buf, map.values()).unwrap();
            let back = parse_trajectory_csv(buf.as_slice(), "rt", &strict()).unwrap();
            prop_assert!(back.diagnostics.is_empty());
            prop_assert_eq!(back.value, map);
        }

        #[test]
        fn snapshot_and_csv_paths_agree(map in traj_maps()) {
            // rebuild per-minute snapshots from the trajectories
            let mut by_minute: BTreeMap<u64, Vec<(u32, TopicId)>> = BTreeMap::new();
            for t in map.values() {
                for o in t.observations() {
                    by_minute.entry(o.t).or_default().push((o.rank, t.topic().clone()));
                }
            }
            let mut total_entries = 0;
            let snaps: Vec<Snapshot> = by_minute
                .into_iter()
                .map(|(t, mut entries)| {
                    entries.sort();
                    entries.dedup_by_key(|e| e.0);
                    total_entries += entries.len();
                    Snapshot { t, entries }
                })
                .collect();
            let from_snaps = snapshots_to_trajectories(&snaps, 50, DuplicatePolicy::Strict).unwrap();
            let observed: u64 = from_snaps.values().map(|t| t.dwell_time()).sum();
            prop_assert_eq!(observed as usize, total_entries);

            let mut buf = Vec::new();
            write_trajectory_csv(&mut buf, from_snaps.values()).unwrap();
            let from_csv = parse_trajectory_csv(buf.as_slice(), "rt", &strict()).unwrap().value;
            prop_assert_eq!(from_csv, from_snaps);
        }
    }
}
