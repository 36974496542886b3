// Parsing crawler snapshots in lenient mode: the malformed line becomes a
// diagnostic, the good lines become per-topic trajectories with gaps where
// a topic was off the list or a crawl was missed.
//
// ```bash
// cargo run -p trendvis --example snapshot_ingest
// ```

use std::collections::BTreeMap;
use std::io::Cursor;

use trendvis::ingest::{
    assemble_dataset, parse_metadata_csv, parse_snapshot_stream, snapshots_to_trajectories, ParseOptions,
};
use trendvis::model::validate_dataset;

const CRAWL: &str = "\
2021-03-01T08:07:00Z\t1:election%20night\t2:transfer%3Awindow\t40:new album
2021-03-01T08:08:00Z\t1:transfer%3Awindow\t30:new album
this line is garbage
2021-03-01T08:10:00Z\t3:election%20night\t50:new album
";

const META: &str = "topic_id,category,n_reads
election night,politics,52000
transfer:window,sports,8000
unseen topic,music,10
";

pub fn run_example() -> anyhow::Result<()> {
    let opts = ParseOptions::default();
    let (parsed, epoch) = parse_snapshot_stream(Cursor::new(CRAWL), "crawl.tsv", &opts)?;
    println!("epoch: {}", epoch.map(|e| e.to_rfc3339()).unwrap_or_default());
    for d in &parsed.diagnostics {
        println!("skipped {}:{}: {}", d.source, d.line, d.message);
    }

    let trajectories = snapshots_to_trajectories(&parsed.value, opts.r_cap, opts.mode.duplicate_policy())?;
    for (id, traj) in &trajectories {
        let minutes: Vec<String> = traj.observations().iter().map(|o| format!("{}@{}", o.rank, o.t)).collect();
        println!("{:<18} {}", id.as_str(), minutes.join(" "));
    }

    let meta = parse_metadata_csv(Cursor::new(META), "meta.csv", &opts)?;
    let meta: BTreeMap<_, _> = meta.value.into_iter().collect();
    let ds = assemble_dataset(opts.r_cap, epoch, trajectories, meta)?;
    for diag in validate_dataset(&ds)? {
        println!("validation: {} {}", diag.kind.code(), diag.topic.as_str());
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
