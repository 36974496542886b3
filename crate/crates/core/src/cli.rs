//! Batch front end: `ingest`, `visibility`, `sweep`, `synth` and `report`.
//!
//! Exit codes: 0 on success, 1 when the run fails (bad data, unknown topic,
//! too few points), 2 on usage errors.

use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};

use crate::bundle::{self, RunRecorder};
use crate::export::{self, fmt_g17, SweepSummary};
use crate::ingest::{self, ParseDiagnostic, ParseMode, ParseOptions};
use crate::model::{self, Dataset, TopicId};
use crate::regression::{self, SkipReason};
use crate::synth::{self, SynthConfig};
use crate::visibility::{self, DGrid, Discrimination};

/// Every default the commands fall back to. Manifests record the resolved
/// values of each run.
pub mod defaults {
    pub const R_CAP: u32 = crate::model::DEFAULT_R_CAP;
    pub const STRICT: bool = false;
    pub const D_MIN: f64 = crate::visibility::DGrid::DEFAULT_MIN;
    pub const D_MAX: f64 = crate::visibility::DGrid::DEFAULT_MAX;
    pub const D_STEP: f64 = crate::visibility::DGrid::DEFAULT_STEP;
    pub const MIN_TOPICS: usize = crate::regression::DEFAULT_MIN_TOPICS;
    /// Level used for the scatter-plot data.
    pub const SCATTER_D: f64 = 0.8;
    pub const REFINE_TOL: f64 = 1e-6;
    pub const CROSSOVER_TOL: f64 = 1e-9;
}

#[derive(Parser, Debug)]
#[command(name = "trendvis", version, about = "Visibility analysis of ranked trending topics")]
pub struct Cli {
    /// Abort on the first malformed record instead of skipping it.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Number of ranks on the list.
    #[arg(long, global = true, default_value_t = defaults::R_CAP)]
    pub r_cap: u32,
    /// Overrides the seed of a synth config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Normalize snapshot files or a trajectory CSV into a dataset bundle.
    Ingest(IngestArgs),
    /// Visibility profile (or single value) of one topic.
    Visibility(VisibilityArgs),
    /// R² of the log-log fit across discrimination levels.
    Sweep(SweepArgs),
    /// Generate a synthetic bundle from a key=value config.
    Synth(SynthArgs),
    /// Plot-ready data for the trajectory, visibility, scatter and R² figures.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Snapshot line files (one crawl per line).
    #[arg(long, num_args = 1.., conflicts_with = "trajectories", required_unless_present = "trajectories")]
    pub snapshots: Vec<PathBuf>,
    /// Pre-extracted trajectory CSV.
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
    /// Metadata CSV (`topic_id,category,n_reads`).
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// RFC 3339 instant mapped to minute 0 (default: earliest first record).
    #[arg(long)]
    pub epoch: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    #[arg(long, default_value_t = defaults::D_MIN)]
    pub d_min: f64,
    #[arg(long, default_value_t = defaults::D_MAX)]
    pub d_max: f64,
    #[arg(long, default_value_t = defaults::D_STEP)]
    pub d_step: f64,
}

impl GridArgs {
    fn grid(&self) -> Result<DGrid, CliError> {
        DGrid::range(self.d_min, self.d_max, self.d_step).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Args, Debug)]
pub struct VisibilityArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub topic: String,
    /// Grid as `min:max:step`.
    #[arg(long, default_value = "0:3:0.015")]
    pub d_grid: String,
    /// Print the single value V(d) instead of a profile.
    #[arg(long)]
    pub at: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Restrict the sweep to one category.
    #[arg(long)]
    pub category: Option<String>,
    /// Also sweep every category separately.
    #[arg(long)]
    pub per_category: bool,
    #[arg(long, default_value_t = defaults::MIN_TOPICS)]
    pub min_topics: usize,
    /// Golden-section refinement around the grid maximum.
    #[arg(long)]
    pub refine: bool,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Any of fig1, fig2, fig3, fig4.
    #[arg(long, value_delimiter = ',', default_value = "fig1,fig2,fig3,fig4")]
    pub figures: Vec<String>,
    /// Topics for fig1 (all listed) and fig2 (first two). Defaults to the
    /// two topics with the longest dwell time.
    #[arg(long)]
    pub topic: Vec<String>,
    /// Discrimination level of the scatter data.
    #[arg(long, default_value_t = defaults::SCATTER_D)]
    pub d: f64,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Failed(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failed(e) => write!(f, "error: {e:#}"),
        }
    }
}

type CliResult = Result<(), CliError>;

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> CliResult {
    if cli.r_cap == 0 {
        return Err(CliError::Usage("--r-cap must be at least 1".into()));
    }
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(cli, a, stdout),
        Command::Visibility(a) => cmd_visibility(cli, a, stdout),
        Command::Sweep(a) => cmd_sweep(cli, a, stdout),
        Command::Synth(a) => cmd_synth(cli, a, stdout),
        Command::Report(a) => cmd_report(cli, a, stdout),
    }
}

fn parse_options(cli: &Cli) -> ParseOptions {
    ParseOptions {
        mode: if cli.strict { ParseMode::Strict } else { ParseMode::Lenient },
        r_cap: cli.r_cap,
        epoch: None,
    }
}

fn require_out(cli: &Cli) -> Result<&Path, CliError> {
    cli.out
        .as_deref()
        .ok_or_else(|| CliError::Usage("--out DIR is required for this command".into()))
}

fn record_globals(rec: &mut RunRecorder, cli: &Cli) {
    rec.param("strict", cli.strict);
    rec.param("r_cap", cli.r_cap);
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Failed(e.into())
}

fn cmd_ingest(cli: &Cli, a: &IngestArgs, stdout: &mut dyn Write) -> CliResult {
    let out = require_out(cli)?;
    let mut opts = parse_options(cli);
    if let Some(raw) = &a.epoch {
        let epoch = DateTime::parse_from_rfc3339(raw)
            .map_err(|e| CliError::Usage(format!("--epoch {raw:?}: {e}")))?
            .with_timezone(&Utc);
        opts.epoch = Some(epoch);
    }
    let mut rec = RunRecorder::new("ingest", out);
    record_globals(&mut rec, cli);
    let mut diagnostics: Vec<ParseDiagnostic> = Vec::new();

    let trajectories = if let Some(path) = &a.trajectories {
        let bytes = rec.read_input(path)?;
        let parsed = ingest::parse_trajectory_csv(bytes.as_slice(), &path.display().to_string(), &opts)
            .with_context(|| format!("parsing {}", path.display()))?;
        diagnostics.extend(parsed.diagnostics);
        parsed.value
    } else {
        let mut sources = Vec::new();
        for path in &a.snapshots {
            let bytes = rec.read_input(path)?;
            sources.push((path.display().to_string(), bytes));
        }
        // one epoch for all files: the override, or the earliest first record
        if opts.epoch.is_none() {
            let mut earliest: Option<DateTime<Utc>> = None;
            for (name, bytes) in &sources {
                let (_, epoch) = ingest::parse_snapshot_stream(BufReader::new(bytes.as_slice()), name, &opts)
                    .with_context(|| format!("parsing {name}"))?;
                earliest = match (earliest, epoch) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
            }
            opts.epoch = earliest;
        }
        let mut parsed_sources = Vec::new();
        for (name, bytes) in &sources {
            let (parsed, _) = ingest::parse_snapshot_stream(BufReader::new(bytes.as_slice()), name, &opts)
                .with_context(|| format!("parsing {name}"))?;
            diagnostics.extend(parsed.diagnostics);
            parsed_sources.push((name.clone(), parsed.value));
        }
        let snaps = ingest::merge_snapshot_sources(parsed_sources);
        ingest::snapshots_to_trajectories(&snaps, opts.r_cap, opts.mode.duplicate_policy())
            .map_err(anyhow::Error::from)?
    };

    let meta = match &a.meta {
        Some(path) => {
            let bytes = rec.read_input(path)?;
            let parsed = ingest::parse_metadata_csv(bytes.as_slice(), &path.display().to_string(), &opts)
                .with_context(|| format!("parsing {}", path.display()))?;
            diagnostics.extend(parsed.diagnostics);
            parsed.value
        }
        None => Default::default(),
    };

    let ds = ingest::assemble_dataset(opts.r_cap, opts.epoch, trajectories, meta).map_err(anyhow::Error::from)?;
    let validation = model::validate_dataset(&ds).map_err(anyhow::Error::from)?;
    if let Some(epoch) = ds.epoch {
        rec.param("epoch", epoch.to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    }
    bundle::write_bundle(&mut rec, &ds, Some(&diagnostics))?;
    let mut vbuf = String::from("topic_id,code\n");
    for d in &validation {
        vbuf.push_str(&format!("{},{}\n", csv_quote(d.topic.as_str()), d.kind.code()));
    }
    rec.write_output("validation.csv", vbuf.as_bytes())?;
    rec.finish()?;

    writeln!(
        stdout,
        "topics={} observations={} meta={} diagnostics={} validation={}",
        ds.trajectories.len(),
        ds.observation_count(),
        ds.meta.len(),
        diagnostics.len(),
        validation.len()
    )
    .map_err(io_err)?;
    Ok(())
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn parse_grid_spec(spec: &str) -> Result<DGrid, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--d-grid {spec:?} is not min:max:step")))?;
    if nums.len() != 3 {
        return Err(CliError::Usage(format!("--d-grid {spec:?} is not min:max:step")));
    }
    DGrid::range(nums[0], nums[1], nums[2]).map_err(|e| CliError::Usage(e.to_string()))
}

fn load(cli: &Cli, dir: &Path, rec: Option<&mut RunRecorder>) -> Result<Dataset, CliError> {
    Ok(bundle::load_bundle(dir, &parse_options(cli), rec)?)
}

fn topic_id(raw: &str) -> Result<TopicId, CliError> {
    TopicId::new(raw).map_err(|e| CliError::Usage(e.to_string()))
}

fn cmd_visibility(cli: &Cli, a: &VisibilityArgs, stdout: &mut dyn Write) -> CliResult {
    let grid = parse_grid_spec(&a.d_grid)?;
    let at = a
        .at
        .map(|d| Discrimination::new(d).map_err(|e| CliError::Usage(e.to_string())))
        .transpose()?;
    let mut rec = cli.out.as_deref().map(|o| RunRecorder::new("visibility", o));
    let ds = load(cli, &a.bundle, rec.as_mut())?;
    let id = topic_id(&a.topic)?;
    let traj = ds
        .trajectories
        .get(&id)
        .ok_or_else(|| CliError::Failed(anyhow!("UnknownTopic: {id}")))?;

    let mut body = Vec::new();
    match at {
        Some(d) => writeln!(body, "{}", fmt_g17(visibility::visibility(traj, d))).map_err(io_err)?,
        None => {
            let profile = visibility::visibility_profile(traj, grid.values()).map_err(anyhow::Error::from)?;
            export::write_profile_csv(&mut body, &profile).map_err(io_err)?;
        }
    }
    stdout.write_all(&body).map_err(io_err)?;

    if let Some(mut rec) = rec {
        record_globals(&mut rec, cli);
        rec.param("topic", &id);
        match at {
            Some(d) => rec.param("at", d),
            None => rec.param("d_grid", grid.spec()),
        }
        rec.write_output("visibility.csv", &body)?;
        rec.finish()?;
    }
    Ok(())
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs, stdout: &mut dyn Write) -> CliResult {
    let grid = a.grid.grid()?;
    if grid.len() < 2 {
        return Err(CliError::Usage("the sweep grid needs at least two points".into()));
    }
    if a.per_category && a.min_topics < regression::MIN_FIT_POINTS {
        return Err(CliError::Usage(format!(
            "--min-topics must be at least {}",
            regression::MIN_FIT_POINTS
        )));
    }
    let mut rec = cli.out.as_deref().map(|o| RunRecorder::new("sweep", o));
    let full = load(cli, &a.bundle, rec.as_mut())?;
    let ds = match &a.category {
        Some(cat) => full.restrict_to_category(cat),
        None => full,
    };

    let sweep = regression::sweep_dmax(&ds, &grid).map_err(anyhow::Error::from)?;
    let summary = SweepSummary::new(&sweep, grid.spec());
    let mut summary_text = summary.to_text();
    if a.refine {
        let (d, r2) = regression::refine_dmax(&ds, &sweep, defaults::REFINE_TOL).map_err(anyhow::Error::from)?;
        summary_text.push_str(&format!("refined_d_max={}\nrefined_r2_max={}\n", fmt_g17(d), fmt_g17(r2)));
    }
    stdout.write_all(summary_text.as_bytes()).map_err(io_err)?;

    let categories = if a.per_category {
        let analysis = regression::per_category_sweep(&ds, &grid, a.min_topics).map_err(anyhow::Error::from)?;
        for s in &analysis.skipped {
            let why = match &s.reason {
                SkipReason::BelowThreshold => format!("fewer than {} topics", a.min_topics),
                SkipReason::FitFailed(e) => e.to_string(),
            };
            writeln!(stdout, "skipped category {} ({} topics): {why}", s.category, s.n_topics).map_err(io_err)?;
        }
        Some(analysis)
    } else {
        None
    };

    if let Some(mut rec) = rec {
        record_globals(&mut rec, cli);
        rec.param("d_min", a.grid.d_min);
        rec.param("d_max", a.grid.d_max);
        rec.param("d_step", a.grid.d_step);
        rec.param("grid_points", grid.len());
        rec.param("category", a.category.as_deref().unwrap_or("*"));
        rec.param("per_category", a.per_category);
        rec.param("min_topics", a.min_topics);
        rec.param("refine", a.refine);
        let mut curve = Vec::new();
        export::write_sweep_csv(&mut curve, &sweep).map_err(io_err)?;
        rec.write_output("sweep.csv", &curve)?;
        rec.write_output("summary.txt", summary_text.as_bytes())?;
        if let Some(analysis) = &categories {
            let mut buf = Vec::new();
            export::write_category_csv(&mut buf, &analysis.reports).map_err(io_err)?;
            rec.write_output("categories.csv", &buf)?;
        }
        rec.finish()?;
    } else if let Some(analysis) = &categories {
        export::write_category_csv(&mut *stdout, &analysis.reports).map_err(io_err)?;
    }
    Ok(())
}

fn cmd_synth(cli: &Cli, a: &SynthArgs, stdout: &mut dyn Write) -> CliResult {
    let out = require_out(cli)?;
    let mut rec = RunRecorder::new("synth", out);
    let text = rec.read_input(&a.config)?;
    let text = String::from_utf8(text).map_err(|e| CliError::Failed(e.into()))?;
    let mut cfg = SynthConfig::parse(&text).map_err(anyhow::Error::from)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.r_cap = if cli.r_cap != defaults::R_CAP { cli.r_cap } else { cfg.r_cap };
    let ds = synth::generate_dataset(&cfg).map_err(anyhow::Error::from)?;

    record_globals(&mut rec, cli);
    for line in cfg.to_text().lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            if k != "category" {
                rec.param(&format!("synth.{k}"), v);
            }
        }
    }
    bundle::write_bundle(&mut rec, &ds, None)?;
    rec.write_output("truth.csv", synth::ground_truth_text(&cfg).as_bytes())?;
    rec.write_output("config.txt", cfg.to_text().as_bytes())?;
    rec.finish()?;
    writeln!(
        stdout,
        "topics={} observations={} categories={}",
        ds.trajectories.len(),
        ds.observation_count(),
        ds.categories().len()
    )
    .map_err(io_err)?;
    Ok(())
}

fn cmd_report(cli: &Cli, a: &ReportArgs, stdout: &mut dyn Write) -> CliResult {
    let out = require_out(cli)?;
    const KNOWN: [&str; 4] = ["fig1", "fig2", "fig3", "fig4"];
    for f in &a.figures {
        if !KNOWN.contains(&f.as_str()) {
            return Err(CliError::Usage(format!("unknown figure {f:?}; expected one of {KNOWN:?}")));
        }
    }
    let wants = |f: &str| a.figures.iter().any(|x| x == f);
    let grid = a.grid.grid()?;
    let scatter_d = Discrimination::new(a.d).map_err(|e| CliError::Usage(e.to_string()))?;

    let mut rec = RunRecorder::new("report", out);
    let ds = load(cli, &a.bundle, Some(&mut rec))?;
    record_globals(&mut rec, cli);
    rec.param("figures", a.figures.join(","));
    rec.param("d", a.d);
    rec.param("d_grid", grid.spec());

    let selected: Vec<TopicId> = if a.topic.is_empty() {
        let mut by_dwell: Vec<(&TopicId, u64)> = ds.trajectories.iter().map(|(k, t)| (k, t.dwell_time())).collect();
        by_dwell.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(y.0)));
        by_dwell.into_iter().take(2).map(|(k, _)| k.clone()).collect()
    } else {
        a.topic.iter().map(|t| topic_id(t)).collect::<Result<_, _>>()?
    };
    for id in &selected {
        if !ds.trajectories.contains_key(id) {
            return Err(CliError::Failed(anyhow!("UnknownTopic: {id}")));
        }
    }
    rec.param("topics", selected.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(","));

    if wants("fig1") {
        let mut buf = String::from("topic_id,t,rank\n");
        for id in &selected {
            for o in ds.trajectories[id].observations() {
                buf.push_str(&format!("{},{},{}\n", csv_quote(id.as_str()), o.t, o.rank));
            }
        }
        rec.write_output("fig1.csv", buf.as_bytes())?;
    }

    if wants("fig2") {
        let mut buf = String::from("topic_id,d,visibility\n");
        for id in selected.iter().take(2) {
            let profile = visibility::visibility_profile(&ds.trajectories[id], grid.values()).map_err(anyhow::Error::from)?;
            for (d, v) in profile {
                buf.push_str(&format!("{},{},{}\n", csv_quote(id.as_str()), fmt_g17(d), fmt_g17(v)));
            }
        }
        rec.write_output("fig2.csv", buf.as_bytes())?;
        if let [x, y, ..] = selected.as_slice() {
            let values = grid.values();
            let crossing = visibility::find_crossover(
                &ds.trajectories[x],
                &ds.trajectories[y],
                values[0],
                values[values.len() - 1],
                defaults::CROSSOVER_TOL,
            );
            let text = match crossing {
                Ok(Some(c)) => format!("topic_a={x}\ntopic_b={y}\ncrossover_d={}\n", fmt_g17(c.d)),
                _ => format!("topic_a={x}\ntopic_b={y}\ncrossover_d=none\n"),
            };
            rec.write_output("fig2_crossover.txt", text.as_bytes())?;
        }
    }

    if wants("fig3") {
        let input = regression::filter_regression_points(&ds, scatter_d);
        let mut buf = String::from("log10_v,log10_reads\n");
        for p in &input.points {
            buf.push_str(&format!("{},{}\n", fmt_g17(p.v.log10()), fmt_g17((p.reads as f64).log10())));
        }
        rec.write_output("fig3.csv", buf.as_bytes())?;
        let fit = regression::ols_loglog(&input.pairs()).map_err(anyhow::Error::from)?;
        let text = format!(
            "d={}\nslope={}\nintercept={}\nr2={}\nn={}\nexcluded={}\n",
            fmt_g17(scatter_d.value()),
            fmt_g17(fit.slope),
            fmt_g17(fit.intercept),
            fmt_g17(fit.r2),
            fit.n,
            input.exclusions.len()
        );
        rec.write_output("fig3_fit.txt", text.as_bytes())?;
    }

    if wants("fig4") {
        let sweep = regression::sweep_dmax(&ds, &grid).map_err(anyhow::Error::from)?;
        let mut buf = Vec::new();
        export::write_r2_curve_csv(&mut buf, &sweep).map_err(io_err)?;
        rec.write_output("fig4.csv", &buf)?;
    }

    let manifest = rec.finish()?;
    for o in &manifest.outputs {
        writeln!(stdout, "{}", o.path).map_err(io_err)?;
    }
    Ok(())
}
