//! The `cdr-mobility` command line.
//!
//! Settings come from an optional config file (`--config`) in a flat
//! `key = value` format with `[section]` headers, then from flags, which
//! always win. `--set section.key=value` reaches any key without a
//! dedicated flag.
//!
//! ```text
//! utc_offset = -3
//! output = out
//!
//! [synth]
//! n_users = 1000
//! seed = 42
//!
//! [model]
//! direction = each
//! ```

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::commute::{
    commute_radius, density_grid, important_places, write_commute_csv, write_grid_csv, TimeFilter,
    DEFAULT_MIN_CALLS,
};
use crate::error::{Error, Result};
use crate::events::{
    compare_on_matches, convergence_grids, load_fixture, stadium_zone, stadium_zones, tag_fans, write_enriched_csv,
    write_fixture, write_tags_csv, ClusterMode, Fixture, MatchId, DEFAULT_ZONE_RADIUS_KM,
};
use crate::geo::{BBox, GridSpec};
use crate::ingest::{load_antennas, stream_cdrs, AntennaRegistry, DatasetStats, ParsePolicy};
use crate::predictor::{
    cluster_antennas, evaluate, load_model, save_model, write_per_slot_csv, BaselineModel, DirectionFilter,
    EvalReport, ModelBuilder,
};
use crate::synth::{generate_cdrs, generate_fixture, generate_population, save_antennas, FixturePlan, SynthConfig};
use crate::types::{CdrRecord, GeoPoint, UtcOffset, SECONDS_PER_DAY};

/// Records handed to a parallel training step at once.
const TRAIN_BATCH: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Directions {
    One(DirectionFilter),
    /// All, outgoing-only and incoming-only, each as its own model.
    Each,
}

impl Directions {
    fn filters(self) -> Vec<DirectionFilter> {
        match self {
            Directions::One(f) => vec![f],
            Directions::Each => DirectionFilter::EACH.to_vec(),
        }
    }
}

/// Every setting a subcommand may read.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub utc_offset: UtcOffset,
    pub output: PathBuf,
    pub threads: usize,
    pub antennas: Option<PathBuf>,
    pub cdrs: Option<PathBuf>,
    pub fixture: Option<PathBuf>,
    pub policy: ParsePolicy,
    /// Records before this instant train, the rest test.
    pub split_epoch: Option<i64>,

    pub direction: Directions,
    pub cluster_km: f64,
    pub min_calls: u64,

    pub grid_hours: Vec<u8>,
    pub grid_weekdays_only: bool,
    pub cell_deg: f64,
    pub grid_bbox: Option<BBox>,

    pub zone_radius_km: f64,
    pub k_consecutive: usize,
    pub cluster_mode: ClusterMode,

    pub match_id: Option<String>,
    pub offsets_hours: Vec<i32>,

    pub synth: SynthConfig,
    pub train_weeks: u32,
    pub test_weeks: u32,
    pub fixture_plan: FixturePlan,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        RunConfig {
            utc_offset: synth.utc_offset,
            output: PathBuf::from("out"),
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            antennas: None,
            cdrs: None,
            fixture: None,
            policy: ParsePolicy::SkipAndCount,
            split_epoch: None,
            direction: Directions::One(DirectionFilter::All),
            cluster_km: 0.0,
            min_calls: DEFAULT_MIN_CALLS,
            grid_hours: vec![6, 8, 10, 17, 19, 20],
            grid_weekdays_only: true,
            cell_deg: 0.01,
            grid_bbox: None,
            zone_radius_km: DEFAULT_ZONE_RADIUS_KM,
            k_consecutive: 3,
            cluster_mode: ClusterMode::ZoneSet,
            match_id: None,
            offsets_hours: vec![-5, -1, 1, 3],
            synth: SynthConfig { weeks: 17, ..synth },
            train_weeks: 15,
            test_weeks: 2,
            // Weekly through the test weeks.
            fixture_plan: FixturePlan {
                n_matches: 17,
                ..FixturePlan::default()
            },
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse `{value}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(format!("{key}: expected true or false"))),
    }
}

fn parse_bbox(key: &str, value: &str) -> Result<BBox> {
    match parse_list::<f64>(key, value)?.as_slice() {
        &[a, b, c, d] => BBox::new(GeoPoint { lat: a, lon: b }, GeoPoint { lat: c, lon: d }),
        _ => Err(Error::config(format!("{key}: expected min_lat,min_lon,max_lat,max_lon"))),
    }
}

impl RunConfig {
    /// Sets one key. Keys outside any section are global; the rest are
    /// `section.key`.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let key = key.strip_prefix("run.").unwrap_or(key);
        let v = value.trim();
        match key {
            "utc_offset" => self.utc_offset = UtcOffset::new(parse(key, v)?)?,
            "output" => self.output = PathBuf::from(v),
            "threads" => {
                self.threads = parse(key, v)?;
                if self.threads == 0 {
                    return Err(Error::config("threads must be at least 1"));
                }
            }
            "antennas" => self.antennas = Some(PathBuf::from(v)),
            "cdrs" => self.cdrs = Some(PathBuf::from(v)),
            "fixture" => self.fixture = Some(PathBuf::from(v)),
            "policy" => {
                self.policy = match v {
                    "strict" => ParsePolicy::Strict,
                    "skip" => ParsePolicy::SkipAndCount,
                    _ => return Err(Error::config("policy: expected strict or skip")),
                }
            }
            "split_epoch" => self.split_epoch = Some(parse(key, v)?),
            "seed" | "synth.seed" => self.synth.seed = parse(key, v)?,

            "synth.n_users" => self.synth.n_users = parse(key, v)?,
            "synth.n_antennas" => self.synth.n_antennas = parse(key, v)?,
            "synth.bbox" => self.synth.bbox = parse_bbox(key, v)?,
            "synth.train_weeks" => self.train_weeks = parse(key, v)?,
            "synth.test_weeks" => self.test_weeks = parse(key, v)?,
            "synth.start_day" => self.synth.start_day = parse(key, v)?,
            "synth.call_rate" => self.synth.call_rate = parse(key, v)?,
            "synth.p_slot_adherence" => self.synth.p_slot_adherence = parse(key, v)?,
            "synth.fan_fraction" => self.synth.fan_fraction = parse(key, v)?,
            "synth.p_attend" => self.synth.p_attend = parse(key, v)?,
            "synth.match_calls" => self.synth.match_calls = parse(key, v)?,
            "synth.n_matches" => self.fixture_plan.n_matches = parse(key, v)?,
            "synth.team" => self.fixture_plan.team = v.to_string(),
            "synth.first_match_day" => self.fixture_plan.first_day = parse(key, v)?,
            "synth.match_spacing_days" => self.fixture_plan.spacing_days = parse_list(key, v)?,
            "synth.kickoff_hours" => self.fixture_plan.kickoff_hours = parse_list(key, v)?,
            "synth.avoid_anchors_km" => self.fixture_plan.avoid_anchors_km = Some(parse(key, v)?),

            "model.direction" => {
                self.direction = match v {
                    "each" => Directions::Each,
                    other => Directions::One(
                        DirectionFilter::from_label(other)
                            .ok_or_else(|| Error::config("model.direction: expected all, out, in or each"))?,
                    ),
                }
            }
            "model.cluster_km" => {
                self.cluster_km = parse(key, v)?;
                if self.cluster_km.is_nan() || self.cluster_km < 0.0 {
                    return Err(Error::config("model.cluster_km must be non-negative"));
                }
            }
            "commute.min_calls" => self.min_calls = parse::<u64>(key, v)?.max(1),

            "grid.hours" => {
                self.grid_hours = parse_list(key, v)?;
                if self.grid_hours.iter().any(|&h| h > 23) {
                    return Err(Error::config("grid.hours must lie in 0..24"));
                }
            }
            "grid.weekdays_only" => self.grid_weekdays_only = parse_bool(key, v)?,
            "grid.cell_deg" => self.cell_deg = parse(key, v)?,
            "grid.bbox" => self.grid_bbox = Some(parse_bbox(key, v)?),

            "events.zone_radius_km" => self.zone_radius_km = parse(key, v)?,
            "events.k_consecutive" => self.k_consecutive = parse(key, v)?,
            "events.cluster_mode" => {
                self.cluster_mode =
                    ClusterMode::from_label(v).ok_or_else(|| Error::config("events.cluster_mode: expected zone or exact"))?
            }

            "convergence.match_id" => self.match_id = Some(v.to_string()),
            "convergence.offsets_hours" => self.offsets_hours = parse_list(key, v)?,

            _ => return Err(Error::config(format!("unknown setting `{key}`"))),
        }
        Ok(())
    }

    /// Applies a config file's text.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::malformed(origin, i as u64 + 1, "expected `key = value`"));
            };
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            self.apply(&key, v).map_err(|e| Error::malformed(origin, i as u64 + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text, path)?;
        Ok(cfg)
    }

    /// Synth settings with the shared offset and week split folded in.
    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            utc_offset: self.utc_offset,
            weeks: self.train_weeks + self.test_weeks,
            ..self.synth.clone()
        }
    }

    pub fn antennas_path(&self) -> PathBuf {
        self.antennas.clone().unwrap_or_else(|| self.output.join("antennas.csv"))
    }

    pub fn cdrs_path(&self) -> PathBuf {
        self.cdrs.clone().unwrap_or_else(|| self.output.join("cdrs.csv"))
    }

    pub fn fixture_path(&self) -> PathBuf {
        self.fixture.clone().unwrap_or_else(|| self.output.join("fixture.csv"))
    }

    /// Explicit `split_epoch`, or the train/test boundary of the synthesized
    /// data when reading the default CDR file.
    pub fn split(&self) -> Option<i64> {
        self.split_epoch.or_else(|| {
            self.cdrs
                .is_none()
                .then(|| self.synth_config().week_start(self.train_weeks))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a synthetic population, fixture and CDR log.
    Synth,
    /// Dataset statistics of a CDR log.
    Stats,
    /// Train slot models on the training split.
    Train,
    /// Evaluate trained models on the test split.
    Eval,
    /// Important places and commute radius.
    Commute,
    /// Hourly call-density grids.
    Grid,
    /// Tag fans from the fixture.
    TagFans,
    /// Compare baseline and fixture-enriched predictions on match windows.
    EvalEnriched,
    /// Convergence grids around one match.
    Convergence,
    /// Every subcommand above, in order.
    All,
}

#[derive(Debug, Parser)]
#[command(name = "cdr-mobility", version, about = "Mobility analytics over call detail records")]
struct Args {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output: Option<String>,
    #[arg(long, global = true)]
    threads: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    utc_offset: Option<String>,
    #[arg(long, global = true)]
    antennas: Option<String>,
    #[arg(long, global = true)]
    cdrs: Option<String>,
    #[arg(long, global = true)]
    fixture: Option<String>,
    /// `strict` or `skip`.
    #[arg(long, global = true)]
    policy: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    split_epoch: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    n_users: Option<String>,
    #[arg(long, global = true)]
    n_antennas: Option<String>,
    /// `all`, `out`, `in` or `each`.
    #[arg(long, global = true)]
    direction: Option<String>,
    #[arg(long, global = true)]
    cluster_km: Option<String>,
    #[arg(long, global = true)]
    min_calls: Option<String>,
    #[arg(long, global = true)]
    zone_radius_km: Option<String>,
    #[arg(long, global = true)]
    k_consecutive: Option<String>,
    /// `zone` or `exact`.
    #[arg(long, global = true)]
    cluster_mode: Option<String>,
    #[arg(long, global = true)]
    match_id: Option<String>,
    /// Any setting as `section.key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Args {
    fn overrides(&self) -> Vec<(String, String)> {
        let named = [
            ("output", &self.output),
            ("threads", &self.threads),
            ("utc_offset", &self.utc_offset),
            ("antennas", &self.antennas),
            ("cdrs", &self.cdrs),
            ("fixture", &self.fixture),
            ("policy", &self.policy),
            ("split_epoch", &self.split_epoch),
            ("synth.seed", &self.seed),
            ("synth.n_users", &self.n_users),
            ("synth.n_antennas", &self.n_antennas),
            ("model.direction", &self.direction),
            ("model.cluster_km", &self.cluster_km),
            ("commute.min_calls", &self.min_calls),
            ("events.zone_radius_km", &self.zone_radius_km),
            ("events.k_consecutive", &self.k_consecutive),
            ("events.cluster_mode", &self.cluster_mode),
            ("convergence.match_id", &self.match_id),
        ];
        let mut out: Vec<(String, String)> = named
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect();
        out.extend(self.set.iter().map(|kv| match kv.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => (kv.clone(), String::new()),
        }));
        out
    }
}

/// Parses arguments (program name first) into a subcommand and its
/// configuration: defaults, then the config file, then flags.
pub fn parse_args<I, T>(args: I) -> std::result::Result<(Command, RunConfig), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(args).map_err(CliError::Usage)?;
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for (k, v) in args.overrides() {
        cfg.apply(&k, &v)?;
    }
    Ok((args.command, cfg))
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(clap::Error),
    #[error(transparent)]
    Run(#[from] Error),
}

/// Entry point for the binary: prints summaries to stdout and diagnostics to
/// stderr, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = parse_args(args).and_then(|(cmd, cfg)| execute(cmd, &cfg).map_err(CliError::from));
    match result {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(CliError::Usage(e)) => {
            let _ = e.print();
            e.exit_code()
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs one subcommand on a pool of `cfg.threads` workers and returns its
/// summary line(s).
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(|| {
        fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
        match cmd {
            Command::Synth => synth(cfg),
            Command::Stats => stats(cfg),
            Command::Train => train(cfg),
            Command::Eval => eval(cfg),
            Command::Commute => commute(cfg),
            Command::Grid => grid(cfg),
            Command::TagFans => tag(cfg),
            Command::EvalEnriched => eval_enriched(cfg),
            Command::Convergence => convergence(cfg),
            Command::All => {
                let steps = [
                    synth, stats, train, eval, commute, grid, tag, eval_enriched, convergence,
                ];
                let mut out = String::new();
                for step in steps {
                    out.push_str(&step(cfg)?);
                }
                Ok(out)
            }
        }
    })
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::config(format!("{what} file not found: {}", path.display())))
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn registry(cfg: &RunConfig) -> Result<AntennaRegistry> {
    let path = cfg.antennas_path();
    require(&path, "antenna")?;
    load_antennas(&path)
}

fn fixture(cfg: &RunConfig) -> Result<Fixture> {
    let path = cfg.fixture_path();
    require(&path, "fixture")?;
    load_fixture(&path)
}

/// Streams the CDR file and keeps records passing `keep`.
fn records(
    cfg: &RunConfig,
    registry: &AntennaRegistry,
    keep: impl Fn(&CdrRecord) -> bool,
) -> Result<(Vec<CdrRecord>, DatasetStats)> {
    let path = cfg.cdrs_path();
    require(&path, "CDR")?;
    let mut reader = stream_cdrs(&path, registry, cfg.policy, cfg.utc_offset)?;
    let mut out = Vec::new();
    for r in reader.by_ref() {
        let r = r?;
        if keep(&r) {
            out.push(r);
        }
    }
    Ok((out, reader.stats()))
}

fn is_train(cfg: &RunConfig) -> impl Fn(&CdrRecord) -> bool {
    let split = cfg.split();
    move |r| split.is_none_or(|s| r.timestamp < s)
}

fn is_test(cfg: &RunConfig) -> impl Fn(&CdrRecord) -> bool {
    let split = cfg.split();
    move |r| split.is_none_or(|s| r.timestamp >= s)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn synth(cfg: &RunConfig) -> Result<String> {
    let scfg = cfg.synth_config();
    let (registry, truth) = generate_population(&scfg)?;
    let fixture = generate_fixture(&registry, &truth, &scfg, &cfg.fixture_plan)?;
    save_antennas(&registry, &cfg.output.join("antennas.csv"))?;
    write_file(&cfg.output.join("fixture.csv"), |w| write_fixture(&fixture, w))?;
    let out = generate_cdrs(&registry, &truth, &fixture, &scfg, &cfg.output)?;
    Ok(format!(
        "synth: {} users, {} antennas, {} matches, {} records over {} weeks (split at {})\n",
        truth.users.len(),
        registry.len(),
        fixture.len(),
        out.records_written,
        scfg.weeks,
        scfg.week_start(cfg.train_weeks)
    ))
}

fn stats(cfg: &RunConfig) -> Result<String> {
    let registry = registry(cfg)?;
    let (_, stats) = records(cfg, &registry, |_| false)?;
    write_file(&cfg.output.join("stats.csv"), |w| {
        writeln!(w, "record_count,user_count,malformed_count,time_min,time_max")?;
        let (lo, hi) = stats.time_range.map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
        writeln!(w, "{},{},{},{lo},{hi}", stats.record_count, stats.user_count, stats.malformed_count)
    })?;
    write_file(&cfg.output.join("stats_per_day.csv"), |w| {
        writeln!(w, "day,count")?;
        for (&day, &n) in &stats.per_day_counts {
            let date = chrono::DateTime::from_timestamp(day * SECONDS_PER_DAY, 0)
                .map(|d| d.date_naive().to_string())
                .unwrap_or_else(|| day.to_string());
            writeln!(w, "{date},{n}")?;
        }
        Ok(())
    })?;
    let days = stats.per_day_counts.len().max(1) as f64;
    Ok(format!(
        "stats: {} records ({:.0}/day), {} users, {} malformed\n",
        stats.record_count,
        stats.record_count as f64 / days,
        stats.user_count,
        stats.malformed_count
    ))
}

fn model_path(cfg: &RunConfig, filter: DirectionFilter) -> PathBuf {
    cfg.output.join(format!("model_{}.csv", filter.label()))
}

fn train(cfg: &RunConfig) -> Result<String> {
    let registry = registry(cfg)?;
    let path = cfg.cdrs_path();
    require(&path, "CDR")?;
    let keep = is_train(cfg);
    let mut builders: Vec<ModelBuilder> = cfg
        .direction
        .filters()
        .into_iter()
        .map(|f| ModelBuilder::new(f, cfg.utc_offset))
        .collect();
    let mut reader = stream_cdrs(&path, &registry, cfg.policy, cfg.utc_offset)?;
    let mut batch = Vec::with_capacity(TRAIN_BATCH);
    let mut used = 0u64;
    loop {
        batch.clear();
        let mut read = 0usize;
        for r in reader.by_ref().take(TRAIN_BATCH) {
            let r = r?;
            read += 1;
            if keep(&r) {
                batch.push(r);
            }
        }
        if read == 0 {
            break;
        }
        for b in &mut builders {
            b.extend_par(&batch);
        }
        used += batch.len() as u64;
    }
    let stats = reader.stats();
    let mut line = format!("train: {} of {} records", used, stats.record_count);
    for b in builders {
        let model = b.finish();
        save_model(&model, model_path(cfg, model.direction_filter))?;
        let _ = write!(
            line,
            ", {} model: {} users",
            model.direction_filter.label(),
            model.histogram.user_count()
        );
    }
    line.push('\n');
    Ok(line)
}

fn eval_line(report: &EvalReport) -> String {
    format!(
        "{},{},{},{},{},{}",
        report.total_events,
        report.predicted_events,
        report.correct_events,
        csv_opt(report.accuracy()),
        csv_opt(report.coverage()),
        csv_opt(report.mean_slot_accuracy())
    )
}

fn eval(cfg: &RunConfig) -> Result<String> {
    let registry = registry(cfg)?;
    let (test, _) = records(cfg, &registry, is_test(cfg))?;
    let clustering = (cfg.cluster_km > 0.0).then(|| cluster_antennas(&registry, cfg.cluster_km));
    let mut out = String::new();
    for filter in cfg.direction.filters() {
        let path = model_path(cfg, filter);
        require(&path, "model")?;
        let model = load_model(&path, filter, cfg.utc_offset)?;
        let mut variants = vec![("", evaluate(&model, &test, filter, cfg.utc_offset, None))];
        if let Some(c) = &clustering {
            variants.push(("_clustered", evaluate(&model, &test, filter, cfg.utc_offset, Some(c))));
        }
        for (suffix, report) in &variants {
            let label = filter.label();
            write_file(&cfg.output.join(format!("per_slot_{label}{suffix}.csv")), |w| {
                write_per_slot_csv(report, w)
            })?;
            write_file(&cfg.output.join(format!("eval_{label}{suffix}.csv")), |w| {
                writeln!(w, "total,predicted,correct,accuracy,coverage,mean_slot_accuracy")?;
                writeln!(w, "{}", eval_line(report))
            })?;
            if !out.is_empty() {
                out.push_str("; ");
            }
            let _ = write!(
                out,
                "{label}{suffix}: {} events, accuracy {}, coverage {}, mean slot accuracy {}",
                report.total_events,
                fmt_opt(report.accuracy()),
                fmt_opt(report.coverage()),
                fmt_opt(report.mean_slot_accuracy())
            );
        }
    }
    Ok(format!("eval: {out}\n"))
}

fn all_model(cfg: &RunConfig, registry: &AntennaRegistry) -> Result<BaselineModel> {
    let path = model_path(cfg, DirectionFilter::All);
    if path.is_file() {
        return load_model(&path, DirectionFilter::All, cfg.utc_offset);
    }
    let (train, _) = records(cfg, registry, is_train(cfg))?;
    Ok(crate::predictor::train_parallel(&train, DirectionFilter::All, cfg.utc_offset))
}

fn commute(cfg: &RunConfig) -> Result<String> {
    let registry = registry(cfg)?;
    let (all, _) = records(cfg, &registry, |_| true)?;
    let model = crate::predictor::train_parallel(&all, DirectionFilter::All, cfg.utc_offset);
    let places = important_places(&model.histogram, cfg.min_calls);
    let report = commute_radius(&places, &registry)?;
    write_file(&cfg.output.join("commute.csv"), |w| write_commute_csv(&report, w))?;
    Ok(format!(
        "commute: {} of {} users qualified, mean radius {} km, median {} km\n",
        report.users_qualified,
        report.users_considered,
        fmt_opt(report.mean_radius_km),
        fmt_opt(report.median_radius_km)
    ))
}

fn grid_spec(cfg: &RunConfig, registry: &AntennaRegistry) -> Result<GridSpec> {
    GridSpec::new(cfg.grid_bbox.unwrap_or_else(|| registry.bounds(cfg.cell_deg)), cfg.cell_deg)
}

fn grid(cfg: &RunConfig) -> Result<String> {
    let registry = registry(cfg)?;
    let spec = grid_spec(cfg, &registry)?;
    let (all, _) = records(cfg, &registry, |_| true)?;
    let mut out = String::from("grid:");
    for &hour in &cfg.grid_hours {
        let filter = TimeFilter::LocalHour {
            hour,
            weekdays_only: cfg.grid_weekdays_only,
        };
        let g = density_grid(&all, &registry, spec, filter, cfg.utc_offset);
        write_file(&cfg.output.join(format!("grid_h{hour:02}.csv")), |w| write_grid_csv(&g, w))?;
        let _ = write!(out, " {hour:02}h={}", g.total());
    }
    let _ = writeln!(out, " ({}x{} cells)", spec.rows, spec.cols);
    Ok(out)
}

fn tag(cfg: &RunConfig) -> Result<String> {
    let registry = registry(cfg)?;
    let fixture = fixture(cfg)?;
    let (train, _) = records(cfg, &registry, is_train(cfg))?;
    let tags = tag_fans(&train, &fixture, &registry, cfg.zone_radius_km, cfg.k_consecutive)?;
    write_file(&cfg.output.join("tags.csv"), |w| write_tags_csv(&tags, w))?;
    Ok(format!(
        "tag-fans: {} users tagged as {} fans (k = {}, radius {} km)\n",
        tags.len(),
        tags.team,
        tags.k_consecutive,
        tags.zone_radius_km
    ))
}

fn eval_enriched(cfg: &RunConfig) -> Result<String> {
    let registry = registry(cfg)?;
    let fixture = fixture(cfg)?;
    let model = all_model(cfg, &registry)?;
    let (train, _) = records(cfg, &registry, is_train(cfg))?;
    let tags = tag_fans(&train, &fixture, &registry, cfg.zone_radius_km, cfg.k_consecutive)?;
    drop(train);
    let zones = stadium_zones(&registry, &fixture, cfg.zone_radius_km)?;
    let (test, _) = records(cfg, &registry, is_test(cfg))?;
    let report = compare_on_matches(&model, &tags, &fixture, &zones, &test, cfg.cluster_mode)?;
    write_file(&cfg.output.join("enriched.csv"), |w| write_enriched_csv(&report, w))?;
    Ok(format!(
        "eval-enriched[{}]: {} match events of {} tagged users; baseline accuracy {} coverage {}; enriched accuracy {} coverage {}\n",
        cfg.cluster_mode.label(),
        report.baseline.total_events,
        tags.len(),
        fmt_opt(report.baseline.accuracy()),
        fmt_opt(report.baseline.coverage()),
        fmt_opt(report.enriched.accuracy()),
        fmt_opt(report.enriched.coverage())
    ))
}

fn convergence(cfg: &RunConfig) -> Result<String> {
    let registry = registry(cfg)?;
    let fixture = fixture(cfg)?;
    let index = match &cfg.match_id {
        Some(id) => fixture
            .index_of(&MatchId(id.clone()))
            .ok_or_else(|| Error::config(format!("match {id} not in fixture")))?,
        None => {
            // First match of the test period, else the first match.
            let split = cfg.split().unwrap_or(i64::MIN);
            fixture.matches().iter().position(|m| m.window.0 >= split).unwrap_or(0)
        }
    };
    let Some(event) = fixture.matches().get(index) else {
        return Err(Error::InvalidFixture("fixture is empty".into()));
    };
    let zone = stadium_zone(&registry, event, cfg.zone_radius_km)?;
    let spec = grid_spec(cfg, &registry)?;
    let (all, _) = records(cfg, &registry, |_| true)?;
    let grids = convergence_grids(&all, &registry, event, &zone, spec, &cfg.offsets_hours, cfg.utc_offset);
    let mut out = format!("convergence[{}]:", event.match_id);
    for (h, g) in cfg.offsets_hours.iter().zip(&grids) {
        write_file(&cfg.output.join(format!("conv_{}_{h:+}h.csv", event.match_id)), |w| write_grid_csv(g, w))?;
        let _ = write!(out, " {h:+}h={}", g.total());
    }
    out.push('\n');
    Ok(out)
}
