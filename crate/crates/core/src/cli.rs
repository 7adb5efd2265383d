//! Command-line front end.
//!
//! Settings for `crawl` are layered: command-line flags (or their
//! `FOCUSCRAWL_*` environment variables) override the TOML file given with
//! `--config`, which overrides the built-in defaults.
//!
//! Exit codes: 0 success, 1 I/O failure while writing reports, 2 invalid
//! input or configuration, 3 the transport (corpus directory) could not be
//! set up.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corpus::{self, generate, GeneratorSpec};
use crate::engine::{crawl, validate_inputs, CrawlConfig, CrawlOutput, CrawlStats};
use crate::evaluator::{compare, render_csv, render_report, CompareSettings, ComparisonRow, SuiteFile};
use crate::fetcher::{LiveTransport, Transport};
use crate::relevance::{MatchMode, Query, WeightConfig};

pub const RANKED_FORMAT: &str = "focuscrawl.ranked/v1";
pub const COMPARE_FORMAT: &str = "focuscrawl.compare/v1";

pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_TRANSPORT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "focuscrawl", version, about = "Focused breadth-first web crawler")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Crawl from seed URLs and rank the pages relevant to a query.
    Crawl(CrawlArgs),
    /// Run the tag-weighted and the URL-only crawler over a suite of corpora
    /// and report the precision of both.
    Compare(CompareArgs),
    /// Generate a synthetic offline corpus.
    Gencorpus(GenArgs),
}

#[derive(Debug, Default, Args)]
pub struct CrawlArgs {
    /// Seed URL; repeat for several seeds.
    #[arg(long = "seed", env = "FOCUSCRAWL_SEED", value_delimiter = ',')]
    pub seeds: Vec<String>,
    #[arg(long, env = "FOCUSCRAWL_QUERY")]
    pub query: Option<String>,
    /// Count each query term separately instead of the whole phrase.
    #[arg(long)]
    pub any_term: bool,
    /// Serve pages from this offline corpus directory instead of the network.
    #[arg(long, env = "FOCUSCRAWL_CORPUS")]
    pub corpus: Option<PathBuf>,
    #[arg(long, env = "FOCUSCRAWL_MAX_PAGES")]
    pub max_pages: Option<usize>,
    #[arg(long, env = "FOCUSCRAWL_MAX_DEPTH")]
    pub max_depth: Option<u32>,
    #[arg(long, env = "FOCUSCRAWL_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, env = "FOCUSCRAWL_WEIGHT_M")]
    pub weight_m: Option<u32>,
    #[arg(long, env = "FOCUSCRAWL_WEIGHT_U")]
    pub weight_u: Option<u32>,
    #[arg(long, env = "FOCUSCRAWL_WEIGHT_T")]
    pub weight_t: Option<u32>,
    #[arg(long, env = "FOCUSCRAWL_WEIGHT_H")]
    pub weight_h: Option<u32>,
    #[arg(long, env = "FOCUSCRAWL_WEIGHT_B")]
    pub weight_b: Option<u32>,
    /// Pages with weight at or below this value are discarded.
    #[arg(long, env = "FOCUSCRAWL_THRESHOLD")]
    pub threshold: Option<u64>,
    /// Minimum delay between requests to one host, in milliseconds.
    #[arg(long, env = "FOCUSCRAWL_MIN_DELAY_MS")]
    pub min_delay_ms: Option<u64>,
    #[arg(long)]
    pub ignore_robots_txt: bool,
    #[arg(long)]
    pub ignore_meta_robots: bool,
    #[arg(long, env = "FOCUSCRAWL_OUT_JSON")]
    pub out_json: Option<PathBuf>,
    #[arg(long, env = "FOCUSCRAWL_OUT_CSV")]
    pub out_csv: Option<PathBuf>,
    #[arg(long, env = "FOCUSCRAWL_CONFIG")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Suite file (TOML) listing queries, seeds and corpus directories.
    #[arg(long, env = "FOCUSCRAWL_SUITE")]
    pub suite: PathBuf,
    #[arg(long, env = "FOCUSCRAWL_MAX_PAGES")]
    pub max_pages: Option<usize>,
    #[arg(long, env = "FOCUSCRAWL_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, env = "FOCUSCRAWL_OUT_CSV")]
    pub out_csv: Option<PathBuf>,
    #[arg(long, env = "FOCUSCRAWL_OUT_JSON")]
    pub out_json: Option<PathBuf>,
    /// Write the plain-text table here as well as to stdout.
    #[arg(long)]
    pub out_report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Target directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Generator spec (TOML); flags override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// PRNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub pages: Option<usize>,
    #[arg(long)]
    pub fanout: Option<usize>,
    #[arg(long)]
    pub relevant_fraction: Option<f64>,
    #[arg(long)]
    pub decoy_fraction: Option<f64>,
    #[arg(long)]
    pub url_noise_fraction: Option<f64>,
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long)]
    pub traps: bool,
    #[arg(long)]
    pub dead_links: bool,
}

/// The `--config` file. Every field is optional; relative paths are
/// resolved against the file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub seeds: Option<Vec<String>>,
    pub query: Option<String>,
    pub match_mode: Option<MatchMode>,
    pub corpus: Option<PathBuf>,
    pub weights: Option<WeightConfig>,
    pub max_pages: Option<usize>,
    pub max_depth: Option<u32>,
    pub max_pages_per_host: Option<usize>,
    pub max_path_segments: Option<usize>,
    pub workers: Option<usize>,
    pub min_delay_ms: Option<u64>,
    pub timeout_ms: Option<u64>,
    pub max_body_bytes: Option<usize>,
    pub redirect_limit: Option<u32>,
    pub user_agent: Option<String>,
    pub respect_robots_txt: Option<bool>,
    pub respect_meta_robots: Option<bool>,
    pub out_json: Option<PathBuf>,
    pub out_csv: Option<PathBuf>,
}

impl RunConfigFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::invalid(format!("cannot read config {}: {e}", path.display())))?;
        let mut file: RunConfigFile = toml::from_str(&text)
            .map_err(|e| CliError::invalid(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut file.corpus, &mut file.out_json, &mut file.out_csv].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(file)
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    fn transport(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_TRANSPORT,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            code: EXIT_IO,
            message: format!("cannot write {}: {e}", path.display()),
        }
    }
}

/// A fully resolved `crawl` invocation.
#[derive(Debug, Clone)]
pub struct CrawlPlan {
    pub config: CrawlConfig,
    pub corpus: Option<PathBuf>,
    pub out_json: Option<PathBuf>,
    pub out_csv: Option<PathBuf>,
}

/// Merges flags over the config file over defaults.
pub fn resolve_crawl(args: &CrawlArgs, file: &RunConfigFile) -> Result<CrawlPlan, CliError> {
    let seeds = if args.seeds.is_empty() {
        file.seeds.clone().unwrap_or_default()
    } else {
        args.seeds.clone()
    };
    let query = args
        .query
        .clone()
        .or_else(|| file.query.clone())
        .ok_or_else(|| CliError::invalid("a query is required (--query or `query` in the config file)"))?;
    let mut config = validate_inputs(&seeds, &query).map_err(|e| CliError::invalid(e.to_string()))?;

    let mode = if args.any_term {
        MatchMode::AnyTerm
    } else {
        file.match_mode.unwrap_or_default()
    };
    config.query = Query::new(&query, mode).map_err(|e| CliError::invalid(e.to_string()))?;

    let corpus = args.corpus.clone().or_else(|| file.corpus.clone());

    let mut w = file.weights.unwrap_or_default();
    let pick = |flag: Option<u32>, current: u32| flag.unwrap_or(current);
    w.meta = pick(args.weight_m, w.meta);
    w.url = pick(args.weight_u, w.url);
    w.title = pick(args.weight_t, w.title);
    w.heading = pick(args.weight_h, w.heading);
    w.body = pick(args.weight_b, w.body);
    w.threshold = args.threshold.unwrap_or(w.threshold);
    config.weights = w;

    if let Some(n) = args.max_pages.or(file.max_pages) {
        config.max_pages = n;
    }
    if let Some(n) = args.max_depth.or(file.max_depth) {
        config.limits.max_depth = n;
    }
    if let Some(n) = file.max_pages_per_host {
        config.limits.max_pages_per_host = n;
    }
    if let Some(n) = file.max_path_segments {
        config.limits.max_path_segments = n;
    }
    if let Some(n) = args.workers.or(file.workers) {
        config.workers = n;
    }

    let fetch = &mut config.fetch;
    // Offline corpora have no server to be polite to.
    let default_delay = if corpus.is_some() { Some(0) } else { None };
    if let Some(ms) = args.min_delay_ms.or(file.min_delay_ms).or(default_delay) {
        fetch.min_delay = Duration::from_millis(ms);
    }
    if let Some(ms) = file.timeout_ms {
        fetch.timeout = Duration::from_millis(ms);
    }
    if let Some(n) = file.max_body_bytes {
        fetch.max_body_bytes = n;
    }
    if let Some(n) = file.redirect_limit {
        fetch.redirect_limit = n;
    }
    if let Some(ua) = &file.user_agent {
        fetch.user_agent = ua.clone();
    }
    fetch.respect_robots_txt = !args.ignore_robots_txt && file.respect_robots_txt.unwrap_or(true);
    config.respect_meta_robots = !args.ignore_meta_robots && file.respect_meta_robots.unwrap_or(true);

    config.validate().map_err(|e| CliError::invalid(e.to_string()))?;
    Ok(CrawlPlan {
        config,
        corpus,
        out_json: args.out_json.clone().or_else(|| file.out_json.clone()),
        out_csv: args.out_csv.clone().or_else(|| file.out_csv.clone()),
    })
}

#[derive(Debug, Serialize)]
pub struct RankedRow<'a> {
    pub rank: usize,
    pub t: u64,
    #[serde(rename = "Nm")]
    pub nm: u64,
    #[serde(rename = "Nu")]
    pub nu: u64,
    #[serde(rename = "Nt")]
    pub nt: u64,
    #[serde(rename = "Nh")]
    pub nh: u64,
    #[serde(rename = "Nb")]
    pub nb: u64,
    pub url: &'a str,
}

#[derive(Debug, Serialize)]
struct RankedDocument<'a> {
    format: &'static str,
    query: &'a str,
    match_mode: MatchMode,
    weights: WeightConfig,
    results: Vec<RankedRow<'a>>,
    stats: &'a CrawlStats,
}

pub fn ranked_rows(out: &CrawlOutput) -> Vec<RankedRow<'_>> {
    out.results
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| RankedRow {
            rank: i + 1,
            t: e.t,
            nm: e.counts.meta,
            nu: e.counts.url,
            nt: e.counts.title,
            nh: e.counts.heading,
            nb: e.counts.body,
            url: e.url.as_str(),
        })
        .collect()
}

/// Machine-readable ranked output. Field names and order are part of the
/// versioned format.
pub fn render_ranked_json(config: &CrawlConfig, out: &CrawlOutput) -> String {
    let doc = RankedDocument {
        format: RANKED_FORMAT,
        query: config.query.as_str(),
        match_mode: config.query.mode(),
        weights: config.weights,
        results: ranked_rows(out),
        stats: &out.stats,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("ranked output serializes");
    s.push('\n');
    s
}

pub fn render_ranked_csv(out: &CrawlOutput) -> String {
    let mut s = String::from("rank,t,Nm,Nu,Nt,Nh,Nb,url\n");
    for r in ranked_rows(out) {
        let _ = writeln!(s, "{},{},{},{},{},{},{},{}", r.rank, r.t, r.nm, r.nu, r.nt, r.nh, r.nb, r.url);
    }
    s
}

pub fn render_ranked_table(out: &CrawlOutput) -> String {
    let mut s = format!(
        "{:>4}  {:>6}  {:>4}  {:>4}  {:>4}  {:>4}  {:>4}  url\n",
        "rank", "t", "Nm", "Nu", "Nt", "Nh", "Nb"
    );
    for r in ranked_rows(out) {
        let _ = writeln!(
            s,
            "{:>4}  {:>6}  {:>4}  {:>4}  {:>4}  {:>4}  {:>4}  {}",
            r.rank, r.t, r.nm, r.nu, r.nt, r.nh, r.nb, r.url
        );
    }
    let st = &out.stats;
    let _ = writeln!(
        s,
        "\n{} retained of {} dequeued ({} below threshold, {} noindex, {} failed, {} not html)",
        st.retained, st.dequeued, st.below_threshold, st.no_index, st.fetch_failed, st.not_html
    );
    s
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn cmd_crawl(args: &CrawlArgs, stdout: &mut dyn std::io::Write) -> Result<(), CliError> {
    let file = match &args.config {
        Some(p) => RunConfigFile::read(p)?,
        None => RunConfigFile::default(),
    };
    let plan = resolve_crawl(args, &file)?;
    let transport: Arc<dyn Transport> = match &plan.corpus {
        Some(dir) => {
            let c = corpus::load(dir).map_err(|e| CliError::transport(format!("corpus {}: {e}", dir.display())))?;
            Arc::new(c.transport())
        }
        None => Arc::new(LiveTransport::new(&plan.config.fetch.user_agent, plan.config.fetch.timeout)),
    };
    let out = crawl(&plan.config, transport).map_err(|e| CliError::invalid(e.to_string()))?;

    let _ = stdout.write_all(render_ranked_table(&out).as_bytes());
    if let Some(p) = &plan.out_json {
        write_file(p, &render_ranked_json(&plan.config, &out))?;
    }
    if let Some(p) = &plan.out_csv {
        write_file(p, &render_ranked_csv(&out))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CompareDocument<'a> {
    format: &'static str,
    rows: &'a [ComparisonRow],
}

fn cmd_compare(args: &CompareArgs, stdout: &mut dyn std::io::Write) -> Result<(), CliError> {
    let suite = SuiteFile::read(&args.suite).map_err(|e| CliError::invalid(e.to_string()))?;
    let rows = suite.load_rows(&args.suite).map_err(|e| match e {
        crate::evaluator::EvalError::Corpus(_) => CliError::transport(e.to_string()),
        other => CliError::invalid(other.to_string()),
    })?;
    let mut settings = CompareSettings::default();
    if let Some(n) = args.max_pages.or(suite.max_pages) {
        settings.max_pages = n;
    }
    if let Some(n) = args.workers {
        settings.workers = n;
    }
    let table = compare(&rows, &settings).map_err(|e| CliError::invalid(e.to_string()))?;

    let report = render_report(&table);
    let _ = stdout.write_all(report.as_bytes());
    if let Some(p) = &args.out_report {
        write_file(p, &report)?;
    }
    if let Some(p) = &args.out_csv {
        write_file(p, &render_csv(&table))?;
    }
    if let Some(p) = &args.out_json {
        let doc = CompareDocument {
            format: COMPARE_FORMAT,
            rows: &table,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("comparison serializes");
        s.push('\n');
        write_file(p, &s)?;
    }
    Ok(())
}

fn cmd_gencorpus(args: &GenArgs, stdout: &mut dyn std::io::Write) -> Result<(), CliError> {
    let mut spec = match &args.spec {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::invalid(format!("cannot read spec {}: {e}", p.display())))?;
            toml::from_str::<GeneratorSpec>(&text).map_err(|e| CliError::invalid(format!("spec {}: {e}", p.display())))?
        }
        None => GeneratorSpec::default(),
    };
    spec.seed = args.seed.unwrap_or(spec.seed);
    spec.sites = args.sites.unwrap_or(spec.sites);
    spec.pages_per_site = args.pages.unwrap_or(spec.pages_per_site);
    spec.fanout = args.fanout.unwrap_or(spec.fanout);
    spec.relevant_fraction = args.relevant_fraction.unwrap_or(spec.relevant_fraction);
    spec.decoy_fraction = args.decoy_fraction.unwrap_or(spec.decoy_fraction);
    spec.url_noise_fraction = args.url_noise_fraction.unwrap_or(spec.url_noise_fraction);
    if let Some(q) = &args.query {
        spec.query = q.clone();
    }
    spec.traps |= args.traps;
    spec.dead_links |= args.dead_links;

    let generated = generate(&spec).map_err(|e| CliError::invalid(e.to_string()))?;
    generated.corpus.write(&args.out).map_err(|e| CliError {
        code: EXIT_IO,
        message: e.to_string(),
    })?;
    let _ = writeln!(
        stdout,
        "wrote {} entries to {}; seeds: {}",
        generated.corpus.manifest.entries.len(),
        args.out.display(),
        generated.seeds.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" ")
    );
    Ok(())
}

/// Parses `argv` and runs the command, returning the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Crawl(a) => cmd_crawl(a, stdout),
        Command::Compare(a) => cmd_compare(a, stdout),
        Command::Gencorpus(a) => cmd_gencorpus(a, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            if e.code == EXIT_INVALID {
                let _ = writeln!(stderr, "\nFor usage, run `focuscrawl --help`.");
            }
            e.code
        }
    }
}
