//! `econokit`: command-line front end for the analysis library.
//!
//! Each subcommand resolves its configuration from flags, `ECONOKIT_*`
//! environment variables, an optional `key = value` config file and
//! built-in defaults (in that precedence order), runs one analysis, and
//! writes a JSON report plus optional CSV companions into the output
//! directory. Exit codes: 0 success, 2 usage error, 1 data error, 70
//! internal fault.

mod cmd_backtest;
mod cmd_dfa;
mod cmd_distance;
mod cmd_lppl;
mod cmd_wealth;
mod cmd_zipf;
mod config;
mod error;
mod input;
mod report;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{flag, Settings, COMMON_KEYS};
use error::CliError;
use report::{Outputs, Report};

#[derive(Parser)]
#[command(name = "econokit", version, about = "Econophysics analysis toolkit")]
struct Cli {
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory all artifacts are written into.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Comma list of output formats: json,csv.
    #[arg(long, global = true)]
    formats: Option<String>,
    /// Cap on worker threads for the parallel fitting stages.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detrended fluctuation analysis of one series.
    Dfa(DfaArgs),
    /// Log-periodic divergence fits and the crash-risk track.
    Lppl(LpplArgs),
    /// Alphabet coding and word-frequency exponent fits.
    Zipf(ZipfArgs),
    /// Word-statistics trading strategy backtest.
    Backtest(BacktestArgs),
    /// Distance matrices, spanning trees and hierarchies across series.
    Distance(DistanceArgs),
    /// Kinetic wealth-exchange simulation.
    Wealthsim(WealthArgs),
}

#[derive(Args)]
struct SeriesArgs {
    /// Input CSV path.
    #[arg(long)]
    input: Option<String>,
    /// Value column, by 0-based index or header name.
    #[arg(long)]
    column: Option<String>,
    /// Time column, by 0-based index or header name.
    #[arg(long)]
    time_column: Option<String>,
    /// Cell delimiter: one character or 'tab'.
    #[arg(long)]
    delimiter: Option<String>,
    /// Missing-value policy: reject or forward-fill.
    #[arg(long)]
    gap_policy: Option<String>,
}

impl SeriesArgs {
    fn pairs(&self, pairs: &mut Vec<(String, String)>) {
        flag(pairs, "input", self.input.clone());
        flag(pairs, "column", self.column.clone());
        flag(pairs, "time_column", self.time_column.clone());
        flag(pairs, "delimiter", self.delimiter.clone());
        flag(pairs, "gap_policy", self.gap_policy.clone());
    }
}

#[derive(Args)]
struct DfaArgs {
    #[command(flatten)]
    series: SeriesArgs,
    /// Pre-transform: simple, log or raw-difference returns.
    #[arg(long)]
    returns: Option<String>,
    /// Detrending polynomial degree.
    #[arg(long)]
    degree: Option<usize>,
    /// Smallest box size of the schedule.
    #[arg(long)]
    box_min: Option<usize>,
    /// Largest box size of the schedule.
    #[arg(long)]
    box_max: Option<usize>,
    /// Number of geometrically spaced box sizes.
    #[arg(long)]
    box_count: Option<usize>,
    /// Box tiling when sizes do not divide the length: newest-first or
    /// oldest-first.
    #[arg(long)]
    alignment: Option<String>,
    /// Smallest box size entering the exponent regression.
    #[arg(long)]
    fit_min: Option<usize>,
    /// Largest box size entering the exponent regression.
    #[arg(long)]
    fit_max: Option<usize>,
    /// Rolling-window length; enables the rolling exponent track.
    #[arg(long)]
    window: Option<usize>,
    /// Rolling-window step.
    #[arg(long)]
    step: Option<usize>,
}

#[derive(Args)]
struct LpplArgs {
    #[command(flatten)]
    series: SeriesArgs,
    /// Fit the natural log of the values instead of the raw values.
    #[arg(long)]
    log_price: Option<bool>,
    /// Divergence shape: log or power.
    #[arg(long)]
    form: Option<String>,
    /// Oscillation shape: cosine or linear.
    #[arg(long)]
    oscillation: Option<String>,
    /// Critical-time grid lower bound.
    #[arg(long)]
    tc_lo: Option<f64>,
    /// Critical-time grid upper bound.
    #[arg(long)]
    tc_hi: Option<f64>,
    /// Critical-time grid size.
    #[arg(long)]
    tc_points: Option<usize>,
    /// Angular log-frequency grid lower bound.
    #[arg(long)]
    omega_lo: Option<f64>,
    /// Angular log-frequency grid upper bound.
    #[arg(long)]
    omega_hi: Option<f64>,
    /// Angular log-frequency grid size.
    #[arg(long)]
    omega_points: Option<usize>,
    /// Power-form exponent grid lower bound.
    #[arg(long)]
    m_lo: Option<f64>,
    /// Power-form exponent grid upper bound.
    #[arg(long)]
    m_hi: Option<f64>,
    /// Power-form exponent grid size.
    #[arg(long)]
    m_points: Option<usize>,
    /// Run one grid refinement pass around the best coarse cell.
    #[arg(long)]
    refine: Option<bool>,
    /// Run the rolling crash-risk track instead of a single fit.
    #[arg(long)]
    track: Option<bool>,
    /// End of the first track window (number of points).
    #[arg(long)]
    first_end: Option<usize>,
    /// How many points the track window grows per entry.
    #[arg(long)]
    track_step: Option<usize>,
    /// Fixed track window length; omit to grow from the start.
    #[arg(long)]
    track_window: Option<usize>,
    /// Trailing entries inspected by the convergence flag.
    #[arg(long)]
    depth: Option<usize>,
    /// Gap threshold below which convergence counts as imminent.
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Args)]
struct ZipfArgs {
    #[command(flatten)]
    series: SeriesArgs,
    /// Return transform feeding the coder: simple, log or raw-difference.
    #[arg(long)]
    returns: Option<String>,
    /// Alphabet size: 2, 3 or 5.
    #[arg(long)]
    alphabet: Option<String>,
    /// Comma list of alphabet thresholds (1 for ternary, 2 for five).
    #[arg(long)]
    thresholds: Option<String>,
    /// Word length in letters.
    #[arg(long)]
    word_length: Option<usize>,
    /// Slide the word window one letter at a time instead of jumping.
    #[arg(long)]
    overlap: Option<bool>,
    /// Smallest word count entering the rank-frequency regression.
    #[arg(long)]
    min_count: Option<u64>,
}

#[derive(Args)]
struct BacktestArgs {
    /// Input CSV path(s); repeat for several assets.
    #[arg(long)]
    input: Vec<String>,
    /// Comma list of value columns naming assets in one wide file.
    #[arg(long)]
    columns: Option<String>,
    /// Value column, by 0-based index or header name.
    #[arg(long)]
    column: Option<String>,
    /// Time column, by 0-based index or header name.
    #[arg(long)]
    time_column: Option<String>,
    /// Cell delimiter: one character or 'tab'.
    #[arg(long)]
    delimiter: Option<String>,
    /// Missing-value policy: reject or forward-fill.
    #[arg(long)]
    gap_policy: Option<String>,
    /// Training range `start:end` (timestamps or dates), or a plain
    /// count of training return observations.
    #[arg(long)]
    train: Option<String>,
    /// Trading range `start:end`; defaults to everything after training.
    #[arg(long)]
    trade: Option<String>,
    /// Word length in letters.
    #[arg(long)]
    word_length: Option<usize>,
    /// Alphabet size: 2, 3 or 5.
    #[arg(long)]
    alphabet: Option<String>,
    /// Comma list of alphabet thresholds (1 for ternary, 2 for five).
    #[arg(long)]
    thresholds: Option<String>,
    /// Position sizing: equal or confidence.
    #[arg(long)]
    weighting: Option<String>,
    /// Open short positions on sell signals.
    #[arg(long)]
    allow_short: Option<bool>,
    /// Minimum probability edge before acting.
    #[arg(long)]
    margin: Option<f64>,
    /// Periods per year for annualization.
    #[arg(long)]
    periods_per_year: Option<f64>,
    /// Market series CSV for the strategy beta.
    #[arg(long)]
    market: Option<String>,
    /// Value column of the market series.
    #[arg(long)]
    market_column: Option<String>,
}

#[derive(Args)]
struct DistanceArgs {
    /// Input CSV path(s); repeat for one file per series.
    #[arg(long)]
    input: Vec<String>,
    /// Comma list of value columns naming series in one wide file.
    #[arg(long)]
    columns: Option<String>,
    /// Value column, by 0-based index or header name.
    #[arg(long)]
    column: Option<String>,
    /// Time column, by 0-based index or header name.
    #[arg(long)]
    time_column: Option<String>,
    /// Cell delimiter: one character or 'tab'.
    #[arg(long)]
    delimiter: Option<String>,
    /// Missing-value policy: reject or forward-fill.
    #[arg(long)]
    gap_policy: Option<String>,
    /// Return transform: simple, log or raw-difference.
    #[arg(long)]
    returns: Option<String>,
    /// Distance kind: correlation or entropy.
    #[arg(long)]
    kind: Option<String>,
    /// Block length for the entropy rate.
    #[arg(long)]
    block_len: Option<usize>,
    /// Comma list of labels to keep; default keeps every series.
    #[arg(long)]
    subset: Option<String>,
    /// Rolling-window length; enables pairwise distance tracks.
    #[arg(long)]
    window: Option<usize>,
    /// Rolling-window step; defaults to half the window.
    #[arg(long)]
    step: Option<usize>,
    /// Include the minimum spanning tree and single-linkage hierarchy.
    #[arg(long)]
    mst: Option<bool>,
}

#[derive(Args)]
struct WealthArgs {
    /// Number of agents.
    #[arg(long)]
    agents: Option<usize>,
    /// Number of pairwise exchanges to simulate.
    #[arg(long)]
    steps: Option<u64>,
    /// Starting wallet per agent.
    #[arg(long)]
    initial_money: Option<f64>,
    /// Saving propensities: none, fixed:<s> or uniform.
    #[arg(long)]
    savings: Option<String>,
    /// Fraction of every exchanged pool that leaks out.
    #[arg(long)]
    tax: Option<f64>,
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of evenly spaced snapshots (0 for none).
    #[arg(long)]
    snapshots: Option<usize>,
    /// Histogram bins in the CSV outputs.
    #[arg(long)]
    bins: Option<usize>,
    /// Richest fraction of agents entering the tail fit.
    #[arg(long)]
    tail_fraction: Option<f64>,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("{}", e.render());
            std::process::exit(e.exit_code());
        }
    }
}

fn opt_string<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(|x| x.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let start = Instant::now();

    let mut pairs: Vec<(String, String)> = Vec::new();
    flag(
        &mut pairs,
        "out_dir",
        cli.out_dir.as_ref().map(|p| p.display().to_string()),
    );
    flag(&mut pairs, "formats", cli.formats.clone());
    flag(&mut pairs, "threads", opt_string(&cli.threads));

    let (name, keys): (&str, Vec<(&str, &str)>) = match &cli.command {
        Command::Dfa(args) => {
            args.series.pairs(&mut pairs);
            flag(&mut pairs, "returns", args.returns.clone());
            flag(&mut pairs, "degree", opt_string(&args.degree));
            flag(&mut pairs, "box_min", opt_string(&args.box_min));
            flag(&mut pairs, "box_max", opt_string(&args.box_max));
            flag(&mut pairs, "box_count", opt_string(&args.box_count));
            flag(&mut pairs, "alignment", args.alignment.clone());
            flag(&mut pairs, "fit_min", opt_string(&args.fit_min));
            flag(&mut pairs, "fit_max", opt_string(&args.fit_max));
            flag(&mut pairs, "window", opt_string(&args.window));
            flag(&mut pairs, "step", opt_string(&args.step));
            ("dfa", cmd_dfa::keys())
        }
        Command::Lppl(args) => {
            args.series.pairs(&mut pairs);
            flag(&mut pairs, "log_price", opt_string(&args.log_price));
            flag(&mut pairs, "form", args.form.clone());
            flag(&mut pairs, "oscillation", args.oscillation.clone());
            flag(&mut pairs, "tc_lo", opt_string(&args.tc_lo));
            flag(&mut pairs, "tc_hi", opt_string(&args.tc_hi));
            flag(&mut pairs, "tc_points", opt_string(&args.tc_points));
            flag(&mut pairs, "omega_lo", opt_string(&args.omega_lo));
            flag(&mut pairs, "omega_hi", opt_string(&args.omega_hi));
            flag(&mut pairs, "omega_points", opt_string(&args.omega_points));
            flag(&mut pairs, "m_lo", opt_string(&args.m_lo));
            flag(&mut pairs, "m_hi", opt_string(&args.m_hi));
            flag(&mut pairs, "m_points", opt_string(&args.m_points));
            flag(&mut pairs, "refine", opt_string(&args.refine));
            flag(&mut pairs, "track", opt_string(&args.track));
            flag(&mut pairs, "first_end", opt_string(&args.first_end));
            flag(&mut pairs, "track_step", opt_string(&args.track_step));
            flag(&mut pairs, "track_window", opt_string(&args.track_window));
            flag(&mut pairs, "depth", opt_string(&args.depth));
            flag(&mut pairs, "theta", opt_string(&args.theta));
            ("lppl", cmd_lppl::keys())
        }
        Command::Zipf(args) => {
            args.series.pairs(&mut pairs);
            flag(&mut pairs, "returns", args.returns.clone());
            flag(&mut pairs, "alphabet", args.alphabet.clone());
            flag(&mut pairs, "thresholds", args.thresholds.clone());
            flag(&mut pairs, "word_length", opt_string(&args.word_length));
            flag(&mut pairs, "overlap", opt_string(&args.overlap));
            flag(&mut pairs, "min_count", opt_string(&args.min_count));
            ("zipf", cmd_zipf::keys())
        }
        Command::Backtest(args) => {
            if !args.input.is_empty() {
                pairs.push(("input".into(), args.input.join(",")));
            }
            flag(&mut pairs, "columns", args.columns.clone());
            flag(&mut pairs, "column", args.column.clone());
            flag(&mut pairs, "time_column", args.time_column.clone());
            flag(&mut pairs, "delimiter", args.delimiter.clone());
            flag(&mut pairs, "gap_policy", args.gap_policy.clone());
            flag(&mut pairs, "train", args.train.clone());
            flag(&mut pairs, "trade", args.trade.clone());
            flag(&mut pairs, "word_length", opt_string(&args.word_length));
            flag(&mut pairs, "alphabet", args.alphabet.clone());
            flag(&mut pairs, "thresholds", args.thresholds.clone());
            flag(&mut pairs, "weighting", args.weighting.clone());
            flag(&mut pairs, "allow_short", opt_string(&args.allow_short));
            flag(&mut pairs, "margin", opt_string(&args.margin));
            flag(
                &mut pairs,
                "periods_per_year",
                opt_string(&args.periods_per_year),
            );
            flag(&mut pairs, "market", args.market.clone());
            flag(&mut pairs, "market_column", args.market_column.clone());
            ("backtest", cmd_backtest::keys())
        }
        Command::Distance(args) => {
            if !args.input.is_empty() {
                pairs.push(("input".into(), args.input.join(",")));
            }
            flag(&mut pairs, "columns", args.columns.clone());
            flag(&mut pairs, "column", args.column.clone());
            flag(&mut pairs, "time_column", args.time_column.clone());
            flag(&mut pairs, "delimiter", args.delimiter.clone());
            flag(&mut pairs, "gap_policy", args.gap_policy.clone());
            flag(&mut pairs, "returns", args.returns.clone());
            flag(&mut pairs, "kind", args.kind.clone());
            flag(&mut pairs, "block_len", opt_string(&args.block_len));
            flag(&mut pairs, "subset", args.subset.clone());
            flag(&mut pairs, "window", opt_string(&args.window));
            flag(&mut pairs, "step", opt_string(&args.step));
            flag(&mut pairs, "mst", opt_string(&args.mst));
            ("distance", cmd_distance::keys())
        }
        Command::Wealthsim(args) => {
            flag(&mut pairs, "agents", opt_string(&args.agents));
            flag(&mut pairs, "steps", opt_string(&args.steps));
            flag(&mut pairs, "initial_money", opt_string(&args.initial_money));
            flag(&mut pairs, "savings", args.savings.clone());
            flag(&mut pairs, "tax", opt_string(&args.tax));
            flag(&mut pairs, "seed", opt_string(&args.seed));
            flag(&mut pairs, "snapshots", opt_string(&args.snapshots));
            flag(&mut pairs, "bins", opt_string(&args.bins));
            flag(&mut pairs, "tail_fraction", opt_string(&args.tail_fraction));
            ("wealthsim", cmd_wealth::keys())
        }
    };

    let mut settings = Settings::build(&keys, cli.config.as_deref(), &pairs)?;

    if let Some(n) = settings.opt_usize("threads")? {
        if n == 0 {
            return Err(CliError::Usage("'threads' must be positive".into()));
        }
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            settings.warn("thread pool already initialized; 'threads' ignored");
        }
    }

    let outputs = Outputs::from_settings(&settings)?;
    let results = match &cli.command {
        Command::Dfa(_) => cmd_dfa::run(&mut settings, &outputs)?,
        Command::Lppl(_) => cmd_lppl::run(&mut settings, &outputs)?,
        Command::Zipf(_) => cmd_zipf::run(&mut settings, &outputs)?,
        Command::Backtest(_) => cmd_backtest::run(&mut settings, &outputs)?,
        Command::Distance(_) => cmd_distance::run(&mut settings, &outputs)?,
        Command::Wealthsim(_) => cmd_wealth::run(&mut settings, &outputs)?,
    };

    let report = Report {
        version: env!("CARGO_PKG_VERSION"),
        subcommand: name,
        config: settings.values(),
        warnings: settings.warnings(),
        duration_ms: start.elapsed().as_millis() as u64,
        results: &results,
    };
    outputs.write_report(&report)
}

/// Joins a command's own keys with the common ones into one schema.
fn schema(own: &[(&'static str, &'static str)]) -> Vec<(&'static str, &'static str)> {
    let mut keys: Vec<(&str, &str)> = COMMON_KEYS.to_vec();
    keys.extend_from_slice(own);
    keys
}
