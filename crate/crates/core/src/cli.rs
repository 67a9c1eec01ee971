//! Command-line front end: configuration merging, subcommand dispatch and
//! file output.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or config error.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::cell::{sample_slice, slice_csv, Thresholds};
use crate::error::Error;
use crate::oracle::{count_tree, OracleBudget};
use crate::output::write_atomic;
use crate::players::{Mode, Schedule, SharedBeacon};
use crate::sim::{
    fit_loglog_slope, default_fit_window, mean_cumulative_regret, run_csv, run_many, summarize, Instance, MeanProfile,
    RunOptions, SlopeFit, ThresholdSharing,
};
use crate::verify::{
    run_suite, verify_coloring, verify_consistency, verify_cut_lemma, verify_feas, verify_stability, Suite,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable supplying the default output directory.
pub const OUT_ENV: &str = "NOCOLLIDE_OUT";

#[derive(Debug, Parser)]
#[command(name = "nocollide", version, about = "Collision-free multi-player bandit simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one configuration over one or more seeds.
    Run(RunArgs),
    /// Run the configuration once per horizon listed in --t.
    Sweep(RunArgs),
    /// Label a grid on a K = 3 slice with partition cells.
    Slice(SliceArgs),
    /// Count (and optionally list) the nodes of the top-m tree.
    Enumerate(EnumerateArgs),
    /// Run a named verification suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// key=value config file; command-line flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of arms K.
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of players m.
    #[arg(long)]
    pub m: Option<usize>,
    /// Horizon T (a comma-separated list for sweep).
    #[arg(long)]
    pub t: Option<String>,
    /// Mean rewards: a comma list, `uniform-spread`, or `two-group gap=<d>`.
    #[arg(long)]
    pub p: Option<String>,
    /// full or bandit.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub eps_scale: Option<f64>,
    #[arg(long)]
    pub t0_scale: Option<f64>,
    /// Number of seeds.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Seed i uses master_seed + i.
    #[arg(long)]
    pub master_seed: Option<u64>,
    /// Output directory (default: $NOCOLLIDE_OUT, then ./out).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record per-round node diagnostics.
    #[arg(long)]
    pub log_nodes: bool,
    /// Give each player private thresholds (fault injection).
    #[arg(long)]
    pub per_player_thresholds: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SliceArgs {
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.0)]
    pub level: f64,
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    /// Explicit thresholds C(0),C(1),C(2); drawn from the master seed otherwise.
    #[arg(long)]
    pub c: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub master_seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EnumerateArgs {
    pub k: usize,
    pub m: usize,
    /// Print every node, one per line, after the counts.
    #[arg(long)]
    pub list: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    pub suite: String,
    /// Restrict to one K (maximum K for randomized suites).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub k: usize,
    pub m: usize,
    pub horizons: Vec<u64>,
    #[serde(serialize_with = "as_display")]
    pub p: MeanProfile,
    pub mode: Mode,
    pub eps_scale: f64,
    pub t0_scale: f64,
    pub seeds: u64,
    pub master_seed: u64,
    /// Left out of the JSON echo so outputs do not depend on where they live.
    #[serde(skip)]
    pub out: PathBuf,
    pub log_nodes: bool,
    pub thresholds: ThresholdSharing,
}

fn as_display<S: serde::Serializer>(p: &MeanProfile, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(p)
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Parses a flat `key = value` file; `#` starts a comment and `-` in keys is
/// read as `_`.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, Error> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| cfg_err(format!("line {}: expected key=value, got `{raw}`", n + 1)))?;
        map.insert(key.trim().replace('-', "_"), value.trim().to_string());
    }
    Ok(map)
}

const KNOWN_KEYS: [&str; 12] = [
    "k", "m", "t", "p", "mode", "eps_scale", "t0_scale", "seeds", "master_seed", "out", "log_nodes", "per_player_thresholds",
];

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, Error> {
    v.parse().map_err(|_| cfg_err(format!("`{key}` has invalid value `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, Error> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(cfg_err(format!("`{key}` must be true or false, got `{v}`"))),
    }
}

impl Config {
    /// Merges flags over the optional config file over defaults. `env_out`
    /// is the value of [`OUT_ENV`], if set.
    pub fn resolve(args: &RunArgs, env_out: Option<&str>) -> Result<Config, Error> {
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| cfg_err(format!("cannot read config {}: {e}", path.display())))?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        if let Some(bad) = file.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(cfg_err(format!("unknown config key `{bad}`")));
        }
        let get = |key: &str| file.get(key).map(String::as_str);

        let p_text = args.p.clone().or_else(|| get("p").map(str::to_string));
        let p = MeanProfile::parse(&p_text.ok_or_else(|| cfg_err("missing required key `p` (mean rewards)"))?)?;
        let k = match (args.k, get("k")) {
            (Some(k), _) => k,
            (None, Some(v)) => parse_value("k", v)?,
            (None, None) => match &p {
                MeanProfile::Explicit(v) => v.len(),
                _ => return Err(cfg_err("missing required key `k` (number of arms)")),
            },
        };
        let m = match (args.m, get("m")) {
            (Some(m), _) => m,
            (None, Some(v)) => parse_value("m", v)?,
            (None, None) => return Err(cfg_err("missing required key `m` (number of players)")),
        };
        let t_text = args
            .t
            .clone()
            .or_else(|| get("t").map(str::to_string))
            .ok_or_else(|| cfg_err("missing required key `t` (horizon)"))?;
        let horizons = t_text
            .split(',')
            .map(|s| parse_value::<u64>("t", s.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        let mode: Mode = match args.mode.as_deref().or(get("mode")) {
            Some(v) => v.parse()?,
            None => Mode::Full,
        };
        let eps_scale = match (args.eps_scale, get("eps_scale")) {
            (Some(v), _) => v,
            (None, Some(v)) => parse_value("eps_scale", v)?,
            (None, None) => 1.0,
        };
        let t0_scale = match (args.t0_scale, get("t0_scale")) {
            (Some(v), _) => v,
            (None, Some(v)) => parse_value("t0_scale", v)?,
            (None, None) => 1.0,
        };
        let seeds = match (args.seeds, get("seeds")) {
            (Some(v), _) => v,
            (None, Some(v)) => parse_value("seeds", v)?,
            (None, None) => 1,
        };
        if seeds == 0 {
            return Err(cfg_err("`seeds` must be >= 1"));
        }
        let master_seed = match (args.master_seed, get("master_seed")) {
            (Some(v), _) => v,
            (None, Some(v)) => parse_value("master_seed", v)?,
            (None, None) => 0,
        };
        let out = args
            .out
            .clone()
            .or_else(|| get("out").map(PathBuf::from))
            .or_else(|| env_out.map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let log_nodes = args.log_nodes || get("log_nodes").map(|v| parse_bool("log_nodes", v)).transpose()?.unwrap_or(false);
        let per_player = args.per_player_thresholds
            || get("per_player_thresholds")
                .map(|v| parse_bool("per_player_thresholds", v))
                .transpose()?
                .unwrap_or(false);

        let cfg = Config {
            k,
            m,
            horizons,
            p,
            mode,
            eps_scale,
            t0_scale,
            seeds,
            master_seed,
            out,
            log_nodes,
            thresholds: if per_player {
                ThresholdSharing::PerPlayer
            } else {
                ThresholdSharing::Shared
            },
        };
        // Surface every instance/schedule problem before any round runs.
        for &t in &cfg.horizons {
            cfg.instance(t)?;
            cfg.schedule(t)?;
        }
        Ok(cfg)
    }

    pub fn instance(&self, horizon: u64) -> Result<Instance, Error> {
        Instance::new(self.p.resolve(self.k, self.m)?, self.m, horizon)
    }

    pub fn schedule(&self, horizon: u64) -> Result<Schedule, Error> {
        Schedule::new(horizon, self.eps_scale, self.t0_scale).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds).map(|i| self.master_seed.wrapping_add(i)).collect()
    }

    fn options(&self) -> RunOptions {
        RunOptions {
            log_nodes: self.log_nodes,
            thresholds: self.thresholds,
        }
    }
}

/// Cross-seed summary written last by `run`.
#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub config: Config,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub mean_regret: f64,
    pub max_regret: f64,
    pub total_collisions: u64,
    pub runs_with_collisions: u64,
    pub adjacency_violations: Option<u64>,
    pub mean_curve_slope_fit: SlopeFit,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    cfg_err(format!("cannot write {}: {e}", path.display()))
}

/// Runs every seed for one horizon and writes `run_seed<S>.csv`,
/// `run_seed<S>.json` and `aggregate.json` into `dir`.
pub fn execute_runs(cfg: &Config, horizon: u64, dir: &Path) -> Result<Aggregate, Error> {
    let inst = cfg.instance(horizon)?;
    let sched = cfg.schedule(horizon)?;
    let seeds = cfg.seed_list();
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let runs = run_many(&inst, cfg.mode, &sched, &seeds, cfg.options())?;
    let mut violations = cfg.log_nodes.then_some(0u64);
    for run in &runs {
        let summary = summarize(run);
        if let (Some(v), Some(d)) = (violations.as_mut(), &summary.diagnostics) {
            *v += d.adjacency_violations;
        }
        let csv_path = dir.join(format!("run_seed{}.csv", run.master_seed));
        write_atomic(&csv_path, run_csv(run).as_bytes()).map_err(|e| io_err(&csv_path, e))?;
        let json_path = dir.join(format!("run_seed{}.json", run.master_seed));
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        write_atomic(&json_path, json.as_bytes()).map_err(|e| io_err(&json_path, e))?;
    }
    let totals: Vec<f64> = runs.iter().map(|r| r.total_regret()).collect();
    let (lo, hi) = default_fit_window(horizon);
    let agg = Aggregate {
        config: cfg.clone(),
        horizon,
        seeds,
        mean_regret: totals.iter().sum::<f64>() / totals.len() as f64,
        max_regret: totals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        total_collisions: runs.iter().map(|r| r.collision_rounds()).sum(),
        runs_with_collisions: runs.iter().filter(|r| r.collision_rounds() > 0).count() as u64,
        adjacency_violations: violations,
        mean_curve_slope_fit: fit_loglog_slope(&mean_cumulative_regret(&runs), lo, hi),
    };
    let path = dir.join("aggregate.json");
    let json = serde_json::to_string_pretty(&agg).expect("aggregate serializes");
    write_atomic(&path, json.as_bytes()).map_err(|e| io_err(&path, e))?;
    Ok(agg)
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write, env_out: Option<&str>) -> Result<i32, Error> {
    let cfg = Config::resolve(args, env_out)?;
    if cfg.horizons.len() != 1 {
        return Err(cfg_err("`run` takes a single horizon; use `sweep` for a list"));
    }
    let agg = execute_runs(&cfg, cfg.horizons[0], &cfg.out)?;
    let _ = writeln!(
        out,
        "wrote {} runs to {} (mean regret {:.6}, collisions {})",
        agg.seeds.len(),
        cfg.out.display(),
        agg.mean_regret,
        agg.total_collisions
    );
    Ok(EXIT_OK)
}

fn cmd_sweep(args: &RunArgs, out: &mut dyn Write, env_out: Option<&str>) -> Result<i32, Error> {
    let cfg = Config::resolve(args, env_out)?;
    let mut rows = Vec::new();
    for &t in &cfg.horizons {
        let agg = execute_runs(&cfg, t, &cfg.out.join(format!("T{t}")))?;
        let _ = writeln!(out, "T={t} mean_regret={:.6} collisions={}", agg.mean_regret, agg.total_collisions);
        rows.push(agg);
    }
    let path = cfg.out.join("sweep.json");
    let json = serde_json::to_string_pretty(&rows).expect("sweep serializes");
    write_atomic(&path, json.as_bytes()).map_err(|e| io_err(&path, e))?;
    Ok(EXIT_OK)
}

fn cmd_slice(args: &SliceArgs, out: &mut dyn Write, env_out: Option<&str>) -> Result<i32, Error> {
    if args.k != 3 {
        return Err(cfg_err(format!("slice needs K = 3, got K = {}", args.k)));
    }
    let thresholds = match &args.c {
        Some(text) => {
            let values = text
                .split(',')
                .map(|s| parse_value::<f64>("c", s.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            Thresholds::new(values).map_err(|e| cfg_err(e.to_string()))?
        }
        None => SharedBeacon::new(args.master_seed, 3)?.thresholds().clone(),
    };
    let points =
        sample_slice(args.m, &thresholds, args.eps, args.level, args.grid).map_err(|e| cfg_err(e.to_string()))?;
    let dir = args
        .out
        .clone()
        .or_else(|| env_out.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let path = dir.join("slice.csv");
    write_atomic(&path, slice_csv(&points).as_bytes()).map_err(|e| io_err(&path, e))?;
    let _ = writeln!(out, "wrote {} points to {}", points.len(), path.display());
    Ok(EXIT_OK)
}

fn cmd_enumerate(args: &EnumerateArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let budget = OracleBudget::default();
    let (nodes, leaves) = count_tree(args.k, args.m, &budget).map_err(|e| cfg_err(e.to_string()))?;
    let _ = writeln!(out, "nodes={nodes} leaves={leaves}");
    if args.list {
        for node in crate::dop::enumerate_tree(args.k, args.m, budget.max_nodes)? {
            let _ = writeln!(out, "{node}");
        }
    }
    Ok(EXIT_OK)
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let suite: Suite = args.suite.parse()?;
    let budget = OracleBudget::default();
    let report = match (args.k, args.m) {
        (None, None) => run_suite(suite, args.seed)?,
        (k, m) => {
            let k = k.ok_or_else(|| cfg_err("--m needs --k"))?;
            match suite {
                Suite::Feas | Suite::Coloring => {
                    let m = m.ok_or_else(|| cfg_err("--k needs --m for this suite"))?;
                    if suite == Suite::Feas {
                        verify_feas(&[(k, m)], &budget)
                    } else {
                        verify_coloring(&[(k, m)], 100, args.seed, &budget)
                    }
                    .map_err(|e| cfg_err(e.to_string()))?
                }
                Suite::Stability => verify_stability(10_000, k.max(2), m.unwrap_or(3), args.seed),
                Suite::Consistency => verify_consistency(10_000, k.max(2), m.unwrap_or(3), args.seed),
                Suite::CutLemma => verify_cut_lemma(10_000, k.max(2), args.seed)?,
            }
        }
    };
    let _ = writeln!(out, "{}", serde_json::to_string(&report).expect("report serializes"));
    Ok(if report.passed() { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let env_out = std::env::var(OUT_ENV).ok();
    let env_out = env_out.as_deref();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out, env_out),
        Command::Sweep(a) => cmd_sweep(a, out, env_out),
        Command::Slice(a) => cmd_slice(a, out, env_out),
        Command::Enumerate(a) => cmd_enumerate(a, out),
        Command::Verify(a) => cmd_verify(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}
