//! Environment and round loop: Bernoulli rewards, `m` players acting behind
//! a round barrier, pseudo-regret and collision accounting, and the
//! diagnostics that check the no-collision mechanism from the inside.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::armset::{Arm, ArmSet};
use crate::dop::{is_adjacent, Dop};
use crate::error::{invalid, Error, Result};
use crate::players::{substream, t0, Decision, Feedback, Mode, PlayerState, Schedule, SharedBeacon, STREAM_ENV};

/// A bandit instance: mean rewards of `K` arms, `m` players, horizon `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub means: Vec<f64>,
    pub players: usize,
    pub horizon: u64,
}

impl Instance {
    pub fn new(means: Vec<f64>, players: usize, horizon: u64) -> Result<Instance> {
        if means.is_empty() {
            return Err(Error::Config("p must have at least one arm".into()));
        }
        if let Some(bad) = means.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Config(format!("mean reward {bad} outside [0, 1]")));
        }
        if players == 0 || players > means.len() {
            return Err(Error::Config(format!(
                "m = {players} must satisfy 1 <= m <= K = {}",
                means.len()
            )));
        }
        if horizon == 0 {
            return Err(Error::Config("T must be >= 1".into()));
        }
        Ok(Instance {
            means,
            players,
            horizon,
        })
    }

    pub fn arm_count(&self) -> usize {
        self.means.len()
    }
}

/// Named generators for mean-reward vectors.
#[derive(Clone, Debug, PartialEq)]
pub enum MeanProfile {
    Explicit(Vec<f64>),
    /// `p(i) = i / (K + 1)`.
    UniformSpread,
    /// The last `m` arms at `0.5 + gap/2`, the others at `0.5 - gap/2`.
    TwoGroup { gap: f64 },
}

impl MeanProfile {
    /// Accepts `uniform-spread`, `two-group gap=0.2` (also `two-group:0.2`
    /// and `two-group:gap=0.2`) or a comma-separated list of means.
    pub fn parse(text: &str) -> Result<MeanProfile> {
        let text = text.trim();
        if text == "uniform-spread" {
            return Ok(MeanProfile::UniformSpread);
        }
        if let Some(rest) = text.strip_prefix("two-group") {
            let arg = rest.trim_start_matches([':', ' ']).trim();
            let arg = arg.strip_prefix("gap=").unwrap_or(arg);
            let gap: f64 = arg
                .parse()
                .map_err(|_| Error::Config(format!("two-group needs gap=<number>, got `{text}`")))?;
            if !(0.0..=1.0).contains(&gap) {
                return Err(Error::Config(format!("two-group gap {gap} outside [0, 1]")));
            }
            return Ok(MeanProfile::TwoGroup { gap });
        }
        let means = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Config(format!("p must be a generator name or a list of numbers, got `{text}`")))?;
        Ok(MeanProfile::Explicit(means))
    }

    pub fn resolve(&self, arm_count: usize, players: usize) -> Result<Vec<f64>> {
        match self {
            MeanProfile::Explicit(v) => {
                if v.len() != arm_count {
                    return Err(Error::Config(format!("p has {} entries but K = {arm_count}", v.len())));
                }
                Ok(v.clone())
            }
            MeanProfile::UniformSpread => Ok((1..=arm_count).map(|i| i as f64 / (arm_count + 1) as f64).collect()),
            MeanProfile::TwoGroup { gap } => {
                if players > arm_count {
                    return Err(Error::Config(format!("m = {players} exceeds K = {arm_count}")));
                }
                Ok((1..=arm_count)
                    .map(|i| if i > arm_count - players { 0.5 + gap / 2.0 } else { 0.5 - gap / 2.0 })
                    .collect())
            }
        }
    }
}

impl std::fmt::Display for MeanProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeanProfile::Explicit(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                f.write_str(&parts.join(","))
            }
            MeanProfile::UniformSpread => f.write_str("uniform-spread"),
            MeanProfile::TwoGroup { gap } => write!(f, "two-group gap={gap}"),
        }
    }
}

/// Sum of the `m` largest means.
pub fn top_m_value(means: &[f64], m: usize) -> f64 {
    let mut sorted = means.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.iter().take(m).sum()
}

/// Instantaneous pseudo-regret of one round. Duplicate arms are summed as
/// played, so a colliding round can go negative.
pub fn pseudo_regret_step(means: &[f64], arms_played: &[Arm]) -> f64 {
    // Same summation order as the optimum, so optimal play gives exactly 0.
    let mut got: Vec<f64> = arms_played.iter().map(|&a| means[a - 1]).collect();
    got.sort_by(|a, b| b.total_cmp(a));
    top_m_value(means, arms_played.len()) - got.iter().sum::<f64>()
}

/// Whether players draw thresholds from the shared beacon or privately.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdSharing {
    #[default]
    Shared,
    /// Fault injection: every player gets its own threshold vector.
    PerPlayer,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Record node adjacency and sample-coverage diagnostics every round.
    pub log_nodes: bool,
    pub thresholds: ThresholdSharing,
}

/// Adjacency status of one round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Adjacency {
    /// Some player had no node (exploration) or logging was off.
    NotChecked,
    Ok,
    Violated,
}

/// Everything recorded for one run. Per-player columns are stored
/// round-major: entry `(t - 1) * m + (X - 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub instance: Instance,
    pub mode: Mode,
    pub schedule: Schedule,
    pub master_seed: u64,
    pub options: RunOptions,
    pub exploration_rounds: u64,
    pub arms: Vec<Arm>,
    /// Node depth per player; `-1` while exploring.
    pub depths: Vec<i16>,
    /// Number of colliding player pairs per round.
    pub collision_pairs: Vec<u32>,
    pub regret: Vec<f64>,
    /// Sum of rewards the players actually received.
    pub realized_reward: Vec<f64>,
    pub adjacency: Vec<Adjacency>,
    /// Per round, how many partition-mode players had some arm of
    /// `A(P) ∪ B(P)` pulled fewer than `floor(t / 2K)` times.
    pub coverage_shortfalls: Vec<u32>,
    /// Smallest `min n(i) / floor(t / 2K)` seen over logged rounds.
    pub worst_coverage_ratio: Option<f64>,
    pub first_leaf_round: Vec<Option<u64>>,
}

impl RunResult {
    pub fn horizon(&self) -> u64 {
        self.instance.horizon
    }

    pub fn players(&self) -> usize {
        self.instance.players
    }

    pub fn round_arms(&self, t: u64) -> &[Arm] {
        let m = self.players();
        let i = (t as usize - 1) * m;
        &self.arms[i..i + m]
    }

    pub fn round_depths(&self, t: u64) -> &[i16] {
        let m = self.players();
        let i = (t as usize - 1) * m;
        &self.depths[i..i + m]
    }

    pub fn cumulative_regret(&self) -> Vec<f64> {
        self.regret
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }

    pub fn total_regret(&self) -> f64 {
        self.regret.iter().sum()
    }

    /// Rounds containing at least one collision.
    pub fn collision_rounds(&self) -> u64 {
        self.collision_pairs.iter().filter(|&&c| c > 0).count() as u64
    }

    pub fn slope_fit(&self) -> SlopeFit {
        let (lo, hi) = default_fit_window(self.horizon());
        fit_loglog_slope(&self.cumulative_regret(), lo, hi)
    }
}

/// Runs one game. Each round every player acts, then the environment draws
/// rewards, then every player observes.
pub fn run_game(instance: &Instance, mode: Mode, sched: &Schedule, master_seed: u64, opts: RunOptions) -> Result<RunResult> {
    let inst = Instance::new(instance.means.clone(), instance.players, instance.horizon)?;
    if sched.horizon != inst.horizon {
        return Err(Error::Config(format!(
            "schedule horizon {} differs from instance horizon {}",
            sched.horizon, inst.horizon
        )));
    }
    let k = inst.arm_count();
    let m = inst.players;
    let horizon = inst.horizon;

    let shared = SharedBeacon::new(master_seed, k)?;
    let beacons: Vec<SharedBeacon> = match opts.thresholds {
        ThresholdSharing::Shared => vec![shared; m],
        ThresholdSharing::PerPlayer => (1..=m)
            .map(|x| SharedBeacon::with_threshold_stream(master_seed, k, &format!("beacon-c/player-{x}")))
            .collect::<Result<_>>()?,
    };
    let mut players: Vec<PlayerState> = (1..=m).map(|x| PlayerState::new(x, m, k)).collect::<Result<_>>()?;
    let mut env = substream(master_seed, STREAM_ENV);
    let explore = match mode {
        Mode::Full => 0,
        Mode::Bandit => t0(k, sched),
    };

    let n = horizon as usize;
    let mut out = RunResult {
        instance: inst.clone(),
        mode,
        schedule: *sched,
        master_seed,
        options: opts,
        exploration_rounds: explore.min(horizon),
        arms: Vec::with_capacity(n * m),
        depths: Vec::with_capacity(n * m),
        collision_pairs: Vec::with_capacity(n),
        regret: Vec::with_capacity(n),
        realized_reward: Vec::with_capacity(n),
        adjacency: Vec::with_capacity(if opts.log_nodes { n } else { 0 }),
        coverage_shortfalls: Vec::with_capacity(if opts.log_nodes { n } else { 0 }),
        worst_coverage_ratio: None,
        first_leaf_round: vec![None; m],
    };

    let mut rewards = vec![0.0; k];
    let mut decisions: Vec<Decision> = Vec::with_capacity(m);
    for t in 1..=horizon {
        decisions.clear();
        for (player, beacon) in players.iter_mut().zip(&beacons) {
            decisions.push(player.act(mode, t, beacon, sched));
        }

        let mut pairs = 0u32;
        for i in 0..m {
            for j in i + 1..m {
                if decisions[i].arm == decisions[j].arm {
                    pairs += 1;
                }
            }
        }
        let arms: Vec<Arm> = decisions.iter().map(|d| d.arm).collect();
        for (x, d) in decisions.iter().enumerate() {
            out.arms.push(d.arm);
            out.depths.push(d.node.as_ref().map_or(-1, |n| n.depth() as i16));
            if out.first_leaf_round[x].is_none() && d.node.as_ref().is_some_and(|n| n.decided_unchecked(m).is_leaf) {
                out.first_leaf_round[x] = Some(t);
            }
        }
        out.collision_pairs.push(pairs);
        out.regret.push(pseudo_regret_step(&inst.means, &arms));

        if opts.log_nodes {
            let nodes: Option<Vec<&Dop>> = decisions.iter().map(|d| d.node.as_ref()).collect();
            out.adjacency.push(match nodes {
                None => Adjacency::NotChecked,
                Some(nodes) => {
                    let ok = (0..m).all(|i| (i + 1..m).all(|j| is_adjacent(nodes[i], nodes[j])));
                    if ok {
                        Adjacency::Ok
                    } else {
                        Adjacency::Violated
                    }
                }
            });
            let floor = t / (2 * k as u64);
            let mut short = 0u32;
            for (player, d) in players.iter().zip(&decisions) {
                let Some(node) = &d.node else { continue };
                let ds = node.decided_unchecked(m);
                let relevant = ds.a_set.union(ds.b_set);
                let least = relevant.iter().map(|a| player.counts()[a - 1]).min().unwrap_or(0);
                if least < floor {
                    short += 1;
                }
                if floor > 0 {
                    let ratio = least as f64 / floor as f64;
                    out.worst_coverage_ratio = Some(out.worst_coverage_ratio.map_or(ratio, |w: f64| w.min(ratio)));
                }
            }
            out.coverage_shortfalls.push(short);
        }

        match mode {
            Mode::Bandit => {
                for (i, r) in rewards.iter_mut().enumerate() {
                    *r = if env.gen::<f64>() < inst.means[i] { 1.0 } else { 0.0 };
                }
                out.realized_reward.push(arms.iter().map(|&a| rewards[a - 1]).sum());
                for (player, &arm) in players.iter_mut().zip(&arms) {
                    player.observe(&Feedback::Bandit {
                        arm,
                        reward: rewards[arm - 1],
                    })?;
                }
            }
            Mode::Full => {
                let mut realized = 0.0;
                for (player, &arm) in players.iter_mut().zip(&arms) {
                    for (i, r) in rewards.iter_mut().enumerate() {
                        *r = if env.gen::<f64>() < inst.means[i] { 1.0 } else { 0.0 };
                    }
                    realized += rewards[arm - 1];
                    player.observe(&Feedback::Full(rewards.clone()))?;
                }
                out.realized_reward.push(realized);
            }
        }
    }
    Ok(out)
}

/// Runs one game per seed in parallel; results come back in seed order.
pub fn run_many(instance: &Instance, mode: Mode, sched: &Schedule, seeds: &[u64], opts: RunOptions) -> Result<Vec<RunResult>> {
    seeds
        .par_iter()
        .map(|&s| run_game(instance, mode, sched, s, opts))
        .collect()
}

/// Least-squares slope of `ln R(t)` against `ln t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub t_lo: u64,
    pub t_hi: u64,
    /// `None` when fewer than two sample points have positive regret.
    pub slope: Option<f64>,
}

/// `[max(1, T / 100), T]`.
pub fn default_fit_window(horizon: u64) -> (u64, u64) {
    ((horizon / 100).max(1), horizon)
}

const FIT_POINTS: usize = 64;

/// Fits on up to 64 log-spaced rounds of `cumulative` (index `t - 1`),
/// skipping rounds with non-positive regret.
pub fn fit_loglog_slope(cumulative: &[f64], t_lo: u64, t_hi: u64) -> SlopeFit {
    let t_hi = t_hi.min(cumulative.len() as u64);
    let mut ts: Vec<u64> = Vec::new();
    if t_lo >= 1 && t_hi > t_lo {
        let ratio = t_hi as f64 / t_lo as f64;
        for i in 0..FIT_POINTS {
            let t = (t_lo as f64 * ratio.powf(i as f64 / (FIT_POINTS - 1) as f64)).round() as u64;
            let t = t.clamp(t_lo, t_hi);
            if ts.last() != Some(&t) {
                ts.push(t);
            }
        }
    }
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .filter_map(|&t| {
            let r = cumulative[t as usize - 1];
            (r > 0.0).then(|| ((t as f64).ln(), r.ln()))
        })
        .collect();
    let slope = if pts.len() < 2 {
        None
    } else {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    };
    SlopeFit { t_lo, t_hi, slope }
}

/// Pointwise mean of the cumulative regret curves of several runs.
pub fn mean_cumulative_regret(runs: &[RunResult]) -> Vec<f64> {
    let Some(first) = runs.first() else { return Vec::new() };
    let mut acc = vec![0.0; first.regret.len()];
    for run in runs {
        for (a, r) in acc.iter_mut().zip(run.cumulative_regret()) {
            *a += r;
        }
    }
    let n = runs.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Diagnostics computed from a logged run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub adjacency_checked_rounds: u64,
    pub adjacency_violations: u64,
    pub first_adjacency_violation: Option<u64>,
    pub coverage_checked_rounds: u64,
    pub coverage_shortfalls: u64,
    pub worst_coverage_ratio: Option<f64>,
    pub collision_rounds: u64,
    pub collision_pairs: u64,
    pub first_collision_round: Option<u64>,
    pub exploration_collision_rounds: u64,
    /// Rounds in which each arm was pulled by two or more players.
    pub collisions_per_arm: Vec<u64>,
}

impl Diagnostics {
    pub fn is_clean(&self) -> bool {
        self.adjacency_violations == 0 && self.collision_rounds == 0
    }
}

pub fn diagnostics(run: &RunResult) -> Result<Diagnostics> {
    if !run.options.log_nodes {
        return Err(invalid("diagnostics need a run recorded with node logging"));
    }
    let k = run.instance.arm_count();
    let mut d = Diagnostics {
        adjacency_checked_rounds: 0,
        adjacency_violations: 0,
        first_adjacency_violation: None,
        coverage_checked_rounds: 0,
        coverage_shortfalls: 0,
        worst_coverage_ratio: run.worst_coverage_ratio,
        collision_rounds: 0,
        collision_pairs: 0,
        first_collision_round: None,
        exploration_collision_rounds: 0,
        collisions_per_arm: vec![0; k],
    };
    for t in 1..=run.horizon() {
        let i = t as usize - 1;
        match run.adjacency[i] {
            Adjacency::NotChecked => {}
            Adjacency::Ok => d.adjacency_checked_rounds += 1,
            Adjacency::Violated => {
                d.adjacency_checked_rounds += 1;
                d.adjacency_violations += 1;
                d.first_adjacency_violation.get_or_insert(t);
            }
        }
        if run.round_depths(t).iter().any(|&x| x >= 0) {
            d.coverage_checked_rounds += 1;
        }
        d.coverage_shortfalls += run.coverage_shortfalls[i] as u64;
        let pairs = run.collision_pairs[i];
        if pairs > 0 {
            d.collision_rounds += 1;
            d.collision_pairs += pairs as u64;
            d.first_collision_round.get_or_insert(t);
            if t <= run.exploration_rounds {
                d.exploration_collision_rounds += 1;
            }
            let arms = run.round_arms(t);
            let mut seen = ArmSet::EMPTY;
            let mut counted = ArmSet::EMPTY;
            for &a in arms {
                if seen.contains(a) && !counted.contains(a) {
                    d.collisions_per_arm[a - 1] += 1;
                    counted.insert(a);
                }
                seen.insert(a);
            }
        }
    }
    Ok(d)
}

/// Per-round CSV: `t,regret_cum,collisions_cum,depth_p1..,arm_p1..`.
pub fn run_csv(run: &RunResult) -> String {
    let m = run.players();
    let mut s = String::from("t,regret_cum,collisions_cum");
    for x in 1..=m {
        let _ = write!(s, ",depth_p{x}");
    }
    for x in 1..=m {
        let _ = write!(s, ",arm_p{x}");
    }
    s.push('\n');
    let mut cum = 0.0;
    let mut collisions = 0u64;
    for t in 1..=run.horizon() {
        let i = t as usize - 1;
        cum += run.regret[i];
        if run.collision_pairs[i] > 0 {
            collisions += 1;
        }
        let _ = write!(s, "{t},{cum:.6},{collisions}");
        for d in run.round_depths(t) {
            let _ = write!(s, ",{d}");
        }
        for a in run.round_arms(t) {
            let _ = write!(s, ",{a}");
        }
        s.push('\n');
    }
    s
}

/// Configuration echo inside a summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfigEcho {
    pub k: usize,
    pub m: usize,
    pub t: u64,
    pub p: Vec<f64>,
    pub mode: Mode,
    pub eps_scale: f64,
    pub t0_scale: f64,
    pub master_seed: u64,
    pub exploration_rounds: u64,
    pub thresholds: ThresholdSharing,
    pub threshold_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfigEcho,
    pub total_regret: f64,
    pub total_collisions: u64,
    pub total_collision_pairs: u64,
    pub realized_reward: f64,
    pub slope_fit: SlopeFit,
    pub first_leaf_round: Vec<Option<u64>>,
    pub diagnostics: Option<Diagnostics>,
}

pub fn summarize(run: &RunResult) -> RunSummary {
    let beacon = SharedBeacon::new(run.master_seed, run.instance.arm_count()).expect("validated K");
    RunSummary {
        config: RunConfigEcho {
            k: run.instance.arm_count(),
            m: run.players(),
            t: run.horizon(),
            p: run.instance.means.clone(),
            mode: run.mode,
            eps_scale: run.schedule.eps_scale,
            t0_scale: run.schedule.t0_scale,
            master_seed: run.master_seed,
            exploration_rounds: run.exploration_rounds,
            thresholds: run.options.thresholds,
            threshold_values: beacon.thresholds().values().to_vec(),
        },
        total_regret: run.total_regret(),
        total_collisions: run.collision_rounds(),
        total_collision_pairs: run.collision_pairs.iter().map(|&c| c as u64).sum(),
        realized_reward: run.realized_reward.iter().sum(),
        slope_fit: run.slope_fit(),
        first_leaf_round: run.first_leaf_round.clone(),
        diagnostics: diagnostics(run).ok(),
    }
}
