//! Per-player decision rules for the full-feedback and bandit games, the
//! shared-randomness beacon, and the exploration / tolerance schedules.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::armset::Arm;
use crate::cell::{assign_unchecked, Thresholds};
use crate::coloring::{color_of, ArmOrder};
use crate::dop::Dop;
use crate::error::{invalid, Error, Result};

/// Feedback model of the game.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Every player sees its own independent reward draw on every arm.
    Full,
    /// Each player sees only the reward of the arm it pulled.
    Bandit,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "full" => Ok(Mode::Full),
            "bandit" => Ok(Mode::Bandit),
            other => Err(Error::Config(format!("mode must be `full` or `bandit`, got `{other}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::Bandit => "bandit",
        })
    }
}

/// Horizon plus the multipliers applied to the tolerance and exploration
/// constants. Scales of 1 reproduce the asymptotic constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub horizon: u64,
    pub eps_scale: f64,
    pub t0_scale: f64,
}

impl Schedule {
    pub fn new(horizon: u64, eps_scale: f64, t0_scale: f64) -> Result<Schedule> {
        if horizon == 0 {
            return Err(invalid("horizon T must be >= 1"));
        }
        if !(eps_scale > 0.0 && eps_scale.is_finite()) {
            return Err(invalid(format!("eps_scale = {eps_scale} must be positive")));
        }
        if !(t0_scale >= 0.0 && t0_scale.is_finite()) {
            return Err(invalid(format!("t0_scale = {t0_scale} must be non-negative")));
        }
        Ok(Schedule {
            horizon,
            eps_scale,
            t0_scale,
        })
    }

    pub fn unscaled(horizon: u64) -> Result<Schedule> {
        Schedule::new(horizon, 1.0, 1.0)
    }
}

/// Full-feedback tolerance `s * 10 * sqrt(ln(m K T) / t)`.
pub fn eps_full(t: u64, m: usize, arm_count: usize, sched: &Schedule) -> f64 {
    let log = ((m * arm_count) as f64 * sched.horizon as f64).ln();
    sched.eps_scale * 10.0 * log.sqrt() / (t as f64).sqrt()
}

/// Bandit tolerance `s * 10000 * sqrt(K^3 ln(K T) / t)`.
pub fn eps_bandit(t: u64, arm_count: usize, sched: &Schedule) -> f64 {
    let k = arm_count as f64;
    let log = (k * sched.horizon as f64).ln();
    sched.eps_scale * 10_000.0 * (k * k * k * log).sqrt() / (t as f64).sqrt()
}

/// Length of the round-robin exploration phase, `ceil(s0 * 1e9 * K ln(K T))`.
pub fn t0(arm_count: usize, sched: &Schedule) -> u64 {
    let k = arm_count as f64;
    let raw = sched.t0_scale * 1e9 * k * (k * sched.horizon as f64).ln();
    if raw <= 0.0 {
        0
    } else {
        raw.ceil() as u64
    }
}

/// Round-robin arm of `player` at round `t`: `((X + t - 1) mod K) + 1`.
pub fn explore_arm(player: usize, t: u64, arm_count: usize) -> Arm {
    ((player as u64 + t - 1) % arm_count as u64) as usize + 1
}

/// FNV-1a, used only to name RNG substreams.
fn stream_id(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Independent generator for the substream `name` of `master_seed`.
pub fn substream(master_seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id(name));
    rng
}

pub const STREAM_ENV: &str = "env";
pub const STREAM_THRESHOLDS: &str = "beacon-c";
pub const STREAM_PERMUTATIONS: &str = "beacon-perm";

/// Public randomness every player reads identically: the thresholds `C(h)`
/// and one uniformly random arm order per round.
#[derive(Clone, Debug, PartialEq)]
pub struct SharedBeacon {
    master_seed: u64,
    thresholds: Thresholds,
    perm_key: [u8; 32],
}

impl SharedBeacon {
    pub fn new(master_seed: u64, arm_count: usize) -> Result<SharedBeacon> {
        SharedBeacon::with_threshold_stream(master_seed, arm_count, STREAM_THRESHOLDS)
    }

    /// Draws the thresholds from a differently named substream. Used to give
    /// players private thresholds when checking that the diagnostics notice.
    pub fn with_threshold_stream(master_seed: u64, arm_count: usize, name: &str) -> Result<SharedBeacon> {
        if arm_count == 0 {
            return Err(invalid("K must be >= 1"));
        }
        let mut rng = substream(master_seed, name);
        let hi = 1.0 / arm_count as f64;
        let values = (0..arm_count).map(|_| rng.gen::<f64>() * hi).collect();
        let mut perm_key = [0u8; 32];
        substream(master_seed, STREAM_PERMUTATIONS).fill_bytes(&mut perm_key);
        Ok(SharedBeacon {
            master_seed,
            thresholds: Thresholds::new(values)?,
            perm_key,
        })
    }

    pub fn from_parts(master_seed: u64, thresholds: Thresholds) -> SharedBeacon {
        let mut perm_key = [0u8; 32];
        substream(master_seed, STREAM_PERMUTATIONS).fill_bytes(&mut perm_key);
        SharedBeacon {
            master_seed,
            thresholds,
            perm_key,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn arm_count(&self) -> usize {
        self.thresholds.arm_count()
    }

    /// The order `pi_t`; any round can be regenerated on its own.
    pub fn order_at(&self, t: u64) -> ArmOrder {
        let mut rng = ChaCha8Rng::from_seed(self.perm_key);
        rng.set_stream(t);
        let mut arms: Vec<Arm> = (1..=self.arm_count()).collect();
        arms.shuffle(&mut rng);
        ArmOrder::from_sequence(&arms).expect("shuffle of 1..=K")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Explore,
    Partition,
}

/// What one player observes after a round.
#[derive(Clone, Debug, PartialEq)]
pub enum Feedback {
    /// One reward per arm (full-feedback game).
    Full(Vec<f64>),
    /// The pulled arm and its reward (bandit game).
    Bandit { arm: Arm, reward: f64 },
}

/// The action chosen in one round, with the partition node that produced it
/// (none during exploration).
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub arm: Arm,
    pub node: Option<Dop>,
}

/// One player's private statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct PlayerState {
    player: usize,
    team_size: usize,
    counts: Vec<u64>,
    reward_sums: Vec<u64>,
    phase: Phase,
}

/// Estimate used for an arm that has never been observed.
pub const PRIOR_ESTIMATE: f64 = 0.5;

impl PlayerState {
    pub fn new(player: usize, team_size: usize, arm_count: usize) -> Result<PlayerState> {
        if team_size == 0 || team_size > arm_count {
            return Err(invalid(format!("m = {team_size} must satisfy 1 <= m <= K = {arm_count}")));
        }
        if player == 0 || player > team_size {
            return Err(invalid(format!("player id {player} must be in 1..={team_size}")));
        }
        Ok(PlayerState {
            player,
            team_size,
            counts: vec![0; arm_count],
            reward_sums: vec![0; arm_count],
            phase: Phase::Explore,
        })
    }

    pub fn player(&self) -> usize {
        self.player
    }

    pub fn arm_count(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn reward_sums(&self) -> &[u64] {
        &self.reward_sums
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Empirical means, with [`PRIOR_ESTIMATE`] for unobserved arms.
    pub fn estimates(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(&self.reward_sums)
            .map(|(&n, &r)| if n == 0 { PRIOR_ESTIMATE } else { r as f64 / n as f64 })
            .collect()
    }

    /// Full-feedback rule: locate the estimate in the partition and play this
    /// player's slot of the identity-order color.
    pub fn act_full(&mut self, t: u64, beacon: &SharedBeacon, sched: &Schedule) -> Decision {
        self.phase = Phase::Partition;
        let k = self.arm_count();
        let eps = eps_full(t, self.team_size, k, sched);
        let node = assign_unchecked(&self.estimates(), eps, self.team_size, beacon.thresholds());
        let color = color_of(&node, self.team_size, &ArmOrder::identity(k)).expect("node valid for K, m");
        Decision {
            arm: color.arm_for(self.player),
            node: Some(node),
        }
    }

    /// Bandit rule: round-robin for the first `T0` rounds, then the partition
    /// with the round's shared arm order relabelling the coloring.
    pub fn act_bandit(&mut self, t: u64, beacon: &SharedBeacon, sched: &Schedule) -> Decision {
        let k = self.arm_count();
        if t <= t0(k, sched) {
            self.phase = Phase::Explore;
            return Decision {
                arm: explore_arm(self.player, t, k),
                node: None,
            };
        }
        self.phase = Phase::Partition;
        let eps = eps_bandit(t, k, sched);
        let node = assign_unchecked(&self.estimates(), eps, self.team_size, beacon.thresholds());
        let color = color_of(&node, self.team_size, &beacon.order_at(t)).expect("node valid for K, m");
        Decision {
            arm: color.arm_for(self.player),
            node: Some(node),
        }
    }

    pub fn act(&mut self, mode: Mode, t: u64, beacon: &SharedBeacon, sched: &Schedule) -> Decision {
        match mode {
            Mode::Full => self.act_full(t, beacon, sched),
            Mode::Bandit => self.act_bandit(t, beacon, sched),
        }
    }

    pub fn observe(&mut self, feedback: &Feedback) -> Result<()> {
        fn bit(r: f64) -> Result<u64> {
            if r == 0.0 {
                Ok(0)
            } else if r == 1.0 {
                Ok(1)
            } else {
                Err(Error::InvalidFeedback(format!("reward {r} is not 0 or 1")))
            }
        }
        match feedback {
            Feedback::Full(rewards) => {
                if rewards.len() != self.arm_count() {
                    return Err(Error::InvalidFeedback(format!(
                        "expected {} rewards, got {}",
                        self.arm_count(),
                        rewards.len()
                    )));
                }
                let bits = rewards.iter().map(|&r| bit(r)).collect::<Result<Vec<_>>>()?;
                for (i, b) in bits.into_iter().enumerate() {
                    self.counts[i] += 1;
                    self.reward_sums[i] += b;
                }
            }
            Feedback::Bandit { arm, reward } => {
                if *arm == 0 || *arm > self.arm_count() {
                    return Err(Error::InvalidFeedback(format!("arm {arm} out of range")));
                }
                let b = bit(*reward)?;
                self.counts[arm - 1] += 1;
                self.reward_sums[arm - 1] += b;
            }
        }
        Ok(())
    }
}
