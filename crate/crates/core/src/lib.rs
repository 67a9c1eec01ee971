//! Collision-free cooperative multi-player stochastic bandits.
//!
//! `m` players facing the same `K`-armed Bernoulli bandit never communicate.
//! They share only public randomness, and each maps its own reward estimates
//! to a node of a tree of doubly-ordered partitions. A stable partition
//! ensures nearby estimates land on adjacent nodes, and a collision-robust
//! coloring ensures adjacent nodes never send two players to the same arm.

pub mod armset;
pub mod cell;
pub mod cli;
pub mod coloring;
pub mod dop;
pub mod error;
pub mod oracle;
pub mod output;
pub mod players;
pub mod sim;
pub mod verify;

pub use armset::{Arm, ArmSet};
pub use cell::{assign_cell, CellQuery, Thresholds};
pub use coloring::{color_of, ArmOrder, ColorTuple};
pub use dop::{enumerate_tree, is_adjacent, DecidedSets, Dop};
pub use error::{Error, Result};
pub use players::{Mode, PlayerState, Schedule, SharedBeacon};
pub use sim::{run_game, Instance, RunOptions, RunResult};
