//! Deterministic battle machine: a shared 64KB arena, round-robin parts,
//! disqualification, scoring and write-ownership metrics.

mod arena;
mod battle;
mod cpu;
mod events;
mod output;

pub use arena::{Arena, Owner, WriteEffect, ARENA_SIZE};
pub use battle::{
    run_battle, Battle, BattleConfig, BattleError, BattleResult, PartResult, PartState, PlayerSpec, RoundEvents,
    DEFAULT_MAX_ROUNDS, MAX_PLAYERS, MIN_GAP, PLACEMENT_ATTEMPTS,
};
pub use cpu::{flag, int87_search, stack_selector, Cpu, ARENA_SELECTOR, MAX_SPEED, STACK_SIZE};
pub use events::{DeathCause, Event, EventLog, EventLogError, EVENT_LOG_HEADER};
pub use output::{arena_ppm, battle_log_rows, owner_color, BATTLE_LOG_HEADER, PALETTE};
