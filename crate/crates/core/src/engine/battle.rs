//! Loading, scheduling, termination and scoring.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
pub(crate) use rand_chacha::ChaCha8Rng;

use crate::isa::{AssembledImage, MAX_IMAGE_LEN};

use super::arena::{Arena, Owner};
use super::cpu::{self, Cpu, DecodeCache, Machine, STACK_SIZE};
use super::events::{DeathCause, Event, EventLog};

pub const DEFAULT_MAX_ROUNDS: u32 = 200_000;
pub const MAX_PLAYERS: usize = 8;
/// Minimum distance between loaded images and from either end of the arena.
pub const MIN_GAP: usize = 1024;
pub const PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlayerSpec {
    pub name: String,
    /// One or two part images.
    pub parts: Vec<AssembledImage>,
}

impl PlayerSpec {
    pub fn new(name: impl Into<String>, parts: Vec<AssembledImage>) -> PlayerSpec {
        PlayerSpec {
            name: name.into(),
            parts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BattleError {
    #[error("no free arena space for a part after {PLACEMENT_ATTEMPTS} attempts")]
    PlacementFailure,
    #[error("a battle needs 1 to {MAX_PLAYERS} players, got {0}")]
    PlayerCount(usize),
    #[error("player {0} must have one or two parts")]
    PartCount(usize),
    #[error("part image of {0} bytes exceeds the {MAX_IMAGE_LEN}-byte limit")]
    ImageTooLarge(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BattleConfig {
    pub max_rounds: u32,
    pub record_events: bool,
    /// Skip to the round limit once the whole machine provably cycles.
    pub fast_forward: bool,
}

impl Default for BattleConfig {
    fn default() -> Self {
        BattleConfig {
            max_rounds: DEFAULT_MAX_ROUNDS,
            record_events: false,
            fast_forward: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PartState {
    pub cpu: Cpu,
    pub player: usize,
    pub part: usize,
    pub load_offset: u16,
    pub len: u16,
    pub alive: bool,
    pub death_round: Option<u32>,
    pub death_cause: Option<DeathCause>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundEvents {
    pub round: u32,
    /// (player, part, cause) of every part that died this round.
    pub deaths: Vec<(usize, usize, DeathCause)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartResult {
    pub reached_round: u32,
    pub written_bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BattleResult {
    pub scores: Vec<f64>,
    pub reached_round: Vec<u32>,
    pub written_bytes: Vec<u64>,
    /// Indexed by `[player][part]`.
    pub parts: Vec<Vec<PartResult>>,
    pub rounds_run: u32,
}

pub struct Battle {
    config: BattleConfig,
    arena: Arena,
    stacks: Vec<Box<[u8; STACK_SIZE]>>,
    parts: Vec<PartState>,
    order: Vec<usize>,
    cache: DecodeCache,
    log: Option<EventLog>,
    players: usize,
    round: u32,
    finished: bool,
    // Cycle detection: machine state at the last checkpoint and how many
    // quiet rounds have passed since.
    snapshot: Vec<(Cpu, bool)>,
    quiet: u64,
    horizon: u64,
    fast_forwarded: bool,
}

fn overlaps_with_gap(a: (usize, usize), b: (usize, usize)) -> bool {
    let (a0, a1) = a;
    let (b0, b1) = b;
    !(b0 >= a1 + MIN_GAP || a0 >= b1 + MIN_GAP)
}

/// Rejection-samples load offsets. Every image lies in
/// `[MIN_GAP, 65535 - MIN_GAP]` and images keep `MIN_GAP` bytes between each
/// other.
pub(crate) fn place(lens: &[usize], rng: &mut ChaCha8Rng) -> Result<Vec<u16>, BattleError> {
    let mut placed: Vec<(usize, usize)> = Vec::new();
    for &len in lens {
        let hi = 65535 - MIN_GAP - len;
        let mut ok = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let start = rng.gen_range(MIN_GAP..=hi);
            let span = (start, start + len);
            if placed.iter().all(|&p| !overlaps_with_gap(p, span)) {
                ok = Some(span);
                break;
            }
        }
        placed.push(ok.ok_or(BattleError::PlacementFailure)?);
    }
    Ok(placed.iter().map(|p| p.0 as u16).collect())
}

impl Battle {
    pub fn new(players: &[PlayerSpec], seed: u64, config: BattleConfig) -> Result<Battle, BattleError> {
        if players.is_empty() || players.len() > MAX_PLAYERS {
            return Err(BattleError::PlayerCount(players.len()));
        }
        let mut lens = Vec::new();
        for (p, spec) in players.iter().enumerate() {
            if spec.parts.is_empty() || spec.parts.len() > 2 {
                return Err(BattleError::PartCount(p));
            }
            for img in &spec.parts {
                if img.len() > MAX_IMAGE_LEN {
                    return Err(BattleError::ImageTooLarge(img.len()));
                }
                lens.push(img.len());
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let offsets = place(&lens, &mut rng)?;

        let mut arena = Arena::new();
        let mut log = config.record_events.then(EventLog::default);
        let mut parts = Vec::new();
        let mut k = 0;
        for (p, spec) in players.iter().enumerate() {
            for (q, img) in spec.parts.iter().enumerate() {
                let off = offsets[k];
                k += 1;
                for (i, b) in img.bytes.iter().enumerate() {
                    arena.load(off.wrapping_add(i as u16), *b, Owner::part(p, q));
                }
                if let Some(log) = log.as_mut() {
                    log.push(Event::Load {
                        player: p,
                        part: q,
                        offset: off,
                        len: img.len() as u16,
                    });
                }
                parts.push(PartState {
                    cpu: Cpu::new(p, off.wrapping_add(img.start_offset)),
                    player: p,
                    part: q,
                    load_offset: off,
                    len: img.len() as u16,
                    alive: true,
                    death_round: None,
                    death_cause: None,
                });
            }
        }
        let mut order: Vec<usize> = (0..parts.len()).collect();
        order.shuffle(&mut rng);
        let snapshot = parts.iter().map(|p| (p.cpu, p.alive)).collect();
        Ok(Battle {
            config,
            arena,
            stacks: (0..players.len()).map(|_| Box::new([0u8; STACK_SIZE])).collect(),
            parts,
            order,
            cache: DecodeCache::new(),
            log,
            players: players.len(),
            round: 0,
            finished: false,
            snapshot,
            quiet: 0,
            horizon: 1,
            fast_forwarded: false,
        })
    }

    pub fn arena(&self) -> &Arena {
        &self.arena
    }

    pub fn parts(&self) -> &[PartState] {
        &self.parts
    }

    /// Indices into `parts()` in execution order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn fast_forwarded(&self) -> bool {
        self.fast_forwarded
    }

    pub fn event_log(&self) -> Option<&EventLog> {
        self.log.as_ref()
    }

    pub fn alive_players(&self) -> Vec<usize> {
        let mut alive: Vec<usize> = self.parts.iter().filter(|p| p.alive).map(|p| p.player).collect();
        alive.dedup();
        alive
    }

    /// Runs one round: every alive part executes `speed` instructions.
    pub fn step_round(&mut self) -> RoundEvents {
        assert!(!self.finished, "battle already finished");
        self.round += 1;
        let mut events = RoundEvents {
            round: self.round,
            deaths: Vec::new(),
        };
        let mut changed = false;
        for &idx in &self.order {
            let part = &mut self.parts[idx];
            if !part.alive {
                continue;
            }
            let mut mach = Machine {
                arena: &mut self.arena,
                stack: &mut self.stacks[part.player],
                cache: &mut self.cache,
                log: self.log.as_mut(),
                player: part.player,
                part: part.part,
                round: self.round,
                changed: false,
            };
            let mut budget = part.cpu.speed;
            while budget > 0 {
                budget -= 1;
                if let Err(cause) = cpu::step(&mut part.cpu, &mut mach) {
                    part.alive = false;
                    part.death_round = Some(self.round);
                    part.death_cause = Some(cause);
                    events.deaths.push((part.player, part.part, cause));
                    if let Some(log) = mach.log.as_deref_mut() {
                        log.push(Event::Death {
                            round: self.round,
                            player: part.player,
                            part: part.part,
                            cause,
                        });
                    }
                    break;
                }
            }
            changed |= mach.changed;
        }
        if !events.deaths.is_empty() {
            changed = true;
        }

        let alive = self.alive_players().len();
        if alive == 0 || (self.players >= 2 && alive == 1) || self.round >= self.config.max_rounds {
            self.finished = true;
        } else if self.config.fast_forward && self.detect_cycle(changed) {
            self.round = self.config.max_rounds;
            self.finished = true;
            self.fast_forwarded = true;
        }
        events
    }

    /// Brent-style cycle check over the CPU states. Between memory changes
    /// the arena and stacks are constant, so a repeated CPU state means the
    /// battle repeats forever with nobody dying or writing anything new.
    fn detect_cycle(&mut self, changed: bool) -> bool {
        let same = !changed
            && self
                .parts
                .iter()
                .zip(&self.snapshot)
                .all(|(p, s)| p.alive == s.1 && (!p.alive || p.cpu == s.0));
        if same {
            return true;
        }
        if changed {
            self.quiet = 0;
            self.horizon = 1;
        } else {
            self.quiet += 1;
            if self.quiet < self.horizon {
                return false;
            }
            self.quiet = 0;
            self.horizon *= 2;
        }
        for (s, p) in self.snapshot.iter_mut().zip(&self.parts) {
            *s = (p.cpu, p.alive);
        }
        false
    }

    pub fn run(&mut self) -> BattleResult {
        while !self.finished {
            self.step_round();
        }
        self.result()
    }

    /// Scores and metrics; meaningful once the battle is finished.
    pub fn result(&self) -> BattleResult {
        let n = self.players;
        let max = self.config.max_rounds;
        let mut scores = vec![0.0; n];
        let alive = self.alive_players();
        let winners: Vec<usize> = if !alive.is_empty() {
            alive
        } else {
            // Simultaneous extinction: everyone whose last part died in the
            // final round shares the point.
            let mut last: Vec<usize> = self
                .parts
                .iter()
                .filter(|p| p.death_round == Some(self.round))
                .map(|p| p.player)
                .collect();
            last.dedup();
            last
        };
        for &w in &winners {
            scores[w] = 1.0 / winners.len() as f64;
        }
        let mut parts: Vec<Vec<PartResult>> = vec![Vec::new(); n];
        for p in &self.parts {
            parts[p.player].push(PartResult {
                reached_round: if p.alive { max } else { p.death_round.unwrap_or(0) },
                written_bytes: self.arena.written(Owner::part(p.player, p.part)),
            });
        }
        let reached_round = parts
            .iter()
            .map(|ps| ps.iter().map(|r| r.reached_round).max().unwrap_or(0))
            .collect();
        let written_bytes = parts.iter().map(|ps| ps.iter().map(|r| r.written_bytes).sum()).collect();
        BattleResult {
            scores,
            reached_round,
            written_bytes,
            parts,
            rounds_run: self.round,
        }
    }
}

/// Creates and runs a battle in one call.
pub fn run_battle(players: &[PlayerSpec], seed: u64, config: BattleConfig) -> Result<BattleResult, BattleError> {
    Ok(Battle::new(players, seed, config)?.run())
}
