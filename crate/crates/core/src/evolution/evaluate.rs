use crate::engine::{run_battle, BattleConfig, BattleError, PlayerSpec};
use crate::isa::AssembledImage;

use super::Metrics;

/// SplitMix64 finalizer over `seed` combined with `i`.
pub fn battle_seed(seed: u64, i: u64) -> u64 {
    let mut z = seed ^ i.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The evolved player's side of one battle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GameRecord {
    pub score: f64,
    pub reached_round: u32,
    pub written_bytes: u64,
    pub part_reached: [u32; 2],
    pub part_written: [u64; 2],
    pub placement_failed: bool,
}

/// Plays `games` battles of `parts` (player 0) against `adversary`
/// (player 1), battle `i` seeded with `battle_seed(seed, i)`. A battle
/// that cannot be placed counts as a zero record.
pub fn play_games(
    parts: &[AssembledImage; 2],
    adversary: &[AssembledImage],
    games: usize,
    seed: u64,
    max_rounds: u32,
) -> Vec<GameRecord> {
    let players = [
        PlayerSpec::new("evolved", parts.to_vec()),
        PlayerSpec::new("adversary", adversary.to_vec()),
    ];
    let config = BattleConfig {
        max_rounds,
        record_events: false,
        fast_forward: true,
    };
    (0..games)
        .map(|i| match run_battle(&players, battle_seed(seed, i as u64), config) {
            Ok(r) => {
                let p = &r.parts[0];
                GameRecord {
                    score: r.scores[0],
                    reached_round: r.reached_round[0],
                    written_bytes: r.written_bytes[0],
                    part_reached: [p[0].reached_round, p[1].reached_round],
                    part_written: [p[0].written_bytes, p[1].written_bytes],
                    placement_failed: false,
                }
            }
            Err(BattleError::PlacementFailure) => GameRecord {
                placement_failed: true,
                ..GameRecord::default()
            },
            Err(e) => panic!("evaluation battle rejected: {e}"),
        })
        .collect()
}

pub fn evaluate(
    parts: &[AssembledImage; 2],
    adversary: &[AssembledImage],
    games: usize,
    seed: u64,
    max_rounds: u32,
) -> Metrics {
    Metrics::from_games(&play_games(parts, adversary, games, seed, max_rounds))
}
