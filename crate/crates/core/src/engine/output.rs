//! Battle log CSV and arena snapshots.

use std::fmt::Write as _;

use super::arena::Arena;
use super::battle::BattleResult;

pub const BATTLE_LOG_HEADER: &str = "battle_id,player,part,score,reached_round,written_bytes";

/// One row per part: `battle_id,player,part,score,reached_round,written_bytes`.
/// Score is the player's; the round and byte columns are the part's own.
pub fn battle_log_rows(battle_id: usize, result: &BattleResult) -> String {
    let mut out = String::new();
    for (p, parts) in result.parts.iter().enumerate() {
        for (q, r) in parts.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                battle_id,
                p,
                q + 1,
                result.scores[p],
                r.reached_round,
                r.written_bytes
            );
        }
    }
    out
}

/// Base colors by player index; a second part is drawn at 60% brightness.
pub const PALETTE: [[u8; 3]; 8] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
];

pub fn owner_color(player: usize, part: usize) -> [u8; 3] {
    let c = PALETTE[player % PALETTE.len()];
    if part == 0 {
        c
    } else {
        c.map(|v| (v as u32 * 60 / 100) as u8)
    }
}

/// Binary PPM (P6), 256x256, one pixel per arena byte coloured by owner.
pub fn arena_ppm(arena: &Arena) -> Vec<u8> {
    let mut out = b"P6\n256 256\n255\n".to_vec();
    out.reserve(65536 * 3);
    for o in arena.owners() {
        match (o.player(), o.part_index()) {
            (Some(p), Some(q)) => out.extend_from_slice(&owner_color(p, q)),
            _ => out.extend_from_slice(&[0, 0, 0]),
        }
    }
    out
}
