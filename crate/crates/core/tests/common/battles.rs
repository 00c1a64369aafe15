//! Engine checks shared by the engine tests and the acceptance suite.

use cgforge::engine::{arena_ppm, battle_log_rows, Battle, BattleConfig, BattleError, PlayerSpec};
use cgforge::grammar::default_grammar;
use cgforge::isa::{assemble, AssembledImage, Register};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub fn grown_part(rng: &mut ChaCha8Rng) -> AssembledImage {
    let g = default_grammar(rng.gen_bool(0.3));
    loop {
        let depth = rng.gen_range(4..11);
        if let Ok(img) = assemble(&g.render(&g.grow(rng, depth).unwrap())) {
            return img;
        }
    }
}

pub fn grown_player(rng: &mut ChaCha8Rng, name: &str) -> PlayerSpec {
    let parts = (0..rng.gen_range(1..=2)).map(|_| grown_part(rng)).collect();
    PlayerSpec::new(name, parts)
}

pub fn config(max_rounds: u32, fast_forward: bool) -> BattleConfig {
    BattleConfig {
        max_rounds,
        record_events: false,
        fast_forward,
    }
}

/// CSV rows and final arenas of `games` battles, run on a pool of `threads`.
pub fn tournament(players: &[PlayerSpec], games: usize, threads: usize) -> (String, Vec<Vec<u8>>) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let out: Vec<(String, Vec<u8>)> = pool.install(|| {
        (0..games)
            .into_par_iter()
            .map(|i| {
                let mut b = Battle::new(players, 1000 + i as u64, config(20_000, true)).unwrap();
                let r = b.run();
                (battle_log_rows(i, &r), arena_ppm(b.arena()))
            })
            .collect()
    });
    let csv = out.iter().map(|(c, _)| c.as_str()).collect();
    (csv, out.into_iter().map(|(_, a)| a).collect())
}

/// 100 battles of two grown players on 1 and 8 threads.
pub fn determinism_check() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let players = [grown_player(&mut rng, "a"), grown_player(&mut rng, "b")];
    let one = tournament(&players, 100, 1);
    let eight = tournament(&players, 100, 8);
    if one.0 != eight.0 {
        return Err("battle logs differ".into());
    }
    if one.1 != eight.1 {
        return Err("final arenas differ".into());
    }
    Ok(format!("100 battles, {} CSV bytes and 100 arenas identical", one.0.len()))
}

/// First match of `pattern` scanning from `from` in the given direction,
/// checked byte by byte with wrap-around.
pub fn brute_force_match(arena: &[u8], from: u16, backwards: bool, pattern: [u8; 4]) -> Option<u16> {
    (0..65536u32)
        .map(|k| {
            if backwards {
                from.wrapping_sub(k as u16)
            } else {
                from.wrapping_add(k as u16)
            }
        })
        .find(|&p| (0..4).all(|j| arena[p.wrapping_add(j) as usize] == pattern[j as usize]))
}

/// A part whose entry point spins in place, surrounded by random bytes
/// with a few planted copies of `pattern`.
fn data_part(rng: &mut ChaCha8Rng, pattern: [u8; 4]) -> AssembledImage {
    let mut bytes: Vec<u8> = (0..512).map(|_| rng.gen()).collect();
    for _ in 0..rng.gen_range(0..3) {
        let at = rng.gen_range(0..508);
        bytes[at..at + 4].copy_from_slice(&pattern);
    }
    let start = rng.gen_range(0..510);
    bytes[start..start + 2].copy_from_slice(&[0xEB, 0xFE]);
    let mut img = AssembledImage::from_bytes(bytes);
    img.start_offset = start as u16;
    img.symbols.insert("@start".into(), img.start_offset);
    img
}

/// Runs `int 0x87` in 1000 random arenas and compares memory and DI with
/// [`brute_force_match`].
pub fn int87_check() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(87);
    let (mut found, mut missing, mut backwards_runs) = (0, 0, 0);
    let mut arenas = 0;
    while arenas < 1000 {
        // Tiny alphabets make accidental matches across part boundaries
        // and in the hunter's own code likely too.
        let pattern: [u8; 4] = if rng.gen_bool(0.5) {
            std::array::from_fn(|_| rng.gen_range(0..2))
        } else {
            rng.gen()
        };
        let replacement: [u8; 4] = rng.gen();
        let from: u16 = rng.gen();
        let backwards = rng.gen_bool(0.5);
        let src = format!(
            "@start:\nmov ax, {}\nmov dx, {}\nmov bx, {}\nmov cx, {}\nmov di, {}\n{}\nint 0x87\nl1:\njmp l1\n@end:",
            u16::from_le_bytes([pattern[0], pattern[1]]),
            u16::from_le_bytes([pattern[2], pattern[3]]),
            u16::from_le_bytes([replacement[0], replacement[1]]),
            u16::from_le_bytes([replacement[2], replacement[3]]),
            from,
            if backwards { "std" } else { "cld" },
        );
        let mut players = vec![PlayerSpec::new("hunter", vec![assemble(&src).unwrap()])];
        for i in 0..rng.gen_range(1..6) {
            players.push(PlayerSpec::new(format!("d{}", i), vec![data_part(&mut rng, pattern)]));
        }
        let mut battle = match Battle::new(&players, rng.gen(), config(100, false)) {
            Ok(b) => b,
            Err(BattleError::PlacementFailure) => continue,
            Err(e) => return Err(e.to_string()),
        };
        arenas += 1;
        for _ in 0..6 {
            battle.step_round();
        }
        let before = battle.arena().bytes().to_vec();
        let hunter = battle.parts().iter().position(|p| p.player == 0).unwrap();
        if battle.parts()[hunter].cpu.reg(Register::Di) != from {
            return Err(format!("arena {}: DI not set up", arenas));
        }
        battle.step_round();

        let mut expected = before.clone();
        let hit = brute_force_match(&before, from, backwards, pattern);
        if let Some(at) = hit {
            for j in 0..4u16 {
                expected[at.wrapping_add(j) as usize] = replacement[j as usize];
            }
            found += 1;
        } else {
            missing += 1;
        }
        backwards_runs += backwards as usize;
        if battle.arena().bytes() != &expected[..] {
            return Err(format!("arena {}: memory differs from the scanner", arenas));
        }
        let di = battle.parts()[hunter].cpu.reg(Register::Di);
        if di != hit.unwrap_or(from) {
            return Err(format!("arena {}: DI {:#06x}, scanner {:?}", arenas, di, hit));
        }
    }
    if found <= 300 || missing <= 50 || backwards_runs <= 400 {
        return Err(format!("weak coverage: {found} matches, {missing} misses, {backwards_runs} backwards"));
    }
    Ok(format!("1000 arenas, {found} matches, {missing} misses, {backwards_runs} backwards"))
}

/// Sum of scores over 1000 random battles of 2 to 4 players.
pub fn conservation_check() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut battles = 0;
    let mut worst: f64 = 0.0;
    while battles < 1000 {
        let n = rng.gen_range(2..=4);
        let players: Vec<PlayerSpec> = (0..n).map(|i| grown_player(&mut rng, &i.to_string())).collect();
        let r = match Battle::new(&players, rng.gen(), config(rng.gen_range(1..5000), true)) {
            Ok(mut b) => b.run(),
            Err(BattleError::PlacementFailure) => continue,
            Err(e) => return Err(e.to_string()),
        };
        battles += 1;
        let total: f64 = r.scores.iter().sum();
        worst = worst.max((total - 1.0).abs());
        if (total - 1.0).abs() >= 1e-12 || !r.scores.iter().all(|s| (0.0..=1.0).contains(s)) {
            return Err(format!("battle {}: scores {:?}", battles, r.scores));
        }
    }
    Ok(format!("1000 battles, max |sum - 1| = {:.1e}", worst))
}
