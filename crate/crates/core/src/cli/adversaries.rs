//! Built-in opponents for evolution runs.

use std::collections::HashMap;

use crate::engine::{Battle, BattleConfig, PlayerSpec};
use crate::isa::{assemble, AssembledImage};

/// A one-instruction self loop. Never writes, never dies.
pub fn imp() -> AssembledImage {
    assemble("@start:\nl1:\njmp l1\n@end:").expect("imp assembles")
}

/// Assembles `fill(len)` until `len` matches the length of the result.
fn assemble_sized(name: &str, fill: impl Fn(usize) -> String) -> AssembledImage {
    let mut len = 0;
    for _ in 0..8 {
        let img = assemble(&fill(len)).expect("built-in adversary assembles");
        if img.len() == len {
            return img;
        }
        len = img.len();
    }
    panic!("{name} size does not settle")
}

const BOMBER_BODY: &str = "call l1
l1:
pop di
add di, {skip}
mov ax, 0xcccc
mov cx, {count}
l2:
stosw
add di, 6
loop l2
l3:
jmp l3";

fn bomber_body(prefix: &str, prefix_len: usize, len: usize) -> String {
    // `di` starts just past the call; skip to the first byte after the
    // image, then bomb every eighth word until just short of wrapping.
    let skip = len.saturating_sub(prefix_len + 3);
    let count = 65536usize.saturating_sub(len) / 8;
    format!(
        "@start:\n{}{}\n@end:",
        prefix,
        BOMBER_BODY.replace("{skip}", &skip.to_string()).replace("{count}", &count.to_string())
    )
}

/// Covers the arena after itself with `int3` bytes, one word in every
/// eight, and then idles. It stops short of its own code.
pub fn bomber() -> AssembledImage {
    assemble_sized("bomber", |len| bomber_body("", 0, len))
}

/// Overwrites every arena copy of each 4-byte signature with `int3`
/// bytes, then bombs like [`bomber`].
pub fn signature_hunter(signatures: &[[u8; 4]]) -> AssembledImage {
    let mut prefix = String::from("mov bx, 0xcccc\nmov cx, 0xcccc\n");
    for s in signatures {
        let ax = u16::from_le_bytes([s[0], s[1]]);
        let dx = u16::from_le_bytes([s[2], s[3]]);
        prefix.push_str(&format!("mov ax, {}\nmov dx, {}\n", ax, dx));
        for _ in 0..2 {
            prefix.push_str("xor di, di\nint 0x87\n");
        }
    }
    let prefix_len = assemble(&format!("@start:\n{}@end:", prefix))
        .expect("hunter prologue assembles")
        .len();
    assemble_sized("signature hunter", |len| bomber_body(&prefix, prefix_len, len))
}

/// The four bytes at the instruction a program executes most often when
/// run alone, the natural signature for a hunter to target. `None` for
/// images shorter than four bytes.
pub fn hot_signature(image: &AssembledImage, rounds: u32) -> Option<[u8; 4]> {
    if image.len() < 4 {
        return None;
    }
    let config = BattleConfig {
        max_rounds: rounds,
        record_events: false,
        fast_forward: false,
    };
    let mut battle = Battle::new(&[PlayerSpec::new("solo", vec![image.clone()])], 0, config).ok()?;
    let mut visits: HashMap<usize, u32> = HashMap::new();
    while !battle.is_finished() {
        battle.step_round();
        let p = &battle.parts()[0];
        if !p.alive {
            break;
        }
        let off = p.cpu.ip.wrapping_sub(p.load_offset) as usize;
        if off < image.len() {
            *visits.entry(off).or_default() += 1;
        }
    }
    let hot = visits
        .into_iter()
        .max_by_key(|&(off, n)| (n, std::cmp::Reverse(off)))
        .map_or(image.start_offset as usize, |(off, _)| off);
    let at = hot.min(image.len() - 4);
    image.bytes[at..at + 4].try_into().ok()
}

/// Most signatures a hunter carries; each costs 14 bytes of prologue.
pub const MAX_HUNTED: usize = 16;

/// A hunter for the hot signatures of a survivor's parts.
pub fn hunter_against(parts: &[AssembledImage]) -> AssembledImage {
    antivirus(&[parts.to_vec()])
}

/// A hunter for the hot signatures most common among `survivors`, up to
/// [`MAX_HUNTED`] of them. Ties keep first appearance order.
pub fn antivirus(survivors: &[Vec<AssembledImage>]) -> AssembledImage {
    let mut counts: Vec<([u8; 4], usize)> = Vec::new();
    for sig in survivors.iter().flatten().filter_map(|img| hot_signature(img, 2000)) {
        match counts.iter_mut().find(|(s, _)| *s == sig) {
            Some((_, n)) => *n += 1,
            None => counts.push((sig, 1)),
        }
    }
    counts.sort_by_key(|&(_, n)| std::cmp::Reverse(n));
    let sigs: Vec<[u8; 4]> = counts.into_iter().take(MAX_HUNTED).map(|(s, _)| s).collect();
    signature_hunter(&sigs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_battle, ARENA_SIZE};

    fn stepping(rounds: u32) -> BattleConfig {
        BattleConfig {
            max_rounds: rounds,
            record_events: false,
            fast_forward: false,
        }
    }

    #[test]
    fn bomber_survives_alone_and_covers_a_quarter() {
        let b = bomber();
        let mut battle = Battle::new(&[PlayerSpec::new("b", vec![b.clone()])], 3, stepping(40_000)).unwrap();
        let r = battle.run();
        assert_eq!(r.scores, vec![1.0]);
        assert_eq!(r.reached_round, vec![40_000]);
        let cc = (0..ARENA_SIZE).filter(|&a| battle.arena().read(a as u16) == 0xCC).count();
        assert!((16_000..=16_400).contains(&cc), "{cc} bombed bytes");
    }

    #[test]
    fn bomber_beats_a_long_sled() {
        let sled = assemble(&format!("@start:\nl1:\n{}jmp l1\n@end:", "nop\n".repeat(200))).unwrap();
        let players = [PlayerSpec::new("b", vec![bomber()]), PlayerSpec::new("s", vec![sled])];
        let r = run_battle(&players, 1, BattleConfig::default()).unwrap();
        assert_eq!(r.scores, vec![1.0, 0.0]);
    }

    #[test]
    fn hunter_erases_its_target() {
        let prey = assemble("@start:\nl1:\nnop\nnop\nnop\nnop\njmp l1\n@end:").unwrap();
        let sig = hot_signature(&prey, 200).unwrap();
        let players = [
            PlayerSpec::new("h", vec![signature_hunter(&[sig])]),
            PlayerSpec::new("p", vec![prey]),
        ];
        let r = run_battle(&players, 5, BattleConfig::default()).unwrap();
        assert_eq!(r.scores, vec![1.0, 0.0]);
    }

    #[test]
    fn hot_signature_picks_the_loop() {
        let img = assemble("@start:\nmov ax, 1\nmov bx, 2\nl1:\ninc ax\ndec bx\njmp l1\n@end:").unwrap();
        assert_eq!(hot_signature(&img, 300), Some([0x40, 0x4B, 0xEB, 0xFC]));
        assert_eq!(hot_signature(&imp(), 10), None);
    }

    #[test]
    fn antivirus_covers_every_survivor() {
        let a = assemble("@start:\nl1:\ninc ax\ndec bx\njmp l1\n@end:").unwrap();
        let b = assemble("@start:\nl1:\nnop\ninc cx\nnop\njmp l1\n@end:").unwrap();
        let av = antivirus(&[vec![a.clone()], vec![b.clone()], vec![b.clone()]]);
        for prey in [a, b] {
            let players = [PlayerSpec::new("av", vec![av.clone()]), PlayerSpec::new("p", vec![prey])];
            for seed in 0..4 {
                assert_eq!(run_battle(&players, seed, BattleConfig::default()).unwrap().scores, vec![1.0, 0.0]);
            }
        }
    }
}
