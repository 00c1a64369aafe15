//! A bomber against a self loop over twenty seeds.

use cgforge::cli::adversaries::{bomber, imp};
use cgforge::engine::{run_battle, BattleConfig, PlayerSpec};

const GAMES: u64 = 20;

fn main() {
    let players = [
        PlayerSpec::new("bomber", vec![bomber()]),
        PlayerSpec::new("imp", vec![imp()]),
    ];
    let mut totals = [0.0; 2];
    for seed in 0..GAMES {
        let r = run_battle(&players, seed, BattleConfig::default()).expect("players fit in the arena");
        println!(
            "seed {seed}: scores {:?}, rounds {}, bomber wrote {} bytes",
            r.scores, r.rounds_run, r.written_bytes[0]
        );
        totals[0] += r.scores[0];
        totals[1] += r.scores[1];
    }
    println!("average bomber {:.2}, imp {:.2}", totals[0] / GAMES as f64, totals[1] / GAMES as f64);
}
