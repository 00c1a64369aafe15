//! Stops a run, restores it from its checkpoint text and finishes it.

use cgforge::cli::adversaries::bomber;
use cgforge::evolution::{Evolution, EvolutionConfig};

fn main() {
    let cfg = EvolutionConfig {
        population_size: 12,
        games_per_eval: 6,
        probe_games: 3,
        max_generations: 6,
        ..EvolutionConfig::default()
    };
    let mut first = Evolution::new(cfg, vec![bomber()]).unwrap();
    for _ in 0..3 {
        first.step();
    }
    let text = first.to_checkpoint();
    println!("checkpoint after 3 generations: {} bytes", text.len());
    let mut resumed = Evolution::from_checkpoint(&text).unwrap();
    resumed.run(|_| {});
    for row in &resumed.history {
        println!("gen {} best {:.3} mean {:.3}", row.generation, row.best, row.mean);
    }
}
