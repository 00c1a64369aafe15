//! A short desk-scale run against the bomber.

use cgforge::cli::adversaries::bomber;
use cgforge::evolution::{Evolution, EvolutionConfig};

fn main() {
    let cfg = EvolutionConfig {
        max_generations: 10,
        ..EvolutionConfig::desk()
    };
    let mut evo = Evolution::new(cfg, vec![bomber()]).expect("valid config");
    evo.run(|e| {
        let row = e.history.last().unwrap();
        println!("gen {:3} best {:.3} mean {:.3} battles {}", row.generation, row.best, row.mean, e.battles);
    });
    let best = evo.best().expect("at least one evaluated generation");
    for (k, src) in best.sources(&evo.grammar).iter().enumerate() {
        println!("; part {}\n{}", k + 1, src);
    }
}
