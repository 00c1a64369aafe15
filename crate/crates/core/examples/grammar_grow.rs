//! Grows a random survivor part from the grammar and assembles it.

use cgforge::grammar::default_grammar;
use cgforge::isa::assemble;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let g = default_grammar(true);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree = g.grow(&mut rng, 8).expect("depth 8 is satisfiable");
    let src = g.render(&tree);
    println!("; {} nodes, height {}", tree.count_nodes(), tree.height());
    println!("{}", src);
    match assemble(&src) {
        Ok(img) => println!("; assembles to {} bytes", img.len()),
        Err(e) => println!("; does not assemble: {}", e),
    }
}
