//! Builds a hunter for a survivor's hot signature and plays both.

use cgforge::cli::adversaries::{hot_signature, hunter_against};
use cgforge::engine::{run_battle, BattleConfig, PlayerSpec};
use cgforge::isa::assemble;

fn main() {
    let survivor = assemble("@start:\nmov ax, 0x1234\nl1:\ninc ax\nnop\njmp l1\n@end:").unwrap();
    let sig = hot_signature(&survivor, 2000).unwrap();
    println!("hot signature {:02x?}", sig);
    let hunter = hunter_against(std::slice::from_ref(&survivor));
    let players = [
        PlayerSpec::new("survivor", vec![survivor]),
        PlayerSpec::new("hunter", vec![hunter]),
    ];
    for seed in 0..5 {
        let r = run_battle(&players, seed, BattleConfig::default()).unwrap();
        println!("seed {seed}: survivor died in round {}, scores {:?}", r.reached_round[0], r.scores);
    }
}
