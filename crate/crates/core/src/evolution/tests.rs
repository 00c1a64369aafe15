use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::grammar::default_grammar;
use crate::surrogate::Phase;

fn metrics(score: f64, reached: f64, written: f64, rate: f64) -> Metrics {
    Metrics {
        avg_score: score,
        avg_reached_round: reached,
        avg_written_bytes: written,
        writing_rate: rate,
        games: 1,
        per_part_written: [0.0; 2],
        per_part_lifetime: [0.0; 2],
        placement_failures: 0,
    }
}

/// The combined formula spelled out term by term.
fn oracle(score: f64, reached: f64, written: f64, rate: f64, nodes: usize) -> f64 {
    let lifetime = if reached > 1.0 { reached.log10() } else { 0.0 };
    let bytes = if written > 1.0 { written.log10() } else { 0.0 };
    2.0 * score + 0.02 * lifetime + 0.03 * bytes + 0.01 * rate - 0.00001 * nodes as f64
}

fn random_individual(g: &Grammar, rng: &mut ChaCha8Rng, depth: u32) -> Individual {
    loop {
        let ind = Individual::new([g.grow(rng, depth).unwrap(), g.grow(rng, depth).unwrap()]);
        if ind.is_viable(g, 17) {
            return ind;
        }
    }
}

fn with_fitness(fits: &[f64]) -> Vec<Individual> {
    let g = default_grammar(false);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    fits.iter()
        .map(|f| {
            let mut i = random_individual(&g, &mut rng, 4);
            i.fitness = Some(*f);
            i
        })
        .collect()
}

fn quick(seed: u64) -> EvolutionConfig {
    EvolutionConfig {
        population_size: 8,
        games_per_eval: 4,
        probe_games: 2,
        max_rounds: 3000,
        max_generations: 3,
        seed,
        ..EvolutionConfig::default()
    }
}

#[test]
fn defaults_follow_the_reference_setup() {
    let c = EvolutionConfig::default();
    assert_eq!(c.population_size, 192);
    assert_eq!(c.tournament_k, 4);
    assert_eq!((c.p_grow, c.p_duplicate, c.p_xover_subtree, c.p_xover_parts), (0.7, 0.2, 0.3, 0.2));
    assert_eq!(c.max_generations, 2000);
    assert_eq!(c.games_per_eval, 200);
    assert_eq!(c.bloat_weight, 1e-5);
    assert_eq!(c.weights, [2.0, 0.2, 0.3, 0.1]);
    assert_eq!(c.win_fitness, 1.1);
    assert_eq!(c.strike_length, 200);
    assert_eq!(EvolutionConfig::desk().games_per_eval, 20);
}

#[test]
fn fitness_of_the_feature_example() {
    let m = metrics(0.3, 10f64.powf(3.21827), 10f64.powf(0.69897), 0.01);
    let f = fitness(&m, 25, 20, &EvolutionConfig::default());
    assert!((f - 0.6851845).abs() < 1e-6, "{}", f);
}

#[test]
fn fitness_of_nothing_is_the_bloat_penalty() {
    let f = fitness(&metrics(0.0, 0.0, 0.0, 0.0), 1, 1, &EvolutionConfig::default());
    assert!((f + 1e-5).abs() < 1e-15);
}

#[test]
fn fitness_matches_the_oracle() {
    let cfg = EvolutionConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let (s, r, w, rate) = (
            rng.gen_range(0.0..=1.0),
            rng.gen_range(0.0..200_000.0),
            rng.gen_range(0.0..65536.0),
            rng.gen_range(0.0..4.0),
        );
        let (n1, n2) = (rng.gen_range(1..400), rng.gen_range(1..400));
        let f = fitness(&metrics(s, r, w, rate), n1, n2, &cfg);
        assert!((f - oracle(s, r, w, rate, n1.max(n2))).abs() < 1e-9);
    }
}

#[test]
fn bloat_penalty_is_linear() {
    let cfg = EvolutionConfig::default();
    let m = metrics(0.5, 1234.0, 77.0, 0.3);
    let base = fitness(&m, 10, 3, &cfg);
    for delta in [1usize, 7, 100, 990] {
        let diff = base - fitness(&m, 10 + delta, 3, &cfg);
        assert!((diff - 1e-5 * delta as f64).abs() < 1e-12);
    }
}

#[test]
fn metrics_aggregate_per_game() {
    let win = GameRecord {
        score: 1.0,
        reached_round: 1000,
        written_bytes: 50,
        part_reached: [1000, 400],
        part_written: [50, 0],
        placement_failed: false,
    };
    let m = Metrics::from_games(&[win; 4]);
    assert_eq!(m.avg_score, 1.0);
    assert_eq!(m.avg_reached_round, 1000.0);
    assert_eq!(m.avg_written_bytes, 50.0);
    assert!((m.writing_rate - 200.0 / 4000.0 / 4.0).abs() < 1e-15);
    assert_eq!(m.per_part_lifetime, [1000.0, 400.0]);
    assert_eq!(m.per_part_written, [50.0, 0.0]);

    let dead = GameRecord {
        reached_round: 1,
        part_reached: [1, 1],
        ..GameRecord::default()
    };
    let m = Metrics::from_games(&[dead; 10]);
    assert_eq!((m.avg_score, m.avg_reached_round, m.avg_written_bytes, m.writing_rate), (0.0, 1.0, 0.0, 0.0));
}

#[test]
fn evaluation_against_an_illegal_start() {
    let looper = crate::isa::assemble("@start:\nl1:\njmp l1\n@end:").unwrap();
    let dud = crate::isa::AssembledImage::from_bytes(vec![0x0F]);
    let m = evaluate(&[looper.clone(), looper.clone()], std::slice::from_ref(&dud), 6, 1, 1000);
    assert_eq!(m.avg_score, 1.0);
    assert_eq!(m.games, 6);
    let m = evaluate(&[dud.clone(), dud], &[looper], 6, 1, 1000);
    assert_eq!(m.avg_score, 0.0);
    assert_eq!(m.avg_reached_round, 1.0);
    assert_eq!(m.avg_written_bytes, 0.0);
}

#[test]
fn evaluation_is_schedule_independent() {
    let g = default_grammar(false);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ind = random_individual(&g, &mut rng, 8);
    let images = ind.images(&g).unwrap();
    let adv = [crate::cli::adversaries::bomber()];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| evaluate(&images, &adv, 8, 99, 5000))
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn tournament_picks_the_fittest_draw() {
    let pop = with_fitness(&[0.1, 0.9, 0.5, 0.2]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(select_tournament(&pop, 200, &mut rng), 1);
    let single = with_fitness(&[0.3]);
    for _ in 0..10 {
        assert_eq!(select_tournament(&single, 4, &mut rng), 0);
    }
}

#[test]
fn tournament_pressure_is_monotone_in_rank() {
    let pop = with_fitness(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut freq = [0usize; 8];
    for _ in 0..10_000 {
        freq[select_tournament(&pop, 4, &mut rng)] += 1;
    }
    assert!(freq.windows(2).all(|w| w[0] <= w[1]), "{:?}", freq);
}

#[test]
fn tournament_ties_go_to_the_lowest_index() {
    let pop = with_fitness(&[0.5; 8]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut freq = [0usize; 8];
    for _ in 0..8000 {
        freq[select_tournament(&pop, 4, &mut rng)] += 1;
    }
    // The minimum of four uniform draws over eight slots.
    assert!(freq.windows(2).all(|w| w[0] > w[1]), "{:?}", freq);
}

fn evaluated(ind: &Individual, lifetimes: [f64; 2], written: [f64; 2]) -> Individual {
    let mut i = ind.clone();
    i.metrics = Some(Metrics {
        per_part_lifetime: lifetimes,
        per_part_written: written,
        ..metrics(0.5, 1.0, 1.0, 0.0)
    });
    i.fitness = Some(1.0);
    i.eval_kind = EvalKind::Actual;
    i
}

#[test]
fn grow_mutation_contract() {
    let g = default_grammar(false);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut changed = 0;
    for _ in 0..300 {
        let parent = random_individual(&g, &mut rng, 9);
        let seed: u64 = rng.gen();
        let child = op_grow_mutation(&parent, &mut ChaCha8Rng::seed_from_u64(seed), &g, 17);
        assert_eq!(child, op_grow_mutation(&parent, &mut ChaCha8Rng::seed_from_u64(seed), &g, 17));
        assert!(child.is_viable(&g, 17));
        let same: Vec<bool> = (0..2).map(|p| child.parts[p] == parent.parts[p]).collect();
        assert!(same[0] || same[1], "only one part changes");
        if child != parent {
            changed += 1;
        }
    }
    assert!(changed > 200);
}

#[test]
fn duplicate_contract() {
    let g = default_grammar(false);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ind = random_individual(&g, &mut rng, 8);
    assert_eq!(op_duplicate_part(&ind), ind);

    let longer_second = evaluated(&ind, [10.0, 20.0], [0.0, 0.0]);
    let d = op_duplicate_part(&longer_second);
    assert_eq!(d.parts, [ind.parts[1].clone(), ind.parts[1].clone()]);
    assert_eq!(op_duplicate_part(&d).parts, d.parts);
    assert_eq!(d.fitness, None);
    assert_eq!(d.eval_kind, EvalKind::None);

    let writes_more = evaluated(&ind, [20.0, 20.0], [3.0, 1.0]);
    assert_eq!(op_duplicate_part(&writes_more).parts[1], ind.parts[0]);
    let tie = evaluated(&ind, [5.0, 5.0], [2.0, 2.0]);
    assert_eq!(op_duplicate_part(&tie).parts[1], ind.parts[0]);
}

#[test]
fn subtree_crossover_conserves_nodes() {
    let g = default_grammar(false);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let a = random_individual(&g, &mut rng, 9);
        let b = random_individual(&g, &mut rng, 9);
        let (ca, cb) = op_xover_subtree(&a, &b, &mut rng, &g, 17);
        let total = |x: &Individual, y: &Individual| {
            x.parts.iter().chain(y.parts.iter()).map(|t| t.count_nodes()).sum::<usize>()
        };
        assert_eq!(total(&ca, &cb), total(&a, &b));
        assert!(ca.is_viable(&g, 17) && cb.is_viable(&g, 17));
        let p = if ca.parts[0] != a.parts[0] || cb.parts[0] != b.parts[0] { 0 } else { 1 };
        assert_eq!(ca.parts[1 - p], a.parts[1 - p]);
        assert_eq!(cb.parts[1 - p], b.parts[1 - p]);
    }
}

#[test]
fn subtree_swap_reverses() {
    let g = default_grammar(false);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = g.grow(&mut rng, 9).unwrap();
    let b = g.grow(&mut rng, 9).unwrap();
    let pa = a.subtree_points()[0];
    let pb = b.subtree_points()[0];
    let sa = a.subtree_at(pa.index).unwrap().clone();
    let sb = b.subtree_at(pb.index).unwrap().clone();
    let a2 = a.replace_subtree(pa.index, sb.clone()).unwrap();
    let b2 = b.replace_subtree(pb.index, sa).unwrap();
    let a3 = a2.replace_subtree(pa.index, b2.subtree_at(pb.index).unwrap().clone()).unwrap();
    assert_eq!(a3, a);
}

#[test]
fn parts_crossover_contract() {
    let g = default_grammar(false);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let a = random_individual(&g, &mut rng, 7);
        let b = random_individual(&g, &mut rng, 7);
        let seed: u64 = rng.gen();
        let c = op_xover_parts(&a, &b, &mut ChaCha8Rng::seed_from_u64(seed));
        assert_eq!(c, op_xover_parts(&a, &b, &mut ChaCha8Rng::seed_from_u64(seed)));
        let i = (0..2).find(|&i| c.parts[1 - i] == a.parts[1 - i] && b.parts.contains(&c.parts[i]));
        assert!(i.is_some());
    }
}

#[test]
fn operators_keep_individuals_valid() {
    let g = default_grammar(true);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut pool: Vec<Individual> = (0..20).map(|i| random_individual(&g, &mut rng, 5 + i % 8)).collect();
    for n in 0..10_000 {
        let i = rng.gen_range(0..pool.len());
        let j = rng.gen_range(0..pool.len());
        let child = match n % 4 {
            0 => op_grow_mutation(&pool[i], &mut rng, &g, 17),
            1 => op_duplicate_part(&evaluated(&pool[i], [rng.gen(), rng.gen()], [0.0, 0.0])),
            2 => op_xover_subtree(&pool[i], &pool[j], &mut rng, &g, 17).0,
            _ => op_xover_parts(&pool[i], &pool[j], &mut rng),
        };
        for p in &child.parts {
            p.check(&g).unwrap();
            assert!(p.height() <= 17);
        }
        assert!(child.images(&g).unwrap().iter().all(|im| im.len() <= 512));
        pool[i] = child;
    }
}

fn row(best: f64, mean: f64, hof: f64) -> HistoryRow {
    HistoryRow {
        generation: 0,
        best,
        mean,
        mode: Phase::Actual,
        seconds: 0.0,
        hall_of_fame: hof,
        battles: 0,
    }
}

#[test]
fn termination_rules() {
    let cfg = EvolutionConfig::default();
    assert!(!check_termination(&[row(0.2, 0.1, 0.2)], &cfg));
    assert!(check_termination(&vec![row(0.2, 0.1, 0.2); 2000], &cfg));
    assert!(check_termination(&vec![row(1.3, 1.25, 1.3); 200], &cfg));
    assert!(!check_termination(&vec![row(1.3, 1.25, 1.3); 199], &cfg));
    assert!(!check_termination(&vec![row(1.3, 1.1, 1.3); 200], &cfg));

    let mut dip = vec![row(1.3, 1.25, 1.3); 300];
    dip[150].best = 1.0;
    assert!(!check_termination(&dip, &cfg));
    let mut falling = vec![row(1.3, 1.25, 1.3); 200];
    falling[199].hall_of_fame = 1.2;
    assert!(!check_termination(&falling, &cfg));
}

#[test]
fn a_short_run_records_every_generation() {
    let out = run_evolution(&quick(1), &[crate::cli::adversaries::imp()]).unwrap();
    assert_eq!(out.history.len(), 3);
    assert!(!out.hall_of_fame.is_empty());
    assert!(out.hall_of_fame.iter().all(|i| i.eval_kind == EvalKind::Actual));
    assert!(out.history.windows(2).all(|w| w[1].hall_of_fame >= w[0].hall_of_fame));
    assert!(out.history.iter().all(|r| r.mode == Phase::Actual));
    // Identical genomes in a generation share one evaluation.
    assert!(out.battles > 0 && out.battles <= 3 * 8 * 4);
}

#[test]
fn populations_keep_their_size_and_evaluate_actually() {
    let mut evo = Evolution::new(quick(2), vec![crate::cli::adversaries::bomber()]).unwrap();
    for _ in 0..3 {
        let plan = evo.plan();
        assert_eq!(plan.actual_count(), 8);
        evo.step();
        assert_eq!(evo.population.len(), 8);
        assert!(evo.population.iter().all(|i| i.fitness.is_none()));
    }
    let mut hof: Vec<f64> = evo.hall_of_fame.iter().map(|i| i.fitness.unwrap()).collect();
    let sorted = hof.clone();
    hof.sort_by(f64::total_cmp);
    assert_eq!(hof, sorted);
}

#[test]
fn evaluated_individuals_satisfy_the_fitness_invariant() {
    let mut cfg = quick(3);
    cfg.surrogate = true;
    cfg.max_generations = 6;
    let mut evo = Evolution::new(cfg, vec![crate::cli::adversaries::bomber()]).unwrap();
    for _ in 0..6 {
        let plan = evo.plan();
        let mut probe = evo.clone();
        // Evaluate a copy without breeding to inspect the scored generation.
        let samples = probe.evaluate_population(&plan);
        for (i, ind) in probe.population.iter().enumerate() {
            assert!(ind.fitness.is_some());
            assert!(ind.metrics.is_some() || ind.eval_kind == EvalKind::Approximated);
            if plan.actual[i] {
                assert_eq!(ind.eval_kind, EvalKind::Actual);
            }
        }
        assert!(samples.len() <= plan.actual_count());
        evo.step();
    }
}

#[test]
fn checkpoint_round_trips() {
    let mut cfg = quick(4);
    cfg.surrogate = true;
    cfg.max_generations = 4;
    let mut evo = Evolution::new(cfg, vec![crate::cli::adversaries::bomber()]).unwrap();
    evo.run(|_| {});
    let text = evo.to_checkpoint();
    let back = Evolution::from_checkpoint(&text).unwrap();
    assert_eq!(back.to_checkpoint(), text);
    assert_eq!(back.population, evo.population);
    assert_eq!(back.hall_of_fame, evo.hall_of_fame);
    assert_eq!(back.rng, evo.rng);
    assert_eq!(back.surrogate, evo.surrogate);
}

#[test]
fn checkpoint_version_is_checked() {
    let evo = Evolution::new(quick(5), vec![crate::cli::adversaries::imp()]).unwrap();
    let text = evo.to_checkpoint().replacen(CHECKPOINT_HEADER, "CGCKPT2", 1);
    assert_eq!(
        Evolution::from_checkpoint(&text).unwrap_err(),
        CheckpointError::Version("CGCKPT2".into())
    );
    assert!(matches!(
        Evolution::from_checkpoint("CGCKPT1\n[config]\nbogus = 1\n"),
        Err(CheckpointError::Malformed { .. })
    ));
}

fn trajectory(h: &[HistoryRow]) -> Vec<(u32, f64, f64, Phase, f64, u64)> {
    h.iter()
        .map(|r| (r.generation, r.best, r.mean, r.mode, r.hall_of_fame, r.battles))
        .collect()
}

#[test]
fn resumed_runs_follow_the_same_trajectory() {
    for surrogate in [false, true] {
        let mut cfg = quick(6);
        cfg.max_generations = 10;
        cfg.surrogate = surrogate;
        let adv = vec![crate::cli::adversaries::bomber()];
        let mut whole = Evolution::new(cfg.clone(), adv.clone()).unwrap();
        whole.run(|_| {});

        let mut first = Evolution::new(cfg, adv).unwrap();
        for _ in 0..4 {
            first.step();
        }
        let mut rest = Evolution::from_checkpoint(&first.to_checkpoint()).unwrap();
        rest.run(|_| {});
        assert_eq!(trajectory(&rest.history), trajectory(&whole.history));
        assert_eq!(rest.population, whole.population);
        assert_eq!(rest.hall_of_fame, whole.hall_of_fame);
    }
}

#[test]
fn swapping_the_adversary_restarts_learning() {
    let mut cfg = quick(7);
    cfg.surrogate = true;
    cfg.max_generations = 3;
    let mut evo = Evolution::new(cfg, vec![crate::cli::adversaries::imp()]).unwrap();
    evo.run(|_| {});
    evo.swap_adversary(vec![crate::cli::adversaries::bomber()]);
    assert!(evo.hall_of_fame.is_empty());
    assert_eq!(evo.plan(), crate::surrogate::EvalPlan::all_actual(8));
    evo.cfg.max_generations = 4;
    evo.run(|_| {});
    assert_eq!(evo.history.last().unwrap().mode, Phase::Actual);
    assert_eq!(evo.hall_of_fame.len(), 1);
}

#[test]
fn history_csv_has_the_documented_columns() {
    let csv = history_csv(&[row(1.0, 0.5, 1.0)]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("gen,best,mean,mode,seconds"));
    assert_eq!(lines.next(), Some("0,1,0.5,actual,0.000"));
}

#[test]
fn config_text_round_trips() {
    let mut c = EvolutionConfig::desk();
    c.weights = [1.0, 0.5, 0.25, 0.125];
    c.init_depth = (3, 9);
    let mut d = EvolutionConfig::default();
    for (k, v) in c.entries() {
        assert!(d.set(k, &v).unwrap());
    }
    assert_eq!(c, d);
    assert!(!d.set("nope", "1").unwrap());
    assert!(d.set("p_grow", "2").is_err());
}
