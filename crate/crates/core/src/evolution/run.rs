use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::grammar::{default_grammar, Grammar};
use crate::isa::AssembledImage;
use crate::surrogate::{memetic_apply, vectorize, EvalPlan, Phase, PhaseState, Sample, MEMETIC_TRIALS};

use super::operators::{op_duplicate_part, op_grow_mutation, op_xover_parts, op_xover_subtree};
use super::{
    battle_seed, check_termination, fitness, play_games, select_tournament, EvalKind, EvolutionConfig, HistoryRow,
    Individual, Metrics,
};

const TAG_EVAL: u64 = 0;
const TAG_PLAN: u64 = 1;
const TAG_MEMETIC: u64 = 2;

fn derived_seed(seed: u64, generation: u32, tag: u64) -> u64 {
    battle_seed(battle_seed(seed, generation as u64), tag)
}

/// A run in progress. Between calls to [`Evolution::step`] the population
/// holds the next, not yet evaluated generation.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub cfg: EvolutionConfig,
    pub grammar: Grammar,
    pub adversary: Vec<AssembledImage>,
    pub population: Vec<Individual>,
    /// Generations evaluated so far.
    pub generation: u32,
    pub history: Vec<HistoryRow>,
    /// Successive improvements; the last entry is the best so far.
    pub hall_of_fame: Vec<Individual>,
    pub surrogate: Option<PhaseState>,
    /// Battles run so far, probes included.
    pub battles: u64,
    pub(crate) rng: ChaCha8Rng,
}

#[derive(Debug, Clone)]
pub struct EvolutionOutcome {
    pub hall_of_fame: Vec<Individual>,
    pub history: Vec<HistoryRow>,
    pub battles: u64,
}

/// Runs a fresh evolution to termination.
pub fn run_evolution(cfg: &EvolutionConfig, adversary: &[AssembledImage]) -> Result<EvolutionOutcome, String> {
    let mut evo = Evolution::new(cfg.clone(), adversary.to_vec())?;
    evo.run(|_| {});
    Ok(EvolutionOutcome {
        hall_of_fame: evo.hall_of_fame,
        history: evo.history,
        battles: evo.battles,
    })
}

struct Job {
    parts: [AssembledImage; 2],
    full: bool,
}

struct Outcome {
    full: Option<Metrics>,
    probe: Metrics,
    battles: u64,
}

impl Evolution {
    pub fn new(cfg: EvolutionConfig, adversary: Vec<AssembledImage>) -> Result<Evolution, String> {
        cfg.validate()?;
        if adversary.is_empty() || adversary.len() > 2 {
            return Err("the adversary needs one or two parts".into());
        }
        let grammar = default_grammar(cfg.random_patterns);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (lo, hi) = cfg.init_depth;
        let mut population = Vec::with_capacity(cfg.population_size);
        for i in 0..cfg.population_size {
            let depth = lo + (i as u32) % (hi - lo + 1);
            loop {
                let mut grow = || grammar.grow(&mut rng, depth).expect("initial depth fits the grammar");
                let ind = Individual::new([grow(), grow()]);
                if ind.is_viable(&grammar, cfg.max_depth) {
                    population.push(ind);
                    break;
                }
            }
        }
        Ok(Evolution {
            surrogate: cfg.surrogate.then(PhaseState::new),
            cfg,
            grammar,
            adversary,
            population,
            generation: 0,
            history: Vec::new(),
            hall_of_fame: Vec::new(),
            battles: 0,
            rng,
        })
    }

    pub fn best(&self) -> Option<&Individual> {
        self.hall_of_fame.last()
    }

    /// Phase the next generation will be evaluated in.
    pub fn next_phase(&self) -> Phase {
        self.plan().phase
    }

    pub fn is_finished(&self) -> bool {
        check_termination(&self.history, &self.cfg)
    }

    /// Plan for the population about to be evaluated.
    pub fn plan(&self) -> EvalPlan {
        let n = self.population.len();
        match &self.surrogate {
            Some(s) => s.plan(n, derived_seed(self.cfg.seed, self.generation, TAG_PLAN)),
            None => EvalPlan::all_actual(n),
        }
    }

    /// Replaces the adversary. Fitness learned against the old one no
    /// longer applies, so the surrogate and hall of fame start over and the
    /// next generation is evaluated in full.
    pub fn swap_adversary(&mut self, adversary: Vec<AssembledImage>) {
        self.adversary = adversary;
        self.hall_of_fame.clear();
        if let Some(s) = &mut self.surrogate {
            s.reset();
        }
    }

    pub fn run(&mut self, mut on_generation: impl FnMut(&Evolution)) {
        while !self.is_finished() {
            self.step();
            on_generation(self);
        }
    }

    /// Evaluates the current generation, records it and breeds the next.
    pub fn step(&mut self) -> &HistoryRow {
        let started = Instant::now();
        let plan = self.plan();
        let samples = self.evaluate_population(&plan);

        let best_actual = self
            .population
            .iter()
            .filter(|i| i.eval_kind == EvalKind::Actual)
            .fold(None::<&Individual>, |best, i| match best {
                Some(b) if b.fitness >= i.fitness => Some(b),
                _ => Some(i),
            });
        if let Some(b) = best_actual {
            if self.best().is_none_or(|h| b.fitness > h.fitness) {
                self.hall_of_fame.push(b.clone());
            }
        }
        let fits: Vec<f64> = self.population.iter().map(|i| i.fitness.expect("evaluated")).collect();
        let best = fits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = fits.iter().sum::<f64>() / fits.len() as f64;

        if let Some(s) = &mut self.surrogate {
            s.ingest(&samples);
        }
        self.history.push(HistoryRow {
            generation: self.generation,
            best,
            mean,
            mode: plan.phase,
            seconds: 0.0,
            hall_of_fame: self.best().and_then(|h| h.fitness).unwrap_or(0.0),
            battles: 0,
        });
        self.generation += 1;
        self.breed();
        let row = self.history.last_mut().expect("row just pushed");
        row.battles = self.battles;
        row.seconds = started.elapsed().as_secs_f64();
        row
    }

    /// Evaluates every individual per `plan` and returns the surrogate
    /// samples from the full evaluations. Identical genomes are evaluated
    /// once.
    pub(crate) fn evaluate_population(&mut self, plan: &EvalPlan) -> Vec<Sample> {
        let cfg = &self.cfg;
        let g = &self.grammar;
        let mut key_of = Vec::with_capacity(self.population.len());
        let mut index: HashMap<[String; 2], usize> = HashMap::new();
        let mut jobs: Vec<Job> = Vec::new();
        for (i, ind) in self.population.iter().enumerate() {
            let src = ind.sources(g);
            let k = *index.entry(src).or_insert_with(|| {
                jobs.push(Job {
                    parts: ind.images(g).expect("population members assemble"),
                    full: false,
                });
                jobs.len() - 1
            });
            jobs[k].full |= plan.actual[i];
            key_of.push(k);
        }

        let seed = derived_seed(cfg.seed, self.generation, TAG_EVAL);
        let adversary = &self.adversary;
        let outcomes: Vec<Outcome> = jobs
            .par_iter()
            .map(|job| {
                let games = if job.full { cfg.games_per_eval } else { cfg.probe_games };
                let records = play_games(&job.parts, adversary, games, seed, cfg.max_rounds);
                let probe = Metrics::from_games(&records[..cfg.probe_games.min(records.len())]);
                Outcome {
                    full: job.full.then(|| Metrics::from_games(&records)),
                    probe,
                    battles: games as u64,
                }
            })
            .collect();
        self.battles += outcomes.iter().map(|o| o.battles).sum::<u64>();

        let mut samples = Vec::new();
        let mut sampled = vec![false; jobs.len()];
        for (i, ind) in self.population.iter_mut().enumerate() {
            let o = &outcomes[key_of[i]];
            let (n1, n2) = ind.nodes();
            match &o.full {
                Some(m) => {
                    let f = fitness(m, n1, n2, cfg);
                    ind.metrics = Some(m.clone());
                    ind.fitness = Some(f);
                    ind.eval_kind = EvalKind::Actual;
                    if !sampled[key_of[i]] {
                        sampled[key_of[i]] = true;
                        samples.push(Sample {
                            features: vectorize(&o.probe, n1, n2),
                            fitness: f,
                            generation: self.generation,
                        });
                    }
                }
                None => {
                    let model = self.surrogate.as_ref().expect("probe-only jobs need a surrogate");
                    let f = model
                        .predict(&vectorize(&o.probe, n1, n2))
                        .expect("approximation planned without a model");
                    ind.metrics = Some(o.probe.clone());
                    ind.fitness = Some(f);
                    ind.eval_kind = EvalKind::Approximated;
                }
            }
        }
        samples
    }

    fn breed(&mut self) {
        let Evolution {
            cfg,
            grammar: g,
            adversary,
            population,
            rng,
            surrogate,
            battles,
            generation,
            ..
        } = self;
        let (cfg, g, adversary): (&EvolutionConfig, &Grammar, &[AssembledImage]) = (cfg, g, adversary);
        let model = if cfg.memetic {
            surrogate.as_ref().and_then(|s| s.model())
        } else {
            None
        };
        let probe_seed = derived_seed(cfg.seed, *generation, TAG_MEMETIC);
        let probe = |cands: &[Individual]| {
            cands
                .par_iter()
                .map(|c| {
                    let images = c.images(g).expect("variation keeps individuals viable");
                    let records = play_games(&images, adversary, cfg.probe_games, probe_seed, cfg.max_rounds);
                    let (n1, n2) = c.nodes();
                    vectorize(&Metrics::from_games(&records), n1, n2)
                })
                .collect::<Vec<_>>()
        };
        let mut probe_battles = 0u64;
        let mut apply = |rng: &mut ChaCha8Rng, op: &mut dyn FnMut(&mut ChaCha8Rng) -> Individual| {
            if model.is_some() {
                probe_battles += (MEMETIC_TRIALS * cfg.probe_games) as u64;
            }
            memetic_apply(op, rng, MEMETIC_TRIALS, model, probe).child
        };

        let pop: &[Individual] = population;
        let mut next = Vec::with_capacity(cfg.population_size);
        while next.len() < cfg.population_size {
            let a = select_tournament(pop, cfg.tournament_k, rng);
            let mut child = pop[a].clone();
            child.clear_evaluation();
            if rng.gen_bool(cfg.p_grow) {
                let parent = child;
                child = apply(rng, &mut |r| op_grow_mutation(&parent, r, g, cfg.max_depth));
            }
            if rng.gen_bool(cfg.p_duplicate) {
                child = op_duplicate_part(&child);
            }
            if rng.gen_bool(cfg.p_xover_subtree) {
                let b = select_tournament(pop, cfg.tournament_k, rng);
                let parent = child;
                child = apply(rng, &mut |r| op_xover_subtree(&parent, &pop[b], r, g, cfg.max_depth).0);
            }
            if rng.gen_bool(cfg.p_xover_parts) {
                let b = select_tournament(pop, cfg.tournament_k, rng);
                let parent = child;
                child = apply(rng, &mut |r| op_xover_parts(&parent, &pop[b], r));
            }
            child.clear_evaluation();
            next.push(child);
        }
        *battles += probe_battles;
        *population = next;
    }
}
