//! The grammar-guided GP loop: two-part individuals, battle-based fitness,
//! tournament selection, the four variation operators and generational
//! replacement with a hall of fame.

mod checkpoint;
mod evaluate;
mod operators;
mod run;

pub use checkpoint::{CheckpointError, CHECKPOINT_HEADER};
pub use evaluate::{battle_seed, evaluate, play_games, GameRecord};
pub use operators::{op_duplicate_part, op_grow_mutation, op_xover_parts, op_xover_subtree, VARIATION_RETRIES};
pub use run::{run_evolution, Evolution, EvolutionOutcome};

use rand::Rng;

use crate::grammar::{Ast, Grammar};
use crate::isa::{assemble, AssembleError, AssembledImage};
use crate::surrogate::Phase;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub tournament_k: usize,
    pub p_grow: f64,
    pub p_duplicate: f64,
    pub p_xover_subtree: f64,
    pub p_xover_parts: f64,
    pub max_generations: u32,
    pub games_per_eval: usize,
    pub bloat_weight: f64,
    /// Weights of the score, lifetime, written-bytes and writing-rate terms.
    pub weights: [f64; 4],
    pub win_fitness: f64,
    pub strike_length: u32,
    /// Largest `|best - mean|` that still counts as converged.
    pub convergence_gap: f64,
    pub seed: u64,
    /// Tree height cap for all variation.
    pub max_depth: u32,
    /// Initial trees are grown with depths ramped over this range.
    pub init_depth: (u32, u32),
    pub max_rounds: u32,
    pub random_patterns: bool,
    pub surrogate: bool,
    pub memetic: bool,
    /// Battles in a probe evaluation; also the prefix of every full
    /// evaluation used as its probe features.
    pub probe_games: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population_size: 192,
            tournament_k: 4,
            p_grow: 0.7,
            p_duplicate: 0.2,
            p_xover_subtree: 0.3,
            p_xover_parts: 0.2,
            max_generations: 2000,
            games_per_eval: 200,
            bloat_weight: 1e-5,
            weights: [2.0, 0.2, 0.3, 0.1],
            win_fitness: 1.1,
            strike_length: 200,
            convergence_gap: 0.1,
            seed: 0,
            max_depth: 17,
            init_depth: (5, 12),
            max_rounds: crate::engine::DEFAULT_MAX_ROUNDS,
            random_patterns: false,
            surrogate: false,
            memetic: false,
            probe_games: 10,
        }
    }
}

impl EvolutionConfig {
    /// Small setup that runs on a laptop: 24 individuals, 20 battles each.
    pub fn desk() -> EvolutionConfig {
        EvolutionConfig {
            population_size: 24,
            games_per_eval: 20,
            ..EvolutionConfig::default()
        }
    }

    /// `key = value` pairs, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("population_size", self.population_size.to_string()),
            ("tournament_k", self.tournament_k.to_string()),
            ("p_grow", self.p_grow.to_string()),
            ("p_duplicate", self.p_duplicate.to_string()),
            ("p_xover_subtree", self.p_xover_subtree.to_string()),
            ("p_xover_parts", self.p_xover_parts.to_string()),
            ("max_generations", self.max_generations.to_string()),
            ("games_per_eval", self.games_per_eval.to_string()),
            ("bloat_weight", self.bloat_weight.to_string()),
            (
                "weights",
                self.weights.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            ),
            ("win_fitness", self.win_fitness.to_string()),
            ("strike_length", self.strike_length.to_string()),
            ("convergence_gap", self.convergence_gap.to_string()),
            ("seed", self.seed.to_string()),
            ("max_depth", self.max_depth.to_string()),
            ("init_depth", format!("{},{}", self.init_depth.0, self.init_depth.1)),
            ("max_rounds", self.max_rounds.to_string()),
            ("random_patterns", self.random_patterns.to_string()),
            ("surrogate", self.surrogate.to_string()),
            ("memetic", self.memetic.to_string()),
            ("probe_games", self.probe_games.to_string()),
        ]
    }

    /// Sets one field from its text form. Returns `Ok(false)` for keys this
    /// config does not have.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.trim().parse().map_err(|_| format!("bad value `{}` for `{}`", v.trim(), key))
        }
        fn prob(key: &str, v: &str) -> Result<f64, String> {
            let p: f64 = num(key, v)?;
            if (0.0..=1.0).contains(&p) {
                Ok(p)
            } else {
                Err(format!("`{}` must be in [0, 1]", key))
            }
        }
        match key {
            "population_size" => self.population_size = num(key, value)?,
            "tournament_k" => self.tournament_k = num(key, value)?,
            "p_grow" => self.p_grow = prob(key, value)?,
            "p_duplicate" => self.p_duplicate = prob(key, value)?,
            "p_xover_subtree" => self.p_xover_subtree = prob(key, value)?,
            "p_xover_parts" => self.p_xover_parts = prob(key, value)?,
            "max_generations" => self.max_generations = num(key, value)?,
            "games_per_eval" => self.games_per_eval = num(key, value)?,
            "bloat_weight" => self.bloat_weight = num(key, value)?,
            "weights" => {
                let w: Vec<f64> = value.split(',').map(|v| num(key, v)).collect::<Result<_, _>>()?;
                self.weights = w.try_into().map_err(|_| "`weights` needs four numbers".to_string())?;
            }
            "win_fitness" => self.win_fitness = num(key, value)?,
            "strike_length" => self.strike_length = num(key, value)?,
            "convergence_gap" => self.convergence_gap = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "max_depth" => self.max_depth = num(key, value)?,
            "init_depth" => {
                let (a, b) = value.split_once(',').ok_or("`init_depth` needs `min,max`")?;
                self.init_depth = (num(key, a)?, num(key, b)?);
            }
            "max_rounds" => self.max_rounds = num(key, value)?,
            "random_patterns" => self.random_patterns = num(key, value)?,
            "surrogate" => self.surrogate = num(key, value)?,
            "memetic" => self.memetic = num(key, value)?,
            "probe_games" => self.probe_games = num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.population_size == 0 || self.tournament_k == 0 || self.games_per_eval == 0 {
            return Err("population_size, tournament_k and games_per_eval must be positive".into());
        }
        if self.init_depth.0 < 2 || self.init_depth.0 > self.init_depth.1 || self.init_depth.1 > self.max_depth {
            return Err("init_depth must satisfy 2 <= min <= max <= max_depth".into());
        }
        if self.probe_games == 0 || self.probe_games > self.games_per_eval {
            return Err("probe_games must be in 1..=games_per_eval".into());
        }
        if self.max_rounds == 0 {
            return Err("max_rounds must be positive".into());
        }
        Ok(())
    }
}

/// Averages over a set of battles from the evolved player's side.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub avg_score: f64,
    pub avg_reached_round: f64,
    pub avg_written_bytes: f64,
    pub writing_rate: f64,
    pub games: usize,
    pub per_part_written: [f64; 2],
    pub per_part_lifetime: [f64; 2],
    /// Battles that could not be placed and scored zero.
    pub placement_failures: usize,
}

impl Metrics {
    pub fn from_games(games: &[GameRecord]) -> Metrics {
        let n = games.len().max(1) as f64;
        let sum = |f: &dyn Fn(&GameRecord) -> f64| games.iter().map(f).sum::<f64>();
        let reached = sum(&|g| g.reached_round as f64);
        let written = sum(&|g| g.written_bytes as f64);
        Metrics {
            avg_score: sum(&|g| g.score) / n,
            avg_reached_round: reached / n,
            avg_written_bytes: written / n,
            writing_rate: written / reached.max(1.0) / n,
            games: games.len(),
            per_part_written: [
                sum(&|g| g.part_written[0] as f64) / n,
                sum(&|g| g.part_written[1] as f64) / n,
            ],
            per_part_lifetime: [
                sum(&|g| g.part_reached[0] as f64) / n,
                sum(&|g| g.part_reached[1] as f64) / n,
            ],
            placement_failures: games.iter().filter(|g| g.placement_failed).count(),
        }
    }
}

/// Weighted sum of the score, lifetime, written-bytes and rate terms minus
/// the bloat penalty on the larger part.
pub fn fitness(m: &Metrics, n1: usize, n2: usize, cfg: &EvolutionConfig) -> f64 {
    let [ws, wl, ww, wr] = cfg.weights;
    let f_score = m.avg_score;
    let f_lifetime = 0.1 * m.avg_reached_round.max(1.0).log10();
    let f_written = 0.1 * m.avg_written_bytes.max(1.0).log10();
    let f_rate = 0.1 * m.writing_rate;
    ws * f_score + wl * f_lifetime + ww * f_written + wr * f_rate - cfg.bloat_weight * n1.max(n2) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalKind {
    None,
    Actual,
    Approximated,
}

impl EvalKind {
    pub fn name(self) -> &'static str {
        match self {
            EvalKind::None => "none",
            EvalKind::Actual => "actual",
            EvalKind::Approximated => "approximated",
        }
    }

    pub fn parse(s: &str) -> Option<EvalKind> {
        match s {
            "none" => Some(EvalKind::None),
            "actual" => Some(EvalKind::Actual),
            "approximated" => Some(EvalKind::Approximated),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub parts: [Ast; 2],
    /// Metrics of the last evaluation in this lineage. Variation keeps them
    /// so the duplicate operator can still rank the parts.
    pub metrics: Option<Metrics>,
    pub fitness: Option<f64>,
    pub eval_kind: EvalKind,
}

impl Individual {
    pub fn new(parts: [Ast; 2]) -> Individual {
        Individual {
            parts,
            metrics: None,
            fitness: None,
            eval_kind: EvalKind::None,
        }
    }

    pub fn nodes(&self) -> (usize, usize) {
        (self.parts[0].count_nodes(), self.parts[1].count_nodes())
    }

    pub fn sources(&self, g: &Grammar) -> [String; 2] {
        [g.render(&self.parts[0]), g.render(&self.parts[1])]
    }

    pub fn images(&self, g: &Grammar) -> Result<[AssembledImage; 2], AssembleError> {
        let [a, b] = self.sources(g);
        Ok([assemble(&a)?, assemble(&b)?])
    }

    /// Both parts assemble within the size limit and respect the depth cap.
    pub fn is_viable(&self, g: &Grammar, max_depth: u32) -> bool {
        self.parts.iter().all(|p| p.height() <= max_depth && assemble(&g.render(p)).is_ok())
    }

    pub(crate) fn clear_evaluation(&mut self) {
        self.fitness = None;
        self.eval_kind = EvalKind::None;
    }
}

/// `k` draws with replacement; the fittest draw wins, the lowest index on
/// ties.
pub fn select_tournament<R: Rng + ?Sized>(population: &[Individual], k: usize, rng: &mut R) -> usize {
    assert!(!population.is_empty(), "tournament over an empty population");
    let fit = |i: usize| population[i].fitness.unwrap_or(f64::NEG_INFINITY);
    let mut best = rng.gen_range(0..population.len());
    for _ in 1..k.max(1) {
        let c = rng.gen_range(0..population.len());
        if fit(c) > fit(best) || (fit(c) == fit(best) && c < best) {
            best = c;
        }
    }
    best
}

/// One generation's record.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub generation: u32,
    pub best: f64,
    pub mean: f64,
    pub mode: Phase,
    pub seconds: f64,
    /// Hall-of-fame fitness after this generation.
    pub hall_of_fame: f64,
    /// Battles run so far, probes included.
    pub battles: u64,
}

pub const HISTORY_HEADER: &str = "gen,best,mean,mode,seconds";

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.3}\n",
            r.generation,
            r.best,
            r.mean,
            r.mode.name(),
            r.seconds
        ));
    }
    out
}

/// Stop at the generation limit, or after a winning strike: best fitness
/// at or above the win threshold for `strike_length` generations, best
/// and mean within `convergence_gap` now, and the hall of fame never
/// falling over the strike.
pub fn check_termination(history: &[HistoryRow], cfg: &EvolutionConfig) -> bool {
    if history.len() as u64 >= cfg.max_generations as u64 {
        return true;
    }
    let n = cfg.strike_length as usize;
    if n == 0 || history.len() < n {
        return false;
    }
    let strike = &history[history.len() - n..];
    let last = strike.last().expect("non-empty strike");
    strike.iter().all(|r| r.best >= cfg.win_fitness)
        && (last.best - last.mean).abs() <= cfg.convergence_gap
        && strike.windows(2).all(|w| w[1].hall_of_fame >= w[0].hall_of_fame)
}

#[cfg(test)]
mod tests;
