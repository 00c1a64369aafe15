//! `CGCKPT1` text checkpoints: everything needed to continue a run on the
//! same trajectory.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grammar::{default_grammar, parse_trees, write_trees};
use crate::isa::AssembledImage;
use crate::surrogate::{dataset_from_csv, dataset_to_csv, Phase, PhaseState};

use super::{EvalKind, Evolution, EvolutionConfig, HistoryRow, Individual, Metrics};

pub const CHECKPOINT_HEADER: &str = "CGCKPT1";
const HISTORY_COLUMNS: &str = "gen,best,mean,mode,seconds,hall_of_fame,battles";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckpointError {
    #[error("unsupported checkpoint version `{0}`, expected {CHECKPOINT_HEADER}")]
    Version(String),
    #[error("checkpoint section [{section}]: {message}")]
    Malformed { section: String, message: String },
}

fn malformed(section: &str, message: impl std::fmt::Display) -> CheckpointError {
    CheckpointError::Malformed {
        section: section.to_string(),
        message: message.to_string(),
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{:02x}", b)).collect()
}

fn unhex(s: &str) -> Option<Vec<u8>> {
    if !s.len().is_multiple_of(2) {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
        .collect()
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or("-".to_string(), T::to_string)
}

fn metrics_line(m: &Metrics) -> String {
    format!(
        "{} {} {} {} {} {} {} {} {} {}",
        m.avg_score,
        m.avg_reached_round,
        m.avg_written_bytes,
        m.writing_rate,
        m.games,
        m.per_part_written[0],
        m.per_part_written[1],
        m.per_part_lifetime[0],
        m.per_part_lifetime[1],
        m.placement_failures
    )
}

fn parse_metrics(cells: &[&str]) -> Option<Metrics> {
    if cells.len() != 10 {
        return None;
    }
    let f = |i: usize| cells[i].parse::<f64>().ok();
    Some(Metrics {
        avg_score: f(0)?,
        avg_reached_round: f(1)?,
        avg_written_bytes: f(2)?,
        writing_rate: f(3)?,
        games: cells[4].parse().ok()?,
        per_part_written: [f(5)?, f(6)?],
        per_part_lifetime: [f(7)?, f(8)?],
        placement_failures: cells[9].parse().ok()?,
    })
}

/// One line per individual: `kind fitness metrics...`, with `-` for
/// missing values.
fn eval_lines(inds: &[Individual]) -> String {
    inds.iter()
        .map(|i| {
            let m = i.metrics.as_ref().map_or("-".to_string(), metrics_line);
            format!("{} {} {}\n", i.eval_kind.name(), opt(&i.fitness), m)
        })
        .collect()
}

fn parse_individuals(
    g: &crate::grammar::Grammar,
    section: &str,
    trees: &str,
    evals: &str,
) -> Result<Vec<Individual>, CheckpointError> {
    let trees = parse_trees(g, trees).map_err(|e| malformed(section, e))?;
    let evals: Vec<&str> = evals.lines().filter(|l| !l.trim().is_empty()).collect();
    if trees.len() != 2 * evals.len() {
        return Err(malformed(section, "tree and evaluation counts disagree"));
    }
    let mut out = Vec::with_capacity(evals.len());
    for (k, line) in evals.iter().enumerate() {
        let cells: Vec<&str> = line.split_whitespace().collect();
        let bad = || malformed(section, format!("bad evaluation line {}", k + 1));
        if cells.len() < 3 {
            return Err(bad());
        }
        let eval_kind = EvalKind::parse(cells[0]).ok_or_else(bad)?;
        let fitness = match cells[1] {
            "-" => None,
            v => Some(v.parse().map_err(|_| bad())?),
        };
        let metrics = match cells[2..] {
            ["-"] => None,
            ref m => Some(parse_metrics(m).ok_or_else(bad)?),
        };
        out.push(Individual {
            parts: [trees[2 * k].clone(), trees[2 * k + 1].clone()],
            metrics,
            fitness,
            eval_kind,
        });
    }
    Ok(out)
}

impl Evolution {
    pub fn to_checkpoint(&self) -> String {
        let g = &self.grammar;
        let mut out = format!("{}\n[config]\n", CHECKPOINT_HEADER);
        for (k, v) in self.cfg.entries() {
            out.push_str(&format!("{} = {}\n", k, v));
        }
        out.push_str("[state]\n");
        out.push_str(&format!("generation = {}\n", self.generation));
        out.push_str(&format!("battles = {}\n", self.battles));
        out.push_str(&format!("rng_seed = {}\n", hex(&self.rng.get_seed())));
        out.push_str(&format!("rng_stream = {}\n", self.rng.get_stream()));
        out.push_str(&format!("rng_word_pos = {}\n", self.rng.get_word_pos()));
        if let Some(s) = &self.surrogate {
            out.push_str(&format!("phase = {}\n", s.phase.name()));
            out.push_str(&format!("switched = {}\n", s.switched));
        }
        out.push_str("[adversary]\n");
        for img in &self.adversary {
            out.push_str(&format!("{} {}\n", img.start_offset, hex(&img.bytes)));
        }
        let trees = |inds: &[Individual]| {
            let all: Vec<_> = inds.iter().flat_map(|i| i.parts.iter().cloned()).collect();
            write_trees(g, &all)
        };
        out.push_str("[population]\n");
        out.push_str(&trees(&self.population));
        out.push_str("[population_eval]\n");
        out.push_str(&eval_lines(&self.population));
        out.push_str("[hall_of_fame]\n");
        out.push_str(&trees(&self.hall_of_fame));
        out.push_str("[hall_of_fame_eval]\n");
        out.push_str(&eval_lines(&self.hall_of_fame));
        if let Some(s) = &self.surrogate {
            out.push_str("[dataset]\n");
            out.push_str(&dataset_to_csv(&s.dataset));
        }
        out.push_str("[history]\n");
        out.push_str(HISTORY_COLUMNS);
        out.push('\n');
        for r in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.generation,
                r.best,
                r.mean,
                r.mode.name(),
                r.seconds,
                r.hall_of_fame,
                r.battles
            ));
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Evolution, CheckpointError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("").trim();
        if header != CHECKPOINT_HEADER {
            return Err(CheckpointError::Version(header.to_string()));
        }
        let mut sections: HashMap<String, String> = HashMap::new();
        let mut current: Option<String> = None;
        for line in lines {
            let t = line.trim();
            if t.starts_with('[') && t.ends_with(']') && !t.contains(',') {
                let name = t[1..t.len() - 1].to_string();
                sections.insert(name.clone(), String::new());
                current = Some(name);
            } else if let Some(name) = &current {
                let body = sections.get_mut(name).expect("section created on its header");
                body.push_str(line);
                body.push('\n');
            } else if !t.is_empty() {
                return Err(malformed("", "text before the first section"));
            }
        }
        let section = |name: &str| sections.get(name).ok_or_else(|| malformed(name, "missing"));
        let pairs = |name: &str| -> Result<Vec<(String, String)>, CheckpointError> {
            section(name)?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| {
                    let (k, v) = l.split_once('=').ok_or_else(|| malformed(name, format!("bad line `{}`", l)))?;
                    Ok((k.trim().to_string(), v.trim().to_string()))
                })
                .collect()
        };

        let mut cfg = EvolutionConfig::default();
        for (k, v) in pairs("config")? {
            if !cfg.set(&k, &v).map_err(|e| malformed("config", e))? {
                return Err(malformed("config", format!("unknown key `{}`", k)));
            }
        }
        let state: HashMap<String, String> = pairs("state")?.into_iter().collect();
        let get = |k: &str| state.get(k).ok_or_else(|| malformed("state", format!("missing `{}`", k)));
        let num = |k: &str| -> Result<u128, CheckpointError> {
            get(k)?.parse().map_err(|_| malformed("state", format!("bad `{}`", k)))
        };
        let seed: [u8; 32] = unhex(get("rng_seed")?)
            .and_then(|v| v.try_into().ok())
            .ok_or_else(|| malformed("state", "bad `rng_seed`"))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(num("rng_stream")? as u64);
        rng.set_word_pos(num("rng_word_pos")?);

        let mut adversary = Vec::new();
        for line in section("adversary")?.lines().filter(|l| !l.trim().is_empty()) {
            let bad = || malformed("adversary", "expected `start_offset hex`");
            let (off, bytes) = line.trim().split_once(' ').ok_or_else(bad)?;
            let mut img = AssembledImage::from_bytes(unhex(bytes).ok_or_else(bad)?);
            img.start_offset = off.parse().map_err(|_| bad())?;
            img.symbols.insert("@start".into(), img.start_offset);
            adversary.push(img);
        }

        let g = default_grammar(cfg.random_patterns);
        let population = parse_individuals(&g, "population", section("population")?, section("population_eval")?)?;
        let hall_of_fame =
            parse_individuals(&g, "hall_of_fame", section("hall_of_fame")?, section("hall_of_fame_eval")?)?;

        let surrogate = if cfg.surrogate {
            let dataset = dataset_from_csv(section("dataset")?).map_err(|e| malformed("dataset", e))?;
            let phase = Phase::parse(get("phase")?).ok_or_else(|| malformed("state", "bad `phase`"))?;
            let switched = get("switched")? == "true";
            Some(PhaseState::restore(dataset, phase, switched))
        } else {
            None
        };

        let mut history = Vec::new();
        let mut rows = section("history")?.lines().filter(|l| !l.trim().is_empty());
        if rows.next().map(str::trim) != Some(HISTORY_COLUMNS) {
            return Err(malformed("history", "missing column header"));
        }
        for (i, row) in rows.enumerate() {
            let bad = || malformed("history", format!("bad row {}", i + 1));
            let c: Vec<&str> = row.split(',').collect();
            if c.len() != 7 {
                return Err(bad());
            }
            let f = |k: usize| c[k].trim().parse::<f64>().map_err(|_| bad());
            history.push(HistoryRow {
                generation: c[0].trim().parse().map_err(|_| bad())?,
                best: f(1)?,
                mean: f(2)?,
                mode: Phase::parse(c[3].trim()).ok_or_else(bad)?,
                seconds: f(4)?,
                hall_of_fame: f(5)?,
                battles: c[6].trim().parse().map_err(|_| bad())?,
            });
        }

        Ok(Evolution {
            generation: num("generation")? as u32,
            battles: num("battles")? as u64,
            cfg,
            grammar: g,
            adversary,
            population,
            history,
            hall_of_fame,
            surrogate,
            rng,
        })
    }
}
