//! Flat `key = value` run configuration.

use std::path::PathBuf;

use crate::evolution::EvolutionConfig;

pub const HISTORY_FILE: &str = "history.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.cgckpt";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub evolution: EvolutionConfig,
    /// Survivor spec, see [`super::load_survivor`].
    pub adversary: String,
    pub out_dir: PathBuf,
    /// Generations between arena snapshots of the best survivor; 0 is off.
    pub snapshot_every: u32,
    pub checkpoint_every: u32,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            evolution: EvolutionConfig::default(),
            adversary: "builtin:imp".into(),
            out_dir: PathBuf::from("run"),
            snapshot_every: 0,
            checkpoint_every: 50,
            threads: None,
        }
    }
}

impl RunConfig {
    /// Parses `key = value` lines. Blank lines and `#` comments are
    /// skipped; unknown keys are errors.
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |m: String| format!("config line {}: {}", n + 1, m);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| v.parse::<u64>().map_err(|_| at(format!("bad value `{}` for `{}`", v, key)));
            match key {
                "adversary" => cfg.adversary = value.to_string(),
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                "snapshot_every" => cfg.snapshot_every = num(value)? as u32,
                "checkpoint_every" => cfg.checkpoint_every = num(value)? as u32,
                "threads" => cfg.threads = Some(num(value)? as usize),
                _ => {
                    if !cfg.evolution.set(key, value).map_err(at)? {
                        return Err(at(format!("unknown key `{}`", key)));
                    }
                }
            }
        }
        cfg.evolution.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys() {
        let cfg = RunConfig::parse(
            "# desk run\npopulation_size = 24\ngames_per_eval=20\nsurrogate = true\nadversary = builtin:bomber\nout_dir = /tmp/x\nweights = 2,0.2,0.3,0.1\n",
        )
        .unwrap();
        assert_eq!(cfg.evolution.population_size, 24);
        assert_eq!(cfg.evolution.games_per_eval, 20);
        assert!(cfg.evolution.surrogate);
        assert_eq!(cfg.adversary, "builtin:bomber");
        assert_eq!(cfg.out_dir, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.checkpoint_every, 50);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::parse("populaton_size = 3").unwrap_err().contains("unknown key"));
        assert!(RunConfig::parse("p_grow = 1.5").is_err());
        assert!(RunConfig::parse("seed = many").is_err());
        assert!(RunConfig::parse("just words").is_err());
    }

    #[test]
    fn entries_round_trip() {
        let mut e = EvolutionConfig::desk();
        e.seed = 99;
        e.memetic = true;
        let text: String = e.entries().iter().map(|(k, v)| format!("{} = {}\n", k, v)).collect();
        assert_eq!(RunConfig::parse(&text).unwrap().evolution, e);
    }
}
