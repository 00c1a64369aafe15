//! The `cgforge` command line: assembling, battles and evolution runs.

pub mod adversaries;
mod config;

pub use config::{RunConfig, CHECKPOINT_FILE, HISTORY_FILE};

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::engine::{arena_ppm, battle_log_rows, Battle, BattleConfig, PlayerSpec, BATTLE_LOG_HEADER};
use crate::evolution::{history_csv, CheckpointError, Evolution};
use crate::isa::{assemble, disassemble, AssembledImage};

pub const SEED_ENV: &str = "CGFORGE_SEED";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, unreadable or invalid input files.
    #[error("{0}")]
    Input(String),
    /// A checkpoint that cannot be resumed.
    #[error("{0}")]
    State(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::State(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Input(format!("{}: {}", path.display(), e)))
}

fn write(path: &Path, data: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("{}: {}", dir.display(), e)))?;
    }
    fs::write(path, data).map_err(|e| CliError::Internal(format!("{}: {}", path.display(), e)))
}

#[derive(Debug, Parser)]
#[command(name = "cgforge", version, about = "Evolve 16-bit x86 survivors for a shared-memory arena")]
pub struct Cli {
    /// Worker threads for battles (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assemble a survivor source file into a raw image.
    Assemble {
        input: PathBuf,
        /// Output path (default: input with a .bin extension).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print a raw image as assembly.
    Disassemble {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a series of battles between two survivors.
    Battle {
        /// `.asm` or `.bin` path, two comma-separated paths for a two-part
        /// survivor, or `builtin:imp` / `builtin:bomber`.
        a: String,
        b: String,
        #[arg(long, default_value_t = 200)]
        games: usize,
        /// Defaults to $CGFORGE_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = crate::engine::DEFAULT_MAX_ROUNDS)]
        max_rounds: u32,
        /// Battle log CSV.
        #[arg(long, default_value = "battle_log.csv")]
        log: PathBuf,
        /// Write each battle's final arena as a PPM image here.
        #[arg(long)]
        snapshot_dir: Option<PathBuf>,
    },
    /// Start an evolution run from a `key = value` config file.
    Evolve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Continue a run from its checkpoint.
    Resume {
        #[arg(long)]
        checkpoint: PathBuf,
        /// New adversary; `builtin:hunter` targets the current best survivor.
        #[arg(long)]
        adversary: Option<String>,
        /// Run this many more generations.
        #[arg(long)]
        generations: Option<u32>,
        /// Output directory (default: the checkpoint's directory).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Assemble { input, output } => {
            let out = output.unwrap_or_else(|| input.with_extension("bin"));
            cmd_assemble(&input, &out)
        }
        Command::Disassemble { input, output } => {
            let text = cmd_disassemble(&input)?;
            match output {
                Some(p) => write(&p, text),
                None => {
                    print!("{}", text);
                    Ok(())
                }
            }
        }
        Command::Battle {
            a,
            b,
            games,
            seed,
            max_rounds,
            log,
            snapshot_dir,
        } => {
            let seed = match seed {
                Some(s) => s,
                None => env_seed()?.unwrap_or(0),
            };
            let avg = cmd_battle(&a, &b, games, seed, max_rounds, &log, snapshot_dir.as_deref())?;
            println!("avg_score a={:.6} b={:.6}", avg[0], avg[1]);
            Ok(())
        }
        Command::Evolve { config } => cmd_evolve(&config).map(|_| ()),
        Command::Resume {
            checkpoint,
            adversary,
            generations,
            out_dir,
        } => cmd_resume(&checkpoint, adversary.as_deref(), generations, out_dir.as_deref()).map(|_| ()),
    })
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Input(format!("{} must be an unsigned integer", SEED_ENV))),
        Err(_) => Ok(None),
    }
}

pub fn cmd_assemble(input: &Path, output: &Path) -> Result<(), CliError> {
    let src = String::from_utf8(read(input)?).map_err(|_| CliError::Input(format!("{}: not UTF-8", input.display())))?;
    let img = assemble(&src).map_err(|e| CliError::Input(format!("{}: {}", input.display(), e)))?;
    write(output, &img.bytes)
}

pub fn cmd_disassemble(input: &Path) -> Result<String, CliError> {
    Ok(disassemble(&read(input)?, 0))
}

/// Loads one survivor part from an `.asm` source or a raw image.
pub fn load_part(path: &Path) -> Result<AssembledImage, CliError> {
    let data = read(path)?;
    if path.extension().is_some_and(|e| e == "asm") {
        let src = String::from_utf8(data).map_err(|_| CliError::Input(format!("{}: not UTF-8", path.display())))?;
        assemble(&src).map_err(|e| CliError::Input(format!("{}: {}", path.display(), e)))
    } else if data.len() > crate::isa::MAX_IMAGE_LEN {
        Err(CliError::Input(format!(
            "{}: image is {} bytes, limit is 512 bytes",
            path.display(),
            data.len()
        )))
    } else {
        Ok(AssembledImage::from_bytes(data))
    }
}

/// Resolves a survivor spec: `builtin:imp`, `builtin:bomber`, or one or
/// two comma-separated part paths.
pub fn load_survivor(spec: &str) -> Result<Vec<AssembledImage>, CliError> {
    match spec {
        "builtin:imp" => return Ok(vec![adversaries::imp()]),
        "builtin:bomber" => return Ok(vec![adversaries::bomber()]),
        s if s.starts_with("builtin:") => return Err(CliError::Input(format!("unknown built-in `{}`", s))),
        _ => {}
    }
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() > 2 || parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Input(format!("`{}`: expected one or two part paths", spec)));
    }
    parts.iter().map(|p| load_part(Path::new(p))).collect()
}

/// Plays `games` battles of `a` against `b`, battle `i` seeded with
/// `battle_seed(seed, i)`, writes the log and optional snapshots and
/// returns the average scores.
pub fn cmd_battle(
    a: &str,
    b: &str,
    games: usize,
    seed: u64,
    max_rounds: u32,
    log: &Path,
    snapshot_dir: Option<&Path>,
) -> Result<[f64; 2], CliError> {
    let players = [
        PlayerSpec::new("a", load_survivor(a)?),
        PlayerSpec::new("b", load_survivor(b)?),
    ];
    let config = BattleConfig {
        max_rounds,
        ..BattleConfig::default()
    };
    let outcomes: Vec<_> = (0..games)
        .into_par_iter()
        .map(|i| -> Result<_, CliError> {
            let mut battle = Battle::new(&players, crate::evolution::battle_seed(seed, i as u64), config)
                .map_err(|e| CliError::Input(format!("battle {}: {}", i, e)))?;
            let result = battle.run();
            let ppm = snapshot_dir.map(|_| arena_ppm(battle.arena()));
            Ok((result, ppm))
        })
        .collect::<Result<_, _>>()?;

    let mut csv = format!("{}\n", BATTLE_LOG_HEADER);
    let mut total = [0.0; 2];
    for (i, (result, ppm)) in outcomes.iter().enumerate() {
        csv.push_str(&battle_log_rows(i, result));
        total[0] += result.scores[0];
        total[1] += result.scores[1];
        if let (Some(dir), Some(ppm)) = (snapshot_dir, ppm) {
            write(&dir.join(format!("battle_{:04}.ppm", i)), ppm)?;
        }
    }
    write(log, csv)?;
    let n = games.max(1) as f64;
    Ok([total[0] / n, total[1] / n])
}

fn resolve_adversary(spec: &str, evo: Option<&Evolution>) -> Result<Vec<AssembledImage>, CliError> {
    if spec != "builtin:hunter" {
        return load_survivor(spec);
    }
    let evo = evo.ok_or_else(|| CliError::Input("builtin:hunter needs a run to target".into()))?;
    Ok(vec![hunter_for(evo)?])
}

/// An antivirus for the hall-of-fame best and the current population.
pub fn hunter_for(evo: &Evolution) -> Result<AssembledImage, CliError> {
    let survivors = evo
        .best()
        .into_iter()
        .chain(&evo.population)
        .map(|ind| ind.images(&evo.grammar).map(|imgs| imgs.to_vec()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Internal(format!("survivor does not assemble: {}", e)))?;
    if survivors.is_empty() {
        return Err(CliError::State("no survivor to target".into()));
    }
    Ok(adversaries::antivirus(&survivors))
}

/// Writes history, checkpoint and hall-of-fame sources for `evo`.
fn save_run(evo: &Evolution, out_dir: &Path) -> Result<(), CliError> {
    write(&out_dir.join(HISTORY_FILE), history_csv(&evo.history))?;
    let ckpt = out_dir.join(CHECKPOINT_FILE);
    let tmp = ckpt.with_extension("tmp");
    write(&tmp, evo.to_checkpoint())?;
    fs::rename(&tmp, &ckpt).map_err(|e| CliError::Internal(format!("{}: {}", ckpt.display(), e)))?;
    let hof = out_dir.join("hall_of_fame");
    for (k, ind) in evo.hall_of_fame.iter().enumerate() {
        for (p, src) in ind.sources(&evo.grammar).iter().enumerate() {
            let header = format!(
                "; hall of fame entry {}, part {}, fitness {}\n",
                k,
                p + 1,
                ind.fitness.unwrap_or(f64::NAN)
            );
            write(&hof.join(format!("{:03}_part{}.asm", k, p + 1)), header + src + "\n")?;
        }
    }
    Ok(())
}

fn drive(evo: &mut Evolution, cfg: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let mut failure = None;
    while !evo.is_finished() && failure.is_none() {
        let row = evo.step().clone();
        println!(
            "gen {} best {:.4} mean {:.4} mode {} {:.2}s",
            row.generation,
            row.best,
            row.mean,
            row.mode.name(),
            row.seconds
        );
        if cfg.snapshot_every > 0 && evo.generation.is_multiple_of(cfg.snapshot_every) {
            if let Err(e) = snapshot_best(evo, out_dir) {
                failure = Some(e);
            }
        }
        if cfg.checkpoint_every > 0 && evo.generation.is_multiple_of(cfg.checkpoint_every) {
            if let Err(e) = save_run(evo, out_dir) {
                failure = Some(e);
            }
        }
    }
    match failure {
        Some(e) => Err(e),
        None => save_run(evo, out_dir),
    }
}

/// Final arena of one battle between the current best and the adversary.
fn snapshot_best(evo: &Evolution, out_dir: &Path) -> Result<(), CliError> {
    let Some(best) = evo.best() else {
        return Ok(());
    };
    let images = best
        .images(&evo.grammar)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let players = [
        PlayerSpec::new("evolved", images.to_vec()),
        PlayerSpec::new("adversary", evo.adversary.clone()),
    ];
    let config = BattleConfig {
        max_rounds: evo.cfg.max_rounds,
        ..BattleConfig::default()
    };
    let seed = crate::evolution::battle_seed(evo.cfg.seed, evo.generation as u64);
    let mut battle = match Battle::new(&players, seed, config) {
        Ok(b) => b,
        Err(_) => return Ok(()),
    };
    battle.run();
    write(
        &out_dir.join("snapshots").join(format!("gen_{:05}.ppm", evo.generation)),
        arena_ppm(battle.arena()),
    )
}

/// Runs a fresh evolution as configured in `config_path`.
pub fn cmd_evolve(config_path: &Path) -> Result<Evolution, CliError> {
    let text = String::from_utf8(read(config_path)?)
        .map_err(|_| CliError::Input(format!("{}: not UTF-8", config_path.display())))?;
    let mut cfg = RunConfig::parse(&text).map_err(CliError::Input)?;
    if let Some(seed) = env_seed()? {
        cfg.evolution.seed = seed;
    }
    if let Some(n) = cfg.threads {
        return rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))?
            .install(|| evolve_with(&cfg, &text));
    }
    evolve_with(&cfg, &text)
}

fn evolve_with(cfg: &RunConfig, text: &str) -> Result<Evolution, CliError> {
    let adversary = resolve_adversary(&cfg.adversary, None)?;
    write(&cfg.out_dir.join("config"), text)?;
    let mut evo = Evolution::new(cfg.evolution.clone(), adversary).map_err(CliError::Input)?;
    drive(&mut evo, cfg, &cfg.out_dir)?;
    Ok(evo)
}

/// Restores a run, optionally swaps its adversary, and continues it.
pub fn cmd_resume(
    checkpoint: &Path,
    adversary: Option<&str>,
    generations: Option<u32>,
    out_dir: Option<&Path>,
) -> Result<Evolution, CliError> {
    let text = String::from_utf8(read(checkpoint)?)
        .map_err(|_| CliError::State(format!("{}: not UTF-8", checkpoint.display())))?;
    let mut evo = Evolution::from_checkpoint(&text)
        .map_err(|e: CheckpointError| CliError::State(format!("{}: {}", checkpoint.display(), e)))?;
    let out_dir = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| checkpoint.parent().map(Path::to_path_buf).unwrap_or_default());
    if let Some(spec) = adversary {
        let new = resolve_adversary(spec, Some(&evo))?;
        evo.swap_adversary(new);
    }
    if let Some(n) = generations {
        evo.cfg.max_generations = evo.generation + n;
    }
    let cfg = RunConfig {
        evolution: evo.cfg.clone(),
        out_dir: out_dir.clone(),
        ..RunConfig::default()
    };
    drive(&mut evo, &cfg, &out_dir)?;
    Ok(evo)
}
