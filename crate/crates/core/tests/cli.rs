use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cgforge::isa::assemble;

fn cgforge(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgforge"))
        .args(args)
        .current_dir(dir)
        .env_remove("CGFORGE_SEED")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const LOOPER: &str = "@start:\nl1:\njmp l1\n@end:\n";

#[test]
fn assemble_and_disassemble_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let src = "@start:\nmov ax, 0xcccc\nmov di, 0x100\nl1:\nstosw\nadd di, 6\njmp l1\n@end:\n";
    fs::write(dir.path().join("s.asm"), src).unwrap();
    let o = cgforge(&["assemble", "s.asm"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let bin = fs::read(dir.path().join("s.bin")).unwrap();
    assert_eq!(bin, assemble(src).unwrap().bytes);

    let o = cgforge(&["disassemble", "s.bin", "-o", "back.asm"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let o = cgforge(&["assemble", "back.asm", "-o", "back.bin"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(dir.path().join("back.bin")).unwrap(), bin);
}

#[test]
fn oversize_and_broken_sources_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("big.asm"), format!("@start:\n{}@end:\n", "nop\n".repeat(600))).unwrap();
    let o = cgforge(&["assemble", "big.asm"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("512"), "{}", stderr(&o));

    fs::write(dir.path().join("bad.asm"), "@start:\nnop\nfrobnicate ax\n@end:\n").unwrap();
    let o = cgforge(&["assemble", "bad.asm"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = cgforge(&["assemble", "missing.asm"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn battle_reports_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("loop.asm"), LOOPER).unwrap();
    fs::write(dir.path().join("dud.bin"), [0x0Fu8]).unwrap();
    let args = |log: &'static str| {
        vec!["battle", "loop.asm", "dud.bin", "--games", "12", "--seed", "5", "--log", log, "--snapshot-dir", "snaps"]
    };
    let o = cgforge(&args("a.csv"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("avg_score a=1.000000 b=0.000000"), "{}", stdout(&o));
    let o = cgforge(&args("b.csv"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next(), Some(cgforge::engine::BATTLE_LOG_HEADER));
    assert_eq!(text.lines().count(), 1 + 12 * 2);
    let ppm = fs::read(dir.path().join("snaps/battle_0011.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n256 256\n255\n"));
    assert_eq!(ppm.len(), 15 + 65536 * 3);

    let o = cgforge(&["battle", "builtin:bomber", "nope.asm"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

const RUN: &str = "population_size = 8
games_per_eval = 4
probe_games = 2
max_rounds = 3000
adversary = builtin:bomber
out_dir = out
";

fn history_rows(dir: &Path) -> Vec<String> {
    fs::read_to_string(dir.join("history.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

#[test]
fn evolve_writes_history_checkpoint_and_hall_of_fame() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("# three generations\n{}max_generations = 3\nseed = 11\n", RUN);
    fs::write(dir.path().join("run.cfg"), &cfg).unwrap();
    let o = cgforge(&["evolve", "--config", "run.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("out");
    assert_eq!(fs::read_to_string(out.join("config")).unwrap(), cfg);
    let hist = fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(hist.lines().next(), Some("gen,best,mean,mode,seconds"));
    assert_eq!(hist.lines().count(), 4);
    let ckpt = fs::read_to_string(out.join("checkpoint.cgckpt")).unwrap();
    assert!(ckpt.starts_with("CGCKPT1\n"));
    assert!(ckpt.contains("\nseed = 11\n"));
    assert!(ckpt.contains("\nCGAST1\n"));
    let src = fs::read_to_string(out.join("hall_of_fame/000_part1.asm")).unwrap();
    assert!(assemble(&src).unwrap().len() <= 512);
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), format!("{}max_generations = 1\nseed = 11\n", RUN)).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cgforge"))
        .args(["evolve", "--config", "run.cfg"])
        .current_dir(dir.path())
        .env("CGFORGE_SEED", "4242")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ckpt = fs::read_to_string(dir.path().join("out/checkpoint.cgckpt")).unwrap();
    assert!(ckpt.contains("\nseed = 4242\n"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "population_size = 8\ncolour = blue\n").unwrap();
    let o = cgforge(&["evolve", "--config", "bad.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown key `colour`"));
    let o = cgforge(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn resume_continues_the_same_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let whole = dir.path().join("whole");
    let split = dir.path().join("split");
    for d in [&whole, &split] {
        fs::create_dir(d).unwrap();
    }
    fs::write(whole.join("run.cfg"), format!("{}max_generations = 10\nseed = 3\n", RUN)).unwrap();
    fs::write(split.join("run.cfg"), format!("{}max_generations = 4\nseed = 3\n", RUN)).unwrap();
    assert_eq!(cgforge(&["evolve", "--config", "run.cfg"], &whole).status.code(), Some(0));
    assert_eq!(cgforge(&["evolve", "--config", "run.cfg"], &split).status.code(), Some(0));
    assert_eq!(history_rows(&split.join("out")).len(), 4);
    let o = cgforge(
        &["resume", "--checkpoint", "out/checkpoint.cgckpt", "--generations", "6"],
        &split,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(history_rows(&split.join("out")), history_rows(&whole.join("out")));
    let population = |d: &Path| {
        let c = fs::read_to_string(d.join("out/checkpoint.cgckpt")).unwrap();
        let start = c.find("[population]").unwrap();
        let end = c.find("[hall_of_fame]").unwrap();
        c[start..end].to_string()
    };
    assert_eq!(population(&split), population(&whole));
}

#[test]
fn resume_with_a_new_adversary_reevaluates_everything() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        format!("{}max_generations = 4\nsurrogate = true\nseed = 8\n", RUN),
    )
    .unwrap();
    assert_eq!(cgforge(&["evolve", "--config", "run.cfg"], dir.path()).status.code(), Some(0));
    let o = cgforge(
        &["resume", "--checkpoint", "out/checkpoint.cgckpt", "--adversary", "builtin:hunter", "--generations", "2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = history_rows(&dir.path().join("out"));
    assert_eq!(rows.len(), 6);
    assert!(rows[4].starts_with("4,") && rows[4].ends_with(",actual"), "{}", rows[4]);
    let ckpt = fs::read_to_string(dir.path().join("out/checkpoint.cgckpt")).unwrap();
    let adversary = ckpt.split("[adversary]\n").nth(1).unwrap().lines().next().unwrap();
    assert!(adversary.contains("cd87"), "the hunter issues int 0x87");
}

#[test]
fn checkpoint_version_mismatch_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("old.cgckpt"), "CGCKPT0\n[config]\n").unwrap();
    let o = cgforge(&["resume", "--checkpoint", "old.cgckpt"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("CGCKPT0"));
}
