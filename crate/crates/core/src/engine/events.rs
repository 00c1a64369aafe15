//! Replayable battle event log (`CGEV1`).
//!
//! One event per line, `round op arg...`. Load events carry round 0.

use std::fmt::Write as _;

use super::arena::Owner;

pub const EVENT_LOG_HEADER: &str = "CGEV1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeathCause {
    Illegal,
    AccessViolation,
    DivideError,
}

impl DeathCause {
    fn name(self) -> &'static str {
        match self {
            DeathCause::Illegal => "illegal",
            DeathCause::AccessViolation => "access",
            DeathCause::DivideError => "divide",
        }
    }

    fn parse(s: &str) -> Option<DeathCause> {
        Some(match s {
            "illegal" => DeathCause::Illegal,
            "access" => DeathCause::AccessViolation,
            "divide" => DeathCause::DivideError,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Load { player: usize, part: usize, offset: u16, len: u16 },
    Write { round: u32, player: usize, part: usize, addr: u16, value: u8 },
    Death { round: u32, player: usize, part: usize, cause: DeathCause },
    Int86 { round: u32, player: usize, part: usize, start: u16 },
    Int87 { round: u32, player: usize, part: usize, found: Option<u16> },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("event log line {line}: {message}")]
pub struct EventLogError {
    pub line: usize,
    pub message: String,
}

impl EventLog {
    pub fn push(&mut self, e: Event) {
        self.events.push(e);
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(EVENT_LOG_HEADER);
        out.push('\n');
        for e in &self.events {
            let _ = match *e {
                Event::Load { player, part, offset, len } => {
                    writeln!(out, "0 load {} {} {} {}", player, part, offset, len)
                }
                Event::Write { round, player, part, addr, value } => {
                    writeln!(out, "{} write {} {} {} {}", round, player, part, addr, value)
                }
                Event::Death { round, player, part, cause } => {
                    writeln!(out, "{} death {} {} {}", round, player, part, cause.name())
                }
                Event::Int86 { round, player, part, start } => {
                    writeln!(out, "{} int86 {} {} {}", round, player, part, start)
                }
                Event::Int87 { round, player, part, found } => match found {
                    Some(at) => writeln!(out, "{} int87 {} {} {}", round, player, part, at),
                    None => writeln!(out, "{} int87 {} {} exhausted", round, player, part),
                },
            };
        }
        out
    }

    pub fn parse(text: &str) -> Result<EventLog, EventLogError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == EVENT_LOG_HEADER => {}
            _ => {
                return Err(EventLogError {
                    line: 1,
                    message: format!("expected header {}", EVENT_LOG_HEADER),
                })
            }
        }
        let mut log = EventLog::default();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: &str| EventLogError {
                line: i + 1,
                message: m.to_string(),
            };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() < 4 {
                return Err(bad("too few fields"));
            }
            let num = |k: usize| -> Result<u64, EventLogError> {
                f.get(k)
                    .ok_or_else(|| bad("missing field"))?
                    .parse()
                    .map_err(|_| bad("bad number"))
            };
            let round = num(0)? as u32;
            let player = num(2)? as usize;
            let part = num(3)? as usize;
            if player >= 8 || part >= 2 {
                return Err(bad("player or part out of range"));
            }
            let e = match f[1] {
                "load" => Event::Load {
                    player,
                    part,
                    offset: num(4)? as u16,
                    len: num(5)? as u16,
                },
                "write" => Event::Write {
                    round,
                    player,
                    part,
                    addr: num(4)? as u16,
                    value: num(5)? as u8,
                },
                "death" => Event::Death {
                    round,
                    player,
                    part,
                    cause: f.get(4).and_then(|s| DeathCause::parse(s)).ok_or_else(|| bad("bad cause"))?,
                },
                "int86" => Event::Int86 {
                    round,
                    player,
                    part,
                    start: num(4)? as u16,
                },
                "int87" => Event::Int87 {
                    round,
                    player,
                    part,
                    found: match f.get(4) {
                        Some(&"exhausted") => None,
                        _ => Some(num(4)? as u16),
                    },
                },
                other => return Err(bad(&format!("unknown op `{}`", other))),
            };
            log.push(e);
        }
        Ok(log)
    }

    /// Recomputes every part's new-byte counter from loads and writes alone.
    /// Indexed by `[player][part]`.
    pub fn replay_counters(&self) -> Vec<[u64; 2]> {
        let mut owner = vec![Owner::NONE; 65536];
        let mut counters: Vec<[u64; 2]> = Vec::new();
        let grow = |counters: &mut Vec<[u64; 2]>, p: usize| {
            if counters.len() <= p {
                counters.resize(p + 1, [0, 0]);
            }
        };
        for e in &self.events {
            match *e {
                Event::Load { player, part, offset, len } => {
                    grow(&mut counters, player);
                    for k in 0..len {
                        owner[offset.wrapping_add(k) as usize] = Owner::part(player, part);
                    }
                }
                Event::Write { player, part, addr, .. } => {
                    grow(&mut counters, player);
                    let prev = owner[addr as usize];
                    if prev.is_none() || prev.player() != Some(player) {
                        counters[player][part] += 1;
                    }
                    owner[addr as usize] = Owner::part(player, part);
                }
                _ => {}
            }
        }
        counters
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut log = EventLog::default();
        log.push(Event::Load { player: 0, part: 1, offset: 2048, len: 7 });
        log.push(Event::Write { round: 3, player: 1, part: 0, addr: 9, value: 0xCC });
        log.push(Event::Death { round: 4, player: 0, part: 1, cause: DeathCause::Illegal });
        log.push(Event::Int86 { round: 5, player: 1, part: 1, start: 100 });
        log.push(Event::Int87 { round: 5, player: 1, part: 1, found: None });
        log.push(Event::Int87 { round: 6, player: 1, part: 1, found: Some(77) });
        let text = log.to_text();
        assert!(text.starts_with("CGEV1\n0 load 0 1 2048 7\n3 write 1 0 9 204\n"));
        assert_eq!(EventLog::parse(&text).unwrap(), log);
    }

    #[test]
    fn rejects_missing_header() {
        assert!(EventLog::parse("1 write 0 0 1 1").is_err());
    }

    #[test]
    fn replay_counts_foreign_and_fresh_bytes() {
        let mut log = EventLog::default();
        log.push(Event::Load { player: 0, part: 0, offset: 10, len: 2 });
        log.push(Event::Write { round: 1, player: 0, part: 1, addr: 10, value: 1 });
        log.push(Event::Write { round: 1, player: 1, part: 0, addr: 10, value: 1 });
        log.push(Event::Write { round: 1, player: 1, part: 0, addr: 50, value: 1 });
        let c = log.replay_counters();
        assert_eq!(c, vec![[0, 0], [2, 0]]);
    }
}
