//! Linear-sweep disassembler producing re-assemblable source.

use std::collections::BTreeMap;

use super::decode::decode;
use super::instruction::{Instruction, Mnemonic, Operand};

/// Branch target of a relative instruction ending at `end`, as an offset
/// into the image (may fall outside it).
fn rel_target(instr: &Instruction, end: usize) -> Option<i64> {
    match instr.operands.first()? {
        Operand::Rel8(d) => Some(end as i64 + d as i64),
        Operand::Rel16(d) => Some(end as i64 + d as i64),
        _ => None,
    }
}

/// Renders one instruction; relative branches get `target` in place of the
/// `$`-relative offset.
pub fn render_instruction(instr: &Instruction, target: Option<&str>) -> String {
    match (target, instr.operands.first()) {
        (Some(t), Some(Operand::Rel16(_))) if instr.mnemonic == Mnemonic::Jmp => {
            format!("jmp near {}", t)
        }
        (Some(t), Some(Operand::Rel8(_) | Operand::Rel16(_))) => {
            format!("{} {}", instr.mnemonic.name(), t)
        }
        _ => instr.to_string(),
    }
}

/// Disassembles `bytes` loaded at arena offset `base`.
///
/// Branch targets that land on an instruction boundary inside the image get
/// positional labels `l1`, `l2`, ...; others are written as absolute
/// offsets, so `assemble_at(text, base)` reproduces the image.
pub fn disassemble(bytes: &[u8], base: u16) -> String {
    let mut items: Vec<(usize, Option<Instruction>)> = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        match decode(bytes, pos) {
            Ok((instr, len)) => {
                items.push((pos, Some(instr)));
                pos += len;
            }
            Err(_) => {
                items.push((pos, None));
                pos += 1;
            }
        }
    }
    let boundaries: std::collections::HashSet<usize> =
        items.iter().map(|(p, _)| *p).chain(std::iter::once(bytes.len())).collect();

    let mut labels: BTreeMap<usize, String> = BTreeMap::new();
    for (i, (p, instr)) in items.iter().enumerate() {
        let Some(instr) = instr else { continue };
        let end = items.get(i + 1).map(|(q, _)| *q).unwrap_or(bytes.len());
        debug_assert!(end > *p);
        if let Some(t) = rel_target(instr, end) {
            if t >= 0 && (t as usize) <= bytes.len() && boundaries.contains(&(t as usize)) {
                labels.insert(t as usize, String::new());
            }
        }
    }
    for (n, name) in labels.values_mut().enumerate() {
        *name = format!("l{}", n + 1);
    }

    let mut out = Vec::new();
    for (i, (p, instr)) in items.iter().enumerate() {
        if let Some(l) = labels.get(p) {
            out.push(format!("{}:", l));
        }
        match instr {
            None => out.push(format!("db 0x{:02x} (illegal)", bytes[*p])),
            Some(instr) => {
                let end = items.get(i + 1).map(|(q, _)| *q).unwrap_or(bytes.len());
                let target = rel_target(instr, end).map(|t| match labels.get(&(t.max(0) as usize)) {
                    Some(l) if t >= 0 => l.clone(),
                    _ => format!("0x{:x}", (base as i64 + t).rem_euclid(65536)),
                });
                out.push(render_instruction(instr, target.as_deref()));
            }
        }
    }
    if let Some(l) = labels.get(&bytes.len()) {
        out.push(format!("{}:", l));
    }
    out.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{assemble, assemble_at};

    #[test]
    fn basics() {
        assert_eq!(disassemble(&[0x90], 0), "nop");
        assert_eq!(disassemble(&[], 0), "");
        assert_eq!(disassemble(&[0x44, 0x01], 0), "inc sp\ndb 0x01 (illegal)");
    }

    #[test]
    fn labels_are_positional() {
        let text = disassemble(&[0xEB, 0xFE], 0);
        assert_eq!(text, "l1:\njmp l1");
        let text = disassemble(&[0x74, 0x01, 0x90, 0xE8, 0xFA, 0xFF], 0);
        assert_eq!(text, "l1:\nje l2\nnop\nl2:\ncall l1");
    }

    #[test]
    fn outside_targets_are_absolute() {
        let bytes = [0xE9, 0x00, 0x10];
        let text = disassemble(&bytes, 0x2000);
        assert_eq!(text, "jmp near 0x3003");
        assert_eq!(assemble_at(&text, 0x2000).unwrap().bytes, bytes);
    }

    #[test]
    fn round_trip() {
        let src = "@start:\nl1:\nmov WORD [di], 0x196\nadd di, 0x100\nloop l1\ndb 0x0f\nrep stosw\njmp near l1\n@end:";
        let img = assemble(src).unwrap();
        let text = disassemble(&img.bytes, 0);
        assert!(text.contains("db 0x0f (illegal)"));
        assert_eq!(assemble(&text).unwrap().bytes, img.bytes);
    }
}
