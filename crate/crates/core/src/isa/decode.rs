//! Byte-level decoder for the supported subset.

use super::encode::{encode_inline, plain_from_opcode};
use super::instruction::{
    Base, Instruction, MemRef, Mnemonic, Operand, RepPrefix, Register, ShiftCount, Width,
};

/// The byte sequence at the decode position is not a supported encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Illegal;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn byte(&mut self) -> Result<u8, Illegal> {
        let b = *self.bytes.get(self.pos).ok_or(Illegal)?;
        self.pos += 1;
        Ok(b)
    }

    fn word(&mut self) -> Result<u16, Illegal> {
        let lo = self.byte()? as u16;
        let hi = self.byte()? as u16;
        Ok(lo | (hi << 8))
    }

    /// Reads a ModRM byte and its displacement; returns the `reg` field and
    /// the r/m operand.
    fn modrm(&mut self, width: Width) -> Result<(u8, Operand), Illegal> {
        let b = self.byte()?;
        let (md, reg, rm) = (b >> 6, (b >> 3) & 7, b & 7);
        if md == 3 {
            return Ok((reg, Operand::Reg(Register::general(rm, width))));
        }
        let base = Base::from_rm(rm).ok_or(Illegal)?;
        let disp = match md {
            0 if base == Base::Bp => return Err(Illegal),
            0 => 0,
            1 => self.byte()? as i8 as i16,
            _ => self.word()? as i16,
        };
        Ok((reg, Operand::Mem(MemRef { base, disp, width })))
    }
}

fn width_of(op: u8) -> Width {
    if op & 1 == 0 {
        Width::Byte
    } else {
        Width::Word
    }
}

/// Decodes one instruction at `at`. Only canonical encodings are accepted:
/// a byte pattern decodes iff re-encoding the result reproduces it.
pub fn decode(bytes: &[u8], at: usize) -> Result<(Instruction, usize), Illegal> {
    if at >= bytes.len() {
        return Err(Illegal);
    }
    let mut cur = Cursor { bytes, pos: at };
    let instr = decode_raw(&mut cur)?;
    let len = cur.pos - at;
    let canonical = encode_inline(&instr).map_err(|_| Illegal)?;
    if canonical.as_slice() != &bytes[at..cur.pos] {
        return Err(Illegal);
    }
    Ok((instr, len))
}

fn decode_raw(cur: &mut Cursor<'_>) -> Result<Instruction, Illegal> {
    use Mnemonic::*;
    let op = cur.byte()?;
    let two = |m, a, b| Ok(Instruction::binary(m, a, b));
    let one = |m, a| Ok(Instruction::unary(m, a));

    if let Some(m) = plain_from_opcode(op) {
        return Ok(Instruction::plain(m));
    }

    match op {
        // ALU families 00..3F, minus segment prefixes/BCD/push-pop segment.
        0x00..=0x3F if op & 7 < 6 => {
            let m = Mnemonic::alu_from_index(op >> 3);
            let w = width_of(op);
            match op & 7 {
                0 | 1 => {
                    let (reg, rm) = cur.modrm(w)?;
                    two(m, rm, Operand::Reg(Register::general(reg, w)))
                }
                2 | 3 => {
                    let (reg, rm) = cur.modrm(w)?;
                    two(m, Operand::Reg(Register::general(reg, w)), rm)
                }
                4 => two(m, Operand::Reg(Register::Al), Operand::Imm(cur.byte()? as u16)),
                _ => two(m, Operand::Reg(Register::Ax), Operand::Imm(cur.word()?)),
            }
        }
        0x06 | 0x0E | 0x16 | 0x1E => one(Push, Operand::Reg(Register::SEGMENT[(op >> 3) as usize])),
        0x07 => one(Pop, Operand::Reg(Register::Es)),
        0x1F => one(Pop, Operand::Reg(Register::Ds)),
        0x40..=0x47 => one(Inc, Operand::Reg(Register::word(op))),
        0x48..=0x4F => one(Dec, Operand::Reg(Register::word(op))),
        0x50..=0x57 => one(Push, Operand::Reg(Register::word(op))),
        0x58..=0x5F => one(Pop, Operand::Reg(Register::word(op))),
        0x70..=0x7F => one(
            Mnemonic::from_condition_code(op & 0xF),
            Operand::Rel8(cur.byte()? as i8),
        ),
        0x80 | 0x81 | 0x83 => {
            let w = if op == 0x80 { Width::Byte } else { Width::Word };
            let (reg, rm) = cur.modrm(w)?;
            let imm = match op {
                0x80 => cur.byte()? as u16,
                0x81 => cur.word()?,
                _ => cur.byte()? as i8 as i16 as u16,
            };
            two(Mnemonic::alu_from_index(reg), rm, Operand::Imm(imm))
        }
        0x84..=0x89 => {
            let w = width_of(op);
            let (reg, rm) = cur.modrm(w)?;
            let m = match op {
                0x84 | 0x85 => Test,
                0x86 | 0x87 => Xchg,
                _ => Mov,
            };
            two(m, rm, Operand::Reg(Register::general(reg, w)))
        }
        0x8A | 0x8B => {
            let w = width_of(op);
            let (reg, rm) = cur.modrm(w)?;
            two(Mov, Operand::Reg(Register::general(reg, w)), rm)
        }
        0x8D | 0xC4 | 0xC5 => {
            let (reg, rm) = cur.modrm(Width::Word)?;
            if !matches!(rm, Operand::Mem(_)) {
                return Err(Illegal);
            }
            let m = match op {
                0x8D => Lea,
                0xC4 => Les,
                _ => Lds,
            };
            two(m, Operand::Reg(Register::word(reg)), rm)
        }
        0x8F => {
            let (reg, rm) = cur.modrm(Width::Word)?;
            if reg != 0 || !matches!(rm, Operand::Mem(_)) {
                return Err(Illegal);
            }
            one(Pop, rm)
        }
        0x91..=0x97 => two(Xchg, Operand::Reg(Register::Ax), Operand::Reg(Register::word(op))),
        0xA8 => two(Test, Operand::Reg(Register::Al), Operand::Imm(cur.byte()? as u16)),
        0xA9 => two(Test, Operand::Reg(Register::Ax), Operand::Imm(cur.word()?)),
        0xB0..=0xB7 => two(Mov, Operand::Reg(Register::byte(op)), Operand::Imm(cur.byte()? as u16)),
        0xB8..=0xBF => two(Mov, Operand::Reg(Register::word(op)), Operand::Imm(cur.word()?)),
        0xC6 | 0xC7 => {
            let w = width_of(op);
            let (reg, rm) = cur.modrm(w)?;
            if reg != 0 || !matches!(rm, Operand::Mem(_)) {
                return Err(Illegal);
            }
            let imm = match w {
                Width::Byte => cur.byte()? as u16,
                Width::Word => cur.word()?,
            };
            two(Mov, rm, Operand::Imm(imm))
        }
        0xCD => match cur.byte()? {
            v @ (0x86 | 0x87) => one(Int, Operand::Imm(v as u16)),
            _ => Err(Illegal),
        },
        0xD0..=0xD3 => {
            let w = width_of(op);
            let (reg, rm) = cur.modrm(w)?;
            let m = match reg {
                0 => Rol,
                1 => Ror,
                2 => Rcl,
                3 => Rcr,
                4 => Shl,
                5 => Shr,
                7 => Sar,
                _ => return Err(Illegal),
            };
            let count = if op < 0xD2 { ShiftCount::One } else { ShiftCount::Cl };
            two(m, rm, Operand::Count(count))
        }
        0xE0..=0xE3 => {
            let m = [Loopnz, Loopz, Loop, Jcxz][(op - 0xE0) as usize];
            one(m, Operand::Rel8(cur.byte()? as i8))
        }
        0xE8 => one(Call, Operand::Rel16(cur.word()? as i16)),
        0xE9 => one(Jmp, Operand::Rel16(cur.word()? as i16)),
        0xEB => one(Jmp, Operand::Rel8(cur.byte()? as i8)),
        0xF2 | 0xF3 => {
            let next = cur.byte()?;
            let m = plain_from_opcode(next).ok_or(Illegal)?;
            if !m.is_plain_op() {
                return Err(Illegal);
            }
            let rep = if op == 0xF3 { RepPrefix::Rep } else { RepPrefix::Repne };
            Ok(Instruction::plain(m).with_rep(rep))
        }
        0xF6 | 0xF7 => {
            let w = width_of(op);
            let (reg, rm) = cur.modrm(w)?;
            match reg {
                0 => {
                    let imm = match w {
                        Width::Byte => cur.byte()? as u16,
                        Width::Word => cur.word()?,
                    };
                    two(Test, rm, Operand::Imm(imm))
                }
                2 => one(Not, rm),
                3 => one(Neg, rm),
                4 => one(Mul, rm),
                6 => one(Div, rm),
                _ => Err(Illegal),
            }
        }
        0xFE => {
            let (reg, rm) = cur.modrm(Width::Byte)?;
            match reg {
                0 => one(Inc, rm),
                1 => one(Dec, rm),
                _ => Err(Illegal),
            }
        }
        0xFF => {
            let (reg, rm) = cur.modrm(Width::Word)?;
            match reg {
                0 => one(Inc, rm),
                1 => one(Dec, rm),
                2 => one(Call, rm),
                3 if matches!(rm, Operand::Mem(_)) => one(CallFar, rm),
                4 => one(Jmp, rm),
                6 if matches!(rm, Operand::Mem(_)) => one(Push, rm),
                _ => Err(Illegal),
            }
        }
        _ => Err(Illegal),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nop_is_one_byte() {
        assert_eq!(decode(&[0x90], 0), Ok((Instruction::plain(Mnemonic::Nop), 1)));
    }

    #[test]
    fn two_byte_opcode_space_is_illegal() {
        assert_eq!(decode(&[0x0F], 0), Err(Illegal));
        assert_eq!(decode(&[0x0F, 0x05], 0), Err(Illegal));
    }

    #[test]
    fn dw_0x144_reads_as_inc_sp() {
        let (i, len) = decode(&[0x44, 0x01], 0).unwrap();
        assert_eq!(i, Instruction::unary(Mnemonic::Inc, Operand::Reg(Register::Sp)));
        assert_eq!(len, 1);
        assert_eq!(decode(&[0x44, 0x01], 1), Err(Illegal));
    }

    #[test]
    fn non_canonical_forms_are_illegal() {
        // mov ax, bx through the d=1 opcode
        assert_eq!(decode(&[0x8B, 0xC3], 0), Err(Illegal));
        // disp8 of zero on [bx]
        assert_eq!(decode(&[0x8B, 0x47, 0x00], 0), Err(Illegal));
        // add ax, imm16 that fits a sign-extended byte
        assert_eq!(decode(&[0x05, 0x01, 0x00], 0), Err(Illegal));
        assert!(decode(&[0x83, 0xC0, 0x01], 0).is_ok());
    }

    #[test]
    fn unsupported_addressing_and_interrupts() {
        // [bx+si]
        assert_eq!(decode(&[0x8B, 0x00], 0), Err(Illegal));
        // direct address
        assert_eq!(decode(&[0x8B, 0x06, 0x00, 0x10], 0), Err(Illegal));
        assert_eq!(decode(&[0xCD, 0x21], 0), Err(Illegal));
        assert!(decode(&[0xCD, 0x86], 0).is_ok());
    }

    #[test]
    fn truncated_input_is_illegal() {
        assert_eq!(decode(&[0xC7, 0x05, 0x96], 0), Err(Illegal));
        assert_eq!(decode(&[], 0), Err(Illegal));
    }

    #[test]
    fn rep_prefix_needs_plain_op() {
        assert!(decode(&[0xF3, 0xA5], 0).is_ok());
        assert_eq!(decode(&[0xF3, 0x40], 0), Err(Illegal));
        assert_eq!(decode(&[0xF3, 0xF3, 0xA5], 0), Err(Illegal));
    }
}
