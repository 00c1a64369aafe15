//! Canonical machine encoding.
//!
//! Every instruction has exactly one encoding: the shortest form, with ties
//! broken the way GNU as breaks them. The decoder accepts
//! exactly the byte patterns produced here.

use super::instruction::{Base, Instruction, MemRef, Mnemonic, Operand, Register, ShiftCount, Width};
use super::IsaError;

/// Longest encoding in the subset: opcode, ModRM, disp16, imm16.
pub const MAX_INSTRUCTION_LEN: usize = 6;

/// Inline byte buffer for a single encoded instruction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodedBytes {
    buf: [u8; 8],
    len: u8,
}

impl EncodedBytes {
    fn push(&mut self, b: u8) {
        self.buf[self.len as usize] = b;
        self.len += 1;
    }

    fn push_word(&mut self, w: u16) {
        self.push(w as u8);
        self.push((w >> 8) as u8);
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.buf[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

pub fn encode(instr: &Instruction) -> Result<Vec<u8>, IsaError> {
    encode_inline(instr).map(|e| e.as_slice().to_vec())
}

fn unencodable(instr: &Instruction) -> IsaError {
    IsaError::Unencodable(instr.to_string())
}

pub(crate) fn fits_i8(v: u16) -> bool {
    let s = v as i16;
    (-128..=127).contains(&s)
}

fn modrm(out: &mut EncodedBytes, operand: Operand, reg_field: u8) -> Option<()> {
    match operand {
        Operand::Reg(r) if !r.is_segment() => {
            out.push(0xC0 | (reg_field << 3) | r.code());
            Some(())
        }
        Operand::Mem(MemRef { base, disp, .. }) => {
            let rm = base.rm();
            if disp == 0 && base != Base::Bp {
                out.push((reg_field << 3) | rm);
            } else if (-128..=127).contains(&disp) {
                out.push(0x40 | (reg_field << 3) | rm);
                out.push(disp as i8 as u8);
            } else {
                out.push(0x80 | (reg_field << 3) | rm);
                out.push_word(disp as u16);
            }
            Some(())
        }
        _ => None,
    }
}

fn is_rm(op: Operand) -> bool {
    matches!(op, Operand::Mem(_)) || matches!(op, Operand::Reg(r) if !r.is_segment())
}

fn w_bit(width: Width) -> u8 {
    match width {
        Width::Byte => 0,
        Width::Word => 1,
    }
}

fn push_imm(out: &mut EncodedBytes, width: Width, v: u16) {
    match width {
        Width::Byte => out.push(v as u8),
        Width::Word => out.push_word(v),
    }
}

fn plain_opcode(m: Mnemonic) -> Option<u8> {
    use Mnemonic::*;
    Some(match m {
        Nop => 0x90,
        Cbw => 0x98,
        Cwd => 0x99,
        Wait => 0x9B,
        Pushf => 0x9C,
        Popf => 0x9D,
        Lahf => 0x9F,
        Movsb => 0xA4,
        Movsw => 0xA5,
        Cmpsb => 0xA6,
        Cmpsw => 0xA7,
        Stosb => 0xAA,
        Stosw => 0xAB,
        Lodsb => 0xAC,
        Lodsw => 0xAD,
        Scasb => 0xAE,
        Scasw => 0xAF,
        Ret => 0xC3,
        Retf => 0xCB,
        Iret => 0xCF,
        Xlat => 0xD7,
        Cmc => 0xF5,
        Clc => 0xF8,
        Stc => 0xF9,
        Cli => 0xFA,
        Sti => 0xFB,
        Cld => 0xFC,
        Std => 0xFD,
        _ => return None,
    })
}

/// Single opcode bytes that map back to an operand-less mnemonic.
pub(crate) fn plain_from_opcode(b: u8) -> Option<Mnemonic> {
    use Mnemonic::*;
    Some(match b {
        0x90 => Nop,
        0x98 => Cbw,
        0x99 => Cwd,
        0x9B => Wait,
        0x9C => Pushf,
        0x9D => Popf,
        0x9F => Lahf,
        0xA4 => Movsb,
        0xA5 => Movsw,
        0xA6 => Cmpsb,
        0xA7 => Cmpsw,
        0xAA => Stosb,
        0xAB => Stosw,
        0xAC => Lodsb,
        0xAD => Lodsw,
        0xAE => Scasb,
        0xAF => Scasw,
        0xC3 => Ret,
        0xCB => Retf,
        0xCF => Iret,
        0xD7 => Xlat,
        0xF5 => Cmc,
        0xF8 => Clc,
        0xF9 => Stc,
        0xFA => Cli,
        0xFB => Sti,
        0xFC => Cld,
        0xFD => Std,
        _ => return None,
    })
}

pub fn encode_inline(instr: &Instruction) -> Result<EncodedBytes, IsaError> {
    let mut out = EncodedBytes::default();
    if let Some(rep) = instr.rep {
        if !instr.mnemonic.is_plain_op() || !instr.operands.is_empty() {
            return Err(unencodable(instr));
        }
        out.push(rep.byte());
    }
    encode_body(instr, &mut out).ok_or_else(|| unencodable(instr))?;
    Ok(out)
}

fn encode_body(instr: &Instruction, out: &mut EncodedBytes) -> Option<()> {
    use Mnemonic::*;
    let m = instr.mnemonic;
    let a = instr.operands.first();
    let b = instr.operands.second();
    let argc = instr.operands.len();

    if let Some(op) = plain_opcode(m) {
        if argc != 0 {
            return None;
        }
        out.push(op);
        return Some(());
    }

    match m {
        Int => match (a?, argc) {
            (Operand::Imm(v @ (0x86 | 0x87)), 1) => {
                out.push(0xCD);
                out.push(v as u8);
            }
            _ => return None,
        },
        Dw => match (a?, argc) {
            (Operand::Imm(v), 1) => out.push_word(v),
            _ => return None,
        },
        Inc | Dec => {
            if argc != 1 {
                return None;
            }
            let digit = if m == Inc { 0 } else { 1 };
            match a? {
                Operand::Reg(r) if r.width() == Width::Word && !r.is_segment() => {
                    out.push(0x40 | (digit << 3) | r.code());
                }
                op if is_rm(op) => {
                    out.push(0xFE | w_bit(op.width()?));
                    modrm(out, op, digit)?;
                }
                _ => return None,
            }
        }
        Not | Neg | Mul | Div => {
            let op = a?;
            if argc != 1 || !is_rm(op) {
                return None;
            }
            let digit = match m {
                Not => 2,
                Neg => 3,
                Mul => 4,
                _ => 6,
            };
            out.push(0xF6 | w_bit(op.width()?));
            modrm(out, op, digit)?;
        }
        Add | Or | Adc | Sbb | And | Sub | Xor | Cmp => {
            let idx = m.alu_index()?;
            let (dst, src) = (a?, b?);
            match (dst, src) {
                (d, Operand::Reg(s)) if is_rm(d) && !s.is_segment() => {
                    let w = s.width();
                    if d.width()? != w {
                        return None;
                    }
                    out.push((idx << 3) | w_bit(w));
                    modrm(out, d, s.code())?;
                }
                (Operand::Reg(d), Operand::Mem(mem)) if !d.is_segment() => {
                    let w = d.width();
                    if mem.width != w {
                        return None;
                    }
                    out.push((idx << 3) | 0x02 | w_bit(w));
                    modrm(out, src, d.code())?;
                }
                (Operand::Reg(Register::Al), Operand::Imm(v)) => {
                    out.push((idx << 3) | 0x04);
                    out.push(v as u8);
                }
                // Ties with the sign-extended form go to 0x83.
                (Operand::Reg(Register::Ax), Operand::Imm(v)) if !fits_i8(v) => {
                    out.push((idx << 3) | 0x05);
                    out.push_word(v);
                }
                (d, Operand::Imm(v)) if is_rm(d) => match d.width()? {
                    Width::Byte => {
                        out.push(0x80);
                        modrm(out, d, idx)?;
                        out.push(v as u8);
                    }
                    Width::Word if fits_i8(v) => {
                        out.push(0x83);
                        modrm(out, d, idx)?;
                        out.push(v as u8);
                    }
                    Width::Word => {
                        out.push(0x81);
                        modrm(out, d, idx)?;
                        out.push_word(v);
                    }
                },
                _ => return None,
            }
        }
        Mov => {
            let (dst, src) = (a?, b?);
            match (dst, src) {
                (d, Operand::Reg(s)) if is_rm(d) && !s.is_segment() => {
                    if d.width()? != s.width() {
                        return None;
                    }
                    out.push(0x88 | w_bit(s.width()));
                    modrm(out, d, s.code())?;
                }
                (Operand::Reg(d), Operand::Mem(mem)) if !d.is_segment() => {
                    if mem.width != d.width() {
                        return None;
                    }
                    out.push(0x8A | w_bit(d.width()));
                    modrm(out, src, d.code())?;
                }
                (Operand::Reg(d), Operand::Imm(v)) if !d.is_segment() => {
                    let w = d.width();
                    out.push(0xB0 | (w_bit(w) << 3) | d.code());
                    push_imm(out, w, v);
                }
                (Operand::Mem(mem), Operand::Imm(v)) => {
                    out.push(0xC6 | w_bit(mem.width));
                    modrm(out, dst, 0)?;
                    push_imm(out, mem.width, v);
                }
                _ => return None,
            }
        }
        Test => {
            let (dst, src) = (a?, b?);
            match (dst, src) {
                (d, Operand::Reg(s)) if is_rm(d) && !s.is_segment() => {
                    if d.width()? != s.width() {
                        return None;
                    }
                    out.push(0x84 | w_bit(s.width()));
                    modrm(out, d, s.code())?;
                }
                (Operand::Reg(d), Operand::Mem(mem)) if !d.is_segment() => {
                    if mem.width != d.width() {
                        return None;
                    }
                    out.push(0x84 | w_bit(d.width()));
                    modrm(out, src, d.code())?;
                }
                (Operand::Reg(Register::Al), Operand::Imm(v)) => {
                    out.push(0xA8);
                    out.push(v as u8);
                }
                (Operand::Reg(Register::Ax), Operand::Imm(v)) => {
                    out.push(0xA9);
                    out.push_word(v);
                }
                (d, Operand::Imm(v)) if is_rm(d) => {
                    let w = d.width()?;
                    out.push(0xF6 | w_bit(w));
                    modrm(out, d, 0)?;
                    push_imm(out, w, v);
                }
                _ => return None,
            }
        }
        Xchg => {
            let (x, y) = (a?, b?);
            match (x, y) {
                (Operand::Reg(Register::Ax), Operand::Reg(Register::Ax)) => out.push(0x90),
                (Operand::Reg(Register::Ax), Operand::Reg(r)) | (Operand::Reg(r), Operand::Reg(Register::Ax))
                    if r.width() == Width::Word && !r.is_segment() =>
                {
                    out.push(0x90 | r.code());
                }
                (d, Operand::Reg(s)) if is_rm(d) && !s.is_segment() => {
                    if d.width()? != s.width() {
                        return None;
                    }
                    out.push(0x86 | w_bit(s.width()));
                    modrm(out, d, s.code())?;
                }
                (Operand::Reg(r), Operand::Mem(mem)) if !r.is_segment() => {
                    if mem.width != r.width() {
                        return None;
                    }
                    out.push(0x86 | w_bit(r.width()));
                    modrm(out, y, r.code())?;
                }
                _ => return None,
            }
        }
        Lea | Les | Lds => match (a?, b?) {
            (Operand::Reg(r), Operand::Mem(_)) if r.width() == Width::Word && !r.is_segment() => {
                out.push(match m {
                    Lea => 0x8D,
                    Les => 0xC4,
                    _ => 0xC5,
                });
                modrm(out, b?, r.code())?;
            }
            _ => return None,
        },
        Jmp => match a? {
            Operand::Rel8(d) if argc == 1 => {
                out.push(0xEB);
                out.push(d as u8);
            }
            Operand::Rel16(d) if argc == 1 => {
                out.push(0xE9);
                out.push_word(d as u16);
            }
            op if argc == 1 && is_rm(op) && op.width() == Some(Width::Word) => {
                out.push(0xFF);
                modrm(out, op, 4)?;
            }
            _ => return None,
        },
        Jcxz | Loop | Loopz | Loopnz | Jo | Jno | Jc | Jnc | Je | Jne | Jna | Ja | Js | Jns | Jp
        | Jnp | Jl | Jnl | Jle | Jnle => match a? {
            Operand::Rel8(d) if argc == 1 => {
                let op = match m {
                    Loopnz => 0xE0,
                    Loopz => 0xE1,
                    Loop => 0xE2,
                    Jcxz => 0xE3,
                    _ => 0x70 | m.condition_code()?,
                };
                out.push(op);
                out.push(d as u8);
            }
            _ => return None,
        },
        Call => match a? {
            Operand::Rel16(d) if argc == 1 => {
                out.push(0xE8);
                out.push_word(d as u16);
            }
            op if argc == 1 && is_rm(op) && op.width() == Some(Width::Word) => {
                out.push(0xFF);
                modrm(out, op, 2)?;
            }
            _ => return None,
        },
        CallFar => match a? {
            op @ Operand::Mem(_) if argc == 1 => {
                out.push(0xFF);
                modrm(out, op, 3)?;
            }
            _ => return None,
        },
        Push => match a? {
            Operand::Reg(r) if argc == 1 && r.is_segment() => out.push(0x06 | (r.code() << 3)),
            Operand::Reg(r) if argc == 1 && r.width() == Width::Word => out.push(0x50 | r.code()),
            op @ Operand::Mem(mem) if argc == 1 && mem.width == Width::Word => {
                out.push(0xFF);
                modrm(out, op, 6)?;
            }
            _ => return None,
        },
        Pop => match a? {
            Operand::Reg(Register::Es) if argc == 1 => out.push(0x07),
            Operand::Reg(Register::Ds) if argc == 1 => out.push(0x1F),
            Operand::Reg(r) if argc == 1 && !r.is_segment() && r.width() == Width::Word => {
                out.push(0x58 | r.code())
            }
            op @ Operand::Mem(mem) if argc == 1 && mem.width == Width::Word => {
                out.push(0x8F);
                modrm(out, op, 0)?;
            }
            _ => return None,
        },
        Rol | Ror | Rcl | Rcr | Shl | Shr | Sar => {
            let idx = m.shift_index()?;
            match (a?, b?) {
                (d, Operand::Count(c)) if is_rm(d) => {
                    let base = match c {
                        ShiftCount::One => 0xD0,
                        ShiftCount::Cl => 0xD2,
                    };
                    out.push(base | w_bit(d.width()?));
                    modrm(out, d, idx)?;
                }
                _ => return None,
            }
        }
        _ => return None,
    }
    Some(())
}
