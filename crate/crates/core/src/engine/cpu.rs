//! Register file and instruction semantics for one part.

use crate::isa::{decode, Base, Instruction, MemRef, Mnemonic, Operand, RepPrefix, Register, ShiftCount, Width};

use super::arena::{Arena, Owner};
use super::events::{DeathCause, Event, EventLog};

/// Selector of the shared arena segment.
pub const ARENA_SELECTOR: u16 = 0x1000;
pub const STACK_SIZE: usize = 2048;

/// Selector of a player's private stack segment.
pub fn stack_selector(player: usize) -> u16 {
    0x1800 + player as u16
}

pub const MAX_SPEED: u8 = 4;
const WAITS_PER_LEVEL: u8 = 4;

pub mod flag {
    pub const CF: u16 = 0x0001;
    pub const PF: u16 = 0x0004;
    pub const AF: u16 = 0x0010;
    pub const ZF: u16 = 0x0040;
    pub const SF: u16 = 0x0080;
    pub const IF: u16 = 0x0200;
    pub const DF: u16 = 0x0400;
    pub const OF: u16 = 0x0800;
    pub const MASK: u16 = CF | PF | AF | ZF | SF | IF | DF | OF;
}

const ES: usize = 0;
const CS: usize = 1;
const SS: usize = 2;
const DS: usize = 3;

const AX: usize = 0;
const CX: usize = 1;
const DX: usize = 2;
const BX: usize = 3;
const SP: usize = 4;
const SI: usize = 6;
const DI: usize = 7;

/// CPU context of one part. Compared wholesale by the periodicity check, so
/// it holds nothing but architectural state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cpu {
    /// General registers by ModRM code: ax cx dx bx sp bp si di.
    pub regs: [u16; 8],
    /// Segment registers by sreg code: es cs ss ds.
    pub segs: [u16; 4],
    pub ip: u16,
    pub flags: u16,
    pub speed: u8,
    pub wait_credit: u8,
}

impl Cpu {
    pub fn new(player: usize, ip: u16) -> Cpu {
        let mut regs = [0u16; 8];
        regs[SP] = STACK_SIZE as u16;
        Cpu {
            regs,
            segs: [ARENA_SELECTOR, ARENA_SELECTOR, stack_selector(player), ARENA_SELECTOR],
            ip,
            flags: 0,
            speed: 1,
            wait_credit: 0,
        }
    }

    pub fn reg(&self, r: Register) -> u16 {
        let c = r.code() as usize;
        if r.is_segment() {
            return self.segs[c];
        }
        match r.width() {
            Width::Word => self.regs[c],
            Width::Byte if c < 4 => self.regs[c] & 0xFF,
            Width::Byte => self.regs[c - 4] >> 8,
        }
    }

    pub fn set_reg(&mut self, r: Register, v: u16) {
        let c = r.code() as usize;
        if r.is_segment() {
            self.segs[c] = v;
            return;
        }
        match r.width() {
            Width::Word => self.regs[c] = v,
            Width::Byte if c < 4 => self.regs[c] = (self.regs[c] & 0xFF00) | (v & 0xFF),
            Width::Byte => self.regs[c - 4] = (self.regs[c - 4] & 0x00FF) | (v & 0xFF) << 8,
        }
    }

    pub fn flag(&self, f: u16) -> bool {
        self.flags & f != 0
    }

    fn set_flag(&mut self, f: u16, on: bool) {
        if on {
            self.flags |= f;
        } else {
            self.flags &= !f;
        }
    }

    fn condition(&self, cc: u8) -> bool {
        use flag::*;
        let r = match cc >> 1 {
            0 => self.flag(OF),
            1 => self.flag(CF),
            2 => self.flag(ZF),
            3 => self.flag(CF) || self.flag(ZF),
            4 => self.flag(SF),
            5 => self.flag(PF),
            6 => self.flag(SF) != self.flag(OF),
            _ => self.flag(ZF) || self.flag(SF) != self.flag(OF),
        };
        r ^ (cc & 1 == 1)
    }
}

/// Why a part stops executing.
pub type Fault = DeathCause;

#[derive(Debug, Clone, Copy)]
enum CacheEntry {
    Unknown,
    Illegal,
    Ok(Instruction, u8),
}

/// Decoded instruction per arena offset, invalidated by writes.
pub struct DecodeCache {
    entries: Vec<CacheEntry>,
}

impl Default for DecodeCache {
    fn default() -> Self {
        DecodeCache::new()
    }
}

impl DecodeCache {
    pub fn new() -> DecodeCache {
        DecodeCache {
            entries: vec![CacheEntry::Unknown; 65536],
        }
    }

    /// Forgets every decode whose bytes could include `addr`.
    pub fn invalidate(&mut self, addr: u16) {
        for k in 0..crate::isa::MAX_INSTRUCTION_LEN as u16 {
            self.entries[addr.wrapping_sub(k) as usize] = CacheEntry::Unknown;
        }
    }

    pub fn fetch(&mut self, arena: &Arena, ip: u16) -> Option<(Instruction, u8)> {
        match self.entries[ip as usize] {
            CacheEntry::Ok(i, n) => Some((i, n)),
            CacheEntry::Illegal => None,
            CacheEntry::Unknown => {
                let window: [u8; 6] = arena.window(ip);
                let entry = match decode(&window, 0) {
                    Ok((i, n)) => CacheEntry::Ok(i, n as u8),
                    Err(_) => CacheEntry::Illegal,
                };
                self.entries[ip as usize] = entry;
                match entry {
                    CacheEntry::Ok(i, n) => Some((i, n)),
                    _ => None,
                }
            }
        }
    }
}

/// Everything an executing part may touch besides its own registers.
pub struct Machine<'a> {
    pub arena: &'a mut Arena,
    pub stack: &'a mut [u8; STACK_SIZE],
    pub cache: &'a mut DecodeCache,
    pub log: Option<&'a mut EventLog>,
    pub player: usize,
    pub part: usize,
    pub round: u32,
    /// Set when memory (arena value or ownership, or stack) changes.
    pub changed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Loc {
    Arena(u16),
    Stack(u16),
}

impl Machine<'_> {
    fn owner(&self) -> Owner {
        Owner::part(self.player, self.part)
    }

    fn resolve(&self, seg: u16, off: u16, width: Width) -> Result<Loc, Fault> {
        if seg == ARENA_SELECTOR {
            return Ok(Loc::Arena(off));
        }
        if seg == stack_selector(self.player) {
            let last = off as usize + if width == Width::Word { 1 } else { 0 };
            if last < STACK_SIZE {
                return Ok(Loc::Stack(off));
            }
        }
        Err(DeathCause::AccessViolation)
    }

    fn load(&self, seg: u16, off: u16, width: Width) -> Result<u16, Fault> {
        Ok(match (self.resolve(seg, off, width)?, width) {
            (Loc::Arena(a), Width::Byte) => self.arena.read(a) as u16,
            (Loc::Arena(a), Width::Word) => self.arena.read_word(a),
            (Loc::Stack(s), Width::Byte) => self.stack[s as usize] as u16,
            (Loc::Stack(s), Width::Word) => {
                self.stack[s as usize] as u16 | (self.stack[s as usize + 1] as u16) << 8
            }
        })
    }

    fn store_arena_byte(&mut self, addr: u16, value: u8) {
        let owner = self.owner();
        let effect = self.arena.write(addr, value, owner);
        if effect.value_changed {
            self.cache.invalidate(addr);
        }
        if effect.value_changed || effect.owner_changed {
            self.changed = true;
        }
        if let Some(log) = self.log.as_deref_mut() {
            log.push(Event::Write {
                round: self.round,
                player: self.player,
                part: self.part,
                addr,
                value,
            });
        }
    }

    fn store(&mut self, seg: u16, off: u16, width: Width, v: u16) -> Result<(), Fault> {
        match self.resolve(seg, off, width)? {
            Loc::Arena(a) => {
                self.store_arena_byte(a, v as u8);
                if width == Width::Word {
                    self.store_arena_byte(a.wrapping_add(1), (v >> 8) as u8);
                }
            }
            Loc::Stack(s) => {
                let s = s as usize;
                let bytes = [v as u8, (v >> 8) as u8];
                let n = if width == Width::Word { 2 } else { 1 };
                if self.stack[s..s + n] != bytes[..n] {
                    self.stack[s..s + n].copy_from_slice(&bytes[..n]);
                    self.changed = true;
                }
            }
        }
        Ok(())
    }
}

fn data_segment(cpu: &Cpu, m: &MemRef) -> u16 {
    if m.base == Base::Bp {
        cpu.segs[SS]
    } else {
        cpu.segs[DS]
    }
}

fn effective(cpu: &Cpu, m: &MemRef) -> u16 {
    cpu.reg(m.base.register()).wrapping_add(m.disp as u16)
}

fn read(cpu: &Cpu, mach: &Machine, op: Operand) -> Result<u16, Fault> {
    match op {
        Operand::Reg(r) => Ok(cpu.reg(r)),
        Operand::Imm(v) => Ok(v),
        Operand::Mem(m) => mach.load(data_segment(cpu, &m), effective(cpu, &m), m.width),
        Operand::Count(ShiftCount::One) => Ok(1),
        Operand::Count(ShiftCount::Cl) => Ok(cpu.reg(Register::Cl)),
        Operand::Rel8(d) => Ok(d as i16 as u16),
        Operand::Rel16(d) => Ok(d as u16),
    }
}

fn write(cpu: &mut Cpu, mach: &mut Machine, op: Operand, v: u16) -> Result<(), Fault> {
    match op {
        Operand::Reg(r) => {
            cpu.set_reg(r, v);
            Ok(())
        }
        Operand::Mem(m) => mach.store(data_segment(cpu, &m), effective(cpu, &m), m.width, v),
        _ => unreachable!("not a destination operand"),
    }
}

fn push(cpu: &mut Cpu, mach: &mut Machine, v: u16) -> Result<(), Fault> {
    let sp = cpu.regs[SP].wrapping_sub(2);
    mach.store(cpu.segs[SS], sp, Width::Word, v)?;
    cpu.regs[SP] = sp;
    Ok(())
}

fn pop(cpu: &mut Cpu, mach: &mut Machine) -> Result<u16, Fault> {
    let v = mach.load(cpu.segs[SS], cpu.regs[SP], Width::Word)?;
    cpu.regs[SP] = cpu.regs[SP].wrapping_add(2);
    Ok(v)
}

fn sign_bit(w: Width) -> u32 {
    match w {
        Width::Byte => 0x80,
        Width::Word => 0x8000,
    }
}

fn mask(w: Width) -> u32 {
    match w {
        Width::Byte => 0xFF,
        Width::Word => 0xFFFF,
    }
}

fn set_szp(cpu: &mut Cpu, r: u32, w: Width) {
    let r = r & mask(w);
    cpu.set_flag(flag::ZF, r == 0);
    cpu.set_flag(flag::SF, r & sign_bit(w) != 0);
    cpu.set_flag(flag::PF, (r as u8).count_ones().is_multiple_of(2));
}

/// Two-operand ALU group (`alu_index` order). Returns the result to store,
/// or `None` for `cmp`.
fn alu(cpu: &mut Cpu, idx: u8, a: u32, b: u32, w: Width) -> Option<u16> {
    let m = mask(w);
    let s = sign_bit(w);
    let carry_in = cpu.flag(flag::CF) as u32;
    let r = match idx {
        0 | 2 => {
            let c = if idx == 2 { carry_in } else { 0 };
            let full = a + b + c;
            let r = full & m;
            cpu.set_flag(flag::CF, full > m);
            cpu.set_flag(flag::OF, (a ^ r) & (b ^ r) & s != 0);
            cpu.set_flag(flag::AF, (a ^ b ^ r) & 0x10 != 0);
            r
        }
        3 | 5 | 7 => {
            let c = if idx == 3 { carry_in } else { 0 };
            let r = a.wrapping_sub(b).wrapping_sub(c) & m;
            cpu.set_flag(flag::CF, a < b + c);
            cpu.set_flag(flag::OF, (a ^ b) & (a ^ r) & s != 0);
            cpu.set_flag(flag::AF, (a ^ b ^ r) & 0x10 != 0);
            r
        }
        _ => {
            let r = match idx {
                1 => a | b,
                4 => a & b,
                _ => a ^ b,
            } & m;
            cpu.set_flag(flag::CF, false);
            cpu.set_flag(flag::OF, false);
            cpu.set_flag(flag::AF, false);
            r
        }
    };
    set_szp(cpu, r, w);
    (idx != 7).then_some(r as u16)
}

fn shift(cpu: &mut Cpu, kind: Mnemonic, v: u32, count: u32, w: Width) -> u32 {
    let m = mask(w);
    let s = sign_bit(w);
    let bits = if w == Width::Byte { 8 } else { 16 };
    let mut r = v & m;
    if count == 0 {
        return r;
    }
    for _ in 0..count {
        let cf = cpu.flag(flag::CF) as u32;
        let (nr, out) = match kind {
            Mnemonic::Rol => (((r << 1) | (r >> (bits - 1))) & m, r & s != 0),
            Mnemonic::Ror => (((r >> 1) | ((r & 1) << (bits - 1))) & m, r & 1 != 0),
            Mnemonic::Rcl => (((r << 1) | cf) & m, r & s != 0),
            Mnemonic::Rcr => ((r >> 1) | (cf << (bits - 1)), r & 1 != 0),
            Mnemonic::Shl => ((r << 1) & m, r & s != 0),
            Mnemonic::Shr => (r >> 1, r & 1 != 0),
            _ => ((r >> 1) | (r & s), r & 1 != 0),
        };
        r = nr;
        cpu.set_flag(flag::CF, out);
    }
    let cf = cpu.flag(flag::CF);
    let of = match kind {
        Mnemonic::Rol | Mnemonic::Rcl | Mnemonic::Shl => (r & s != 0) != cf,
        Mnemonic::Ror | Mnemonic::Rcr => (r & s != 0) != (r & (s >> 1) != 0),
        Mnemonic::Shr => v & s != 0 && count == 1,
        _ => false,
    };
    cpu.set_flag(flag::OF, of);
    if matches!(kind, Mnemonic::Shl | Mnemonic::Shr | Mnemonic::Sar) {
        set_szp(cpu, r, w);
    }
    r
}

fn string_width(m: Mnemonic) -> Width {
    use Mnemonic::*;
    match m {
        Stosb | Lodsb | Movsb | Cmpsb | Scasb => Width::Byte,
        _ => Width::Word,
    }
}

fn advance_index(cpu: &mut Cpu, reg: usize, w: Width) {
    let step: u16 = if w == Width::Byte { 1 } else { 2 };
    cpu.regs[reg] = if cpu.flag(flag::DF) {
        cpu.regs[reg].wrapping_sub(step)
    } else {
        cpu.regs[reg].wrapping_add(step)
    };
}

/// One iteration of a string instruction.
fn string_op(cpu: &mut Cpu, mach: &mut Machine, m: Mnemonic) -> Result<(), Fault> {
    use Mnemonic::*;
    let w = string_width(m);
    let acc = if w == Width::Byte { Register::Al } else { Register::Ax };
    match m {
        Movsb | Movsw => {
            let v = mach.load(cpu.segs[DS], cpu.regs[SI], w)?;
            mach.store(cpu.segs[ES], cpu.regs[DI], w, v)?;
            advance_index(cpu, SI, w);
            advance_index(cpu, DI, w);
        }
        Cmpsb | Cmpsw => {
            let a = mach.load(cpu.segs[DS], cpu.regs[SI], w)?;
            let b = mach.load(cpu.segs[ES], cpu.regs[DI], w)?;
            alu(cpu, 7, a as u32, b as u32, w);
            advance_index(cpu, SI, w);
            advance_index(cpu, DI, w);
        }
        Stosb | Stosw => {
            mach.store(cpu.segs[ES], cpu.regs[DI], w, cpu.reg(acc))?;
            advance_index(cpu, DI, w);
        }
        Lodsb | Lodsw => {
            let v = mach.load(cpu.segs[DS], cpu.regs[SI], w)?;
            cpu.set_reg(acc, v);
            advance_index(cpu, SI, w);
        }
        _ => {
            let b = mach.load(cpu.segs[ES], cpu.regs[DI], w)?;
            alu(cpu, 7, cpu.reg(acc) as u32, b as u32, w);
            advance_index(cpu, DI, w);
        }
    }
    Ok(())
}

/// Writes AL over 256 consecutive bytes at ES:DI.
fn int86(cpu: &mut Cpu, mach: &mut Machine) -> Result<(), Fault> {
    if cpu.segs[ES] != ARENA_SELECTOR {
        return Err(DeathCause::AccessViolation);
    }
    let al = cpu.regs[AX] as u8;
    let start = cpu.regs[DI];
    for _ in 0..256 {
        mach.store_arena_byte(cpu.regs[DI], al);
        advance_index(cpu, DI, Width::Byte);
    }
    if let Some(log) = mach.log.as_deref_mut() {
        log.push(Event::Int86 {
            round: mach.round,
            player: mach.player,
            part: mach.part,
            start,
        });
    }
    Ok(())
}

/// First offset, scanning from `from` in the DF direction, where the four
/// bytes `pattern` appear. Pattern bytes always run upwards.
pub fn int87_search(arena: &Arena, from: u16, backwards: bool, pattern: [u8; 4]) -> Option<u16> {
    let mut at = from;
    for _ in 0..65536u32 {
        if arena.read(at) == pattern[0] && arena.window::<4>(at) == pattern {
            return Some(at);
        }
        at = if backwards { at.wrapping_sub(1) } else { at.wrapping_add(1) };
    }
    None
}

/// Replaces the first occurrence of [AL,AH,DL,DH] with [BL,BH,CL,CH].
fn int87(cpu: &mut Cpu, mach: &mut Machine) -> Result<(), Fault> {
    if cpu.segs[ES] != ARENA_SELECTOR {
        return Err(DeathCause::AccessViolation);
    }
    let (ax, dx, bx, cx) = (cpu.regs[AX], cpu.regs[DX], cpu.regs[BX], cpu.regs[CX]);
    let pattern = [ax as u8, (ax >> 8) as u8, dx as u8, (dx >> 8) as u8];
    let replacement = [bx as u8, (bx >> 8) as u8, cx as u8, (cx >> 8) as u8];
    let found = int87_search(mach.arena, cpu.regs[DI], cpu.flag(flag::DF), pattern);
    if let Some(at) = found {
        for (k, b) in replacement.iter().enumerate() {
            mach.store_arena_byte(at.wrapping_add(k as u16), *b);
        }
        cpu.regs[DI] = at;
    }
    if let Some(log) = mach.log.as_deref_mut() {
        log.push(Event::Int87 {
            round: mach.round,
            player: mach.player,
            part: mach.part,
            found,
        });
    }
    Ok(())
}

/// Fetches, decodes and executes one instruction at CS:IP.
pub fn step(cpu: &mut Cpu, mach: &mut Machine) -> Result<(), Fault> {
    if cpu.segs[CS] != ARENA_SELECTOR {
        return Err(DeathCause::AccessViolation);
    }
    let (instr, len) = mach.cache.fetch(mach.arena, cpu.ip).ok_or(DeathCause::Illegal)?;
    execute(cpu, mach, &instr, len as u16)
}

fn execute(cpu: &mut Cpu, mach: &mut Machine, instr: &Instruction, len: u16) -> Result<(), Fault> {
    use Mnemonic::*;
    let next = cpu.ip.wrapping_add(len);
    let m = instr.mnemonic;
    let a = instr.operands.first();
    let b = instr.operands.second();

    if let (Some(rep), true) = (instr.rep, m.is_string_op()) {
        if cpu.regs[CX] == 0 {
            cpu.ip = next;
            return Ok(());
        }
        string_op(cpu, mach, m)?;
        cpu.regs[CX] = cpu.regs[CX].wrapping_sub(1);
        let compares = matches!(m, Cmpsb | Cmpsw | Scasb | Scasw);
        let zf = cpu.flag(flag::ZF);
        let stop = cpu.regs[CX] == 0 || (compares && (zf != (rep == RepPrefix::Rep)));
        if stop {
            cpu.ip = next;
        }
        return Ok(());
    }

    cpu.ip = next;
    match m {
        Nop => {}
        _ if m.is_string_op() => string_op(cpu, mach, m)?,
        Add | Or | Adc | Sbb | And | Sub | Xor | Cmp => {
            let (d, s) = (a.unwrap(), b.unwrap());
            let w = d.width().unwrap();
            let x = read(cpu, mach, d)? as u32;
            let mut y = read(cpu, mach, s)? as u32;
            if w == Width::Byte {
                y &= 0xFF;
            }
            if let Some(r) = alu(cpu, m.alu_index().unwrap(), x, y, w) {
                write(cpu, mach, d, r)?;
            }
        }
        Test => {
            let (d, s) = (a.unwrap(), b.unwrap());
            let w = d.width().unwrap();
            let x = read(cpu, mach, d)? as u32;
            let y = read(cpu, mach, s)? as u32;
            alu(cpu, 4, x, y, w);
        }
        Mov => {
            let v = read(cpu, mach, b.unwrap())?;
            write(cpu, mach, a.unwrap(), v)?;
        }
        Xchg => {
            let (x, y) = (a.unwrap(), b.unwrap());
            let vx = read(cpu, mach, x)?;
            let vy = read(cpu, mach, y)?;
            write(cpu, mach, x, vy)?;
            write(cpu, mach, y, vx)?;
        }
        Inc | Dec => {
            let d = a.unwrap();
            let w = d.width().unwrap();
            let v = read(cpu, mach, d)? as u32;
            let cf = cpu.flag(flag::CF);
            let r = alu(cpu, if m == Inc { 0 } else { 5 }, v, 1, w).unwrap();
            cpu.set_flag(flag::CF, cf);
            write(cpu, mach, d, r)?;
        }
        Not => {
            let d = a.unwrap();
            let v = read(cpu, mach, d)?;
            write(cpu, mach, d, !v & mask(d.width().unwrap()) as u16)?;
        }
        Neg => {
            let d = a.unwrap();
            let w = d.width().unwrap();
            let v = read(cpu, mach, d)? as u32;
            let r = alu(cpu, 5, 0, v, w).unwrap();
            write(cpu, mach, d, r)?;
        }
        Mul => {
            let s = a.unwrap();
            let v = read(cpu, mach, s)? as u32;
            let high = match s.width().unwrap() {
                Width::Byte => {
                    let r = (cpu.regs[AX] & 0xFF) as u32 * v;
                    cpu.regs[AX] = r as u16;
                    r >> 8
                }
                Width::Word => {
                    let r = cpu.regs[AX] as u32 * v;
                    cpu.regs[AX] = r as u16;
                    cpu.regs[DX] = (r >> 16) as u16;
                    r >> 16
                }
            };
            cpu.set_flag(flag::CF, high != 0);
            cpu.set_flag(flag::OF, high != 0);
        }
        Div => {
            let s = a.unwrap();
            let v = read(cpu, mach, s)? as u32;
            if v == 0 {
                return Err(DeathCause::DivideError);
            }
            match s.width().unwrap() {
                Width::Byte => {
                    let n = cpu.regs[AX] as u32;
                    let (q, r) = (n / v, n % v);
                    if q > 0xFF {
                        return Err(DeathCause::DivideError);
                    }
                    cpu.regs[AX] = (r << 8 | q) as u16;
                }
                Width::Word => {
                    let n = (cpu.regs[DX] as u32) << 16 | cpu.regs[AX] as u32;
                    let (q, r) = (n / v, n % v);
                    if q > 0xFFFF {
                        return Err(DeathCause::DivideError);
                    }
                    cpu.regs[AX] = q as u16;
                    cpu.regs[DX] = r as u16;
                }
            }
        }
        Lea => {
            let Some(Operand::Mem(mr)) = b else { unreachable!() };
            write(cpu, mach, a.unwrap(), effective(cpu, &mr))?;
        }
        Les | Lds => {
            let Some(Operand::Mem(mr)) = b else { unreachable!() };
            let seg = data_segment(cpu, &mr);
            let off = effective(cpu, &mr);
            let v = mach.load(seg, off, Width::Word)?;
            let sv = mach.load(seg, off.wrapping_add(2), Width::Word)?;
            write(cpu, mach, a.unwrap(), v)?;
            cpu.segs[if m == Les { ES } else { DS }] = sv;
        }
        Rol | Ror | Rcl | Rcr | Shl | Shr | Sar => {
            let d = a.unwrap();
            let w = d.width().unwrap();
            let count = read(cpu, mach, b.unwrap())? as u32 & 0xFF;
            let v = read(cpu, mach, d)? as u32;
            let r = shift(cpu, m, v, count, w);
            write(cpu, mach, d, r as u16)?;
        }
        Jmp => match a.unwrap() {
            Operand::Rel8(d) => cpu.ip = next.wrapping_add(d as i16 as u16),
            Operand::Rel16(d) => cpu.ip = next.wrapping_add(d as u16),
            op => cpu.ip = read(cpu, mach, op)?,
        },
        Jcxz | Loop | Loopz | Loopnz => {
            let Some(Operand::Rel8(d)) = a else { unreachable!() };
            let taken = if m == Jcxz {
                cpu.regs[CX] == 0
            } else {
                cpu.regs[CX] = cpu.regs[CX].wrapping_sub(1);
                cpu.regs[CX] != 0
                    && match m {
                        Loopz => cpu.flag(flag::ZF),
                        Loopnz => !cpu.flag(flag::ZF),
                        _ => true,
                    }
            };
            if taken {
                cpu.ip = next.wrapping_add(d as i16 as u16);
            }
        }
        _ if m.condition_code().is_some() => {
            let Some(Operand::Rel8(d)) = a else { unreachable!() };
            if cpu.condition(m.condition_code().unwrap()) {
                cpu.ip = next.wrapping_add(d as i16 as u16);
            }
        }
        Call => {
            let target = match a.unwrap() {
                Operand::Rel16(d) => next.wrapping_add(d as u16),
                op => read(cpu, mach, op)?,
            };
            push(cpu, mach, next)?;
            cpu.ip = target;
        }
        CallFar => {
            let Some(Operand::Mem(mr)) = a else { unreachable!() };
            let seg = data_segment(cpu, &mr);
            let off = effective(cpu, &mr);
            let target = mach.load(seg, off, Width::Word)?;
            mach.load(seg, off.wrapping_add(2), Width::Word)?;
            push(cpu, mach, cpu.segs[CS])?;
            push(cpu, mach, next)?;
            cpu.ip = target;
        }
        Ret => cpu.ip = pop(cpu, mach)?,
        Retf => {
            cpu.ip = pop(cpu, mach)?;
            pop(cpu, mach)?;
        }
        Iret => {
            cpu.ip = pop(cpu, mach)?;
            pop(cpu, mach)?;
            cpu.flags = pop(cpu, mach)? & flag::MASK;
        }
        Push => {
            let v = read(cpu, mach, a.unwrap())?;
            push(cpu, mach, v)?;
        }
        Pop => {
            let v = pop(cpu, mach)?;
            write(cpu, mach, a.unwrap(), v)?;
        }
        Pushf => push(cpu, mach, cpu.flags | 0xF002)?,
        Popf => cpu.flags = pop(cpu, mach)? & flag::MASK,
        Lahf => {
            let low = (cpu.flags & 0xD5) | 0x02;
            cpu.set_reg(Register::Ah, low);
        }
        Cbw => {
            let al = cpu.regs[AX] as u8 as i8 as i16;
            cpu.regs[AX] = al as u16;
        }
        Cwd => cpu.regs[DX] = if cpu.regs[AX] & 0x8000 != 0 { 0xFFFF } else { 0 },
        Xlat => {
            let off = cpu.regs[BX].wrapping_add(cpu.regs[AX] & 0xFF);
            let v = mach.load(cpu.segs[DS], off, Width::Byte)?;
            cpu.set_reg(Register::Al, v);
        }
        Cmc => cpu.flags ^= flag::CF,
        Clc => cpu.set_flag(flag::CF, false),
        Stc => cpu.set_flag(flag::CF, true),
        Cli => cpu.set_flag(flag::IF, false),
        Sti => cpu.set_flag(flag::IF, true),
        Cld => cpu.set_flag(flag::DF, false),
        Std => cpu.set_flag(flag::DF, true),
        Wait => {
            cpu.wait_credit += 1;
            if cpu.wait_credit == WAITS_PER_LEVEL {
                cpu.wait_credit = 0;
                cpu.speed = (cpu.speed + 1).min(MAX_SPEED);
            }
        }
        Int => match a {
            Some(Operand::Imm(0x86)) => int86(cpu, mach)?,
            _ => int87(cpu, mach)?,
        },
        _ => return Err(DeathCause::Illegal),
    }
    Ok(())
}
