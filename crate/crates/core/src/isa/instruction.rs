//! Instruction model for the supported 8086 subset.

use std::fmt;

/// General, byte and segment registers.
///
/// Word and byte registers are ordered by their 3-bit ModRM code, segment
/// registers by their 2-bit `sreg` code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Register {
    Ax,
    Cx,
    Dx,
    Bx,
    Sp,
    Bp,
    Si,
    Di,
    Al,
    Cl,
    Dl,
    Bl,
    Ah,
    Ch,
    Dh,
    Bh,
    Es,
    Cs,
    Ss,
    Ds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Width {
    Byte,
    Word,
}

impl Register {
    pub const ALL: [Register; 20] = [
        Register::Ax,
        Register::Cx,
        Register::Dx,
        Register::Bx,
        Register::Sp,
        Register::Bp,
        Register::Si,
        Register::Di,
        Register::Al,
        Register::Cl,
        Register::Dl,
        Register::Bl,
        Register::Ah,
        Register::Ch,
        Register::Dh,
        Register::Bh,
        Register::Es,
        Register::Cs,
        Register::Ss,
        Register::Ds,
    ];

    pub const WORD: [Register; 8] = [
        Register::Ax,
        Register::Cx,
        Register::Dx,
        Register::Bx,
        Register::Sp,
        Register::Bp,
        Register::Si,
        Register::Di,
    ];

    pub const BYTE: [Register; 8] = [
        Register::Al,
        Register::Cl,
        Register::Dl,
        Register::Bl,
        Register::Ah,
        Register::Ch,
        Register::Dh,
        Register::Bh,
    ];

    pub const SEGMENT: [Register; 4] = [Register::Es, Register::Cs, Register::Ss, Register::Ds];

    /// Hardware encoding: 3 bits for general registers, 2 bits for segments.
    pub fn code(self) -> u8 {
        match self {
            Register::Ax | Register::Al | Register::Es => 0,
            Register::Cx | Register::Cl | Register::Cs => 1,
            Register::Dx | Register::Dl | Register::Ss => 2,
            Register::Bx | Register::Bl | Register::Ds => 3,
            Register::Sp | Register::Ah => 4,
            Register::Bp | Register::Ch => 5,
            Register::Si | Register::Dh => 6,
            Register::Di | Register::Bh => 7,
        }
    }

    pub fn word(code: u8) -> Register {
        Register::WORD[(code & 7) as usize]
    }

    pub fn byte(code: u8) -> Register {
        Register::BYTE[(code & 7) as usize]
    }

    pub fn general(code: u8, width: Width) -> Register {
        match width {
            Width::Byte => Register::byte(code),
            Width::Word => Register::word(code),
        }
    }

    pub fn is_segment(self) -> bool {
        matches!(self, Register::Es | Register::Cs | Register::Ss | Register::Ds)
    }

    pub fn width(self) -> Width {
        match self {
            Register::Al
            | Register::Cl
            | Register::Dl
            | Register::Bl
            | Register::Ah
            | Register::Ch
            | Register::Dh
            | Register::Bh => Width::Byte,
            _ => Width::Word,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Register::Ax => "ax",
            Register::Cx => "cx",
            Register::Dx => "dx",
            Register::Bx => "bx",
            Register::Sp => "sp",
            Register::Bp => "bp",
            Register::Si => "si",
            Register::Di => "di",
            Register::Al => "al",
            Register::Cl => "cl",
            Register::Dl => "dl",
            Register::Bl => "bl",
            Register::Ah => "ah",
            Register::Ch => "ch",
            Register::Dh => "dh",
            Register::Bh => "bh",
            Register::Es => "es",
            Register::Cs => "cs",
            Register::Ss => "ss",
            Register::Ds => "ds",
        }
    }

    pub fn from_name(name: &str) -> Option<Register> {
        Register::ALL
            .iter()
            .copied()
            .find(|r| r.name().eq_ignore_ascii_case(name))
    }
}

/// The four base registers a memory operand may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Base {
    Bx,
    Si,
    Di,
    Bp,
}

impl Base {
    pub const ALL: [Base; 4] = [Base::Bx, Base::Si, Base::Di, Base::Bp];

    /// ModRM `rm` field for a single-register base.
    pub fn rm(self) -> u8 {
        match self {
            Base::Si => 4,
            Base::Di => 5,
            Base::Bp => 6,
            Base::Bx => 7,
        }
    }

    pub fn from_rm(rm: u8) -> Option<Base> {
        match rm {
            4 => Some(Base::Si),
            5 => Some(Base::Di),
            6 => Some(Base::Bp),
            7 => Some(Base::Bx),
            _ => None,
        }
    }

    pub fn register(self) -> Register {
        match self {
            Base::Bx => Register::Bx,
            Base::Si => Register::Si,
            Base::Di => Register::Di,
            Base::Bp => Register::Bp,
        }
    }

    pub fn name(self) -> &'static str {
        self.register().name()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MemRef {
    pub base: Base,
    pub disp: i16,
    pub width: Width,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShiftCount {
    One,
    Cl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    Reg(Register),
    /// Immediate, masked to the operand width (byte immediates are 0..=255).
    Imm(u16),
    Mem(MemRef),
    Rel8(i8),
    Rel16(i16),
    Count(ShiftCount),
}

impl Operand {
    pub fn width(&self) -> Option<Width> {
        match self {
            Operand::Reg(r) => Some(r.width()),
            Operand::Mem(m) => Some(m.width),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RepPrefix {
    /// `rep` / `repe` / `repz` (0xF3).
    Rep,
    /// `repne` / `repnz` (0xF2).
    Repne,
}

impl RepPrefix {
    pub fn byte(self) -> u8 {
        match self {
            RepPrefix::Rep => 0xF3,
            RepPrefix::Repne => 0xF2,
        }
    }
}

macro_rules! mnemonics {
    ($($variant:ident => $name:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Mnemonic {
            $($variant),*
        }

        impl Mnemonic {
            pub const ALL: &'static [Mnemonic] = &[$(Mnemonic::$variant),*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Mnemonic::$variant => $name),*
                }
            }
        }
    };
}

mnemonics! {
    Nop => "nop", Stosw => "stosw", Lodsw => "lodsw", Movsw => "movsw", Cmpsw => "cmpsw",
    Scasw => "scasw", Pushf => "pushf", Popf => "popf", Lahf => "lahf", Stosb => "stosb",
    Lodsb => "lodsb", Movsb => "movsb", Cmpsb => "cmpsb", Scasb => "scasb", Xlat => "xlat",
    Cwd => "cwd", Cbw => "cbw", Cmc => "cmc", Clc => "clc", Stc => "stc", Cli => "cli",
    Sti => "sti", Cld => "cld", Std => "std",
    Wait => "wait", Int => "int",
    Ret => "ret", Retf => "retf", Iret => "iret",
    Div => "div", Mul => "mul", Inc => "inc", Dec => "dec", Not => "not", Neg => "neg",
    Cmp => "cmp", Mov => "mov", Add => "add", Sub => "sub", And => "and", Or => "or",
    Xor => "xor", Adc => "adc", Sbb => "sbb", Test => "test",
    Xchg => "xchg", Lea => "lea", Les => "les", Lds => "lds",
    Jmp => "jmp", Jcxz => "jcxz", Je => "je", Jne => "jne", Jp => "jp", Jnp => "jnp",
    Jo => "jo", Jno => "jno", Jc => "jc", Jnc => "jnc", Ja => "ja", Jna => "jna",
    Js => "js", Jns => "jns", Jl => "jl", Jnl => "jnl", Jle => "jle", Jnle => "jnle",
    Loopnz => "loopnz", Loopz => "loopz", Loop => "loop",
    Call => "call", CallFar => "call far",
    Push => "push", Pop => "pop",
    Rol => "rol", Ror => "ror", Rcl => "rcl", Rcr => "rcr", Shl => "shl", Shr => "shr",
    Sar => "sar",
    Dw => "dw",
}

impl Mnemonic {
    /// Operand-less instructions that may follow a `rep` prefix.
    pub fn is_plain_op(self) -> bool {
        use Mnemonic::*;
        matches!(
            self,
            Nop | Stosw
                | Lodsw
                | Movsw
                | Cmpsw
                | Scasw
                | Pushf
                | Popf
                | Lahf
                | Stosb
                | Lodsb
                | Movsb
                | Cmpsb
                | Scasb
                | Xlat
                | Cwd
                | Cbw
                | Cmc
                | Clc
                | Stc
                | Cli
                | Sti
                | Cld
                | Std
        )
    }

    pub fn is_string_op(self) -> bool {
        use Mnemonic::*;
        matches!(
            self,
            Stosw | Lodsw | Movsw | Cmpsw | Scasw | Stosb | Lodsb | Movsb | Cmpsb | Scasb
        )
    }

    pub fn is_alu(self) -> bool {
        use Mnemonic::*;
        matches!(self, Add | Or | Adc | Sbb | And | Sub | Xor | Cmp)
    }

    /// `/digit` of the 0x80-0x83 immediate group and `op << 3` for the
    /// register forms.
    pub fn alu_index(self) -> Option<u8> {
        use Mnemonic::*;
        Some(match self {
            Add => 0,
            Or => 1,
            Adc => 2,
            Sbb => 3,
            And => 4,
            Sub => 5,
            Xor => 6,
            Cmp => 7,
            _ => return None,
        })
    }

    pub fn alu_from_index(i: u8) -> Mnemonic {
        use Mnemonic::*;
        [Add, Or, Adc, Sbb, And, Sub, Xor, Cmp][(i & 7) as usize]
    }

    pub fn shift_index(self) -> Option<u8> {
        use Mnemonic::*;
        Some(match self {
            Rol => 0,
            Ror => 1,
            Rcl => 2,
            Rcr => 3,
            Shl => 4,
            Shr => 5,
            Sar => 7,
            _ => return None,
        })
    }

    pub fn is_shift(self) -> bool {
        self.shift_index().is_some()
    }

    /// Low nibble of the short conditional jump opcode (0x70 + cc).
    pub fn condition_code(self) -> Option<u8> {
        use Mnemonic::*;
        Some(match self {
            Jo => 0x0,
            Jno => 0x1,
            Jc => 0x2,
            Jnc => 0x3,
            Je => 0x4,
            Jne => 0x5,
            Jna => 0x6,
            Ja => 0x7,
            Js => 0x8,
            Jns => 0x9,
            Jp => 0xA,
            Jnp => 0xB,
            Jl => 0xC,
            Jnl => 0xD,
            Jle => 0xE,
            Jnle => 0xF,
            _ => return None,
        })
    }

    pub fn from_condition_code(cc: u8) -> Mnemonic {
        use Mnemonic::*;
        [
            Jo, Jno, Jc, Jnc, Je, Jne, Jna, Ja, Js, Jns, Jp, Jnp, Jl, Jnl, Jle, Jnle,
        ][(cc & 0xF) as usize]
    }

    /// Branches that only exist with an 8-bit displacement on the 8086.
    pub fn is_short_branch(self) -> bool {
        self.condition_code().is_some()
            || matches!(self, Mnemonic::Jcxz | Mnemonic::Loop | Mnemonic::Loopz | Mnemonic::Loopnz)
    }

    /// Source-level name lookup, including the usual aliases.
    pub fn parse(name: &str) -> Option<Mnemonic> {
        let lower = name.to_ascii_lowercase();
        let alias = match lower.as_str() {
            "xlatb" => Some(Mnemonic::Xlat),
            "retn" => Some(Mnemonic::Ret),
            "sal" => Some(Mnemonic::Shl),
            "jz" => Some(Mnemonic::Je),
            "jnz" => Some(Mnemonic::Jne),
            "jb" | "jnae" => Some(Mnemonic::Jc),
            "jae" | "jnb" => Some(Mnemonic::Jnc),
            "jbe" => Some(Mnemonic::Jna),
            "jnbe" => Some(Mnemonic::Ja),
            "jge" => Some(Mnemonic::Jnl),
            "jnge" => Some(Mnemonic::Jl),
            "jng" => Some(Mnemonic::Jle),
            "jg" => Some(Mnemonic::Jnle),
            "jpe" => Some(Mnemonic::Jp),
            "jpo" => Some(Mnemonic::Jnp),
            "loopne" => Some(Mnemonic::Loopnz),
            "loope" => Some(Mnemonic::Loopz),
            _ => None,
        };
        alias.or_else(|| {
            Mnemonic::ALL
                .iter()
                .copied()
                .find(|m| *m != Mnemonic::CallFar && m.name() == lower)
        })
    }
}

/// Up to two operands, stored inline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Operands {
    slots: [Option<Operand>; 2],
}

impl Operands {
    pub fn none() -> Operands {
        Operands::default()
    }

    pub fn one(a: Operand) -> Operands {
        Operands {
            slots: [Some(a), None],
        }
    }

    pub fn two(a: Operand, b: Operand) -> Operands {
        Operands {
            slots: [Some(a), Some(b)],
        }
    }

    pub fn len(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.slots[0].is_none()
    }

    pub fn first(&self) -> Option<Operand> {
        self.slots[0]
    }

    pub fn second(&self) -> Option<Operand> {
        self.slots[1]
    }

    pub fn iter(&self) -> impl Iterator<Item = Operand> + '_ {
        self.slots.iter().flatten().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub rep: Option<RepPrefix>,
    pub mnemonic: Mnemonic,
    pub operands: Operands,
}

impl Instruction {
    pub fn new(mnemonic: Mnemonic, operands: Operands) -> Instruction {
        Instruction {
            rep: None,
            mnemonic,
            operands,
        }
        .normalized()
    }

    pub fn plain(mnemonic: Mnemonic) -> Instruction {
        Instruction::new(mnemonic, Operands::none())
    }

    pub fn unary(mnemonic: Mnemonic, a: Operand) -> Instruction {
        Instruction::new(mnemonic, Operands::one(a))
    }

    pub fn binary(mnemonic: Mnemonic, a: Operand, b: Operand) -> Instruction {
        Instruction::new(mnemonic, Operands::two(a, b))
    }

    pub fn with_rep(mut self, rep: RepPrefix) -> Instruction {
        self.rep = Some(rep);
        self
    }

    /// Brings symmetric operand orders to the form the decoder produces, so
    /// that instructions sharing one machine encoding compare equal.
    pub fn normalized(mut self) -> Instruction {
        let (a, b) = (self.operands.first(), self.operands.second());
        match (self.mnemonic, a, b) {
            (Mnemonic::Test | Mnemonic::Xchg, Some(Operand::Reg(r)), Some(Operand::Mem(m))) => {
                self.operands = Operands::two(Operand::Mem(m), Operand::Reg(r));
            }
            (Mnemonic::Xchg, Some(Operand::Reg(r)), Some(Operand::Reg(Register::Ax)))
                if r != Register::Ax && r.width() == Width::Word =>
            {
                self.operands = Operands::two(Operand::Reg(Register::Ax), Operand::Reg(r));
            }
            (Mnemonic::Xchg, Some(Operand::Reg(Register::Ax)), Some(Operand::Reg(Register::Ax))) => {
                self.mnemonic = Mnemonic::Nop;
                self.operands = Operands::none();
            }
            _ => {}
        }
        self
    }
}

pub(crate) fn fmt_hex(value: u16) -> String {
    format!("0x{:x}", value)
}

impl fmt::Display for MemRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.disp {
            0 => write!(f, "[{}]", self.base.name()),
            d if d < 0 => write!(f, "[{} - 0x{:x}]", self.base.name(), (d as i32).unsigned_abs()),
            d => write!(f, "[{} + 0x{:x}]", self.base.name(), d),
        }
    }
}

fn write_rel(f: &mut fmt::Formatter<'_>, offset: i32) -> fmt::Result {
    if offset < 0 {
        write!(f, "$-{}", -offset)
    } else {
        write!(f, "$+{}", offset)
    }
}

impl fmt::Display for Instruction {
    /// Renders with relative branches as `$+n` / `$-n` offsets from the
    /// instruction start; the disassembler substitutes labels.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(rep) = self.rep {
            f.write_str(match rep {
                RepPrefix::Rep => "rep ",
                RepPrefix::Repne => "repne ",
            })?;
        }
        f.write_str(self.mnemonic.name())?;
        let needs_size = |other: Option<Operand>| !matches!(other, Some(Operand::Reg(_)));
        let ops: Vec<Operand> = self.operands.iter().collect();
        for (i, op) in ops.iter().enumerate() {
            f.write_str(if i == 0 { " " } else { ", " })?;
            match op {
                Operand::Reg(r) => f.write_str(r.name())?,
                Operand::Imm(v) => f.write_str(&fmt_hex(*v))?,
                Operand::Mem(m) => {
                    let other = if i == 0 { ops.get(1).copied() } else { ops.first().copied() };
                    let sized = match self.mnemonic {
                        Mnemonic::Lea | Mnemonic::Les | Mnemonic::Lds => false,
                        Mnemonic::Call | Mnemonic::CallFar | Mnemonic::Jmp => false,
                        _ => needs_size(if ops.len() == 1 { None } else { other }),
                    };
                    if sized {
                        f.write_str(match m.width {
                            Width::Byte => "BYTE ",
                            Width::Word => "WORD ",
                        })?;
                    }
                    write!(f, "{}", m)?
                }
                Operand::Rel8(d) => write_rel(f, *d as i32 + 2)?,
                Operand::Rel16(d) => {
                    if self.mnemonic == Mnemonic::Jmp {
                        f.write_str("near ")?;
                    }
                    write_rel(f, *d as i32 + 3)?
                }
                Operand::Count(ShiftCount::One) => f.write_str("1")?,
                Operand::Count(ShiftCount::Cl) => f.write_str("cl")?,
            }
        }
        Ok(())
    }
}
