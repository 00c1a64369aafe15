#![allow(dead_code)]

pub mod battles;

use cgforge::isa::{Base, Instruction, MemRef, Mnemonic, Operand, RepPrefix, Register, ShiftCount, Width};
use proptest::prelude::*;
use proptest::sample::select;

fn width() -> impl Strategy<Value = Width> {
    prop_oneof![Just(Width::Byte), Just(Width::Word)]
}

fn disp() -> impl Strategy<Value = i16> {
    prop_oneof![
        Just(0i16),
        -128i16..128,
        any::<i16>(),
        select(vec![127i16, 128, -128, -129, i16::MAX, i16::MIN]),
    ]
}

pub fn mem(w: Width) -> impl Strategy<Value = Operand> {
    (select(Base::ALL.to_vec()), disp()).prop_map(move |(base, disp)| Operand::Mem(MemRef { base, disp, width: w }))
}

pub fn reg(w: Width) -> impl Strategy<Value = Operand> {
    let regs = match w {
        Width::Byte => Register::BYTE.to_vec(),
        Width::Word => Register::WORD.to_vec(),
    };
    select(regs).prop_map(Operand::Reg)
}

pub fn imm(w: Width) -> impl Strategy<Value = Operand> {
    prop_oneof![any::<u16>(), 0u16..256, select(vec![0u16, 0x7f, 0x80, 0xff, 0xff80, 0xff7f, 0xffff])]
        .prop_map(move |v| Operand::Imm(if w == Width::Byte { v & 0xff } else { v }))
}

fn rm(w: Width) -> BoxedStrategy<Operand> {
    prop_oneof![reg(w), mem(w)].boxed()
}

fn double(m: Mnemonic) -> impl Strategy<Value = Instruction> {
    width().prop_flat_map(move |w| {
        prop_oneof![
            (reg(w), reg(w)),
            (reg(w), mem(w)),
            (mem(w), reg(w)),
            (reg(w), imm(w)),
            (mem(w), imm(w)),
        ]
        .prop_map(move |(a, b)| Instruction::binary(m, a, b))
    })
}

fn plain() -> impl Strategy<Value = Instruction> {
    let ops: Vec<Mnemonic> = Mnemonic::ALL.iter().copied().filter(|m| m.is_plain_op()).collect();
    (select(ops), 0u8..4).prop_map(|(m, r)| {
        let i = Instruction::plain(m);
        match r {
            0 => i.with_rep(RepPrefix::Rep),
            1 => i.with_rep(RepPrefix::Repne),
            _ => i,
        }
    })
}

fn branch() -> impl Strategy<Value = Instruction> {
    let short: Vec<Mnemonic> = Mnemonic::ALL.iter().copied().filter(|m| m.is_short_branch()).collect();
    prop_oneof![
        (select(short), any::<i8>()).prop_map(|(m, d)| Instruction::unary(m, Operand::Rel8(d))),
        any::<i8>().prop_map(|d| Instruction::unary(Mnemonic::Jmp, Operand::Rel8(d))),
        any::<i16>().prop_map(|d| Instruction::unary(Mnemonic::Jmp, Operand::Rel16(d))),
        any::<i16>().prop_map(|d| Instruction::unary(Mnemonic::Call, Operand::Rel16(d))),
    ]
}

/// Any instruction of the subset, over every operand form the grammar can
/// produce.
pub fn instruction() -> impl Strategy<Value = Instruction> {
    use Mnemonic::*;
    let alu = select(vec![Add, Or, Adc, Sbb, And, Sub, Xor, Cmp, Mov, Test]);
    prop_oneof![
        alu.prop_flat_map(double),
        width().prop_flat_map(|w| (reg(w), rm(w)).prop_map(|(a, b)| Instruction::binary(Xchg, a, b))),
        (select(vec![Div, Mul, Inc, Dec, Not, Neg]), width().prop_flat_map(rm))
            .prop_map(|(m, a)| Instruction::unary(m, a)),
        (select(vec![Lea, Les, Lds]), reg(Width::Word), mem(Width::Word))
            .prop_map(|(m, a, b)| Instruction::binary(m, a, b)),
        prop_oneof![
            rm(Width::Word),
            select(Register::SEGMENT.to_vec()).prop_map(Operand::Reg)
        ]
        .prop_map(|a| Instruction::unary(Push, a)),
        prop_oneof![
            rm(Width::Word),
            select(vec![Register::Es, Register::Ds]).prop_map(Operand::Reg)
        ]
        .prop_map(|a| Instruction::unary(Pop, a)),
        (
            select(vec![Rol, Ror, Rcl, Rcr, Shl, Shr, Sar]),
            width().prop_flat_map(rm),
            prop_oneof![Just(ShiftCount::One), Just(ShiftCount::Cl)]
        )
            .prop_map(|(m, a, c)| Instruction::binary(m, a, Operand::Count(c))),
        (select(vec![Jmp, Call]), rm(Width::Word)).prop_map(|(m, a)| Instruction::unary(m, a)),
        mem(Width::Word).prop_map(|a| Instruction::unary(CallFar, a)),
        plain(),
        select(vec![Wait, Ret, Retf, Iret]).prop_map(Instruction::plain),
        select(vec![0x86u16, 0x87]).prop_map(|v| Instruction::unary(Int, Operand::Imm(v))),
        branch(),
    ]
}
