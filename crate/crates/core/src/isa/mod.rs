//! The supported 8086 subset: instruction model, canonical encoder and
//! decoder, assembler and disassembler.

mod assembler;
mod decode;
mod disasm;
mod encode;
mod instruction;

pub use assembler::{assemble, assemble_at, AssembleError, AssembleErrorKind, AssembledImage, MAX_IMAGE_LEN};
pub use decode::{decode, Illegal};
pub use disasm::{disassemble, render_instruction};
pub use encode::{encode, encode_inline, EncodedBytes, MAX_INSTRUCTION_LEN};
pub use instruction::{
    Base, Instruction, MemRef, Mnemonic, Operand, Operands, RepPrefix, Register, ShiftCount, Width,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IsaError {
    #[error("operand combination outside the supported subset: `{0}`")]
    Unencodable(String),
}
