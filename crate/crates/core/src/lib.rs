//! Grammar-guided evolution of two-part 8086 survivors for a shared-memory
//! battle arena.

pub mod isa;
pub mod engine;
pub mod grammar;
pub mod evolution;
pub mod surrogate;
pub mod cli;
