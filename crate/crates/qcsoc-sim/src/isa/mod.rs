//! RV32I(+M) control processor: instruction set and cycle-stepped core.
//!
//! [`decode`] defines the instruction representation shared by the core, the
//! assembler, and the disassembler. [`cpu`] is the timing-annotated
//! interpreter that drives the SoC bus.

pub mod cpu;
pub mod decode;

pub use cpu::{CostModel, Cpu, CpuState, Fault, FaultKind};
pub use decode::{AluOp, BranchOp, Instr, LoadOp, MulOp, Pulse, StoreOp};
