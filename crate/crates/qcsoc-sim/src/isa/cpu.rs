//! Timing-annotated RV32I(+M) interpreter.
//!
//! The core is cycle-stepped: [`Cpu::tick`] advances exactly one cycle. Every
//! instruction costs one cycle plus a deterministic penalty:
//!
//! * taken branches and jumps pay `branch_taken_penalty` extra cycles;
//! * loads pay `ram_load_latency` or `mmio_load_latency` depending on the
//!   region, and sample the bus *at retire*, not at issue;
//! * stores and pulses that hit a full parameter FIFO occupy the pipe and
//!   retry every cycle until the FIFO drains;
//! * everything else (ALU, multiply/divide, stores, counter reads, fence)
//!   retires in the issue cycle.
//!
//! Faults are detected at issue — the faulting instruction never retires and
//! never applies any effect — while `pc` keeps pointing at it for diagnosis.
//! The environment-call instruction stops the core the same way, recording
//! the program's exit code from a0.

use super::decode::{
    self, AluOp, BranchOp, Instr, LoadOp, MulOp, Pulse, StoreOp, CSR_CYCLE, CSR_CYCLEH, CSR_TIME,
    CSR_TIMEH, OPC_PULSE,
};
use crate::bus::{BusError, BusErrorKind, LoadClass, SocBus, StoreOutcome};
use crate::rfsg::PulseParams;

/// Cycle-cost knobs of the in-order pipe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    /// Extra cycles for a taken branch, `jal`, or `jalr`.
    pub branch_taken_penalty: u32,
    /// Extra cycles for loads from program/data/envelope memory.
    pub ram_load_latency: u32,
    /// Extra cycles for loads from register banks and capture buffers.
    pub mmio_load_latency: u32,
    /// Whether the multiply/divide extension is fitted.
    pub mul_div: bool,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            branch_taken_penalty: 3,
            ram_load_latency: 1,
            mmio_load_latency: 2,
            mul_div: true,
        }
    }
}

/// Why the core stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    /// Environment call: orderly exit, `detail` carries a0.
    ProgramExit,
    /// Breakpoint instruction.
    Breakpoint,
    /// Undecodable or unfitted instruction; `detail` is the word.
    IllegalInstruction,
    /// Unmapped, read-only, word-only or undefined-register access;
    /// `detail` is the address.
    BusFault,
    /// Misaligned access or control-flow target; `detail` is the address.
    Misaligned,
}

/// Terminal state of the core. `pc` still addresses the instruction that
/// stopped it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fault {
    pub kind: FaultKind,
    pub pc: u32,
    pub detail: u32,
}

/// Architectural state snapshot for cross-checking against reference
/// implementations: registers and program counter only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpuState {
    pub regs: [u32; 32],
    pub pc: u32,
}

/// An instruction in flight across cycle boundaries.
#[derive(Debug, Clone, Copy)]
enum Pending {
    /// Burning branch-penalty cycles; jump lands when the count runs out.
    Burn { remaining: u32, pc_next: u32 },
    /// A load waiting out its latency; the bus is sampled on the last cycle.
    Load {
        remaining: u32,
        op: LoadOp,
        rd: u8,
        addr: u32,
    },
    /// A store that hit a full FIFO, retried every cycle.
    Store { op: StoreOp, addr: u32, value: u32 },
    /// A pulse that hit a full FIFO, retried every cycle.
    Pulse { pulse: Pulse },
}

#[derive(Debug, Clone)]
pub struct Cpu {
    pub regs: [u32; 32],
    pub pc: u32,
    cost: CostModel,
    pending: Option<Pending>,
    fault: Option<Fault>,
    retired: u64,
}

impl Cpu {
    pub fn new(cost: CostModel) -> Self {
        Cpu {
            regs: [0; 32],
            pc: 0,
            cost,
            pending: None,
            fault: None,
            retired: 0,
        }
    }

    pub fn fault(&self) -> Option<&Fault> {
        self.fault.as_ref()
    }

    pub fn halted(&self) -> bool {
        self.fault.is_some()
    }

    /// Instructions retired so far (faulting instructions never retire).
    pub fn retired(&self) -> u64 {
        self.retired
    }

    pub fn state(&self) -> CpuState {
        CpuState {
            regs: self.regs,
            pc: self.pc,
        }
    }

    /// Advances the core by one cycle. `now` is the global cycle index the
    /// counters read. Ticking a halted core does nothing.
    pub fn tick(&mut self, now: u64, bus: &mut SocBus) {
        if self.fault.is_some() {
            return;
        }
        match self.pending.take() {
            None => self.issue(now, bus),
            Some(Pending::Burn { remaining, pc_next }) => {
                if remaining > 1 {
                    self.pending = Some(Pending::Burn {
                        remaining: remaining - 1,
                        pc_next,
                    });
                } else {
                    self.retire(pc_next);
                }
            }
            Some(Pending::Load {
                remaining,
                op,
                rd,
                addr,
            }) => {
                if remaining > 1 {
                    self.pending = Some(Pending::Load {
                        remaining: remaining - 1,
                        op,
                        rd,
                        addr,
                    });
                } else {
                    // The architectural moment of the load: sampled at retire.
                    let raw = bus
                        .load(addr, op.width())
                        .expect("load was validated at issue");
                    self.write_reg(rd, extend(op, raw));
                    self.retire(self.pc.wrapping_add(4));
                }
            }
            Some(Pending::Store { op, addr, value }) => {
                let out = bus
                    .store(now, addr, op.width(), value)
                    .expect("store was validated at issue");
                match out {
                    StoreOutcome::Stall => self.pending = Some(Pending::Store { op, addr, value }),
                    StoreOutcome::Done => self.retire(self.pc.wrapping_add(4)),
                }
            }
            Some(Pending::Pulse { pulse }) => match self.issue_pulse(now, bus, &pulse) {
                Ok(StoreOutcome::Stall) => self.pending = Some(Pending::Pulse { pulse }),
                Ok(StoreOutcome::Done) => self.retire(self.pc.wrapping_add(16)),
                Err(e) => self.bus_fault(e),
            },
        }
    }

    fn issue(&mut self, now: u64, bus: &mut SocBus) {
        let pc = self.pc;
        let w0 = match bus.fetch_word(pc) {
            Ok(w) => w,
            Err(e) => return self.bus_fault(e),
        };
        let mut words = [w0, 0, 0, 0];
        if w0 & 0x7F == OPC_PULSE {
            for (k, slot) in words.iter_mut().enumerate().skip(1) {
                match bus.fetch_word(pc.wrapping_add(4 * k as u32)) {
                    Ok(w) => *slot = w,
                    Err(e) => return self.bus_fault(e),
                }
            }
        }
        let instr = match decode::decode(&words) {
            Ok(i) => i,
            Err(word) => return self.fault_at(FaultKind::IllegalInstruction, word),
        };
        match instr {
            Instr::Lui { rd, imm } => {
                self.write_reg(rd, imm);
                self.retire(pc.wrapping_add(4));
            }
            Instr::Auipc { rd, imm } => {
                self.write_reg(rd, pc.wrapping_add(imm));
                self.retire(pc.wrapping_add(4));
            }
            Instr::Jal { rd, offset } => {
                self.write_reg(rd, pc.wrapping_add(4));
                self.jump(pc.wrapping_add(offset as u32));
            }
            Instr::Jalr { rd, rs1, offset } => {
                let target = self.regs[rs1 as usize].wrapping_add(offset as u32) & !1;
                self.write_reg(rd, pc.wrapping_add(4));
                self.jump(target);
            }
            Instr::Branch {
                op,
                rs1,
                rs2,
                offset,
            } => {
                let (a, b) = (self.regs[rs1 as usize], self.regs[rs2 as usize]);
                if branch_taken(op, a, b) {
                    self.jump(pc.wrapping_add(offset as u32));
                } else {
                    self.retire(pc.wrapping_add(4));
                }
            }
            Instr::Load {
                op,
                rd,
                rs1,
                offset,
            } => {
                let addr = self.regs[rs1 as usize].wrapping_add(offset as u32);
                let class = match bus.classify_load(addr, op.width()) {
                    Ok(c) => c,
                    Err(e) => return self.bus_fault(e),
                };
                let latency = match class {
                    LoadClass::Ram => self.cost.ram_load_latency,
                    LoadClass::Mmio => self.cost.mmio_load_latency,
                };
                if latency == 0 {
                    let raw = bus.load(addr, op.width()).expect("just classified");
                    self.write_reg(rd, extend(op, raw));
                    self.retire(pc.wrapping_add(4));
                } else {
                    self.pending = Some(Pending::Load {
                        remaining: latency,
                        op,
                        rd,
                        addr,
                    });
                }
            }
            Instr::Store {
                op,
                rs1,
                rs2,
                offset,
            } => {
                let addr = self.regs[rs1 as usize].wrapping_add(offset as u32);
                if let Err(e) = bus.classify_store(addr, op.width()) {
                    return self.bus_fault(e);
                }
                let value = self.regs[rs2 as usize];
                match bus
                    .store(now, addr, op.width(), value)
                    .expect("just classified")
                {
                    StoreOutcome::Stall => self.pending = Some(Pending::Store { op, addr, value }),
                    StoreOutcome::Done => self.retire(pc.wrapping_add(4)),
                }
            }
            Instr::AluImm { op, rd, rs1, imm } => {
                let v = alu(op, self.regs[rs1 as usize], imm as u32);
                self.write_reg(rd, v);
                self.retire(pc.wrapping_add(4));
            }
            Instr::Alu { op, rd, rs1, rs2 } => {
                let v = alu(op, self.regs[rs1 as usize], self.regs[rs2 as usize]);
                self.write_reg(rd, v);
                self.retire(pc.wrapping_add(4));
            }
            Instr::Mul { op, rd, rs1, rs2 } => {
                if !self.cost.mul_div {
                    return self.fault_at(FaultKind::IllegalInstruction, words[0]);
                }
                let v = mul(op, self.regs[rs1 as usize], self.regs[rs2 as usize]);
                self.write_reg(rd, v);
                self.retire(pc.wrapping_add(4));
            }
            Instr::Fence => self.retire(pc.wrapping_add(4)),
            Instr::Ecall => self.fault_at(FaultKind::ProgramExit, self.regs[10]),
            Instr::Ebreak => self.fault_at(FaultKind::Breakpoint, 0),
            Instr::CsrRead { rd, csr } => {
                let v = match csr {
                    CSR_CYCLE | CSR_TIME => now as u32,
                    CSR_CYCLEH | CSR_TIMEH => (now >> 32) as u32,
                    _ => unreachable!("decoder admits only the counter CSRs"),
                };
                self.write_reg(rd, v);
                self.retire(pc.wrapping_add(4));
            }
            Instr::Pulse(p) => match self.issue_pulse(now, bus, &p) {
                Ok(StoreOutcome::Stall) => self.pending = Some(Pending::Pulse { pulse: p }),
                Ok(StoreOutcome::Done) => self.retire(pc.wrapping_add(16)),
                Err(e) => self.bus_fault(e),
            },
            Instr::SetTime { rs1 } => {
                bus.set_treg(self.regs[rs1 as usize]);
                self.retire(pc.wrapping_add(4));
            }
        }
    }

    fn issue_pulse(
        &mut self,
        now: u64,
        bus: &mut SocBus,
        p: &Pulse,
    ) -> Result<StoreOutcome, BusError> {
        let params = PulseParams {
            freq: p.freq,
            phase: p.phase,
            amp: p.amp,
            env_start: p.env_start,
            duration: p.duration,
        };
        bus.pulse(now, p.id, (p.flags & 1) as usize, params)
    }

    /// Control transfer with target validation and the taken-branch penalty.
    fn jump(&mut self, target: u32) {
        if target % 4 != 0 {
            return self.fault_at(FaultKind::Misaligned, target);
        }
        if self.cost.branch_taken_penalty == 0 {
            self.retire(target);
        } else {
            self.pending = Some(Pending::Burn {
                remaining: self.cost.branch_taken_penalty,
                pc_next: target,
            });
        }
    }

    fn retire(&mut self, pc_next: u32) {
        self.pc = pc_next;
        self.retired += 1;
    }

    fn write_reg(&mut self, rd: u8, value: u32) {
        if rd != 0 {
            self.regs[rd as usize] = value;
        }
    }

    fn fault_at(&mut self, kind: FaultKind, detail: u32) {
        self.fault = Some(Fault {
            kind,
            pc: self.pc,
            detail,
        });
    }

    fn bus_fault(&mut self, e: BusError) {
        let kind = match e.kind {
            BusErrorKind::Misaligned => FaultKind::Misaligned,
            _ => FaultKind::BusFault,
        };
        self.fault_at(kind, e.addr);
    }
}

fn extend(op: LoadOp, raw: u32) -> u32 {
    match op {
        LoadOp::Lb => raw as u8 as i8 as i32 as u32,
        LoadOp::Lbu => raw & 0xFF,
        LoadOp::Lh => raw as u16 as i16 as i32 as u32,
        LoadOp::Lhu => raw & 0xFFFF,
        LoadOp::Lw => raw,
    }
}

fn alu(op: AluOp, a: u32, b: u32) -> u32 {
    match op {
        AluOp::Add => a.wrapping_add(b),
        AluOp::Sub => a.wrapping_sub(b),
        AluOp::Sll => a.wrapping_shl(b),
        AluOp::Slt => ((a as i32) < (b as i32)) as u32,
        AluOp::Sltu => (a < b) as u32,
        AluOp::Xor => a ^ b,
        AluOp::Srl => a.wrapping_shr(b),
        AluOp::Sra => (a as i32).wrapping_shr(b) as u32,
        AluOp::Or => a | b,
        AluOp::And => a & b,
    }
}

fn mul(op: MulOp, a: u32, b: u32) -> u32 {
    let (sa, sb) = (a as i32, b as i32);
    match op {
        MulOp::Mul => a.wrapping_mul(b),
        MulOp::Mulh => ((sa as i64 * sb as i64) >> 32) as u32,
        MulOp::Mulhsu => ((sa as i64).wrapping_mul(b as i64) >> 32) as u32,
        MulOp::Mulhu => ((a as u64 * b as u64) >> 32) as u32,
        // Division follows the architectural corner cases: x/0 = -1 with
        // remainder x, and MIN/-1 wraps to MIN with remainder 0.
        MulOp::Div => {
            if sb == 0 {
                u32::MAX
            } else {
                sa.wrapping_div(sb) as u32
            }
        }
        MulOp::Divu => {
            if b == 0 {
                u32::MAX
            } else {
                a / b
            }
        }
        MulOp::Rem => {
            if sb == 0 {
                a
            } else {
                sa.wrapping_rem(sb) as u32
            }
        }
        MulOp::Remu => {
            if b == 0 {
                a
            } else {
                a % b
            }
        }
    }
}

fn branch_taken(op: BranchOp, a: u32, b: u32) -> bool {
    match op {
        BranchOp::Beq => a == b,
        BranchOp::Bne => a != b,
        BranchOp::Blt => (a as i32) < (b as i32),
        BranchOp::Bge => (a as i32) >= (b as i32),
        BranchOp::Bltu => a < b,
        BranchOp::Bgeu => a >= b,
    }
}
