//! Single-cycle RV32I+M reference interpreter and a random instruction
//! generator, used to cross-check the pipelined core architecturally.
//!
//! The interpreter executes straight off the raw instruction word — fields
//! are sliced and the behavior written out from the base-ISA and M-extension
//! definitions, sharing no code with the simulator's decoder or core. Timing
//! is out of scope here: only registers, the program counter, and memory
//! effects are modeled.

use qcsoc_sim::bus::{DATA_BASE, DATA_SIZE};
use rand::Rng;

pub struct RefCpu {
    pub regs: [u32; 32],
    pub pc: u32,
    /// Image of the data RAM region.
    pub data: Vec<u8>,
}

impl RefCpu {
    pub fn new() -> Self {
        RefCpu {
            regs: [0; 32],
            pc: 0,
            data: vec![0; DATA_SIZE as usize],
        }
    }

    fn write_rd(&mut self, rd: u32, value: u32) {
        if rd != 0 {
            self.regs[rd as usize] = value;
        }
    }

    pub fn mem_load(&self, addr: u32, width: u32) -> u32 {
        let off = addr
            .checked_sub(DATA_BASE)
            .expect("reference loads stay in data RAM") as usize;
        assert!(
            off + width as usize <= self.data.len(),
            "reference load out of range"
        );
        let mut v = 0u32;
        for i in 0..width as usize {
            v |= (self.data[off + i] as u32) << (8 * i);
        }
        v
    }

    fn mem_store(&mut self, addr: u32, width: u32, value: u32) {
        let off = addr
            .checked_sub(DATA_BASE)
            .expect("reference stores stay in data RAM") as usize;
        assert!(
            off + width as usize <= self.data.len(),
            "reference store out of range"
        );
        for i in 0..width as usize {
            self.data[off + i] = (value >> (8 * i)) as u8;
        }
    }

    /// Execute one instruction word at the current pc.
    pub fn step(&mut self, instr: u32) {
        let opcode = instr & 0x7F;
        let rd = (instr >> 7) & 0x1F;
        let funct3 = (instr >> 12) & 0x7;
        let rs1 = ((instr >> 15) & 0x1F) as usize;
        let rs2 = ((instr >> 20) & 0x1F) as usize;
        let funct7 = instr >> 25;
        let a = self.regs[rs1];
        let b = self.regs[rs2];

        let imm_i = (instr as i32) >> 20;
        let imm_s = (((instr & 0xFE00_0000) as i32) >> 20) | (((instr >> 7) & 0x1F) as i32);
        let imm_b = ((((instr & 0x8000_0000) as i32) >> 19) as u32
            | ((instr & 0x80) << 4)
            | ((instr >> 20) & 0x7E0)
            | ((instr >> 7) & 0x1E)) as i32;
        let imm_u = instr & 0xFFFF_F000;
        let imm_j = ((((instr & 0x8000_0000) as i32) >> 11) as u32
            | (instr & 0xF_F000)
            | ((instr >> 9) & 0x800)
            | ((instr >> 20) & 0x7FE)) as i32;

        let mut next_pc = self.pc.wrapping_add(4);
        match opcode {
            0x37 => self.write_rd(rd, imm_u),                       // lui
            0x17 => self.write_rd(rd, self.pc.wrapping_add(imm_u)), // auipc
            0x6F => {
                // jal
                self.write_rd(rd, self.pc.wrapping_add(4));
                next_pc = self.pc.wrapping_add(imm_j as u32);
            }
            0x67 => {
                // jalr: bit 0 of the target is discarded
                let target = a.wrapping_add(imm_i as u32) & !1;
                self.write_rd(rd, self.pc.wrapping_add(4));
                next_pc = target;
            }
            0x63 => {
                let taken = match funct3 {
                    0b000 => a == b,
                    0b001 => a != b,
                    0b100 => (a as i32) < (b as i32),
                    0b101 => (a as i32) >= (b as i32),
                    0b110 => a < b,
                    0b111 => a >= b,
                    _ => panic!("bad branch funct3 {funct3}"),
                };
                if taken {
                    next_pc = self.pc.wrapping_add(imm_b as u32);
                }
            }
            0x03 => {
                let addr = a.wrapping_add(imm_i as u32);
                let v = match funct3 {
                    0b000 => self.mem_load(addr, 1) as u8 as i8 as i32 as u32, // lb
                    0b001 => self.mem_load(addr, 2) as u16 as i16 as i32 as u32, // lh
                    0b010 => self.mem_load(addr, 4),                           // lw
                    0b100 => self.mem_load(addr, 1),                           // lbu
                    0b101 => self.mem_load(addr, 2),                           // lhu
                    _ => panic!("bad load funct3 {funct3}"),
                };
                self.write_rd(rd, v);
            }
            0x23 => {
                let addr = a.wrapping_add(imm_s as u32);
                let width = match funct3 {
                    0b000 => 1,
                    0b001 => 2,
                    0b010 => 4,
                    _ => panic!("bad store funct3 {funct3}"),
                };
                self.mem_store(addr, width, b);
            }
            0x13 => {
                let imm = imm_i as u32;
                let shamt = imm & 0x1F;
                let v = match funct3 {
                    0b000 => a.wrapping_add(imm),
                    0b010 => ((a as i32) < imm_i) as u32,
                    0b011 => (a < imm) as u32,
                    0b100 => a ^ imm,
                    0b110 => a | imm,
                    0b111 => a & imm,
                    0b001 => a << shamt,
                    0b101 => {
                        if funct7 & 0x20 != 0 {
                            ((a as i32) >> shamt) as u32
                        } else {
                            a >> shamt
                        }
                    }
                    _ => unreachable!(),
                };
                self.write_rd(rd, v);
            }
            0x33 => {
                let v = if funct7 == 1 {
                    // M extension, with its architected corner cases:
                    // division by zero gives all-ones / the dividend, and
                    // MIN/-1 wraps to MIN with remainder 0.
                    let (sa, sb) = (a as i32, b as i32);
                    match funct3 {
                        0b000 => a.wrapping_mul(b),
                        0b001 => (((sa as i64) * (sb as i64)) >> 32) as u32,
                        0b010 => (((sa as i64) * (b as u64 as i64)) >> 32) as u32,
                        0b011 => (((a as u64) * (b as u64)) >> 32) as u32,
                        0b100 => {
                            if sb == 0 {
                                u32::MAX
                            } else {
                                sa.wrapping_div(sb) as u32
                            }
                        }
                        0b101 => {
                            if b == 0 {
                                u32::MAX
                            } else {
                                a / b
                            }
                        }
                        0b110 => {
                            if sb == 0 {
                                a
                            } else {
                                sa.wrapping_rem(sb) as u32
                            }
                        }
                        0b111 => {
                            if b == 0 {
                                a
                            } else {
                                a % b
                            }
                        }
                        _ => unreachable!(),
                    }
                } else {
                    let sub_or_sra = funct7 & 0x20 != 0;
                    match funct3 {
                        0b000 => {
                            if sub_or_sra {
                                a.wrapping_sub(b)
                            } else {
                                a.wrapping_add(b)
                            }
                        }
                        0b001 => a << (b & 0x1F),
                        0b010 => ((a as i32) < (b as i32)) as u32,
                        0b011 => (a < b) as u32,
                        0b100 => a ^ b,
                        0b101 => {
                            if sub_or_sra {
                                ((a as i32) >> (b & 0x1F)) as u32
                            } else {
                                a >> (b & 0x1F)
                            }
                        }
                        0b110 => a | b,
                        0b111 => a & b,
                        _ => unreachable!(),
                    }
                };
                self.write_rd(rd, v);
            }
            0x0F => {} // fence: no architectural effect on a single hart
            _ => panic!("reference interpreter fed unsupported opcode {opcode:#04x}"),
        }
        self.pc = next_pc;
    }
}

impl Default for RefCpu {
    fn default() -> Self {
        Self::new()
    }
}

/// A generated instruction plus the register preconditions that keep it on
/// architecturally clean ground (aligned, in-range memory and jump targets).
#[derive(Debug, Clone)]
pub struct TestInstr {
    pub word: u32,
    /// `(register, value)` pairs to force before execution.
    pub fixups: Vec<(usize, u32)>,
    /// Memory address a store writes, for checking the effect landed.
    pub touched: Option<u32>,
}

fn r_type(funct7: u32, rs2: u32, rs1: u32, funct3: u32, rd: u32, opcode: u32) -> u32 {
    (funct7 << 25) | (rs2 << 20) | (rs1 << 15) | (funct3 << 12) | (rd << 7) | opcode
}

fn i_type(imm: i32, rs1: u32, funct3: u32, rd: u32, opcode: u32) -> u32 {
    ((imm as u32) << 20) | (rs1 << 15) | (funct3 << 12) | (rd << 7) | opcode
}

fn s_type(imm: i32, rs2: u32, rs1: u32, funct3: u32) -> u32 {
    let imm = imm as u32;
    ((imm >> 5) << 25) | (rs2 << 20) | (rs1 << 15) | (funct3 << 12) | ((imm & 0x1F) << 7) | 0x23
}

fn b_type(imm: i32, rs2: u32, rs1: u32, funct3: u32) -> u32 {
    let imm = imm as u32;
    (((imm >> 12) & 1) << 31)
        | (((imm >> 5) & 0x3F) << 25)
        | (rs2 << 20)
        | (rs1 << 15)
        | (funct3 << 12)
        | (((imm >> 1) & 0xF) << 8)
        | (((imm >> 11) & 1) << 7)
        | 0x63
}

fn j_type(imm: i32, rd: u32) -> u32 {
    let imm = imm as u32;
    (((imm >> 20) & 1) << 31)
        | (((imm >> 1) & 0x3FF) << 21)
        | (((imm >> 11) & 1) << 20)
        | (((imm >> 12) & 0xFF) << 12)
        | (rd << 7)
        | 0x6F
}

/// A data-RAM address `width`-aligned and at least a word short of the end.
fn random_data_addr(rng: &mut impl Rng, width: u32) -> u32 {
    DATA_BASE + (rng.gen_range(0..DATA_SIZE - 4) & !(width - 1))
}

/// Draw one random RV32I(M) instruction. Branch and jump displacements are
/// kept 4-aligned and memory operands inside data RAM so that no draw trips
/// the alignment or bus-fault machinery — fault policy is pinned by the
/// core's own unit tests, while this generator feeds the architectural
/// comparison.
pub fn random_instruction(rng: &mut impl Rng) -> TestInstr {
    let rd = rng.gen_range(0..32);
    let rs1 = rng.gen_range(0..32);
    let rs2 = rng.gen_range(0..32);
    let mut fixups = Vec::new();
    let mut touched = None;

    let word = match rng.gen_range(0..9) {
        0 => {
            // Integer register-register, base set.
            let ops: [(u32, u32); 10] = [
                (0b000, 0x00),
                (0b000, 0x20),
                (0b001, 0x00),
                (0b010, 0x00),
                (0b011, 0x00),
                (0b100, 0x00),
                (0b101, 0x00),
                (0b101, 0x20),
                (0b110, 0x00),
                (0b111, 0x00),
            ];
            let (funct3, funct7) = ops[rng.gen_range(0..ops.len())];
            r_type(funct7, rs2, rs1, funct3, rd, 0x33)
        }
        1 => r_type(1, rs2, rs1, rng.gen_range(0..8), rd, 0x33), // M extension
        2 => {
            // Integer register-immediate, including the shift specials.
            match rng.gen_range(0..8) {
                0 => i_type(rng.gen_range(-2048..2048), rs1, 0b000, rd, 0x13),
                1 => i_type(rng.gen_range(-2048..2048), rs1, 0b010, rd, 0x13),
                2 => i_type(rng.gen_range(-2048..2048), rs1, 0b011, rd, 0x13),
                3 => i_type(rng.gen_range(-2048..2048), rs1, 0b100, rd, 0x13),
                4 => i_type(rng.gen_range(-2048..2048), rs1, 0b110, rd, 0x13),
                5 => i_type(rng.gen_range(-2048..2048), rs1, 0b111, rd, 0x13),
                6 => i_type(rng.gen_range(0..32), rs1, 0b001, rd, 0x13),
                _ => {
                    let shamt = rng.gen_range(0..32);
                    let arith = if rng.gen() { 0x400 } else { 0 };
                    i_type(shamt | arith, rs1, 0b101, rd, 0x13)
                }
            }
        }
        3 => {
            let imm20 = rng.gen::<u32>() & 0xF_FFFF;
            if rng.gen() {
                (imm20 << 12) | (rd << 7) | 0x37 // lui
            } else {
                (imm20 << 12) | (rd << 7) | 0x17 // auipc
            }
        }
        4 => {
            // Load: force rs1 so the effective address is in-range & aligned.
            let rs1 = rng.gen_range(1..32);
            let ops: [(u32, u32); 5] = [(0b000, 1), (0b001, 2), (0b010, 4), (0b100, 1), (0b101, 2)];
            let (funct3, width) = ops[rng.gen_range(0..ops.len())];
            let imm = rng.gen_range(-2048..2048);
            let addr = random_data_addr(rng, width);
            fixups.push((rs1 as usize, addr.wrapping_sub(imm as u32)));
            i_type(imm, rs1, funct3, rd, 0x03)
        }
        5 => {
            let rs1 = rng.gen_range(1..32);
            let ops: [(u32, u32); 3] = [(0b000, 1), (0b001, 2), (0b010, 4)];
            let (funct3, width) = ops[rng.gen_range(0..ops.len())];
            let imm = rng.gen_range(-2048..2048);
            let addr = random_data_addr(rng, width);
            fixups.push((rs1 as usize, addr.wrapping_sub(imm as u32)));
            touched = Some(addr);
            s_type(imm, rs2, rs1, funct3)
        }
        6 => {
            let conds: [u32; 6] = [0b000, 0b001, 0b100, 0b101, 0b110, 0b111];
            let funct3 = conds[rng.gen_range(0..conds.len())];
            let imm = rng.gen_range(-1024..1024) * 4;
            b_type(imm, rs2, rs1, funct3)
        }
        7 => j_type(rng.gen_range(-100_000..100_000) * 4, rd),
        _ => {
            // jalr: force rs1 so the cleared-bit-0 target is 4-aligned.
            let rs1 = rng.gen_range(1..32);
            let imm = rng.gen_range(-2048..2048);
            let target = rng.gen::<u32>() & !3;
            fixups.push((rs1 as usize, target.wrapping_sub(imm as u32)));
            i_type(imm, rs1, 0b000, rd, 0x67)
        }
    };
    TestInstr {
        word,
        fixups,
        touched,
    }
}

/// Deterministic corner cases prepended to the random stream: division and
/// remainder specials, full-width shifts, signedness boundaries, and
/// link-register aliasing.
pub fn edge_cases() -> Vec<TestInstr> {
    let case = |word: u32, regs: &[(usize, u32)]| TestInstr {
        word,
        fixups: regs.to_vec(),
        touched: None,
    };
    vec![
        // div / rem by zero
        case(r_type(1, 2, 1, 0b100, 3, 0x33), &[(1, 123), (2, 0)]),
        case(r_type(1, 2, 1, 0b101, 3, 0x33), &[(1, 123), (2, 0)]),
        case(r_type(1, 2, 1, 0b110, 3, 0x33), &[(1, 123), (2, 0)]),
        case(r_type(1, 2, 1, 0b111, 3, 0x33), &[(1, 123), (2, 0)]),
        // MIN / -1 overflow
        case(
            r_type(1, 2, 1, 0b100, 3, 0x33),
            &[(1, 0x8000_0000), (2, u32::MAX)],
        ),
        case(
            r_type(1, 2, 1, 0b110, 3, 0x33),
            &[(1, 0x8000_0000), (2, u32::MAX)],
        ),
        // mulh sign combinations
        case(
            r_type(1, 2, 1, 0b001, 3, 0x33),
            &[(1, 0x8000_0000), (2, 0x8000_0000)],
        ),
        case(
            r_type(1, 2, 1, 0b010, 3, 0x33),
            &[(1, u32::MAX), (2, u32::MAX)],
        ),
        case(
            r_type(1, 2, 1, 0b011, 3, 0x33),
            &[(1, u32::MAX), (2, u32::MAX)],
        ),
        // shift by 31 each way
        case(i_type(31, 1, 0b001, 3, 0x13), &[(1, 1)]),
        case(i_type(31 | 0x400, 1, 0b101, 3, 0x13), &[(1, 0x8000_0000)]),
        case(r_type(0, 2, 1, 0b101, 3, 0x33), &[(1, u32::MAX), (2, 31)]),
        // signed/unsigned comparison boundary
        case(r_type(0, 2, 1, 0b010, 3, 0x33), &[(1, 0x8000_0000), (2, 0)]),
        case(r_type(0, 2, 1, 0b011, 3, 0x33), &[(1, 0x8000_0000), (2, 0)]),
        // sign-extending loads over a stored 0xFFFF8080 pattern
        TestInstr {
            word: s_type(0, 2, 1, 0b010),
            fixups: vec![(1, DATA_BASE + 64), (2, 0xFFFF_8080)],
            touched: Some(DATA_BASE + 64),
        },
        case(i_type(0, 1, 0b000, 3, 0x03), &[(1, DATA_BASE + 64)]),
        case(i_type(0, 1, 0b001, 3, 0x03), &[(1, DATA_BASE + 64)]),
        case(i_type(2, 1, 0b101, 3, 0x03), &[(1, DATA_BASE + 64)]),
        // jalr with rd == rs1 (target must come from the old value)
        case(i_type(8, 5, 0b000, 5, 0x67), &[(5, 0x400)]),
        // jal with rd = x0 (plain jump)
        case(j_type(16, 0), &[]),
        // fence is a no-op
        case(0x0000_000F, &[]),
        // x0 stays zero even as a destination
        case(i_type(123, 0, 0b000, 0, 0x13), &[]),
    ]
}
