//! Instruction representation, decoder, and encoder for the control CPU.
//!
//! The base set is RV32I plus the M extension. Two custom instructions extend
//! it for pulse-level control:
//!
//! * `pulse` (custom-0, opcode `0b0001011`) occupies four consecutive words:
//!   word0 = `[duration 31:16][flags 15:12][id 11:7][opcode 6:0]`,
//!   word1 = frequency word, word2 = phase word,
//!   word3 = `[amp 31:16][env_start 15:0]`. The start time t0 comes from the
//!   schedule-time register, not from the instruction.
//! * `settime rs1` (custom-1, opcode `0b0101011`) copies rs1 into the
//!   schedule-time register; every other bit of the word must be zero.
//!
//! Counter reads use the standard CSRRS-with-rs1=x0 form for `cycle`, `time`,
//! `cycleh`, `timeh`; all other SYSTEM encodings besides ECALL/EBREAK are
//! illegal. Decoding is a pure function of the fetched words.

/// Opcode (bits 6:0) of the 128-bit pulse instruction.
pub const OPC_PULSE: u32 = 0b0001011;
/// Opcode of `settime`.
pub const OPC_SETTIME: u32 = 0b0101011;

pub const CSR_CYCLE: u16 = 0xC00;
pub const CSR_TIME: u16 = 0xC01;
pub const CSR_CYCLEH: u16 = 0xC80;
pub const CSR_TIMEH: u16 = 0xC81;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchOp {
    Beq,
    Bne,
    Blt,
    Bge,
    Bltu,
    Bgeu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadOp {
    Lb,
    Lh,
    Lw,
    Lbu,
    Lhu,
}

impl LoadOp {
    pub fn width(self) -> u32 {
        match self {
            LoadOp::Lb | LoadOp::Lbu => 1,
            LoadOp::Lh | LoadOp::Lhu => 2,
            LoadOp::Lw => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreOp {
    Sb,
    Sh,
    Sw,
}

impl StoreOp {
    pub fn width(self) -> u32 {
        match self {
            StoreOp::Sb => 1,
            StoreOp::Sh => 2,
            StoreOp::Sw => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AluOp {
    Add,
    Sub,
    Sll,
    Slt,
    Sltu,
    Xor,
    Srl,
    Sra,
    Or,
    And,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MulOp {
    Mul,
    Mulh,
    Mulhsu,
    Mulhu,
    Div,
    Divu,
    Rem,
    Remu,
}

/// Decoded pulse instruction fields. `duration` is in output samples;
/// `flags` bit0 selects the multiplex FIFO bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pulse {
    pub id: u8,
    pub flags: u8,
    pub duration: u16,
    pub freq: u32,
    pub phase: u32,
    pub amp: i16,
    pub env_start: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instr {
    Lui {
        rd: u8,
        imm: u32,
    },
    Auipc {
        rd: u8,
        imm: u32,
    },
    Jal {
        rd: u8,
        offset: i32,
    },
    Jalr {
        rd: u8,
        rs1: u8,
        offset: i32,
    },
    Branch {
        op: BranchOp,
        rs1: u8,
        rs2: u8,
        offset: i32,
    },
    Load {
        op: LoadOp,
        rd: u8,
        rs1: u8,
        offset: i32,
    },
    Store {
        op: StoreOp,
        rs1: u8,
        rs2: u8,
        offset: i32,
    },
    /// Register-immediate ALU op; for shifts `imm` is the shamt (0..=31).
    AluImm {
        op: AluOp,
        rd: u8,
        rs1: u8,
        imm: i32,
    },
    Alu {
        op: AluOp,
        rd: u8,
        rs1: u8,
        rs2: u8,
    },
    Mul {
        op: MulOp,
        rd: u8,
        rs1: u8,
        rs2: u8,
    },
    Fence,
    Ecall,
    Ebreak,
    /// CSRRS rd, csr, x0 — read-only counter access.
    CsrRead {
        rd: u8,
        csr: u16,
    },
    Pulse(Pulse),
    SetTime {
        rs1: u8,
    },
}

impl Instr {
    /// Instruction footprint in program memory.
    pub fn size_bytes(&self) -> u32 {
        match self {
            Instr::Pulse(_) => 16,
            _ => 4,
        }
    }
}

fn sext(v: u32, bits: u32) -> i32 {
    (v << (32 - bits)) as i32 >> (32 - bits)
}

/// Decode one instruction from a 4-word fetch window. Non-pulse instructions
/// use only `w[0]`. Returns the offending word on an illegal encoding.
pub fn decode(w: &[u32; 4]) -> Result<Instr, u32> {
    let word = w[0];
    let opcode = word & 0x7F;
    let rd = ((word >> 7) & 31) as u8;
    let f3 = (word >> 12) & 7;
    let rs1 = ((word >> 15) & 31) as u8;
    let rs2 = ((word >> 20) & 31) as u8;
    let f7 = word >> 25;
    let imm_i = (word as i32) >> 20;

    let instr = match opcode {
        0x37 => Instr::Lui {
            rd,
            imm: word & 0xFFFF_F000,
        },
        0x17 => Instr::Auipc {
            rd,
            imm: word & 0xFFFF_F000,
        },
        0x6F => {
            let imm = ((word >> 31) << 20)
                | (((word >> 12) & 0xFF) << 12)
                | (((word >> 20) & 1) << 11)
                | (((word >> 21) & 0x3FF) << 1);
            Instr::Jal {
                rd,
                offset: sext(imm, 21),
            }
        }
        0x67 if f3 == 0 => Instr::Jalr {
            rd,
            rs1,
            offset: imm_i,
        },
        0x63 => {
            let op = match f3 {
                0 => BranchOp::Beq,
                1 => BranchOp::Bne,
                4 => BranchOp::Blt,
                5 => BranchOp::Bge,
                6 => BranchOp::Bltu,
                7 => BranchOp::Bgeu,
                _ => return Err(word),
            };
            let imm = ((word >> 31) << 12)
                | (((word >> 7) & 1) << 11)
                | (((word >> 25) & 0x3F) << 5)
                | (((word >> 8) & 0xF) << 1);
            Instr::Branch {
                op,
                rs1,
                rs2,
                offset: sext(imm, 13),
            }
        }
        0x03 => {
            let op = match f3 {
                0 => LoadOp::Lb,
                1 => LoadOp::Lh,
                2 => LoadOp::Lw,
                4 => LoadOp::Lbu,
                5 => LoadOp::Lhu,
                _ => return Err(word),
            };
            Instr::Load {
                op,
                rd,
                rs1,
                offset: imm_i,
            }
        }
        0x23 => {
            let op = match f3 {
                0 => StoreOp::Sb,
                1 => StoreOp::Sh,
                2 => StoreOp::Sw,
                _ => return Err(word),
            };
            let imm = ((word >> 25) << 5) | ((word >> 7) & 0x1F);
            Instr::Store {
                op,
                rs1,
                rs2,
                offset: sext(imm, 12),
            }
        }
        0x13 => {
            let shamt = ((word >> 20) & 31) as i32;
            let (op, imm) = match f3 {
                0 => (AluOp::Add, imm_i),
                2 => (AluOp::Slt, imm_i),
                3 => (AluOp::Sltu, imm_i),
                4 => (AluOp::Xor, imm_i),
                6 => (AluOp::Or, imm_i),
                7 => (AluOp::And, imm_i),
                1 if f7 == 0 => (AluOp::Sll, shamt),
                5 if f7 == 0 => (AluOp::Srl, shamt),
                5 if f7 == 0x20 => (AluOp::Sra, shamt),
                _ => return Err(word),
            };
            Instr::AluImm { op, rd, rs1, imm }
        }
        0x33 => match f7 {
            0 => {
                let op = match f3 {
                    0 => AluOp::Add,
                    1 => AluOp::Sll,
                    2 => AluOp::Slt,
                    3 => AluOp::Sltu,
                    4 => AluOp::Xor,
                    5 => AluOp::Srl,
                    6 => AluOp::Or,
                    7 => AluOp::And,
                    _ => unreachable!(),
                };
                Instr::Alu { op, rd, rs1, rs2 }
            }
            0x20 => {
                let op = match f3 {
                    0 => AluOp::Sub,
                    5 => AluOp::Sra,
                    _ => return Err(word),
                };
                Instr::Alu { op, rd, rs1, rs2 }
            }
            1 => {
                let op = match f3 {
                    0 => MulOp::Mul,
                    1 => MulOp::Mulh,
                    2 => MulOp::Mulhsu,
                    3 => MulOp::Mulhu,
                    4 => MulOp::Div,
                    5 => MulOp::Divu,
                    6 => MulOp::Rem,
                    7 => MulOp::Remu,
                    _ => unreachable!(),
                };
                Instr::Mul { op, rd, rs1, rs2 }
            }
            _ => return Err(word),
        },
        0x0F if f3 == 0 => Instr::Fence,
        0x73 => {
            if word == 0x0000_0073 {
                Instr::Ecall
            } else if word == 0x0010_0073 {
                Instr::Ebreak
            } else if f3 == 2 && rs1 == 0 {
                let csr = (word >> 20) as u16;
                match csr {
                    CSR_CYCLE | CSR_TIME | CSR_CYCLEH | CSR_TIMEH => Instr::CsrRead { rd, csr },
                    _ => return Err(word),
                }
            } else {
                return Err(word);
            }
        }
        OPC_PULSE => Instr::Pulse(Pulse {
            id: ((word >> 7) & 31) as u8,
            flags: ((word >> 12) & 15) as u8,
            duration: (word >> 16) as u16,
            freq: w[1],
            phase: w[2],
            amp: (w[3] >> 16) as i16,
            env_start: w[3] as u16,
        }),
        OPC_SETTIME => {
            if word & !(31 << 15) != OPC_SETTIME {
                return Err(word);
            }
            Instr::SetTime { rs1 }
        }
        _ => return Err(word),
    };
    Ok(instr)
}

fn chk_reg(r: u8) -> u32 {
    assert!(r < 32, "register index out of range: {r}");
    r as u32
}

fn chk_i_imm(imm: i32) -> u32 {
    assert!(
        (-2048..=2047).contains(&imm),
        "I-immediate out of range: {imm}"
    );
    (imm as u32) & 0xFFF
}

fn enc_r(opcode: u32, rd: u8, f3: u32, rs1: u8, rs2: u8, f7: u32) -> u32 {
    opcode
        | (chk_reg(rd) << 7)
        | (f3 << 12)
        | (chk_reg(rs1) << 15)
        | (chk_reg(rs2) << 20)
        | (f7 << 25)
}

fn enc_i(opcode: u32, rd: u8, f3: u32, rs1: u8, imm: i32) -> u32 {
    opcode | (chk_reg(rd) << 7) | (f3 << 12) | (chk_reg(rs1) << 15) | (chk_i_imm(imm) << 20)
}

fn enc_s(opcode: u32, f3: u32, rs1: u8, rs2: u8, imm: i32) -> u32 {
    let imm = chk_i_imm(imm);
    opcode
        | ((imm & 0x1F) << 7)
        | (f3 << 12)
        | (chk_reg(rs1) << 15)
        | (chk_reg(rs2) << 20)
        | ((imm >> 5) << 25)
}

fn enc_b(opcode: u32, f3: u32, rs1: u8, rs2: u8, offset: i32) -> u32 {
    assert!(
        (-4096..=4094).contains(&offset) && offset % 2 == 0,
        "branch offset out of range: {offset}"
    );
    let imm = offset as u32;
    opcode
        | (((imm >> 11) & 1) << 7)
        | (((imm >> 1) & 0xF) << 8)
        | (f3 << 12)
        | (chk_reg(rs1) << 15)
        | (chk_reg(rs2) << 20)
        | (((imm >> 5) & 0x3F) << 25)
        | (((imm >> 12) & 1) << 31)
}

fn enc_j(opcode: u32, rd: u8, offset: i32) -> u32 {
    assert!(
        (-(1 << 20)..(1 << 20)).contains(&offset) && offset % 2 == 0,
        "jump offset out of range: {offset}"
    );
    let imm = offset as u32;
    opcode
        | (chk_reg(rd) << 7)
        | (imm & 0xFF000)
        | (((imm >> 11) & 1) << 20)
        | (((imm >> 1) & 0x3FF) << 21)
        | (((imm >> 20) & 1) << 31)
}

fn enc_u(opcode: u32, rd: u8, imm: u32) -> u32 {
    assert_eq!(imm & 0xFFF, 0, "U-immediate has nonzero low bits: {imm:#x}");
    opcode | (chk_reg(rd) << 7) | imm
}

/// Encode an instruction to its program words (1 word, or 4 for pulse).
/// Panics on out-of-range fields; the assembler range-checks before calling.
pub fn encode(instr: &Instr) -> Vec<u32> {
    let w = match *instr {
        Instr::Lui { rd, imm } => enc_u(0x37, rd, imm),
        Instr::Auipc { rd, imm } => enc_u(0x17, rd, imm),
        Instr::Jal { rd, offset } => enc_j(0x6F, rd, offset),
        Instr::Jalr { rd, rs1, offset } => enc_i(0x67, rd, 0, rs1, offset),
        Instr::Branch {
            op,
            rs1,
            rs2,
            offset,
        } => {
            let f3 = match op {
                BranchOp::Beq => 0,
                BranchOp::Bne => 1,
                BranchOp::Blt => 4,
                BranchOp::Bge => 5,
                BranchOp::Bltu => 6,
                BranchOp::Bgeu => 7,
            };
            enc_b(0x63, f3, rs1, rs2, offset)
        }
        Instr::Load {
            op,
            rd,
            rs1,
            offset,
        } => {
            let f3 = match op {
                LoadOp::Lb => 0,
                LoadOp::Lh => 1,
                LoadOp::Lw => 2,
                LoadOp::Lbu => 4,
                LoadOp::Lhu => 5,
            };
            enc_i(0x03, rd, f3, rs1, offset)
        }
        Instr::Store {
            op,
            rs1,
            rs2,
            offset,
        } => {
            let f3 = match op {
                StoreOp::Sb => 0,
                StoreOp::Sh => 1,
                StoreOp::Sw => 2,
            };
            enc_s(0x23, f3, rs1, rs2, offset)
        }
        Instr::AluImm { op, rd, rs1, imm } => match op {
            AluOp::Add => enc_i(0x13, rd, 0, rs1, imm),
            AluOp::Slt => enc_i(0x13, rd, 2, rs1, imm),
            AluOp::Sltu => enc_i(0x13, rd, 3, rs1, imm),
            AluOp::Xor => enc_i(0x13, rd, 4, rs1, imm),
            AluOp::Or => enc_i(0x13, rd, 6, rs1, imm),
            AluOp::And => enc_i(0x13, rd, 7, rs1, imm),
            AluOp::Sll | AluOp::Srl | AluOp::Sra => {
                assert!((0..32).contains(&imm), "shamt out of range: {imm}");
                let (f3, f7) = match op {
                    AluOp::Sll => (1, 0),
                    AluOp::Srl => (5, 0),
                    _ => (5, 0x20),
                };
                enc_r(0x13, rd, f3, rs1, imm as u8, f7)
            }
            AluOp::Sub => panic!("subi does not exist; negate the immediate"),
        },
        Instr::Alu { op, rd, rs1, rs2 } => {
            let (f3, f7) = match op {
                AluOp::Add => (0, 0),
                AluOp::Sub => (0, 0x20),
                AluOp::Sll => (1, 0),
                AluOp::Slt => (2, 0),
                AluOp::Sltu => (3, 0),
                AluOp::Xor => (4, 0),
                AluOp::Srl => (5, 0),
                AluOp::Sra => (5, 0x20),
                AluOp::Or => (6, 0),
                AluOp::And => (7, 0),
            };
            enc_r(0x33, rd, f3, rs1, rs2, f7)
        }
        Instr::Mul { op, rd, rs1, rs2 } => {
            let f3 = match op {
                MulOp::Mul => 0,
                MulOp::Mulh => 1,
                MulOp::Mulhsu => 2,
                MulOp::Mulhu => 3,
                MulOp::Div => 4,
                MulOp::Divu => 5,
                MulOp::Rem => 6,
                MulOp::Remu => 7,
            };
            enc_r(0x33, rd, f3, rs1, rs2, 1)
        }
        Instr::Fence => 0x0FF0_000F,
        Instr::Ecall => 0x0000_0073,
        Instr::Ebreak => 0x0010_0073,
        Instr::CsrRead { rd, csr } => 0x73 | (chk_reg(rd) << 7) | (2 << 12) | ((csr as u32) << 20),
        Instr::Pulse(p) => {
            assert!(p.id < 32 && p.flags < 16, "pulse field out of range");
            return vec![
                OPC_PULSE
                    | ((p.id as u32) << 7)
                    | ((p.flags as u32) << 12)
                    | ((p.duration as u32) << 16),
                p.freq,
                p.phase,
                ((p.amp as u16 as u32) << 16) | p.env_start as u32,
            ];
        }
        Instr::SetTime { rs1 } => OPC_SETTIME | (chk_reg(rs1) << 15),
    };
    vec![w]
}
