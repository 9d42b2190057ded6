//! System bus: the address map, the shared trigger-time register, and the
//! MMIO register banks that expose the RF channels to the control CPU.
//!
//! Memory layout (all little-endian):
//!
//! ```text
//! 0x0000_0000  program memory, 64 KiB, read-only to the guest
//! 0x0010_0000  data memory, 64 KiB
//! 0x2000_0000  envelope memories, one 64 KiB stride per generator
//! 0x3000_0000  capture buffers, one 64 KiB stride per decoder, read-only
//! 0x4000_0000  generator registers, one 0x100 stride per channel
//! 0x4100_0000  decoder registers, one 0x100 stride per channel
//! ```
//!
//! Register banks are word-access-only; memories accept byte, halfword and
//! word access. Loads from program, data and envelope memory carry the RAM
//! load penalty; register banks and capture buffers carry the (longer) MMIO
//! penalty. Faults are classified without side effects (`classify_load`,
//! `classify_store`) so the CPU can reject a bad access at issue, before any
//! state changes.

use thiserror::Error;

use crate::rfdec::Readout;
use crate::rfsg::{FifoFull, PulseParams, SignalGen};
use crate::timebase::resolve_cycle;

pub const PROG_BASE: u32 = 0x0000_0000;
pub const PROG_SIZE: u32 = 0x0001_0000;
pub const DATA_BASE: u32 = 0x0010_0000;
pub const DATA_SIZE: u32 = 0x0001_0000;
pub const ENV_BASE: u32 = 0x2000_0000;
pub const ENV_STRIDE: u32 = 0x0001_0000;
pub const RDBUF_BASE: u32 = 0x3000_0000;
pub const RDBUF_STRIDE: u32 = 0x0001_0000;
pub const SG_BASE: u32 = 0x4000_0000;
pub const SG_STRIDE: u32 = 0x0000_0100;
pub const RD_BASE: u32 = 0x4100_0000;
pub const RD_STRIDE: u32 = 0x0000_0100;

/// Signal generator register offsets. Offset 0x04 is a deliberate hole.
pub mod sg_reg {
    pub const FREQ: u32 = 0x00;
    pub const PHASE: u32 = 0x08;
    pub const AMP: u32 = 0x0C;
    pub const ENV_START: u32 = 0x10;
    pub const DURATION: u32 = 0x14;
    pub const T0: u32 = 0x18;
    pub const ERRFLAGS: u32 = 0x1C;
}

/// Readout decoder register offsets.
pub mod rd_reg {
    pub const DEC_FREQ: u32 = 0x00;
    pub const DEC_PHASE: u32 = 0x04;
    pub const WINDOW: u32 = 0x08;
    pub const THRESHOLD: u32 = 0x0C;
    pub const RESULT: u32 = 0x10;
    pub const MULTIPLEX: u32 = 0x14;
    pub const CAPTURE_CTRL: u32 = 0x18;
    pub const ARM: u32 = 0x1C;
    pub const ROTATION: u32 = 0x20;
    pub const RES_I: u32 = 0x24;
    pub const RES_Q: u32 = 0x28;
    pub const ERRFLAGS: u32 = 0x2C;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    Ram,
    Rom,
    Mmio,
}

/// What a mapped region routes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Prog,
    Data,
    Env(usize),
    RdBuf(usize),
    SgRegs(usize),
    RdRegs(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct Region {
    pub base: u32,
    pub size: u32,
    pub kind: RegionKind,
    pub target: Target,
}

impl Region {
    fn contains(&self, addr: u32) -> bool {
        (addr as u64) >= (self.base as u64) && (addr as u64) < (self.base as u64 + self.size as u64)
    }

    fn overlaps(&self, other: &Region) -> bool {
        let a = (self.base as u64, self.base as u64 + self.size as u64);
        let b = (other.base as u64, other.base as u64 + other.size as u64);
        a.0 < b.1 && b.0 < a.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("region {new_base:#010x}+{new_size:#x} overlaps {old_base:#010x}+{old_size:#x}")]
pub struct OverlapError {
    pub new_base: u32,
    pub new_size: u32,
    pub old_base: u32,
    pub old_size: u32,
}

/// Registry of mapped regions, kept sorted by base address.
#[derive(Debug, Clone, Default)]
pub struct AddressMap {
    regions: Vec<Region>,
}

impl AddressMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a region, rejecting any byte overlap with an existing one.
    /// Zero-size regions are accepted and never match a lookup.
    pub fn map_region(&mut self, region: Region) -> Result<(), OverlapError> {
        if let Some(old) = self.regions.iter().find(|r| r.overlaps(&region)) {
            return Err(OverlapError {
                new_base: region.base,
                new_size: region.size,
                old_base: old.base,
                old_size: old.size,
            });
        }
        let at = self.regions.partition_point(|r| r.base < region.base);
        self.regions.insert(at, region);
        Ok(())
    }

    pub fn lookup(&self, addr: u32) -> Option<&Region> {
        let at = self.regions.partition_point(|r| r.base <= addr);
        at.checked_sub(1)
            .map(|i| &self.regions[i])
            .filter(|r| r.contains(addr))
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusErrorKind {
    /// No mapped region at this address.
    Unmapped,
    /// Address not aligned to the access width.
    Misaligned,
    /// Store to program memory or a capture buffer.
    ReadOnly,
    /// Register-bank access at an offset with no register behind it.
    UndefinedRegister,
    /// Byte or halfword access to a word-only register bank.
    SubWord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("bus fault at {addr:#010x}: {kind:?}")]
pub struct BusError {
    pub addr: u32,
    pub kind: BusErrorKind,
}

impl BusError {
    fn new(addr: u32, kind: BusErrorKind) -> Self {
        BusError { addr, kind }
    }
}

/// Which load penalty an access pays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadClass {
    Ram,
    Mmio,
}

/// Result of a store or pulse that may have to wait for FIFO space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreOutcome {
    Done,
    /// Target FIFO is full; the producer must retry next cycle.
    Stall,
}

#[derive(Debug, Clone)]
pub struct SocBus {
    pub map: AddressMap,
    prog: Vec<u8>,
    data: Vec<u8>,
    pub sgs: Vec<SignalGen>,
    pub rds: Vec<Readout>,
    /// Decoder index → generator whose FIFO bank its MULTIPLEX register
    /// selects (identity unless configured otherwise).
    mux_target: Vec<usize>,
    /// Shared trigger-time register: the schedule word used by the next
    /// pulse, set by the timer instruction or by any generator T0 write.
    treg: u32,
}

impl SocBus {
    pub fn new(sgs: Vec<SignalGen>, rds: Vec<Readout>, mux_target: Vec<usize>) -> Self {
        assert_eq!(mux_target.len(), rds.len());
        assert!(mux_target.iter().all(|&t| t < sgs.len()));
        let mut map = AddressMap::new();
        let mut add = |base, size, kind, target| {
            map.map_region(Region {
                base,
                size,
                kind,
                target,
            })
            .expect("standard map overlap")
        };
        add(PROG_BASE, PROG_SIZE, RegionKind::Rom, Target::Prog);
        add(DATA_BASE, DATA_SIZE, RegionKind::Ram, Target::Data);
        for (i, sg) in sgs.iter().enumerate() {
            add(
                ENV_BASE + i as u32 * ENV_STRIDE,
                sg.env_capacity() as u32 * 2,
                RegionKind::Ram,
                Target::Env(i),
            );
            add(
                SG_BASE + i as u32 * SG_STRIDE,
                SG_STRIDE,
                RegionKind::Mmio,
                Target::SgRegs(i),
            );
        }
        for (i, rd) in rds.iter().enumerate() {
            add(
                RDBUF_BASE + i as u32 * RDBUF_STRIDE,
                rd.config().capture_capacity as u32 * 2,
                RegionKind::Rom,
                Target::RdBuf(i),
            );
            add(
                RD_BASE + i as u32 * RD_STRIDE,
                RD_STRIDE,
                RegionKind::Mmio,
                Target::RdRegs(i),
            );
        }
        SocBus {
            map,
            prog: vec![0; PROG_SIZE as usize],
            data: vec![0; DATA_SIZE as usize],
            sgs,
            rds,
            mux_target,
            treg: 0,
        }
    }

    /// Copies a flat program image into program memory at address 0.
    pub fn load_program(&mut self, image: &[u8]) {
        assert!(image.len() <= self.prog.len(), "program exceeds 64 KiB");
        self.prog[..image.len()].copy_from_slice(image);
    }

    pub fn treg(&self) -> u32 {
        self.treg
    }

    /// The timer instruction: latch a new trigger-time word.
    pub fn set_treg(&mut self, value: u32) {
        self.treg = value;
    }

    /// Instruction fetch: word-aligned, program memory only.
    pub fn fetch_word(&self, pc: u32) -> Result<u32, BusError> {
        if pc % 4 != 0 {
            return Err(BusError::new(pc, BusErrorKind::Misaligned));
        }
        let off = pc.wrapping_sub(PROG_BASE) as usize;
        if pc < PROG_BASE || off + 4 > self.prog.len() {
            return Err(BusError::new(pc, BusErrorKind::Unmapped));
        }
        Ok(u32::from_le_bytes(
            self.prog[off..off + 4].try_into().unwrap(),
        ))
    }

    /// Validates a load and reports which latency class it pays.
    pub fn classify_load(&self, addr: u32, width: u32) -> Result<LoadClass, BusError> {
        let region = self
            .map
            .lookup(addr)
            .ok_or(BusError::new(addr, BusErrorKind::Unmapped))?;
        if addr % width != 0 {
            return Err(BusError::new(addr, BusErrorKind::Misaligned));
        }
        if region.kind == RegionKind::Mmio {
            if width != 4 {
                return Err(BusError::new(addr, BusErrorKind::SubWord));
            }
            let off = addr - region.base;
            let ok = match region.target {
                Target::SgRegs(_) => sg_reg_defined(off),
                Target::RdRegs(_) => rd_reg_defined(off),
                _ => unreachable!("only register banks are mmio"),
            };
            if !ok {
                return Err(BusError::new(addr, BusErrorKind::UndefinedRegister));
            }
        }
        Ok(match region.target {
            Target::Prog | Target::Data | Target::Env(_) => LoadClass::Ram,
            Target::RdBuf(_) | Target::SgRegs(_) | Target::RdRegs(_) => LoadClass::Mmio,
        })
    }

    /// Validates a store without performing it.
    pub fn classify_store(&self, addr: u32, width: u32) -> Result<(), BusError> {
        let region = self
            .map
            .lookup(addr)
            .ok_or(BusError::new(addr, BusErrorKind::Unmapped))?;
        if addr % width != 0 {
            return Err(BusError::new(addr, BusErrorKind::Misaligned));
        }
        match region.kind {
            RegionKind::Rom => return Err(BusError::new(addr, BusErrorKind::ReadOnly)),
            RegionKind::Mmio => {
                if width != 4 {
                    return Err(BusError::new(addr, BusErrorKind::SubWord));
                }
                let off = addr - region.base;
                let ok = match region.target {
                    Target::SgRegs(_) => sg_reg_defined(off),
                    Target::RdRegs(_) => rd_reg_defined(off),
                    _ => unreachable!(),
                };
                if !ok {
                    return Err(BusError::new(addr, BusErrorKind::UndefinedRegister));
                }
            }
            RegionKind::Ram => {}
        }
        Ok(())
    }

    /// Performs a load. Values are returned zero-extended; the CPU applies
    /// the instruction's own sign extension.
    pub fn load(&self, addr: u32, width: u32) -> Result<u32, BusError> {
        self.classify_load(addr, width)?;
        let region = self.map.lookup(addr).unwrap();
        let off = (addr - region.base) as usize;
        Ok(match region.target {
            Target::Prog => read_le(&self.prog, off, width),
            Target::Data => read_le(&self.data, off, width),
            Target::Env(i) => self.sgs[i].env_read(off, width as usize),
            Target::RdBuf(i) => self.rds[i].capture_read(off, width as usize),
            Target::SgRegs(i) => self.sg_reg_read(i, off as u32),
            Target::RdRegs(i) => self.rd_reg_read(i, off as u32),
        })
    }

    /// Performs a store. A `Stall` outcome means nothing changed and the
    /// producer must retry on the next cycle.
    pub fn store(
        &mut self,
        now: u64,
        addr: u32,
        width: u32,
        value: u32,
    ) -> Result<StoreOutcome, BusError> {
        self.classify_store(addr, width)?;
        let region = *self.map.lookup(addr).unwrap();
        let off = (addr - region.base) as usize;
        match region.target {
            Target::Data => write_le(&mut self.data, off, width, value),
            Target::Env(i) => self.sgs[i].env_write(off, width as usize, value),
            Target::SgRegs(i) => return Ok(self.sg_reg_write(now, i, off as u32, value)),
            Target::RdRegs(i) => self.rd_reg_write(now, i, off as u32, value),
            Target::Prog | Target::RdBuf(_) => unreachable!("rom rejected by classify"),
        }
        Ok(StoreOutcome::Done)
    }

    /// The wide pulse instruction: schedule a complete parameter set on one
    /// channel at the current trigger time.
    pub fn pulse(
        &mut self,
        now: u64,
        channel: u8,
        bank: usize,
        params: PulseParams,
    ) -> Result<StoreOutcome, BusError> {
        let Some(sg) = self.sgs.get_mut(channel as usize) else {
            return Err(BusError::new(
                SG_BASE + channel as u32 * SG_STRIDE,
                BusErrorKind::Unmapped,
            ));
        };
        let t0 = resolve_cycle(now, self.treg).max(0) as u64;
        match sg.try_schedule(now, bank, t0, params) {
            Err(FifoFull) => Ok(StoreOutcome::Stall),
            Ok(_) => Ok(StoreOutcome::Done),
        }
    }

    fn sg_reg_read(&self, i: usize, off: u32) -> u32 {
        let sg = &self.sgs[i];
        match off {
            sg_reg::FREQ => sg.staged().freq,
            sg_reg::PHASE => sg.staged().phase,
            sg_reg::AMP => sg.staged().amp as i32 as u32,
            sg_reg::ENV_START => sg.staged().env_start as u32,
            sg_reg::DURATION => sg.staged().duration as u32,
            sg_reg::T0 => self.treg,
            sg_reg::ERRFLAGS => sg.errflags(),
            _ => unreachable!("undefined offsets rejected by classify"),
        }
    }

    /// A T0 write both latches the trigger-time register and fires the staged
    /// parameters as a bank-0 pulse at that time.
    fn sg_reg_write(&mut self, now: u64, i: usize, off: u32, value: u32) -> StoreOutcome {
        let sg = &mut self.sgs[i];
        match off {
            sg_reg::FREQ => sg.staged_mut().freq = value,
            sg_reg::PHASE => sg.staged_mut().phase = value,
            sg_reg::AMP => sg.staged_mut().amp = value as u16 as i16,
            sg_reg::ENV_START => sg.staged_mut().env_start = value as u16,
            sg_reg::DURATION => sg.staged_mut().duration = value as u16,
            sg_reg::T0 => {
                let t0 = resolve_cycle(now, value).max(0) as u64;
                match sg.trigger_staged(now, t0) {
                    Err(FifoFull) => return StoreOutcome::Stall,
                    Ok(_) => self.treg = value,
                }
            }
            sg_reg::ERRFLAGS => sg.clear_errflags(),
            _ => unreachable!(),
        }
        StoreOutcome::Done
    }

    fn rd_reg_read(&self, i: usize, off: u32) -> u32 {
        let rd = &self.rds[i];
        match off {
            rd_reg::DEC_FREQ => rd.regs.dec_freq,
            rd_reg::DEC_PHASE => rd.regs.dec_phase,
            rd_reg::WINDOW => rd.regs.window,
            rd_reg::THRESHOLD => rd.regs.threshold as u32,
            rd_reg::RESULT => rd.read_result(),
            rd_reg::MULTIPLEX => rd.regs.multiplex,
            rd_reg::CAPTURE_CTRL => rd.regs.capture as u32,
            rd_reg::ARM => 0,
            rd_reg::ROTATION => rd.regs.rotation,
            rd_reg::RES_I => rd.read_i(),
            rd_reg::RES_Q => rd.read_q(),
            rd_reg::ERRFLAGS => rd.errflags(),
            _ => unreachable!(),
        }
    }

    fn rd_reg_write(&mut self, now: u64, i: usize, off: u32, value: u32) {
        let rd = &mut self.rds[i];
        match off {
            rd_reg::DEC_FREQ => rd.regs.dec_freq = value,
            rd_reg::DEC_PHASE => rd.regs.dec_phase = value,
            rd_reg::WINDOW => rd.regs.window = value,
            rd_reg::THRESHOLD => rd.regs.threshold = value as i32 as i64,
            rd_reg::MULTIPLEX => {
                rd.regs.multiplex = value;
                let sg = self.mux_target[i];
                self.sgs[sg].set_multiplex(now, (value & 1) as usize);
            }
            rd_reg::CAPTURE_CTRL => rd.regs.capture = value & 1 == 1,
            rd_reg::ARM => rd.arm(now, value),
            rd_reg::ROTATION => rd.regs.rotation = value,
            rd_reg::RES_I | rd_reg::RES_Q | rd_reg::RESULT => rd.note_readonly_write(),
            rd_reg::ERRFLAGS => rd.clear_errflags(),
            _ => unreachable!(),
        }
    }
}

fn sg_reg_defined(off: u32) -> bool {
    use sg_reg::*;
    matches!(
        off,
        FREQ | PHASE | AMP | ENV_START | DURATION | T0 | ERRFLAGS
    )
}

fn rd_reg_defined(off: u32) -> bool {
    use rd_reg::*;
    matches!(
        off,
        DEC_FREQ
            | DEC_PHASE
            | WINDOW
            | THRESHOLD
            | RESULT
            | MULTIPLEX
            | CAPTURE_CTRL
            | ARM
            | ROTATION
            | RES_I
            | RES_Q
            | ERRFLAGS
    )
}

fn read_le(mem: &[u8], off: usize, width: u32) -> u32 {
    let mut v = 0u32;
    for i in 0..width as usize {
        v |= (mem[off + i] as u32) << (8 * i);
    }
    v
}

fn write_le(mem: &mut [u8], off: usize, width: u32, value: u32) {
    for i in 0..width as usize {
        mem[off + i] = (value >> (8 * i)) as u8;
    }
}
