//! Whole-SoC simulator: one CPU, the bus with its RF channels, and the
//! surrogate plant, advanced in a fixed per-cycle order.
//!
//! Each [`Simulator::step`] executes one system cycle `now`:
//!
//! 1. the CPU ticks (issue/retire against the bus),
//! 2. every signal generator renders its DAC samples for `now`,
//! 3. the plant absorbs those samples (qubit drive, window bookkeeping),
//! 4. the plant emits the cycle's reflected ADC samples,
//! 5. every readout decoder consumes its ADC samples,
//! 6. `now` advances.
//!
//! A decoder that finalizes a window during step 5 is therefore visible to
//! guest loads from the next cycle on. The run loop checks for a halted CPU
//! at the top, so a program whose first instruction exits costs exactly one
//! cycle.

use crate::bus::SocBus;
use crate::isa::cpu::{CostModel, Cpu, Fault, FaultKind};
use crate::plant::{Plant, SgView};

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The guest exited via environment call with this code.
    Exit { code: u32 },
    /// The guest faulted (bus, alignment, illegal instruction, breakpoint).
    Fault(Fault),
    /// `max_cycles` elapsed without a halt.
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunResult {
    pub reason: StopReason,
    /// Cycles consumed (equals the final value of the reference counter).
    pub cycles: u64,
}

#[derive(Debug, Clone)]
pub struct Simulator {
    pub cpu: Cpu,
    pub bus: SocBus,
    pub plant: Plant,
    now: u64,
    dac_frames: Vec<Vec<i16>>,
    adc_frames: Vec<Vec<i16>>,
}

impl Simulator {
    pub fn new(cost: CostModel, bus: SocBus, plant: Plant) -> Self {
        let dac_frames = bus
            .sgs
            .iter()
            .map(|sg| vec![0; sg.config().samples_per_cycle as usize])
            .collect();
        let adc_frames = bus
            .rds
            .iter()
            .map(|rd| vec![0; rd.config().samples_per_cycle as usize])
            .collect();
        Simulator {
            cpu: Cpu::new(cost),
            bus,
            plant,
            now: 0,
            dac_frames,
            adc_frames,
        }
    }

    /// Current cycle index (the value the free-running counter shows).
    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn halted(&self) -> bool {
        self.cpu.halted()
    }

    /// DAC samples a generator produced in the most recent cycle.
    pub fn dac_frame(&self, channel: usize) -> &[i16] {
        &self.dac_frames[channel]
    }

    /// ADC samples a decoder consumed in the most recent cycle.
    pub fn adc_frame(&self, channel: usize) -> &[i16] {
        &self.adc_frames[channel]
    }

    /// Advances the whole system by one cycle.
    pub fn step(&mut self) {
        let now = self.now;
        self.cpu.tick(now, &mut self.bus);
        for (sg, frame) in self.bus.sgs.iter_mut().zip(&mut self.dac_frames) {
            sg.tick(now, frame);
        }
        let views: Vec<SgView> = self
            .bus
            .sgs
            .iter()
            .zip(&self.dac_frames)
            .map(|(sg, frame)| SgView {
                samples: frame,
                active_freq: sg.window().map(|_| sg.active_freq()),
                window: sg.window(),
            })
            .collect();
        self.plant.absorb(&views);
        for frame in &mut self.adc_frames {
            frame.fill(0);
        }
        self.plant.emit(now, &mut self.adc_frames);
        for (rd, frame) in self.bus.rds.iter_mut().zip(&self.adc_frames) {
            rd.consume(now, frame);
        }
        self.now += 1;
    }

    /// Runs until the guest halts or `max_cycles` cycles have elapsed.
    pub fn run(&mut self, max_cycles: u64) -> RunResult {
        loop {
            if let Some(f) = self.cpu.fault() {
                let reason = match f.kind {
                    FaultKind::ProgramExit => StopReason::Exit { code: f.detail },
                    _ => StopReason::Fault(*f),
                };
                return RunResult {
                    reason,
                    cycles: self.now,
                };
            }
            if self.now >= max_cycles {
                return RunResult {
                    reason: StopReason::Timeout,
                    cycles: self.now,
                };
            }
            self.step();
        }
    }
}
