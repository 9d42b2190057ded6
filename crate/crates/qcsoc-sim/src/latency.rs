//! Itemized accounting of the measure-to-conditional-gate feedback path.
//!
//! The round trip from "probe pulse scheduled" to "conditional gate can
//! play" decomposes into six legs, each pinned by a different part of the
//! system: scheduling lead times (worst parameter-port latency of the
//! channel), the plant's reflection delay, the demodulation window, the
//! decoder finalize, and the CPU's read-and-steer reaction. This module
//! computes the budget from a rig description and, independently, measures
//! the CPU leg from paired guest runs so the two can be cross-checked.

use crate::config::{Config, ConfigError};
use crate::programs::{self, mailbox};
use crate::rfsg::PortLatencies;
use crate::sim::StopReason;
use crate::trig::TrigKind;

/// The legs of the feedback path, in cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatencyComponents {
    /// Scheduling lead time of the probe pulse (worst parameter port).
    pub probe_lead: u64,
    /// Reflection path delay through the plant.
    pub plant_delay: u64,
    /// Demodulation window.
    pub window: u64,
    /// Result finalize after the last window sample.
    pub finalize: u64,
    /// CPU reaction: reading the result and steering the gate.
    pub cpu_reaction: u64,
    /// Scheduling lead time of the conditional pulse.
    pub conditional_lead: u64,
}

impl LatencyComponents {
    pub fn total(&self) -> u64 {
        self.probe_lead
            + self.plant_delay
            + self.window
            + self.finalize
            + self.cpu_reaction
            + self.conditional_lead
    }
}

/// A latency budget at a given clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyReport {
    pub components: LatencyComponents,
    pub clock_hz: u64,
}

impl LatencyReport {
    pub fn new(components: LatencyComponents, clock_hz: u64) -> Self {
        assert!(clock_hz > 0);
        LatencyReport {
            components,
            clock_hz,
        }
    }

    /// Budget for one qubit's feedback path under `config`, with the
    /// demodulation window the guest will program (in ADC samples).
    pub fn from_config(
        config: &Config,
        qubit: usize,
        window_adc_samples: u32,
    ) -> Result<Self, ConfigError> {
        let q = &config.qubit[qubit];
        let s_adc = config.system.samples_per_cycle_adc as u64;
        let probe = config.sg_config(q.readout_sg)?;
        let drive = config.sg_config(q.drive_sg)?;
        let components = LatencyComponents {
            probe_lead: worst_lead(&probe.latencies, probe.trig),
            plant_delay: q.readout.delay.div_ceil(s_adc),
            window: (window_adc_samples as u64).div_ceil(s_adc),
            finalize: 1,
            // One result load plus one steering store.
            cpu_reaction: 1 + config.pipeline.mmio_load_latency as u64 + 1,
            conditional_lead: worst_lead(&drive.latencies, drive.trig),
        };
        Ok(LatencyReport::new(components, config.system.clock_hz))
    }

    pub fn total_cycles(&self) -> u64 {
        self.components.total()
    }

    pub fn total_ns(&self) -> f64 {
        cycles_to_ns(self.total_cycles(), self.clock_hz)
    }

    /// Plain-text table: one line per leg, cycles and nanoseconds, plus the
    /// total.
    pub fn render(&self) -> String {
        let c = &self.components;
        let rows = [
            ("probe scheduling lead", c.probe_lead),
            ("plant reflection delay", c.plant_delay),
            ("demodulation window", c.window),
            ("result finalize", c.finalize),
            ("cpu reaction", c.cpu_reaction),
            ("conditional pulse lead", c.conditional_lead),
        ];
        let mhz = self.clock_hz as f64 / 1e6;
        let mut out = format!("feedback latency at {mhz:.0} MHz\n");
        for (name, cycles) in rows {
            out.push_str(&row(name, cycles, self.clock_hz));
        }
        out.push_str(&row("total", self.total_cycles(), self.clock_hz));
        out
    }
}

fn row(name: &str, cycles: u64, clock_hz: u64) -> String {
    format!(
        "  {name:<24}{cycles:>4} cycles {:>8.1} ns\n",
        cycles_to_ns(cycles, clock_hz)
    )
}

fn cycles_to_ns(cycles: u64, clock_hz: u64) -> f64 {
    cycles as f64 * 1e9 / clock_hz as f64
}

/// Worst effective lead time across the five parameter ports.
fn worst_lead(latencies: &PortLatencies, trig: TrigKind) -> u64 {
    let base = [
        latencies.freq,
        latencies.phase,
        latencies.amp,
        latencies.env,
        latencies.dur,
    ];
    (base.into_iter().max().unwrap() + trig.latency()) as u64
}

/// The CPU-reaction leg measured from paired guest runs: conditional-reset
/// sections on a ground-state qubit, where the branch variant takes its
/// branch and the branchless variant is oblivious.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeasuredReaction {
    /// Section cycles for the branch variant (ground: branch taken).
    pub branch_section: u64,
    /// Section cycles for the branchless variant (state-independent).
    pub branchless_section: u64,
}

impl MeasuredReaction {
    /// Run both variants for one shot each and read the measured sections
    /// out of their mailboxes. Panics if the built-in guests misbehave;
    /// they are part of this crate.
    pub fn measure() -> MeasuredReaction {
        let (branch, branchless) = programs::latency_pair();
        MeasuredReaction {
            branch_section: run_section(&branch),
            branchless_section: run_section(&branchless),
        }
    }

    /// Branch-taken cost minus branchless cost; equals the pipeline's
    /// taken-branch penalty when the cost model holds.
    pub fn difference(&self) -> u64 {
        self.branch_section - self.branchless_section
    }
}

fn run_section(script: &programs::Script) -> u64 {
    let assembled = script.assemble().expect("built-in guest assembles");
    let mut sim = script
        .config
        .simulator_for_shot(&assembled.image, 0)
        .expect("built-in rig builds");
    let result = sim.run(script.config.run.max_cycles);
    assert_eq!(
        result.reason,
        StopReason::Exit { code: 0 },
        "latency probe guest failed: {:?}",
        result.reason
    );
    sim.bus
        .load(mailbox::SECTION_CYCLES, 4)
        .expect("mailbox read") as u64
}

/// Convenience: is the `measure`d pair consistent with a cost model's
/// taken-branch penalty?
pub fn reaction_matches_penalty(m: &MeasuredReaction, branch_taken_penalty: u32) -> bool {
    m.difference() == branch_taken_penalty as u64
}
