//! Deterministic, cycle-accurate simulator of a quantum-control SoC.
//!
//! The simulated chip couples a small RV32I(+M) control core to a bank of RF
//! signal generator channels and IQ readout decoders over a memory-mapped bus.
//! Pulse parameters travel through timed FIFOs keyed to a free-running 32-bit
//! reference counter, so a pulse scheduled for cycle `t0` produces its first
//! DAC sample at exactly `S * t0` regardless of per-parameter pipeline
//! latencies. A surrogate qubit plant closes the loop: drive pulses rotate a
//! Bloch angle, readout pulses reflect with a state-dependent phase, and the
//! decoders threshold the demodulated IQ projection back into guest-visible
//! registers.
//!
//! Everything is a library first. The `qcsoc-sim` binary is a thin CLI over
//! [`cli`], and each major capability has a runnable example:
//!
//! | example | shows |
//! |---|---|
//! | `run_program` | assembling and running a bare-metal guest, exit codes |
//! | `phase_coherent_hopping` | frequency hops vs. the closed-form reference |
//! | `fast_reset` | branch vs. branchless (multiplexed) conditional gates |
//! | `amplitude_calibration` | on-chip repeated-pulse amplitude calibration |
//! | `rabi_scan` | amplitude sweep with a host-side sin^2 fit |
//! | `readout_noise` | misclassification vs. the analytic normal-tail model |
//! | `latency_report` | itemized measure-to-gate latency accounting |
//!
//! Run one with `cargo run -p qcsoc-sim --example fast_reset`.

pub mod asm;
pub mod bus;
pub mod cli;
pub mod config;
pub mod fixed;
pub mod isa;
pub mod latency;
pub mod output;
pub mod plant;
pub mod programs;
pub mod rfdec;
pub mod rfsg;
pub mod sim;
pub mod timebase;
pub mod trig;
