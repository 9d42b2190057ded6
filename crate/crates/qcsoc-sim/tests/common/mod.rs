//! Shared fixtures for the integration suites: an independent reference
//! interpreter, a closed-form signal reference, and analytic statistics
//! oracles. Everything here is deliberately written against the documented
//! behavior rather than by calling into the crate's own implementations, so
//! agreement is evidence rather than tautology.
#![allow(dead_code)]

pub mod oracle;
pub mod refcpu;
pub mod sgref;

use qcsoc_sim::output::Batch;
use qcsoc_sim::programs::Script;
use qcsoc_sim::sim::Simulator;
use std::path::Path;

/// Assemble a guest script, panicking with its name on failure.
pub fn image_of(script: &Script) -> Vec<u8> {
    script
        .assemble()
        .unwrap_or_else(|e| panic!("{}: {e}", script.name))
        .image
}

/// A batch runner over a script's own rig.
pub fn batch_of<'a>(script: &'a Script, image: &[u8]) -> Batch<'a> {
    Batch::new(&script.config, image, Path::new("."))
        .unwrap_or_else(|e| panic!("{}: {e}", script.name))
}

/// Read one word the guest left in data RAM.
pub fn mailbox_word(sim: &Simulator, addr: u32) -> u32 {
    sim.bus.load(addr, 4).expect("mailbox read")
}
