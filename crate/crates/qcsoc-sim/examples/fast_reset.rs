//! Measure-and-reset two ways: a conditional branch around the correction
//! pulse, or a branch-free store that routes the measured state into the
//! drive channel's FIFO bank select (the decoder's MULTIPLEX register).
//!
//! The branch variant's timing depends on the outcome — the taken path eats
//! the pipeline's taken-branch penalty — while the branchless variant costs
//! the same cycles either way. Both always end in the ground state.

use qcsoc_sim::output::Batch;
use qcsoc_sim::programs::{self, mailbox, FastResetVariant};
use qcsoc_sim::sim::StopReason;
use std::path::Path;

const SHOTS: u64 = 1000;

fn main() {
    println!(
        "{:<12} {:<9} {:>7} {:>7} {:>14} {:>7}",
        "variant", "prepared", "meas 0", "meas 1", "section cycles", "reset ok"
    );
    for variant in [FastResetVariant::Branch, FastResetVariant::Branchless] {
        for prep_amp in [0i16, 32767] {
            let script = programs::fast_reset(variant, prep_amp);
            let assembled = script.assemble().expect("built-in guest assembles");
            let batch = Batch::new(&script.config, &assembled.image, Path::new("."))
                .expect("built-in rig builds");

            let (mut zeros, mut ones, mut resets) = (0u64, 0u64, 0u64);
            let mut sections = Vec::new();
            for shot in 0..SHOTS {
                let (sim, result) = batch.run_shot(shot);
                assert_eq!(result.reason, StopReason::Exit { code: 0 });
                let first = sim.bus.load(mailbox::FIRST_STATE, 4).unwrap();
                if first == 0 {
                    zeros += 1
                } else {
                    ones += 1
                }
                if sim.bus.load(mailbox::RESULT, 4).unwrap() == 0 {
                    resets += 1;
                }
                sections.push(sim.bus.load(mailbox::SECTION_CYCLES, 4).unwrap());
            }
            let lo = sections.iter().min().unwrap();
            let hi = sections.iter().max().unwrap();
            let span = if lo == hi {
                format!("{lo}")
            } else {
                format!("{lo}..{hi}")
            };
            println!(
                "{:<12} {:<9} {:>7} {:>7} {:>14} {:>6}/{}",
                format!("{variant:?}").to_lowercase(),
                if prep_amp == 0 { "ground" } else { "excited" },
                zeros,
                ones,
                span,
                resets,
                SHOTS
            );
        }
    }
    println!();
    println!("branchless: constant cost, outcome steered by the bank-select store");
    println!("branch:     measuring 0 takes the skip branch and pays the penalty");
}
