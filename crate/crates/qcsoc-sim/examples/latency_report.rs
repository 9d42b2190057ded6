//! Itemized measure-to-conditional-gate latency: the budget computed from a
//! rig description, and the CPU-reaction leg measured from real guest runs
//! as a cross-check.

use qcsoc_sim::config::Config;
use qcsoc_sim::latency::{reaction_matches_penalty, LatencyReport, MeasuredReaction};

fn main() {
    let config = Config::default();

    let report = LatencyReport::from_config(&config, 0, 16).expect("default rig");
    println!("{}", report.render());

    // The demodulation window is the knob experiments actually turn; the
    // other legs are fixed by the rig.
    println!("window sweep:");
    for window in [16u32, 32, 64, 128] {
        let r = LatencyReport::from_config(&config, 0, window).expect("default rig");
        println!(
            "  {window:>4} ADC samples -> {:>3} cycles  {:>6.1} ns",
            r.total_cycles(),
            r.total_ns()
        );
    }

    // Measured cross-check of the cpu-reaction leg: the branchless reset
    // section is exactly the declared lw+sw cost, and the branch variant
    // exceeds it by the taken-branch penalty.
    let m = MeasuredReaction::measure();
    println!();
    println!(
        "measured reaction: branchless {} cycles, branch (taken) {} cycles",
        m.branchless_section, m.branch_section
    );
    let penalty = config.pipeline.branch_taken_penalty;
    assert!(reaction_matches_penalty(&m, penalty));
    println!(
        "difference {} = configured taken-branch penalty",
        m.difference()
    );
}
