//! On-chip pulse-amplitude calibration: the guest runs repeated-pulse
//! stages entirely on the simulated core, halving its step scale as stages
//! pass, and logs every iteration to data RAM for the host to inspect.
//!
//! Start 10% low and watch it climb back to the ideal pi-pulse amplitude.

use qcsoc_sim::programs::{self, mailbox, CalibrationParams};
use qcsoc_sim::sim::StopReason;
use std::f64::consts::PI;

fn main() {
    // The calibration rig drives at 80% of the default coupling, so the
    // ideal pi amplitude sits well inside full scale.
    let ideal = programs::pi_amplitude(PI / (256.0 * 0.8), 256);
    let initial = (ideal as f64 * 0.90).round() as i16;
    println!("ideal pi amplitude {ideal}, starting from {initial} (-10%)\n");

    let script = programs::amplitude_calibration(CalibrationParams {
        initial_amp: initial,
        shots_per_iter: 100,
        max_iters: 50,
    });
    let assembled = script.assemble().expect("built-in guest assembles");
    let mut sim = script
        .config
        .simulator_for_shot(&assembled.image, 1)
        .expect("built-in rig builds");
    let result = sim.run(script.config.run.max_cycles);
    assert_eq!(
        result.reason,
        StopReason::Exit { code: 0 },
        "budget exhausted"
    );

    let iters = sim.bus.load(mailbox::COUNT, 4).unwrap();
    let final_amp = sim.bus.load(mailbox::RESULT, 4).unwrap();

    println!(
        "{:>4} {:>6} {:>7} {:>9}",
        "iter", "stage", "errors", "amplitude"
    );
    for i in 0..iters {
        let tag = sim.bus.load(mailbox::CAL_LOG + 8 * i, 4).unwrap();
        let amp = sim.bus.load(mailbox::CAL_LOG + 8 * i + 4, 4).unwrap();
        println!(
            "{:>4} {:>6} {:>7} {:>9}",
            i + 1,
            tag >> 16,
            tag & 0xFFFF,
            amp
        );
    }

    let err = (final_amp as f64 - ideal as f64).abs() / ideal as f64;
    println!(
        "\nconverged to {final_amp} in {iters} iterations ({:.2}% from ideal, {} cycles)",
        err * 100.0,
        result.cycles
    );
    assert!(err < 0.01, "calibration should land within 1%");
}
