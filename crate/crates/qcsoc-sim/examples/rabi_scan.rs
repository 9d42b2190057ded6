//! Power-Rabi sweep: the guest plays one gate per shot at each amplitude in
//! a list and counts outcome flips, which trace the fringe
//! `p_flip(a) = sin^2(theta(a)/2)` from either measurement pole. The host
//! then fits the fringe with a one-parameter search to recover the pi-pulse
//! amplitude.

use qcsoc_sim::programs::{self, mailbox};
use qcsoc_sim::sim::StopReason;
use std::f64::consts::PI;

const REPS: u32 = 60;

fn main() {
    let amps: Vec<i16> = (0..13).map(|i| i * 2730).collect();
    let script = programs::rabi_scan(&amps, REPS);
    let assembled = script.assemble().expect("built-in guest assembles");
    let mut sim = script
        .config
        .simulator_for_shot(&assembled.image, 0)
        .expect("built-in rig builds");
    let result = sim.run(script.config.run.max_cycles);
    assert_eq!(result.reason, StopReason::Exit { code: 0 });

    let fractions: Vec<f64> = (0..amps.len())
        .map(|i| {
            let flips = sim
                .bus
                .load(mailbox::SCAN_COUNTS + 4 * i as u32, 4)
                .unwrap();
            flips as f64 / REPS as f64
        })
        .collect();

    // One-parameter fit: the amplitude of a pi rotation. 1 LSB grid search
    // is plenty at this sample size.
    let sse = |api: f64| -> f64 {
        amps.iter()
            .zip(&fractions)
            .map(|(&a, &f)| {
                let p = (PI * a as f64 / (2.0 * api)).sin().powi(2);
                (p - f) * (p - f)
            })
            .sum()
    };
    let fitted = (15_000..40_000)
        .map(|a| a as f64)
        .min_by(|&a, &b| sse(a).partial_cmp(&sse(b)).unwrap())
        .unwrap();

    println!("{:>6} {:>6} {:>9} {:>9}", "amp", "flips", "observed", "fit");
    for (&a, &f) in amps.iter().zip(&fractions) {
        let p = (PI * a as f64 / (2.0 * fitted)).sin().powi(2);
        println!("{a:>6} {:>6} {f:>9.3} {p:>9.3}", (f * REPS as f64).round());
    }

    let ideal = programs::pi_amplitude(script.config.qubit[0].rabi, 256);
    let err = (fitted - ideal as f64).abs() / ideal as f64;
    println!(
        "\nfitted pi amplitude {fitted:.0}, rig ideal {ideal} ({:.2}% off)",
        err * 100.0
    );
    assert!(err < 0.05, "fringe fit should land within 5%");
}
