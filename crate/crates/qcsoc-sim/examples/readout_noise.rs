//! Readout misclassification under additive noise, checked against the
//! analytic model. Noise of scale `sigma` (fraction of full scale) enters
//! each ADC sample inside the reflection window; the demodulator's I
//! accumulator over a window of `W` samples then sees Gaussian noise of
//! sigma_acc = 32767 * sigma * sqrt(W/2), because the squared demodulation
//! cosines over a full window sum to exactly W/2. A shot misclassifies when
//! that noise overcomes the noiseless margin: p = Phi(-margin / sigma_acc).

use qcsoc_sim::output::Batch;
use qcsoc_sim::programs;
use qcsoc_sim::sim::StopReason;
use statrs::distribution::{ContinuousCDF, Normal};
use std::path::Path;

const SHOTS: u64 = 20_000;
const WINDOW: f64 = 16.0;

fn main() {
    // The noiseless margin, measured once: the I projection of a clean
    // ground-state shot.
    let script = programs::single_measurement(0, 0.0);
    let assembled = script.assemble().expect("built-in guest assembles");
    let batch = Batch::new(&script.config, &assembled.image, Path::new(".")).unwrap();
    let (sim, result) = batch.run_shot(0);
    assert_eq!(result.reason, StopReason::Exit { code: 0 });
    let margin = sim.bus.rds[0].read_i() as i32 as f64;
    println!("noiseless margin: {margin} accumulator LSB\n");

    let unit = Normal::new(0.0, 1.0).unwrap();
    println!(
        "{:>6} {:>9} {:>10} {:>10} {:>8}",
        "sigma", "errors", "observed", "analytic", "band"
    );
    for (i, sigma) in [0.15, 0.2, 0.25, 0.3].into_iter().enumerate() {
        let mut script = programs::single_measurement(0, sigma);
        script.config.run.shots = SHOTS;
        script.config.run.seed = 40 + i as u64;
        let assembled = script.assemble().unwrap();
        let batch = Batch::new(&script.config, &assembled.image, Path::new(".")).unwrap();
        let out = batch.run(&[], true);

        let wrong = out
            .records
            .iter()
            .filter(|r| r.measured_state == Some(1))
            .count() as u64;
        let observed = wrong as f64 / SHOTS as f64;
        let sigma_acc = 32767.0 * sigma * (WINDOW / 2.0).sqrt();
        let predicted = unit.cdf(-margin / sigma_acc);
        let band = 3.0 * (predicted * (1.0 - predicted) / SHOTS as f64).sqrt();
        println!(
            "{sigma:>6.2} {wrong:>9} {observed:>10.4} {predicted:>10.4} {:>8}",
            if (observed - predicted).abs() <= band {
                "ok"
            } else {
                "MISS"
            }
        );
        assert!(
            (observed - predicted).abs() <= band + 1e-12,
            "sigma {sigma}: observed {observed:.4} vs analytic {predicted:.4}"
        );
    }
    println!("\nall within 3-sigma binomial bands of the normal-tail model");
}
