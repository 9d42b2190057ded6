//! Double-precision and closed-form oracles the fixed-point datapaths are
//! measured against.

use statrs::distribution::{ContinuousCDF, Normal};

/// Q1.15 cosine/sine of a 32-bit binary angle, computed in f64 and rounded
/// to nearest — the yardstick for the hardware trig backends.
pub fn cos_sin_f64(theta: u32) -> (i16, i16) {
    let rad = theta as f64 / 4294967296.0 * std::f64::consts::TAU;
    let c = (32767.0 * rad.cos()).round() as i16;
    let s = (32767.0 * rad.sin()).round() as i16;
    (c, s)
}

/// Probability that additive white readout noise flips the sign of the
/// demodulator's in-phase sum.
///
/// Each window sample contributes `(x_k * c_k) >> 15` to the accumulator,
/// where `x_k` carries gaussian noise of standard deviation `32767 * sigma`
/// ADC counts and `c_k` is the Q1.15 demodulation cosine. The demodulation
/// phase steps 1/32 turn per sample, so over a window of W samples
/// `sum(cos^2)` telescopes to exactly W/2 regardless of where the window
/// lands. The accumulator is then gaussian with standard deviation
/// `32767 * sigma * sqrt(W/2)`, and a misclassification is the normal tail
/// beyond the noiseless margin.
pub fn misclassification_probability(margin: f64, sigma: f64, window: u32) -> f64 {
    let sigma_acc = 32767.0 * sigma * (window as f64 / 2.0).sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    normal.cdf(-margin / sigma_acc)
}

/// Is an observed count consistent with probability `p` to within three
/// binomial standard deviations?
pub fn within_binomial_3sigma(observed: u64, trials: u64, p: f64) -> bool {
    let n = trials as f64;
    let band = 3.0 * (p * (1.0 - p) / n).sqrt();
    (observed as f64 / n - p).abs() <= band
}
