//! Closed-form scalar reference for generator output.
//!
//! Where the generator runs staged registers, per-port timed FIFOs, release
//! offsets, and activation logic, this model answers one question per output
//! sample with a flat loop: which pulse governs global DAC sample `g`, and
//! what is `env * amp * cos(freq*g + phase)` there. Bit-identical agreement
//! means the scheduling machinery adds nothing and loses nothing.

use qcsoc_sim::fixed::q15_mul;
use qcsoc_sim::trig::TrigBackend;

/// One scheduled pulse, in schedule order (non-decreasing `t0`).
#[derive(Debug, Clone, Copy)]
pub struct RefPulse {
    /// Activation cycle.
    pub t0: u64,
    pub freq: u32,
    pub phase: u32,
    pub amp: i16,
    pub env_start: u16,
    pub duration: u16,
}

/// Render `cycles * s` output samples of a pulse schedule.
///
/// The pulse governing sample `g` is the latest one whose activation
/// boundary `t0 * s` is at or before `g`; it emits inside its window
/// `[t0*s, t0*s + duration)` and silence outside. The envelope index pins to
/// the last entry on overrun, and the oscillator phase is the closed form
/// `freq * g + phase` in wrapping 32-bit angle arithmetic.
pub fn reference_output(
    pulses: &[RefPulse],
    env: &[i16],
    s: u32,
    cycles: u64,
    trig: &TrigBackend,
) -> Vec<i16> {
    let total = (cycles * s as u64) as usize;
    let mut out = vec![0i16; total];
    for (i, slot) in out.iter_mut().enumerate() {
        let g = i as u64;
        let mut governing = None;
        for p in pulses {
            if p.t0 * s as u64 <= g {
                governing = Some(p);
            } else {
                break;
            }
        }
        let Some(p) = governing else { continue };
        let start = p.t0 * s as u64;
        if g >= start + p.duration as u64 {
            continue;
        }
        let mut idx = (g - start) as usize + p.env_start as usize;
        if idx >= env.len() {
            idx = env.len() - 1;
        }
        let theta = p.freq.wrapping_mul(g as u32).wrapping_add(p.phase);
        let (c, _) = trig.cos_sin(theta);
        *slot = q15_mul(q15_mul(env[idx], p.amp), c);
    }
    out
}
