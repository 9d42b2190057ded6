//! Readout decoder channel: IQ demodulation of ADC samples against a
//! RefTime-coherent reference carrier, boxcar accumulation over an armed
//! window, threshold discrimination on a rotated axis, and an optional raw
//! capture buffer.
//!
//! For each in-window sample `x` at global ADC index `g`:
//!
//! ```text
//! θd(g) = dec_freq·g + dec_phase          (wrapping, full turn = 2^32)
//! acc_I += (x · cos θd(g)) >> 15          (arithmetic shift, i.e. floor)
//! acc_Q += (−x · sin θd(g)) >> 15
//! ```
//!
//! so a reflected tone `x(g) = r·cos(θd(g) + φ')` accumulates to
//! `(I, Q) ≈ (r·T/2)·(cos φ', sin φ')` and `atan2(Q, I)` recovers the phase.
//! When the window completes, the discriminator projects onto the configured
//! rotation axis, `P = (acc_I·cos φ_th + acc_Q·sin φ_th) >> 15`, and latches
//! `state = P < threshold` together with the raw accumulators. With T ≤ 2^16
//! the accumulators stay within 47 bits — no overflow is possible.
//!
//! Configuration registers are sampled when the window is armed; later writes
//! affect only subsequent windows. Results become architecturally visible to
//! the CPU on the cycle after the one that contains the window's last sample.

use crate::timebase::resolve_cycle;
use crate::trig::{TrigBackend, TrigKind};

/// Sticky per-channel error flag bits (the decoder ERRFLAGS register).
pub mod errflags {
    /// An arm request named a start cycle that had already passed.
    pub const ARM_IN_PAST: u32 = 1 << 0;
    /// Re-armed while a window was still in flight (the new window wins).
    pub const REARM: u32 = 1 << 1;
    /// A store hit a read-only register (RESULT, RES_I, RES_Q); ignored.
    pub const RESULT_WRITE: u32 = 1 << 2;
    /// Capture requested on a channel whose buffer is configured out.
    pub const CAPTURE_DISABLED: u32 = 1 << 3;
    /// Arm attempted with a zero-length window; ignored.
    pub const BAD_WINDOW: u32 = 1 << 4;
    /// Window longer than the capture buffer; capture stopped at capacity.
    pub const CAPTURE_TRUNCATED: u32 = 1 << 5;
}

#[derive(Debug, Clone)]
pub struct RdConfig {
    /// ADC samples per system cycle.
    pub samples_per_cycle: u32,
    /// Capture buffer capacity in samples; 0 removes the buffer.
    pub capture_capacity: usize,
    pub trig: TrigKind,
}

impl Default for RdConfig {
    fn default() -> Self {
        RdConfig {
            samples_per_cycle: 4,
            capture_capacity: 16384,
            trig: TrigKind::default(),
        }
    }
}

/// Live (staged) register values; snapshotted by `arm`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RdRegs {
    pub dec_freq: u32,
    pub dec_phase: u32,
    /// Window length T in ADC samples.
    pub window: u32,
    /// Discrimination threshold, sign-extended from the 32-bit register.
    pub threshold: i64,
    /// Rotation φ_th of the discrimination axis (phase word).
    pub rotation: u32,
    /// Capture enable for subsequently armed windows.
    pub capture: bool,
    /// Last value written to the bank-select register (bit0 significant).
    pub multiplex: u32,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RdResult {
    pub valid: bool,
    pub state: bool,
    pub i: i64,
    pub q: i64,
}

#[derive(Debug, Clone)]
struct Window {
    dec_freq: u32,
    dec_phase: u32,
    threshold: i64,
    rotation: u32,
    capture: bool,
    /// [start, end) in global ADC sample indices.
    start: u64,
    end: u64,
    acc_i: i64,
    acc_q: i64,
}

#[derive(Debug, Clone)]
pub struct Readout {
    cfg: RdConfig,
    trig: TrigBackend,
    pub regs: RdRegs,
    window: Option<Window>,
    result: RdResult,
    capture: Vec<i16>,
    errflags: u32,
    /// Cycle at which the last finalize happened (for latency accounting).
    pub finalized_at: Option<u64>,
}

impl Readout {
    pub fn new(cfg: RdConfig) -> Self {
        assert!(cfg.samples_per_cycle >= 1 && cfg.samples_per_cycle <= 64);
        assert!(cfg.capture_capacity <= 32768);
        let trig = TrigBackend::new(cfg.trig);
        Readout {
            capture: Vec::with_capacity(cfg.capture_capacity.min(4096)),
            trig,
            cfg,
            regs: RdRegs::default(),
            window: None,
            result: RdResult::default(),
            errflags: 0,
            finalized_at: None,
        }
    }

    pub fn config(&self) -> &RdConfig {
        &self.cfg
    }

    pub fn errflags(&self) -> u32 {
        self.errflags
    }

    pub fn clear_errflags(&mut self) {
        self.errflags = 0;
    }

    pub fn note_readonly_write(&mut self) {
        self.errflags |= errflags::RESULT_WRITE;
    }

    pub fn result(&self) -> &RdResult {
        &self.result
    }

    /// Packed RESULT register: bit31 = valid, bit0 = discriminated state.
    /// Reads as 0 while no completed window is latched.
    pub fn read_result(&self) -> u32 {
        if self.result.valid {
            0x8000_0000 | self.result.state as u32
        } else {
            0
        }
    }

    /// Saturated 32-bit views of the accumulators.
    pub fn read_i(&self) -> u32 {
        crate::fixed::sat_i32(self.result.i) as u32
    }

    pub fn read_q(&self) -> u32 {
        crate::fixed::sat_i32(self.result.q) as u32
    }

    /// Arm a demodulation window starting at cycle `t_start` (a RefTime word,
    /// resolved against `now`), using a snapshot of the current registers.
    pub fn arm(&mut self, now: u64, t_start_word: u32) {
        if self.regs.window == 0 {
            self.errflags |= errflags::BAD_WINDOW;
            return;
        }
        if self.window.is_some() {
            self.errflags |= errflags::REARM;
        }
        let t_start = resolve_cycle(now, t_start_word).max(0) as u64;
        if t_start < now {
            self.errflags |= errflags::ARM_IN_PAST;
        }
        let capture = if self.regs.capture {
            if self.cfg.capture_capacity == 0 {
                self.errflags |= errflags::CAPTURE_DISABLED;
                false
            } else {
                if self.regs.window as usize > self.cfg.capture_capacity {
                    self.errflags |= errflags::CAPTURE_TRUNCATED;
                }
                self.capture.clear();
                true
            }
        } else {
            false
        };
        let start = t_start * self.cfg.samples_per_cycle as u64;
        self.window = Some(Window {
            dec_freq: self.regs.dec_freq,
            dec_phase: self.regs.dec_phase,
            threshold: self.regs.threshold,
            rotation: self.regs.rotation,
            capture,
            start,
            end: start + self.regs.window as u64,
            acc_i: 0,
            acc_q: 0,
        });
        self.result = RdResult::default();
        self.finalized_at = None;
    }

    /// Feed this cycle's ADC samples (called once per cycle, in order).
    pub fn consume(&mut self, now: u64, samples: &[i16]) {
        debug_assert_eq!(samples.len(), self.cfg.samples_per_cycle as usize);
        let Some(w) = self.window.as_mut() else {
            return;
        };
        let base = now * self.cfg.samples_per_cycle as u64;
        let mut done = false;
        for (k, &x) in samples.iter().enumerate() {
            let g = base + k as u64;
            if g < w.start || g >= w.end {
                continue;
            }
            let theta = w.dec_freq.wrapping_mul(g as u32).wrapping_add(w.dec_phase);
            let (c, s) = self.trig.cos_sin(theta);
            w.acc_i += ((x as i64) * (c as i64)) >> 15;
            w.acc_q += ((-(x as i64)) * (s as i64)) >> 15;
            if w.capture && self.capture.len() < self.cfg.capture_capacity {
                self.capture.push(x);
            }
            if g + 1 == w.end {
                done = true;
            }
        }
        if done {
            let w = self.window.take().unwrap();
            let (cr, sr) = self.trig.cos_sin(w.rotation);
            let p = (w.acc_i * cr as i64 + w.acc_q * sr as i64) >> 15;
            self.result = RdResult {
                valid: true,
                state: p < w.threshold,
                i: w.acc_i,
                q: w.acc_q,
            };
            self.finalized_at = Some(now);
        }
    }

    /// Raw capture buffer contents (stable until the next armed capture).
    pub fn capture(&self) -> &[i16] {
        &self.capture
    }

    /// Byte-level read into the capture buffer's MMIO window; bytes past the
    /// captured length read as zero.
    pub fn capture_read(&self, byte_off: usize, width: usize) -> u32 {
        let mut v = 0u32;
        for i in 0..width {
            let off = byte_off + i;
            let sample = off / 2;
            let byte = if sample < self.capture.len() {
                let le = self.capture[sample].to_le_bytes();
                le[off % 2]
            } else {
                0
            };
            v |= (byte as u32) << (8 * i);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dec() -> Readout {
        let mut rd = Readout::new(RdConfig::default());
        rd.regs.dec_freq = 0x0800_0000; // period 32 ADC samples
        rd.regs.dec_phase = 0;
        rd.regs.window = 64;
        rd.regs.threshold = 0;
        rd.regs.rotation = 0;
        rd
    }

    /// Drive a decoder with a synthesized tone x(g) = cos(θd(g) + phi) from
    /// cycle 0 and return the latched result.
    fn run_tone(rd: &mut Readout, phi: u32, amp: f64) -> RdResult {
        let freq = rd.regs.dec_freq;
        let phase = rd.regs.dec_phase;
        let t = TrigBackend::new(rd.config().trig);
        rd.arm(0, 0);
        let s = rd.config().samples_per_cycle as usize;
        let mut now = 0u64;
        while !rd.result().valid {
            let samples: Vec<i16> = (0..s)
                .map(|k| {
                    let g = now as u32 * s as u32 + k as u32;
                    let theta = freq.wrapping_mul(g).wrapping_add(phase).wrapping_add(phi);
                    let c = t.cos_sin(theta).0;
                    (c as f64 * amp).round() as i16
                })
                .collect();
            rd.consume(now, &samples);
            now += 1;
        }
        *rd.result()
    }

    #[test]
    fn matched_tone_accumulates_on_i() {
        let mut rd = dec();
        let r = run_tone(&mut rd, 0, 1.0);
        // Σ cos² over 64 samples ≈ 64·32767/2 = 1_048_544 in post-shift units.
        assert!((r.i - 1_048_544).abs() <= 128, "I = {}", r.i);
        assert!(r.q.abs() <= 128, "Q = {}", r.q);
        // Positive projection on the I axis with threshold 0 → state 0.
        assert!(!r.state);
        assert!(r.valid);
    }

    #[test]
    fn quadrature_tone_accumulates_on_q() {
        // x = cos(θd − π/2): the lagging tone lands at Q ≈ −T·32767/2.
        let mut rd = dec();
        let r = run_tone(&mut rd, 0xC000_0000, 1.0);
        assert!(r.i.abs() <= 128, "I = {}", r.i);
        assert!((r.q + 1_048_544).abs() <= 128, "Q = {}", r.q);
    }

    #[test]
    fn zero_input_gives_zero_accumulators() {
        let mut rd = dec();
        rd.regs.threshold = 1;
        rd.arm(0, 0);
        for now in 0..16 {
            rd.consume(now, &[0, 0, 0, 0]);
        }
        let r = *rd.result();
        assert!(r.valid);
        assert_eq!((r.i, r.q), (0, 0));
        // P = 0 < threshold 1 → state 1.
        assert!(r.state);
    }

    #[test]
    fn result_reads_zero_until_valid() {
        let rd = dec();
        assert_eq!(rd.read_result(), 0);
        let mut rd = dec();
        let r = run_tone(&mut rd, 0, 1.0);
        assert!(!r.state);
        assert_eq!(rd.read_result(), 0x8000_0000);
    }

    #[test]
    fn phase_sweep_traces_cos_sin_and_atan_recovers() {
        let t_len = 64.0;
        for k in 0..16u32 {
            let phi = k << 28; // k/16 of a turn
            let mut rd = dec();
            let r = run_tone(&mut rd, phi, 1.0);
            let ang = phi as f64 / 4294967296.0 * std::f64::consts::TAU;
            let expect_i = t_len * 32767.0 / 2.0 * ang.cos();
            let expect_q = t_len * 32767.0 / 2.0 * ang.sin();
            // Tolerance: per-sample floor error ≤ 1 plus double-frequency
            // ripple that does not fully cancel on a 32-sample period.
            let tol = 2.0 * t_len + 2.0;
            assert!(
                (r.i as f64 - expect_i).abs() <= tol && (r.q as f64 - expect_q).abs() <= tol,
                "phi {k}/16 turn: got ({}, {}), want ({expect_i:.0}, {expect_q:.0})",
                r.i,
                r.q
            );
            let rec = (r.q as f64)
                .atan2(r.i as f64)
                .rem_euclid(std::f64::consts::TAU);
            let diff = (rec - ang).rem_euclid(std::f64::consts::TAU);
            let diff = diff.min(std::f64::consts::TAU - diff);
            assert!(diff < 0.01, "recovered phase off by {diff}");
        }
    }

    #[test]
    fn consume_is_linear_within_rounding() {
        let mut full = dec();
        let rf = run_tone(&mut full, 0x1234_5678, 1.0);
        let mut half = dec();
        let rh = run_tone(&mut half, 0x1234_5678, 0.5);
        assert!((rh.i * 2 - rf.i).abs() <= 2 * 64 + 2);
        assert!((rh.q * 2 - rf.q).abs() <= 2 * 64 + 2);
    }

    #[test]
    fn rotation_projects_the_q_axis() {
        // A tone at −δ has Q < 0; with the axis rotated a quarter turn the
        // projection is the Q accumulator, so state discriminates ±δ.
        for (phi, expect_state) in [(0x1000_0000u32, false), (0xF000_0000u32, true)] {
            let mut rd = dec();
            rd.regs.rotation = 0x4000_0000;
            let r = run_tone(&mut rd, phi, 1.0);
            assert_eq!(r.state, expect_state, "phi={phi:#x}, Q={}", r.q);
        }
    }

    #[test]
    fn rearm_replaces_and_flags() {
        let mut rd = dec();
        rd.arm(0, 10);
        rd.arm(0, 20);
        assert_eq!(rd.errflags() & errflags::REARM, errflags::REARM);
        // Only the second window finalizes: at cycle 20 + 16.
        for now in 0..64 {
            rd.consume(now, &[100, 100, 100, 100]);
        }
        assert!(rd.result().valid);
        assert_eq!(rd.finalized_at, Some(35));
    }

    #[test]
    fn arm_in_past_flags_but_still_runs() {
        let mut rd = dec();
        rd.arm(10, 5);
        assert_eq!(rd.errflags() & errflags::ARM_IN_PAST, errflags::ARM_IN_PAST);
    }

    #[test]
    fn bad_window_is_rejected() {
        let mut rd = dec();
        rd.regs.window = 0;
        rd.arm(0, 4);
        assert_eq!(rd.errflags() & errflags::BAD_WINDOW, errflags::BAD_WINDOW);
        rd.consume(0, &[1, 1, 1, 1]);
        assert!(!rd.result().valid);
    }

    #[test]
    fn capture_records_exactly_the_window() {
        let mut rd = dec();
        rd.regs.capture = true;
        rd.regs.window = 12;
        rd.arm(0, 2);
        let mut fed = Vec::new();
        for now in 0..8 {
            let s: Vec<i16> = (0..4).map(|k| (now * 4 + k) as i16 * 3).collect();
            if (2..5).contains(&now) {
                fed.extend_from_slice(&s);
            }
            rd.consume(now, &s);
        }
        assert_eq!(rd.capture(), &fed[..]);
        assert_eq!(rd.capture().len(), 12);
        // Byte reads reconstruct the samples, and read zero past the end.
        let first = rd.capture_read(0, 2) as u16 as i16;
        assert_eq!(first, fed[0]);
        assert_eq!(rd.capture_read(2 * 12, 4), 0);
    }

    #[test]
    fn capture_without_buffer_is_flagged() {
        let mut rd = Readout::new(RdConfig {
            capture_capacity: 0,
            ..RdConfig::default()
        });
        rd.regs.window = 8;
        rd.regs.capture = true;
        rd.arm(0, 2);
        assert_eq!(
            rd.errflags() & errflags::CAPTURE_DISABLED,
            errflags::CAPTURE_DISABLED
        );
    }

    #[test]
    fn capture_stops_at_capacity() {
        let mut rd = Readout::new(RdConfig {
            capture_capacity: 8,
            ..RdConfig::default()
        });
        rd.regs.window = 16;
        rd.regs.capture = true;
        rd.regs.dec_freq = 1;
        rd.arm(0, 0);
        for now in 0..4 {
            rd.consume(now, &[7, 7, 7, 7]);
        }
        assert_eq!(rd.capture().len(), 8);
        assert_eq!(
            rd.errflags() & errflags::CAPTURE_TRUNCATED,
            errflags::CAPTURE_TRUNCATED
        );
        assert!(rd.result().valid);
    }

    #[test]
    fn accumulators_fit_example_bound() {
        // Full-scale input for the maximum window: |acc| < 2^47.
        let mut rd = dec();
        rd.regs.window = 65535;
        rd.arm(0, 0);
        let mut now = 0;
        while !rd.result().valid {
            rd.consume(now, &[32767, 32767, 32767, 32767]);
            now += 1;
        }
        assert!(rd.result().i.abs() < (1i64 << 47));
        assert!(rd.result().q.abs() < (1i64 << 47));
    }
}
