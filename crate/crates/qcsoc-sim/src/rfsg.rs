//! RF signal generator channel: timed parameter FIFOs, a RefTime-coherent
//! carrier, envelope memory, and Q1.15 mixing, emitting S DAC samples per
//! system cycle.
//!
//! # Timing model
//!
//! Every parameter (freq, phase, amp, env_start, duration) has its own FIFO
//! of `(t0, value)` entries. An entry occupies its FIFO slot until the cycle
//! `t0 − Λ_p`, where `Λ_p` is the port's datapath latency (a per-port base
//! plus the trig backend's pipeline latency, applied uniformly). At that cycle
//! the entry is *released* into the pipeline; it takes effect at exactly `t0`,
//! so its first influence on the output is sample index `S·t0`. Releasing is
//! what frees the slot — a full FIFO back-pressures the producer (the CPU
//! stalls).
//!
//! Entries must arrive in non-decreasing `t0` order per port; violations set
//! a sticky error flag and the offending pulse is dropped, as is any pulse
//! whose `t0 − Λ` has already passed.
//!
//! # Multiplexing
//!
//! A channel configured with `multiplex` owns two FIFO banks. Releases are
//! drawn only from the bank selected by the multiplex register; a write to
//! that register takes effect at the next cycle boundary. Entries already
//! released are past the point of no return and play regardless of later bank
//! switches. Entries stranded in a deselected bank whose `t0` has passed by
//! the time the bank is selected are dropped with the scheduled-in-past flag.
//!
//! # Datapath
//!
//! Sample value at global DAC index `g` inside a window starting at `S·t0`:
//! `E[g − S·t0 + env_start] ⊗ amp ⊗ cos(f·g + φ)` where `⊗` is a Q1.15
//! multiply (round-to-nearest-even, saturating) and the phase argument wraps
//! mod 2^32. The phase is recomputed from `g` every sample — never
//! accumulated — which is what makes frequency hopping phase-coherent.

use std::collections::VecDeque;

use crate::fixed::q15_mul;
use crate::trig::{TrigBackend, TrigKind};

/// Sticky per-channel error flag bits (the ERRFLAGS register).
pub mod errflags {
    /// A pulse was scheduled with `t0 − Λ` already in the past; dropped.
    pub const SCHED_IN_PAST: u32 = 1 << 0;
    /// A pulse's `t0` was below the previous `t0` on the same port; dropped.
    pub const ORDER_VIOLATION: u32 = 1 << 1;
    /// The envelope index ran past the end of envelope memory; clamped.
    pub const ENV_OVERRUN: u32 = 1 << 2;
    /// A bank-1 schedule or bank select arrived with multiplexing disabled.
    pub const MUX_DISABLED: u32 = 1 << 3;
}

/// Base (pre-trig) datapath latencies per parameter port, in cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortLatencies {
    pub freq: u32,
    pub phase: u32,
    pub amp: u32,
    pub env: u32,
    pub dur: u32,
}

impl Default for PortLatencies {
    fn default() -> Self {
        PortLatencies {
            freq: 6,
            phase: 6,
            amp: 4,
            env: 4,
            dur: 4,
        }
    }
}

impl PortLatencies {
    fn get(&self, port: Port) -> u32 {
        match port {
            Port::Freq => self.freq,
            Port::Phase => self.phase,
            Port::Amp => self.amp,
            Port::EnvStart => self.env,
            Port::Duration => self.dur,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Port {
    Freq,
    Phase,
    Amp,
    EnvStart,
    Duration,
}

const PORTS: [Port; 5] = [
    Port::Freq,
    Port::Phase,
    Port::Amp,
    Port::EnvStart,
    Port::Duration,
];

#[derive(Debug, Clone)]
pub struct SgConfig {
    /// DAC samples per system cycle (S).
    pub samples_per_cycle: u32,
    /// Entries per parameter FIFO.
    pub fifo_depth: usize,
    /// Envelope memory capacity in samples (power of two).
    pub env_capacity: usize,
    /// Whether this channel has a second FIFO bank for conditional gates.
    pub multiplex: bool,
    pub latencies: PortLatencies,
    pub trig: TrigKind,
}

impl Default for SgConfig {
    fn default() -> Self {
        SgConfig {
            samples_per_cycle: 16,
            fifo_depth: 16,
            env_capacity: 4096,
            multiplex: false,
            latencies: PortLatencies::default(),
            trig: TrigKind::default(),
        }
    }
}

/// The five parameters of one scheduled pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseParams {
    pub freq: u32,
    pub phase: u32,
    pub amp: i16,
    pub env_start: u16,
    pub duration: u16,
}

/// Values staged by MMIO register writes, pushed as a pulse by a T0 write.
#[derive(Debug, Clone, Copy, Default)]
pub struct Staged {
    pub freq: u32,
    pub phase: u32,
    pub amp: i16,
    pub env_start: u16,
    pub duration: u16,
}

impl Staged {
    fn params(&self) -> PulseParams {
        PulseParams {
            freq: self.freq,
            phase: self.phase,
            amp: self.amp,
            env_start: self.env_start,
            duration: self.duration,
        }
    }
}

/// Outcome of a schedule attempt that found FIFO space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheduled {
    Queued,
    /// `t0 − Λ` was already in the past; dropped, flag latched.
    DroppedSchedInPast,
    /// `t0` went backwards on this bank; dropped, flag latched.
    DroppedOrderViolation,
    /// Bank 1 requested on a channel without multiplexing; dropped.
    DroppedMuxDisabled,
}

/// A full target FIFO: the caller must stall and retry next cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FifoFull;

#[derive(Debug, Clone, Copy)]
struct Entry {
    t0: u64,
    value: u32,
}

#[derive(Debug, Clone, Default)]
struct Bank {
    fifos: [VecDeque<Entry>; 5],
    last_t0: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Active {
    freq: u32,
    phase: u32,
    amp: i16,
    env_start: u16,
    /// Current output window as [start, end) in global DAC sample indices.
    window: Option<(u64, u64)>,
}

#[derive(Debug, Clone)]
pub struct SignalGen {
    cfg: SgConfig,
    trig: TrigBackend,
    env: Vec<u8>,
    banks: [Bank; 2],
    /// Released entries waiting for their activation cycle, per port.
    inflight: [VecDeque<Entry>; 5],
    active: Active,
    mux_active: usize,
    mux_pending: Option<(u64, usize)>,
    staged: Staged,
    errflags: u32,
}

impl SignalGen {
    pub fn new(cfg: SgConfig) -> Self {
        assert!(cfg.samples_per_cycle >= 1 && cfg.samples_per_cycle <= 64);
        assert!(cfg.env_capacity.is_power_of_two() && cfg.env_capacity <= 32768);
        assert!(cfg.fifo_depth >= 1);
        let trig = TrigBackend::new(cfg.trig);
        SignalGen {
            env: vec![0; cfg.env_capacity * 2],
            trig,
            cfg,
            banks: [Bank::default(), Bank::default()],
            inflight: Default::default(),
            active: Active::default(),
            mux_active: 0,
            mux_pending: None,
            staged: Staged::default(),
            errflags: 0,
        }
    }

    pub fn config(&self) -> &SgConfig {
        &self.cfg
    }

    /// Effective latency of a port: base plus the trig pipeline, uniformly.
    pub fn eff_latency(&self, port: Port) -> u32 {
        self.cfg.latencies.get(port) + self.trig.latency()
    }

    /// The largest effective port latency — the earliest lead time a pulse
    /// needs between scheduling and t0.
    pub fn max_eff_latency(&self) -> u32 {
        PORTS.iter().map(|&p| self.eff_latency(p)).max().unwrap()
    }

    pub fn errflags(&self) -> u32 {
        self.errflags
    }

    pub fn clear_errflags(&mut self) {
        self.errflags = 0;
    }

    pub fn staged(&self) -> &Staged {
        &self.staged
    }

    pub fn staged_mut(&mut self) -> &mut Staged {
        &mut self.staged
    }

    /// Currently active carrier frequency word (the plant's drive gate).
    pub fn active_freq(&self) -> u32 {
        self.active.freq
    }

    /// Current pulse window as [start, end) global DAC sample indices.
    pub fn window(&self) -> Option<(u64, u64)> {
        self.active.window
    }

    pub fn multiplex_selected(&self) -> usize {
        self.mux_active
    }

    // --- envelope memory ------------------------------------------------

    pub fn env_capacity(&self) -> usize {
        self.cfg.env_capacity
    }

    pub fn env_read(&self, byte_off: usize, width: usize) -> u32 {
        let mut v = 0u32;
        for i in 0..width {
            v |= (self.env[byte_off + i] as u32) << (8 * i);
        }
        v
    }

    pub fn env_write(&mut self, byte_off: usize, width: usize, value: u32) {
        for i in 0..width {
            self.env[byte_off + i] = (value >> (8 * i)) as u8;
        }
    }

    /// Bulk envelope upload starting at sample index 0.
    pub fn load_env(&mut self, samples: &[i16]) {
        assert!(
            samples.len() <= self.cfg.env_capacity,
            "envelope larger than memory"
        );
        for (i, s) in samples.iter().enumerate() {
            self.env[2 * i..2 * i + 2].copy_from_slice(&s.to_le_bytes());
        }
    }

    fn env_sample(&self, idx: usize) -> i16 {
        i16::from_le_bytes([self.env[2 * idx], self.env[2 * idx + 1]])
    }

    // --- scheduling -----------------------------------------------------

    /// Schedule a complete pulse on `bank` for activation at absolute cycle
    /// `t0`. Returns `Err(FifoFull)` if any port FIFO of the target bank has
    /// no free slot after draining due releases — the caller stalls.
    pub fn try_schedule(
        &mut self,
        now: u64,
        bank: usize,
        t0: u64,
        p: PulseParams,
    ) -> Result<Scheduled, FifoFull> {
        // Free any slots whose release time has come before judging fullness;
        // this is what lets a producer unblock on exactly the release cycle.
        self.drain_releases(now);

        if bank == 1 && !self.cfg.multiplex {
            self.errflags |= errflags::MUX_DISABLED;
            return Ok(Scheduled::DroppedMuxDisabled);
        }
        let b = &mut self.banks[bank];
        if b.fifos.iter().any(|f| f.len() >= self.cfg.fifo_depth) {
            return Err(FifoFull);
        }
        if let Some(last) = b.last_t0 {
            if t0 < last {
                self.errflags |= errflags::ORDER_VIOLATION;
                return Ok(Scheduled::DroppedOrderViolation);
            }
        }
        // The release rule is t0 − Λ_p; the tightest port decides.
        if t0 < now + self.max_eff_latency() as u64 {
            self.errflags |= errflags::SCHED_IN_PAST;
            return Ok(Scheduled::DroppedSchedInPast);
        }
        let values = [
            p.freq,
            p.phase,
            p.amp as u16 as u32,
            p.env_start as u32,
            p.duration as u32,
        ];
        let b = &mut self.banks[bank];
        for (f, v) in b.fifos.iter_mut().zip(values) {
            f.push_back(Entry { t0, value: v });
        }
        b.last_t0 = Some(t0);
        Ok(Scheduled::Queued)
    }

    /// The T0-register trigger: push the staged parameters as a bank-0 pulse.
    pub fn trigger_staged(&mut self, now: u64, t0: u64) -> Result<Scheduled, FifoFull> {
        let p = self.staged.params();
        self.try_schedule(now, 0, t0, p)
    }

    /// Select the FIFO bank feeding the datapath; effective from the next
    /// cycle boundary. Flags and ignores the request if the channel has no
    /// second bank.
    pub fn set_multiplex(&mut self, now: u64, bank: usize) {
        if !self.cfg.multiplex {
            self.errflags |= errflags::MUX_DISABLED;
            return;
        }
        self.mux_pending = Some((now, bank));
    }

    /// Test/introspection hook: FIFO occupancy of one port.
    pub fn fifo_len(&self, bank: usize, port: Port) -> usize {
        self.banks[bank].fifos[port as usize].len()
    }

    fn drain_releases(&mut self, now: u64) {
        let bank = &mut self.banks[self.mux_active];
        for (i, &port) in PORTS.iter().enumerate() {
            let lam = self.cfg.latencies.get(port) + self.trig.latency();
            while let Some(front) = bank.fifos[i].front() {
                if front.t0 <= now + lam as u64 {
                    let e = bank.fifos[i].pop_front().unwrap();
                    self.inflight[i].push_back(e);
                } else {
                    break;
                }
            }
        }
    }

    fn apply_activations(&mut self, now: u64) {
        let s = self.cfg.samples_per_cycle as u64;
        for (i, fifo) in self.inflight.iter_mut().enumerate() {
            while let Some(front) = fifo.front() {
                if front.t0 > now {
                    break;
                }
                let e = fifo.pop_front().unwrap();
                if e.t0 < now {
                    // Only reachable when a bank switch released it too late.
                    self.errflags |= errflags::SCHED_IN_PAST;
                    continue;
                }
                match PORTS[i] {
                    Port::Freq => self.active.freq = e.value,
                    Port::Phase => self.active.phase = e.value,
                    Port::Amp => self.active.amp = e.value as u16 as i16,
                    Port::EnvStart => self.active.env_start = e.value as u16,
                    Port::Duration => {
                        let start = e.t0 * s;
                        self.active.window = Some((start, start + e.value as u64));
                    }
                }
            }
        }
    }

    /// Advance one cycle: latch a pending bank switch, release due FIFO
    /// entries, activate parameters reaching their t0, and render `S` output
    /// samples into `out`.
    pub fn tick(&mut self, now: u64, out: &mut [i16]) {
        assert_eq!(out.len(), self.cfg.samples_per_cycle as usize);
        if let Some((written, bank)) = self.mux_pending {
            if now > written {
                self.mux_active = bank;
                self.mux_pending = None;
            }
        }
        self.drain_releases(now);
        self.apply_activations(now);

        let s = self.cfg.samples_per_cycle as u64;
        let base = now * s;
        match self.active.window {
            Some((start, end)) => {
                for (k, slot) in out.iter_mut().enumerate() {
                    let g = base + k as u64;
                    if g < start || g >= end {
                        *slot = 0;
                        continue;
                    }
                    let mut idx = (g - start) as usize + self.active.env_start as usize;
                    if idx >= self.cfg.env_capacity {
                        idx = self.cfg.env_capacity - 1;
                        self.errflags |= errflags::ENV_OVERRUN;
                    }
                    let theta = self
                        .active
                        .freq
                        .wrapping_mul(g as u32)
                        .wrapping_add(self.active.phase);
                    let (c, _) = self.trig.cos_sin(theta);
                    *slot = q15_mul(q15_mul(self.env_sample(idx), self.active.amp), c);
                }
            }
            None => out.fill(0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_env(sg: &mut SignalGen) {
        let cap = sg.env_capacity();
        sg.load_env(&vec![0x7FFF; cap]);
    }

    /// One channel with effective Λ: freq/phase 6, amp/env/dur 4 (base 4/2
    /// plus the 2-cycle LUT pipeline), matching the worked examples.
    fn chan() -> SignalGen {
        let mut sg = SignalGen::new(SgConfig {
            latencies: PortLatencies {
                freq: 4,
                phase: 4,
                amp: 2,
                env: 2,
                dur: 2,
            },
            ..SgConfig::default()
        });
        rect_env(&mut sg);
        sg
    }

    fn pulse(freq: u32, phase: u32, amp: i16, env_start: u16, duration: u16) -> PulseParams {
        PulseParams {
            freq,
            phase,
            amp,
            env_start,
            duration,
        }
    }

    fn run(sg: &mut SignalGen, cycles: u64) -> Vec<i16> {
        let s = sg.config().samples_per_cycle as usize;
        let mut all = Vec::with_capacity(cycles as usize * s);
        let mut buf = vec![0i16; s];
        for now in 0..cycles {
            sg.tick(now, &mut buf);
            all.extend_from_slice(&buf);
        }
        all
    }

    #[test]
    fn idle_channel_emits_zeros() {
        let mut sg = chan();
        let out = run(&mut sg, 4);
        assert!(out.iter().all(|&v| v == 0));
        assert_eq!(out.len(), 64);
    }

    #[test]
    fn window_alignment_and_periodicity() {
        // f = 0x0800_0000 is a period of 32 samples; t0=10 → first sample 160.
        let mut sg = chan();
        sg.try_schedule(0, 0, 10, pulse(0x0800_0000, 0, 0x7FFF, 0, 64))
            .unwrap();
        let out = run(&mut sg, 16);
        assert!(out[..160].iter().all(|&v| v == 0));
        assert_ne!(out[160], 0);
        // 0x0800_0000·32 wraps to 0 mod 2^32, so the window repeats exactly.
        assert_eq!(out[160..192], out[192..224]);
        // Window closes after 64 samples.
        assert!(out[224..].iter().all(|&v| v == 0));
        assert_eq!(sg.errflags(), 0);
    }

    #[test]
    fn zero_amplitude_mutes_the_window() {
        let mut sg = chan();
        sg.try_schedule(0, 0, 10, pulse(0x0800_0000, 0, 0, 0, 64))
            .unwrap();
        let out = run(&mut sg, 16);
        assert!(out.iter().all(|&v| v == 0));
    }

    #[test]
    fn release_frees_slot_at_t0_minus_lambda() {
        let mut sg = chan();
        sg.try_schedule(0, 0, 100, pulse(1, 2, 3, 4, 5)).unwrap();
        assert_eq!(sg.fifo_len(0, Port::Freq), 1);
        assert_eq!(sg.fifo_len(0, Port::EnvStart), 1);
        let mut buf = vec![0i16; 16];
        for now in 0..94 {
            sg.tick(now, &mut buf);
            // Λ_env(eff) = 4 → env released at 96; Λ_freq(eff) = 6 → 94.
            let freq_expect = if now >= 94 { 0 } else { 1 };
            let env_expect = if now >= 96 { 0 } else { 1 };
            assert_eq!(sg.fifo_len(0, Port::Freq), freq_expect, "cycle {now}");
            assert_eq!(sg.fifo_len(0, Port::EnvStart), env_expect, "cycle {now}");
        }
        sg.tick(94, &mut buf);
        assert_eq!(sg.fifo_len(0, Port::Freq), 0);
        assert_eq!(sg.fifo_len(0, Port::EnvStart), 1);
        sg.tick(95, &mut buf);
        sg.tick(96, &mut buf);
        assert_eq!(sg.fifo_len(0, Port::EnvStart), 0);
    }

    #[test]
    fn first_output_sample_is_s_times_t0() {
        // Regardless of the per-port latency spread.
        for lat in [
            PortLatencies {
                freq: 0,
                phase: 0,
                amp: 0,
                env: 0,
                dur: 0,
            },
            PortLatencies {
                freq: 12,
                phase: 3,
                amp: 9,
                env: 1,
                dur: 7,
            },
            PortLatencies::default(),
        ] {
            let mut sg = SignalGen::new(SgConfig {
                latencies: lat,
                ..SgConfig::default()
            });
            rect_env(&mut sg);
            sg.try_schedule(0, 0, 25, pulse(0, 0, 0x7FFF, 0, 16))
                .unwrap();
            let out = run(&mut sg, 32);
            let first = out.iter().position(|&v| v != 0).unwrap();
            assert_eq!(first, 25 * 16);
        }
    }

    #[test]
    fn seventeenth_entry_stalls_until_first_release() {
        // Depth 16, Λ(eff, all ports) = 6, t0 = 40..=56: the 17th pulse fits
        // only once the t0=40 entries release at cycle 34.
        let mut sg = SignalGen::new(SgConfig {
            latencies: PortLatencies {
                freq: 4,
                phase: 4,
                amp: 4,
                env: 4,
                dur: 4,
            },
            ..SgConfig::default()
        });
        rect_env(&mut sg);
        for i in 0..16u64 {
            assert_eq!(
                sg.try_schedule(0, 0, 40 + i, pulse(0, 0, 1, 0, 1)),
                Ok(Scheduled::Queued)
            );
        }
        let mut buf = vec![0i16; 16];
        for now in 0..34 {
            assert_eq!(
                sg.try_schedule(now, 0, 56, pulse(0, 0, 1, 0, 1)),
                Err(FifoFull)
            );
            sg.tick(now, &mut buf);
        }
        assert_eq!(
            sg.try_schedule(34, 0, 56, pulse(0, 0, 1, 0, 1)),
            Ok(Scheduled::Queued)
        );
    }

    #[test]
    fn order_violation_is_flagged_and_dropped() {
        let mut sg = chan();
        sg.try_schedule(0, 0, 50, pulse(0, 0, 0x7FFF, 0, 16))
            .unwrap();
        assert_eq!(
            sg.try_schedule(0, 0, 40, pulse(0, 0, 0x7FFF, 0, 16)),
            Ok(Scheduled::DroppedOrderViolation)
        );
        assert_eq!(
            sg.errflags() & errflags::ORDER_VIOLATION,
            errflags::ORDER_VIOLATION
        );
        // The t0=50 pulse still plays; nothing at t0=40.
        let out = run(&mut sg, 64);
        assert!(out[40 * 16..41 * 16].iter().all(|&v| v == 0));
        assert!(out[50 * 16] != 0);
    }

    #[test]
    fn scheduling_in_past_is_flagged_and_dropped() {
        let mut sg = chan();
        // t0=3 with Λ_freq(eff)=6 can never release in time.
        assert_eq!(
            sg.try_schedule(0, 0, 3, pulse(0, 0, 0x7FFF, 0, 16)),
            Ok(Scheduled::DroppedSchedInPast)
        );
        assert_eq!(
            sg.errflags() & errflags::SCHED_IN_PAST,
            errflags::SCHED_IN_PAST
        );
        assert!(run(&mut sg, 8).iter().all(|&v| v == 0));
    }

    #[test]
    fn back_to_back_windows_have_no_gap() {
        // The phase offset keeps every sample off the carrier's exact zero
        // crossings, so a gap is distinguishable from a legitimate zero.
        let mut sg = chan();
        sg.try_schedule(0, 0, 100, pulse(0x0200_0000, 0x0040_0000, 0x7FFF, 0, 1024))
            .unwrap();
        sg.try_schedule(0, 0, 164, pulse(0x0200_0000, 0x0040_0000, 0x7FFF, 0, 1024))
            .unwrap();
        let out = run(&mut sg, 240);
        assert!(out[..1600].iter().all(|&v| v == 0));
        assert!(
            out[1600..3648].iter().all(|&v| v != 0),
            "gap inside the joined windows"
        );
        assert!(out[3648..].iter().all(|&v| v == 0));
    }

    #[test]
    fn envelope_overrun_clamps_and_flags() {
        let mut sg = chan();
        // Distinctive last sample so the clamp is observable.
        let cap = sg.env_capacity();
        let mut env = vec![0x7FFF_i16; cap];
        env[cap - 1] = 0x1234;
        sg.load_env(&env);
        // env_start pushes the index past the end halfway through the window.
        let start = (cap - 8) as u16;
        sg.try_schedule(0, 0, 10, pulse(0, 0, 0x7FFF, start, 16))
            .unwrap();
        let out = run(&mut sg, 12);
        let w = &out[160..176];
        let full = q15_mul(q15_mul(0x7FFF, 0x7FFF), 32767);
        let clamped = q15_mul(q15_mul(0x1234, 0x7FFF), 32767);
        assert!(w[..7].iter().all(|&v| v == full));
        assert!(w[8..].iter().all(|&v| v == clamped));
        assert_eq!(sg.errflags() & errflags::ENV_OVERRUN, errflags::ENV_OVERRUN);
    }

    #[test]
    fn multiplex_selects_bank_and_latches_next_cycle() {
        let mut sg = SignalGen::new(SgConfig {
            multiplex: true,
            ..SgConfig::default()
        });
        rect_env(&mut sg);
        // Bank 1 carries the pulse; bank 0 stays empty (idle).
        sg.try_schedule(0, 1, 40, pulse(0, 0, 0x7FFF, 0, 16))
            .unwrap();

        // Leave the selector on bank 0: nothing plays.
        let mut probe = sg.clone();
        let out = run(&mut probe, 48);
        assert!(out.iter().all(|&v| v == 0));

        // Select bank 1 in time: the pulse plays at exactly S·t0.
        let mut buf = vec![0i16; 16];
        sg.set_multiplex(5, 1);
        let mut all = Vec::new();
        for now in 0..48 {
            sg.tick(now, &mut buf);
            all.extend_from_slice(&buf);
        }
        assert_eq!(all.iter().position(|&v| v != 0), Some(40 * 16));
        assert_eq!(sg.errflags(), 0);
    }

    #[test]
    fn stale_entries_on_late_bank_switch_are_dropped() {
        let mut sg = SignalGen::new(SgConfig {
            multiplex: true,
            ..SgConfig::default()
        });
        rect_env(&mut sg);
        sg.try_schedule(0, 1, 40, pulse(0, 0, 0x7FFF, 0, 16))
            .unwrap();
        let mut buf = vec![0i16; 16];
        for now in 0..60 {
            if now == 50 {
                sg.set_multiplex(now, 1); // long after t0=40 passed
            }
            sg.tick(now, &mut buf);
            assert!(buf.iter().all(|&v| v == 0), "zombie pulse at cycle {now}");
        }
        assert_eq!(
            sg.errflags() & errflags::SCHED_IN_PAST,
            errflags::SCHED_IN_PAST
        );
    }

    #[test]
    fn multiplex_on_plain_channel_is_flagged() {
        let mut sg = chan();
        sg.set_multiplex(0, 1);
        assert_eq!(
            sg.errflags() & errflags::MUX_DISABLED,
            errflags::MUX_DISABLED
        );
        assert_eq!(sg.multiplex_selected(), 0);
        assert_eq!(
            sg.try_schedule(0, 1, 40, pulse(0, 0, 1, 0, 1)),
            Ok(Scheduled::DroppedMuxDisabled)
        );
    }

    #[test]
    fn vector_tick_matches_sample_rate_scalar_channel() {
        // Emitting 16 samples per tick must be bit-identical to a 1-sample-
        // per-cycle channel running 16× as many cycles (g is all that
        // matters). Latencies and t0 scale with the cycle reinterpretation.
        let mut wide = SignalGen::new(SgConfig::default());
        rect_env(&mut wide);
        wide.try_schedule(0, 0, 20, pulse(0x0123_4567, 0x89AB_CDEF, 0x5A5A, 3, 400))
            .unwrap();
        let wide_out = run(&mut wide, 64);

        let mut narrow = SignalGen::new(SgConfig {
            samples_per_cycle: 1,
            latencies: PortLatencies {
                freq: 96,
                phase: 96,
                amp: 64,
                env: 64,
                dur: 64,
            },
            ..SgConfig::default()
        });
        rect_env(&mut narrow);
        narrow
            .try_schedule(
                0,
                0,
                20 * 16,
                pulse(0x0123_4567, 0x89AB_CDEF, 0x5A5A, 3, 400),
            )
            .unwrap();
        let narrow_out = run(&mut narrow, 64 * 16);
        assert_eq!(wide_out, narrow_out);
    }
}
