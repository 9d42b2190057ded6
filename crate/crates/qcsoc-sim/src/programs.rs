//! Ready-made guest experiments: assembly sources paired with the rig
//! configuration they expect and host-side reference math for checking their
//! results.
//!
//! Every experiment reports through a mailbox in guest data RAM (see
//! [`mailbox`]) and exits via `ecall`, so a host can run one with nothing but
//! [`Config::build_simulator`] and a handful of bus reads afterwards.
//!
//! All experiments share a few conventions:
//!
//! * Gates drive the qubit at baseband: frequency and phase words are 0, so
//!   the generator output is the (scaled) envelope itself and the plant's
//!   rotating-frame coupling integrates it directly.
//! * A measurement is a 64-sample probe pulse on the readout channel plus a
//!   16-sample demodulation window armed `delay / samples_per_cycle` cycles
//!   after the probe's start time. Guests poll the result register with
//!   `lw`/`bgez`; the sign bit doubles as the valid flag.
//! * Probe and demodulator phase words are chosen so the reflected tone lands
//!   on the I axis: ground state integrates positive, excited negative, and a
//!   zero threshold separates them.

use crate::asm::{assemble, AsmError, Assembled};
use crate::bus::PROG_BASE;
use crate::config::{Config, RdOverride, SgOverride};
use crate::fixed::q15_mul;
use std::f64::consts::PI;

/// Mailbox layout in guest data RAM. The first two words are common to every
/// experiment; the rest are per-experiment and aliased by name.
pub mod mailbox {
    use crate::bus::DATA_BASE;

    /// Primary result: measured state, or final amplitude for calibration,
    /// or point count for the amplitude sweep.
    pub const RESULT: u32 = DATA_BASE;
    /// How many results were recorded (shots per point for sweeps,
    /// iterations used for calibration).
    pub const COUNT: u32 = DATA_BASE + 0x4;
    /// Fast reset: cycle cost of the conditional section.
    pub const SECTION_CYCLES: u32 = DATA_BASE + 0x8;
    /// Single measurement: integrated I value.
    pub const RES_I: u32 = DATA_BASE + 0x8;
    /// Fast reset: outcome of the first measurement (before correction).
    pub const FIRST_STATE: u32 = DATA_BASE + 0xC;
    /// Single measurement: integrated Q value.
    pub const RES_Q: u32 = DATA_BASE + 0xC;
    /// Amplitude sweep: per-point flip counts, one word per point.
    pub const SCAN_COUNTS: u32 = DATA_BASE + 0x10;
    /// Calibration log: `(k << 16 | n_err, amplitude)` word pairs, one per
    /// iteration, in execution order.
    pub const CAL_LOG: u32 = DATA_BASE + 0x100;
}

/// How the fast-reset experiment applies the conditional correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FastResetVariant {
    /// `lw` the result, conditional branch around an X pulse.
    Branch,
    /// Branch-free: preload X into FIFO bank 1 and `sw` the result word to
    /// the decoder's MULTIPLEX register, letting bit 0 pick the bank.
    Branchless,
}

/// A guest program together with the rig it expects.
#[derive(Debug, Clone)]
pub struct Script {
    pub name: &'static str,
    /// Assembly source; assembles at the program-memory origin.
    pub source: String,
    /// Rig the source assumes (channel count, plant wiring, run budget).
    pub config: Config,
    /// What a harness should observe on success.
    pub expected: &'static str,
}

impl Script {
    pub fn assemble(&self) -> Result<Assembled, AsmError> {
        assemble(&self.source, PROG_BASE)
    }
}

/// Decoder programming shared by every experiment, as an assembly fragment.
///
/// Matches the default plant reflection: tone word `0x0800_0000` per ADC
/// sample, 8-sample path delay (so the demodulator phase word cancels
/// `freq * delay`), 16-sample window, zero threshold, I-axis projection.
fn decoder_setup(enable_capture: bool) -> String {
    let capture = if enable_capture {
        "    li   t0, 1\n    sw   t0, 24(s1)             # capture on\n"
    } else {
        ""
    };
    format!(
        "\
    li   s1, RD_BASE            # decoder 0 register bank
    li   s2, DATA_BASE          # result mailbox
    li   t0, DEC_FREQ
    sw   t0, 0(s1)              # demod frequency word
    li   t0, DEC_PHASE
    sw   t0, 4(s1)              # cancels tone rotation over the path delay
    li   t0, MEAS_WINDOW
    sw   t0, 8(s1)              # integration window, ADC samples
    sw   zero, 12(s1)           # threshold 0: sign of I decides the state
    sw   zero, 32(s1)           # no projection rotation
{capture}"
    )
}

/// Shared `.equ` block for the measurement fragment.
const MEAS_EQUS: &str = "\
.equ DEC_FREQ,    0x08000000    # reflected tone, phase per ADC sample
.equ DEC_PHASE,   0xC0000000    # -DEC_FREQ * path delay (8 samples)
.equ PROBE_FREQ,  0x02000000    # probe carrier (cosmetic; plant synthesizes)
.equ PROBE_DUR,   64            # DAC samples -> 16-sample ADC window
.equ MEAS_WINDOW, 16            # ADC samples
.equ ARM_SKEW,    2             # path delay / ADC samples per cycle
.equ GATE_DUR,    256           # DAC samples per single-qubit gate
";

/// Conditional reset of one qubit: measure, flip if excited, verify.
///
/// The guest schedules everything from one `rdcycle` base `B`: state prep at
/// `B`, the conditional X slot at `B+96`, measurements at `B+32` and `B+128`.
/// Between the measurement and the X slot sits the *conditional section*,
/// the part whose cost depends on the steering style; the guest brackets it
/// with `rdcycle` and reports the cost (minus the closing `rdcycle` itself)
/// in the mailbox.
///
/// * [`FastResetVariant::Branchless`]: X waits in FIFO bank 1; the section is
///   `lw RESULT; sw MULTIPLEX` and costs the same 4 cycles for either
///   outcome. If the qubit measured ground the bank is never selected and the
///   preloaded pulse simply never plays.
/// * [`FastResetVariant::Branch`]: the section compares the result word
///   against the valid-bit-only pattern (ground) and skips the X pulse,
///   paying the taken-branch penalty on exactly the path that does nothing:
///   7 cycles for ground, 4 for excited.
///
/// `prep_amp` scales the state-preparation pulse: 0 leaves the qubit in
/// ground, full scale (32767) prepares excited. Mailbox: final state,
/// count=1, section cycles, first measured state.
pub fn fast_reset(variant: FastResetVariant, prep_amp: i16) -> Script {
    let setup = decoder_setup(true);
    let common_head = format!(
        "\
# Measure one qubit and conditionally flip it back to ground, then verify.
{MEAS_EQUS}\
.equ PREP_AMP,    {prep_amp}    # 0 = leave in ground, 32767 = prepare excited

{setup}\
    rdcycle s3
    addi s3, s3, 24             # B: schedule base, comfortably ahead
    settime s3
    pulse 0, 0, 0, PREP_AMP, 0, GATE_DUR, 0     # state prep, baseband
    addi s4, s3, 96             # conditional X slot
    addi s5, s3, 32             # first measurement
"
    );

    let (name, schedule, section, expected) = match variant {
        FastResetVariant::Branchless => (
            "fast-reset-branchless",
            "\
    settime s4
    pulse 0, 0, 0, 0x7fff, 0, GATE_DUR, 1      # X staged in bank 1
    settime s5
    pulse 1, PROBE_FREQ, 0, 0x7fff, 0, PROBE_DUR, 0
    addi t0, s5, ARM_SKEW
    sw   t0, 28(s1)             # arm the demodulator
",
            "\
poll1:
    lw   t1, 16(s1)
    bgez t1, poll1              # sign bit set = result valid
    rdcycle s6
    lw   t1, 16(s1)
    sw   t1, 20(s1)             # MULTIPLEX: bit 0 steers the FIFO bank
    rdcycle s7
",
            "final state 0; conditional section costs 4 cycles for either outcome",
        ),
        FastResetVariant::Branch => (
            "fast-reset-branch",
            "\
    settime s5
    pulse 1, PROBE_FREQ, 0, 0x7fff, 0, PROBE_DUR, 0
    settime s4                  # trigger time the conditional X will use
    addi t0, s5, ARM_SKEW
    sw   t0, 28(s1)             # arm the demodulator
    li   s9, 0x80000000         # result word for a ground-state outcome
",
            "\
poll1:
    lw   t1, 16(s1)
    bgez t1, poll1              # sign bit set = result valid
    rdcycle s6
    lw   t1, 16(s1)
    beq  t1, s9, skip_x         # ground: skip the correction (taken)
    rdcycle s7
    pulse 0, 0, 0, 0x7fff, 0, GATE_DUR, 0      # X at the preset slot
    j    joined
skip_x:
    rdcycle s7
joined:
",
            "final state 0; section costs 4 cycles (excited) or 4+penalty (ground)",
        ),
    };

    let tail = "\
    sub  s7, s7, s6
    addi s7, s7, -1             # drop the closing rdcycle's own cycle
    andi s8, t1, 1              # first measured state

    addi s5, s3, 128            # verification measurement
    settime s5
    pulse 1, PROBE_FREQ, 0, 0x7fff, 0, PROBE_DUR, 0
    addi t0, s5, ARM_SKEW
    sw   t0, 28(s1)             # re-arm (previous window already finalized)
poll2:
    lw   t1, 16(s1)
    bgez t1, poll2
    andi t1, t1, 1

    sw   t1, 0(s2)              # final state
    li   t0, 1
    sw   t0, 4(s2)              # one result recorded
    sw   s7, 8(s2)              # conditional-section cycles
    sw   s8, 12(s2)             # state before correction
    mv   a0, zero
    ecall
";

    Script {
        name,
        source: format!("{common_head}{schedule}{section}{tail}"),
        config: Config::default(),
        expected,
    }
}

/// Branch and branchless fast-reset runs on a ground-state qubit, the pair
/// used to measure the reaction-path cost difference.
pub fn latency_pair() -> (Script, Script) {
    (
        fast_reset(FastResetVariant::Branch, 0),
        fast_reset(FastResetVariant::Branchless, 0),
    )
}

/// One optional preparation pulse followed by one measurement.
///
/// The guest exits with the measured state as its exit code and also leaves
/// state / count=1 / I / Q in the mailbox, which makes large shot batches
/// cheap to harvest. `sigma` is the per-sample readout noise; the rig is
/// trimmed to two generators and one decoder so noise studies with very
/// large shot counts stay fast.
pub fn single_measurement(prep_amp: i16, sigma: f64) -> Script {
    let setup = decoder_setup(false);
    let source = format!(
        "\
# Prepare (optionally) and measure once; exit code = measured state.
{MEAS_EQUS}\
.equ PREP_AMP,    {prep_amp}

{setup}\
    rdcycle s3
    addi s3, s3, 24
    settime s3
    pulse 0, 0, 0, PREP_AMP, 0, GATE_DUR, 0
    addi s5, s3, 32
    settime s5
    pulse 1, PROBE_FREQ, 0, 0x7fff, 0, PROBE_DUR, 0
    addi t0, s5, ARM_SKEW
    sw   t0, 28(s1)
poll:
    lw   t1, 16(s1)
    bgez t1, poll
    andi t0, t1, 1
    sw   t0, 0(s2)              # measured state
    li   t2, 1
    sw   t2, 4(s2)
    lw   t3, 36(s1)
    sw   t3, 8(s2)              # integrated I
    lw   t3, 40(s1)
    sw   t3, 12(s2)             # integrated Q
    mv   a0, t0
    ecall
"
    );

    let mut config = Config::default();
    config.system.dac_channels = 2;
    config.system.adc_channels = 1;
    config.rd = vec![RdOverride {
        channel: 0,
        capture: Some(false),
        ..Default::default()
    }];
    config.qubit[0].readout.sigma = sigma;
    config.run.max_cycles = 100_000;
    config.validate().expect("single-measurement rig");

    Script {
        name: "single-measurement",
        source,
        config,
        expected: "exit code = measured state; mailbox holds state, I, Q",
    }
}

/// Error-amplification schedule for [`amplitude_calibration`]: repetition
/// factor `k` and the guest's fixed-point gain `C_k = round(2^16 / (k*pi))`.
pub const CALIBRATION_STAGES: [(u32, u32); 4] = [(3, 6955), (7, 2981), (15, 1391), (31, 673)];

/// Knobs for [`amplitude_calibration`].
#[derive(Debug, Clone, Copy)]
pub struct CalibrationParams {
    /// Starting amplitude guess (the quantity being calibrated).
    pub initial_amp: i16,
    /// Measurements per iteration; at most 255 so `n_err << 24` fits a word.
    pub shots_per_iter: u32,
    /// Total iteration budget across all stages.
    pub max_iters: u32,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        CalibrationParams {
            initial_amp: 23592,
            shots_per_iter: 100,
            max_iters: 50,
        }
    }
}

/// Closed-loop pi-pulse amplitude calibration via error amplification.
///
/// For each stage `k` in 3, 7, 15, 31 the guest plays one pulse `k` gates
/// long (duration `k*256` samples; under the linear drive coupling this
/// rotates by `k` times one gate's angle) and measures. A perfect pi pulse
/// flips the qubit's previous measurement outcome every time, for any odd
/// `k`, so errors are counted as *non-flips* — no explicit reset is needed,
/// the measurement collapse itself re-pins the state. An amplitude error `e`
/// yields `n_err/shots ~= sin^2(k*pi*e/2)`, so each stage sharpens the
/// estimate by its `k`.
///
/// Per iteration the guest computes `R = isqrt((n_err << 24) / shots)`
/// (`sqrt(n_err/shots)` in Q12), steps the amplitude by
/// `max(1, ((a*R >> 12) * C_k) >> 15)` — first-order exactly `a * |e|` —
/// and flips the step direction whenever an iteration got worse. A stage
/// finishes when `n_err <= shots/8`, which lands inside the next stage's
/// unambiguous capture range; after the last stage the error bound is
/// 0.23/31 < 1%.
///
/// Exit code 0 on success with the final amplitude and iterations used in
/// the mailbox, 2 if the iteration budget runs out. Every iteration appends
/// `(k << 16 | n_err, amplitude)` to the log at [`mailbox::CAL_LOG`].
pub fn amplitude_calibration(params: CalibrationParams) -> Script {
    assert!(params.initial_amp > 0, "initial amplitude must be positive");
    assert!(
        (8..=255).contains(&params.shots_per_iter),
        "shots_per_iter must be in 8..=255"
    );
    assert!(
        params.max_iters >= 4,
        "need at least one iteration per stage"
    );

    let setup = decoder_setup(false);
    let stages: Vec<String> = CALIBRATION_STAGES
        .iter()
        .map(|&(k, c)| format!("{k}, {c}"))
        .collect();
    let stage_words = stages.join(", ");
    let source = format!(
        "\
# Calibrate the pi-pulse amplitude by error amplification.
{MEAS_EQUS}\
.equ INIT_AMP, {init}
.equ SHOTS,    {shots}          # measurements per iteration (<= 255)
.equ NTHRESH,  SHOTS/8          # stage passes when n_err <= this
.equ MAXIT,    {max_iters}

{setup}\
    li   s0, INIT_AMP           # amplitude under calibration
    li   s11, DATA_BASE+0x100   # iteration log cursor
    li   s4, 0                  # iterations used
    jal  measure                # pin the starting state (and collapse)
    mv   s8, a0                 # previous outcome

    la   s9, stages
stage_loop:
    lw   s3, 0(s9)              # k (0 terminates the table)
    beqz s3, cal_done
    li   s5, -1                 # previous n_err: none yet
    li   s6, 1                  # step direction
iter_loop:
    li   t0, MAXIT
    bge  s4, t0, cal_fail
    addi s4, s4, 1
    li   s7, 0                  # n_err
    li   s10, SHOTS
rep_loop:
    jal  amplified_pulse
    jal  measure
    xor  t0, a0, s8             # did the outcome flip?
    mv   s8, a0
    bnez t0, rep_next           # flip = correct
    addi s7, s7, 1              # non-flip = error
rep_next:
    addi s10, s10, -1
    bnez s10, rep_loop

    slli t0, s3, 16             # log this iteration
    or   t0, t0, s7
    sw   t0, 0(s11)
    sw   s0, 4(s11)
    addi s11, s11, 8

    li   t0, NTHRESH
    bgeu t0, s7, stage_next     # converged for this k
    bltz s5, keep_dir           # first iteration of the stage
    bgeu s5, s7, keep_dir       # no worse than last time
    sub  s6, zero, s6           # worse: we stepped the wrong way
keep_dir:
    mv   s5, s7
    slli a0, s7, 24             # R = isqrt(n_err / shots in Q24)
    li   t0, SHOTS
    divu a0, a0, t0
    jal  isqrt
    mul  t0, s0, a0             # da = max(1, ((a*R >> 12) * C_k) >> 15)
    srli t0, t0, 12
    lw   t1, 4(s9)
    mul  t0, t0, t1
    srli t0, t0, 15
    bnez t0, da_ready
    li   t0, 1
da_ready:
    bltz s6, step_down
    add  s0, s0, t0
    j    clamp
step_down:
    sub  s0, s0, t0
clamp:
    li   t1, 32767
    blt  t1, s0, clamp_hi
    li   t1, 1
    blt  s0, t1, clamp_lo
    j    iter_loop
clamp_hi:
    li   s0, 32767
    j    iter_loop
clamp_lo:
    li   s0, 1
    j    iter_loop

stage_next:
    addi s9, s9, 8
    j    stage_loop

cal_done:
    sw   s0, 0(s2)              # calibrated amplitude
    sw   s4, 4(s2)              # iterations used
    li   a0, 0
    ecall
cal_fail:
    sw   s0, 0(s2)
    sw   s4, 4(s2)
    li   a0, 2
    ecall

# Play one k-gates-long pulse at the current amplitude. The amplitude and
# duration are run-time values, so this goes through the staged register
# file and a T0 trigger rather than the (immediate-only) pulse instruction.
amplified_pulse:
    li   a1, SG_BASE
    rdcycle a2
    addi a2, a2, 24
    sw   zero, 0(a1)            # baseband
    sw   zero, 8(a1)
    sw   s0, 12(a1)             # amplitude under test
    sw   zero, 16(a1)
    slli a3, s3, 8              # k * 256 samples
    sw   a3, 20(a1)
    sw   a2, 24(a1)             # trigger: schedule into bank 0
    srli a3, a3, 4              # pulse length in cycles
    add  a4, a2, a3
    addi a4, a4, 16             # leave a gap before measuring
    mv   a5, a4                 # measurement slot for the caller
    ret

# Measure once: probe at the slot in a5 (or now+24 if a5 is stale), return
# the state in a0. Clobbers t-registers and a0.
measure:
    rdcycle a2
    addi a2, a2, 24
    bltu a2, a5, have_slot      # a pulse just scheduled a later slot
    mv   a5, a2
have_slot:
    settime a5
    pulse 1, PROBE_FREQ, 0, 0x7fff, 0, PROBE_DUR, 0
    addi t0, a5, ARM_SKEW
    sw   t0, 28(s1)
    li   a5, 0                  # slot consumed
m_poll:
    lw   a0, 16(s1)
    bgez a0, m_poll
    andi a0, a0, 1
    ret

# a0 = floor(sqrt(a0)), standard bitwise method.
isqrt:
    li   a1, 0
    li   a2, 0x40000000
isq_scale:
    bgeu a0, a2, isq_step
    srli a2, a2, 2
    bnez a2, isq_scale
isq_step:
    beqz a2, isq_done
    add  a3, a1, a2
    srli a1, a1, 1
    bltu a0, a3, isq_next
    sub  a0, a0, a3
    add  a1, a1, a2
isq_next:
    srli a2, a2, 2
    bnez a2, isq_step
isq_done:
    mv   a0, a1
    ret

stages:
    .word {stage_words}, 0, 0
",
        init = params.initial_amp,
        shots = params.shots_per_iter,
        max_iters = params.max_iters,
    );

    Script {
        name: "amplitude-calibration",
        source,
        config: calibration_rig(),
        expected: "exit 0 with the amplitude within 1% of the ideal pi pulse",
    }
}

/// Two generators, one decoder, a deep drive envelope (the longest amplified
/// pulse reads 31*256 samples), and a gentler drive coupling so the ideal
/// amplitude (80% of full scale) sits well inside the adjustable range.
fn calibration_rig() -> Config {
    let mut config = Config::default();
    config.system.dac_channels = 2;
    config.system.adc_channels = 1;
    config.sg = vec![SgOverride {
        channel: 0,
        envelope_capacity: Some(32768),
        ..Default::default()
    }];
    config.rd = vec![RdOverride {
        channel: 0,
        capture: Some(false),
        ..Default::default()
    }];
    config.qubit[0].rabi = PI / (256.0 * 0.8);
    config.run.max_cycles = 8_000_000;
    config.validate().expect("calibration rig");
    config
}

/// Sweep the gate amplitude and record flip counts per point.
///
/// For each amplitude `a` the guest plays one 256-sample gate and measures,
/// `shots_per_point` times. From either measurement pole the probability of
/// the outcome flipping is `sin^2(theta(a)/2)`, so the flip counts trace the
/// power-Rabi fringe without any explicit reset. Mailbox: point count,
/// shots per point, then one flip count per point at
/// [`mailbox::SCAN_COUNTS`].
pub fn rabi_scan(amps: &[i16], shots_per_point: u32) -> Script {
    assert!(!amps.is_empty(), "need at least one sweep point");
    assert!(
        amps.iter().all(|&a| a >= 0),
        "sweep amplitudes are non-negative"
    );
    assert!((1..=65535).contains(&shots_per_point));

    let setup = decoder_setup(false);
    let amp_words: Vec<String> = amps.iter().map(|a| a.to_string()).collect();
    let amp_words = amp_words.join(", ");
    let source = format!(
        "\
# Power-Rabi sweep: flip counts vs gate amplitude.
{MEAS_EQUS}\
.equ REPS,    {reps}
.equ NPOINTS, {npoints}

{setup}\
    li   t0, NPOINTS
    sw   t0, 0(s2)
    li   t0, REPS
    sw   t0, 4(s2)
    li   s4, DATA_BASE+0x10     # flip-count cursor
    jal  measure                # pin the starting state
    mv   s8, a0
    la   s0, amps
point_loop:
    lw   s3, 0(s0)              # amplitude (-1 terminates)
    bltz s3, scan_done
    li   s6, 0                  # flips
    li   s5, REPS
rep_loop:
    jal  gate_pulse
    jal  measure
    xor  t0, a0, s8
    mv   s8, a0
    beqz t0, rep_next
    addi s6, s6, 1
rep_next:
    addi s5, s5, -1
    bnez s5, rep_loop
    sw   s6, 0(s4)
    addi s4, s4, 4
    addi s0, s0, 4
    j    point_loop
scan_done:
    li   a0, 0
    ecall

# One 256-sample gate at the amplitude in s3 (run-time value -> staged
# registers + T0 trigger), leaving the measurement slot in a5.
gate_pulse:
    li   a1, SG_BASE
    rdcycle a2
    addi a2, a2, 24
    sw   zero, 0(a1)
    sw   zero, 8(a1)
    sw   s3, 12(a1)
    sw   zero, 16(a1)
    li   a3, GATE_DUR
    sw   a3, 20(a1)
    sw   a2, 24(a1)
    addi a4, a2, 32             # gate is 16 cycles; measure after a gap
    mv   a5, a4
    ret

measure:
    rdcycle a2
    addi a2, a2, 24
    bltu a2, a5, have_slot
    mv   a5, a2
have_slot:
    settime a5
    pulse 1, PROBE_FREQ, 0, 0x7fff, 0, PROBE_DUR, 0
    addi t0, a5, ARM_SKEW
    sw   t0, 28(s1)
    li   a5, 0
m_poll:
    lw   a0, 16(s1)
    bgez a0, m_poll
    andi a0, a0, 1
    ret

amps:
    .word {amp_words}, -1
",
        reps = shots_per_point,
        npoints = amps.len(),
    );

    let mut config = Config::default();
    config.system.dac_channels = 2;
    config.system.adc_channels = 1;
    config.rd = vec![RdOverride {
        channel: 0,
        capture: Some(false),
        ..Default::default()
    }];
    config.qubit[0].rabi = PI / (256.0 * 0.8);
    config.run.max_cycles = 4_000_000;
    config.validate().expect("sweep rig");

    Script {
        name: "rabi-scan",
        source,
        config,
        expected: "flip counts trace sin^2(theta(amp)/2) across the sweep",
    }
}

/// Rotation angle (radians) a rectangular baseband gate imparts, replicating
/// the fixed-point sample chain exactly: envelope and carrier are both full
/// scale, so each output sample is `q15(q15(32767, amp), 32767)`.
pub fn gate_rotation(rabi: f64, amp: i16, duration_samples: u32) -> f64 {
    let sample = q15_mul(q15_mul(32767, amp), 32767);
    rabi * duration_samples as f64 * sample as f64 / 32767.0
}

/// The amplitude whose [`gate_rotation`] lands closest to pi.
pub fn pi_amplitude(rabi: f64, duration_samples: u32) -> i16 {
    let est = PI * 32767.0 / (rabi * duration_samples as f64);
    let lo = (est - 16.0).max(1.0) as i16;
    let hi = ((est + 16.0).min(32767.0)) as i16;
    (lo..=hi)
        .min_by(|&a, &b| {
            let da = (gate_rotation(rabi, a, duration_samples) - PI).abs();
            let db = (gate_rotation(rabi, b, duration_samples) - PI).abs();
            da.partial_cmp(&db).unwrap()
        })
        .unwrap()
}

/// `floor(sqrt(x))`, the same bitwise routine the calibration guest runs.
pub fn isqrt(x: u32) -> u32 {
    let mut x = x;
    let mut res = 0u32;
    let mut bit = 1u32 << 30;
    while bit > x {
        bit >>= 2;
    }
    while bit != 0 {
        if x >= res + bit {
            x -= res + bit;
            res = (res >> 1) + bit;
        } else {
            res >>= 1;
        }
        bit >>= 2;
    }
    res
}

/// The calibration guest's amplitude step for one iteration, bit for bit:
/// `max(1, ((a * isqrt((n_err << 24) / shots) >> 12) * c_k) >> 15)`.
pub fn calibration_step(amp: u32, n_err: u32, shots: u32, c_k: u32) -> u32 {
    let r = isqrt((n_err << 24) / shots);
    let da = (((amp * r) >> 12) * c_k) >> 15;
    da.max(1)
}

/// The same step in floating point: `a * sqrt(n_err/shots) * 2 / (k*pi)`,
/// the first-order amplitude-error estimate from an amplified fringe.
pub fn calibration_step_f64(amp: f64, n_err: u32, shots: u32, k: u32) -> f64 {
    amp * (n_err as f64 / shots as f64).sqrt() * 2.0 / (k as f64 * PI)
}
