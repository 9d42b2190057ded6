//! Surrogate qubit plant closing the loop between signal generators and
//! readout decoders.
//!
//! Each simulated qubit is a single Bloch polar angle θ driven by the DAC
//! samples of its drive channel: every sample whose generator is currently
//! playing within the qubit's frequency tolerance adds
//! `rabi · sample/32767` radians (linear Rabi rotation, no decoherence).
//!
//! Readout is dispersive-style: when the qubit's readout drive channel plays
//! a pulse spanning cycles [c0, c1), the plant returns a reflected tone on
//! the qubit's ADC channel over global ADC samples [c0·S + d, c1·S + d):
//!
//! ```text
//! x(g) = sat16( round( 32767 · ( r·cos(ω·(g−d) + φ_state) + σ·n(g) ) ) )
//! ```
//!
//! where φ_state is φ0 or φ1 depending on the measured state and n(g) are
//! i.i.d. standard normal draws. The projective measurement happens at the
//! first reflected sample of each window: state 1 with probability sin²(θ/2),
//! after which θ collapses to the corresponding pole.
//!
//! All randomness comes from counter-seeded ChaCha8 streams, so a shot is a
//! pure function of its seed regardless of host, thread schedule, or how many
//! windows preceded the current one.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::fixed::sat_i16;
use crate::timebase::wrap_dist;

/// SplitMix64 mixing step; used to derive stream seeds from (master, shot).
pub fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-shot seed derived from the experiment master seed and the shot index.
pub fn shot_seed(master: u64, shot: u64) -> u64 {
    splitmix64(master ^ splitmix64(shot))
}

const NOISE_STREAM_TAG: u64 = 0x100;
const COLLAPSE_STREAM_TAG: u64 = 0x200;

/// One cycle's view of a signal generator, as the plant sees it.
#[derive(Debug, Clone, Copy)]
pub struct SgView<'a> {
    /// The DAC samples the channel produced this cycle.
    pub samples: &'a [i16],
    /// Frequency word of the currently playing pulse, if any.
    pub active_freq: Option<u32>,
    /// Currently playing pulse window [start, end) in DAC sample indices.
    pub window: Option<(u64, u64)>,
}

/// Reflected-tone model for one qubit's readout path.
#[derive(Debug, Clone, Copy)]
pub struct ReflectionParams {
    /// Plant round-trip delay in ADC samples.
    pub delay: u64,
    /// Reflection amplitude r as a fraction of full scale.
    pub amp: f64,
    /// Reflected carrier frequency (phase word per ADC sample).
    pub freq: u32,
    /// Reflected phase when the qubit measured 0 / 1.
    pub phi0: u32,
    pub phi1: u32,
    /// Additive white noise, standard deviation as a fraction of full scale.
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct QubitParams {
    /// Signal generator channel whose output drives the qubit.
    pub drive_sg: usize,
    /// Signal generator channel whose pulse window opens the readout.
    pub readout_sg: usize,
    /// ADC (decoder) channel that receives the reflection.
    pub adc: usize,
    /// Frequency word the qubit responds to, and the matching tolerance.
    pub freq: u32,
    pub freq_tolerance: u32,
    /// Rotation per full-scale drive sample, in radians.
    pub rabi: f64,
    pub readout: ReflectionParams,
}

#[derive(Debug, Clone, Copy)]
struct Reflection {
    /// [start, end) in global ADC sample indices.
    start: u64,
    end: u64,
    /// Phase word latched at collapse; None until the first sample plays.
    phase: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct Qubit {
    params: QubitParams,
    theta: f64,
    pending: VecDeque<Reflection>,
    last_window: Option<(u64, u64)>,
    noise: ChaCha8Rng,
    collapse: ChaCha8Rng,
    last_collapse: Option<bool>,
    collapses: u32,
}

impl Qubit {
    /// Current Bloch polar angle in radians.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Outcome of the most recent projective measurement, if any.
    pub fn last_collapse(&self) -> Option<bool> {
        self.last_collapse
    }

    pub fn collapse_count(&self) -> u32 {
        self.collapses
    }

    fn collapse_now(&mut self) -> bool {
        let p1 = (self.theta / 2.0).sin().powi(2);
        let u: f64 = self.collapse.gen();
        let one = u < p1;
        self.theta = if one { PI } else { 0.0 };
        self.last_collapse = Some(one);
        self.collapses += 1;
        one
    }
}

#[derive(Debug, Clone)]
pub struct Plant {
    s_dac: u64,
    s_adc: u64,
    qubits: Vec<Qubit>,
}

impl Plant {
    /// Builds the plant for one shot. `shot_seed` fixes every random stream;
    /// reruns with the same seed reproduce the shot bit for bit.
    pub fn new(params: &[QubitParams], s_dac: u32, s_adc: u32, shot_seed: u64) -> Self {
        let qubits = params
            .iter()
            .map(|p| Qubit {
                params: *p,
                theta: 0.0,
                pending: VecDeque::new(),
                last_window: None,
                noise: ChaCha8Rng::seed_from_u64(splitmix64(
                    shot_seed ^ (NOISE_STREAM_TAG + p.adc as u64),
                )),
                collapse: ChaCha8Rng::seed_from_u64(splitmix64(
                    shot_seed ^ (COLLAPSE_STREAM_TAG + p.adc as u64),
                )),
                last_collapse: None,
                collapses: 0,
            })
            .collect();
        Plant {
            s_dac: s_dac as u64,
            s_adc: s_adc as u64,
            qubits,
        }
    }

    pub fn qubit(&self, i: usize) -> &Qubit {
        &self.qubits[i]
    }

    /// Integrates this cycle's generator outputs: Rabi drive on each qubit's
    /// drive channel and readout-window bookkeeping on its readout channel.
    pub fn absorb(&mut self, views: &[SgView]) {
        for q in &mut self.qubits {
            let drive = &views[q.params.drive_sg];
            if let Some(f) = drive.active_freq {
                if wrap_dist(f, q.params.freq) <= q.params.freq_tolerance {
                    let sum: f64 = drive.samples.iter().map(|&s| s as f64).sum();
                    q.theta += q.params.rabi * sum / 32767.0;
                }
            }
            let ro = &views[q.params.readout_sg];
            if ro.window != q.last_window {
                if let Some((a, b)) = ro.window {
                    let c0 = a / self.s_dac;
                    let c1 = b.div_ceil(self.s_dac);
                    q.pending.push_back(Reflection {
                        start: c0 * self.s_adc + q.params.readout.delay,
                        end: c1 * self.s_adc + q.params.readout.delay,
                        phase: None,
                    });
                }
                q.last_window = ro.window;
            }
        }
    }

    /// Adds this cycle's reflected samples into `frames` (one buffer per ADC
    /// channel, each `s_adc` long, pre-zeroed by the caller).
    pub fn emit(&mut self, now: u64, frames: &mut [Vec<i16>]) {
        for q in &mut self.qubits {
            let p = q.params.readout;
            for k in 0..self.s_adc {
                let g = now * self.s_adc + k;
                while q.pending.front().is_some_and(|r| r.end <= g) {
                    q.pending.pop_front();
                }
                let Some(&Reflection { start, phase, .. }) = q.pending.front() else {
                    continue;
                };
                if g < start {
                    continue;
                }
                let phase = match phase {
                    Some(ph) => ph,
                    None => {
                        // First reflected sample: the projective measurement.
                        let one = q.collapse_now();
                        let ph = if one { p.phi1 } else { p.phi0 };
                        q.pending.front_mut().unwrap().phase = Some(ph);
                        ph
                    }
                };
                let word = p
                    .freq
                    .wrapping_mul((g - p.delay) as u32)
                    .wrapping_add(phase);
                let mut v = p.amp * word_to_rad(word).cos();
                if p.sigma > 0.0 {
                    let n: f64 = q.noise.sample(StandardNormal);
                    v += p.sigma * n;
                }
                let x = sat_i16((32767.0 * v).round() as i64);
                let slot = &mut frames[q.params.adc][k as usize];
                *slot = sat_i16(*slot as i64 + x as i64);
            }
        }
    }
}

fn word_to_rad(w: u32) -> f64 {
    w as f64 / 4294967296.0 * std::f64::consts::TAU
}
