//! Experiment configuration: one strict-schema TOML file describing system
//! geometry, pipeline timing, per-channel RF parameters, the qubit plant,
//! envelope preloads, and batch-run settings.
//!
//! The schema is documented by `configs/single_qubit.toml`, which is embedded
//! as [`DEFAULT_CONFIG_TOML`] and doubles as [`Config::default`]. Every table
//! rejects unknown keys, so a typo fails parsing with the offending key named
//! rather than being silently ignored.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::bus::{SocBus, PROG_SIZE};
use crate::isa::CostModel;
use crate::plant::{Plant, QubitParams, ReflectionParams};
use crate::rfdec::{RdConfig, Readout};
use crate::rfsg::{PortLatencies, SgConfig, SignalGen};
use crate::sim::Simulator;
use crate::trig::TrigKind;

/// The canonical single-qubit experiment, kept in-tree as schema
/// documentation and parsed verbatim by [`Config::default`].
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../configs/single_qubit.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: String) -> ConfigError {
    ConfigError::Invalid(msg)
}

/// Parse a trig-backend spec of the form `"lut:<bits>"` or
/// `"cordic:<iterations>"`.
pub fn parse_trig(spec: &str) -> Result<TrigKind, ConfigError> {
    let bad = || {
        invalid(format!(
            "trig spec {spec:?}: expected \"lut:<bits>\" or \"cordic:<iterations>\""
        ))
    };
    let (kind, arg) = spec.split_once(':').ok_or_else(bad)?;
    let n: u32 = arg.parse().map_err(|_| bad())?;
    match kind {
        "lut" if (2..=16).contains(&n) => Ok(TrigKind::Lut { table_bits: n }),
        "lut" => Err(invalid(format!(
            "trig spec {spec:?}: lut bits must be 2..=16"
        ))),
        "cordic" if (1..=32).contains(&n) => Ok(TrigKind::Cordic { iterations: n }),
        "cordic" => Err(invalid(format!(
            "trig spec {spec:?}: cordic iterations must be 1..=32"
        ))),
        _ => Err(bad()),
    }
}

/// Clock and channel geometry.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub clock_hz: u64,
    pub dac_channels: usize,
    pub adc_channels: usize,
    /// DAC samples produced per system cycle (S).
    pub samples_per_cycle_dac: u32,
    /// ADC samples consumed per system cycle.
    pub samples_per_cycle_adc: u32,
    /// How many qubits one control CPU is allowed to serve.
    pub qubits_per_cpu: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            clock_hz: 500_000_000,
            dac_channels: 16,
            adc_channels: 8,
            samples_per_cycle_dac: 16,
            samples_per_cycle_adc: 4,
            qubits_per_cpu: 8,
        }
    }
}

/// Pipeline timing knobs, mirroring [`CostModel`].
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub branch_taken_penalty: u32,
    pub ram_load_latency: u32,
    pub mmio_load_latency: u32,
    pub mul_div: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let c = CostModel::default();
        PipelineConfig {
            branch_taken_penalty: c.branch_taken_penalty,
            ram_load_latency: c.ram_load_latency,
            mmio_load_latency: c.mmio_load_latency,
            mul_div: c.mul_div,
        }
    }
}

/// Defaults applied to every signal generator channel.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgDefaults {
    pub fifo_depth: usize,
    pub envelope_capacity: usize,
    pub multiplex: bool,
    pub trig: String,
    pub latency_freq: u32,
    pub latency_phase: u32,
    pub latency_amp: u32,
    pub latency_env: u32,
    pub latency_dur: u32,
}

impl Default for SgDefaults {
    fn default() -> Self {
        let lat = PortLatencies::default();
        SgDefaults {
            fifo_depth: 16,
            envelope_capacity: 4096,
            multiplex: false,
            trig: "lut:12".to_string(),
            latency_freq: lat.freq,
            latency_phase: lat.phase,
            latency_amp: lat.amp,
            latency_env: lat.env,
            latency_dur: lat.dur,
        }
    }
}

/// Per-channel overrides of [`SgDefaults`].
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgOverride {
    pub channel: usize,
    pub fifo_depth: Option<usize>,
    pub envelope_capacity: Option<usize>,
    pub multiplex: Option<bool>,
    pub trig: Option<String>,
    pub latency_freq: Option<u32>,
    pub latency_phase: Option<u32>,
    pub latency_amp: Option<u32>,
    pub latency_env: Option<u32>,
    pub latency_dur: Option<u32>,
}

/// Defaults applied to every readout decoder channel.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RdDefaults {
    /// Whether the capture buffer is fitted at all.
    pub capture: bool,
    pub capture_capacity: usize,
    pub trig: String,
}

impl Default for RdDefaults {
    fn default() -> Self {
        RdDefaults {
            capture: true,
            capture_capacity: 16384,
            trig: "lut:12".to_string(),
        }
    }
}

/// Per-channel overrides of [`RdDefaults`].
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RdOverride {
    pub channel: usize,
    /// Generator whose FIFO bank select this decoder's MULTIPLEX register
    /// drives. Defaults to the generator with the same index.
    pub mux_target: Option<usize>,
    pub capture: Option<bool>,
    pub capture_capacity: Option<usize>,
    pub trig: Option<String>,
}

/// One simulated qubit and its readout reflection model.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitConfig {
    pub drive_sg: usize,
    pub readout_sg: usize,
    pub adc: usize,
    /// Drive frequency word the qubit responds to, and the tolerance around
    /// it (phase word per DAC sample).
    pub freq: u32,
    pub freq_tolerance: u32,
    /// Bloch rotation per full-scale drive sample, radians.
    pub rabi: f64,
    pub readout: ReadoutConfig,
}

/// Readout reflection parameters of one qubit.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutConfig {
    /// Plant round-trip delay in ADC samples.
    pub delay: u64,
    /// Reflection amplitude as a fraction of full scale.
    pub amp: f64,
    /// Reflected carrier frequency (phase word per ADC sample).
    pub freq: u32,
    pub phi0: u32,
    pub phi1: u32,
    /// Additive Gaussian noise, standard deviation as a fraction of full
    /// scale.
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FillKind {
    Constant,
    File,
}

/// Preload for one channel's envelope memory, applied before every shot.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeFill {
    pub channel: usize,
    pub kind: FillKind,
    /// Sample value for `constant` fills.
    pub value: Option<i16>,
    /// Samples to write; defaults to the channel capacity (`constant`) or
    /// the whole file (`file`).
    pub count: Option<usize>,
    /// Raw little-endian i16 file for `file` fills, relative to the config.
    pub path: Option<PathBuf>,
}

/// Batch-run settings.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub shots: u64,
    /// Master seed; each shot derives its own stream from it.
    pub seed: u64,
    /// Per-shot cycle budget before the run is declared hung.
    pub max_cycles: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            shots: 1,
            seed: 0,
            max_cycles: 1_000_000,
        }
    }
}

/// A full experiment description.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub sg_defaults: SgDefaults,
    #[serde(default)]
    pub sg: Vec<SgOverride>,
    #[serde(default)]
    pub rd_defaults: RdDefaults,
    #[serde(default)]
    pub rd: Vec<RdOverride>,
    #[serde(default)]
    pub qubit: Vec<QubitConfig>,
    #[serde(default)]
    pub envelope_fill: Vec<EnvelopeFill>,
    #[serde(default)]
    pub run: RunConfig,
}

impl Default for Config {
    /// The canonical single-qubit experiment from `configs/single_qubit.toml`.
    fn default() -> Self {
        Config::from_toml(DEFAULT_CONFIG_TOML).expect("embedded default config is valid")
    }
}

impl Config {
    /// Parse and validate a config document.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read, parse, and validate a config file.
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn dac_rate_hz(&self) -> u64 {
        self.system.clock_hz * self.system.samples_per_cycle_dac as u64
    }

    pub fn adc_rate_hz(&self) -> u64 {
        self.system.clock_hz * self.system.samples_per_cycle_adc as u64
    }

    pub fn cost_model(&self) -> CostModel {
        CostModel {
            branch_taken_penalty: self.pipeline.branch_taken_penalty,
            ram_load_latency: self.pipeline.ram_load_latency,
            mmio_load_latency: self.pipeline.mmio_load_latency,
            mul_div: self.pipeline.mul_div,
        }
    }

    fn sg_override(&self, channel: usize) -> Option<&SgOverride> {
        self.sg.iter().find(|o| o.channel == channel)
    }

    fn rd_override(&self, channel: usize) -> Option<&RdOverride> {
        self.rd.iter().find(|o| o.channel == channel)
    }

    /// Effective generator config for one channel (defaults plus overrides).
    pub fn sg_config(&self, channel: usize) -> Result<SgConfig, ConfigError> {
        let d = &self.sg_defaults;
        let o = self.sg_override(channel);
        let trig = o.and_then(|o| o.trig.as_deref()).unwrap_or(&d.trig);
        Ok(SgConfig {
            samples_per_cycle: self.system.samples_per_cycle_dac,
            fifo_depth: o.and_then(|o| o.fifo_depth).unwrap_or(d.fifo_depth),
            env_capacity: o
                .and_then(|o| o.envelope_capacity)
                .unwrap_or(d.envelope_capacity),
            multiplex: o.and_then(|o| o.multiplex).unwrap_or(d.multiplex),
            latencies: PortLatencies {
                freq: o.and_then(|o| o.latency_freq).unwrap_or(d.latency_freq),
                phase: o.and_then(|o| o.latency_phase).unwrap_or(d.latency_phase),
                amp: o.and_then(|o| o.latency_amp).unwrap_or(d.latency_amp),
                env: o.and_then(|o| o.latency_env).unwrap_or(d.latency_env),
                dur: o.and_then(|o| o.latency_dur).unwrap_or(d.latency_dur),
            },
            trig: parse_trig(trig)?,
        })
    }

    /// Effective decoder config for one channel (defaults plus overrides).
    pub fn rd_config(&self, channel: usize) -> Result<RdConfig, ConfigError> {
        let d = &self.rd_defaults;
        let o = self.rd_override(channel);
        let trig = o.and_then(|o| o.trig.as_deref()).unwrap_or(&d.trig);
        let fitted = o.and_then(|o| o.capture).unwrap_or(d.capture);
        let capacity = o
            .and_then(|o| o.capture_capacity)
            .unwrap_or(d.capture_capacity);
        Ok(RdConfig {
            samples_per_cycle: self.system.samples_per_cycle_adc,
            capture_capacity: if fitted { capacity } else { 0 },
            trig: parse_trig(trig)?,
        })
    }

    /// Which generator each decoder's MULTIPLEX register drives.
    pub fn mux_targets(&self) -> Vec<usize> {
        (0..self.system.adc_channels)
            .map(|ch| {
                self.rd_override(ch)
                    .and_then(|o| o.mux_target)
                    .unwrap_or(ch)
            })
            .collect()
    }

    pub fn qubit_params(&self) -> Vec<QubitParams> {
        self.qubit
            .iter()
            .map(|q| QubitParams {
                drive_sg: q.drive_sg,
                readout_sg: q.readout_sg,
                adc: q.adc,
                freq: q.freq,
                freq_tolerance: q.freq_tolerance,
                rabi: q.rabi,
                readout: ReflectionParams {
                    delay: q.readout.delay,
                    amp: q.readout.amp,
                    freq: q.readout.freq,
                    phi0: q.readout.phi0,
                    phi1: q.readout.phi1,
                    sigma: q.readout.sigma,
                },
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let sys = &self.system;
        if sys.clock_hz == 0 {
            return Err(invalid("system.clock_hz must be nonzero".into()));
        }
        if sys.dac_channels == 0 || sys.dac_channels > 256 {
            return Err(invalid("system.dac_channels must be 1..=256".into()));
        }
        if sys.adc_channels > 256 {
            return Err(invalid("system.adc_channels must be at most 256".into()));
        }
        if sys.samples_per_cycle_dac == 0 {
            return Err(invalid(
                "system.samples_per_cycle_dac must be nonzero".into(),
            ));
        }
        if sys.samples_per_cycle_adc == 0 {
            return Err(invalid(
                "system.samples_per_cycle_adc must be nonzero".into(),
            ));
        }
        if sys.qubits_per_cpu == 0 {
            return Err(invalid("system.qubits_per_cpu must be nonzero".into()));
        }

        let mut seen = HashSet::new();
        for o in &self.sg {
            if o.channel >= sys.dac_channels {
                return Err(invalid(format!(
                    "sg channel {} out of range ({} DAC channels)",
                    o.channel, sys.dac_channels
                )));
            }
            if !seen.insert(o.channel) {
                return Err(invalid(format!(
                    "duplicate [[sg]] entry for channel {}",
                    o.channel
                )));
            }
        }
        let mut seen = HashSet::new();
        for o in &self.rd {
            if o.channel >= sys.adc_channels {
                return Err(invalid(format!(
                    "rd channel {} out of range ({} ADC channels)",
                    o.channel, sys.adc_channels
                )));
            }
            if !seen.insert(o.channel) {
                return Err(invalid(format!(
                    "duplicate [[rd]] entry for channel {}",
                    o.channel
                )));
            }
        }

        for ch in 0..sys.dac_channels {
            let cfg = self.sg_config(ch)?;
            if cfg.fifo_depth == 0 {
                return Err(invalid(format!(
                    "sg channel {ch}: fifo_depth must be nonzero"
                )));
            }
            if !cfg.env_capacity.is_power_of_two() || cfg.env_capacity > 32768 {
                return Err(invalid(format!(
                    "sg channel {ch}: envelope_capacity {} must be a power of two at most 32768",
                    cfg.env_capacity
                )));
            }
        }
        for ch in 0..sys.adc_channels {
            let cfg = self.rd_config(ch)?;
            if cfg.capture_capacity > 32768 {
                return Err(invalid(format!(
                    "rd channel {ch}: capture_capacity {} must be at most 32768",
                    cfg.capture_capacity
                )));
            }
        }
        for (ch, target) in self.mux_targets().iter().enumerate() {
            if *target >= sys.dac_channels {
                return Err(invalid(format!(
                    "rd channel {ch}: mux_target {target} out of range ({} DAC channels)",
                    sys.dac_channels
                )));
            }
        }

        if self.qubit.len() > sys.qubits_per_cpu {
            return Err(invalid(format!(
                "{} qubits configured but qubits_per_cpu = {}",
                self.qubit.len(),
                sys.qubits_per_cpu
            )));
        }
        for (i, q) in self.qubit.iter().enumerate() {
            if q.drive_sg >= sys.dac_channels {
                return Err(invalid(format!(
                    "qubit[{i}].drive_sg {} out of range",
                    q.drive_sg
                )));
            }
            if q.readout_sg >= sys.dac_channels {
                return Err(invalid(format!(
                    "qubit[{i}].readout_sg {} out of range",
                    q.readout_sg
                )));
            }
            if q.adc >= sys.adc_channels {
                return Err(invalid(format!("qubit[{i}].adc {} out of range", q.adc)));
            }
            if !q.rabi.is_finite() {
                return Err(invalid(format!("qubit[{i}].rabi must be finite")));
            }
            if !q.readout.amp.is_finite() || !(0.0..=1.0).contains(&q.readout.amp) {
                return Err(invalid(format!(
                    "qubit[{i}].readout.amp must be within 0.0..=1.0"
                )));
            }
            if !q.readout.sigma.is_finite() || q.readout.sigma < 0.0 {
                return Err(invalid(format!(
                    "qubit[{i}].readout.sigma must be nonnegative"
                )));
            }
        }

        let mut seen = HashSet::new();
        for (i, f) in self.envelope_fill.iter().enumerate() {
            if f.channel >= sys.dac_channels {
                return Err(invalid(format!(
                    "envelope_fill[{i}].channel {} out of range",
                    f.channel
                )));
            }
            if !seen.insert(f.channel) {
                return Err(invalid(format!(
                    "duplicate envelope_fill for channel {}",
                    f.channel
                )));
            }
            match f.kind {
                FillKind::Constant => {
                    if f.value.is_none() {
                        return Err(invalid(format!(
                            "envelope_fill[{i}]: constant fill requires value"
                        )));
                    }
                    if f.path.is_some() {
                        return Err(invalid(format!(
                            "envelope_fill[{i}]: path applies only to file fills"
                        )));
                    }
                }
                FillKind::File => {
                    if f.path.is_none() {
                        return Err(invalid(format!(
                            "envelope_fill[{i}]: file fill requires path"
                        )));
                    }
                    if f.value.is_some() {
                        return Err(invalid(format!(
                            "envelope_fill[{i}]: value applies only to constant fills"
                        )));
                    }
                }
            }
            let capacity = self.sg_config(f.channel)?.env_capacity;
            if let Some(count) = f.count {
                if count > capacity {
                    return Err(invalid(format!(
                        "envelope_fill[{i}]: count {count} exceeds capacity {capacity}"
                    )));
                }
            }
        }

        if self.run.shots == 0 {
            return Err(invalid("run.shots must be nonzero".into()));
        }
        if self.run.max_cycles == 0 {
            return Err(invalid("run.max_cycles must be nonzero".into()));
        }
        Ok(())
    }

    /// Resolve the envelope preloads into one image per DAC channel (empty
    /// where nothing is configured). File paths are taken relative to
    /// `base_dir`, normally the config file's directory.
    pub fn env_images(&self, base_dir: &Path) -> Result<Vec<Vec<i16>>, ConfigError> {
        let mut images = vec![Vec::new(); self.system.dac_channels];
        for (i, fill) in self.envelope_fill.iter().enumerate() {
            let capacity = self.sg_config(fill.channel)?.env_capacity;
            let image = match fill.kind {
                FillKind::Constant => {
                    let value = fill.value.ok_or_else(|| {
                        invalid(format!("envelope_fill[{i}]: constant fill requires value"))
                    })?;
                    vec![value; fill.count.unwrap_or(capacity)]
                }
                FillKind::File => {
                    let rel = fill.path.as_ref().ok_or_else(|| {
                        invalid(format!("envelope_fill[{i}]: file fill requires path"))
                    })?;
                    let path = base_dir.join(rel);
                    let bytes = fs::read(&path).map_err(|source| ConfigError::Io {
                        path: path.clone(),
                        source,
                    })?;
                    if bytes.len() % 2 != 0 {
                        return Err(invalid(format!(
                            "{}: length must be a whole number of i16 samples",
                            path.display()
                        )));
                    }
                    let mut samples: Vec<i16> = bytes
                        .chunks_exact(2)
                        .map(|c| i16::from_le_bytes([c[0], c[1]]))
                        .collect();
                    if let Some(count) = fill.count {
                        if count > samples.len() {
                            return Err(invalid(format!(
                                "{}: asked for {count} samples but the file holds {}",
                                path.display(),
                                samples.len()
                            )));
                        }
                        samples.truncate(count);
                    }
                    samples
                }
            };
            if image.len() > capacity {
                return Err(invalid(format!(
                    "envelope_fill[{i}]: {} samples exceed channel {} capacity {capacity}",
                    image.len(),
                    fill.channel
                )));
            }
            images[fill.channel] = image;
        }
        Ok(images)
    }

    /// Build the SoC once: generators with envelopes loaded and trig tables
    /// built, decoders, and the program image in memory. Cloning the result
    /// is the cheap way to start each shot of a batch.
    pub fn build_bus(
        &self,
        env_images: &[Vec<i16>],
        program: &[u8],
    ) -> Result<SocBus, ConfigError> {
        if program.len() > PROG_SIZE as usize {
            return Err(invalid(format!(
                "program is {} bytes; program memory holds {}",
                program.len(),
                PROG_SIZE
            )));
        }
        let mut sgs = Vec::with_capacity(self.system.dac_channels);
        for ch in 0..self.system.dac_channels {
            let mut sg = SignalGen::new(self.sg_config(ch)?);
            if let Some(image) = env_images.get(ch).filter(|image| !image.is_empty()) {
                sg.load_env(image);
            }
            sgs.push(sg);
        }
        let mut rds = Vec::with_capacity(self.system.adc_channels);
        for ch in 0..self.system.adc_channels {
            rds.push(Readout::new(self.rd_config(ch)?));
        }
        let mut bus = SocBus::new(sgs, rds, self.mux_targets());
        bus.load_program(program);
        Ok(bus)
    }

    /// Pair a (typically cloned) bus with a fresh CPU and a plant seeded for
    /// one shot.
    pub fn simulator_from_bus(&self, bus: SocBus, shot_seed: u64) -> Simulator {
        let plant = Plant::new(
            &self.qubit_params(),
            self.system.samples_per_cycle_dac,
            self.system.samples_per_cycle_adc,
            shot_seed,
        );
        Simulator::new(self.cost_model(), bus, plant)
    }

    /// Build a fresh simulator: generators with envelopes loaded, decoders,
    /// bus, plant seeded for this shot, and the program image in memory.
    pub fn build_simulator(
        &self,
        env_images: &[Vec<i16>],
        program: &[u8],
        shot_seed: u64,
    ) -> Result<Simulator, ConfigError> {
        Ok(self.simulator_from_bus(self.build_bus(env_images, program)?, shot_seed))
    }

    /// Convenience one-shot builder: resolves envelope fills against the
    /// current directory and derives the plant seed for `shot` from the
    /// configured master seed.
    pub fn simulator_for_shot(&self, program: &[u8], shot: u64) -> Result<Simulator, ConfigError> {
        let images = self.env_images(Path::new("."))?;
        let seed = crate::plant::shot_seed(self.run.seed, shot);
        self.build_simulator(&images, program, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::StopReason;

    #[test]
    fn the_embedded_default_parses_and_matches_the_struct_defaults() {
        let cfg = Config::default();
        assert_eq!(cfg.system, SystemConfig::default());
        assert_eq!(cfg.pipeline, PipelineConfig::default());
        assert_eq!(cfg.sg_defaults, SgDefaults::default());
        assert_eq!(cfg.rd_defaults, RdDefaults::default());
        assert_eq!(cfg.run, RunConfig::default());
        assert_eq!(cfg.qubit.len(), 1);
        assert_eq!(cfg.envelope_fill.len(), 2);
        // An empty document is the same thing minus qubit, overrides, fills.
        let empty = Config::from_toml("").unwrap();
        assert_eq!(empty.system, cfg.system);
        assert!(empty.qubit.is_empty());
    }

    #[test]
    fn default_rates_match_the_hardware_targets() {
        let cfg = Config::default();
        assert_eq!(cfg.dac_rate_hz(), 8_000_000_000);
        assert_eq!(cfg.adc_rate_hz(), 2_000_000_000);
        assert_eq!(cfg.system.dac_channels, 16);
        assert_eq!(cfg.system.adc_channels, 8);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = Config::from_toml("[system]\nclock_mhz = 500\n").unwrap_err();
        assert!(err.to_string().contains("clock_mhz"), "got: {err}");
        let err = Config::from_toml("[run]\nshotz = 3\n").unwrap_err();
        assert!(err.to_string().contains("shotz"), "got: {err}");
    }

    #[test]
    fn trig_specs_parse_and_bad_ones_explain_the_format() {
        assert_eq!(
            parse_trig("lut:12").unwrap(),
            TrigKind::Lut { table_bits: 12 }
        );
        assert_eq!(
            parse_trig("cordic:16").unwrap(),
            TrigKind::Cordic { iterations: 16 }
        );
        let err = parse_trig("sine").unwrap_err().to_string();
        assert!(err.contains("lut:<bits>"), "got: {err}");
        assert!(parse_trig("lut:40").is_err());
        assert!(parse_trig("cordic:0").is_err());
    }

    #[test]
    fn per_channel_overrides_merge_over_defaults() {
        let cfg = Config::from_toml(
            "[[sg]]\nchannel = 2\nmultiplex = true\nenvelope_capacity = 32768\ntrig = \"cordic:16\"\n",
        )
        .unwrap();
        let ch2 = cfg.sg_config(2).unwrap();
        assert!(ch2.multiplex);
        assert_eq!(ch2.env_capacity, 32768);
        assert_eq!(ch2.trig, TrigKind::Cordic { iterations: 16 });
        assert_eq!(ch2.fifo_depth, 16);
        let ch3 = cfg.sg_config(3).unwrap();
        assert!(!ch3.multiplex);
        assert_eq!(ch3.env_capacity, 4096);
        assert_eq!(ch3.trig, TrigKind::Lut { table_bits: 12 });
    }

    #[test]
    fn capture_false_removes_the_buffer() {
        let cfg = Config::from_toml("[[rd]]\nchannel = 1\ncapture = false\n").unwrap();
        assert_eq!(cfg.rd_config(1).unwrap().capture_capacity, 0);
        assert_eq!(cfg.rd_config(0).unwrap().capture_capacity, 16384);
    }

    #[test]
    fn mux_targets_default_to_the_same_index() {
        let cfg = Config::from_toml("[[rd]]\nchannel = 3\nmux_target = 7\n").unwrap();
        let targets = cfg.mux_targets();
        assert_eq!(targets.len(), 8);
        assert_eq!(targets[0], 0);
        assert_eq!(targets[3], 7);
    }

    #[test]
    fn bad_references_are_rejected_with_a_path() {
        let err = Config::from_toml("[[sg]]\nchannel = 16\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("channel 16"), "got: {err}");
        let mut cfg = Config::default();
        cfg.qubit[0].drive_sg = 99;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("qubit[0].drive_sg"), "got: {err}");
        let err = Config::from_toml("[[rd]]\nchannel = 0\nmux_target = 40\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("mux_target 40"), "got: {err}");
    }

    #[test]
    fn duplicate_overrides_and_fills_are_rejected() {
        let err = Config::from_toml("[[sg]]\nchannel = 1\n[[sg]]\nchannel = 1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("duplicate"), "got: {err}");
        let doc = "[[envelope_fill]]\nchannel = 0\nkind = \"constant\"\nvalue = 1\n\
                   [[envelope_fill]]\nchannel = 0\nkind = \"constant\"\nvalue = 2\n";
        let err = Config::from_toml(doc).unwrap_err().to_string();
        assert!(err.contains("duplicate"), "got: {err}");
    }

    #[test]
    fn qubits_per_cpu_bounds_the_qubit_list() {
        let mut cfg = Config::default();
        let q = cfg.qubit[0].clone();
        cfg.qubit = vec![q; 9];
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("qubits_per_cpu"), "got: {err}");
    }

    #[test]
    fn constant_fills_default_to_full_capacity() {
        let cfg = Config::default();
        let images = cfg.env_images(Path::new(".")).unwrap();
        assert_eq!(images[0].len(), 4096);
        assert!(images[0].iter().all(|&v| v == 32767));
        assert_eq!(images[1].len(), 4096);
        assert!(images[2].is_empty());
    }

    #[test]
    fn file_fills_read_raw_little_endian_samples() {
        let dir = tempfile::tempdir().unwrap();
        let samples: Vec<i16> = vec![0, 100, -100, i16::MAX, i16::MIN];
        let bytes: Vec<u8> = samples.iter().flat_map(|s| s.to_le_bytes()).collect();
        fs::write(dir.path().join("env.bin"), &bytes).unwrap();
        let doc = "[[envelope_fill]]\nchannel = 0\nkind = \"file\"\npath = \"env.bin\"\n";
        let cfg = Config::from_toml(doc).unwrap();
        let images = cfg.env_images(dir.path()).unwrap();
        assert_eq!(images[0], samples);

        let doc =
            "[[envelope_fill]]\nchannel = 0\nkind = \"file\"\npath = \"env.bin\"\ncount = 2\n";
        let cfg = Config::from_toml(doc).unwrap();
        assert_eq!(cfg.env_images(dir.path()).unwrap()[0], vec![0, 100]);

        let doc =
            "[[envelope_fill]]\nchannel = 0\nkind = \"file\"\npath = \"env.bin\"\ncount = 9\n";
        let cfg = Config::from_toml(doc).unwrap();
        let err = cfg.env_images(dir.path()).unwrap_err().to_string();
        assert!(err.contains("holds 5"), "got: {err}");
    }

    #[test]
    fn fills_must_fit_the_channel_capacity() {
        let doc = "[[envelope_fill]]\nchannel = 0\nkind = \"constant\"\nvalue = 1\ncount = 5000\n";
        let err = Config::from_toml(doc).unwrap_err().to_string();
        assert!(err.contains("exceeds capacity 4096"), "got: {err}");
    }

    #[test]
    fn the_default_config_builds_a_runnable_simulator() {
        let cfg = Config::default();
        // A guest that immediately exits with code 0: `ecall` with a0 = 0.
        let program = 0x0000_0073u32.to_le_bytes();
        let mut sim = cfg.simulator_for_shot(&program, 0).unwrap();
        let result = sim.run(cfg.run.max_cycles);
        assert_eq!(result.reason, StopReason::Exit { code: 0 });
        assert_eq!(result.cycles, 1);
    }

    #[test]
    fn oversized_programs_are_refused() {
        let cfg = Config::default();
        let images = cfg.env_images(Path::new(".")).unwrap();
        let program = vec![0u8; 0x1_0001];
        let err = cfg
            .build_simulator(&images, &program, 0)
            .unwrap_err()
            .to_string();
        assert!(err.contains("65536"), "got: {err}");
    }
}
