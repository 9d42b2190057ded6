//! Batch execution and run artifacts.
//!
//! A batch builds the SoC once, then runs each shot on a clone of that
//! prototype with a plant seeded from `splitmix(master ^ splitmix(shot))`,
//! so shots are independent of execution order: sequential and parallel
//! batches produce byte-identical records. Shot 0 can additionally trace
//! generator output and keep its captured readout buffers.
//!
//! Artifacts are deliberately timestamp-free so reruns with the same seed
//! are byte-identical:
//!
//! * `shots.csv` — `shot,measured_state,I,Q,cycles`, one row per shot.
//! * `waveforms.csv` — `cycle,channel,sample_index_in_cycle,value` for the
//!   traced channels of shot 0.
//! * `rdbuf_chN.bin` — raw little-endian i16 capture buffer of decoder `N`,
//!   shot 0, written for decoders that captured anything.
//! * `manifest.txt` — `key=value` run description: content hashes of the
//!   configuration text and program image, seed, shot count, and the
//!   clock/channel geometry with the derived converter rates.
//! * `symbols.txt` — assembler symbol table, when the program came from
//!   source.

use crate::config::{Config, ConfigError};
use crate::plant::shot_seed;
use crate::sim::{RunResult, Simulator, StopReason};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// One shot's harvest: decoder 0's view at halt plus how the run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotRecord {
    pub shot: u64,
    /// Decoder 0's state, if its result register held a valid result.
    pub measured_state: Option<u8>,
    pub res_i: i32,
    pub res_q: i32,
    pub cycles: u64,
    pub stop: StopReason,
}

/// Waveform trace row: one DAC sample of one traced channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRow {
    pub cycle: u64,
    pub channel: usize,
    pub sample_index_in_cycle: u32,
    pub value: i16,
}

/// Everything a batch produces.
#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub records: Vec<ShotRecord>,
    /// Shot 0's generator output for the traced channels, every cycle.
    pub waveforms: Vec<TraceRow>,
    /// Shot 0's captured readout buffers, one per decoder channel.
    pub captures: Vec<Vec<i16>>,
}

/// A reusable shot launcher: configuration plus prototype SoC.
pub struct Batch<'a> {
    config: &'a Config,
    prototype: crate::bus::SocBus,
}

impl<'a> Batch<'a> {
    /// Resolve envelope fills against `env_base` and build the prototype.
    pub fn new(config: &'a Config, program: &[u8], env_base: &Path) -> Result<Self, ConfigError> {
        let images = config.env_images(env_base)?;
        let prototype = config.build_bus(&images, program)?;
        Ok(Batch { config, prototype })
    }

    /// Run one shot to completion, returning the simulator for inspection.
    pub fn run_shot(&self, shot: u64) -> (Simulator, RunResult) {
        let seed = shot_seed(self.config.run.seed, shot);
        let mut sim = self.config.simulator_from_bus(self.prototype.clone(), seed);
        let result = sim.run(self.config.run.max_cycles);
        (sim, result)
    }

    /// Like [`Batch::run_shot`] but records the DAC output of the given
    /// channels every cycle.
    pub fn run_shot_traced(
        &self,
        shot: u64,
        channels: &[usize],
        rows: &mut Vec<TraceRow>,
    ) -> (Simulator, RunResult) {
        let seed = shot_seed(self.config.run.seed, shot);
        let mut sim = self.config.simulator_from_bus(self.prototype.clone(), seed);
        let result = loop {
            if let Some(reason) = stop_reason(&sim) {
                break RunResult {
                    reason,
                    cycles: sim.now(),
                };
            }
            if sim.now() >= self.config.run.max_cycles {
                break RunResult {
                    reason: StopReason::Timeout,
                    cycles: sim.now(),
                };
            }
            let cycle = sim.now();
            sim.step();
            for &ch in channels {
                for (k, &value) in sim.dac_frame(ch).iter().enumerate() {
                    rows.push(TraceRow {
                        cycle,
                        channel: ch,
                        sample_index_in_cycle: k as u32,
                        value,
                    });
                }
            }
        };
        (sim, result)
    }

    /// Run the whole batch. `trace_channels` selects generator channels to
    /// trace during shot 0; `parallel` fans the remaining shots out across
    /// threads (the records are identical either way).
    pub fn run(&self, trace_channels: &[usize], parallel: bool) -> BatchOutput {
        let shots = self.config.run.shots;
        let mut waveforms = Vec::new();
        let (first_sim, first_result) = if trace_channels.is_empty() {
            self.run_shot(0)
        } else {
            self.run_shot_traced(0, trace_channels, &mut waveforms)
        };
        let captures = first_sim
            .bus
            .rds
            .iter()
            .map(|rd| rd.capture().to_vec())
            .collect();
        let first = harvest(0, &first_sim, first_result);

        let rest = 1..shots;
        let record_for = |shot: u64| {
            let (sim, result) = self.run_shot(shot);
            harvest(shot, &sim, result)
        };
        let mut records = vec![first];
        if parallel {
            records.par_extend(rest.into_par_iter().map(record_for));
        } else {
            records.extend(rest.map(record_for));
        }
        BatchOutput {
            records,
            waveforms,
            captures,
        }
    }
}

fn stop_reason(sim: &Simulator) -> Option<StopReason> {
    use crate::isa::FaultKind;
    sim.cpu.fault().map(|f| match f.kind {
        FaultKind::ProgramExit => StopReason::Exit { code: f.detail },
        _ => StopReason::Fault(*f),
    })
}

fn harvest(shot: u64, sim: &Simulator, result: RunResult) -> ShotRecord {
    let rd = &sim.bus.rds[0];
    let word = rd.read_result();
    let measured_state = (word >> 31 == 1).then_some((word & 1) as u8);
    ShotRecord {
        shot,
        measured_state,
        res_i: rd.read_i() as i32,
        res_q: rd.read_q() as i32,
        cycles: result.cycles,
        stop: result.reason,
    }
}

/// Process exit status for a finished batch: the first fault wins (70),
/// then the first timeout (75), otherwise the last shot's exit code.
pub fn batch_exit_code(records: &[ShotRecord]) -> i32 {
    let mut code = 0;
    for r in records {
        match r.stop {
            StopReason::Fault(_) => return 70,
            StopReason::Timeout => return 75,
            StopReason::Exit { code: c } => code = c as i32,
        }
    }
    code
}

/// `shots.csv` content.
pub fn shots_csv(records: &[ShotRecord]) -> String {
    let mut out = String::from("shot,measured_state,I,Q,cycles\n");
    for r in records {
        let state = r.measured_state.map(|s| s.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{}",
            r.shot, state, r.res_i, r.res_q, r.cycles
        )
        .unwrap();
    }
    out
}

/// `waveforms.csv` content.
pub fn waveforms_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("cycle,channel,sample_index_in_cycle,value\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.cycle, r.channel, r.sample_index_in_cycle, r.value
        )
        .unwrap();
    }
    out
}

/// `manifest.txt` content. Hashes cover the configuration text and program
/// image verbatim, so the manifest changes exactly when one of them does;
/// nothing in it depends on wall-clock time.
pub fn manifest_text(config: &Config, config_text: &str, program: &[u8]) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| writeln!(out, "{k}={v}").unwrap();
    kv("config_sha256", hex_sha256(config_text.as_bytes()));
    kv("program_sha256", hex_sha256(program));
    kv("seed", config.run.seed.to_string());
    kv("shots", config.run.shots.to_string());
    kv("clock_hz", config.system.clock_hz.to_string());
    kv("dac_channels", config.system.dac_channels.to_string());
    kv("adc_channels", config.system.adc_channels.to_string());
    kv(
        "samples_per_cycle_dac",
        config.system.samples_per_cycle_dac.to_string(),
    );
    kv(
        "samples_per_cycle_adc",
        config.system.samples_per_cycle_adc.to_string(),
    );
    kv("dac_rate_hz", config.dac_rate_hz().to_string());
    kv("adc_rate_hz", config.adc_rate_hz().to_string());
    kv("reftime_bits", "32".to_string());
    out
}

fn hex_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

/// Raw little-endian bytes of one capture buffer.
pub fn capture_bytes(samples: &[i16]) -> Vec<u8> {
    samples.iter().flat_map(|s| s.to_le_bytes()).collect()
}

/// Everything needed to lay a run's artifacts down on disk.
pub struct RunArtifacts<'a> {
    pub config: &'a Config,
    /// The configuration text as loaded (hashed verbatim).
    pub config_text: &'a str,
    pub program: &'a [u8],
    pub output: &'a BatchOutput,
    /// Assembler symbol table, when the program came from source.
    pub symbols: Option<&'a str>,
}

/// Write `shots.csv`, `manifest.txt`, and whichever optional artifacts the
/// run produced into `dir` (created if missing). Returns the paths written.
pub fn write_artifacts(dir: &Path, artifacts: &RunArtifacts) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: String, bytes: Vec<u8>| -> io::Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    emit(
        "shots.csv".into(),
        shots_csv(&artifacts.output.records).into_bytes(),
    )?;
    emit(
        "manifest.txt".into(),
        manifest_text(artifacts.config, artifacts.config_text, artifacts.program).into_bytes(),
    )?;
    if !artifacts.output.waveforms.is_empty() {
        emit(
            "waveforms.csv".into(),
            waveforms_csv(&artifacts.output.waveforms).into_bytes(),
        )?;
    }
    for (ch, capture) in artifacts.output.captures.iter().enumerate() {
        if !capture.is_empty() {
            emit(format!("rdbuf_ch{ch}.bin"), capture_bytes(capture))?;
        }
    }
    if let Some(symbols) = artifacts.symbols {
        emit("symbols.txt".into(), symbols.as_bytes().to_vec())?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::programs::{self, FastResetVariant};

    fn measurement_batch() -> (Config, Vec<u8>) {
        let script = programs::single_measurement(0, 0.25);
        let image = script.assemble().unwrap().image;
        let mut config = script.config;
        config.run.shots = 24;
        config.run.seed = 7;
        (config, image)
    }

    #[test]
    fn parallel_batches_match_sequential_batches_exactly() {
        let (config, image) = measurement_batch();
        let batch = Batch::new(&config, &image, Path::new(".")).unwrap();
        let sequential = batch.run(&[], false);
        let parallel = batch.run(&[], true);
        assert_eq!(sequential.records, parallel.records);
        assert_eq!(shots_csv(&sequential.records), shots_csv(&parallel.records));
    }

    #[test]
    fn shot_records_carry_decoder_state() {
        let (config, image) = measurement_batch();
        let batch = Batch::new(&config, &image, Path::new(".")).unwrap();
        let out = batch.run(&[], false);
        assert_eq!(out.records.len(), 24);
        for r in &out.records {
            assert!(r.measured_state.is_some());
            assert_eq!(
                r.stop,
                StopReason::Exit {
                    code: r.measured_state.unwrap() as u32
                }
            );
            assert!(r.res_i != 0);
            assert!(r.cycles > 0);
        }
        // Noise makes shots distinct; the seed split must too.
        let distinct: std::collections::BTreeSet<i32> =
            out.records.iter().map(|r| r.res_i).collect();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn tracing_records_the_probe_pulse() {
        let script = programs::single_measurement(0, 0.0);
        let image = script.assemble().unwrap().image;
        let batch = Batch::new(&script.config, &image, Path::new(".")).unwrap();
        let out = batch.run(&[1], false);
        assert!(!out.waveforms.is_empty());
        assert!(out.waveforms.iter().all(|r| r.channel == 1));
        // The probe pulse is full-scale on an idle channel: nonzero samples
        // exist, and each cycle contributes exactly 16.
        assert!(out.waveforms.iter().any(|r| r.value != 0));
        let first_cycle = out.waveforms[0].cycle;
        let in_first: Vec<_> = out
            .waveforms
            .iter()
            .filter(|r| r.cycle == first_cycle)
            .collect();
        assert_eq!(in_first.len(), 16);
    }

    #[test]
    fn fast_reset_capture_reaches_the_dump() {
        let script = programs::fast_reset(FastResetVariant::Branchless, 0);
        let image = script.assemble().unwrap().image;
        let batch = Batch::new(&script.config, &image, Path::new(".")).unwrap();
        let out = batch.run(&[], false);
        // The guest enables capture; two 16-sample windows were taken.
        assert!(!out.captures[0].is_empty());
        let bytes = capture_bytes(&out.captures[0]);
        assert_eq!(bytes.len(), out.captures[0].len() * 2);
    }

    #[test]
    fn manifest_states_the_rig_and_tracks_content() {
        let config = Config::default();
        let text = crate::config::DEFAULT_CONFIG_TOML;
        let program = vec![0x73u8, 0, 0, 0];
        let manifest = manifest_text(&config, text, &program);
        assert!(manifest.contains("clock_hz=500000000"));
        assert!(manifest.contains("dac_channels=16"));
        assert!(manifest.contains("adc_channels=8"));
        assert!(manifest.contains("samples_per_cycle_dac=16"));
        assert!(manifest.contains("samples_per_cycle_adc=4"));
        assert!(manifest.contains("dac_rate_hz=8000000000"));
        assert!(manifest.contains("adc_rate_hz=2000000000"));
        assert!(manifest.contains("reftime_bits=32"));

        // Hash moves iff the hashed content moves.
        let same = manifest_text(&config, text, &program);
        assert_eq!(manifest, same);
        let other_program = manifest_text(&config, text, &[0x13, 0, 0, 0]);
        assert_ne!(manifest, other_program);
        let other_text = manifest_text(&config, &format!("{text}# tweak\n"), &program);
        assert_ne!(manifest, other_text);
    }

    #[test]
    fn artifacts_land_in_the_out_dir() {
        let script = programs::single_measurement(0, 0.0);
        let assembled = script.assemble().unwrap();
        let batch = Batch::new(&script.config, &assembled.image, Path::new(".")).unwrap();
        let out = batch.run(&[1], false);
        let dir = tempfile::tempdir().unwrap();
        let artifacts = RunArtifacts {
            config: &script.config,
            config_text: "unit-test config",
            program: &assembled.image,
            output: &out,
            symbols: Some(&assembled.symbols_text()),
        };
        let written = write_artifacts(dir.path(), &artifacts).unwrap();
        let names: Vec<String> = written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(names.contains(&"shots.csv".to_string()));
        assert!(names.contains(&"manifest.txt".to_string()));
        assert!(names.contains(&"waveforms.csv".to_string()));
        assert!(names.contains(&"symbols.txt".to_string()));
        let shots = fs::read_to_string(dir.path().join("shots.csv")).unwrap();
        assert!(shots.starts_with("shot,measured_state,I,Q,cycles\n"));
        assert_eq!(shots.lines().count(), 2);
    }

    #[test]
    fn exit_code_reflects_the_worst_shot() {
        let rec = |stop| ShotRecord {
            shot: 0,
            measured_state: None,
            res_i: 0,
            res_q: 0,
            cycles: 1,
            stop,
        };
        assert_eq!(batch_exit_code(&[rec(StopReason::Exit { code: 3 })]), 3);
        assert_eq!(
            batch_exit_code(&[rec(StopReason::Exit { code: 0 }), rec(StopReason::Timeout)]),
            75
        );
    }
}
