//! Batch command-line front end.
//!
//! Verbs: `run` (execute a guest for N shots and write artifacts), `asm`
//! (assemble to a flat binary), `disasm` (binary back to text), `map`
//! (guest-visible address map), `latency` (feedback-path budget and the
//! measured reaction cost).
//!
//! Exit codes follow the BSD sysexits convention where one fits: 64 for
//! configuration or usage problems, 65 for programs that do not assemble
//! (or load), 70 when the guest faults, 75 when it times out. A clean `run`
//! exits with the guest's own exit code.

use crate::asm;
use crate::bus;
use crate::config::Config;
use crate::latency::{LatencyReport, MeasuredReaction};
use crate::output::{self, Batch, RunArtifacts};
use clap::{Args, Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 64;
pub const EXIT_ASM: i32 = 65;
pub const EXIT_GUEST_FAULT: i32 = 70;
pub const EXIT_TIMEOUT: i32 = 75;
const EXIT_IO: i32 = 74;

/// Deterministic batch simulator for a pulse-level quantum-control SoC.
#[derive(Debug, Parser)]
#[command(name = "qcsoc-sim", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a guest program for the configured number of shots.
    Run(RunArgs),
    /// Assemble a source file into a flat binary plus symbol table.
    Asm(AsmArgs),
    /// Disassemble a flat binary to the assembly dialect.
    Disasm(DisasmArgs),
    /// Print the guest-visible address map.
    Map(MapArgs),
    /// Print the feedback-latency budget and measure the reaction cost.
    Latency(LatencyArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment configuration (TOML). Omit for the built-in single-qubit
    /// rig.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Guest program: assembly source (.s/.asm) or flat binary.
    #[arg(long)]
    pub program: PathBuf,
    /// Override the configured shot count.
    #[arg(long)]
    pub shots: Option<u64>,
    /// Override the configured master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Generator channels whose DAC output to trace during shot 0.
    #[arg(long, value_delimiter = ',')]
    pub trace_channels: Vec<usize>,
    /// Directory for run artifacts.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Fan shots out across threads (artifacts are identical either way).
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct AsmArgs {
    /// Assembly source file.
    #[arg(long)]
    pub program: PathBuf,
    /// Directory for the binary and symbol table.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DisasmArgs {
    /// Flat binary to disassemble.
    #[arg(long)]
    pub program: PathBuf,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Configuration that sets the channel counts. Omit for the built-in
    /// rig.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LatencyArgs {
    /// Configuration whose latencies to budget. Omit for the built-in rig.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Demodulation window the budget assumes, in ADC samples.
    #[arg(long, default_value_t = 16)]
    pub window: u32,
    /// Skip the paired guest runs that measure the reaction cost.
    #[arg(long)]
    pub no_measure: bool,
}

/// Dispatch a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Asm(args) => cmd_asm(args),
        Command::Disasm(args) => cmd_disasm(args),
        Command::Map(args) => cmd_map(args),
        Command::Latency(args) => cmd_latency(args),
    }
}

/// Configuration text plus where it came from (env files resolve relative
/// to a file-based configuration's directory).
fn load_config(path: &Option<PathBuf>) -> Result<(Config, String, PathBuf), i32> {
    let (text, base) = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| {
                eprintln!("error: reading {}: {e}", p.display());
                EXIT_CONFIG
            })?;
            let base = p.parent().unwrap_or(Path::new(".")).to_path_buf();
            (text, base)
        }
        None => (
            crate::config::DEFAULT_CONFIG_TOML.to_string(),
            PathBuf::from("."),
        ),
    };
    let config = Config::from_toml(&text).map_err(|e| {
        eprintln!("error: configuration: {e}");
        EXIT_CONFIG
    })?;
    Ok((config, text, base))
}

/// Read a guest program, assembling it first when the extension says it is
/// source. Returns the image and, for source, the symbol table text.
fn load_program(path: &Path) -> Result<(Vec<u8>, Option<String>), i32> {
    let is_source = matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("s" | "S" | "asm")
    );
    if is_source {
        let text = fs::read_to_string(path).map_err(|e| {
            eprintln!("error: reading {}: {e}", path.display());
            EXIT_ASM
        })?;
        let assembled = asm::assemble(&text, bus::PROG_BASE).map_err(|e| {
            eprintln!("error: {}: {e}", path.display());
            EXIT_ASM
        })?;
        let symbols = assembled.symbols_text();
        Ok((assembled.image, Some(symbols)))
    } else {
        let image = fs::read(path).map_err(|e| {
            eprintln!("error: reading {}: {e}", path.display());
            EXIT_ASM
        })?;
        Ok((image, None))
    }
}

fn cmd_run(args: RunArgs) -> i32 {
    let (mut config, config_text, env_base) = match load_config(&args.config) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let (image, symbols) = match load_program(&args.program) {
        Ok(v) => v,
        Err(code) => return code,
    };
    if let Some(shots) = args.shots {
        config.run.shots = shots;
    }
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    if config.run.shots == 0 {
        eprintln!("error: --shots must be nonzero");
        return EXIT_CONFIG;
    }
    for &ch in &args.trace_channels {
        if ch >= config.system.dac_channels {
            eprintln!(
                "error: --trace-channels {ch} out of range (rig has {} generators)",
                config.system.dac_channels
            );
            return EXIT_CONFIG;
        }
    }

    let batch = match Batch::new(&config, &image, &env_base) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: configuration: {e}");
            return EXIT_CONFIG;
        }
    };
    let outcome = batch.run(&args.trace_channels, args.parallel);

    let artifacts = RunArtifacts {
        config: &config,
        config_text: &config_text,
        program: &image,
        output: &outcome,
        symbols: symbols.as_deref(),
    };
    let written = match output::write_artifacts(&args.out_dir, &artifacts) {
        Ok(w) => w,
        Err(e) => {
            eprintln!(
                "error: writing artifacts to {}: {e}",
                args.out_dir.display()
            );
            return EXIT_IO;
        }
    };

    let shots = outcome.records.len();
    let measured_one = outcome
        .records
        .iter()
        .filter(|r| r.measured_state == Some(1))
        .count();
    let measured_zero = outcome
        .records
        .iter()
        .filter(|r| r.measured_state == Some(0))
        .count();
    println!("{shots} shots: {measured_zero} measured 0, {measured_one} measured 1");
    for r in &outcome.records {
        if let crate::sim::StopReason::Fault(f) = r.stop {
            eprintln!("guest fault on shot {}: {f:?}", r.shot);
            break;
        }
    }
    for path in &written {
        println!("wrote {}", path.display());
    }
    output::batch_exit_code(&outcome.records)
}

fn cmd_asm(args: AsmArgs) -> i32 {
    let text = match fs::read_to_string(&args.program) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", args.program.display());
            return EXIT_ASM;
        }
    };
    let assembled = match asm::assemble(&text, bus::PROG_BASE) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}: {e}", args.program.display());
            return EXIT_ASM;
        }
    };
    let stem = args
        .program
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "program".into());
    if let Err(e) = fs::create_dir_all(&args.out_dir) {
        eprintln!("error: creating {}: {e}", args.out_dir.display());
        return EXIT_IO;
    }
    let bin = args.out_dir.join(format!("{stem}.bin"));
    let sym = args.out_dir.join(format!("{stem}.symbols.txt"));
    if let Err(e) =
        fs::write(&bin, &assembled.image).and_then(|()| fs::write(&sym, assembled.symbols_text()))
    {
        eprintln!("error: writing: {e}");
        return EXIT_IO;
    }
    println!("wrote {} ({} bytes)", bin.display(), assembled.image.len());
    println!("wrote {}", sym.display());
    EXIT_OK
}

fn cmd_disasm(args: DisasmArgs) -> i32 {
    let image = match fs::read(&args.program) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: reading {}: {e}", args.program.display());
            return EXIT_ASM;
        }
    };
    print!("{}", asm::disassemble(&image, bus::PROG_BASE));
    EXIT_OK
}

fn cmd_map(args: MapArgs) -> i32 {
    let (config, _, _) = match load_config(&args.config) {
        Ok(v) => v,
        Err(code) => return code,
    };
    print!("{}", render_map(&config));
    EXIT_OK
}

/// The full guest-visible address map, built from the same tables the
/// assembler exposes as built-ins.
pub fn render_map(config: &Config) -> String {
    use std::fmt::Write as _;
    let dac = config.system.dac_channels;
    let adc = config.system.adc_channels;
    let mut out = String::new();
    writeln!(out, "regions").unwrap();
    writeln!(
        out,
        "  PROG_BASE   0x{:08X}  size   0x{:08X}  program memory (read-only)",
        bus::PROG_BASE,
        bus::PROG_SIZE
    )
    .unwrap();
    writeln!(
        out,
        "  DATA_BASE   0x{:08X}  size   0x{:08X}  data RAM",
        bus::DATA_BASE,
        bus::DATA_SIZE
    )
    .unwrap();
    writeln!(
        out,
        "  ENV_BASE    0x{:08X}  stride 0x{:08X}  envelope memories ({dac} channels)",
        bus::ENV_BASE,
        bus::ENV_STRIDE
    )
    .unwrap();
    writeln!(
        out,
        "  RDBUF_BASE  0x{:08X}  stride 0x{:08X}  readout capture ({adc} channels)",
        bus::RDBUF_BASE,
        bus::RDBUF_STRIDE
    )
    .unwrap();
    writeln!(
        out,
        "  SG_BASE     0x{:08X}  stride 0x{:08X}  generator registers ({dac} channels)",
        bus::SG_BASE,
        bus::SG_STRIDE
    )
    .unwrap();
    writeln!(
        out,
        "  RD_BASE     0x{:08X}  stride 0x{:08X}  decoder registers ({adc} channels)",
        bus::RD_BASE,
        bus::RD_STRIDE
    )
    .unwrap();

    writeln!(out, "\ngenerator registers (per channel ch < {dac})").unwrap();
    for &(name, off) in asm::SG_ADDR_FNS {
        writeln!(
            out,
            "  {name:<22}(ch) = 0x{:08X} + ch*0x{:02X} + 0x{off:02X}",
            bus::SG_BASE,
            bus::SG_STRIDE
        )
        .unwrap();
    }
    writeln!(out, "\ndecoder registers (per channel ch < {adc})").unwrap();
    for &(name, off) in asm::RD_ADDR_FNS {
        writeln!(
            out,
            "  {name:<22}(ch) = 0x{:08X} + ch*0x{:02X} + 0x{off:02X}",
            bus::RD_BASE,
            bus::RD_STRIDE
        )
        .unwrap();
    }

    writeln!(out, "\nexamples").unwrap();
    let examples: [(&str, u32); 3] = [
        (
            "SG_PHASE_ADDR(7)",
            bus::SG_BASE + 7 * bus::SG_STRIDE + bus::sg_reg::PHASE,
        ),
        (
            "RD_RES_ADDR(7)",
            bus::RD_BASE + 7 * bus::RD_STRIDE + bus::rd_reg::RESULT,
        ),
        (
            "MULTIPLEX_REG_ADDR(7)",
            bus::RD_BASE + 7 * bus::RD_STRIDE + bus::rd_reg::MULTIPLEX,
        ),
    ];
    for (name, addr) in examples {
        writeln!(out, "  {name:<22} = 0x{addr:08X}").unwrap();
    }
    out
}

fn cmd_latency(args: LatencyArgs) -> i32 {
    let (config, _, _) = match load_config(&args.config) {
        Ok(v) => v,
        Err(code) => return code,
    };
    if config.qubit.is_empty() {
        eprintln!("error: the configuration defines no qubits to budget");
        return EXIT_CONFIG;
    }
    let report = match LatencyReport::from_config(&config, 0, args.window) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: configuration: {e}");
            return EXIT_CONFIG;
        }
    };
    print!("{}", report.render());
    if !args.no_measure {
        let m = MeasuredReaction::measure();
        let penalty = Config::default().pipeline.branch_taken_penalty as u64;
        println!("\nmeasured conditional sections (built-in rig, 1 shot each)");
        println!("  branch, taken path      {:>4} cycles", m.branch_section);
        println!(
            "  branchless              {:>4} cycles",
            m.branchless_section
        );
        println!(
            "  difference              {:>4} cycles (taken-branch penalty is {penalty})",
            m.difference()
        );
    }
    EXIT_OK
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_quotes_the_published_addresses() {
        let text = render_map(&Config::default());
        assert!(
            text.contains("SG_PHASE_ADDR(7)       = 0x40000708"),
            "{text}"
        );
        assert!(
            text.contains("RD_RES_ADDR(7)         = 0x41000710"),
            "{text}"
        );
        assert!(
            text.contains("MULTIPLEX_REG_ADDR(7)  = 0x41000714"),
            "{text}"
        );
        assert!(text.contains("ENV_BASE"), "{text}");
        assert!(text.contains("16 channels"), "{text}");
        assert!(text.contains("8 channels"), "{text}");
    }

    #[test]
    fn cli_parses_the_documented_flags() {
        let cli = Cli::try_parse_from([
            "qcsoc-sim",
            "run",
            "--program",
            "guest.s",
            "--shots",
            "100",
            "--seed",
            "7",
            "--trace-channels",
            "0,1",
            "--out-dir",
            "artifacts",
            "--parallel",
        ])
        .unwrap();
        let Command::Run(args) = cli.command else {
            panic!("expected run");
        };
        assert_eq!(args.shots, Some(100));
        assert_eq!(args.seed, Some(7));
        assert_eq!(args.trace_channels, vec![0, 1]);
        assert_eq!(args.out_dir, PathBuf::from("artifacts"));
        assert!(args.parallel);
        assert!(args.config.is_none());
    }
}
