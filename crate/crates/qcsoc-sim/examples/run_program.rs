//! Assemble a bare-metal guest from source, run it, and read its mailbox.
//!
//! The guest ABI is minimal: programs start at the program-memory origin,
//! leave results in data RAM (the assembler predefines `DATA_BASE` and the
//! register-bank addresses), and exit via `ecall` with the code in `a0`.
//! A second, deliberately broken guest shows how faults are reported.

use qcsoc_sim::asm::assemble;
use qcsoc_sim::bus::PROG_BASE;
use qcsoc_sim::config::Config;
use qcsoc_sim::sim::StopReason;

const SUM_LOOP: &str = "\
# Sum the integers 1..=N into the mailbox, then exit cleanly.
.equ N, 10
start:
    li   t0, 0                  # accumulator
    li   t1, 1                  # loop index
    li   t2, N
loop:
    add  t0, t0, t1
    addi t1, t1, 1
    bge  t2, t1, loop
    li   s2, DATA_BASE
    sw   t0, 0(s2)              # mailbox word 0 <- 55
    li   a0, 0
    ecall
";

const WILD_JUMP: &str = "\
# Jump to a halfword address: the core traps instead of fetching garbage.
    li   t0, 2
    jr   t0
";

fn main() {
    let config = Config::default();

    let assembled = assemble(SUM_LOOP, PROG_BASE).expect("guest assembles");
    println!("assembled {} bytes; symbols:", assembled.image.len());
    print!("{}", assembled.symbols_text());

    let mut sim = config
        .simulator_for_shot(&assembled.image, 0)
        .expect("default rig builds");
    let result = sim.run(config.run.max_cycles);
    let mailbox = sim.bus.load(qcsoc_sim::bus::DATA_BASE, 4).unwrap();
    println!(
        "\nstopped after {} cycles: {:?}",
        result.cycles, result.reason
    );
    println!("mailbox word 0 = {mailbox}");
    assert_eq!(result.reason, StopReason::Exit { code: 0 });
    assert_eq!(mailbox, 55);

    // Faults carry the kind, the pc, and the offending detail; a batch run
    // maps any fault to process exit code 70.
    let broken = assemble(WILD_JUMP, PROG_BASE).expect("guest assembles");
    let mut sim = config
        .simulator_for_shot(&broken.image, 0)
        .expect("rig builds");
    let result = sim.run(config.run.max_cycles);
    println!("\nbroken guest: {:?}", result.reason);
    assert!(matches!(result.reason, StopReason::Fault(_)));
}
