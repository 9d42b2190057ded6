//! Two-pass assembler and disassembler for the control CPU.
//!
//! The dialect covers RV32I, the M extension, the custom `pulse` and
//! `settime` instructions, and three directives:
//!
//! * `.word expr[, expr...]` — literal 32-bit words;
//! * `.equ name, expr` — assembly-time constant (evaluated where it appears,
//!   so it may reference earlier `.equ`s and built-ins but not later labels);
//! * `.org expr` — move the location counter forward (4-byte aligned), zero
//!   filling the gap.
//!
//! Labels (`name:`) resolve lazily, so forward branches work. Operands are
//! full expressions over `+ - * / % << >> & | ^ ~`, parentheses,
//! `%hi(x)`/`%lo(x)` (with the carry adjustment that makes
//! `lui`+`addi` reconstruct `x`), and symbols. Register-style address
//! constants mirror the C macros a cross toolchain would provide:
//! `SG_PHASE_ADDR(7)`, `RD_RES_ADDR(0)`, `ENV_CHAN_BASE(1)`, `DATA_BASE`,
//! and friends expand at assembly time.
//!
//! Branch and jump targets are absolute addresses (labels or expressions);
//! the assembler converts them to PC-relative offsets with wrap-around
//! arithmetic. `li`/`la` always expand to a `lui`+`addi` pair so statement
//! sizes never depend on operand values.
//!
//! Comments run from `#` or `//` to end of line. Mnemonics and registers are
//! lower-case; symbols are case-sensitive.

use std::collections::HashMap;

use thiserror::Error;

use crate::bus::{self, rd_reg, sg_reg};
use crate::isa::decode::{decode, encode};
use crate::isa::{AluOp, BranchOp, Instr, LoadOp, MulOp, Pulse, StoreOp};

/// An assembly diagnostic, tagged with its 1-based source line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct AsmError {
    pub line: usize,
    pub msg: String,
}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, AsmError> {
    Err(AsmError {
        line,
        msg: msg.into(),
    })
}

/// Assembler output: a flat image plus the symbols defined while building it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assembled {
    pub origin: u32,
    pub image: Vec<u8>,
    /// Labels and `.equ` constants in definition order.
    pub symbols: Vec<(String, u32)>,
}

impl Assembled {
    pub fn symbol(&self, name: &str) -> Option<u32> {
        self.symbols
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, v)| v)
    }

    /// The symbol table as `name 0xXXXXXXXX` lines.
    pub fn symbols_text(&self) -> String {
        let mut out = String::new();
        for (name, value) in &self.symbols {
            out.push_str(&format!("{name} 0x{value:08X}\n"));
        }
        out
    }
}

/// Function-style address constants, `NAME(channel)`, one per generator
/// register...
pub const SG_ADDR_FNS: &[(&str, u32)] = &[
    ("SG_FREQ_ADDR", sg_reg::FREQ),
    ("SG_PHASE_ADDR", sg_reg::PHASE),
    ("SG_AMP_ADDR", sg_reg::AMP),
    ("SG_ENV_START_ADDR", sg_reg::ENV_START),
    ("SG_DURATION_ADDR", sg_reg::DURATION),
    ("SG_T0_ADDR", sg_reg::T0),
    ("SG_ERRFLAGS_ADDR", sg_reg::ERRFLAGS),
];

/// ...and one per decoder register.
pub const RD_ADDR_FNS: &[(&str, u32)] = &[
    ("RD_DEC_FREQ_ADDR", rd_reg::DEC_FREQ),
    ("RD_DEC_PHASE_ADDR", rd_reg::DEC_PHASE),
    ("RD_WINDOW_ADDR", rd_reg::WINDOW),
    ("RD_THRESHOLD_ADDR", rd_reg::THRESHOLD),
    ("RD_RES_ADDR", rd_reg::RESULT),
    ("MULTIPLEX_REG_ADDR", rd_reg::MULTIPLEX),
    ("RD_CAPTURE_CTRL_ADDR", rd_reg::CAPTURE_CTRL),
    ("RD_ARM_ADDR", rd_reg::ARM),
    ("RD_ROTATION_ADDR", rd_reg::ROTATION),
    ("RD_RES_I_ADDR", rd_reg::RES_I),
    ("RD_RES_Q_ADDR", rd_reg::RES_Q),
    ("RD_ERRFLAGS_ADDR", rd_reg::ERRFLAGS),
];

/// Plain built-in constants.
pub const PLAIN_CONSTS: &[(&str, u32)] = &[
    ("PROG_BASE", bus::PROG_BASE),
    ("PROG_SIZE", bus::PROG_SIZE),
    ("DATA_BASE", bus::DATA_BASE),
    ("DATA_SIZE", bus::DATA_SIZE),
    ("ENV_BASE", bus::ENV_BASE),
    ("ENV_STRIDE", bus::ENV_STRIDE),
    ("RDBUF_BASE", bus::RDBUF_BASE),
    ("RDBUF_STRIDE", bus::RDBUF_STRIDE),
    ("SG_BASE", bus::SG_BASE),
    ("SG_STRIDE", bus::SG_STRIDE),
    ("RD_BASE", bus::RD_BASE),
    ("RD_STRIDE", bus::RD_STRIDE),
];

/// Resolve a function-style built-in such as `SG_T0_ADDR(3)`.
pub fn builtin_fn(name: &str, arg: i64) -> Option<i64> {
    let ch = u32::try_from(arg).ok()?;
    for &(n, off) in SG_ADDR_FNS {
        if n == name {
            let addr = ch
                .checked_mul(bus::SG_STRIDE)?
                .checked_add(bus::SG_BASE + off)?;
            return Some(addr as i64);
        }
    }
    for &(n, off) in RD_ADDR_FNS {
        if n == name {
            let addr = ch
                .checked_mul(bus::RD_STRIDE)?
                .checked_add(bus::RD_BASE + off)?;
            return Some(addr as i64);
        }
    }
    match name {
        "ENV_CHAN_BASE" => Some(
            ch.checked_mul(bus::ENV_STRIDE)?
                .checked_add(bus::ENV_BASE)? as i64,
        ),
        "RDBUF_CHAN_BASE" => Some(
            ch.checked_mul(bus::RDBUF_STRIDE)?
                .checked_add(bus::RDBUF_BASE)? as i64,
        ),
        _ => None,
    }
}

fn is_builtin_fn_name(name: &str) -> bool {
    SG_ADDR_FNS.iter().any(|&(n, _)| n == name)
        || RD_ADDR_FNS.iter().any(|&(n, _)| n == name)
        || matches!(name, "ENV_CHAN_BASE" | "RDBUF_CHAN_BASE")
}

/// Resolve a plain built-in constant such as `DATA_BASE`.
pub fn builtin_const(name: &str) -> Option<i64> {
    PLAIN_CONSTS
        .iter()
        .find(|&&(n, _)| n == name)
        .map(|&(_, v)| v as i64)
}

// ---------------------------------------------------------------------------
// Lexing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Num(i64),
    Ident(String),
    /// `%hi` or `%lo`.
    Percent(String),
    LParen,
    RParen,
    Comma,
    Op(char),
    Shl,
    Shr,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '.'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

fn lex(text: &str, line: usize) -> Result<Vec<Tok>, AsmError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (is_ident_char(chars[i])) {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let parsed = if let Some(hex) = text.strip_prefix("0x").or(text.strip_prefix("0X")) {
                i64::from_str_radix(hex, 16)
            } else if let Some(bin) = text.strip_prefix("0b").or(text.strip_prefix("0B")) {
                i64::from_str_radix(bin, 2)
            } else {
                text.parse()
            };
            match parsed {
                Ok(v) => toks.push(Tok::Num(v)),
                Err(_) => return err(line, format!("bad number `{text}`")),
            }
        } else if is_ident_start(c) {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            toks.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if c == '%' && i + 1 < chars.len() && is_ident_start(chars[i + 1]) {
            let start = i + 1;
            i = start;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            toks.push(Tok::Percent(chars[start..i].iter().collect()));
        } else {
            i += 1;
            match c {
                '(' => toks.push(Tok::LParen),
                ')' => toks.push(Tok::RParen),
                ',' => toks.push(Tok::Comma),
                '<' if chars.get(i) == Some(&'<') => {
                    i += 1;
                    toks.push(Tok::Shl);
                }
                '>' if chars.get(i) == Some(&'>') => {
                    i += 1;
                    toks.push(Tok::Shr);
                }
                '+' | '-' | '*' | '/' | '%' | '&' | '|' | '^' | '~' => toks.push(Tok::Op(c)),
                _ => return err(line, format!("unexpected character `{c}`")),
            }
        }
    }
    Ok(toks)
}

/// Split a token stream on top-level commas.
fn split_operands(toks: &[Tok]) -> Vec<Vec<Tok>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    let mut depth = 0i32;
    for t in toks {
        match t {
            Tok::LParen => depth += 1,
            Tok::RParen => depth -= 1,
            Tok::Comma if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(t.clone());
    }
    if !cur.is_empty() || !out.is_empty() {
        out.push(cur);
    }
    out
}

// ---------------------------------------------------------------------------
// Expression evaluation
// ---------------------------------------------------------------------------

struct Eval<'a> {
    toks: &'a [Tok],
    pos: usize,
    syms: &'a HashMap<String, i64>,
    line: usize,
}

impl<'a> Eval<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<i64, AsmError> {
        self.bitor()
    }

    fn bitor(&mut self) -> Result<i64, AsmError> {
        let mut v = self.bitxor()?;
        while self.eat(&Tok::Op('|')) {
            v |= self.bitxor()?;
        }
        Ok(v)
    }

    fn bitxor(&mut self) -> Result<i64, AsmError> {
        let mut v = self.bitand()?;
        while self.eat(&Tok::Op('^')) {
            v ^= self.bitand()?;
        }
        Ok(v)
    }

    fn bitand(&mut self) -> Result<i64, AsmError> {
        let mut v = self.shift()?;
        while self.eat(&Tok::Op('&')) {
            v &= self.shift()?;
        }
        Ok(v)
    }

    fn shift(&mut self) -> Result<i64, AsmError> {
        let mut v = self.addsub()?;
        loop {
            if self.eat(&Tok::Shl) {
                let r = self.addsub()?;
                if !(0..64).contains(&r) {
                    return err(self.line, format!("shift amount {r} out of range"));
                }
                v = v.wrapping_shl(r as u32);
            } else if self.eat(&Tok::Shr) {
                let r = self.addsub()?;
                if !(0..64).contains(&r) {
                    return err(self.line, format!("shift amount {r} out of range"));
                }
                v = v.wrapping_shr(r as u32);
            } else {
                return Ok(v);
            }
        }
    }

    fn addsub(&mut self) -> Result<i64, AsmError> {
        let mut v = self.muldiv()?;
        loop {
            if self.eat(&Tok::Op('+')) {
                v = v.wrapping_add(self.muldiv()?);
            } else if self.eat(&Tok::Op('-')) {
                v = v.wrapping_sub(self.muldiv()?);
            } else {
                return Ok(v);
            }
        }
    }

    fn muldiv(&mut self) -> Result<i64, AsmError> {
        let mut v = self.unary()?;
        loop {
            if self.eat(&Tok::Op('*')) {
                v = v.wrapping_mul(self.unary()?);
            } else if self.eat(&Tok::Op('/')) {
                let r = self.unary()?;
                if r == 0 {
                    return err(self.line, "division by zero");
                }
                v = v.wrapping_div(r);
            } else if self.eat(&Tok::Op('%')) {
                let r = self.unary()?;
                if r == 0 {
                    return err(self.line, "modulo by zero");
                }
                v = v.wrapping_rem(r);
            } else {
                return Ok(v);
            }
        }
    }

    fn unary(&mut self) -> Result<i64, AsmError> {
        if self.eat(&Tok::Op('-')) {
            Ok(self.unary()?.wrapping_neg())
        } else if self.eat(&Tok::Op('+')) {
            self.unary()
        } else if self.eat(&Tok::Op('~')) {
            Ok(!self.unary()?)
        } else {
            self.primary()
        }
    }

    fn primary(&mut self) -> Result<i64, AsmError> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(v),
            Some(Tok::LParen) => {
                let v = self.expr()?;
                if !self.eat(&Tok::RParen) {
                    return err(self.line, "missing `)`");
                }
                Ok(v)
            }
            Some(Tok::Percent(kind)) => {
                if !self.eat(&Tok::LParen) {
                    return err(self.line, format!("%{kind} needs a parenthesized operand"));
                }
                let v = self.expr()?;
                if !self.eat(&Tok::RParen) {
                    return err(self.line, "missing `)`");
                }
                let w = v as u32;
                match kind.as_str() {
                    // The pair reconstructs w: lui loads %hi<<12, addi adds
                    // the sign-extended %lo, and the +0x800 pre-carry cancels
                    // the sign extension.
                    "hi" => Ok(((w.wrapping_add(0x800)) >> 12) as i64),
                    "lo" => Ok((((w & 0xFFF) ^ 0x800) as i64) - 0x800),
                    _ => err(self.line, format!("unknown operator %{kind}")),
                }
            }
            Some(Tok::Ident(name)) => {
                if self.peek() == Some(&Tok::LParen) {
                    if !is_builtin_fn_name(&name) {
                        return err(self.line, format!("unknown address function `{name}`"));
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    if !self.eat(&Tok::RParen) {
                        return err(self.line, "missing `)`");
                    }
                    return builtin_fn(&name, arg).ok_or(AsmError {
                        line: self.line,
                        msg: format!("channel {arg} out of range for {name}"),
                    });
                }
                if let Some(&v) = self.syms.get(&name) {
                    Ok(v)
                } else if let Some(v) = builtin_const(&name) {
                    Ok(v)
                } else {
                    err(self.line, format!("undefined symbol `{name}`"))
                }
            }
            other => err(self.line, format!("expected expression, found {other:?}")),
        }
    }
}

fn eval(toks: &[Tok], syms: &HashMap<String, i64>, line: usize) -> Result<i64, AsmError> {
    if toks.is_empty() {
        return err(line, "expected expression");
    }
    let mut p = Eval {
        toks,
        pos: 0,
        syms,
        line,
    };
    let v = p.expr()?;
    if p.pos != toks.len() {
        return err(line, "trailing tokens after expression");
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// Registers
// ---------------------------------------------------------------------------

fn reg_from_name(name: &str) -> Option<u8> {
    if let Some(n) = name.strip_prefix('x') {
        if let Ok(v) = n.parse::<u8>() {
            if v < 32 && (n.len() == 1 || !n.starts_with('0')) {
                return Some(v);
            }
        }
        return None;
    }
    let v = match name {
        "zero" => 0,
        "ra" => 1,
        "sp" => 2,
        "gp" => 3,
        "tp" => 4,
        "t0" => 5,
        "t1" => 6,
        "t2" => 7,
        "s0" | "fp" => 8,
        "s1" => 9,
        "a0" => 10,
        "a1" => 11,
        "a2" => 12,
        "a3" => 13,
        "a4" => 14,
        "a5" => 15,
        "a6" => 16,
        "a7" => 17,
        "s2" => 18,
        "s3" => 19,
        "s4" => 20,
        "s5" => 21,
        "s6" => 22,
        "s7" => 23,
        "s8" => 24,
        "s9" => 25,
        "s10" => 26,
        "s11" => 27,
        "t3" => 28,
        "t4" => 29,
        "t5" => 30,
        "t6" => 31,
        _ => return None,
    };
    Some(v)
}

fn want_reg(toks: &[Tok], line: usize) -> Result<u8, AsmError> {
    if let [Tok::Ident(name)] = toks {
        if let Some(r) = reg_from_name(name) {
            return Ok(r);
        }
    }
    err(
        line,
        format!("expected a register, found `{}`", render_toks(toks)),
    )
}

fn render_toks(toks: &[Tok]) -> String {
    let mut s = String::new();
    for t in toks {
        match t {
            Tok::Num(v) => s.push_str(&v.to_string()),
            Tok::Ident(n) => s.push_str(n),
            Tok::Percent(n) => {
                s.push('%');
                s.push_str(n);
            }
            Tok::LParen => s.push('('),
            Tok::RParen => s.push(')'),
            Tok::Comma => s.push(','),
            Tok::Op(c) => s.push(*c),
            Tok::Shl => s.push_str("<<"),
            Tok::Shr => s.push_str(">>"),
        }
    }
    s
}

/// Split a memory operand `expr(reg)` into its parts. Returns `None` when
/// the operand does not end in a `(reg)` suffix.
fn split_mem(toks: &[Tok]) -> Option<(&[Tok], u8)> {
    let n = toks.len();
    if n >= 3 && toks[n - 1] == Tok::RParen && toks[n - 3] == Tok::LParen {
        if let Tok::Ident(name) = &toks[n - 2] {
            if let Some(r) = reg_from_name(name) {
                return Some((&toks[..n - 3], r));
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum Stmt {
    /// A mnemonic with pre-split operand token lists.
    Op {
        mnemonic: String,
        operands: Vec<Vec<Tok>>,
    },
    /// `.word` payload.
    Words(Vec<Vec<Tok>>),
}

/// Statement footprint. `li`/`la` are always 8 bytes so layout never depends
/// on operand values.
fn stmt_size(mnemonic: &str, operand_count: usize, line: usize) -> Result<u32, AsmError> {
    const PLAIN: &[&str] = &[
        "lui", "auipc", "jal", "jalr", "beq", "bne", "blt", "bge", "bltu", "bgeu", "lb", "lh",
        "lw", "lbu", "lhu", "sb", "sh", "sw", "addi", "slti", "sltiu", "xori", "ori", "andi",
        "slli", "srli", "srai", "add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or",
        "and", "mul", "mulh", "mulhsu", "mulhu", "div", "divu", "rem", "remu", "fence", "ecall",
        "ebreak", "csrr", "rdcycle", "rdcycleh", "rdtime", "rdtimeh", "settime", "nop", "mv", "j",
        "jr", "ret", "beqz", "bnez", "bgez", "bltz",
    ];
    match mnemonic {
        "pulse" => Ok(16),
        "li" | "la" => Ok(8),
        ".word" => {
            if operand_count == 0 {
                return err(line, ".word expects at least one value");
            }
            Ok(4 * operand_count as u32)
        }
        m if PLAIN.contains(&m) => Ok(4),
        m => err(line, format!("unknown mnemonic `{m}`")),
    }
}

fn check_range(v: i64, lo: i64, hi: i64, what: &str, line: usize) -> Result<i64, AsmError> {
    if v < lo || v > hi {
        return err(line, format!("{what} {v} out of range ({lo}..={hi})"));
    }
    Ok(v)
}

/// A value that must fit in 32 bits, signed or unsigned view.
fn check_u32(v: i64, what: &str, line: usize) -> Result<u32, AsmError> {
    if v < i32::MIN as i64 || v > u32::MAX as i64 {
        return err(line, format!("{what} {v} does not fit in 32 bits"));
    }
    Ok(v as u32)
}

struct Ctx<'a> {
    syms: &'a HashMap<String, i64>,
    line: usize,
    addr: u32,
}

impl Ctx<'_> {
    fn eval(&self, toks: &[Tok]) -> Result<i64, AsmError> {
        eval(toks, self.syms, self.line)
    }

    fn reg(&self, toks: &[Tok]) -> Result<u8, AsmError> {
        want_reg(toks, self.line)
    }

    fn mem(&self, toks: &[Tok]) -> Result<(i32, u8), AsmError> {
        let (off_toks, base) = match split_mem(toks) {
            Some(parts) => parts,
            None => {
                return err(
                    self.line,
                    format!("expected `offset(reg)`, found `{}`", render_toks(toks)),
                )
            }
        };
        let off = if off_toks.is_empty() {
            0
        } else {
            self.eval(off_toks)?
        };
        let off = check_range(off, -2048, 2047, "offset", self.line)?;
        Ok((off as i32, base))
    }

    /// Absolute target expression → PC-relative offset (wrap-aware).
    fn reljump(&self, toks: &[Tok], range: i64, what: &str) -> Result<i32, AsmError> {
        let target = check_u32(self.eval(toks)?, "target", self.line)?;
        let offset = target.wrapping_sub(self.addr) as i32;
        if offset % 4 != 0 {
            return err(
                self.line,
                format!("{what} target 0x{target:08X} is not 4-byte aligned"),
            );
        }
        check_range(offset as i64, -range, range - 2, what, self.line)?;
        Ok(offset)
    }

    fn imm12(&self, toks: &[Tok]) -> Result<i32, AsmError> {
        Ok(check_range(self.eval(toks)?, -2048, 2047, "immediate", self.line)? as i32)
    }
}

fn expect_operands(n: usize, got: usize, mnemonic: &str, line: usize) -> Result<(), AsmError> {
    if n != got {
        return err(
            line,
            format!("`{mnemonic}` expects {n} operands, found {got}"),
        );
    }
    Ok(())
}

/// Encode one statement into instruction words.
fn encode_stmt(mnemonic: &str, ops: &[Vec<Tok>], ctx: &Ctx) -> Result<Vec<u32>, AsmError> {
    let line = ctx.line;
    let n = ops.len();
    let alu3 = |op: AluOp| -> Result<Vec<u32>, AsmError> {
        expect_operands(3, n, mnemonic, line)?;
        Ok(encode(&Instr::Alu {
            op,
            rd: ctx.reg(&ops[0])?,
            rs1: ctx.reg(&ops[1])?,
            rs2: ctx.reg(&ops[2])?,
        }))
    };
    let mul3 = |op: MulOp| -> Result<Vec<u32>, AsmError> {
        expect_operands(3, n, mnemonic, line)?;
        Ok(encode(&Instr::Mul {
            op,
            rd: ctx.reg(&ops[0])?,
            rs1: ctx.reg(&ops[1])?,
            rs2: ctx.reg(&ops[2])?,
        }))
    };
    let alu_imm = |op: AluOp| -> Result<Vec<u32>, AsmError> {
        expect_operands(3, n, mnemonic, line)?;
        Ok(encode(&Instr::AluImm {
            op,
            rd: ctx.reg(&ops[0])?,
            rs1: ctx.reg(&ops[1])?,
            imm: ctx.imm12(&ops[2])?,
        }))
    };
    let shift_imm = |op: AluOp| -> Result<Vec<u32>, AsmError> {
        expect_operands(3, n, mnemonic, line)?;
        let shamt = check_range(ctx.eval(&ops[2])?, 0, 31, "shift amount", line)?;
        Ok(encode(&Instr::AluImm {
            op,
            rd: ctx.reg(&ops[0])?,
            rs1: ctx.reg(&ops[1])?,
            imm: shamt as i32,
        }))
    };
    let branch = |op: BranchOp, rs1: u8, rs2: u8, target: &[Tok]| -> Result<Vec<u32>, AsmError> {
        let offset = ctx.reljump(target, 4096, "branch")?;
        Ok(encode(&Instr::Branch {
            op,
            rs1,
            rs2,
            offset,
        }))
    };
    let load = |op: LoadOp| -> Result<Vec<u32>, AsmError> {
        expect_operands(2, n, mnemonic, line)?;
        let (offset, rs1) = ctx.mem(&ops[1])?;
        Ok(encode(&Instr::Load {
            op,
            rd: ctx.reg(&ops[0])?,
            rs1,
            offset,
        }))
    };
    let store = |op: StoreOp| -> Result<Vec<u32>, AsmError> {
        expect_operands(2, n, mnemonic, line)?;
        let (offset, rs1) = ctx.mem(&ops[1])?;
        Ok(encode(&Instr::Store {
            op,
            rs1,
            rs2: ctx.reg(&ops[0])?,
            offset,
        }))
    };
    let csr_read = |csr: u16| -> Result<Vec<u32>, AsmError> {
        expect_operands(1, n, mnemonic, line)?;
        Ok(encode(&Instr::CsrRead {
            rd: ctx.reg(&ops[0])?,
            csr,
        }))
    };
    let branch2 = |op: BranchOp| -> Result<Vec<u32>, AsmError> {
        expect_operands(3, n, mnemonic, line)?;
        branch(op, ctx.reg(&ops[0])?, ctx.reg(&ops[1])?, &ops[2])
    };
    // Pseudo `beqz` family: one register against x0.
    let branch_z = |op: BranchOp, swap: bool| -> Result<Vec<u32>, AsmError> {
        expect_operands(2, n, mnemonic, line)?;
        let rs = ctx.reg(&ops[0])?;
        let (rs1, rs2) = if swap { (0, rs) } else { (rs, 0) };
        branch(op, rs1, rs2, &ops[1])
    };

    match mnemonic {
        "lui" | "auipc" => {
            expect_operands(2, n, mnemonic, line)?;
            let rd = ctx.reg(&ops[0])?;
            let field = check_range(ctx.eval(&ops[1])?, 0, 0xF_FFFF, "upper immediate", line)?;
            let imm = (field as u32) << 12;
            Ok(encode(&if mnemonic == "lui" {
                Instr::Lui { rd, imm }
            } else {
                Instr::Auipc { rd, imm }
            }))
        }
        "jal" => {
            // `jal target` implies rd = ra.
            let (rd, target) = match n {
                1 => (1, &ops[0]),
                2 => (ctx.reg(&ops[0])?, &ops[1]),
                _ => return err(line, "`jal` expects 1 or 2 operands"),
            };
            let offset = ctx.reljump(target, 1 << 20, "jump")?;
            Ok(encode(&Instr::Jal { rd, offset }))
        }
        "j" => {
            expect_operands(1, n, mnemonic, line)?;
            let offset = ctx.reljump(&ops[0], 1 << 20, "jump")?;
            Ok(encode(&Instr::Jal { rd: 0, offset }))
        }
        "jalr" => match n {
            1 => Ok(encode(&Instr::Jalr {
                rd: 1,
                rs1: ctx.reg(&ops[0])?,
                offset: 0,
            })),
            2 => {
                let rd = ctx.reg(&ops[0])?;
                if let Some((off_toks, rs1)) = split_mem(&ops[1]) {
                    let off = if off_toks.is_empty() {
                        0
                    } else {
                        ctx.imm12(off_toks)? as i64
                    };
                    Ok(encode(&Instr::Jalr {
                        rd,
                        rs1,
                        offset: off as i32,
                    }))
                } else {
                    Ok(encode(&Instr::Jalr {
                        rd,
                        rs1: ctx.reg(&ops[1])?,
                        offset: 0,
                    }))
                }
            }
            3 => Ok(encode(&Instr::Jalr {
                rd: ctx.reg(&ops[0])?,
                rs1: ctx.reg(&ops[1])?,
                offset: ctx.imm12(&ops[2])?,
            })),
            _ => err(line, "`jalr` expects 1..=3 operands"),
        },
        "jr" => {
            expect_operands(1, n, mnemonic, line)?;
            Ok(encode(&Instr::Jalr {
                rd: 0,
                rs1: ctx.reg(&ops[0])?,
                offset: 0,
            }))
        }
        "ret" => {
            expect_operands(0, n, mnemonic, line)?;
            Ok(encode(&Instr::Jalr {
                rd: 0,
                rs1: 1,
                offset: 0,
            }))
        }
        "beq" => branch2(BranchOp::Beq),
        "bne" => branch2(BranchOp::Bne),
        "blt" => branch2(BranchOp::Blt),
        "bge" => branch2(BranchOp::Bge),
        "bltu" => branch2(BranchOp::Bltu),
        "bgeu" => branch2(BranchOp::Bgeu),
        "beqz" => branch_z(BranchOp::Beq, false),
        "bnez" => branch_z(BranchOp::Bne, false),
        "bgez" => branch_z(BranchOp::Bge, false),
        "bltz" => branch_z(BranchOp::Blt, false),
        "lb" => load(LoadOp::Lb),
        "lh" => load(LoadOp::Lh),
        "lw" => load(LoadOp::Lw),
        "lbu" => load(LoadOp::Lbu),
        "lhu" => load(LoadOp::Lhu),
        "sb" => store(StoreOp::Sb),
        "sh" => store(StoreOp::Sh),
        "sw" => store(StoreOp::Sw),
        "addi" => alu_imm(AluOp::Add),
        "slti" => alu_imm(AluOp::Slt),
        "sltiu" => alu_imm(AluOp::Sltu),
        "xori" => alu_imm(AluOp::Xor),
        "ori" => alu_imm(AluOp::Or),
        "andi" => alu_imm(AluOp::And),
        "slli" => shift_imm(AluOp::Sll),
        "srli" => shift_imm(AluOp::Srl),
        "srai" => shift_imm(AluOp::Sra),
        "add" => alu3(AluOp::Add),
        "sub" => alu3(AluOp::Sub),
        "sll" => alu3(AluOp::Sll),
        "slt" => alu3(AluOp::Slt),
        "sltu" => alu3(AluOp::Sltu),
        "xor" => alu3(AluOp::Xor),
        "srl" => alu3(AluOp::Srl),
        "sra" => alu3(AluOp::Sra),
        "or" => alu3(AluOp::Or),
        "and" => alu3(AluOp::And),
        "mul" => mul3(MulOp::Mul),
        "mulh" => mul3(MulOp::Mulh),
        "mulhsu" => mul3(MulOp::Mulhsu),
        "mulhu" => mul3(MulOp::Mulhu),
        "div" => mul3(MulOp::Div),
        "divu" => mul3(MulOp::Divu),
        "rem" => mul3(MulOp::Rem),
        "remu" => mul3(MulOp::Remu),
        "fence" => {
            expect_operands(0, n, mnemonic, line)?;
            Ok(encode(&Instr::Fence))
        }
        "ecall" => {
            expect_operands(0, n, mnemonic, line)?;
            Ok(encode(&Instr::Ecall))
        }
        "ebreak" => {
            expect_operands(0, n, mnemonic, line)?;
            Ok(encode(&Instr::Ebreak))
        }
        "csrr" => {
            expect_operands(2, n, mnemonic, line)?;
            let rd = ctx.reg(&ops[0])?;
            let csr = ctx.eval(&ops[1])?;
            match csr {
                0xC00 | 0xC01 | 0xC80 | 0xC81 => Ok(encode(&Instr::CsrRead {
                    rd,
                    csr: csr as u16,
                })),
                _ => err(
                    line,
                    format!("unsupported csr 0x{csr:X} (cycle/time counters only)"),
                ),
            }
        }
        "rdcycle" => csr_read(0xC00),
        "rdtime" => csr_read(0xC01),
        "rdcycleh" => csr_read(0xC80),
        "rdtimeh" => csr_read(0xC81),
        "settime" => {
            expect_operands(1, n, mnemonic, line)?;
            Ok(encode(&Instr::SetTime {
                rs1: ctx.reg(&ops[0])?,
            }))
        }
        "nop" => {
            expect_operands(0, n, mnemonic, line)?;
            Ok(encode(&Instr::AluImm {
                op: AluOp::Add,
                rd: 0,
                rs1: 0,
                imm: 0,
            }))
        }
        "mv" => {
            expect_operands(2, n, mnemonic, line)?;
            Ok(encode(&Instr::AluImm {
                op: AluOp::Add,
                rd: ctx.reg(&ops[0])?,
                rs1: ctx.reg(&ops[1])?,
                imm: 0,
            }))
        }
        "li" | "la" => {
            expect_operands(2, n, mnemonic, line)?;
            let rd = ctx.reg(&ops[0])?;
            let value = check_u32(ctx.eval(&ops[1])?, "value", line)?;
            let hi = value.wrapping_add(0x800) >> 12;
            let lo = (((value & 0xFFF) ^ 0x800) as i32) - 0x800;
            let mut words = encode(&Instr::Lui { rd, imm: hi << 12 });
            words.extend(encode(&Instr::AluImm {
                op: AluOp::Add,
                rd,
                rs1: rd,
                imm: lo,
            }));
            Ok(words)
        }
        "pulse" => {
            expect_operands(7, n, mnemonic, line)?;
            let id = check_range(ctx.eval(&ops[0])?, 0, 31, "generator id", line)? as u8;
            let freq = check_u32(ctx.eval(&ops[1])?, "frequency word", line)?;
            let phase = check_u32(ctx.eval(&ops[2])?, "phase word", line)?;
            let amp = check_range(ctx.eval(&ops[3])?, -32768, 65535, "amplitude", line)?;
            let env = check_range(ctx.eval(&ops[4])?, 0, 65535, "envelope start", line)? as u16;
            let dur = check_range(ctx.eval(&ops[5])?, 0, 65535, "duration", line)? as u16;
            let flags = check_range(ctx.eval(&ops[6])?, 0, 15, "flags", line)? as u8;
            Ok(encode(&Instr::Pulse(Pulse {
                id,
                flags,
                duration: dur,
                freq,
                phase,
                amp: amp as u16 as i16,
                env_start: env,
            })))
        }
        m => err(line, format!("unknown mnemonic `{m}`")),
    }
}

/// Assemble `source` for a load address of `origin`.
pub fn assemble(source: &str, origin: u32) -> Result<Assembled, AsmError> {
    struct Pending {
        line: usize,
        addr: u32,
        stmt: Stmt,
    }

    let mut syms: HashMap<String, i64> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut pending: Vec<Pending> = Vec::new();
    let mut addr = origin;

    let define = |syms: &mut HashMap<String, i64>,
                  order: &mut Vec<String>,
                  name: &str,
                  value: i64,
                  line: usize|
     -> Result<(), AsmError> {
        if reg_from_name(name).is_some() {
            return err(line, format!("`{name}` is a register name"));
        }
        if builtin_const(name).is_some() || is_builtin_fn_name(name) {
            return err(line, format!("`{name}` is a built-in constant"));
        }
        if syms.insert(name.to_string(), value).is_some() {
            return err(line, format!("duplicate symbol `{name}`"));
        }
        order.push(name.to_string());
        Ok(())
    };

    // Pass 1: bind labels, evaluate `.equ`/`.org`, fix statement addresses.
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let mut code = raw;
        if let Some(i) = code.find('#') {
            code = &code[..i];
        }
        if let Some(i) = code.find("//") {
            code = &code[..i];
        }
        let mut code = code.trim();

        // Leading labels, possibly several.
        while let Some(colon) = code.find(':') {
            let candidate = code[..colon].trim();
            if !candidate.is_empty()
                && candidate
                    .chars()
                    .next()
                    .map(is_ident_start)
                    .unwrap_or(false)
                && candidate.chars().all(is_ident_char)
            {
                define(&mut syms, &mut order, candidate, addr as i64, line)?;
                code = code[colon + 1..].trim();
            } else {
                break;
            }
        }
        if code.is_empty() {
            continue;
        }

        let (mnemonic, rest) = match code.find(char::is_whitespace) {
            Some(i) => (&code[..i], &code[i..]),
            None => (code, ""),
        };
        let toks = lex(rest, line)?;
        let operands = split_operands(&toks);

        match mnemonic {
            ".equ" => {
                if operands.len() != 2 {
                    return err(line, ".equ expects `name, expression`");
                }
                let name = match operands[0].as_slice() {
                    [Tok::Ident(n)] => n.clone(),
                    other => return err(line, format!("bad .equ name `{}`", render_toks(other))),
                };
                // Evaluated here and now, so .org can use it; forward label
                // references are rejected as undefined.
                let value = eval(&operands[1], &syms, line)?;
                define(&mut syms, &mut order, &name, value, line)?;
            }
            ".org" => {
                if operands.len() != 1 {
                    return err(line, ".org expects one expression");
                }
                let target = check_u32(eval(&operands[0], &syms, line)?, ".org target", line)?;
                if target < addr {
                    return err(
                        line,
                        format!(".org 0x{target:08X} moves backward from 0x{addr:08X}"),
                    );
                }
                if target % 4 != 0 {
                    return err(line, format!(".org 0x{target:08X} is not 4-byte aligned"));
                }
                addr = target;
            }
            ".word" => {
                let size = stmt_size(".word", operands.len(), line)?;
                pending.push(Pending {
                    line,
                    addr,
                    stmt: Stmt::Words(operands),
                });
                addr += size;
            }
            m => {
                let size = stmt_size(m, operands.len(), line)?;
                pending.push(Pending {
                    line,
                    addr,
                    stmt: Stmt::Op {
                        mnemonic: m.to_string(),
                        operands,
                    },
                });
                addr += size;
            }
        }
    }

    // Pass 2: evaluate operands against the full symbol table and encode.
    let mut image = vec![0u8; (addr - origin) as usize];
    for p in &pending {
        let ctx = Ctx {
            syms: &syms,
            line: p.line,
            addr: p.addr,
        };
        let words = match &p.stmt {
            Stmt::Op { mnemonic, operands } => encode_stmt(mnemonic, operands, &ctx)?,
            Stmt::Words(exprs) => {
                let mut words = Vec::with_capacity(exprs.len());
                for e in exprs {
                    words.push(check_u32(ctx.eval(e)?, "word value", p.line)?);
                }
                words
            }
        };
        let mut at = (p.addr - origin) as usize;
        for w in words {
            image[at..at + 4].copy_from_slice(&w.to_le_bytes());
            at += 4;
        }
    }

    let symbols = order
        .into_iter()
        .map(|name| {
            let value = syms[&name] as u32;
            (name, value)
        })
        .collect();
    Ok(Assembled {
        origin,
        image,
        symbols,
    })
}

// ---------------------------------------------------------------------------
// Disassembly
// ---------------------------------------------------------------------------

fn reg_name(r: u8) -> String {
    format!("x{r}")
}

/// Canonical text for one decoded instruction at `addr`. Branch and jump
/// targets are rendered as absolute addresses.
fn render_instr(instr: &Instr, addr: u32) -> String {
    let target = |offset: i32| format!("0x{:08x}", addr.wrapping_add(offset as u32));
    match *instr {
        Instr::Lui { rd, imm } => format!("lui {}, 0x{:x}", reg_name(rd), imm >> 12),
        Instr::Auipc { rd, imm } => format!("auipc {}, 0x{:x}", reg_name(rd), imm >> 12),
        Instr::Jal { rd, offset } => format!("jal {}, {}", reg_name(rd), target(offset)),
        Instr::Jalr { rd, rs1, offset } => {
            format!("jalr {}, {}({})", reg_name(rd), offset, reg_name(rs1))
        }
        Instr::Branch {
            op,
            rs1,
            rs2,
            offset,
        } => {
            let m = match op {
                BranchOp::Beq => "beq",
                BranchOp::Bne => "bne",
                BranchOp::Blt => "blt",
                BranchOp::Bge => "bge",
                BranchOp::Bltu => "bltu",
                BranchOp::Bgeu => "bgeu",
            };
            format!(
                "{m} {}, {}, {}",
                reg_name(rs1),
                reg_name(rs2),
                target(offset)
            )
        }
        Instr::Load {
            op,
            rd,
            rs1,
            offset,
        } => {
            let m = match op {
                LoadOp::Lb => "lb",
                LoadOp::Lh => "lh",
                LoadOp::Lw => "lw",
                LoadOp::Lbu => "lbu",
                LoadOp::Lhu => "lhu",
            };
            format!("{m} {}, {}({})", reg_name(rd), offset, reg_name(rs1))
        }
        Instr::Store {
            op,
            rs1,
            rs2,
            offset,
        } => {
            let m = match op {
                StoreOp::Sb => "sb",
                StoreOp::Sh => "sh",
                StoreOp::Sw => "sw",
            };
            format!("{m} {}, {}({})", reg_name(rs2), offset, reg_name(rs1))
        }
        Instr::AluImm { op, rd, rs1, imm } => {
            let m = match op {
                AluOp::Add => "addi",
                AluOp::Slt => "slti",
                AluOp::Sltu => "sltiu",
                AluOp::Xor => "xori",
                AluOp::Or => "ori",
                AluOp::And => "andi",
                AluOp::Sll => "slli",
                AluOp::Srl => "srli",
                AluOp::Sra => "srai",
                AluOp::Sub => unreachable!("subi does not exist"),
            };
            format!("{m} {}, {}, {}", reg_name(rd), reg_name(rs1), imm)
        }
        Instr::Alu { op, rd, rs1, rs2 } => {
            let m = match op {
                AluOp::Add => "add",
                AluOp::Sub => "sub",
                AluOp::Sll => "sll",
                AluOp::Slt => "slt",
                AluOp::Sltu => "sltu",
                AluOp::Xor => "xor",
                AluOp::Srl => "srl",
                AluOp::Sra => "sra",
                AluOp::Or => "or",
                AluOp::And => "and",
            };
            format!("{m} {}, {}, {}", reg_name(rd), reg_name(rs1), reg_name(rs2))
        }
        Instr::Mul { op, rd, rs1, rs2 } => {
            let m = match op {
                MulOp::Mul => "mul",
                MulOp::Mulh => "mulh",
                MulOp::Mulhsu => "mulhsu",
                MulOp::Mulhu => "mulhu",
                MulOp::Div => "div",
                MulOp::Divu => "divu",
                MulOp::Rem => "rem",
                MulOp::Remu => "remu",
            };
            format!("{m} {}, {}, {}", reg_name(rd), reg_name(rs1), reg_name(rs2))
        }
        Instr::Fence => "fence".to_string(),
        Instr::Ecall => "ecall".to_string(),
        Instr::Ebreak => "ebreak".to_string(),
        Instr::CsrRead { rd, csr } => {
            let m = match csr {
                0xC00 => "rdcycle",
                0xC01 => "rdtime",
                0xC80 => "rdcycleh",
                _ => "rdtimeh",
            };
            format!("{m} {}", reg_name(rd))
        }
        Instr::Pulse(p) => format!(
            "pulse {}, 0x{:08x}, 0x{:08x}, 0x{:04x}, {}, {}, {}",
            p.id, p.freq, p.phase, p.amp as u16, p.env_start, p.duration, p.flags
        ),
        Instr::SetTime { rs1 } => format!("settime {}", reg_name(rs1)),
    }
}

/// Disassemble a flat image loaded at `origin` into canonical text that
/// reassembles to the same bytes. Words that do not decode — or that decode
/// to something the encoder would not reproduce bit-for-bit — render as
/// `.word`. Trailing bytes beyond a word boundary are padded with zeros.
pub fn disassemble(image: &[u8], origin: u32) -> String {
    let mut words = Vec::with_capacity(image.len().div_ceil(4));
    for chunk in image.chunks(4) {
        let mut b = [0u8; 4];
        b[..chunk.len()].copy_from_slice(chunk);
        words.push(u32::from_le_bytes(b));
    }

    let mut out = String::new();
    let mut i = 0;
    while i < words.len() {
        let window = [
            words[i],
            words.get(i + 1).copied().unwrap_or(0),
            words.get(i + 2).copied().unwrap_or(0),
            words.get(i + 3).copied().unwrap_or(0),
        ];
        let addr = origin.wrapping_add((i * 4) as u32);
        let mut emitted = None;
        if let Ok(instr) = decode(&window) {
            let len = (instr.size_bytes() / 4) as usize;
            let canonical = i + len <= words.len() && encode(&instr) == window[..len];
            // Branch/jump targets must re-parse: the assembler insists on
            // 4-byte alignment, so reject odd offsets here.
            let representable = match instr {
                Instr::Jal { offset, .. } | Instr::Branch { offset, .. } => offset % 4 == 0,
                _ => true,
            };
            if canonical && representable {
                emitted = Some((render_instr(&instr, addr), len));
            }
        }
        let (text, len) = emitted.unwrap_or((format!(".word 0x{:08x}", words[i]), 1));
        out.push_str(&text);
        out.push('\n');
        i += len;
    }
    out
}
