//! Two-counter machines: parsing and interpretation.
//!
//! Program text is a sequence of instructions separated by newlines, `;`
//! or `/`. Each may carry a label `k:` which must equal its position.
//!
//! ```text
//! 0: ifz c goto 2 else 1
//! 1: dec c goto 0
//! 2: halt
//! ```

use std::fmt;

use thiserror::Error;

use crate::parser::SourceDiagnostic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Counter {
    C,
    D,
}

impl Counter {
    pub fn name(self) -> &'static str {
        match self {
            Counter::C => "c",
            Counter::D => "d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instr {
    Inc(Counter, usize),
    Dec(Counter, usize),
    /// Jump to the first target if the counter is zero, else to the second.
    Ifz(Counter, usize, usize),
    Halt,
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instr::Inc(c, k) => write!(f, "inc {} goto {k}", c.name()),
            Instr::Dec(c, k) => write!(f, "dec {} goto {k}", c.name()),
            Instr::Ifz(c, z, nz) => write!(f, "ifz {} goto {z} else {nz}", c.name()),
            Instr::Halt => write!(f, "halt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterMachine {
    pub instrs: Vec<Instr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CmConfig {
    pub pc: usize,
    pub c: u64,
    pub d: u64,
}

impl CmConfig {
    pub fn get(&self, k: Counter) -> u64 {
        match k {
            Counter::C => self.c,
            Counter::D => self.d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CmRun {
    pub halted: bool,
    pub final_config: CmConfig,
    /// Every configuration visited, starting with `(0, 0, 0)`.
    pub trace: Vec<CmConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CmError {
    #[error("step {step}: decrement of zero counter `{counter}` at instruction {pc}")]
    DecOnZero { step: usize, pc: usize, counter: &'static str },
}

fn diag(line: usize, column: usize, message: impl Into<String>) -> SourceDiagnostic {
    SourceDiagnostic {
        line,
        column,
        message: message.into(),
    }
}

fn parse_counter(tok: Option<&(usize, &str)>, line: usize, end: usize) -> Result<Counter, SourceDiagnostic> {
    match tok {
        Some((_, "c")) => Ok(Counter::C),
        Some((_, "d")) => Ok(Counter::D),
        Some((col, t)) => Err(diag(line, *col, format!("unknown counter `{t}`"))),
        None => Err(diag(line, end, "expected a counter")),
    }
}

fn parse_target(tok: Option<&(usize, &str)>, line: usize, end: usize) -> Result<(usize, usize), SourceDiagnostic> {
    match tok {
        Some((col, t)) => t
            .parse::<usize>()
            .map(|k| (k, *col))
            .map_err(|_| diag(line, *col, format!("malformed target `{t}`"))),
        None => Err(diag(line, end, "expected a target")),
    }
}

fn expect_kw(tok: Option<&(usize, &str)>, kw: &str, line: usize, end: usize) -> Result<(), SourceDiagnostic> {
    match tok {
        Some((_, t)) if *t == kw => Ok(()),
        Some((col, t)) => Err(diag(line, *col, format!("expected `{kw}`, found `{t}`"))),
        None => Err(diag(line, end, format!("expected `{kw}`"))),
    }
}

/// Splits `s` into whitespace-separated tokens with 1-based columns.
fn tokens(s: &str, offset: usize) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in s.char_indices() {
        if ch.is_whitespace() || ch == ':' {
            if let Some(st) = start.take() {
                out.push((offset + st + 1, &s[st..i]));
            }
            if ch == ':' {
                out.push((offset + i + 1, ":"));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(st) = start {
        out.push((offset + st + 1, &s[st..]));
    }
    out
}

pub fn parse_cm(text: &str) -> Result<CounterMachine, SourceDiagnostic> {
    let mut instrs = Vec::new();
    // (line, column) of each target, checked once the program length is known.
    let mut targets: Vec<(usize, usize, usize)> = Vec::new();
    let mut last_pos = (1, 1);
    for (lno, raw) in text.lines().enumerate() {
        let line = lno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut offset = 0;
        for stmt in content.split([';', '/']) {
            let toks = tokens(stmt, offset);
            let end = offset + stmt.len() + 1;
            offset += stmt.len() + 1;
            if toks.is_empty() {
                continue;
            }
            last_pos = (line, toks[0].0);
            let mut it = toks.iter().peekable();
            if toks.len() >= 2 && toks[1].1 == ":" {
                let (col, lab) = toks[0];
                let k: usize = lab
                    .parse()
                    .map_err(|_| diag(line, col, format!("malformed label `{lab}`")))?;
                if k != instrs.len() {
                    let msg = if k < instrs.len() {
                        format!("duplicate label {k}")
                    } else {
                        format!("label {k} out of sequence; expected {}", instrs.len())
                    };
                    return Err(diag(line, col, msg));
                }
                it.next();
                it.next();
            }
            let (col, op) = *it.next().ok_or_else(|| diag(line, end, "expected an instruction"))?;
            let ins = match op {
                "inc" | "dec" => {
                    let c = parse_counter(it.next(), line, end)?;
                    expect_kw(it.next(), "goto", line, end)?;
                    let (k, kc) = parse_target(it.next(), line, end)?;
                    targets.push((k, line, kc));
                    if op == "inc" {
                        Instr::Inc(c, k)
                    } else {
                        Instr::Dec(c, k)
                    }
                }
                "ifz" => {
                    let c = parse_counter(it.next(), line, end)?;
                    expect_kw(it.next(), "goto", line, end)?;
                    let (z, zc) = parse_target(it.next(), line, end)?;
                    expect_kw(it.next(), "else", line, end)?;
                    let (nz, nzc) = parse_target(it.next(), line, end)?;
                    targets.push((z, line, zc));
                    targets.push((nz, line, nzc));
                    Instr::Ifz(c, z, nz)
                }
                "halt" => Instr::Halt,
                other => return Err(diag(line, col, format!("unknown instruction `{other}`"))),
            };
            if let Some((c, t)) = it.next() {
                return Err(diag(line, *c, format!("unexpected `{t}`")));
            }
            instrs.push(ins);
        }
    }
    if instrs.last() != Some(&Instr::Halt) {
        return Err(diag(last_pos.0, last_pos.1, "missing halt: the last instruction must be `halt`"));
    }
    if let Some((k, line, col)) = targets.iter().find(|(k, _, _)| *k >= instrs.len()) {
        return Err(diag(*line, *col, format!("goto target {k} out of range (no instruction {k})")));
    }
    Ok(CounterMachine { instrs })
}

impl fmt::Display for CounterMachine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, i) in self.instrs.iter().enumerate() {
            writeln!(f, "{k}: {i}")?;
        }
        Ok(())
    }
}

impl CounterMachine {
    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    /// One step; `None` at a halt instruction.
    pub fn step(&self, cfg: &CmConfig, step_no: usize) -> Result<Option<CmConfig>, CmError> {
        let mut next = *cfg;
        match self.instrs[cfg.pc] {
            Instr::Halt => return Ok(None),
            Instr::Inc(k, t) => {
                match k {
                    Counter::C => next.c += 1,
                    Counter::D => next.d += 1,
                }
                next.pc = t;
            }
            Instr::Dec(k, t) => {
                let slot = match k {
                    Counter::C => &mut next.c,
                    Counter::D => &mut next.d,
                };
                if *slot == 0 {
                    return Err(CmError::DecOnZero {
                        step: step_no,
                        pc: cfg.pc,
                        counter: k.name(),
                    });
                }
                *slot -= 1;
                next.pc = t;
            }
            Instr::Ifz(k, z, nz) => next.pc = if cfg.get(k) == 0 { z } else { nz },
        }
        Ok(Some(next))
    }
}

/// Runs at most `max_steps` instructions from `(0, 0, 0)`.
pub fn cm_run(cm: &CounterMachine, max_steps: usize) -> Result<CmRun, CmError> {
    let mut cfg = CmConfig { pc: 0, c: 0, d: 0 };
    let mut trace = vec![cfg];
    for n in 0..=max_steps {
        if cm.instrs[cfg.pc] == Instr::Halt {
            return Ok(CmRun {
                halted: true,
                final_config: cfg,
                trace,
            });
        }
        if n == max_steps {
            break;
        }
        cfg = cm.step(&cfg, n + 1)?.expect("not at halt");
        trace.push(cfg);
    }
    Ok(CmRun {
        halted: false,
        final_config: cfg,
        trace,
    })
}
