//! Intermediate representation for Gaussian bosonic circuits.
//!
//! A circuit on `M = 2^n` modes is an ordered list of gates. Local gates
//! address modes by 1-based index `m ∈ 1..=M`; global bit-structured gates
//! select modes through a [`BitCondition`] on the bits of the 0-based
//! register value `r = m - 1`, where bit `k` (1-based, `k ∈ 1..=n`) is the
//! `2^(k-1)` digit of `r`. This is the only place the 1-based/0-based
//! boundary lives: text formats and gate fields are 1-based, register
//! arithmetic is 0-based.
//!
//! The text format is line-oriented UTF-8 with `#` comments:
//!
//! ```text
//! modes 8
//! phase m=6 t=0.3
//! bs m=1 mp=7 t=0.5
//! sq m=3 t=0.1 sign=+
//! gphase cond=1:1,3:0 t=0.2
//! gbs cond=3:0 l=1 t=0.4
//! gsq cond=3:1 t=0.05 sign=-
//! disp m=1 dq=1.0 dp=0.0
//! ```
//!
//! Keys are order-insensitive within a line; an empty condition is written
//! `cond=-`. Displacement gates parse and validate (so full GB programs can
//! be ingested) but every downstream consumer rejects them with a dedicated
//! error.

use std::fmt;
use thiserror::Error;

use crate::symplectic::{GeneratorMatrix, SymplecticError};
use nalgebra::DMatrix;

#[derive(Debug, Error)]
pub enum IrError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("displacement gates have no quadratic generator")]
    DisplacementHasNoQuadraticGenerator,
    #[error("bit condition references bit {bit} but the circuit has only {n} bits")]
    CondBitOutOfRange { bit: usize, n: usize },
    #[error(transparent)]
    Symplectic(#[from] SymplecticError),
}

/// A single violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Beamsplitter endpoints must differ.
    ModesMustDiffer {
        gate: usize,
    },
    /// The pairing bit of a global beamsplitter may not appear in its
    /// condition.
    PairingBitInCondition {
        gate: usize,
        bit: usize,
    },
    ModeOutOfRange {
        gate: usize,
        mode: usize,
    },
    BitOutOfRange {
        gate: usize,
        bit: usize,
    },
    DuplicateConditionBit {
        gate: usize,
        bit: usize,
    },
    ModesNotPowerOfTwo {
        modes: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ModesMustDiffer { gate } => {
                write!(f, "gate {gate}: beamsplitter modes must differ")
            }
            Violation::PairingBitInCondition { gate, bit } => {
                write!(f, "gate {gate}: pairing bit {bit} appears in the condition")
            }
            Violation::ModeOutOfRange { gate, mode } => {
                write!(f, "gate {gate}: mode {mode} out of range")
            }
            Violation::BitOutOfRange { gate, bit } => {
                write!(f, "gate {gate}: bit {bit} out of range")
            }
            Violation::DuplicateConditionBit { gate, bit } => {
                write!(f, "gate {gate}: bit {bit} repeated in condition")
            }
            Violation::ModesNotPowerOfTwo { modes } => {
                write!(f, "mode count {modes} is not a power of two")
            }
        }
    }
}

/// Sign of a squeezing generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sign::Plus => write!(f, "+"),
            Sign::Minus => write!(f, "-"),
        }
    }
}

/// Conjunction of `(bit, value)` clauses over register bits; empty means
/// "all modes".
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitCondition {
    clauses: Vec<(usize, u8)>,
}

impl BitCondition {
    /// Clauses are sorted by bit index; duplicates are kept so that
    /// [`validate`] can report them.
    pub fn new(mut clauses: Vec<(usize, u8)>) -> Self {
        clauses.sort_unstable();
        Self { clauses }
    }

    pub fn all_modes() -> Self {
        Self::default()
    }

    /// Condition pinning every bit of the 0-based register value `r`.
    pub fn exactly(r: usize, n: usize) -> Self {
        Self::new((1..=n).map(|k| (k, ((r >> (k - 1)) & 1) as u8)).collect())
    }

    pub fn clauses(&self) -> &[(usize, u8)] {
        &self.clauses
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn mentions_bit(&self, bit: usize) -> bool {
        self.clauses.iter().any(|&(k, _)| k == bit)
    }

    /// True when the 0-based register value `r` satisfies every clause.
    pub fn matches(&self, r: usize) -> bool {
        self.clauses
            .iter()
            .all(|&(k, b)| ((r >> (k - 1)) & 1) as u8 == b)
    }

    /// 0-based register values below `modes` satisfying the condition.
    pub fn matching_registers(&self, modes: usize) -> Vec<usize> {
        (0..modes).filter(|&r| self.matches(r)).collect()
    }
}

/// One Gaussian bosonic gate. Times/angles are the `t` of `e^{tΩK}` with the
/// generator conventions of [`generator_of`].
#[derive(Debug, Clone, PartialEq)]
pub enum GbGate {
    /// Single-mode phase rotation, `H = q_m² + p_m²`.
    Phase { m: usize, t: f64 },
    /// Two-mode beamsplitter, `H ∝ q_m p_m' - q_m' p_m`, `m ≠ m'`.
    Beamsplitter { m: usize, mp: usize, t: f64 },
    /// Single-mode squeeze, `H = ±(q_m p_m + p_m q_m)`.
    Squeeze { m: usize, t: f64, sign: Sign },
    /// Phase on every mode matching `cond`.
    GlobalPhase { cond: BitCondition, t: f64 },
    /// Beamsplitters pairing each matching mode with its bit-`l` partner.
    GlobalBeamsplitter {
        cond: BitCondition,
        l: usize,
        t: f64,
    },
    /// Squeeze on every mode matching `cond`.
    GlobalSqueeze {
        cond: BitCondition,
        t: f64,
        sign: Sign,
    },
    /// Phase-space displacement; representable but rejected downstream.
    Displacement { m: usize, dq: f64, dp: f64 },
}

impl GbGate {
    pub fn is_global(&self) -> bool {
        matches!(
            self,
            GbGate::GlobalPhase { .. }
                | GbGate::GlobalBeamsplitter { .. }
                | GbGate::GlobalSqueeze { .. }
        )
    }

    pub fn is_displacement(&self) -> bool {
        matches!(self, GbGate::Displacement { .. })
    }

    /// True when the gate's generator commutes with `Ω` (no squeezing).
    pub fn is_particle_preserving(&self) -> bool {
        matches!(
            self,
            GbGate::Phase { .. }
                | GbGate::Beamsplitter { .. }
                | GbGate::GlobalPhase { .. }
                | GbGate::GlobalBeamsplitter { .. }
        )
    }
}

/// An ordered Gaussian bosonic circuit on `modes = 2^n` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct GbCircuit {
    pub modes: usize,
    pub gates: Vec<GbGate>,
}

impl GbCircuit {
    pub fn new(modes: usize) -> Self {
        Self {
            modes,
            gates: Vec::new(),
        }
    }

    /// Register width `n` with `modes = 2^n`.
    pub fn register_bits(&self) -> usize {
        self.modes.trailing_zeros() as usize
    }

    pub fn push(&mut self, gate: GbGate) {
        self.gates.push(gate);
    }
}

/// Checks every structural invariant, returning all violations found.
pub fn validate(c: &GbCircuit) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    if !c.modes.is_power_of_two() || c.modes == 0 {
        violations.push(Violation::ModesNotPowerOfTwo { modes: c.modes });
    }
    let n = c.register_bits();
    let check_mode = |gate: usize, m: usize, v: &mut Vec<Violation>| {
        if m == 0 || m > c.modes {
            v.push(Violation::ModeOutOfRange { gate, mode: m });
        }
    };
    let check_cond = |gate: usize, cond: &BitCondition, v: &mut Vec<Violation>| {
        let mut seen = Vec::new();
        for &(k, _) in cond.clauses() {
            if k == 0 || k > n {
                v.push(Violation::BitOutOfRange { gate, bit: k });
            }
            if seen.contains(&k) {
                v.push(Violation::DuplicateConditionBit { gate, bit: k });
            }
            seen.push(k);
        }
    };
    for (i, gate) in c.gates.iter().enumerate() {
        match gate {
            GbGate::Phase { m, .. }
            | GbGate::Squeeze { m, .. }
            | GbGate::Displacement { m, .. } => check_mode(i, *m, &mut violations),
            GbGate::Beamsplitter { m, mp, .. } => {
                check_mode(i, *m, &mut violations);
                check_mode(i, *mp, &mut violations);
                if m == mp {
                    violations.push(Violation::ModesMustDiffer { gate: i });
                }
            }
            GbGate::GlobalPhase { cond, .. } | GbGate::GlobalSqueeze { cond, .. } => {
                check_cond(i, cond, &mut violations)
            }
            GbGate::GlobalBeamsplitter { cond, l, .. } => {
                check_cond(i, cond, &mut violations);
                if *l == 0 || *l > n {
                    violations.push(Violation::BitOutOfRange { gate: i, bit: *l });
                }
                if cond.mentions_bit(*l) {
                    violations.push(Violation::PairingBitInCondition { gate: i, bit: *l });
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Expands a global gate into the local gates it abbreviates; local gates
/// pass through unchanged.
///
/// For a global beamsplitter each unordered pair is emitted once, ordered
/// `(m, m')` with bit `l` of `m - 1` equal to 0.
pub fn expand_global(g: &GbGate, modes: usize) -> Result<Vec<GbGate>, IrError> {
    let n = modes.trailing_zeros() as usize;
    let check = |cond: &BitCondition| -> Result<(), IrError> {
        for &(k, _) in cond.clauses() {
            if k == 0 || k > n {
                return Err(IrError::CondBitOutOfRange { bit: k, n });
            }
        }
        Ok(())
    };
    match g {
        GbGate::GlobalPhase { cond, t } => {
            check(cond)?;
            Ok(cond
                .matching_registers(modes)
                .into_iter()
                .map(|r| GbGate::Phase { m: r + 1, t: *t })
                .collect())
        }
        GbGate::GlobalSqueeze { cond, t, sign } => {
            check(cond)?;
            Ok(cond
                .matching_registers(modes)
                .into_iter()
                .map(|r| GbGate::Squeeze {
                    m: r + 1,
                    t: *t,
                    sign: *sign,
                })
                .collect())
        }
        GbGate::GlobalBeamsplitter { cond, l, t } => {
            check(cond)?;
            if *l == 0 || *l > n {
                return Err(IrError::CondBitOutOfRange { bit: *l, n });
            }
            let bit = 1usize << (l - 1);
            Ok(cond
                .matching_registers(modes)
                .into_iter()
                .filter(|r| r & bit == 0)
                .map(|r| GbGate::Beamsplitter {
                    m: r + 1,
                    mp: (r | bit) + 1,
                    t: *t,
                })
                .collect())
        }
        local => Ok(vec![local.clone()]),
    }
}

/// The `t`-independent generator `K` such that the gate acts as
/// `e^{tΩK}` in phase space.
///
/// Conventions (0-based register index `r = m - 1`, `E_r = |r><r|`):
/// - phase: `K = 2 I ⊗ E_r`
/// - beamsplitter: `K = 2 iY ⊗ (|r><r'| - |r'><r|)`
/// - squeeze: `K = ±2 X ⊗ E_r`
///
/// Global gates sum the generators of their expansion. Displacements have
/// no quadratic generator and error out.
pub fn generator_of(g: &GbGate, modes: usize) -> Result<GeneratorMatrix, IrError> {
    let dim = 2 * modes;
    let mut k = DMatrix::<f64>::zeros(dim, dim);
    accumulate_generator(g, modes, &mut k)?;
    Ok(GeneratorMatrix::new(k)?)
}

fn accumulate_generator(g: &GbGate, modes: usize, k: &mut DMatrix<f64>) -> Result<(), IrError> {
    match g {
        GbGate::Phase { m, .. } => {
            let r = m - 1;
            k[(r, r)] += 2.0;
            k[(modes + r, modes + r)] += 2.0;
        }
        GbGate::Beamsplitter { m, mp, .. } => {
            let (r, rp) = (m - 1, mp - 1);
            // 2 iY ⊗ (|r><r'| - |r'><r|) as blocks [[0, 2S], [-2S, 0]].
            k[(r, modes + rp)] += 2.0;
            k[(modes + rp, r)] += 2.0;
            k[(rp, modes + r)] -= 2.0;
            k[(modes + r, rp)] -= 2.0;
        }
        GbGate::Squeeze { m, sign, .. } => {
            let r = m - 1;
            k[(r, modes + r)] += 2.0 * sign.factor();
            k[(modes + r, r)] += 2.0 * sign.factor();
        }
        GbGate::Displacement { .. } => {
            return Err(IrError::DisplacementHasNoQuadraticGenerator);
        }
        global => {
            for local in expand_global(global, modes)? {
                accumulate_generator(&local, modes, k)?;
            }
        }
    }
    Ok(())
}

/// Parses the line-oriented GB circuit text format.
pub fn parse(text: &str) -> Result<GbCircuit, IrError> {
    let mut circuit: Option<GbCircuit> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().expect("non-empty line");
        let fields: Vec<&str> = parts.collect();
        if head == "modes" {
            if circuit.is_some() {
                return Err(parse_err(line_no, "duplicate modes header"));
            }
            let m: usize = fields
                .first()
                .ok_or_else(|| parse_err(line_no, "missing mode count"))?
                .parse()
                .map_err(|_| parse_err(line_no, "invalid mode count"))?;
            if !m.is_power_of_two() || m == 0 {
                return Err(parse_err(line_no, "mode count must be a power of two"));
            }
            circuit = Some(GbCircuit::new(m));
            continue;
        }
        let c = circuit
            .as_mut()
            .ok_or_else(|| parse_err(line_no, "first line must be `modes M`"))?;
        let kv = KeyValues::parse(&fields, line_no)?;
        let gate = match head {
            "phase" => GbGate::Phase {
                m: kv.get_usize("m")?,
                t: kv.get_f64("t")?,
            },
            "bs" => GbGate::Beamsplitter {
                m: kv.get_usize("m")?,
                mp: kv.get_usize("mp")?,
                t: kv.get_f64("t")?,
            },
            "sq" => GbGate::Squeeze {
                m: kv.get_usize("m")?,
                t: kv.get_f64("t")?,
                sign: kv.get_sign("sign")?,
            },
            "gphase" => GbGate::GlobalPhase {
                cond: kv.get_cond("cond")?,
                t: kv.get_f64("t")?,
            },
            "gbs" => GbGate::GlobalBeamsplitter {
                cond: kv.get_cond("cond")?,
                l: kv.get_usize("l")?,
                t: kv.get_f64("t")?,
            },
            "gsq" => GbGate::GlobalSqueeze {
                cond: kv.get_cond("cond")?,
                t: kv.get_f64("t")?,
                sign: kv.get_sign("sign")?,
            },
            "disp" => GbGate::Displacement {
                m: kv.get_usize("m")?,
                dq: kv.get_f64("dq")?,
                dp: kv.get_f64("dp")?,
            },
            other => return Err(parse_err(line_no, &format!("unknown gate `{other}`"))),
        };
        c.push(gate);
    }
    circuit.ok_or_else(|| parse_err(0, "empty input: expected `modes M` header"))
}

/// Serializes a circuit back to the text format; floats use the shortest
/// round-trip representation so `parse(serialize(c)) == c` exactly.
pub fn serialize(c: &GbCircuit) -> String {
    let mut out = String::new();
    out.push_str(&format!("modes {}\n", c.modes));
    for gate in &c.gates {
        let line = match gate {
            GbGate::Phase { m, t } => format!("phase m={m} t={t}"),
            GbGate::Beamsplitter { m, mp, t } => format!("bs m={m} mp={mp} t={t}"),
            GbGate::Squeeze { m, t, sign } => format!("sq m={m} t={t} sign={sign}"),
            GbGate::GlobalPhase { cond, t } => {
                format!("gphase cond={} t={t}", cond_str(cond))
            }
            GbGate::GlobalBeamsplitter { cond, l, t } => {
                format!("gbs cond={} l={l} t={t}", cond_str(cond))
            }
            GbGate::GlobalSqueeze { cond, t, sign } => {
                format!("gsq cond={} t={t} sign={sign}", cond_str(cond))
            }
            GbGate::Displacement { m, dq, dp } => format!("disp m={m} dq={dq} dp={dp}"),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn cond_str(cond: &BitCondition) -> String {
    if cond.is_empty() {
        "-".to_string()
    } else {
        cond.clauses()
            .iter()
            .map(|(k, b)| format!("{k}:{b}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

fn parse_err(line: usize, reason: &str) -> IrError {
    IrError::Parse {
        line,
        reason: reason.to_string(),
    }
}

/// Order-insensitive `key=value` fields of one gate line.
struct KeyValues<'a> {
    pairs: Vec<(&'a str, &'a str)>,
    line: usize,
}

impl<'a> KeyValues<'a> {
    fn parse(fields: &[&'a str], line: usize) -> Result<Self, IrError> {
        let mut pairs = Vec::new();
        for f in fields {
            let (k, v) = f
                .split_once('=')
                .ok_or_else(|| parse_err(line, &format!("expected key=value, got `{f}`")))?;
            pairs.push((k, v));
        }
        Ok(Self { pairs, line })
    }

    fn get(&self, key: &str) -> Result<&'a str, IrError> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| parse_err(self.line, &format!("missing key `{key}`")))
    }

    fn get_usize(&self, key: &str) -> Result<usize, IrError> {
        self.get(key)?
            .parse()
            .map_err(|_| parse_err(self.line, &format!("invalid integer for `{key}`")))
    }

    fn get_f64(&self, key: &str) -> Result<f64, IrError> {
        let v: f64 = self
            .get(key)?
            .parse()
            .map_err(|_| parse_err(self.line, &format!("invalid float for `{key}`")))?;
        if !v.is_finite() {
            return Err(parse_err(
                self.line,
                &format!("non-finite value for `{key}`"),
            ));
        }
        Ok(v)
    }

    fn get_sign(&self, key: &str) -> Result<Sign, IrError> {
        match self.get(key)? {
            "+" => Ok(Sign::Plus),
            "-" => Ok(Sign::Minus),
            other => Err(parse_err(
                self.line,
                &format!("invalid sign `{other}` (expected + or -)"),
            )),
        }
    }

    fn get_cond(&self, key: &str) -> Result<BitCondition, IrError> {
        let raw = self.get(key)?;
        if raw == "-" {
            return Ok(BitCondition::all_modes());
        }
        let mut clauses = Vec::new();
        for part in raw.split(',') {
            let (k, b) = part
                .split_once(':')
                .ok_or_else(|| parse_err(self.line, &format!("invalid clause `{part}`")))?;
            let bit: usize = k
                .parse()
                .map_err(|_| parse_err(self.line, &format!("invalid bit index `{k}`")))?;
            let val: u8 = match b {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(parse_err(
                        self.line,
                        &format!("bit value must be 0 or 1, got `{other}`"),
                    ))
                }
            };
            clauses.push((bit, val));
        }
        Ok(BitCondition::new(clauses))
    }
}
