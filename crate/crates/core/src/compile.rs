//! Dictionary from Gaussian bosonic gates to real qubit gates.
//!
//! Compiled circuits act on `n + 1` qubits: qubit 0 is the symplectic qubit
//! (q-block vs p-block) and qubits `1..=n` are the register, with register
//! qubit `k` holding bit `k` (the `2^(k-1)` digit) of the 0-based mode index.
//! Squeeze gates add two ancilla qubits `n+1, n+2` for the heralded LCU
//! protocol.
//!
//! Rotation convention: `Ry(θ) = e^{-iθY/2}`, i.e. the real matrix
//! `[[cos(θ/2), -sin(θ/2)], [sin(θ/2), cos(θ/2)]]` on an amplitude pair
//! ordered (target = 0, target = 1). Under this standard convention the
//! phase-space propagators compile to rotations of magnitude `4t`:
//! beamsplitters to `Ry(4t)` on the register, phase gates to `Ry(-4t)` on
//! the symplectic qubit (the phase propagator block is `e^{2itY}`, which is
//! `Ry(-4t)` when written with the standard sign).

use std::fmt;
use thiserror::Error;

use crate::ir::{validate, BitCondition, GbCircuit, GbGate, IrError, Sign, Violation};

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("displacement gates cannot be compiled to linear qubit gates")]
    DisplacementUnsupported,
    #[error("beamsplitter endpoints must differ")]
    BeamsplitterModesEqual,
    #[error("squeeze step t = {0} outside the LCU validity window [0, 1)")]
    SqueezeTimeOutOfRange(f64),
    #[error("lcu step size {0} outside (0, 0.1]")]
    InvalidLcuStep(f64),
    #[error("gate {index}: {source}")]
    AtGate {
        index: usize,
        #[source]
        source: Box<CompileError>,
    },
    #[error("circuit failed validation: {}", format_violations(.0))]
    InvalidCircuit(Vec<Violation>),
    #[error("cannot decompose a gate with {0} controls (cap 20)")]
    DecompositionTooLarge(usize),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Ir(#[from] IrError),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// A control clause: `(qubit id, required bit value)`.
pub type Controls = Vec<(usize, u8)>;

/// One gate of a compiled circuit. All matrices are real.
#[derive(Debug, Clone, PartialEq)]
pub enum QubitGate {
    /// `Ry(θ) = e^{-iθY/2}` on `target`.
    Ry {
        target: usize,
        theta: f64,
    },
    X {
        target: usize,
    },
    /// `Ry(θ)` on `target` when every control matches.
    MultiControlledRy {
        controls: Controls,
        target: usize,
        theta: f64,
    },
    /// `X` on `target` when every control matches.
    MultiControlledX {
        controls: Controls,
        target: usize,
    },
    /// Phase `-1` on basis states where the controls match and the target
    /// bit is 1 (a multi-controlled Z written with an explicit target).
    SelectZ {
        controls: Controls,
        target: usize,
    },
    /// Within the subspace where `select` matches: phase `+1` on states
    /// matching `marked`, `-1` on the rest. Identity outside `select`.
    SelectReflect {
        select: Controls,
        marked: Controls,
    },
    /// Maps ancillas `|00⟩ -> amps[0]|00⟩ + amps[1]|01⟩ + amps[2]|10⟩ +
    /// amps[3]|11⟩` (a fixed orthogonal completion is used on the rest).
    AnsatzPrep {
        amps: [f64; 4],
    },
    /// Inverse of [`QubitGate::AnsatzPrep`] with the same amplitudes.
    AnsatzUnprep {
        amps: [f64; 4],
    },
    /// Simulator-native nonunitary squeeze segment: scales the q (p)
    /// amplitudes of every register state matching `cond` by `e^{±2t}`
    /// (`e^{∓2t}`). Emitted when compiling with [`SqueezeMode::Exact`].
    SqueezeExact {
        cond: Controls,
        t: f64,
        sign: Sign,
    },
}

impl QubitGate {
    /// Qubits the gate touches (controls and targets).
    pub fn support(&self) -> Vec<usize> {
        let mut out = Vec::new();
        match self {
            QubitGate::Ry { target, .. } | QubitGate::X { target } => out.push(*target),
            QubitGate::MultiControlledRy {
                controls, target, ..
            }
            | QubitGate::MultiControlledX { controls, target }
            | QubitGate::SelectZ { controls, target } => {
                out.extend(controls.iter().map(|c| c.0));
                out.push(*target);
            }
            QubitGate::SelectReflect { select, marked } => {
                out.extend(select.iter().map(|c| c.0));
                out.extend(marked.iter().map(|c| c.0));
            }
            QubitGate::AnsatzPrep { .. } | QubitGate::AnsatzUnprep { .. } => {}
            QubitGate::SqueezeExact { cond, .. } => {
                out.extend(cond.iter().map(|c| c.0));
                out.push(0);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn touches_ancillas(&self, base_qubits: usize) -> bool {
        matches!(
            self,
            QubitGate::AnsatzPrep { .. } | QubitGate::AnsatzUnprep { .. }
        ) || self.support().iter().any(|&q| q >= base_qubits)
    }
}

/// Heralded projection point: after `after_gate` gates the two ancillas are
/// measured and postselected on `|00⟩`. `gamma` is the LCU normalization of
/// the block that just closed; it reconstructs physical magnitudes from the
/// heralded ones.
#[derive(Debug, Clone, PartialEq)]
pub struct PostselectPoint {
    pub after_gate: usize,
    pub gamma: f64,
}

/// A compiled circuit on `base_qubits = n + 1` qubits plus `ancillas`
/// heralding qubits and `workspace` borrowed qubits (used only by
/// [`decompose_multicontrols`], never measured).
#[derive(Debug, Clone, PartialEq)]
pub struct QubitCircuit {
    pub base_qubits: usize,
    pub ancillas: usize,
    pub workspace: usize,
    pub gates: Vec<QubitGate>,
    pub postselect_points: Vec<PostselectPoint>,
}

impl QubitCircuit {
    pub fn new(base_qubits: usize) -> Self {
        Self {
            base_qubits,
            ancillas: 0,
            workspace: 0,
            gates: Vec::new(),
            postselect_points: Vec::new(),
        }
    }

    /// Register width `n`.
    pub fn register_bits(&self) -> usize {
        self.base_qubits - 1
    }

    pub fn total_qubits(&self) -> usize {
        self.base_qubits + self.ancillas + self.workspace
    }

    pub fn has_heralding(&self) -> bool {
        self.ancillas > 0
    }
}

/// Squeeze lowering strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqueezeMode {
    /// Heralded LCU blocks with two ancillas (first order in the step).
    Lcu,
    /// Exact nonunitary segments applied natively by the simulator.
    Exact,
}

#[derive(Debug, Clone, Copy)]
pub struct CompileOptions {
    /// Maximum squeeze time per LCU block; longer squeezes are split into
    /// `ceil(t/step)` equal blocks. Must lie in `(0, 0.1]`.
    pub lcu_step: f64,
    pub squeeze_mode: SqueezeMode,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            lcu_step: 0.05,
            squeeze_mode: SqueezeMode::Lcu,
        }
    }
}

/// LCU weights `(a, b, c, d)` with `a + b + c + d = 1` and the heralding
/// normalization `γ = 1/(1 + 2t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcuCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub gamma: f64,
}

impl LcuCoefficients {
    pub fn amplitudes(&self) -> [f64; 4] {
        [self.a.sqrt(), self.b.sqrt(), self.c.sqrt(), self.d.sqrt()]
    }
}

impl fmt::Display for LcuCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "a={} b={} c={} d={} gamma={}",
            self.a, self.b, self.c, self.d, self.gamma
        )
    }
}

/// Solves the LCU weights for one squeeze step of time `t ∈ [0, 1)`:
/// `a = (1-t)/(1+2t)`, `b = t/(1+2t)`, `c = (t±t)/(1+2t)`,
/// `d = (t∓t)/(1+2t)`. Exactly one of `c, d` is zero.
pub fn lcu_coefficients(t: f64, sign: Sign) -> Result<LcuCoefficients, CompileError> {
    if !(0.0..1.0).contains(&t) {
        return Err(CompileError::SqueezeTimeOutOfRange(t));
    }
    let denom = 1.0 + 2.0 * t;
    let (c, d) = match sign {
        Sign::Plus => (2.0 * t / denom, 0.0),
        Sign::Minus => (0.0, 2.0 * t / denom),
    };
    Ok(LcuCoefficients {
        a: (1.0 - t) / denom,
        b: t / denom,
        c,
        d,
        gamma: 1.0 / denom,
    })
}

/// One heralded squeeze block: preparation, the two select unitaries, the
/// inverse preparation, plus the weights needed for bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct LcuBlock {
    /// Register-bit clauses selecting the squeezed modes.
    pub cond: Controls,
    pub t: f64,
    pub sign: Sign,
    pub coeffs: LcuCoefficients,
    pub gates: Vec<QubitGate>,
}

/// Compiles a local phase gate: one multi-controlled `Ry(-4t)` on the
/// symplectic qubit, selected on the register state of the mode.
pub fn compile_phase(m: usize, t: f64, n: usize) -> Vec<QubitGate> {
    compile_phase_cond(&BitCondition::exactly(m - 1, n), t)
}

fn compile_phase_cond(cond: &BitCondition, t: f64) -> Vec<QubitGate> {
    vec![QubitGate::MultiControlledRy {
        controls: cond.clauses().to_vec(),
        target: 0,
        theta: -4.0 * t,
    }]
}

/// Compiles a local beamsplitter between modes `m` and `mp`.
///
/// Controlled-NOTs map the two register states onto a pair differing only
/// in the least significant differing bit `d1`; a multi-controlled `Ry(4t)`
/// rotates that bit; the basis change is then undone. No gate touches the
/// symplectic qubit.
pub fn compile_beamsplitter(
    m: usize,
    mp: usize,
    t: f64,
    n: usize,
) -> Result<Vec<QubitGate>, CompileError> {
    if m == mp {
        return Err(CompileError::BeamsplitterModesEqual);
    }
    let r = m - 1;
    let rp = mp - 1;
    let diff = r ^ rp;
    let d1 = diff.trailing_zeros() as usize + 1; // 1-based bit index
    let r_d1 = (r >> (d1 - 1)) & 1;

    let mut basis_change = Vec::new();
    if r_d1 == 1 {
        basis_change.push(QubitGate::X { target: d1 });
    }
    let mut c0 = Vec::new();
    let mut c1 = Vec::new();
    let mut rotation_controls: Controls = Vec::new();
    for bit in 1..=n {
        if bit == d1 {
            continue;
        }
        let r_bit = ((r >> (bit - 1)) & 1) as u8;
        if diff >> (bit - 1) & 1 == 1 {
            // Differing bit: clear it in both branches, then control on 0.
            if r_bit == 1 {
                c0.push(QubitGate::MultiControlledX {
                    controls: vec![(d1, 0)],
                    target: bit,
                });
            } else {
                c1.push(QubitGate::MultiControlledX {
                    controls: vec![(d1, 1)],
                    target: bit,
                });
            }
            rotation_controls.push((bit, 0));
        } else {
            rotation_controls.push((bit, r_bit));
        }
    }
    rotation_controls.sort_unstable();

    let mut gates = Vec::new();
    gates.extend(basis_change.iter().cloned());
    gates.extend(c0.iter().cloned());
    gates.extend(c1.iter().cloned());
    gates.push(QubitGate::MultiControlledRy {
        controls: rotation_controls,
        target: d1,
        theta: 4.0 * t,
    });
    gates.extend(c1.into_iter().rev());
    gates.extend(c0.into_iter().rev());
    gates.extend(basis_change.into_iter().rev());
    Ok(gates)
}

/// Compiles one heralded LCU squeeze block on the modes selected by `cond`
/// (a full condition for a local squeeze on one mode).
///
/// Gate order inside the block: ansatz preparation, the `b`-term register
/// reflection (ancilla `01`), the `c`- or `d`-term select-Z (ancilla `10`
/// or `11`), inverse preparation. The two select terms commute, so this
/// order is a convention, not a constraint.
pub fn compile_squeeze_lcu_cond(
    cond: &BitCondition,
    t: f64,
    sign: Sign,
    n: usize,
) -> Result<LcuBlock, CompileError> {
    let coeffs = lcu_coefficients(t, sign)?;
    let a1 = n + 1;
    let a2 = n + 2;
    let register: Controls = cond.clauses().to_vec();
    let mut gates = vec![QubitGate::AnsatzPrep {
        amps: coeffs.amplitudes(),
    }];
    // b-term: reflection 2P - 1 about the selected register states,
    // applied in the ancilla |01⟩ branch.
    gates.push(QubitGate::SelectReflect {
        select: vec![(a1, 0), (a2, 1)],
        marked: register.clone(),
    });
    match sign {
        Sign::Plus => {
            // c-term (ancilla |10⟩): Z ⊗ P + 1 ⊗ P̄, i.e. a -1 phase on
            // the selected register states with the symplectic qubit at 1.
            let mut controls = vec![(a1, 1), (a2, 0)];
            controls.extend(register.iter().cloned());
            gates.push(QubitGate::SelectZ {
                controls,
                target: 0,
            });
        }
        Sign::Minus => {
            // d-term (ancilla |11⟩): -Z ⊗ P + 1 ⊗ P̄, i.e. a -1 phase on
            // the selected register states with the symplectic qubit at 0.
            // The phase is routed through ancilla a2 so the symplectic
            // qubit can sit in the control list with polarity 0.
            let mut controls = vec![(a1, 1), (0, 0)];
            controls.extend(register.iter().cloned());
            gates.push(QubitGate::SelectZ {
                controls,
                target: a2,
            });
        }
    }
    gates.push(QubitGate::AnsatzUnprep {
        amps: coeffs.amplitudes(),
    });
    Ok(LcuBlock {
        cond: register,
        t,
        sign,
        coeffs,
        gates,
    })
}

/// Local-squeeze wrapper of [`compile_squeeze_lcu_cond`].
pub fn compile_squeeze_lcu(
    m: usize,
    t: f64,
    sign: Sign,
    n: usize,
) -> Result<LcuBlock, CompileError> {
    compile_squeeze_lcu_cond(&BitCondition::exactly(m - 1, n), t, sign, n)
}

/// Compiles a whole GB circuit.
///
/// Global gates compile with reduced control sets (their bit condition),
/// never through expansion. Squeezes are split into `ceil(t/lcu_step)`
/// heralded blocks, or emitted as exact segments under
/// [`SqueezeMode::Exact`]. Displacements are rejected.
pub fn compile(c: &GbCircuit, options: &CompileOptions) -> Result<QubitCircuit, CompileError> {
    if !(0.0..=0.1).contains(&options.lcu_step) || options.lcu_step == 0.0 {
        return Err(CompileError::InvalidLcuStep(options.lcu_step));
    }
    if let Err(violations) = validate(c) {
        return Err(CompileError::InvalidCircuit(violations));
    }
    let n = c.register_bits();
    let mut qc = QubitCircuit::new(n + 1);
    for (index, gate) in c.gates.iter().enumerate() {
        compile_gate(gate, n, options, &mut qc).map_err(|source| CompileError::AtGate {
            index,
            source: Box::new(source),
        })?;
    }
    Ok(qc)
}

fn compile_gate(
    gate: &GbGate,
    n: usize,
    options: &CompileOptions,
    qc: &mut QubitCircuit,
) -> Result<(), CompileError> {
    match gate {
        GbGate::Phase { m, t } => qc.gates.extend(compile_phase(*m, *t, n)),
        GbGate::GlobalPhase { cond, t } => qc.gates.extend(compile_phase_cond(cond, *t)),
        GbGate::Beamsplitter { m, mp, t } => qc.gates.extend(compile_beamsplitter(*m, *mp, *t, n)?),
        GbGate::GlobalBeamsplitter { cond, l, t } => {
            qc.gates.push(QubitGate::MultiControlledRy {
                controls: cond.clauses().to_vec(),
                target: *l,
                theta: 4.0 * t,
            });
        }
        GbGate::Squeeze { m, t, sign } => {
            compile_squeeze(&BitCondition::exactly(m - 1, n), *t, *sign, n, options, qc)?
        }
        GbGate::GlobalSqueeze { cond, t, sign } => {
            compile_squeeze(cond, *t, *sign, n, options, qc)?
        }
        GbGate::Displacement { .. } => return Err(CompileError::DisplacementUnsupported),
    }
    Ok(())
}

fn compile_squeeze(
    cond: &BitCondition,
    t: f64,
    sign: Sign,
    n: usize,
    options: &CompileOptions,
    qc: &mut QubitCircuit,
) -> Result<(), CompileError> {
    // Negative times are the opposite-sign squeeze.
    let (t, sign) = if t < 0.0 {
        (-t, sign.flipped())
    } else {
        (t, sign)
    };
    match options.squeeze_mode {
        SqueezeMode::Exact => {
            qc.gates.push(QubitGate::SqueezeExact {
                cond: cond.clauses().to_vec(),
                t,
                sign,
            });
        }
        SqueezeMode::Lcu => {
            qc.ancillas = 2;
            let steps = if t == 0.0 {
                1
            } else {
                (t / options.lcu_step).ceil() as usize
            };
            let step_t = t / steps as f64;
            for _ in 0..steps {
                let block = compile_squeeze_lcu_cond(cond, step_t, sign, n)?;
                qc.gates.extend(block.gates.iter().cloned());
                qc.postselect_points.push(PostselectPoint {
                    after_gate: qc.gates.len(),
                    gamma: block.coeffs.gamma,
                });
            }
        }
    }
    Ok(())
}

/// Deterministic orthogonal completion of the ansatz preparation: the first
/// column is `amps` and the matrix is a product of three real rotations.
pub fn ansatz_prep_matrix(amps: [f64; 4]) -> [[f64; 4]; 4] {
    let c1 = (amps[0] * amps[0] + amps[1] * amps[1]).sqrt();
    let s1 = (amps[2] * amps[2] + amps[3] * amps[3]).sqrt();
    let (c2, s2) = if c1 > 0.0 {
        (amps[0] / c1, amps[1] / c1)
    } else {
        (1.0, 0.0)
    };
    let (c3, s3) = if s1 > 0.0 {
        (amps[2] / s1, amps[3] / s1)
    } else {
        (1.0, 0.0)
    };
    // U = R3 · R2 · R1 over ancilla basis (|00⟩, |01⟩, |10⟩, |11⟩) where
    // R1 rotates a1, R2 rotates a2 in the a1 = 0 branch, R3 in a1 = 1.
    let r1 = [
        [c1, 0.0, -s1, 0.0],
        [0.0, c1, 0.0, -s1],
        [s1, 0.0, c1, 0.0],
        [0.0, s1, 0.0, c1],
    ];
    let r23 = [
        [c2, -s2, 0.0, 0.0],
        [s2, c2, 0.0, 0.0],
        [0.0, 0.0, c3, -s3],
        [0.0, 0.0, s3, c3],
    ];
    mat4_mul(&r23, &r1)
}

/// The angles of the three rotations in [`ansatz_prep_matrix`], as
/// `(θ1 on a1, θ2 on a2 | a1 = 0, θ3 on a2 | a1 = 1)`.
pub fn ansatz_prep_angles(amps: [f64; 4]) -> (f64, f64, f64) {
    let c1 = (amps[0] * amps[0] + amps[1] * amps[1]).sqrt();
    let s1 = (amps[2] * amps[2] + amps[3] * amps[3]).sqrt();
    let theta1 = 2.0 * s1.atan2(c1);
    let theta2 = if c1 > 0.0 {
        2.0 * (amps[1] / c1).atan2(amps[0] / c1)
    } else {
        0.0
    };
    let theta3 = if s1 > 0.0 {
        2.0 * (amps[3] / s1).atan2(amps[2] / s1)
    } else {
        0.0
    };
    (theta1, theta2, theta3)
}

pub(crate) fn mat4_mul(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub(crate) fn mat4_transpose(a: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

/// Rewrites every multi-controlled gate into single- and two-qubit gates
/// (`Ry`, `X`, and singly-controlled `X`), exactly.
///
/// Multi-controlled rotations lower through the standard uniformly
/// controlled `Ry` recursion (`2^c` CNOT + `2^c` Ry per gate, ancilla
/// free). Pure phase gates (`SelectZ`, `SelectReflect`, and the phase
/// correction inside multi-controlled `X`) are realized as a borrowed-qubit
/// `Ry(2π)`, which is a `-1` phase on the matched pattern and leaves the
/// borrowed qubit untouched. When a phase gate already spans every qubit of
/// the circuit no borrow exists — a `-1` phase on a single basis state has
/// determinant -1, which no product of 1- and 2-qubit real gates on the
/// same qubits can reach — so one extra workspace qubit is appended and
/// the output acts as `U ⊗ I` on it.
pub fn decompose_multicontrols(qc: &QubitCircuit) -> Result<QubitCircuit, CompileError> {
    let span = qc.base_qubits + qc.ancillas;
    // A borrow beyond the existing qubits is needed if any phase-type gate
    // covers all of them.
    let needs_extra = qc.gates.iter().any(|g| phase_pattern_len(g) == Some(span));
    let workspace = qc.workspace + usize::from(needs_extra);
    let total = span + workspace;

    let mut out = QubitCircuit::new(qc.base_qubits);
    out.ancillas = qc.ancillas;
    out.workspace = workspace;
    let mut index_map = Vec::with_capacity(qc.gates.len() + 1);
    index_map.push(0usize);
    for gate in &qc.gates {
        lower_gate(gate, qc.base_qubits, total, &mut out.gates)?;
        index_map.push(out.gates.len());
    }
    out.postselect_points = qc
        .postselect_points
        .iter()
        .map(|p| PostselectPoint {
            after_gate: index_map[p.after_gate],
            gamma: p.gamma,
        })
        .collect();
    Ok(out)
}

/// For gates that reduce to a `-1` phase on one control pattern, the number
/// of qubits in that pattern.
fn phase_pattern_len(g: &QubitGate) -> Option<usize> {
    match g {
        QubitGate::SelectZ { controls, .. } => Some(controls.len() + 1),
        QubitGate::SelectReflect { select, marked } => Some(select.len() + marked.len()),
        QubitGate::MultiControlledX { controls, .. } if controls.len() >= 2 => {
            Some(controls.len() + 1)
        }
        _ => None,
    }
}

fn lower_gate(
    gate: &QubitGate,
    base_qubits: usize,
    total_qubits: usize,
    out: &mut Vec<QubitGate>,
) -> Result<(), CompileError> {
    match gate {
        QubitGate::Ry { .. } | QubitGate::X { .. } | QubitGate::SqueezeExact { .. } => {
            out.push(gate.clone())
        }
        QubitGate::MultiControlledRy {
            controls,
            target,
            theta,
        } => lower_mcry(controls, *target, *theta, out)?,
        QubitGate::MultiControlledX { controls, target } => {
            if controls.is_empty() {
                out.push(QubitGate::X { target: *target });
            } else if controls.len() == 1 {
                out.push(gate.clone());
            } else {
                // X = Ry(π) · Z on the matched block: phase first.
                let mut pattern = controls.clone();
                pattern.push((*target, 1));
                lower_phase_on_pattern(&pattern, total_qubits, out)?;
                lower_mcry(controls, *target, std::f64::consts::PI, out)?;
            }
        }
        QubitGate::SelectZ { controls, target } => {
            let mut pattern = controls.clone();
            pattern.push((*target, 1));
            lower_phase_on_pattern(&pattern, total_qubits, out)?;
        }
        QubitGate::SelectReflect { select, marked } => {
            // -1 on (select ∧ ¬marked) = (-1 iff select) · (-1 iff select ∧ marked).
            lower_phase_on_pattern(select, total_qubits, out)?;
            let mut both = select.clone();
            both.extend(marked.iter().cloned());
            lower_phase_on_pattern(&both, total_qubits, out)?;
        }
        QubitGate::AnsatzPrep { amps } | QubitGate::AnsatzUnprep { amps } => {
            let inverse = matches!(gate, QubitGate::AnsatzUnprep { .. });
            let (t1, t2, t3) = ansatz_prep_angles(*amps);
            // Ancillas sit directly above the base qubits.
            let a1 = base_qubits;
            let a2 = a1 + 1;
            let mut seq: Vec<QubitGate> = Vec::new();
            seq.push(QubitGate::Ry {
                target: a1,
                theta: t1,
            });
            seq.push(QubitGate::MultiControlledRy {
                controls: vec![(a1, 0)],
                target: a2,
                theta: t2,
            });
            seq.push(QubitGate::MultiControlledRy {
                controls: vec![(a1, 1)],
                target: a2,
                theta: t3,
            });
            if inverse {
                for g in seq.into_iter().rev() {
                    match g {
                        QubitGate::Ry { target, theta } => out.push(QubitGate::Ry {
                            target,
                            theta: -theta,
                        }),
                        QubitGate::MultiControlledRy {
                            controls,
                            target,
                            theta,
                        } => lower_mcry(&controls, target, -theta, out)?,
                        _ => unreachable!(),
                    }
                }
            } else {
                for g in seq {
                    match g {
                        QubitGate::Ry { .. } => out.push(g),
                        QubitGate::MultiControlledRy {
                            controls,
                            target,
                            theta,
                        } => lower_mcry(&controls, target, theta, out)?,
                        _ => unreachable!(),
                    }
                }
            }
        }
    }
    Ok(())
}

/// `-1` phase exactly on the basis states matching `pattern`: a borrowed
/// `Ry(2π)` on any qubit outside the pattern.
fn lower_phase_on_pattern(
    pattern: &[(usize, u8)],
    total_qubits: usize,
    out: &mut Vec<QubitGate>,
) -> Result<(), CompileError> {
    let borrow = (0..total_qubits)
        .find(|q| !pattern.iter().any(|(p, _)| p == q))
        .expect("decompose_multicontrols sized the workspace for a free qubit");
    lower_mcry(pattern, borrow, 2.0 * std::f64::consts::PI, out)
}

/// Uniformly-controlled-Ry lowering of a single-pattern controlled rotation.
fn lower_mcry(
    controls: &[(usize, u8)],
    target: usize,
    theta: f64,
    out: &mut Vec<QubitGate>,
) -> Result<(), CompileError> {
    if controls.len() > 20 {
        return Err(CompileError::DecompositionTooLarge(controls.len()));
    }
    if controls.is_empty() {
        out.push(QubitGate::Ry { target, theta });
        return Ok(());
    }
    if controls.len() == 1 {
        // Standard identity: 2 CNOTs and 2 half-angle rotations. The CNOT
        // conjugation negates the second rotation in the control-1 branch,
        // so the two halves cancel there and add up in the other branch.
        let (ctrl, pol) = controls[0];
        let half = theta / 2.0;
        let second = if pol == 1 { -half } else { half };
        out.push(QubitGate::Ry {
            target,
            theta: half,
        });
        out.push(QubitGate::MultiControlledX {
            controls: vec![(ctrl, 1)],
            target,
        });
        out.push(QubitGate::Ry {
            target,
            theta: second,
        });
        out.push(QubitGate::MultiControlledX {
            controls: vec![(ctrl, 1)],
            target,
        });
        return Ok(());
    }
    let qubits: Vec<usize> = controls.iter().map(|c| c.0).collect();
    let pattern: usize = controls
        .iter()
        .enumerate()
        .map(|(j, &(_, pol))| (pol as usize) << j)
        .sum();
    let mut angles = vec![0.0; 1 << controls.len()];
    angles[pattern] = theta;
    uc_ry(&qubits, target, &angles, out);
    Ok(())
}

/// Uniformly controlled Ry over `ctrl_qubits` (bit `j` of the angle index is
/// the state of `ctrl_qubits[j]`); emits `2^k` rotations and `2^k` CNOTs.
fn uc_ry(ctrl_qubits: &[usize], target: usize, angles: &[f64], out: &mut Vec<QubitGate>) {
    if ctrl_qubits.is_empty() {
        // Emitted unconditionally to keep the CNOT bookkeeping uniform;
        // zero-angle rotations are cheap no-ops downstream.
        out.push(QubitGate::Ry {
            target,
            theta: angles[0],
        });
        return;
    }
    let (rest, last) = (
        &ctrl_qubits[..ctrl_qubits.len() - 1],
        ctrl_qubits[ctrl_qubits.len() - 1],
    );
    let half = angles.len() / 2;
    let mut sums = Vec::with_capacity(half);
    let mut diffs = Vec::with_capacity(half);
    for i in 0..half {
        sums.push((angles[i] + angles[half + i]) / 2.0);
        diffs.push((angles[i] - angles[half + i]) / 2.0);
    }
    uc_ry(rest, target, &sums, out);
    out.push(QubitGate::MultiControlledX {
        controls: vec![(last, 1)],
        target,
    });
    uc_ry(rest, target, &diffs, out);
    out.push(QubitGate::MultiControlledX {
        controls: vec![(last, 1)],
        target,
    });
}

/// Serializes a compiled circuit to the line-oriented text format.
pub fn serialize_qubit_circuit(qc: &QubitCircuit) -> String {
    let mut out = format!("qubits {}\n", qc.base_qubits);
    if qc.ancillas > 0 {
        out.push_str(&format!("ancillas {}\n", qc.ancillas));
    }
    if qc.workspace > 0 {
        out.push_str(&format!("workspace {}\n", qc.workspace));
    }
    let mut points = qc.postselect_points.iter().peekable();
    for (i, gate) in qc.gates.iter().enumerate() {
        while let Some(p) = points.peek() {
            if p.after_gate == i {
                out.push_str(&format!("postselect anc=00 gamma={}\n", p.gamma));
                points.next();
            } else {
                break;
            }
        }
        out.push_str(&gate_line(gate));
        out.push('\n');
    }
    for p in points {
        out.push_str(&format!("postselect anc=00 gamma={}\n", p.gamma));
    }
    out
}

fn controls_str(controls: &[(usize, u8)]) -> String {
    if controls.is_empty() {
        "-".to_string()
    } else {
        controls
            .iter()
            .map(|(q, b)| format!("{q}:{b}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn gate_line(gate: &QubitGate) -> String {
    match gate {
        QubitGate::Ry { target, theta } => format!("ry q={target} theta={theta}"),
        QubitGate::X { target } => format!("x q={target}"),
        QubitGate::MultiControlledRy {
            controls,
            target,
            theta,
        } => format!(
            "mcry ctrls={} tgt={target} theta={theta}",
            controls_str(controls)
        ),
        QubitGate::MultiControlledX { controls, target } => {
            format!("mcx ctrls={} tgt={target}", controls_str(controls))
        }
        QubitGate::SelectZ { controls, target } => {
            format!("selectz ctrls={} tgt={target}", controls_str(controls))
        }
        QubitGate::SelectReflect { select, marked } => format!(
            "reflect sel={} marked={}",
            controls_str(select),
            controls_str(marked)
        ),
        QubitGate::AnsatzPrep { amps } => format!(
            "prep a={} b={} c={} d={}",
            amps[0], amps[1], amps[2], amps[3]
        ),
        QubitGate::AnsatzUnprep { amps } => format!(
            "unprep a={} b={} c={} d={}",
            amps[0], amps[1], amps[2], amps[3]
        ),
        QubitGate::SqueezeExact { cond, t, sign } => {
            format!("sqexact cond={} t={t} sign={sign}", controls_str(cond))
        }
    }
}

/// Parses the compiled-circuit text format written by
/// [`serialize_qubit_circuit`].
pub fn parse_qubit_circuit(text: &str) -> Result<QubitCircuit, CompileError> {
    let mut qc: Option<QubitCircuit> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().expect("non-empty");
        let fields: Vec<&str> = parts.collect();
        let get = |key: &str| -> Result<&str, CompileError> {
            fields
                .iter()
                .find_map(|f| f.strip_prefix(&format!("{key}=")))
                .ok_or_else(|| CompileError::Parse {
                    line: line_no,
                    reason: format!("missing key `{key}`"),
                })
        };
        let get_usize = |key: &str| -> Result<usize, CompileError> {
            get(key)?.parse().map_err(|_| CompileError::Parse {
                line: line_no,
                reason: format!("invalid integer for `{key}`"),
            })
        };
        let get_f64 = |key: &str| -> Result<f64, CompileError> {
            get(key)?.parse().map_err(|_| CompileError::Parse {
                line: line_no,
                reason: format!("invalid float for `{key}`"),
            })
        };
        let get_controls = |key: &str| -> Result<Controls, CompileError> {
            let raw = get(key)?;
            if raw == "-" {
                return Ok(Vec::new());
            }
            raw.split(',')
                .map(|part| {
                    let (q, b) = part.split_once(':').ok_or_else(|| CompileError::Parse {
                        line: line_no,
                        reason: format!("invalid control `{part}`"),
                    })?;
                    let qubit: usize = q.parse().map_err(|_| CompileError::Parse {
                        line: line_no,
                        reason: format!("invalid qubit `{q}`"),
                    })?;
                    let pol: u8 = match b {
                        "0" => 0,
                        "1" => 1,
                        _ => {
                            return Err(CompileError::Parse {
                                line: line_no,
                                reason: format!("control value must be 0 or 1, got `{b}`"),
                            })
                        }
                    };
                    Ok((qubit, pol))
                })
                .collect()
        };

        if head == "qubits" {
            let b: usize = fields
                .first()
                .ok_or_else(|| CompileError::Parse {
                    line: line_no,
                    reason: "missing qubit count".into(),
                })?
                .parse()
                .map_err(|_| CompileError::Parse {
                    line: line_no,
                    reason: "invalid qubit count".into(),
                })?;
            qc = Some(QubitCircuit::new(b));
            continue;
        }
        let circuit = qc.as_mut().ok_or_else(|| CompileError::Parse {
            line: line_no,
            reason: "first line must be `qubits N`".into(),
        })?;
        match head {
            "ancillas" => {
                circuit.ancillas =
                    fields.first().and_then(|f| f.parse().ok()).ok_or_else(|| {
                        CompileError::Parse {
                            line: line_no,
                            reason: "invalid ancilla count".into(),
                        }
                    })?;
            }
            "workspace" => {
                circuit.workspace =
                    fields.first().and_then(|f| f.parse().ok()).ok_or_else(|| {
                        CompileError::Parse {
                            line: line_no,
                            reason: "invalid workspace count".into(),
                        }
                    })?;
            }
            "ry" => circuit.gates.push(QubitGate::Ry {
                target: get_usize("q")?,
                theta: get_f64("theta")?,
            }),
            "x" => circuit.gates.push(QubitGate::X {
                target: get_usize("q")?,
            }),
            "mcry" => circuit.gates.push(QubitGate::MultiControlledRy {
                controls: get_controls("ctrls")?,
                target: get_usize("tgt")?,
                theta: get_f64("theta")?,
            }),
            "mcx" => circuit.gates.push(QubitGate::MultiControlledX {
                controls: get_controls("ctrls")?,
                target: get_usize("tgt")?,
            }),
            "selectz" => circuit.gates.push(QubitGate::SelectZ {
                controls: get_controls("ctrls")?,
                target: get_usize("tgt")?,
            }),
            "reflect" => circuit.gates.push(QubitGate::SelectReflect {
                select: get_controls("sel")?,
                marked: get_controls("marked")?,
            }),
            "prep" => circuit.gates.push(QubitGate::AnsatzPrep {
                amps: [get_f64("a")?, get_f64("b")?, get_f64("c")?, get_f64("d")?],
            }),
            "unprep" => circuit.gates.push(QubitGate::AnsatzUnprep {
                amps: [get_f64("a")?, get_f64("b")?, get_f64("c")?, get_f64("d")?],
            }),
            "sqexact" => circuit.gates.push(QubitGate::SqueezeExact {
                cond: get_controls("cond")?,
                t: get_f64("t")?,
                sign: match get("sign")? {
                    "+" => Sign::Plus,
                    "-" => Sign::Minus,
                    other => {
                        return Err(CompileError::Parse {
                            line: line_no,
                            reason: format!("invalid sign `{other}`"),
                        })
                    }
                },
            }),
            "postselect" => circuit.postselect_points.push(PostselectPoint {
                after_gate: circuit.gates.len(),
                gamma: get_f64("gamma")?,
            }),
            other => {
                return Err(CompileError::Parse {
                    line: line_no,
                    reason: format!("unknown gate `{other}`"),
                })
            }
        }
    }
    qc.ok_or(CompileError::Parse {
        line: 0,
        reason: "empty input: expected `qubits N` header".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lcu_coefficients_examples() {
        let c = lcu_coefficients(0.0, Sign::Plus).unwrap();
        assert_eq!((c.a, c.b, c.c, c.d, c.gamma), (1.0, 0.0, 0.0, 0.0, 1.0));

        let c = lcu_coefficients(0.1, Sign::Plus).unwrap();
        assert_abs_diff_eq!(c.a, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(c.b, 1.0 / 12.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.c, 1.0 / 6.0, epsilon = 1e-15);
        assert_eq!(c.d, 0.0);
        assert_abs_diff_eq!(c.gamma, 5.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn lcu_coefficients_sum_to_one_and_stay_nonnegative() {
        for sign in [Sign::Plus, Sign::Minus] {
            for i in 0..100 {
                let t = i as f64 / 100.0;
                let c = lcu_coefficients(t, sign).unwrap();
                assert_abs_diff_eq!(c.a + c.b + c.c + c.d, 1.0, epsilon = 1e-14);
                assert!(c.a >= 0.0 && c.b >= 0.0 && c.c >= 0.0 && c.d >= 0.0);
                assert!(c.c == 0.0 || c.d == 0.0);
            }
        }
        assert!(matches!(
            lcu_coefficients(1.0, Sign::Plus),
            Err(CompileError::SqueezeTimeOutOfRange(_))
        ));
        assert!(matches!(
            lcu_coefficients(-0.1, Sign::Plus),
            Err(CompileError::SqueezeTimeOutOfRange(_))
        ));
    }

    #[test]
    fn phase_gate_controls_follow_register_bits() {
        // Mode 6 has register value 5 = 101b: bits (1, 2, 3) = (1, 0, 1).
        let gates = compile_phase(6, 0.3, 3);
        assert_eq!(gates.len(), 1);
        match &gates[0] {
            QubitGate::MultiControlledRy {
                controls,
                target,
                theta,
            } => {
                assert_eq!(controls, &vec![(1, 1), (2, 0), (3, 1)]);
                assert_eq!(*target, 0);
                assert_abs_diff_eq!(*theta, -1.2, epsilon = 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn beamsplitter_structure_for_far_modes() {
        // Modes 1 and 7: registers 0 and 6 differ in bits {2, 3}; d1 = 2.
        let gates = compile_beamsplitter(1, 7, 0.5, 3).unwrap();
        // No basis-flip X (bit 2 of register 0 is 0), one C1 (bit 3 of
        // register 6 is 1), the rotation, and the mirror C1.
        assert_eq!(gates.len(), 3);
        match &gates[1] {
            QubitGate::MultiControlledRy {
                controls,
                target,
                theta,
            } => {
                assert_eq!(*target, 2);
                assert_eq!(controls, &vec![(1, 0), (3, 0)]);
                assert_abs_diff_eq!(*theta, 2.0, epsilon = 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            gates[0],
            QubitGate::MultiControlledX {
                controls: vec![(2, 1)],
                target: 3
            }
        );
        assert_eq!(gates[0], gates[2]);
    }

    #[test]
    fn beamsplitter_single_differing_bit_is_one_rotation() {
        let gates = compile_beamsplitter(1, 2, 0.5, 3).unwrap();
        assert_eq!(gates.len(), 1);
        match &gates[0] {
            QubitGate::MultiControlledRy {
                controls, target, ..
            } => {
                assert_eq!(*target, 1);
                assert_eq!(controls, &vec![(2, 0), (3, 0)]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            compile_beamsplitter(3, 3, 0.1, 2),
            Err(CompileError::BeamsplitterModesEqual)
        ));
    }

    #[test]
    fn beamsplitter_never_touches_symplectic_qubit() {
        for (m, mp) in [(1, 7), (2, 5), (3, 4), (1, 8)] {
            for g in compile_beamsplitter(m, mp, 0.3, 3).unwrap() {
                assert!(!g.support().contains(&0), "{g:?} touches qubit 0");
            }
        }
    }

    #[test]
    fn global_gates_use_reduced_controls() {
        let mut c = GbCircuit::new(8);
        c.push(GbGate::GlobalPhase {
            cond: BitCondition::new(vec![(1, 1), (3, 0)]),
            t: 0.2,
        });
        c.push(GbGate::GlobalBeamsplitter {
            cond: BitCondition::new(vec![(3, 0)]),
            l: 1,
            t: 0.4,
        });
        let qc = compile(&c, &CompileOptions::default()).unwrap();
        assert_eq!(qc.gates.len(), 2);
        assert_eq!(
            qc.gates[0],
            QubitGate::MultiControlledRy {
                controls: vec![(1, 1), (3, 0)],
                target: 0,
                theta: -0.8,
            }
        );
        assert_eq!(
            qc.gates[1],
            QubitGate::MultiControlledRy {
                controls: vec![(3, 0)],
                target: 1,
                theta: 1.6,
            }
        );
    }

    #[test]
    fn empty_condition_beamsplitter_is_uncontrolled_rotation() {
        let mut c = GbCircuit::new(8);
        c.push(GbGate::GlobalBeamsplitter {
            cond: BitCondition::all_modes(),
            l: 2,
            t: 0.25,
        });
        let qc = compile(&c, &CompileOptions::default()).unwrap();
        assert_eq!(
            qc.gates[0],
            QubitGate::MultiControlledRy {
                controls: vec![],
                target: 2,
                theta: 1.0,
            }
        );
    }

    #[test]
    fn displacement_is_rejected_with_gate_index() {
        let mut c = GbCircuit::new(4);
        c.push(GbGate::Phase { m: 1, t: 0.1 });
        c.push(GbGate::Displacement {
            m: 1,
            dq: 1.0,
            dp: 0.0,
        });
        match compile(&c, &CompileOptions::default()) {
            Err(CompileError::AtGate { index, source }) => {
                assert_eq!(index, 1);
                assert!(matches!(*source, CompileError::DisplacementUnsupported));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn squeeze_splits_into_lcu_blocks() {
        let mut c = GbCircuit::new(4);
        c.push(GbGate::Squeeze {
            m: 3,
            t: 0.12,
            sign: Sign::Plus,
        });
        let qc = compile(&c, &CompileOptions::default()).unwrap();
        assert_eq!(qc.ancillas, 2);
        assert_eq!(qc.postselect_points.len(), 3); // ceil(0.12 / 0.05)
                                                   // Each block: prep, reflect, selectz, unprep.
        assert_eq!(qc.gates.len(), 12);
        assert_eq!(qc.postselect_points[0].after_gate, 4);
        let gamma = 1.0 / (1.0 + 2.0 * 0.04);
        assert_abs_diff_eq!(qc.postselect_points[0].gamma, gamma, epsilon = 1e-15);
    }

    #[test]
    fn negative_squeeze_time_flips_sign() {
        let mut c = GbCircuit::new(2);
        c.push(GbGate::Squeeze {
            m: 1,
            t: -0.03,
            sign: Sign::Plus,
        });
        let qc = compile(&c, &CompileOptions::default()).unwrap();
        // Sign minus routes the select-Z through the d-term.
        match &qc.gates[2] {
            QubitGate::SelectZ { controls, target } => {
                assert!(controls.contains(&(0, 0)));
                assert_eq!(*target, 3); // a2 on n = 1
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn exact_mode_emits_squeeze_segments() {
        let mut c = GbCircuit::new(4);
        c.push(GbGate::GlobalSqueeze {
            cond: BitCondition::new(vec![(2, 1)]),
            t: 0.4,
            sign: Sign::Minus,
        });
        let opts = CompileOptions {
            squeeze_mode: SqueezeMode::Exact,
            ..CompileOptions::default()
        };
        let qc = compile(&c, &opts).unwrap();
        assert_eq!(qc.ancillas, 0);
        assert_eq!(
            qc.gates,
            vec![QubitGate::SqueezeExact {
                cond: vec![(2, 1)],
                t: 0.4,
                sign: Sign::Minus,
            }]
        );
    }

    #[test]
    fn ansatz_prep_matrix_is_orthogonal_with_given_first_column() {
        let coeffs = lcu_coefficients(0.07, Sign::Minus).unwrap();
        let amps = coeffs.amplitudes();
        let u = ansatz_prep_matrix(amps);
        for (i, row) in u.iter().enumerate() {
            assert_abs_diff_eq!(u[i][0], amps[i], epsilon = 1e-15);
            for (j, _) in row.iter().enumerate() {
                let dot: f64 = (0..4).map(|k| u[k][i] * u[k][j]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(dot, expected, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn qubit_circuit_text_round_trip() {
        let mut c = GbCircuit::new(8);
        c.push(GbGate::Phase { m: 6, t: 0.3 });
        c.push(GbGate::Beamsplitter {
            m: 1,
            mp: 7,
            t: 0.5,
        });
        c.push(GbGate::Squeeze {
            m: 3,
            t: 0.1,
            sign: Sign::Plus,
        });
        let qc = compile(&c, &CompileOptions::default()).unwrap();
        let text = serialize_qubit_circuit(&qc);
        let back = parse_qubit_circuit(&text).unwrap();
        assert_eq!(qc, back);
    }

    #[test]
    fn invalid_circuit_fails_compile() {
        let mut c = GbCircuit::new(4);
        c.push(GbGate::Phase { m: 9, t: 0.1 });
        assert!(matches!(
            compile(&c, &CompileOptions::default()),
            Err(CompileError::InvalidCircuit(_))
        ));
    }
}
