//! Real-amplitude statevector backend.
//!
//! States live on `n + 1` qubits: amplitude index `s·M + r` holds the
//! q-component (`s = 0`) or p-component (`s = 1`) of mode `r + 1`, so the
//! symplectic qubit is index bit `n` and register bit `k` is index bit
//! `k - 1`. Heralded circuits extend the state with two ancilla qubits on
//! top (index bits `n+1` for a2 and `n+2` for a1), giving four contiguous
//! blocks ordered by ancilla state `|00⟩, |01⟩, |10⟩, |11⟩`.
//!
//! Every gate in the compiled set is real, so amplitudes are plain `f64`.
//! Kernels either enumerate exactly the touched amplitude pairs (bit
//! scatter, used when the control set leaves few free bits) or scan the
//! array in contiguous chunks in parallel; both paths are deterministic
//! regardless of thread count, and norms are reduced over fixed-size chunks
//! so reruns are bit-identical.

use rayon::prelude::*;
use std::io::{Read, Write};
use thiserror::Error;

use crate::compile::{
    ansatz_prep_matrix, mat4_transpose, LcuBlock, PostselectPoint, QubitCircuit, QubitGate,
};
use crate::ir::Sign;
use crate::symplectic::{CovarianceMatrix, MomentVector, SymplecticError};
use nalgebra::DMatrix;

/// Default dense-state ceiling: `2^27` amplitudes is 1 GiB of `f64`.
pub const DEFAULT_CAPACITY_QUBITS: usize = 27;
/// Hard ceiling accepted from configuration.
pub const MAX_CAPACITY_QUBITS: usize = 30;
/// Below this many touched amplitudes kernels stay sequential.
const PARALLEL_MIN: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cannot encode an all-zero moment vector")]
    ZeroVector,
    #[error("mode count {0} is not a power of two")]
    ModesNotPowerOfTwo(usize),
    #[error("state of {qubits} qubits exceeds the dense capacity of {capacity} (set a higher limit explicitly if you have the memory)")]
    CapacityExceeded { qubits: usize, capacity: usize },
    #[error("qubit {qubit} out of range for a circuit on {total} qubits")]
    QubitOutOfRange { qubit: usize, total: usize },
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("postselection success probability underflowed")]
    SuccessProbabilityZero,
    #[error(
        "covariance evolution requires exact squeeze segments; heralded LCU gates are unsupported"
    )]
    HeraldedSigmaUnsupported,
    #[error("ancilla qubits hold residual amplitude at the end of the circuit")]
    AncillasNotCleared,
    #[error("gate {index}: {source}")]
    AtGate {
        index: usize,
        #[source]
        source: Box<SimError>,
    },
    #[error("bad snapshot: {0}")]
    BadSnapshot(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Symplectic(#[from] SymplecticError),
}

/// Unit-norm real statevector plus the physical scale of the encoded
/// moments and the log of the accumulated postselection probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledState {
    amps: Vec<f64>,
    qubits: usize,
    scale: f64,
    success_log: f64,
}

impl ScaledState {
    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn modes(&self) -> usize {
        1 << (self.qubits - 1)
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amps
    }

    /// Physical `ℓ2` norm of the encoded moment vector.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Log of the product of heralding success probabilities so far.
    pub fn success_log(&self) -> f64 {
        self.success_log
    }

    pub fn norm(&self) -> f64 {
        l2_norm_sq(&self.amps).sqrt()
    }
}

/// Normalized covariance encoding `ϱ_σ ∝ σ`: `matrix` has unit trace and
/// `trace_scale` carries `tr σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaState {
    matrix: DMatrix<f64>,
    trace_scale: f64,
}

impl SigmaState {
    pub fn from_covariance(sigma: &CovarianceMatrix) -> Self {
        let tr = sigma.as_matrix().trace();
        Self {
            matrix: sigma.as_matrix() / tr,
            trace_scale: tr,
        }
    }

    /// The maximally mixed encoding of the coherent-state covariance `I/2`.
    pub fn coherent(modes: usize) -> Self {
        Self::from_covariance(&CovarianceMatrix::coherent(modes))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn trace_scale(&self) -> f64 {
        self.trace_scale
    }

    /// The physical covariance matrix `trace_scale · matrix`.
    pub fn covariance(&self) -> Result<CovarianceMatrix, SimError> {
        Ok(CovarianceMatrix::new(&self.matrix * self.trace_scale)?)
    }
}

/// Bit positions of qubit ids inside an amplitude index.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    ancillas: usize,
    bits: usize,
}

impl Layout {
    fn base(qubits: usize) -> Self {
        Self {
            n: qubits - 1,
            ancillas: 0,
            bits: qubits,
        }
    }

    fn extended(qubits: usize, ancillas: usize, workspace: usize) -> Self {
        Self {
            n: qubits - 1,
            ancillas,
            bits: qubits + ancillas + workspace,
        }
    }

    fn bit(&self, qubit: usize) -> Result<usize, SimError> {
        let pos = if qubit == 0 {
            self.n
        } else if qubit <= self.n {
            qubit - 1
        } else if self.ancillas == 2 && qubit == self.n + 1 {
            self.n + 2 // a1 is the high ancilla bit
        } else if self.ancillas == 2 && qubit == self.n + 2 {
            self.n + 1
        } else {
            // workspace qubits map to the remaining high bits in id order
            qubit + self.ancillas.saturating_sub(2)
        };
        if pos >= self.bits {
            return Err(SimError::QubitOutOfRange {
                qubit,
                total: self.bits,
            });
        }
        Ok(pos)
    }

    fn mask_of(&self, controls: &[(usize, u8)]) -> Result<(usize, usize), SimError> {
        let mut mask = 0usize;
        let mut val = 0usize;
        for &(q, pol) in controls {
            let b = self.bit(q)?;
            mask |= 1 << b;
            if pol == 1 {
                val |= 1 << b;
            }
        }
        Ok((mask, val))
    }
}

/// Encodes a moment vector as `Σ q_m|0⟩|m⟩ + p_m|1⟩|m⟩`, normalized, with
/// the norm kept in `scale`.
pub fn encode_mean(z: &MomentVector) -> Result<ScaledState, SimError> {
    encode_mean_capped(z, DEFAULT_CAPACITY_QUBITS)
}

/// [`encode_mean`] with an explicit qubit capacity.
pub fn encode_mean_capped(z: &MomentVector, capacity: usize) -> Result<ScaledState, SimError> {
    let modes = z.modes();
    if !modes.is_power_of_two() || modes == 0 {
        return Err(SimError::ModesNotPowerOfTwo(modes));
    }
    let qubits = modes.trailing_zeros() as usize + 1;
    if qubits > capacity.min(MAX_CAPACITY_QUBITS) {
        return Err(SimError::CapacityExceeded {
            qubits,
            capacity: capacity.min(MAX_CAPACITY_QUBITS),
        });
    }
    let norm = z.norm();
    if norm == 0.0 {
        return Err(SimError::ZeroVector);
    }
    let amps = z.as_slice().iter().map(|x| x / norm).collect();
    Ok(ScaledState {
        amps,
        qubits,
        scale: norm,
        success_log: 0.0,
    })
}

/// Recovers the physical moment vector `scale · amplitudes`.
pub fn decode_mean(s: &ScaledState) -> MomentVector {
    MomentVector::new(s.amps.iter().map(|a| a * s.scale).collect())
        .expect("scaled state amplitudes are finite")
}

/// Applies one gate to a base (ancilla-free) state. Squeeze segments
/// renormalize and fold the norm change into `scale`.
pub fn apply_gate(state: &mut ScaledState, gate: &QubitGate) -> Result<(), SimError> {
    let layout = Layout::base(state.qubits);
    match gate {
        QubitGate::SqueezeExact { cond, t, sign } => {
            apply_squeeze_exact_cond(state, cond, *t, *sign)
        }
        QubitGate::AnsatzPrep { .. } | QubitGate::AnsatzUnprep { .. } => {
            Err(SimError::QubitOutOfRange {
                qubit: state.qubits,
                total: state.qubits,
            })
        }
        _ => unitary_kernel(&mut state.amps, &layout, gate),
    }
}

/// Exact squeeze on mode `m` (1-based): multiplies the q (p) amplitudes by
/// `e^{±2t}` (`e^{∓2t}`), renormalizes, and scales the physical norm.
pub fn apply_squeeze_exact(
    state: &mut ScaledState,
    m: usize,
    t: f64,
    sign: Sign,
) -> Result<(), SimError> {
    let n = state.qubits - 1;
    let cond: Vec<(usize, u8)> = (1..=n)
        .map(|k| (k, (((m - 1) >> (k - 1)) & 1) as u8))
        .collect();
    apply_squeeze_exact_cond(state, &cond, t, sign)
}

/// Exact squeeze on every register state matching `cond`.
pub fn apply_squeeze_exact_cond(
    state: &mut ScaledState,
    cond: &[(usize, u8)],
    t: f64,
    sign: Sign,
) -> Result<(), SimError> {
    let layout = Layout::base(state.qubits);
    squeeze_kernel(&mut state.amps, &layout, cond, t, sign)?;
    let norm = l2_norm_sq(&state.amps).sqrt();
    if norm == 0.0 {
        return Err(SimError::SuccessProbabilityZero);
    }
    let inv = 1.0 / norm;
    state.amps.iter_mut().for_each(|a| *a *= inv);
    state.scale *= norm;
    Ok(())
}

/// Applies one heralded LCU block: extends with the two ancillas, runs the
/// block gates, postselects `|00⟩`, and updates `scale`, `success_log`.
pub fn apply_lcu_block(state: &ScaledState, block: &LcuBlock) -> Result<ScaledState, SimError> {
    let mut qc = QubitCircuit::new(state.qubits);
    qc.ancillas = 2;
    qc.gates = block.gates.clone();
    qc.postselect_points = vec![PostselectPoint {
        after_gate: block.gates.len(),
        gamma: block.coeffs.gamma,
    }];
    let (out, _) = run(&qc, state, &RunOptions::default())?;
    Ok(out)
}

/// One sampled point of the `run` trajectory: the signed amplitude at index
/// 0, which is `⟨q_1⟩/‖z‖` (and `⟨q_1⟩/x` for the displaced-vacuum input).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub gate_index: usize,
    pub overlap: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Record a trajectory point every this many gates.
    pub trace_every: Option<usize>,
    /// Dense capacity guard in qubits (ancillas add a factor 4 on top).
    pub capacity_qubits: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            trace_every: None,
            capacity_qubits: DEFAULT_CAPACITY_QUBITS,
        }
    }
}

/// Runs a compiled circuit on a state, heralding at every postselect point.
///
/// Returns the final state and the trajectory of the index-0 amplitude.
pub fn run(
    qc: &QubitCircuit,
    s0: &ScaledState,
    opts: &RunOptions,
) -> Result<(ScaledState, Vec<TrajectoryPoint>), SimError> {
    if s0.qubits != qc.base_qubits {
        return Err(SimError::DimensionMismatch {
            expected: qc.base_qubits,
            got: s0.qubits,
        });
    }
    if qc.base_qubits > opts.capacity_qubits.min(MAX_CAPACITY_QUBITS) {
        return Err(SimError::CapacityExceeded {
            qubits: qc.base_qubits,
            capacity: opts.capacity_qubits.min(MAX_CAPACITY_QUBITS),
        });
    }
    let layout = Layout::extended(qc.base_qubits, qc.ancillas, qc.workspace);
    let base_len = 1usize << qc.base_qubits;
    let mut buf = vec![0.0; 1usize << layout.bits];
    buf[..base_len].copy_from_slice(&s0.amps);

    let mut scale = s0.scale;
    let mut success_log = s0.success_log;
    let mut trajectory = vec![TrajectoryPoint {
        gate_index: 0,
        overlap: buf[0],
    }];
    let mut points = qc.postselect_points.iter().peekable();

    for (i, gate) in qc.gates.iter().enumerate() {
        while let Some(p) = points.peek() {
            if p.after_gate == i {
                let p = points.next().unwrap();
                let sp = postselect(&mut buf, &layout)?;
                success_log += sp.ln();
                scale *= sp.sqrt() / p.gamma;
            } else {
                break;
            }
        }
        match gate {
            QubitGate::SqueezeExact { cond, t, sign } => {
                squeeze_kernel(&mut buf, &layout, cond, *t, *sign).map_err(|e| at_gate(i, e))?;
                let norm = l2_norm_sq(&buf).sqrt();
                if norm == 0.0 {
                    return Err(at_gate(i, SimError::SuccessProbabilityZero));
                }
                let inv = 1.0 / norm;
                buf.iter_mut().for_each(|a| *a *= inv);
                scale *= norm;
            }
            _ => unitary_kernel(&mut buf, &layout, gate).map_err(|e| at_gate(i, e))?,
        }
        if let Some(every) = opts.trace_every {
            if every > 0 && (i + 1) % every == 0 {
                trajectory.push(TrajectoryPoint {
                    gate_index: i + 1,
                    overlap: buf[0],
                });
            }
        }
    }
    for p in points {
        let sp = postselect(&mut buf, &layout)?;
        success_log += sp.ln();
        scale *= sp.sqrt() / p.gamma;
    }
    if trajectory.last().map(|t| t.gate_index) != Some(qc.gates.len()) && !qc.gates.is_empty() {
        trajectory.push(TrajectoryPoint {
            gate_index: qc.gates.len(),
            overlap: buf[0],
        });
    }

    // Contract ancilla/workspace bits back to the base state.
    let residual: f64 = l2_norm_sq(&buf[base_len..]);
    if residual > 1e-18 {
        return Err(SimError::AncillasNotCleared);
    }
    let amps = buf[..base_len].to_vec();
    Ok((
        ScaledState {
            amps,
            qubits: qc.base_qubits,
            scale,
            success_log,
        },
        trajectory,
    ))
}

fn at_gate(index: usize, source: SimError) -> SimError {
    SimError::AtGate {
        index,
        source: Box::new(source),
    }
}

/// Projects the ancillas onto `|00⟩`, renormalizes, and returns the success
/// probability.
fn postselect(buf: &mut [f64], layout: &Layout) -> Result<f64, SimError> {
    let block = 1usize << (layout.n + 1);
    let kept: f64 = l2_norm_sq(&buf[..block]);
    let total: f64 = l2_norm_sq(buf);
    if total == 0.0 || kept / total < 1e-300 {
        return Err(SimError::SuccessProbabilityZero);
    }
    let p = kept / total;
    let inv = 1.0 / kept.sqrt();
    buf[..block].iter_mut().for_each(|a| *a *= inv);
    buf[block..].iter_mut().for_each(|a| *a = 0.0);
    Ok(p)
}

/// Evolves a covariance encoding through a circuit of unitary gates and
/// exact squeeze segments: `σ' = Q σ Qᵀ`, where `Q` is the circuit's linear
/// phase-space map (orthogonal for unitary segments, symmetric for squeeze
/// segments, so this is the correct conjugation for both classes).
pub fn evolve_sigma(qc: &QubitCircuit, sigma: &SigmaState) -> Result<SigmaState, SimError> {
    if qc.ancillas != 0
        || qc.gates.iter().any(|g| {
            matches!(
                g,
                QubitGate::AnsatzPrep { .. }
                    | QubitGate::AnsatzUnprep { .. }
                    | QubitGate::SelectZ { .. }
                    | QubitGate::SelectReflect { .. }
            )
        })
    {
        return Err(SimError::HeraldedSigmaUnsupported);
    }
    let dim = 1usize << qc.base_qubits;
    if sigma.matrix.nrows() != dim {
        return Err(SimError::DimensionMismatch {
            expected: dim,
            got: sigma.matrix.nrows(),
        });
    }
    let layout = Layout::base(qc.base_qubits);
    let apply_columns = |m: &DMatrix<f64>| -> Result<DMatrix<f64>, SimError> {
        let mut out = m.clone();
        for mut col in out.column_iter_mut() {
            let buf = col.as_mut_slice();
            for (i, gate) in qc.gates.iter().enumerate() {
                match gate {
                    QubitGate::SqueezeExact { cond, t, sign } => {
                        squeeze_kernel(buf, &layout, cond, *t, *sign).map_err(|e| at_gate(i, e))?;
                    }
                    _ => unitary_kernel(buf, &layout, gate).map_err(|e| at_gate(i, e))?,
                }
            }
        }
        Ok(out)
    };
    // Q σ Qᵀ = (Q (Q σ)ᵀ)ᵀ: two column passes with a transpose between.
    let half = apply_columns(&sigma.matrix)?;
    let full = apply_columns(&half.transpose())?.transpose();
    let sym = (&full + full.transpose()) * 0.5;
    let tr = sym.trace();
    Ok(SigmaState {
        matrix: &sym / tr,
        trace_scale: sigma.trace_scale * tr,
    })
}

/// Dense matrix of the circuit's linear action on the base state (columns =
/// images of basis vectors). Unitary for gate-only circuits; includes the
/// raw nonunitary scaling of exact squeeze segments. Heralded gates are
/// rejected; capped at 12 qubits.
///
/// Workspace qubits (from [`crate::compile::decompose_multicontrols`]) are
/// simulated in the `|0⟩` state and must return to it: any leaked amplitude
/// is an error.
pub fn circuit_matrix(qc: &QubitCircuit) -> Result<DMatrix<f64>, SimError> {
    if qc.base_qubits + qc.workspace > 12 {
        return Err(SimError::CapacityExceeded {
            qubits: qc.base_qubits + qc.workspace,
            capacity: 12,
        });
    }
    if qc.ancillas != 0 {
        return Err(SimError::HeraldedSigmaUnsupported);
    }
    let dim = 1usize << qc.base_qubits;
    let layout = Layout::extended(qc.base_qubits, 0, qc.workspace);
    let mut out = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..dim {
        let mut buf = vec![0.0; 1usize << layout.bits];
        buf[j] = 1.0;
        for (i, gate) in qc.gates.iter().enumerate() {
            match gate {
                QubitGate::SqueezeExact { cond, t, sign } => {
                    squeeze_kernel(&mut buf, &layout, cond, *t, *sign).map_err(|e| at_gate(i, e))?
                }
                _ => unitary_kernel(&mut buf, &layout, gate).map_err(|e| at_gate(i, e))?,
            }
        }
        if l2_norm_sq(&buf[dim..]) > 1e-20 {
            return Err(SimError::AncillasNotCleared);
        }
        for (i, v) in buf[..dim].iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    Ok(out)
}

/// Dense matrix of the heralded operator a single LCU block applies to the
/// base state (the `|00⟩ -> |00⟩` ancilla block, unnormalized): equals
/// `γ (1 + t ΩK)` for a squeeze block. Capped at 10 base qubits.
pub fn lcu_block_operator(block: &LcuBlock, base_qubits: usize) -> Result<DMatrix<f64>, SimError> {
    if base_qubits > 10 {
        return Err(SimError::CapacityExceeded {
            qubits: base_qubits,
            capacity: 10,
        });
    }
    let layout = Layout::extended(base_qubits, 2, 0);
    let dim = 1usize << base_qubits;
    let mut out = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..dim {
        let mut buf = vec![0.0; dim << 2];
        buf[j] = 1.0;
        for gate in &block.gates {
            unitary_kernel(&mut buf, &layout, gate)?;
        }
        for (i, v) in buf[..dim].iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

fn ry_matrix(theta: f64) -> [f64; 4] {
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    [c, -s, s, c]
}

fn unitary_kernel(buf: &mut [f64], layout: &Layout, gate: &QubitGate) -> Result<(), SimError> {
    match gate {
        QubitGate::Ry { target, theta } => {
            pair_kernel(buf, layout.bit(*target)?, 0, 0, ry_matrix(*theta));
            Ok(())
        }
        QubitGate::X { target } => {
            pair_kernel(buf, layout.bit(*target)?, 0, 0, [0.0, 1.0, 1.0, 0.0]);
            Ok(())
        }
        QubitGate::MultiControlledRy {
            controls,
            target,
            theta,
        } => {
            let (mask, val) = layout.mask_of(controls)?;
            pair_kernel(buf, layout.bit(*target)?, mask, val, ry_matrix(*theta));
            Ok(())
        }
        QubitGate::MultiControlledX { controls, target } => {
            let (mask, val) = layout.mask_of(controls)?;
            pair_kernel(buf, layout.bit(*target)?, mask, val, [0.0, 1.0, 1.0, 0.0]);
            Ok(())
        }
        QubitGate::SelectZ { controls, target } => {
            let (mask, val) = layout.mask_of(controls)?;
            let tb = layout.bit(*target)?;
            phase_flip_kernel(buf, mask | (1 << tb), val | (1 << tb));
            Ok(())
        }
        QubitGate::SelectReflect { select, marked } => {
            let (smask, sval) = layout.mask_of(select)?;
            let (mmask, mval) = layout.mask_of(marked)?;
            reflect_kernel(buf, smask, sval, mmask, mval);
            Ok(())
        }
        QubitGate::AnsatzPrep { amps } => {
            ancilla_4x4_kernel(buf, layout, &ansatz_prep_matrix(*amps))
        }
        QubitGate::AnsatzUnprep { amps } => {
            ancilla_4x4_kernel(buf, layout, &mat4_transpose(&ansatz_prep_matrix(*amps)))
        }
        QubitGate::SqueezeExact { .. } => unreachable!("handled by callers"),
    }
}

/// Applies a real 2x2 to every amplitude pair split by `target_bit` whose
/// index matches `(mask, val)` on the control bits.
fn pair_kernel(buf: &mut [f64], target_bit: usize, mask: usize, val: usize, m: [f64; 4]) {
    debug_assert_eq!(mask & (1 << target_bit), 0);
    let bits = buf.len().trailing_zeros() as usize;
    let free: Vec<usize> = (0..bits)
        .filter(|b| *b != target_bit && mask & (1 << b) == 0)
        .collect();
    let pairs = 1usize << free.len();
    let tmask = 1usize << target_bit;
    if pairs < PARALLEL_MIN {
        for j in 0..pairs {
            let i0 = scatter(j, &free) | val;
            let i1 = i0 | tmask;
            let a0 = buf[i0];
            let a1 = buf[i1];
            buf[i0] = m[0] * a0 + m[1] * a1;
            buf[i1] = m[2] * a0 + m[3] * a1;
        }
    } else {
        // Contiguous blocks of size 2^(target_bit+1) hold both halves of
        // each pair, so chunked parallelism never crosses a pair.
        let block = tmask << 1;
        buf.par_chunks_mut(block)
            .enumerate()
            .for_each(|(c, chunk)| {
                let base = c * block;
                let (lo, hi) = chunk.split_at_mut(tmask);
                for k in 0..tmask {
                    let idx = base + k;
                    if idx & mask == val {
                        let a0 = lo[k];
                        let a1 = hi[k];
                        lo[k] = m[0] * a0 + m[1] * a1;
                        hi[k] = m[2] * a0 + m[3] * a1;
                    }
                }
            });
    }
}

/// Negates every amplitude whose index matches `(mask, val)`.
fn phase_flip_kernel(buf: &mut [f64], mask: usize, val: usize) {
    let bits = buf.len().trailing_zeros() as usize;
    let free: Vec<usize> = (0..bits).filter(|b| mask & (1 << b) == 0).collect();
    let count = 1usize << free.len();
    if count < PARALLEL_MIN {
        for j in 0..count {
            let i = scatter(j, &free) | val;
            buf[i] = -buf[i];
        }
    } else {
        buf.par_chunks_mut(PARALLEL_MIN)
            .enumerate()
            .for_each(|(c, chunk)| {
                let base = c * PARALLEL_MIN;
                for (k, a) in chunk.iter_mut().enumerate() {
                    if (base + k) & mask == val {
                        *a = -*a;
                    }
                }
            });
    }
}

/// Within the `select` subspace, negates amplitudes not matching `marked`.
fn reflect_kernel(buf: &mut [f64], smask: usize, sval: usize, mmask: usize, mval: usize) {
    let bits = buf.len().trailing_zeros() as usize;
    let free: Vec<usize> = (0..bits).filter(|b| smask & (1 << b) == 0).collect();
    let count = 1usize << free.len();
    if count < PARALLEL_MIN {
        for j in 0..count {
            let i = scatter(j, &free) | sval;
            if i & mmask != mval {
                buf[i] = -buf[i];
            }
        }
    } else {
        buf.par_chunks_mut(PARALLEL_MIN)
            .enumerate()
            .for_each(|(c, chunk)| {
                let base = c * PARALLEL_MIN;
                for (k, a) in chunk.iter_mut().enumerate() {
                    let i = base + k;
                    if i & smask == sval && i & mmask != mval {
                        *a = -*a;
                    }
                }
            });
    }
}

/// Raw (non-renormalizing) squeeze scaling: `e^{±2t}` on matching
/// q-amplitudes, `e^{∓2t}` on matching p-amplitudes.
fn squeeze_kernel(
    buf: &mut [f64],
    layout: &Layout,
    cond: &[(usize, u8)],
    t: f64,
    sign: Sign,
) -> Result<(), SimError> {
    let (mask, val) = layout.mask_of(cond)?;
    let sbit = 1usize << layout.n;
    let up = (2.0 * t * sign.factor()).exp();
    let down = (-2.0 * t * sign.factor()).exp();
    let bits = buf.len().trailing_zeros() as usize;
    let free: Vec<usize> = (0..bits)
        .filter(|b| *b != layout.n && mask & (1 << b) == 0)
        .collect();
    let count = 1usize << free.len();
    if count < PARALLEL_MIN {
        for j in 0..count {
            let i0 = scatter(j, &free) | val;
            buf[i0] *= up;
            buf[i0 | sbit] *= down;
        }
    } else {
        buf.par_chunks_mut(PARALLEL_MIN)
            .enumerate()
            .for_each(|(c, chunk)| {
                let base = c * PARALLEL_MIN;
                for (k, a) in chunk.iter_mut().enumerate() {
                    let i = base + k;
                    if i & mask == val {
                        *a *= if i & sbit == 0 { up } else { down };
                    }
                }
            });
    }
    Ok(())
}

/// Applies a real 4x4 across the four ancilla blocks.
///
/// The ancilla bits sit directly above the base bits, so within each
/// workspace group the blocks `|00⟩, |01⟩, |10⟩, |11⟩` are contiguous
/// slices of length `2^(n+1)`.
fn ancilla_4x4_kernel(buf: &mut [f64], layout: &Layout, u: &[[f64; 4]; 4]) -> Result<(), SimError> {
    if layout.ancillas != 2 {
        return Err(SimError::QubitOutOfRange {
            qubit: layout.n + 1,
            total: layout.n + 1,
        });
    }
    let block = 1usize << (layout.n + 1);
    for group in buf.chunks_mut(4 * block) {
        let (b0, rest) = group.split_at_mut(block);
        let (b1, rest) = rest.split_at_mut(block);
        let (b2, b3) = rest.split_at_mut(block);
        let mix = |a0: &mut f64, a1: &mut f64, a2: &mut f64, a3: &mut f64| {
            let v = [*a0, *a1, *a2, *a3];
            *a0 = u[0][0] * v[0] + u[0][1] * v[1] + u[0][2] * v[2] + u[0][3] * v[3];
            *a1 = u[1][0] * v[0] + u[1][1] * v[1] + u[1][2] * v[2] + u[1][3] * v[3];
            *a2 = u[2][0] * v[0] + u[2][1] * v[1] + u[2][2] * v[2] + u[2][3] * v[3];
            *a3 = u[3][0] * v[0] + u[3][1] * v[1] + u[3][2] * v[2] + u[3][3] * v[3];
        };
        if block < PARALLEL_MIN {
            for i in 0..block {
                let (mut a0, mut a1, mut a2, mut a3) = (b0[i], b1[i], b2[i], b3[i]);
                mix(&mut a0, &mut a1, &mut a2, &mut a3);
                b0[i] = a0;
                b1[i] = a1;
                b2[i] = a2;
                b3[i] = a3;
            }
        } else {
            b0.par_iter_mut()
                .zip_eq(b1.par_iter_mut())
                .zip_eq(b2.par_iter_mut())
                .zip_eq(b3.par_iter_mut())
                .for_each(|(((a0, a1), a2), a3)| mix(a0, a1, a2, a3));
        }
    }
    Ok(())
}

/// Deposits the bits of `j` into the positions listed in `free`.
#[inline]
fn scatter(j: usize, free: &[usize]) -> usize {
    let mut out = 0usize;
    for (b, pos) in free.iter().enumerate() {
        out |= ((j >> b) & 1) << pos;
    }
    out
}

/// Deterministic chunked sum of squares (fixed chunking, sequential
/// combine, parallel within).
pub(crate) fn l2_norm_sq(buf: &[f64]) -> f64 {
    if buf.len() < PARALLEL_MIN {
        buf.iter().map(|x| x * x).sum()
    } else {
        buf.par_chunks(PARALLEL_MIN)
            .map(|c| c.iter().map(|x| x * x).sum::<f64>())
            .collect::<Vec<_>>()
            .iter()
            .sum()
    }
}

// ---------------------------------------------------------------------------
// Snapshot format: 16-byte header (magic "GBQ1", u32 LE qubit count,
// f64 LE scale) followed by 2^qubits little-endian f64 amplitudes.
// The heralding log is not persisted.
// ---------------------------------------------------------------------------

const SNAPSHOT_MAGIC: &[u8; 4] = b"GBQ1";

pub fn save_state(state: &ScaledState, w: &mut impl Write) -> Result<(), SimError> {
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&(state.qubits as u32).to_le_bytes())?;
    w.write_all(&state.scale.to_le_bytes())?;
    for a in &state.amps {
        w.write_all(&a.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_state(r: &mut impl Read) -> Result<ScaledState, SimError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(SimError::BadSnapshot("wrong magic"));
    }
    let mut qb = [0u8; 4];
    r.read_exact(&mut qb)?;
    let qubits = u32::from_le_bytes(qb) as usize;
    if qubits == 0 || qubits > MAX_CAPACITY_QUBITS {
        return Err(SimError::BadSnapshot("qubit count out of range"));
    }
    let mut sc = [0u8; 8];
    r.read_exact(&mut sc)?;
    let scale = f64::from_le_bytes(sc);
    if !scale.is_finite() || scale <= 0.0 {
        return Err(SimError::BadSnapshot("scale must be positive"));
    }
    let len = 1usize << qubits;
    let mut amps = vec![0.0; len];
    let mut b = [0u8; 8];
    for a in amps.iter_mut() {
        r.read_exact(&mut b)?;
        *a = f64::from_le_bytes(b);
    }
    Ok(ScaledState {
        amps,
        qubits,
        scale,
        success_log: 0.0,
    })
}
