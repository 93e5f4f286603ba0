//! Bit-structured interferometers and the threshold decision problem.
//!
//! A bit-structured layer `(k, l, θ)` is a global beamsplitter acting on
//! every mode whose k-th register bit is 0, pairing modes that differ only
//! in bit `l`; it compiles to a single 0-controlled `Ry(θ)` between two
//! register qubits. The decision problem starts from the first mode
//! displaced in position by `x`, runs `L` layers, and asks whether
//! `⟨q_1⟩ > 2x/3` or `⟨q_1⟩ < x/3`, promised one of the two holds. The
//! promise is an input assumption: when it fails the outcome is reported
//! as indeterminate rather than silently rounded.
//!
//! The reverse compiler maps `{Rz, Ry, CRy}` circuits on `n` qubits to
//! global bit-structured GB gates on `2^n` modes, doubling each complex
//! amplitude into a (position, momentum) pair.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::compile::{compile, CompileError, CompileOptions};
use crate::ir::{BitCondition, GbCircuit, GbGate};
use crate::sim::{encode_mean_capped, run, RunOptions, SimError, TrajectoryPoint};
use crate::symplectic::MomentVector;

#[derive(Debug, Error)]
pub enum BqpError {
    #[error("layer bits must satisfy 1 <= k != l <= n, got k = {k}, l = {l} with n = {n}")]
    InvalidLayer { k: usize, l: usize, n: usize },
    #[error("displacement x must be positive, got {0}")]
    NonPositiveDisplacement(f64),
    #[error("state length {0} is not a power of two")]
    BadStateLength(usize),
    #[error("qubit {q} out of range 1..={n}")]
    QubitOutOfRange { q: usize, n: usize },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// One global beamsplitter layer of a bit-structured interferometer:
/// condition bit `k` at 0, pairing bit `l`, rotation angle `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitStructuredLayer {
    pub k: usize,
    pub l: usize,
    pub theta: f64,
}

/// A decision-problem instance on `2^n` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct Bqp1Instance {
    pub n: usize,
    pub layers: Vec<BitStructuredLayer>,
    pub x: f64,
}

impl Bqp1Instance {
    pub fn validate(&self) -> Result<(), BqpError> {
        if self.x <= 0.0 {
            return Err(BqpError::NonPositiveDisplacement(self.x));
        }
        for layer in &self.layers {
            if layer.k == 0
                || layer.l == 0
                || layer.k > self.n
                || layer.l > self.n
                || layer.k == layer.l
            {
                return Err(BqpError::InvalidLayer {
                    k: layer.k,
                    l: layer.l,
                    n: self.n,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Yes,
    No,
    /// The promise of the decision problem was violated.
    Indeterminate,
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Decision::Yes => write!(f, "YES"),
            Decision::No => write!(f, "NO"),
            Decision::Indeterminate => write!(f, "INDETERMINATE"),
        }
    }
}

/// Thresholds of the decision problem.
pub const YES_THRESHOLD: f64 = 2.0 / 3.0;
pub const NO_THRESHOLD: f64 = 1.0 / 3.0;

pub fn decide(q1_over_x: f64) -> Decision {
    if q1_over_x > YES_THRESHOLD {
        Decision::Yes
    } else if q1_over_x < NO_THRESHOLD {
        Decision::No
    } else {
        Decision::Indeterminate
    }
}

/// A layer as the GB gate it abbreviates.
pub fn layer_to_gb(layer: &BitStructuredLayer) -> GbGate {
    GbGate::GlobalBeamsplitter {
        cond: BitCondition::new(vec![(layer.k, 0)]),
        l: layer.l,
        t: layer.theta / 4.0,
    }
}

/// The interferometer as a GB circuit.
pub fn instance_to_circuit(inst: &Bqp1Instance) -> GbCircuit {
    let mut c = GbCircuit::new(1 << inst.n);
    for layer in &inst.layers {
        c.push(layer_to_gb(layer));
    }
    c
}

/// Outcome of a decision-problem run.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceOutcome {
    pub q1_over_x: f64,
    pub decision: Decision,
    pub trajectory: Vec<TrajectoryPoint>,
}

/// Simulates an instance from the displaced-vacuum input and applies the
/// thresholds. The trajectory samples `⟨q_1⟩/x` after every layer.
pub fn run_instance(inst: &Bqp1Instance, opts: &RunOptions) -> Result<InstanceOutcome, BqpError> {
    inst.validate()?;
    let circuit = instance_to_circuit(inst);
    let qc = compile(&circuit, &CompileOptions::default())?;
    let z0 = MomentVector::displaced_first_mode(1 << inst.n, inst.x);
    let s0 = encode_mean_capped(&z0, opts.capacity_qubits)?;
    let run_opts = RunOptions {
        trace_every: opts.trace_every.or(Some(1)),
        capacity_qubits: opts.capacity_qubits,
    };
    let (out, trajectory) = run(&qc, &s0, &run_opts)?;
    // The scale stays x for these unitary circuits, so the raw amplitude
    // at index 0 is exactly q_1/x.
    let q1_over_x = out.amplitudes()[0];
    Ok(InstanceOutcome {
        q1_over_x,
        decision: decide(q1_over_x),
        trajectory,
    })
}

/// Gate set of the reverse compiler. Qubits are numbered `1..=n` to match
/// the register-bit indices they map onto.
///
/// Conventions (fixed by [`simulate_unitary`], the module's reference
/// semantics): `Rz(τ) = diag(1, e^{iτ})`, `Ry(τ) = e^{-iτY/2}`, and `CRy`
/// applies `Ry(τ)` to `target` when `control` is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnitaryGate {
    Rz {
        q: usize,
        tau: f64,
    },
    Ry {
        q: usize,
        tau: f64,
    },
    CRy {
        control: usize,
        target: usize,
        tau: f64,
    },
}

/// Maps a `{Rz, Ry, CRy}` circuit on `n` qubits to global bit-structured
/// GB gates on `2^n` modes.
///
/// `Ry` and `CRy` are real and become global beamsplitters with `t = τ/4`.
/// `Rz(τ)` multiplies the bit-`k` = 1 amplitudes by `e^{iτ}`, i.e. rotates
/// their (q, p) pairs by `+τ`; the phase gate rotates (q, p) by `-2t`, so
/// the translation is a global phase gate with `t = -τ/2`.
pub fn reverse_compile(gates: &[UnitaryGate], n: usize) -> Result<Vec<GbGate>, BqpError> {
    let check = |q: usize| -> Result<(), BqpError> {
        if q == 0 || q > n {
            Err(BqpError::QubitOutOfRange { q, n })
        } else {
            Ok(())
        }
    };
    gates
        .iter()
        .map(|g| match *g {
            UnitaryGate::Rz { q, tau } => {
                check(q)?;
                Ok(GbGate::GlobalPhase {
                    cond: BitCondition::new(vec![(q, 1)]),
                    t: -tau / 2.0,
                })
            }
            UnitaryGate::Ry { q, tau } => {
                check(q)?;
                Ok(GbGate::GlobalBeamsplitter {
                    cond: BitCondition::all_modes(),
                    l: q,
                    t: tau / 4.0,
                })
            }
            UnitaryGate::CRy {
                control,
                target,
                tau,
            } => {
                check(control)?;
                check(target)?;
                if control == target {
                    return Err(BqpError::QubitOutOfRange { q: control, n });
                }
                Ok(GbGate::GlobalBeamsplitter {
                    cond: BitCondition::new(vec![(control, 1)]),
                    l: target,
                    t: tau / 4.0,
                })
            }
        })
        .collect()
}

/// Doubles a complex `n`-qubit state into moments on `2^n` modes:
/// `q_{r+1} = x·Re(ψ_r)`, `p_{r+1} = x·Im(ψ_r)`.
pub fn real_double(psi: &[Complex64], x: f64) -> Result<MomentVector, BqpError> {
    if !psi.len().is_power_of_two() || psi.is_empty() {
        return Err(BqpError::BadStateLength(psi.len()));
    }
    let mut entries = Vec::with_capacity(2 * psi.len());
    entries.extend(psi.iter().map(|a| x * a.re));
    entries.extend(psi.iter().map(|a| x * a.im));
    MomentVector::new(entries).map_err(|_| BqpError::BadStateLength(psi.len()))
}

/// The two-qubit `F(π/2)` move of the universality construction as a single
/// bit-structured layer: a 0-controlled `Ry(-π)` with control bit 2 and
/// target bit 1, which maps the doubled amplitudes `(α_00, α_01)` to
/// `(α_01, -α_00)` and leaves the rest alone.
pub fn f_gate_layers() -> Vec<BitStructuredLayer> {
    vec![BitStructuredLayer {
        k: 2,
        l: 1,
        theta: -std::f64::consts::PI,
    }]
}

/// Reference complex statevector simulation of a `{Rz, Ry, CRy}` circuit
/// from `|0…0⟩`; the independent oracle the real pipeline is tested
/// against. Qubit `k` is bit `k - 1` of the state index.
pub fn simulate_unitary(gates: &[UnitaryGate], n: usize) -> Result<Vec<Complex64>, BqpError> {
    let dim = 1usize << n;
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    psi[0] = Complex64::new(1.0, 0.0);
    let check = |q: usize| -> Result<usize, BqpError> {
        if q == 0 || q > n {
            Err(BqpError::QubitOutOfRange { q, n })
        } else {
            Ok(1usize << (q - 1))
        }
    };
    for g in gates {
        match *g {
            UnitaryGate::Rz { q, tau } => {
                let bit = check(q)?;
                let phase = Complex64::from_polar(1.0, tau);
                for (i, a) in psi.iter_mut().enumerate() {
                    if i & bit != 0 {
                        *a *= phase;
                    }
                }
            }
            UnitaryGate::Ry { q, tau } => {
                let bit = check(q)?;
                ry_pairs(&mut psi, bit, 0, tau);
            }
            UnitaryGate::CRy {
                control,
                target,
                tau,
            } => {
                let cbit = check(control)?;
                let tbit = check(target)?;
                ry_pairs(&mut psi, tbit, cbit, tau);
            }
        }
    }
    Ok(psi)
}

fn ry_pairs(psi: &mut [Complex64], tbit: usize, cbit: usize, tau: f64) {
    let c = (tau / 2.0).cos();
    let s = (tau / 2.0).sin();
    for i in 0..psi.len() {
        if i & tbit == 0 && (cbit == 0 || i & cbit != 0) {
            let j = i | tbit;
            let (a, b) = (psi[i], psi[j]);
            psi[i] = c * a - s * b;
            psi[j] = s * a + c * b;
        }
    }
}

/// Uniformly random layers (angles in `[-π, π]`), reproducible by seed.
pub fn random_instance(n: usize, num_layers: usize, x: f64, seed: u64) -> Bqp1Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = (0..num_layers)
        .map(|_| random_layer(&mut rng, n, std::f64::consts::PI))
        .collect();
    Bqp1Instance { n, layers, x }
}

fn random_layer(rng: &mut ChaCha8Rng, n: usize, max_abs_theta: f64) -> BitStructuredLayer {
    let k = rng.random_range(1..=n);
    let mut l = rng.random_range(1..=n);
    while l == k {
        l = rng.random_range(1..=n);
    }
    let theta = rng.random_range(-max_abs_theta..=max_abs_theta);
    BitStructuredLayer { k, l, theta }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantedKind {
    Yes,
    No,
}

/// Builds an instance whose answer is known by construction.
///
/// All layers carry small angles with total magnitude at most 0.4, so the
/// overlap with the initial state drifts by at most 0.2 from its value
/// after any prefix. A YES instance therefore ends above 0.8; a NO
/// instance opens with a `θ = π` kick that sends the overlap to exactly 0
/// (the initial state has no amplitude on the kicked partner index),
/// leaving the final value below 0.2.
pub fn planted_instance(
    n: usize,
    num_layers: usize,
    x: f64,
    seed: u64,
    kind: PlantedKind,
) -> Bqp1Instance {
    assert!(n >= 2, "planted instances need at least two register bits");
    assert!(num_layers >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = 0.4;
    let per_layer = budget / num_layers as f64;
    let mut layers: Vec<BitStructuredLayer> = (0..num_layers)
        .map(|_| random_layer(&mut rng, n, per_layer))
        .collect();
    if kind == PlantedKind::No {
        let k = rng.random_range(1..=n);
        let mut l = rng.random_range(1..=n);
        while l == k {
            l = rng.random_range(1..=n);
        }
        layers[0] = BitStructuredLayer {
            k,
            l,
            theta: std::f64::consts::PI,
        };
    }
    Bqp1Instance { n, layers, x }
}

/// Parses the instance text format: `n <int>`, `x <float>`, then
/// `layer k=<int> l=<int> theta=<float>` lines; `#` comments allowed.
pub fn parse_instance(text: &str) -> Result<Bqp1Instance, BqpError> {
    let mut n: Option<usize> = None;
    let mut x: Option<f64> = None;
    let mut layers = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().expect("non-empty");
        let fields: Vec<&str> = parts.collect();
        let err = |reason: String| BqpError::Parse {
            line: line_no,
            reason,
        };
        match head {
            "n" => {
                n = Some(
                    fields
                        .first()
                        .and_then(|f| f.parse().ok())
                        .ok_or_else(|| err("invalid n".into()))?,
                )
            }
            "x" => {
                x = Some(
                    fields
                        .first()
                        .and_then(|f| f.parse().ok())
                        .ok_or_else(|| err("invalid x".into()))?,
                )
            }
            "layer" => {
                let get = |key: &str| -> Result<f64, BqpError> {
                    fields
                        .iter()
                        .find_map(|f| f.strip_prefix(&format!("{key}=")))
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| BqpError::Parse {
                            line: line_no,
                            reason: format!("missing or invalid `{key}`"),
                        })
                };
                layers.push(BitStructuredLayer {
                    k: get("k")? as usize,
                    l: get("l")? as usize,
                    theta: get("theta")?,
                });
            }
            other => return Err(err(format!("unknown directive `{other}`"))),
        }
    }
    let inst = Bqp1Instance {
        n: n.ok_or(BqpError::Parse {
            line: 0,
            reason: "missing `n` header".into(),
        })?,
        layers,
        x: x.unwrap_or(1.0),
    };
    inst.validate()?;
    Ok(inst)
}

pub fn serialize_instance(inst: &Bqp1Instance) -> String {
    let mut out = format!("n {}\nx {}\n", inst.n, inst.x);
    for layer in &inst.layers {
        out.push_str(&format!(
            "layer k={} l={} theta={}\n",
            layer.k, layer.l, layer.theta
        ));
    }
    out
}

/// Parses the `{Rz, Ry, CRy}` circuit text format: `qubits <n>` then
/// `rz q=<int> tau=<float>` / `ry q=<int> tau=<float>` /
/// `cry ctrl=<int> tgt=<int> tau=<float>`.
pub fn parse_unitary_circuit(text: &str) -> Result<(usize, Vec<UnitaryGate>), BqpError> {
    let mut n: Option<usize> = None;
    let mut gates = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().expect("non-empty");
        let fields: Vec<&str> = parts.collect();
        let get = |key: &str| -> Result<f64, BqpError> {
            fields
                .iter()
                .find_map(|f| f.strip_prefix(&format!("{key}=")))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| BqpError::Parse {
                    line: line_no,
                    reason: format!("missing or invalid `{key}`"),
                })
        };
        match head {
            "qubits" => {
                n = Some(fields.first().and_then(|f| f.parse().ok()).ok_or_else(|| {
                    BqpError::Parse {
                        line: line_no,
                        reason: "invalid qubit count".into(),
                    }
                })?)
            }
            "rz" => gates.push(UnitaryGate::Rz {
                q: get("q")? as usize,
                tau: get("tau")?,
            }),
            "ry" => gates.push(UnitaryGate::Ry {
                q: get("q")? as usize,
                tau: get("tau")?,
            }),
            "cry" => gates.push(UnitaryGate::CRy {
                control: get("ctrl")? as usize,
                target: get("tgt")? as usize,
                tau: get("tau")?,
            }),
            other => {
                return Err(BqpError::Parse {
                    line: line_no,
                    reason: format!("unknown gate `{other}` (expected rz, ry, cry)"),
                })
            }
        }
    }
    Ok((
        n.ok_or(BqpError::Parse {
            line: 0,
            reason: "missing `qubits` header".into(),
        })?,
        gates,
    ))
}

pub fn serialize_unitary_circuit(n: usize, gates: &[UnitaryGate]) -> String {
    let mut out = format!("qubits {n}\n");
    for g in gates {
        match g {
            UnitaryGate::Rz { q, tau } => out.push_str(&format!("rz q={q} tau={tau}\n")),
            UnitaryGate::Ry { q, tau } => out.push_str(&format!("ry q={q} tau={tau}\n")),
            UnitaryGate::CRy {
                control,
                target,
                tau,
            } => out.push_str(&format!("cry ctrl={control} tgt={target} tau={tau}\n")),
        }
    }
    out
}

/// Runs the full reverse pipeline: double the initial state, reverse
/// compile, compile to qubits, simulate, and return `(q_1² + p_1²)/x²`,
/// which equals `|⟨0|ψ⟩|²` of the unitary circuit.
pub fn reverse_pipeline_overlap(gates: &[UnitaryGate], n: usize, x: f64) -> Result<f64, BqpError> {
    let mut psi0 = vec![Complex64::new(0.0, 0.0); 1 << n];
    psi0[0] = Complex64::new(1.0, 0.0);
    let z0 = real_double(&psi0, x)?;
    let gb = reverse_compile(gates, n)?;
    let mut circuit = GbCircuit::new(1 << n);
    for g in gb {
        circuit.push(g);
    }
    let qc = compile(&circuit, &CompileOptions::default())?;
    let s0 = encode_mean_capped(&z0, crate::sim::DEFAULT_CAPACITY_QUBITS)?;
    let (out, _) = run(&qc, &s0, &RunOptions::default())?;
    let z = crate::sim::decode_mean(&out);
    Ok((z.q(0) * z.q(0) + z.p(0) * z.p(0)) / (x * x))
}
