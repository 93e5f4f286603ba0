//! `symplectiq`: compile Gaussian bosonic circuits to qubit circuits,
//! simulate them, and cross-check against the dense phase-space oracle.
//!
//! Conventions shared by every subcommand:
//! - modes and bits are 1-based in all file formats; bit `k` of mode `m`
//!   is bit `k-1` of `m-1`;
//! - rotations follow `Ry(θ) = e^{-iθY/2}`; beamsplitters compile to
//!   `Ry(4t)`, phase gates to `Ry(-4t)` (the sign the propagator fixes);
//! - exit codes: 0 ok/YES, 1 NO, 2 usage or validation error,
//!   3 INDETERMINATE, 4 capacity exceeded.
//!
//! `SYMPLECTIQ_THREADS` caps kernel parallelism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use symplectiq_core::bqp::{
    self, parse_instance, parse_unitary_circuit, planted_instance, random_instance, run_instance,
    serialize_instance, Decision, PlantedKind,
};
use symplectiq_core::compile::{
    compile, parse_qubit_circuit, serialize_qubit_circuit, CompileOptions, SqueezeMode,
};
use symplectiq_core::ir::{self, generator_of, GbCircuit, GbGate};
use symplectiq_core::measure::{
    mode_energies, register_halves_fraction, sample_homodyne, sample_photon_counts,
    symplectic_fraction, total_photon_number,
};
use symplectiq_core::pauli::{classify_pauli_generator, pauli_decompose, TimeClass};
use symplectiq_core::sim::{
    decode_mean, encode_mean_capped, evolve_sigma, load_state, run, save_state, RunOptions,
    ScaledState, SigmaState, SimError, TrajectoryPoint,
};
use symplectiq_core::symplectic::{
    build_omega, classify_generator, evolve_mean, CovarianceMatrix, GeneratorKind, MomentVector,
};

const ANGLE_NOTE: &str = "Angle convention: Ry(theta) = exp(-i theta Y / 2); beamsplitters \
compile to Ry(4t) on the register, phase gates to Ry(-4t) on the symplectic qubit. \
Bit convention: bit k of mode m (both 1-based) is bit k-1 of m-1.";

#[derive(Parser)]
#[command(
    name = "symplectiq",
    about = "Gaussian bosonic circuit compiler and moment-space simulator",
    after_help = ANGLE_NOTE,
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CompileFlags {
    /// Maximum squeeze time per heralded LCU block, in (0, 0.1]
    #[arg(long, default_value_t = 0.05)]
    lcu_step: f64,
    /// Lower squeezes to exact nonunitary segments instead of LCU blocks
    #[arg(long)]
    exact_squeeze: bool,
}

impl CompileFlags {
    fn options(&self) -> CompileOptions {
        CompileOptions {
            lcu_step: self.lcu_step,
            squeeze_mode: if self.exact_squeeze {
                SqueezeMode::Exact
            } else {
                SqueezeMode::Lcu
            },
        }
    }
}

#[derive(Args, Clone)]
struct CapacityFlag {
    /// Dense statevector ceiling in qubits (max 30; ancillas add two)
    #[arg(long, default_value_t = 27)]
    capacity: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Translate a GB circuit file into a qubit circuit file.
    #[command(after_help = ANGLE_NOTE)]
    Compile {
        /// GB circuit text file
        input: PathBuf,
        /// Output path (stdout when omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        flags: CompileFlags,
    },
    /// Simulate a compiled qubit circuit on an encoded moment state.
    #[command(after_help = ANGLE_NOTE)]
    Run {
        /// Qubit circuit text file (as produced by `compile`)
        circuit: PathBuf,
        /// Initial state snapshot (binary); default: first mode displaced
        /// in position by 1
        #[arg(long)]
        state: Option<PathBuf>,
        /// Initial moment vector as comma-separated values (q-block then
        /// p-block), overriding --state
        #[arg(long)]
        mean: Option<String>,
        /// Write the final state snapshot here
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Write a trajectory CSV (step,gate_index,overlap)
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Sample the trajectory every N gates (0 disables)
        #[arg(long, default_value_t = 1)]
        trace_every: usize,
        #[command(flatten)]
        capacity: CapacityFlag,
    },
    /// Evolve moments with the dense phase-space oracle (M <= 64).
    #[command(after_help = ANGLE_NOTE)]
    Oracle {
        /// GB circuit text file
        input: PathBuf,
        /// Initial moment vector (comma-separated; default q_1 = 1)
        #[arg(long)]
        mean: Option<String>,
        /// Also compile + simulate and report the max abs deviation
        #[arg(long)]
        diff: bool,
        /// Evolve the coherent covariance both ways and print the deviation
        #[arg(long)]
        sigma: bool,
        #[command(flatten)]
        flags: CompileFlags,
    },
    /// Classify each gate generator (matrix brackets and Pauli form).
    Classify {
        /// GB circuit text file
        input: PathBuf,
    },
    /// Generate a bit-structured interferometer instance file.
    BqpGen {
        /// Register bits (modes = 2^n)
        #[arg(long)]
        n: usize,
        /// Number of layers
        #[arg(long)]
        layers: usize,
        /// Instance kind
        #[arg(long, value_parser = ["yes", "no", "random"])]
        kind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Position displacement of the first mode
        #[arg(long, default_value_t = 1.0)]
        x: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a decision-problem instance; exit 0 = YES, 1 = NO,
    /// 3 = INDETERMINATE (promise violated).
    #[command(after_help = ANGLE_NOTE)]
    BqpRun {
        /// Instance file (`n`, `x`, `layer k=.. l=.. theta=..`)
        instance: PathBuf,
        /// Write the per-layer trajectory CSV here
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        capacity: CapacityFlag,
    },
    /// Translate an {rz, ry, cry} circuit into global GB gates.
    #[command(after_help = ANGLE_NOTE)]
    ReverseCompile {
        /// Unitary circuit file (`qubits n`, then `rz q=.. tau=..`, ...)
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sample photon counts from an encoded state (JSON lines).
    Sample {
        /// State snapshot (binary)
        state: PathBuf,
        /// Number of independent draws (seeds seed..seed+draws)
        #[arg(long, default_value_t = 1)]
        draws: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restrict output to one 1-based mode
        #[arg(long)]
        mode: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fraction estimators, energies, and optional homodyne draws.
    Measure {
        /// State snapshot (binary)
        state: PathBuf,
        /// Homodyne: 1-based mode to measure
        #[arg(long)]
        homodyne_mode: Option<usize>,
        /// Homodyne basis angle (0 = position, pi/2 = momentum)
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = 1)]
        draws: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_thread_pool();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code_for(&err)
        }
    }
}

fn init_thread_pool() {
    if let Ok(v) = std::env::var("SYMPLECTIQ_THREADS") {
        if let Ok(threads) = v.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> ExitCode {
    for cause in err.chain() {
        if let Some(SimError::CapacityExceeded { .. }) = cause.downcast_ref::<SimError>() {
            return ExitCode::from(4);
        }
        if let Some(bqp::BqpError::Sim(SimError::CapacityExceeded { .. })) =
            cause.downcast_ref::<bqp::BqpError>()
        {
            return ExitCode::from(4);
        }
    }
    ExitCode::from(2)
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Compile {
            input,
            output,
            flags,
        } => cmd_compile(&input, output.as_deref(), &flags),
        Command::Run {
            circuit,
            state,
            mean,
            output,
            trace,
            trace_every,
            capacity,
        } => cmd_run(
            &circuit,
            state.as_deref(),
            mean.as_deref(),
            output.as_deref(),
            trace.as_deref(),
            trace_every,
            capacity.capacity,
        ),
        Command::Oracle {
            input,
            mean,
            diff,
            sigma,
            flags,
        } => cmd_oracle(&input, mean.as_deref(), diff, sigma, &flags),
        Command::Classify { input } => cmd_classify(&input),
        Command::BqpGen {
            n,
            layers,
            kind,
            seed,
            x,
            output,
        } => cmd_bqp_gen(n, layers, &kind, seed, x, output.as_deref()),
        Command::BqpRun {
            instance,
            trace,
            capacity,
        } => cmd_bqp_run(&instance, trace.as_deref(), capacity.capacity),
        Command::ReverseCompile { input, output } => cmd_reverse_compile(&input, output.as_deref()),
        Command::Sample {
            state,
            draws,
            seed,
            mode,
            output,
        } => cmd_sample(&state, draws, seed, mode, output.as_deref()),
        Command::Measure {
            state,
            homodyne_mode,
            theta,
            draws,
            seed,
            output,
        } => cmd_measure(&state, homodyne_mode, theta, draws, seed, output.as_deref()),
    }
}

/// 17 significant digits: round-trips f64 exactly.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_out(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn read_gb_circuit(path: &Path) -> Result<GbCircuit> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let circuit = ir::parse(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    ir::validate(&circuit).map_err(|violations| {
        anyhow!(
            "{}: invalid circuit: {}",
            path.display(),
            violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        )
    })?;
    Ok(circuit)
}

fn parse_mean(text: &str) -> Result<MomentVector> {
    let entries: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("invalid float `{s}`"))
        })
        .collect::<Result<_>>()?;
    MomentVector::new(entries).map_err(|e| anyhow!("invalid mean vector: {e}"))
}

fn trajectory_csv(points: &[TrajectoryPoint]) -> String {
    let mut out = String::from("step,gate_index,overlap\n");
    for (step, p) in points.iter().enumerate() {
        out.push_str(&format!("{step},{},{}\n", p.gate_index, fmt_f64(p.overlap)));
    }
    out
}

fn cmd_compile(input: &Path, output: Option<&Path>, flags: &CompileFlags) -> Result<ExitCode> {
    let circuit = read_gb_circuit(input)?;
    let qc = compile(&circuit, &flags.options())
        .map_err(|e| anyhow!("compiling {}: {e}", input.display()))?;
    write_out(output, &serialize_qubit_circuit(&qc))?;
    eprintln!(
        "compiled {} GB gates to {} qubit gates on {}(+{}) qubits",
        circuit.gates.len(),
        qc.gates.len(),
        qc.base_qubits,
        qc.ancillas
    );
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    circuit_path: &Path,
    state: Option<&Path>,
    mean: Option<&str>,
    output: Option<&Path>,
    trace: Option<&Path>,
    trace_every: usize,
    capacity: usize,
) -> Result<ExitCode> {
    let text = fs::read_to_string(circuit_path)
        .with_context(|| format!("reading {}", circuit_path.display()))?;
    let qc = parse_qubit_circuit(&text).map_err(|e| anyhow!("{}: {e}", circuit_path.display()))?;
    let s0: ScaledState = if let Some(mean) = mean {
        encode_mean_capped(&parse_mean(mean)?, capacity)?
    } else if let Some(path) = state {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        load_state(&mut bytes.as_slice())?
    } else {
        let modes = 1usize << qc.register_bits();
        encode_mean_capped(&MomentVector::displaced_first_mode(modes, 1.0), capacity)?
    };
    let opts = RunOptions {
        trace_every: (trace_every > 0).then_some(trace_every),
        capacity_qubits: capacity,
    };
    let (final_state, trajectory) = run(&qc, &s0, &opts)?;
    if let Some(path) = trace {
        fs::write(path, trajectory_csv(&trajectory))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = output {
        let mut buf = Vec::new();
        save_state(&final_state, &mut buf)?;
        fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "gates={} scale={} success_log={} overlap={}",
        qc.gates.len(),
        fmt_f64(final_state.scale()),
        fmt_f64(final_state.success_log()),
        fmt_f64(final_state.amplitudes()[0]),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(
    input: &Path,
    mean: Option<&str>,
    diff: bool,
    sigma: bool,
    flags: &CompileFlags,
) -> Result<ExitCode> {
    let circuit = read_gb_circuit(input)?;
    let modes = circuit.modes;
    let z0 = match mean {
        Some(text) => {
            let z = parse_mean(text)?;
            if z.modes() != modes {
                bail!("mean has {} modes, circuit has {modes}", z.modes());
            }
            z
        }
        None => MomentVector::displaced_first_mode(modes, 1.0),
    };
    let mut z = z0.clone();
    for (i, gate) in circuit.gates.iter().enumerate() {
        let k = generator_of(gate, modes).map_err(|e| anyhow!("gate {i}: {e}"))?;
        z = evolve_mean(&z, &k, gate_time(gate))?;
    }
    println!(
        "mean={}",
        z.as_slice()
            .iter()
            .map(|v| fmt_f64(*v))
            .collect::<Vec<_>>()
            .join(",")
    );
    if sigma {
        let mut cov = CovarianceMatrix::coherent(modes);
        for (i, gate) in circuit.gates.iter().enumerate() {
            let k = generator_of(gate, modes).map_err(|e| anyhow!("gate {i}: {e}"))?;
            cov = symplectiq_core::symplectic::evolve_cov(&cov, &k, gate_time(gate))?;
        }
        let qc = compile(&circuit, &make_exact(flags))
            .map_err(|e| anyhow!("compiling {}: {e}", input.display()))?;
        let evolved = evolve_sigma(&qc, &SigmaState::coherent(modes))?;
        let dev = symplectiq_core::symplectic::max_abs_diff(
            evolved.covariance()?.as_matrix(),
            cov.as_matrix(),
        );
        println!("sigma_deviation={}", fmt_f64(dev));
    }
    if diff {
        let qc = compile(&circuit, &flags.options())
            .map_err(|e| anyhow!("compiling {}: {e}", input.display()))?;
        let s0 = encode_mean_capped(&z0, symplectiq_core::sim::DEFAULT_CAPACITY_QUBITS)?;
        let (out, _) = run(&qc, &s0, &RunOptions::default())?;
        let zq = decode_mean(&out);
        let dev = z
            .as_slice()
            .iter()
            .zip(zq.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        println!("diff={}", fmt_f64(dev));
    }
    Ok(ExitCode::SUCCESS)
}

fn make_exact(flags: &CompileFlags) -> CompileOptions {
    CompileOptions {
        lcu_step: flags.lcu_step,
        squeeze_mode: SqueezeMode::Exact,
    }
}

fn gate_time(g: &GbGate) -> f64 {
    match g {
        GbGate::Phase { t, .. }
        | GbGate::Beamsplitter { t, .. }
        | GbGate::Squeeze { t, .. }
        | GbGate::GlobalPhase { t, .. }
        | GbGate::GlobalBeamsplitter { t, .. }
        | GbGate::GlobalSqueeze { t, .. } => *t,
        GbGate::Displacement { .. } => 0.0,
    }
}

fn cmd_classify(input: &Path) -> Result<ExitCode> {
    let circuit = read_gb_circuit(input)?;
    let modes = circuit.modes;
    let mut rejected = false;
    for (i, gate) in circuit.gates.iter().enumerate() {
        match generator_of(gate, modes) {
            Ok(k) => {
                let matrix_class = classify_generator(k.as_matrix());
                let omega = build_omega(modes);
                let omega_k = omega * k.as_matrix();
                let pauli_str = match pauli_decompose(&omega_k) {
                    Ok(sum) => match classify_pauli_generator(&sum) {
                        TimeClass::RealTime => "real-time",
                        TimeClass::ImaginaryTime => "imaginary-time",
                        TimeClass::Mixed => "mixed",
                    },
                    Err(_) => "n/a (register too large for Pauli expansion)",
                };
                println!(
                    "gate {i}: matrix={} pauli={}",
                    kind_str(matrix_class),
                    pauli_str
                );
            }
            Err(e) => {
                println!("gate {i}: rejected ({e})");
                rejected = true;
            }
        }
    }
    if rejected {
        Ok(ExitCode::from(2))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn kind_str(kind: GeneratorKind) -> &'static str {
    match kind {
        GeneratorKind::ParticlePreserving => "particle-preserving",
        GeneratorKind::NonParticlePreserving => "non-particle-preserving",
        GeneratorKind::Mixed => "mixed",
    }
}

fn cmd_bqp_gen(
    n: usize,
    layers: usize,
    kind: &str,
    seed: u64,
    x: f64,
    output: Option<&Path>,
) -> Result<ExitCode> {
    let inst = match kind {
        "yes" => planted_instance(n, layers, x, seed, PlantedKind::Yes),
        "no" => planted_instance(n, layers, x, seed, PlantedKind::No),
        "random" => random_instance(n, layers, x, seed),
        other => bail!("unknown instance kind `{other}`"),
    };
    write_out(output, &serialize_instance(&inst))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_bqp_run(instance: &Path, trace: Option<&Path>, capacity: usize) -> Result<ExitCode> {
    let text =
        fs::read_to_string(instance).with_context(|| format!("reading {}", instance.display()))?;
    let inst = parse_instance(&text).map_err(|e| anyhow!("{}: {e}", instance.display()))?;
    let opts = RunOptions {
        trace_every: Some(1),
        capacity_qubits: capacity,
    };
    let outcome = run_instance(&inst, &opts)?;
    if let Some(path) = trace {
        fs::write(path, trajectory_csv(&outcome.trajectory))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "q1_over_x={} decision={}",
        fmt_f64(outcome.q1_over_x),
        outcome.decision
    );
    Ok(match outcome.decision {
        Decision::Yes => ExitCode::SUCCESS,
        Decision::No => ExitCode::from(1),
        Decision::Indeterminate => ExitCode::from(3),
    })
}

fn cmd_reverse_compile(input: &Path, output: Option<&Path>) -> Result<ExitCode> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let (n, gates) =
        parse_unitary_circuit(&text).map_err(|e| anyhow!("{}: {e}", input.display()))?;
    let gb = bqp::reverse_compile(&gates, n)?;
    let mut circuit = GbCircuit::new(1 << n);
    for g in gb {
        circuit.push(g);
    }
    write_out(output, &ir::serialize(&circuit))?;
    eprintln!(
        "mapped {} unitary gates on {n} qubits to {} GB gates on {} modes",
        gates.len(),
        circuit.gates.len(),
        circuit.modes
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_sample(
    state_path: &Path,
    draws: u64,
    seed: u64,
    mode: Option<usize>,
    output: Option<&Path>,
) -> Result<ExitCode> {
    let bytes =
        fs::read(state_path).with_context(|| format!("reading {}", state_path.display()))?;
    let state = load_state(&mut bytes.as_slice())?;
    let z = decode_mean(&state);
    if let Some(m) = mode {
        if m == 0 || m > z.modes() {
            bail!("mode {m} out of range 1..={}", z.modes());
        }
    }
    let mut out = String::new();
    for s in seed..seed + draws {
        let sample = sample_photon_counts(&z, s);
        for (m0, count) in sample.counts.iter().enumerate() {
            let m = m0 + 1;
            if mode.is_some_and(|want| want != m) {
                continue;
            }
            out.push_str(&format!(
                "{{\"seed\":{s},\"mode\":{m},\"value\":{count}}}\n"
            ));
        }
    }
    write_out(output, &out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_measure(
    state_path: &Path,
    homodyne_mode: Option<usize>,
    theta: f64,
    draws: u64,
    seed: u64,
    output: Option<&Path>,
) -> Result<ExitCode> {
    let bytes =
        fs::read(state_path).with_context(|| format!("reading {}", state_path.display()))?;
    let state = load_state(&mut bytes.as_slice())?;
    let z = decode_mean(&state);
    let mut out = String::new();
    let halves = register_halves_fraction(&state)
        .map(fmt_f64)
        .unwrap_or_else(|_| "null".to_string());
    let energies = mode_energies(&z)
        .iter()
        .map(|e| fmt_f64(*e))
        .collect::<Vec<_>>()
        .join(",");
    out.push_str(&format!(
        "{{\"symplectic_fraction\":{},\"register_halves_fraction\":{},\"total_photons\":{},\"mode_energies\":[{}]}}\n",
        fmt_f64(symplectic_fraction(&state)),
        halves,
        fmt_f64(total_photon_number(&z)),
        energies
    ));
    if let Some(m) = homodyne_mode {
        if m == 0 || m > z.modes() {
            bail!("mode {m} out of range 1..={}", z.modes());
        }
        let sigma = CovarianceMatrix::coherent(z.modes());
        for s in seed..seed + draws {
            let v = sample_homodyne(&z, &sigma, m - 1, theta, s)?;
            out.push_str(&format!(
                "{{\"seed\":{s},\"mode\":{m},\"value\":{}}}\n",
                fmt_f64(v)
            ));
        }
    }
    write_out(output, &out)?;
    Ok(ExitCode::SUCCESS)
}
