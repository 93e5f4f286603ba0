//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them).

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use symplectiq_core::bqp::{
    planted_instance, reverse_pipeline_overlap, run_instance, simulate_unitary, Decision,
    PlantedKind, UnitaryGate,
};
use symplectiq_core::compile::{compile, compile_squeeze_lcu, CompileOptions, SqueezeMode};
use symplectiq_core::ir::{generator_of, BitCondition, GbCircuit, GbGate, Sign};
use symplectiq_core::measure::{
    mode_energies, sample_homodyne, sample_photon_counts, symplectic_fraction, total_photon_number,
};
use symplectiq_core::pauli::{classify_pauli_generator, pauli_decompose, sp_basis, TimeClass};
use symplectiq_core::sim::{
    apply_lcu_block, circuit_matrix, decode_mean, encode_mean, evolve_sigma, lcu_block_operator,
    run, RunOptions, SigmaState,
};
use symplectiq_core::symplectic::{
    build_omega, classify_generator, k_from_non_particle_preserving, k_from_particle_preserving,
    max_abs, max_abs_diff, propagator, CovarianceMatrix, GeneratorKind, MomentVector,
};

fn report(id: u32, pass: bool, what: &str) {
    println!(
        "ACCEPTANCE {id}: {} - {what}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "acceptance criterion {id} failed: {what}");
}

fn random_cond(rng: &mut ChaCha8Rng, n: usize, exclude: Option<usize>) -> BitCondition {
    let mut clauses = Vec::new();
    for k in 1..=n {
        if Some(k) == exclude {
            continue;
        }
        if rng.random_bool(0.4) {
            clauses.push((k, rng.random_range(0..2) as u8));
        }
    }
    BitCondition::new(clauses)
}

fn dense_of(modes: usize, gate: &GbGate) -> DMatrix<f64> {
    let mut c = GbCircuit::new(modes);
    c.push(gate.clone());
    let opts = CompileOptions {
        squeeze_mode: SqueezeMode::Exact,
        ..CompileOptions::default()
    };
    circuit_matrix(&compile(&c, &opts).unwrap()).unwrap()
}

#[test]
fn criterion_1_dictionary_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = 0.0_f64;
    for n in [1usize, 2, 3, 4] {
        let modes = 1 << n;
        for draw in 0..50 {
            let t = rng.random_range(-1.0..1.0);
            let sign = if rng.random_bool(0.5) {
                Sign::Plus
            } else {
                Sign::Minus
            };
            let mut gates = vec![
                GbGate::Phase {
                    m: rng.random_range(1..=modes),
                    t,
                },
                GbGate::Squeeze {
                    m: rng.random_range(1..=modes),
                    t,
                    sign,
                },
                GbGate::GlobalPhase {
                    cond: random_cond(&mut rng, n, None),
                    t,
                },
                GbGate::GlobalSqueeze {
                    cond: random_cond(&mut rng, n, None),
                    t,
                    sign,
                },
            ];
            if modes >= 2 {
                let m = rng.random_range(1..=modes);
                let mut mp = rng.random_range(1..=modes);
                while mp == m {
                    mp = rng.random_range(1..=modes);
                }
                gates.push(GbGate::Beamsplitter { m, mp, t });
                let l = rng.random_range(1..=n);
                gates.push(GbGate::GlobalBeamsplitter {
                    cond: random_cond(&mut rng, n, Some(l)),
                    l,
                    t,
                });
            }
            for gate in gates {
                let k = generator_of(&gate, modes).unwrap();
                let oracle = propagator(&k, t);
                let diff = max_abs_diff(&dense_of(modes, &gate), oracle.as_matrix());
                worst = worst.max(diff);
                assert!(diff < 1e-10, "M={modes} draw={draw} gate={gate:?}: {diff}");
            }
        }
    }
    let elapsed = started.elapsed();
    report(
        1,
        worst < 1e-10 && elapsed.as_secs() < 30,
        &format!(
            "dictionary matches e^(t Omega K) on M in {{2,4,8,16}}, worst dev {worst:.2e}, {:.1?}",
            elapsed
        ),
    );
}

#[test]
fn criterion_2_squeeze_lcu_first_order_validity() {
    // (a) log-log slope of the normalized operator error.
    let n = 2;
    let modes = 1 << n;
    let ts = [0.1, 0.05, 0.025, 0.0125];
    let mut errs = Vec::new();
    for &t in &ts {
        let block = compile_squeeze_lcu(2, t, Sign::Plus, n).unwrap();
        let a = lcu_block_operator(&block, n + 1).unwrap();
        let k = generator_of(
            &GbGate::Squeeze {
                m: 2,
                t,
                sign: Sign::Plus,
            },
            modes,
        )
        .unwrap();
        let e = propagator(&k, t).as_matrix().clone();
        errs.push((&a / a.norm() - &e / e.norm()).norm());
    }
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let nn = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    let slope_ok = (slope - 2.0).abs() <= 0.1;

    // (b) worst-case failure probability ~ 8t at <p_m> = 1.
    let mut prob_ok = true;
    let mut worst_rel = 0.0_f64;
    for &t in &[0.02, 0.01, 0.005] {
        let z = MomentVector::new(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let s = encode_mean(&z).unwrap();
        let block = compile_squeeze_lcu(2, t, Sign::Plus, 1).unwrap();
        let out = apply_lcu_block(&s, &block).unwrap();
        let failure = 1.0 - out.success_log().exp();
        let rel = (failure - 8.0 * t).abs() / (8.0 * t);
        worst_rel = worst_rel.max(rel);
        prob_ok &= rel <= 0.2;
    }
    report(
        2,
        slope_ok && prob_ok,
        &format!("LCU error slope {slope:.3}, failure-vs-8t rel dev {worst_rel:.3}"),
    );
}

#[test]
fn criterion_3_desk_scale_interferometer() {
    let n = 24;
    let layers = 100;
    let started = Instant::now();
    let mut pass = true;
    let mut summary = String::new();
    for (kind, label) in [(PlantedKind::Yes, "YES"), (PlantedKind::No, "NO")] {
        let inst = planted_instance(n, layers, 1.0, 2024, kind);
        let opts = RunOptions {
            trace_every: Some(1),
            capacity_qubits: 27,
        };
        let outcome = run_instance(&inst, &opts).unwrap();
        let csv_path = std::env::temp_dir().join(format!("symplectiq_fig3_{label}.csv"));
        let mut csv = String::from("step,gate_index,overlap\n");
        for (step, p) in outcome.trajectory.iter().enumerate() {
            csv.push_str(&format!("{step},{},{:.16e}\n", p.gate_index, p.overlap));
        }
        std::fs::write(&csv_path, csv).unwrap();
        let in_region = match kind {
            PlantedKind::Yes => {
                outcome.q1_over_x > 2.0 / 3.0
                    && outcome.q1_over_x <= 1.0
                    && outcome.decision == Decision::Yes
            }
            PlantedKind::No => {
                outcome.q1_over_x < 1.0 / 3.0
                    && outcome.q1_over_x >= -1.0
                    && outcome.decision == Decision::No
            }
        };
        pass &= in_region;
        pass &= outcome.trajectory.len() == layers + 1;
        summary.push_str(&format!("{label}: q1/x = {:.4}; ", outcome.q1_over_x));
    }
    let elapsed = started.elapsed();
    pass &= elapsed.as_secs() < 300;
    report(
        3,
        pass,
        &format!("n=24, L=100 planted instances; {summary}ran in {elapsed:.1?}"),
    );
}

#[test]
fn criterion_4_reverse_compiler_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4004);
    let n = 3;
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let depth = rng.random_range(1..=20);
        let gates: Vec<UnitaryGate> = (0..depth)
            .map(|_| {
                let tau = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                match rng.random_range(0..3) {
                    0 => UnitaryGate::Rz {
                        q: rng.random_range(1..=n),
                        tau,
                    },
                    1 => UnitaryGate::Ry {
                        q: rng.random_range(1..=n),
                        tau,
                    },
                    _ => {
                        let c = rng.random_range(1..=n);
                        let mut t = rng.random_range(1..=n);
                        while t == c {
                            t = rng.random_range(1..=n);
                        }
                        UnitaryGate::CRy {
                            control: c,
                            target: t,
                            tau,
                        }
                    }
                }
            })
            .collect();
        let expected = simulate_unitary(&gates, n).unwrap()[0].norm_sqr();
        let got = reverse_pipeline_overlap(&gates, n, 2.5).unwrap();
        worst = worst.max((got - expected).abs());
    }
    report(
        4,
        worst < 1e-10,
        &format!("100 random 3-qubit circuits, worst |overlap dev| {worst:.2e}"),
    );
}

#[test]
fn criterion_5_sp_basis_closure() {
    let mut pass = true;
    let mut detail = String::new();
    for (n, expected) in [(1usize, 10usize), (2, 36)] {
        let basis = sp_basis(n).unwrap();
        pass &= basis.len() == expected;
        let modes = 1 << n;
        let omega = build_omega(modes);
        let dense: Vec<DMatrix<f64>> = basis.iter().map(|e| e.dense_real().unwrap()).collect();
        for d in &dense {
            let dev = max_abs(&(d.transpose() * &omega + &omega * d));
            pass &= dev <= 1e-12;
        }
        // Closure: commutators re-decompose into the basis.
        let norms: Vec<f64> = dense.iter().map(|d| (d.transpose() * d).trace()).collect();
        let mut worst = 0.0_f64;
        for a in &dense {
            for b in &dense {
                let comm = a * b - b * a;
                let mut recon = DMatrix::<f64>::zeros(2 * modes, 2 * modes);
                for (d, nrm) in dense.iter().zip(&norms) {
                    let coeff = (d.transpose() * &comm).trace() / nrm;
                    if coeff.abs() > 1e-14 {
                        recon += d * coeff;
                    }
                }
                worst = worst.max(max_abs(&(comm - recon)));
            }
        }
        pass &= worst < 1e-10;
        detail.push_str(&format!(
            "n={n}: {} elements, residual {worst:.1e}; ",
            basis.len()
        ));
    }
    report(5, pass, &detail);
}

#[test]
fn criterion_6_conservation_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(6006);
    let mut pass = true;
    let mut worst_norm = 0.0_f64;
    let mut worst_energy = 0.0_f64;
    let mut worst_fraction = 0.0_f64;
    let mut worst_sigma = 0.0_f64;
    for trial in 0..50 {
        let n = rng.random_range(1..=4usize);
        let modes = 1 << n;
        // Random particle-preserving circuit.
        let mut c = GbCircuit::new(modes);
        let mut bs_only = GbCircuit::new(modes);
        for _ in 0..8 {
            let t = rng.random_range(-1.0..1.0);
            match rng.random_range(0..4) {
                0 => c.push(GbGate::Phase {
                    m: rng.random_range(1..=modes),
                    t,
                }),
                1 => c.push(GbGate::GlobalPhase {
                    cond: random_cond(&mut rng, n, None),
                    t,
                }),
                2 if modes >= 2 => {
                    let m = rng.random_range(1..=modes);
                    let mut mp = rng.random_range(1..=modes);
                    while mp == m {
                        mp = rng.random_range(1..=modes);
                    }
                    c.push(GbGate::Beamsplitter { m, mp, t });
                }
                _ => {
                    let l = rng.random_range(1..=n);
                    c.push(GbGate::GlobalBeamsplitter {
                        cond: random_cond(&mut rng, n, Some(l)),
                        l,
                        t,
                    });
                }
            }
            // Beamsplitter-only circuit for the fraction invariance.
            let m = rng.random_range(1..=modes);
            let mut mp = rng.random_range(1..=modes);
            while mp == m {
                mp = rng.random_range(1..=modes);
            }
            if modes >= 2 {
                bs_only.push(GbGate::Beamsplitter { m, mp, t });
            }
        }
        let entries: Vec<f64> = (0..2 * modes)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let z0 = MomentVector::new(entries).unwrap();
        if z0.norm() == 0.0 {
            continue;
        }
        let opts = CompileOptions::default();
        let qc = compile(&c, &opts).unwrap();
        let s0 = encode_mean(&z0).unwrap();
        let (out, _) = run(&qc, &s0, &RunOptions::default()).unwrap();
        worst_norm = worst_norm.max((out.norm() - 1.0).abs());
        let z1 = decode_mean(&out);
        worst_energy = worst_energy.max(
            (total_photon_number(&z0) - total_photon_number(&z1)).abs()
                / total_photon_number(&z0).max(1e-12),
        );

        let qc_bs = compile(&bs_only, &opts).unwrap();
        let before = symplectic_fraction(&s0);
        let (out_bs, _) = run(&qc_bs, &s0, &RunOptions::default()).unwrap();
        worst_fraction = worst_fraction.max((symplectic_fraction(&out_bs) - before).abs());

        let sigma = SigmaState::coherent(modes);
        let evolved = evolve_sigma(&qc, &sigma).unwrap();
        worst_sigma = worst_sigma.max(max_abs_diff(
            evolved.covariance().unwrap().as_matrix(),
            CovarianceMatrix::coherent(modes).as_matrix(),
        ));
        let _ = trial;
    }
    pass &=
        worst_norm < 1e-10 && worst_energy < 1e-10 && worst_fraction < 1e-10 && worst_sigma < 1e-10;
    report(
        6,
        pass,
        &format!(
            "norm dev {worst_norm:.1e}, energy dev {worst_energy:.1e}, fraction dev {worst_fraction:.1e}, sigma dev {worst_sigma:.1e}"
        ),
    );
}

#[test]
fn criterion_7_classification_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(7007);
    let mut agreements = 0usize;
    let total = 200usize;
    for trial in 0..total {
        let n = rng.random_range(1..=3usize);
        let m = 1usize << n;
        let mut h = DMatrix::<Complex64>::zeros(m, m);
        let mut d = DMatrix::<Complex64>::zeros(m, m);
        for r in 0..m {
            for c in 0..m {
                h[(r, c)] =
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                d[(r, c)] =
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
        let d = (&d + d.transpose()) * Complex64::new(0.5, 0.0);
        let k = match trial % 3 {
            0 => k_from_particle_preserving(&h).unwrap(),
            1 => k_from_non_particle_preserving(&d).unwrap(),
            _ => k_from_particle_preserving(&h)
                .unwrap()
                .sum(&k_from_non_particle_preserving(&d).unwrap())
                .unwrap(),
        };
        let matrix_class = classify_generator(k.as_matrix());
        let omega_k = build_omega(m) * k.as_matrix();
        let pauli_class = classify_pauli_generator(&pauli_decompose(&omega_k).unwrap());
        let agrees = matches!(
            (matrix_class, pauli_class),
            (GeneratorKind::ParticlePreserving, TimeClass::RealTime)
                | (
                    GeneratorKind::NonParticlePreserving,
                    TimeClass::ImaginaryTime
                )
                | (GeneratorKind::Mixed, TimeClass::Mixed)
        );
        agreements += usize::from(agrees);
    }
    report(
        7,
        agreements == total,
        &format!("{agreements}/{total} matrix-vs-Pauli classifications agree"),
    );
}

#[test]
fn criterion_8_sampling_statistics() {
    let mut pass = true;
    let mut detail = String::new();
    let draws = 100_000u64;

    // Photon counts: empirical mean within 3 standard errors of e_m.
    let z = MomentVector::new(vec![2.0, 1.0, 0.0, 0.5]).unwrap();
    let energies = mode_energies(&z);
    let mut sums = [0u64; 2];
    for seed in 0..draws {
        let s = sample_photon_counts(&z, seed);
        for (m, c) in s.counts.iter().enumerate() {
            sums[m] += c;
        }
    }
    for m in 0..2 {
        let mean = sums[m] as f64 / draws as f64;
        let se = (energies[m] / draws as f64).sqrt();
        let ok = (mean - energies[m]).abs() <= 3.0 * se.max(1e-12);
        pass &= ok;
        detail.push_str(&format!("e_{}: {mean:.4} vs {:.4}; ", m + 1, energies[m]));
    }

    // Homodyne: mean and variance of the position quadrature.
    let z = MomentVector::new(vec![3.0, 0.0, 0.0, 0.0]).unwrap();
    let sigma = CovarianceMatrix::coherent(2);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for seed in 0..draws {
        let v = sample_homodyne(&z, &sigma, 0, 0.0, seed).unwrap();
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / draws as f64;
    let var = sum_sq / draws as f64 - mean * mean;
    let se_mean = (0.5 / draws as f64).sqrt();
    let se_var = 0.5 * (2.0 / draws as f64).sqrt();
    pass &= (mean - 3.0).abs() <= 3.0 * se_mean;
    pass &= (var - 0.5).abs() <= 3.0 * se_var;
    detail.push_str(&format!("homodyne mean {mean:.4}, var {var:.4}; "));

    // Determinism: identical seeds, identical samples.
    let a = sample_photon_counts(&z, 42);
    let b = sample_photon_counts(&z, 42);
    let h1 = sample_homodyne(&z, &sigma, 0, 0.3, 42).unwrap();
    let h2 = sample_homodyne(&z, &sigma, 0, 0.3, 42).unwrap();
    pass &= a == b && h1 == h2;
    report(8, pass, &detail);
}

#[test]
fn criterion_9_displacement_rejection() {
    use std::process::Command;

    // Library-level: compile fails with the dedicated error.
    let mut c = GbCircuit::new(4);
    c.push(GbGate::Displacement {
        m: 1,
        dq: 2.0,
        dp: 0.0,
    });
    let lib_err = compile(&c, &CompileOptions::default());
    let lib_ok = matches!(
        lib_err,
        Err(symplectiq_core::compile::CompileError::AtGate { ref source, .. })
            if matches!(**source, symplectiq_core::compile::CompileError::DisplacementUnsupported)
    );

    // CLI level: exit code 2 and a displacement message.
    let dir = std::env::temp_dir();
    let path = dir.join("symplectiq_disp_test.gb");
    std::fs::write(&path, "modes 4\ndisp m=1 dq=1.0 dp=0.0\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_symplectiq"))
        .args(["compile", path.to_str().unwrap()])
        .output()
        .unwrap();
    let cli_ok = out.status.code() == Some(2)
        && String::from_utf8_lossy(&out.stderr).contains("displacement");
    report(
        9,
        lib_ok && cli_ok,
        &format!("library error dedicated, CLI exit {:?}", out.status.code()),
    );
}
