//! Shared fixtures for the criterion benchmarks.

use symplectiq_core::bqp::{instance_to_circuit, random_instance};
use symplectiq_core::ir::{BitCondition, GbCircuit, GbGate, Sign};

/// A layered interferometer of `layers` global beamsplitters on `2^n` modes.
pub fn interferometer(n: usize, layers: usize, seed: u64) -> GbCircuit {
    instance_to_circuit(&random_instance(n, layers, 1.0, seed))
}

/// A mixed local/global circuit exercising every unitary gate kind.
pub fn mixed_unitary_circuit(n: usize, repeats: usize) -> GbCircuit {
    let modes = 1 << n;
    let mut c = GbCircuit::new(modes);
    for r in 0..repeats {
        let m = (r % modes) + 1;
        let mp = (m % modes) + 1;
        c.push(GbGate::Phase {
            m,
            t: 0.1 + 0.01 * r as f64,
        });
        if m != mp {
            c.push(GbGate::Beamsplitter { m, mp, t: 0.2 });
        }
        c.push(GbGate::GlobalPhase {
            cond: BitCondition::new(vec![(1 + r % n, (r % 2) as u8)]),
            t: 0.05,
        });
    }
    c
}

/// A squeeze-heavy circuit for the heralded path.
pub fn squeeze_circuit(n: usize, squeezes: usize) -> GbCircuit {
    let modes = 1 << n;
    let mut c = GbCircuit::new(modes);
    for r in 0..squeezes {
        c.push(GbGate::Squeeze {
            m: (r % modes) + 1,
            t: 0.04,
            sign: if r % 2 == 0 { Sign::Plus } else { Sign::Minus },
        });
    }
    c
}
