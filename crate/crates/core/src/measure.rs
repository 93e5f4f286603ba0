//! Measurement layer: photon-count and homodyne sampling, plus the
//! fraction estimators read off the encoded state.
//!
//! All sampling is seeded and reproducible: the generator is ChaCha8
//! (a named counter-based stream cipher), keyed by the caller's 64-bit
//! seed, with one independent stream per mode. Identical seeds give
//! identical samples on every platform.
//!
//! Mode arguments are 0-based here, matching [`MomentVector`] accessors;
//! the text interfaces are 1-based and convert at the CLI boundary.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use thiserror::Error;

use crate::sim::ScaledState;
use crate::symplectic::{CovarianceMatrix, MomentVector};

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("mode {mode} out of range for {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },
    #[error("expected covariance on {expected} modes, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("homodyne variance {0} must be positive")]
    NonPositiveVariance(f64),
    #[error("fraction estimators need at least one register qubit")]
    NoRegisterQubits,
}

/// Per-mode coherent-state energies `e_m = (⟨q_m⟩² + ⟨p_m⟩²)/2`.
pub fn mode_energies(z: &MomentVector) -> Vec<f64> {
    (0..z.modes())
        .map(|m| 0.5 * (z.q(m) * z.q(m) + z.p(m) * z.p(m)))
        .collect()
}

/// Total photon number `P = Σ e_m = ‖z‖²/2`.
pub fn total_photon_number(z: &MomentVector) -> f64 {
    mode_energies(z).iter().sum()
}

/// Per-mode energies of a general Gaussian state:
/// `⟨n_m⟩ = ½(σ_qq + σ_pp + ⟨q⟩² + ⟨p⟩²) - ½`, which reduces to
/// [`mode_energies`] for the coherent covariance `σ = I/2`.
pub fn mode_energies_general(
    z: &MomentVector,
    sigma: &CovarianceMatrix,
) -> Result<Vec<f64>, MeasureError> {
    let modes = z.modes();
    if sigma.modes() != modes {
        return Err(MeasureError::DimensionMismatch {
            expected: modes,
            got: sigma.modes(),
        });
    }
    let s = sigma.as_matrix();
    Ok((0..modes)
        .map(|m| {
            0.5 * (s[(m, m)] + s[(modes + m, modes + m)] + z.q(m) * z.q(m) + z.p(m) * z.p(m)) - 0.5
        })
        .collect())
}

/// One independent Poisson photon-count draw per mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhotonCountSample {
    /// `counts[m]` is the photon count of 0-based mode `m`.
    pub counts: Vec<u64>,
    pub seed: u64,
}

/// Samples photon counts: mode `m` draws from `Poisson(e_m)` on its own
/// ChaCha8 stream, so the per-mode draws are independent and the whole
/// sample is a pure function of `(z, seed)`.
pub fn sample_photon_counts(z: &MomentVector, seed: u64) -> PhotonCountSample {
    let energies = mode_energies(z);
    let counts = energies
        .iter()
        .enumerate()
        .map(|(m, &e)| {
            if e <= 0.0 {
                return 0;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(m as u64);
            let dist = Poisson::new(e).expect("positive finite rate");
            dist.sample(&mut rng) as u64
        })
        .collect();
    PhotonCountSample { counts, seed }
}

/// One homodyne draw of the rotated quadrature
/// `x̂(θ) = cos θ · q̂_m + sin θ · p̂_m`: Gaussian with mean
/// `cos θ ⟨q_m⟩ + sin θ ⟨p_m⟩` and variance
/// `(cos θ, sin θ) · σ_m · (cos θ, sin θ)ᵀ` over the mode's 2x2 covariance
/// block (`= 1/2` for coherent states).
pub fn sample_homodyne(
    z: &MomentVector,
    sigma: &CovarianceMatrix,
    mode: usize,
    theta_basis: f64,
    seed: u64,
) -> Result<f64, MeasureError> {
    let modes = z.modes();
    if mode >= modes {
        return Err(MeasureError::ModeOutOfRange { mode, modes });
    }
    if sigma.modes() != modes {
        return Err(MeasureError::DimensionMismatch {
            expected: modes,
            got: sigma.modes(),
        });
    }
    let (c, s) = (theta_basis.cos(), theta_basis.sin());
    let mean = c * z.q(mode) + s * z.p(mode);
    let sm = sigma.as_matrix();
    let variance = c * c * sm[(mode, mode)]
        + s * s * sm[(modes + mode, modes + mode)]
        + 2.0 * c * s * sm[(mode, modes + mode)];
    if variance <= 0.0 {
        return Err(MeasureError::NonPositiveVariance(variance));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mode as u64);
    let dist = Normal::new(mean, variance.sqrt()).expect("finite parameters");
    Ok(dist.sample(&mut rng))
}

/// Probability of the symplectic qubit reading 0:
/// `Σ q_m² / Σ (q_m² + p_m²)`, the fraction of total position energy.
pub fn symplectic_fraction(s: &ScaledState) -> f64 {
    let amps = s.amplitudes();
    let half = amps.len() / 2;
    let q: f64 = amps[..half].iter().map(|a| a * a).sum();
    let total: f64 = q + amps[half..].iter().map(|a| a * a).sum::<f64>();
    q / total
}

/// Probability of the most significant register qubit reading 0: the
/// fraction of energy in the first half of the modes.
pub fn register_halves_fraction(s: &ScaledState) -> Result<f64, MeasureError> {
    let n = s.qubits() - 1;
    if n == 0 {
        return Err(MeasureError::NoRegisterQubits);
    }
    let amps = s.amplitudes();
    let half_modes = 1usize << (n - 1);
    let modes = 1usize << n;
    let mut low = 0.0;
    let mut total = 0.0;
    for (i, a) in amps.iter().enumerate() {
        let r = i % modes;
        let w = a * a;
        total += w;
        if r < half_modes {
            low += w;
        }
    }
    Ok(low / total)
}
