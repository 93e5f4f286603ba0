//! Dense phase-space oracle for Gaussian bosonic dynamics.
//!
//! A quadratic generator `H = ½ zᵀ K z` over the quadrature vector
//! `z = (q_1..q_M, p_1..p_M)` evolves first moments as `z(t) = e^{tΩK} z(0)`
//! and covariances as `σ(t) = e^{tΩK} σ(0) e^{∓tΩK}`, with the sign set by
//! whether `K` commutes or anticommutes with `Ω`. Everything here is dense
//! `2M × 2M` linear algebra; the matrix exponential goes through
//! scaling-and-squaring (Padé), never through the closed forms the compiler
//! is derived from, so this module can serve as an independent oracle.
//!
//! Mode indices are 0-based everywhere in this module; text formats are
//! 1-based and converted at the parsing boundary.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Largest mode count the dense oracle accepts (`2M ≤ 128`).
pub const MAX_ORACLE_MODES: usize = 64;

/// Structural checks (symmetry, hermiticity) pass below this deviation.
pub const STRUCT_TOL: f64 = 1e-12;
/// Propagator identities (symplectic condition, orthogonality) hold to this.
pub const PROP_TOL: f64 = 1e-10;
/// Group-law and determinant checks absorb more roundoff.
pub const GROUP_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SymplecticError {
    #[error("input matrix is not Hermitian (max deviation {0:.3e})")]
    NonHermitianInput(f64),
    #[error("input matrix is not complex-symmetric (max deviation {0:.3e})")]
    NonSymmetricInput(f64),
    #[error("generator matrix is not symmetric (max deviation {0:.3e})")]
    NonSymmetricGenerator(f64),
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix dimension {0} is not of the form 2M")]
    OddDimension(usize),
    #[error("dense oracle is limited to M <= {MAX_ORACLE_MODES} modes, got {0}")]
    TooManyModes(usize),
    #[error("covariance evolution is undefined for mixed generators")]
    MixedGeneratorUnsupported,
    #[error("moment vector entries must be finite")]
    NonFiniteEntry,
}

/// Commutation class of a quadratic generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    /// `[Ω, K] = 0`: the propagator is orthogonal (real-time evolution).
    ParticlePreserving,
    /// `{Ω, K} = 0`: the propagator is symmetric (imaginary-time evolution).
    NonParticlePreserving,
    /// Neither bracket vanishes.
    Mixed,
}

/// First-moment vector `⟨z⟩ = (⟨q_1⟩..⟨q_M⟩, ⟨p_1⟩..⟨p_M⟩)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    data: DVector<f64>,
}

impl MomentVector {
    /// Builds a moment vector from `2M` entries ordered q-block then p-block.
    pub fn new(entries: Vec<f64>) -> Result<Self, SymplecticError> {
        if !entries.len().is_multiple_of(2) {
            return Err(SymplecticError::OddDimension(entries.len()));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(SymplecticError::NonFiniteEntry);
        }
        Ok(Self {
            data: DVector::from_vec(entries),
        })
    }

    pub fn zeros(modes: usize) -> Self {
        Self {
            data: DVector::zeros(2 * modes),
        }
    }

    /// The all-zero vector except `q_0 = x` (first mode displaced in position).
    pub fn displaced_first_mode(modes: usize, x: f64) -> Self {
        let mut v = Self::zeros(modes);
        v.data[0] = x;
        v
    }

    pub fn modes(&self) -> usize {
        self.data.len() / 2
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.len() == 0
    }

    /// Position expectation of 0-based mode `m`.
    pub fn q(&self, m: usize) -> f64 {
        self.data[m]
    }

    /// Momentum expectation of 0-based mode `m`.
    pub fn p(&self, m: usize) -> f64 {
        self.data[self.modes() + m]
    }

    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.norm()
    }
}

/// Covariance matrix `σ` of the quadrature operators.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    data: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self, SymplecticError> {
        if !data.is_square() || !data.nrows().is_multiple_of(2) {
            return Err(SymplecticError::OddDimension(data.nrows()));
        }
        let dev = max_abs(&(&data - data.transpose()));
        if dev > STRUCT_TOL {
            return Err(SymplecticError::NonSymmetricInput(dev));
        }
        Ok(Self { data })
    }

    /// The coherent/vacuum covariance `σ = I/2`.
    pub fn coherent(modes: usize) -> Self {
        Self {
            data: DMatrix::identity(2 * modes, 2 * modes) * 0.5,
        }
    }

    pub fn modes(&self) -> usize {
        self.data.nrows() / 2
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Smallest eigenvalue; positive for physical covariances.
    pub fn min_eigenvalue(&self) -> f64 {
        self.data
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

/// A symmetric generator matrix `K` together with its commutation class.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    k: DMatrix<f64>,
    kind: GeneratorKind,
}

impl GeneratorMatrix {
    /// Wraps a symmetric `2M × 2M` matrix, classifying it against `Ω`.
    pub fn new(k: DMatrix<f64>) -> Result<Self, SymplecticError> {
        if !k.is_square() || !k.nrows().is_multiple_of(2) {
            return Err(SymplecticError::OddDimension(k.nrows()));
        }
        let modes = k.nrows() / 2;
        if modes > MAX_ORACLE_MODES {
            return Err(SymplecticError::TooManyModes(modes));
        }
        let dev = max_abs(&(&k - k.transpose()));
        if dev > STRUCT_TOL {
            return Err(SymplecticError::NonSymmetricGenerator(dev));
        }
        let kind = classify_generator(&k);
        Ok(Self { k, kind })
    }

    pub fn zeros(modes: usize) -> Self {
        Self {
            k: DMatrix::zeros(2 * modes, 2 * modes),
            kind: GeneratorKind::ParticlePreserving,
        }
    }

    pub fn modes(&self) -> usize {
        self.k.nrows() / 2
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    /// Entrywise sum of two generators (kind is re-derived).
    pub fn sum(&self, other: &Self) -> Result<Self, SymplecticError> {
        if self.k.nrows() != other.k.nrows() {
            return Err(SymplecticError::DimensionMismatch {
                expected: self.k.nrows(),
                got: other.k.nrows(),
            });
        }
        Self::new(&self.k + &other.k)
    }
}

/// Symplectic propagator `Q = e^{tΩK}` satisfying `Q Ω Qᵀ = Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    q: DMatrix<f64>,
}

impl SymplecticMatrix {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn modes(&self) -> usize {
        self.q.nrows() / 2
    }

    /// Max-abs deviation from the symplectic condition `Q Ω Qᵀ = Ω`.
    pub fn symplectic_deviation(&self) -> f64 {
        let omega = build_omega(self.modes());
        max_abs(&(&self.q * &omega * self.q.transpose() - &omega))
    }
}

/// Builds `Ω = [[0, I], [-I, 0]]` on `M` modes.
pub fn build_omega(modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * modes, 2 * modes);
    for i in 0..modes {
        omega[(i, modes + i)] = 1.0;
        omega[(modes + i, i)] = -1.0;
    }
    omega
}

/// Generator of a particle-preserving Hamiltonian `Σ h_{mm'} a†_m a_{m'}`.
///
/// Expanded over quadratures this is `K = I ⊗ Re(h) + iY ⊗ Im(h)`, i.e. the
/// block matrix `[[Re h, Im h], [-Im h, Re h]]`. `h` must be Hermitian.
pub fn k_from_particle_preserving(
    h: &DMatrix<Complex64>,
) -> Result<GeneratorMatrix, SymplecticError> {
    if !h.is_square() {
        return Err(SymplecticError::OddDimension(h.nrows()));
    }
    let m = h.nrows();
    let dev = h
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let (r, c) = (idx % m, idx / m);
            (v - h[(c, r)].conj()).norm()
        })
        .fold(0.0_f64, f64::max);
    if dev > STRUCT_TOL {
        return Err(SymplecticError::NonHermitianInput(dev));
    }
    let mut k = DMatrix::zeros(2 * m, 2 * m);
    for r in 0..m {
        for c in 0..m {
            let re = h[(r, c)].re;
            let im = h[(r, c)].im;
            k[(r, c)] = re;
            k[(m + r, m + c)] = re;
            k[(r, m + c)] = im;
            k[(m + r, c)] = -im;
        }
    }
    GeneratorMatrix::new(k)
}

/// Generator of a non-particle-preserving Hamiltonian
/// `Σ Δ†_{mm'} a_m a_{m'} + h.c.` with `Δ` complex-symmetric.
///
/// Expanded over quadratures this is `K = Z ⊗ 2Re(Δ) + X ⊗ 2Im(Δ)`.
pub fn k_from_non_particle_preserving(
    delta: &DMatrix<Complex64>,
) -> Result<GeneratorMatrix, SymplecticError> {
    if !delta.is_square() {
        return Err(SymplecticError::OddDimension(delta.nrows()));
    }
    let m = delta.nrows();
    let dev = delta
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let (r, c) = (idx % m, idx / m);
            (v - delta[(c, r)]).norm()
        })
        .fold(0.0_f64, f64::max);
    if dev > STRUCT_TOL {
        return Err(SymplecticError::NonSymmetricInput(dev));
    }
    let mut k = DMatrix::zeros(2 * m, 2 * m);
    for r in 0..m {
        for c in 0..m {
            let re = 2.0 * delta[(r, c)].re;
            let im = 2.0 * delta[(r, c)].im;
            k[(r, c)] = re;
            k[(m + r, m + c)] = -re;
            k[(r, m + c)] = im;
            k[(m + r, c)] = im;
        }
    }
    GeneratorMatrix::new(k)
}

/// Classifies a symmetric `K` by which bracket with `Ω` vanishes.
///
/// The tolerance is relative: `1e-10 · ‖K‖∞`, so `K = 0` classifies as
/// particle-preserving.
pub fn classify_generator(k: &DMatrix<f64>) -> GeneratorKind {
    let modes = k.nrows() / 2;
    let omega = build_omega(modes);
    let ok = &omega * k;
    let ko = k * &omega;
    let comm = max_abs(&(&ok - &ko));
    let anti = max_abs(&(&ok + &ko));
    let tol = 1e-10 * max_abs(k);
    if comm <= tol {
        GeneratorKind::ParticlePreserving
    } else if anti <= tol {
        GeneratorKind::NonParticlePreserving
    } else {
        GeneratorKind::Mixed
    }
}

/// The propagator `e^{tΩK}` via scaling-and-squaring matrix exponential.
pub fn propagator(k: &GeneratorMatrix, t: f64) -> SymplecticMatrix {
    let modes = k.modes();
    let omega = build_omega(modes);
    let gen = (&omega * k.as_matrix()) * t;
    SymplecticMatrix { q: gen.exp() }
}

/// Evolves first moments: `z(t) = e^{tΩK} z(0)`.
pub fn evolve_mean(
    z: &MomentVector,
    k: &GeneratorMatrix,
    t: f64,
) -> Result<MomentVector, SymplecticError> {
    if z.len() != k.as_matrix().nrows() {
        return Err(SymplecticError::DimensionMismatch {
            expected: k.as_matrix().nrows(),
            got: z.len(),
        });
    }
    let q = propagator(k, t);
    Ok(MomentVector {
        data: q.as_matrix() * z.as_vector(),
    })
}

/// Evolves a covariance matrix: `Q σ Qᵀ` for particle-preserving `K`
/// (where `Q` is orthogonal) and `Q σ Q` for non-particle-preserving `K`
/// (where `Q` is symmetric). Mixed generators are rejected.
pub fn evolve_cov(
    sigma: &CovarianceMatrix,
    k: &GeneratorMatrix,
    t: f64,
) -> Result<CovarianceMatrix, SymplecticError> {
    if sigma.as_matrix().nrows() != k.as_matrix().nrows() {
        return Err(SymplecticError::DimensionMismatch {
            expected: k.as_matrix().nrows(),
            got: sigma.as_matrix().nrows(),
        });
    }
    let q = propagator(k, t);
    let evolved = match k.kind() {
        GeneratorKind::ParticlePreserving => {
            q.as_matrix() * sigma.as_matrix() * q.as_matrix().transpose()
        }
        GeneratorKind::NonParticlePreserving => q.as_matrix() * sigma.as_matrix() * q.as_matrix(),
        GeneratorKind::Mixed => return Err(SymplecticError::MixedGeneratorUnsupported),
    };
    // Symmetrize away roundoff so downstream structural checks stay exact.
    let sym = (&evolved + evolved.transpose()) * 0.5;
    Ok(CovarianceMatrix { data: sym })
}

/// Largest absolute entry (the `‖·‖∞` used by the tolerance checks).
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Largest absolute entrywise difference of two equally sized matrices.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    max_abs(&(a - b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn phase_k(modes: usize, mode: usize) -> GeneratorMatrix {
        let mut h = DMatrix::<Complex64>::zeros(modes, modes);
        h[(mode, mode)] = Complex64::new(2.0, 0.0);
        k_from_particle_preserving(&h).unwrap()
    }

    fn squeeze_k(modes: usize, mode: usize, positive: bool) -> GeneratorMatrix {
        let s = if positive { 1.0 } else { -1.0 };
        let mut d = DMatrix::<Complex64>::zeros(modes, modes);
        d[(mode, mode)] = Complex64::new(0.0, s);
        k_from_non_particle_preserving(&d).unwrap()
    }

    fn beamsplitter_k(modes: usize, m: usize, mp: usize) -> GeneratorMatrix {
        let mut h = DMatrix::<Complex64>::zeros(modes, modes);
        h[(m, mp)] = Complex64::new(0.0, 2.0);
        h[(mp, m)] = Complex64::new(0.0, -2.0);
        k_from_particle_preserving(&h).unwrap()
    }

    #[test]
    fn omega_smallest_sizes() {
        let o1 = build_omega(1);
        assert_eq!(o1, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let o2 = build_omega(2);
        assert_eq!(o2[(0, 2)], 1.0);
        assert_eq!(o2[(1, 3)], 1.0);
        assert_eq!(o2[(2, 0)], -1.0);
        assert_eq!(o2[(3, 1)], -1.0);
        assert_eq!(o2.iter().map(|x| x.abs()).sum::<f64>(), 4.0);
    }

    #[test]
    fn omega_squares_to_minus_identity() {
        for modes in [1, 2, 4, 8] {
            let o = build_omega(modes);
            let o2 = &o * &o;
            let id = DMatrix::<f64>::identity(2 * modes, 2 * modes);
            assert_abs_diff_eq!(max_abs(&(o2 + id)), 0.0, epsilon = 0.0);
        }
    }

    #[test]
    fn particle_preserving_identity_h() {
        let h = DMatrix::<Complex64>::identity(1, 1);
        let k = k_from_particle_preserving(&h).unwrap();
        assert_eq!(k.as_matrix(), &DMatrix::identity(2, 2));
        assert_eq!(k.kind(), GeneratorKind::ParticlePreserving);
    }

    #[test]
    fn particle_preserving_beamsplitter_couplings() {
        // Im[h_{01}] = 1 produces the q1 p2 - p1 q2 coupling pattern.
        let mut h = DMatrix::<Complex64>::zeros(2, 2);
        h[(0, 1)] = Complex64::new(0.0, 1.0);
        h[(1, 0)] = Complex64::new(0.0, -1.0);
        let k = k_from_particle_preserving(&h).unwrap();
        let m = k.as_matrix();
        assert_eq!(m[(0, 3)], 1.0); // q1 p2
        assert_eq!(m[(1, 2)], -1.0); // q2 p1
        assert_eq!(m[(0, 1)], 0.0);
        // Proportional to the dedicated beamsplitter generator.
        let bs = beamsplitter_k(2, 0, 1);
        assert_abs_diff_eq!(max_abs(&(bs.as_matrix() - m * 2.0)), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn particle_preserving_zero() {
        let h = DMatrix::<Complex64>::zeros(3, 3);
        let k = k_from_particle_preserving(&h).unwrap();
        assert_eq!(max_abs(k.as_matrix()), 0.0);
    }

    #[test]
    fn particle_preserving_rejects_non_hermitian() {
        let mut h = DMatrix::<Complex64>::zeros(2, 2);
        h[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(
            k_from_particle_preserving(&h),
            Err(SymplecticError::NonHermitianInput(_))
        ));
    }

    #[test]
    fn non_particle_preserving_diagonal_real_delta() {
        let d = DMatrix::<Complex64>::identity(1, 1);
        let k = k_from_non_particle_preserving(&d).unwrap();
        // q^2 - p^2 term: proportional to Z.
        assert_eq!(
            k.as_matrix(),
            &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -2.0])
        );
        assert_eq!(k.kind(), GeneratorKind::NonParticlePreserving);
    }

    #[test]
    fn non_particle_preserving_imaginary_delta_is_squeeze() {
        let k = squeeze_k(1, 0, true);
        assert_eq!(
            k.as_matrix(),
            &DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0])
        );
    }

    #[test]
    fn non_particle_preserving_zero() {
        let d = DMatrix::<Complex64>::zeros(2, 2);
        let k = k_from_non_particle_preserving(&d).unwrap();
        assert_eq!(max_abs(k.as_matrix()), 0.0);
    }

    #[test]
    fn non_particle_preserving_rejects_asymmetric() {
        let mut d = DMatrix::<Complex64>::zeros(2, 2);
        d[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(
            k_from_non_particle_preserving(&d),
            Err(SymplecticError::NonSymmetricInput(_))
        ));
    }

    #[test]
    fn classification_of_named_generators() {
        assert_eq!(phase_k(2, 1).kind(), GeneratorKind::ParticlePreserving);
        assert_eq!(
            squeeze_k(2, 0, true).kind(),
            GeneratorKind::NonParticlePreserving
        );
        let mixed = phase_k(2, 1).sum(&squeeze_k(2, 0, true)).unwrap();
        assert_eq!(mixed.kind(), GeneratorKind::Mixed);
    }

    #[test]
    fn propagator_at_zero_is_identity() {
        let k = phase_k(2, 0);
        let q = propagator(&k, 0.0);
        let id = DMatrix::identity(4, 4);
        assert_abs_diff_eq!(max_abs(&(q.as_matrix() - id)), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn phase_propagator_quarter_rotation() {
        // 2t = pi/2 sends (q, p) -> (p, -q).
        let k = phase_k(1, 0);
        let q = propagator(&k, std::f64::consts::FRAC_PI_4);
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert_abs_diff_eq!(max_abs(&(q.as_matrix() - expected)), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn squeeze_propagator_is_diagonal_exponential() {
        let k = squeeze_k(1, 0, true);
        let t = 0.37;
        let q = propagator(&k, t);
        let expected =
            DMatrix::from_row_slice(2, 2, &[(2.0 * t).exp(), 0.0, 0.0, (-2.0 * t).exp()]);
        assert_abs_diff_eq!(max_abs(&(q.as_matrix() - expected)), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn evolve_mean_phase_example() {
        let z = MomentVector::new(vec![1.0, 0.0]).unwrap();
        let k = phase_k(1, 0);
        let out = evolve_mean(&z, &k, std::f64::consts::FRAC_PI_4).unwrap();
        assert_abs_diff_eq!(out.q(0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.p(0), -1.0, epsilon = 1e-14);
    }

    #[test]
    fn evolve_mean_at_zero_time_is_identity() {
        let z = MomentVector::new(vec![0.3, -0.7, 1.1, 0.0]).unwrap();
        let k = beamsplitter_k(2, 0, 1);
        let out = evolve_mean(&z, &k, 0.0).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(out.as_slice()[i], z.as_slice()[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn evolve_mean_beamsplitter_transfers_mode() {
        // Full transfer at 2t = pi/2; direction is the oracle's convention.
        let z = MomentVector::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let k = beamsplitter_k(2, 0, 1);
        let out = evolve_mean(&z, &k, std::f64::consts::FRAC_PI_4).unwrap();
        assert_abs_diff_eq!(out.q(0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.q(1).abs(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.p(0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.p(1), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn evolve_mean_dimension_mismatch() {
        let z = MomentVector::new(vec![1.0, 0.0]).unwrap();
        let k = phase_k(2, 0);
        assert!(matches!(
            evolve_mean(&z, &k, 0.1),
            Err(SymplecticError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn coherent_covariance_invariant_under_particle_preserving() {
        let sigma = CovarianceMatrix::coherent(2);
        for k in [phase_k(2, 1), beamsplitter_k(2, 0, 1)] {
            let out = evolve_cov(&sigma, &k, 0.63).unwrap();
            assert_abs_diff_eq!(
                max_abs(&(out.as_matrix() - sigma.as_matrix())),
                0.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn squeeze_covariance_stretches_diagonal() {
        let sigma = CovarianceMatrix::coherent(1);
        let t = 0.21;
        let out = evolve_cov(&sigma, &squeeze_k(1, 0, true), t).unwrap();
        assert_abs_diff_eq!(
            out.as_matrix()[(0, 0)],
            (4.0 * t).exp() / 2.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            out.as_matrix()[(1, 1)],
            (-4.0 * t).exp() / 2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn covariance_zero_time_identity_and_mixed_rejection() {
        let sigma = CovarianceMatrix::coherent(2);
        let k = phase_k(2, 0);
        let out = evolve_cov(&sigma, &k, 0.0).unwrap();
        assert_abs_diff_eq!(
            max_abs(&(out.as_matrix() - sigma.as_matrix())),
            0.0,
            epsilon = 1e-15
        );
        let mixed = phase_k(2, 0).sum(&squeeze_k(2, 1, true)).unwrap();
        assert!(matches!(
            evolve_cov(&sigma, &mixed, 0.1),
            Err(SymplecticError::MixedGeneratorUnsupported)
        ));
        // Mean evolution still works for mixed generators.
        let z = MomentVector::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(evolve_mean(&z, &mixed, 0.1).is_ok());
    }

    #[test]
    fn oracle_mode_cap() {
        let k = DMatrix::<f64>::zeros(2 * 65, 2 * 65);
        assert!(matches!(
            GeneratorMatrix::new(k),
            Err(SymplecticError::TooManyModes(65))
        ));
    }
}
