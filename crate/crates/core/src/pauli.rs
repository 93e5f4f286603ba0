//! Sparse Pauli-string algebra over the `(n+1)`-qubit phase space.
//!
//! A `2M × 2M` real matrix (with `M = 2^n`) decomposes over Pauli strings on
//! `n + 1` qubits, where the first letter acts on the symplectic qubit and
//! letter `j ≥ 1` acts on register bit `j`. A string with an even number of
//! `Y`s is a real symmetric matrix; with an odd number it is purely imaginary
//! and antisymmetric, so `i·string` is real. [`PauliSum`] stores every term
//! in that canonical real form: the map key is the bare letter string and the
//! implied prefactor is `i^(y_count mod 2)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

use crate::symplectic::GeneratorKind;

/// Coefficients below this are dropped by every arithmetic operation.
pub const COEFF_EPS: f64 = 1e-12;
/// Dense realizations are capped at `n ≤ 6` register qubits.
pub const MAX_DENSE_QUBITS: usize = 6;

#[derive(Debug, Error)]
pub enum PauliError {
    #[error("pauli strings have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("register size n = {0} exceeds the dense cap n <= {max}", max = MAX_DENSE_QUBITS)]
    SizeGuard(usize),
    #[error("register size must be at least 1")]
    EmptyRegister,
    #[error("matrix of dimension {0} is not 2^(n+1) with n <= {max}", max = MAX_DENSE_QUBITS)]
    BadDimension(usize),
    #[error("string with phase {0} is not a real matrix")]
    NotReal(Phase),
}

/// One tensor factor of a Pauli string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

/// A power of `i`, the only phases Pauli products generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Phase(u8); // exponent k in i^k, kept mod 4

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn times(self, other: Phase) -> Phase {
        Phase((self.0 + other.0) % 4)
    }

    pub fn value(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.0 {
            0 => "+1",
            1 => "+i",
            2 => "-1",
            _ => "-i",
        };
        write!(f, "{s}")
    }
}

/// Single-letter product: returns `(phase, letter)` with `a·b = phase·letter`.
fn letter_mul(a: Letter, b: Letter) -> (Phase, Letter) {
    use Letter::*;
    match (a, b) {
        (I, x) => (Phase::ONE, x),
        (x, I) => (Phase::ONE, x),
        (X, X) | (Y, Y) | (Z, Z) => (Phase::ONE, I),
        (X, Y) => (Phase::I, Z),
        (Y, X) => (Phase::MINUS_I, Z),
        (Y, Z) => (Phase::I, X),
        (Z, Y) => (Phase::MINUS_I, X),
        (Z, X) => (Phase::I, Y),
        (X, Z) => (Phase::MINUS_I, Y),
    }
}

/// A phased Pauli string on `n + 1` qubits; `letters[0]` is the symplectic
/// factor and `letters[j]` acts on register bit `j` for `j ≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    pub phase: Phase,
    pub letters: Vec<Letter>,
}

impl PauliString {
    pub fn new(phase: Phase, letters: Vec<Letter>) -> Self {
        Self { phase, letters }
    }

    pub fn identity(len: usize) -> Self {
        Self::new(Phase::ONE, vec![Letter::I; len])
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn y_count(&self) -> usize {
        self.letters.iter().filter(|l| **l == Letter::Y).count()
    }

    /// Even number of `Y`s: the bare string is a real symmetric matrix.
    pub fn is_symmetric(&self) -> bool {
        self.y_count().is_multiple_of(2)
    }

    /// True when `phase · string` has only real entries.
    pub fn is_real(&self) -> bool {
        let phase_real = self.phase == Phase::ONE || self.phase == Phase::MINUS_ONE;
        self.is_symmetric() == phase_real
    }

    /// Letterwise product with accumulated phase.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString, PauliError> {
        if self.len() != other.len() {
            return Err(PauliError::LengthMismatch(self.len(), other.len()));
        }
        let mut phase = self.phase.times(other.phase);
        let letters = self
            .letters
            .iter()
            .zip(other.letters.iter())
            .map(|(&a, &b)| {
                let (p, l) = letter_mul(a, b);
                phase = phase.times(p);
                l
            })
            .collect();
        Ok(PauliString::new(phase, letters))
    }

    /// Dense complex realization via Kronecker products, capped at `n ≤ 6`.
    pub fn dense(&self) -> Result<DMatrix<Complex64>, PauliError> {
        if self.letters.len() > MAX_DENSE_QUBITS + 1 {
            return Err(PauliError::SizeGuard(self.letters.len().saturating_sub(1)));
        }
        let mut m = DMatrix::from_element(1, 1, self.phase.value());
        // letters[0] is the most significant factor; register bit n comes
        // next, down to bit 1 (the least significant index bit).
        for letter in
            std::iter::once(self.letters[0]).chain(self.letters[1..].iter().rev().cloned())
        {
            m = m.kronecker(&letter_matrix(letter));
        }
        Ok(m)
    }

    /// Dense real realization; errors when the phased string is not real.
    pub fn dense_real(&self) -> Result<DMatrix<f64>, PauliError> {
        if !self.is_real() {
            return Err(PauliError::NotReal(self.phase));
        }
        let c = self.dense()?;
        Ok(DMatrix::from_iterator(
            c.nrows(),
            c.ncols(),
            c.iter().map(|v| v.re),
        ))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ", self.phase)?;
        for l in &self.letters {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

fn letter_matrix(letter: Letter) -> DMatrix<Complex64> {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match letter {
        Letter::I => DMatrix::from_row_slice(2, 2, &[one, z, z, one]),
        Letter::X => DMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        Letter::Y => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        Letter::Z => DMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    }
}

/// Sparse real combination of Pauli strings in canonical form.
///
/// Each key is a bare letter string; its implied prefactor is
/// `i^(y_count mod 2)` so that every stored term is a real matrix and the
/// coefficients are real. Coefficients with magnitude below [`COEFF_EPS`]
/// are dropped on every operation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PauliSum {
    terms: BTreeMap<Vec<Letter>, f64>,
}

impl PauliSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `coeff · phase · string`, canonicalizing the phase.
    ///
    /// Only phases that keep the term real are accepted (`±1` for symmetric
    /// strings, `±i` for antisymmetric ones).
    pub fn add_string(&mut self, s: &PauliString, coeff: f64) -> Result<(), PauliError> {
        if !s.is_real() {
            return Err(PauliError::NotReal(s.phase));
        }
        let sign = match s.phase {
            Phase::ONE | Phase::I => 1.0,
            _ => -1.0,
        };
        self.add_canonical(s.letters.clone(), sign * coeff);
        Ok(())
    }

    fn add_canonical(&mut self, letters: Vec<Letter>, coeff: f64) {
        match self.terms.entry(letters) {
            Entry::Occupied(mut e) => {
                let v = e.get_mut();
                *v += coeff;
                if v.abs() < COEFF_EPS {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                if coeff.abs() >= COEFF_EPS {
                    e.insert(coeff);
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Iterates `(canonical string, real coefficient)` pairs; the canonical
    /// string carries phase `+1` (even `Y`s) or `+i` (odd `Y`s).
    pub fn iter(&self) -> impl Iterator<Item = (PauliString, f64)> + '_ {
        self.terms.iter().map(|(letters, &c)| {
            let phase = if letters.iter().filter(|l| **l == Letter::Y).count() % 2 == 0 {
                Phase::ONE
            } else {
                Phase::I
            };
            (PauliString::new(phase, letters.clone()), c)
        })
    }

    pub fn coefficient(&self, letters: &[Letter]) -> f64 {
        self.terms.get(letters).copied().unwrap_or(0.0)
    }

    pub fn scale(&self, factor: f64) -> PauliSum {
        let mut out = PauliSum::new();
        for (k, v) in &self.terms {
            let c = v * factor;
            if c.abs() >= COEFF_EPS {
                out.terms.insert(k.clone(), c);
            }
        }
        out
    }

    pub fn add(&self, other: &PauliSum) -> PauliSum {
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_canonical(k.clone(), *v);
        }
        out
    }

    /// Matrix product of two sums, canonicalized.
    pub fn mul(&self, other: &PauliSum) -> Result<PauliSum, PauliError> {
        let mut out = PauliSum::new();
        for (sa, ca) in self.iter() {
            for (sb, cb) in other.iter() {
                let prod = sa.multiply(&sb)?;
                out.add_string(&prod, ca * cb)?;
            }
        }
        Ok(out)
    }

    /// Commutator `[a, b] = ab - ba` in sparse form.
    pub fn commutator(&self, other: &PauliSum) -> Result<PauliSum, PauliError> {
        Ok(self.mul(other)?.add(&other.mul(self)?.scale(-1.0)))
    }

    /// Dense real realization of the whole sum over `len = n + 1` qubits.
    pub fn dense(&self, len: usize) -> Result<DMatrix<f64>, PauliError> {
        if len > MAX_DENSE_QUBITS + 1 {
            return Err(PauliError::SizeGuard(len - 1));
        }
        let dim = 1usize << len;
        let mut out = DMatrix::<f64>::zeros(dim, dim);
        for (s, c) in self.iter() {
            out += s.dense_real()? * c;
        }
        Ok(out)
    }
}

/// Orthogonal Pauli basis of `sp(M, R)` on `n` register qubits:
/// `i{Y ⊗ P_s} ∪ i{I ⊗ P_a} ∪ {X ⊗ P_s} ∪ {Z ⊗ P_s}`, `M(2M+1)` elements.
pub fn sp_basis(n: usize) -> Result<Vec<PauliString>, PauliError> {
    if n == 0 {
        return Err(PauliError::EmptyRegister);
    }
    if n > MAX_DENSE_QUBITS {
        return Err(PauliError::SizeGuard(n));
    }
    let mut y_sym = Vec::new();
    let mut i_anti = Vec::new();
    let mut x_sym = Vec::new();
    let mut z_sym = Vec::new();
    for idx in 0..(1usize << (2 * n)) {
        let register: Vec<Letter> = (0..n)
            .map(|j| match (idx >> (2 * j)) & 3 {
                0 => Letter::I,
                1 => Letter::X,
                2 => Letter::Y,
                _ => Letter::Z,
            })
            .collect();
        let y_parity = register.iter().filter(|l| **l == Letter::Y).count() % 2;
        let with = |first: Letter, phase: Phase| {
            let mut letters = Vec::with_capacity(n + 1);
            letters.push(first);
            letters.extend(register.iter().cloned());
            PauliString::new(phase, letters)
        };
        if y_parity == 0 {
            y_sym.push(with(Letter::Y, Phase::I));
            x_sym.push(with(Letter::X, Phase::ONE));
            z_sym.push(with(Letter::Z, Phase::ONE));
        } else {
            i_anti.push(with(Letter::I, Phase::I));
        }
    }
    let mut basis = y_sym;
    basis.append(&mut i_anti);
    basis.append(&mut x_sym);
    basis.append(&mut z_sym);
    Ok(basis)
}

/// Qubit-level evolution class read off a Pauli decomposition of `ΩK`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeClass {
    /// Every term is `iY ⊗ P_s` or `iI ⊗ P_a`: anti-Hermitian, unitary.
    RealTime,
    /// Every term is `X ⊗ P_s` or `Z ⊗ P_s`: Hermitian, imaginary time.
    ImaginaryTime,
    Mixed,
}

impl TimeClass {
    /// The matching phase-space generator class.
    pub fn generator_kind(self) -> GeneratorKind {
        match self {
            TimeClass::RealTime => GeneratorKind::ParticlePreserving,
            TimeClass::ImaginaryTime => GeneratorKind::NonParticlePreserving,
            TimeClass::Mixed => GeneratorKind::Mixed,
        }
    }
}

/// Classifies a Pauli decomposition of `ΩK`.
pub fn classify_pauli_generator(omega_k: &PauliSum) -> TimeClass {
    let mut real_time = true;
    let mut imag_time = true;
    for (s, _) in omega_k.iter() {
        let register_y = s.letters[1..].iter().filter(|l| **l == Letter::Y).count() % 2;
        let is_real_term = match s.letters[0] {
            Letter::Y => register_y == 0,
            Letter::I => register_y == 1,
            _ => false,
        };
        let is_imag_term = matches!(s.letters[0], Letter::X | Letter::Z) && register_y == 0;
        real_time &= is_real_term;
        imag_time &= is_imag_term;
    }
    if real_time {
        TimeClass::RealTime
    } else if imag_time {
        TimeClass::ImaginaryTime
    } else {
        TimeClass::Mixed
    }
}

/// Expands a dense real matrix over the canonical Pauli terms.
///
/// The matrix dimension must be `2^(n+1)` with `n ≤ 6`; the expansion is
/// exact since the canonical terms span all real matrices.
pub fn pauli_decompose(m: &DMatrix<f64>) -> Result<PauliSum, PauliError> {
    let dim = m.nrows();
    if !m.is_square() || !dim.is_power_of_two() || dim < 4 {
        return Err(PauliError::BadDimension(dim));
    }
    let len = dim.trailing_zeros() as usize;
    if len > MAX_DENSE_QUBITS + 1 {
        return Err(PauliError::SizeGuard(len - 1));
    }
    let mut out = PauliSum::new();
    for idx in 0..(1usize << (2 * len)) {
        let letters: Vec<Letter> = (0..len)
            .map(|slot| match (idx >> (2 * slot)) & 3 {
                0 => Letter::I,
                1 => Letter::X,
                2 => Letter::Y,
                _ => Letter::Z,
            })
            .collect();
        let y_parity = letters.iter().filter(|l| **l == Letter::Y).count() % 2;
        let phase = if y_parity == 0 { Phase::ONE } else { Phase::I };
        let s = PauliString::new(phase, letters.clone());
        // tr(termᵀ · m) / dim; canonical terms are real so the adjoint is
        // the transpose.
        let mut acc = 0.0;
        for col in 0..dim {
            let (row, val) = string_entry(&s, col, len);
            acc += val * m[(row, col)];
        }
        let coeff = acc / dim as f64;
        if coeff.abs() >= COEFF_EPS {
            out.add_canonical(letters, coeff);
        }
    }
    Ok(out)
}

/// For a canonical (real) string, returns the unique nonzero row of column
/// `col` together with the real entry value.
fn string_entry(s: &PauliString, col: usize, len: usize) -> (usize, f64) {
    let mut row = col;
    let mut val = s.phase.value();
    for (slot, letter) in s.letters.iter().enumerate() {
        // letters[0] -> index bit len-1 (symplectic); letters[j] -> bit j-1.
        let bit_pos = if slot == 0 { len - 1 } else { slot - 1 };
        let col_bit = (col >> bit_pos) & 1;
        match letter {
            Letter::I => {}
            Letter::X => row ^= 1 << bit_pos,
            Letter::Y => {
                row ^= 1 << bit_pos;
                // Y[1-c, c]: c = 0 -> i, c = 1 -> -i.
                val *= if col_bit == 0 {
                    Complex64::new(0.0, 1.0)
                } else {
                    Complex64::new(0.0, -1.0)
                };
            }
            Letter::Z => {
                if col_bit == 1 {
                    val = -val;
                }
            }
        }
    }
    debug_assert!(val.im.abs() < 1e-12);
    (row, val.re)
}

/// Left-multiplies a sum by `Ω = iY ⊗ I`, producing the `ΩK` decomposition
/// from a decomposition of `K` over `len = n + 1` letters.
pub fn omega_times(k: &PauliSum, len: usize) -> Result<PauliSum, PauliError> {
    let mut letters = vec![Letter::I; len];
    letters[0] = Letter::Y;
    let omega = PauliString::new(Phase::I, letters);
    let mut omega_sum = PauliSum::new();
    omega_sum.add_string(&omega, 1.0)?;
    omega_sum.mul(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::{build_omega, max_abs};
    use approx::assert_abs_diff_eq;

    fn s(phase: Phase, letters: &[Letter]) -> PauliString {
        PauliString::new(phase, letters.to_vec())
    }

    #[test]
    fn single_letter_products() {
        use Letter::*;
        let xy = s(Phase::ONE, &[X]).multiply(&s(Phase::ONE, &[Y])).unwrap();
        assert_eq!(xy, s(Phase::I, &[Z]));
        let yx = s(Phase::ONE, &[Y]).multiply(&s(Phase::ONE, &[X])).unwrap();
        assert_eq!(yx, s(Phase::MINUS_I, &[Z]));
    }

    #[test]
    fn omega_times_x_tensor_is_z_tensor() {
        use Letter::*;
        // (iY ⊗ I) · (X ⊗ P) = Z ⊗ P
        let omega = s(Phase::I, &[Y, I]);
        let xp = s(Phase::ONE, &[X, X]);
        assert_eq!(omega.multiply(&xp).unwrap(), s(Phase::ONE, &[Z, X]));
    }

    #[test]
    fn hermitian_square_is_identity() {
        use Letter::*;
        for p in [s(Phase::ONE, &[X, Y, Z]), s(Phase::MINUS_ONE, &[Y, Y, I])] {
            let sq = p.multiply(&p).unwrap();
            assert_eq!(sq, PauliString::identity(3));
        }
    }

    #[test]
    fn dense_matches_bit_layout() {
        use Letter::*;
        // Z on the symplectic factor: diag(+1 on q-block, -1 on p-block).
        let zs = s(Phase::ONE, &[Z, I]).dense_real().unwrap();
        assert_eq!(zs[(0, 0)], 1.0);
        assert_eq!(zs[(1, 1)], 1.0);
        assert_eq!(zs[(2, 2)], -1.0);
        assert_eq!(zs[(3, 3)], -1.0);
        // Z on register bit 1: diag by the low index bit.
        let zr = s(Phase::ONE, &[I, Z]).dense_real().unwrap();
        assert_eq!(zr[(0, 0)], 1.0);
        assert_eq!(zr[(1, 1)], -1.0);
        assert_eq!(zr[(2, 2)], 1.0);
        assert_eq!(zr[(3, 3)], -1.0);
    }

    #[test]
    fn commutator_of_x_and_z_on_same_register_string_is_y_type() {
        use Letter::*;
        let mut a = PauliSum::new();
        a.add_string(&s(Phase::ONE, &[X, X]), 1.0).unwrap();
        let mut b = PauliSum::new();
        b.add_string(&s(Phase::ONE, &[Z, X]), 1.0).unwrap();
        let c = a.commutator(&b).unwrap();
        assert_eq!(c.num_terms(), 1);
        let (term, coeff) = c.iter().next().unwrap();
        assert_eq!(term.letters, vec![Y, I]);
        assert_abs_diff_eq!(coeff.abs(), 2.0);
    }

    #[test]
    fn commutator_with_itself_vanishes() {
        use Letter::*;
        let mut a = PauliSum::new();
        a.add_string(&s(Phase::ONE, &[X, Z]), 0.7).unwrap();
        a.add_string(&s(Phase::I, &[Y, I]), -1.3).unwrap();
        assert!(a.commutator(&a).unwrap().is_zero());
    }

    #[test]
    fn commutator_of_disjoint_factors_vanishes() {
        use Letter::*;
        // iY ⊗ I and iI ⊗ P_a act on different factors.
        let mut a = PauliSum::new();
        a.add_string(&s(Phase::I, &[Y, I]), 1.0).unwrap();
        let mut b = PauliSum::new();
        b.add_string(&s(Phase::I, &[I, Y]), 1.0).unwrap();
        assert!(a.commutator(&b).unwrap().is_zero());
    }

    #[test]
    fn commutator_y_family_closure_case() {
        use Letter::*;
        // [iY ⊗ X, iI ⊗ Y] lands back in the iY ⊗ P_s family.
        let mut a = PauliSum::new();
        a.add_string(&s(Phase::I, &[Y, X]), 1.0).unwrap();
        let mut b = PauliSum::new();
        b.add_string(&s(Phase::I, &[I, Y]), 1.0).unwrap();
        let c = a.commutator(&b).unwrap();
        assert_eq!(c.num_terms(), 1);
        let (term, coeff) = c.iter().next().unwrap();
        assert_eq!(term.letters, vec![Y, Z]);
        assert_eq!(term.phase, Phase::I);
        assert_abs_diff_eq!(coeff.abs(), 2.0);
    }

    #[test]
    fn sp_basis_counts() {
        assert_eq!(sp_basis(1).unwrap().len(), 10);
        assert_eq!(sp_basis(2).unwrap().len(), 36);
        assert!(matches!(sp_basis(7), Err(PauliError::SizeGuard(7))));
        assert!(matches!(sp_basis(0), Err(PauliError::EmptyRegister)));
    }

    #[test]
    fn sp_basis_elements_satisfy_symplectic_condition() {
        for n in [1usize, 2] {
            let omega = build_omega(1 << n);
            for e in sp_basis(n).unwrap() {
                let d = e.dense_real().unwrap();
                let lhs = d.transpose() * &omega;
                let rhs = &omega * d * -1.0;
                assert_abs_diff_eq!(max_abs(&(lhs - rhs)), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sp_basis_is_hilbert_schmidt_orthogonal() {
        let basis = sp_basis(1).unwrap();
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let da = a.dense_real().unwrap();
                let db = b.dense_real().unwrap();
                let ip = (da.transpose() * db).trace();
                if i == j {
                    assert_abs_diff_eq!(ip, 4.0, epsilon = 1e-12);
                } else {
                    assert_abs_diff_eq!(ip, 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn classify_phase_and_squeeze_forms() {
        use Letter::*;
        // Phase gate on register state |1> of n=1: ΩK = 2iY ⊗ |1><1|
        //   = iY ⊗ (I - Z).
        let mut phase_gen = PauliSum::new();
        phase_gen.add_string(&s(Phase::I, &[Y, I]), 1.0).unwrap();
        phase_gen.add_string(&s(Phase::I, &[Y, Z]), -1.0).unwrap();
        assert_eq!(classify_pauli_generator(&phase_gen), TimeClass::RealTime);

        // Squeeze: ΩK = 2Z ⊗ |1><1| = Z ⊗ (I - Z).
        let mut sq_gen = PauliSum::new();
        sq_gen.add_string(&s(Phase::ONE, &[Z, I]), 1.0).unwrap();
        sq_gen.add_string(&s(Phase::ONE, &[Z, Z]), -1.0).unwrap();
        assert_eq!(classify_pauli_generator(&sq_gen), TimeClass::ImaginaryTime);

        let both = phase_gen.add(&sq_gen);
        assert_eq!(classify_pauli_generator(&both), TimeClass::Mixed);
    }

    #[test]
    fn decompose_round_trips_dense() {
        use Letter::*;
        let mut sum = PauliSum::new();
        sum.add_string(&s(Phase::ONE, &[X, Z]), 0.5).unwrap();
        sum.add_string(&s(Phase::I, &[Y, X]), -1.25).unwrap();
        sum.add_string(&s(Phase::I, &[I, Y]), 2.0).unwrap();
        let dense = sum.dense(2).unwrap();
        let back = pauli_decompose(&dense).unwrap();
        assert_eq!(back.num_terms(), 3);
        assert_abs_diff_eq!(back.coefficient(&[X, Z]), 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(back.coefficient(&[Y, X]), -1.25, epsilon = 1e-13);
        assert_abs_diff_eq!(back.coefficient(&[I, Y]), 2.0, epsilon = 1e-13);
    }

    #[test]
    fn sp_basis_closed_under_commutation_symbolically() {
        // Commutators of basis strings are single strings; closure means
        // every one lands back in one of the four family shapes.
        let in_basis_family = |s: &PauliString| {
            let reg_y = s.letters[1..].iter().filter(|l| **l == Letter::Y).count() % 2;
            match s.letters[0] {
                Letter::Y | Letter::X | Letter::Z => reg_y == 0,
                Letter::I => reg_y == 1,
            }
        };
        for n in [1usize, 2, 3] {
            let basis = sp_basis(n).unwrap();
            for a in &basis {
                let mut sa = PauliSum::new();
                sa.add_string(a, 1.0).unwrap();
                for b in &basis {
                    let mut sb = PauliSum::new();
                    sb.add_string(b, 1.0).unwrap();
                    let comm = sa.commutator(&sb).unwrap();
                    for (term, _) in comm.iter() {
                        assert!(
                            in_basis_family(&term),
                            "[{a}, {b}] left the algebra: {term}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn omega_times_maps_squeeze_k_to_imaginary_time() {
        use Letter::*;
        // K = 2 X ⊗ I: ΩK = 2 Z ⊗ I.
        let mut k = PauliSum::new();
        k.add_string(&s(Phase::ONE, &[X, I]), 2.0).unwrap();
        let ok = omega_times(&k, 2).unwrap();
        assert_abs_diff_eq!(ok.coefficient(&[Z, I]), 2.0, epsilon = 1e-13);
        assert_eq!(classify_pauli_generator(&ok), TimeClass::ImaginaryTime);
    }
}
