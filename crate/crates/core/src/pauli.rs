//! Pauli strings, weighted Pauli sums, their dense realization, and the
//! decomposition of Hermitian matrices into Pauli sums.
//!
//! Qubit 0 is the least-significant bit of a computational-basis index. In
//! text form a string is written like a Kronecker product, most-significant
//! qubit first: `"XZ"` is `X ⊗ Z`, i.e. `Z` on qubit 0 and `X` on qubit 1.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::scalar::{cplx, i_pow, Cplx, Real};
use crate::statevector::StateVector;

/// Largest qubit count realized as a dense matrix.
pub const DENSE_CAP: usize = 12;

/// Largest qubit count a [`PauliString`] can address.
pub const MAX_PAULI_QUBITS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn matrix<T: Real>(self) -> Matrix<T> {
        let (o, z) = (T::one(), T::zero());
        let rows = match self {
            Pauli::I => [cplx(o, z), cplx(z, z), cplx(z, z), cplx(o, z)],
            Pauli::X => [cplx(z, z), cplx(o, z), cplx(o, z), cplx(z, z)],
            Pauli::Y => [cplx(z, z), cplx(z, -o), cplx(z, o), cplx(z, z)],
            Pauli::Z => [cplx(o, z), cplx(z, z), cplx(z, z), cplx(-o, z)],
        };
        Matrix::from_rows(rows.to_vec())
    }
}

/// Tensor product of single-qubit Paulis, stored as X and Z bitmasks
/// (`Y` sets both bits).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        assert!(n_qubits <= MAX_PAULI_QUBITS);
        Self { n_qubits, x: 0, z: 0 }
    }

    /// Builds from raw masks; bits at or above `n_qubits` must be clear.
    pub fn from_masks(n_qubits: usize, x: u64, z: u64) -> Result<Self> {
        if n_qubits > MAX_PAULI_QUBITS {
            return Err(Error::Size { what: "pauli string", n: n_qubits, cap: MAX_PAULI_QUBITS });
        }
        let valid = if n_qubits == 64 { u64::MAX } else { (1u64 << n_qubits) - 1 };
        if (x | z) & !valid != 0 {
            return Err(Error::Validation(format!(
                "pauli masks x={x:#b} z={z:#b} address qubits beyond {n_qubits}"
            )));
        }
        Ok(Self { n_qubits, x, z })
    }

    /// Builds from per-qubit letters, `letters[q]` acting on qubit `q`.
    pub fn from_qubit_letters(letters: &[Pauli]) -> Self {
        let mut s = Self::identity(letters.len());
        for (q, &p) in letters.iter().enumerate() {
            s = s.with(q, p);
        }
        s
    }

    /// Single non-identity letter on `qubit`.
    pub fn single(n_qubits: usize, qubit: usize, p: Pauli) -> Self {
        Self::identity(n_qubits).with(qubit, p)
    }

    /// Returns a copy with `qubit` set to `p`.
    pub fn with(mut self, qubit: usize, p: Pauli) -> Self {
        assert!(qubit < self.n_qubits, "qubit {qubit} out of range");
        let bit = 1u64 << qubit;
        let (xb, zb) = p.bits();
        self.x = if xb { self.x | bit } else { self.x & !bit };
        self.z = if zb { self.z | bit } else { self.z & !bit };
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        let bit = 1u64 << qubit;
        Pauli::from_bits(self.x & bit != 0, self.z & bit != 0)
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// Number of `Y` letters.
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Phase `c` in `P|j⟩ = c |j ⊕ x⟩`.
    #[inline]
    pub fn phase_on<T: Real>(&self, basis: usize) -> Cplx<T> {
        let sign = ((basis as u64) & self.z).count_ones() * 2;
        i_pow(self.y_count() + sign)
    }

    /// Product `self · other = i^k · P`, returned as `(k mod 4, P)`.
    pub fn mul(&self, other: &Self) -> (u32, PauliString) {
        debug_assert_eq!(self.n_qubits, other.n_qubits);
        // P = i^{|x∧z|} X^x Z^z and Z^z1 X^x2 = (-1)^{|z1∧x2|} X^x2 Z^z1.
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let k = self.y_count() + other.y_count() + 2 * (self.z & other.x).count_ones()
            + 3 * (x & z).count_ones();
        (k & 3, PauliString { n_qubits: self.n_qubits, x, z })
    }

    pub fn commutes_with(&self, other: &Self) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in (0..self.n_qubits).rev() {
            write!(f, "{}", self.get(q).letter())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses Kronecker-ordered letters: the last character acts on qubit 0.
    fn from_str(s: &str) -> Result<Self> {
        let n = s.chars().count();
        if n == 0 || n > MAX_PAULI_QUBITS {
            return Err(Error::Validation(format!("pauli string length {n} not in 1..=64")));
        }
        let mut out = Self::identity(n);
        for (pos, c) in s.chars().enumerate() {
            let p = Pauli::from_letter(c)
                .ok_or_else(|| Error::Validation(format!("invalid pauli letter {c:?} in {s:?}")))?;
            out = out.with(n - 1 - pos, p);
        }
        Ok(out)
    }
}

/// Real-weighted sum of Pauli strings in canonical form: sorted by string,
/// one term per string.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum<T> {
    n_qubits: usize,
    terms: Vec<(T, PauliString)>,
}

impl<T: Real> PauliSum<T> {
    pub fn zero(n_qubits: usize) -> Self {
        Self { n_qubits, terms: Vec::new() }
    }

    /// Merges duplicate strings and sorts. Fails if any string has a different width.
    pub fn from_terms(
        n_qubits: usize,
        terms: impl IntoIterator<Item = (T, PauliString)>,
    ) -> Result<Self> {
        let mut v: Vec<(T, PauliString)> = Vec::new();
        for (c, p) in terms {
            if p.n_qubits() != n_qubits {
                return Err(Error::Validation(format!(
                    "term {p} has {} qubits, sum has {n_qubits}",
                    p.n_qubits()
                )));
            }
            v.push((c, p));
        }
        v.sort_by(|a, b| a.1.cmp(&b.1));
        let mut merged: Vec<(T, PauliString)> = Vec::with_capacity(v.len());
        for (c, p) in v {
            match merged.last_mut() {
                Some((acc, q)) if *q == p => *acc += c,
                _ => merged.push((c, p)),
            }
        }
        Ok(Self { n_qubits, terms: merged })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(T, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, p: &PauliString) -> T {
        self.terms
            .binary_search_by(|(_, q)| q.cmp(p))
            .map(|i| self.terms[i].0)
            .unwrap_or_else(|_| T::zero())
    }

    /// Drops terms with `|c| < tol`.
    pub fn pruned(mut self, tol: T) -> Self {
        self.terms.retain(|(c, _)| c.abs() >= tol);
        self
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|&(c, p)| (c * s, p)).collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Result<Self> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Shape(format!(
                "cannot add sums on {} and {} qubits",
                self.n_qubits, other.n_qubits
            )));
        }
        Self::from_terms(
            self.n_qubits,
            self.terms
                .iter()
                .map(|&(c, p)| (a * c, p))
                .chain(other.terms.iter().map(|&(c, p)| (b * c, p))),
        )
    }

    /// Adds `c` times the identity.
    pub fn shifted(&self, c: T) -> Self {
        let id = PauliString::identity(self.n_qubits);
        Self::from_terms(self.n_qubits, self.terms.iter().copied().chain([(c, id)]))
            .expect("same width")
    }

    /// Bound on the spectral radius, `Σ |w_j|`.
    pub fn one_norm(&self) -> T {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    /// Serializes to the line-oriented text format.
    pub fn to_text(&self) -> String {
        let mut s = format!("qubits {}\n", self.n_qubits);
        for (c, p) in &self.terms {
            s.push_str(&format!("{:.16e} {}\n", c.as_f64(), p));
        }
        s
    }

    /// Parses the line-oriented text format: a `qubits <n>` header, then
    /// `<coefficient> <letters>` lines; `#` starts a comment line.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut n_qubits: Option<usize> = None;
        let mut terms = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tok = line.split_whitespace();
            let (first, second) = (tok.next(), tok.next());
            if tok.next().is_some() {
                return Err(Error::Parse { line: line_no, message: format!("trailing tokens in {line:?}") });
            }
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            match (first, second, n_qubits) {
                (Some("qubits"), Some(n), None) => {
                    let n: usize = n.parse().map_err(|_| parse_err(format!("bad qubit count {n:?}")))?;
                    if n == 0 || n > MAX_PAULI_QUBITS {
                        return Err(parse_err(format!("qubit count {n} not in 1..=64")));
                    }
                    n_qubits = Some(n);
                }
                (Some("qubits"), _, Some(_)) => return Err(parse_err("duplicate qubits header".into())),
                (Some(_), Some(_), None) => return Err(parse_err("term before `qubits <n>` header".into())),
                (Some(c), Some(letters), Some(n)) => {
                    let c: f64 = c.parse().map_err(|_| parse_err(format!("bad coefficient {c:?}")))?;
                    if !c.is_finite() {
                        return Err(parse_err(format!("non-finite coefficient {c}")));
                    }
                    if letters.chars().count() != n {
                        return Err(Error::Validation(format!(
                            "line {line_no}: string {letters:?} has length {}, expected {n}",
                            letters.chars().count()
                        )));
                    }
                    let p: PauliString = letters.parse().map_err(|e| parse_err(format!("{e}")))?;
                    terms.push((T::lit(c), p));
                }
                _ => return Err(parse_err(format!("expected `<coefficient> <letters>`, got {line:?}"))),
            }
        }
        let n = n_qubits.ok_or(Error::Parse { line: 0, message: "missing `qubits <n>` header".into() })?;
        Self::from_terms(n, terms)
    }
}

/// Complex-weighted accumulator for operator algebra (Jordan–Wigner products,
/// excitation generators). Finalized into a [`PauliSum`] once the imaginary
/// parts are known to cancel.
#[derive(Debug, Clone)]
pub struct PauliAccumulator<T> {
    n_qubits: usize,
    terms: HashMap<PauliString, Cplx<T>>,
}

impl<T: Real> PauliAccumulator<T> {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, terms: HashMap::new() }
    }

    pub fn identity(n_qubits: usize) -> Self {
        let mut a = Self::new(n_qubits);
        a.add(cplx(T::one(), T::zero()), PauliString::identity(n_qubits));
        a
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn add(&mut self, c: Cplx<T>, p: PauliString) {
        debug_assert_eq!(p.n_qubits(), self.n_qubits);
        *self.terms.entry(p).or_default() += c;
    }

    /// Adds `scale · other`.
    pub fn add_scaled(&mut self, other: &Self, scale: Cplx<T>) {
        for (p, &c) in &other.terms {
            self.add(c * scale, *p);
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::new(self.n_qubits);
        for (p, &a) in &self.terms {
            for (q, &b) in &other.terms {
                let (k, r) = p.mul(q);
                out.add(a * b * i_pow::<T>(k), r);
            }
        }
        out
    }

    /// Terms sorted by string with exact zeros removed.
    pub fn sorted_terms(&self) -> Vec<(Cplx<T>, PauliString)> {
        let mut v: Vec<_> = self
            .terms
            .iter()
            .filter(|(_, c)| **c != Cplx::default())
            .map(|(p, c)| (*c, *p))
            .collect();
        v.sort_by(|a, b| a.1.cmp(&b.1));
        v
    }

    /// Real sum; fails if any imaginary part exceeds `imag_tol`. Terms with
    /// modulus below `drop_tol` are omitted.
    pub fn into_real(self, imag_tol: T, drop_tol: T) -> Result<PauliSum<T>> {
        let n = self.n_qubits;
        let mut out = Vec::with_capacity(self.terms.len());
        for (c, p) in self.sorted_terms() {
            if c.im.abs() > imag_tol {
                return Err(Error::Validation(format!(
                    "term {p} has imaginary coefficient {} (operator not Hermitian)",
                    c.im
                )));
            }
            if c.re.abs() >= drop_tol {
                out.push((c.re, p));
            }
        }
        PauliSum::from_terms(n, out)
    }

    /// Purely imaginary sum `Σ i c_m P_m`, returned as the real `c_m`; fails if
    /// any real part exceeds `real_tol`.
    pub fn into_imaginary(self, real_tol: T, drop_tol: T) -> Result<PauliSum<T>> {
        let n = self.n_qubits;
        let mut out = Vec::with_capacity(self.terms.len());
        for (c, p) in self.sorted_terms() {
            if c.re.abs() > real_tol {
                return Err(Error::Validation(format!(
                    "term {p} has real coefficient {} (operator not anti-Hermitian)",
                    c.re
                )));
            }
            if c.im.abs() >= drop_tol {
                out.push((c.im, p));
            }
        }
        PauliSum::from_terms(n, out)
    }
}

fn check_dense_cap(what: &'static str, n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::Size { what, n, cap });
    }
    Ok(())
}

/// Dense `2^n × 2^n` matrix of a Pauli string.
pub fn pauli_matrix<T: Real>(p: &PauliString) -> Result<Matrix<T>> {
    pauli_matrix_capped(p, DENSE_CAP)
}

pub fn pauli_matrix_capped<T: Real>(p: &PauliString, cap: usize) -> Result<Matrix<T>> {
    check_dense_cap("pauli_matrix", p.n_qubits(), cap)?;
    let dim = 1usize << p.n_qubits();
    let mut m = Matrix::zeros(dim);
    let x = p.x_mask() as usize;
    for col in 0..dim {
        m[(col ^ x, col)] = p.phase_on(col);
    }
    Ok(m)
}

/// Dense matrix `Σ_j w_j P_j`.
pub fn pauli_sum_matrix<T: Real>(h: &PauliSum<T>) -> Result<Matrix<T>> {
    pauli_sum_matrix_capped(h, DENSE_CAP)
}

pub fn pauli_sum_matrix_capped<T: Real>(h: &PauliSum<T>, cap: usize) -> Result<Matrix<T>> {
    check_dense_cap("pauli_sum_matrix", h.n_qubits(), cap)?;
    let dim = 1usize << h.n_qubits();
    let mut m = Matrix::zeros(dim);
    for &(w, p) in h.terms() {
        let x = p.x_mask() as usize;
        for col in 0..dim {
            m[(col ^ x, col)] += p.phase_on::<T>(col) * w;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy)]
pub struct DecomposeOptions {
    pub cap: usize,
    pub drop_tol: f64,
    pub hermitian_tol: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { cap: DENSE_CAP, drop_tol: 1e-12, hermitian_tol: 1e-10 }
    }
}

/// Unnormalized Walsh–Hadamard transform: `out[z] = Σ_i (-1)^{|i∧z|} v[i]`.
fn walsh_hadamard<T: Real>(v: &mut [Cplx<T>]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (s, d) = (*a + *b, *a - *b);
                *a = s;
                *b = d;
            }
        }
        h *= 2;
    }
}

fn dim_to_qubits(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::Shape(format!("matrix dimension {dim} is not a power of two")));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// All Pauli coefficients `Tr(P M) / 2^n` as complex numbers, ordered by
/// string. Zero X-mask blocks of diagonal matrices are skipped.
pub fn pauli_coefficients<T: Real>(m: &Matrix<T>, cap: usize) -> Result<Vec<(Cplx<T>, PauliString)>> {
    let n = dim_to_qubits(m.dim())?;
    check_dense_cap("decompose_hermitian", n, cap)?;
    let dim = m.dim();
    let norm = T::from_count(dim).recip();
    let x_range: Vec<usize> = if m.is_diagonal() { vec![0] } else { (0..dim).collect() };
    let blocks: Vec<Vec<(Cplx<T>, PauliString)>> = x_range
        .par_iter()
        .map(|&x| {
            let mut v: Vec<Cplx<T>> = (0..dim).map(|k| m[(k, k ^ x)]).collect();
            walsh_hadamard(&mut v);
            v.into_iter()
                .enumerate()
                .map(|(z, w)| {
                    let p = PauliString { n_qubits: n, x: x as u64, z: z as u64 };
                    (w * i_pow::<T>(p.y_count()) * norm, p)
                })
                .collect()
        })
        .collect();
    let mut out: Vec<_> = blocks.into_iter().flatten().collect();
    out.sort_by(|a, b| a.1.cmp(&b.1));
    Ok(out)
}

/// Decomposes a Hermitian matrix into `Σ α_k P_k` with `α_k = Tr(P_k M)/2^n`.
pub fn decompose_hermitian<T: Real>(m: &Matrix<T>, opts: DecomposeOptions) -> Result<PauliSum<T>> {
    let n = dim_to_qubits(m.dim())?;
    let dev = m.hermiticity_deviation();
    if dev > T::tol(opts.hermitian_tol) {
        return Err(Error::Validation(format!("matrix is not Hermitian (deviation {dev})")));
    }
    // Project onto the Hermitian part so coefficient imaginary parts are pure roundoff.
    let herm = m.add(&m.adjoint()).scale(cplx(T::lit(0.5), T::zero()));
    let drop = T::lit(opts.drop_tol);
    let terms = pauli_coefficients(&herm, opts.cap)?
        .into_iter()
        .filter(|(c, _)| c.re.abs() >= drop)
        .map(|(c, p)| (c.re, p));
    PauliSum::from_terms(n, terms)
}

/// Decomposes a real diagonal into Z strings, scanning `2^n` strings only.
pub fn decompose_diagonal<T: Real>(diag: &[T], drop_tol: T) -> Result<PauliSum<T>> {
    let n = dim_to_qubits(diag.len())?;
    let mut v: Vec<Cplx<T>> = diag.iter().map(|&d| cplx(d, T::zero())).collect();
    walsh_hadamard(&mut v);
    let norm = T::from_count(diag.len()).recip();
    let terms = v
        .into_iter()
        .enumerate()
        .map(|(z, w)| (w.re * norm, PauliString { n_qubits: n, x: 0, z: z as u64 }))
        .filter(|(c, _)| c.abs() >= drop_tol);
    PauliSum::from_terms(n, terms)
}

/// `P|ψ⟩`.
pub fn apply_pauli<T: Real>(p: &PauliString, s: &StateVector<T>) -> Result<StateVector<T>> {
    let mut out = s.clone();
    out.apply_pauli(p)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Cplx<f64> {
        cplx(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> Matrix<f64> {
        let dim = 1 << n;
        let mut m = Matrix::zeros(dim);
        for r in 0..dim {
            m[(r, r)] = c(rng.gen_range(-1.0..1.0), 0.0);
            for col in r + 1..dim {
                let v = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m[(r, col)] = v;
                m[(col, r)] = v.conj();
            }
        }
        m
    }

    #[test]
    fn z_matrix_is_diag_plus_minus_one() {
        let z = pauli_matrix::<f64>(&"Z".parse().unwrap()).unwrap();
        assert_eq!(z, Matrix::from_real_rows(&[1.0, 0.0, 0.0, -1.0]));
    }

    #[test]
    fn identity_string_gives_identity_matrix() {
        let id = pauli_matrix::<f64>(&PauliString::identity(2)).unwrap();
        assert_eq!(id, Matrix::identity(4));
    }

    #[test]
    fn two_qubit_string_matches_kronecker_tabulation() {
        let p: PauliString = "XZ".parse().unwrap();
        assert_eq!(p.get(0), Pauli::Z);
        assert_eq!(p.get(1), Pauli::X);
        let m = pauli_matrix::<f64>(&p).unwrap();
        // X ⊗ Z written out by hand.
        let table = [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, -1.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, 0.0],
        ];
        for r in 0..4 {
            for col in 0..4 {
                assert_eq!(m[(r, col)], c(table[r][col], 0.0), "({r},{col})");
            }
        }
        let kron = Pauli::X.matrix::<f64>().kron(&Pauli::Z.matrix());
        assert_eq!(m, kron);
    }

    #[test]
    fn every_two_qubit_string_matches_kron() {
        let all = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
        for &a in &all {
            for &b in &all {
                let p = PauliString::from_qubit_letters(&[b, a]);
                let m = pauli_matrix::<f64>(&p).unwrap();
                assert_eq!(m, a.matrix::<f64>().kron(&b.matrix()), "{p}");
            }
        }
    }

    #[test]
    fn dense_cap_is_enforced() {
        let p = PauliString::identity(13);
        assert!(matches!(pauli_matrix::<f64>(&p), Err(Error::Size { .. })));
        let h = PauliSum::<f64>::zero(13);
        assert!(matches!(pauli_sum_matrix(&h), Err(Error::Size { .. })));
    }

    #[test]
    fn product_phases_match_dense_products() {
        let all = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
        for &a0 in &all {
            for &a1 in &all {
                for &b0 in &all {
                    for &b1 in &all {
                        let p = PauliString::from_qubit_letters(&[a0, a1]);
                        let q = PauliString::from_qubit_letters(&[b0, b1]);
                        let (k, r) = p.mul(&q);
                        let lhs = pauli_matrix::<f64>(&p).unwrap().matmul(&pauli_matrix(&q).unwrap());
                        let rhs = pauli_matrix::<f64>(&r).unwrap().scale(i_pow(k));
                        assert!(lhs.max_abs_diff(&rhs) < 1e-15, "{p} * {q}");
                        assert_eq!(p.commutes_with(&q), lhs == q_mul(&q, &p));
                    }
                }
            }
        }
        fn q_mul(a: &PauliString, b: &PauliString) -> Matrix<f64> {
            pauli_matrix::<f64>(a).unwrap().matmul(&pauli_matrix(b).unwrap())
        }
    }

    #[test]
    fn identity_decomposes_to_identity_string() {
        let h = decompose_hermitian(&Matrix::<f64>::identity(2), DecomposeOptions::default()).unwrap();
        assert_eq!(h.terms(), &[(1.0, PauliString::identity(1))]);
    }

    #[test]
    fn one_qubit_oscillator_diagonal_decomposes() {
        let m = Matrix::diagonal(&[0.25, 0.75]);
        let h = decompose_hermitian(&m, DecomposeOptions::default()).unwrap();
        assert_eq!(
            h.terms(),
            &[(0.5, PauliString::identity(1)), (-0.25, "Z".parse().unwrap())]
        );
        let back = pauli_sum_matrix(&h).unwrap();
        assert_eq!(back, m);
        let fast = decompose_diagonal(&[0.25, 0.75], 1e-12).unwrap();
        assert_eq!(fast, h);
    }

    #[test]
    fn random_four_by_four_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_hermitian(2, &mut rng);
        let h = decompose_hermitian(&m, DecomposeOptions::default()).unwrap();
        assert!(pauli_sum_matrix(&h).unwrap().max_abs_diff(&m) <= 1e-12);
    }

    #[test]
    fn coefficients_of_hermitian_input_are_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=4 {
            let m = random_hermitian(n, &mut rng);
            for (c, p) in pauli_coefficients(&m, DENSE_CAP).unwrap() {
                assert!(c.im.abs() <= 1e-12, "{p}: {c}");
            }
        }
    }

    #[test]
    fn decompose_rejects_bad_input() {
        let m = Matrix::<f64>::from_real_rows(&[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            decompose_hermitian(&m, DecomposeOptions::default()),
            Err(Error::Validation(_))
        ));
        let m3 = Matrix::<f64>::identity(3);
        assert!(matches!(
            decompose_hermitian(&m3, DecomposeOptions::default()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn sum_matrix_examples() {
        let id = PauliSum::from_terms(1, [(1.0, PauliString::identity(1))]).unwrap();
        assert_eq!(pauli_sum_matrix(&id).unwrap(), Matrix::identity(2));
        let sho = PauliSum::from_terms(
            1,
            [(0.5, PauliString::identity(1)), (-0.25, "Z".parse().unwrap())],
        )
        .unwrap();
        assert_eq!(pauli_sum_matrix(&sho).unwrap(), Matrix::diagonal(&[0.25, 0.75]));
    }

    #[test]
    fn merging_is_idempotent() {
        let z: PauliString = "ZI".parse().unwrap();
        let x: PauliString = "IX".parse().unwrap();
        let h = PauliSum::from_terms(2, [(1.0, z), (0.5, x), (2.0, z)]).unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.coefficient(&z), 3.0);
        let again = PauliSum::from_terms(2, h.terms().iter().copied()).unwrap();
        assert_eq!(again, h);
    }

    #[test]
    fn mixed_widths_are_rejected() {
        let r = PauliSum::from_terms(2, [(1.0, PauliString::identity(3))]);
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn text_format_parses_comments_and_scientific_notation() {
        let text = "# oscillator\nqubits 1\n5e-1 I\n-2.5E-1 Z\n";
        let h = PauliSum::<f64>::parse_text(text).unwrap();
        assert_eq!(h.coefficient(&PauliString::identity(1)), 0.5);
        assert_eq!(h.coefficient(&"Z".parse().unwrap()), -0.25);
        let back = PauliSum::<f64>::parse_text(&h.to_text()).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn text_format_errors_carry_line_numbers() {
        let err = PauliSum::<f64>::parse_text("qubits 2\n0.5 II\nabc ZZ\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = PauliSum::<f64>::parse_text("qubits 2\n0.5 III\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
        let err = PauliSum::<f64>::parse_text("0.5 I\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn x_on_zero_flips_and_z_on_one_negates() {
        let zero = StateVector::<f64>::zero_state(1).unwrap();
        let one = apply_pauli(&"X".parse().unwrap(), &zero).unwrap();
        assert_eq!(one.amplitudes(), &[c(0.0, 0.0), c(1.0, 0.0)]);
        let neg = apply_pauli(&"Z".parse().unwrap(), &one).unwrap();
        assert_eq!(neg.amplitudes(), &[c(0.0, 0.0), c(-1.0, 0.0)]);
    }
}
