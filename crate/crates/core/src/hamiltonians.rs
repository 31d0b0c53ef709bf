//! Problem Hamiltonians: the truncated harmonic oscillator in its level
//! basis, and fermionic (FCIDUMP) Hamiltonians mapped with Jordan–Wigner.
//!
//! Spin-orbitals are interleaved: spatial orbital `p` becomes spin-orbitals
//! `2p` (spin up) and `2p + 1` (spin down). Jordan–Wigner places spin-orbital
//! `p` on qubit `p`, with the parity string on qubits `< p`.

use std::collections::HashMap;
use std::path::Path;

use regex::Regex;

use crate::error::{Error, Result};
use crate::pauli::{decompose_diagonal, PauliAccumulator, PauliString, PauliSum, MAX_PAULI_QUBITS};
use crate::statevector::SIM_CAP;
use crate::scalar::{cplx, Real};

/// Default oscillator frequency (atomic units, ħ = 1).
pub const DEFAULT_OMEGA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShoSpec<T> {
    pub omega: T,
    pub n_qubits: usize,
}

impl<T: Real> ShoSpec<T> {
    pub fn new(omega: T, n_qubits: usize) -> Result<Self> {
        if !(omega > T::zero()) || !omega.is_finite() {
            return Err(Error::Argument(format!("oscillator frequency must be positive, got {omega}")));
        }
        // diagonal only, so the simulator cap applies rather than the dense one
        if n_qubits == 0 || n_qubits > SIM_CAP {
            return Err(Error::Size { what: "oscillator embedding", n: n_qubits, cap: SIM_CAP });
        }
        Ok(Self { omega, n_qubits })
    }

    pub fn levels(&self) -> usize {
        1 << self.n_qubits
    }

    /// `ω(j + 1/2)`.
    pub fn level_energy(&self, j: usize) -> T {
        self.omega * (T::from_count(j) + T::lit(0.5))
    }
}

/// Ladder operators truncated to the first `dim` oscillator levels.
#[derive(Debug, Clone, Copy)]
pub struct Ladder {
    dim: usize,
}

impl Ladder {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    /// `a|n⟩ = √n |n−1⟩`.
    pub fn lower<T: Real>(&self, n: usize) -> Option<(usize, T)> {
        (n > 0 && n < self.dim).then(|| (n - 1, T::from_count(n).sqrt()))
    }

    /// `a†|n⟩ = √(n+1) |n+1⟩`, zero past the truncation.
    pub fn raise<T: Real>(&self, n: usize) -> Option<(usize, T)> {
        (n + 1 < self.dim).then(|| (n + 1, T::from_count(n + 1).sqrt()))
    }

    /// `⟨n|a†a|n⟩`.
    pub fn number<T: Real>(&self, n: usize) -> T {
        match self.lower::<T>(n) {
            Some((m, c)) => {
                let (back, d) = self.raise::<T>(m).expect("raise inverts lower below the cutoff");
                debug_assert_eq!(back, n);
                c * d
            }
            None => T::zero(),
        }
    }
}

/// `ω(a†a + 1/2)` on `2^n` levels, as Z strings.
pub fn build_sho<T: Real>(spec: &ShoSpec<T>) -> Result<PauliSum<T>> {
    let ladder = Ladder::new(spec.levels());
    let half = T::lit(0.5);
    let diag: Vec<T> = (0..spec.levels())
        .map(|j| spec.omega * (ladder.number::<T>(j) + half))
        .collect();
    decompose_diagonal(&diag, T::lit(1e-12))
}

/// Jordan–Wigner image of `a†_p` (`dagger`) or `a_p`:
/// `Z_0 ⋯ Z_{p−1} (X_p ∓ iY_p)/2`.
pub fn jw_ladder<T: Real>(n: usize, p: usize, dagger: bool) -> PauliAccumulator<T> {
    assert!(p < n, "mode {p} out of range for {n} modes");
    let mut tail = PauliString::identity(n);
    for q in 0..p {
        tail = tail.with(q, crate::pauli::Pauli::Z);
    }
    let half = T::lit(0.5);
    let mut acc = PauliAccumulator::new(n);
    acc.add(cplx(half, T::zero()), tail.with(p, crate::pauli::Pauli::X));
    let sign = if dagger { -half } else { half };
    acc.add(cplx(T::zero(), sign), tail.with(p, crate::pauli::Pauli::Y));
    acc
}

/// Index order of two-body records in an integral file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TwoBodyOrdering {
    /// `(ij|kl)`
    #[default]
    Chemist,
    /// `⟨ij|kl⟩ = (ik|jl)`
    Physicist,
}

/// Spin-orbital integrals in the operator ordering
/// `H = Σ h_pq a†_p a_q + ½ Σ h_pqrs a†_p a†_q a_r a_s + E_core`.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionIntegrals<T> {
    n_spin_orbitals: usize,
    n_electrons: Option<usize>,
    one_body: Vec<T>,
    two_body: Vec<T>,
    core_energy: T,
}

impl<T: Real> FermionIntegrals<T> {
    /// From spin-orbital tables; `two_body` is indexed `[((p·n + q)·n + r)·n + s]`.
    pub fn new(n_spin_orbitals: usize, one_body: Vec<T>, two_body: Vec<T>, core_energy: T) -> Result<Self> {
        let n = n_spin_orbitals;
        if n == 0 || n > MAX_PAULI_QUBITS {
            return Err(Error::Argument(format!("spin-orbital count {n} not in 1..=64")));
        }
        if one_body.len() != n * n || two_body.len() != n.pow(4) {
            return Err(Error::Shape(format!(
                "integral tables have {} and {} entries, expected {} and {}",
                one_body.len(),
                two_body.len(),
                n * n,
                n.pow(4)
            )));
        }
        let f = Self { n_spin_orbitals: n, n_electrons: None, one_body, two_body, core_energy };
        f.validate(T::tol(1e-10))?;
        Ok(f)
    }

    /// Expands spatial integrals (`eri` in chemist order `(pq|rs)`) to
    /// interleaved spin-orbitals.
    pub fn from_spatial(n_orbitals: usize, h1: &[T], eri: &[T], core_energy: T) -> Result<Self> {
        let m = n_orbitals;
        if h1.len() != m * m || eri.len() != m.pow(4) {
            return Err(Error::Shape("spatial integral tables have the wrong size".into()));
        }
        let n = 2 * m;
        let mut one = vec![T::zero(); n * n];
        let mut two = vec![T::zero(); n.pow(4)];
        let sp = |x: usize| (x / 2, x % 2);
        for p in 0..n {
            for q in 0..n {
                let ((a, sa), (b, sb)) = (sp(p), sp(q));
                if sa == sb {
                    one[p * n + q] = h1[a * m + b];
                }
            }
        }
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let ((a, sa), (b, sb), (c, sc), (d, sd)) = (sp(p), sp(q), sp(r), sp(s));
                        if sa == sd && sb == sc {
                            // h_pqrs = (ps|qr)
                            two[((p * n + q) * n + r) * n + s] = eri[((a * m + d) * m + b) * m + c];
                        }
                    }
                }
            }
        }
        Self::new(n, one, two, core_energy)
    }

    pub fn with_electrons(mut self, n_electrons: usize) -> Self {
        self.n_electrons = Some(n_electrons);
        self
    }

    pub fn n_spin_orbitals(&self) -> usize {
        self.n_spin_orbitals
    }

    pub fn n_electrons(&self) -> Option<usize> {
        self.n_electrons
    }

    pub fn core_energy(&self) -> T {
        self.core_energy
    }

    pub fn one_body(&self, p: usize, q: usize) -> T {
        self.one_body[p * self.n_spin_orbitals + q]
    }

    pub fn two_body(&self, p: usize, q: usize, r: usize, s: usize) -> T {
        let n = self.n_spin_orbitals;
        self.two_body[((p * n + q) * n + r) * n + s]
    }

    /// Hermiticity of both tables: `h_pq = h_qp`, `h_pqrs = h_srqp`.
    fn validate(&self, tol: T) -> Result<()> {
        let n = self.n_spin_orbitals;
        for p in 0..n {
            for q in 0..n {
                let d = (self.one_body(p, q) - self.one_body(q, p)).abs();
                if d > tol {
                    return Err(Error::Validation(format!("h[{p}][{q}] ≠ h[{q}][{p}] (Δ = {d})")));
                }
                for r in 0..n {
                    for s in 0..n {
                        let d = (self.two_body(p, q, r, s) - self.two_body(s, r, q, p)).abs();
                        if d > tol {
                            return Err(Error::Validation(format!(
                                "h[{p}{q}{r}{s}] ≠ h[{s}{r}{q}{p}] (Δ = {d})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Default)]
struct SymmetricTable {
    values: HashMap<Vec<usize>, f64>,
}

impl SymmetricTable {
    fn set(&mut self, keys: &[Vec<usize>], v: f64, line: usize) -> Result<()> {
        for k in keys {
            if let Some(&old) = self.values.get(k) {
                if (old - v).abs() > 1e-8 {
                    return Err(Error::Validation(format!(
                        "line {line}: integral {k:?} = {v} contradicts symmetric partner value {old}"
                    )));
                }
            }
            self.values.insert(k.clone(), v);
        }
        Ok(())
    }
}

/// Parses FCIDUMP text: a `&FCI … &END` (or `/`) namelist header with
/// `NORB` and `NELEC`, then records `value i j k l` with 1-based spatial
/// indices. `i j 0 0` is one-body, `0 0 0 0` is the core energy, `i 0 0 0`
/// (orbital energies) is accepted and ignored.
pub fn parse_fcidump<T: Real>(text: &str, ordering: TwoBodyOrdering) -> Result<FermionIntegrals<T>> {
    let mut lines = text.lines().enumerate().peekable();
    let mut header = String::new();
    let mut header_closed = false;
    let mut saw_start = false;
    for (idx, raw) in lines.by_ref() {
        let line = raw.trim();
        if line.is_empty() && !saw_start {
            continue;
        }
        let upper = line.to_ascii_uppercase();
        if !saw_start {
            if !upper.starts_with("&FCI") {
                return Err(Error::Parse { line: idx + 1, message: "expected `&FCI` namelist header".into() });
            }
            saw_start = true;
        }
        header.push_str(&upper);
        header.push(' ');
        if upper.contains("&END") || upper == "/" || upper.ends_with('/') {
            header_closed = true;
            break;
        }
    }
    if !header_closed {
        return Err(Error::Parse { line: text.lines().count(), message: "unterminated FCIDUMP header".into() });
    }
    let grab = |key: &str| -> Option<usize> {
        let re = Regex::new(&format!(r"\b{key}\s*=\s*(\d+)")).expect("static regex");
        re.captures(&header).and_then(|c| c[1].parse().ok())
    };
    let norb = grab("NORB").ok_or(Error::Parse { line: 1, message: "header lacks NORB".into() })?;
    let nelec = grab("NELEC").ok_or(Error::Parse { line: 1, message: "header lacks NELEC".into() })?;
    if norb == 0 || 2 * norb > MAX_PAULI_QUBITS {
        return Err(Error::Parse { line: 1, message: format!("NORB = {norb} not in 1..=32") });
    }
    if nelec > 2 * norb {
        return Err(Error::Parse { line: 1, message: format!("NELEC = {nelec} exceeds 2·NORB") });
    }

    let mut one = SymmetricTable::default();
    let mut two = SymmetricTable::default();
    let mut core = 0.0f64;
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        let err = |message: String| Error::Parse { line: line_no, message };
        if tok.len() != 5 {
            return Err(err(format!("expected `value i j k l`, got {line:?}")));
        }
        let value: f64 = tok[0]
            .replace(['D', 'd'], "e")
            .parse()
            .map_err(|_| err(format!("bad value {:?}", tok[0])))?;
        if !value.is_finite() {
            return Err(err(format!("non-finite value {value}")));
        }
        let mut ix = [0usize; 4];
        for (slot, t) in ix.iter_mut().zip(&tok[1..]) {
            *slot = t.parse().map_err(|_| err(format!("bad index {t:?}")))?;
            if *slot > norb {
                return Err(err(format!("index {slot} exceeds NORB = {norb}")));
            }
        }
        let [i, j, k, l] = ix;
        match (i, j, k, l) {
            (0, 0, 0, 0) => core = value,
            (_, 0, 0, 0) => {}
            (i, j, 0, 0) if i > 0 && j > 0 => {
                let (i, j) = (i - 1, j - 1);
                one.set(&[vec![i, j], vec![j, i]], value, line_no)?;
            }
            (i, j, k, l) if i > 0 && j > 0 && k > 0 && l > 0 => {
                // chemist (pq|rs)
                let (p, q, r, s) = match ordering {
                    TwoBodyOrdering::Chemist => (i - 1, j - 1, k - 1, l - 1),
                    TwoBodyOrdering::Physicist => (i - 1, k - 1, j - 1, l - 1),
                };
                let keys = [
                    vec![p, q, r, s],
                    vec![q, p, r, s],
                    vec![p, q, s, r],
                    vec![q, p, s, r],
                    vec![r, s, p, q],
                    vec![s, r, p, q],
                    vec![r, s, q, p],
                    vec![s, r, q, p],
                ];
                two.set(&keys, value, line_no)?;
            }
            _ => return Err(err(format!("index pattern {i} {j} {k} {l} is not a valid record"))),
        }
    }

    let m = norb;
    let mut h1 = vec![T::zero(); m * m];
    for (k, v) in one.values {
        h1[k[0] * m + k[1]] = T::lit(v);
    }
    let mut eri = vec![T::zero(); m.pow(4)];
    for (k, v) in two.values {
        eri[((k[0] * m + k[1]) * m + k[2]) * m + k[3]] = T::lit(v);
    }
    Ok(FermionIntegrals::from_spatial(m, &h1, &eri, T::lit(core))?.with_electrons(nelec))
}

pub fn load_fcidump<T: Real>(path: impl AsRef<Path>, ordering: TwoBodyOrdering) -> Result<FermionIntegrals<T>> {
    parse_fcidump(&std::fs::read_to_string(path)?, ordering)
}

/// Maps the second-quantized Hamiltonian to a real Pauli sum.
pub fn jordan_wigner<T: Real>(f: &FermionIntegrals<T>) -> Result<PauliSum<T>> {
    let n = f.n_spin_orbitals;
    let up: Vec<PauliAccumulator<T>> = (0..n).map(|p| jw_ladder(n, p, true)).collect();
    let down: Vec<PauliAccumulator<T>> = (0..n).map(|p| jw_ladder(n, p, false)).collect();
    let mut acc = PauliAccumulator::new(n);
    acc.add(cplx(f.core_energy, T::zero()), PauliString::identity(n));
    for p in 0..n {
        for q in 0..n {
            let h = f.one_body(p, q);
            if h != T::zero() {
                acc.add_scaled(&up[p].mul(&down[q]), cplx(h, T::zero()));
            }
        }
    }
    let half = T::lit(0.5);
    let mut create_pairs: HashMap<(usize, usize), PauliAccumulator<T>> = HashMap::new();
    let mut annihilate_pairs: HashMap<(usize, usize), PauliAccumulator<T>> = HashMap::new();
    for p in 0..n {
        for q in 0..n {
            if p == q {
                continue;
            }
            for r in 0..n {
                for s in 0..n {
                    if r == s {
                        continue;
                    }
                    let h = f.two_body(p, q, r, s);
                    if h == T::zero() {
                        continue;
                    }
                    let cp = create_pairs.entry((p, q)).or_insert_with(|| up[p].mul(&up[q]));
                    let cp = cp.clone();
                    let ap = annihilate_pairs.entry((r, s)).or_insert_with(|| down[r].mul(&down[s]));
                    acc.add_scaled(&cp.mul(ap), cplx(half * h, T::zero()));
                }
            }
        }
    }
    acc.into_real(T::tol(1e-10), T::lit(1e-12))
}

pub fn load_pauli_sum<T: Real>(path: impl AsRef<Path>) -> Result<PauliSum<T>> {
    PauliSum::parse_text(&std::fs::read_to_string(path)?)
}

pub fn save_pauli_sum<T: Real>(h: &PauliSum<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, h.to_text())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::Matrix;
    use crate::exactdiag::{eigen_hermitian, ground_energy};
    use crate::pauli::pauli_sum_matrix;
    use crate::statevector::StateVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Minimal-basis H₂ near equilibrium (spatial MO integrals, chemist order).
    pub(crate) const H2_FCIDUMP: &str = " &FCI NORB=  2,NELEC=  2,MS2=0,
  ORBSYM=1,1,
  ISYM=1,
 &END
  0.6744887663568381   1   1   1   1
  0.1812875358123322   2   1   2   1
  0.6636901050178332   2   2   1   1
  0.6973949227364220   2   2   2   2
 -1.2524635735648981   1   1   0   0
 -0.4759487152209645   2   2   0   0
  0.7137539936876182   0   0   0   0
";

    /// Dense Hamiltonian built directly on occupation-number states from
    /// `Σ h_PQ a†_P a_Q + ½ Σ (PQ|RS) a†_P a†_R a_S a_Q` in chemist form.
    fn fock_space_oracle(m: usize, h1: &[f64], eri: &[f64], core: f64) -> Matrix<f64> {
        let n = 2 * m;
        let dim = 1usize << n;
        // apply a_p / a†_p to a bitstring with the sign of the occupied modes below p
        let act = |state: usize, p: usize, create: bool| -> Option<(usize, f64)> {
            let occupied = state >> p & 1 == 1;
            if occupied == create {
                return None;
            }
            let sign = if (state & ((1 << p) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            Some((state ^ (1 << p), sign))
        };
        let spatial = |x: usize| (x / 2, x % 2);
        let mut mat = Matrix::<f64>::identity(dim).scale(cplx(core, 0.0));
        for ket in 0..dim {
            for p in 0..n {
                for q in 0..n {
                    let ((a, sa), (b, sb)) = (spatial(p), spatial(q));
                    if sa != sb || h1[a * m + b] == 0.0 {
                        continue;
                    }
                    if let Some((s1, f1)) = act(ket, q, false) {
                        if let Some((s2, f2)) = act(s1, p, true) {
                            mat[(s2, ket)] += cplx(h1[a * m + b] * f1 * f2, 0.0);
                        }
                    }
                }
            }
            for p in 0..n {
                for q in 0..n {
                    for r in 0..n {
                        for s in 0..n {
                            let ((a, sa), (b, sb), (c, sc), (d, sd)) =
                                (spatial(p), spatial(q), spatial(r), spatial(s));
                            if sa != sb || sc != sd {
                                continue;
                            }
                            let v = eri[((a * m + b) * m + c) * m + d];
                            if v == 0.0 {
                                continue;
                            }
                            // a†_P a†_R a_S a_Q, rightmost first
                            let step = act(ket, q, false)
                                .and_then(|(s1, f1)| act(s1, s, false).map(|(s2, f2)| (s2, f1 * f2)))
                                .and_then(|(s2, f)| act(s2, r, true).map(|(s3, f3)| (s3, f * f3)))
                                .and_then(|(s3, f)| act(s3, p, true).map(|(s4, f4)| (s4, f * f4)));
                            if let Some((out, f)) = step {
                                mat[(out, ket)] += cplx(0.5 * v * f, 0.0);
                            }
                        }
                    }
                }
            }
        }
        mat
    }

    fn random_spatial(m: usize, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
        let mut h1 = vec![0.0; m * m];
        for p in 0..m {
            for q in p..m {
                let v = rng.gen_range(-1.0..1.0);
                h1[p * m + q] = v;
                h1[q * m + p] = v;
            }
        }
        let mut eri = vec![0.0; m.pow(4)];
        let idx = |p: usize, q: usize, r: usize, s: usize| ((p * m + q) * m + r) * m + s;
        for p in 0..m {
            for q in 0..m {
                for r in 0..m {
                    for s in 0..m {
                        if eri[idx(p, q, r, s)] != 0.0 {
                            continue;
                        }
                        let v = rng.gen_range(-0.5..0.5);
                        for (a, b, c, d) in [
                            (p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r),
                            (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p),
                        ] {
                            eri[idx(a, b, c, d)] = v;
                        }
                    }
                }
            }
        }
        (h1, eri)
    }

    #[test]
    fn sho_examples() {
        let h = build_sho(&ShoSpec::new(0.5, 1).unwrap()).unwrap();
        assert_eq!(h.terms(), &[(0.5, PauliString::identity(1)), (-0.25, "Z".parse().unwrap())]);
        let h = build_sho(&ShoSpec::new(1.0, 1).unwrap()).unwrap();
        assert_eq!(h.terms(), &[(1.0, PauliString::identity(1)), (-0.5, "Z".parse().unwrap())]);
        let h2 = build_sho(&ShoSpec::<f64>::new(0.5, 2).unwrap()).unwrap();
        let ev = eigen_hermitian(&pauli_sum_matrix(&h2).unwrap(), false).unwrap().eigenvalues;
        for (e, want) in ev.iter().zip([0.25, 0.75, 1.25, 1.75]) {
            assert!((e - want).abs() < 1e-12);
        }
        assert!(ShoSpec::new(0.0, 2).is_err());
        assert!(ShoSpec::new(-1.0, 2).is_err());
        assert!(ShoSpec::new(0.5, 25).is_err());
        let big = build_sho(&ShoSpec::new(0.5, 14).unwrap()).unwrap();
        assert_eq!(big.len(), 15);
    }

    #[test]
    fn sho_spectrum_and_ground_state() {
        for n in 1..=6 {
            for omega in [0.3f64, 0.5, 1.7] {
                let spec = ShoSpec::new(omega, n).unwrap();
                let h = build_sho(&spec).unwrap();
                assert!(h.terms().iter().all(|(_, p)| p.is_diagonal()));
                let ev = eigen_hermitian(&pauli_sum_matrix(&h).unwrap(), false).unwrap().eigenvalues;
                for (j, e) in ev.iter().enumerate() {
                    assert!((e - spec.level_energy(j)).abs() <= 1e-10, "n={n} j={j}");
                }
                let zero = StateVector::zero_state(n).unwrap();
                assert!((zero.expectation(&h).unwrap() - omega / 2.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn ladder_actions() {
        let l = Ladder::new(4);
        assert_eq!(l.lower::<f64>(0), None);
        assert_eq!(l.lower::<f64>(1), Some((0, 1.0)));
        assert_eq!(l.raise::<f64>(3), None);
        let (k, c) = l.raise::<f64>(2).unwrap();
        assert_eq!(k, 3);
        assert!((c - 3f64.sqrt()).abs() < 1e-15);
        assert!((l.number::<f64>(3) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn number_operator_maps_to_half_identity_minus_z() {
        let mut one = vec![0.0; 1];
        one[0] = 1.0;
        let f = FermionIntegrals::new(1, one, vec![0.0], 0.0).unwrap();
        let h = jordan_wigner(&f).unwrap();
        assert_eq!(h.terms(), &[(0.5, PauliString::identity(1)), (-0.5, "Z".parse().unwrap())]);
    }

    #[test]
    fn hopping_maps_to_xx_plus_yy() {
        let f = FermionIntegrals::new(2, vec![0.0, 1.0, 1.0, 0.0], vec![0.0; 16], 0.0).unwrap();
        let h = jordan_wigner(&f).unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.coefficient(&"XX".parse().unwrap()), 0.5);
        assert_eq!(h.coefficient(&"YY".parse().unwrap()), 0.5);
        // Symbolic check against the dense image of the two-mode operator.
        let m = pauli_sum_matrix(&h).unwrap();
        // basis |n1 n0⟩: hopping couples |01⟩ (index 1) and |10⟩ (index 2)
        assert_eq!(m[(1, 2)], cplx(1.0, 0.0));
        assert_eq!(m[(2, 1)], cplx(1.0, 0.0));
        assert_eq!(m.max_abs(), 1.0);
    }

    #[test]
    fn mapped_random_integrals_are_hermitian_and_conserve_number() {
        let mut g = ChaCha8Rng::seed_from_u64(21);
        for m in 1..=3 {
            let (h1, eri) = random_spatial(m, &mut g);
            let f = FermionIntegrals::from_spatial(m, &h1, &eri, 0.3).unwrap();
            let h = jordan_wigner(&f).unwrap();
            let dense = pauli_sum_matrix(&h).unwrap();
            assert!(dense.hermiticity_deviation() <= 1e-10);
            let n = 2 * m;
            let number: Vec<f64> = (0..1usize << n).map(|j| j.count_ones() as f64).collect();
            let nop = Matrix::diagonal(&number);
            let comm = dense.matmul(&nop).add(&nop.matmul(&dense).scale(cplx(-1.0, 0.0)));
            assert!(comm.max_abs() <= 1e-9);
        }
    }

    #[test]
    fn jordan_wigner_matches_fock_space_oracle() {
        let mut g = ChaCha8Rng::seed_from_u64(22);
        for m in 1..=3 {
            let (h1, eri) = random_spatial(m, &mut g);
            let f = FermionIntegrals::from_spatial(m, &h1, &eri, -0.4).unwrap();
            let dense = pauli_sum_matrix(&jordan_wigner(&f).unwrap()).unwrap();
            let oracle = fock_space_oracle(m, &h1, &eri, -0.4);
            assert!(dense.max_abs_diff(&oracle) <= 1e-12, "m={m}");
        }
    }

    #[test]
    fn fcidump_records() {
        let f: FermionIntegrals<f64> = parse_fcidump(H2_FCIDUMP, TwoBodyOrdering::Chemist).unwrap();
        assert_eq!(f.n_spin_orbitals(), 4);
        assert_eq!(f.n_electrons(), Some(2));
        assert_eq!(f.core_energy(), 0.7137539936876182);
        // h_11 expands to both spin-orbitals of spatial orbital 1
        assert_eq!(f.one_body(0, 0), -1.2524635735648981);
        assert_eq!(f.one_body(1, 1), -1.2524635735648981);
        assert_eq!(f.one_body(0, 1), 0.0);

        let text = "&FCI NORB=1,NELEC=0 &END\n 1.5 1 1 0 0\n 0.7 0 0 0 0\n";
        let f: FermionIntegrals<f64> = parse_fcidump(text, TwoBodyOrdering::Chemist).unwrap();
        assert_eq!(f.one_body(0, 0), 1.5);
        assert_eq!(f.one_body(1, 1), 1.5);
        assert_eq!(f.core_energy(), 0.7);
    }

    #[test]
    fn h2_ground_energy_matches_oracle() {
        let f: FermionIntegrals<f64> = parse_fcidump(H2_FCIDUMP, TwoBodyOrdering::Chemist).unwrap();
        let h = jordan_wigner(&f).unwrap();
        let e = ground_energy(&h).unwrap();
        let m = 2;
        let mut h1 = vec![0.0; 4];
        h1[0] = -1.2524635735648981;
        h1[3] = -0.4759487152209645;
        let mut eri = vec![0.0; 16];
        let idx = |p: usize, q: usize, r: usize, s: usize| ((p * m + q) * m + r) * m + s;
        eri[idx(0, 0, 0, 0)] = 0.6744887663568381;
        eri[idx(1, 1, 1, 1)] = 0.6973949227364220;
        for (a, b, c, d) in [(0, 0, 1, 1), (1, 1, 0, 0)] {
            eri[idx(a, b, c, d)] = 0.6636901050178332;
        }
        for (a, b, c, d) in [(0, 1, 0, 1), (1, 0, 0, 1), (0, 1, 1, 0), (1, 0, 1, 0)] {
            eri[idx(a, b, c, d)] = 0.1812875358123322;
        }
        let oracle = fock_space_oracle(m, &h1, &eri, 0.7137539936876182);
        let ev = eigen_hermitian(&oracle, false).unwrap().eigenvalues;
        assert!((e - ev[0]).abs() <= 1e-10);
        // the familiar minimal-basis value
        assert!((e + 1.1373).abs() < 1e-3, "{e}");
    }

    #[test]
    fn physicist_ordering_is_converted() {
        // (11|22) in chemist order equals ⟨12|12⟩ in physicist order
        let chem = "&FCI NORB=2,NELEC=2 &END\n 0.3 1 1 2 2\n";
        let phys = "&FCI NORB=2,NELEC=2 &END\n 0.3 1 2 1 2\n";
        let a: FermionIntegrals<f64> = parse_fcidump(chem, TwoBodyOrdering::Chemist).unwrap();
        let b: FermionIntegrals<f64> = parse_fcidump(phys, TwoBodyOrdering::Physicist).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fcidump_errors_are_located() {
        let bad = "&FCI NORB=2,NELEC=2 &END\n 0.5 1 1 0 0\n oops 1 1 1 1\n";
        let e = parse_fcidump::<f64>(bad, TwoBodyOrdering::Chemist).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let bad = "&FCI NORB=2,NELEC=2 &END\n 0.5 1 1 0\n";
        assert!(matches!(parse_fcidump::<f64>(bad, TwoBodyOrdering::Chemist), Err(Error::Parse { line: 2, .. })));
        let bad = "&FCI NORB=2,NELEC=2 &END\n 0.5 3 1 0 0\n";
        assert!(matches!(parse_fcidump::<f64>(bad, TwoBodyOrdering::Chemist), Err(Error::Parse { line: 2, .. })));
        let bad = "&FCI NORB=2,NELEC=2 &END\n 0.5 1 2 0 0\n 0.6 2 1 0 0\n";
        assert!(matches!(parse_fcidump::<f64>(bad, TwoBodyOrdering::Chemist), Err(Error::Validation(_))));
        let bad = "NORB=2\n";
        assert!(matches!(parse_fcidump::<f64>(bad, TwoBodyOrdering::Chemist), Err(Error::Parse { line: 1, .. })));
        let bad = "&FCI NORB=2,NELEC=2\n 0.5 1 1 0 0\n";
        assert!(matches!(parse_fcidump::<f64>(bad, TwoBodyOrdering::Chemist), Err(Error::Parse { .. })));
    }

    #[test]
    fn fortran_exponents_are_accepted() {
        let text = "&FCI NORB=1,NELEC=1,\n ORBSYM=1,\n /\n 1.5D-01 1 1 0 0\n";
        let f: FermionIntegrals<f64> = parse_fcidump(text, TwoBodyOrdering::Chemist).unwrap();
        assert_eq!(f.one_body(0, 0), 0.15);
    }

    #[test]
    fn non_hermitian_integrals_are_rejected() {
        let r = FermionIntegrals::new(2, vec![0.0, 1.0, 0.5, 0.0], vec![0.0; 16], 0.0);
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn pauli_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.txt");
        std::fs::write(&path, "qubits 1\n0.5 I\n-0.25 Z\n").unwrap();
        let h: PauliSum<f64> = load_pauli_sum(&path).unwrap();
        assert_eq!(h, build_sho(&ShoSpec::new(0.5, 1).unwrap()).unwrap());

        std::fs::write(&path, "qubits 3\n").unwrap();
        let empty: PauliSum<f64> = load_pauli_sum(&path).unwrap();
        assert!(empty.is_empty());
        let mut g = ChaCha8Rng::seed_from_u64(1);
        let s = StateVector::random(3, &mut g).unwrap();
        assert_eq!(s.expectation(&empty).unwrap(), 0.0);

        let f: FermionIntegrals<f64> = parse_fcidump(H2_FCIDUMP, TwoBodyOrdering::Chemist).unwrap();
        let h = jordan_wigner(&f).unwrap();
        save_pauli_sum(&h, &path).unwrap();
        let back: PauliSum<f64> = load_pauli_sum(&path).unwrap();
        assert_eq!(back.len(), h.len());
        for ((a, p), (b, q)) in h.terms().iter().zip(back.terms()) {
            assert_eq!(p, q);
            assert!((a - b).abs() <= 1e-15 * a.abs());
        }
    }
}
