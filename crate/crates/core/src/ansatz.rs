//! Parameterized circuit programs: the layered hardware-efficient ansatz and
//! Jordan–Wigner-mapped UCCSD, plus parameter-shift gradients.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::jw_ladder;
use crate::pauli::{PauliAccumulator, PauliString, PauliSum};
use crate::scalar::{cplx, Real};
use crate::statevector::StateVector;

/// Gate angle: either fixed or `scale · θ[index]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle<T> {
    Fixed(T),
    Param { index: usize, scale: T },
}

impl<T: Real> Angle<T> {
    fn value(&self, theta: &[T]) -> T {
        match *self {
            Angle::Fixed(a) => a,
            Angle::Param { index, scale } => scale * theta[index],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction<T> {
    X { qubit: usize },
    Ry { qubit: usize, angle: Angle<T> },
    Rz { qubit: usize, angle: Angle<T> },
    Cnot { control: usize, target: usize },
    PauliRotation { string: PauliString, angle: Angle<T> },
}

impl<T: Real> Instruction<T> {
    fn angle(&self) -> Option<&Angle<T>> {
        match self {
            Instruction::Ry { angle, .. }
            | Instruction::Rz { angle, .. }
            | Instruction::PauliRotation { angle, .. } => Some(angle),
            _ => None,
        }
    }

    fn apply(&self, s: &mut StateVector<T>, theta: &[T], shift: T) -> Result<()> {
        match self {
            Instruction::X { qubit } => s.apply_x(*qubit),
            Instruction::Ry { qubit, angle } => s.apply_ry(*qubit, angle.value(theta) + shift),
            Instruction::Rz { qubit, angle } => s.apply_rz(*qubit, angle.value(theta) + shift),
            Instruction::Cnot { control, target } => s.apply_cnot(*control, *target),
            Instruction::PauliRotation { string, angle } => {
                s.apply_pauli_rotation(string, angle.value(theta) + shift)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnsatzKind {
    Hea,
    Uccsd,
}

/// Single and double excitations out of the lowest-occupied reference.
///
/// Spin-orbitals are interleaved: even index spin-up, odd index spin-down.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcitationList {
    pub singles: Vec<(usize, usize)>,
    pub doubles: Vec<((usize, usize), (usize, usize))>,
}

impl ExcitationList {
    /// Spin-conserving singles `i → a` and doubles `(i, j) → (a, b)` with
    /// `i < j`, `a < b`, enumerated in lexicographic order.
    pub fn enumerate(n_spin_orbitals: usize, n_electrons: usize) -> Self {
        let occ: Vec<usize> = (0..n_electrons).collect();
        let virt: Vec<usize> = (n_electrons..n_spin_orbitals).collect();
        let mut singles = Vec::new();
        for &i in &occ {
            for &a in &virt {
                if i % 2 == a % 2 {
                    singles.push((i, a));
                }
            }
        }
        let mut doubles = Vec::new();
        for (x, &i) in occ.iter().enumerate() {
            for &j in &occ[x + 1..] {
                for (y, &a) in virt.iter().enumerate() {
                    for &b in &virt[y + 1..] {
                        if (i % 2) + (j % 2) == (a % 2) + (b % 2) {
                            doubles.push(((i, j), (a, b)));
                        }
                    }
                }
            }
        }
        Self { singles, doubles }
    }

    pub fn len(&self) -> usize {
        self.singles.len() + self.doubles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        for &(i, a) in &self.singles {
            if i == a || i % 2 != a % 2 {
                return Err(Error::Validation(format!("single {i}→{a} is not spin-conserving")));
            }
        }
        for &((i, j), (a, b)) in &self.doubles {
            let idx = [i, j, a, b];
            let distinct = (0..4).all(|p| (p + 1..4).all(|q| idx[p] != idx[q]));
            if !distinct || (i % 2) + (j % 2) != (a % 2) + (b % 2) {
                return Err(Error::Validation(format!("double ({i},{j})→({a},{b}) is invalid")));
            }
        }
        Ok(())
    }
}

/// Reproducible description an [`AnsatzProgram`] is rebuilt from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AnsatzDescriptor {
    Hea { n_qubits: usize, layers: usize },
    Uccsd { n_spin_orbitals: usize, n_electrons: usize, excitations: ExcitationList },
}

impl AnsatzDescriptor {
    pub fn build<T: Real>(&self) -> Result<AnsatzProgram<T>> {
        match self {
            AnsatzDescriptor::Hea { n_qubits, layers } => build_hea(*n_qubits, *layers),
            AnsatzDescriptor::Uccsd { n_spin_orbitals, n_electrons, excitations } => {
                uccsd_from_excitations(*n_spin_orbitals, *n_electrons, excitations.clone())
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })
    }
}

/// An ordered gate list with parameter bindings.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzProgram<T> {
    n_qubits: usize,
    n_params: usize,
    kind: AnsatzKind,
    instructions: Vec<Instruction<T>>,
    descriptor: AnsatzDescriptor,
}

impl<T: Real> AnsatzProgram<T> {
    fn new(
        n_qubits: usize,
        n_params: usize,
        kind: AnsatzKind,
        instructions: Vec<Instruction<T>>,
        descriptor: AnsatzDescriptor,
    ) -> Result<Self> {
        let mut used = vec![false; n_params];
        for ins in &instructions {
            let qubits_ok = match ins {
                Instruction::X { qubit } | Instruction::Ry { qubit, .. } | Instruction::Rz { qubit, .. } => {
                    *qubit < n_qubits
                }
                Instruction::Cnot { control, target } => {
                    *control < n_qubits && *target < n_qubits && control != target
                }
                Instruction::PauliRotation { string, .. } => string.n_qubits() == n_qubits,
            };
            if !qubits_ok {
                return Err(Error::Validation(format!("instruction {ins:?} is out of range")));
            }
            if let Some(Angle::Param { index, .. }) = ins.angle() {
                *used.get_mut(*index).ok_or_else(|| {
                    Error::Validation(format!("parameter index {index} ≥ n_params {n_params}"))
                })? = true;
            }
        }
        if let Some(k) = used.iter().position(|u| !u) {
            return Err(Error::Validation(format!("parameter {k} is never referenced")));
        }
        Ok(Self { n_qubits, n_params, kind, instructions, descriptor })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn kind(&self) -> AnsatzKind {
        self.kind
    }

    pub fn instructions(&self) -> &[Instruction<T>] {
        &self.instructions
    }

    pub fn descriptor(&self) -> &AnsatzDescriptor {
        &self.descriptor
    }

    /// Indices of instructions carrying a parameter binding.
    pub fn occurrences(&self) -> impl Iterator<Item = usize> + '_ {
        self.instructions
            .iter()
            .enumerate()
            .filter(|(_, ins)| matches!(ins.angle(), Some(Angle::Param { .. })))
            .map(|(i, _)| i)
    }

    fn check_theta(&self, theta: &[T]) -> Result<()> {
        if theta.len() != self.n_params {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.n_params,
                theta.len()
            )));
        }
        Ok(())
    }

    /// `U(θ)|0…0⟩`.
    pub fn run(&self, theta: &[T]) -> Result<StateVector<T>> {
        self.check_theta(theta)?;
        self.run_shifted(theta, None)
    }

    /// Runs with the gate at instruction `shift.0` offset by `shift.1` radians.
    fn run_shifted(&self, theta: &[T], shift: Option<(usize, T)>) -> Result<StateVector<T>> {
        let mut s = StateVector::zero_state(self.n_qubits)?;
        for (i, ins) in self.instructions.iter().enumerate() {
            let delta = match shift {
                Some((at, d)) if at == i => d,
                _ => T::zero(),
            };
            ins.apply(&mut s, theta, delta)?;
        }
        Ok(s)
    }

    /// Parameter-shift gradient of `objective(U(θ)|0⟩)`, where `objective`
    /// must be the expectation of a Hermitian observable. Each occurrence of a
    /// parameter is shifted by `±π/2` on its own and the results are summed
    /// with the binding's chain-rule scale.
    pub fn shift_gradient<F>(&self, theta: &[T], objective: F) -> Result<Vec<T>>
    where
        F: Fn(&StateVector<T>) -> Result<T> + Sync,
    {
        self.check_theta(theta)?;
        let occ: Vec<usize> = self.occurrences().collect();
        let half_pi = T::lit(FRAC_PI_2);
        let parts: Vec<(usize, T)> = occ
            .par_iter()
            .map(|&i| -> Result<(usize, T)> {
                let Some(&Angle::Param { index, scale }) = self.instructions[i].angle() else {
                    unreachable!("occurrence without parameter")
                };
                let plus = objective(&self.run_shifted(theta, Some((i, half_pi)))?)?;
                let minus = objective(&self.run_shifted(theta, Some((i, -half_pi)))?)?;
                Ok((index, (plus - minus) * T::lit(0.5) * scale))
            })
            .collect::<Result<_>>()?;
        let mut grad = vec![T::zero(); self.n_params];
        for (index, g) in parts {
            grad[index] += g;
        }
        Ok(grad)
    }

    /// `∂⟨H⟩/∂θ` by the parameter-shift rule.
    pub fn parameter_shift_gradient(&self, h: &PauliSum<T>, theta: &[T]) -> Result<Vec<T>> {
        if h.n_qubits() != self.n_qubits {
            return Err(Error::Shape(format!(
                "hamiltonian has {} qubits, ansatz {}",
                h.n_qubits(),
                self.n_qubits
            )));
        }
        self.shift_gradient(theta, |s| s.expectation(h))
    }

    /// `⟨H⟩` at `θ`.
    pub fn energy(&self, h: &PauliSum<T>, theta: &[T]) -> Result<T> {
        self.run(theta)?.expectation(h)
    }
}

/// Hardware-efficient ansatz: per layer, `RY` then `RZ` on every qubit in
/// ascending order, then `CNOT(i, j)` for all `i < j` in lexicographic order.
/// Parameters are laid out layer-major as `[ry_0, rz_0, ry_1, rz_1, …]`.
pub fn build_hea<T: Real>(n_qubits: usize, layers: usize) -> Result<AnsatzProgram<T>> {
    if n_qubits == 0 || layers == 0 {
        return Err(Error::Argument(format!("HEA needs n_qubits ≥ 1 and layers ≥ 1, got {n_qubits}, {layers}")));
    }
    let mut ins = Vec::new();
    let mut next = 0;
    for _ in 0..layers {
        for q in 0..n_qubits {
            ins.push(Instruction::Ry { qubit: q, angle: Angle::Param { index: next, scale: T::one() } });
            ins.push(Instruction::Rz { qubit: q, angle: Angle::Param { index: next + 1, scale: T::one() } });
            next += 2;
        }
        for i in 0..n_qubits {
            for j in i + 1..n_qubits {
                ins.push(Instruction::Cnot { control: i, target: j });
            }
        }
    }
    AnsatzProgram::new(
        n_qubits,
        next,
        AnsatzKind::Hea,
        ins,
        AnsatzDescriptor::Hea { n_qubits, layers },
    )
}

/// Anti-Hermitian generator `τ − τ†` of one excitation as `Σ_m -i c_m P_m`,
/// returned as the real `c_m`.
pub fn excitation_generator<T: Real>(n: usize, create: &[usize], annihilate: &[usize]) -> Result<PauliSum<T>> {
    let mut tau = PauliAccumulator::identity(n);
    for &p in create {
        tau = tau.mul(&jw_ladder(n, p, true));
    }
    // a_j a_i for (i, j) so that τ = a†_a a†_b a_j a_i for doubles
    for &q in annihilate.iter().rev() {
        tau = tau.mul(&jw_ladder(n, q, false));
    }
    let mut dagger = PauliAccumulator::identity(n);
    for &q in annihilate {
        dagger = dagger.mul(&jw_ladder(n, q, true));
    }
    for &p in create.iter().rev() {
        dagger = dagger.mul(&jw_ladder(n, p, false));
    }
    let mut g = PauliAccumulator::new(n);
    g.add_scaled(&tau, cplx(T::one(), T::zero()));
    g.add_scaled(&dagger, cplx(-T::one(), T::zero()));
    // G = Σ i d_m P_m; store c_m = -d_m so that G = Σ -i c_m P_m.
    let eps = T::tol(1e-12);
    Ok(g.into_imaginary(eps, eps)?.scaled(-T::one()))
}

fn uccsd_from_excitations<T: Real>(
    n_spin_orbitals: usize,
    n_electrons: usize,
    excitations: ExcitationList,
) -> Result<AnsatzProgram<T>> {
    if n_spin_orbitals == 0 || n_spin_orbitals > crate::pauli::MAX_PAULI_QUBITS {
        return Err(Error::Argument(format!("invalid spin-orbital count {n_spin_orbitals}")));
    }
    if n_electrons > n_spin_orbitals {
        return Err(Error::Argument(format!(
            "{n_electrons} electrons do not fit in {n_spin_orbitals} spin-orbitals"
        )));
    }
    excitations.validate()?;
    let n = n_spin_orbitals;
    let mut ins: Vec<Instruction<T>> = (0..n_electrons).map(|q| Instruction::X { qubit: q }).collect();
    let mut push = |gen: PauliSum<T>, index: usize| {
        // exp(θ Σ -i c_m P_m) ≈ Π_m exp(-i (2 c_m θ) P_m / 2)
        for &(c, p) in gen.terms() {
            ins.push(Instruction::PauliRotation {
                string: p,
                angle: Angle::Param { index, scale: T::lit(2.0) * c },
            });
        }
    };
    let mut index = 0;
    for &(i, a) in &excitations.singles {
        push(excitation_generator(n, &[a], &[i])?, index);
        index += 1;
    }
    for &((i, j), (a, b)) in &excitations.doubles {
        push(excitation_generator(n, &[a, b], &[i, j])?, index);
        index += 1;
    }
    AnsatzProgram::new(
        n,
        index,
        AnsatzKind::Uccsd,
        ins,
        AnsatzDescriptor::Uccsd { n_spin_orbitals, n_electrons, excitations },
    )
}

/// First-order Trotterized UCCSD over the Hartree–Fock reference (lowest
/// `n_electrons` spin-orbitals occupied). One parameter per excitation.
pub fn build_uccsd<T: Real>(
    n_spin_orbitals: usize,
    n_electrons: usize,
) -> Result<(AnsatzProgram<T>, ExcitationList)> {
    if n_electrons > n_spin_orbitals {
        return Err(Error::Argument(format!(
            "{n_electrons} electrons do not fit in {n_spin_orbitals} spin-orbitals"
        )));
    }
    let exc = ExcitationList::enumerate(n_spin_orbitals, n_electrons);
    let prog = uccsd_from_excitations(n_spin_orbitals, n_electrons, exc.clone())?;
    Ok((prog, exc))
}

/// Hartree–Fock reference `|1…10…0⟩` with the lowest `n_electrons` qubits set.
pub fn hartree_fock_state<T: Real>(n_spin_orbitals: usize, n_electrons: usize) -> Result<StateVector<T>> {
    StateVector::basis_state(n_spin_orbitals, (1usize << n_electrons) - 1)
}

/// Runs `a` at `theta`.
pub fn run_ansatz<T: Real>(a: &AnsatzProgram<T>, theta: &[T]) -> Result<StateVector<T>> {
    a.run(theta)
}

pub fn parameter_shift_gradient<T: Real>(a: &AnsatzProgram<T>, h: &PauliSum<T>, theta: &[T]) -> Result<Vec<T>> {
    a.parameter_shift_gradient(h, theta)
}
