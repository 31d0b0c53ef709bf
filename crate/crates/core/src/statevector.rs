//! Dense statevector simulator with data-parallel gate kernels and
//! deterministic chunked reductions.
//!
//! Kernels run on whatever rayon pool is current; wrap work in
//! [`Executor::install`] to pin a thread count. States below
//! [`PARALLEL_MIN_DIM`] amplitudes are processed serially. Reductions always
//! split the index range into fixed [`REDUCE_CHUNK`]-sized chunks and combine
//! the partial sums in chunk order, so results do not depend on the thread
//! count.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum};
use crate::scalar::{cplx, Cplx, Real};

/// Default maximum simulated width.
pub const SIM_CAP: usize = 24;
/// Smallest state (in amplitudes) processed in parallel.
pub const PARALLEL_MIN_DIM: usize = 1 << 12;
/// Reduction chunk length; fixed so partial-sum order is thread-independent.
pub const REDUCE_CHUNK: usize = 1 << 10;
const GRAIN: usize = 1 << 11;

/// A rayon pool with a fixed worker count.
pub struct Executor {
    pool: rayon::ThreadPool,
    threads: usize,
}

impl Executor {
    pub fn new(threads: usize) -> Result<Self> {
        if threads == 0 {
            return Err(Error::Argument("thread count must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Argument(format!("cannot build thread pool: {e}")))?;
        Ok(Self { pool, threads })
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

/// Normalized amplitudes of an `n`-qubit register; qubit 0 is the
/// least-significant bit of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    n_qubits: usize,
    amps: Vec<Cplx<T>>,
}

fn check_width(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 {
        return Err(Error::Argument("a state needs at least one qubit".into()));
    }
    if n_qubits > SIM_CAP {
        return Err(Error::Size { what: "statevector", n: n_qubits, cap: SIM_CAP });
    }
    Ok(())
}

/// Calls `f(base, lo, hi)` on matching pieces of the two halves of every
/// block split by the highest set bit of `x`. Inside a piece, `lo[k]` and
/// `hi[k ^ x_low]` are the amplitude pair `(j, j ⊕ x)` with `j = base + k`.
fn for_each_pair<T, F>(amps: &mut [Cplx<T>], x: usize, f: F)
where
    T: Real,
    F: Fn(usize, &mut [Cplx<T>], &mut [Cplx<T>]) + Send + Sync,
{
    debug_assert!(x != 0);
    let high = 1usize << (usize::BITS - 1 - x.leading_zeros());
    let x_low = x & !high;
    let min_piece = if x_low == 0 { 1 } else { (x_low + 1).next_power_of_two() };
    let piece = min_piece.max(high.min(GRAIN));
    let block = 2 * high;
    let per_block = |b: usize, blk: &mut [Cplx<T>], parallel: bool| {
        let (lo, hi) = blk.split_at_mut(high);
        if parallel {
            lo.par_chunks_mut(piece)
                .zip(hi.par_chunks_mut(piece))
                .enumerate()
                .for_each(|(p, (l, h))| f(b * block + p * piece, l, h));
        } else {
            for (p, (l, h)) in lo.chunks_mut(piece).zip(hi.chunks_mut(piece)).enumerate() {
                f(b * block + p * piece, l, h);
            }
        }
    };
    if amps.len() < PARALLEL_MIN_DIM {
        for (b, blk) in amps.chunks_mut(block).enumerate() {
            per_block(b, blk, false);
        }
    } else if amps.len() / block >= 8 {
        amps.par_chunks_mut(block).enumerate().for_each(|(b, blk)| per_block(b, blk, false));
    } else {
        for (b, blk) in amps.chunks_mut(block).enumerate() {
            per_block(b, blk, true);
        }
    }
}

/// Calls `f(base, chunk)` over contiguous chunks.
fn for_each_chunk<T, F>(amps: &mut [Cplx<T>], f: F)
where
    T: Real,
    F: Fn(usize, &mut [Cplx<T>]) + Send + Sync,
{
    if amps.len() < PARALLEL_MIN_DIM {
        f(0, amps);
    } else {
        amps.par_chunks_mut(GRAIN).enumerate().for_each(|(c, ch)| f(c * GRAIN, ch));
    }
}

/// `Σ_j g(j)` over `0..dim` in fixed chunks, combined in chunk order.
fn chunked_sum<T, G>(dim: usize, g: G) -> Cplx<T>
where
    T: Real,
    G: Fn(usize) -> Cplx<T> + Send + Sync,
{
    let chunk_sum = |c: usize| {
        let start = c * REDUCE_CHUNK;
        let end = (start + REDUCE_CHUNK).min(dim);
        (start..end).fold(Cplx::default(), |acc, j| acc + g(j))
    };
    let n_chunks = dim.div_ceil(REDUCE_CHUNK);
    let partials: Vec<Cplx<T>> = if dim < PARALLEL_MIN_DIM {
        (0..n_chunks).map(chunk_sum).collect()
    } else {
        (0..n_chunks).into_par_iter().map(chunk_sum).collect()
    };
    partials.into_iter().fold(Cplx::default(), |a, b| a + b)
}

impl<T: Real> StateVector<T> {
    /// `|0…0⟩`.
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        Self::basis_state(n_qubits, 0)
    }

    pub fn basis_state(n_qubits: usize, index: usize) -> Result<Self> {
        check_width(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::Argument(format!("basis index {index} out of range for {dim} amplitudes")));
        }
        let mut amps = vec![Cplx::default(); dim];
        amps[index] = cplx(T::one(), T::zero());
        Ok(Self { n_qubits, amps })
    }

    /// Wraps amplitudes; the length must be `2^n` and the norm 1 within `1e-10`.
    pub fn from_amplitudes(amps: Vec<Cplx<T>>) -> Result<Self> {
        let dim = amps.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Shape(format!("amplitude count {dim} is not 2^n with n ≥ 1")));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_width(n_qubits)?;
        let s = Self { n_qubits, amps };
        let norm = s.norm_sqr();
        if (norm - T::one()).abs() > T::tol(1e-10) {
            return Err(Error::Validation(format!("state norm² {norm} differs from 1")));
        }
        Ok(s)
    }

    /// Haar-like random state from normally distributed amplitudes.
    pub fn random(n_qubits: usize, rng: &mut impl Rng) -> Result<Self> {
        check_width(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut gauss = || {
            // Box–Muller
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            let v: f64 = rng.gen();
            (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
        };
        let mut amps: Vec<Cplx<T>> = (0..dim).map(|_| cplx(T::lit(gauss()), T::lit(gauss()))).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<T>().sqrt();
        amps.iter_mut().for_each(|a| *a = *a / norm);
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Cplx<T>] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Cplx<T>> {
        self.amps
    }

    pub fn norm_sqr(&self) -> T {
        chunked_sum(self.dim(), |j| cplx(self.amps[j].norm_sqr(), T::zero())).re
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Multiplies every amplitude by `e^{iφ}`.
    pub fn apply_global_phase(&mut self, phi: T) {
        let ph = Cplx::from_polar(T::one(), phi);
        for_each_chunk(&mut self.amps, |_, ch| ch.iter_mut().for_each(|a| *a *= ph));
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::Index { index: q, n_qubits: self.n_qubits });
        }
        Ok(())
    }

    fn check_same_width(&self, n: usize, what: &str) -> Result<()> {
        if n != self.n_qubits {
            return Err(Error::Shape(format!(
                "{what} acts on {n} qubits, state has {}",
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// `exp(-iθY/2)` on `qubit`.
    pub fn apply_ry(&mut self, qubit: usize, theta: T) -> Result<()> {
        self.check_qubit(qubit)?;
        let half = theta * T::lit(0.5);
        let (s, c) = half.sin_cos();
        for_each_pair(&mut self.amps, 1 << qubit, |_, lo, hi| {
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x * c - y * s;
                *b = x * s + y * c;
            }
        });
        Ok(())
    }

    /// `exp(-iθZ/2)` on `qubit`: phases `e^{∓iθ/2}` on the 0/1 subspaces.
    pub fn apply_rz(&mut self, qubit: usize, theta: T) -> Result<()> {
        self.check_qubit(qubit)?;
        let half = theta * T::lit(0.5);
        let p0 = Cplx::from_polar(T::one(), -half);
        let p1 = Cplx::from_polar(T::one(), half);
        let bit = 1usize << qubit;
        for_each_chunk(&mut self.amps, |base, ch| {
            for (k, a) in ch.iter_mut().enumerate() {
                *a *= if (base + k) & bit == 0 { p0 } else { p1 };
            }
        });
        Ok(())
    }

    pub fn apply_x(&mut self, qubit: usize) -> Result<()> {
        self.check_qubit(qubit)?;
        for_each_pair(&mut self.amps, 1 << qubit, |_, lo, hi| lo.swap_with_slice(hi));
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::Argument(format!("CNOT control and target are both qubit {control}")));
        }
        let cbit = 1usize << control;
        for_each_pair(&mut self.amps, 1 << target, |base, lo, hi| {
            for (k, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                if (base + k) & cbit != 0 {
                    std::mem::swap(a, b);
                }
            }
        });
        Ok(())
    }

    /// In-place `P|ψ⟩`.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        self.check_same_width(p.n_qubits(), "pauli string")?;
        let x = p.x_mask() as usize;
        if x == 0 {
            for_each_chunk(&mut self.amps, |base, ch| {
                for (k, a) in ch.iter_mut().enumerate() {
                    *a *= p.phase_on::<T>(base + k);
                }
            });
            return Ok(());
        }
        let x_low = x & !(1usize << (usize::BITS - 1 - x.leading_zeros()));
        for_each_pair(&mut self.amps, x, |base, lo, hi| {
            for (k, a) in lo.iter_mut().enumerate() {
                let j = base + k;
                let b = &mut hi[k ^ x_low];
                let (va, vb) = (*a, *b);
                *a = p.phase_on::<T>(j ^ x) * vb;
                *b = p.phase_on::<T>(j) * va;
            }
        });
        Ok(())
    }

    /// `exp(-iθP/2)|ψ⟩ = cos(θ/2)|ψ⟩ - i sin(θ/2) P|ψ⟩`.
    pub fn apply_pauli_rotation(&mut self, p: &PauliString, theta: T) -> Result<()> {
        self.check_same_width(p.n_qubits(), "pauli rotation")?;
        let half = theta * T::lit(0.5);
        let (s, c) = half.sin_cos();
        let c = cplx(c, T::zero());
        let mis = cplx(T::zero(), -s);
        let x = p.x_mask() as usize;
        if x == 0 {
            for_each_chunk(&mut self.amps, |base, ch| {
                for (k, a) in ch.iter_mut().enumerate() {
                    *a *= c + mis * p.phase_on::<T>(base + k);
                }
            });
            return Ok(());
        }
        let x_low = x & !(1usize << (usize::BITS - 1 - x.leading_zeros()));
        for_each_pair(&mut self.amps, x, |base, lo, hi| {
            for (k, a) in lo.iter_mut().enumerate() {
                let j = base + k;
                let b = &mut hi[k ^ x_low];
                let (va, vb) = (*a, *b);
                *a = c * va + mis * p.phase_on::<T>(j ^ x) * vb;
                *b = c * vb + mis * p.phase_on::<T>(j) * va;
            }
        });
        Ok(())
    }

    /// `⟨ψ|P|ψ⟩` as a complex number (real up to roundoff).
    fn pauli_expectation(&self, p: &PauliString) -> Cplx<T> {
        let x = p.x_mask() as usize;
        let z = p.z_mask() as usize;
        let amps = &self.amps;
        if x == 0 {
            chunked_sum(self.dim(), |j| {
                let w = amps[j].norm_sqr();
                cplx(if (j & z).count_ones() % 2 == 0 { w } else { -w }, T::zero())
            })
        } else {
            chunked_sum(self.dim(), |j| amps[j ^ x].conj() * p.phase_on::<T>(j) * amps[j])
        }
    }

    /// `Σ_j w_j ⟨ψ|P_j|ψ⟩`.
    pub fn expectation(&self, h: &PauliSum<T>) -> Result<T> {
        self.check_same_width(h.n_qubits(), "hamiltonian")?;
        let term = |&(_, p): &(T, PauliString)| {
            let e = self.pauli_expectation(&p);
            debug_assert!(e.im.abs() <= T::tol(1e-10), "imaginary residue {} on {p}", e.im);
            e.re
        };
        let values: Vec<T> = if self.dim() < PARALLEL_MIN_DIM {
            h.terms().iter().map(term).collect()
        } else {
            h.terms().par_iter().map(term).collect()
        };
        Ok(h.terms().iter().zip(values).fold(T::zero(), |acc, (&(w, _), v)| acc + w * v))
    }

    /// `Σ_i conj(self_i) other_i`.
    pub fn inner(&self, other: &Self) -> Result<Cplx<T>> {
        self.check_same_width(other.n_qubits, "state")?;
        let (a, b) = (&self.amps, &other.amps);
        Ok(chunked_sum(self.dim(), |j| a[j].conj() * b[j]))
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap_sq(&self, other: &Self) -> Result<T> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Largest amplitude-wise modulus difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(&a, &b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }

    /// Debug dump as `index,re,im` rows.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "index,re,im")?;
        for (i, a) in self.amps.iter().enumerate() {
            writeln!(w, "{i},{:e},{:e}", a.re.as_f64(), a.im.as_f64())?;
        }
        Ok(())
    }
}

/// `|⟨a|b⟩|²`.
pub fn overlap_sq<T: Real>(a: &StateVector<T>, b: &StateVector<T>) -> Result<T> {
    a.overlap_sq(b)
}

/// `⟨ψ|H|ψ⟩`.
pub fn expectation<T: Real>(h: &PauliSum<T>, s: &StateVector<T>) -> Result<T> {
    s.expectation(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{pauli_sum_matrix, Pauli};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Cplx<f64> {
        cplx(re, im)
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_string(n: usize, rng: &mut impl Rng) -> PauliString {
        let letters: Vec<Pauli> = (0..n)
            .map(|_| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.gen_range(0..4)])
            .collect();
        PauliString::from_qubit_letters(&letters)
    }

    #[test]
    fn zero_states() {
        assert_eq!(StateVector::<f64>::zero_state(1).unwrap().amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0)]);
        let s = StateVector::<f64>::zero_state(2).unwrap();
        assert_eq!(s.amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let s = StateVector::<f64>::zero_state(4).unwrap();
        assert_eq!(s.dim(), 16);
        assert_eq!(s.norm_sqr(), 1.0);
        assert!(matches!(StateVector::<f64>::zero_state(25), Err(Error::Size { .. })));
    }

    #[test]
    fn ry_examples() {
        let mut s = StateVector::<f64>::zero_state(1).unwrap();
        s.apply_ry(0, PI).unwrap();
        assert!((s.amplitudes()[0] - c(0.0, 0.0)).norm() < 1e-16);
        assert_eq!(s.amplitudes()[1], c(1.0, 0.0));

        let mut s = StateVector::<f64>::zero_state(1).unwrap();
        s.apply_ry(0, 0.0).unwrap();
        assert_eq!(s, StateVector::zero_state(1).unwrap());

        let mut s = StateVector::<f64>::zero_state(1).unwrap();
        s.apply_ry(0, PI / 2.0).unwrap();
        assert!((s.amplitudes()[0] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((s.amplitudes()[1] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!(matches!(s.apply_ry(1, 0.1), Err(Error::Index { index: 1, n_qubits: 1 })));
    }

    #[test]
    fn rz_examples() {
        let z = PauliSum::from_terms(1, [(1.0, "Z".parse().unwrap())]).unwrap();
        let mut s = StateVector::<f64>::zero_state(1).unwrap();
        s.apply_rz(0, 0.7).unwrap();
        assert!((s.amplitudes()[0] - Cplx::from_polar(1.0, -0.35)).norm() < 1e-15);
        assert_eq!(s.expectation(&z).unwrap(), 1.0);

        let r = StateVector::<f64>::random(3, &mut rng(1)).unwrap();
        let mut s = r.clone();
        s.apply_rz(1, 0.0).unwrap();
        assert_eq!(s, r);
        s.apply_rz(2, 2.0 * PI).unwrap();
        for (a, b) in s.amplitudes().iter().zip(r.amplitudes()) {
            assert!((a + b).norm() < 1e-14);
        }
    }

    #[test]
    fn cnot_examples() {
        // |10⟩: qubit 1 set, index 2.
        let mut s = StateVector::<f64>::basis_state(2, 0b10).unwrap();
        s.apply_cnot(1, 0).unwrap();
        assert_eq!(s, StateVector::basis_state(2, 0b11).unwrap());
        let mut s = StateVector::<f64>::zero_state(2).unwrap();
        s.apply_cnot(1, 0).unwrap();
        assert_eq!(s, StateVector::zero_state(2).unwrap());
        assert!(matches!(s.apply_cnot(1, 1), Err(Error::Argument(_))));

        let r = StateVector::<f64>::random(5, &mut rng(2)).unwrap();
        let mut s = r.clone();
        s.apply_cnot(3, 1).unwrap();
        s.apply_cnot(3, 1).unwrap();
        assert!(s.max_abs_diff(&r) <= 1e-14);
    }

    #[test]
    fn pauli_rotation_examples() {
        let r = StateVector::<f64>::random(3, &mut rng(3)).unwrap();
        let p: PauliString = "XYZ".parse().unwrap();
        let mut s = r.clone();
        s.apply_pauli_rotation(&p, 0.0).unwrap();
        assert_eq!(s, r);

        let y = PauliString::single(3, 1, Pauli::Y);
        let mut a = r.clone();
        a.apply_pauli_rotation(&y, 0.83).unwrap();
        let mut b = r.clone();
        b.apply_ry(1, 0.83).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-15);

        let mut s = r.clone();
        s.apply_pauli_rotation(&p, 2.0 * PI).unwrap();
        for (x, y) in s.amplitudes().iter().zip(r.amplitudes()) {
            assert!((x + y).norm() < 1e-14);
        }
    }

    #[test]
    fn pauli_rotation_matches_dense_exponential() {
        let mut g = rng(4);
        for _ in 0..30 {
            let n = g.gen_range(1..=4);
            let p = random_string(n, &mut g);
            let theta: f64 = g.gen_range(-3.0..3.0);
            let r = StateVector::<f64>::random(n, &mut g).unwrap();
            let mut s = r.clone();
            s.apply_pauli_rotation(&p, theta).unwrap();
            let pm = crate::pauli::pauli_matrix::<f64>(&p).unwrap();
            let u = Matrix::identity(1 << n)
                .scale(c((theta / 2.0).cos(), 0.0))
                .add(&pm.scale(c(0.0, -(theta / 2.0).sin())));
            let expect = u.apply(r.amplitudes());
            for (a, b) in s.amplitudes().iter().zip(&expect) {
                assert!((a - b).norm() < 1e-14, "{p}");
            }
        }
    }
    use crate::dense::Matrix;

    #[test]
    fn apply_pauli_matches_dense_and_is_an_involution() {
        let mut g = rng(5);
        for _ in 0..50 {
            let n = g.gen_range(1..=5);
            let p = random_string(n, &mut g);
            let r = StateVector::<f64>::random(n, &mut g).unwrap();
            let mut s = r.clone();
            s.apply_pauli(&p).unwrap();
            let expect = crate::pauli::pauli_matrix::<f64>(&p).unwrap().apply(r.amplitudes());
            for (a, b) in s.amplitudes().iter().zip(&expect) {
                assert!((a - b).norm() < 1e-15, "{p}");
            }
            s.apply_pauli(&p).unwrap();
            assert!(s.max_abs_diff(&r) <= 1e-14);
        }
        let yx: PauliString = "YX".parse().unwrap();
        let r = StateVector::<f64>::random(2, &mut g).unwrap();
        let mut s = r.clone();
        s.apply_pauli(&yx).unwrap();
        s.apply_pauli(&yx).unwrap();
        assert!(s.max_abs_diff(&r) <= 1e-14);
    }

    #[test]
    fn expectation_examples() {
        let z = PauliSum::from_terms(1, [(1.0, "Z".parse().unwrap())]).unwrap();
        let zero = StateVector::<f64>::zero_state(1).unwrap();
        assert_eq!(zero.expectation(&z).unwrap(), 1.0);
        let sho = PauliSum::from_terms(
            1,
            [(0.5, PauliString::identity(1)), (-0.25, "Z".parse().unwrap())],
        )
        .unwrap();
        assert_eq!(zero.expectation(&sho).unwrap(), 0.25);
        let two = StateVector::<f64>::zero_state(2).unwrap();
        assert!(matches!(two.expectation(&z), Err(Error::Shape(_))));
    }

    #[test]
    fn expectation_matches_dense_quadratic_form() {
        let mut g = rng(6);
        let n = 6;
        let terms: Vec<(f64, PauliString)> =
            (0..40).map(|_| (g.gen_range(-1.0..1.0), random_string(n, &mut g))).collect();
        let h = PauliSum::from_terms(n, terms).unwrap();
        let s = StateVector::<f64>::random(n, &mut g).unwrap();
        let hv = pauli_sum_matrix(&h).unwrap().apply(s.amplitudes());
        let dense: Cplx<f64> = s.amplitudes().iter().zip(&hv).map(|(a, b)| a.conj() * b).sum();
        assert!((s.expectation(&h).unwrap() - dense.re).abs() <= 1e-10);
    }

    #[test]
    fn overlap_examples() {
        let mut g = rng(7);
        let s = StateVector::<f64>::random(4, &mut g).unwrap();
        assert!((s.overlap_sq(&s).unwrap() - 1.0).abs() < 1e-14);
        let zero = StateVector::<f64>::basis_state(1, 0).unwrap();
        let one = StateVector::<f64>::basis_state(1, 1).unwrap();
        assert_eq!(overlap_sq(&zero, &one).unwrap(), 0.0);
        let t = StateVector::<f64>::random(4, &mut g).unwrap();
        let base = s.overlap_sq(&t).unwrap();
        let mut tp = t.clone();
        tp.apply_global_phase(g.gen_range(0.0..6.0));
        assert!((s.overlap_sq(&tp).unwrap() - base).abs() <= 1e-14);
        let wide = StateVector::<f64>::zero_state(2).unwrap();
        assert!(matches!(zero.overlap_sq(&wide), Err(Error::Shape(_))));
    }

    #[test]
    fn from_amplitudes_validates() {
        assert!(matches!(
            StateVector::<f64>::from_amplitudes(vec![c(1.0, 0.0); 3]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            StateVector::<f64>::from_amplitudes(vec![c(1.0, 0.0); 2]),
            Err(Error::Validation(_))
        ));
        let s = StateVector::<f64>::from_amplitudes(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        assert_eq!(s.n_qubits(), 1);
    }

    #[test]
    fn large_states_take_the_parallel_path_consistently() {
        // 14 qubits crosses PARALLEL_MIN_DIM; compare against a 1-thread pool.
        let mut g = rng(8);
        let n = 14;
        let base = StateVector::<f64>::random(n, &mut g).unwrap();
        let p = random_string(n, &mut g).with(13, Pauli::X);
        let h = PauliSum::from_terms(n, (0..8).map(|_| (g.gen_range(-1.0..1.0), random_string(n, &mut g))))
            .unwrap();
        let run = |threads: usize| {
            Executor::new(threads).unwrap().install(|| {
                let mut s = base.clone();
                s.apply_ry(13, 0.3).unwrap();
                s.apply_ry(0, 0.2).unwrap();
                s.apply_rz(7, -0.4).unwrap();
                s.apply_cnot(13, 2).unwrap();
                s.apply_pauli_rotation(&p, 0.9).unwrap();
                s.apply_pauli(&p).unwrap();
                let e = s.expectation(&h).unwrap();
                (s, e)
            })
        };
        let (s1, e1) = run(1);
        let (s4, e4) = run(4);
        assert_eq!(s1, s4);
        assert_eq!(e1, e4);
        assert!((s1.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_precision_kernels() {
        let mut s = StateVector::<f32>::zero_state(3).unwrap();
        s.apply_ry(0, 1.0).unwrap();
        s.apply_cnot(0, 2).unwrap();
        s.apply_rz(2, 0.5).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-6);
        let z0 = PauliSum::from_terms(3, [(1.0f32, "IIZ".parse().unwrap())]).unwrap();
        assert!((s.expectation(&z0).unwrap() - 1.0f32.cos()).abs() < 1e-6);
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let s = StateVector::<f64>::zero_state(1).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("index,re,im\n0,1e0,0e0"));
    }
}
