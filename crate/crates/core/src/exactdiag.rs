//! Dense Hermitian eigensolver used as the exact reference.
//!
//! Complex Householder reduction to a Hermitian tridiagonal, a diagonal phase
//! change that makes the off-diagonal real, then implicit QL with Wilkinson
//! shifts on the real symmetric tridiagonal.

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::pauli::{pauli_sum_matrix, PauliSum, DENSE_CAP};
use crate::scalar::{cplx, Cplx, Real};

/// Largest matrix dimension accepted.
pub const MAX_DIM: usize = 1 << DENSE_CAP;
const QL_SWEEPS: usize = 60;

#[derive(Debug, Clone)]
pub struct Spectrum<T> {
    /// Ascending.
    pub eigenvalues: Vec<T>,
    /// Column `j` is the eigenvector for `eigenvalues[j]`.
    pub eigenvectors: Option<Matrix<T>>,
}

pub fn eigen_hermitian<T: Real>(m: &Matrix<T>, keep_vectors: bool) -> Result<Spectrum<T>> {
    let n = m.dim();
    if n == 0 || n > MAX_DIM {
        return Err(Error::Size { what: "dense eigensolver dimension", n, cap: MAX_DIM });
    }
    let dev = m.hermiticity_deviation();
    if !(dev <= T::tol(1e-10)) {
        return Err(Error::Validation(format!("matrix is not Hermitian (max |M − M†| = {dev})")));
    }

    let mut a: Vec<Cplx<T>> = m.as_slice().to_vec();
    let reflectors = tridiagonalize(&mut a, n);
    let mut d: Vec<T> = (0..n).map(|i| a[i * n + i].re).collect();
    let mut e = vec![T::zero(); n];
    let mut phase = vec![cplx(T::one(), T::zero()); n];
    for k in 0..n.saturating_sub(1) {
        let off = a[(k + 1) * n + k];
        let r = off.norm();
        e[k] = r;
        phase[k + 1] = if r > T::zero() { phase[k] * off.unscale(r) } else { phase[k] };
    }

    let mut zt = keep_vectors.then(|| {
        let mut z = vec![T::zero(); n * n];
        for i in 0..n {
            z[i * n + i] = T::one();
        }
        z
    });
    tql(&mut d, &mut e, zt.as_deref_mut(), n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite eigenvalues"));
    let eigenvalues = order.iter().map(|&i| d[i]).collect();

    let eigenvectors = zt.map(|zt| {
        let mut out = Matrix::zeros(n);
        let mut u = vec![Cplx::<T>::default(); n];
        for (col, &j) in order.iter().enumerate() {
            for k in 0..n {
                u[k] = phase[k] * zt[j * n + k];
            }
            for (k, v) in reflectors.iter().enumerate().rev() {
                reflect(&mut u[k + 1..], v);
            }
            for k in 0..n {
                out[(k, col)] = u[k];
            }
        }
        out
    });
    Ok(Spectrum { eigenvalues, eigenvectors })
}

/// `u ← (I − 2vv†)u` for unit `v`.
fn reflect<T: Real>(u: &mut [Cplx<T>], v: &[Cplx<T>]) {
    let dot: Cplx<T> = v.iter().zip(u.iter()).map(|(a, b)| a.conj() * b).sum();
    let two = T::lit(2.0);
    for (x, y) in u.iter_mut().zip(v) {
        *x -= y * dot * two;
    }
}

/// Reduces `a` (row-major, Hermitian) in place. Returns the unit Householder
/// vectors; reflector `k` acts on indices `k+1..n`.
fn tridiagonalize<T: Real>(a: &mut [Cplx<T>], n: usize) -> Vec<Vec<Cplx<T>>> {
    let mut out = Vec::with_capacity(n.saturating_sub(2));
    let two = T::lit(2.0);
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let x: Vec<Cplx<T>> = (0..m).map(|i| a[(k + 1 + i) * n + k]).collect();
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        let tail = x[1..].iter().map(|z| z.norm_sqr()).sum::<T>();
        if norm == T::zero() || tail == T::zero() {
            out.push(vec![Cplx::default(); m]);
            continue;
        }
        let x0n = x[0].norm();
        let ph = if x0n > T::zero() { x[0].unscale(x0n) } else { cplx(T::one(), T::zero()) };
        let alpha = -(ph * norm);
        let mut v = x;
        v[0] -= alpha;
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        for z in &mut v {
            *z = z.unscale(vn);
        }

        // p = A v on the trailing block, including row k
        let lo = k;
        let mut p = vec![Cplx::<T>::default(); n - lo];
        for (pi, i) in p.iter_mut().zip(lo..n) {
            let row = &a[i * n + k + 1..i * n + n];
            *pi = row.iter().zip(&v).map(|(x, y)| x * y).sum();
        }
        // K = v† p (real)
        let kk: T = v.iter().zip(&p[1..]).map(|(a, b)| (a.conj() * b).re).sum();
        // q = p − K v, padded so index 0 is row k
        let mut q = p;
        for (qi, vi) in q[1..].iter_mut().zip(&v) {
            *qi -= vi.scale(kk);
        }
        let vfull = |i: usize| if i == 0 { Cplx::default() } else { v[i - 1] };
        for i in 0..n - lo {
            let (vi, qi) = (vfull(i), q[i]);
            for j in 0..n - lo {
                let delta = (vi * q[j].conj() + qi * vfull(j).conj()).scale(two);
                a[(lo + i) * n + lo + j] -= delta;
            }
        }
        // exact zeros outside the tridiagonal band
        for i in k + 2..n {
            a[i * n + k] = Cplx::default();
            a[k * n + i] = Cplx::default();
        }
        a[(k + 1) * n + k] = alpha;
        a[k * n + k + 1] = alpha.conj();
        out.push(v);
    }
    out
}

/// Implicit QL on the symmetric tridiagonal `(d, e)`, `e[i]` coupling `i` and
/// `i + 1`. Rotations are accumulated into the rows of `zt` when present.
fn tql<T: Real>(d: &mut [T], e: &mut [T], mut zt: Option<&mut [T]>, n: usize) -> Result<()> {
    let eps = T::epsilon();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_SWEEPS {
                return Err(Error::NoConvergence(format!(
                    "tridiagonal QL did not converge for eigenvalue {l} after {QL_SWEEPS} sweeps"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (T::lit(2.0) * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + T::lit(2.0) * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = zt.as_deref_mut() {
                    let (head, tail) = z.split_at_mut((i + 1) * n);
                    let zi = &mut head[i * n..];
                    let zi1 = &mut tail[..n];
                    for k in 0..n {
                        let f = zi1[k];
                        zi1[k] = s * zi[k] + c * f;
                        zi[k] = c * zi[k] - s * f;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

/// Smallest eigenvalue of the dense realization of `h`.
pub fn ground_energy<T: Real>(h: &PauliSum<T>) -> Result<T> {
    Ok(eigen_hermitian(&pauli_sum_matrix(h)?, false)?.eigenvalues[0])
}

/// The `k` lowest eigenvalues.
pub fn lowest_energies<T: Real>(h: &PauliSum<T>, k: usize) -> Result<Vec<T>> {
    let mut ev = eigen_hermitian(&pauli_sum_matrix(h)?, false)?.eigenvalues;
    ev.truncate(k);
    Ok(ev)
}
