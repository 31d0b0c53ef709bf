//! VQE and VQD loops with Adam or plain gradient descent.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzProgram;
use crate::error::{Error, Result};
use crate::pauli::PauliSum;
use crate::scalar::Real;
use crate::statevector::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub max_iterations: usize,
    /// Stop once `|E_t − E_{t−1}|` drops below this.
    pub tolerance: f64,
    /// Keep every `theta_stride`-th parameter vector in the trace.
    pub theta_stride: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 3e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            max_iterations: 1000,
            tolerance: 1e-7,
            theta_stride: 1,
        }
    }
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f64) -> Self {
        Self { learning_rate, ..Self::default() }
    }

    pub fn sgd(learning_rate: f64) -> Self {
        Self { kind: OptimizerKind::Sgd, learning_rate, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Argument(m.to_string()));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning rate must be positive");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0 && self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            return bad("Adam betas must lie in (0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("Adam epsilon must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if self.theta_stride == 0 {
            return bad("theta_stride must be positive");
        }
        Ok(())
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u32,
}

impl<T: Real> AdamState<T> {
    pub fn new(n: usize) -> Self {
        Self { m: vec![T::zero(); n], v: vec![T::zero(); n], t: 0 }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<T: Real>(
    state: &AdamState<T>,
    theta: &[T],
    grad: &[T],
    cfg: &OptimizerConfig,
) -> Result<(AdamState<T>, Vec<T>)> {
    let mut s = state.clone();
    let mut th = theta.to_vec();
    adam_update(&mut s, &mut th, grad, cfg)?;
    Ok((s, th))
}

/// In-place form of [`adam_step`].
pub fn adam_update<T: Real>(s: &mut AdamState<T>, theta: &mut [T], grad: &[T], cfg: &OptimizerConfig) -> Result<()> {
    if theta.len() != grad.len() || s.m.len() != theta.len() {
        return Err(Error::Shape(format!(
            "Adam state {} / θ {} / gradient {}",
            s.m.len(),
            theta.len(),
            grad.len()
        )));
    }
    let (b1, b2) = (T::lit(cfg.adam_beta1), T::lit(cfg.adam_beta2));
    let (lr, eps) = (T::lit(cfg.learning_rate), T::lit(cfg.adam_epsilon));
    s.t += 1;
    let c1 = T::one() - b1.powi(s.t as i32);
    let c2 = T::one() - b2.powi(s.t as i32);
    for i in 0..theta.len() {
        let g = grad[i];
        s.m[i] = b1 * s.m[i] + (T::one() - b1) * g;
        s.v[i] = b2 * s.v[i] + (T::one() - b2) * g * g;
        let mhat = s.m[i] / c1;
        let vhat = s.v[i] / c2;
        theta[i] -= lr * mhat / (vhat.sqrt() + eps);
    }
    Ok(())
}

/// `θ − lr·g`.
pub fn sgd_step<T: Real>(theta: &[T], grad: &[T], cfg: &OptimizerConfig) -> Result<Vec<T>> {
    if theta.len() != grad.len() {
        return Err(Error::Shape(format!("θ {} / gradient {}", theta.len(), grad.len())));
    }
    let lr = T::lit(cfg.learning_rate);
    Ok(theta.iter().zip(grad).map(|(&t, &g)| t - lr * g).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    #[default]
    Zero,
    Random,
    Meta,
}

impl std::fmt::Display for InitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InitKind::Zero => "zero",
            InitKind::Random => "random",
            InitKind::Meta => "meta",
        })
    }
}

/// Uniform on `[−π, π]` per parameter.
pub fn random_init<T: Real>(n: usize, rng: &mut impl Rng) -> Vec<T> {
    let pi = std::f64::consts::PI;
    (0..n).map(|_| T::lit(rng.gen_range(-pi..=pi))).collect()
}

pub fn seeded_random_init<T: Real>(n: usize, seed: u64) -> Vec<T> {
    random_init(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Trace of one optimization run. Index `t` of the per-iteration vectors is
/// the state after `t` updates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub energies: Vec<f64>,
    /// Objective actually minimized (equals `energies` for VQE).
    pub objectives: Vec<f64>,
    /// Summed `|⟨ψ|ψ_r⟩|²` against the references; empty for VQE.
    pub overlaps: Vec<f64>,
    /// Milliseconds since the start of the run.
    pub wall_ms: Vec<f64>,
    /// `(iteration, θ)` every `theta_stride` iterations, plus the last one.
    pub theta_trace: Vec<(usize, Vec<f64>)>,
    pub final_theta: Vec<f64>,
    pub final_energy: f64,
    pub iterations: usize,
    pub wall_time: f64,
    pub converged: bool,
    pub init_kind: InitKind,
    pub beta: Option<f64>,
}

impl RunRecord {
    pub fn final_overlap(&self) -> Option<f64> {
        self.overlaps.last().copied()
    }

    /// `iter,energy,overlap_sq,wall_ms`; the overlap column is empty for VQE.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "iter,energy,overlap_sq,wall_ms")?;
        for (i, e) in self.energies.iter().enumerate() {
            let ov = self.overlaps.get(i).map(|o| format!("{o:.17e}")).unwrap_or_default();
            writeln!(w, "{i},{e:.17e},{ov},{:.3}", self.wall_ms[i])?;
        }
        Ok(())
    }
}

/// Deflation settings for the first excited state.
#[derive(Debug, Clone)]
pub struct VqdConfig<T> {
    pub beta: T,
    pub reference_states: Vec<StateVector<T>>,
}

impl<T: Real> VqdConfig<T> {
    /// Several level gaps of an oscillator with frequency `omega`.
    pub fn default_beta(omega: T) -> T {
        T::lit(10.0) * omega
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if !(self.beta >= T::zero()) || !self.beta.is_finite() {
            return Err(Error::Argument(format!("penalty weight must be non-negative, got {}", self.beta)));
        }
        if self.reference_states.is_empty() {
            return Err(Error::Argument("VQD needs at least one reference state".into()));
        }
        for (i, r) in self.reference_states.iter().enumerate() {
            if r.n_qubits() != n_qubits {
                return Err(Error::Shape(format!("reference {i} has {} qubits, ansatz {n_qubits}", r.n_qubits())));
            }
            if (r.norm_sqr() - T::one()).abs() > T::tol(1e-8) {
                return Err(Error::Validation(format!("reference {i} is not normalized")));
            }
            for (j, q) in self.reference_states[..i].iter().enumerate() {
                if r.overlap_sq(q)? > T::lit(1e-4) {
                    return Err(Error::Validation(format!("references {j} and {i} are not orthogonal")));
                }
            }
        }
        Ok(())
    }

    fn penalty(&self, s: &StateVector<T>) -> Result<T> {
        let mut total = T::zero();
        for r in &self.reference_states {
            total += s.overlap_sq(r)?;
        }
        Ok(total)
    }
}

fn numerical(message: String, energies: &[f64]) -> Error {
    Error::Numerical { message, energies: energies.to_vec() }
}

/// Ground-state VQE from `theta0`.
pub fn run_vqe<T: Real>(
    h: &PauliSum<T>,
    a: &AnsatzProgram<T>,
    theta0: &[T],
    cfg: &OptimizerConfig,
    init_kind: InitKind,
) -> Result<RunRecord> {
    optimize(h, a, theta0, cfg, init_kind, None)
}

/// Minimizes `⟨H⟩ + β Σ_r |⟨ψ|ψ_r⟩|²`. With `β = 0` the trace equals
/// [`run_vqe`]'s apart from the logged overlaps.
pub fn run_vqd<T: Real>(
    h: &PauliSum<T>,
    a: &AnsatzProgram<T>,
    theta0: &[T],
    cfg: &OptimizerConfig,
    vqd: &VqdConfig<T>,
    init_kind: InitKind,
) -> Result<RunRecord> {
    vqd.validate(a.n_qubits())?;
    optimize(h, a, theta0, cfg, init_kind, Some(vqd))
}

fn optimize<T: Real>(
    h: &PauliSum<T>,
    a: &AnsatzProgram<T>,
    theta0: &[T],
    cfg: &OptimizerConfig,
    init_kind: InitKind,
    vqd: Option<&VqdConfig<T>>,
) -> Result<RunRecord> {
    cfg.validate()?;
    if h.n_qubits() != a.n_qubits() {
        return Err(Error::Shape(format!("hamiltonian has {} qubits, ansatz {}", h.n_qubits(), a.n_qubits())));
    }
    if theta0.len() != a.n_params() {
        return Err(Error::Shape(format!("θ0 has {} entries, ansatz {}", theta0.len(), a.n_params())));
    }
    let start = Instant::now();
    let penalized = vqd.filter(|v| v.beta != T::zero());

    // (energy, objective, overlap)
    let evaluate = |theta: &[T]| -> Result<(T, T, Option<T>)> {
        let s = a.run(theta)?;
        let e = s.expectation(h)?;
        match vqd {
            None => Ok((e, e, None)),
            Some(v) => {
                let ov = v.penalty(&s)?;
                let obj = if penalized.is_some() { e + v.beta * ov } else { e };
                Ok((e, obj, Some(ov)))
            }
        }
    };
    let gradient = |theta: &[T]| -> Result<Vec<T>> {
        match penalized {
            None => a.shift_gradient(theta, |s| s.expectation(h)),
            Some(v) => a.shift_gradient(theta, |s| Ok(s.expectation(h)? + v.beta * v.penalty(s)?)),
        }
    };

    let mut rec = RunRecord {
        energies: Vec::new(),
        objectives: Vec::new(),
        overlaps: Vec::new(),
        wall_ms: Vec::new(),
        theta_trace: Vec::new(),
        final_theta: Vec::new(),
        final_energy: f64::NAN,
        iterations: 0,
        wall_time: 0.0,
        converged: false,
        init_kind,
        beta: vqd.map(|v| v.beta.as_f64()),
    };
    let push = |rec: &mut RunRecord, it: usize, theta: &[T], (e, obj, ov): (T, T, Option<T>)| -> Result<()> {
        rec.energies.push(e.as_f64());
        rec.objectives.push(obj.as_f64());
        if let Some(o) = ov {
            rec.overlaps.push(o.as_f64());
        }
        rec.wall_ms.push(start.elapsed().as_secs_f64() * 1e3);
        if it % cfg.theta_stride == 0 {
            rec.theta_trace.push((it, theta.iter().map(|x| x.as_f64()).collect()));
        }
        if !e.is_finite() || !obj.is_finite() {
            return Err(numerical(format!("non-finite energy at iteration {it}"), &rec.energies));
        }
        Ok(())
    };

    let mut theta = theta0.to_vec();
    let mut adam = AdamState::new(theta.len());
    let mut last = evaluate(&theta)?;
    push(&mut rec, 0, &theta, last)?;
    for it in 1..=cfg.max_iterations {
        let grad = gradient(&theta)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(numerical(format!("non-finite gradient at iteration {it}"), &rec.energies));
        }
        match cfg.kind {
            OptimizerKind::Adam => adam_update(&mut adam, &mut theta, &grad, cfg)?,
            OptimizerKind::Sgd => theta = sgd_step(&theta, &grad, cfg)?,
        }
        let now = evaluate(&theta)?;
        push(&mut rec, it, &theta, now)?;
        rec.iterations = it;
        let tol = cfg.tolerance;
        let de = (now.0 - last.0).abs().as_f64();
        let dobj = (now.1 - last.1).abs().as_f64();
        last = now;
        if de < tol && dobj < tol {
            rec.converged = true;
            break;
        }
    }
    if rec.theta_trace.last().map(|(i, _)| *i) != Some(rec.iterations) {
        rec.theta_trace.push((rec.iterations, theta.iter().map(|x| x.as_f64()).collect()));
    }
    rec.final_theta = theta.iter().map(|x| x.as_f64()).collect();
    rec.final_energy = last.0.as_f64();
    rec.wall_time = start.elapsed().as_secs_f64();
    Ok(rec)
}
