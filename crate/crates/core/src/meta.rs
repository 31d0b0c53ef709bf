//! LSTM + fully connected meta-initializer.
//!
//! The network reads, at unroll step `k`, the energy of the previous
//! prediction and the last parameter change (zero-padded to `D_max`), and
//! emits a `D_max`-vector whose prefix is the next parameter guess. Training
//! minimizes the summed energy along the unroll, with exact backpropagation
//! through the recurrence; `∂E/∂θ` comes from the parameter-shift rule.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzProgram;
use crate::error::{Error, Result};
use crate::optimize::{adam_update, AdamState, OptimizerConfig};
use crate::pauli::PauliSum;
use crate::scalar::Real;

pub const MODEL_MAGIC: &[u8; 8] = b"MVQEMETA";
pub const MODEL_VERSION: u32 = 1;
pub const DEFAULT_HIDDEN: usize = 64;
pub const DEFAULT_D_MAX: usize = 40;
pub const DEFAULT_UNROLL: usize = 3;
const INIT_RANGE: f64 = 0.08;

/// How energies are normalized before entering the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnergyScale {
    /// `max(1, |E(0)|)` of the task at hand.
    #[default]
    PerTask,
    Fixed(f64),
}

impl EnergyScale {
    fn resolve<T: Real>(self, e0: T) -> T {
        match self {
            EnergyScale::PerTask => e0.abs().max(T::one()),
            EnergyScale::Fixed(s) => T::lit(s),
        }
    }
}

/// Weights live in one flat vector, in the order `W_x (4H×I)`, `W_h (4H×H)`,
/// `b (4H)`, `W_fc (D×H)`, `b_fc (D)`. Gate blocks are stacked `i, f, g, o`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaLearner<T> {
    hidden_dim: usize,
    d_max: usize,
    energy_scale: EnergyScale,
    params: Vec<T>,
}

struct Layout {
    wx: usize,
    wh: usize,
    b: usize,
    wfc: usize,
    bfc: usize,
    len: usize,
}

fn layout(input: usize, hidden: usize, d: usize) -> Layout {
    let g = 4 * hidden;
    let wx = 0;
    let wh = wx + g * input;
    let b = wh + g * hidden;
    let wfc = b + g;
    let bfc = wfc + d * hidden;
    Layout { wx, wh, b, wfc, bfc, len: bfc + d }
}

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// `out += M·v` for row-major `M` (rows × v.len()).
fn gemv_acc<T: Real>(m: &[T], v: &[T], out: &mut [T]) {
    let cols = v.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o += m[r * cols..(r + 1) * cols].iter().zip(v).map(|(&a, &b)| a * b).sum::<T>();
    }
}

/// `out += Mᵀ·u`.
fn gemv_t_acc<T: Real>(m: &[T], u: &[T], out: &mut [T]) {
    let cols = out.len();
    for (r, &ur) in u.iter().enumerate() {
        if ur == T::zero() {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(&m[r * cols..(r + 1) * cols]) {
            *o += a * ur;
        }
    }
}

/// `G += u·vᵀ`.
fn outer_acc<T: Real>(g: &mut [T], u: &[T], v: &[T]) {
    let cols = v.len();
    for (r, &ur) in u.iter().enumerate() {
        if ur == T::zero() {
            continue;
        }
        for (x, &b) in g[r * cols..(r + 1) * cols].iter_mut().zip(v) {
            *x += ur * b;
        }
    }
}

/// Recurrent state `(h, c)`.
pub type LstmState<T> = (Vec<T>, Vec<T>);

struct StepCache<T> {
    x: Vec<T>,
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    gates: Vec<T>,
    c: Vec<T>,
    h: Vec<T>,
}

impl<T: Real> MetaLearner<T> {
    /// Uniform `[−0.08, 0.08]` weights, zero biases except the forget gate at +1.
    pub fn new(hidden_dim: usize, d_max: usize, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(hidden_dim, d_max)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = m.layout();
        for w in &mut m.params[l.wx..l.b] {
            *w = T::lit(rng.gen_range(-INIT_RANGE..=INIT_RANGE));
        }
        for w in &mut m.params[l.wfc..l.bfc] {
            *w = T::lit(rng.gen_range(-INIT_RANGE..=INIT_RANGE));
        }
        for w in &mut m.params[l.b + hidden_dim..l.b + 2 * hidden_dim] {
            *w = T::one();
        }
        Ok(m)
    }

    pub fn zeros(hidden_dim: usize, d_max: usize) -> Result<Self> {
        if hidden_dim == 0 || d_max == 0 {
            return Err(Error::Argument("hidden_dim and D_max must be positive".into()));
        }
        let len = layout(1 + d_max, hidden_dim, d_max).len;
        Ok(Self { hidden_dim, d_max, energy_scale: EnergyScale::PerTask, params: vec![T::zero(); len] })
    }

    pub fn with_energy_scale(mut self, s: EnergyScale) -> Self {
        self.energy_scale = s;
        self
    }

    pub fn input_dim(&self) -> usize {
        1 + self.d_max
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn energy_scale(&self) -> EnergyScale {
        self.energy_scale
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn layout(&self) -> Layout {
        layout(self.input_dim(), self.hidden_dim, self.d_max)
    }

    pub fn zero_state(&self) -> LstmState<T> {
        (vec![T::zero(); self.hidden_dim], vec![T::zero(); self.hidden_dim])
    }

    fn step_cached(&self, x: &[T], state: &LstmState<T>) -> Result<StepCache<T>> {
        let (h, c) = state;
        if x.len() != self.input_dim() || h.len() != self.hidden_dim || c.len() != self.hidden_dim {
            return Err(Error::Shape(format!(
                "LSTM input {} / state {}+{}, expected {} / {}",
                x.len(),
                h.len(),
                c.len(),
                self.input_dim(),
                self.hidden_dim
            )));
        }
        let hd = self.hidden_dim;
        let l = self.layout();
        let p = &self.params;
        let mut z = p[l.b..l.b + 4 * hd].to_vec();
        gemv_acc(&p[l.wx..l.wh], x, &mut z);
        gemv_acc(&p[l.wh..l.b], h, &mut z);
        let mut gates = z;
        for (k, v) in gates.iter_mut().enumerate() {
            *v = if k / hd == 2 { v.tanh() } else { sigmoid(*v) };
        }
        let (i, f, g, o) = (&gates[..hd], &gates[hd..2 * hd], &gates[2 * hd..3 * hd], &gates[3 * hd..]);
        let c_new: Vec<T> = (0..hd).map(|u| f[u] * c[u] + i[u] * g[u]).collect();
        let h_new: Vec<T> = (0..hd).map(|u| o[u] * c_new[u].tanh()).collect();
        Ok(StepCache { x: x.to_vec(), h_prev: h.clone(), c_prev: c.clone(), gates, c: c_new, h: h_new })
    }

    /// One LSTM step; returns `h'` and the new state.
    pub fn lstm_step(&self, x: &[T], state: &LstmState<T>) -> Result<(Vec<T>, LstmState<T>)> {
        let s = self.step_cached(x, state)?;
        Ok((s.h.clone(), (s.h, s.c)))
    }

    /// `W_fc·h + b_fc`, length `D_max`.
    pub fn project(&self, h: &[T]) -> Vec<T> {
        let l = self.layout();
        let mut y = self.params[l.bfc..l.len].to_vec();
        gemv_acc(&self.params[l.wfc..l.bfc], h, &mut y);
        y
    }

    /// Full `D_max` outputs for a sequence of inputs from the zero state.
    pub fn forward(&self, inputs: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        let mut state = self.zero_state();
        let mut out = Vec::with_capacity(inputs.len());
        for x in inputs {
            let (h, next) = self.lstm_step(x, &state)?;
            out.push(self.project(&h));
            state = next;
        }
        Ok(out)
    }

    /// Backward through one cell. `dh`, `dc` are adjoints of the step's
    /// outputs; returns adjoints of `(x, h_prev, c_prev)`.
    fn step_backward(&self, s: &StepCache<T>, dh: &[T], dc: &[T], grad: &mut [T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let hd = self.hidden_dim;
        let l = self.layout();
        let one = T::one();
        let mut dz = vec![T::zero(); 4 * hd];
        let mut dc_prev = vec![T::zero(); hd];
        for u in 0..hd {
            let (i, f, g, o) = (s.gates[u], s.gates[hd + u], s.gates[2 * hd + u], s.gates[3 * hd + u]);
            let tc = s.c[u].tanh();
            let dct = dc[u] + dh[u] * o * (one - tc * tc);
            dz[u] = dct * g * i * (one - i);
            dz[hd + u] = dct * s.c_prev[u] * f * (one - f);
            dz[2 * hd + u] = dct * i * (one - g * g);
            dz[3 * hd + u] = dh[u] * tc * o * (one - o);
            dc_prev[u] = dct * f;
        }
        outer_acc(&mut grad[l.wx..l.wh], &dz, &s.x);
        outer_acc(&mut grad[l.wh..l.b], &dz, &s.h_prev);
        for (g, &d) in grad[l.b..l.b + 4 * hd].iter_mut().zip(&dz) {
            *g += d;
        }
        let mut dx = vec![T::zero(); s.x.len()];
        gemv_t_acc(&self.params[l.wx..l.wh], &dz, &mut dx);
        let mut dh_prev = vec![T::zero(); hd];
        gemv_t_acc(&self.params[l.wh..l.b], &dz, &mut dh_prev);
        (dx, dh_prev, dc_prev)
    }
}

/// `[energy / scale, delta, 0, …]` of length `1 + D_max`.
pub fn pad_features<T: Real>(delta: &[T], energy: T, scale: T, d_max: usize) -> Result<Vec<T>> {
    if delta.len() > d_max {
        return Err(Error::Capacity { len: delta.len(), d_max });
    }
    let mut x = vec![T::zero(); 1 + d_max];
    x[0] = energy / scale;
    x[1..=delta.len()].copy_from_slice(delta);
    Ok(x)
}

/// A Hamiltonian/ansatz pair the initializer is trained on or applied to.
/// Energy and gradient evaluations are counted.
#[derive(Debug)]
pub struct MetaTask<T> {
    pub hamiltonian: PauliSum<T>,
    pub ansatz: AnsatzProgram<T>,
    pub descriptor: String,
    energy_calls: AtomicUsize,
    gradient_calls: AtomicUsize,
}

impl<T: Real> Clone for MetaTask<T> {
    fn clone(&self) -> Self {
        Self::new(self.hamiltonian.clone(), self.ansatz.clone(), self.descriptor.clone())
            .expect("validated on construction")
    }
}

impl<T: Real> MetaTask<T> {
    pub fn new(hamiltonian: PauliSum<T>, ansatz: AnsatzProgram<T>, descriptor: impl Into<String>) -> Result<Self> {
        if hamiltonian.n_qubits() != ansatz.n_qubits() {
            return Err(Error::Shape(format!(
                "hamiltonian has {} qubits, ansatz {}",
                hamiltonian.n_qubits(),
                ansatz.n_qubits()
            )));
        }
        Ok(Self {
            hamiltonian,
            ansatz,
            descriptor: descriptor.into(),
            energy_calls: AtomicUsize::new(0),
            gradient_calls: AtomicUsize::new(0),
        })
    }

    pub fn n_params(&self) -> usize {
        self.ansatz.n_params()
    }

    pub fn energy(&self, theta: &[T]) -> Result<T> {
        self.energy_calls.fetch_add(1, Ordering::Relaxed);
        self.ansatz.energy(&self.hamiltonian, theta)
    }

    pub fn gradient(&self, theta: &[T]) -> Result<Vec<T>> {
        self.gradient_calls.fetch_add(1, Ordering::Relaxed);
        self.ansatz.parameter_shift_gradient(&self.hamiltonian, theta)
    }

    pub fn energy_evaluations(&self) -> usize {
        self.energy_calls.load(Ordering::Relaxed)
    }

    pub fn gradient_evaluations(&self) -> usize {
        self.gradient_calls.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.energy_calls.store(0, Ordering::Relaxed);
        self.gradient_calls.store(0, Ordering::Relaxed);
    }
}

struct Unroll<T> {
    scale: T,
    /// `θ_0 … θ_K`
    thetas: Vec<Vec<T>>,
    /// `E(θ_0) … E(θ_K)`
    energies: Vec<T>,
    steps: Vec<StepCache<T>>,
}

fn unroll<T: Real>(m: &MetaLearner<T>, task: &MetaTask<T>, k_steps: usize, final_energy: bool) -> Result<Unroll<T>> {
    if k_steps == 0 {
        return Err(Error::Argument("unroll needs at least one step".into()));
    }
    let n = task.n_params();
    if n > m.d_max {
        return Err(Error::Capacity { len: n, d_max: m.d_max });
    }
    let mut thetas = vec![vec![T::zero(); n]];
    let mut energies = Vec::with_capacity(k_steps + 1);
    let mut steps = Vec::with_capacity(k_steps);
    let mut state = m.zero_state();
    let mut prev = vec![T::zero(); n];
    let mut scale = T::one();
    for k in 1..=k_steps {
        let theta = &thetas[k - 1];
        let e = task.energy(theta)?;
        if k == 1 {
            scale = m.energy_scale.resolve(e);
        }
        energies.push(e);
        let delta: Vec<T> = theta.iter().zip(&prev).map(|(&a, &b)| a - b).collect();
        let x = pad_features(&delta, e, scale, m.d_max)?;
        let cache = m.step_cached(&x, &state)?;
        let y = m.project(&cache.h);
        state = (cache.h.clone(), cache.c.clone());
        steps.push(cache);
        prev = theta.clone();
        thetas.push(y[..n].to_vec());
    }
    if final_energy {
        energies.push(task.energy(&thetas[k_steps])?);
    }
    Ok(Unroll { scale, thetas, energies, steps })
}

/// Warm-start parameters after `k_steps` unroll steps. Costs exactly
/// `k_steps` energy evaluations.
pub fn predict_init<T: Real>(m: &MetaLearner<T>, task: &MetaTask<T>, k_steps: usize) -> Result<Vec<T>> {
    let mut u = unroll(m, task, k_steps, false)?;
    Ok(u.thetas.pop().expect("at least one step"))
}

/// Unrolled loss `Σ_{k=1..K} E(θ_k)` and its gradient with respect to the
/// flat weight vector.
pub fn task_loss_and_gradient<T: Real>(m: &MetaLearner<T>, task: &MetaTask<T>, k_steps: usize) -> Result<(T, Vec<T>)> {
    let u = unroll(m, task, k_steps, true)?;
    let n = task.n_params();
    let loss = u.energies[1..].iter().copied().fold(T::zero(), |a, b| a + b);
    let grads_e: Vec<Vec<T>> = (1..=k_steps).map(|k| task.gradient(&u.thetas[k])).collect::<Result<_>>()?;

    let l = m.layout();
    let hd = m.hidden_dim;
    let mut grad = vec![T::zero(); l.len];
    // adjoint of θ_k, k = 1..K (index k−1)
    let mut dtheta: Vec<Vec<T>> = grads_e.clone();
    let mut dh_next = vec![T::zero(); hd];
    let mut dc_next = vec![T::zero(); hd];
    for k in (1..=k_steps).rev() {
        let cache = &u.steps[k - 1];
        let dy = &dtheta[k - 1];
        // only the first n outputs reach θ_k
        outer_acc(&mut grad[l.wfc..l.wfc + n * hd], dy, &cache.h);
        for (g, &d) in grad[l.bfc..l.bfc + n].iter_mut().zip(dy) {
            *g += d;
        }
        let mut dh = dh_next.clone();
        gemv_t_acc(&m.params[l.wfc..l.wfc + n * hd], dy, &mut dh);
        let (dx, dhp, dcp) = m.step_backward(cache, &dh, &dc_next, &mut grad);
        dh_next = dhp;
        dc_next = dcp;
        // x_k = [E(θ_{k−1})/s, θ_{k−1} − θ_{k−2}]; θ_0 is constant
        if k >= 2 {
            let ddelta = &dx[1..=n];
            let de = dx[0] / u.scale;
            for j in 0..n {
                dtheta[k - 2][j] += de * grads_e[k - 2][j] + ddelta[j];
            }
            if k >= 3 {
                for j in 0..n {
                    dtheta[k - 3][j] -= ddelta[j];
                }
            }
        }
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub unroll_steps: usize,
    pub epochs: usize,
    pub meta_learning_rate: f64,
    /// Tasks per weight update.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { unroll_steps: DEFAULT_UNROLL, epochs: 200, meta_learning_rate: 1e-3, batch_size: 4, seed: 0 }
    }
}

/// Adam on the unrolled loss. Returns the trained model and the per-epoch
/// mean task loss.
pub fn train_meta<T: Real>(
    m: &MetaLearner<T>,
    tasks: &[MetaTask<T>],
    cfg: &TrainConfig,
) -> Result<(MetaLearner<T>, Vec<f64>)> {
    if tasks.is_empty() {
        return Err(Error::Argument("meta-training needs at least one task".into()));
    }
    if cfg.unroll_steps == 0 || cfg.batch_size == 0 {
        return Err(Error::Argument("unroll_steps and batch_size must be positive".into()));
    }
    if !(cfg.meta_learning_rate >= 0.0) {
        return Err(Error::Argument("meta learning rate must be non-negative".into()));
    }
    if let Some(t) = tasks.iter().find(|t| t.n_params() > m.d_max) {
        return Err(Error::Capacity { len: t.n_params(), d_max: m.d_max });
    }
    let mut model = m.clone();
    let mut adam = AdamState::new(model.params.len());
    let opt = OptimizerConfig { learning_rate: cfg.meta_learning_rate, ..OptimizerConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(T, Vec<T>)> = batch
                .par_iter()
                .map(|&t| task_loss_and_gradient(&model, &tasks[t], cfg.unroll_steps))
                .collect::<Result<_>>()
                .map_err(|e| Error::Training { epoch, message: e.to_string() })?;
            let inv = T::one() / T::from_count(batch.len());
            let mut grad = vec![T::zero(); model.params.len()];
            for (loss, g) in &results {
                if !loss.is_finite() || g.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Training { epoch, message: "non-finite meta-loss".into() });
                }
                epoch_loss += loss.as_f64();
                for (a, &b) in grad.iter_mut().zip(g) {
                    *a += b * inv;
                }
            }
            adam_update(&mut adam, &mut model.params, &grad, &opt)?;
        }
        curve.push(epoch_loss / tasks.len() as f64);
    }
    Ok((model, curve))
}

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

/// Binary layout (little endian): magic `MVQEMETA`, `u32` version,
/// `u32` input_dim, `u32` hidden_dim, `u32` D_max, `u8` scale policy
/// (0 per-task, 1 fixed) and its `f64` value, `u64` weight count, then the
/// weights as `f64` in flat-vector order.
pub fn write_meta<T: Real>(m: &MetaLearner<T>, mut w: impl Write) -> Result<()> {
    w.write_all(MODEL_MAGIC)?;
    put_u32(&mut w, MODEL_VERSION)?;
    put_u32(&mut w, m.input_dim() as u32)?;
    put_u32(&mut w, m.hidden_dim as u32)?;
    put_u32(&mut w, m.d_max as u32)?;
    let (tag, value) = match m.energy_scale {
        EnergyScale::PerTask => (0u8, 0.0),
        EnergyScale::Fixed(s) => (1u8, s),
    };
    w.write_all(&[tag])?;
    w.write_all(&value.to_le_bytes())?;
    w.write_all(&(m.params.len() as u64).to_le_bytes())?;
    for p in &m.params {
        w.write_all(&p.as_f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_meta<T: Real>(mut r: impl Read) -> Result<MetaLearner<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes
            .get(pos..pos + n)
            .ok_or_else(|| Error::Deserialize(format!("file truncated at byte {pos}")))?;
        pos += n;
        Ok(s)
    };
    if take(8)? != MODEL_MAGIC {
        return Err(Error::Deserialize("not a meta-model file".into()));
    }
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes"));
    let version = u32_at(take(4)?);
    if version != MODEL_VERSION {
        return Err(Error::Version { found: version, expected: MODEL_VERSION });
    }
    let input = u32_at(take(4)?) as usize;
    let hidden = u32_at(take(4)?) as usize;
    let d_max = u32_at(take(4)?) as usize;
    if input != d_max + 1 {
        return Err(Error::Deserialize(format!("input_dim {input} inconsistent with D_max {d_max}")));
    }
    let tag = take(1)?[0];
    let value = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
    let scale = match tag {
        0 => EnergyScale::PerTask,
        1 if value > 0.0 => EnergyScale::Fixed(value),
        _ => return Err(Error::Deserialize(format!("bad energy-scale record ({tag}, {value})"))),
    };
    let count = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    let mut m = MetaLearner::<T>::zeros(hidden, d_max).map_err(|e| Error::Deserialize(e.to_string()))?;
    if count != m.params.len() {
        return Err(Error::Deserialize(format!("{count} weights, shapes need {}", m.params.len())));
    }
    for p in m.params.iter_mut() {
        *p = T::lit(f64::from_le_bytes(take(8)?.try_into().expect("8 bytes")));
    }
    if pos != bytes.len() {
        return Err(Error::Deserialize(format!("{} trailing bytes", bytes.len() - pos)));
    }
    Ok(m.with_energy_scale(scale))
}

pub fn save_meta<T: Real>(m: &MetaLearner<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_meta(m, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_meta<T: Real>(path: impl AsRef<Path>) -> Result<MetaLearner<T>> {
    read_meta(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::build_hea;
    use crate::hamiltonians::{build_sho, ShoSpec};

    fn sho_task(omega: f64, n: usize, layers: usize) -> MetaTask<f64> {
        let h = build_sho(&ShoSpec::new(omega, n).unwrap()).unwrap();
        MetaTask::new(h, build_hea(n, layers).unwrap(), format!("sho ω={omega}")).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_state() {
        let m = MetaLearner::<f64>::zeros(5, 3).unwrap();
        let x = vec![0.3, -1.0, 2.0, 0.5];
        let (h, (h2, c)) = m.lstm_step(&x, &m.zero_state()).unwrap();
        assert!(h.iter().chain(&c).all(|&v| v == 0.0));
        assert_eq!(h, h2);
        assert!(m.lstm_step(&x[..3], &m.zero_state()).is_err());
    }

    #[test]
    fn first_step_output_is_bounded() {
        let m = MetaLearner::<f64>::new(16, 8, 3).unwrap();
        let mut g = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let x: Vec<f64> = (0..9).map(|_| g.gen_range(-50.0..50.0)).collect();
            let (h, _) = m.lstm_step(&x, &m.zero_state()).unwrap();
            assert!(h.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn single_unit_matches_hand_computation() {
        // H = 1, D = 1, so I = 2
        let mut m = MetaLearner::<f64>::zeros(1, 1).unwrap();
        // W_x rows i,f,g,o (2 cols each), W_h (1 col each), b
        let wx = [0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, 0.8];
        let wh = [0.05, -0.15, 0.25, 0.35];
        let b = [0.01, 1.0, -0.02, 0.03];
        m.params[..8].copy_from_slice(&wx);
        m.params[8..12].copy_from_slice(&wh);
        m.params[12..16].copy_from_slice(&b);
        let x = [0.7, -1.3];
        let (h0, c0) = (0.2, -0.4);
        let (h, (_, c)) = m.lstm_step(&x, &(vec![h0], vec![c0])).unwrap();
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let pre = |r: usize| wx[2 * r] * x[0] + wx[2 * r + 1] * x[1] + wh[r] * h0 + b[r];
        let (i, f, gg, o) = (s(pre(0)), s(pre(1)), pre(2).tanh(), s(pre(3)));
        let c_want = f * c0 + i * gg;
        let h_want = o * c_want.tanh();
        assert!((c[0] - c_want).abs() <= 1e-12);
        assert!((h[0] - h_want).abs() <= 1e-12);
    }

    #[test]
    fn padding() {
        let delta = vec![1.0; 12];
        let x = pad_features(&delta, 2.0, 4.0, 40).unwrap();
        assert_eq!(x.len(), 41);
        assert_eq!(x[0], 0.5);
        assert!(x[13..].iter().all(|&v| v == 0.0));
        assert!(x[1..13].iter().all(|&v| v == 1.0));
        let full = pad_features(&[0.5; 40], 0.0, 1.0, 40).unwrap();
        assert!(full[1..].iter().all(|&v| v == 0.5));
        assert!(pad_features(&[0.0f64; 40], 0.0, 1.0, 40).unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(pad_features(&[0.0f64; 41], 0.0, 1.0, 40), Err(Error::Capacity { len: 41, d_max: 40 })));
    }

    #[test]
    fn zero_model_predicts_fc_bias() {
        let mut m = MetaLearner::<f64>::zeros(4, 8).unwrap();
        let task = sho_task(0.5, 2, 1);
        assert_eq!(predict_init(&m, &task, 1).unwrap(), vec![0.0; 4]);
        let l = m.layout();
        for (j, b) in m.params[l.bfc..].iter_mut().enumerate() {
            *b = j as f64;
        }
        assert_eq!(predict_init(&m, &task, 1).unwrap(), vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn one_model_serves_several_sizes() {
        let m = MetaLearner::<f64>::new(8, 40, 1).unwrap();
        let small = sho_task(0.5, 1, 1); // 2 params
        let mid = sho_task(0.5, 2, 3); // 12 params
        let big = sho_task(0.5, 4, 5); // 40 params
        assert_eq!(predict_init(&m, &small, 3).unwrap().len(), 2);
        let p12 = predict_init(&m, &mid, 1).unwrap();
        let p40 = predict_init(&m, &big, 1).unwrap();
        assert_eq!(p12.len(), 12);
        assert_eq!(p40.len(), 40);
        // same Hamiltonian, so the first input [E(0)/s, 0…] is identical
        let p8 = predict_init(&m, &sho_task(0.5, 4, 1), 1).unwrap();
        assert_eq!(&p40[..8], &p8[..]);
        let x = pad_features(&[], 0.25, 1.0, 40).unwrap();
        let full = m.forward(&[x]).unwrap().pop().unwrap();
        assert_eq!(&full[..40], &p40[..]);
        let too_big = sho_task(0.5, 4, 6);
        assert!(matches!(predict_init(&m, &too_big, 1), Err(Error::Capacity { .. })));
    }

    #[test]
    fn one_energy_evaluation_per_unroll_step() {
        let m = MetaLearner::<f64>::new(8, 16, 2).unwrap();
        let task = sho_task(0.5, 2, 2);
        let mut outs = Vec::new();
        for k in [1, 2, 3, 5, 8] {
            task.reset_counters();
            outs.push(predict_init(&m, &task, k).unwrap());
            assert_eq!(task.energy_evaluations(), k);
            assert_eq!(task.gradient_evaluations(), 0);
        }
        assert_ne!(outs[0], outs[1]);
        // deterministic
        assert_eq!(predict_init(&m, &task, 3).unwrap(), outs[2]);
    }

    fn tiny_setup() -> (MetaLearner<f64>, MetaTask<f64>) {
        let mut m = MetaLearner::<f64>::new(4, 4, 11).unwrap();
        // larger weights so the gradient is not dominated by rounding
        for p in m.params.iter_mut() {
            *p *= 5.0;
        }
        (m, sho_task(0.5, 2, 1))
    }

    #[test]
    fn meta_gradient_matches_finite_differences() {
        let (m, task) = tiny_setup();
        let k = 2;
        let (_, grad) = task_loss_and_gradient(&m, &task, k).unwrap();
        let mut g = ChaCha8Rng::seed_from_u64(99);
        let mut idx: Vec<usize> = (0..m.params.len()).collect();
        idx.shuffle(&mut g);
        let step = 1e-4;
        for &i in idx.iter().take(24) {
            let mut plus = m.clone();
            plus.params[i] += step;
            let mut minus = m.clone();
            minus.params[i] -= step;
            let lp = task_loss_and_gradient(&plus, &task, k).unwrap().0;
            let lm = task_loss_and_gradient(&minus, &task, k).unwrap().0;
            let fd = (lp - lm) / (2.0 * step);
            let ok = (fd - grad[i]).abs() <= 1e-6 || (fd - grad[i]).abs() <= 0.02 * fd.abs();
            assert!(ok, "weight {i}: analytic {} vs fd {fd}", grad[i]);
        }
    }

    #[test]
    fn zero_learning_rate_leaves_weights_unchanged() {
        let m = MetaLearner::<f64>::new(4, 4, 1).unwrap();
        let tasks = vec![sho_task(0.5, 2, 1)];
        let cfg = TrainConfig { epochs: 1, meta_learning_rate: 0.0, ..Default::default() };
        let (trained, curve) = train_meta(&m, &tasks, &cfg).unwrap();
        assert_eq!(trained.params, m.params);
        assert_eq!(curve.len(), 1);
    }

    #[test]
    fn training_lowers_the_loss_and_is_reproducible() {
        let m = MetaLearner::<f64>::new(8, 4, 5).unwrap();
        let tasks: Vec<_> = [0.4, 0.6].iter().map(|&w| sho_task(w, 2, 1)).collect();
        let cfg = TrainConfig { epochs: 40, meta_learning_rate: 1e-2, batch_size: 2, seed: 3, unroll_steps: 2 };
        let (a, curve) = train_meta(&m, &tasks, &cfg).unwrap();
        assert_eq!(curve.len(), 40);
        assert!(curve.last().unwrap() < &curve[0]);
        let (b, _) = train_meta(&m, &tasks, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert!(train_meta(&m, &[], &cfg).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let m = MetaLearner::<f64>::new(6, 12, 4).unwrap().with_energy_scale(EnergyScale::Fixed(2.5));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_meta(&m, &path).unwrap();
        let back: MetaLearner<f64> = load_meta(&path).unwrap();
        assert_eq!(back, m);
        let task = sho_task(0.5, 2, 2);
        assert_eq!(predict_init(&back, &task, 3).unwrap(), predict_init(&m, &task, 3).unwrap());

        let bytes = std::fs::read(&path).unwrap();
        let cut = &bytes[..bytes.len() - 5];
        assert!(matches!(read_meta::<f64>(cut), Err(Error::Deserialize(_))));
        assert!(matches!(read_meta::<f64>(&bytes[..3]), Err(Error::Deserialize(_))));
        let mut wrong = bytes.clone();
        wrong[8] = 7;
        assert!(matches!(read_meta::<f64>(&wrong[..]), Err(Error::Version { found: 7, expected: 1 })));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_meta::<f64>(&extra[..]).is_err());
    }
}
