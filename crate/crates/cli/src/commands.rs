//! Subcommand bodies. Each returns the JSON summary it also writes to
//! `<out>/summary.json`.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use metavqe::ansatz::{build_hea, build_uccsd, AnsatzProgram};
use metavqe::dense::Matrix;
use metavqe::exactdiag::{eigen_hermitian, lowest_energies};
use metavqe::hamiltonians::{build_sho, jordan_wigner, load_fcidump, load_pauli_sum, ShoSpec};
use metavqe::meta::{load_meta, predict_init, train_meta, write_meta, MetaLearner, MetaTask, TrainConfig};
use metavqe::optimize::{run_vqd, run_vqe, seeded_random_init, InitKind, RunRecord, VqdConfig};
use metavqe::pauli::{pauli_sum_matrix, PauliSum};
use metavqe::statevector::Executor;
use metavqe::pauli::DENSE_CAP;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{AnsatzChoice, Command, InitChoice, Reference, Settings, System};
use crate::error::CliError;
use crate::output::{cell, median, write_atomic, write_json};

/// Largest register for which the dense exact reference is computed.
pub const EXACT_CAP: usize = DENSE_CAP;

/// The ground stage of VQD must land this close to the exact ground energy
/// (when it is known) before the excited stage starts.
pub const GROUND_ACCEPT: f64 = 1e-4;

/// Hamiltonian, ansatz and reference energies of one experiment.
#[derive(Debug, Clone)]
pub struct Problem {
    pub hamiltonian: PauliSum<f64>,
    pub ansatz: AnsatzProgram<f64>,
    pub label: String,
    pub electrons: Option<usize>,
    /// Ground energy over the whole register.
    pub exact_ground: Option<f64>,
    /// First excited level over the whole register.
    pub exact_excited: Option<f64>,
    /// Ground energy in the fixed-electron-number sector.
    pub sector_ground: Option<f64>,
}

impl Problem {
    /// Energy that errors are measured against.
    pub fn reference(&self) -> Option<f64> {
        self.sector_ground.or(self.exact_ground)
    }

    fn task(&self) -> Result<MetaTask<f64>, CliError> {
        Ok(MetaTask::new(self.hamiltonian.clone(), self.ansatz.clone(), self.label.clone())?)
    }
}

fn sho_problem(s: &Settings, omega: f64) -> Result<Problem, CliError> {
    let spec = ShoSpec::new(omega, s.qubits)?;
    let h = build_sho(&spec)?;
    let exact = s.reference == Reference::Exact;
    Ok(Problem {
        ansatz: build_ansatz(s, s.qubits, s.electrons)?,
        hamiltonian: h,
        label: format!("sho omega={omega} n={}", s.qubits),
        electrons: s.electrons,
        exact_ground: exact.then(|| spec.level_energy(0)),
        exact_excited: exact.then(|| spec.level_energy(1)),
        sector_ground: None,
    })
}

fn build_ansatz(s: &Settings, n: usize, electrons: Option<usize>) -> Result<AnsatzProgram<f64>, CliError> {
    match s.ansatz {
        AnsatzChoice::Hea => Ok(build_hea(n, s.layers)?),
        AnsatzChoice::Uccsd => {
            let e = electrons.ok_or_else(|| CliError::usage("UCCSD needs --electrons (or NELEC in the FCIDUMP header)"))?;
            Ok(build_uccsd(n, e)?.0)
        }
    }
}

/// Lowest eigenvalue restricted to basis states with `electrons` set bits.
pub fn sector_ground(h: &PauliSum<f64>, electrons: usize) -> Result<f64, CliError> {
    let m = pauli_sum_matrix(h)?;
    let idx: Vec<usize> = (0..m.dim()).filter(|&b| b.count_ones() as usize == electrons).collect();
    if idx.is_empty() {
        return Err(CliError::usage(format!("no basis state holds {electrons} electrons")));
    }
    let mut data = Vec::with_capacity(idx.len() * idx.len());
    for &r in &idx {
        let row = m.row(r);
        data.extend(idx.iter().map(|&c| row[c]));
    }
    Ok(eigen_hermitian(&Matrix::from_rows(data), false)?.eigenvalues[0])
}

/// Builds the problem for `s.system` at the configured frequency.
pub fn load_problem(s: &Settings) -> Result<Problem, CliError> {
    let (h, electrons, label) = match s.system {
        System::Sho => return sho_problem(s, s.omega),
        System::Pauli => {
            let path = s.hamiltonian.as_ref().expect("checked during validation");
            (load_pauli_sum::<f64>(path).map_err(|e| located(e, path))?, s.electrons, path.display().to_string())
        }
        System::Fcidump => {
            let path = s.hamiltonian.as_ref().expect("checked during validation");
            let f = load_fcidump::<f64>(path, s.ordering.into()).map_err(|e| located(e, path))?;
            (jordan_wigner(&f)?, s.electrons.or(f.n_electrons()), path.display().to_string())
        }
    };
    let n = h.n_qubits();
    let exact = s.reference == Reference::Exact && n <= EXACT_CAP;
    let (exact_ground, exact_excited) = if exact {
        let ev = lowest_energies(&h, 2)?;
        (ev.first().copied(), ev.get(1).copied())
    } else {
        (None, None)
    };
    let sector = match electrons {
        Some(e) if exact && e <= n => Some(sector_ground(&h, e)?),
        _ => None,
    };
    Ok(Problem {
        ansatz: build_ansatz(s, n, electrons)?,
        hamiltonian: h,
        label,
        electrons,
        exact_ground,
        exact_excited,
        sector_ground: sector,
    })
}

/// Prefixes a library error with the file it came from.
fn located(e: metavqe::Error, path: &Path) -> CliError {
    let mut c = CliError::from(e);
    c.message = format!("{}: {}", path.display(), c.message);
    c
}

fn load_model(s: &Settings) -> Result<Option<MetaLearner<f64>>, CliError> {
    match &s.model {
        Some(p) => Ok(Some(load_meta(p).map_err(|e| located(e, p))?)),
        None => Ok(None),
    }
}

/// Starting parameters and the number of energy evaluations spent on them.
fn initial_theta(
    init: InitChoice,
    seed: u64,
    problem: &Problem,
    model: Option<&MetaLearner<f64>>,
    unroll_steps: usize,
) -> Result<(Vec<f64>, usize), CliError> {
    let n = problem.ansatz.n_params();
    match init {
        InitChoice::Zero => Ok((vec![0.0; n], 0)),
        InitChoice::Random => Ok((seeded_random_init(n, seed), 0)),
        InitChoice::Meta => {
            let m = model.ok_or_else(|| CliError::usage("meta initialization needs --model FILE"))?;
            let task = problem.task()?;
            let theta = predict_init(m, &task, unroll_steps)?;
            Ok((theta, task.energy_evaluations()))
        }
    }
}

/// Runs `f` over `items` on a pool of `s.threads` workers, at most `s.jobs`
/// items at a time. Output order follows `items`.
fn run_batched<I, R, F>(s: &Settings, items: &[I], f: F) -> Result<Vec<R>, CliError>
where
    I: Sync,
    R: Send,
    F: Fn(&I) -> Result<R, CliError> + Sync,
{
    let exec = Executor::new(s.threads)?;
    exec.install(|| {
        let mut out = Vec::with_capacity(items.len());
        for chunk in items.chunks(s.jobs) {
            let part: Vec<Result<R, CliError>> = if s.jobs == 1 {
                chunk.iter().map(&f).collect()
            } else {
                chunk.par_iter().map(&f).collect()
            };
            for r in part {
                out.push(r?);
            }
        }
        Ok(out)
    })
}

fn csv_bytes(rec: &RunRecord) -> Vec<u8> {
    let mut buf = Vec::new();
    rec.write_csv(&mut buf).expect("writing to memory");
    buf
}

fn abs_err(e: f64, reference: Option<f64>) -> Option<f64> {
    reference.map(|r| (e - r).abs())
}

fn run_json(seed: Option<u64>, rec: &RunRecord, reference: Option<f64>, init_evals: usize) -> Value {
    json!({
        "seed": seed,
        "init": rec.init_kind.to_string(),
        "initial_energy": rec.energies.first(),
        "final_energy": rec.final_energy,
        "abs_error": abs_err(rec.final_energy, reference),
        "iterations": rec.iterations,
        "converged": rec.converged,
        "wall_time": rec.wall_time,
        "init_energy_evaluations": init_evals,
        "final_overlap_sq": rec.final_overlap(),
        "beta": rec.beta,
    })
}

fn finish(s: &Settings, cmd: Command, mut summary: Value) -> Result<Value, CliError> {
    summary["command"] = json!(cmd.to_string());
    summary["config"] = serde_json::to_value(s).map_err(|e| CliError::io(e.to_string()))?;
    write_json(&s.out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// `init  median_abs_error  median_iterations  median_wall_s` per init kind.
fn init_table(groups: &[(String, Vec<&RunRecord>)], reference: Option<f64>) -> (Value, String) {
    let mut rows = Vec::new();
    let mut text = format!("{:<8} {:>16} {:>12} {:>12}\n", "init", "median_abs_err", "median_iter", "median_wall_s");
    for (name, recs) in groups {
        let errs: Vec<f64> = recs.iter().filter_map(|r| abs_err(r.final_energy, reference)).collect();
        let iters: Vec<f64> = recs.iter().map(|r| r.iterations as f64).collect();
        let walls: Vec<f64> = recs.iter().map(|r| r.wall_time).collect();
        let (me, mi, mw) = (median(&errs), median(&iters), median(&walls));
        let _ = writeln!(text, "{name:<8} {me:>16.3e} {mi:>12.1} {mw:>12.3}");
        rows.push(json!({
            "init": name,
            "runs": recs.len(),
            "median_abs_error": (!errs.is_empty()).then_some(me),
            "median_iterations": mi,
            "median_wall_time": mw,
        }));
    }
    (Value::Array(rows), text)
}

pub fn cmd_vqe(s: &Settings) -> Result<Value, CliError> {
    let problem = load_problem(s)?;
    let model = load_model(s)?;
    let opt = s.optimizer();
    let runs = run_batched(s, &s.seeds, |&seed| {
        let (theta0, evals) = initial_theta(s.init, seed, &problem, model.as_ref(), s.unroll_steps)?;
        let rec = run_vqe(&problem.hamiltonian, &problem.ansatz, &theta0, &opt, s.init.into())?;
        write_atomic(&s.out.join(format!("trace_{seed}.csv")), &csv_bytes(&rec))?;
        Ok((seed, rec, evals))
    })?;
    let reference = problem.reference();
    let (table, text) = init_table(&[(s.init.to_string(), runs.iter().map(|r| &r.1).collect())], reference);
    print!("{text}");
    finish(
        s,
        Command::Vqe,
        json!({
            "problem": problem.label,
            "n_params": problem.ansatz.n_params(),
            "exact_energy": reference,
            "runs": runs.iter().map(|(seed, r, ev)| run_json(Some(*seed), r, reference, *ev)).collect::<Vec<_>>(),
            "table": table,
        }),
    )
}

pub fn cmd_lr_scan(s: &Settings) -> Result<Value, CliError> {
    let problem = load_problem(s)?;
    let model = load_model(s)?;
    let reference = problem.reference();
    let points: Vec<(usize, u64)> =
        (0..s.lr_grid.len()).flat_map(|i| s.seeds.iter().map(move |&seed| (i, seed))).collect();
    let runs = run_batched(s, &points, |&(i, seed)| {
        let (theta0, _) = initial_theta(s.init, seed, &problem, model.as_ref(), s.unroll_steps)?;
        let mut opt = s.optimizer();
        opt.learning_rate = s.lr_grid[i];
        let rec = run_vqe(&problem.hamiltonian, &problem.ansatz, &theta0, &opt, s.init.into())?;
        Ok((i, seed, rec))
    })?;

    let grid_text: Vec<String> = s.lr_grid.iter().map(|lr| format!("{lr:e}")).collect();
    let mut rows = Vec::new();
    for (i, &lr) in s.lr_grid.iter().enumerate() {
        let recs: Vec<&RunRecord> = runs.iter().filter(|r| r.0 == i).map(|r| &r.2).collect();
        let energies: Vec<f64> = recs.iter().map(|r| r.final_energy).collect();
        let errs: Vec<f64> = recs.iter().filter_map(|r| abs_err(r.final_energy, reference)).collect();
        rows.push(json!({
            "lr": lr,
            "median_final_energy": median(&energies),
            "median_abs_error": (!errs.is_empty()).then(|| median(&errs)),
            "median_iterations": median(&recs.iter().map(|r| r.iterations as f64).collect::<Vec<_>>()),
            "median_wall_time": median(&recs.iter().map(|r| r.wall_time).collect::<Vec<_>>()),
        }));
    }
    // by median abs error, or by median energy without a reference; first wins ties
    let key = |r: &Value| r["median_abs_error"].as_f64().unwrap_or_else(|| r["median_final_energy"].as_f64().unwrap());
    let best = (0..rows.len()).fold(0, |b, i| if key(&rows[i]) < key(&rows[b]) { i } else { b });

    let mut csv = format!("# lr_grid: {}\n", grid_text.join(","));
    csv.push_str("lr,median_final_energy,median_abs_error,median_iterations,median_wall_time,best\n");
    let mut text = format!("{:>8} {:>16} {:>12} {:>10}\n", "lr", "median_abs_err", "median_iter", "median_s");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            grid_text[i],
            cell(r["median_final_energy"].as_f64()),
            cell(r["median_abs_error"].as_f64()),
            r["median_iterations"],
            cell(r["median_wall_time"].as_f64()),
            u8::from(i == best)
        );
        let _ = writeln!(
            text,
            "{:>8} {:>16.3e} {:>12.1} {:>10.3}{}",
            grid_text[i],
            key(r),
            r["median_iterations"].as_f64().unwrap_or(f64::NAN),
            r["median_wall_time"].as_f64().unwrap_or(f64::NAN),
            if i == best { "  <- best" } else { "" }
        );
    }
    write_atomic(&s.out.join("scan.csv"), csv.as_bytes())?;

    let mut per_run = String::from("lr,seed,final_energy,abs_error,iterations,converged\n");
    for (i, seed, r) in &runs {
        let _ = writeln!(
            per_run,
            "{},{seed},{:.17e},{},{},{}",
            grid_text[*i],
            r.final_energy,
            cell(abs_err(r.final_energy, reference)),
            r.iterations,
            r.converged
        );
    }
    write_atomic(&s.out.join("scan_runs.csv"), per_run.as_bytes())?;
    print!("{text}");
    finish(
        s,
        Command::LrScan,
        json!({
            "problem": problem.label,
            "exact_energy": reference,
            "lr_grid": grid_text,
            "rows": rows,
            "best_lr": s.lr_grid[best],
        }),
    )
}

pub fn cmd_vqd(s: &Settings) -> Result<Value, CliError> {
    if s.beta == 0.0 {
        eprintln!("warning: beta = 0 disables the overlap penalty; VQD reduces to ground-state VQE");
    }
    let problem = load_problem(s)?;
    let model = load_model(s)?;
    let opt = s.optimizer();
    let runs = run_batched(s, &s.seeds, |&seed| {
        let (g0, _) = initial_theta(s.ground_init, seed, &problem, model.as_ref(), s.unroll_steps)?;
        let ground = run_vqe(&problem.hamiltonian, &problem.ansatz, &g0, &opt, s.ground_init.into())?;
        write_atomic(&s.out.join(format!("ground_{seed}.csv")), &csv_bytes(&ground))?;
        if !ground.converged {
            return Err(CliError::numerical(format!(
                "seed {seed}: ground-state stage did not converge within {} iterations; VQD refuses to start",
                ground.iterations
            )));
        }
        if let Some(e0) = problem.exact_ground {
            if (ground.final_energy - e0).abs() > GROUND_ACCEPT {
                return Err(CliError::numerical(format!(
                    "seed {seed}: ground-state stage stopped at {:.10} but the exact ground energy is {e0:.10}; \
                     VQD refuses to start",
                    ground.final_energy
                )));
            }
        }
        let psi0 = problem.ansatz.run(&ground.final_theta)?;
        let vqd = VqdConfig { beta: s.beta, reference_states: vec![psi0] };
        let (t0, evals) = initial_theta(s.init, seed, &problem, model.as_ref(), s.unroll_steps)?;
        let rec = run_vqd(&problem.hamiltonian, &problem.ansatz, &t0, &opt, &vqd, s.init.into())?;
        write_atomic(&s.out.join(format!("trace_{seed}.csv")), &csv_bytes(&rec))?;
        Ok((seed, ground, rec, evals))
    })?;
    let target = if s.beta == 0.0 { problem.exact_ground } else { problem.exact_excited };
    let mut text = format!("{:>6} {:>14} {:>14} {:>12} {:>8}\n", "seed", "ground", "excited", "overlap_sq", "iter");
    let entries: Vec<Value> = runs
        .iter()
        .map(|(seed, g, r, ev)| {
            let _ = writeln!(
                text,
                "{seed:>6} {:>14.10} {:>14.10} {:>12.3e} {:>8}",
                g.final_energy,
                r.final_energy,
                r.final_overlap().unwrap_or(f64::NAN),
                r.iterations
            );
            let mut v = run_json(Some(*seed), r, target, *ev);
            v["ground"] = run_json(Some(*seed), g, problem.exact_ground, 0);
            v
        })
        .collect();
    print!("{text}");
    finish(
        s,
        Command::Vqd,
        json!({
            "problem": problem.label,
            "beta": s.beta,
            "exact_ground": problem.exact_ground,
            "exact_excited": problem.exact_excited,
            "runs": entries,
        }),
    )
}

fn sho_task(s: &Settings, omega: f64) -> Result<MetaTask<f64>, CliError> {
    sho_problem(s, omega)?.task()
}

pub fn cmd_meta_train(s: &Settings) -> Result<Value, CliError> {
    let tasks = s.train_omegas.iter().map(|&w| sho_task(s, w)).collect::<Result<Vec<_>, _>>()?;
    let init = MetaLearner::<f64>::new(s.hidden, s.d_max, s.meta_seed)?;
    let cfg = TrainConfig {
        unroll_steps: s.unroll_steps,
        epochs: s.epochs,
        meta_learning_rate: s.meta_lr,
        batch_size: s.batch_size,
        seed: s.meta_seed,
    };
    let start = Instant::now();
    let exec = Executor::new(s.threads)?;
    let (model, curve) = exec.install(|| train_meta(&init, &tasks, &cfg))?;
    let seconds = start.elapsed().as_secs_f64();

    let mut bytes = Vec::new();
    write_meta(&model, &mut bytes)?;
    write_atomic(&s.out.join("model.bin"), &bytes)?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in curve.iter().enumerate() {
        let _ = writeln!(csv, "{i},{l:.17e}");
    }
    write_atomic(&s.out.join("loss.csv"), csv.as_bytes())?;
    println!("trained on {} tasks for {} epochs in {seconds:.2}s; final loss {}", tasks.len(), s.epochs, cell(curve.last().copied()));
    finish(
        s,
        Command::MetaTrain,
        json!({
            "model": s.out.join("model.bin"),
            "tasks": tasks.iter().map(|t| t.descriptor.clone()).collect::<Vec<_>>(),
            "weights": model.params().len(),
            "final_loss": curve.last(),
            "train_seconds": seconds,
        }),
    )
}

struct EvalRun {
    omega: f64,
    seed: Option<u64>,
    rec: RunRecord,
    error: Option<f64>,
    evals: usize,
}

pub fn cmd_meta_eval(s: &Settings) -> Result<Value, CliError> {
    let model = load_model(s)?.expect("checked during validation");
    let problems = s.eval_omegas.iter().map(|&w| sho_problem(s, w)).collect::<Result<Vec<_>, _>>()?;
    let opt = s.optimizer();

    // (problem index, seed); `None` is the deterministic meta start
    let mut jobs: Vec<(usize, Option<u64>)> = Vec::new();
    for p in 0..problems.len() {
        jobs.push((p, None));
        jobs.extend(s.seeds.iter().map(|&seed| (p, Some(seed))));
    }
    let runs = run_batched(s, &jobs, |&(p, seed)| {
        let problem = &problems[p];
        let init = if seed.is_some() { InitChoice::Random } else { InitChoice::Meta };
        let (theta0, evals) = initial_theta(init, seed.unwrap_or(0), problem, Some(&model), s.unroll_steps)?;
        let rec = run_vqe(&problem.hamiltonian, &problem.ansatz, &theta0, &opt, init.into())?;
        let omega = s.eval_omegas[p];
        let name = match seed {
            Some(seed) => format!("trace_random_w{omega}_{seed}.csv"),
            None => format!("trace_meta_w{omega}.csv"),
        };
        write_atomic(&s.out.join(name), &csv_bytes(&rec))?;
        let error = abs_err(rec.final_energy, problem.reference());
        Ok(EvalRun { omega, seed, rec, error, evals })
    })?;

    let mut csv = String::from("omega,init,seed,initial_energy,final_energy,abs_error,iterations,converged,energy_evaluations\n");
    for r in &runs {
        let _ = writeln!(
            csv,
            "{},{},{},{},{:.17e},{},{},{},{}",
            r.omega,
            r.rec.init_kind,
            r.seed.map(|x| x.to_string()).unwrap_or_default(),
            cell(r.rec.energies.first().copied()),
            r.rec.final_energy,
            cell(r.error),
            r.rec.iterations,
            r.rec.converged,
            r.evals
        );
    }
    write_atomic(&s.out.join("eval.csv"), csv.as_bytes())?;

    let stats = |kind: InitKind| {
        let sel: Vec<&EvalRun> = runs.iter().filter(|r| r.rec.init_kind == kind).collect();
        let iters = median(&sel.iter().map(|r| r.rec.iterations as f64).collect::<Vec<_>>());
        let errs: Vec<f64> = sel.iter().filter_map(|r| r.error).collect();
        (iters, (!errs.is_empty()).then(|| median(&errs)), sel.len())
    };
    let (meta_it, meta_err, meta_n) = stats(InitKind::Meta);
    let (rand_it, rand_err, rand_n) = stats(InitKind::Random);
    let ratio = meta_it / rand_it;
    println!("{:<8} {:>6} {:>12} {:>16}", "init", "runs", "median_iter", "median_abs_err");
    println!("{:<8} {meta_n:>6} {meta_it:>12.1} {:>16.3e}", "meta", meta_err.unwrap_or(f64::NAN));
    println!("{:<8} {rand_n:>6} {rand_it:>12.1} {:>16.3e}", "random", rand_err.unwrap_or(f64::NAN));
    println!("iteration ratio (meta/random): {ratio:.4}");

    let ksweep = match &s.k_grid {
        Some(grid) => Some(k_sweep(s, &model, &problems, grid)?),
        None => None,
    };
    finish(
        s,
        Command::MetaEval,
        json!({
            "eval_omegas": s.eval_omegas,
            "meta": {"runs": meta_n, "median_iterations": meta_it, "median_abs_error": meta_err},
            "random": {"runs": rand_n, "median_iterations": rand_it, "median_abs_error": rand_err},
            "iteration_ratio": ratio,
            "ksweep": ksweep,
        }),
    )
}

/// One row per unroll depth: counted pre-optimization energy evaluations and
/// the medians over the evaluation tasks.
fn k_sweep(s: &Settings, model: &MetaLearner<f64>, problems: &[Problem], grid: &[usize]) -> Result<Value, CliError> {
    let opt = s.optimizer();
    let points: Vec<(usize, usize)> = grid.iter().flat_map(|&k| (0..problems.len()).map(move |p| (k, p))).collect();
    let runs = run_batched(s, &points, |&(k, p)| {
        let problem = &problems[p];
        let (theta0, evals) = initial_theta(InitChoice::Meta, 0, problem, Some(model), k)?;
        if evals != k {
            return Err(CliError::numerical(format!("unroll depth {k} used {evals} energy evaluations")));
        }
        let rec = run_vqe(&problem.hamiltonian, &problem.ansatz, &theta0, &opt, InitKind::Meta)?;
        let r = problem.reference();
        Ok((k, evals, abs_err(rec.energies[0], r), abs_err(rec.final_energy, r), rec.iterations))
    })?;
    let mut csv = String::from("k,energy_evaluations,median_initial_error,median_final_error,median_iterations\n");
    let mut rows = Vec::new();
    for &k in grid {
        let sel: Vec<_> = runs.iter().filter(|r| r.0 == k).collect();
        let evals = sel[0].1;
        let init_err: Vec<f64> = sel.iter().filter_map(|r| r.2).collect();
        let fin_err: Vec<f64> = sel.iter().filter_map(|r| r.3).collect();
        let iters = median(&sel.iter().map(|r| r.4 as f64).collect::<Vec<_>>());
        let ie = (!init_err.is_empty()).then(|| median(&init_err));
        let fe = (!fin_err.is_empty()).then(|| median(&fin_err));
        let _ = writeln!(csv, "{k},{evals},{},{},{iters}", cell(ie), cell(fe));
        rows.push(json!({"k": k, "energy_evaluations": evals, "median_initial_error": ie,
            "median_final_error": fe, "median_iterations": iters}));
    }
    write_atomic(&s.out.join("ksweep.csv"), csv.as_bytes())?;
    print!("{csv}");
    Ok(Value::Array(rows))
}

pub fn cmd_chem(s: &Settings) -> Result<Value, CliError> {
    let problem = load_problem(s)?;
    let model = load_model(s)?;
    let opt = s.optimizer();
    let runs = run_batched(s, &s.seeds, |&seed| {
        let (theta0, evals) = initial_theta(s.init, seed, &problem, model.as_ref(), s.unroll_steps)?;
        let rec = run_vqe(&problem.hamiltonian, &problem.ansatz, &theta0, &opt, s.init.into())?;
        write_atomic(&s.out.join(format!("trace_{seed}.csv")), &csv_bytes(&rec))?;
        Ok((seed, rec, evals))
    })?;
    let reference = problem.reference();
    for (seed, r, _) in &runs {
        println!(
            "seed {seed}: energy {:.12} after {} iterations (converged: {}){}",
            r.final_energy,
            r.iterations,
            r.converged,
            reference.map(|e| format!(", exact {e:.12}, abs error {:.3e}", (r.final_energy - e).abs())).unwrap_or_default()
        );
    }
    finish(
        s,
        Command::Chem,
        json!({
            "problem": problem.label,
            "n_qubits": problem.hamiltonian.n_qubits(),
            "n_terms": problem.hamiltonian.len(),
            "electrons": problem.electrons,
            "n_params": problem.ansatz.n_params(),
            "exact_energy": problem.exact_ground,
            "sector_energy": problem.sector_ground,
            "runs": runs.iter().map(|(seed, r, ev)| run_json(Some(*seed), r, reference, *ev)).collect::<Vec<_>>(),
        }),
    )
}

/// Maximum element-wise difference between energy-plus-gradient results.
fn max_deviation(a: &(f64, Vec<f64>), b: &(f64, Vec<f64>)) -> f64 {
    a.1.iter().zip(&b.1).map(|(x, y)| (x - y).abs()).fold((a.0 - b.0).abs(), f64::max)
}

/// Agreement required between thread counts.
pub const BENCH_AGREEMENT: f64 = 1e-12;

pub fn cmd_bench_threads(s: &Settings) -> Result<Value, CliError> {
    let mut csv = String::from("qubits,threads,seconds,speedup,energy,max_deviation\n");
    let mut rows = Vec::new();
    println!("{:>6} {:>8} {:>12} {:>9} {:>12}", "qubits", "threads", "seconds", "speedup", "max_dev");
    for &n in &s.bench_qubits {
        let h = build_sho(&ShoSpec::new(s.omega, n)?)?;
        let a = build_hea::<f64>(n, s.bench_layers)?;
        let theta = seeded_random_init(a.n_params(), s.seeds[0]);
        let workload = || -> Result<(f64, Vec<f64>), CliError> {
            Ok((a.energy(&h, &theta)?, a.parameter_shift_gradient(&h, &theta)?))
        };
        let mut baseline: Option<(f64, (f64, Vec<f64>))> = None;
        for &t in &s.bench_threads {
            let exec = Executor::new(t)?;
            // untimed pass so page faults and pool start-up stay out of the figures
            exec.install(&workload)?;
            let mut best = f64::INFINITY;
            let mut result = None;
            for _ in 0..s.bench_repeats.max(1) {
                let start = Instant::now();
                let r = exec.install(&workload)?;
                best = best.min(start.elapsed().as_secs_f64());
                result = Some(r);
            }
            let result = result.expect("at least one repeat");
            let (base_time, base) = baseline.get_or_insert_with(|| (best, result.clone()));
            let dev = max_deviation(base, &result);
            let speedup = *base_time / best;
            println!("{n:>6} {t:>8} {best:>12.4} {speedup:>9.2} {dev:>12.2e}");
            let _ = writeln!(csv, "{n},{t},{best:.6},{speedup:.4},{:.17e},{dev:.3e}", result.0);
            rows.push(json!({"qubits": n, "threads": t, "seconds": best, "speedup": speedup,
                "energy": result.0, "max_deviation": dev}));
            if dev > BENCH_AGREEMENT {
                write_atomic(&s.out.join("bench.csv"), csv.as_bytes())?;
                return Err(CliError::numerical(format!(
                    "n={n}: results with {t} threads differ from the first thread count by {dev:.3e}"
                )));
            }
        }
    }
    write_atomic(&s.out.join("bench.csv"), csv.as_bytes())?;
    let cpus = std::thread::available_parallelism().map(|c| c.get()).unwrap_or(1);
    finish(s, Command::BenchThreads, json!({"rows": rows, "available_cpus": cpus}))
}

/// Dispatches an already resolved command.
pub fn execute(cmd: Command, s: &Settings) -> Result<Value, CliError> {
    match cmd {
        Command::Vqe => cmd_vqe(s),
        Command::LrScan => cmd_lr_scan(s),
        Command::Vqd => cmd_vqd(s),
        Command::MetaTrain => cmd_meta_train(s),
        Command::MetaEval => cmd_meta_eval(s),
        Command::Chem => cmd_chem(s),
        Command::BenchThreads => cmd_bench_threads(s),
    }
}
