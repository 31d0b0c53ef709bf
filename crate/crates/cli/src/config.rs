//! Experiment settings: per-command defaults, overlaid by a flat JSON file,
//! overlaid by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use metavqe::hamiltonians::TwoBodyOrdering;
use metavqe::meta::{DEFAULT_D_MAX, DEFAULT_HIDDEN, DEFAULT_UNROLL};
use metavqe::optimize::{InitKind, OptimizerConfig, OptimizerKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable holding the default worker thread count.
pub const THREADS_ENV: &str = "METAVQE_THREADS";

pub const DEFAULT_LR_GRID: [f64; 7] = [1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6];
pub const DEFAULT_TRAIN_OMEGAS: [f64; 4] = [0.40, 0.45, 0.55, 0.60];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Sho,
    Pauli,
    Fcidump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AnsatzChoice {
    Hea,
    Uccsd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Ordering {
    Chemist,
    Physicist,
}

impl From<Ordering> for TwoBodyOrdering {
    fn from(o: Ordering) -> Self {
        match o {
            Ordering::Chemist => TwoBodyOrdering::Chemist,
            Ordering::Physicist => TwoBodyOrdering::Physicist,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    Exact,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OptChoice {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitChoice {
    Zero,
    Random,
    Meta,
}

impl fmt::Display for InitChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        InitKind::from(*self).fmt(f)
    }
}

impl From<InitChoice> for InitKind {
    fn from(i: InitChoice) -> Self {
        match i {
            InitChoice::Zero => InitKind::Zero,
            InitChoice::Random => InitKind::Random,
            InitChoice::Meta => InitKind::Meta,
        }
    }
}

/// `N` (the seeds `0..N`), a list `a,b,c`, or a range `a..b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(u64),
    List(Vec<u64>),
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::Count(n) => (0..*n).collect(),
            SeedSpec::List(v) => v.clone(),
        }
    }
}

impl FromStr for SeedSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = |_| format!("invalid seed list {s:?}");
        if let Some((a, b)) = s.split_once("..") {
            let (a, b): (u64, u64) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
            return Ok(SeedSpec::List((a..b).collect()));
        }
        if s.contains(',') {
            let v = s
                .split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| t.trim().parse::<u64>().map_err(bad))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(SeedSpec::List(v));
        }
        Ok(SeedSpec::Count(s.trim().parse().map_err(bad)?))
    }
}

/// Optional overrides shared by the config file and the flags.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Flat JSON settings file; flags take precedence over its keys.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub system: Option<System>,
    /// Oscillator frequency.
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub qubits: Option<usize>,
    /// Pauli-sum or FCIDUMP file.
    #[arg(long)]
    pub hamiltonian: Option<PathBuf>,
    /// Two-body index order of FCIDUMP records.
    #[arg(long, value_enum)]
    pub ordering: Option<Ordering>,
    #[arg(long, value_enum)]
    pub ansatz: Option<AnsatzChoice>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// Electron count for UCCSD (defaults to NELEC of an FCIDUMP).
    #[arg(long)]
    pub electrons: Option<usize>,

    #[arg(long, value_enum)]
    pub opt: Option<OptChoice>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub adam_beta1: Option<f64>,
    #[arg(long)]
    pub adam_beta2: Option<f64>,
    #[arg(long)]
    pub adam_epsilon: Option<f64>,
    #[arg(long, alias = "max-iter")]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub theta_stride: Option<usize>,

    #[arg(long, value_enum)]
    pub init: Option<InitChoice>,
    /// Meta-model file for `--init meta`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Recurrent unroll (diffusion) steps before the optimizer starts.
    #[arg(long, alias = "k")]
    pub unroll_steps: Option<usize>,
    /// `N` for seeds 0..N, or an explicit list `a,b,c`, or a range `a..b`.
    #[arg(long)]
    pub seeds: Option<SeedSpec>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Independent runs executed at once.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub reference: Option<Reference>,

    /// Overlap penalty weight (default 10·ω).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Initialization of the ground-state stage of VQD.
    #[arg(long, value_enum)]
    pub ground_init: Option<InitChoice>,

    #[arg(long, value_delimiter = ',')]
    pub lr_grid: Option<Vec<f64>>,

    #[arg(long, value_delimiter = ',')]
    pub train_omegas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub eval_omegas: Option<Vec<f64>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub meta_lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub d_max: Option<usize>,
    #[arg(long)]
    pub meta_seed: Option<u64>,
    /// Diffusion-step sweep for `meta-eval`.
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,

    #[arg(long, value_delimiter = ',')]
    pub bench_qubits: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub bench_threads: Option<Vec<usize>>,
    #[arg(long)]
    pub bench_layers: Option<usize>,
    #[arg(long)]
    pub bench_repeats: Option<usize>,
}

/// Fully resolved settings; echoed into every summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub system: System,
    pub omega: f64,
    pub qubits: usize,
    pub hamiltonian: Option<PathBuf>,
    pub ordering: Ordering,
    pub ansatz: AnsatzChoice,
    pub layers: usize,
    pub electrons: Option<usize>,
    pub opt: OptChoice,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub max_iterations: usize,
    pub tol: f64,
    pub theta_stride: usize,
    pub init: InitChoice,
    pub model: Option<PathBuf>,
    pub unroll_steps: usize,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub jobs: usize,
    pub out: PathBuf,
    pub reference: Reference,
    pub beta: f64,
    pub ground_init: InitChoice,
    pub lr_grid: Vec<f64>,
    pub train_omegas: Vec<f64>,
    pub eval_omegas: Vec<f64>,
    pub epochs: usize,
    pub meta_lr: f64,
    pub batch_size: usize,
    pub hidden: usize,
    pub d_max: usize,
    pub meta_seed: u64,
    pub k_grid: Option<Vec<usize>>,
    pub bench_qubits: Vec<usize>,
    pub bench_threads: Vec<usize>,
    pub bench_layers: usize,
    pub bench_repeats: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Vqe,
    LrScan,
    Vqd,
    MetaTrain,
    MetaEval,
    Chem,
    BenchThreads,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Vqe => "vqe",
            Command::LrScan => "lr-scan",
            Command::Vqd => "vqd",
            Command::MetaTrain => "meta-train",
            Command::MetaEval => "meta-eval",
            Command::Chem => "chem",
            Command::BenchThreads => "bench-threads",
        })
    }
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl Settings {
    /// Defaults for `cmd` before any file or flag is applied.
    pub fn defaults(cmd: Command) -> Self {
        let mut s = Settings {
            system: System::Sho,
            omega: 0.5,
            qubits: 4,
            hamiltonian: None,
            ordering: Ordering::Chemist,
            ansatz: AnsatzChoice::Hea,
            layers: 5,
            electrons: None,
            opt: OptChoice::Adam,
            lr: 3e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            max_iterations: 1000,
            tol: 1e-7,
            theta_stride: 1,
            init: InitChoice::Random,
            model: None,
            unroll_steps: DEFAULT_UNROLL,
            seeds: vec![0],
            threads: default_threads(),
            jobs: 1,
            out: PathBuf::from("out"),
            reference: Reference::Exact,
            beta: f64::NAN,
            ground_init: InitChoice::Zero,
            lr_grid: DEFAULT_LR_GRID.to_vec(),
            train_omegas: DEFAULT_TRAIN_OMEGAS.to_vec(),
            eval_omegas: vec![0.5],
            epochs: 200,
            meta_lr: 1e-3,
            batch_size: 4,
            hidden: DEFAULT_HIDDEN,
            d_max: DEFAULT_D_MAX,
            meta_seed: 0,
            k_grid: None,
            bench_qubits: vec![12, 14],
            bench_threads: vec![1, 2, 4, 8],
            bench_layers: 1,
            bench_repeats: 3,
        };
        match cmd {
            Command::Vqd => {
                s.lr = 0.02;
                s.tol = 1e-10;
                s.max_iterations = 5000;
            }
            Command::Chem => {
                s.system = System::Fcidump;
                s.ansatz = AnsatzChoice::Uccsd;
                s.init = InitChoice::Zero;
                s.lr = 0.02;
                s.tol = 1e-12;
                s.max_iterations = 3000;
            }
            Command::LrScan => s.seeds = (0..5).collect(),
            Command::MetaEval => s.seeds = (0..10).collect(),
            _ => {}
        }
        s
    }

    /// Defaults, then the file named by `flags.config`, then `flags`, then
    /// the thread-count environment variable where no flag or key set it.
    pub fn resolve(cmd: Command, flags: &Overrides) -> Result<Self, CliError> {
        let mut s = Self::defaults(cmd);
        let env_threads = std::env::var(THREADS_ENV).ok();
        if let Some(v) = env_threads {
            s.threads = v
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("{THREADS_ENV}={v:?} is not a thread count")))?;
        }
        if let Some(path) = &flags.config {
            s.apply(&Self::read_file(path)?);
        }
        s.apply(flags);
        if s.beta.is_nan() {
            s.beta = metavqe::optimize::VqdConfig::<f64>::default_beta(s.omega);
        }
        if flags.ground_init.is_none() && s.model.is_some() {
            s.ground_init = InitChoice::Meta;
        }
        s.validate(cmd)?;
        Ok(s)
    }

    pub fn read_file(path: &Path) -> Result<Overrides, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }

    fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &o.$f { self.$f = v.clone(); } )* };
        }
        set!(system, omega, qubits, ordering, ansatz, layers, opt, lr, adam_beta1, adam_beta2, adam_epsilon);
        set!(max_iterations, tol, theta_stride, init, unroll_steps, threads, jobs, out, reference, beta);
        set!(ground_init, lr_grid, train_omegas, eval_omegas, epochs, meta_lr, batch_size, hidden, d_max);
        set!(meta_seed, bench_qubits, bench_threads, bench_layers, bench_repeats);
        if o.hamiltonian.is_some() {
            self.hamiltonian = o.hamiltonian.clone();
        }
        if o.electrons.is_some() {
            self.electrons = o.electrons;
        }
        if o.model.is_some() {
            self.model = o.model.clone();
        }
        if let Some(seeds) = &o.seeds {
            self.seeds = seeds.seeds();
        }
        if o.k_grid.is_some() {
            self.k_grid = o.k_grid.clone();
        }
    }

    fn validate(&self, cmd: Command) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::usage(m));
        self.optimizer().validate().map_err(|e| CliError::usage(e.to_string()))?;
        if self.threads == 0 || self.jobs == 0 {
            return fail("threads and jobs must be positive".into());
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if self.unroll_steps == 0 {
            return fail("unroll_steps must be positive".into());
        }
        if !(self.omega > 0.0) {
            return fail(format!("omega must be positive, got {}", self.omega));
        }
        if !(self.beta >= 0.0) {
            return fail(format!("beta must be non-negative, got {}", self.beta));
        }
        if matches!(self.system, System::Pauli | System::Fcidump) && self.hamiltonian.is_none() && cmd != Command::MetaTrain {
            return fail(format!("--system {:?} needs --hamiltonian FILE", self.system).to_lowercase());
        }
        if self.init == InitChoice::Meta || (cmd == Command::Vqd && self.ground_init == InitChoice::Meta) {
            if self.model.is_none() {
                return fail("meta initialization needs --model FILE".into());
            }
        }
        if cmd == Command::MetaEval && self.model.is_none() {
            return fail("meta-eval needs --model FILE".into());
        }
        if cmd == Command::LrScan && self.lr_grid.is_empty() {
            return fail("learning-rate grid is empty".into());
        }
        if cmd == Command::MetaTrain && (self.train_omegas.is_empty() || self.batch_size == 0) {
            return fail("meta-train needs training frequencies and a positive batch size".into());
        }
        if let Some(k) = &self.k_grid {
            if k.is_empty() || k.contains(&0) {
                return fail("k_grid entries must be positive".into());
            }
        }
        if cmd == Command::BenchThreads
            && (self.bench_qubits.is_empty() || self.bench_threads.is_empty() || self.bench_threads.contains(&0))
        {
            return fail("bench-threads needs qubit counts and positive thread counts".into());
        }
        Ok(())
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            kind: match self.opt {
                OptChoice::Adam => OptimizerKind::Adam,
                OptChoice::Sgd => OptimizerKind::Sgd,
            },
            learning_rate: self.lr,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_epsilon: self.adam_epsilon,
            max_iterations: self.max_iterations,
            tolerance: self.tol,
            theta_stride: self.theta_stride,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_specs() {
        assert_eq!("3".parse::<SeedSpec>().unwrap().seeds(), vec![0, 1, 2]);
        assert_eq!("4,9".parse::<SeedSpec>().unwrap().seeds(), vec![4, 9]);
        assert_eq!("7,".parse::<SeedSpec>().unwrap().seeds(), vec![7]);
        assert_eq!("2..5".parse::<SeedSpec>().unwrap().seeds(), vec![2, 3, 4]);
        assert!("x".parse::<SeedSpec>().is_err());
        let j: SeedSpec = serde_json::from_str("[1, 2]").unwrap();
        assert_eq!(j.seeds(), vec![1, 2]);
        let j: SeedSpec = serde_json::from_str("2").unwrap();
        assert_eq!(j.seeds(), vec![0, 1]);
    }

    #[test]
    fn file_keys_are_checked() {
        let ok: Overrides = serde_json::from_str(r#"{"lr": 0.01, "seeds": [3], "init": "zero"}"#).unwrap();
        assert_eq!(ok.lr, Some(0.01));
        assert!(serde_json::from_str::<Overrides>(r#"{"learning_rate": 0.01}"#).is_err());
    }

    #[test]
    fn precedence_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"lr": 0.01, "omega": 0.7, "seeds": 2}"#).unwrap();
        let flags = Overrides { config: Some(path), lr: Some(0.05), ..Default::default() };
        let s = Settings::resolve(Command::Vqd, &flags).unwrap();
        assert_eq!(s.lr, 0.05);
        assert_eq!(s.omega, 0.7);
        assert_eq!(s.seeds, vec![0, 1]);
        assert!((s.beta - 7.0).abs() < 1e-12);
        assert_eq!(s.tol, 1e-10);
        assert_eq!(s.ground_init, InitChoice::Zero);
    }

    #[test]
    fn invalid_combinations() {
        let meta = Overrides { init: Some(InitChoice::Meta), ..Default::default() };
        assert!(Settings::resolve(Command::Vqe, &meta).is_err());
        let neg = Overrides { lr: Some(-1.0), ..Default::default() };
        assert!(Settings::resolve(Command::Vqe, &neg).is_err());
        let pauli = Overrides { system: Some(System::Pauli), ..Default::default() };
        assert!(Settings::resolve(Command::Vqe, &pauli).is_err());
        assert!(Settings::resolve(Command::MetaEval, &Overrides::default()).is_err());
    }
}
