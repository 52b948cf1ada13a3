use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use rigidleak_core::harness::{
    ingest_csv, render, run_experiment_with, write_records_csv, ExperimentConfig, ReportFormat,
    RunOptions,
};
use rigidleak_core::known_input::{
    known_input_attack, known_input_attack_general, KnownInputOptions,
};
use rigidleak_core::known_sample::{pca_attack_general, pca_attack_orthogonal, PcaOptions};
use rigidleak_core::metrics::evaluate;
use rigidleak_core::perturbation::{
    default_translation_scale, generate_rigid_motion, perturb, RecordPermutation, RigidMotion,
};
use rigidleak_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "rigidleak",
    version,
    about = "Rigid-motion perturbation and the attacks against it"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Release a dataset under a secret random rigid motion.
    Perturb(PerturbArgs),
    #[command(subcommand)]
    Attack(AttackCommand),
    /// Score estimates against the private records.
    Evaluate(EvaluateArgs),
    /// Run a configured breach-frequency experiment.
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum AttackCommand {
    /// Link known private records to the release and estimate one more.
    KnownInput(KnownInputArgs),
    /// Recover the motion from an independent sample of the same distribution.
    KnownSample(KnownSampleArgs),
}

#[derive(Args)]
struct CsvInput {
    /// Numeric CSV, one record per row.
    input: PathBuf,
    #[arg(long)]
    has_header: bool,
    #[arg(long)]
    dedup: bool,
    /// 0-based attribute columns to keep, comma separated.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<usize>>,
}

impl CsvInput {
    fn load(&self) -> Result<DMatrix<f64>> {
        Ok(ingest_csv(
            &self.input,
            self.has_header,
            self.dedup,
            self.columns.as_deref(),
        )?
        .into_inner())
    }
}

fn load_plain(path: &Path) -> Result<DMatrix<f64>> {
    Ok(ingest_csv(path, false, false, None)?.into_inner())
}

#[derive(Args)]
struct PerturbArgs {
    #[command(flatten)]
    data: CsvInput,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    with_translation: bool,
    /// Per-entry standard deviation of the translation.
    #[arg(long)]
    translation_scale: Option<f64>,
    #[arg(long)]
    identity_permutation: bool,
    /// Released records (CSV).
    #[arg(long)]
    output: PathBuf,
    /// Where to store the secret motion and permutation (JSON).
    #[arg(long)]
    secret: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct Secret {
    motion: RigidMotion,
    permutation: RecordPermutation,
}

#[derive(Args)]
struct KnownInputArgs {
    /// Known private records (CSV, one per row).
    #[arg(long)]
    known: PathBuf,
    /// Released records (CSV).
    #[arg(long)]
    released: PathBuf,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    seed: u64,
    /// The release may include a translation.
    #[arg(long)]
    with_translation: bool,
    #[arg(long)]
    link_tol: Option<f64>,
    /// Linking time budget in seconds.
    #[arg(long)]
    budget_secs: Option<f64>,
}

#[derive(Args)]
struct KnownSampleArgs {
    /// Independent sample from the private distribution (CSV).
    #[arg(long)]
    sample: PathBuf,
    #[arg(long)]
    released: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    with_translation: bool,
    #[arg(long)]
    permutations: Option<usize>,
    #[arg(long)]
    pooled_cap: Option<usize>,
    /// Estimated private records, in release order (CSV).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Private records (CSV).
    #[arg(long)]
    truth: PathBuf,
    /// Estimates in release order (CSV).
    #[arg(long)]
    estimates: PathBuf,
    /// Secret from `perturb`; without it rows are paired in order.
    #[arg(long)]
    secret: Option<PathBuf>,
    #[arg(long)]
    epsilon: f64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Report path; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Include wall-clock timings (makes reports differ between runs).
    #[arg(long)]
    timings: bool,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Perturb(a) => cmd_perturb(a),
        Command::Attack(AttackCommand::KnownInput(a)) => cmd_known_input(a),
        Command::Attack(AttackCommand::KnownSample(a)) => cmd_known_sample(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Experiment(a) => cmd_experiment(a),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_perturb(a: PerturbArgs) -> Result<()> {
    let x = rigidleak_core::linalg::DataMatrix::new(a.data.load()?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let scale = a
        .translation_scale
        .unwrap_or_else(|| default_translation_scale(&x));
    let motion = generate_rigid_motion(x.attributes(), a.with_translation, scale, &mut rng)?;
    let permutation = if a.identity_permutation {
        RecordPermutation::identity(x.records())
    } else {
        RecordPermutation::random(x.records(), &mut rng)
    };
    let y = perturb(&x, &motion, &permutation)?;
    write_records_csv(y.as_matrix(), BufWriter::new(File::create(&a.output)?))?;
    if let Some(path) = a.secret {
        let secret = Secret {
            motion,
            permutation,
        };
        serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), &secret)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct KnownInputSummary {
    linked_inputs: Vec<usize>,
    linked_outputs: Vec<usize>,
    rank: usize,
    codim: usize,
    chosen_record: usize,
    anchor: Option<usize>,
    rho: f64,
    estimate: Vec<f64>,
}

fn cmd_known_input(a: KnownInputArgs) -> Result<()> {
    let xa = load_plain(&a.known)?;
    let y = load_plain(&a.released)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut opts = KnownInputOptions::default();
    if let Some(t) = a.link_tol {
        opts.linking.tol = t;
    }
    opts.linking.budget = a.budget_secs.map(Duration::from_secs_f64);
    let r = if a.with_translation {
        known_input_attack_general(&xa, &y, a.epsilon, &opts, &mut rng)?
    } else {
        known_input_attack(&xa, &y, a.epsilon, &opts, &mut rng)?
    };
    print_json(&KnownInputSummary {
        linked_inputs: r.link.assignment.domain(),
        linked_outputs: r.link.assignment.outputs(),
        rank: r.rank,
        codim: r.codim,
        chosen_record: r.chosen,
        anchor: r.anchor,
        rho: r.rho,
        estimate: r.estimate.iter().copied().collect(),
    })
}

#[derive(Serialize)]
struct KnownSampleSummary {
    signs: Vec<i8>,
    p_value: f64,
    statistic: f64,
    headline_record: usize,
    headline_estimate: Vec<f64>,
    sample_min_eigen_ratio: Option<f64>,
    release_min_eigen_ratio: Option<f64>,
    warnings: Vec<String>,
}

fn cmd_known_sample(a: KnownSampleArgs) -> Result<()> {
    let s = load_plain(&a.sample)?;
    let y = load_plain(&a.released)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut opts = PcaOptions::default();
    if let Some(p) = a.permutations {
        opts.search.permutations = p;
    }
    if let Some(c) = a.pooled_cap {
        opts.search.pooled_cap = c;
    }
    let r = if a.with_translation {
        pca_attack_general(&s, &y, &opts, &mut rng)?
    } else {
        pca_attack_orthogonal(&s, &y, &opts, &mut rng)?
    };
    if let Some(path) = &a.output {
        write_records_csv(&r.estimates, BufWriter::new(File::create(path)?))?;
    }
    print_json(&KnownSampleSummary {
        signs: r.signs.signs().to_vec(),
        p_value: r.p_value,
        statistic: r.statistic,
        headline_record: r.headline,
        headline_estimate: r.headline_estimate().iter().copied().collect(),
        sample_min_eigen_ratio: r.diagnostics.sample_min_eigen_ratio,
        release_min_eigen_ratio: r.diagnostics.release_min_eigen_ratio,
        warnings: r.diagnostics.warnings,
    })
}

#[derive(Serialize)]
struct EvaluationSummary {
    records: usize,
    epsilon: f64,
    eps_breach_fraction: f64,
    med_breach_fraction: f64,
    cos_breach_fraction: f64,
    mean_relative_error: f64,
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let x = load_plain(&a.truth)?;
    let est = load_plain(&a.estimates)?;
    if x.shape() != est.shape() {
        return Err(Error::InvalidInput(format!(
            "truth has {} records of {} attributes, estimates {} of {}",
            x.ncols(),
            x.nrows(),
            est.ncols(),
            est.nrows()
        )));
    }
    let inverse = match &a.secret {
        Some(path) => {
            let secret: Secret = serde_json::from_reader(File::open(path)?)?;
            RecordPermutation::new(secret.permutation.as_slice().to_vec())?.inverse()
        }
        None => RecordPermutation::identity(x.ncols()),
    };
    if inverse.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            actual: inverse.len(),
        });
    }
    let m = x.ncols();
    let (mut eps, mut med, mut cos, mut err) = (0usize, 0usize, 0usize, 0.0);
    for j in 0..m {
        let o = evaluate(
            &x.column(inverse.image(j)).into_owned(),
            &est.column(j).into_owned(),
            a.epsilon,
        )?;
        eps += usize::from(o.eps_breach);
        med += usize::from(o.med_breach);
        cos += usize::from(o.cos_breach);
        err += o.relative_euclid;
    }
    let mf = m as f64;
    print_json(&EvaluationSummary {
        records: m,
        epsilon: a.epsilon,
        eps_breach_fraction: eps as f64 / mf,
        med_breach_fraction: med as f64 / mf,
        cos_breach_fraction: cos as f64 / mf,
        mean_relative_error: err / mf,
    })
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    cfg.seed = a.seed;
    if let Some(r) = a.repetitions {
        cfg.repetitions = r;
    }
    if let Some(e) = a.epsilon {
        cfg.epsilon = e;
    }
    let report = run_experiment_with(&cfg, RunOptions { timings: a.timings })?;
    let bytes = render(&report, a.format)?;
    match a.output {
        Some(path) => std::fs::write(path, bytes)?,
        None => io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}
