use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use subspace_pr::analysis::{
    concentration_experiment, geometry_experiment, init_energy_experiment, verify_expectation,
};
use subspace_pr::imaging::{image_observations, recover_image, synthetic_image};
use subspace_pr::io::{load_pgm, read_signal, write_pgm};
use subspace_pr::{
    gen_gaussian_operator, gen_sparse_signal, observe, run_spr, run_spr_partitioned,
    ComplexSignal, DftMode, Fourier2DOperator, RecoveryReport, RngSeed, SignalFlavor, SprConfig,
    SprError,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "spr", version, about = "Sparse phase retrieval by subspace matching and pruning")]
struct Cli {
    /// Worker threads for trial fan-out (default: SPR_JOBS, else logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover one signal and write a JSON-lines report.
    Recover(RecoverArgs),
    /// Success frequency over a range of sample counts.
    ///
    /// CSV columns: m, trials, successes, frequency, mean_nmse, mean_runtime_ms.
    /// Trial t uses the same signal and the same leading matrix rows at every m.
    /// mean_runtime_ms is NA unless --timing is given, so repeated runs are
    /// byte-identical by default.
    PhaseTransition(PhaseArgs),
    /// Distance of subspace minimisers to the expected optimum.
    ///
    /// CSV columns: trial, distance, final_loss, converged. The subspace holds
    /// the first `overlap` support indices plus 2k − overlap off-support ones.
    /// Defaults take well under two minutes on one core.
    Geometry(GeometryArgs),
    /// Elementwise deviation of the empirical gradient from its expectation.
    ///
    /// CSV columns: trial, max_deviation, bound, within_bound.
    Concentration(ConcentrationArgs),
    /// How often the spectral support captures 90% of the signal energy.
    ///
    /// CSV columns: m, trials, captures, frequency, mean_ratio.
    InitEnergy(InitEnergyArgs),
    /// Monte-Carlo check of the expected spectral score of every column.
    ///
    /// CSV columns: column, on_support, monte_carlo, expected, relative_gap.
    VerifyExpectation(ExpectationArgs),
    /// Recover a sparse image from its 2D Fourier magnitudes.
    ///
    /// Writes recovered.pgm (magnitudes) and report.json to --out-dir.
    Image2d(ImageArgs),
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// gaussian, flat or unit.
    #[arg(long, default_value = "gaussian")]
    flavor: SignalFlavor,
    /// Signal file with one `re,im` per line; overrides --n and --flavor.
    #[arg(long)]
    signal: Option<PathBuf>,
    /// Seed of the sampling matrix when --signal is given (default: --seed).
    #[arg(long)]
    matrix_seed: Option<u64>,
    #[arg(long, default_value_t = 50)]
    t_max: usize,
    /// Use the four-block single-pass variant.
    #[arg(long)]
    partitioned: bool,
    /// Report file (JSON lines); defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    m_start: usize,
    #[arg(long, default_value_t = 400)]
    m_end: usize,
    #[arg(long, default_value_t = 10)]
    m_step: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "gaussian")]
    flavor: SignalFlavor,
    /// Fill mean_runtime_ms with measured wall-clock times.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GeometryArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 4000)]
    m: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 5)]
    overlap: usize,
    #[arg(long, default_value_t = 25)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConcentrationArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 8000)]
    m: usize,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InitEnergyArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// One or more sample counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "600")]
    m: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExpectationArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 1_000_000)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ImageArgs {
    /// Binary PGM input.
    #[arg(long, conflicts_with = "synthetic")]
    image: Option<PathBuf>,
    /// Generate a random sparse nonnegative image instead.
    #[arg(long)]
    synthetic: bool,
    #[arg(long, default_value_t = 32)]
    size: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Allow dimensions that are not powers of two (quadratic-time DFT).
    #[arg(long)]
    naive_dft: bool,
    /// SPR runs with fresh seeds before giving up.
    #[arg(long, default_value_t = 20)]
    attempts: usize,
    #[arg(long, default_value_t = 50)]
    t_max: usize,
}

/// Usage problems exit with 2, numeric trouble and I/O failures with 1.
struct Failure {
    code: u8,
    message: String,
}

impl From<SprError> for Failure {
    fn from(e: SprError) -> Self {
        let code = match e {
            SprError::NumericFailure { .. } | SprError::Io(_) => 1,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = cli
        .jobs
        .or_else(|| std::env::var("SPR_JOBS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let result = pool.install(|| match cli.command {
        Command::Recover(a) => cmd_recover(a),
        Command::PhaseTransition(a) => cmd_phase_transition(a),
        Command::Geometry(a) => cmd_geometry(a),
        Command::Concentration(a) => cmd_concentration(a),
        Command::InitEnergy(a) => cmd_init_energy(a),
        Command::VerifyExpectation(a) => cmd_verify_expectation(a),
        Command::Image2d(a) => cmd_image2d(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn open_out(path: Option<&Path>) -> std::io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

/// CSV writer that appends the `#version`, `#seed` and `#params` trailer.
struct Csv {
    out: Box<dyn Write>,
}

impl Csv {
    fn create(path: Option<&Path>, header: &[&str]) -> std::io::Result<Self> {
        let mut out = open_out(path)?;
        writeln!(out, "{}", header.join(","))?;
        Ok(Csv { out })
    }

    fn row(&mut self, fields: &[String]) -> std::io::Result<()> {
        writeln!(self.out, "{}", fields.join(","))
    }

    fn finish(mut self, seed: u64, params: &[(&str, String)]) -> std::io::Result<()> {
        let params: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(self.out, "#version,{VERSION}")?;
        writeln!(self.out, "#seed,{seed}")?;
        writeln!(self.out, "#params,{}", params.join(";"))?;
        self.out.flush()
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.6e}")
}

/// Per-trial instance shared by `recover` and `phase-transition`.
struct Instance {
    a: subspace_pr::GaussianOperator,
    x: ComplexSignal,
    y: subspace_pr::Observations,
}

fn instance(n: usize, k: usize, m: usize, flavor: SignalFlavor, seed: RngSeed) -> subspace_pr::Result<Instance> {
    let a = gen_gaussian_operator(m, n, seed.derive(1))?;
    let x = gen_sparse_signal(n, k, flavor, seed.derive(2))?;
    let y = observe(&a, &x)?;
    Ok(Instance { a, x, y })
}

fn spr_config(k: usize, t_max: usize, seed: RngSeed) -> SprConfig {
    let mut cfg = SprConfig::new(k);
    cfg.t_max = t_max;
    cfg.solver.seed = seed.derive(3);
    cfg
}

#[derive(Serialize)]
struct ReportRecord<'a> {
    nmse: Option<f64>,
    dist: Option<f64>,
    iterations: usize,
    success: bool,
    final_loss: f64,
    loss_trace: &'a [f64],
    support: &'a [usize],
    diagnostics: Option<&'a str>,
}

fn report_record(r: &RecoveryReport) -> ReportRecord<'_> {
    ReportRecord {
        nmse: r.nmse,
        dist: r.dist,
        iterations: r.iterations,
        success: r.success,
        final_loss: r.final_loss,
        loss_trace: &r.loss_trace,
        support: r.support_history.last().map(|s| s.indices()).unwrap_or(&[]),
        diagnostics: r.diagnostics.as_deref(),
    }
}

fn cmd_recover(a: RecoverArgs) -> CmdResult {
    if a.m == 0 {
        return Err(usage("--m must be positive"));
    }
    let seed = RngSeed(a.seed);
    let inst = match &a.signal {
        Some(path) => {
            let x = read_signal(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let mseed = RngSeed(a.matrix_seed.unwrap_or(a.seed));
            let op = gen_gaussian_operator(a.m, x.len(), mseed.derive(1))?;
            let y = observe(&op, &x)?;
            Instance { a: op, x, y }
        }
        None => instance(a.n, a.k, a.m, a.flavor, seed)?,
    };
    let cfg = spr_config(a.k, a.t_max, seed);
    let report = if a.partitioned {
        run_spr_partitioned(&inst.a, &inst.y, &cfg, [0.25; 4], Some(&inst.x))?
    } else {
        run_spr(&inst.a, &inst.y, &cfg, Some(&inst.x))?
    };
    let line = serde_json::to_string(&report_record(&report)).map_err(|e| Failure {
        code: 1,
        message: e.to_string(),
    })?;
    let mut out = open_out(a.out.as_deref())?;
    writeln!(out, "{line}")?;
    out.flush()?;
    drop(out);
    println!(
        "success={} nmse={} iterations={} final_loss={} elapsed_ms={:.1}",
        report.success,
        report.nmse.map(fmt_f).unwrap_or_else(|| "NA".into()),
        report.iterations,
        fmt_f(report.final_loss),
        report.elapsed.as_secs_f64() * 1e3
    );
    match report.diagnostics {
        Some(d) => Err(Failure { code: 1, message: d }),
        None => Ok(()),
    }
}

fn cmd_phase_transition(a: PhaseArgs) -> CmdResult {
    if a.m_step == 0 || a.m_start == 0 || a.m_start > a.m_end {
        return Err(usage("empty sample range: need 0 < m-start <= m-end and m-step >= 1"));
    }
    if a.trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    let mut csv = Csv::create(
        a.out.as_deref(),
        &["m", "trials", "successes", "frequency", "mean_nmse", "mean_runtime_ms"],
    )?;
    let base = RngSeed(a.seed);
    for m in (a.m_start..=a.m_end).step_by(a.m_step) {
        let results = subspace_pr::analysis::run_trials(a.trials, |t| {
            let s = base.derive(t as u64);
            let started = Instant::now();
            let inst = instance(a.n, a.k, m, a.flavor, s)?;
            let r = run_spr(&inst.a, &inst.y, &spr_config(a.k, 50, s), Some(&inst.x))?;
            Ok((r.success, r.nmse.unwrap_or(f64::NAN), started.elapsed().as_secs_f64() * 1e3))
        })?;
        let successes = results.iter().filter(|r| r.0).count();
        let count = results.len() as f64;
        let mean_nmse = results.iter().map(|r| r.1).sum::<f64>() / count;
        let runtime = if a.timing {
            format!("{:.3}", results.iter().map(|r| r.2).sum::<f64>() / count)
        } else {
            "NA".into()
        };
        csv.row(&[
            m.to_string(),
            a.trials.to_string(),
            successes.to_string(),
            format!("{:.4}", successes as f64 / count),
            fmt_f(mean_nmse),
            runtime,
        ])?;
    }
    csv.finish(
        a.seed,
        &[
            ("n", a.n.to_string()),
            ("k", a.k.to_string()),
            ("m_start", a.m_start.to_string()),
            ("m_end", a.m_end.to_string()),
            ("m_step", a.m_step.to_string()),
            ("trials", a.trials.to_string()),
            ("flavor", format!("{:?}", a.flavor).to_lowercase()),
        ],
    )?;
    Ok(())
}

fn cmd_geometry(a: GeometryArgs) -> CmdResult {
    let table = geometry_experiment(a.n, a.m, a.k, a.overlap, a.trials, RngSeed(a.seed))?;
    let mut csv = Csv::create(a.out.as_deref(), &["trial", "distance", "final_loss", "converged"])?;
    for r in &table.rows {
        csv.row(&[r.trial.to_string(), fmt_f(r.distance), fmt_f(r.final_loss), r.converged.to_string()])?;
    }
    csv.finish(
        a.seed,
        &[
            ("n", a.n.to_string()),
            ("m", a.m.to_string()),
            ("k", a.k.to_string()),
            ("overlap", a.overlap.to_string()),
            ("trials", a.trials.to_string()),
        ],
    )?;
    if a.out.is_some() {
        println!("median_distance={}", fmt_f(table.median));
    }
    Ok(())
}

fn cmd_concentration(a: ConcentrationArgs) -> CmdResult {
    let r = concentration_experiment(a.n, a.k, a.m, a.trials, RngSeed(a.seed))?;
    let mut csv = Csv::create(a.out.as_deref(), &["trial", "max_deviation", "bound", "within_bound"])?;
    for (t, d) in r.max_deviation_over_l.iter().enumerate() {
        csv.row(&[t.to_string(), fmt_f(*d), fmt_f(r.bound), (*d < r.bound).to_string()])?;
    }
    csv.finish(
        a.seed,
        &[
            ("n", a.n.to_string()),
            ("k", a.k.to_string()),
            ("m", a.m.to_string()),
            ("trials", a.trials.to_string()),
        ],
    )?;
    if a.out.is_some() {
        let within = r.max_deviation_over_l.iter().filter(|&&d| d < r.bound).count();
        println!("within_bound={within}/{}", a.trials);
    }
    Ok(())
}

fn cmd_init_energy(a: InitEnergyArgs) -> CmdResult {
    if a.m.is_empty() || a.m.contains(&0) {
        return Err(usage("--m needs positive sample counts"));
    }
    let rows = init_energy_experiment(a.n, a.k, &a.m, a.trials, RngSeed(a.seed))?;
    let mut csv = Csv::create(a.out.as_deref(), &["m", "trials", "captures", "frequency", "mean_ratio"])?;
    for r in &rows {
        csv.row(&[
            r.m.to_string(),
            r.trials.to_string(),
            r.captures.to_string(),
            format!("{:.4}", r.frequency),
            fmt_f(r.mean_ratio),
        ])?;
    }
    let ms: Vec<String> = a.m.iter().map(|m| m.to_string()).collect();
    csv.finish(
        a.seed,
        &[
            ("n", a.n.to_string()),
            ("k", a.k.to_string()),
            ("m", ms.join(" ")),
            ("trials", a.trials.to_string()),
        ],
    )?;
    Ok(())
}

fn cmd_verify_expectation(a: ExpectationArgs) -> CmdResult {
    let rows = verify_expectation(a.n, a.k, a.m, RngSeed(a.seed))?;
    let mut csv = Csv::create(
        a.out.as_deref(),
        &["column", "on_support", "monte_carlo", "expected", "relative_gap"],
    )?;
    for r in &rows {
        csv.row(&[
            r.column.to_string(),
            r.on_support.to_string(),
            fmt_f(r.monte_carlo),
            fmt_f(r.expected),
            fmt_f(r.relative_gap),
        ])?;
    }
    csv.finish(
        a.seed,
        &[("n", a.n.to_string()), ("k", a.k.to_string()), ("m", a.m.to_string())],
    )?;
    if a.out.is_some() {
        let worst = rows.iter().map(|r| r.relative_gap).fold(0.0, f64::max);
        println!("max_relative_gap={}", fmt_f(worst));
    }
    Ok(())
}

#[derive(Serialize)]
struct ImageRecord {
    height: usize,
    width: usize,
    k: usize,
    residual_loss: f64,
    magnitude_error: f64,
    match_score: Option<f64>,
    attempts: usize,
    iterations: usize,
}

fn cmd_image2d(a: ImageArgs) -> CmdResult {
    let (height, width, truth) = match (&a.image, a.synthetic) {
        (Some(path), false) => {
            let img = load_pgm(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let x = ComplexSignal::from_real(&img.pixels)?;
            (img.height, img.width, x)
        }
        (None, true) => (a.size, a.size, synthetic_image(a.size, a.k, RngSeed(a.seed).derive(1))?),
        _ => return Err(usage("give exactly one of --image or --synthetic")),
    };
    let pow2 = height.is_power_of_two() && width.is_power_of_two();
    let mode = match (pow2, a.naive_dft) {
        (_, true) => DftMode::Naive,
        (true, false) => DftMode::Fft,
        (false, false) => {
            return Err(usage(format!(
                "image is {height}x{width}; dimensions must be powers of two unless --naive-dft is given"
            )))
        }
    };
    let op = Fourier2DOperator::with_mode(height, width, mode)?;
    let y = image_observations(&op, &truth)?;
    let mut cfg = SprConfig::new(a.k);
    cfg.t_max = a.t_max;
    cfg.solver.seed = RngSeed(a.seed).derive(3);
    let out = recover_image(&op, &y, &cfg, a.attempts, Some(&truth))?;

    std::fs::create_dir_all(&a.out_dir)?;
    let mags: Vec<f64> = out.report.estimate.moduli();
    write_pgm(
        BufWriter::new(File::create(a.out_dir.join("recovered.pgm"))?),
        width,
        height,
        &mags,
    )?;
    let record = ImageRecord {
        height,
        width,
        k: a.k,
        residual_loss: out.residual_loss,
        magnitude_error: out.magnitude_error,
        match_score: out.match_score,
        attempts: out.attempts,
        iterations: out.report.iterations,
    };
    let json = serde_json::to_string_pretty(&record).map_err(|e| Failure {
        code: 1,
        message: e.to_string(),
    })?;
    std::fs::write(a.out_dir.join("report.json"), json + "\n")?;
    println!(
        "residual_loss={} magnitude_error={} match_score={} attempts={}",
        fmt_f(out.residual_loss),
        fmt_f(out.magnitude_error),
        out.match_score.map(fmt_f).unwrap_or_else(|| "NA".into()),
        out.attempts
    );
    Ok(())
}
