use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fragcov::complete::{estimate_covariance, exact_band_completion, RankPolicy, SolveConfig, SupportPolicy};
use fragcov::harness::tables::{TableCell, TableOverrides, TableResult};
use fragcov::harness::{run_cell, run_table, scree_report, simulate_sample, ExperimentConfig, TableId};
use fragcov::io::{
    ingest_fragments, read_counts_csv, read_matrix_csv, write_counts_csv, write_matrix_csv, write_sample, write_scree_csv,
};
use fragcov::patch::{patched_binned, patched_regular, PatchedCovariance};
use fragcov::simulate::{type2_resolution, GridType, StartLaw};
use fragcov::{band_mask, Error};

#[derive(Parser)]
#[command(name = "fragcov", version, about = "Covariance completion from functional fragments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a fragment sample and write it as CSV plus JSON sidecar.
    Simulate(SimulateArgs),
    /// Patched covariance of a fragment CSV, with its counts.
    Patch(PatchArgs),
    /// Complete a banded covariance to a full low-rank estimate.
    Complete(CompleteArgs),
    /// Run a benchmark table or a single experiment config.
    Run(RunArgs),
    /// Fits of the rank sweep of a banded covariance.
    Scree(ScreeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Kernel id, e.g. `scenarioA:2`, `scenarioB:3`, `matern:1.5,0.5,1`.
    #[arg(long, default_value = "scenarioA:2")]
    kernel: String,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Fixed fragment length; shorthand for equal --delta1 and --delta2.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    delta1: f64,
    #[arg(long)]
    delta2: Option<f64>,
    #[arg(long, value_enum, default_value_t = GridArg::Common)]
    grid_type: GridArg,
    /// Grid size (common, type 1) or points per unit length (type 2).
    #[arg(long, default_value_t = 50)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    /// Use cell midpoints instead of a perturbed common grid.
    #[arg(long)]
    midpoints: bool,
    #[arg(long, value_enum, default_value_t = StartArg::Centred)]
    start_law: StartArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Common,
    Type1,
    Type2,
}

impl From<GridArg> for GridType {
    fn from(g: GridArg) -> Self {
        match g {
            GridArg::Common => GridType::Common,
            GridArg::Type1 => GridType::Type1,
            GridArg::Type2 => GridType::Type2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StartArg {
    Uniform,
    Centred,
    GridAligned,
}

impl From<StartArg> for StartLaw {
    fn from(s: StartArg) -> Self {
        match s {
            StartArg::Uniform => StartLaw::Uniform,
            StartArg::Centred => StartLaw::Centred,
            StartArg::GridAligned => StartLaw::GridAligned,
        }
    }
}

#[derive(Args)]
struct PatchArgs {
    /// Fragment CSV (`curve_id,t,value`); a sidecar JSON beside it is used when present.
    #[arg(long)]
    input: PathBuf,
    /// Resolution for binning; defaults to the shared grid, or `round(0.8 mean Q)`.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    counts_out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct BandArgs {
    /// Patched covariance CSV.
    #[arg(long)]
    input: PathBuf,
    /// Counts CSV; every entry counts once when omitted.
    #[arg(long)]
    counts: Option<PathBuf>,
    #[arg(long)]
    delta_prime: f64,
    /// Leave the diagonal out of the fit (noisy data).
    #[arg(long)]
    exclude_diagonal: bool,
    /// Entries kept in the fit; `intersect` with counts, `zero-fill` without.
    #[arg(long, value_enum)]
    support: Option<SupportArg>,
    #[arg(long, default_value_t = 2)]
    min_count: usize,
    #[arg(long)]
    max_rank: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SupportArg {
    Strict,
    Intersect,
    ZeroFill,
}

#[derive(Args)]
struct CompleteArgs {
    #[command(flatten)]
    band: BandArgs,
    /// `auto` or a fixed rank.
    #[arg(long, default_value = "auto")]
    rank: String,
    #[arg(long, default_value_t = 0.01)]
    elbow_eps: f64,
    /// Penalised rank choice `f(i) + tau i` instead of the elbow rule.
    #[arg(long)]
    tau: Option<f64>,
    /// Use determinant propagation instead of the solver (fixed rank only).
    #[arg(long)]
    exact_oracle: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    scree_out: Option<PathBuf>,
}

#[derive(Args)]
struct ScreeArgs {
    #[command(flatten)]
    band: BandArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    table: Option<String>,
    /// JSON file mirroring the experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// One-based cell index; repeatable.
    #[arg(long)]
    cell: Vec<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// Result CSV, with the configs beside it as `<stem>.config.json`; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let (d1, d2) = match a.delta {
        Some(d) => (d, d),
        None => (a.delta1, a.delta2.unwrap_or(a.delta1)),
    };
    let cfg = ExperimentConfig {
        kernel: a.kernel,
        n: a.n,
        base_resolution: a.k,
        delta1: d1,
        delta2: d2,
        grid_type: a.grid_type.into(),
        perturbed: !a.midpoints,
        start_law: a.start_law.into(),
        noise_sd: a.noise_sd,
        seed: a.seed,
        replications: 1,
        ..ExperimentConfig::default()
    };
    let kernel = cfg.validate()?.build()?;
    let sample = simulate_sample(&cfg, kernel.as_ref(), 0)?;
    write_sample(&sample, &a.out)?;
    eprintln!("wrote {} curves, {} observations to {}", sample.n(), sample.total_points(), a.out.display());
    Ok(())
}

fn patch(a: PatchArgs) -> anyhow::Result<()> {
    let sample = ingest_fragments(&a.input)?;
    let patched: PatchedCovariance<f64> = match (&sample.grid, a.k) {
        (Some(_), None) if sample.grid_type == GridType::Common => patched_regular(&sample)?,
        (Some(g), None) => patched_binned(&sample, g.resolution())?,
        (None, None) => patched_binned(&sample, type2_resolution(&sample))?,
        (_, Some(k)) => patched_binned(&sample, k)?,
    };
    write_matrix_csv(&patched.matrix, create(&a.out)?)?;
    let counts = a.counts_out.unwrap_or_else(|| a.out.with_extension("counts.csv"));
    write_counts_csv(patched.counts(), patched.k(), create(&counts)?)?;
    eprintln!("K={} noise={} -> {} and {}", patched.k(), patched.noise_flag, a.out.display(), counts.display());
    Ok(())
}

fn load_band(b: &BandArgs) -> anyhow::Result<PatchedCovariance<f64>> {
    let m = read_matrix_csv(open(&b.input)?)?;
    let k = m.k();
    let mut p = match &b.counts {
        Some(path) => {
            let (kc, counts) = read_counts_csv(open(path)?)?;
            if kc != k {
                bail!("counts are {kc}x{kc} but the matrix is {k}x{k}");
            }
            PatchedCovariance::from_matrix(m.with_counts(counts)?, 0, b.exclude_diagonal)
        }
        None => PatchedCovariance::from_matrix(m, 1, b.exclude_diagonal),
    };
    p.delta_effective = Some(b.delta_prime);
    Ok(p)
}

fn solve_config(b: &BandArgs, policy: RankPolicy) -> SolveConfig {
    let default = if b.counts.is_some() { SupportArg::Intersect } else { SupportArg::ZeroFill };
    let support = match b.support.unwrap_or(default) {
        SupportArg::Strict => SupportPolicy::Strict,
        SupportArg::Intersect => SupportPolicy::Intersect { min_count: b.min_count },
        SupportArg::ZeroFill => SupportPolicy::ZeroFill,
    };
    SolveConfig {
        max_rank_sweep: b.max_rank,
        rank_policy: policy,
        delta_prime: Some(b.delta_prime),
        support,
        seed: b.seed,
        ..SolveConfig::default()
    }
}

fn complete(a: CompleteArgs) -> anyhow::Result<()> {
    let target = load_band(&a.band)?;
    let policy = match (a.rank.as_str(), a.tau) {
        ("auto", Some(tau)) => RankPolicy::Penalty(tau),
        ("auto", None) => RankPolicy::Elbow(a.elbow_eps),
        (q, _) => RankPolicy::Fixed(q.parse().with_context(|| format!("--rank expects `auto` or an integer, got {q}"))?),
    };
    if a.exact_oracle {
        let RankPolicy::Fixed(q) = policy else { bail!("--exact-oracle needs a fixed --rank") };
        let mask = band_mask(target.k(), a.band.delta_prime, a.band.exclude_diagonal)?;
        let full = exact_band_completion(&target.matrix, &mask, q)?;
        write_matrix_csv(&full, create(&a.out)?)?;
        eprintln!("exact completion at rank {q} -> {}", a.out.display());
        return Ok(());
    }
    let est = estimate_covariance(&target, &solve_config(&a.band, policy))?;
    write_matrix_csv(&est.matrix, create(&a.out)?)?;
    if let Some(path) = &a.scree_out {
        match &est.sweep {
            Some(sweep) => write_scree_csv(sweep, create(path)?)?,
            None => log::warn!("fixed rank: no sweep to write to {}", path.display()),
        }
    }
    if est.rank.warning {
        eprintln!("warning: elbow threshold not reached; using the largest rank");
    }
    if est.trace_warning {
        eprintln!("warning: trace of the estimate exceeds that of the input by more than 10%");
    }
    eprintln!("rank {} fit {:.3e} -> {}", est.rank.rank, est.fit, a.out.display());
    Ok(())
}

fn scree(a: ScreeArgs) -> anyhow::Result<()> {
    let target = load_band(&a.band)?;
    let rows = scree_report(&target, &solve_config(&a.band, RankPolicy::default()))?;
    let mut text = String::from("rank,fit,normalized_fit\n");
    for r in &rows {
        text.push_str(&format!("{},{},{}\n", r.rank, r.fit, r.normalized_fit));
    }
    match &a.out {
        Some(p) => create(p)?.write_all(text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(a: RunArgs) -> anyhow::Result<()> {
    let result = match (&a.table, &a.config) {
        (Some(t), _) => {
            let table: TableId = t.parse()?;
            let o = TableOverrides {
                seed: a.seed.unwrap_or(1),
                replications: a.reps,
                cells: a.cell.clone(),
                solver: None,
            };
            run_table(table, &o)?
        }
        (None, Some(path)) => {
            let mut cfg: ExperimentConfig = serde_json::from_reader(open(path)?)
                .with_context(|| format!("parsing {}", path.display()))?;
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(r) = a.reps {
                cfg.replications = r;
            }
            let res = run_cell(&cfg)?;
            let cell = TableCell { row: cfg.kernel.clone(), col: format!("rank {}", cfg.rank_label()), config: cfg };
            TableResult { table: None, cells: vec![(cell, res)] }
        }
        (None, None) => bail!("give --table or --config"),
    };
    let csv = result.to_csv();
    match &a.out {
        Some(p) => {
            create(p)?.write_all(csv.as_bytes())?;
            // Full configs, solver settings included, one per CSV row.
            let configs: Vec<&ExperimentConfig> = result.cells.iter().map(|(_, r)| &r.config).collect();
            serde_json::to_writer_pretty(create(&p.with_extension("config.json"))?, &configs)?;
            print!("{}", result.to_markdown());
        }
        None => print!("{csv}"),
    }
    for (cell, res) in &result.cells {
        for f in &res.failures {
            eprintln!("{} / {}: replication {} failed: {}", cell.row, cell.col, f.replication, f.message);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Patch(a) => patch(a),
        Command::Complete(a) => complete(a),
        Command::Run(a) => run(a),
        Command::Scree(a) => scree(a),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::SingularMinor { .. } | Error::Diverged { .. }) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
