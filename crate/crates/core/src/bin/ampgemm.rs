//! `ampgemm` command-line front end: `bench`, `tune`, `validate`, `plan`.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ampgemm::bench::{
    legal_combos, parse_size_range, parse_sizes, plan_cmd, run_bench, validate_cmd, write_csv, Combo, PlanFormat,
    Setup, SyntheticTimer, Timer, WallTimer,
};
use ampgemm::energy::{load_trace, ConstantPower, NoSampler, PowerSampler, ReplaySampler};
use ampgemm::overrides::{CoarseChoice, Overrides};
use ampgemm::profile::{Profile, EXYNOS5422_A15, EXYNOS5422_A7};
use ampgemm::tuner::{timed_evaluator, tune, SearchSpec};
use ampgemm::{ClusterSpec, CoarseLoop, CoreClass, Error, FineLoops, Ratio, Result, SchedulingPolicy};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "ampgemm", version, about = "Blocked GEMM scheduling for big.LITTLE-style multicores")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time square GEMMs and emit one CSV record per size.
    Bench(BenchArgs),
    /// Search for the best (m_c, k_c) of one cluster.
    Tune(TuneArgs),
    /// Compare every policy/loop combination against the naive oracle.
    Validate(ValidateArgs),
    /// Print how a problem is split between threads.
    Plan(PlanArgs),
}

#[derive(Args, Clone, Default)]
struct Knobs {
    /// sss, sas, ca-sas, das, ca-das or single
    #[arg(long)]
    policy: Option<SchedulingPolicy>,
    /// Fast:slow work ratio, e.g. 3 or 5/2
    #[arg(long)]
    ratio: Option<Ratio>,
    /// Coarse loop split between clusters: 1, 3 or none
    #[arg(long)]
    coarse: Option<CoarseChoice>,
    /// Fine loops split inside a cluster: 4, 5 or 45
    #[arg(long)]
    fine: Option<FineLoops>,
    #[arg(long, value_name = "PATH")]
    fast_config: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    slow_config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    threads_fast: Option<usize>,
    /// 0 runs on the fast cluster only
    #[arg(long, value_name = "N")]
    threads_slow: Option<usize>,
}

impl Knobs {
    /// Environment first, then explicit flags on top.
    fn resolve(&self) -> Result<Overrides> {
        let cli = Overrides {
            policy: self.policy,
            ratio: self.ratio,
            threads_fast: self.threads_fast,
            threads_slow: self.threads_slow,
            coarse: self.coarse,
            fine: self.fine,
            fast_config: self.fast_config.clone(),
            slow_config: self.slow_config.clone(),
        };
        Ok(Overrides::from_env()?.merged_with(&cli))
    }
}

#[derive(Args)]
struct SizeArgs {
    /// Comma-separated square sizes
    #[arg(long, conflicts_with = "size_range")]
    sizes: Option<String>,
    /// lo:hi:step, inclusive
    #[arg(long)]
    size_range: Option<String>,
}

impl SizeArgs {
    fn resolve(&self, default: &[usize]) -> Result<Vec<(usize, usize, usize)>> {
        let v = match (&self.sizes, &self.size_range) {
            (Some(s), _) => parse_sizes(s)?,
            (_, Some(r)) => parse_size_range(r)?,
            _ => default.to_vec(),
        };
        Ok(v.into_iter().map(|r| (r, r, r)).collect())
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    knobs: Knobs,
    #[command(flatten)]
    sizes: SizeArgs,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Write CSV here instead of stdout
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Replay a recorded power trace
    #[arg(long, value_name = "PATH", conflicts_with = "power_const")]
    power_trace: Option<PathBuf>,
    /// Mock sensor with constant total power
    #[arg(long, value_name = "W")]
    power_const: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Charge flops at this rate instead of reading the clock
    #[arg(long, value_name = "GFLOPS")]
    mock_clock: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Fast,
    Slow,
}

#[derive(Args)]
struct TuneArgs {
    /// Profile holding the cluster to tune (defaults to the built-in A15 or A7 profile)
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "fast")]
    class: ClassArg,
    /// Write the tuned profile here
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write the JSON-lines search log here
    #[arg(long, value_name = "PATH")]
    log: Option<PathBuf>,
    /// m_c grid as lo:hi:step
    #[arg(long, default_value = "8:256:24")]
    m_grid: String,
    /// k_c grid as lo:hi:step
    #[arg(long, default_value = "64:1024:96")]
    k_grid: String,
    #[arg(long, default_value_t = 2)]
    radius: usize,
    #[arg(long, default_value_t = 8)]
    step_m: usize,
    #[arg(long, default_value_t = 24)]
    step_k: usize,
    /// Problem order of the timing runs
    #[arg(long, default_value_t = 512)]
    r: usize,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 1.0)]
    occupancy: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Score with a concave surface peaking at M,K instead of timing runs
    #[arg(long, value_name = "M,K")]
    synthetic: Option<String>,
    #[arg(long, value_name = "GFLOPS")]
    mock_clock: Option<f64>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    knobs: Knobs,
    #[command(flatten)]
    sizes: SizeArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    knobs: Knobs,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Square size used for any of m, n, k not given
    #[arg(long, default_value_t = 1024)]
    size: usize,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
}

fn load_cluster(path: Option<&Path>, builtin: &str, class: CoreClass) -> Result<ClusterSpec> {
    let profile = match path {
        Some(p) => Profile::load(p)?,
        None => Profile::parse(builtin)?,
    };
    let mut c = match profile.cluster(class) {
        Some(c) => c.clone(),
        None => profile.sole_cluster()?.clone(),
    };
    c.class = class;
    c.check()?;
    Ok(c)
}

struct Resolved {
    policy: Option<SchedulingPolicy>,
    ratio: Option<Ratio>,
    coarse: Option<CoarseChoice>,
    fine: Option<FineLoops>,
    fast: ClusterSpec,
    slow: Option<ClusterSpec>,
}

fn resolve(knobs: &Knobs) -> Result<Resolved> {
    let o = knobs.resolve()?;
    let mut fast = load_cluster(o.fast_config.as_deref(), EXYNOS5422_A15, CoreClass::Fast)?;
    let mut slow = load_cluster(o.slow_config.as_deref(), EXYNOS5422_A7, CoreClass::Slow)?;
    if let Some(t) = o.threads_fast {
        fast = fast.with_cores(t);
    }
    if let Some(t) = o.threads_slow {
        slow = slow.with_cores(t);
    }
    Ok(Resolved {
        policy: o.policy,
        ratio: o.ratio,
        coarse: o.coarse,
        fine: o.fine,
        fast,
        slow: (slow.core_count > 0).then_some(slow),
    })
}

fn setup(r: &Resolved) -> Result<Setup> {
    let policy = r.policy.unwrap_or(SchedulingPolicy::CaDas);
    let coarse = match r.coarse {
        Some(c) => c.loop_id(),
        None => Some(Setup::default_coarse(policy)),
    };
    Setup::new(
        policy,
        r.fast.clone(),
        r.slow.clone(),
        coarse,
        r.fine.unwrap_or(FineLoops::Loop4),
        r.ratio.unwrap_or(Ratio::integer(1)),
    )
}

fn bench(args: BenchArgs) -> Result<ExitCode> {
    let r = resolve(&args.knobs)?;
    let setup = setup(&r)?;
    let sizes = args.sizes.resolve(&[256, 512])?;
    let mut sampler: Box<dyn PowerSampler> = match (&args.power_trace, args.power_const) {
        (Some(p), _) => Box::new(ReplaySampler::new(load_trace(p)?).map_err(Error::Config)?),
        (None, Some(w)) => Box::new(ConstantPower::new(w)),
        (None, None) => Box::new(NoSampler),
    };
    let mut timer: Box<dyn Timer> = match args.mock_clock {
        Some(g) if g > 0.0 => Box::new(SyntheticTimer::new(g)),
        Some(_) => return Err(Error::Config("--mock-clock must be positive".into())),
        None => Box::new(WallTimer::new()),
    };
    let records = run_bench(&setup, &sizes, args.reps, args.seed, timer.as_mut(), sampler.as_mut())?;
    match &args.csv {
        Some(p) => write_csv(&records, File::create(p)?)?,
        None => write_csv(&records, io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_grid(s: &str) -> Result<Vec<usize>> {
    if s.contains(':') {
        parse_size_range(s)
    } else {
        parse_sizes(s)
    }
}

fn tune_cmd(args: TuneArgs) -> Result<ExitCode> {
    let (class, builtin) = match args.class {
        ClassArg::Fast => (CoreClass::Fast, EXYNOS5422_A15),
        ClassArg::Slow => (CoreClass::Slow, EXYNOS5422_A7),
    };
    let cluster = load_cluster(args.config.as_deref(), builtin, class)?;
    let spec = SearchSpec {
        m_grid: parse_grid(&args.m_grid)?,
        k_grid: parse_grid(&args.k_grid)?,
        radius: args.radius,
        step_m: args.step_m,
        step_k: args.step_k,
        reps: args.reps,
        r: args.r,
        occupancy: args.occupancy,
    };
    let result = match &args.synthetic {
        Some(s) => {
            let peak = parse_sizes(s)?;
            let [pm, pk] = peak[..] else {
                return Err(Error::Config(format!("--synthetic expects M,K, got {s:?}")));
            };
            tune(
                &spec,
                |m, k| {
                    let (dm, dk) = (m as f64 - pm as f64, (k as f64 - pk as f64) / 8.0);
                    Ok(-(dm * dm + dk * dk))
                },
                &cluster,
            )?
        }
        None => {
            let mut timer: Box<dyn Timer> = match args.mock_clock {
                Some(g) => Box::new(SyntheticTimer::new(g)),
                None => Box::new(WallTimer::new()),
            };
            let eval = timed_evaluator(&cluster, spec.r, spec.reps, args.seed, timer.as_mut());
            tune(&spec, eval, &cluster)?
        }
    };
    if let Some(p) = &args.log {
        result.write_log(io::BufWriter::new(File::create(p)?))?;
    }
    let tuned = result.apply(&cluster);
    let text = Profile { clusters: vec![tuned] }.to_toml();
    match &args.out {
        Some(p) => std::fs::write(p, &text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    eprintln!(
        "best m_c={} k_c={} score={} ({} points scored, {} filtered)",
        result.best.0,
        result.best.1,
        result.best_score,
        result.surface().len(),
        result.log.iter().filter(|e| e.score.is_none()).count()
    );
    Ok(ExitCode::SUCCESS)
}

fn validate(args: ValidateArgs) -> Result<ExitCode> {
    let r = resolve(&args.knobs)?;
    let sizes = args.sizes.resolve(&[7, 64, 129])?;
    let policies: Vec<SchedulingPolicy> = match r.policy {
        Some(p) => vec![p],
        None if r.slow.is_some() => SchedulingPolicy::ALL
            .into_iter()
            .filter(|p| *p != SchedulingPolicy::SingleCluster)
            .collect(),
        None => vec![SchedulingPolicy::SingleCluster],
    };
    let ratios = [r.ratio.unwrap_or(Ratio::integer(3))];
    let fines = match r.fine {
        Some(f) => vec![f],
        None => vec![FineLoops::Loop4, FineLoops::Loop5, FineLoops::Both],
    };
    let combos: Vec<Combo> = match (r.policy, r.coarse) {
        // Both pinned: run exactly what was asked so illegal requests are reported.
        (Some(policy), Some(c)) => fines
            .iter()
            .map(|&fine| Combo {
                policy,
                ratio: ratios[0],
                coarse: c.loop_id(),
                fine,
            })
            .collect(),
        (_, c) => {
            let coarse = match c {
                Some(c) => c.loop_id().into_iter().collect(),
                None => vec![CoarseLoop::Loop1, CoarseLoop::Loop3],
            };
            legal_combos(&policies, &ratios, &coarse, &fines)
        }
    };
    let report = validate_cmd(&r.fast, r.slow.as_ref(), &combos, &sizes, args.seed);
    print!("{}", report.render());
    if report.passed() {
        println!("all {} checks passed", report.rows.len());
        Ok(ExitCode::SUCCESS)
    } else {
        let bad = report.rows.len() - report.rows.iter().filter(|r| matches!(r.outcome, ampgemm::bench::Outcome::Pass(_))).count();
        eprintln!("validation failed: {bad} of {} checks", report.rows.len());
        Ok(ExitCode::FAILURE)
    }
}

fn plan(args: PlanArgs) -> Result<ExitCode> {
    let r = resolve(&args.knobs)?;
    let setup = setup(&r)?;
    let (m, n, k) = (
        args.m.unwrap_or(args.size),
        args.n.unwrap_or(args.size),
        args.k.unwrap_or(args.size),
    );
    let format = match args.format {
        FormatArg::Text => PlanFormat::Text,
        FormatArg::Csv => PlanFormat::Csv,
    };
    print!("{}", plan_cmd(&setup, m, n, k, format)?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match cli.cmd {
        Cmd::Bench(a) => bench(a),
        Cmd::Tune(a) => tune_cmd(a),
        Cmd::Validate(a) => validate(a),
        Cmd::Plan(a) => plan(a),
    };
    out.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
