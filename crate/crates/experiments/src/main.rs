use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dpr_core::format::{parse_constraints, parse_partials, render_partials, render_ranking};
use dpr_core::rng::{derive_seed, stream, Role};
use dpr_core::{
    balance, cigr_search, mbc_rank, mbc_scores, random_assignment, AnnealParams, Assignment, BalanceParams,
    Constraints, SimParams, StartPolicy,
};
use dpr_experiments::boundary::{boundary, FIT_CONFIDENCE};
use dpr_experiments::compare::{balanced_comparison, compare_over_errors};
use dpr_experiments::multistage::{multistage_study, MultistageParams};
use dpr_experiments::output::{write_csv, write_meta};
use dpr_experiments::pipeline::{Round, World};
use dpr_experiments::sweep::DEFAULT_CONFIDENCE;
use dpr_experiments::{sweep, AssignmentMode, Method, Setup, SweepParam, SweepSpec};

#[derive(Parser)]
#[command(name = "dpr", version = dpr_experiments::output::VERSION, about = "Distributed peer review: ranking, assignment and simulation studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one review round and write its truth, assignment and reviews.
    Simulate(SimulateArgs),
    /// Write a regular review assignment.
    Assign(AssignArgs),
    /// Aggregate partial rankings from a file into a global ranking.
    Aggregate(AggregateArgs),
    /// Sweep one simulation parameter over a grid.
    Sweep(SweepArgs),
    /// Paired CIGR vs MBC comparison at several review-error levels.
    Compare(CompareArgs),
    /// Review-error level where CIGR stops beating MBC, against true-score spread.
    Boundary(BoundaryArgs),
    /// Both methods under random and balanced assignment.
    BalancedCompare(BalancedArgs),
    /// Multistage rounds against a single-stage round with the same review load.
    Multistage(MultistageArgs),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replicates per grid point (each subcommand has its own default).
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Clone)]
struct SimArgs {
    #[arg(long, default_value_t = 40)]
    n_p: usize,
    #[arg(long, default_value_t = 7)]
    n_r: usize,
    #[arg(long, default_value_t = 20.0)]
    sd_s: f64,
    #[arg(long, default_value_t = 10.0)]
    br_sd: f64,
    #[arg(long, default_value_t = 10.0)]
    er_df: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Start {
    Mbc,
    Random,
}

#[derive(Args, Clone)]
struct AnnealArgs {
    #[arg(long, default_value_t = 1.0)]
    t0: f64,
    #[arg(long, default_value_t = 0.999)]
    beta: f64,
    #[arg(long, default_value_t = 1)]
    epsilon: u64,
    #[arg(long, default_value_t = 3.0)]
    rho: f64,
    #[arg(long, default_value_t = 30)]
    max_restarts: u32,
    /// Defaults to 50000 per proposal.
    #[arg(long)]
    max_iters: Option<u64>,
    #[arg(long, value_enum, default_value_t = Start::Mbc)]
    start: Start,
}

#[derive(Args, Clone)]
struct BalanceArgs {
    #[arg(long, default_value_t = 0.0005)]
    balance_t0: f64,
    #[arg(long, default_value_t = 0.99995)]
    balance_beta: f64,
    /// Defaults to 200 * n * m.
    #[arg(long)]
    balance_iters: Option<u64>,
}

#[derive(Args, Clone)]
struct Algo {
    #[command(flatten)]
    anneal: AnnealArgs,
    #[command(flatten)]
    balance: BalanceArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    algo: Algo,
    #[arg(long)]
    balanced: bool,
}

#[derive(Args)]
struct AssignArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    balanced: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lines `reviewer: proposal proposal ...` of forbidden pairs.
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    balance: BalanceArgs,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Cigr)]
    method: MethodArg,
    /// Lines `reviewer: a b (c d) e`, best first, parentheses for ties.
    #[arg(long)]
    input: PathBuf,
    /// Number of proposals; defaults to one more than the largest id.
    #[arg(long)]
    n_p: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[command(flatten)]
    anneal: AnnealArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Mbc,
    Cigr,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Mbc => Method::Mbc,
            MethodArg::Cigr => Method::Cigr,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Random,
    Balanced,
}

impl From<ModeArg> for AssignmentMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Random => AssignmentMode::Random,
            ModeArg::Balanced => AssignmentMode::Balanced,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    algo: Algo,
    /// One of n_p, n_r, sd_s, br_sd, er_df.
    #[arg(long)]
    param: SweepParam,
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::Mbc, MethodArg::Cigr])]
    methods: Vec<MethodArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ModeArg::Random])]
    modes: Vec<ModeArg>,
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE)]
    confidence: f64,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    algo: Algo,
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 10.0, 15.0, 20.0])]
    er_grid: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Random)]
    mode: ModeArg,
}

#[derive(Args)]
struct BoundaryArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    algo: Algo,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0])]
    sd_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = (1..=20).map(f64::from).collect::<Vec<_>>())]
    er_grid: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Random)]
    mode: ModeArg,
}

#[derive(Args)]
struct BalancedArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    algo: Algo,
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 10.0, 15.0, 20.0])]
    er_grid: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE)]
    confidence: f64,
}

#[derive(Args)]
struct MultistageArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    algo: Algo,
    #[arg(long, default_value_t = 2)]
    stages: usize,
    #[arg(long, default_value_t = 0.5)]
    cut_fraction: f64,
    #[arg(long, default_value_t = 10)]
    band_width: usize,
    /// Reviews per reviewer in each stage, e.g. `4,3`; defaults to n_r every stage.
    #[arg(long, value_delimiter = ',')]
    reviews_per_stage: Vec<usize>,
    /// Probability that a pick comes from an adjacent band.
    #[arg(long, default_value_t = 0.25)]
    jitter: f64,
    /// Rank each stage on its own reviews only.
    #[arg(long)]
    fresh_reviews: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::Random)]
    mode: ModeArg,
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE)]
    confidence: f64,
}

impl SimArgs {
    fn params(&self, seed: u64) -> Result<SimParams> {
        let p = SimParams {
            n_p: self.n_p,
            n_r: self.n_r,
            sd_s: self.sd_s,
            br_sd: self.br_sd,
            er_df: self.er_df,
            seed,
        };
        p.validate()?;
        Ok(p)
    }
}

impl AnnealArgs {
    fn params(&self, seed: u64) -> Result<AnnealParams> {
        let a = AnnealParams {
            t0: self.t0,
            beta: self.beta,
            epsilon: self.epsilon,
            rho: self.rho,
            max_restarts: self.max_restarts,
            max_iters: self.max_iters,
            seed,
            start: match self.start {
                Start::Mbc => StartPolicy::Mbc,
                Start::Random => StartPolicy::Random,
            },
        };
        a.validate()?;
        Ok(a)
    }
}

impl BalanceArgs {
    fn params(&self, seed: u64) -> BalanceParams {
        BalanceParams {
            t0: self.balance_t0,
            beta: self.balance_beta,
            max_iters: self.balance_iters,
            seed,
        }
    }
}

impl Algo {
    fn setup(&self) -> Result<Setup> {
        Ok(Setup {
            anneal: self.anneal.params(0)?,
            balance: self.balance.params(0),
        })
    }
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn list<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

struct Meta(Vec<(String, String)>);

impl Meta {
    fn new(command: &str) -> Self {
        Meta(vec![("command".into(), command.into())])
    }

    fn add(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.push((key.into(), value.to_string()));
        self
    }

    fn sim(&mut self, p: &SimParams, replicates: usize) -> &mut Self {
        self.add("seed", p.seed)
            .add("replicates", replicates)
            .add("n_p", p.n_p)
            .add("n_r", p.n_r)
            .add("sd_s", p.sd_s)
            .add("br_sd", p.br_sd)
            .add("er_df", p.er_df)
    }

    fn setup(&mut self, s: &Setup) -> &mut Self {
        let a = &s.anneal;
        let b = &s.balance;
        self.add("anneal_t0", a.t0)
            .add("anneal_beta", a.beta)
            .add("anneal_epsilon", a.epsilon)
            .add("anneal_rho", a.rho)
            .add("anneal_max_restarts", a.max_restarts)
            .add("anneal_max_iters", a.max_iters.map_or("auto".to_string(), |x| x.to_string()))
            .add("anneal_start", format!("{:?}", a.start).to_lowercase())
            .add("balance_t0", b.t0)
            .add("balance_beta", b.beta)
            .add("balance_iters", b.max_iters.map_or("auto".to_string(), |x| x.to_string()))
    }

    fn write(&self, dir: &Path) -> Result<()> {
        write_meta(dir, &self.0)
    }
}

#[derive(Serialize)]
struct ScoreRow {
    proposal_id: usize,
    true_score: f64,
    bias: f64,
    error_sd: f64,
}

fn write_assignment(path: Option<&Path>, a: &Assignment) -> Result<()> {
    let m = a.reviews().first().map_or(0, Vec::len);
    let sink: Box<dyn std::io::Write> = match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)
        }
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["reviewer_id".to_string()];
    header.extend((1..=m).map(|k| format!("proposal_{k}")));
    w.write_record(&header)?;
    for (r, set) in a.reviews().iter().enumerate() {
        let mut rec = vec![r.to_string()];
        rec.extend(set.iter().map(ToString::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let p = args.sim.params(args.common.seed)?;
    let setup = args.algo.setup()?;
    let mode = if args.balanced { AssignmentMode::Balanced } else { AssignmentMode::Random };
    let world = World::generate(&p, 0);
    let round = Round::generate(&p, &world, mode, 0, &setup)?;
    let out = &args.common.out;
    fs::create_dir_all(out)?;
    fs::write(out.join("truth.txt"), render_ranking(&world.truth))?;
    fs::write(out.join("partials.txt"), render_partials(&round.reviews))?;
    let rows: Vec<ScoreRow> = world
        .scores
        .score
        .iter()
        .zip(&world.profiles)
        .enumerate()
        .map(|(i, (&s, r))| ScoreRow { proposal_id: i, true_score: s, bias: r.mu, error_sd: r.sigma })
        .collect();
    write_csv(&out.join("scores.csv"), &rows)?;
    write_assignment(Some(&out.join("assignment.csv")), &round.assignment)?;
    Meta::new("simulate").sim(&p, 1).add("mode", mode).setup(&setup).write(out)
}

fn assign(args: AssignArgs) -> Result<()> {
    let constraints = match &args.constraints {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Constraints::from_entries(args.n, &parse_constraints(&text)?)?
        }
        None => Constraints::self_review(args.n),
    };
    let a = random_assignment(args.n, args.m, &constraints, &mut stream(args.seed, 0, Role::Assignment))?;
    let a = if args.balanced {
        let params = BalanceParams {
            seed: derive_seed(args.seed, 0, Role::Balance),
            ..args.balance.params(0)
        };
        let outcome = balance(&a, &constraints, &params)?;
        if let Some(w) = outcome.warning {
            eprintln!("warning: {w:?}");
        }
        eprintln!("entropy {:.6} -> {:.6}", outcome.initial_entropy, outcome.entropy);
        outcome.assignment
    } else {
        a
    };
    write_assignment(args.out.as_deref(), &a)
}

#[derive(Serialize)]
struct RankRow {
    proposal_id: usize,
    score: f64,
    rank: usize,
}

fn aggregate(args: AggregateArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let partials = parse_partials(&text)?;
    let n_p = match args.n_p {
        Some(n) => n,
        None => partials.iter().filter_map(|r| r.max_id()).max().map_or(0, |m| m + 1),
    };
    let out = &args.out;
    let (scores, ranking) = match Method::from(args.method) {
        Method::Mbc => {
            let s = mbc_scores::<f64>(&partials, n_p)?;
            let r = mbc_rank(&s);
            (s, r)
        }
        Method::Cigr => {
            let res = cigr_search(&partials, n_p, &args.anneal.params(args.seed)?)?;
            let meta = format!(
                "best_cost = {}\ninitial_cost = {}\nrestarts = {}\niterations = {}\nnear_optimal_set = {}\n",
                res.best_cost,
                res.initial_cost,
                res.restarts_used,
                res.iterations_used,
                res.near_optimal_set.len()
            );
            fs::create_dir_all(out)?;
            fs::write(out.join("cigr_meta.txt"), meta)?;
            (res.scores, res.ranking)
        }
    };
    let rows: Vec<RankRow> = ranking
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &p)| RankRow { proposal_id: p, score: scores.score[p], rank: i + 1 })
        .collect();
    write_csv(&out.join("ranking.csv"), &rows)
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    init_threads(args.common.threads)?;
    let p = args.sim.params(args.common.seed)?;
    let setup = args.algo.setup()?;
    let replicates = args.common.replicates.unwrap_or(1000);
    let spec = SweepSpec {
        param: args.param,
        grid: args.grid,
        base: p.clone(),
        methods: args.methods.into_iter().map(Method::from).collect(),
        modes: args.modes.into_iter().map(AssignmentMode::from).collect(),
        replicates,
        confidence: args.confidence,
    };
    let rows = sweep(&spec, &setup)?;
    let out = &args.common.out;
    write_csv(&out.join("sweep.csv"), &rows)?;
    Meta::new("sweep")
        .sim(&p, replicates)
        .add("param", spec.param)
        .add("grid", list(&spec.grid))
        .add("methods", list(&spec.methods))
        .add("modes", list(&spec.modes))
        .add("confidence", spec.confidence)
        .setup(&setup)
        .write(out)
}

fn compare(args: CompareArgs) -> Result<()> {
    init_threads(args.common.threads)?;
    let p = args.sim.params(args.common.seed)?;
    let setup = args.algo.setup()?;
    let replicates = args.common.replicates.unwrap_or(200);
    let mode = AssignmentMode::from(args.mode);
    let rows = compare_over_errors(&p, &args.er_grid, mode, replicates, &setup)?;
    let out = &args.common.out;
    write_csv(&out.join("compare.csv"), &rows)?;
    Meta::new("compare")
        .sim(&p, replicates)
        .add("er_grid", list(&args.er_grid))
        .add("mode", mode)
        .add("test", "paired two-sided t, cigr minus mbc")
        .setup(&setup)
        .write(out)
}

fn run_boundary(args: BoundaryArgs) -> Result<()> {
    init_threads(args.common.threads)?;
    let p = args.sim.params(args.common.seed)?;
    let setup = args.algo.setup()?;
    let replicates = args.common.replicates.unwrap_or(100);
    let mode = AssignmentMode::from(args.mode);
    let b = boundary(&p, &args.sd_grid, &args.er_grid, mode, replicates, &setup)?;
    let out = &args.common.out;
    write_csv(&out.join("boundary_diffs.csv"), &b.diffs)?;
    write_csv(&out.join("boundary_crossings.csv"), &b.crossings)?;
    write_csv(&out.join("boundary_fit.csv"), &b.fit_row(FIT_CONFIDENCE).into_iter().collect::<Vec<_>>())?;
    write_csv(&out.join("boundary_band.csv"), &b.band_rows(&args.sd_grid, FIT_CONFIDENCE))?;
    if b.fit.is_none() {
        eprintln!("warning: fewer than 2 uncensored crossings, no line fitted");
    }
    Meta::new("boundary")
        .sim(&p, replicates)
        .add("sd_grid", list(&args.sd_grid))
        .add("er_grid", list(&args.er_grid))
        .add("mode", mode)
        .add("fit_confidence", FIT_CONFIDENCE)
        .setup(&setup)
        .write(out)
}

fn balanced(args: BalancedArgs) -> Result<()> {
    init_threads(args.common.threads)?;
    let p = args.sim.params(args.common.seed)?;
    let setup = args.algo.setup()?;
    let replicates = args.common.replicates.unwrap_or(1000);
    let b = balanced_comparison(&p, &args.er_grid, replicates, args.confidence, &setup)?;
    let out = &args.common.out;
    write_csv(&out.join("balanced.csv"), &b.rows)?;
    write_csv(&out.join("balanced_gains.csv"), &b.gains)?;
    Meta::new("balanced-compare")
        .sim(&p, replicates)
        .add("er_grid", list(&args.er_grid))
        .add("confidence", args.confidence)
        .add("test", "paired two-sided t, balanced minus random")
        .setup(&setup)
        .write(out)
}

fn multistage(args: MultistageArgs) -> Result<()> {
    init_threads(args.common.threads)?;
    let p = args.sim.params(args.common.seed)?;
    let setup = args.algo.setup()?;
    let replicates = args.common.replicates.unwrap_or(1000);
    let mp = MultistageParams {
        stages: args.stages,
        cut_fraction: args.cut_fraction,
        band_width: args.band_width,
        reviews_per_stage: args.reviews_per_stage,
        jitter: args.jitter,
        carry_reviews: !args.fresh_reviews,
        mode: args.mode.into(),
    };
    let study = multistage_study(&p, &mp, replicates, &setup)?;
    let out = &args.common.out;
    write_csv(&out.join("multistage.csv"), &study.rows(args.confidence))?;
    Meta::new("multistage")
        .sim(&p, replicates)
        .add("stages", mp.stages)
        .add("cut_fraction", mp.cut_fraction)
        .add("band_width", mp.band_width)
        .add("reviews_per_stage", list(&mp.loads(&p)))
        .add("jitter", mp.jitter)
        .add("first_stage_mode", mp.mode)
        .add("eliminated_pis_review", true)
        .add(
            "stage_reviews",
            if mp.carry_reviews { "cumulative, restricted to survivors" } else { "latest stage only" },
        )
        .add("band_picks", "least-reviewed first, ties at random")
        .add("baseline", format!("single stage cigr, n_r = {}", mp.loads(&p).iter().sum::<usize>()))
        .add("confidence", args.confidence)
        .setup(&setup)
        .write(out)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Assign(a) => assign(a),
        Command::Aggregate(a) => aggregate(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Compare(a) => compare(a),
        Command::Boundary(a) => run_boundary(a),
        Command::BalancedCompare(a) => balanced(a),
        Command::Multistage(a) => multistage(a),
    }
}
