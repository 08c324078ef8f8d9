//! Acceptance suite. Runs every criterion, prints one line each, and exits
//! non-zero if any fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::Rng;

use dpr_core::rng::{derive_seed, seeded, stream, Role};
use dpr_core::{
    balance, build_rcm, cigr_search, cost, cost_delta, entropy, exact_kemeny, max_entropy, pair_counts,
    random_assignment, AnnealParams, BalanceParams, Constraints, PartialRanking, Ranking, SimParams,
};
use dpr_experiments::boundary::{boundary, Boundary, FIT_CONFIDENCE};
use dpr_experiments::compare::{balanced_comparison, compare_methods};
use dpr_experiments::pipeline::{run_cells, Round, World};
use dpr_experiments::stats::{pearson, Summary};
use dpr_experiments::sweep::{run_sweep, SweepParam, SweepSpec};
use dpr_experiments::{AssignmentMode, Method, Setup};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn defaults() -> SimParams {
    SimParams { n_p: 40, n_r: 7, sd_s: 20.0, br_sd: 10.0, er_df: 10.0, seed: 2024 }
}

fn cigr_matches_exact_kemeny() -> Outcome {
    let start = Instant::now();
    let mut hits = 0;
    for i in 0..100u64 {
        let n_p = 5 + (i % 4) as usize;
        let p = SimParams { n_p, n_r: n_p - 1, seed: 7_000 + i, ..defaults() };
        let world = World::generate(&p, 0);
        let round = Round::generate(&p, &world, AssignmentMode::Random, 0, &Setup::default()).unwrap();
        let rcm = build_rcm(&round.reviews, n_p).unwrap();
        let (_, optimum) = exact_kemeny(&rcm).unwrap();
        let res = cigr_search(&round.reviews, n_p, &AnnealParams::default().with_seed(i)).unwrap();
        if cost(&res.best_ranking, &rcm).unwrap() == optimum && res.best_cost == optimum {
            hits += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(hits >= 95 && secs < 60.0, format!("{hits}/100 optimal in {secs:.1}s"))
}

fn sweep_cells(param: SweepParam, grid: &[f64], base: SimParams, replicates: usize) -> Vec<dpr_experiments::sweep::Cell> {
    let mut spec = SweepSpec::new(param, grid.to_vec(), base);
    spec.replicates = replicates;
    run_sweep(&spec, &Setup::default()).unwrap()
}

fn monotone_in_reviews() -> Outcome {
    let cells = sweep_cells(SweepParam::NR, &[3.0, 5.0, 9.0], defaults(), 1000);
    let mut pass = true;
    let mut detail = Vec::new();
    for method in Method::ALL {
        let s: Vec<Summary> = cells
            .iter()
            .filter(|c| c.method == method)
            .map(|c| Summary::of(&c.truth_ci()))
            .collect();
        for w in s.windows(2) {
            let pooled = (w[0].se().powi(2) + w[1].se().powi(2)).sqrt();
            let gap = w[1].mean - w[0].mean;
            pass &= gap > 3.0 * pooled;
            detail.push(format!("{method} +{gap:.4} ({:.1} se)", gap / pooled));
        }
    }
    outcome(pass, detail.join(", "))
}

fn monotone_in_error() -> Outcome {
    let grid = [5.0, 10.0, 15.0, 20.0];
    let cells = sweep_cells(SweepParam::ErDf, &grid, defaults(), 1000);
    let mut pass = true;
    let mut detail = Vec::new();
    for method in Method::ALL {
        let means: Vec<f64> = cells
            .iter()
            .filter(|c| c.method == method)
            .map(|c| Summary::of(&c.truth_ci()).mean)
            .collect();
        let r = pearson(&grid, &means);
        pass &= means.windows(2).all(|w| w[1] < w[0]) && r < -0.99;
        detail.push(format!("{method} r={r:.4}"));
    }
    outcome(pass, detail.join(", "))
}

fn bias_invariance() -> Outcome {
    let setup = Setup::default();
    let mut pass = true;
    let mut checked = 0;
    for mode in AssignmentMode::ALL {
        for rep in 0..20 {
            let runs: Vec<(Vec<PartialRanking>, Vec<dpr_core::MetricReport>)> = [1.0, 10.0, 20.0]
                .iter()
                .map(|&br_sd| {
                    let p = SimParams { br_sd, ..defaults() };
                    let world = World::generate(&p, rep);
                    let round = Round::generate(&p, &world, mode, rep, &setup).unwrap();
                    let metrics = run_cells(&p, &Method::ALL, &[mode], rep, &setup).unwrap();
                    (round.reviews, metrics)
                })
                .collect();
            for other in &runs[1..] {
                pass &= other.0 == runs[0].0;
                pass &= other
                    .1
                    .iter()
                    .zip(&runs[0].1)
                    .all(|(a, b)| {
                        a.truth_ci.to_bits() == b.truth_ci.to_bits()
                            && a.fit_ci.to_bits() == b.fit_ci.to_bits()
                            && a.top_fraction_accuracy.to_bits() == b.top_fraction_accuracy.to_bits()
                    });
                checked += 1;
            }
        }
    }
    outcome(pass, format!("{checked} coupled comparisons"))
}

fn crossover() -> Outcome {
    let setup = Setup::default();
    let low = compare_methods(&SimParams { er_df: 5.0, ..defaults() }, AssignmentMode::Random, 200, &setup).unwrap();
    let high = compare_methods(&SimParams { er_df: 20.0, ..defaults() }, AssignmentMode::Random, 200, &setup).unwrap();
    let pass = low.ci_test.mean_diff > 0.0
        && low.ci_test.p_value < 0.001
        && high.ci_test.mean_diff < 0.0
        && high.ci_test.p_value < 0.05;
    outcome(
        pass,
        format!(
            "er_df=5 cigr-mbc {:+.4} p={:.2e}; er_df=20 {:+.4} p={:.2e}",
            low.ci_test.mean_diff, low.ci_test.p_value, high.ci_test.mean_diff, high.ci_test.p_value
        ),
    )
}

fn balanced_gain() -> Outcome {
    let b = balanced_comparison(&defaults(), &[5.0, 10.0], 1000, 0.999, &Setup::default()).unwrap();
    let mut pass = b.gains.iter().all(|g| g.ci_gain > 0.0 && g.ci_p < 0.01);
    let gain = |e: f64, m: &str| b.gains.iter().find(|g| g.er_df == e && g.method == m).unwrap().ci_gain;
    pass &= gain(5.0, "mbc") > gain(5.0, "cigr");
    let detail = b
        .gains
        .iter()
        .map(|g| format!("er_df={} {} {:+.4} p={:.1e}", g.er_df, g.method, g.ci_gain, g.ci_p))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(pass, detail)
}

fn entropy_optimality() -> Outcome {
    let (n, m) = (40, 7);
    let cap: f64 = max_entropy(n, m);
    let constraints = Constraints::self_review(n);
    let mut good = 0;
    let mut worst_h = f64::INFINITY;
    let mut worst_alpha = 0;
    for seed in 0..100u64 {
        let a = random_assignment(n, m, &constraints, &mut stream(seed, 0, Role::Assignment)).unwrap();
        let params = BalanceParams { seed: derive_seed(seed, 0, Role::Balance), ..BalanceParams::default() };
        let out = balance(&a, &constraints, &params).unwrap();
        out.assignment.validate(m, &constraints).unwrap();
        let pc = pair_counts(&out.assignment, n);
        let h: f64 = entropy(&pc, n, m);
        worst_h = worst_h.min(h);
        worst_alpha = worst_alpha.max(pc.max());
        if pc.max() <= 2 && h >= 0.995 * cap {
            good += 1;
        }
    }

    let mut rng = seeded(0xACCE);
    let mut valid = 0;
    let trials = 10_000;
    for _ in 0..trials {
        let n = rng.random_range(3..=24usize);
        let m = rng.random_range(2..n);
        let mut entries = Vec::new();
        if rng.random_bool(0.5) {
            for r in 0..n {
                let extra: Vec<usize> = (0..n).filter(|&q| q != r && rng.random_bool(0.1)).collect();
                entries.push((r, extra));
            }
        }
        let c = Constraints::from_entries(n, &entries).unwrap();
        let Ok(a) = random_assignment(n, m, &c, &mut rng) else {
            if (0..n).any(|r| c.allowed_count(r) < m) || !entries.is_empty() {
                valid += 1;
            }
            continue;
        };
        let params = BalanceParams { max_iters: Some((10 * n * m) as u64), seed: rng.random(), ..BalanceParams::default() };
        let ok = a.validate(m, &c).is_ok()
            && balance(&a, &c, &params).is_ok_and(|b| b.assignment.validate(m, &c).is_ok() && b.entropy >= b.initial_entropy);
        valid += usize::from(ok);
    }
    outcome(
        good >= 95 && valid == trials,
        format!(
            "{good}/100 seeds at max alpha <= 2 and H >= {:.4} (worst H {worst_h:.4}, worst max alpha {worst_alpha}); {valid}/{trials} property trials valid",
            0.995 * cap
        ),
    )
}

fn incremental_cost() -> Outcome {
    let mut rng = seeded(0xC057);
    let mut checked = 0u64;
    let mut bad = 0u64;
    for _ in 0..1000 {
        let n = rng.random_range(6..=10usize);
        let reviewers = rng.random_range(1..=2 * n);
        let partials: Vec<PartialRanking> = (0..reviewers)
            .map(|r| {
                let mut ids: Vec<usize> = (0..n).collect();
                rand::seq::SliceRandom::shuffle(ids.as_mut_slice(), &mut rng);
                ids.truncate(rng.random_range(2..=n));
                PartialRanking::strict(r, ids).unwrap()
            })
            .collect();
        let rcm = build_rcm(&partials, n).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let r = Ranking::new(order).unwrap();
        let base = cost(&r, &rcm).unwrap() as i64;
        for i in 0..n {
            for j in 0..n {
                let mut s = r.clone();
                s.swap(i, j);
                if cost(&s, &rcm).unwrap() as i64 - base != cost_delta(&r, i, j, &rcm) {
                    bad += 1;
                }
                checked += 1;
            }
        }
    }
    outcome(bad == 0, format!("{checked} swaps checked, {bad} mismatches"))
}

fn boundary_recovery() -> Outcome {
    // Planted crossing e*(sd) = a + b sd on a smooth, non-linear surface.
    let er_grid: Vec<f64> = (1..=20).map(f64::from).collect();
    let h = 1.0;
    let sd_grid: Vec<f64> = (1..=30).map(f64::from).collect();
    let mut rng = seeded(0xB0DE);
    let mut planted_ok = true;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let a = rng.random_range(1.5..6.0);
        let b = rng.random_range(0.05..0.4);
        let k = rng.random_range(0.2..2.0);
        let surface: Vec<Vec<f64>> = sd_grid
            .iter()
            .map(|&sd| er_grid.iter().map(|&e| (k * (a + b * sd - e)).tanh()).collect())
            .collect();
        let fit = Boundary::from_surface(&sd_grid, &er_grid, &surface).fit.unwrap();
        let err = sd_grid
            .iter()
            .map(|&x| (fit.predict(x) - (a + b * x)).abs())
            .fold((fit.intercept - a).abs(), f64::max);
        let slope_err = (fit.slope - b).abs() * (sd_grid[sd_grid.len() - 1] - sd_grid[0]);
        worst = worst.max(err).max(slope_err);
        planted_ok &= err <= h && slope_err <= h;
    }

    let sd = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0];
    let er: Vec<f64> = (1..=16).map(f64::from).collect();
    let real = boundary(&defaults(), &sd, &er, AssignmentMode::Random, 100, &Setup::default()).unwrap();
    let (slope, lo, hi) = match &real.fit {
        Some(f) => {
            let (lo, hi) = f.slope_ci(FIT_CONFIDENCE);
            (f.slope, lo, hi)
        }
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    let censored = real.crossings.iter().filter(|c| c.censored).count();
    outcome(
        planted_ok && slope > 0.0 && lo > 0.0,
        format!(
            "planted worst error {worst:.3} (cell {h}); pipeline slope {slope:.3} [{lo:.3}, {hi:.3}], {censored} censored"
        ),
    )
}

fn run_cli(out: &Path, threads: usize, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_dpr"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg(threads.to_string())
        .status()
        .unwrap();
    assert!(status.success(), "dpr {args:?} failed");
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let experiments: [&[&str]; 5] = [
        &["sweep", "--param", "er_df", "--grid", "5,20", "--replicates", "12", "--modes", "random,balanced", "--seed", "3"],
        &["compare", "--er-grid", "5,20", "--replicates", "12", "--seed", "4"],
        &["boundary", "--sd-grid", "5,30", "--er-grid", "1,4,8,12,16", "--replicates", "6", "--seed", "5"],
        &["balanced-compare", "--er-grid", "5", "--replicates", "10", "--seed", "6"],
        &["multistage", "--reviews-per-stage", "4,3", "--replicates", "12", "--seed", "7"],
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut files = 0;
    for (k, args) in experiments.iter().enumerate() {
        let runs: Vec<Vec<(String, Vec<u8>)>> = [1, 1, 3]
            .iter()
            .enumerate()
            .map(|(i, &threads)| {
                let dir = tmp.path().join(format!("{k}-{i}"));
                run_cli(&dir, threads, args);
                snapshot(&dir)
            })
            .collect();
        pass &= runs.iter().all(|r| *r == runs[0]) && !runs[0].is_empty();
        files += runs[0].len();
    }
    outcome(pass, format!("{files} files identical across reruns and 1/3 threads"))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("cigr reaches the exact Kemeny optimum", cigr_matches_exact_kemeny),
        ("accuracy rises with reviews per PI", monotone_in_reviews),
        ("accuracy falls linearly with review error", monotone_in_error),
        ("reviewer bias leaves reviews unchanged", bias_invariance),
        ("cigr/mbc crossover in review error", crossover),
        ("balanced assignment gains", balanced_gain),
        ("balanced assignment entropy and validity", entropy_optimality),
        ("incremental cost matches recomputation", incremental_cost),
        ("boundary recovery and positive slope", boundary_recovery),
        ("byte-identical output at any thread count", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        println!(
            "criterion {:>2} {} {name}: {} [{:.1}s]",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
