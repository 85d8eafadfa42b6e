//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Exits non-zero on any FAIL only when `FRAGCOV_ACCEPTANCE_STRICT` is set, so
//! the regular test run records the report without gating on the Monte Carlo
//! reproduction cells.

use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fragcov::complete::{
    exact_band_completion, gradient, objective, rank_sweep, solve_fixed_rank, SolveConfig, SupportPolicy,
};
use fragcov::harness::tables::{cells, TableOverrides};
use fragcov::harness::{run_cell, run_table, ExperimentConfig, TableId};
use fragcov::kernels::{
    counterexample_bump_pair, esseen_pair, evaluate_on_grid, scenario_kernel, Eigenfunction, Kernel, MercerKernel, Scenario,
};
use fragcov::patch::PatchedCovariance;
use fragcov::rng::seeded;
use fragcov::{band_mask, relative_error, BandMask, Error, Grid, LowRankFactor, SymMatrix};

type Outcome = (bool, String);

const K: usize = 50;

fn exact_bands() -> Vec<(String, SymMatrix<f64>, PatchedCovariance<f64>, BandMask, usize)> {
    let mask = band_mask(K, 0.5, false).unwrap();
    let mut out = Vec::new();
    for sc in [Scenario::A, Scenario::B] {
        for q in 1..=3 {
            let kern = scenario_kernel(sc, q).unwrap();
            for g in 0..20u64 {
                let grid = Grid::perturbed(K, &mut seeded(1000 + g));
                let truth: SymMatrix<f64> = evaluate_on_grid(&kern, &grid);
                let target = PatchedCovariance::banded_from(&truth, &mask).unwrap();
                out.push((format!("{sc} q={q} grid {g}"), truth, target, mask.clone(), q));
            }
        }
    }
    out
}

fn c1_oracle() -> Outcome {
    let bands = exact_bands();
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for (name, truth, target, mask, q) in &bands {
        match exact_band_completion(&target.matrix, mask, *q) {
            Ok(full) => worst = worst.max(relative_error(&full, truth).unwrap()),
            Err(e) => return (false, format!("{name}: {e}")),
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    (worst < 1e-8 && secs < 10.0, format!("{} bands, worst relative error {worst:.2e}, {secs:.2}s", bands.len()))
}

fn c2_solver_vs_oracle() -> Outcome {
    let mut worst = (0.0f64, String::new());
    for (name, _, target, mask, q) in exact_bands() {
        let oracle = exact_band_completion(&target.matrix, &mask, q).unwrap();
        let sol = solve_fixed_rank(&target, &mask, q, &SolveConfig::fixed_rank(q)).unwrap();
        let re = 100.0 * relative_error(&sol.factor.gram(), &oracle).unwrap();
        if re > worst.0 {
            worst = (re, name);
        }
    }
    (worst.0 < 0.1, format!("worst re {:.2e}% ({})", worst.0, worst.1))
}

fn c3_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let k = rng.random_range(4..=30);
        let i = rng.random_range(1..=5);
        let delta = rng.random_range(0.3..0.9);
        let noisy = rng.random_bool(0.3);
        let Ok(mask) = band_mask(k, delta, noisy) else { continue };
        let t = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
        let target = PatchedCovariance::from_matrix(SymMatrix::from_dmatrix_symmetrized(&t + t.transpose()), 1, noisy);
        let g = DMatrix::from_fn(k, i, |_, _| rng.random_range(-1.0..1.0));
        let an: DMatrix<f64> = gradient(&LowRankFactor::new(g.clone()), &target, &mask).unwrap();
        let h = 1e-6;
        let mut fd = DMatrix::<f64>::zeros(k, i);
        for idx in 0..k * i {
            let (mut gp, mut gm) = (g.clone(), g.clone());
            gp[idx] += h;
            gm[idx] -= h;
            let fp = objective(&LowRankFactor::new(gp), &target, &mask).unwrap();
            let fm = objective(&LowRankFactor::new(gm), &target, &mask).unwrap();
            fd[idx] = (fp - fm) / (2.0 * h);
        }
        worst = worst.max((&an - &fd).norm() / an.norm().max(1e-300));
    }
    (worst < 1e-5, format!("50 triples, worst relative error {worst:.2e}"))
}

/// Runs table cells and compares medians with reference values.
fn table_check(table: TableId, picks: &[(usize, f64)], reps: usize, tol: f64) -> Outcome {
    let o = TableOverrides { seed: 7, replications: Some(reps), cells: picks.iter().map(|p| p.0).collect(), solver: None };
    let res = match run_table(table, &o) {
        Ok(r) => r,
        Err(e) => return (false, e.to_string()),
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for ((cell, r), &(_, want)) in res.cells.iter().zip(picks) {
        let med = r.summary.map_or(f64::NAN, |s| s.median);
        let hit = (med - want).abs() <= tol;
        ok &= hit;
        parts.push(format!("{}/{} {med:.1} vs {want}{}", cell.row, cell.col, if hit { "" } else { " !" }));
    }
    (ok, parts.join("; "))
}

fn c4_table2() -> Outcome {
    let picks = [
        (1, 16.0),
        (3, 34.0),
        (7, 14.0),
        (9, 16.0),
        (13, 9.0),
        (15, 12.0),
        (16, 15.0),
        (18, 20.0),
        (22, 13.0),
        (24, 15.0),
        (28, 9.0),
        (30, 10.0),
    ];
    table_check(TableId::T2, &picks, 100, 5.0)
}

fn c5_table4() -> Outcome {
    table_check(TableId::T4, &[(1, 33.0), (2, 22.0), (17, 16.0), (18, 11.0)], 100, 6.0)
}

fn c6_tables56() -> Outcome {
    let t5 = &cells(TableId::T5, 7)[4];
    let t6 = &cells(TableId::T6, 7)[40];
    assert_eq!((t5.config.n, t5.config.noise_sd, t5.config.delta1, t5.col.as_str()), (200, 0.0, 0.5, "rank 2"));
    assert_eq!((t6.config.n, t6.config.noise_sd, t6.config.delta1, t6.col.as_str()), (400, 1.0, 0.5, "rank 2"));
    let (a, da) = table_check(TableId::T5, &[(5, 18.0)], 100, 6.0);
    let (b, db) = table_check(TableId::T6, &[(41, 21.0)], 100, 6.0);
    (a && b, format!("type 1: {da}; type 2: {db}"))
}

fn c7_scree() -> Outcome {
    let balanced = MercerKernel::new(
        vec![1.0; 3],
        vec![Eigenfunction::Constant(1.0), Eigenfunction::Sine { k: 1 }, Eigenfunction::Sine { k: 2 }],
    )
    .unwrap();
    let kernels: Vec<(String, Box<dyn Kernel>, usize)> = vec![
        ("A q=1".into(), Box::new(scenario_kernel(Scenario::A, 1).unwrap()), 1),
        ("A q=2".into(), Box::new(scenario_kernel(Scenario::A, 2).unwrap()), 2),
        ("balanced q=3".into(), Box::new(balanced), 3),
    ];
    let mask = band_mask(K, 0.5, false).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, kern, q) in kernels {
        let truth: SymMatrix<f64> = evaluate_on_grid(kern.as_ref(), &Grid::perturbed(K, &mut seeded(77)));
        let target = PatchedCovariance::banded_from(&truth, &mask).unwrap();
        let cfg = SolveConfig { max_rank_sweep: Some(q + 3), support: SupportPolicy::ZeroFill, ..Default::default() };
        let sweep = rank_sweep(&target, &mask, &cfg).unwrap();
        let nf = &sweep.normalized_fits;
        let before = nf[..q - 1].iter().all(|&f| f > 0.01);
        let at = nf[q - 1] < 1e-6;
        let mono = sweep.fits.windows(2).all(|w| w[1] <= w[0] + 1e-10);
        ok &= before && at && mono;
        let shown: Vec<String> = nf.iter().map(|f| format!("{f:.1e}")).collect();
        parts.push(format!("{name}: [{}]", shown.join(", ")));
    }
    (ok, parts.join("; "))
}

fn c8_consistency() -> Outcome {
    let med = |n: usize| {
        let cfg = ExperimentConfig {
            kernel: "scenarioA:2".into(),
            n,
            delta1: 0.7,
            delta2: 0.7,
            rank_policy: fragcov::complete::RankPolicy::Fixed(2),
            replications: 20,
            seed: 7,
            ..Default::default()
        };
        run_cell(&cfg).unwrap().summary.unwrap().median
    };
    let (a, b) = (med(200), med(800));
    (b < a, format!("median re n=200 {a:.2}, n=800 {b:.2}"))
}

fn c9_negative_controls() -> Outcome {
    let grid = Grid::regular(K);
    let pts = grid.points();
    let (k1, k2) = counterexample_bump_pair(0.5).unwrap();
    let (mut on, mut off) = (0.0f64, 0.0f64);
    for &s in pts {
        for &t in pts {
            let d = (k1.eval(s, t) - k2.eval(s, t)).abs();
            if (s - t).abs() <= 1.0 / 3.0 {
                on = on.max(d);
            } else {
                off = off.max(d);
            }
        }
    }
    let truth: SymMatrix<f64> = evaluate_on_grid(&k1, &grid);
    let mask = band_mask(K, 1.0 / 3.0, false).unwrap();
    let band = PatchedCovariance::banded_from(&truth, &mask).unwrap();
    let oracle = match exact_band_completion(&band.matrix, &mask, 3) {
        Err(Error::SingularMinor { row, col }) => (true, format!("singular minor at ({row}, {col})")),
        Err(e) => (false, format!("unexpected error {e}")),
        Ok(full) => {
            let d = (0..K)
                .flat_map(|j| (0..K).map(move |l| (j, l)))
                .filter(|&(j, l)| !mask.includes(j, l))
                .map(|(j, l)| (full.get(j, l) - truth.get(j, l)).abs())
                .fold(0.0, f64::max);
            (d > 1e-6, format!("completion differs off-band by {d:.2e}"))
        }
    };
    let (e1, e2) = esseen_pair();
    let (mut near, mut far) = (0.0f64, 0.0f64);
    for i in 0..=2000 {
        let u = 2.0 * i as f64 / 2000.0;
        let d = (e1.profile.at_lag(u) - e2.profile.at_lag(u)).abs();
        if u < 1.0 {
            near = near.max(d);
        } else if u > 1.0 && u < 2.0 {
            far = far.max(d);
        }
    }
    let ok = on < 1e-12 && off > 0.01 && oracle.0 && near == 0.0 && far > 0.01;
    (
        ok,
        format!(
            "bump band diff {on:.1e}, off-band {off:.3}; oracle on kappa1: {}; Esseen lag<1 diff {near:.1e}, lag in (1,2) {far:.3}",
            oracle.1
        ),
    )
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, name: &str| {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_fragcov"))
            .args(["run", "--table", "T2", "--seed", "7", "--cell", "13", "--reps", "30", "--out"])
            .arg(&path)
            .env("FRAGCOV_THREADS", threads)
            .stdout(std::process::Stdio::null())
            .status()
            .expect("spawn fragcov");
        assert!(status.success());
        std::fs::read(path).unwrap()
    };
    let a = run("1", "a.csv");
    let b = run("4", "b.csv");
    (a == b && !a.is_empty(), format!("{} bytes, identical: {}", a.len(), a == b))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("C1 exact oracle recovers exact bands", c1_oracle),
        ("C2 solver matches oracle", c2_solver_vs_oracle),
        ("C3 analytic gradient", c3_gradient),
        ("C4 Table 2 medians within 5", c4_table2),
        ("C5 Matern subset within 6", c5_table4),
        ("C6 irregular-grid subset within 6", c6_tables56),
        ("C7 scree levels off at the true rank", c7_scree),
        ("C8 error shrinks with n", c8_consistency),
        ("C9 negative controls", c9_negative_controls),
        ("C10 byte-identical reruns", c10_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t0 = Instant::now();
        let (ok, detail) = f();
        if !ok {
            failed += 1;
        }
        println!("{} {name}: {detail} [{:.1}s]", if ok { "PASS" } else { "FAIL" }, t0.elapsed().as_secs_f64());
    }
    println!("{} of 10 criteria pass", 10 - failed);
    if failed > 0 && std::env::var_os("FRAGCOV_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
