//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process fails if any does.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tlcp_core::blocks::{max_unit_gap_points, test_orthant_inequality, Interval, OrthantParams};
use tlcp_core::dual::check_duality_pathwise;
use tlcp_core::estimate::EstimateWithCI;
use tlcp_core::experiments::{
    convergence_test, survival_along_grid, ConvergenceParams, ScanParams,
};
use tlcp_core::lattice::state_leq;
use tlcp_core::opercolation::percolate;
use tlcp_core::oracle::{
    build_generator, encode, simulate_distribution, total_variation, transient_distribution,
};
use tlcp_core::simulate::{check_monotone_coupling, run_forward};
use tlcp_core::{Configuration, EventLog, Rates, SiteState, Window};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_state(r: &mut ChaCha8Rng) -> SiteState {
    SiteState::from_bits(r.random_range(0..4u8))
}

fn line(r: u32) -> Arc<Window> {
    Arc::new(Window::centered(1, r, None).unwrap())
}

fn square(r: u32) -> Arc<Window> {
    Arc::new(Window::centered(2, r, None).unwrap())
}

fn c1_pathwise_duality() -> Outcome {
    let mut detail = Vec::new();
    for (name, w, seed) in [("1d r=4", line(4), 101), ("2d r=2", square(2), 102)] {
        let rep = check_duality_pathwise(w, 1000, 3.0, seed).map_err(|e| e.to_string())?;
        if !rep.mismatches.is_empty() {
            return Err(format!(
                "{name}: {} mismatches, first case {}",
                rep.mismatches.len(),
                rep.mismatches[0]
            ));
        }
        detail.push(format!("{name} {} cases", rep.cases));
    }
    Ok(detail.join(", ") + ", all agree")
}

fn c2_monotone_coupling() -> Outcome {
    let mut checked = 0;
    for case in 0..1000u64 {
        let mut r = rng(200_000 + case);
        let w = if case % 2 == 0 { line(5) } else { square(2) };
        let upper: Vec<SiteState> = (0..w.len()).map(|_| random_state(&mut r)).collect();
        let lower: Vec<SiteState> = upper
            .iter()
            .map(|&s| {
                let below: Vec<SiteState> = (0..4)
                    .map(SiteState::from_bits)
                    .filter(|&x| state_leq(x, s))
                    .collect();
                below[r.random_range(0..below.len())]
            })
            .collect();
        let rates = Rates::new(
            r.random_range(0.2..4.0),
            r.random_range(0.0..4.0),
            r.random_range(0.0..2.0),
        )
        .unwrap();
        let t = r.random_range(0.1..4.0);
        let log = EventLog::generate(w.clone(), 0.0, t, rates, case).map_err(|e| e.to_string())?;
        let lo = Configuration::from_states(w.clone(), lower).unwrap();
        let hi = Configuration::from_states(w, upper).unwrap();
        if !check_monotone_coupling(&log, &lo, &hi, 0.0, t).map_err(|e| e.to_string())? {
            return Err(format!("order broken in case {case}"));
        }
        checked += 1;
    }
    Ok(format!(
        "{checked} ordered pairs kept their order at every mark"
    ))
}

fn c3_environment_independence() -> Outcome {
    for case in 0..200u64 {
        let mut r = rng(300_000 + case);
        let w = if case % 2 == 0 { line(5) } else { square(2) };
        let rates = Rates::new(
            r.random_range(0.2..4.0),
            r.random_range(0.0..4.0),
            r.random_range(0.0..2.0),
        )
        .unwrap();
        let t = r.random_range(0.1..4.0);
        let log = EventLog::generate(w.clone(), 0.0, t, rates, case).map_err(|e| e.to_string())?;
        let animals: Vec<bool> = (0..w.len()).map(|_| r.random_bool(0.5)).collect();
        let mut reference = None;
        for _ in 0..4 {
            let states = animals
                .iter()
                .map(|&a| SiteState::from_parts(a, r.random_bool(0.5)))
                .collect();
            let init = Configuration::from_states(w.clone(), states).unwrap();
            let ev = run_forward(&log, &init, 0.0, t)
                .map_err(|e| e.to_string())?
                .animal_events();
            match &reference {
                None => reference = Some(ev),
                Some(first) if *first != ev => {
                    return Err(format!("animal path depends on fleas in case {case}"))
                }
                _ => {}
            }
        }
    }
    Ok("200 logs, 4 flea starts each, identical animal trajectories".into())
}

fn c4_oracle_tv() -> Outcome {
    let grid = [0.5, 1.0, 3.0];
    let times = [0.5, 1.0, 2.0];
    let mut worst: (f64, String) = (0.0, String::new());
    let mut cell = 0u64;
    for k in 1..=3usize {
        let w = Arc::new(Window::from_bounds(&[(0, k as i32 - 1)], None).unwrap());
        let init_states: Vec<SiteState> = [3u8, 0, 2][..k]
            .iter()
            .map(|&d| SiteState::from_bits(d))
            .collect();
        let init = Configuration::from_states(w.clone(), init_states.clone()).unwrap();
        for &lambda in &grid {
            for &mu in &grid {
                for &delta in &grid {
                    let rates = Rates::new(lambda, mu, delta).unwrap();
                    let q = build_generator(w.clone(), rates).map_err(|e| e.to_string())?;
                    let p0 = q.point_mass(encode(&init_states));
                    let emp =
                        simulate_distribution(w.clone(), rates, &init, &times, 100_000, 400 + cell)
                            .map_err(|e| e.to_string())?;
                    for (j, &t) in times.iter().enumerate() {
                        let exact =
                            transient_distribution(&q, &p0, t).map_err(|e| e.to_string())?;
                        let tv = total_variation(&exact, &emp[j]);
                        if tv > worst.0 {
                            worst = (tv, format!("k={k} λ={lambda} μ={mu} δ={delta} t={t}"));
                        }
                    }
                    cell += 1;
                }
            }
        }
    }
    let msg = format!("{} cases, max TV {:.5} at {}", cell * 3, worst.0, worst.1);
    if worst.0 < 0.015 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c5_single_site() -> Outcome {
    let w = Arc::new(Window::from_bounds(&[(0, 0)], None).unwrap());
    let init = Configuration::filled(w.clone(), SiteState::AnimalFleas);
    let reps = 100_000u64;
    let emp = simulate_distribution(
        w,
        Rates::new(0.0, 0.0, 1.0).unwrap(),
        &init,
        &[1.0],
        reps,
        5,
    )
    .map_err(|e| e.to_string())?;
    let target = (-1.0f64).exp();
    let mut parts = Vec::new();
    let mut ok = true;
    for state in [3usize, 2] {
        let hits = (emp[0][state] * reps as f64).round() as u64;
        let ci = EstimateWithCI::wilson(hits, reps, 0.99);
        ok &= ci.contains(target);
        parts.push(format!(
            "P({state})={:.5} [{:.5},{:.5}]",
            ci.point, ci.ci_low, ci.ci_high
        ));
    }
    let msg = format!("{} vs e^-1={target:.5}", parts.join(" "));
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Longest chain of candidate times with unit gaps. Every optimal set can
/// be pushed left until each point sits at an interval start or one unit
/// after its predecessor, so starts plus integer offsets suffice.
fn exhaustive_unit_gap(intervals: &[Interval]) -> usize {
    let covered = |s: f64| intervals.iter().any(|iv| iv.contains(s));
    let horizon = intervals.iter().map(|iv| iv.end).fold(0.0, f64::max);
    let mut cand: Vec<f64> = Vec::new();
    for iv in intervals {
        let mut s = iv.start;
        while s <= horizon {
            if covered(s) {
                cand.push(s);
            }
            s += 1.0;
        }
    }
    cand.sort_by(f64::total_cmp);
    cand.dedup();
    let mut best = vec![1usize; cand.len()];
    for i in 0..cand.len() {
        for j in 0..i {
            if cand[j] + 1.0 <= cand[i] {
                best[i] = best[i].max(best[j] + 1);
            }
        }
    }
    best.into_iter().max().unwrap_or(0)
}

fn c6_greedy_count() -> Outcome {
    for case in 0..500u64 {
        let mut r = rng(600_000 + case);
        let n = r.random_range(1..=12usize);
        let horizon = r.random_range(1.0..8.0);
        let mut cuts: Vec<f64> = (0..2 * n).map(|_| r.random_range(0.0..horizon)).collect();
        if r.random_bool(0.3) {
            cuts[0] = 0.0;
        }
        cuts.sort_by(f64::total_cmp);
        let mut ivs: Vec<Interval> = cuts
            .chunks_exact(2)
            .filter(|p| p[0] < p[1])
            .map(|p| Interval {
                start: p[0],
                end: p[1],
                closed: false,
            })
            .collect();
        if let Some(last) = ivs.last_mut() {
            if r.random_bool(0.5) {
                last.end = horizon;
                last.closed = true;
            }
        }
        let greedy = max_unit_gap_points(&ivs);
        if greedy.windows(2).any(|p| p[1] - p[0] < 1.0 - 1e-12)
            || !greedy.iter().all(|&s| ivs.iter().any(|iv| iv.contains(s)))
        {
            return Err(format!("infeasible greedy set in case {case}"));
        }
        let exact = exhaustive_unit_gap(&ivs);
        if greedy.len() != exact {
            return Err(format!(
                "case {case}: greedy {} vs exhaustive {exact}",
                greedy.len()
            ));
        }
    }
    Ok("500 instances, greedy equals exhaustive".into())
}

fn c7_orthant() -> Outcome {
    let rates = Rates::new(3.0, 2.0, 1.0).unwrap();
    let mut lines = Vec::new();
    let mut violations = 0;
    for (dim, t) in [(1usize, 2.0), (2, 0.5)] {
        for bound in [1usize, 2, 4] {
            let p = OrthantParams {
                dim,
                n: 1,
                l: 3,
                t,
                bound,
                rates,
                burn_in: 5.0,
            };
            let rep =
                test_orthant_inequality(&p, 10_000, 700 + dim as u64 * 10 + bound as u64, 0.99)
                    .map_err(|e| e.to_string())?;
            violations += rep.violation as usize;
            lines.push(format!(
                "d={dim} N={bound}: {:.4} vs {:.4}",
                rep.lhs.point, rep.rhs.point
            ));
        }
    }
    let msg = format!("{violations} violations; {}", lines.join(", "));
    if violations == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c8_convergence() -> Outcome {
    let p = ConvergenceParams {
        dim: 1,
        radius: None,
        rates: Rates::new(3.0, 3.0, 1.0).unwrap(),
        b: vec![vec![0]],
        d: vec![vec![0]],
        t_grid: vec![4.0, 8.0, 16.0],
        burn_in: 10.0,
        speed: None,
    };
    let rep = convergence_test(&p, 10_000, 8, 0.95).map_err(|e| e.to_string())?;
    let rows: Vec<String> = rep
        .rows
        .iter()
        .map(|r| {
            format!(
                "t={} res={:.4}±{:.4} nonint={:.4}",
                r.t, r.residual, r.residual_half_width, r.nonintersection.point
            )
        })
        .collect();
    let last = rep.rows.last().map_or(f64::NAN, |r| r.residual);
    let ok = rep.checks.residual_decreasing && rep.checks.nonintersection_decreasing && last < 0.05;
    let msg = format!(
        "radius {}; {}; decreasing residual={} nonintersection={}",
        rep.radius,
        rows.join(", "),
        rep.checks.residual_decreasing,
        rep.checks.nonintersection_decreasing
    );
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c9_monotone_scans() -> Outcome {
    let scan = ScanParams {
        dim: 1,
        radius: 12,
        lambda: 3.0,
        delta: 1.0,
        mu_grid: (0..=8).map(|i| i as f64 * 0.5).collect(),
        horizon: 10.0,
        burn_in: 5.0,
        n: 1,
    };
    for seed in 0..200u64 {
        let s = survival_along_grid(&scan, 900 + seed).map_err(|e| e.to_string())?;
        if s.windows(2).any(|w| w[0] && !w[1]) {
            return Err(format!(
                "survival not monotone in μ for seed {}",
                900 + seed
            ));
        }
    }
    let ps = [0.0, 0.3, 0.5, 0.6, 0.65, 0.7, 0.8, 0.9, 1.0];
    for seed in 0..200u64 {
        let grids: Vec<_> = ps
            .iter()
            .map(|&p| percolate(p, 100, 9_000 + seed))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        for pair in grids.windows(2) {
            for n in 0..=100 {
                let (a, b) = (pair[0].reachable(n), pair[1].reachable(n));
                if !a.iter().all(|x| b.contains(x)) {
                    return Err(format!(
                        "percolation not monotone at p={} row {n} seed {}",
                        pair[1].p(),
                        9_000 + seed
                    ));
                }
            }
        }
    }
    Ok("200 μ-scans nondecreasing, 200 percolation seeds nested across 9 p values".into())
}

fn c10_op_sanity() -> Outcome {
    let n = 200;
    for seed in 0..20u64 {
        let full = percolate(1.0, n, seed).map_err(|e| e.to_string())?;
        for k in 0..=n {
            let edges = (full.left_edge(k), full.right_edge(k));
            if edges != (Some(-(k as i32)), Some(k as i32)) {
                return Err(format!("p=1 row {k}: edges {edges:?}"));
            }
            let dens = full.density_between_edges(k).map_err(|e| e.to_string())?;
            if dens != 1.0 {
                return Err(format!("p=1 row {k}: density {dens}"));
            }
        }
        let empty = percolate(0.0, n, seed).map_err(|e| e.to_string())?;
        if empty.died_at() != Some(1) {
            return Err(format!("p=0 died at {:?}", empty.died_at()));
        }
    }
    Ok("p=1 edges ±n and density 1; p=0 dies at row 1".into())
}

fn run_cli(args: &[&str], out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_tlcp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "off")
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("tlcp {} exited with {status}", args.join(" ")));
    }
    std::fs::read(out).map_err(|e| e.to_string())
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [&[&str]; 8] = [
        &[
            "simulate", "--radius", "6", "--lambda", "2", "--mu", "2", "--delta", "1", "--t-max",
            "3", "--fleas", "-1;0;1", "--seed", "42",
        ],
        &[
            "dual-check",
            "--radius",
            "3",
            "--lambda",
            "2",
            "--mu",
            "2",
            "--delta",
            "1",
            "--t",
            "2",
            "--reps",
            "300",
            "--seed",
            "42",
        ],
        &[
            "dual-check",
            "--radius",
            "3",
            "--lambda",
            "2",
            "--mu",
            "2",
            "--delta",
            "1",
            "--t",
            "2",
            "--reps",
            "100",
            "--mode",
            "pathwise",
            "--seed",
            "42",
        ],
        &[
            "block-estimate",
            "--n",
            "1",
            "--L",
            "3",
            "--T",
            "1",
            "--lambda",
            "3",
            "--mu",
            "3",
            "--delta",
            "1",
            "--reps",
            "50",
            "--seed",
            "42",
            "--format",
            "json",
        ],
        &[
            "op-compare",
            "--p",
            "0.7",
            "--rows",
            "50",
            "--reps",
            "20",
            "--seed",
            "42",
        ],
        &[
            "oracle-check",
            "--k",
            "2",
            "--lambda",
            "1",
            "--mu",
            "1",
            "--delta",
            "1",
            "--t",
            "0.5,1",
            "--reps",
            "2000",
            "--seed",
            "42",
        ],
        &[
            "converge", "--B", "0", "--D", "0", "--t-grid", "1,2", "--lambda", "2", "--mu", "2",
            "--delta", "1", "--reps", "100", "--seed", "42",
        ],
        &[
            "scan",
            "--radius",
            "5",
            "--lambda",
            "2",
            "--delta",
            "1",
            "--mu-grid",
            "0,1,2",
            "--horizon",
            "3",
            "--reps",
            "50",
            "--seed",
            "42",
            "--format",
            "json",
        ],
    ];
    for (i, args) in runs.iter().enumerate() {
        let a = run_cli(args, &dir.path().join(format!("{i}a")))?;
        let b = run_cli(args, &dir.path().join(format!("{i}b")))?;
        let mut threaded = args.to_vec();
        threaded.extend(["--threads", "3"]);
        let c = run_cli(&threaded, &dir.path().join(format!("{i}c")))?;
        if a.is_empty() || a != b || a != c {
            return Err(format!("output of `{}` differs between runs", args[0]));
        }
    }
    Ok(format!(
        "{} commands byte-identical across repeats and --threads",
        runs.len()
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("pathwise duality", c1_pathwise_duality),
        ("monotone coupling", c2_monotone_coupling),
        ("environment independence", c3_environment_independence),
        ("oracle total variation", c4_oracle_tv),
        ("single-site closed form", c5_single_site),
        ("boundary count greedy", c6_greedy_count),
        ("orthant inequality", c7_orthant),
        ("factorization mechanism", c8_convergence),
        ("monotone scans", c9_monotone_scans),
        ("percolation sanity", c10_op_sanity),
        ("CLI determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "[{tag}] {:>2} {name}: {detail} ({:.1}s)",
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
