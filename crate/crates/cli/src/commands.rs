use std::sync::Arc;

use log::info;
use serde_json::{json, Value};

use tlcp_core::blocks::{estimate_block_events, BlockSpec};
use tlcp_core::dual::{check_duality_distributional, check_duality_pathwise, DualityCheck};
use tlcp_core::estimate::EstimateWithCI;
use tlcp_core::events::join_coords;
use tlcp_core::experiments::{
    convergence_test, dual_block_estimate, survival_scan, ConvergenceParams, ScanParams,
};
use tlcp_core::format::fmt_f64;
use tlcp_core::lattice::{Configuration, SiteSet, SiteState, Window};
use tlcp_core::opercolation::{percolate, threshold_sweep};
use tlcp_core::oracle::{
    build_generator, decode, encode, simulate_distribution, total_variation, transient_distribution,
};
use tlcp_core::rng::derive_seed;
use tlcp_core::simulate::{burn_in_animals, run_forward};
use tlcp_core::{EventLog, Rates};

use crate::args::*;
use crate::output::{Header, Report};
use crate::CliError;

type Res<T> = Result<T, CliError>;

fn f(x: f64) -> String {
    fmt_f64(x)
}

fn ci_json(e: &EstimateWithCI) -> Value {
    json!({ "p": e.point, "ci": [e.ci_low, e.ci_high], "reps": e.reps, "level": e.level })
}

fn ci_cells(e: &EstimateWithCI) -> [String; 3] {
    [f(e.point), f(e.ci_low), f(e.ci_high)]
}

fn window(m: &ModelArgs) -> Res<Arc<Window>> {
    Ok(Arc::new(Window::centered(m.dim, m.radius, m.truncation)?))
}

fn rates(lambda: f64, mu: f64, delta: f64) -> Res<Rates> {
    Ok(Rates::new(lambda, mu, delta)?)
}

fn check_level(level: f64) -> Res<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "--level must lie in (0, 1), got {level}"
        )))
    }
}

fn site_set(w: &Window, sites: &Sites, flag: &str) -> Res<SiteSet> {
    sites
        .0
        .iter()
        .map(|c| {
            if c.len() != w.dim() {
                return Err(CliError::Validation(format!(
                    "{flag}: site {c:?} has the wrong dimension"
                )));
            }
            Ok(w.require_index(c)?)
        })
        .collect()
}

pub fn simulate(a: &SimulateArgs, seed: u64, header: Header) -> Res<Report> {
    let w = window(&a.model)?;
    let r = rates(a.model.lambda, a.model.mu, a.model.delta)?;
    if !(a.t_max > 0.0) || !(a.burn_in >= 0.0) {
        return Err(CliError::Validation(
            "--t-max must be positive and --burn-in nonnegative".into(),
        ));
    }
    let log = EventLog::generate(w.clone(), -a.burn_in, a.t_max, r, seed)?;
    let init = match &a.init {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            Configuration::parse(w.clone(), &text)?
        }
        None => {
            let fleas = site_set(&w, &a.fleas, "--fleas")?;
            let mut c = match a.animals.as_str() {
                "all" => Configuration::filled(w.clone(), SiteState::Animal),
                "none" => Configuration::empty(w.clone()),
                "upper" => {
                    if a.burn_in <= 0.0 {
                        return Err(CliError::Validation(
                            "--animals upper needs --burn-in > 0".into(),
                        ));
                    }
                    burn_in_animals(&log, -a.burn_in, 0.0)?
                }
                list => {
                    let s = sites(list).map_err(CliError::Validation)?;
                    Configuration::from_sets(
                        w.clone(),
                        &site_set(&w, &s, "--animals")?,
                        &SiteSet::new(),
                    )?
                }
            };
            c.add_fleas(fleas);
            c
        }
    };
    info!("simulating {} sites up to t={}", w.len(), a.t_max);
    let tr = run_forward(&log, &init, 0.0, a.t_max)?;
    let rows: Vec<Vec<String>> = tr
        .changes()
        .iter()
        .map(|c| {
            vec![
                "forward".to_string(),
                f(c.time),
                join_coords(&w.coords(c.site as usize)),
                c.old.to_string(),
                c.new.to_string(),
            ]
        })
        .collect();
    let changes: Vec<Value> = tr
        .changes()
        .iter()
        .map(|c| {
            json!({
                "time": c.time,
                "site": join_coords(&w.coords(c.site as usize)),
                "old_state": c.old.bits(),
                "new_state": c.new.bits(),
            })
        })
        .collect();
    Ok(Report {
        header,
        columns: vec!["direction", "time", "site", "old_state", "new_state"],
        rows,
        json: json!({ "summary": tr.summary(), "changes": changes }),
    })
}

pub fn dual_check(a: &DualCheckArgs, seed: u64, header: Header) -> Res<Report> {
    let w = window(&a.model)?;
    let r = rates(a.model.lambda, a.model.mu, a.model.delta)?;
    check_level(a.common.level)?;
    match a.mode {
        DualMode::Pathwise => {
            info!("{} random pathwise cases", a.reps);
            let rep = check_duality_pathwise(w, a.reps, a.t, seed)?;
            let rows = vec![vec![
                rep.cases.to_string(),
                rep.mismatches.len().to_string(),
            ]];
            Ok(Report {
                header,
                columns: vec!["cases", "mismatches"],
                rows,
                json: serde_json::to_value(&rep)?,
            })
        }
        DualMode::Distributional => {
            for (flag, s) in [("--B", &a.b), ("--C", &a.c), ("--D", &a.d)] {
                site_set(&w, s, flag)?;
            }
            let p = DualityCheck {
                window: w,
                rates: r,
                b: a.b.0.clone(),
                c: a.c.0.clone(),
                d: a.d.0.clone(),
                t: a.t,
                burn_in: a.burn_in,
                reps: a.reps,
                seed,
                level: a.common.level,
            };
            info!(
                "distributional duality check with {} replicates per side",
                a.reps
            );
            let (lhs, rhs) = check_duality_distributional(&p)?;
            let row = |side: &str, e: &EstimateWithCI| {
                let [p, lo, hi] = ci_cells(e);
                vec![side.to_string(), p, lo, hi, e.reps.to_string()]
            };
            Ok(Report {
                header,
                columns: vec!["side", "point", "ci_low", "ci_high", "reps"],
                rows: vec![row("forward", &lhs), row("dual", &rhs)],
                json: json!({ "forward": ci_json(&lhs), "dual": ci_json(&rhs), "overlap": lhs.overlaps(&rhs) }),
            })
        }
    }
}

fn quantile_rows(
    name: &str,
    q: &Option<tlcp_core::blocks::Quantiles>,
    rows: &mut Vec<Vec<String>>,
) {
    if let Some(q) = q {
        for (k, v) in [
            ("mean", q.mean),
            ("q50", q.q50),
            ("q90", q.q90),
            ("q_eps", q.q_eps),
        ] {
            rows.push(vec![
                format!("{name}.{k}"),
                f(v),
                String::new(),
                String::new(),
            ]);
        }
    }
}

pub fn block_estimate(a: &BlockArgs, seed: u64, header: Header) -> Res<Report> {
    check_level(a.common.level)?;
    let spec = BlockSpec {
        dim: a.dim,
        n: a.n,
        l: a.l,
        t: a.t,
        epsilon: a.epsilon,
        rates: rates(a.lambda, a.mu, a.delta)?,
        burn_in: a.burn_in,
    };
    spec.validate()?;
    let columns = vec!["quantity", "value", "ci_low", "ci_high"];
    let est_row = |name: &str, e: &EstimateWithCI| {
        let [p, lo, hi] = ci_cells(e);
        vec![name.to_string(), p, lo, hi]
    };
    if a.dual {
        info!("dual block estimate, {} replicates", a.reps);
        let r = dual_block_estimate(&spec, a.anchor, a.reps, seed, a.common.level)?;
        return Ok(Report {
            header,
            columns,
            rows: vec![
                est_row("event_A", &r.event_a),
                est_row("event_B", &r.event_b),
            ],
            json: json!({ "event_A": ci_json(&r.event_a), "event_B": ci_json(&r.event_b), "anchor": r.anchor }),
        });
    }
    info!("block estimate, {} replicates", a.reps);
    let r = estimate_block_events(&spec, a.reps, seed, a.common.level)?;
    let mut rows = vec![
        est_row("event_A", &r.event_a),
        est_row("event_B", &r.event_b),
    ];
    quantile_rows("N", &r.n_stats.n, &mut rows);
    quantile_rows("N_plus", &r.n_stats.n_plus, &mut rows);
    quantile_rows("flea_count", &r.n_stats.flea_count, &mut rows);
    quantile_rows("jumps", &r.diagnostics.jumps, &mut rows);
    quantile_rows("min_window", &r.diagnostics.min_window, &mut rows);
    if let Some(x) = r.diagnostics.joint_fraction {
        rows.push(vec![
            "joint_fraction".into(),
            f(x),
            String::new(),
            String::new(),
        ]);
    }
    Ok(Report {
        header,
        columns,
        rows,
        json: json!({
            "event_A": ci_json(&r.event_a),
            "event_B": ci_json(&r.event_b),
            "N_stats": serde_json::to_value(&r.n_stats)?,
            "diagnostics": serde_json::to_value(&r.diagnostics)?,
        }),
    })
}

pub fn op_compare(a: &OpArgs, seed: u64, header: Header) -> Res<Report> {
    check_level(a.common.level)?;
    if let Some(eps) = &a.epsilons {
        if eps.0.iter().any(|&e| !(0.0..=1.0).contains(&e)) {
            return Err(CliError::Validation("--epsilons must lie in [0, 1]".into()));
        }
        info!("threshold sweep over {} values", eps.0.len());
        let rows = threshold_sweep(&eps.0, a.rows, a.reps, seed, a.common.level)?;
        let table = rows
            .iter()
            .map(|r| {
                let [p, lo, hi] = ci_cells(&r.survival);
                vec![f(r.epsilon), f(r.p), p, lo, hi]
            })
            .collect();
        return Ok(Report {
            header,
            columns: vec!["epsilon", "p", "survival", "ci_low", "ci_high"],
            rows: table,
            json: serde_json::to_value(&rows)?,
        });
    }
    if !(0.0..=1.0).contains(&a.p) {
        return Err(CliError::Validation(format!(
            "--p must lie in [0, 1], got {}",
            a.p
        )));
    }
    let every = a.log_every.unwrap_or((a.rows / 10).max(1));
    if every == 0 {
        return Err(CliError::Validation("--log-every must be positive".into()));
    }
    info!("{} percolation grids of {} rows", a.reps, a.rows);
    let mut rows = Vec::new();
    let mut docs = Vec::new();
    for i in 0..a.reps {
        let s = derive_seed(seed, 7, i);
        let g = percolate(a.p, a.rows, s)?;
        let died = g.died_at().map_or(String::new(), |d| d.to_string());
        let mut logged = Vec::new();
        for n in (0..=a.rows).step_by(every as usize) {
            let (Some(l), Some(r)) = (g.left_edge(n), g.right_edge(n)) else {
                break;
            };
            let dens = g.density_between_edges(n)?;
            rows.push(vec![
                i.to_string(),
                s.to_string(),
                died.clone(),
                n.to_string(),
                l.to_string(),
                r.to_string(),
                f(dens),
            ]);
            logged.push(json!({ "row": n, "l_n": l, "r_n": r, "density": dens }));
        }
        docs.push(json!({ "rep": i, "seed": s, "died_at": g.died_at(), "rows": logged }));
    }
    Ok(Report {
        header,
        columns: vec!["rep", "seed", "died_at", "row", "l_n", "r_n", "density"],
        rows,
        json: Value::Array(docs),
    })
}

pub fn oracle_check(a: &OracleArgs, seed: Option<u64>, header: Header) -> Res<Report> {
    if a.k == 0 || a.k > tlcp_core::oracle::MAX_SITES {
        return Err(CliError::Validation(format!(
            "--k must lie in 1..={}",
            tlcp_core::oracle::MAX_SITES
        )));
    }
    if a.t.0.is_empty()
        || a.t.0.iter().any(|&t| !(t >= 0.0))
        || a.t.0.windows(2).any(|w| w[0] > w[1])
    {
        return Err(CliError::Validation(
            "--t must list nonnegative ascending times".into(),
        ));
    }
    let w = Arc::new(Window::from_bounds(&[(0, a.k as i32 - 1)], None)?);
    let r = rates(a.lambda, a.mu, a.delta)?;
    let init_states: Vec<SiteState> = match &a.init {
        None => vec![SiteState::AnimalFleas; a.k],
        Some(s) => {
            let states = s
                .chars()
                .map(|c| {
                    c.to_digit(10)
                        .ok_or_else(|| CliError::Validation(format!("bad state {c:?} in --init")))
                        .and_then(|d| Ok(SiteState::from_digit(d as u8)?))
                })
                .collect::<Res<Vec<_>>>()?;
            if states.len() != a.k {
                return Err(CliError::Validation(format!("--init needs {} digits", a.k)));
            }
            states
        }
    };
    let q = build_generator(w.clone(), r)?;
    let start = encode(&init_states);
    let empirical = match seed {
        Some(s) if a.reps > 0 => {
            info!("{} simulated replicates", a.reps);
            let init = Configuration::from_states(w.clone(), init_states.clone())?;
            Some(simulate_distribution(
                w.clone(),
                r,
                &init,
                &a.t.0,
                a.reps,
                s,
            )?)
        }
        _ => None,
    };
    let label = |i: usize| {
        decode(i, a.k)
            .iter()
            .map(|s| s.to_string())
            .collect::<String>()
    };
    let mut rows = Vec::new();
    let mut docs = Vec::new();
    for (j, &t) in a.t.0.iter().enumerate() {
        let exact = transient_distribution(&q, &q.point_mass(start), t)?;
        let emp = empirical.as_ref().map(|e| &e[j]);
        for (i, p) in exact.iter().enumerate() {
            rows.push(vec![
                f(t),
                label(i),
                f(*p),
                emp.map_or(String::new(), |e| f(e[i])),
            ]);
        }
        let tv = emp.map(|e| total_variation(&exact, e));
        if let Some(tv) = tv {
            rows.push(vec![f(t), "TV".into(), f(tv), String::new()]);
        }
        let states: Vec<String> = (0..exact.len()).map(label).collect();
        docs.push(json!({ "t": t, "states": states, "exact": exact, "empirical": emp, "tv": tv }));
    }
    Ok(Report {
        header,
        columns: vec!["t", "state", "exact", "empirical"],
        rows,
        json: Value::Array(docs),
    })
}

pub fn converge(a: &ConvergeArgs, seed: u64, header: Header) -> Res<Report> {
    check_level(a.common.level)?;
    let p = ConvergenceParams {
        dim: a.dim,
        radius: a.radius,
        rates: rates(a.lambda, a.mu, a.delta)?,
        b: a.b.0.clone(),
        d: a.d.0.clone(),
        t_grid: a.t_grid.0.clone(),
        burn_in: a.burn_in,
        speed: a.speed,
    };
    p.validate()?;
    info!(
        "convergence test, {} replicates, radius {}",
        a.reps,
        p.resolved_radius()
    );
    let r = convergence_test(&p, a.reps, seed, a.common.level)?;
    let rows = r
        .rows
        .iter()
        .map(|row| {
            let mut v = vec![f(row.t)];
            v.extend(ci_cells(&row.lhs));
            v.extend(ci_cells(&row.rhs));
            v.push(f(row.residual));
            v.push(f(row.residual_half_width));
            v.extend(ci_cells(&row.nonintersection));
            v
        })
        .collect();
    Ok(Report {
        header,
        columns: vec![
            "t",
            "lhs",
            "lhs_low",
            "lhs_high",
            "rhs",
            "rhs_low",
            "rhs_high",
            "residual",
            "residual_half_width",
            "nonintersection",
            "nonintersection_low",
            "nonintersection_high",
        ],
        rows,
        json: serde_json::to_value(&r)?,
    })
}

pub fn scan(a: &ScanArgs, seed: u64, header: Header) -> Res<Report> {
    check_level(a.common.level)?;
    let p = ScanParams {
        dim: a.dim,
        radius: a.radius,
        lambda: a.lambda,
        delta: a.delta,
        mu_grid: a.mu_grid.0.clone(),
        horizon: a.horizon,
        burn_in: a.burn_in,
        n: a.n,
    };
    rates(a.lambda, 0.0, a.delta)?;
    info!(
        "survival scan over {} μ values, {} replicates",
        p.mu_grid.len(),
        a.reps
    );
    let r = survival_scan(&p, a.reps, seed, a.common.level)?;
    let rows = r
        .points
        .iter()
        .map(|pt| {
            let [p, lo, hi] = ci_cells(&pt.survival);
            vec![f(pt.mu), p, lo, hi]
        })
        .collect();
    Ok(Report {
        header,
        columns: vec!["mu", "survival", "ci_low", "ci_high"],
        rows,
        json: serde_json::to_value(&r)?,
    })
}
