//! Block events for truncated runs, boundary point counts, the orthant
//! correlation test and witness-path diagnostics.
//!
//! A block run with parameters `(n, L, T)` uses a window of radius
//! `2n + L` with the same truncation. Animals are burned in on negative
//! times of the log, fleas are put on every site of `[-n, n]^d` at time 0
//! (state 3 where hosted, 2 otherwise) and the run is watched up to
//! `T + 1`.

use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{EstimateWithCI, Tally};
use crate::events::{EventLog, MarkKind, Rates};
use crate::lattice::{Configuration, SiteSet, Window};
use crate::rng::derive_seed;
use crate::simulate::{burn_in_animals, run_animals_only, run_forward, Evolver, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockSpec {
    pub dim: usize,
    pub n: u32,
    pub l: u32,
    pub t: f64,
    pub epsilon: f64,
    pub rates: Rates,
    /// Length of the animal burn-in before time 0.
    pub burn_in: f64,
}

impl BlockSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if self.l < 1 {
            return Err(Error::InvalidParameter("L must be at least 1".into()));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "T must be positive, got {}",
                self.t
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return Err(Error::InvalidParameter(
                "burn-in must be nonnegative".into(),
            ));
        }
        if self.dim == 0 || self.dim > crate::lattice::MAX_DIM {
            return Err(Error::InvalidWindow(format!(
                "unsupported dimension {}",
                self.dim
            )));
        }
        Ok(())
    }

    pub fn truncation(&self) -> u32 {
        2 * self.n + self.l
    }

    pub fn window(&self) -> Result<Arc<Window>> {
        self.validate()?;
        Ok(Arc::new(Window::centered(
            self.dim,
            self.truncation(),
            Some(self.truncation()),
        )?))
    }

    /// End of the watched interval.
    pub fn horizon(&self) -> f64 {
        self.t + 1.0
    }

    pub fn generate_log(&self, seed: u64) -> Result<EventLog> {
        EventLog::generate(
            self.window()?,
            -self.burn_in,
            self.horizon(),
            self.rates,
            seed,
        )
    }

    /// Cubes whose containment at `T + 1` makes event A.
    pub fn cubes_a(&self, window: &Window) -> Vec<Vec<usize>> {
        centers(self.dim, |_| (0, self.l as i32 - 1))
            .iter()
            .filter_map(|c| window.cube(c, self.n))
            .collect()
    }

    /// Cubes whose containment at some time in `[1, T + 1]` makes event B.
    pub fn cubes_b(&self, window: &Window) -> Vec<Vec<usize>> {
        let first = (self.l + self.n) as i32;
        centers(self.dim, |axis| {
            if axis == 0 {
                (first, first)
            } else {
                (0, self.l as i32 - 1)
            }
        })
        .iter()
        .filter_map(|c| window.cube(c, self.n))
        .collect()
    }

    pub fn seed_cube(&self, window: &Window) -> Vec<usize> {
        window
            .cube(&vec![0; self.dim], self.n)
            .expect("seed cube fits inside the block window")
    }
}

fn centers(dim: usize, range: impl Fn(usize) -> (i32, i32)) -> Vec<Vec<i32>> {
    let mut out = vec![Vec::new()];
    for axis in 0..dim {
        let (lo, hi) = range(axis);
        out = out
            .into_iter()
            .flat_map(|p: Vec<i32>| {
                (lo..=hi).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Tracks how many sites of each candidate cube are currently marked.
#[derive(Debug, Clone)]
pub struct CubeWatcher {
    sizes: Vec<usize>,
    counts: Vec<usize>,
    by_site: Vec<Vec<u32>>,
    full: usize,
}

impl CubeWatcher {
    pub fn new(window_len: usize, cubes: &[Vec<usize>], marked: &SiteSet) -> Self {
        let mut by_site = vec![Vec::new(); window_len];
        let mut counts = vec![0; cubes.len()];
        for (i, cube) in cubes.iter().enumerate() {
            for &x in cube {
                by_site[x].push(i as u32);
                counts[i] += marked.contains(&x) as usize;
            }
        }
        let sizes: Vec<usize> = cubes.iter().map(Vec::len).collect();
        let full = counts.iter().zip(&sizes).filter(|(c, s)| c == s).count();
        CubeWatcher {
            sizes,
            counts,
            by_site,
            full,
        }
    }

    pub fn update(&mut self, site: usize, was: bool, now: bool) {
        if was == now {
            return;
        }
        for &i in &self.by_site[site] {
            let i = i as usize;
            if self.counts[i] == self.sizes[i] {
                self.full -= 1;
            }
            if now {
                self.counts[i] += 1;
            } else {
                self.counts[i] -= 1;
            }
            if self.counts[i] == self.sizes[i] {
                self.full += 1;
            }
        }
    }

    pub fn any_full(&self) -> bool {
        self.full > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockOutcome {
    pub event_a: bool,
    pub event_b: bool,
}

/// Block start: burned-in animals with fleas on the seed cube.
pub fn block_initial(spec: &BlockSpec, log: &EventLog) -> Result<Configuration> {
    let mut init = burn_in_animals(log, -spec.burn_in, 0.0)?;
    init.add_fleas(spec.seed_cube(log.window()));
    Ok(init)
}

/// Both block events on a given log, which must cover `[-burn_in, T + 1]`
/// on the block window.
pub fn block_events_on_log(spec: &BlockSpec, log: &EventLog) -> Result<BlockOutcome> {
    let window = spec.window()?;
    if **log.window() != *window {
        return Err(Error::WindowMismatch);
    }
    let init = block_initial(spec, log)?;
    let mut watch = CubeWatcher::new(window.len(), &spec.cubes_b(&window), &init.flea_set());
    let mut ev = Evolver::new(log, init, 0.0)?;
    ev.advance_to(1.0, |_, x, old, new| {
        watch.update(x, old.has_fleas(), new.has_fleas())
    })?;
    let mut event_b = watch.any_full();
    ev.advance_to(spec.horizon(), |_, x, old, new| {
        watch.update(x, old.has_fleas(), new.has_fleas());
        event_b |= watch.any_full();
    })?;
    let fleas = ev.config().flea_set();
    let event_a = spec
        .cubes_a(&window)
        .iter()
        .any(|c| c.iter().all(|x| fleas.contains(x)));
    Ok(BlockOutcome { event_a, event_b })
}

pub fn block_events(spec: &BlockSpec, seed: u64) -> Result<BlockOutcome> {
    block_events_on_log(spec, &spec.generate_log(seed)?)
}

/// A maximal constrained point set on a boundary face.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryCount {
    pub value: usize,
    pub witness: Vec<(usize, f64)>,
}

/// Occupancy interval; the start is always included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub closed: bool,
}

impl Interval {
    pub fn contains(&self, s: f64) -> bool {
        s >= self.start && (s < self.end || (self.closed && s == self.end))
    }
}

/// Largest set of times in the union of disjoint `intervals` (sorted by
/// start) with pairwise gaps of at least 1. Earliest-point greedy.
pub fn max_unit_gap_points(intervals: &[Interval]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for iv in intervals {
        let mut s = match out.last() {
            Some(&p) => iv.start.max(p + 1.0),
            None => iv.start,
        };
        while iv.contains(s) {
            out.push(s);
            s += 1.0;
        }
    }
    out
}

/// Flea occupancy intervals of `site`, clipped to `[t0, t_end]`.
pub fn flea_intervals(traj: &Trajectory, site: usize, t_end: f64) -> Vec<Interval> {
    let (t0, _) = traj.time_range();
    let mut out = Vec::new();
    let mut open = traj.initial().get(site).has_fleas().then_some(t0);
    for c in traj.changes().iter().filter(|c| c.site as usize == site) {
        if c.time > t_end {
            break;
        }
        match (open, c.new.has_fleas()) {
            (Some(a), false) => {
                out.push(Interval {
                    start: a,
                    end: c.time,
                    closed: false,
                });
                open = None;
            }
            (None, true) => open = Some(c.time),
            _ => {}
        }
    }
    if let Some(a) = open {
        out.push(Interval {
            start: a,
            end: t_end,
            closed: true,
        });
    }
    out
}

fn boundary_count(
    traj: &Trajectory,
    l: u32,
    t: f64,
    face: impl Fn(&[i32]) -> bool,
) -> Result<BoundaryCount> {
    let window = traj.window();
    if window.truncation() != Some(l) {
        return Err(Error::Precondition(format!(
            "trajectory truncation {:?} does not match L = {l}",
            window.truncation()
        )));
    }
    let (t0, t1) = traj.time_range();
    if t0 != 0.0 || t1 < t {
        return Err(Error::InvalidTimeRange(
            t0,
            t1,
            format!("need a run covering [0, {t}]"),
        ));
    }
    let mut witness = Vec::new();
    for x in 0..window.len() {
        let c = window.coords(x);
        if window.sup_norm(x) == l && face(&c) {
            for s in max_unit_gap_points(&flea_intervals(traj, x, t)) {
                witness.push((x, s));
            }
        }
    }
    Ok(BoundaryCount {
        value: witness.len(),
        witness,
    })
}

/// `N(L, T)` over the whole boundary `‖x‖∞ = L`.
pub fn compute_n(traj: &Trajectory, l: u32, t: f64) -> Result<BoundaryCount> {
    boundary_count(traj, l, t, |_| true)
}

/// `N₊(L, T)` over the face `{L} × {0, …, L}^{d-1}`.
pub fn compute_n_plus(traj: &Trajectory, l: u32, t: f64) -> Result<BoundaryCount> {
    let l = l as i32;
    boundary_count(traj, l as u32, t, |c| {
        c[0] == l && c[1..].iter().all(|&v| (0..=l).contains(&v))
    })
}

/// Flea run on a truncation-`L` window of radius `L`, fleas from `[-n, n]^d`.
pub fn truncated_flea_run(
    dim: usize,
    n: u32,
    l: u32,
    t: f64,
    rates: Rates,
    burn_in: f64,
    seed: u64,
) -> Result<Trajectory> {
    if n < 1 || l < n {
        return Err(Error::Precondition(format!(
            "need L ≥ n ≥ 1, got n={n} L={l}"
        )));
    }
    let window = Arc::new(Window::centered(dim, l, Some(l))?);
    let log = EventLog::generate(window.clone(), -burn_in, t, rates, seed)?;
    let mut init = burn_in_animals(&log, -burn_in, 0.0)?;
    init.add_fleas(window.cube(&vec![0; dim], n).expect("cube inside window"));
    run_forward(&log, &init, 0.0, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrthantParams {
    pub dim: usize,
    pub n: u32,
    pub l: u32,
    pub t: f64,
    pub bound: usize,
    pub rates: Rates,
    pub burn_in: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrthantReport {
    pub params: OrthantParams,
    /// `P(|B_T ∩ [0, L]^d| ≤ N)`.
    pub lhs: EstimateWithCI,
    /// `P(|B_T| ≤ 2^d N)^{2^{-d}}`.
    pub rhs: EstimateWithCI,
    pub violation: bool,
}

/// One-sided test of the orthant correlation inequality: a violation is
/// flagged only when the lower bound of the left side exceeds the upper
/// bound of the right side, each at one-sided level `level`.
pub fn test_orthant_inequality(
    p: &OrthantParams,
    reps: u64,
    seed: u64,
    level: f64,
) -> Result<OrthantReport> {
    if p.bound < 1 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let orthants = 1usize << p.dim;
    let (lhs, rhs) = (0..reps)
        .into_par_iter()
        .map(|i| -> Result<(Tally, Tally)> {
            let tr = truncated_flea_run(
                p.dim,
                p.n,
                p.l,
                p.t,
                p.rates,
                p.burn_in,
                derive_seed(seed, 4, i),
            )?;
            let fleas = tr.final_config().flea_set();
            let w = tr.window();
            let in_orthant = fleas
                .iter()
                .filter(|&&x| w.coords(x).iter().all(|&v| v >= 0))
                .count();
            Ok((
                Tally::from_hits([in_orthant <= p.bound]),
                Tally::from_hits([fleas.len() <= orthants * p.bound]),
            ))
        })
        .try_reduce(
            || (Tally::default(), Tally::default()),
            |a, b| Ok((a.0.merge(b.0), a.1.merge(b.1))),
        )?;
    let lhs = EstimateWithCI::wilson_one_sided(lhs.successes, lhs.reps, level);
    let rhs = EstimateWithCI::wilson_one_sided(rhs.successes, rhs.reps, level)
        .powf(1.0 / orthants as f64);
    Ok(OrthantReport {
        params: *p,
        violation: lhs.ci_low > rhs.ci_high,
        lhs,
        rhs,
    })
}

/// Jump counts and birth windows along witnessing animal paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathDiagnostics {
    /// Distinct arrows used by the witness paths.
    pub jumps: usize,
    /// Smallest birth window; `None` when no path jumps.
    pub min_window: Option<f64>,
    pub reached: usize,
    pub unreachable: usize,
}

#[derive(Debug, Clone, Copy)]
struct Arrival {
    time: f64,
    id: u64,
    from: u32,
    // index of the parent's arrival in `arrivals`, if it arrived by an arrow
    parent: Option<usize>,
}

/// Follows animal active paths from `sources` at `t_start` (animals only,
/// everything else empty) and, for each target `(site, time)`, extracts
/// the path through first-arrival pointers. For every arrow on a path the
/// birth window runs from the arrow until the next jump on the path, the
/// next animal death at either endpoint, or the end of the path,
/// whichever comes first.
pub fn path_diagnostics(
    log: &EventLog,
    sources: &SiteSet,
    t_start: f64,
    targets: &[(usize, f64)],
) -> Result<PathDiagnostics> {
    let window = log.window().clone();
    let t_end = targets.iter().map(|t| t.1).fold(t_start, f64::max);
    let init = Configuration::from_sets(window.clone(), sources, &SiteSet::new())?;
    let traj = run_animals_only(log, &init, t_start, t_end)?;

    // arrivals[k] and, per site, the occupancy spells (arrival index, death time)
    let mut arrivals: Vec<Arrival> = Vec::new();
    let mut spells: Vec<Vec<(usize, f64)>> = vec![Vec::new(); window.len()];
    let mut current: Vec<Option<usize>> = vec![None; window.len()];
    for &x in sources {
        arrivals.push(Arrival {
            time: t_start,
            id: 0,
            from: x as u32,
            parent: None,
        });
        current[x] = Some(arrivals.len() - 1);
    }
    let marks = log.marks();
    for c in traj.changes() {
        let x = c.site as usize;
        if c.new.has_animal() && !c.old.has_animal() {
            let m = marks
                .binary_search_by_key(&c.mark_id, |m| m.id)
                .map(|k| &marks[k])
                .map_err(|_| Error::InvalidMark("missing mark".into()))?;
            let parent = current[m.site as usize];
            arrivals.push(Arrival {
                time: c.time,
                id: c.mark_id,
                from: m.site,
                parent,
            });
            current[x] = Some(arrivals.len() - 1);
        } else if !c.new.has_animal() && c.old.has_animal() {
            if let Some(k) = current[x].take() {
                spells[x].push((k, c.time));
            }
        }
    }
    for (x, cur) in current.iter().enumerate() {
        if let Some(k) = *cur {
            spells[x].push((k, f64::INFINITY));
        }
    }
    for s in &mut spells {
        s.sort_by(|a, b| arrivals[a.0].time.total_cmp(&arrivals[b.0].time));
    }
    let site_of: Vec<usize> = {
        let mut v = vec![0; arrivals.len()];
        for (x, s) in spells.iter().enumerate() {
            for &(k, _) in s {
                v[k] = x;
            }
        }
        v
    };

    let death_after = |x: usize, time: f64, id: u64| -> f64 {
        log.next_in_stream(MarkKind::AnimalDeath, x, 0, time, id)
            .map_or(f64::INFINITY, |m| m.time)
    };

    let mut used: BTreeSet<u64> = BTreeSet::new();
    let mut min_window: Option<f64> = None;
    let (mut reached, mut unreachable) = (0, 0);
    for &(z, tau) in targets {
        let spell = spells[z]
            .iter()
            .find(|&&(k, death)| arrivals[k].time <= tau && tau < death);
        let Some(&(mut k, _)) = spell else {
            unreachable += 1;
            continue;
        };
        reached += 1;
        // walk back to the source; `next_jump` is the time of the jump
        // following the current arrival along the path
        let mut next_jump = tau;
        loop {
            let a = arrivals[k];
            let Some(parent) = a.parent else { break };
            let x = site_of[k];
            used.insert(a.id);
            let host_death =
                death_after(x, a.time, a.id).min(death_after(a.from as usize, a.time, a.id));
            let w = next_jump.min(host_death) - a.time;
            min_window = Some(min_window.map_or(w, |m: f64| m.min(w)));
            next_jump = a.time;
            k = parent;
        }
    }
    Ok(PathDiagnostics {
        jumps: used.len(),
        min_window,
        reached,
        unreachable,
    })
}

/// Targets for block diagnostics: sites of the union of event-A cubes,
/// each at time `T + 1`.
pub fn block_targets(spec: &BlockSpec, window: &Window) -> Vec<(usize, f64)> {
    let sites: SiteSet = spec.cubes_a(window).into_iter().flatten().collect();
    sites.into_iter().map(|x| (x, spec.horizon())).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Quantiles {
    pub mean: f64,
    pub q50: f64,
    pub q90: f64,
    /// The `1 - ε` quantile (`ε` for birth windows).
    pub q_eps: f64,
}

impl Quantiles {
    /// Empirical quantiles; `upper` selects the `1 - ε` tail.
    pub fn of(mut v: Vec<f64>, eps: f64, upper: bool) -> Option<Self> {
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[(((v.len() - 1) as f64) * p).round() as usize];
        Some(Quantiles {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q50: q(0.5),
            q90: q(0.9),
            q_eps: q(if upper { 1.0 - eps } else { eps }),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryStats {
    pub n: Option<Quantiles>,
    pub n_plus: Option<Quantiles>,
    pub flea_count: Option<Quantiles>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsSummary {
    pub jumps: Option<Quantiles>,
    pub min_window: Option<Quantiles>,
    /// Fraction of replicates with at most `jumps.q_eps` jumps and a
    /// smallest window of at least `min_window.q_eps`.
    pub joint_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockReport {
    pub spec: BlockSpec,
    pub reps: u64,
    pub event_a: EstimateWithCI,
    pub event_b: EstimateWithCI,
    pub n_stats: BoundaryStats,
    pub diagnostics: DiagnosticsSummary,
}

struct BlockRep {
    outcome: BlockOutcome,
    n: Option<(usize, usize, usize)>,
    jumps: usize,
    window: Option<f64>,
}

/// Replicate-parallel estimate of both block events with boundary counts
/// (from a separate truncation-`L` run, when `L > n`) and path diagnostics.
pub fn estimate_block_events(
    spec: &BlockSpec,
    reps: u64,
    seed: u64,
    level: f64,
) -> Result<BlockReport> {
    let window = spec.window()?;
    let targets = block_targets(spec, &window);
    let cube: SiteSet = spec.seed_cube(&window).into_iter().collect();
    let runs: Vec<BlockRep> = (0..reps)
        .into_par_iter()
        .map(|i| -> Result<BlockRep> {
            let log = spec.generate_log(derive_seed(seed, 5, i))?;
            let outcome = block_events_on_log(spec, &log)?;
            let diag = path_diagnostics(&log, &cube, 0.0, &targets)?;
            let n = if spec.l > spec.n {
                let tr = truncated_flea_run(
                    spec.dim,
                    spec.n,
                    spec.l,
                    spec.t,
                    spec.rates,
                    spec.burn_in,
                    derive_seed(seed, 6, i),
                )?;
                Some((
                    compute_n(&tr, spec.l, spec.t)?.value,
                    compute_n_plus(&tr, spec.l, spec.t)?.value,
                    tr.final_config().flea_count(),
                ))
            } else {
                None
            };
            Ok(BlockRep {
                outcome,
                n,
                jumps: diag.jumps,
                window: diag.min_window,
            })
        })
        .collect::<Result<_>>()?;
    let a = Tally::from_hits(runs.iter().map(|r| r.outcome.event_a));
    let b = Tally::from_hits(runs.iter().map(|r| r.outcome.event_b));
    let ns: Vec<_> = runs.iter().filter_map(|r| r.n).collect();
    let eps = spec.epsilon;
    let n_stats = BoundaryStats {
        n: Quantiles::of(ns.iter().map(|v| v.0 as f64).collect(), eps, true),
        n_plus: Quantiles::of(ns.iter().map(|v| v.1 as f64).collect(), eps, true),
        flea_count: Quantiles::of(ns.iter().map(|v| v.2 as f64).collect(), eps, true),
    };
    let jumps = Quantiles::of(runs.iter().map(|r| r.jumps as f64).collect(), eps, true);
    let windows = Quantiles::of(runs.iter().filter_map(|r| r.window).collect(), eps, false);
    let joint_fraction = match (&jumps, &windows) {
        (Some(j), Some(w)) if !runs.is_empty() => Some(
            runs.iter()
                .filter(|r| r.jumps as f64 <= j.q_eps && r.window.is_none_or(|x| x >= w.q_eps))
                .count() as f64
                / runs.len() as f64,
        ),
        _ => None,
    };
    Ok(BlockReport {
        spec: *spec,
        reps,
        event_a: a.estimate(level),
        event_b: b.estimate(level),
        n_stats,
        diagnostics: DiagnosticsSummary {
            jumps,
            min_window: windows,
            joint_fraction,
        },
    })
}
