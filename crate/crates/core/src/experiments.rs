//! Replicate-parallel experiments built from the other modules: survival
//! scans in `μ`, block events read off the flea dual, and the
//! factorization test for hitting probabilities at large times.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::blocks::{BlockOutcome, BlockSpec, CubeWatcher};
use crate::dual::{run_flea_dual, sites_in_window, AnimalHistory};
use crate::error::{Error, Result};
use crate::estimate::{EstimateWithCI, Tally};
use crate::events::{EventLog, Rates};
use crate::lattice::{Configuration, SiteSet, SiteState, Window};
use crate::rng::derive_seed;
use crate::simulate::{burn_in_animals, run_animals_only, Evolver};

#[derive(Debug, Clone, Serialize)]
pub struct ScanParams {
    pub dim: usize,
    pub radius: u32,
    pub lambda: f64,
    pub delta: f64,
    /// Ascending, nonnegative.
    pub mu_grid: Vec<f64>,
    pub horizon: f64,
    pub burn_in: f64,
    /// Fleas start on `[-n, n]^d`.
    pub n: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub mu: f64,
    pub survival: EstimateWithCI,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub params: ScanParams,
    pub reps: u64,
    pub points: Vec<ScanPoint>,
    /// Linear interpolation of the first crossing of 1/2 by the point estimates.
    pub mu_star: Option<f64>,
    /// Every replicate's survival indicator is nondecreasing along the grid.
    pub monotone_per_seed: bool,
}

/// Survival indicators of one replicate along the `μ` grid. The log is
/// drawn once at the largest `μ` and thinned for the others.
pub fn survival_along_grid(p: &ScanParams, seed: u64) -> Result<Vec<bool>> {
    let mu_max = p.mu_grid.last().copied().unwrap_or(0.0);
    let window = Arc::new(Window::centered(p.dim, p.radius, None)?);
    let log = EventLog::generate(
        window.clone(),
        -p.burn_in,
        p.horizon,
        Rates::new(p.lambda, mu_max, p.delta)?,
        seed,
    )?;
    let mut init = burn_in_animals(&log, -p.burn_in, 0.0)?;
    init.add_fleas(window.cube(&vec![0; p.dim], p.n).ok_or_else(|| {
        Error::InvalidWindow(format!("seed cube of radius {} does not fit", p.n))
    })?);
    p.mu_grid
        .iter()
        .map(|&mu| {
            let sub = log.thin_fleas(mu)?;
            let mut ev = Evolver::new(&sub, init.clone(), 0.0)?;
            ev.advance(p.horizon)?;
            Ok(ev.flea_count() > 0)
        })
        .collect()
}

pub fn survival_scan(p: &ScanParams, reps: u64, seed: u64, level: f64) -> Result<ScanReport> {
    if p.mu_grid.is_empty() {
        return Err(Error::InvalidParameter("empty μ grid".into()));
    }
    if p.mu_grid.iter().any(|&m| !(m >= 0.0 && m.is_finite()))
        || p.mu_grid.windows(2).any(|w| w[0] > w[1])
    {
        return Err(Error::InvalidParameter(
            "μ grid must be nonnegative and ascending".into(),
        ));
    }
    if !(p.horizon > 0.0) || !(p.burn_in >= 0.0) {
        return Err(Error::InvalidParameter(
            "horizon must be positive and burn-in nonnegative".into(),
        ));
    }
    let runs: Vec<Vec<bool>> = (0..reps)
        .into_par_iter()
        .map(|i| survival_along_grid(p, derive_seed(seed, 8, i)))
        .collect::<Result<_>>()?;
    let monotone_per_seed = runs.iter().all(|r| r.windows(2).all(|w| w[0] <= w[1]));
    let points: Vec<ScanPoint> = p
        .mu_grid
        .iter()
        .enumerate()
        .map(|(j, &mu)| ScanPoint {
            mu,
            survival: Tally::from_hits(runs.iter().map(|r| r[j])).estimate(level),
        })
        .collect();
    let mu_star = crossing(&points, 0.5);
    Ok(ScanReport {
        params: p.clone(),
        reps,
        points,
        mu_star,
        monotone_per_seed,
    })
}

fn crossing(points: &[ScanPoint], level: f64) -> Option<f64> {
    let first = points.first()?;
    if first.survival.point >= level {
        return Some(first.mu);
    }
    points
        .windows(2)
        .find(|w| w[1].survival.point >= level)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let f = (level - a.survival.point) / (b.survival.point - a.survival.point);
            a.mu + f * (b.mu - a.mu)
        })
}

/// Block events read off the flea dual: `d` is placed at `anchor` and the
/// dual is run back for `T + 1`. Event A asks for a full event-A cube in
/// the dual set at backward time `T + 1`, event B for a full event-B cube
/// at some backward time in `[1, T + 1]`. The log must cover
/// `[anchor - T - 1 - burn_in, anchor]` on the block window; animals are
/// burned in over the first `burn_in` of that range.
pub fn dual_block_events_on_log(
    spec: &BlockSpec,
    log: &EventLog,
    anchor: f64,
    d: &SiteSet,
) -> Result<BlockOutcome> {
    let window = spec.window()?;
    if **log.window() != *window {
        return Err(Error::WindowMismatch);
    }
    let bottom = anchor - spec.horizon();
    let (t0, t1) = log.time_window();
    if t0 > bottom - spec.burn_in || t1 < anchor {
        return Err(Error::InvalidTimeRange(
            t0,
            t1,
            format!("log must cover [{}, {anchor}]", bottom - spec.burn_in),
        ));
    }
    let animals = burn_in_animals(log, bottom - spec.burn_in, bottom)?;
    let history = AnimalHistory::from_trajectory(&run_animals_only(log, &animals, bottom, anchor)?);
    let dual = run_flea_dual(log, d, anchor, spec.horizon(), &history)?;

    let mut watch = CubeWatcher::new(window.len(), &spec.cubes_b(&window), d);
    let mut event_b = false;
    let mut checked = false;
    for c in dual.changes() {
        if c.s > 1.0 && !checked {
            event_b |= watch.any_full();
            checked = true;
        }
        watch.update(c.site as usize, !c.added, c.added);
        if checked {
            event_b |= watch.any_full();
        }
    }
    event_b |= watch.any_full();
    let fin = dual.final_set();
    let event_a = spec
        .cubes_a(&window)
        .iter()
        .any(|c| c.iter().all(|x| fin.contains(x)));
    Ok(BlockOutcome { event_a, event_b })
}

#[derive(Debug, Clone, Serialize)]
pub struct DualBlockReport {
    pub spec: BlockSpec,
    pub anchor: f64,
    pub reps: u64,
    pub event_a: EstimateWithCI,
    pub event_b: EstimateWithCI,
}

/// Replicate-parallel dual block estimate with `D = [-n, n]^d`.
pub fn dual_block_estimate(
    spec: &BlockSpec,
    anchor: f64,
    reps: u64,
    seed: u64,
    level: f64,
) -> Result<DualBlockReport> {
    let window = spec.window()?;
    let d: SiteSet = spec.seed_cube(&window).into_iter().collect();
    let t0 = anchor - spec.horizon() - spec.burn_in;
    let (a, b) = (0..reps)
        .into_par_iter()
        .map(|i| -> Result<(Tally, Tally)> {
            let log = EventLog::generate(
                window.clone(),
                t0,
                anchor,
                spec.rates,
                derive_seed(seed, 10, i),
            )?;
            let o = dual_block_events_on_log(spec, &log, anchor, &d)?;
            Ok((Tally::from_hits([o.event_a]), Tally::from_hits([o.event_b])))
        })
        .try_reduce(
            || (Tally::default(), Tally::default()),
            |x, y| Ok((x.0.merge(y.0), x.1.merge(y.1))),
        )?;
    Ok(DualBlockReport {
        spec: *spec,
        anchor,
        reps,
        event_a: a.estimate(level),
        event_b: b.estimate(level),
    })
}

/// Default speed constant for the window padding is `λ`.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceParams {
    pub dim: usize,
    /// `None` picks `⌈1.25 · required⌉`.
    pub radius: Option<u32>,
    pub rates: Rates,
    pub b: Vec<Vec<i32>>,
    pub d: Vec<Vec<i32>>,
    /// Ascending, nonnegative.
    pub t_grid: Vec<f64>,
    pub burn_in: f64,
    /// Speed constant `c` in the padding rule; `None` means `λ`.
    pub speed: Option<f64>,
}

impl ConvergenceParams {
    /// Smallest radius allowed: `diam(B ∪ D)/2 + c · t_max`, plus the
    /// distance of the set's midpoint from the origin.
    pub fn required_radius(&self) -> f64 {
        let pts: Vec<&Vec<i32>> = self.b.iter().chain(&self.d).collect();
        let mut reach = 0.0f64;
        for axis in 0..self.dim {
            let lo = pts.iter().map(|p| p[axis]).min().unwrap_or(0) as f64;
            let hi = pts.iter().map(|p| p[axis]).max().unwrap_or(0) as f64;
            reach = reach.max((hi - lo) / 2.0 + ((hi + lo) / 2.0).abs());
        }
        let t_max = self.t_grid.iter().copied().fold(0.0, f64::max);
        reach + self.speed.unwrap_or(self.rates.lambda) * t_max
    }

    pub fn resolved_radius(&self) -> u32 {
        self.radius
            .unwrap_or_else(|| (1.25 * self.required_radius()).ceil() as u32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b.is_empty() || self.d.is_empty() {
            return Err(Error::InvalidParameter("B and D must be nonempty".into()));
        }
        if self.b.iter().chain(&self.d).any(|p| p.len() != self.dim) {
            return Err(Error::InvalidParameter(
                "site dimension does not match".into(),
            ));
        }
        if self.t_grid.is_empty()
            || self.t_grid.iter().any(|&t| !(t >= 0.0 && t.is_finite()))
            || self.t_grid.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidParameter(
                "t grid must be nonempty, nonnegative and increasing".into(),
            ));
        }
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return Err(Error::InvalidParameter(
                "burn-in must be nonnegative".into(),
            ));
        }
        let need = self.required_radius();
        if (self.resolved_radius() as f64) < need {
            return Err(Error::Precondition(format!(
                "window radius {} is below the padding bound {need:.3}",
                self.resolved_radius()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub t: f64,
    /// `P(B_t ∩ D ≠ ∅)` from fleas on `B`.
    pub lhs: EstimateWithCI,
    /// `P(B_{t/2} ≠ ∅)` from fleas on `B`.
    pub survival: EstimateWithCI,
    /// `P(B_{t/2} ∩ D ≠ ∅)` from fleas on every window site.
    pub hit_from_all: EstimateWithCI,
    pub rhs: EstimateWithCI,
    pub residual: f64,
    /// `lhs` plus `rhs` half-widths.
    pub residual_half_width: f64,
    /// Forward set at `t/2` and flea dual from `(D, t)` at `t/2` both
    /// nonempty and disjoint.
    pub nonintersection: EstimateWithCI,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceChecks {
    pub residual_decreasing: bool,
    pub nonintersection_decreasing: bool,
    pub residual_within_nonintersection: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub params: ConvergenceParams,
    pub radius: u32,
    pub reps: u64,
    pub level: f64,
    pub rows: Vec<ConvergenceRow>,
    pub checks: ConvergenceChecks,
}

/// `v_j ≤ v_i + 2·√(h_i² + h_j²)` for every `i < j`.
pub fn decreasing_within(values: &[(f64, f64)]) -> bool {
    values.iter().enumerate().all(|(i, &(vi, hi))| {
        values[i + 1..]
            .iter()
            .all(|&(vj, hj)| vj <= vi + 2.0 * (hi * hi + hj * hj).sqrt())
    })
}

#[derive(Default, Clone, Copy)]
struct Counts {
    lhs: Tally,
    survival: Tally,
    hit_all: Tally,
    nonint: Tally,
}

impl Counts {
    fn merge(self, o: Counts) -> Counts {
        Counts {
            lhs: self.lhs.merge(o.lhs),
            survival: self.survival.merge(o.survival),
            hit_all: self.hit_all.merge(o.hit_all),
            nonint: self.nonint.merge(o.nonint),
        }
    }
}

fn convergence_replicate(
    p: &ConvergenceParams,
    window: &Arc<Window>,
    seed: u64,
    i: u64,
) -> Result<Vec<Counts>> {
    let b = sites_in_window(window, &p.b);
    let d = sites_in_window(window, &p.d);
    let t_max = p
        .t_grid
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(f64::MIN_POSITIVE);
    let mut out = vec![Counts::default(); p.t_grid.len()];

    // forward from B, flea dual from D, on one log
    let log = EventLog::generate(
        window.clone(),
        -p.burn_in,
        t_max,
        p.rates,
        derive_seed(seed, 11, i),
    )?;
    let animals = burn_in_animals(&log, -p.burn_in, 0.0)?;
    let history = AnimalHistory::from_trajectory(&run_animals_only(&log, &animals, 0.0, t_max)?);
    let mut init = animals.clone();
    init.add_fleas(b.iter().copied());
    let mut queries: Vec<(f64, usize, bool)> = Vec::new();
    for (j, &t) in p.t_grid.iter().enumerate() {
        queries.push((t / 2.0, j, true));
        queries.push((t, j, false));
    }
    queries.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.2.cmp(&a.2)));
    let mut ev = Evolver::new(&log, init, 0.0)?;
    for (t, j, half) in queries {
        ev.advance(t)?;
        let fleas = ev.config().flea_set();
        if half {
            out[j].survival.record(!fleas.is_empty());
            let tt = p.t_grid[j];
            let nonint = if fleas.is_empty() {
                false
            } else if tt == 0.0 {
                fleas.is_disjoint(&d)
            } else {
                let dual = run_flea_dual(&log, &d, tt, tt / 2.0, &history)?;
                let back = dual.final_set();
                !back.is_empty() && fleas.is_disjoint(back)
            };
            out[j].nonint.record(nonint);
        } else {
            out[j].lhs.record(!fleas.is_disjoint(&d));
        }
    }

    // fleas everywhere, on an independent log
    let log2 = EventLog::generate(
        window.clone(),
        -p.burn_in,
        t_max,
        p.rates,
        derive_seed(seed, 12, i),
    )?;
    let mut everywhere = burn_in_animals(&log2, -p.burn_in, 0.0)?;
    everywhere.add_fleas(0..window.len());
    let mut ev = Evolver::new(&log2, everywhere, 0.0)?;
    for (j, &t) in p.t_grid.iter().enumerate() {
        ev.advance(t / 2.0)?;
        out[j]
            .hit_all
            .record(ev.config().flea_set().iter().any(|x| d.contains(x)));
    }
    Ok(out)
}

pub fn convergence_test(
    p: &ConvergenceParams,
    reps: u64,
    seed: u64,
    level: f64,
) -> Result<ConvergenceReport> {
    p.validate()?;
    let radius = p.resolved_radius();
    let window = Arc::new(Window::centered(p.dim, radius, None)?);
    let counts = (0..reps)
        .into_par_iter()
        .map(|i| convergence_replicate(p, &window, seed, i))
        .try_reduce(
            || vec![Counts::default(); p.t_grid.len()],
            |a, b| Ok(a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect()),
        )?;
    let b = sites_in_window(&window, &p.b);
    let d = sites_in_window(&window, &p.d);
    let rows: Vec<ConvergenceRow> = p
        .t_grid
        .iter()
        .zip(&counts)
        .map(|(&t, c)| {
            let lhs = c.lhs.estimate(level);
            let survival = c.survival.estimate(level);
            let hit_from_all = c.hit_all.estimate(level);
            // at t = 0 the split is degenerate and both sides are the indicator
            let rhs = if t == 0.0 {
                EstimateWithCI::exact(if b.is_disjoint(&d) { 0.0 } else { 1.0 }, c.lhs.reps)
            } else {
                survival.product(&hit_from_all)
            };
            ConvergenceRow {
                t,
                residual: (lhs.point - rhs.point).abs(),
                residual_half_width: lhs.half_width() + rhs.half_width(),
                nonintersection: c.nonint.estimate(level),
                lhs,
                survival,
                hit_from_all,
                rhs,
            }
        })
        .collect();
    let checks = ConvergenceChecks {
        residual_decreasing: decreasing_within(
            &rows
                .iter()
                .map(|r| (r.residual, r.residual_half_width))
                .collect::<Vec<_>>(),
        ),
        nonintersection_decreasing: decreasing_within(
            &rows
                .iter()
                .map(|r| (r.nonintersection.point, r.nonintersection.half_width()))
                .collect::<Vec<_>>(),
        ),
        residual_within_nonintersection: rows.iter().all(|r| {
            r.residual
                <= r.nonintersection.point + r.residual_half_width + r.nonintersection.half_width()
        }),
    };
    Ok(ConvergenceReport {
        params: p.clone(),
        radius,
        reps,
        level,
        rows,
        checks,
    })
}

/// Fleas on every site of a configuration, as state 2 or 3 by host.
pub fn fleas_everywhere(c: &Configuration) -> Configuration {
    let states = c
        .states()
        .iter()
        .map(|s| s.with_fleas(true))
        .collect::<Vec<SiteState>>();
    Configuration::from_states(c.window().clone(), states).expect("same window")
}
