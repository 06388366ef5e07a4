//! Reverse-time traversals of an [`EventLog`].
//!
//! The animal dual `A^T_s` starts from a set `D` at time `T` and walks
//! down the log: a death mark at `x` removes `x`, an arrow `y → x` with
//! `x` in the dual adds `y`. The flea dual `B^T_s` does the same with flea
//! marks, but a flea arrow only counts when both endpoints host an animal
//! at the mark time and a flea death mark only counts at a hostless site.
//! Those occupancy questions are answered by an [`AnimalHistory`] built
//! from a forward run on the same log, so both directions look at exactly
//! the same animal data.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{EstimateWithCI, Tally};
use crate::events::{join_coords, EventLog, MarkKind, Rates};
use crate::format::fmt_f64;
use crate::lattice::{Configuration, SiteSet, Window};
use crate::rng::{derive_seed, replicate_rng};
use crate::simulate::{burn_in_animals, run_animals_only, run_forward, Evolver, Trajectory};

/// Per-site animal occupancy over a time range, queried in `(time, id)` order.
#[derive(Debug, Clone)]
pub struct AnimalHistory {
    window: Arc<Window>,
    t_start: f64,
    t_end: f64,
    initial: Vec<bool>,
    // (time, mark id, hosted after the change)
    per_site: Vec<Vec<(f64, u64, bool)>>,
}

impl AnimalHistory {
    pub fn from_trajectory(tr: &Trajectory) -> Self {
        let window = tr.window().clone();
        let initial: Vec<bool> = tr
            .initial()
            .states()
            .iter()
            .map(|s| s.has_animal())
            .collect();
        let mut per_site = vec![Vec::new(); window.len()];
        for c in tr.changes() {
            if c.old.has_animal() != c.new.has_animal() {
                per_site[c.site as usize].push((c.time, c.mark_id, c.new.has_animal()));
            }
        }
        let (t_start, t_end) = tr.time_range();
        AnimalHistory {
            window,
            t_start,
            t_end,
            initial,
            per_site,
        }
    }

    pub fn time_range(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }

    /// Whether `site` hosts an animal just before the mark `(time, id)`.
    #[inline]
    pub fn hosted_before(&self, site: usize, time: f64, id: u64) -> bool {
        let h = &self.per_site[site];
        let k = h.partition_point(|&(t, i, _)| t < time || (t == time && i < id));
        if k == 0 {
            self.initial[site]
        } else {
            h[k - 1].2
        }
    }

    /// Animal set just after all marks with time `≤ t`.
    pub fn animals_at(&self, t: f64) -> SiteSet {
        (0..self.window.len())
            .filter(|&x| {
                let h = &self.per_site[x];
                let k = h.partition_point(|&(u, _, _)| u <= t);
                if k == 0 {
                    self.initial[x]
                } else {
                    h[k - 1].2
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DualKind {
    AnimalDual,
    FleaDual,
}

/// Membership change of the dual at reverse time `s = T - time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualChange {
    pub s: f64,
    pub site: u32,
    pub added: bool,
}

#[derive(Debug, Clone)]
pub struct DualTrajectory {
    window: Arc<Window>,
    anchor: f64,
    s_max: f64,
    kind: DualKind,
    initial: SiteSet,
    changes: Vec<DualChange>,
    final_set: SiteSet,
}

impl DualTrajectory {
    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn kind(&self) -> DualKind {
        self.kind
    }

    pub fn initial(&self) -> &SiteSet {
        &self.initial
    }

    pub fn changes(&self) -> &[DualChange] {
        &self.changes
    }

    /// Dual set at `s = s_max`.
    pub fn final_set(&self) -> &SiteSet {
        &self.final_set
    }

    /// Dual set after all changes with reverse time `≤ s`.
    pub fn set_at(&self, s: f64) -> SiteSet {
        let mut set = self.initial.clone();
        for c in self.changes.iter().take_while(|c| c.s <= s) {
            if c.added {
                set.insert(c.site as usize);
            } else {
                set.remove(&(c.site as usize));
            }
        }
        set
    }

    /// Same columns as forward trajectories; the state columns hold dual
    /// membership (0 or 1) and `time` is the absolute mark time.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["direction", "time", "site", "old_state", "new_state"])?;
        for c in &self.changes {
            let (old, new) = if c.added { ("0", "1") } else { ("1", "0") };
            w.write_record([
                "dual",
                &fmt_f64(self.anchor - c.s),
                &join_coords(&self.window.coords(c.site as usize)),
                old,
                new,
            ])?;
        }
        w.flush()
    }
}

fn check_dual_range(log: &EventLog, anchor: f64, s_max: f64) -> Result<()> {
    if !(s_max >= 0.0) {
        return Err(Error::InvalidTimeRange(
            anchor - s_max,
            anchor,
            "s_max must be nonnegative".into(),
        ));
    }
    log.check_range(anchor - s_max, anchor)
}

fn check_sites(window: &Window, d: &SiteSet) -> Result<()> {
    if d.iter().any(|&x| x >= window.len()) {
        return Err(Error::InvalidParameter(
            "dual start set leaves the window".into(),
        ));
    }
    Ok(())
}

/// Reverse traversal with a pluggable mark rule. `step` receives the mark
/// and the membership vector and returns the membership change, if any.
fn traverse(
    log: &EventLog,
    kind: DualKind,
    d: &SiteSet,
    anchor: f64,
    s_max: f64,
    mut step: impl FnMut(&crate::events::Mark, &[bool]) -> Option<(usize, bool)>,
) -> DualTrajectory {
    let window = log.window().clone();
    let mut member = vec![false; window.len()];
    for &x in d {
        member[x] = true;
    }
    let mut changes = Vec::new();
    for m in log.marks_between(anchor - s_max, anchor).iter().rev() {
        if let Some((x, add)) = step(m, &member) {
            member[x] = add;
            changes.push(DualChange {
                s: anchor - m.time,
                site: x as u32,
                added: add,
            });
        }
    }
    let final_set = member
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| i)
        .collect();
    DualTrajectory {
        window,
        anchor,
        s_max,
        kind,
        initial: d.clone(),
        changes,
        final_set,
    }
}

/// Animal dual `A^T_s`, `0 ≤ s ≤ s_max`, started from `d` at time `anchor`.
pub fn run_animal_dual(
    log: &EventLog,
    d: &SiteSet,
    anchor: f64,
    s_max: f64,
) -> Result<DualTrajectory> {
    check_dual_range(log, anchor, s_max)?;
    check_sites(log.window(), d)?;
    let window = log.window().clone();
    Ok(traverse(
        log,
        DualKind::AnimalDual,
        d,
        anchor,
        s_max,
        |m, member| match m.kind {
            MarkKind::AnimalDeath => member[m.site as usize].then_some((m.site as usize, false)),
            MarkKind::AnimalArrow => {
                let (y, x) = (m.site as usize, m.target as usize);
                (member[x] && !member[y] && window.can_give_birth(y)).then_some((y, true))
            }
            _ => None,
        },
    ))
}

/// Flea dual `B^T_s` given the animal history on `[anchor - s_max, anchor]`.
pub fn run_flea_dual(
    log: &EventLog,
    d: &SiteSet,
    anchor: f64,
    s_max: f64,
    animals: &AnimalHistory,
) -> Result<DualTrajectory> {
    check_dual_range(log, anchor, s_max)?;
    check_sites(log.window(), d)?;
    if animals.window != *log.window() {
        return Err(Error::WindowMismatch);
    }
    let (h0, h1) = animals.time_range();
    if h0 > anchor - s_max || h1 < anchor {
        return Err(Error::InvalidTimeRange(
            h0,
            h1,
            format!(
                "animal history does not cover [{}, {anchor}]",
                anchor - s_max
            ),
        ));
    }
    let window = log.window().clone();
    Ok(traverse(
        log,
        DualKind::FleaDual,
        d,
        anchor,
        s_max,
        |m, member| match m.kind {
            MarkKind::FleaDeath => {
                let x = m.site as usize;
                (member[x] && !animals.hosted_before(x, m.time, m.id)).then_some((x, false))
            }
            MarkKind::FleaArrow => {
                let (y, x) = (m.site as usize, m.target as usize);
                (member[x]
                    && !member[y]
                    && window.can_give_birth(y)
                    && animals.hosted_before(x, m.time, m.id)
                    && animals.hosted_before(y, m.time, m.id))
                .then_some((y, true))
            }
            _ => None,
        },
    ))
}

/// Window sites among `coords`; sites outside the window are dropped.
pub fn sites_in_window(window: &Window, coords: &[Vec<i32>]) -> SiteSet {
    coords.iter().filter_map(|c| window.index_of(c)).collect()
}

/// Parameters for the two-sided Monte Carlo duality check.
#[derive(Debug, Clone)]
pub struct DualityCheck {
    pub window: Arc<Window>,
    pub rates: Rates,
    pub b: Vec<Vec<i32>>,
    pub c: Vec<Vec<i32>>,
    pub d: Vec<Vec<i32>>,
    pub t: f64,
    pub burn_in: f64,
    pub reps: u64,
    pub seed: u64,
    pub level: f64,
}

/// Estimates `P^B(A_t∩C≠∅, B_t∩D≠∅)` by forward runs and
/// `P̃^D(A^t_t(C)∩A_0≠∅, B^t_t(D)∩B≠∅)` by dual runs on independent logs.
/// In both cases the animals at time 0 come from a burn-in over
/// `[-burn_in, 0]` on the replicate's own log.
pub fn check_duality_distributional(p: &DualityCheck) -> Result<(EstimateWithCI, EstimateWithCI)> {
    if !(p.burn_in > 0.0) || !(p.t >= 0.0) {
        return Err(Error::InvalidParameter(
            "need burn_in > 0 and t >= 0".into(),
        ));
    }
    let w = &p.window;
    let (b, c, d) = (
        sites_in_window(w, &p.b),
        sites_in_window(w, &p.c),
        sites_in_window(w, &p.d),
    );

    let lhs: Vec<bool> = (0..p.reps)
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let log = EventLog::generate(
                w.clone(),
                -p.burn_in,
                p.t.max(f64::MIN_POSITIVE),
                p.rates,
                derive_seed(p.seed, 1, i),
            )?;
            let mut init: Configuration = burn_in_animals(&log, -p.burn_in, 0.0)?;
            init.add_fleas(b.iter().copied());
            let mut ev = Evolver::new(&log, init, 0.0)?;
            ev.advance(p.t)?;
            let cfg = ev.config();
            Ok(c.iter().any(|&x| cfg.get(x).has_animal())
                && d.iter().any(|&x| cfg.get(x).has_fleas()))
        })
        .collect::<Result<_>>()?;

    let rhs: Vec<bool> = (0..p.reps)
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let log = EventLog::generate(
                w.clone(),
                -p.burn_in,
                p.t.max(f64::MIN_POSITIVE),
                p.rates,
                derive_seed(p.seed, 2, i),
            )?;
            let a0 = burn_in_animals(&log, -p.burn_in, 0.0)?;
            let history = AnimalHistory::from_trajectory(&run_animals_only(&log, &a0, 0.0, p.t)?);
            let adual = run_animal_dual(&log, &c, p.t, p.t)?;
            let fdual = run_flea_dual(&log, &d, p.t, p.t, &history)?;
            Ok(adual.final_set().iter().any(|&x| a0.get(x).has_animal())
                && fdual.final_set().iter().any(|x| b.contains(x)))
        })
        .collect::<Result<_>>()?;

    Ok((
        Tally::from_hits(lhs).estimate(p.level),
        Tally::from_hits(rhs).estimate(p.level),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct PathwiseReport {
    pub cases: u64,
    /// Case indices where the forward and dual indicators disagree.
    pub mismatches: Vec<u64>,
}

/// Random pathwise cases on `window`: rates, `T`, `A_0`, `B_0` and `D` are
/// drawn per case, and `1{B_T ∩ D ≠ ∅}` from a forward run is compared with
/// `1{B^T_T(D) ∩ B_0 ≠ ∅}` from the flea dual on the same log.
pub fn check_duality_pathwise(
    window: Arc<Window>,
    cases: u64,
    t_max: f64,
    seed: u64,
) -> Result<PathwiseReport> {
    if !(t_max > 0.0) {
        return Err(Error::InvalidParameter("t_max must be positive".into()));
    }
    let mismatches: Vec<Option<u64>> = (0..cases)
        .into_par_iter()
        .map(|case| -> Result<Option<u64>> {
            let mut rng = replicate_rng(seed, case);
            let rates = Rates::new(
                rng.random_range(0.2..4.0),
                rng.random_range(0.0..4.0),
                rng.random_range(0.0..2.0),
            )?;
            let t = rng.random_range(0.05..t_max);
            let mut pick =
                |p: f64| -> SiteSet { (0..window.len()).filter(|_| rng.random_bool(p)).collect() };
            let (a0, b0, d) = (pick(0.6), pick(0.3), pick(0.3));
            let log =
                EventLog::generate(window.clone(), 0.0, t, rates, derive_seed(seed, 13, case))?;
            let fwd = run_forward(
                &log,
                &Configuration::from_sets(window.clone(), &a0, &b0)?,
                0.0,
                t,
            )?;
            let lhs = !fwd.final_config().flea_set().is_disjoint(&d);
            let dual = run_flea_dual(&log, &d, t, t, &AnimalHistory::from_trajectory(&fwd))?;
            let rhs = !dual.final_set().is_disjoint(&b0);
            Ok((lhs != rhs).then_some(case))
        })
        .collect::<Result<_>>()?;
    Ok(PathwiseReport {
        cases,
        mismatches: mismatches.into_iter().flatten().collect(),
    })
}
