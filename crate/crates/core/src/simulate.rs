//! Forward evolution through an [`EventLog`].
//!
//! The process is replayed mark by mark in `(time, id)` order; there is no
//! time grid. Local rules:
//!
//! * animal arrow `x → y`: if `x` hosts an animal and `y` does not, `y`
//!   gains one (0→1, 2→3);
//! * animal death at `x`: 1→0, 3→2;
//! * flea arrow `x → y`: if `x` is in state 3 and `y` in state 1, `y`
//!   becomes 3;
//! * flea death mark at `x`: 2→0, nothing otherwise.
//!
//! Arrows whose source has `‖x‖∞ ≥ L` under a truncation radius `L` are inert.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::events::{join_coords, EventLog, Mark, MarkKind, Rates};
use crate::format::fmt_f64;
use crate::lattice::{state_leq, Configuration, SiteSet, SiteState, Window};

/// New state of the site touched by `m`, if it changes.
#[inline]
pub fn mark_effect(window: &Window, states: &[SiteState], m: &Mark) -> Option<(usize, SiteState)> {
    let x = m.site as usize;
    match m.kind {
        MarkKind::AnimalArrow => {
            let y = m.target as usize;
            (window.can_give_birth(x) && states[x].has_animal() && !states[y].has_animal())
                .then(|| (y, states[y].with_animal(true)))
        }
        MarkKind::AnimalDeath => states[x]
            .has_animal()
            .then(|| (x, states[x].with_animal(false))),
        MarkKind::FleaArrow => {
            let y = m.target as usize;
            (window.can_give_birth(x)
                && states[x] == SiteState::AnimalFleas
                && states[y] == SiteState::Animal)
                .then_some((y, SiteState::AnimalFleas))
        }
        MarkKind::FleaDeath => (states[x] == SiteState::Fleas).then_some((x, SiteState::Empty)),
    }
}

/// Applies one mark to a configuration.
pub fn apply_mark(c: &Configuration, m: &Mark) -> Result<Configuration> {
    let n = c.window().len();
    if m.site as usize >= n || m.target as usize >= n {
        return Err(Error::InvalidMark("endpoint outside window".into()));
    }
    let mut out = c.clone();
    if let Some((site, s)) = mark_effect(c.window(), c.states(), m) {
        out.set(site, s);
    }
    Ok(out)
}

/// One recorded state change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Change {
    pub time: f64,
    pub mark_id: u64,
    pub site: u32,
    pub old: SiteState,
    pub new: SiteState,
}

/// Incremental forward replay. Holds the configuration at the current time
/// and a cursor into the log.
pub struct Evolver<'a> {
    log: &'a EventLog,
    config: Configuration,
    cursor: usize,
    end: usize,
    time: f64,
    animals: usize,
    fleas: usize,
    animals_only: bool,
}

impl<'a> Evolver<'a> {
    pub fn new(log: &'a EventLog, init: Configuration, t_start: f64) -> Result<Self> {
        if init.window() != log.window() {
            return Err(Error::WindowMismatch);
        }
        log.check_range(t_start, t_start)?;
        let range = log.range_between(t_start, log.time_window().1);
        let animals = init.animal_count();
        let fleas = init.flea_count();
        Ok(Evolver {
            log,
            config: init,
            cursor: range.start,
            end: range.end,
            time: t_start,
            animals,
            fleas,
            animals_only: false,
        })
    }

    /// Ignore flea marks and drop any fleas from the initial state.
    pub fn animals_only(mut self) -> Self {
        self.animals_only = true;
        self.config.clear_fleas();
        self.fleas = 0;
        self
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn into_config(self) -> Configuration {
        self.config
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn animal_count(&self) -> usize {
        self.animals
    }

    pub fn flea_count(&self) -> usize {
        self.fleas
    }

    /// Applies every mark with time in `(current, t]` (the first call also
    /// includes marks exactly at the start time) and reports each change.
    pub fn advance_to(
        &mut self,
        t: f64,
        mut on_change: impl FnMut(&Mark, usize, SiteState, SiteState),
    ) -> Result<()> {
        if t < self.time || t > self.log.time_window().1 {
            return Err(Error::InvalidTimeRange(
                self.time,
                t,
                "cannot advance backwards or past the log".into(),
            ));
        }
        let marks = self.log.marks();
        let window = self.log.window().clone();
        while self.cursor < self.end && marks[self.cursor].time <= t {
            let m = &marks[self.cursor];
            self.cursor += 1;
            if self.animals_only && !matches!(m.kind, MarkKind::AnimalArrow | MarkKind::AnimalDeath)
            {
                continue;
            }
            if let Some((site, new)) = mark_effect(&window, self.config.states(), m) {
                let old = self.config.get(site);
                self.animals = self.animals + new.has_animal() as usize - old.has_animal() as usize;
                self.fleas = self.fleas + new.has_fleas() as usize - old.has_fleas() as usize;
                self.config.set(site, new);
                on_change(m, site, old, new);
            }
        }
        self.time = t;
        Ok(())
    }

    pub fn advance(&mut self, t: f64) -> Result<()> {
        self.advance_to(t, |_, _, _, _| {})
    }
}

/// Piecewise-constant record of a forward run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    initial: Configuration,
    final_config: Configuration,
    changes: Vec<Change>,
    t_start: f64,
    t_end: f64,
    extinction_animals: Option<f64>,
    extinction_fleas: Option<f64>,
    animals_only: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySummary {
    pub t_start: f64,
    pub t_end: f64,
    pub extinction_time_animals: Option<f64>,
    pub extinction_time_fleas: Option<f64>,
    pub final_animals: usize,
    pub final_fleas: usize,
    pub changes: usize,
}

impl Trajectory {
    pub fn initial(&self) -> &Configuration {
        &self.initial
    }

    pub fn final_config(&self) -> &Configuration {
        &self.final_config
    }

    pub fn changes(&self) -> &[Change] {
        &self.changes
    }

    pub fn window(&self) -> &Arc<Window> {
        self.initial.window()
    }

    pub fn time_range(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }

    pub fn is_animals_only(&self) -> bool {
        self.animals_only
    }

    /// First time the animal set is empty.
    pub fn extinction_time_animals(&self) -> Option<f64> {
        self.extinction_animals
    }

    /// First time the flea set is empty (`None` for animals-only runs).
    pub fn extinction_time_fleas(&self) -> Option<f64> {
        self.extinction_fleas
    }

    /// Configuration after every change with time `≤ t`.
    pub fn config_at(&self, t: f64) -> Configuration {
        let mut c = self.initial.clone();
        for ch in self.changes.iter().take_while(|ch| ch.time <= t) {
            c.set(ch.site as usize, ch.new);
        }
        c
    }

    /// Animal-set change sequence `(time, mark id, site, gained)`.
    pub fn animal_events(&self) -> Vec<(f64, u64, u32, bool)> {
        self.changes
            .iter()
            .filter(|c| c.old.has_animal() != c.new.has_animal())
            .map(|c| (c.time, c.mark_id, c.site, c.new.has_animal()))
            .collect()
    }

    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            t_start: self.t_start,
            t_end: self.t_end,
            extinction_time_animals: self.extinction_animals,
            extinction_time_fleas: self.extinction_fleas,
            final_animals: self.final_config.animal_count(),
            final_fleas: self.final_config.flea_count(),
            changes: self.changes.len(),
        }
    }

    /// `direction,time,site,old_state,new_state` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["direction", "time", "site", "old_state", "new_state"])?;
        let window = self.window();
        for c in &self.changes {
            w.write_record([
                "forward",
                &fmt_f64(c.time),
                &join_coords(&window.coords(c.site as usize)),
                &c.old.to_string(),
                &c.new.to_string(),
            ])?;
        }
        w.flush()
    }
}

fn run(
    log: &EventLog,
    init: Configuration,
    t_start: f64,
    t_end: f64,
    animals_only: bool,
) -> Result<Trajectory> {
    log.check_range(t_start, t_end)?;
    let initial = if animals_only {
        let mut c = init.clone();
        c.clear_fleas();
        c
    } else {
        init.clone()
    };
    let mut ev = Evolver::new(log, init, t_start)?;
    if animals_only {
        ev = ev.animals_only();
    }
    let mut extinction_animals = (ev.animal_count() == 0).then_some(t_start);
    let mut extinction_fleas = (!animals_only && ev.flea_count() == 0).then_some(t_start);
    let mut changes = Vec::new();
    let (mut animals, mut fleas) = (ev.animal_count(), ev.flea_count());
    ev.advance_to(t_end, |m, site, old, new| {
        changes.push(Change {
            time: m.time,
            mark_id: m.id,
            site: site as u32,
            old,
            new,
        });
        animals = animals + new.has_animal() as usize - old.has_animal() as usize;
        fleas = fleas + new.has_fleas() as usize - old.has_fleas() as usize;
        if animals == 0 && extinction_animals.is_none() {
            extinction_animals = Some(m.time);
        }
        if fleas == 0 && extinction_fleas.is_none() && !animals_only {
            extinction_fleas = Some(m.time);
        }
    })?;
    Ok(Trajectory {
        initial,
        final_config: ev.into_config(),
        changes,
        t_start,
        t_end,
        extinction_animals,
        extinction_fleas,
        animals_only,
    })
}

/// Full four-state evolution over `[t_start, t_end]`.
pub fn run_forward(
    log: &EventLog,
    init: &Configuration,
    t_start: f64,
    t_end: f64,
) -> Result<Trajectory> {
    run(log, init.clone(), t_start, t_end, false)
}

/// Animal dynamics only; fleas in `init` are discarded.
pub fn run_animals_only(
    log: &EventLog,
    init: &Configuration,
    t_start: f64,
    t_end: f64,
) -> Result<Trajectory> {
    run(log, init.clone(), t_start, t_end, true)
}

/// Animals evolved from all sites occupied at `t_from` up to `t_to` on the
/// given log. Approximates the upper invariant law; the finite burn-in and
/// the finite window both bias it towards more animals near the boundary
/// of time and fewer near the boundary of space.
pub fn burn_in_animals(log: &EventLog, t_from: f64, t_to: f64) -> Result<Configuration> {
    log.check_range(t_from, t_to)?;
    let init = Configuration::filled(log.window().clone(), SiteState::Animal);
    let mut ev = Evolver::new(log, init, t_from)?.animals_only();
    ev.advance(t_to)?;
    Ok(ev.into_config())
}

/// Burn-in sampler on a dedicated log over `[0, burn_in]`.
pub fn sample_upper_invariant_animals(
    window: Arc<Window>,
    lambda: f64,
    burn_in: f64,
    seed: u64,
) -> Result<Configuration> {
    if !(burn_in > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "burn_in must be positive, got {burn_in}"
        )));
    }
    let log = EventLog::generate(window, 0.0, burn_in, Rates::new(lambda, 0.0, 0.0)?, seed)?;
    burn_in_animals(&log, 0.0, burn_in)
}

/// Runs both initial states on the same log and checks `ζ¹_t ≤ ζ²_t` after
/// every mark in `[t_start, t_end]`.
pub fn check_monotone_coupling(
    log: &EventLog,
    lower: &Configuration,
    upper: &Configuration,
    t_start: f64,
    t_end: f64,
) -> Result<bool> {
    if !lower.leq(upper)? {
        return Err(Error::Precondition(
            "initial configurations are not ordered".into(),
        ));
    }
    if lower.window() != log.window() {
        return Err(Error::WindowMismatch);
    }
    log.check_range(t_start, t_end)?;
    let window = log.window().clone();
    let mut a = lower.states().to_vec();
    let mut b = upper.states().to_vec();
    for m in log.marks_between(t_start, t_end) {
        let ea = mark_effect(&window, &a, m);
        let eb = mark_effect(&window, &b, m);
        let mut touched = [usize::MAX; 2];
        if let Some((s, v)) = ea {
            a[s] = v;
            touched[0] = s;
        }
        if let Some((s, v)) = eb {
            b[s] = v;
            touched[1] = s;
        }
        if touched
            .iter()
            .any(|&s| s != usize::MAX && !state_leq(a[s], b[s]))
        {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `init` with fleas added on `sites` (state 3 where hosted, 2 otherwise).
pub fn with_fleas_on(init: &Configuration, sites: &SiteSet) -> Configuration {
    let mut c = init.clone();
    c.add_fleas(sites.iter().copied());
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::Rates;
    use crate::rng::replicate_rng;
    use rand::Rng;

    fn line(r: u32) -> Arc<Window> {
        Arc::new(Window::centered(1, r, None).unwrap())
    }

    fn two_site_config(x: SiteState, y: SiteState) -> Configuration {
        let w = Arc::new(Window::from_bounds(&[(0, 1)], None).unwrap());
        Configuration::from_states(w, vec![x, y]).unwrap()
    }

    #[test]
    fn local_rules() {
        use SiteState::*;
        let arrow = |k| Mark::arrow(k, 0.5, 0, 1);
        let death = |k| Mark::death(k, 0.5, 0);

        let c = two_site_config(AnimalFleas, Empty);
        assert_eq!(
            apply_mark(&c, &death(MarkKind::AnimalDeath))
                .unwrap()
                .get(0),
            Fleas
        );

        let c = two_site_config(AnimalFleas, Empty);
        assert_eq!(
            apply_mark(&c, &death(MarkKind::FleaDeath)).unwrap().get(0),
            AnimalFleas
        );
        let c = two_site_config(Fleas, Empty);
        assert_eq!(
            apply_mark(&c, &death(MarkKind::FleaDeath)).unwrap().get(0),
            Empty
        );

        let c = two_site_config(Animal, Fleas);
        assert_eq!(
            apply_mark(&c, &arrow(MarkKind::AnimalArrow))
                .unwrap()
                .get(1),
            AnimalFleas
        );
        let c = two_site_config(AnimalFleas, Empty);
        assert_eq!(
            apply_mark(&c, &arrow(MarkKind::AnimalArrow))
                .unwrap()
                .get(1),
            Animal
        );

        let c = two_site_config(Fleas, Animal);
        assert_eq!(apply_mark(&c, &arrow(MarkKind::FleaArrow)).unwrap(), c);
        let c = two_site_config(AnimalFleas, Animal);
        assert_eq!(
            apply_mark(&c, &arrow(MarkKind::FleaArrow)).unwrap().get(1),
            AnimalFleas
        );
        let c = two_site_config(AnimalFleas, Empty);
        assert_eq!(apply_mark(&c, &arrow(MarkKind::FleaArrow)).unwrap(), c);

        let c = two_site_config(Animal, Empty);
        assert_eq!(
            apply_mark(&c, &death(MarkKind::AnimalDeath))
                .unwrap()
                .get(0),
            Empty
        );

        let bad = Mark::death(MarkKind::AnimalDeath, 0.5, 7);
        assert!(apply_mark(&c, &bad).is_err());
    }

    #[test]
    fn truncation_blocks_births_from_the_boundary() {
        let w = Arc::new(Window::centered(1, 2, Some(1)).unwrap());
        let mut c = Configuration::empty(w.clone());
        c.set_at(&[1], SiteState::AnimalFleas).unwrap();
        c.set_at(&[2], SiteState::Animal).unwrap();
        let x = w.index_of(&[1]).unwrap();
        let y = w.index_of(&[2]).unwrap();
        let z = w.index_of(&[0]).unwrap();
        assert_eq!(
            apply_mark(&c, &Mark::arrow(MarkKind::FleaArrow, 0.1, x, y)).unwrap(),
            c
        );
        assert_eq!(
            apply_mark(&c, &Mark::arrow(MarkKind::AnimalArrow, 0.1, x, z)).unwrap(),
            c
        );
    }

    #[test]
    fn fleas_are_never_created_from_nothing() {
        let w = line(6);
        let log = EventLog::generate(w.clone(), 0.0, 20.0, Rates::new(2.0, 5.0, 0.5).unwrap(), 1)
            .unwrap();
        let init = Configuration::filled(w, SiteState::Animal);
        let tr = run_forward(&log, &init, 0.0, 20.0).unwrap();
        assert!(tr.changes().iter().all(|c| !c.new.has_fleas()));
        assert_eq!(tr.extinction_time_fleas(), Some(0.0));
    }

    #[test]
    fn fleas_enter_only_through_hosted_arrows() {
        let w = line(6);
        let log = EventLog::generate(w.clone(), 0.0, 15.0, Rates::new(2.0, 3.0, 1.0).unwrap(), 2)
            .unwrap();
        let mut init = Configuration::filled(w.clone(), SiteState::Animal);
        init.set_at(&[0], SiteState::AnimalFleas).unwrap();
        let tr = run_forward(&log, &init, 0.0, 15.0).unwrap();
        let by_id: std::collections::HashMap<u64, Mark> =
            log.marks().iter().map(|m| (m.id, *m)).collect();
        for c in tr.changes() {
            if !c.old.has_fleas() && c.new.has_fleas() {
                let m = by_id[&c.mark_id];
                assert_eq!(m.kind, MarkKind::FleaArrow);
                assert_eq!((c.old, c.new), (SiteState::Animal, SiteState::AnimalFleas));
            }
        }
    }

    #[test]
    fn animals_ignore_fleas() {
        for seed in 0..20 {
            let w = line(5);
            let log = EventLog::generate(
                w.clone(),
                0.0,
                10.0,
                Rates::new(2.0, 3.0, 1.0).unwrap(),
                seed,
            )
            .unwrap();
            let a = Configuration::filled(w.clone(), SiteState::Animal);
            let b = Configuration::filled(w.clone(), SiteState::AnimalFleas);
            let ta = run_forward(&log, &a, 0.0, 10.0).unwrap();
            let tb = run_forward(&log, &b, 0.0, 10.0).unwrap();
            let to = run_animals_only(&log, &b, 0.0, 10.0).unwrap();
            assert_eq!(ta.animal_events(), tb.animal_events());
            assert_eq!(ta.animal_events(), to.animal_events());
            assert_eq!(ta.extinction_time_animals(), to.extinction_time_animals());
        }
    }

    #[test]
    fn empty_state_is_absorbing() {
        let w = line(3);
        let log = EventLog::generate(w.clone(), 0.0, 10.0, Rates::new(3.0, 3.0, 1.0).unwrap(), 3)
            .unwrap();
        let tr = run_forward(&log, &Configuration::empty(w), 0.0, 10.0).unwrap();
        assert!(tr.changes().is_empty());
        assert_eq!(tr.extinction_time_animals(), Some(0.0));
    }

    #[test]
    fn config_at_replays() {
        let w = line(4);
        let log =
            EventLog::generate(w.clone(), 0.0, 6.0, Rates::new(1.5, 2.0, 1.0).unwrap(), 4).unwrap();
        let init = Configuration::filled(w, SiteState::AnimalFleas);
        let tr = run_forward(&log, &init, 0.0, 6.0).unwrap();
        assert_eq!(&tr.config_at(6.0), tr.final_config());
        assert_eq!(&tr.config_at(-1.0), tr.initial());
        let mid = run_forward(&log, &init, 0.0, 3.0).unwrap();
        assert_eq!(&tr.config_at(3.0), mid.final_config());
        assert!(run_forward(&log, &tr.config_at(0.0), 0.0, 7.0).is_err());
    }

    #[test]
    fn extinction_times_are_recorded() {
        let w = line(2);
        let log = EventLog::generate(w.clone(), 0.0, 200.0, Rates::new(0.2, 0.0, 1.0).unwrap(), 5)
            .unwrap();
        let init = Configuration::filled(w, SiteState::AnimalFleas);
        let tr = run_forward(&log, &init, 0.0, 200.0).unwrap();
        let t1 = tr.extinction_time_animals().unwrap();
        let t2 = tr.extinction_time_fleas().unwrap();
        assert!(t1 <= t2 && t2 <= 200.0);
        assert_eq!(tr.config_at(t1).animal_count(), 0);
        assert!(tr.config_at(t1 - 1e-9).animal_count() > 0);
    }

    #[test]
    fn pure_death_when_lambda_is_zero() {
        let w = line(3);
        let log =
            EventLog::generate(w.clone(), 0.0, 5.0, Rates::new(0.0, 0.0, 0.0).unwrap(), 6).unwrap();
        let tr =
            run_animals_only(&log, &Configuration::filled(w, SiteState::Animal), 0.0, 5.0).unwrap();
        assert!(tr.changes().iter().all(|c| c.new == SiteState::Empty));
    }

    #[test]
    fn subcritical_burn_in_collapses() {
        let c = sample_upper_invariant_animals(line(20), 0.0, 30.0, 1).unwrap();
        assert_eq!(c.animal_count(), 0);
        assert!(sample_upper_invariant_animals(line(2), 1.0, 0.0, 1).is_err());
    }

    #[test]
    fn upper_invariant_sampler_is_monotone_in_lambda() {
        let w = line(15);
        for seed in 0..20 {
            let log = EventLog::generate(
                w.clone(),
                0.0,
                10.0,
                Rates::new(3.0, 0.0, 0.0).unwrap(),
                seed,
            )
            .unwrap();
            let hi = burn_in_animals(&log, 0.0, 10.0).unwrap();
            let lo = burn_in_animals(&log.thinned(MarkKind::AnimalArrow, 1.7).unwrap(), 0.0, 10.0)
                .unwrap();
            assert!(lo.animal_set().is_subset(&hi.animal_set()));
        }
    }

    #[test]
    fn coupling_examples() {
        let w = line(4);
        let log =
            EventLog::generate(w.clone(), 0.0, 8.0, Rates::new(2.0, 2.0, 1.0).unwrap(), 9).unwrap();
        let top = Configuration::filled(w.clone(), SiteState::AnimalFleas);
        let bottom = Configuration::empty(w.clone());
        assert!(check_monotone_coupling(&log, &top, &top, 0.0, 8.0).unwrap());
        assert!(check_monotone_coupling(&log, &bottom, &top, 0.0, 8.0).unwrap());
        assert!(matches!(
            check_monotone_coupling(&log, &top, &bottom, 0.0, 8.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn coupling_holds_for_random_pairs() {
        let w = line(4);
        for case in 0..300u64 {
            let mut rng = replicate_rng(99, case);
            let rates = Rates::new(
                rng.random_range(0.0..4.0),
                rng.random_range(0.0..4.0),
                rng.random_range(0.0..3.0),
            )
            .unwrap();
            let log = EventLog::generate(w.clone(), 0.0, 5.0, rates, case).unwrap();
            let hi: Vec<SiteState> = (0..w.len())
                .map(|_| SiteState::from_bits(rng.random_range(0..4)))
                .collect();
            let lo: Vec<SiteState> = hi
                .iter()
                .map(|s| SiteState::from_bits(s.bits() & rng.random_range(0..4)))
                .collect();
            let hi = Configuration::from_states(w.clone(), hi).unwrap();
            let lo = Configuration::from_states(w.clone(), lo).unwrap();
            assert!(
                check_monotone_coupling(&log, &lo, &hi, 0.0, 5.0).unwrap(),
                "case {case}"
            );
        }
    }

    #[test]
    fn flea_set_is_monotone_in_mu() {
        let w = line(6);
        for seed in 0..30 {
            let log = EventLog::generate(
                w.clone(),
                0.0,
                8.0,
                Rates::new(2.5, 4.0, 1.0).unwrap(),
                seed,
            )
            .unwrap();
            let thin = log.thin_fleas(2.0).unwrap();
            let mut init = Configuration::filled(w.clone(), SiteState::Animal);
            init.set_at(&[0], SiteState::AnimalFleas).unwrap();
            let mut hi = Evolver::new(&log, init.clone(), 0.0).unwrap();
            let mut lo = Evolver::new(&thin, init, 0.0).unwrap();
            for k in 1..=80 {
                let t = k as f64 * 0.1;
                hi.advance(t).unwrap();
                lo.advance(t).unwrap();
                assert!(lo.config().flea_set().is_subset(&hi.config().flea_set()));
            }
        }
    }

    #[test]
    fn trajectory_csv_header() {
        let w = line(1);
        let log =
            EventLog::generate(w.clone(), 0.0, 1.0, Rates::new(1.0, 1.0, 1.0).unwrap(), 1).unwrap();
        let tr = run_forward(
            &log,
            &Configuration::filled(w, SiteState::AnimalFleas),
            0.0,
            1.0,
        )
        .unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("direction,time,site,old_state,new_state\n"));
        assert_eq!(text.lines().count(), tr.changes().len() + 1);
    }
}
