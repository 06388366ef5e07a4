//! The graphical representation: unconditional Poisson marks on a
//! space-time window.
//!
//! Four families of streams are generated, each keyed by the seed and the
//! site (or directed edge) it lives on:
//!
//! | kind          | where            | rate |
//! |---------------|------------------|------|
//! | animal arrow  | directed edge    | λ    |
//! | animal death  | site             | 1    |
//! | flea arrow    | directed edge    | μ    |
//! | flea death    | site             | δ    |
//!
//! Marks are stored unconditionally. Whether a flea arrow or a flea death
//! mark acts depends on the animal configuration at the mark time and is
//! decided by whoever traverses the log, forward or backward.
//!
//! Each mark carries a `level`, uniform on `[0, rate)`. Keeping only the
//! marks with `level < r` yields a Poisson stream of rate `r`, and the
//! retained sets are nested in `r`. That is how logs at different rates
//! are coupled.

use std::io::Write;
use std::ops::Range;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::lattice::{Window, NO_SITE};
use crate::rng::{keyed_stream, StreamTag};

/// Birth and death rates. The animal death rate is fixed at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub lambda: f64,
    pub mu: f64,
    pub delta: f64,
}

impl Rates {
    pub const ANIMAL_DEATH: f64 = 1.0;

    pub fn new(lambda: f64, mu: f64, delta: f64) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("mu", mu), ("delta", delta)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidRates(format!("{name} = {v}")));
            }
        }
        Ok(Rates { lambda, mu, delta })
    }

    pub fn of(&self, kind: MarkKind) -> f64 {
        match kind {
            MarkKind::AnimalArrow => self.lambda,
            MarkKind::AnimalDeath => Self::ANIMAL_DEATH,
            MarkKind::FleaArrow => self.mu,
            MarkKind::FleaDeath => self.delta,
        }
    }

    fn with(mut self, kind: MarkKind, rate: f64) -> Self {
        match kind {
            MarkKind::AnimalArrow => self.lambda = rate,
            MarkKind::FleaArrow => self.mu = rate,
            MarkKind::FleaDeath => self.delta = rate,
            MarkKind::AnimalDeath => {}
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum MarkKind {
    AnimalArrow = 0,
    AnimalDeath = 1,
    FleaArrow = 2,
    FleaDeath = 3,
}

impl MarkKind {
    pub const ALL: [MarkKind; 4] = [
        MarkKind::AnimalArrow,
        MarkKind::AnimalDeath,
        MarkKind::FleaArrow,
        MarkKind::FleaDeath,
    ];

    #[inline]
    pub fn is_arrow(self) -> bool {
        matches!(self, MarkKind::AnimalArrow | MarkKind::FleaArrow)
    }

    pub fn name(self) -> &'static str {
        match self {
            MarkKind::AnimalArrow => "animal_arrow",
            MarkKind::AnimalDeath => "animal_death",
            MarkKind::FleaArrow => "flea_arrow",
            MarkKind::FleaDeath => "flea_death",
        }
    }

    fn tag(self) -> StreamTag {
        match self {
            MarkKind::AnimalArrow => StreamTag::AnimalArrow,
            MarkKind::AnimalDeath => StreamTag::AnimalDeath,
            MarkKind::FleaArrow => StreamTag::FleaArrow,
            MarkKind::FleaDeath => StreamTag::FleaDeath,
        }
    }
}

/// One point of the graphical representation. For deaths `target == site`
/// and `slot == 0`; for arrows `site → target` along neighbor `slot`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mark {
    pub time: f64,
    pub kind: MarkKind,
    pub site: u32,
    pub target: u32,
    pub slot: u8,
    pub level: f64,
    pub id: u64,
}

impl Mark {
    pub fn arrow(kind: MarkKind, time: f64, from: usize, to: usize) -> Self {
        Mark {
            time,
            kind,
            site: from as u32,
            target: to as u32,
            slot: 0,
            level: 0.0,
            id: 0,
        }
    }

    pub fn death(kind: MarkKind, time: f64, site: usize) -> Self {
        Mark {
            time,
            kind,
            site: site as u32,
            target: site as u32,
            slot: 0,
            level: 0.0,
            id: 0,
        }
    }

    /// Total order used for replay: `(time, id)`.
    #[inline]
    pub fn precedes(&self, time: f64, id: u64) -> bool {
        self.time < time || (self.time == time && self.id < id)
    }

    /// Same mark up to the id (ids depend on the enclosing window).
    pub fn same_point(&self, other: &Mark) -> bool {
        self.time == other.time
            && self.kind == other.kind
            && self.site == other.site
            && self.target == other.target
            && self.level == other.level
    }
}

/// A single Poisson stream: a site for deaths, a directed edge for arrows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    AnimalArrow { from: usize, slot: usize },
    AnimalDeath(usize),
    FleaArrow { from: usize, slot: usize },
    FleaDeath(usize),
}

/// Immutable, seed-deterministic set of marks on `window × [t_min, t_max]`.
#[derive(Debug, Clone)]
pub struct EventLog {
    window: Arc<Window>,
    t_min: f64,
    t_max: f64,
    rates: Rates,
    seed: u64,
    marks: Vec<Mark>,
    // CSR index: positions into `marks` for each stream, time-ascending.
    stream_offsets: Vec<u32>,
    stream_entries: Vec<u32>,
}

/// Below this many sites streams are generated on the calling thread.
const PARALLEL_SITES: usize = 2048;

impl EventLog {
    /// Samples every stream on the window over `[t_min, t_max]`.
    pub fn generate(
        window: Arc<Window>,
        t_min: f64,
        t_max: f64,
        rates: Rates,
        seed: u64,
    ) -> Result<Self> {
        check_time_window(t_min, t_max)?;
        let rates = Rates::new(rates.lambda, rates.mu, rates.delta)?;
        let n = window.len();
        let per_site = |site: usize| {
            let mut out = Vec::new();
            let coords = window.coords(site);
            for kind in MarkKind::ALL {
                let rate = rates.of(kind);
                if rate == 0.0 {
                    continue;
                }
                if kind.is_arrow() {
                    for slot in 0..window.degree() {
                        let target = window.neighbor(site, slot);
                        if target == NO_SITE {
                            continue;
                        }
                        let proto = Mark {
                            time: 0.0,
                            kind,
                            site: site as u32,
                            target,
                            slot: slot as u8,
                            level: 0.0,
                            id: 0,
                        };
                        sample_stream(&mut out, proto, rate, seed, &coords, t_min, t_max);
                    }
                } else {
                    let proto = Mark {
                        time: 0.0,
                        kind,
                        site: site as u32,
                        target: site as u32,
                        slot: 0,
                        level: 0.0,
                        id: 0,
                    };
                    sample_stream(&mut out, proto, rate, seed, &coords, t_min, t_max);
                }
            }
            out
        };
        let marks: Vec<Mark> = if n >= PARALLEL_SITES {
            let chunks: Vec<Vec<Mark>> = (0..n).into_par_iter().map(per_site).collect();
            chunks.into_iter().flatten().collect()
        } else {
            (0..n).flat_map(per_site).collect()
        };
        Ok(Self::assemble(window, t_min, t_max, rates, seed, marks))
    }

    /// Builds a log from explicit marks (hand-constructed fixtures). Slots
    /// and ids are recomputed.
    pub fn from_marks(
        window: Arc<Window>,
        t_min: f64,
        t_max: f64,
        rates: Rates,
        marks: Vec<Mark>,
    ) -> Result<Self> {
        check_time_window(t_min, t_max)?;
        let rates = Rates::new(rates.lambda, rates.mu, rates.delta)?;
        let n = window.len();
        let mut fixed = Vec::with_capacity(marks.len());
        for mut m in marks {
            if !(m.time >= t_min && m.time <= t_max) {
                return Err(Error::InvalidMark(format!(
                    "time {} outside [{t_min}, {t_max}]",
                    m.time
                )));
            }
            if m.site as usize >= n || m.target as usize >= n {
                return Err(Error::InvalidMark("endpoint outside window".into()));
            }
            if m.kind.is_arrow() {
                let slot = (0..window.degree())
                    .find(|&s| window.neighbor(m.site as usize, s) == m.target)
                    .ok_or_else(|| {
                        Error::InvalidMark("arrow endpoints are not neighbors".into())
                    })?;
                m.slot = slot as u8;
            } else {
                if m.target != m.site {
                    return Err(Error::InvalidMark("death mark with a target".into()));
                }
                m.slot = 0;
            }
            fixed.push(m);
        }
        Ok(Self::assemble(window, t_min, t_max, rates, 0, fixed))
    }

    fn assemble(
        window: Arc<Window>,
        t_min: f64,
        t_max: f64,
        rates: Rates,
        seed: u64,
        mut marks: Vec<Mark>,
    ) -> Self {
        marks.sort_unstable_by(|a, b| {
            a.time
                .total_cmp(&b.time)
                .then(a.kind.cmp(&b.kind))
                .then(a.site.cmp(&b.site))
                .then(a.slot.cmp(&b.slot))
        });
        for (i, m) in marks.iter_mut().enumerate() {
            m.id = i as u64;
        }
        let mut log = EventLog {
            window,
            t_min,
            t_max,
            rates,
            seed,
            marks,
            stream_offsets: Vec::new(),
            stream_entries: Vec::new(),
        };
        log.build_index();
        log
    }

    fn build_index(&mut self) {
        let streams = self.stream_count();
        let mut counts = vec![0u32; streams + 1];
        for m in &self.marks {
            counts[self.stream_id_of(m) + 1] += 1;
        }
        for i in 0..streams {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut entries = vec![0u32; self.marks.len()];
        for (pos, m) in self.marks.iter().enumerate() {
            let s = self.stream_id_of(m);
            entries[fill[s] as usize] = pos as u32;
            fill[s] += 1;
        }
        self.stream_offsets = counts;
        self.stream_entries = entries;
    }

    fn stream_count(&self) -> usize {
        let n = self.window.len();
        2 * n * self.window.degree() + 2 * n
    }

    fn stream_id(&self, kind: MarkKind, site: usize, slot: usize) -> usize {
        let n = self.window.len();
        let e = n * self.window.degree();
        match kind {
            MarkKind::AnimalArrow => site * self.window.degree() + slot,
            MarkKind::AnimalDeath => e + site,
            MarkKind::FleaArrow => e + n + site * self.window.degree() + slot,
            MarkKind::FleaDeath => 2 * e + n + site,
        }
    }

    fn stream_id_of(&self, m: &Mark) -> usize {
        self.stream_id(m.kind, m.site as usize, m.slot as usize)
    }

    pub fn window(&self) -> &Arc<Window> {
        &self.window
    }

    pub fn time_window(&self) -> (f64, f64) {
        (self.t_min, self.t_max)
    }

    pub fn rates(&self) -> Rates {
        self.rates
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// All marks, ordered by `(time, kind, site, slot)`; ids follow this order.
    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn count(&self, kind: MarkKind) -> usize {
        self.marks.iter().filter(|m| m.kind == kind).count()
    }

    pub fn check_range(&self, a: f64, b: f64) -> Result<()> {
        if !(a <= b) {
            return Err(Error::InvalidTimeRange(a, b, "empty range".into()));
        }
        if a < self.t_min || b > self.t_max {
            return Err(Error::InvalidTimeRange(
                a,
                b,
                format!(
                    "not inside the log's time window [{}, {}]",
                    self.t_min, self.t_max
                ),
            ));
        }
        Ok(())
    }

    /// Positions of the marks with time in `[a, b]`.
    pub fn range_between(&self, a: f64, b: f64) -> Range<usize> {
        let lo = self.marks.partition_point(|m| m.time < a);
        let hi = self.marks.partition_point(|m| m.time <= b);
        lo..hi.max(lo)
    }

    /// Marks with time in `[a, b]`, time-ascending.
    pub fn marks_between(&self, a: f64, b: f64) -> &[Mark] {
        &self.marks[self.range_between(a, b)]
    }

    /// Marks of one stream inside `[a, b]`, time-ascending.
    pub fn marks_in(&self, stream: Stream, a: f64, b: f64) -> Result<Vec<Mark>> {
        self.check_range(a, b)?;
        let n = self.window.len();
        let (kind, site, slot) = match stream {
            Stream::AnimalArrow { from, slot } => (MarkKind::AnimalArrow, from, slot),
            Stream::AnimalDeath(x) => (MarkKind::AnimalDeath, x, 0),
            Stream::FleaArrow { from, slot } => (MarkKind::FleaArrow, from, slot),
            Stream::FleaDeath(x) => (MarkKind::FleaDeath, x, 0),
        };
        if site >= n || slot >= self.window.degree() {
            return Err(Error::InvalidParameter("stream outside window".into()));
        }
        Ok(self
            .stream_slice(kind, site, slot)
            .iter()
            .map(|&p| self.marks[p as usize])
            .filter(|m| m.time >= a && m.time <= b)
            .collect())
    }

    /// Positions (into [`EventLog::marks`]) of one stream, time-ascending.
    pub fn stream_slice(&self, kind: MarkKind, site: usize, slot: usize) -> &[u32] {
        let s = self.stream_id(kind, site, slot);
        &self.stream_entries[self.stream_offsets[s] as usize..self.stream_offsets[s + 1] as usize]
    }

    /// First mark of a site stream strictly after `(time, id)`.
    pub fn next_in_stream(
        &self,
        kind: MarkKind,
        site: usize,
        slot: usize,
        time: f64,
        id: u64,
    ) -> Option<&Mark> {
        let s = self.stream_slice(kind, site, slot);
        let i = s.partition_point(|&p| {
            let m = &self.marks[p as usize];
            m.precedes(time, id) || (m.time == time && m.id == id)
        });
        s.get(i).map(|&p| &self.marks[p as usize])
    }

    /// Keeps the marks of `kind` with `level < new_rate`; the result is the
    /// log of the same seed at the lower rate. Retained sets are nested in
    /// `new_rate`.
    pub fn thinned(&self, kind: MarkKind, new_rate: f64) -> Result<Self> {
        let old = self.rates.of(kind);
        if kind == MarkKind::AnimalDeath {
            return Err(Error::InvalidParameter(
                "the animal death rate is fixed".into(),
            ));
        }
        if !(new_rate >= 0.0 && new_rate <= old) {
            return Err(Error::InvalidParameter(format!(
                "thinned rate {new_rate} must lie in [0, {old}]"
            )));
        }
        let marks: Vec<Mark> = self
            .marks
            .iter()
            .filter(|m| m.kind != kind || m.level < new_rate)
            .copied()
            .collect();
        let mut log = EventLog {
            window: self.window.clone(),
            t_min: self.t_min,
            t_max: self.t_max,
            rates: self.rates.with(kind, new_rate),
            seed: self.seed,
            marks,
            stream_offsets: Vec::new(),
            stream_entries: Vec::new(),
        };
        log.build_index();
        Ok(log)
    }

    /// Flea-arrow thinning to rate `mu_sub ≤ μ`.
    pub fn thin_fleas(&self, mu_sub: f64) -> Result<Self> {
        self.thinned(MarkKind::FleaArrow, mu_sub)
    }

    /// Writes `kind,time,x,y,id` rows; floats with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "time", "x", "y", "id"])?;
        for m in &self.marks {
            let x = join_coords(&self.window.coords(m.site as usize));
            let y = if m.kind.is_arrow() {
                join_coords(&self.window.coords(m.target as usize))
            } else {
                String::new()
            };
            w.write_record([m.kind.name(), &fmt_f64(m.time), &x, &y, &m.id.to_string()])?;
        }
        w.flush()
    }
}

pub fn join_coords(c: &[i32]) -> String {
    c.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn check_time_window(t_min: f64, t_max: f64) -> Result<()> {
    if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
        return Err(Error::InvalidTimeRange(
            t_min,
            t_max,
            "time window must satisfy t_min < t_max".into(),
        ));
    }
    Ok(())
}

/// Arrivals of one stream on `[t_min, t_max]`: the forward stream covers
/// `(0, t_max]`, the backward stream `[t_min, 0)`.
fn sample_stream(
    out: &mut Vec<Mark>,
    proto: Mark,
    rate: f64,
    seed: u64,
    coords: &[i32],
    t_min: f64,
    t_max: f64,
) {
    let tag = proto.kind.tag();
    if t_max > 0.0 {
        let mut rng = keyed_stream(seed, tag, proto.slot, false, coords);
        let mut t = 0.0;
        loop {
            let gap: f64 = Exp1.sample(&mut rng);
            let level = rng.random::<f64>() * rate;
            t += gap / rate;
            if t > t_max {
                break;
            }
            if t >= t_min && gap > 0.0 {
                out.push(Mark {
                    time: t,
                    level,
                    ..proto
                });
            }
        }
    }
    if t_min < 0.0 {
        let mut rng = keyed_stream(seed, tag, proto.slot, true, coords);
        let mut t = 0.0;
        loop {
            let gap: f64 = Exp1.sample(&mut rng);
            let level = rng.random::<f64>() * rate;
            t -= gap / rate;
            if t < t_min {
                break;
            }
            if t <= t_max && gap > 0.0 {
                out.push(Mark {
                    time: t,
                    level,
                    ..proto
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(r: u32) -> Arc<Window> {
        Arc::new(Window::centered(1, r, None).unwrap())
    }

    #[test]
    fn rates_validation() {
        assert!(Rates::new(-1.0, 0.0, 0.0).is_err());
        assert!(Rates::new(1.0, f64::NAN, 0.0).is_err());
        assert!(Rates::new(1.0, f64::INFINITY, 0.0).is_err());
        assert_eq!(
            Rates::new(1.0, 2.0, 3.0).unwrap().of(MarkKind::AnimalDeath),
            1.0
        );
    }

    #[test]
    fn empty_time_window_is_rejected() {
        let r = Rates::new(1.0, 1.0, 1.0).unwrap();
        assert!(EventLog::generate(line(1), 2.0, 2.0, r, 1).is_err());
        assert!(EventLog::generate(line(1), 3.0, 2.0, r, 1).is_err());
    }

    #[test]
    fn zero_mu_means_no_flea_arrows() {
        let log =
            EventLog::generate(line(5), 0.0, 50.0, Rates::new(2.0, 0.0, 1.0).unwrap(), 3).unwrap();
        assert_eq!(log.count(MarkKind::FleaArrow), 0);
        assert!(log.count(MarkKind::AnimalArrow) > 0);
    }

    #[test]
    fn poisson_count_on_one_edge() {
        // Two sites, so exactly one directed edge per direction.
        let w = Arc::new(Window::from_bounds(&[(0, 1)], None).unwrap());
        let log =
            EventLog::generate(w, 0.0, 1000.0, Rates::new(2.0, 0.0, 0.0).unwrap(), 11).unwrap();
        let n = log
            .marks_in(Stream::AnimalArrow { from: 0, slot: 0 }, 0.0, 1000.0)
            .unwrap()
            .len() as f64;
        assert!((n - 2000.0).abs() < 4.0 * 2000f64.sqrt(), "count {n}");
    }

    #[test]
    fn marks_are_ordered_with_increasing_ids() {
        let log =
            EventLog::generate(line(3), -5.0, 5.0, Rates::new(1.0, 1.0, 1.0).unwrap(), 9).unwrap();
        for w in log.marks().windows(2) {
            assert!(w[0].time <= w[1].time);
            assert!(w[0].id < w[1].id);
        }
        assert!(log.marks().iter().all(|m| m.time >= -5.0 && m.time <= 5.0));
        assert!(log.marks().iter().any(|m| m.time < 0.0));
        for m in log.marks() {
            if m.kind.is_arrow() {
                assert!(log.window().neighbors(m.site as usize).contains(&m.target));
            }
        }
    }

    #[test]
    fn time_extension_is_coherent() {
        let r = Rates::new(1.5, 2.0, 0.5).unwrap();
        let short = EventLog::generate(line(3), 0.0, 5.0, r, 42).unwrap();
        let long = EventLog::generate(line(3), -3.0, 10.0, r, 42).unwrap();
        let clipped = long.marks_between(0.0, 5.0);
        assert_eq!(short.len(), clipped.len());
        assert!(short
            .marks()
            .iter()
            .zip(clipped)
            .all(|(a, b)| a.same_point(b)));
    }

    #[test]
    fn space_extension_is_coherent() {
        let r = Rates::new(1.0, 1.0, 1.0).unwrap();
        let small = EventLog::generate(line(2), 0.0, 5.0, r, 5).unwrap();
        let big = EventLog::generate(line(4), 0.0, 5.0, r, 5).unwrap();
        let (ws, wb) = (small.window(), big.window());
        let s0 = ws.index_of(&[0]).unwrap();
        let b0 = wb.index_of(&[0]).unwrap();
        for slot in 0..2 {
            let a = small
                .marks_in(Stream::FleaArrow { from: s0, slot }, 0.0, 5.0)
                .unwrap();
            let b = big
                .marks_in(Stream::FleaArrow { from: b0, slot }, 0.0, 5.0)
                .unwrap();
            assert_eq!(a.len(), b.len());
            assert!(a
                .iter()
                .zip(&b)
                .all(|(x, y)| x.time == y.time && x.level == y.level));
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let r = Rates::new(1.0, 2.0, 0.3).unwrap();
        let a = EventLog::generate(line(4), -1.0, 3.0, r, 77).unwrap();
        let b = EventLog::generate(line(4), -1.0, 3.0, r, 77).unwrap();
        assert_eq!(a.marks(), b.marks());
        let c = EventLog::generate(line(4), -1.0, 3.0, r, 78).unwrap();
        assert_ne!(a.marks(), c.marks());
    }

    #[test]
    fn thinning_examples() {
        let log =
            EventLog::generate(line(3), 0.0, 20.0, Rates::new(1.0, 4.0, 1.0).unwrap(), 8).unwrap();
        let full = log.thin_fleas(4.0).unwrap();
        assert_eq!(full.marks(), log.marks());
        let none = log.thin_fleas(0.0).unwrap();
        assert_eq!(none.count(MarkKind::FleaArrow), 0);
        assert_eq!(
            none.count(MarkKind::AnimalArrow),
            log.count(MarkKind::AnimalArrow)
        );
        assert!(log.thin_fleas(4.5).is_err());
        assert!(log.thin_fleas(-0.1).is_err());
        assert_eq!(log.thin_fleas(2.0).unwrap().rates().mu, 2.0);
    }

    #[test]
    fn thinning_retains_half() {
        let w = Arc::new(Window::from_bounds(&[(0, 1)], None).unwrap());
        let log =
            EventLog::generate(w, 0.0, 12_500.0, Rates::new(0.0, 4.0, 0.0).unwrap(), 21).unwrap();
        let total = log.count(MarkKind::FleaArrow) as f64;
        assert!(total > 95_000.0);
        let kept = log.thin_fleas(2.0).unwrap().count(MarkKind::FleaArrow) as f64;
        assert!(
            (kept / total - 0.5).abs() < 0.01,
            "fraction {}",
            kept / total
        );
    }

    #[test]
    fn thinning_is_nested() {
        let log =
            EventLog::generate(line(3), 0.0, 30.0, Rates::new(1.0, 5.0, 1.0).unwrap(), 13).unwrap();
        let a = log.thin_fleas(1.5).unwrap();
        let b = log.thin_fleas(3.0).unwrap();
        let ids_b: std::collections::HashSet<u64> = b.marks().iter().map(|m| m.id).collect();
        assert!(a.marks().iter().all(|m| ids_b.contains(&m.id)));
        // thinning twice equals thinning once
        let twice = b.thin_fleas(1.5).unwrap();
        assert_eq!(twice.marks(), a.marks());
    }

    #[test]
    fn marks_in_partitions() {
        let log =
            EventLog::generate(line(2), 0.0, 10.0, Rates::new(3.0, 0.0, 1.0).unwrap(), 4).unwrap();
        let s = Stream::AnimalArrow { from: 2, slot: 0 };
        let ab = log.marks_in(s, 0.0, 4.0).unwrap();
        let bc = log.marks_in(s, 4.0, 10.0).unwrap();
        let ac = log.marks_in(s, 0.0, 10.0).unwrap();
        assert_eq!([ab, bc].concat(), ac);
        assert!(log
            .marks_in(Stream::FleaArrow { from: 1, slot: 1 }, 0.0, 10.0)
            .unwrap()
            .is_empty());
        assert!(log.marks_in(s, -1.0, 3.0).is_err());
    }

    #[test]
    fn from_marks_validates() {
        let w = line(2);
        let r = Rates::new(1.0, 1.0, 1.0).unwrap();
        let ok = EventLog::from_marks(
            w.clone(),
            0.0,
            2.0,
            r,
            vec![
                Mark::death(MarkKind::AnimalDeath, 1.4, 3),
                Mark::arrow(MarkKind::AnimalArrow, 1.0, 2, 3),
            ],
        )
        .unwrap();
        assert_eq!(ok.marks()[0].kind, MarkKind::AnimalArrow);
        assert_eq!(ok.marks()[0].slot, 0);
        assert!(EventLog::from_marks(
            w.clone(),
            0.0,
            2.0,
            r,
            vec![Mark::arrow(MarkKind::FleaArrow, 1.0, 0, 2)]
        )
        .is_err());
        assert!(EventLog::from_marks(
            w,
            0.0,
            2.0,
            r,
            vec![Mark::death(MarkKind::FleaDeath, 3.0, 0)]
        )
        .is_err());
    }

    /// Kolmogorov–Smirnov statistic of `samples` against Exp(rate).
    fn ks_exp(samples: &mut [f64], rate: f64) -> f64 {
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        samples
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = 1.0 - (-rate * x).exp();
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn inter_arrival_times_are_exponential() {
        // critical value for α = 1e-3: sqrt(ln(2/α)/2)
        let crit = ((2.0f64 / 1e-3).ln() / 2.0).sqrt();
        let w = Arc::new(Window::centered(1, 0, None).unwrap());
        for (rate, kind) in [(1.0, MarkKind::AnimalDeath), (2.5, MarkKind::FleaDeath)] {
            let log = EventLog::generate(
                w.clone(),
                0.0,
                10_001.0 / rate,
                Rates::new(0.0, 0.0, 2.5).unwrap(),
                31,
            )
            .unwrap();
            let times: Vec<f64> = log
                .marks()
                .iter()
                .filter(|m| m.kind == kind)
                .map(|m| m.time)
                .collect();
            assert!(times.len() > 9_000);
            let mut gaps: Vec<f64> = times.windows(2).map(|p| p[1] - p[0]).take(10_000).collect();
            assert!(gaps.iter().all(|&g| g > 0.0));
            let d = ks_exp(&mut gaps, rate);
            assert!(d * (gaps.len() as f64).sqrt() < crit, "KS {d}");
        }
    }
}
