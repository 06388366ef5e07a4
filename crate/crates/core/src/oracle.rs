//! Exact transient laws on tiny windows.
//!
//! The generator is assembled directly from the transition-rate table
//! (not from the graphical representation), so it checks the simulator
//! through an independent route. Configurations are encoded as base-4
//! integers: site `i` (row-major order) contributes `state · 4^i`.
//!
//! Transient distributions use uniformization. With `Λ` the largest exit
//! rate, `e^{Qt} = Σ_k Pois(k; Λt) P^k` where `P = I + Q/Λ`. The horizon
//! is split into steps with `Λh ≤ 30` and each step's Poisson series is
//! cut once the remaining tail mass drops below `10⁻¹¹ / steps`, so the
//! total truncation error in any entry is below `10⁻¹¹`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::events::{EventLog, MarkKind, Rates};
use crate::lattice::{Configuration, SiteSet, SiteState, Window, NO_SITE};
use crate::rng::derive_seed;
use crate::simulate::Evolver;

/// Largest window the oracle will enumerate (`4^8` states).
pub const MAX_SITES: usize = 8;

/// Sparse CTMC generator over all `4^k` configurations.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    window: Arc<Window>,
    rates: Rates,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

pub fn encode(states: &[SiteState]) -> usize {
    states
        .iter()
        .rev()
        .fold(0, |acc, s| acc * 4 + s.bits() as usize)
}

pub fn decode(mut idx: usize, k: usize) -> Vec<SiteState> {
    (0..k)
        .map(|_| {
            let s = SiteState::from_bits((idx % 4) as u8);
            idx /= 4;
            s
        })
        .collect()
}

/// Builds `Q` from the rate table, with sites outside the window empty
/// and births from truncated sites suppressed.
pub fn build_generator(window: Arc<Window>, rates: Rates) -> Result<GeneratorMatrix> {
    let k = window.len();
    if k > MAX_SITES {
        return Err(Error::InvalidWindow(format!(
            "{k} sites exceed the oracle limit of {MAX_SITES}"
        )));
    }
    let n = 4usize.pow(k as u32);
    let rows: Vec<Vec<(u32, f64)>> = (0..n)
        .into_par_iter()
        .map(|from| {
            let states = decode(from, k);
            let mut row = Vec::new();
            for x in 0..k {
                let (mut births, mut flea_births) = (0usize, 0usize);
                for &y in window.neighbors(x) {
                    if y == NO_SITE || !window.can_give_birth(y as usize) {
                        continue;
                    }
                    let s = states[y as usize];
                    births += s.has_animal() as usize;
                    flea_births += (s == SiteState::AnimalFleas) as usize;
                }
                let weight = 4usize.pow(x as u32);
                let mut push = |to: SiteState, rate: f64| {
                    if rate > 0.0 {
                        let target =
                            from - states[x].bits() as usize * weight + to.bits() as usize * weight;
                        row.push((target as u32, rate));
                    }
                };
                match states[x] {
                    SiteState::Empty => push(SiteState::Animal, rates.lambda * births as f64),
                    SiteState::Fleas => {
                        push(SiteState::AnimalFleas, rates.lambda * births as f64);
                        push(SiteState::Empty, rates.delta);
                    }
                    SiteState::Animal => {
                        push(SiteState::Empty, Rates::ANIMAL_DEATH);
                        push(SiteState::AnimalFleas, rates.mu * flea_births as f64);
                    }
                    SiteState::AnimalFleas => push(SiteState::Fleas, Rates::ANIMAL_DEATH),
                }
            }
            row
        })
        .collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut diag = Vec::with_capacity(n);
    row_ptr.push(0);
    for row in rows {
        diag.push(-row.iter().map(|e| e.1).sum::<f64>());
        for (c, v) in row {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(GeneratorMatrix {
        window,
        rates,
        row_ptr,
        cols,
        vals,
        diag,
    })
}

impl GeneratorMatrix {
    pub fn window(&self) -> &Arc<Window> {
        &self.window
    }

    pub fn rates(&self) -> Rates {
        self.rates
    }

    pub fn states(&self) -> usize {
        self.diag.len()
    }

    pub fn sites(&self) -> usize {
        self.window.len()
    }

    /// Off-diagonal nonzeros of row `from`.
    pub fn row(&self, from: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[from]..self.row_ptr[from + 1])
            .map(move |j| (self.cols[j] as usize, self.vals[j]))
    }

    /// Entry `Q[from][to]`.
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        if from == to {
            return self.diag[from];
        }
        self.row(from)
            .filter(|&(c, _)| c == to)
            .map(|(_, v)| v)
            .sum()
    }

    pub fn row_sum(&self, from: usize) -> f64 {
        self.diag[from] + self.row(from).map(|(_, v)| v).sum::<f64>()
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().map(|d| -d).fold(0.0, f64::max)
    }

    pub fn point_mass(&self, state: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.states()];
        v[state] = 1.0;
        v
    }

    /// `v ↦ v P` with `P = I + Q/Λ`.
    fn step(&self, v: &[f64], lambda: f64, out: &mut [f64]) {
        for (o, (&x, &d)) in out.iter_mut().zip(v.iter().zip(&self.diag)) {
            *o = x * (1.0 + d / lambda);
        }
        for (from, &x) in v.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (to, r) in self.row(from) {
                out[to] += x * r / lambda;
            }
        }
    }
}

/// Truncation budget for the whole uniformization series.
pub const UNIFORMIZATION_TOL: f64 = 1e-11;

/// Row vector `init · e^{Qt}` by uniformization.
pub fn transient_distribution(q: &GeneratorMatrix, init: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t must be nonnegative, got {t}"
        )));
    }
    if init.len() != q.states() {
        return Err(Error::InvalidParameter(
            "initial vector has the wrong length".into(),
        ));
    }
    let lambda = q.max_exit_rate();
    if t == 0.0 || lambda == 0.0 {
        return Ok(init.to_vec());
    }
    let steps = (lambda * t / 30.0).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let tol = UNIFORMIZATION_TOL / steps as f64;
    let mut v = init.to_vec();
    let mut term = vec![0.0; v.len()];
    let mut next = vec![0.0; v.len()];
    for _ in 0..steps {
        let lh = lambda * h;
        let mut weight = (-lh).exp();
        let mut cum = weight;
        term.copy_from_slice(&v);
        let mut acc: Vec<f64> = v.iter().map(|x| x * weight).collect();
        let mut k = 0usize;
        while 1.0 - cum > tol || (k as f64) < lh {
            k += 1;
            q.step(&term, lambda, &mut next);
            std::mem::swap(&mut term, &mut next);
            weight *= lh / k as f64;
            cum += weight;
            for (a, x) in acc.iter_mut().zip(&term) {
                *a += weight * x;
            }
            if k > 10_000 {
                break;
            }
        }
        v = acc;
    }
    Ok(v)
}

/// Probability that the configuration at time `t` satisfies `predicate`.
pub fn exact_hitting(
    q: &GeneratorMatrix,
    init: &[f64],
    t: f64,
    predicate: impl Fn(&[SiteState]) -> bool,
) -> Result<f64> {
    let p = transient_distribution(q, init, t)?;
    let k = q.sites();
    Ok(p.iter()
        .enumerate()
        .filter(|(i, _)| predicate(&decode(*i, k)))
        .map(|(_, &x)| x)
        .sum())
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Empirical law of the simulated configuration at each of `times`
/// (ascending), from `reps` independent logs started at `init`.
pub fn simulate_distribution(
    window: Arc<Window>,
    rates: Rates,
    init: &Configuration,
    times: &[f64],
    reps: u64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let k = window.len();
    if k > MAX_SITES {
        return Err(Error::InvalidWindow(
            "window too large for enumeration".into(),
        ));
    }
    if times.is_empty() || times.windows(2).any(|w| w[0] > w[1]) || times[0] < 0.0 {
        return Err(Error::InvalidParameter(
            "times must be nonempty, nonnegative and ascending".into(),
        ));
    }
    let horizon = times.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let n = 4usize.pow(k as u32);
    let counts = (0..reps)
        .into_par_iter()
        .map(|i| -> Result<Vec<u32>> {
            let log =
                EventLog::generate(window.clone(), 0.0, horizon, rates, derive_seed(seed, 3, i))?;
            let mut ev = Evolver::new(&log, init.clone(), 0.0)?;
            let mut out = Vec::with_capacity(times.len());
            for &t in times {
                ev.advance(t)?;
                out.push(encode(ev.config().states()) as u32);
            }
            Ok(out)
        })
        .try_fold(
            || vec![0u64; times.len() * n],
            |mut acc, r| -> Result<Vec<u64>> {
                for (j, s) in r?.into_iter().enumerate() {
                    acc[j * n + s as usize] += 1;
                }
                Ok(acc)
            },
        )
        .try_reduce(
            || vec![0u64; times.len() * n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(counts
        .chunks(n)
        .map(|c| c.iter().map(|&x| x as f64 / reps as f64).collect())
        .collect())
}

/// Both sides of the hitting-probability duality, evaluated exactly.
///
/// The left side `P(A_t∩C≠∅, B_t∩D≠∅)` with `A_0 ~ animal_law` and fleas
/// on `B` comes from the generator. The right side
/// `P(A^t_t(C)∩A_0≠∅, B^t_t(D)∩B≠∅)` is computed from the graphical
/// representation: conditioned on `K` marks in `[0, t]` the marks are
/// i.i.d. over streams, the animal chain is a discrete-time Markov chain
/// in the mark index, and the duals are propagated backward through the
/// time reversal of that chain. `animal_law[a]` is the probability of
/// animal set `a` (bit `i` = site `i`).
pub fn exact_duality_sides(
    window: Arc<Window>,
    rates: Rates,
    animal_law: &[f64],
    b: &SiteSet,
    c: &SiteSet,
    d: &SiteSet,
    t: f64,
) -> Result<(f64, f64)> {
    let k = window.len();
    if k > 4 {
        return Err(Error::InvalidWindow(
            "the backward mark recursion is limited to 4 sites".into(),
        ));
    }
    let na = 1usize << k;
    if animal_law.len() != na {
        return Err(Error::InvalidParameter(
            "animal law must have 2^k entries".into(),
        ));
    }
    let mask = |s: &SiteSet| s.iter().fold(0usize, |m, &x| m | (1 << x));
    let (bm, cm, dm) = (mask(b), mask(c), mask(d));

    // left side via the generator
    let q = build_generator(window.clone(), rates)?;
    let mut init = vec![0.0; q.states()];
    for (a, &p) in animal_law.iter().enumerate() {
        let states: Vec<SiteState> = (0..k)
            .map(|x| SiteState::from_parts(a >> x & 1 == 1, bm >> x & 1 == 1))
            .collect();
        init[encode(&states)] += p;
    }
    let lhs = exact_hitting(&q, &init, t, |s| {
        s.iter()
            .zip(0..)
            .any(|(st, x)| st.has_animal() && cm >> x & 1 == 1)
            && s.iter()
                .zip(0..)
                .any(|(st, x)| st.has_fleas() && dm >> x & 1 == 1)
    })?;

    // right side via the mark recursion
    struct Stream {
        kind: MarkKind,
        from: usize,
        to: usize,
        weight: f64,
    }
    let mut streams = Vec::new();
    for x in 0..k {
        for kind in MarkKind::ALL {
            let r = rates.of(kind);
            if r == 0.0 {
                continue;
            }
            if kind.is_arrow() {
                for &y in window.neighbors(x) {
                    if y != NO_SITE {
                        streams.push(Stream {
                            kind,
                            from: x,
                            to: y as usize,
                            weight: r,
                        });
                    }
                }
            } else {
                streams.push(Stream {
                    kind,
                    from: x,
                    to: x,
                    weight: r,
                });
            }
        }
    }
    let total: f64 = streams.iter().map(|s| s.weight).sum();
    if total == 0.0 || t == 0.0 {
        let rhs = animal_law
            .iter()
            .enumerate()
            .filter(|(a, _)| a & cm != 0 && dm & bm != 0)
            .map(|(_, p)| p)
            .sum();
        return Ok((lhs, rhs));
    }
    for s in &mut streams {
        s.weight /= total;
    }
    let births = |x: usize| window.can_give_birth(x);
    let animal_step = |a: usize, s: &Stream| -> usize {
        match s.kind {
            MarkKind::AnimalArrow if births(s.from) && a >> s.from & 1 == 1 => a | 1 << s.to,
            MarkKind::AnimalDeath => a & !(1 << s.from),
            _ => a,
        }
    };
    // (animal dual, flea dual) update for a mark seen backward; `a` is the
    // animal set just before the mark.
    let dual_step = |a: usize, ad: usize, fd: usize, s: &Stream| -> (usize, usize) {
        let (y, x) = (s.from, s.to);
        match s.kind {
            MarkKind::AnimalDeath => (ad & !(1 << y), fd),
            MarkKind::AnimalArrow if births(y) && ad >> x & 1 == 1 => (ad | 1 << y, fd),
            MarkKind::FleaDeath if a >> y & 1 == 0 => (ad, fd & !(1 << y)),
            MarkKind::FleaArrow
                if births(y) && fd >> x & 1 == 1 && a >> x & 1 == 1 && a >> y & 1 == 1 =>
            {
                (ad, fd | 1 << y)
            }
            _ => (ad, fd),
        }
    };

    let mean = total * t;
    let mut rhs = 0.0;
    let mut weight = (-mean).exp();
    let mut cum = 0.0;
    let mut kk = 0usize;
    loop {
        // marginals of the animal chain after 0..=kk marks
        let mut marg = vec![animal_law.to_vec()];
        for _ in 0..kk {
            let prev = marg.last().expect("nonempty");
            let mut next = vec![0.0; na];
            for (a, &p) in prev.iter().enumerate() {
                if p > 0.0 {
                    for s in &streams {
                        next[animal_step(a, s)] += p * s.weight;
                    }
                }
            }
            marg.push(next);
        }
        let idx = |a: usize, ad: usize, fd: usize| (a * na + ad) * na + fd;
        let mut f = vec![0.0; na * na * na];
        for a in 0..na {
            f[idx(a, cm, dm)] = marg[kk][a];
        }
        for i in (1..=kk).rev() {
            let mut g = vec![0.0; f.len()];
            for a_prev in 0..na {
                let pp = marg[i - 1][a_prev];
                if pp == 0.0 {
                    continue;
                }
                for s in &streams {
                    let a = animal_step(a_prev, s);
                    let pa = marg[i][a];
                    if pa == 0.0 {
                        continue;
                    }
                    let w = pp * s.weight / pa;
                    for ad in 0..na {
                        for fd in 0..na {
                            let v = f[idx(a, ad, fd)];
                            if v != 0.0 {
                                let (ad2, fd2) = dual_step(a_prev, ad, fd, s);
                                g[idx(a_prev, ad2, fd2)] += v * w;
                            }
                        }
                    }
                }
            }
            f = g;
        }
        let mut term = 0.0;
        for a in 0..na {
            for ad in 0..na {
                for fd in 0..na {
                    if a & ad != 0 && fd & bm != 0 {
                        term += f[idx(a, ad, fd)];
                    }
                }
            }
        }
        rhs += weight * term;
        cum += weight;
        if 1.0 - cum < 1e-13 && kk as f64 > mean {
            break;
        }
        kk += 1;
        weight *= mean / kk as f64;
        if kk > 2000 {
            return Err(Error::InvalidParameter(
                "too many marks for the exact recursion".into(),
            ));
        }
    }
    Ok((lhs, rhs))
}
