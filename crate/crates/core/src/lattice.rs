//! Finite lattice windows, four-state site configurations and the
//! coordinatewise partial order on them.
//!
//! Sites are addressed internally by a row-major linear index: the last
//! axis varies fastest, and along every axis coordinates run from the
//! lower bound to the upper bound. Everything that serializes or hashes
//! a configuration goes through this one ordering.
//!
//! Sites outside the window are permanently empty and never give birth.
//! With a birth-truncation radius `L`, sites with `‖x‖∞ ≥ L` keep their
//! state but cannot act as the source of any birth.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear site indices.
pub type SiteSet = BTreeSet<usize>;

/// Sentinel for a neighbor slot that points outside the window.
pub const NO_SITE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum SiteState {
    Empty = 0,
    Animal = 1,
    Fleas = 2,
    AnimalFleas = 3,
}

impl SiteState {
    pub const ALL: [SiteState; 4] = [
        SiteState::Empty,
        SiteState::Animal,
        SiteState::Fleas,
        SiteState::AnimalFleas,
    ];

    #[inline]
    pub fn from_parts(animal: bool, fleas: bool) -> Self {
        Self::from_bits(animal as u8 | ((fleas as u8) << 1))
    }

    /// Bit 0 is the animal, bit 1 the fleas; only the low two bits are read.
    #[inline]
    pub fn from_bits(bits: u8) -> Self {
        match bits & 3 {
            0 => SiteState::Empty,
            1 => SiteState::Animal,
            2 => SiteState::Fleas,
            _ => SiteState::AnimalFleas,
        }
    }

    pub fn from_digit(d: u8) -> Result<Self> {
        if d > 3 {
            return Err(Error::Parse(format!("site state {d} is not in 0..=3")));
        }
        Ok(Self::from_bits(d))
    }

    #[inline]
    pub fn bits(self) -> u8 {
        self as u8
    }

    #[inline]
    pub fn has_animal(self) -> bool {
        self.bits() & 1 != 0
    }

    #[inline]
    pub fn has_fleas(self) -> bool {
        self.bits() & 2 != 0
    }

    #[inline]
    pub fn with_animal(self, animal: bool) -> Self {
        Self::from_parts(animal, self.has_fleas())
    }

    #[inline]
    pub fn with_fleas(self, fleas: bool) -> Self {
        Self::from_parts(self.has_animal(), fleas)
    }
}

impl fmt::Display for SiteState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bits())
    }
}

/// A finite box of `ℤ^d` containing the origin, with precomputed neighbor
/// tables.
#[derive(Debug, Clone)]
pub struct Window {
    bounds: Vec<(i32, i32)>,
    truncation: Option<u32>,
    strides: Vec<usize>,
    len: usize,
    neighbors: Vec<u32>,
    sup_norm: Vec<u32>,
}

impl PartialEq for Window {
    fn eq(&self, other: &Self) -> bool {
        self.bounds == other.bounds && self.truncation == other.truncation
    }
}

impl Eq for Window {}

/// Coordinates are packed into fixed-width RNG keys, so the dimension is capped.
pub const MAX_DIM: usize = 4;

impl Window {
    /// The cube `[-radius, radius]^dim`.
    pub fn centered(dim: usize, radius: u32, truncation: Option<u32>) -> Result<Self> {
        Self::with_radii(&vec![radius; dim], truncation)
    }

    pub fn with_radii(radii: &[u32], truncation: Option<u32>) -> Result<Self> {
        let bounds: Vec<(i32, i32)> = radii.iter().map(|&r| (-(r as i32), r as i32)).collect();
        Self::from_bounds(&bounds, truncation)
    }

    /// General box `∏ [lo_i, hi_i]` with `lo_i ≤ 0 ≤ hi_i`. Used for
    /// windows with an even number of sites, which cannot be centered.
    pub fn from_bounds(bounds: &[(i32, i32)], truncation: Option<u32>) -> Result<Self> {
        let dim = bounds.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidWindow(format!(
                "dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        for &(lo, hi) in bounds {
            if lo > 0 || hi < 0 {
                return Err(Error::InvalidWindow(format!(
                    "axis range [{lo}, {hi}] does not contain the origin"
                )));
            }
        }
        let extent = bounds
            .iter()
            .map(|&(lo, hi)| lo.unsigned_abs().max(hi as u32))
            .max()
            .unwrap_or(0);
        if let Some(l) = truncation {
            if l == 0 {
                return Err(Error::InvalidWindow(
                    "truncation radius must be positive".into(),
                ));
            }
            if l > extent.max(1) {
                return Err(Error::InvalidWindow(format!(
                    "truncation radius {l} exceeds window radius {extent}"
                )));
            }
        }

        let mut strides = vec![1usize; dim];
        for i in (0..dim.saturating_sub(1)).rev() {
            let width = (bounds[i + 1].1 - bounds[i + 1].0 + 1) as usize;
            strides[i] = strides[i + 1] * width;
        }
        let len = strides[0] * (bounds[0].1 - bounds[0].0 + 1) as usize;
        if len > u32::MAX as usize / 2 {
            return Err(Error::InvalidWindow("window too large".into()));
        }

        let mut w = Window {
            bounds: bounds.to_vec(),
            truncation,
            strides,
            len,
            neighbors: Vec::with_capacity(len * 2 * dim),
            sup_norm: Vec::with_capacity(len),
        };
        let mut coords = vec![0i32; dim];
        for idx in 0..len {
            w.fill_coords(idx, &mut coords);
            w.sup_norm
                .push(coords.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0));
            for axis in 0..dim {
                for step in [1i32, -1] {
                    coords[axis] += step;
                    let n = w.index_of(&coords).map_or(NO_SITE, |j| j as u32);
                    coords[axis] -= step;
                    w.neighbors.push(n);
                }
            }
        }
        Ok(w)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Number of sites.
    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bounds(&self) -> &[(i32, i32)] {
        &self.bounds
    }

    pub fn truncation(&self) -> Option<u32> {
        self.truncation
    }

    /// Largest `‖x‖∞` over the window.
    pub fn radius(&self) -> u32 {
        self.bounds
            .iter()
            .map(|&(lo, hi)| lo.unsigned_abs().max(hi as u32))
            .max()
            .unwrap_or(0)
    }

    /// Number of neighbor slots per site (`2d`). Slot `2i` is `+e_i`,
    /// slot `2i + 1` is `-e_i`.
    #[inline]
    pub fn degree(&self) -> usize {
        2 * self.dim()
    }

    pub fn index_of(&self, coords: &[i32]) -> Option<usize> {
        if coords.len() != self.dim() {
            return None;
        }
        let mut idx = 0usize;
        for ((&c, &(lo, hi)), &s) in coords.iter().zip(&self.bounds).zip(&self.strides) {
            if c < lo || c > hi {
                return None;
            }
            idx += (c - lo) as usize * s;
        }
        Some(idx)
    }

    pub fn require_index(&self, coords: &[i32]) -> Result<usize> {
        self.index_of(coords)
            .ok_or_else(|| Error::SiteOutsideWindow(coords.to_vec()))
    }

    pub fn coords(&self, idx: usize) -> Vec<i32> {
        let mut c = vec![0; self.dim()];
        self.fill_coords(idx, &mut c);
        c
    }

    pub fn fill_coords(&self, mut idx: usize, out: &mut [i32]) {
        for (axis, &s) in self.strides.iter().enumerate() {
            out[axis] = self.bounds[axis].0 + (idx / s) as i32;
            idx %= s;
        }
    }

    /// Neighbor in the given slot, or [`NO_SITE`].
    #[inline]
    pub fn neighbor(&self, idx: usize, slot: usize) -> u32 {
        self.neighbors[idx * self.degree() + slot]
    }

    #[inline]
    pub fn neighbors(&self, idx: usize) -> &[u32] {
        let d = self.degree();
        &self.neighbors[idx * d..(idx + 1) * d]
    }

    /// Slot at `to` that points back at `from` along the same axis.
    #[inline]
    pub fn reverse_slot(slot: usize) -> usize {
        slot ^ 1
    }

    #[inline]
    pub fn sup_norm(&self, idx: usize) -> u32 {
        self.sup_norm[idx]
    }

    /// Whether births may originate at this site under the truncation rule.
    #[inline]
    pub fn can_give_birth(&self, idx: usize) -> bool {
        match self.truncation {
            Some(l) => self.sup_norm[idx] < l,
            None => true,
        }
    }

    /// Same geometry with a different truncation radius.
    pub fn with_truncation(&self, truncation: Option<u32>) -> Result<Self> {
        Self::from_bounds(&self.bounds, truncation)
    }

    /// Sites of the window inside `∏ [lo_i, hi_i]`.
    pub fn sites_in_box(&self, lo: &[i32], hi: &[i32]) -> Vec<usize> {
        (0..self.len)
            .filter(|&i| {
                let c = self.coords(i);
                c.iter()
                    .zip(lo)
                    .zip(hi)
                    .all(|((&x, &l), &h)| x >= l && x <= h)
            })
            .collect()
    }

    /// Window sites of the cube `center + [-n, n]^d`; `None` if part of the
    /// cube falls outside the window.
    pub fn cube(&self, center: &[i32], n: u32) -> Option<Vec<usize>> {
        let n = n as i32;
        let mut out = Vec::new();
        let mut offset = vec![-n; self.dim()];
        loop {
            let c: Vec<i32> = center.iter().zip(&offset).map(|(a, b)| a + b).collect();
            out.push(self.index_of(&c)?);
            let mut axis = self.dim();
            loop {
                if axis == 0 {
                    return Some(out);
                }
                axis -= 1;
                if offset[axis] < n {
                    offset[axis] += 1;
                    break;
                }
                offset[axis] = -n;
            }
        }
    }

    pub fn header(&self) -> String {
        let b: Vec<String> = self
            .bounds
            .iter()
            .map(|(lo, hi)| format!("{lo}..{hi}"))
            .collect();
        let t = self
            .truncation
            .map_or_else(|| "none".to_string(), |l| l.to_string());
        format!("dim={} bounds={} truncation={}", self.dim(), b.join(","), t)
    }
}

/// Total map from window sites to [`SiteState`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    window: Arc<Window>,
    states: Vec<SiteState>,
}

impl Configuration {
    pub fn filled(window: Arc<Window>, state: SiteState) -> Self {
        let states = vec![state; window.len()];
        Configuration { window, states }
    }

    pub fn empty(window: Arc<Window>) -> Self {
        Self::filled(window, SiteState::Empty)
    }

    pub fn from_states(window: Arc<Window>, states: Vec<SiteState>) -> Result<Self> {
        if states.len() != window.len() {
            return Err(Error::InvalidParameter(format!(
                "{} states for a window of {} sites",
                states.len(),
                window.len()
            )));
        }
        Ok(Configuration { window, states })
    }

    /// Configuration with `A = animals`, `B = fleas`.
    pub fn from_sets(window: Arc<Window>, animals: &SiteSet, fleas: &SiteSet) -> Result<Self> {
        let n = window.len();
        if animals.iter().chain(fleas).any(|&i| i >= n) {
            return Err(Error::InvalidParameter("site index outside window".into()));
        }
        let states = (0..n)
            .map(|i| SiteState::from_parts(animals.contains(&i), fleas.contains(&i)))
            .collect();
        Ok(Configuration { window, states })
    }

    pub fn window(&self) -> &Arc<Window> {
        &self.window
    }

    pub fn states(&self) -> &[SiteState] {
        &self.states
    }

    #[inline]
    pub fn get(&self, idx: usize) -> SiteState {
        self.states[idx]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, s: SiteState) {
        self.states[idx] = s;
    }

    pub fn at(&self, coords: &[i32]) -> Result<SiteState> {
        Ok(self.states[self.window.require_index(coords)?])
    }

    pub fn set_at(&mut self, coords: &[i32], s: SiteState) -> Result<()> {
        let i = self.window.require_index(coords)?;
        self.states[i] = s;
        Ok(())
    }

    pub fn animal_set(&self) -> SiteSet {
        self.indices_where(SiteState::has_animal)
    }

    pub fn flea_set(&self) -> SiteSet {
        self.indices_where(SiteState::has_fleas)
    }

    fn indices_where(&self, f: impl Fn(SiteState) -> bool) -> SiteSet {
        self.states
            .iter()
            .enumerate()
            .filter(|(_, &s)| f(s))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn animal_count(&self) -> usize {
        self.states.iter().filter(|s| s.has_animal()).count()
    }

    pub fn flea_count(&self) -> usize {
        self.states.iter().filter(|s| s.has_fleas()).count()
    }

    /// Places fleas on `sites` (state 3 where hosted, 2 otherwise).
    pub fn add_fleas(&mut self, sites: impl IntoIterator<Item = usize>) {
        for i in sites {
            self.states[i] = self.states[i].with_fleas(true);
        }
    }

    pub fn clear_fleas(&mut self) {
        for s in &mut self.states {
            *s = s.with_fleas(false);
        }
    }

    /// `A(self) ⊆ A(other)` and `B(self) ⊆ B(other)`.
    pub fn leq(&self, other: &Configuration) -> Result<bool> {
        if self.window != other.window {
            return Err(Error::WindowMismatch);
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .all(|(&a, &b)| state_leq(a, b)))
    }

    /// Counts `(n0, n1, n2, n3)` of in-window nearest neighbors by state.
    pub fn neighbor_counts(&self, coords: &[i32]) -> Result<[usize; 4]> {
        let idx = self.window.require_index(coords)?;
        let mut counts = [0usize; 4];
        for &n in self.window.neighbors(idx) {
            if n != NO_SITE {
                counts[self.states[n as usize].bits() as usize] += 1;
            }
        }
        Ok(counts)
    }

    /// One line per site, `x1,...,xd:state`, after a `#` header line.
    pub fn serialize(&self) -> String {
        let mut out = format!("# {}\n", self.window.header());
        for (i, s) in self.states.iter().enumerate() {
            let c: Vec<String> = self
                .window
                .coords(i)
                .iter()
                .map(|x| x.to_string())
                .collect();
            out.push_str(&c.join(","));
            out.push(':');
            out.push_str(&s.to_string());
            out.push('\n');
        }
        out
    }

    /// Reads the format written by [`Configuration::serialize`]; the header
    /// must describe the given window and every site must appear once.
    pub fn parse(window: Arc<Window>, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty input".into()))?;
        if header.trim_start_matches('#').trim() != window.header() {
            return Err(Error::Parse(format!("header mismatch: {header}")));
        }
        let mut states = vec![None; window.len()];
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (site, state) = line
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("bad line {line}")))?;
            let coords = parse_coords(site)?;
            let idx = window.require_index(&coords)?;
            let d: u8 = state
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad state {state}")))?;
            if states[idx].replace(SiteState::from_digit(d)?).is_some() {
                return Err(Error::Parse(format!("site {site} listed twice")));
            }
        }
        let states = states
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Parse("not every site has a state".into()))?;
        Ok(Configuration { window, states })
    }
}

#[inline]
pub fn state_leq(a: SiteState, b: SiteState) -> bool {
    a.bits() & !b.bits() == 0
}

/// Parses `x1,...,xd`.
pub fn parse_coords(s: &str) -> Result<Vec<i32>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<i32>()
                .map_err(|_| Error::Parse(format!("bad coordinate in {s:?}")))
        })
        .collect()
}

/// Parses a `;`-separated list of sites, e.g. `0,0;1,0`.
pub fn parse_site_list(s: &str) -> Result<Vec<Vec<i32>>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(';').map(parse_coords).collect()
}
