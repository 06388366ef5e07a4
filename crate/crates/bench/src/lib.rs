//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use tlcp_core::{Configuration, EventLog, Rates, SiteState, Window};

pub fn line(radius: u32) -> Arc<Window> {
    Arc::new(Window::centered(1, radius, None).expect("valid window"))
}

pub fn supercritical() -> Rates {
    Rates::new(3.0, 3.0, 1.0).expect("valid rates")
}

/// Log on `[-burn_in, horizon]` plus the all-hosted start with fleas at the origin.
pub fn fixture(radius: u32, burn_in: f64, horizon: f64, seed: u64) -> (EventLog, Configuration) {
    let w = line(radius);
    let log = EventLog::generate(w.clone(), -burn_in, horizon, supercritical(), seed).expect("log");
    let mut init = Configuration::filled(w, SiteState::Animal);
    init.set_at(&[0], SiteState::AnimalFleas)
        .expect("origin in window");
    (log, init)
}
