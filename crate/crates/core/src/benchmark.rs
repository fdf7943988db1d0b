//! Regeneration of the method comparison table: every design strategy on one
//! network, with achieved spectral radius and simulated settling time set
//! against reference values.

use serde::Serialize;

use crate::design::{design_no_dsr, design_robust, search_design, DesignResult, Objective, SearchConfig};
use crate::error::Error;
use crate::graph::PinnedSystem;
use crate::sim::Scenario;
use crate::spectral::SpectralSummary;
use crate::stability::Method;

/// σ tolerance for rows whose objective is the spectral radius.
pub const SIGMA_TOLERANCE: f64 = 0.005;
/// Allowed settling-time deviation, in sampling periods.
pub const TS_TOLERANCE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Robust,
    Search(Method, Objective),
    OptimalNoDsr,
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::Robust => "robust-adsr".into(),
            Strategy::Search(m, o) => format!("{m}/min-{o}"),
            Strategy::OptimalNoDsr => "optimal-no-dsr".into(),
        }
    }
}

/// Reference spectral radius and settling time of a row on the example network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reference {
    pub sigma: f64,
    pub settling_steps: usize,
}

pub const TABLE: [(Strategy, Reference); 10] = [
    (Strategy::Robust, Reference { sigma: 0.4472, settling_steps: 7 }),
    (Strategy::Search(Method::Adsr, Objective::Sigma), Reference { sigma: 0.4472, settling_steps: 7 }),
    (Strategy::Search(Method::Adsr, Objective::Ts), Reference { sigma: 0.6634, settling_steps: 6 }),
    (Strategy::Search(Method::Momentum, Objective::Sigma), Reference { sigma: 0.4479, settling_steps: 7 }),
    (Strategy::Search(Method::Momentum, Objective::Ts), Reference { sigma: 0.4845, settling_steps: 6 }),
    (Strategy::Search(Method::Nesterov, Objective::Sigma), Reference { sigma: 0.5706, settling_steps: 11 }),
    (Strategy::Search(Method::Nesterov, Objective::Ts), Reference { sigma: 0.7599, settling_steps: 7 }),
    (Strategy::Search(Method::Outdated, Objective::Sigma), Reference { sigma: 0.5973, settling_steps: 8 }),
    (Strategy::Search(Method::Outdated, Objective::Ts), Reference { sigma: 0.7318, settling_steps: 6 }),
    (Strategy::OptimalNoDsr, Reference { sigma: 0.745, settling_steps: 14 }),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub strategy: Strategy,
    pub label: String,
    /// Present only when the network is the reference example.
    pub reference: Option<Reference>,
    pub design: Option<DesignResult>,
    pub sigma_ok: bool,
    pub ts_ok: bool,
    pub pass: bool,
    pub note: Option<String>,
}

impl BenchmarkRow {
    fn judge(strategy: Strategy, reference: Option<Reference>, outcome: Result<DesignResult, Error>) -> Self {
        let label = strategy.label();
        let design = match outcome {
            Ok(d) => d,
            Err(Error::DegenerateSpectrum(_)) => {
                return Self {
                    strategy,
                    label,
                    reference,
                    design: None,
                    sigma_ok: false,
                    ts_ok: false,
                    pass: false,
                    note: Some("degenerate: use no-DSR, σ = 0".into()),
                }
            }
            Err(e) => {
                return Self {
                    strategy,
                    label,
                    reference,
                    design: None,
                    sigma_ok: false,
                    ts_ok: false,
                    pass: false,
                    note: Some(e.to_string()),
                }
            }
        };
        let (sigma_ok, ts_ok) = match reference {
            Some(r) => within_tolerance(strategy, r, &design),
            None => (design.sigma < 1.0, design.settling_steps.is_some()),
        };
        Self { strategy, label, reference, design: Some(design), sigma_ok, ts_ok, pass: sigma_ok && ts_ok, note: None }
    }
}

fn within_tolerance(strategy: Strategy, reference: Reference, design: &DesignResult) -> (bool, bool) {
    let minimizes_ts = matches!(strategy, Strategy::Search(_, Objective::Ts));
    // min-Ts rows must match or beat the reference on both columns
    let sigma_ok = if minimizes_ts {
        design.sigma <= reference.sigma + SIGMA_TOLERANCE
    } else {
        (design.sigma - reference.sigma).abs() <= SIGMA_TOLERANCE
    };
    let ts_ok = design.settling_steps.is_some_and(|ts| {
        ts.abs_diff(reference.settling_steps) <= TS_TOLERANCE && (!minimizes_ts || ts <= reference.settling_steps)
    });
    (sigma_ok, ts_ok)
}

/// Whether `s` is the spectrum of the example network the reference values
/// belong to.
pub fn is_reference_spectrum(s: &SpectralSummary) -> bool {
    let r5 = 5f64.sqrt();
    let want = [(3.0 - r5) / 2.0, 1.0, 1.0, (3.0 + r5) / 2.0];
    s.eigenvalues.len() == want.len()
        && s.eigenvalues.iter().zip(want).all(|(l, w)| (l.re - w).abs() <= 1e-9 && l.im == 0.0)
}

/// Runs one strategy.
pub fn run_strategy(
    strategy: Strategy,
    p: &PinnedSystem,
    s: &SpectralSummary,
    cfg: &SearchConfig,
    sc: &Scenario,
) -> Result<DesignResult, Error> {
    match strategy {
        Strategy::Robust => design_robust(p, s, sc),
        Strategy::OptimalNoDsr => design_no_dsr(p, s, sc),
        Strategy::Search(m, o) => search_design(p, s, m, o, cfg, sc),
    }
}

/// All ten rows; a failing design marks its row, never the whole table.
/// Rows carry reference values only on the example network; elsewhere a
/// row passes when its design is stable and settles.
pub fn regenerate(p: &PinnedSystem, s: &SpectralSummary, cfg: &SearchConfig, sc: &Scenario) -> Vec<BenchmarkRow> {
    let referenced = is_reference_spectrum(s);
    TABLE
        .iter()
        .map(|&(strategy, reference)| {
            let reference = referenced.then_some(reference);
            BenchmarkRow::judge(strategy, reference, run_strategy(strategy, p, s, cfg, sc))
        })
        .collect()
}
