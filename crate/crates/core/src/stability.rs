//! Closed-loop characteristic polynomials of the accelerated update, Jury
//! stability tests, method-specific conditions, spectral radius and the
//! robustness margin.
//!
//! For every eigenvalue `λ` of `K` the closed loop contributes the roots of
//!
//! ```text
//! z² + [α̂(1+β1)λ − (1+β2)] z + (β2 − α̂β1λ) = 0
//! ```
//!
//! and the update is stable iff all of them lie strictly inside the unit
//! circle. For a complex pair `a ± jb` the real form is the quartic obtained
//! as the product of the two conjugate quadratics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::perturbed_example;
use crate::spectral::{summarize, SpectralSummary, C64};

/// Which accelerated variant a gain triple belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NoDsr,
    Adsr,
    Nesterov,
    Momentum,
    Outdated,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::NoDsr, Method::Adsr, Method::Nesterov, Method::Momentum, Method::Outdated];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::NoDsr => "no-dsr",
            Method::Adsr => "adsr",
            Method::Nesterov => "nesterov",
            Method::Momentum => "momentum",
            Method::Outdated => "outdated",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidGains(format!("unknown method '{s}'")))
    }
}

/// Gain triple `(α̂, β1, β2)`: `β1` weights the outdated feedback inside the
/// Laplacian product, `β2` the momentum term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub method: Method,
    pub alpha_hat: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Gains {
    /// Checks the structural constraints of `method` (e.g. `β1 = 0` for momentum).
    pub fn new(method: Method, alpha_hat: f64, beta1: f64, beta2: f64) -> Result<Self> {
        if ![alpha_hat, beta1, beta2].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGains("gains must be finite".into()));
        }
        let ok = match method {
            Method::NoDsr => beta1 == 0.0 && beta2 == 0.0,
            Method::Adsr => true,
            Method::Nesterov => beta1 == beta2,
            Method::Momentum => beta1 == 0.0,
            Method::Outdated => beta2 == 0.0,
        };
        if !ok {
            return Err(Error::InvalidGains(format!(
                "({alpha_hat}, {beta1}, {beta2}) violates the {method} constraints"
            )));
        }
        if beta1 == -1.0 {
            return Err(Error::InvalidGains("β1 = -1 leaves the base gain undefined".into()));
        }
        Ok(Self { method, alpha_hat, beta1, beta2 })
    }

    pub fn no_dsr(alpha: f64) -> Result<Self> {
        Self::new(Method::NoDsr, alpha, 0.0, 0.0)
    }

    pub fn adsr(alpha_hat: f64, beta1: f64, beta2: f64) -> Result<Self> {
        Self::new(Method::Adsr, alpha_hat, beta1, beta2)
    }

    pub fn nesterov(alpha_hat: f64, beta: f64) -> Result<Self> {
        Self::new(Method::Nesterov, alpha_hat, beta, beta)
    }

    pub fn momentum(alpha_hat: f64, beta2: f64) -> Result<Self> {
        Self::new(Method::Momentum, alpha_hat, 0.0, beta2)
    }

    pub fn outdated(alpha_hat: f64, beta1: f64) -> Result<Self> {
        Self::new(Method::Outdated, alpha_hat, beta1, 0.0)
    }

    /// Underlying update gain `α = α̂ / (1 + β1)`.
    pub fn base_gain(&self) -> f64 {
        self.alpha_hat / (1.0 + self.beta1)
    }
}

/// Largest stabilizing plain update gain, `min_m 2 a_m / (a_m² + b_m²)`.
pub fn alpha_bar(s: &SpectralSummary) -> f64 {
    s.eigenvalues
        .iter()
        .map(|z| 2.0 * z.re / z.norm_sqr())
        .fold(f64::INFINITY, f64::min)
}

/// Coefficients `(c1, c0)` of the monic quadratic `z² + c1 z + c0`.
pub fn char_quadratic(g: &Gains, lambda: C64) -> (C64, C64) {
    let c1 = lambda * (g.alpha_hat * (1.0 + g.beta1)) - (1.0 + g.beta2);
    let c0 = C64::new(g.beta2, 0.0) - lambda * (g.alpha_hat * g.beta1);
    (c1, c0)
}

/// Both roots of `z² + c1 z + c0`, computed without cancellation: the larger
/// root from `-(c1 ± √Δ)/2` with the sign matched to `c1`, the other as `c0 / z1`.
/// A discriminant below its own rounding error is a double root at `-c1/2`.
pub fn quadratic_roots(c1: C64, c0: C64) -> [C64; 2] {
    let delta = c1 * c1 - c0 * 4.0;
    if delta.norm() <= 8.0 * f64::EPSILON * (c1.norm_sqr() + 4.0 * c0.norm()) {
        let z = -c1 * 0.5;
        return [z, z];
    }
    let disc = delta.sqrt();
    let sum = if (c1.conj() * disc).re >= 0.0 { c1 + disc } else { c1 - disc };
    let z1 = -sum * 0.5;
    if z1.norm() == 0.0 {
        return [z1, z1];
    }
    [z1, c0 / z1]
}

/// Closed-loop roots for one eigenvalue of `K`.
pub fn mode_roots(g: &Gains, lambda: C64) -> [C64; 2] {
    let (c1, c0) = char_quadratic(g, lambda);
    quadratic_roots(c1, c0)
}

/// `max |z|` over the two roots of the mode quadratic.
pub fn mode_radius(g: &Gains, lambda: C64) -> f64 {
    let [z1, z2] = mode_roots(g, lambda);
    z1.norm().max(z2.norm())
}

/// Real quartic `z⁴ + a3 z³ + a2 z² + a1 z + a0` for a complex eigenvalue pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartic {
    pub a3: f64,
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
}

impl Quartic {
    pub fn eval(&self, z: C64) -> C64 {
        (((z + self.a3) * z + self.a2) * z + self.a1) * z + self.a0
    }
}

/// Quartic coefficients for the eigenvalue pair `a ± jb`.
pub fn char_quartic(g: &Gains, a: f64, b: f64) -> Quartic {
    let (ah, b1, b2) = (g.alpha_hat, g.beta1, g.beta2);
    let d = a * ah * b1 - b2;
    let a0 = d * d + ah * ah * b * b * b1 * b1;
    let a1 = -2.0
        * (d * d
            + a * ah * b1 * (a * ah - 1.0)
            + ah * (ah * b * b * b1 - a * b2)
            + ah * ah * b * b * b1 * b1
            + b2);
    let a2 = d * d
        + (a * ah - 1.0).powi(2)
        + 2.0 * ah * ah * b1 * (a * a + b * b)
        + 4.0 * b2
        - 2.0 * a * ah * (2.0 * b1 + b2)
        + ah * ah * b * b * (b1 * b1 + 1.0);
    let a3 = 2.0 * a * ah * (b1 + 1.0) - 2.0 * (b2 + 1.0);
    Quartic { a3, a2, a1, a0 }
}

/// Jury verdict for a real eigenvalue.
///
/// `margins` are the slacks of `α̂ > 0`, of the lower bound on `β2` and of the
/// upper bound on `β2`; the test passes iff all three are strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RealJury {
    pub stable: bool,
    pub margins: [f64; 3],
    pub beta2_lower: f64,
    pub beta2_upper: f64,
}

pub fn jury_real(g: &Gains, lambda: f64) -> RealJury {
    let lower = g.alpha_hat * lambda * (g.beta1 + 0.5) - 1.0;
    let upper = g.alpha_hat * g.beta1 * lambda + 1.0;
    let margins = [g.alpha_hat, g.beta2 - lower, upper - g.beta2];
    RealJury {
        stable: margins.iter().all(|&m| m > 0.0),
        margins,
        beta2_lower: lower,
        beta2_upper: upper,
    }
}

/// Jury verdict for a complex eigenvalue, with the slack of all five conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexJury {
    pub stable: bool,
    pub margins: [f64; 5],
    /// `|a0| = 1` to within 1e-12: the table cannot be completed.
    pub degenerate: bool,
    pub quartic: Quartic,
}

pub fn jury_complex(g: &Gains, lambda: C64) -> ComplexJury {
    let (a, b) = (lambda.re, lambda.im);
    let ah = g.alpha_hat;
    let q = char_quartic(g, a, b);
    let Quartic { a3, a2, a1, a0 } = q;
    let t = 2.0 * g.beta1 + 1.0;
    let at_minus_one = (2.0 * (g.beta2 + 1.0) - ah * t * a).powi(2) + ah * ah * t * t * b * b;
    let s = a0 * a0 - 1.0;
    let u = a0 * a3 - a1;
    let margins = [
        ah * ah,
        at_minus_one,
        1.0 - a0.abs(),
        s.abs() - u.abs(),
        (s * s - u * u).abs() - (a2 * s * (a0 - 1.0) - (a0 * a1 - a3) * u).abs(),
    ];
    let degenerate = (a0.abs() - 1.0).abs() <= 1e-12;
    ComplexJury {
        stable: !degenerate && margins.iter().all(|&m| m > 0.0),
        margins,
        degenerate,
        quartic: q,
    }
}

/// Per-eigenvalue condition for the Nesterov, momentum and outdated-feedback
/// variants on a real eigenvalue.
pub fn corollary_method_conditions(g: &Gains, lambda: f64) -> Result<bool> {
    let al = g.alpha_hat * lambda;
    let positive = g.alpha_hat > 0.0;
    let holds = match g.method {
        Method::Nesterov => {
            let mid = g.beta1 * (1.0 - al);
            al / 2.0 - 1.0 < mid && mid < 1.0
        }
        Method::Momentum => al / 2.0 - 1.0 < g.beta2 && g.beta2 < 1.0,
        Method::Outdated => {
            let mid = al * g.beta1;
            -1.0 < mid && mid < 1.0 - al / 2.0
        }
        other => {
            return Err(Error::MethodMismatch {
                expected: "nesterov, momentum, outdated",
                got: other.to_string(),
            })
        }
    };
    Ok(positive && holds)
}

/// Stability from the eigenvalue range alone.
///
/// Both bounds are affine in `λ`, so testing the extremal eigenvalue chosen
/// by the sign of `β1 + 1/2` (lower bound) and of `β1` (upper bound) is
/// equivalent to testing every eigenvalue in `[λ_min, λ_max]`.
pub fn range_conditions(g: &Gains, lambda_min: f64, lambda_max: f64) -> bool {
    let lower_lambda = if g.beta1 <= -0.5 { lambda_min } else { lambda_max };
    let upper_lambda = if g.beta1 <= 0.0 { lambda_max } else { lambda_min };
    let lower = g.alpha_hat * lower_lambda * (g.beta1 + 0.5) - 1.0;
    let upper = g.alpha_hat * g.beta1 * upper_lambda + 1.0;
    g.alpha_hat > 0.0 && lower < g.beta2 && g.beta2 < upper
}

/// Jury test for a single eigenvalue, dispatching on whether it is real.
pub fn jury_stable(g: &Gains, lambda: C64) -> bool {
    if lambda.im == 0.0 {
        jury_real(g, lambda.re).stable
    } else {
        jury_complex(g, lambda).stable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeReport {
    pub lambda: [f64; 2],
    pub roots: [[f64; 2]; 2],
    /// Largest root magnitude of this mode.
    pub magnitude: f64,
    pub jury_stable: bool,
    pub jury_margins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub gains: Gains,
    /// `σ < 1`.
    pub stable: bool,
    /// Every mode passes its Jury test.
    pub jury_stable: bool,
    pub per_eigenvalue: Vec<ModeReport>,
    pub spectral_radius: f64,
    /// Distance of the outermost root to the unit circle, `1 - σ`.
    pub margin: f64,
}

pub fn mode_report(g: &Gains, lambda: C64) -> ModeReport {
    let roots = mode_roots(g, lambda);
    let (jury_ok, margins) = if lambda.im == 0.0 {
        let j = jury_real(g, lambda.re);
        (j.stable, j.margins.to_vec())
    } else {
        let j = jury_complex(g, lambda);
        (j.stable, j.margins.to_vec())
    };
    ModeReport {
        lambda: [lambda.re, lambda.im],
        roots: roots.map(|z| [z.re, z.im]),
        magnitude: roots[0].norm().max(roots[1].norm()),
        jury_stable: jury_ok,
        jury_margins: margins,
    }
}

/// Closed-loop spectral radius over all eigenvalues of `K`.
pub fn spectral_radius(g: &Gains, eigenvalues: &[C64]) -> f64 {
    eigenvalues.iter().map(|&l| mode_radius(g, l)).fold(0.0, f64::max)
}

pub fn closed_loop_radius(g: &Gains, s: &SpectralSummary) -> StabilityReport {
    let per_eigenvalue: Vec<ModeReport> = s.eigenvalues.iter().map(|&l| mode_report(g, l)).collect();
    let sigma = per_eigenvalue.iter().map(|m| m.magnitude).fold(0.0, f64::max);
    StabilityReport {
        gains: *g,
        stable: sigma < 1.0,
        jury_stable: per_eigenvalue.iter().all(|m| m.jury_stable),
        per_eigenvalue,
        spectral_radius: sigma,
        margin: 1.0 - sigma,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub e: f64,
    pub sigma: f64,
    pub stable: bool,
    pub real_spectrum: bool,
}

/// Closed-loop radius of the perturbed example network for each `e`.
pub fn perturbation_sweep(e_values: &[f64], g: &Gains) -> Result<Vec<SweepPoint>> {
    e_values
        .iter()
        .map(|&e| {
            let s = summarize(&perturbed_example(e)?)?;
            let report = closed_loop_radius(g, &s);
            Ok(SweepPoint {
                e,
                sigma: report.spectral_radius,
                stable: report.stable,
                real_spectrum: s.is_real_spectrum,
            })
        })
        .collect()
}

/// `count` values spaced evenly in log10 between `lo` and `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..count)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
                .collect()
        }
    }
}
