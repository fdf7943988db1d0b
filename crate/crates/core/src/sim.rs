//! Step-transition simulation of the accelerated update.
//!
//! The centralized form iterates the matrix recursion directly. The
//! decentralized form runs one [`Agent`] per row of `K` in lock-step rounds:
//! every agent samples relative displacements to its in-neighbours from the
//! same snapshot, then all agents commit their next state. Agents only keep
//! their own current and previous state, their previous neighbour aggregate
//! and, when linked to the source, the previous source value.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{pin, GraphSpec, PinnedSystem};
use crate::stability::Gains;

/// Any state beyond this magnitude aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Source step from `x_init` (all `k < 0`) to `x_final` (all `k >= 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub x_init: f64,
    pub x_final: f64,
    pub max_steps: usize,
    /// Settling band as a fraction of `|x_final - x_init|`.
    pub band: f64,
    /// Desired spacing between neighbouring agents; only the decentralized
    /// harness sees it and it cancels out of every reconstructed aggregate.
    pub d0: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self { x_init: 0.0, x_final: 100.0, max_steps: 200, band: 0.05, d0: 0.0 }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps < 1 {
            return Err(Error::Domain("max_steps must be at least 1".into()));
        }
        if !(self.band > 0.0 && self.band < 1.0) {
            return Err(Error::Domain(format!("band must lie in (0, 1), got {}", self.band)));
        }
        if ![self.x_init, self.x_final, self.d0].iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("scenario values must be finite".into()));
        }
        Ok(())
    }

    fn source_at(&self, k: isize) -> f64 {
        if k < 0 {
            self.x_init
        } else {
            self.x_final
        }
    }
}

/// Agent states `X[k]` for `k = 0..=max_steps` together with the source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub source: Vec<f64>,
    pub x_init: f64,
    pub x_final: f64,
    pub settled_step: Option<usize>,
}

impl Trajectory {
    fn new(states: Vec<Vec<f64>>, source: Vec<f64>, sc: &Scenario) -> Self {
        let mut t = Self { states, source, x_init: sc.x_init, x_final: sc.x_final, settled_step: None };
        t.settled_step = settling_time(&t, sc.band);
        t
    }

    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    /// Largest per-step, per-agent absolute difference to `other`.
    pub fn max_deviation(&self, other: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

fn check_finite(x: &DVector<f64>, step: usize) -> Result<()> {
    if x.iter().all(|v| v.abs() <= DIVERGENCE_LIMIT) {
        Ok(())
    } else {
        Err(Error::Diverged { step })
    }
}

/// Iterates the matrix recursion with `X[-1] = X[0] = x_init·1` and
/// `X_s[-1] = x_init`.
pub fn simulate_central(p: &PinnedSystem, g: &Gains, sc: &Scenario) -> Result<Trajectory> {
    sc.validate()?;
    let n = p.dim();
    let (k_mat, b) = (p.k(), p.b());
    let mut prev = DVector::from_element(n, sc.x_init);
    let mut x = prev.clone();
    let mut states = Vec::with_capacity(sc.max_steps + 1);
    let mut source = Vec::with_capacity(sc.max_steps + 1);
    states.push(x.as_slice().to_vec());
    source.push(sc.source_at(0));

    for k in 0..sc.max_steps {
        let s = sc.source_at(k as isize);
        let s_prev = sc.source_at(k as isize - 1);
        let delta = &x - &prev;
        let feedback = k_mat * (&x + &delta * g.beta1);
        let drive = b * (g.alpha_hat * (s + g.beta1 * (s - s_prev)));
        let next = &x - feedback * g.alpha_hat + &delta * g.beta2 + drive;
        check_finite(&next, k + 1)?;
        prev = std::mem::replace(&mut x, next);
        states.push(x.as_slice().to_vec());
        source.push(sc.source_at(k as isize + 1));
    }
    Ok(Trajectory::new(states, source, sc))
}

/// One participant of the decentralized protocol.
#[derive(Debug, Clone)]
pub struct Agent {
    /// In-neighbours that are agents: (matrix row, weight).
    neighbors: Vec<(usize, f64)>,
    /// Weight of the link from the source, if any.
    source_weight: Option<f64>,
    state: f64,
    prev_state: f64,
    /// `α̂ K_i X[k-1]`
    prev_aggregate: f64,
    prev_source: f64,
}

/// What an agent reads off its sensors in one round: relative displacement to
/// each in-neighbour, offset by the desired spacing.
struct Measurements {
    agents: Vec<(f64, f64)>,
    source: Option<(f64, f64)>,
}

impl Agent {
    fn measure(&self, row: usize, states: &[f64], source: f64, d0: f64) -> Measurements {
        let own = states[row];
        Measurements {
            agents: self.neighbors.iter().map(|&(j, w)| (w, (states[j] - own) + d0)).collect(),
            source: self.source_weight.map(|w| (w, (source - own) + d0)),
        }
    }

    /// `α̂ K_i X` and the source value, both rebuilt from relative readings.
    fn reconstruct(&self, m: &Measurements, alpha_hat: f64, d0: f64) -> (f64, Option<f64>) {
        let mut k_row_x: f64 = m.agents.iter().map(|&(w, front)| w * (d0 - front)).sum();
        let mut source = None;
        if let Some((w, front)) = m.source {
            k_row_x += w * self.state;
            source = Some(self.state + (front - d0));
        }
        (alpha_hat * k_row_x, source)
    }

    fn step(&mut self, aggregate: f64, source: Option<f64>, g: &Gains) -> f64 {
        let mut next = self.state - (aggregate + g.beta1 * (aggregate - self.prev_aggregate))
            + g.beta2 * (self.state - self.prev_state);
        if let (Some(w), Some(s)) = (self.source_weight, source) {
            next += g.alpha_hat * w * (s + g.beta1 * (s - self.prev_source));
            self.prev_source = s;
        }
        self.prev_aggregate = aggregate;
        self.prev_state = self.state;
        self.state = next;
        next
    }
}

/// Builds one agent per non-source node, initially at consensus on `x_init`.
pub fn spawn_agents(gr: &GraphSpec, g: &Gains, sc: &Scenario) -> Vec<Agent> {
    let order = pin(gr).node_order().to_vec();
    let mut row_of = vec![usize::MAX; gr.node_count()];
    for (r, &node) in order.iter().enumerate() {
        row_of[node] = r;
    }
    let mut agents: Vec<Agent> = order
        .iter()
        .map(|&node| {
            let mut neighbors = Vec::new();
            let mut source_weight = None;
            for (j, w) in gr.in_neighbors(node) {
                if j == gr.source() {
                    source_weight = Some(w);
                } else {
                    neighbors.push((row_of[j], w));
                }
            }
            Agent {
                neighbors,
                source_weight,
                state: sc.x_init,
                prev_state: sc.x_init,
                prev_aggregate: 0.0,
                prev_source: sc.x_init,
            }
        })
        .collect();

    // pre-roll reading of the initial consensus to fill the delayed aggregate
    let initial = vec![sc.x_init; agents.len()];
    for (row, agent) in agents.iter_mut().enumerate() {
        let m = agent.measure(row, &initial, sc.x_init, sc.d0);
        let (agg, _) = agent.reconstruct(&m, g.alpha_hat, sc.d0);
        agent.prev_aggregate = agg;
    }
    agents
}

/// Per-agent simulation using only relative-displacement measurements.
pub fn simulate_decentralized(gr: &GraphSpec, g: &Gains, sc: &Scenario) -> Result<Trajectory> {
    sc.validate()?;
    let mut agents = spawn_agents(gr, g, sc);
    let mut snapshot: Vec<f64> = agents.iter().map(|a| a.state).collect();
    let mut states = Vec::with_capacity(sc.max_steps + 1);
    let mut source = Vec::with_capacity(sc.max_steps + 1);
    states.push(snapshot.clone());
    source.push(sc.source_at(0));

    for k in 0..sc.max_steps {
        let s = sc.source_at(k as isize);
        let readings: Vec<Measurements> = agents
            .iter()
            .enumerate()
            .map(|(row, a)| a.measure(row, &snapshot, s, sc.d0))
            .collect();
        for (agent, m) in agents.iter_mut().zip(&readings) {
            let (agg, src) = agent.reconstruct(m, g.alpha_hat, sc.d0);
            agent.step(agg, src, g);
        }
        snapshot = agents.iter().map(|a| a.state).collect();
        if snapshot.iter().any(|v| v.is_nan() || v.abs() > DIVERGENCE_LIMIT) {
            return Err(Error::Diverged { step: k + 1 });
        }
        states.push(snapshot.clone());
        source.push(sc.source_at(k as isize + 1));
    }
    Ok(Trajectory::new(states, source, sc))
}

/// First step after which every agent stays within `band·|x_final - x_init|`
/// of `x_final` through the end of the run.
pub fn settling_time(t: &Trajectory, band: f64) -> Option<usize> {
    let change = (t.x_final - t.x_init).abs();
    if change == 0.0 {
        return Some(0);
    }
    let tol = band * change;
    let inside = |x: &Vec<f64>| x.iter().all(|v| (v - t.x_final).abs() <= tol);
    match t.states.iter().rposition(|x| !inside(x)) {
        None => Some(0),
        Some(last) if last + 1 < t.states.len() => Some(last + 1),
        Some(_) => None,
    }
}

/// `max_i |X_i[end] - x_final|`.
pub fn consensus_error(t: &Trajectory) -> f64 {
    t.states
        .last()
        .map(|x| x.iter().map(|v| (v - t.x_final).abs()).fold(0.0, f64::max))
        .unwrap_or(0.0)
}

/// Settling steps without storing the trajectory; `None` when the run does
/// not settle or diverges. Used by the settling-time design objective.
pub fn settling_steps(p: &PinnedSystem, g: &Gains, sc: &Scenario) -> Option<usize> {
    let n = p.dim();
    let change = (sc.x_final - sc.x_init).abs();
    if change == 0.0 {
        return Some(0);
    }
    let tol = sc.band * change;
    let (k_mat, b) = (p.k(), p.b());
    let mut prev = vec![sc.x_init; n];
    let mut x = prev.clone();
    let mut next = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut last_out = 0usize;
    for k in 0..sc.max_steps {
        let s = sc.source_at(k as isize);
        let s_prev = sc.source_at(k as isize - 1);
        for i in 0..n {
            y[i] = x[i] + g.beta1 * (x[i] - prev[i]);
        }
        let drive = g.alpha_hat * (s + g.beta1 * (s - s_prev));
        let mut outside = false;
        for i in 0..n {
            let mut ky = 0.0;
            for j in 0..n {
                ky += k_mat[(i, j)] * y[j];
            }
            let v = x[i] - g.alpha_hat * ky + g.beta2 * (x[i] - prev[i]) + b[i] * drive;
            if v.is_nan() || v.abs() > DIVERGENCE_LIMIT {
                return None;
            }
            outside |= (v - sc.x_final).abs() > tol;
            next[i] = v;
        }
        if outside {
            last_out = k + 1;
        }
        std::mem::swap(&mut prev, &mut x);
        std::mem::swap(&mut x, &mut next);
    }
    (last_out < sc.max_steps).then_some(last_out + 1)
}
