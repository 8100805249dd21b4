//! Maximization over unit-modulus IRS weights, parameterized by the phases
//! `phi` with `w_j = e^{j phi_j}`.
//!
//! Greedy per-element grid search provides the starting point; gradient
//! ascent with Armijo backtracking refines it.

use rand::Rng;

use crate::linalg::phases_to_weights;
use crate::objectives::{CsiObjective, FixedFilterObjective, ObjectiveContext};
use crate::random::{rng_from_seed, uniform_phase};
use crate::{Error, Result};

/// Objective over IRS phases. Larger is better.
pub trait PhaseObjective {
    fn value(&self, phases: &[f64]) -> f64;

    fn analytic_gradient(&self, _phases: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Adapts a closure to [`PhaseObjective`] (no analytic gradient).
pub struct FnObjective<F>(pub F);

impl<F: Fn(&[f64]) -> f64> PhaseObjective for FnObjective<F> {
    fn value(&self, phases: &[f64]) -> f64 {
        (self.0)(phases)
    }
}

/// Closure pair: value and analytic gradient.
pub struct FnWithGradient<F, G>(pub F, pub G);

impl<F: Fn(&[f64]) -> f64, G: Fn(&[f64]) -> Vec<f64>> PhaseObjective for FnWithGradient<F, G> {
    fn value(&self, phases: &[f64]) -> f64 {
        (self.0)(phases)
    }

    fn analytic_gradient(&self, phases: &[f64]) -> Option<Vec<f64>> {
        Some((self.1)(phases))
    }
}

impl PhaseObjective for ObjectiveContext {
    /// Evaluation failures map to `-inf` so line searches reject them.
    fn value(&self, phases: &[f64]) -> f64 {
        self.utility(&phases_to_weights(phases)).unwrap_or(f64::NEG_INFINITY)
    }

    fn analytic_gradient(&self, phases: &[f64]) -> Option<Vec<f64>> {
        self.utility_gradient(&phases_to_weights(phases)).ok().flatten()
    }
}

impl PhaseObjective for CsiObjective {
    fn value(&self, phases: &[f64]) -> f64 {
        CsiObjective::value(self, &phases_to_weights(phases))
    }

    fn analytic_gradient(&self, phases: &[f64]) -> Option<Vec<f64>> {
        self.value_and_gradient(&phases_to_weights(phases), true).1
    }
}

impl PhaseObjective for FixedFilterObjective {
    fn value(&self, phases: &[f64]) -> f64 {
        FixedFilterObjective::value(self, &phases_to_weights(phases))
    }

    fn analytic_gradient(&self, phases: &[f64]) -> Option<Vec<f64>> {
        Some(self.gradient(&phases_to_weights(phases)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerSettings {
    pub grid_points: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo_c1: f64,
    pub armijo_beta: f64,
    pub max_backtracks: usize,
    /// Central finite-difference probe in radians.
    pub fd_step: f64,
    /// Starts beyond the first (greedy) one are uniformly random.
    pub n_starts: usize,
    /// Use an objective's analytic gradient when it offers one.
    pub analytic_gradient: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            grid_points: 8,
            max_iters: 200,
            grad_tol: 1e-5,
            armijo_c1: 1e-4,
            armijo_beta: 0.5,
            max_backtracks: 30,
            fd_step: 1e-5,
            n_starts: 1,
            analytic_gradient: true,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("optimizer: {m}")));
        if self.grid_points < 2 {
            return bad("grid_points must be at least 2");
        }
        if !(self.grad_tol > 0.0 && self.armijo_c1 > 0.0 && self.fd_step > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.armijo_beta > 0.0 && self.armijo_beta < 1.0) {
            return bad("armijo_beta must lie in (0, 1)");
        }
        if self.n_starts == 0 {
            return bad("n_starts must be at least 1");
        }
        Ok(())
    }
}

/// Outcome of one ascent.
#[derive(Clone, Debug)]
pub struct AscentResult {
    pub phases: Vec<f64>,
    pub value: f64,
    /// Objective after every accepted step, starting with the initial value.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub stalled: bool,
    pub converged: bool,
}

/// Single greedy pass over the elements on the grid `2 pi i / grid_points`;
/// later elements stay at phase 0 while earlier ones are chosen.
pub fn greedy_init<O: PhaseObjective + ?Sized>(obj: &O, n_irs: usize, settings: &OptimizerSettings) -> Vec<f64> {
    let grid: Vec<f64> = (0..settings.grid_points)
        .map(|i| std::f64::consts::TAU * i as f64 / settings.grid_points as f64)
        .collect();
    let mut phases = vec![0.0; n_irs];
    for j in 0..n_irs {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for &g in &grid {
            phases[j] = g;
            let f = obj.value(&phases);
            if f > best.0 {
                best = (f, g);
            }
        }
        phases[j] = best.1;
    }
    phases
}

/// Central finite-difference gradient.
pub fn fd_gradient<O: PhaseObjective + ?Sized>(obj: &O, phases: &[f64], step: f64) -> Vec<f64> {
    let mut probe = phases.to_vec();
    (0..phases.len())
        .map(|j| {
            probe[j] = phases[j] + step;
            let up = obj.value(&probe);
            probe[j] = phases[j] - step;
            let down = obj.value(&probe);
            probe[j] = phases[j];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Analytic gradient when enabled and available, finite differences
/// otherwise.
pub fn gradient<O: PhaseObjective + ?Sized>(obj: &O, phases: &[f64], settings: &OptimizerSettings) -> Vec<f64> {
    if settings.analytic_gradient {
        if let Some(g) = obj.analytic_gradient(phases) {
            if g.iter().all(|x| x.is_finite()) {
                return g;
            }
        }
    }
    fd_gradient(obj, phases, settings.fd_step)
}

/// Gradient ascent with Armijo backtracking from unit step.
pub fn ascend<O: PhaseObjective + ?Sized>(obj: &O, phi0: &[f64], settings: &OptimizerSettings) -> AscentResult {
    let mut phases = phi0.to_vec();
    let mut value = obj.value(&phases);
    let mut trace = vec![value];
    let mut stalled = false;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < settings.max_iters {
        let g = gradient(obj, &phases, settings);
        let g2: f64 = g.iter().map(|x| x * x).sum();
        if g2.sqrt() < settings.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=settings.max_backtracks {
            let cand: Vec<f64> = phases
                .iter()
                .zip(&g)
                .map(|(p, d)| (p + alpha * d).rem_euclid(std::f64::consts::TAU))
                .collect();
            let f = obj.value(&cand);
            if f >= value + settings.armijo_c1 * alpha * g2 {
                accepted = Some((cand, f));
                break;
            }
            alpha *= settings.armijo_beta;
        }
        match accepted {
            Some((cand, f)) => {
                phases = cand;
                value = f;
                trace.push(value);
            }
            None => {
                stalled = true;
                break;
            }
        }
    }
    AscentResult {
        phases,
        value,
        trace,
        iterations,
        stalled,
        converged,
    }
}

/// Greedy start plus `n_starts - 1` random starts; returns the best ascent.
pub fn optimize<O: PhaseObjective + ?Sized>(obj: &O, n_irs: usize, settings: &OptimizerSettings, seed: u64) -> AscentResult {
    let mut best = ascend(obj, &greedy_init(obj, n_irs, settings), settings);
    let mut rng = rng_from_seed(seed);
    for _ in 1..settings.n_starts {
        let start: Vec<f64> = (0..n_irs).map(|_| uniform_phase(&mut rng)).collect();
        let run = ascend(obj, &start, settings);
        if run.value > best.value {
            best = AscentResult {
                iterations: best.iterations + run.iterations,
                ..run
            };
        } else {
            best.iterations += run.iterations;
        }
    }
    best
}

/// Uniformly random phases.
pub fn random_phases<R: Rng + ?Sized>(n_irs: usize, rng: &mut R) -> Vec<f64> {
    (0..n_irs).map(|_| uniform_phase(rng)).collect()
}
