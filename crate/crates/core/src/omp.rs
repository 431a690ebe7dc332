//! Fully corrective greedy selection: starting from the minimizer over an
//! initial feature set, repeatedly add the coordinate with the largest
//! absolute gradient entry and re-minimize over the enlarged support.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseVector, SupportSet};
use crate::objective::Objective;

/// Relative scale of the default early-stop threshold.
pub const DEFAULT_EARLY_STOP_SCALE: f64 = 1e-10;

/// When to stop before the iteration budget is spent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StopRule {
    /// Stop once `‖∇Q‖_∞ ≤ 1e-10 · (1 + Q(x⁽⁰⁾))`.
    Relative,
    /// Stop once `‖∇Q‖_∞ ≤` the given absolute tolerance.
    Absolute(f64),
    /// Always run the full budget.
    Never,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpConfig {
    /// Iteration budget `k₀`.
    pub k0: usize,
    pub initial_support: SupportSet,
    pub stop: StopRule,
}

impl OmpConfig {
    /// Budget `k0`, empty initial support, default early stop.
    pub fn new(k0: usize) -> Self {
        Self {
            k0,
            initial_support: SupportSet::empty(),
            stop: StopRule::Relative,
        }
    }

    pub fn with_initial_support(mut self, support: SupportSet) -> Self {
        self.initial_support = support;
        self
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    fn threshold(&self, q0: f64) -> Option<f64> {
        match self.stop {
            StopRule::Relative => Some(DEFAULT_EARLY_STOP_SCALE * (1.0 + q0)),
            StopRule::Absolute(t) if t > 0.0 => Some(t),
            StopRule::Absolute(_) | StopRule::Never => None,
        }
    }
}

/// Full trace of a run. Index `k` of every per-iterate list refers to `x⁽ᵏ⁾`;
/// `selected[k − 1]` is the coordinate added to form `F⁽ᵏ⁾`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmpResult {
    pub k0: usize,
    pub iterates: Vec<DenseVector>,
    pub supports: Vec<SupportSet>,
    pub selected: Vec<usize>,
    pub objective_values: Vec<f64>,
    pub grad_infnorms: Vec<f64>,
    pub stopped_early: bool,
}

impl OmpResult {
    /// Number of greedy steps taken.
    pub fn iterations(&self) -> usize {
        self.selected.len()
    }

    pub fn final_iterate(&self) -> &DenseVector {
        self.iterates.last().expect("trace always holds x⁽⁰⁾")
    }

    pub fn final_support(&self) -> &SupportSet {
        self.supports.last().expect("trace always holds F⁽⁰⁾")
    }

    pub fn final_objective(&self) -> f64 {
        *self
            .objective_values
            .last()
            .expect("trace always holds Q(x⁽⁰⁾)")
    }

    pub fn initial_support(&self) -> &SupportSet {
        &self.supports[0]
    }

    /// The run spent its whole budget, or stopped because the gradient
    /// vanished (after which further steps cannot lower the objective).
    pub fn completed(&self) -> bool {
        self.iterations() == self.k0 || self.stopped_early
    }
}

/// Smallest index attaining `maxᵢ |gᵢ|`.
pub fn select_coordinate(grad: &[f64]) -> Result<usize> {
    if grad.is_empty() {
        return Err(Error::Empty("gradient"));
    }
    if !grad.iter().all(|g| g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    let mut best = 0;
    let mut best_abs = grad[0].abs();
    for (i, g) in grad.iter().enumerate().skip(1) {
        if g.abs() > best_abs {
            best = i;
            best_abs = g.abs();
        }
    }
    Ok(best)
}

/// Best coordinate outside `support`, lowest index on ties.
fn select_off_support(grad: &[f64], support: &SupportSet) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, g) in grad.iter().enumerate() {
        if support.contains(i) {
            continue;
        }
        match best {
            Some((_, b)) if g.abs() <= b => {}
            _ => best = Some((i, g.abs())),
        }
    }
    best.map(|(i, _)| i)
}

/// Runs the fully corrective greedy algorithm on `obj`.
pub fn omp_run(obj: &dyn Objective, cfg: &OmpConfig) -> Result<OmpResult> {
    let d = obj.dimension();
    if cfg.initial_support.bound() > d {
        return Err(Error::IndexOutOfRange {
            index: cfg.initial_support.bound() - 1,
            dimension: d,
        });
    }
    let mut support = cfg.initial_support.clone();
    let mut x = obj.restricted_minimize(&support)?;
    let mut q = obj.value(&x)?;
    let mut grad = obj.gradient(&x)?;
    let threshold = cfg.threshold(q);

    let mut result = OmpResult {
        k0: cfg.k0,
        iterates: Vec::with_capacity(cfg.k0 + 1),
        supports: Vec::with_capacity(cfg.k0 + 1),
        selected: Vec::with_capacity(cfg.k0),
        objective_values: Vec::with_capacity(cfg.k0 + 1),
        grad_infnorms: Vec::with_capacity(cfg.k0 + 1),
        stopped_early: false,
    };
    result.grad_infnorms.push(grad.norm_inf());
    result.objective_values.push(q);
    result.supports.push(support.clone());
    result.iterates.push(x);

    for _ in 0..cfg.k0 {
        let gmax = grad.norm_inf();
        if threshold.is_some_and(|t| gmax <= t) {
            result.stopped_early = true;
            break;
        }
        let mut j = select_coordinate(&grad)?;
        if support.contains(j) {
            // Only reachable through inner-solver slack.
            if let Some(alt) = select_off_support(&grad, &support) {
                j = alt;
            }
        }
        support.insert(j);
        x = obj.restricted_minimize(&support)?;
        q = obj.value(&x)?;
        grad = obj.gradient(&x)?;

        result.selected.push(j);
        result.grad_infnorms.push(grad.norm_inf());
        result.objective_values.push(q);
        result.supports.push(support.clone());
        result.iterates.push(x);
    }
    Ok(result)
}
