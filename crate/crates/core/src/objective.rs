//! Smooth convex objectives consumed by the greedy solver.
//!
//! [`Objective`] is the contract: value, gradient and exact minimization over
//! a coordinate subspace. [`SensingProblem`] is the least-squares objective
//! `‖Ax − y‖₂²`; [`LogisticObjective`] exercises the general convex path.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm_inf, DenseMatrix, DenseVector, SupportSet};
use crate::math::{sigmoid, softplus, sqrt};

/// Relative scale of the on-support gradient tolerance.
pub const TOL_OPT_SCALE: f64 = 1e-8;

const NEWTON_MAX_ITERATIONS: usize = 100;
const ARMIJO_C: f64 = 1e-4;
const GOLDEN_TOLERANCE: f64 = 1e-12;

/// A smooth convex function on `ℝᵈ`.
pub trait Objective {
    fn dimension(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn gradient(&self, x: &[f64]) -> Result<DenseVector>;

    /// Minimizer over vectors supported on `support`. Implementations must
    /// return `x` with `supp(x) ⊆ support` and `|∇Q(x)ᵢ| ≤ tol_opt()` for
    /// every `i` in the support.
    fn restricted_minimize(&self, support: &SupportSet) -> Result<DenseVector>;

    /// Sup-norm tolerance on the on-support gradient of a restricted minimizer.
    fn tol_opt(&self) -> f64;

    /// `min_α Q(x + α eⱼ)`.
    ///
    /// The default runs golden-section search on `[−R, R]` with
    /// `R = 10 (1 + ‖x‖_∞)`, which is exact up to the search tolerance
    /// whenever the minimizer lies inside the bracket.
    fn coordinate_minimum(&self, x: &[f64], j: usize) -> Result<f64> {
        check_len(x, self.dimension())?;
        let radius = 10.0 * (1.0 + norm_inf(x));
        let mut probe = x.to_vec();
        let mut eval = |alpha: f64| -> Result<f64> {
            probe[j] = x[j] + alpha;
            self.value(&probe)
        };
        let (lo, hi) = golden_section(&mut eval, -radius, radius, GOLDEN_TOLERANCE)?;
        let at_zero = self.value(x)?;
        Ok(f64::min(lo.min(hi), at_zero))
    }
}

fn check_len(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            what: "iterate length",
            expected: d,
            found: x.len(),
        });
    }
    Ok(())
}

/// Golden-section search for a unimodal function; returns the values at the
/// two final probe points.
fn golden_section(
    f: &mut impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let inv_phi = (sqrt(5.0) - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let scale = (b - a).abs().max(1.0);
    while (b - a).abs() > tol * scale {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok((fc, fd))
}

/// `Q(x) = ‖Ax − y‖₂²` for a sensing matrix `A` (n×d) and observation `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingProblem {
    a: DenseMatrix,
    y: DenseVector,
    tol_opt: f64,
}

impl SensingProblem {
    pub fn new(a: DenseMatrix, y: DenseVector) -> Result<Self> {
        if y.len() != a.rows() {
            return Err(Error::DimensionMismatch {
                what: "observation length",
                expected: a.rows(),
                found: y.len(),
            });
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("observation"));
        }
        let tol_opt = TOL_OPT_SCALE * (1.0 + a.tr_mul_vec(&y)?.norm_inf());
        Ok(Self { a, y, tol_opt })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn observation(&self) -> &DenseVector {
        &self.y
    }

    /// `Ax − y`
    pub fn residual(&self, x: &[f64]) -> Result<DenseVector> {
        let mut r = self.a.mul_vec(x)?;
        for (ri, yi) in r.iter_mut().zip(self.y.iter()) {
            *ri -= yi;
        }
        Ok(r)
    }
}

/// `‖Ax − y‖₂²`
pub fn quadratic_value(p: &SensingProblem, x: &[f64]) -> Result<f64> {
    Ok(p.residual(x)?.norm_sq())
}

/// `2Aᵀ(Ax − y)`
pub fn quadratic_gradient(p: &SensingProblem, x: &[f64]) -> Result<DenseVector> {
    let r = p.residual(x)?;
    let mut g = p.a.tr_mul_vec(&r)?;
    for gi in g.iter_mut() {
        *gi *= 2.0;
    }
    Ok(g)
}

impl Objective for SensingProblem {
    fn dimension(&self) -> usize {
        self.a.cols()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        quadratic_value(self, x)
    }

    fn gradient(&self, x: &[f64]) -> Result<DenseVector> {
        quadratic_gradient(self, x)
    }

    fn restricted_minimize(&self, support: &SupportSet) -> Result<DenseVector> {
        linalg::restricted_least_squares(&self.a, &self.y, support)
    }

    fn tol_opt(&self) -> f64 {
        self.tol_opt
    }

    /// Closed form: `Q(x + αeⱼ) = Q(x) + α gⱼ + α²‖aⱼ‖²` is minimized at
    /// `α* = −gⱼ / (2‖aⱼ‖²)`.
    fn coordinate_minimum(&self, x: &[f64], j: usize) -> Result<f64> {
        check_len(x, self.dimension())?;
        if j >= self.dimension() {
            return Err(Error::IndexOutOfRange {
                index: j,
                dimension: self.dimension(),
            });
        }
        let col_sq = self.a.column_norm_sq(j);
        if col_sq == 0.0 {
            return self.value(x);
        }
        let r = self.residual(x)?;
        let gj = 2.0
            * (0..self.a.rows())
                .map(|i| self.a.get(i, j) * r[i])
                .sum::<f64>();
        let alpha = -gj / (2.0 * col_sq);
        let mut moved = x.to_vec();
        moved[j] += alpha;
        self.value(&moved)
    }
}

/// `Q(x) = Σᵢ log(1 + exp(−labelᵢ ⟨rowᵢ, x⟩))` with labels in `{−1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticObjective {
    features: DenseMatrix,
    labels: Vec<f64>,
    tol_opt: f64,
}

/// Builds the logistic-loss objective, validating the labels.
pub fn logistic_objective(features: DenseMatrix, labels: DenseVector) -> Result<LogisticObjective> {
    LogisticObjective::new(features, labels)
}

impl LogisticObjective {
    pub fn new(features: DenseMatrix, labels: DenseVector) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                what: "label count",
                expected: features.rows(),
                found: labels.len(),
            });
        }
        if let Some((row, &value)) = labels
            .iter()
            .enumerate()
            .find(|(_, v)| **v != 1.0 && **v != -1.0)
        {
            return Err(Error::InvalidLabel { row, value });
        }
        let labels = labels.into_vec();
        let mut obj = Self {
            features,
            labels,
            tol_opt: 0.0,
        };
        let g0 = obj.gradient(&vec![0.0; obj.dimension()])?;
        obj.tol_opt = TOL_OPT_SCALE * (1.0 + g0.norm_inf());
        Ok(obj)
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    fn margins(&self, x: &[f64]) -> Result<DenseVector> {
        check_len(x, self.dimension())?;
        self.features.mul_vec(x)
    }

    /// Gradient restricted to `support` and the Hessian block on `support`.
    fn restricted_newton_system(
        &self,
        x: &[f64],
        support: &[usize],
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let m = self.margins(x)?;
        let k = support.len();
        let mut g = vec![0.0; k];
        let mut h = vec![vec![0.0; k]; k];
        for (i, label) in self.labels.iter().enumerate() {
            let row = self.features.row(i);
            let p = sigmoid(-label * m[i]);
            let w = p * (1.0 - p);
            for (a, &ja) in support.iter().enumerate() {
                g[a] -= label * p * row[ja];
                let wa = w * row[ja];
                for (b, &jb) in support.iter().enumerate().skip(a) {
                    h[a][b] += wa * row[jb];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                h[a][b] = h[b][a];
            }
        }
        Ok((g, h))
    }
}

impl Objective for LogisticObjective {
    fn dimension(&self) -> usize {
        self.features.cols()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let m = self.margins(x)?;
        Ok(self
            .labels
            .iter()
            .zip(m.iter())
            .map(|(l, mi)| softplus(-l * mi))
            .sum())
    }

    fn gradient(&self, x: &[f64]) -> Result<DenseVector> {
        let m = self.margins(x)?;
        let weights: Vec<f64> = self
            .labels
            .iter()
            .zip(m.iter())
            .map(|(l, mi)| -l * sigmoid(-l * mi))
            .collect();
        self.features.tr_mul_vec(&weights)
    }

    /// Damped Newton on the support subspace with Armijo backtracking.
    fn restricted_minimize(&self, support: &SupportSet) -> Result<DenseVector> {
        let d = self.dimension();
        if support.bound() > d {
            return Err(Error::IndexOutOfRange {
                index: support.bound() - 1,
                dimension: d,
            });
        }
        let mut x = vec![0.0; d];
        if support.is_empty() {
            return Ok(x.into());
        }
        let idx = support.as_slice();
        let mut value = self.value(&x)?;
        for _ in 0..NEWTON_MAX_ITERATIONS {
            let (g, h) = self.restricted_newton_system(&x, idx)?;
            if norm_inf(&g) <= self.tol_opt {
                return Ok(x.into());
            }
            let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
            let h_cols: Vec<Vec<f64>> = (0..idx.len())
                .map(|b| h.iter().map(|row| row[b]).collect())
                .collect();
            let mut step = linalg::min_norm_least_squares(h_cols, &neg_g);
            let mut slope = dot(&g, &step);
            if slope.is_nan() || slope >= 0.0 || step.iter().any(|v| !v.is_finite()) {
                // Singular curvature: fall back to steepest descent.
                step = neg_g;
                slope = dot(&g, &step);
            }
            let mut t = 1.0;
            let mut accepted = false;
            let mut trial = x.clone();
            for _ in 0..60 {
                for (k, &j) in idx.iter().enumerate() {
                    trial[j] = x[j] + t * step[k];
                }
                let v = self.value(&trial)?;
                if v <= value + ARMIJO_C * t * slope {
                    value = v;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            x.copy_from_slice(&trial);
        }
        let (g, _) = self.restricted_newton_system(&x, idx)?;
        let gradient = norm_inf(&g);
        if gradient <= self.tol_opt {
            return Ok(x.into());
        }
        Err(Error::NotConverged {
            iterations: NEWTON_MAX_ITERATIONS,
            gradient,
        })
    }

    fn tol_opt(&self) -> f64 {
        self.tol_opt
    }
}
