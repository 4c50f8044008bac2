//! Limited-memory BFGS with a strong Wolfe line search.
//!
//! The solver works on matrices (the transform rows); inner products are
//! Frobenius. Objectives may return `+inf` to reject a point, which the
//! line search treats as a failed sufficient-decrease test so it backtracks
//! into the feasible region. Every accepted step satisfies the strong Wolfe
//! conditions; if the bounded zoom cannot produce one, the solver stops and
//! reports the best iterate reached so far.

use ndarray::Array2;
use std::collections::VecDeque;

/// Objective callback: value and gradient, `+inf` for infeasible points.
type ObjectiveFn<'a> = dyn FnMut(&Array2<f64>) -> (f64, Array2<f64>) + 'a;

/// Line-search and memory parameters.
#[derive(Debug, Clone)]
pub struct LbfgsParams {
    /// Number of curvature pairs kept for the two-loop recursion.
    pub memory: usize,
    /// Iteration cap for one `minimize` call.
    pub max_iterations: usize,
    /// Convergence test: `||grad||_inf <= gradient_tolerance`.
    pub gradient_tolerance: f64,
    /// Sufficient-decrease constant, `0 < c1 < c2 < 1`.
    pub wolfe_c1: f64,
    /// Curvature constant.
    pub wolfe_c2: f64,
}

impl Default for LbfgsParams {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 20,
            gradient_tolerance: 1e-6,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
        }
    }
}

impl LbfgsParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.memory == 0 {
            return Err("memory must be positive".into());
        }
        if !(self.wolfe_c1 > 0.0 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err("need 0 < c1 < c2 < 1".into());
        }
        if self.gradient_tolerance.is_nan() || self.gradient_tolerance <= 0.0 {
            return Err("gradient tolerance must be positive".into());
        }
        Ok(())
    }
}

/// Result of one minimization run.
#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub w: Array2<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Gradient tolerance reached.
    pub converged: bool,
    /// The line search failed to find a strong Wolfe point and the run was
    /// cut short at the best iterate.
    pub line_search_failed: bool,
}

fn inner(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

struct ProbePoint {
    alpha: f64,
    value: f64,
    slope: f64,
    w: Array2<f64>,
    grad: Array2<f64>,
}

/// Evaluates the one-dimensional restriction `phi(alpha) = f(w + alpha d)`.
fn probe(
    f: &mut ObjectiveFn,
    w: &Array2<f64>,
    direction: &Array2<f64>,
    alpha: f64,
) -> ProbePoint {
    let mut trial = w.clone();
    trial.scaled_add(alpha, direction);
    let (value, grad) = f(&trial);
    let slope = if value.is_finite() {
        inner(&grad, direction)
    } else {
        f64::NAN
    };
    ProbePoint {
        alpha,
        value,
        slope,
        w: trial,
        grad,
    }
}

/// Strong Wolfe line search: bracketing phase plus a safeguarded zoom.
///
/// Returns `None` when the bounded attempts cannot produce a point that
/// satisfies both conditions.
fn strong_wolfe_search(
    f: &mut ObjectiveFn,
    w: &Array2<f64>,
    direction: &Array2<f64>,
    value0: f64,
    slope0: f64,
    c1: f64,
    c2: f64,
) -> Option<ProbePoint> {
    const MAX_BRACKET: usize = 20;
    const MAX_ZOOM: usize = 40;

    let sufficient = |p: &ProbePoint| p.value.is_finite() && p.value <= value0 + c1 * p.alpha * slope0;
    let curvature_ok = |p: &ProbePoint| p.slope.abs() <= -c2 * slope0;

    let zoom = |f: &mut ObjectiveFn,
                mut lo: ProbePoint,
                mut hi_alpha: f64,
                mut hi_value: f64|
     -> Option<ProbePoint> {
        for _ in 0..MAX_ZOOM {
            // Quadratic interpolation from the lo endpoint, safeguarded to the
            // middle 60% of the interval; bisect when the model is useless.
            let span = hi_alpha - lo.alpha;
            let mut alpha = if hi_value.is_finite() {
                let denom = 2.0 * (hi_value - lo.value - lo.slope * span);
                if denom.abs() > 1e-300 {
                    lo.alpha - lo.slope * span * span / denom
                } else {
                    lo.alpha + 0.5 * span
                }
            } else {
                lo.alpha + 0.5 * span
            };
            let low = lo.alpha + 0.2 * span;
            let high = lo.alpha + 0.8 * span;
            // The interval may run in either direction.
            let (a, b) = if low <= high { (low, high) } else { (high, low) };
            if !(alpha.is_finite() && alpha >= a && alpha <= b) {
                alpha = lo.alpha + 0.5 * span;
            }
            let trial = probe(f, w, direction, alpha);
            if !sufficient(&trial) || trial.value >= lo.value {
                hi_alpha = trial.alpha;
                hi_value = trial.value;
            } else {
                if curvature_ok(&trial) {
                    return Some(trial);
                }
                if trial.slope * (hi_alpha - lo.alpha) >= 0.0 {
                    hi_alpha = lo.alpha;
                    hi_value = lo.value;
                }
                lo = trial;
            }
            if (hi_alpha - lo.alpha).abs() <= 1e-14 * lo.alpha.abs().max(1.0) {
                break;
            }
        }
        None
    };

    let mut prev_alpha = 0.0;
    let mut prev_value = value0;
    let mut prev: Option<ProbePoint> = None;
    let mut alpha = 1.0;
    for iteration in 0..MAX_BRACKET {
        let trial = probe(f, w, direction, alpha);
        if !sufficient(&trial) || (iteration > 0 && trial.value >= prev_value) {
            let lo = match prev {
                Some(p) => p,
                None => ProbePoint {
                    alpha: 0.0,
                    value: value0,
                    slope: slope0,
                    w: w.clone(),
                    grad: Array2::zeros(w.raw_dim()),
                },
            };
            return zoom(f, lo, trial.alpha, trial.value);
        }
        if curvature_ok(&trial) {
            return Some(trial);
        }
        if trial.slope >= 0.0 {
            let hi_alpha = prev_alpha;
            let hi_value = prev_value;
            return zoom(f, trial, hi_alpha, hi_value);
        }
        prev_alpha = trial.alpha;
        prev_value = trial.value;
        prev = Some(trial);
        alpha *= 2.0;
    }
    None
}

/// Minimizes `f` from `w0` with L-BFGS.
///
/// `f` returns the objective value and gradient; `+inf` marks infeasible
/// points. The best (lowest-value) iterate visited is returned even when
/// the run stops early.
pub fn lbfgs_minimize(
    mut f: impl FnMut(&Array2<f64>) -> (f64, Array2<f64>),
    w0: &Array2<f64>,
    params: &LbfgsParams,
) -> LbfgsOutcome {
    let mut w = w0.clone();
    let (mut value, mut grad) = f(&w);
    let mut history: VecDeque<(Array2<f64>, Array2<f64>, f64)> =
        VecDeque::with_capacity(params.memory);

    if !value.is_finite() {
        // Infeasible start; nothing sensible to do.
        return LbfgsOutcome {
            w,
            value,
            iterations: 0,
            converged: false,
            line_search_failed: true,
        };
    }

    for iteration in 0..params.max_iterations {
        if inf_norm(&grad) <= params.gradient_tolerance {
            return LbfgsOutcome {
                w,
                value,
                iterations: iteration,
                converged: true,
                line_search_failed: false,
            };
        }

        // Two-loop recursion for the search direction.
        let mut direction = grad.mapv(|v| -v);
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * inner(s, &direction);
            direction.scaled_add(-a, y);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = inner(s, y) / inner(y, y);
            direction.mapv_inplace(|v| v * gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
            let b = rho * inner(y, &direction);
            direction.scaled_add(a - b, s);
        }

        let mut slope = inner(&grad, &direction);
        if slope >= 0.0 {
            // Stale curvature; fall back to steepest descent.
            history.clear();
            direction = grad.mapv(|v| -v);
            slope = inner(&grad, &direction);
        }

        let step = match strong_wolfe_search(
            &mut f,
            &w,
            &direction,
            value,
            slope,
            params.wolfe_c1,
            params.wolfe_c2,
        ) {
            Some(p) => p,
            None => {
                return LbfgsOutcome {
                    w,
                    value,
                    iterations: iteration,
                    converged: false,
                    line_search_failed: true,
                }
            }
        };

        let s = &step.w - &w;
        let y_diff = &step.grad - &grad;
        let sy = inner(&s, &y_diff);
        if sy > 1e-12 * inf_norm(&s).max(1e-300) * inf_norm(&y_diff).max(1e-300) {
            if history.len() == params.memory {
                history.pop_front();
            }
            history.push_back((s, y_diff, 1.0 / sy));
        }
        w = step.w;
        value = step.value;
        grad = step.grad;
    }

    let converged = inf_norm(&grad) <= params.gradient_tolerance;
    LbfgsOutcome {
        w,
        value,
        iterations: params.max_iterations,
        converged,
        line_search_failed: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn run(
        f: impl FnMut(&Array2<f64>) -> (f64, Array2<f64>),
        w0: Array2<f64>,
        max_iterations: usize,
    ) -> LbfgsOutcome {
        let params = LbfgsParams {
            max_iterations,
            gradient_tolerance: 1e-8,
            ..LbfgsParams::default()
        };
        lbfgs_minimize(f, &w0, &params)
    }

    #[test]
    fn quadratic_bowl_converges_fast() {
        let target = array![[1.0, -2.0], [0.5, 3.0]];
        let dim = target.len();
        let out = run(
            |w| {
                let d = w - &target;
                (0.5 * d.iter().map(|v| v * v).sum::<f64>(), d)
            },
            Array2::zeros((2, 2)),
            dim,
        );
        assert!(out.converged, "should converge within {dim} iterations");
        for (a, b) in out.w.iter().zip(target.iter()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn rosenbrock_reaches_minimum() {
        let out = run(
            |w| {
                let (x, y) = (w[[0, 0]], w[[0, 1]]);
                let value = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
                let gx = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x);
                let gy = 200.0 * (y - x * x);
                (value, array![[gx, gy]])
            },
            array![[-1.2, 1.0]],
            200,
        );
        let dist = ((out.w[[0, 0]] - 1.0).powi(2) + (out.w[[0, 1]] - 1.0).powi(2)).sqrt();
        assert!(dist < 1e-5, "distance to optimum: {dist}");
    }

    #[test]
    fn starting_at_minimum_returns_immediately() {
        let out = run(
            |w| (0.5 * w.iter().map(|v| v * v).sum::<f64>(), w.clone()),
            Array2::zeros((3, 3)),
            50,
        );
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn infinite_regions_are_avoided() {
        // Barrier at x <= 0; minimum at x = 2.
        let out = run(
            |w| {
                let x = w[[0, 0]];
                if x <= 0.0 {
                    (f64::INFINITY, array![[0.0]])
                } else {
                    ((x - 2.0).powi(2) - 0.1 * x.ln(), array![[2.0 * (x - 2.0) - 0.1 / x]])
                }
            },
            array![[0.05]],
            100,
        );
        assert!(out.value.is_finite());
        assert!(out.w[[0, 0]] > 0.0);
        assert!((out.w[[0, 0]] - 2.0).abs() < 0.1);
    }

    #[test]
    fn monotone_nonincreasing_values() {
        let mut values = Vec::new();
        let target = array![[4.0, -1.0, 0.0]];
        let out = run(
            |w| {
                let d = w - &target;
                let v = 0.5 * d.iter().map(|x| x * x).sum::<f64>()
                    + 0.3 * w.iter().map(|x| x.powi(4)).sum::<f64>();
                let g = d + 1.2 * w.mapv(|x| x.powi(3));
                values.push(v);
                (v, g)
            },
            array![[10.0, 10.0, -10.0]],
            60,
        );
        assert!(out.value.is_finite());
        // The accepted iterate sequence is non-increasing (probes may not be).
        assert!(out.value <= values[0]);
    }

    #[test]
    fn infeasible_start_reports_failure() {
        let out = run(|_| (f64::INFINITY, Array2::zeros((1, 1))), array![[0.0]], 10);
        assert!(out.line_search_failed);
        assert_eq!(out.iterations, 0);
    }
}
