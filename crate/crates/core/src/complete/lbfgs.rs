//! Limited-memory BFGS with backtracking Armijo line search.
//!
//! Accepted iterates never increase the objective. The search stops on a
//! small gradient, on the iteration cap, or when no step along the current
//! direction gives sufficient decrease.

use std::collections::VecDeque;

use nalgebra::DVector;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop once the Euclidean gradient norm drops to this value.
    pub grad_tol: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Stop when `window` iterations lower the value by less than `rel_stall` relative.
    pub window: usize,
    pub rel_stall: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions { memory: 10, max_iter: 2000, grad_tol: 1e-10, armijo: 1e-4, max_backtracks: 60, window: 100, rel_stall: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    MaxIter,
    LineSearch,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome<T: Real> {
    pub x: DVector<T>,
    pub value: T,
    pub grad_norm: T,
    pub iterations: usize,
    pub termination: Termination,
}

/// Error raised when the objective is not finite at the starting point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonFinite;

/// Minimizes `f`, which returns the value and gradient at a point.
pub fn minimize<T: Real>(
    x0: DVector<T>,
    mut f: impl FnMut(&DVector<T>) -> (T, DVector<T>),
    opts: &LbfgsOptions,
) -> Result<LbfgsOutcome<T>, NonFinite> {
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(NonFinite);
    }
    let tol = T::of(opts.grad_tol);
    let c1 = T::of(opts.armijo);
    let half = T::of(0.5);
    let mut hist: VecDeque<(DVector<T>, DVector<T>, T)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    let mut termination = Termination::MaxIter;
    let mut trail: VecDeque<T> = VecDeque::with_capacity(opts.window + 1);
    let stall = T::of(opts.rel_stall);

    while iterations < opts.max_iter {
        let gn = g.norm();
        if gn <= tol {
            termination = Termination::Gradient;
            break;
        }
        let mut d = -two_loop(&g, &hist);
        let mut slope = g.dot(&d);
        if !(slope < T::zero()) || !slope.is_finite() {
            hist.clear();
            d = -g.clone();
            slope = -gn * gn;
        }
        // Unit step once curvature is known; otherwise a step of unit length.
        let mut step = if hist.is_empty() { T::one() / gn.max(T::one()) } else { T::one() };
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let xn = &x + &d * step;
            let (fn_, gn_) = f(&xn);
            if fn_.is_finite() && fn_ <= fx + c1 * step * slope {
                accepted = Some((xn, fn_, gn_));
                break;
            }
            step *= half;
        }
        let Some((xn, fn_, gnew)) = accepted else {
            termination = Termination::LineSearch;
            break;
        };
        let s = &xn - &x;
        let y = &gnew - &g;
        let sy = s.dot(&y);
        if sy > T::default_epsilon() * s.norm() * y.norm() {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, T::one() / sy));
        }
        x = xn;
        fx = fn_;
        g = gnew;
        iterations += 1;
        trail.push_back(fx);
        if trail.len() > opts.window {
            let old = trail.pop_front().expect("nonempty trail");
            if old - fx <= stall * old.abs() {
                termination = Termination::Stalled;
                break;
            }
        }
    }
    let grad_norm = g.norm();
    if grad_norm <= tol {
        termination = Termination::Gradient;
    }
    Ok(LbfgsOutcome { x, value: fx, grad_norm, iterations, termination })
}

fn two_loop<T: Real>(g: &DVector<T>, hist: &VecDeque<(DVector<T>, DVector<T>, T)>) -> DVector<T> {
    let mut q = g.clone();
    let mut alpha = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = *rho * s.dot(&q);
        q.axpy(-a, y, T::one());
        alpha.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        let gamma = s.dot(y) / y.dot(y);
        q *= gamma;
    }
    for ((s, y, rho), a) in hist.iter().zip(alpha.into_iter().rev()) {
        let b = *rho * y.dot(&q);
        q.axpy(a - b, s, T::one());
    }
    q
}
