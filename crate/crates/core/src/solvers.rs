//! IHT and structured IHT fixed-point iterations.
//!
//! Both solvers run `x <- T(x + A^*(b - A x))` from `x = 0`, where `T` is the
//! global hard threshold (IHT) or the composition of local thresholds
//! (structured IHT). Step size is fixed at one.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{norm1, norm2, sub, ComplexMatrix, ComplexVector};
use crate::thresholding::{hard_threshold, structured_threshold, SparsityStructure};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub max_iters: usize,
    /// Stop once `||b - A x|| / ||b||` falls below this.
    pub residual_tol: f64,
    /// Stop once `||x^(t+1) - x^(t)||` falls below this; zero disables it.
    pub stagnation_tol: f64,
    /// Clear entries outside the union of the sets after thresholding.
    pub zero_outside: bool,
    /// Keep every iterate in the trace.
    pub record_trace: bool,
    /// Run local thresholds over sets on scoped threads. The result is
    /// identical to the sequential order since the sets are disjoint.
    pub parallel_sets: bool,
    /// Stop as soon as an iteration raises the residual, returning the
    /// iterate before it. The first iterate is always accepted.
    pub stop_on_residual_increase: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            residual_tol: 1e-12,
            stagnation_tol: 0.0,
            zero_outside: true,
            record_trace: false,
            parallel_sets: false,
            stop_on_residual_increase: false,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.residual_tol >= 0.0) || !(self.stagnation_tol >= 0.0) {
            return Err(Error::InvalidArgument("tolerances must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    ResidualTol,
    Stagnation,
    ResidualIncrease,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    /// `x^(1), x^(2), ...` when `record_trace` is set.
    pub iterates: Option<Vec<ComplexVector>>,
    /// Relative residual after each iteration.
    pub residual_history: Vec<f64>,
    /// `||x^(0) - x*||_1`, present with a truth vector.
    pub initial_l1_error: Option<f64>,
    /// `||x^(t) - x*||_1` for `t = 1, 2, ...`, present with a truth vector.
    pub l1_error_history: Option<Vec<f64>>,
    pub iterations_run: usize,
    pub stop_reason: StopReason,
}

impl SolveTrace {
    /// `||x^(t) - x*||_1` for `t = 0..=iterations_run`.
    pub fn l1_errors_from_start(&self) -> Option<Vec<f64>> {
        let first = self.initial_l1_error?;
        let rest = self.l1_error_history.as_ref()?;
        Some(std::iter::once(first).chain(rest.iter().copied()).collect())
    }
}

/// Plain IHT with global budget `k`.
pub fn iht_solve(
    a: &ComplexMatrix,
    b: &[Complex64],
    k: usize,
    cfg: &SolveConfig,
    truth: Option<&[Complex64]>,
) -> Result<(ComplexVector, SolveTrace)> {
    if k > a.cols() {
        return Err(Error::BudgetTooLarge { budget: k, len: a.cols() });
    }
    run(a, b, cfg, truth, |z| hard_threshold(z, k))
}

/// Structured IHT: each iterate keeps at most `k_j` entries in every `S_j`.
pub fn structured_iht_solve(
    a: &ComplexMatrix,
    b: &[Complex64],
    ss: &SparsityStructure,
    cfg: &SolveConfig,
    truth: Option<&[Complex64]>,
) -> Result<(ComplexVector, SolveTrace)> {
    if ss.ambient_length() != a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "structure over {} indices for a matrix with {} columns",
            ss.ambient_length(),
            a.cols()
        )));
    }
    if cfg.parallel_sets && ss.len() > 1 {
        run(a, b, cfg, truth, |z| parallel_structured_threshold(z, ss, cfg.zero_outside))
    } else {
        run(a, b, cfg, truth, |z| structured_threshold(z, ss, cfg.zero_outside))
    }
}

fn parallel_structured_threshold(z: &[Complex64], ss: &SparsityStructure, zero_outside: bool) -> Result<ComplexVector> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(ss.len());
    let chunk = ss.len().div_ceil(workers);
    let pieces: Vec<Result<Vec<(usize, Complex64)>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ss
            .sets()
            .chunks(chunk)
            .zip(ss.budgets().chunks(chunk))
            .map(|(sets, budgets)| {
                scope.spawn(move || {
                    let mut kept = Vec::new();
                    for (set, &k) in sets.iter().zip(budgets) {
                        let sub = SparsityStructure::new(vec![set.clone()], vec![k], z.len())?;
                        let local = structured_threshold(z, &sub, true)?;
                        kept.extend(set.iter().map(|&i| (i, local[i])));
                    }
                    Ok(kept)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("threshold worker panicked")).collect()
    });
    let mut out = if zero_outside {
        vec![Complex64::new(0.0, 0.0); z.len()]
    } else {
        z.to_vec()
    };
    for piece in pieces {
        for (i, v) in piece? {
            out[i] = v;
        }
    }
    Ok(out)
}

fn relative_residual(b: &[Complex64], ax: &[Complex64], b_norm: f64) -> f64 {
    let r = norm2(&sub(b, ax));
    if b_norm > 0.0 {
        r / b_norm
    } else {
        r
    }
}

fn run(
    a: &ComplexMatrix,
    b: &[Complex64],
    cfg: &SolveConfig,
    truth: Option<&[Complex64]>,
    threshold: impl Fn(&[Complex64]) -> Result<ComplexVector>,
) -> Result<(ComplexVector, SolveTrace)> {
    cfg.validate()?;
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "data of length {} for a matrix with {} rows",
            b.len(),
            a.rows()
        )));
    }
    if let Some(t) = truth {
        if t.len() != a.cols() {
            return Err(Error::DimensionMismatch(format!(
                "truth of length {} for a matrix with {} columns",
                t.len(),
                a.cols()
            )));
        }
    }

    if !a.is_normalized() {
        log::warn!("thresholding solver called on a matrix without unit-norm columns");
    }

    let n = a.cols();
    let b_norm = norm2(b);
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut ax = vec![Complex64::new(0.0, 0.0); a.rows()];
    let mut iterates = cfg.record_trace.then(Vec::new);
    let mut residuals = Vec::new();
    let initial_l1_error = truth.map(|t| norm1(&sub(&x, t)));
    let mut l1_errors = truth.map(|_| Vec::new());
    let mut stop_reason = StopReason::MaxIters;

    for _ in 0..cfg.max_iters {
        let r = sub(b, &ax);
        let back = a.apply_adjoint(&r)?;
        let z: ComplexVector = x.iter().zip(&back).map(|(xi, gi)| xi + gi).collect();
        let next = threshold(&z)?;
        let next_ax = a.apply_sparse(&next)?;

        let rel = relative_residual(b, &next_ax, b_norm);
        if cfg.stop_on_residual_increase && residuals.last().is_some_and(|&prev| rel > prev) {
            stop_reason = StopReason::ResidualIncrease;
            break;
        }
        let step = norm2(&sub(&next, &x));
        residuals.push(rel);
        if let (Some(errs), Some(t)) = (l1_errors.as_mut(), truth) {
            errs.push(norm1(&sub(&next, t)));
        }
        if let Some(its) = iterates.as_mut() {
            its.push(next.clone());
        }
        x = next;
        ax = next_ax;

        if rel < cfg.residual_tol {
            stop_reason = StopReason::ResidualTol;
            break;
        }
        if step < cfg.stagnation_tol {
            stop_reason = StopReason::Stagnation;
            break;
        }
    }

    let trace = SolveTrace {
        iterates,
        iterations_run: residuals.len(),
        residual_history: residuals,
        initial_l1_error,
        l1_error_history: l1_errors,
        stop_reason,
    };
    Ok((x, trace))
}
