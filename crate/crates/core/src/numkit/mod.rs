//! Numerical substrate: adaptive Runge-Kutta integration with dense output
//! and event location, finite-difference Jacobians, quadrature over dense
//! output, and eigen-decomposition of small dense real matrices.

mod dopri5;
mod eig;
mod event;
mod jacobian;
mod quad;

pub use dopri5::{
    integrate_adaptive, integrate_with, AbsTol, IntegrateOptions, Solution, StopCause,
};
pub use eig::{char_poly, eig_dense, pairing_distance, poly_roots, real_eigenvector, Spectrum};
pub use event::find_event;
pub use jacobian::{jacobian_fd, jacobian_fd_scaled};
pub use quad::{cumulative_integral, integral_over};

use thiserror::Error;

/// Signal raised by a vector field when it cannot be evaluated at the probed
/// point. The integrator treats these as a reason to stop cleanly, not as a
/// programming error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldStop {
    /// Feedback control undefined: the controlling block fell below the
    /// singular threshold.
    SingularControl,
    /// The probed state is outside the field's domain (chart boundary etc.).
    OutOfDomain,
}

#[derive(Error, Debug)]
pub enum NumError {
    #[error("required step size fell below 1e-14 of the span near t = {t}")]
    StepUnderflow { t: f64 },
    #[error("state became non-finite near t = {t}")]
    NonFiniteState { t: f64 },
    #[error("field evaluation stopped ({stop:?}) at t = {t}")]
    FieldStop { t: f64, stop: FieldStop },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
    #[error("empty integration span")]
    EmptySpan,
    #[error("eigenvalue iteration failed to converge")]
    NoConvergence,
    #[error("time {t} outside trajectory span [{lo}, {hi}]")]
    OutOfSpan { t: f64, lo: f64, hi: f64 },
}

/// A first-order vector field `dy/dt = f(t, y)`.
pub trait OdeField {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), FieldStop>;
}

/// Wrap a closure as an [`OdeField`].
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), FieldStop> {
        (self.f)(t, y, dy);
        Ok(())
    }
}

/// Closure wrapper for fields that may refuse evaluation.
pub struct FnFieldFallible<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64]) -> Result<(), FieldStop>> FnFieldFallible<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64, &[f64], &mut [f64]) -> Result<(), FieldStop>> OdeField for FnFieldFallible<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), FieldStop> {
        (self.f)(t, y, dy)
    }
}

/// One accepted integrator step together with its interpolation coefficients.
/// The interpolant is the quartic continuous extension of the embedded pair;
/// it reproduces the endpoint states exactly.
#[derive(Clone, Debug)]
pub struct DenseSeg {
    pub t0: f64,
    pub h: f64,
    pub cont: [Vec<f64>; 5],
}

impl DenseSeg {
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t0) / self.h;
        let th1 = 1.0 - theta;
        for i in 0..out.len() {
            out[i] = self.cont[0][i]
                + theta
                    * (self.cont[1][i]
                        + th1 * (self.cont[2][i] + theta * (self.cont[3][i] + th1 * self.cont[4][i])));
        }
    }
}

/// Integration result: node times, node states and a piecewise interpolant.
/// Times are strictly increasing; backward integrations are reversed into
/// increasing order before being returned.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    segs: Vec<DenseSeg>,
}

impl Trajectory {
    pub fn new(dim: usize) -> Self {
        Self { dim, times: Vec::new(), states: Vec::new(), segs: Vec::new() }
    }

    pub(crate) fn push_node(&mut self, t: f64, y: &[f64]) {
        self.times.push(t);
        self.states.push(y.to_vec());
    }

    pub(crate) fn push_seg(&mut self, seg: DenseSeg) {
        self.segs.push(seg);
    }

    /// Reverse node order so times increase (used after backward spans).
    pub(crate) fn finalize(&mut self) {
        if self.times.len() >= 2 && self.times[0] > self.times[1] {
            self.times.reverse();
            self.states.reverse();
            self.segs.reverse();
        }
    }

    /// Drop all nodes after index `i` (and the segments beyond the node).
    pub fn truncate_at_node(&mut self, i: usize) {
        assert!(i < self.times.len());
        self.times.truncate(i + 1);
        self.states.truncate(i + 1);
        self.segs.truncate(i.min(self.segs.len()));
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i]
    }

    pub fn first_time(&self) -> f64 {
        self.times[0]
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.first_time(), self.last_time())
    }

    pub fn segments(&self) -> &[DenseSeg] {
        &self.segs
    }

    /// Index of the dense segment covering `t`.
    fn seg_index(&self, t: f64) -> Result<usize, NumError> {
        let (lo, hi) = self.span();
        if t < lo - 1e-12 * (hi - lo).abs().max(1.0) || t > hi + 1e-12 * (hi - lo).abs().max(1.0) {
            return Err(NumError::OutOfSpan { t, lo, hi });
        }
        // binary search on node times
        let times = &self.times;
        let mut a = 0usize;
        let mut b = times.len() - 1;
        while b - a > 1 {
            let mid = (a + b) / 2;
            if times[mid] <= t {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(a.min(self.segs.len().saturating_sub(1)))
    }

    /// Evaluate the interpolant at time `t` inside the span.
    pub fn interpolate(&self, t: f64) -> Result<Vec<f64>, NumError> {
        let mut out = vec![0.0; self.dim];
        self.interpolate_into(t, &mut out)?;
        Ok(out)
    }

    pub fn interpolate_into(&self, t: f64, out: &mut [f64]) -> Result<(), NumError> {
        if self.times.len() == 1 {
            let (lo, hi) = self.span();
            if t == lo {
                out.copy_from_slice(&self.states[0]);
                return Ok(());
            }
            return Err(NumError::OutOfSpan { t, lo, hi });
        }
        let i = self.seg_index(t)?;
        self.segs[i].eval_into(t, out);
        Ok(())
    }

    /// Build a trajectory from plain samples with a cubic Hermite interpolant
    /// estimated from one-sided differences. Used for closed-form sample
    /// tables where no integrator ran.
    pub fn from_samples(times: Vec<f64>, states: Vec<Vec<f64>>) -> Self {
        assert_eq!(times.len(), states.len());
        assert!(times.len() >= 2);
        let dim = states[0].len();
        let n = times.len();
        let mut segs = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let h = times[i + 1] - times[i];
            let y0 = &states[i];
            let y1 = &states[i + 1];
            // endpoint slopes from neighbouring secants
            let slope = |j: usize, k: usize| -> Vec<f64> {
                let dt = times[k] - times[j];
                (0..dim).map(|c| (states[k][c] - states[j][c]) / dt).collect()
            };
            let d0 = if i == 0 { slope(0, 1) } else { slope(i - 1, i + 1) };
            let d1 = if i + 2 < n { slope(i, i + 2) } else { slope(i, i + 1) };
            // Express the cubic Hermite in the dense-segment basis: match
            // values and endpoint derivatives; the quintic term is zero.
            let ydiff: Vec<f64> = (0..dim).map(|c| y1[c] - y0[c]).collect();
            let bspl: Vec<f64> = (0..dim).map(|c| h * d0[c] - ydiff[c]).collect();
            let cont3: Vec<f64> = (0..dim).map(|c| ydiff[c] - h * d1[c] - bspl[c]).collect();
            segs.push(DenseSeg {
                t0: times[i],
                h,
                cont: [y0.clone(), ydiff, bspl, cont3, vec![0.0; dim]],
            });
        }
        Self { dim, times, states, segs }
    }
}
