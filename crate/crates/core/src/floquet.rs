//! Hyperbolicity analysis of the cycle on the blown-up cylinder: the
//! variational Jacobian along the cycle, the co-rotating Lyapunov
//! transformation rendering it constant, the reconstructed constant matrix
//! and its spectrum, compared against the reference matrix with known exact
//! entries.
//!
//! The monodromy is deliberately NOT computed by integrating the variational
//! equation over a period: the largest exponent (93) would give a multiplier
//! `e^{93 * 2 pi / sqrt(5)} ~ e^{261}`, far beyond double range. Constancy of
//! the transformed Jacobian is the workable route and doubles as a
//! correctness certificate for the frame.

use crate::blowup::{cycle_state, BlownField, CYCLE_PERIOD};
use crate::numkit::{
    eig_dense, jacobian_fd_scaled, pairing_distance, real_eigenvector, NumError, Spectrum,
};
use crate::spiral::{a_moduli, ALPHA};
use crate::types::KMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum FloquetError {
    #[error("transformed Jacobian not constant (residual {residual}) for either frame orientation")]
    TransformNotConstant { residual: f64 },
    #[error("expected exactly one exponent with negative real part, found {n_neg}")]
    NoStableDirection { n_neg: usize },
    #[error(transparent)]
    Num(#[from] NumError),
}

/// The reference constant matrix of the variational system in the
/// co-rotating frame; all 81 entries are exact rationals or rational
/// multiples of sqrt(5). Coordinates: scale first, then the four shape
/// blocks as (real, imaginary) pairs.
pub fn reference_j() -> DMatrix<f64> {
    let s5 = 5.0_f64.sqrt();
    let r = |num: f64, den: f64| num / den;
    #[rustfmt::skip]
    let rows: [[f64; 9]; 9] = [
        [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 24.0, -4.0 * s5, r(316.0, 63.0), r(100.0, 63.0) * s5, r(-67.0, 63.0), r(-73.0, 63.0) * s5, r(-53.0, 63.0), r(47.0, 63.0) * s5],
        [0.0, s5, 4.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 60.0, -9.0 * s5, r(442.0, 21.0), r(79.0, 21.0) * s5, r(-46.0, 21.0), r(-73.0, 21.0) * s5, r(-53.0, 21.0), r(47.0, 21.0) * s5],
        [0.0, 15.0 * s5, r(-45.0, 4.0), r(463.0, 84.0) * s5, r(188.0, 21.0), r(-67.0, 84.0) * s5, r(-281.0, 84.0), r(-53.0, 84.0) * s5, r(235.0, 84.0)],
        [0.0, -70.0, r(21.0, 2.0) * s5, r(-379.0, 18.0), r(-50.0, 9.0) * s5, r(103.0, 18.0), r(55.0, 18.0) * s5, r(71.0, 18.0), r(-47.0, 18.0) * s5],
        [0.0, -70.0 * s5, r(105.0, 2.0), r(-379.0, 18.0) * s5, r(-250.0, 9.0), r(85.0, 18.0) * s5, r(401.0, 18.0), r(53.0, 18.0) * s5, r(-217.0, 18.0)],
        [0.0, -105.0, r(63.0, 4.0) * s5, r(-379.0, 12.0), r(-25.0, 3.0) * s5, r(67.0, 12.0), r(73.0, 12.0) * s5, r(65.0, 12.0), r(-59.0, 12.0) * s5],
        [0.0, 105.0 * s5, r(189.0, 4.0), r(379.0, 12.0) * s5, r(125.0, 3.0), r(-67.0, 12.0) * s5, r(-365.0, 12.0), r(-41.0, 12.0) * s5, r(247.0, 12.0)],
    ];
    DMatrix::from_fn(9, 9, |i, j| rows[i][j])
}

/// The reference characteristic exponents: `-1, 0, 4, 5, 93` and the two
/// conjugate quartet pairs `(5 ± sqrt(47 ∓ 12 sqrt(34) i))/2`, i.e. the roots
/// of `q^2 + 36 q + 630` under `q = lambda(lambda - 5)`.
pub fn reference_exponents() -> Vec<Complex64> {
    let mut out = vec![
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(4.0, 0.0),
        Complex64::new(5.0, 0.0),
        Complex64::new(93.0, 0.0),
    ];
    // quartic (lambda - 5)^2 lambda^2 + 36 (lambda - 5) lambda + 630:
    // q = -18 ± i sqrt(306), lambda = (5 ± sqrt(25 + 4q))/2
    let q = Complex64::new(-18.0, 306.0_f64.sqrt());
    let root = (Complex64::new(25.0, 0.0) + 4.0 * q).sqrt();
    for lam in [
        (Complex64::new(5.0, 0.0) + root) / 2.0,
        (Complex64::new(5.0, 0.0) - root) / 2.0,
    ] {
        out.push(lam);
        out.push(lam.conj());
    }
    out
}

/// Per-coordinate probe scales for Jacobians at the cycle: the shape blocks
/// live at radii `|A_0..A_3|` spanning two orders of magnitude, so an
/// isotropic finite-difference step would drown the small blocks in
/// truncation error.
fn cycle_scales() -> [f64; 9] {
    let am = a_moduli();
    [1.0, am[0], am[0], am[1], am[1], am[2], am[2], am[3], am[3]]
}

/// Jacobian of the blown-up field at the cycle point `xi0(s)`, by central
/// differences with per-block scaled steps, in the variational convention.
/// Identical for every gain matrix: the gain enters at second order in the
/// scale, which vanishes on the cycle.
pub fn jacobian_on_cycle(s: f64, k: &KMatrix) -> Result<DMatrix<f64>, FloquetError> {
    let field = BlownField::variational(*k);
    let y = cycle_state(s).to_array();
    Ok(jacobian_fd_scaled(&field, &y, 1e-6, &cycle_scales())?)
}

/// Co-rotating frame: block-diagonal with 1 on the scale coordinate and four
/// planar rotations by the angle `alpha s` (`sign = -1` mirrors the frame).
/// Orthogonal, identity at `s = 0`, periodic with the cycle period.
pub fn lyapunov_transform(s: f64) -> DMatrix<f64> {
    lyapunov_transform_signed(s, 1.0)
}

pub fn lyapunov_transform_signed(s: f64, sign: f64) -> DMatrix<f64> {
    let th = sign * ALPHA * s;
    let (sin, cos) = th.sin_cos();
    let mut p = DMatrix::zeros(9, 9);
    p[(0, 0)] = 1.0;
    for b in 0..4 {
        let i = 1 + 2 * b;
        p[(i, i)] = cos;
        p[(i, i + 1)] = -sin;
        p[(i + 1, i)] = sin;
        p[(i + 1, i + 1)] = cos;
    }
    p
}

/// `P'(s) P(s)^T`: the constant block-diagonal infinitesimal rotation.
fn frame_rate(sign: f64) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(9, 9);
    for b in 0..4 {
        let i = 1 + 2 * b;
        o[(i, i + 1)] = -sign * ALPHA;
        o[(i + 1, i)] = sign * ALPHA;
    }
    o
}

/// Result of the constant-matrix reconstruction.
#[derive(Clone, Debug, serde::Serialize)]
pub struct FloquetReport {
    /// Mean of `P' P^T + P F_xi P^T` over the sampled phases.
    pub j: Vec<Vec<f64>>,
    /// Max entrywise deviation of the samples from the mean; certifies the
    /// frame when small.
    pub constancy_residual: f64,
    /// Frame orientation that achieved constancy (+1 or -1).
    pub angle_sign: f64,
    /// Eigenvalues of the mean matrix.
    pub eigenvalues: Vec<(f64, f64)>,
    /// Counts of exponents by sign of the real part.
    pub classification: (usize, usize, usize),
    /// Optimal-pairing distance to the reference exponents.
    pub spectral_gap_to_reference: f64,
    /// Max entrywise distance to the reference matrix.
    pub entry_distance_to_reference: f64,
    #[serde(skip)]
    pub spectrum: Option<Spectrum>,
}

impl FloquetReport {
    pub fn j_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(9, 9, |i, j| self.j[i][j])
    }
}

/// Reconstruct the constant matrix `J = P'(s) P(s)^{-1} + P(s) F_xi(xi0(s)) P(s)^{-1}`
/// from `samples` equally spaced phases over one period. Tries the mirrored
/// frame automatically when the first orientation fails to produce a constant
/// matrix (residual above 1e-3).
pub fn reconstruct_j(k: &KMatrix, samples: usize) -> Result<FloquetReport, FloquetError> {
    assert!(samples >= 8, "need at least 8 samples over the period");
    let mut first_residual = f64::INFINITY;
    for sign in [1.0, -1.0] {
        let rate = frame_rate(sign);
        let mut sum = DMatrix::<f64>::zeros(9, 9);
        let mut js = Vec::with_capacity(samples);
        for i in 0..samples {
            let s = CYCLE_PERIOD * i as f64 / samples as f64;
            let f = jacobian_on_cycle(s, k)?;
            let p = lyapunov_transform_signed(s, sign);
            let j = &rate + &p * f * p.transpose();
            sum += &j;
            js.push(j);
        }
        let mean = sum / samples as f64;
        let mut residual: f64 = 0.0;
        for j in &js {
            residual = residual.max((j - &mean).abs().max());
        }
        if sign > 0.0 {
            first_residual = residual;
        }
        if residual > 1e-3 {
            continue;
        }
        let spectrum = eig_dense(&mean)?;
        let reference: Vec<Complex64> = reference_exponents();
        let gap = pairing_distance(&spectrum.eigenvalues, &reference);
        let entry_distance = (&mean - reference_j()).abs().max();
        return Ok(FloquetReport {
            j: (0..9).map(|i| (0..9).map(|jj| mean[(i, jj)]).collect()).collect(),
            constancy_residual: residual,
            angle_sign: sign,
            eigenvalues: spectrum.eigenvalues.iter().map(|e| (e.re, e.im)).collect(),
            classification: spectrum.classification(),
            spectral_gap_to_reference: gap,
            entry_distance_to_reference: entry_distance,
            spectrum: Some(spectrum),
        });
    }
    Err(FloquetError::TransformNotConstant { residual: first_residual })
}

/// Unit eigenvector of the single contracting exponent; dominated by the
/// scale coordinate.
pub fn stable_direction(report: &FloquetReport) -> Result<[f64; 9], FloquetError> {
    let (n_neg, _, _) = report.classification;
    if n_neg != 1 {
        return Err(FloquetError::NoStableDirection { n_neg });
    }
    let lam = report
        .eigenvalues
        .iter()
        .filter(|(re, im)| *re < 0.0 && im.abs() < 1e-6)
        .map(|(re, _)| *re)
        .next()
        .ok_or(FloquetError::NoStableDirection { n_neg })?;
    let v = real_eigenvector(&report.j_matrix(), lam)?;
    let mut out = [0.0; 9];
    for i in 0..9 {
        out[i] = v[i];
    }
    Ok(out)
}

/// Analysis of the reference matrix itself (bypasses reconstruction).
pub fn analyze_reference() -> Result<FloquetReport, FloquetError> {
    let j = reference_j();
    let spectrum = eig_dense(&j)?;
    let gap = pairing_distance(&spectrum.eigenvalues, &reference_exponents());
    Ok(FloquetReport {
        j: (0..9).map(|i| (0..9).map(|jj| j[(i, jj)]).collect()).collect(),
        constancy_residual: 0.0,
        angle_sign: 1.0,
        eigenvalues: spectrum.eigenvalues.iter().map(|e| (e.re, e.im)).collect(),
        classification: spectrum.classification(),
        spectral_gap_to_reference: gap,
        entry_distance_to_reference: 0.0,
        spectrum: Some(spectrum),
    })
}
