//! Quadrature over a trajectory's dense output.
//!
//! Six-point Gauss-Legendre per dense segment integrates polynomials up to
//! degree 11 exactly; the interpolant is quartic, so products of two
//! interpolated components are integrated without additional quadrature
//! error.

use super::Trajectory;

// 6-point Gauss-Legendre nodes/weights on [-1, 1].
const GL_X: [f64; 6] = [
    -0.932469514203152,
    -0.661209386466265,
    -0.238619186083197,
    0.238619186083197,
    0.661209386466265,
    0.932469514203152,
];
const GL_W: [f64; 6] = [
    0.171324492379170,
    0.360761573048139,
    0.467913934572691,
    0.467913934572691,
    0.360761573048139,
    0.171324492379170,
];

/// Integral of `f(t, y(t))` over the whole trajectory span.
pub fn integral_over(traj: &Trajectory, f: &dyn Fn(f64, &[f64]) -> f64) -> f64 {
    let mut acc = 0.0;
    let mut y = vec![0.0; traj.dim()];
    for w in traj.times().windows(2) {
        acc += segment_integral(traj, w[0], w[1], f, &mut y);
    }
    acc
}

/// Cumulative integral of `f` evaluated at every node time; starts at 0.
pub fn cumulative_integral(traj: &Trajectory, f: &dyn Fn(f64, &[f64]) -> f64) -> Vec<f64> {
    let mut y = vec![0.0; traj.dim()];
    let mut out = Vec::with_capacity(traj.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in traj.times().windows(2) {
        acc += segment_integral(traj, w[0], w[1], f, &mut y);
        out.push(acc);
    }
    out
}

fn segment_integral(
    traj: &Trajectory,
    a: f64,
    b: f64,
    f: &dyn Fn(f64, &[f64]) -> f64,
    y: &mut [f64],
) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for i in 0..6 {
        let t = mid + half * GL_X[i];
        traj.interpolate_into(t, y).expect("quadrature node inside span");
        acc += GL_W[i] * f(t, y);
    }
    acc * half
}
