//! Spherical inverted pendulum on a base moving in the horizontal plane
//! under a bounded planar force.
//!
//! Generalized coordinates are `q = (xi, eta, x1, x2)` with the bob at
//! `(xi + l sin x1, eta + l sin x2, l z)`, `z = sqrt(1 - sin^2 x1 - sin^2 x2)`,
//! valid on the upper-hemisphere chart `sin^2 x1 + sin^2 x2 < 1`. The
//! equations of motion come from the Euler-Lagrange equations with
//! generalized force `(u1, u2, 0, 0)`; the mass matrix and bias terms below
//! are the hand-expanded closed forms.

use crate::types::Planar;
use nalgebra::{Matrix4, Vector4};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum PendulumError {
    #[error("mass matrix singular at the chart boundary (sin^2 x1 + sin^2 x2 -> 1)")]
    SingularMassMatrix,
    #[error("control magnitude {norm} exceeds the unit bound")]
    ControlBoundViolated { norm: f64 },
    #[error("parameters must be positive: {what}")]
    BadParams { what: &'static str },
}

/// Physical constants of the pendulum-base system.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PendulumParams {
    /// Base (support point) mass.
    #[serde(rename = "M")]
    pub base_mass: f64,
    /// Bob mass.
    #[serde(rename = "m")]
    pub bob_mass: f64,
    /// Rod length.
    #[serde(rename = "l")]
    pub length: f64,
    /// Gravitational acceleration.
    #[serde(rename = "g")]
    pub gravity: f64,
}

impl PendulumParams {
    pub fn new(base_mass: f64, bob_mass: f64, length: f64, gravity: f64) -> Result<Self, PendulumError> {
        let p = Self { base_mass, bob_mass, length, gravity };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PendulumError> {
        if !(self.base_mass > 0.0) {
            return Err(PendulumError::BadParams { what: "M > 0" });
        }
        if !(self.bob_mass > 0.0) {
            return Err(PendulumError::BadParams { what: "m > 0" });
        }
        if !(self.length > 0.0) {
            return Err(PendulumError::BadParams { what: "l > 0" });
        }
        if !(self.gravity > 0.0) {
            return Err(PendulumError::BadParams { what: "g > 0" });
        }
        Ok(())
    }

    /// Normalized default `M = m = l = g = 1`, for which `Ml = 1` and `k = 2`.
    pub fn normalized() -> Self {
        Self { base_mass: 1.0, bob_mass: 1.0, length: 1.0, gravity: 1.0 }
    }

    /// Stiffness of the upright linearization, `k = g (M + m) / (M l)`.
    pub fn stiffness(&self) -> f64 {
        self.gravity * (self.base_mass + self.bob_mass) / (self.base_mass * self.length)
    }

    /// Input gain of the upright linearization, `1 / (M l)`.
    pub fn input_gain(&self) -> f64 {
        1.0 / (self.base_mass * self.length)
    }
}

/// Mechanical state on the local chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MechState {
    pub x1: f64,
    pub x2: f64,
    pub dx1: f64,
    pub dx2: f64,
    pub xi: f64,
    pub eta: f64,
    pub dxi: f64,
    pub deta: f64,
}

impl MechState {
    pub fn upright() -> Self {
        Self { x1: 0.0, x2: 0.0, dx1: 0.0, dx2: 0.0, xi: 0.0, eta: 0.0, dxi: 0.0, deta: 0.0 }
    }

    pub fn to_array(&self) -> [f64; 8] {
        [self.x1, self.x2, self.dx1, self.dx2, self.xi, self.eta, self.dxi, self.deta]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        Self {
            x1: y[0],
            x2: y[1],
            dx1: y[2],
            dx2: y[3],
            xi: y[4],
            eta: y[5],
            dxi: y[6],
            deta: y[7],
        }
    }
}

const CHART_EPS: f64 = 1e-12;

/// Right side of the full nonlinear equations of motion. Returns the
/// derivative `(dx1, dx2, ddx1, ddx2, dxi, deta, ddxi, ddeta)` of the state
/// ordering used by [`MechState`].
pub fn nonlinear_rhs(
    p: &PendulumParams,
    s: &MechState,
    u: &Planar,
) -> Result<MechState, PendulumError> {
    let un = u.norm();
    if un > 1.0 + 1e-12 {
        return Err(PendulumError::ControlBoundViolated { norm: un });
    }
    let (mb, m, l, g) = (p.base_mass, p.bob_mass, p.length, p.gravity);
    let (s1, c1) = s.x1.sin_cos();
    let (s2, c2) = s.x2.sin_cos();
    let z2 = 1.0 - s1 * s1 - s2 * s2;
    if z2 <= CHART_EPS {
        return Err(PendulumError::SingularMassMatrix);
    }
    let z = z2.sqrt();
    let h1 = s1 * c1;
    let h2 = s2 * c2;
    let hh1 = (2.0 * s.x1).cos();
    let hh2 = (2.0 * s.x2).cos();
    let w = h1 * s.dx1 + h2 * s.dx2;

    // mass matrix in the (xi, eta, x1, x2) ordering
    let mut gm = Matrix4::<f64>::zeros();
    gm[(0, 0)] = mb + m;
    gm[(1, 1)] = mb + m;
    gm[(0, 2)] = m * l * c1;
    gm[(2, 0)] = m * l * c1;
    gm[(1, 3)] = m * l * c2;
    gm[(3, 1)] = m * l * c2;
    gm[(2, 2)] = m * l * l * (c1 * c1 + h1 * h1 / z2);
    gm[(3, 3)] = m * l * l * (c2 * c2 + h2 * h2 / z2);
    gm[(2, 3)] = m * l * l * h1 * h2 / z2;
    gm[(3, 2)] = gm[(2, 3)];

    let curv = hh1 * s.dx1 * s.dx1 + hh2 * s.dx2 * s.dx2;
    let rhs = Vector4::new(
        u.x + m * l * s1 * s.dx1 * s.dx1,
        u.y + m * l * s2 * s.dx2 * s.dx2,
        m * l * l * (h1 * s.dx1 * s.dx1 - h1 * w * w / (z2 * z2) - h1 * curv / z2)
            + m * g * l * h1 / z,
        m * l * l * (h2 * s.dx2 * s.dx2 - h2 * w * w / (z2 * z2) - h2 * curv / z2)
            + m * g * l * h2 / z,
    );

    let acc = gm.lu().solve(&rhs).ok_or(PendulumError::SingularMassMatrix)?;
    Ok(MechState {
        x1: s.dx1,
        x2: s.dx2,
        dx1: acc[2],
        dx2: acc[3],
        xi: s.dxi,
        eta: s.deta,
        dxi: acc[0],
        deta: acc[1],
    })
}

/// Total mechanical energy of the same Lagrangian; conserved along
/// uncontrolled motion.
pub fn energy(p: &PendulumParams, s: &MechState) -> f64 {
    let (mb, m, l, g) = (p.base_mass, p.bob_mass, p.length, p.gravity);
    let (s1, c1) = s.x1.sin_cos();
    let (s2, c2) = s.x2.sin_cos();
    let z2 = 1.0 - s1 * s1 - s2 * s2;
    let z = z2.max(0.0).sqrt();
    let w = s1 * c1 * s.dx1 + s2 * c2 * s.dx2;
    let t = 0.5 * mb * (s.dxi * s.dxi + s.deta * s.deta)
        + 0.5
            * m
            * ((s.dxi + l * c1 * s.dx1).powi(2)
                + (s.deta + l * c2 * s.dx2).powi(2)
                + l * l * w * w / z2);
    t + m * g * l * z
}

/// Linearization about the upright equilibrium after eliminating the base:
/// `x' = y`, `y' = k x - u / (M l)` with `k = g (M + m) / (M l)`.
pub fn linear_rhs(p: &PendulumParams, x: &Planar, y: &Planar, u: &Planar) -> (Planar, Planar) {
    let k = p.stiffness();
    let gain = p.input_gain();
    (*y, Planar::new(k * x.x - gain * u.x, k * x.y - gain * u.y))
}

/// Local chart angles from standard spherical coordinates:
/// `x1 = arcsin(sin(theta) sin(phi))`, `x2 = arcsin(sin(theta) cos(phi))`.
pub fn spherical_to_local(theta: f64, phi: f64) -> (f64, f64) {
    let st = theta.sin();
    ((st * phi.sin()).asin(), (st * phi.cos()).asin())
}
