//! Shared state types: planar vectors in complex identification, the
//! 8-dimensional extremal state and the diagonal gain matrix.

use nalgebra::Vector2;
use num_complex::Complex64;

/// Planar vector. Throughout the crate a planar vector `(a, b)` is freely
/// identified with the complex number `a + ib`.
pub type Planar = Vector2<f64>;

#[inline]
pub fn to_complex(v: &Planar) -> Complex64 {
    Complex64::new(v.x, v.y)
}

#[inline]
pub fn from_complex(c: Complex64) -> Planar {
    Planar::new(c.re, c.im)
}

/// Real inner product of two planar vectors.
#[inline]
pub fn dot(a: &Planar, b: &Planar) -> f64 {
    a.x * b.x + a.y * b.y
}

/// Extremal state `z = (z1, z2, z3, z4)` of the Hamiltonian system, each
/// block a planar vector. The blocks correspond to the substitution
/// `z1 = psi`, `z2 = -phi`, `z3 = -x`, `z4 = -y` applied to the state and
/// adjoint variables of the control problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZState {
    pub z1: Planar,
    pub z2: Planar,
    pub z3: Planar,
    pub z4: Planar,
}

impl ZState {
    pub const DIM: usize = 8;

    pub fn new(z1: Planar, z2: Planar, z3: Planar, z4: Planar) -> Self {
        Self { z1, z2, z3, z4 }
    }

    pub fn zero() -> Self {
        Self::new(Planar::zeros(), Planar::zeros(), Planar::zeros(), Planar::zeros())
    }

    /// Block `m` for `m in 1..=4`.
    pub fn block(&self, m: usize) -> Planar {
        match m {
            1 => self.z1,
            2 => self.z2,
            3 => self.z3,
            4 => self.z4,
            _ => panic!("block index must be 1..=4, got {m}"),
        }
    }

    pub fn from_slice(y: &[f64]) -> Self {
        assert_eq!(y.len(), 8);
        Self::new(
            Planar::new(y[0], y[1]),
            Planar::new(y[2], y[3]),
            Planar::new(y[4], y[5]),
            Planar::new(y[6], y[7]),
        )
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.z1.x, self.z1.y, self.z2.x, self.z2.y, self.z3.x, self.z3.y, self.z4.x,
            self.z4.y,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Euclidean norm of the full 8-vector.
    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Weighted scaling `(λ⁴ z1, λ³ z2, λ² z3, λ z4)`, the self-similarity
    /// of the model problem.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self::new(
            self.z1 * lambda.powi(4),
            self.z2 * lambda.powi(3),
            self.z3 * lambda.powi(2),
            self.z4 * lambda,
        )
    }

    /// State of the control problem: `x = -z3`.
    pub fn x(&self) -> Planar {
        -self.z3
    }

    /// Velocity: `y = -z4`.
    pub fn y(&self) -> Planar {
        -self.z4
    }

    /// Adjoint `phi = -z2`.
    pub fn phi(&self) -> Planar {
        -self.z2
    }

    /// Adjoint `psi = z1`.
    pub fn psi(&self) -> Planar {
        self.z1
    }
}

/// Diagonal 2x2 gain matrix `K = diag(k1, k2)` of the linearized problem.
/// The model problem uses `K = 0`; the general problem requires both entries
/// nonzero.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KMatrix {
    pub k1: f64,
    pub k2: f64,
}

impl KMatrix {
    pub fn diag(k1: f64, k2: f64) -> Self {
        Self { k1, k2 }
    }

    pub fn zero() -> Self {
        Self { k1: 0.0, k2: 0.0 }
    }

    /// `K = k·E`, the isotropic case produced by the pendulum linearization.
    pub fn uniform(k: f64) -> Self {
        Self { k1: k, k2: k }
    }

    pub fn is_zero(&self) -> bool {
        self.k1 == 0.0 && self.k2 == 0.0
    }

    pub fn is_degenerate(&self) -> bool {
        self.k1 == 0.0 || self.k2 == 0.0
    }

    #[inline]
    pub fn apply(&self, v: &Planar) -> Planar {
        Planar::new(self.k1 * v.x, self.k2 * v.y)
    }
}
