//! Extremal flows of the maximum principle for the bounded-control problem
//! (general nondegenerate diagonal gain `K`) and its model case (`K = 0`),
//! the feedback control law, closed-loop simulation, cost evaluation and
//! singular-arc detection.
//!
//! # Sign conventions
//!
//! In the coordinates `z1 = psi`, `z2 = -phi`, `z3 = -x`, `z4 = -y` the
//! extremal system reads
//!
//! ```text
//! z1' = z2          z3' = z4
//! z2' = z3 + K z1   z4' = -u + K z3,    u = z1 / ||z1||
//! ```
//!
//! and the closed-form spiral control is `u(t) = +zeta exp(i alpha ln(T*-t))`.
//! This pattern (minus sign on `u` in `z4'`, plus sign in the spiral control)
//! is the unique choice under which the closed-form spirals satisfy the model
//! field to round-off; it also follows directly from substituting the
//! canonical equations `phi' = x - K psi`, `psi' = -phi`, `x' = y`,
//! `y' = K x + u`, `u = psi/||psi||`. The residual and substitution oracles
//! in the test suite pin it down.

use crate::numkit::{
    integral_over, integrate_with, AbsTol, FieldStop, IntegrateOptions, NumError, OdeField,
    Solution, StopCause, Trajectory,
};
use crate::spiral::self_similar_scale;
use crate::types::{dot, KMatrix, Planar, ZState};
use thiserror::Error;

/// Below this `||z1||` the feedback is considered undefined and integration
/// stops with a singular-control event rather than guessing a direction.
pub const SINGULAR_THRESHOLD: f64 = 1e-13;

/// Default radius on `||(z3, z4)||` at which a closed-loop run counts as
/// having reached the origin.
pub const STOP_RADIUS: f64 = 1e-8;

#[derive(Error, Debug)]
pub enum PmpError {
    #[error("control undefined: ||z1|| = {norm} at or below the singular threshold")]
    SingularControl { norm: f64 },
    #[error("state became non-finite during simulation")]
    NonFiniteState,
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Maximizing control `u = z1 / ||z1||`.
pub fn control_law(z1: &Planar) -> Result<Planar, PmpError> {
    control_law_with(z1, SINGULAR_THRESHOLD)
}

pub fn control_law_with(z1: &Planar, threshold: f64) -> Result<Planar, PmpError> {
    let n = z1.norm();
    if n <= threshold {
        return Err(PmpError::SingularControl { norm: n });
    }
    Ok(z1 / n)
}

/// The (maximized over `u` when `u = psi/||psi||`) Hamiltonian
/// `-(1/2)<x,x> + <y,phi> + <Kx,psi> + <u,psi>`.
pub fn hamiltonian(
    x: &Planar,
    y: &Planar,
    phi: &Planar,
    psi: &Planar,
    u: &Planar,
    k: &KMatrix,
) -> f64 {
    -0.5 * dot(x, x) + dot(y, phi) + dot(&k.apply(x), psi) + dot(u, psi)
}

/// Hamiltonian evaluated on an extremal state with the feedback control.
pub fn hamiltonian_on_extremal(z: &ZState, k: &KMatrix) -> Result<f64, PmpError> {
    let u = control_law(&z.z1)?;
    Ok(hamiltonian(&z.x(), &z.y(), &z.phi(), &z.psi(), &u, k))
}

/// Extremal field for the general problem.
pub fn ham_rhs_p1(k: &KMatrix, z: &ZState) -> Result<ZState, PmpError> {
    ham_rhs_with(k, z, SINGULAR_THRESHOLD)
}

/// Extremal field for the model problem (`K = 0`).
pub fn ham_rhs_p2(z: &ZState) -> Result<ZState, PmpError> {
    ham_rhs_with(&KMatrix::zero(), z, SINGULAR_THRESHOLD)
}

pub fn ham_rhs_with(k: &KMatrix, z: &ZState, threshold: f64) -> Result<ZState, PmpError> {
    let u = control_law_with(&z.z1, threshold)?;
    Ok(ZState::new(
        z.z2,
        z.z3 + k.apply(&z.z1),
        z.z4,
        -u + k.apply(&z.z3),
    ))
}

/// The extremal flow as an integrable 8-dimensional field.
pub struct ExtremalField {
    pub k: KMatrix,
    pub singular_threshold: f64,
}

impl ExtremalField {
    pub fn new(k: KMatrix) -> Self {
        Self { k, singular_threshold: SINGULAR_THRESHOLD }
    }
}

impl OdeField for ExtremalField {
    fn dim(&self) -> usize {
        ZState::DIM
    }
    fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), FieldStop> {
        let z = ZState::from_slice(y);
        match ham_rhs_with(&self.k, &z, self.singular_threshold) {
            Ok(d) => {
                dy.copy_from_slice(&d.to_array());
                Ok(())
            }
            Err(_) => Err(FieldStop::SingularControl),
        }
    }
}

/// Options for [`simulate_closed_loop`].
#[derive(Clone, Debug)]
pub struct ClosedLoopOptions {
    pub rtol: f64,
    pub atol: AbsTol,
    pub stop_radius: f64,
    pub singular_threshold: f64,
    /// Integration horizon; defaults to ten times the initial self-similar
    /// scale (the scale approximates the remaining hitting time).
    pub max_time: Option<f64>,
}

impl Default for ClosedLoopOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: AbsTol::Scalar(1e-16),
            stop_radius: STOP_RADIUS,
            singular_threshold: SINGULAR_THRESHOLD,
            max_time: None,
        }
    }
}

/// How a closed-loop run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClosedLoopStop {
    /// The `||(z3, z4)|| <= stop_radius` event fired.
    RadiusReached,
    /// The run was cut at its closest approach to the singular locus: either
    /// the feedback became undefined there, or amplification of the unstable
    /// adjoint modes turned the self-similar scale around (double precision
    /// cannot shoot deeper into a finite-time singular point). The hit time
    /// carries the self-similar tail estimate of the final state.
    ClosestApproach,
    /// The trajectory never contracted toward the origin; no hit.
    Escaped,
}

#[derive(Debug)]
pub struct ClosedLoopRun {
    pub trajectory: Trajectory,
    pub hit_time: Option<f64>,
    pub stop: ClosedLoopStop,
}

/// Integrate the feedback flow forward from `z0` until the state reaches the
/// stop radius or its closest approach to the singular locus.
///
/// The hit time is the radius-event time when that event fires. Otherwise the
/// trajectory is truncated at the node minimizing the self-similar scale; if
/// the scale contracted below 5% of its initial value, the remaining time is
/// estimated by that minimal scale (the estimate is exact on the model
/// spiral, where the scale equals the remaining hitting time) and added to
/// the truncation time. A trajectory that never contracts reports no hit.
pub fn simulate_closed_loop(
    z0: &ZState,
    k: &KMatrix,
    opts: &ClosedLoopOptions,
) -> Result<ClosedLoopRun, PmpError> {
    if !z0.is_finite() {
        return Err(PmpError::NonFiniteState);
    }
    let radius0 = (z0.z3.norm_squared() + z0.z4.norm_squared()).sqrt();
    if radius0 <= opts.stop_radius {
        let mut traj = Trajectory::new(ZState::DIM);
        traj.push_node(0.0, &z0.to_array());
        return Ok(ClosedLoopRun {
            trajectory: traj,
            hit_time: Some(0.0),
            stop: ClosedLoopStop::RadiusReached,
        });
    }
    let scale0 = self_similar_scale(z0);
    let horizon = opts.max_time.unwrap_or(10.0 * scale0.max(f64::EPSILON));
    let field = ExtremalField { k: *k, singular_threshold: opts.singular_threshold };
    let io = IntegrateOptions {
        rtol: opts.rtol,
        atol: opts.atol.clone(),
        h0: None,
        max_steps: 2_000_000,
    };
    let stop_radius = opts.stop_radius;
    let g_radius = move |_t: f64, y: &[f64]| {
        let z = ZState::from_slice(y);
        (z.z3.norm_squared() + z.z4.norm_squared()).sqrt() - stop_radius
    };
    // guard: once the scale has grown well past its initial value the run has
    // escaped; integrating further is wasted effort
    let g_escape = move |_t: f64, y: &[f64]| {
        self_similar_scale(&ZState::from_slice(y)) - 3.0 * scale0
    };
    let Solution { mut trajectory, cause } = integrate_with(
        &field,
        &z0.to_array(),
        (0.0, horizon),
        &io,
        &[(&g_radius, -1), (&g_escape, 1)],
    )?;
    if let StopCause::Event { t, idx: 0 } = cause {
        return Ok(ClosedLoopRun {
            trajectory,
            hit_time: Some(t),
            stop: ClosedLoopStop::RadiusReached,
        });
    }
    // closest approach to the singular locus over the stored nodes
    let mut i_min = 0usize;
    let mut mu_min = f64::INFINITY;
    for (i, st) in trajectory.states().iter().enumerate() {
        let mu = self_similar_scale(&ZState::from_slice(st));
        if mu < mu_min {
            mu_min = mu;
            i_min = i;
        }
    }
    if mu_min < 0.05 * scale0 {
        let t_min = trajectory.times()[i_min];
        trajectory.truncate_at_node(i_min);
        Ok(ClosedLoopRun {
            trajectory,
            hit_time: Some(t_min + mu_min),
            stop: ClosedLoopStop::ClosestApproach,
        })
    } else {
        Ok(ClosedLoopRun { trajectory, hit_time: None, stop: ClosedLoopStop::Escaped })
    }
}

/// Accumulated cost `int ||x||^2 dt = int ||z3||^2 dt` over the trajectory,
/// by Gauss-Legendre quadrature on the dense output.
pub fn cost(traj: &Trajectory) -> f64 {
    if traj.len() < 2 {
        return 0.0;
    }
    integral_over(traj, &|_t, y| {
        let z = ZState::from_slice(y);
        z.z3.norm_squared()
    })
}

/// True iff `sup ||z1(t)|| < tol` over `[t0, t1]`, probing nodes and dense
/// output; the definition of a singular arc.
pub fn is_singular(traj: &Trajectory, window: (f64, f64), tol: f64) -> bool {
    let (t0, t1) = window;
    let mut sup: f64 = 0.0;
    const PROBES: usize = 257;
    for i in 0..PROBES {
        let t = t0 + (t1 - t0) * i as f64 / (PROBES - 1) as f64;
        if let Ok(y) = traj.interpolate(t) {
            sup = sup.max(ZState::from_slice(&y).z1.norm());
        }
    }
    sup < tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spiral::{spiral_control, spiral_state, spiral_state_derivative, SpiralFamily};
    use crate::types::from_complex;
    use num_complex::Complex64;

    #[test]
    fn control_law_examples() {
        assert_eq!(control_law(&Planar::new(3.0, 4.0)).unwrap(), Planar::new(0.6, 0.8));
        assert_eq!(control_law(&Planar::new(0.0, -2.0)).unwrap(), Planar::new(0.0, -1.0));
        assert!(matches!(
            control_law(&Planar::zeros()),
            Err(PmpError::SingularControl { .. })
        ));
    }

    #[test]
    fn hamiltonian_values_and_maximality() {
        let zero = Planar::zeros();
        assert_eq!(hamiltonian(&zero, &zero, &zero, &zero, &zero, &KMatrix::zero()), 0.0);
        assert_eq!(
            hamiltonian(&Planar::new(1.0, 0.0), &zero, &zero, &zero, &zero, &KMatrix::zero()),
            -0.5
        );
        // maximality of the feedback over sampled admissible controls
        let mut seed = 99u64;
        let mut rand = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let k = KMatrix::diag(2.0, -1.5);
        for _ in 0..50 {
            let x = Planar::new(rand(), rand());
            let y = Planar::new(rand(), rand());
            let phi = Planar::new(rand(), rand());
            let psi = Planar::new(rand(), rand());
            if psi.norm() < 1e-3 {
                continue;
            }
            let u_opt = psi / psi.norm();
            let h_opt = hamiltonian(&x, &y, &phi, &psi, &u_opt, &k);
            for _ in 0..64 {
                let mut u = Planar::new(rand(), rand());
                if u.norm() > 1.0 {
                    u /= u.norm() * (1.0 + 1e-12);
                }
                let h = hamiltonian(&x, &y, &phi, &psi, &u, &k);
                assert!(h <= h_opt + 1e-12);
            }
        }
    }

    #[test]
    fn p1_with_zero_gain_matches_p2_bitwise() {
        let z = ZState::new(
            Planar::new(0.3, -0.1),
            Planar::new(1.0, 0.4),
            Planar::new(-0.2, 0.9),
            Planar::new(0.5, 0.5),
        );
        let a = ham_rhs_p1(&KMatrix::zero(), &z).unwrap();
        let b = ham_rhs_p2(&z).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn canonical_equations_substitution() {
        // map z to (x, y, phi, psi), apply the canonical field, map back
        let k = KMatrix::diag(2.0, 3.0);
        let z = ZState::new(
            Planar::new(0.4, -0.3),
            Planar::new(-0.8, 0.2),
            Planar::new(0.1, 0.9),
            Planar::new(-0.6, 0.7),
        );
        let dz = ham_rhs_p1(&k, &z).unwrap();
        let (x, y, phi, psi) = (z.x(), z.y(), z.phi(), z.psi());
        let u = psi / psi.norm();
        let dphi = x - k.apply(&psi);
        let dpsi = -phi;
        let dx = y;
        let dy = k.apply(&x) + u;
        // z1 = psi, z2 = -phi, z3 = -x, z4 = -y
        assert!((dz.z1 - dpsi).norm() < 1e-15);
        assert!((dz.z2 + dphi).norm() < 1e-15);
        assert!((dz.z3 + dx).norm() < 1e-15);
        assert!((dz.z4 + dy).norm() < 1e-15);
    }

    #[test]
    fn master_residual_spiral_satisfies_model_field() {
        let fam = SpiralFamily::standard(1.0);
        let mut worst: f64 = 0.0;
        for i in 0..=200 {
            let t = 0.9 * i as f64 / 200.0;
            let z = spiral_state(t, &fam).unwrap();
            let d_closed = spiral_state_derivative(t, &fam).unwrap();
            let d_field = ham_rhs_p2(&z).unwrap();
            for m in 1..=4 {
                let scale = d_closed.block(m).norm().max(1e-300);
                worst = worst.max((d_closed.block(m) - d_field.block(m)).norm() / scale);
            }
        }
        assert!(worst < 1e-10, "relative field residual {worst}");
    }

    #[test]
    fn spiral_control_equals_feedback() {
        let fam = SpiralFamily::standard(1.0);
        for &t in &[0.0, 0.3, 0.8, 0.95] {
            let z = spiral_state(t, &fam).unwrap();
            let u_fb = control_law(&z.z1).unwrap();
            let u_cf = spiral_control(t, &fam).unwrap();
            assert!((u_fb - u_cf).norm() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn unit_z1_field_value() {
        let z = ZState::new(Planar::new(1.0, 0.0), Planar::zeros(), Planar::zeros(), Planar::zeros());
        let d = ham_rhs_p2(&z).unwrap();
        assert_eq!(d.z1, Planar::zeros());
        assert_eq!(d.z2, Planar::zeros());
        assert_eq!(d.z3, Planar::zeros());
        assert_eq!(d.z4, Planar::new(-1.0, 0.0));
    }

    #[test]
    fn weighted_scaling_maps_solutions_to_solutions() {
        // if z(.) solves the model field then so does
        // (l^4 z1, l^3 z2, l^2 z3, l z4)(t/l); pointwise this says
        // rhs(scaled z) = d/dt of the scaled path
        let fam = SpiralFamily::standard(1.0);
        let lam = 2.0;
        for &t in &[0.2, 0.6, 1.4] {
            let z = spiral_state(t / lam, &fam).unwrap();
            let dz = spiral_state_derivative(t / lam, &fam).unwrap();
            let scaled = z.scaled(lam);
            let d_field = ham_rhs_p2(&scaled).unwrap();
            // derivative of the scaled path: lambda^{5-m} z_m'(t/l) / lambda
            let d_path = ZState::new(
                dz.z1 * lam.powi(3),
                dz.z2 * lam.powi(2),
                dz.z3 * lam,
                dz.z4,
            );
            for m in 1..=4 {
                let scale = d_path.block(m).norm().max(1e-300);
                assert!(
                    (d_field.block(m) - d_path.block(m)).norm() / scale < 1e-9,
                    "block {m} at t={t}"
                );
            }
        }
    }

    #[test]
    fn rotation_equivariance_of_the_model_field() {
        let rot = |v: &Planar, th: f64| {
            from_complex(crate::types::to_complex(v) * Complex64::from_polar(1.0, th))
        };
        let z = ZState::new(
            Planar::new(0.4, -0.3),
            Planar::new(-0.8, 0.2),
            Planar::new(0.1, 0.9),
            Planar::new(-0.6, 0.7),
        );
        let th = 1.234;
        let zr = ZState::new(
            rot(&z.z1, th),
            rot(&z.z2, th),
            rot(&z.z3, th),
            rot(&z.z4, th),
        );
        let d = ham_rhs_p2(&z).unwrap();
        let dr = ham_rhs_p2(&zr).unwrap();
        for m in 1..=4 {
            assert!((dr.block(m) - rot(&d.block(m), th)).norm() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_conserved_along_closed_loop_extremal() {
        let fam = SpiralFamily::standard(1.0);
        let z0 = spiral_state(0.0, &fam).unwrap();
        let k = KMatrix::zero();
        let run = simulate_closed_loop(&z0, &k, &ClosedLoopOptions::default()).unwrap();
        let h0 = hamiltonian_on_extremal(&z0, &k).unwrap();
        let href = h0.abs().max(1e-3);
        for st in run.trajectory.states().iter().step_by(7) {
            let z = ZState::from_slice(st);
            if z.z1.norm() <= SINGULAR_THRESHOLD {
                continue;
            }
            let h = hamiltonian_on_extremal(&z, &k).unwrap();
            assert!(((h - h0) / href).abs() < 1e-6, "H drift {h} vs {h0}");
        }
        // the spiral is a hitting extremal: H identically zero
        assert!(h0.abs() < 1e-12);
    }

    #[test]
    fn closed_loop_spiral_hits_at_its_hitting_time() {
        let fam = SpiralFamily::standard(1.0);
        let z0 = spiral_state(0.0, &fam).unwrap();
        let run =
            simulate_closed_loop(&z0, &KMatrix::zero(), &ClosedLoopOptions::default()).unwrap();
        let hit = run.hit_time.expect("spiral reaches the origin");
        assert!((hit - 1.0).abs() < 1e-3, "hit at {hit}");
    }

    #[test]
    fn immediate_stop_when_already_inside_radius() {
        let z0 = ZState::new(
            Planar::new(1e-16, 0.0),
            Planar::zeros(),
            Planar::zeros(),
            Planar::zeros(),
        );
        let run =
            simulate_closed_loop(&z0, &KMatrix::zero(), &ClosedLoopOptions::default()).unwrap();
        assert_eq!(run.hit_time, Some(0.0));
        assert_eq!(run.stop, ClosedLoopStop::RadiusReached);
    }

    #[test]
    fn backward_then_forward_returns_to_seed() {
        use crate::numkit::{integrate_adaptive};
        use crate::spiral::seed_near_origin;
        let fam = SpiralFamily::standard(1.0);
        let k = KMatrix::diag(2.0, 2.0);
        let seed = seed_near_origin(1.0, 0.3, &fam, &k);
        let field = ExtremalField::new(k);
        let back =
            integrate_adaptive(&field, &seed.to_array(), (0.7, 0.2), 1e-12, 1e-14).unwrap();
        let z_back = back.states().first().unwrap().clone();
        let fwd = integrate_adaptive(&field, &z_back, (0.2, 0.7), 1e-12, 1e-14).unwrap();
        let z_fwd = ZState::from_slice(fwd.states().last().unwrap());
        let err = (z_fwd.z1 - seed.z1).norm()
            + (z_fwd.z2 - seed.z2).norm()
            + (z_fwd.z3 - seed.z3).norm()
            + (z_fwd.z4 - seed.z4).norm();
        assert!(err < 1e-6, "round trip error {err}");
    }

    #[test]
    fn cost_of_zero_trajectory_and_spiral_cost() {
        let fam = SpiralFamily::standard(1.0);
        let z0 = spiral_state(0.0, &fam).unwrap();
        let run =
            simulate_closed_loop(&z0, &KMatrix::zero(), &ClosedLoopOptions::default()).unwrap();
        // closed form: ||x(t)|| = |A2| (T*-t)^2, so the cost integrand is
        // |A2|^2 (T*-t)^4 and the total cost is |A2|^2 T*^5 / 5 = 1/270
        let a2_sq = 1.0 / 54.0;
        let want = a2_sq / 5.0;
        let got = cost(&run.trajectory);
        assert!(
            ((got - want) / want).abs() < 1e-6,
            "cost {got} want {want}"
        );
        // rotation invariance of the cost
        let fam_rot = SpiralFamily::new(1.0, crate::spiral::AlphaBranch::Plus, crate::spiral::Zeta::rotation(1.1));
        let z0r = spiral_state(0.0, &fam_rot).unwrap();
        let run_r =
            simulate_closed_loop(&z0r, &KMatrix::zero(), &ClosedLoopOptions::default()).unwrap();
        let got_r = cost(&run_r.trajectory);
        assert!(((got_r - got) / want).abs() < 1e-6);
        // an empty/one-point trajectory costs nothing
        let z_small = ZState::new(
            Planar::new(1e-16, 0.0),
            Planar::zeros(),
            Planar::zeros(),
            Planar::zeros(),
        );
        let run0 =
            simulate_closed_loop(&z_small, &KMatrix::zero(), &ClosedLoopOptions::default())
                .unwrap();
        assert_eq!(cost(&run0.trajectory), 0.0);
    }

    #[test]
    fn singular_arc_detection() {
        // identically-zero path is singular; the spiral is not; tol = 0 never
        let zero_states: Vec<Vec<f64>> = (0..10).map(|_| vec![0.0; 8]).collect();
        let times: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let zero_traj = Trajectory::from_samples(times, zero_states);
        assert!(is_singular(&zero_traj, (0.0, 0.9), 1e-12));
        assert!(!is_singular(&zero_traj, (0.0, 0.9), 0.0));

        let fam = SpiralFamily::standard(1.0);
        let z0 = spiral_state(0.0, &fam).unwrap();
        let run =
            simulate_closed_loop(&z0, &KMatrix::zero(), &ClosedLoopOptions::default()).unwrap();
        let (t0, t1) = run.trajectory.span();
        assert!(!is_singular(&run.trajectory, (t0, (t1 - 1e-3).max(t0)), 1e-12));
    }

    #[test]
    fn backward_seeded_trajectory_satisfies_the_field() {
        // numerically differentiate the dense output of a backward-seeded
        // perturbed extremal and compare against the field
        use crate::spiral::seed_near_origin;
        let fam = SpiralFamily::standard(1.0);
        let k = KMatrix::diag(2.0, 2.0);
        let seed = seed_near_origin(1.0, 0.05, &fam, &k);
        let field = ExtremalField { k, singular_threshold: 0.0 };
        let traj = crate::numkit::integrate_adaptive(
            &field,
            &seed.to_array(),
            (0.95, 0.1),
            1e-12,
            1e-14,
        )
        .unwrap();
        let dt = 1e-6;
        let mut worst: f64 = 0.0;
        for &t in &[0.2, 0.5, 0.8] {
            let zp = ZState::from_slice(&traj.interpolate(t + dt).unwrap());
            let zm = ZState::from_slice(&traj.interpolate(t - dt).unwrap());
            let z = ZState::from_slice(&traj.interpolate(t).unwrap());
            let d = ham_rhs_p1(&k, &z).unwrap();
            for m in 1..=4 {
                let fd = (zp.block(m) - zm.block(m)) / (2.0 * dt);
                worst = worst.max((fd - d.block(m)).norm());
            }
        }
        assert!(worst < 1e-7, "field residual {worst}");
    }

    #[test]
    fn hitting_ratio_invariant_under_weighted_scaling() {
        use crate::spiral::hitting_ratio;
        let fam = SpiralFamily::standard(1.0);
        let z0 = spiral_state(0.0, &fam).unwrap();
        let opts = ClosedLoopOptions::default();
        let mut ratios = Vec::new();
        for lam in [1.0, 2.0] {
            let z = z0.scaled(lam);
            let run = simulate_closed_loop(&z, &KMatrix::zero(), &opts).unwrap();
            ratios.push(hitting_ratio(&z.x(), &z.y(), run.hit_time.unwrap()));
        }
        assert!(
            (ratios[0] / ratios[1] - 1.0).abs() < 1e-3,
            "ratios {ratios:?} not scale-invariant"
        );
    }

    #[test]
    fn find_event_on_spiral_norm_threshold() {
        // ||x|| = |A2| (T*-t)^2 crosses eps at t = T* - sqrt(eps/|A2|); the
        // threshold is chosen above the depth where forward shooting into the
        // singular point loses the spiral
        use crate::numkit::find_event;
        let fam = SpiralFamily::standard(1.0);
        let z0 = spiral_state(0.0, &fam).unwrap();
        let run =
            simulate_closed_loop(&z0, &KMatrix::zero(), &ClosedLoopOptions::default()).unwrap();
        let eps = 1e-4;
        let g = move |_t: f64, y: &[f64]| ZState::from_slice(y).z3.norm() - eps;
        let (t_event, _) = find_event(&run.trajectory, &g, -1).unwrap();
        let a2 = (1.0_f64 / 54.0).sqrt();
        let want = 1.0 - (eps / a2).sqrt();
        assert!(t_event < 1.0);
        assert!((t_event - want).abs() < 1e-6, "event at {t_event}, closed form {want}");
    }
}
