//! Closed-form logarithmic-spiral extremals of the model problem, the
//! complex constants of the family, near-origin seeds, and phase/winding
//! diagnostics.
//!
//! The family is
//! `z_m(t) = -zeta A_{m-1} (T*-t)^{5-m} exp(i alpha ln(T*-t))`, `m = 1..4`,
//! with `alpha = ±sqrt(5)`, `A_0 = -1/126`, `A_{m+1} = -A_m (4-m+i alpha)`
//! and `zeta` a planar rotation, optionally composed with a reflection (the
//! reflection maps one alpha branch onto the other). The matching control is
//! `u(t) = +zeta exp(i alpha ln(T*-t))`, which equals `z1/||z1||`; see the
//! sign-convention note in [`crate::pmp`].

use crate::numkit::Trajectory;
use crate::types::{from_complex, to_complex, KMatrix, Planar, ZState};
use num_complex::Complex64;
use thiserror::Error;

/// Positive branch of the spiral exponent, `sqrt(5)`.
pub const ALPHA: f64 = 2.2360679774997896964091736687747;

#[derive(Error, Debug)]
pub enum SpiralError {
    #[error("time {t} is outside the spiral domain [0, {t_star})")]
    DomainError { t: f64, t_star: f64 },
    #[error("phase step of {step} rad at t = {t} exceeds pi/2; sampling too coarse")]
    PhaseJump { t: f64, step: f64 },
}

/// Branch of `alpha = ±sqrt(5)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum AlphaBranch {
    Plus,
    Minus,
}

impl AlphaBranch {
    pub fn alpha(&self) -> f64 {
        match self {
            AlphaBranch::Plus => ALPHA,
            AlphaBranch::Minus => -ALPHA,
        }
    }
}

/// Planar isometry applied blockwise to the family: a rotation by `angle`,
/// optionally preceded by complex conjugation (the reflection).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Zeta {
    pub angle: f64,
    pub reflect: bool,
}

impl Zeta {
    pub fn identity() -> Self {
        Self { angle: 0.0, reflect: false }
    }

    pub fn rotation(angle: f64) -> Self {
        Self { angle, reflect: false }
    }

    #[inline]
    pub fn apply_c(&self, c: Complex64) -> Complex64 {
        let base = if self.reflect { c.conj() } else { c };
        base * Complex64::from_polar(1.0, self.angle)
    }

    #[inline]
    pub fn apply(&self, v: &Planar) -> Planar {
        from_complex(self.apply_c(to_complex(v)))
    }
}

/// The four complex constants `A_0..A_3` of the family for the given branch.
pub fn a_constants(alpha: f64) -> [Complex64; 4] {
    let mut a = [Complex64::new(0.0, 0.0); 4];
    a[0] = Complex64::new(-1.0 / 126.0, 0.0);
    for m in 0..3 {
        a[m + 1] = -a[m] * Complex64::new(4.0 - m as f64, alpha);
    }
    a
}

/// Moduli `|A_0..A_3|`; independent of the branch sign.
pub(crate) fn a_moduli() -> [f64; 4] {
    let a = a_constants(ALPHA);
    [a[0].norm(), a[1].norm(), a[2].norm(), a[3].norm()]
}

/// One member of the spiral family.
#[derive(Clone, Debug)]
pub struct SpiralFamily {
    /// Hitting time.
    pub t_star: f64,
    /// Exponent branch, `+sqrt(5)` or `-sqrt(5)`.
    pub alpha: f64,
    /// Blockwise planar isometry.
    pub zeta: Zeta,
    /// The constants `A_0..A_3` (derived from `alpha` unless overridden).
    pub a: [Complex64; 4],
}

impl SpiralFamily {
    pub fn new(t_star: f64, branch: AlphaBranch, zeta: Zeta) -> Self {
        let alpha = branch.alpha();
        Self { t_star, alpha, zeta, a: a_constants(alpha) }
    }

    /// Identity-rotation family on the positive branch.
    pub fn standard(t_star: f64) -> Self {
        Self::new(t_star, AlphaBranch::Plus, Zeta::identity())
    }

    /// Same family with the constants replaced; exists so verification code
    /// can demonstrate sensitivity to corrupted constants.
    pub fn with_constants(mut self, a: [Complex64; 4]) -> Self {
        self.a = a;
        self
    }

    fn check_domain(&self, t: f64) -> Result<f64, SpiralError> {
        let w = self.t_star - t;
        if w <= 0.0 {
            return Err(SpiralError::DomainError { t, t_star: self.t_star });
        }
        Ok(w)
    }

    /// Unit phase factor `exp(i alpha ln(T*-t))`.
    fn phase(&self, w: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.alpha * w.ln())
    }
}

/// State of the spiral at time `t < T*`.
pub fn spiral_state(t: f64, fam: &SpiralFamily) -> Result<ZState, SpiralError> {
    let w = fam.check_domain(t)?;
    let ph = fam.phase(w);
    let block = |m: usize| -> Planar {
        let c = -fam.a[m - 1] * w.powi(5 - m as i32) * ph;
        fam.zeta.apply(&from_complex(c))
    };
    Ok(ZState::new(block(1), block(2), block(3), block(4)))
}

/// Closed-form time derivative of [`spiral_state`]; the independent oracle
/// for the field residual checks.
pub fn spiral_state_derivative(t: f64, fam: &SpiralFamily) -> Result<ZState, SpiralError> {
    let w = fam.check_domain(t)?;
    let ph = fam.phase(w);
    let block = |m: usize| -> Planar {
        // d/dt [ -A w^{5-m} e^{i a ln w} ] = A (5-m + i a) w^{4-m} e^{i a ln w}
        let c = fam.a[m - 1] * Complex64::new(5.0 - m as f64, fam.alpha) * w.powi(4 - m as i32) * ph;
        fam.zeta.apply(&from_complex(c))
    };
    Ok(ZState::new(block(1), block(2), block(3), block(4)))
}

/// Control realizing the spiral, `u(t) = +zeta exp(i alpha ln(T*-t))`;
/// unit modulus, equal to `z1/||z1||` of [`spiral_state`].
pub fn spiral_control(t: f64, fam: &SpiralFamily) -> Result<Planar, SpiralError> {
    let w = fam.check_domain(t)?;
    Ok(fam.zeta.apply(&from_complex(fam.phase(w))))
}

/// Self-similar scale of an extremal state: the unique `mu >= 0` with
/// `sum_m |z_m / (A_{m-1} mu^{5-m})|^{w_m} = 4`, weights `(6, 8, 12, 24)`.
/// On the spiral it equals the remaining hitting time `T* - t`, which makes
/// it the natural tail estimate when an integration stops at the singular
/// threshold. Computed with a scaling guard so states spanning hundreds of
/// orders of magnitude stay in range.
pub fn self_similar_scale(z: &ZState) -> f64 {
    let am = a_moduli();
    let weights = [6.0_f64, 8.0, 12.0, 24.0];
    // natural per-block scale estimates |z_m / A_{m-1}|^{1/(5-m)}
    let mut q: f64 = 0.0;
    for m in 1..=4 {
        let r = z.block(m).norm() / am[m - 1];
        if r > 0.0 {
            q = q.max(r.powf(1.0 / (5 - m) as f64));
        }
    }
    if q == 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for m in 1..=4 {
        let r = z.block(m).norm() / (am[m - 1] * q.powi(5 - m as i32));
        s += r.powf(weights[m - 1]);
    }
    q * (s / 4.0).powf(1.0 / 24.0)
}

/// Leading-order seed for the perturbed problem: the closed-form spiral with
/// hitting time `t_hit` evaluated at `t_hit - eps`. The correction terms of
/// the perturbed family are `o(eps)`-small, so the seed converges to the true
/// family as `eps` shrinks; the gain matrix does not enter at leading order
/// (the blown-up perturbed and model systems coincide at scale zero).
pub fn seed_near_origin(t_hit: f64, eps: f64, fam: &SpiralFamily, _k: &KMatrix) -> ZState {
    let mut f = fam.clone();
    f.t_star = t_hit;
    spiral_state(t_hit - eps, &f).expect("eps > 0 keeps the seed inside the domain")
}

/// Which planar block of the extremal state carries the phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseBlock {
    Z1,
    Z2,
    Z3,
    Z4,
    /// The control direction; its phase equals the phase of `z1`.
    Control,
}

impl PhaseBlock {
    fn extract(&self, z: &ZState) -> Planar {
        match self {
            PhaseBlock::Z1 | PhaseBlock::Control => z.z1,
            PhaseBlock::Z2 => z.z2,
            PhaseBlock::Z3 => z.z3,
            PhaseBlock::Z4 => z.z4,
        }
    }
}

/// Continuous unwrapped phase change of the selected block over `[t0, t1]`,
/// divided by 2 pi. The block must not vanish on the window.
pub fn winding_number(
    traj: &Trajectory,
    block: PhaseBlock,
    t0: f64,
    t1: f64,
) -> Result<f64, SpiralError> {
    let f = |t: f64| -> Planar {
        let y = traj.interpolate(t).expect("winding probe inside the span");
        block.extract(&ZState::from_slice(&y))
    };
    winding_number_fn(&f, t0, t1)
}

/// [`winding_number`] over an arbitrary sampled planar path. Panels are
/// bisected recursively; a panel is accepted only when its wrapped phase step
/// is small AND agrees with the sum of its two halves, which catches whole
/// turns hidden by wrap-around. Fails with `PhaseJump` when a step still
/// reaches pi/2 at spacing `1e-9 (t1 - t0)`.
pub fn winding_number_fn(f: &dyn Fn(f64) -> Planar, t0: f64, t1: f64) -> Result<f64, SpiralError> {
    assert!(t1 > t0, "winding window must be ordered");
    let phase = |t: f64| -> f64 {
        let v = f(t);
        v.y.atan2(v.x)
    };
    let wrap = |mut d: f64| -> f64 {
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d < -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        d
    };
    let min_dt = 1e-9 * (t1 - t0);

    fn panel(
        phase: &dyn Fn(f64) -> f64,
        wrap: &dyn Fn(f64) -> f64,
        ta: f64,
        pa: f64,
        tb: f64,
        pb: f64,
        min_dt: f64,
        depth: u32,
    ) -> Result<f64, SpiralError> {
        let d = wrap(pb - pa);
        if !d.is_finite() {
            return Err(SpiralError::PhaseJump { t: ta, step: d });
        }
        if tb - ta <= min_dt || depth >= 64 {
            if d.abs() >= std::f64::consts::FRAC_PI_2 {
                return Err(SpiralError::PhaseJump { t: ta, step: d });
            }
            return Ok(d);
        }
        let tm = 0.5 * (ta + tb);
        let pm = phase(tm);
        let dl = wrap(pm - pa);
        let dr = wrap(pb - pm);
        if d.abs() < std::f64::consts::FRAC_PI_4
            && dl.abs() < std::f64::consts::FRAC_PI_4
            && dr.abs() < std::f64::consts::FRAC_PI_4
            && (dl + dr - d).abs() < 1e-9
        {
            return Ok(dl + dr);
        }
        Ok(panel(phase, wrap, ta, pa, tm, pm, min_dt, depth + 1)?
            + panel(phase, wrap, tm, pm, tb, pb, min_dt, depth + 1)?)
    }

    let n0 = 64usize;
    let mut total = 0.0;
    let mut prev_t = t0;
    let mut prev_p = phase(t0);
    for i in 1..=n0 {
        let t = t0 + (t1 - t0) * i as f64 / n0 as f64;
        let p = phase(t);
        total += panel(&phase, &wrap, prev_t, prev_p, t, p, min_dt, 0)?;
        prev_t = t;
        prev_p = p;
    }
    Ok(total / (2.0 * std::f64::consts::PI))
}

/// Diagnostic ratio `T / max(sqrt(||x0||), ||y0||)` relating the hitting time
/// to the initial condition's scale.
pub fn hitting_ratio(x0: &Planar, y0: &Planar, t_hit: f64) -> f64 {
    let denom = x0.norm().sqrt().max(y0.norm());
    assert!(denom > 0.0, "hitting ratio undefined at the origin");
    t_hit / denom
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact arithmetic in Q(i sqrt(5)): x = (a + b i sqrt5) / d.
    #[derive(Clone, Copy, Debug, PartialEq)]
    struct Exact {
        a: i64,
        b: i64,
        d: i64,
    }

    impl Exact {
        fn new(a: i64, b: i64, d: i64) -> Self {
            let g = gcd(gcd(a.abs(), b.abs()).max(1), d.abs());
            let s = if d < 0 { -1 } else { 1 };
            Self { a: s * a / g, b: s * b / g, d: s * d / g }
        }
        fn mul(self, o: Exact) -> Exact {
            // (a + b w)(c + e w) with w^2 = -5
            Exact::new(
                self.a * o.a - 5 * self.b * o.b,
                self.a * o.b + self.b * o.a,
                self.d * o.d,
            )
        }
        fn neg(self) -> Exact {
            Exact::new(-self.a, -self.b, self.d)
        }
        fn to_complex(self) -> Complex64 {
            Complex64::new(self.a as f64 / self.d as f64, self.b as f64 * ALPHA / self.d as f64)
        }
    }

    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.max(1)
        } else {
            gcd(b, a % b)
        }
    }

    fn exact_a_constants() -> [Exact; 4] {
        let mut a = [Exact::new(-1, 0, 126); 4];
        for m in 0..3 {
            a[m + 1] = a[m].mul(Exact::new(4 - m as i64, 1, 1)).neg();
        }
        a
    }

    #[test]
    fn constants_match_exact_recursion() {
        let a = a_constants(ALPHA);
        let ex = exact_a_constants();
        assert_eq!(a[0], Complex64::new(-1.0 / 126.0, 0.0));
        for m in 0..4 {
            assert!((a[m] - ex[m].to_complex()).norm() < 1e-15);
        }
        // A1 = (4 + i sqrt5)/126
        assert!((a[1] - Complex64::new(4.0 / 126.0, ALPHA / 126.0)).norm() < 1e-15);
        // closure: A3 (1 + i alpha) = -1 exactly in Q(i sqrt5)
        let closure = exact_a_constants()[3].mul(Exact::new(1, 1, 1));
        assert_eq!(closure, Exact::new(-1, 0, 1));
        let numeric = a[3] * Complex64::new(1.0, ALPHA);
        assert!((numeric - Complex64::new(-1.0, 0.0)).norm() < 1e-14);
        // |A3 (1 + i alpha)| = 1
        assert!((numeric.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn block_moduli_follow_the_power_law() {
        let fam = SpiralFamily::standard(1.0);
        let am = a_moduli();
        for &t in &[0.0, 0.3, 0.9, 0.999] {
            let w: f64 = 1.0 - t;
            let z = spiral_state(t, &fam).unwrap();
            for m in 1..=4 {
                let want = am[m - 1] * w.powi(5 - m as i32);
                assert!(
                    (z.block(m).norm() - want).abs() <= 1e-14 * want.max(1e-300),
                    "block {m} at t={t}"
                );
            }
        }
    }

    #[test]
    fn domain_error_at_and_past_t_star() {
        let fam = SpiralFamily::standard(1.0);
        assert!(matches!(spiral_state(1.0, &fam), Err(SpiralError::DomainError { .. })));
        assert!(matches!(spiral_control(1.5, &fam), Err(SpiralError::DomainError { .. })));
    }

    #[test]
    fn state_vanishes_at_hitting_time() {
        let fam = SpiralFamily::standard(1.0);
        let z = spiral_state(1.0 - 1e-9, &fam).unwrap();
        assert!(z.norm() < 1e-8);
    }

    #[test]
    fn control_is_unit_and_phase_advances_by_the_log_law() {
        let fam = SpiralFamily::standard(1.0);
        for &t in &[0.0, 0.5, 0.99, 0.99999] {
            assert!((spiral_control(t, &fam).unwrap().norm() - 1.0).abs() < 1e-14);
        }
        let (t0, t1) = (0.2, 0.8);
        let u0 = to_complex(&spiral_control(t0, &fam).unwrap());
        let u1 = to_complex(&spiral_control(t1, &fam).unwrap());
        let measured = (u1 / u0).arg();
        let want = ALPHA * ((1.0 - t1) / (1.0 - t0)).ln();
        let wrapped = (want - measured) / (2.0 * std::f64::consts::PI);
        assert!((wrapped - wrapped.round()).abs() < 1e-12);
    }

    #[test]
    fn derivative_chain_and_closed_form_derivative() {
        let fam = SpiralFamily::standard(1.0);
        for &t in &[0.1, 0.5, 0.85] {
            let d = spiral_state_derivative(t, &fam).unwrap();
            let z = spiral_state(t, &fam).unwrap();
            // chain property: d/dt z_m = z_{m+1} for m = 1..3
            for m in 1..=3 {
                assert!((d.block(m) - z.block(m + 1)).norm() < 1e-13);
            }
            // finite-difference check of the closed-form derivative
            let h = 1e-7;
            let zp = spiral_state(t + h, &fam).unwrap();
            let zm = spiral_state(t - h, &fam).unwrap();
            for m in 1..=4 {
                let fd = (zp.block(m) - zm.block(m)) / (2.0 * h);
                assert!(
                    (fd - d.block(m)).norm() < 1e-8 * (1.0 + d.block(m).norm()),
                    "block {m} at t={t}"
                );
            }
        }
    }

    #[test]
    fn zeta_equivariance_is_exact() {
        let base = SpiralFamily::standard(1.0);
        let rot = SpiralFamily::new(1.0, AlphaBranch::Plus, Zeta::rotation(0.7));
        let z0 = spiral_state(0.4, &base).unwrap();
        let z1 = spiral_state(0.4, &rot).unwrap();
        let r = Zeta::rotation(0.7);
        for m in 1..=4 {
            assert!((z1.block(m) - r.apply(&z0.block(m))).norm() < 1e-15);
        }
    }

    #[test]
    fn reflection_gives_the_mirror_branch() {
        let refl = SpiralFamily::new(1.0, AlphaBranch::Plus, Zeta { angle: 0.0, reflect: true });
        let minus = SpiralFamily::new(1.0, AlphaBranch::Minus, Zeta::identity());
        let a = spiral_state(0.3, &refl).unwrap();
        let b = spiral_state(0.3, &minus).unwrap();
        for m in 1..=4 {
            assert!((a.block(m) - b.block(m)).norm() < 1e-14, "block {m}");
        }
    }

    #[test]
    fn scale_recovers_remaining_time_on_the_spiral() {
        let fam = SpiralFamily::standard(1.0);
        for &t in &[0.0, 0.5, 0.9, 0.99, 0.999999] {
            let z = spiral_state(t, &fam).unwrap();
            let mu = self_similar_scale(&z);
            let w = 1.0 - t;
            assert!((mu - w).abs() < 1e-12 * w.max(1e-12), "t={t}: mu={mu} want {w}");
        }
        assert_eq!(self_similar_scale(&ZState::zero()), 0.0);
    }

    #[test]
    fn scale_is_weighted_homogeneous() {
        let fam = SpiralFamily::standard(1.0);
        let z = spiral_state(0.25, &fam).unwrap();
        let mu = self_similar_scale(&z);
        for &lam in &[2.0, 0.5, 10.0] {
            let mu_l = self_similar_scale(&z.scaled(lam));
            assert!((mu_l - lam * mu).abs() < 1e-12 * (lam * mu));
        }
    }

    #[test]
    fn seed_matches_spiral_for_model_problem() {
        let fam = SpiralFamily::standard(1.0);
        let seed = seed_near_origin(1.0, 1e-3, &fam, &KMatrix::zero());
        let z = spiral_state(1.0 - 1e-3, &fam).unwrap();
        assert_eq!(seed, z);
        // and with a family whose own t_star differs, t_hit wins
        let seed2 = seed_near_origin(0.5, 1e-3, &fam, &KMatrix::diag(2.0, 2.0));
        let mut f2 = fam.clone();
        f2.t_star = 0.5;
        assert_eq!(seed2, spiral_state(0.5 - 1e-3, &f2).unwrap());
    }

    #[test]
    fn seed_self_convergence_under_eps_halving() {
        // backward-integrate seeds of shrinking depth to a fixed earlier
        // time; successive differences must shrink by a positive power
        use crate::pmp::ExtremalField;
        let fam = SpiralFamily::standard(1.0);
        let k = KMatrix::diag(2.0, 2.0);
        let state_at = |eps: f64| -> ZState {
            let seed = seed_near_origin(1.0, eps, &fam, &k);
            let field = ExtremalField { k, singular_threshold: 0.0 };
            let traj = crate::numkit::integrate_adaptive(
                &field,
                &seed.to_array(),
                (1.0 - eps, 0.5),
                1e-12,
                1e-16,
            )
            .unwrap();
            ZState::from_slice(traj.states().first().unwrap())
        };
        let z1 = state_at(2e-2);
        let z2 = state_at(1e-2);
        let z3 = state_at(5e-3);
        let d12: f64 = (1..=4).map(|m| (z1.block(m) - z2.block(m)).norm()).sum();
        let d23: f64 = (1..=4).map(|m| (z2.block(m) - z3.block(m)).norm()).sum();
        assert!(d12 > 0.0 && d23 > 0.0);
        let order = (d12 / d23).log2();
        assert!(order > 0.5, "self-convergence order {order} (d12 {d12:.2e}, d23 {d23:.2e})");
    }

    #[test]
    fn winding_of_the_control_follows_the_log_law() {
        let fam = SpiralFamily::standard(1.0);
        let f = |t: f64| spiral_control(t, &fam).unwrap();
        for &eps in &[1e-2_f64, 1e-3, 1e-4] {
            let turns = winding_number_fn(&f, 0.0, 1.0 - eps).unwrap();
            let want = -(ALPHA / (2.0 * std::f64::consts::PI)) * (1.0 / eps).ln();
            assert!(
                (turns - want).abs() < 1e-6,
                "eps={eps}: turns {turns} want {want}"
            );
        }
        // doubling eps removes (alpha / 2pi) ln 2 turns in magnitude
        let t1 = winding_number_fn(&f, 0.0, 1.0 - 1e-3).unwrap();
        let t2 = winding_number_fn(&f, 0.0, 1.0 - 2e-3).unwrap();
        let delta = (ALPHA / (2.0 * std::f64::consts::PI)) * 2.0_f64.ln();
        assert!(((t1.abs() - t2.abs()) - delta).abs() < 1e-9);
    }

    #[test]
    fn winding_of_a_real_axis_path_is_zero() {
        let f = |t: f64| Planar::new(1.0 + t * t, 0.0);
        assert_eq!(winding_number_fn(&f, 0.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn hitting_ratio_examples() {
        let x0 = Planar::new(0.04, 0.0);
        let y0 = Planar::new(0.0, 0.1);
        // max(sqrt(0.04), 0.1) = 0.2
        assert!((hitting_ratio(&x0, &y0, 1.0) - 5.0).abs() < 1e-14);
        assert!((hitting_ratio(&x0, &y0, 2.0) - 10.0).abs() < 1e-14);
    }
}
