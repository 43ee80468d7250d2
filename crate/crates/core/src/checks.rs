//! The verification suite: ten numbered checks covering the reference
//! spectrum, the characteristic polynomial, the Floquet reconstruction, the
//! closed-form spiral residual, the cycle invariants, the scale decay rate,
//! the near-origin asymptotics of the perturbed problem, the winding law,
//! self-similarity of hitting times, and the pendulum linearization.
//!
//! Exposed as a library so both the `verify` command and the acceptance test
//! target run the identical checks with identical tolerances.

use crate::blowup::{
    blow_down, blow_up, cycle_state, pi_residual, reparam_t_of_s, BlownField, BlownState,
    CYCLE_PERIOD,
};
use crate::floquet::{reconstruct_j, reference_exponents, reference_j};
use crate::numkit::{
    char_poly, eig_dense, integrate_adaptive, integrate_with, jacobian_fd, FieldStop,
    FnFieldFallible, IntegrateOptions,
};
use crate::pendulum::{nonlinear_rhs, MechState, PendulumParams};
use crate::pmp::{ham_rhs_p2, simulate_closed_loop, ClosedLoopOptions};
use crate::spiral::{
    seed_near_origin, spiral_control, spiral_state, spiral_state_derivative, winding_number_fn,
    SpiralFamily, ALPHA,
};
use crate::types::{to_complex, KMatrix, Planar};
use num_complex::Complex64;
use std::time::Instant;

#[derive(Clone, Debug, serde::Serialize)]
pub struct CheckResult {
    pub id: u32,
    pub group: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub runtime_ms: u128,
}

impl CheckResult {
    fn run(
        id: u32,
        group: &'static str,
        name: &'static str,
        f: impl FnOnce() -> (bool, String),
    ) -> Self {
        let start = Instant::now();
        let (passed, detail) = f();
        Self { id, group, name, passed, detail, runtime_ms: start.elapsed().as_millis() }
    }
}

/// All checks, optionally filtered by group name.
pub fn run_all(only: Option<&str>) -> Vec<CheckResult> {
    let all: Vec<fn() -> CheckResult> = vec![
        check_01_reference_spectrum,
        check_02_reference_char_poly,
        check_03_reconstruction,
        check_04_spiral_residual,
        check_05_cycle_invariants,
        check_06_scale_decay_rate,
        check_07_asymptotic_realization,
        check_08_winding_law,
        check_09_self_similarity,
        check_10_linearization,
    ];
    all.iter()
        .map(|f| f())
        .filter(|c| only.is_none_or(|g| c.group == g))
        .collect()
}

pub fn check_01_reference_spectrum() -> CheckResult {
    CheckResult::run(1, "floquet", "reference matrix spectrum", || {
        let spec = match eig_dense(&reference_j()) {
            Ok(s) => s,
            Err(e) => return (false, format!("eigensolver failed: {e}")),
        };
        let mut worst_exact: f64 = 0.0;
        for want in [-1.0, 0.0, 4.0, 5.0, 93.0] {
            let best = spec
                .eigenvalues
                .iter()
                .map(|e| (e - Complex64::new(want, 0.0)).norm())
                .fold(f64::INFINITY, f64::min);
            worst_exact = worst_exact.max(best);
        }
        let mut worst_stated: f64 = 0.0;
        for want in [
            Complex64::new(4.65903, 4.0511),
            Complex64::new(4.65903, -4.0511),
            Complex64::new(0.340974, 4.0511),
            Complex64::new(0.340974, -4.0511),
        ] {
            let best = spec
                .eigenvalues
                .iter()
                .map(|e| (e - want).norm())
                .fold(f64::INFINITY, f64::min);
            worst_stated = worst_stated.max(best);
        }
        let ok = worst_exact < 1e-9 && worst_stated < 1e-4;
        (
            ok,
            format!(
                "exact values off by {worst_exact:.2e} (tol 1e-9), stated decimals off by {worst_stated:.2e} (tol 1e-4)"
            ),
        )
    })
}

pub fn check_02_reference_char_poly() -> CheckResult {
    CheckResult::run(2, "floquet", "reference characteristic polynomial", || {
        // exact integer expansion of
        // (x+1) x (x-4) (x-5) (x-93) (x^4 - 10 x^3 + 61 x^2 - 180 x + 630)
        let factors: Vec<Vec<i64>> = vec![
            vec![1, 1],
            vec![1, 0],
            vec![1, -4],
            vec![1, -5],
            vec![1, -93],
            vec![1, -10, 61, -180, 630],
        ];
        let mut want = vec![1i64];
        for f in factors {
            let mut next = vec![0i64; want.len() + f.len() - 1];
            for (i, a) in want.iter().enumerate() {
                for (j, b) in f.iter().enumerate() {
                    next[i + j] += a * b;
                }
            }
            want = next;
        }
        let got = match char_poly(&reference_j()) {
            Ok(p) => p,
            Err(e) => return (false, format!("char_poly failed: {e}")),
        };
        let scale = want.iter().map(|c| c.unsigned_abs() as f64).fold(1.0, f64::max);
        let mut worst: f64 = 0.0;
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - *w as f64).abs() / scale);
        }
        (worst < 1e-9, format!("coefficients off by {worst:.2e} of the coefficient scale (tol 1e-9)"))
    })
}

pub fn check_03_reconstruction() -> CheckResult {
    CheckResult::run(3, "floquet", "constant-matrix reconstruction", || {
        let report = match reconstruct_j(&KMatrix::diag(2.0, 2.0), 16) {
            Ok(r) => r,
            Err(e) => return (false, format!("reconstruction failed: {e}")),
        };
        let ok = report.constancy_residual < 1e-6
            && report.spectral_gap_to_reference < 1e-5
            && report.classification == (1, 1, 7);
        (
            ok,
            format!(
                "constancy {:.2e} (tol 1e-6), spectral gap {:.2e} (tol 1e-5), classification {:?} (want (1, 1, 7))",
                report.constancy_residual, report.spectral_gap_to_reference, report.classification
            ),
        )
    })
}

pub fn check_04_spiral_residual() -> CheckResult {
    CheckResult::run(4, "spiral", "closed-form spiral field residual", || {
        let fam = SpiralFamily::standard(1.0);
        let worst = max_relative_field_residual(&fam, 0.9, 400);
        (worst < 1e-8, format!("max relative residual {worst:.2e} over [0, 0.9 T*] (tol 1e-8)"))
    })
}

/// Max over a `[0, frac * T*]` grid of the blockwise relative residual
/// between the closed-form derivative and the model field. Exposed so
/// sensitivity of the verification to corrupted constants can be
/// demonstrated directly.
pub fn max_relative_field_residual(fam: &SpiralFamily, frac: f64, n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..=n {
        let t = frac * fam.t_star * i as f64 / n as f64;
        let z = match spiral_state(t, fam) {
            Ok(z) => z,
            Err(_) => return f64::INFINITY,
        };
        let d_closed = match spiral_state_derivative(t, fam) {
            Ok(d) => d,
            Err(_) => return f64::INFINITY,
        };
        let d_field = match ham_rhs_p2(&z) {
            Ok(d) => d,
            Err(_) => return f64::INFINITY,
        };
        for m in 1..=4 {
            let scale = d_closed.block(m).norm().max(1e-300);
            worst = worst.max((d_closed.block(m) - d_field.block(m)).norm() / scale);
        }
    }
    worst
}

pub fn check_05_cycle_invariants() -> CheckResult {
    CheckResult::run(5, "blowup", "cycle rate and manifold invariance", || {
        // M0 = -1 at 32 sampled phases
        let mut worst_m0: f64 = 0.0;
        for i in 0..32 {
            let s = CYCLE_PERIOD * i as f64 / 32.0;
            let b = cycle_state(s);
            match crate::blowup::m_rate(&b, &KMatrix::diag(2.0, 2.0)) {
                Ok((_, m0, _)) => worst_m0 = worst_m0.max((m0 + 1.0).abs()),
                Err(e) => return (false, format!("rate failed: {e}")),
            }
        }
        // manifold residual along a backward-seeded blown flow over 10 units
        let fam = SpiralFamily::standard(1.0);
        let k = KMatrix::diag(2.0, 2.0);
        let seed = seed_near_origin(1.0, (-10.0_f64).exp(), &fam, &k);
        let b0 = match blow_up(&seed) {
            Ok(b) => b,
            Err(e) => return (false, format!("blow-up failed: {e}")),
        };
        let field = BlownField::new(k);
        let sol = match integrate_with(
            &field,
            &b0.to_array(),
            (0.0, -10.0),
            &IntegrateOptions::tols(1e-11, 1e-13),
            &[],
        ) {
            Ok(s) => s,
            Err(e) => return (false, format!("integration failed: {e}")),
        };
        let mut worst_pi: f64 = 0.0;
        for st in sol.trajectory.states() {
            worst_pi = worst_pi.max(pi_residual(&BlownState::from_slice(st)).abs());
        }
        let span = sol.trajectory.last_time() - sol.trajectory.first_time();
        let ok = worst_m0 < 1e-12 && worst_pi < 1e-8 && span >= 10.0 - 1e-9;
        (
            ok,
            format!(
                "|M0 + 1| <= {worst_m0:.2e} at 32 phases (tol 1e-12); manifold residual {worst_pi:.2e} over {span:.1} slow-time units (tol 1e-8)"
            ),
        )
    })
}

pub fn check_06_scale_decay_rate() -> CheckResult {
    CheckResult::run(6, "blowup", "scale decay rate on the cylinder", || {
        let fam = SpiralFamily::standard(1.0);
        let k = KMatrix::diag(2.0, 2.0);
        let seed = seed_near_origin(1.0, (-10.0_f64).exp(), &fam, &k);
        let b0 = match blow_up(&seed) {
            Ok(b) => b,
            Err(e) => return (false, format!("blow-up failed: {e}")),
        };
        let field = BlownField::new(k);
        let traj = match integrate_adaptive(&field, &b0.to_array(), (0.0, -10.0), 1e-12, 1e-14) {
            Ok(t) => t,
            Err(e) => return (false, format!("integration failed: {e}")),
        };
        // relabel so s_hat = 10 at the seed (smallest scale); fit over [5, 10]
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut kappas = Vec::new();
        for (i, &s) in traj.times().iter().enumerate() {
            let s_hat = s + 10.0;
            if !(5.0..=10.0).contains(&s_hat) {
                continue;
            }
            let mu = traj.state(i)[0];
            xs.push(s_hat);
            ys.push(mu.ln());
            kappas.push(mu * s_hat.exp());
        }
        if xs.len() < 10 {
            return (false, format!("only {} samples in the fit window", xs.len()));
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let kmin = kappas.iter().cloned().fold(f64::INFINITY, f64::min);
        let kmax = kappas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let kappa_spread = kmax / kmin - 1.0;
        let ok = (slope + 1.0).abs() < 1e-3 && kappa_spread < 1e-3;
        (
            ok,
            format!(
                "log-scale slope {slope:.6} (want -1 ± 1e-3); kappa = {:.6} stable to {kappa_spread:.2e} (tol 1e-3)",
                0.5 * (kmin + kmax)
            ),
        )
    })
}

pub fn check_07_asymptotic_realization() -> CheckResult {
    CheckResult::run(7, "blowup", "near-origin asymptotic form of the perturbed problem", || {
        let mut detail = String::new();
        let mut ok = true;
        for k in [KMatrix::diag(2.0, 2.0), KMatrix::diag(1.0, 3.0)] {
            match fit_asymptotic_exponent(&k) {
                Ok((sigma_min, kmag)) => {
                    ok &= sigma_min > 0.0;
                    detail.push_str(&format!(
                        "K=diag({},{}): fitted remainder exponent {sigma_min:.2} (want > 0), |k_m| scale {kmag:.3}; ",
                        k.k1, k.k2
                    ));
                }
                Err(e) => {
                    ok = false;
                    detail.push_str(&format!("K=diag({},{}): {e}; ", k.k1, k.k2));
                }
            }
        }
        (ok, detail)
    })
}

/// Backward-seeded trajectory of the perturbed problem, reduced to the
/// normalized ratios `z_m(t) / ((T-t)^{5-m} e^{i alpha ln(T-t)})`. Returns
/// the smallest fitted decay exponent of the remainder over the four blocks
/// and the magnitude of the limiting constants.
fn fit_asymptotic_exponent(k: &KMatrix) -> Result<(f64, f64), String> {
    let fam = SpiralFamily::standard(1.0);
    let w0 = 1e-5;
    let seed = seed_near_origin(1.0, w0, &fam, k);
    let b0 = blow_up(&seed).map_err(|e| e.to_string())?;
    let field = BlownField::new(*k);
    // backward until the scale grows to about 0.5
    let span = -(0.5 / b0.mu).ln();
    let traj = integrate_adaptive(&field, &b0.to_array(), (0.0, span), 1e-12, 1e-14)
        .map_err(|e| e.to_string())?;
    let table = reparam_t_of_s(&traj);
    // remaining time at each node: w(s) = w(seed) + integral_s^{seed} mu;
    // the seed sits at the trajectory's largest s (time tables share order)
    let n = traj.times().len();
    let seed_idx = n - 1;
    let w_at = |i: usize| -> f64 { b0.mu + (table.t[seed_idx] - table.t[i]) };
    // complex ratios r_m(w) and their limit estimate at the seed
    let ratio = |i: usize, m: usize| -> Result<Complex64, String> {
        let b = BlownState::from_slice(traj.state(i));
        let z = blow_down(&b).map_err(|e| e.to_string())?;
        let w = w_at(i);
        let denom = Complex64::from_polar(w.powi(5 - m as i32), ALPHA * w.ln());
        Ok(to_complex(&z.block(m)) / denom)
    };
    let mut sigma_min = f64::INFINITY;
    let mut kmag: f64 = 0.0;
    for m in 1..=4 {
        let k_hat = ratio(seed_idx, m)?;
        kmag = kmag.max(k_hat.norm());
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let w = w_at(i);
            if !(100.0 * w0..=0.3).contains(&w) {
                continue;
            }
            let r = ratio(i, m)?;
            let dev = (r - k_hat).norm();
            if dev > 0.0 {
                xs.push(w.ln());
                ys.push(dev.ln());
            }
        }
        if xs.len() < 10 {
            return Err(format!("only {} fit samples for block {m}", xs.len()));
        }
        let nf = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / nf;
        let my = ys.iter().sum::<f64>() / nf;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        sigma_min = sigma_min.min(sxy / sxx);
    }
    Ok((sigma_min, kmag))
}

pub fn check_08_winding_law() -> CheckResult {
    CheckResult::run(8, "spiral", "unbounded winding of the control", || {
        let fam = SpiralFamily::standard(1.0);
        let f = |t: f64| spiral_control(t, &fam).unwrap();
        let mut worst: f64 = 0.0;
        let mut detail = String::new();
        for eps in [1e-2, 1e-3, 1e-4] {
            let turns = match winding_number_fn(&f, 0.0, 1.0 - eps) {
                Ok(t) => t.abs(),
                Err(e) => return (false, format!("winding failed: {e}")),
            };
            let want = (ALPHA / (2.0 * std::f64::consts::PI)) * (1.0_f64 / eps).ln();
            worst = worst.max((turns - want).abs());
            detail.push_str(&format!("eps={eps:.0e}: {turns:.3} turns (law {want:.3}); "));
        }
        // cross-check on an integrated closed-loop trajectory at a depth
        // forward shooting can certify
        let z0 = spiral_state(0.0, &fam).unwrap();
        let run = match simulate_closed_loop(&z0, &KMatrix::zero(), &ClosedLoopOptions::default())
        {
            Ok(r) => r,
            Err(e) => return (false, format!("simulation failed: {e}")),
        };
        let eps_sim = 5e-2;
        let turns_sim = match crate::spiral::winding_number(
            &run.trajectory,
            crate::spiral::PhaseBlock::Control,
            0.0,
            1.0 - eps_sim,
        ) {
            Ok(t) => t.abs(),
            Err(e) => return (false, format!("winding on trajectory failed: {e}")),
        };
        let want_sim = (ALPHA / (2.0 * std::f64::consts::PI)) * (1.0_f64 / eps_sim).ln();
        worst = worst.max((turns_sim - want_sim).abs());
        detail.push_str(&format!(
            "integrated eps={eps_sim}: {turns_sim:.3} turns (law {want_sim:.3})"
        ));
        (worst < 0.51, format!("worst deviation {worst:.3} turns (tol 0.51); {detail}"))
    })
}

pub fn check_09_self_similarity() -> CheckResult {
    CheckResult::run(9, "pmp", "hitting time scales with the weighted dilation", || {
        let fam = SpiralFamily::standard(1.0);
        let z0 = spiral_state(0.0, &fam).unwrap();
        let opts = ClosedLoopOptions::default();
        let hit1 = match simulate_closed_loop(&z0, &KMatrix::zero(), &opts) {
            Ok(r) => match r.hit_time {
                Some(h) => h,
                None => return (false, "base run reported no hit".into()),
            },
            Err(e) => return (false, format!("simulation failed: {e}")),
        };
        let mut worst: f64 = 0.0;
        let mut detail = format!("hit(1) = {hit1:.6}; ");
        for lam in [2.0, 4.0] {
            let hit = match simulate_closed_loop(&z0.scaled(lam), &KMatrix::zero(), &opts) {
                Ok(r) => match r.hit_time {
                    Some(h) => h,
                    None => return (false, format!("lambda={lam} run reported no hit")),
                },
                Err(e) => return (false, format!("simulation failed: {e}")),
            };
            let rel = (hit / (lam * hit1) - 1.0).abs();
            worst = worst.max(rel);
            detail.push_str(&format!("lambda={lam}: hit {hit:.6}, linearity error {rel:.2e}; "));
        }
        (worst < 1e-3, format!("{detail}(tol 1e-3)"))
    })
}

pub fn check_10_linearization() -> CheckResult {
    CheckResult::run(10, "pendulum", "nonlinear model linearizes to the stated system", || {
        let mut seed = 20260809u64;
        let mut rand01 = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let p = match PendulumParams::new(
                0.4 + rand01(),
                0.2 + rand01(),
                0.4 + rand01(),
                4.0 + 8.0 * rand01(),
            ) {
                Ok(p) => p,
                Err(e) => return (false, format!("bad parameters: {e}")),
            };
            let k = p.stiffness();
            let field = FnFieldFallible::new(8, move |_t, y: &[f64], dy: &mut [f64]| {
                let s = MechState::from_slice(y);
                let d = nonlinear_rhs(&p, &s, &Planar::zeros())
                    .map_err(|_| FieldStop::OutOfDomain)?;
                dy.copy_from_slice(&d.to_array());
                Ok(())
            });
            let jac = match jacobian_fd(&field, &[0.0; 8], 1e-6) {
                Ok(j) => j,
                Err(e) => return (false, format!("jacobian failed: {e}")),
            };
            for i in 0..2 {
                for j in 0..2 {
                    let want = if i == j { k } else { 0.0 };
                    worst = worst.max((jac[(2 + i, j)] - want).abs());
                }
                for j in 2..8 {
                    worst = worst.max(jac[(2 + i, j)].abs());
                }
            }
            // input gain -1/(Ml)
            let gain = p.input_gain();
            let h = 1e-6;
            for j in 0..2 {
                let mut up = Planar::zeros();
                up[j] = h;
                let dp = match nonlinear_rhs(&p, &MechState::upright(), &up) {
                    Ok(d) => d.to_array(),
                    Err(e) => return (false, format!("rhs failed: {e}")),
                };
                let dm = nonlinear_rhs(&p, &MechState::upright(), &(-up)).unwrap().to_array();
                for i in 0..2 {
                    let got = (dp[2 + i] - dm[2 + i]) / (2.0 * h);
                    let want = if i == j { -gain } else { 0.0 };
                    worst = worst.max((got - want).abs());
                }
            }
        }
        (worst < 1e-6, format!("worst entry deviation {worst:.2e} over 20 parameter sets (tol 1e-6)"))
    })
}

/// Verify the reference exponents list against itself (sanity for the
/// serialization path of the verify command).
pub fn reference_exponent_pairs() -> Vec<(f64, f64)> {
    reference_exponents().iter().map(|e| (e.re, e.im)).collect()
}
