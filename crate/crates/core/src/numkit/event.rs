//! Post-hoc event location on a stored trajectory.

use super::Trajectory;

/// Find the first time in the trajectory span where the scalar event function
/// `g` crosses zero in the requested direction (-1 falling, +1 rising,
/// 0 either). Returns the event time and interpolated state, or `None` when
/// no qualifying sign change exists; that is a valid outcome, not an error.
///
/// The crossing is bracketed on a subdivision of each dense segment and then
/// bisected on the interpolant until |g| <= 1e-10.
pub fn find_event(
    traj: &Trajectory,
    g: &dyn Fn(f64, &[f64]) -> f64,
    direction: i8,
) -> Option<(f64, Vec<f64>)> {
    if traj.len() < 2 {
        return None;
    }
    let mut y = vec![0.0; traj.dim()];
    const SUBS: usize = 8;
    let eval_g = |t: f64, y: &mut Vec<f64>| -> f64 {
        traj.interpolate_into(t, y).expect("event probe inside span");
        g(t, y)
    };
    let times = traj.times();
    let mut ta = times[0];
    let mut ga = eval_g(ta, &mut y);
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        for i in 1..=SUBS {
            let tb = t0 + (t1 - t0) * i as f64 / SUBS as f64;
            let gb = eval_g(tb, &mut y);
            let crossing = ga * gb <= 0.0 && (ga != 0.0 || gb != 0.0);
            let dir_ok = match direction {
                0 => true,
                d if d > 0 => gb >= ga,
                _ => gb <= ga,
            };
            if crossing && dir_ok {
                // bisection
                let (mut lo, mut glo, mut hi) = (ta, ga, tb);
                for _ in 0..200 {
                    let tm = 0.5 * (lo + hi);
                    let gm = eval_g(tm, &mut y);
                    if gm.abs() <= 1e-10 || (hi - lo).abs() < 1e-15 * (t1 - t0).abs().max(1.0) {
                        traj.interpolate_into(tm, &mut y).ok()?;
                        return Some((tm, y));
                    }
                    if glo * gm <= 0.0 {
                        hi = tm;
                    } else {
                        lo = tm;
                        glo = gm;
                    }
                }
                let tm = 0.5 * (lo + hi);
                traj.interpolate_into(tm, &mut y).ok()?;
                return Some((tm, y));
            }
            ta = tb;
            ga = gb;
        }
    }
    None
}
