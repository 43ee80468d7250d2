//! Implementations of the six subcommands.

use crate::config::RunConfig;
use crate::output::{fmt_f64, open_out, CsvWriter};
use anyhow::{anyhow, Context, Result};
use serde_json::json;
use spiralctl_core::blowup::{
    blow_up, pi_residual, reparam_t_of_s, BlownField, BlownState,
};
use spiralctl_core::numkit::{integrate_adaptive, Trajectory};
use spiralctl_core::pmp::{
    cost, simulate_closed_loop, ClosedLoopOptions, ClosedLoopStop, ExtremalField,
};
use spiralctl_core::spiral::{
    hitting_ratio, seed_near_origin, spiral_control, spiral_state, winding_number_fn,
};
use spiralctl_core::types::{Planar, ZState};
use spiralctl_core::{checks, floquet};

pub const SCHEMA_VERSION: u32 = 1;

const SIM_HEADER: [&str; 13] = [
    "t", "x1", "x2", "y1", "y2", "u1", "u2", "phi1", "phi2", "psi1", "psi2", "x_norm",
    "winding_u",
];
const BLOWN_EXTRA: [&str; 9] =
    ["mu", "zt11", "zt12", "zt21", "zt22", "zt31", "zt32", "zt41", "zt42"];

/// Initial extremal state per the configured seeding.
fn initial_state(cfg: &RunConfig) -> Result<ZState> {
    let z0 = if let Some(z) = cfg.z0 {
        ZState::from_slice(&z)
    } else {
        let fam = cfg.family();
        let k = cfg.gain();
        if k.is_zero() {
            spiral_state(0.0, &fam).map_err(|e| anyhow!("{e}"))?
        } else {
            // place a near-origin seed on the perturbed family and launch it
            // backward to t = 0; backward integration is the stable
            // direction. The seed's controlling block is tiny but exact, so
            // the forward-run singular threshold must not apply here.
            let seed = seed_near_origin(cfg.t_star, cfg.eps, &fam, &k);
            let field = ExtremalField { k, singular_threshold: 0.0 };
            let back = integrate_adaptive(
                &field,
                &seed.to_array(),
                (cfg.t_star - cfg.eps, 0.0),
                cfg.rtol,
                cfg.atol,
            )
            .context("backward seeding integration")?;
            ZState::from_slice(back.states().first().unwrap())
        }
    };
    Ok(z0.scaled(cfg.scale))
}

fn sim_row(t: f64, z: &ZState, winding: f64) -> Vec<f64> {
    let (x, y, phi, psi) = (z.x(), z.y(), z.phi(), z.psi());
    let u = if z.z1.norm() > 0.0 { z.z1 / z.z1.norm() } else { Planar::new(f64::NAN, f64::NAN) };
    vec![t, x.x, x.y, y.x, y.y, u.x, u.y, phi.x, phi.y, psi.x, psi.y, x.norm(), winding]
}

/// Cumulative winding of the control at each trajectory node.
fn node_windings(traj: &Trajectory) -> Vec<f64> {
    let mut out = vec![0.0; traj.len()];
    let mut acc = 0.0;
    for i in 1..traj.len() {
        let (t0, t1) = (traj.times()[i - 1], traj.times()[i]);
        let f = |t: f64| {
            let y = traj.interpolate(t).expect("node winding probe");
            ZState::from_slice(&y).z1
        };
        if let Ok(d) = winding_number_fn(&f, t0, t1) {
            acc += d;
        }
        out[i] = acc;
    }
    out
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<i32> {
    let z0 = initial_state(cfg)?;
    let k = cfg.gain();
    let opts = ClosedLoopOptions {
        rtol: cfg.rtol,
        atol: spiralctl_core::numkit::AbsTol::Scalar(cfg.atol),
        stop_radius: cfg.stop_radius,
        singular_threshold: cfg.singular_threshold,
        max_time: cfg.max_time,
    };
    let run = simulate_closed_loop(&z0, &k, &opts).map_err(|e| anyhow!("{e}"))?;
    let traj = &run.trajectory;

    let mut header: Vec<&str> = SIM_HEADER.to_vec();
    if cfg.blown {
        header.extend_from_slice(&BLOWN_EXTRA);
    }
    let mut csv = CsvWriter::new(open_out(cfg.out.as_deref())?, &header)?;
    let windings = node_windings(traj);
    for (i, st) in traj.states().iter().enumerate() {
        let z = ZState::from_slice(st);
        let mut row = sim_row(traj.times()[i], &z, windings[i]);
        if cfg.blown {
            match blow_up(&z) {
                Ok(b) => row.extend_from_slice(&b.to_array()),
                Err(_) => row.extend_from_slice(&[f64::NAN; 9]),
            }
        }
        csv.row(&row)?;
    }

    let total_cost = cost(traj);
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "problem": cfg.problem,
        "hit": run.hit_time,
        "cost": total_cost,
        "stop": match run.stop {
            ClosedLoopStop::RadiusReached => "radius",
            ClosedLoopStop::ClosestApproach => "closest-approach",
            ClosedLoopStop::Escaped => "escaped",
        },
        "nodes": traj.len(),
        "winding_u": windings.last().copied().unwrap_or(0.0),
        "out": cfg.out,
    });
    println!("{summary}");
    Ok(0)
}

pub fn cmd_spiral(cfg: &RunConfig) -> Result<i32> {
    let fam = cfg.family();
    let n = 512usize;
    let w_min_frac = 1e-6_f64;
    let mut csv = CsvWriter::new(open_out(cfg.out.as_deref())?, &SIM_HEADER)?;
    let mut acc = 0.0;
    let mut t_prev = 0.0;
    for i in 0..n {
        let w = fam.t_star * w_min_frac.powf(i as f64 / (n - 1) as f64);
        let t = fam.t_star - w;
        let z = spiral_state(t, &fam).map_err(|e| anyhow!("{e}"))?;
        if i > 0 {
            let f = |tt: f64| spiral_control(tt, &fam).unwrap();
            acc += winding_number_fn(&f, t_prev, t).map_err(|e| anyhow!("{e}"))?;
        }
        t_prev = t;
        csv.row(&sim_row(t, &z, acc))?;
    }
    let a = fam.a;
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "spiral",
        "t_star": fam.t_star,
        "alpha": fam.alpha,
        "constants": a.iter().map(|c| json!({"re": c.re, "im": c.im})).collect::<Vec<_>>(),
        "winding_u": acc,
        "rows": n,
        "out": cfg.out,
    });
    println!("{summary}");
    Ok(0)
}

pub fn cmd_blowup(cfg: &RunConfig) -> Result<i32> {
    let fam = cfg.family();
    let k = cfg.gain();
    // seed depth tied to the requested span so the run covers scales from
    // t_star e^{-s_span} out to about t_star
    let w0 = cfg.t_star * (-cfg.s_span).exp();
    let seed = seed_near_origin(cfg.t_star, w0, &fam, &k);
    let b0 = blow_up(&seed).map_err(|e| anyhow!("{e}"))?;
    let field = BlownField::new(k);
    let traj = integrate_adaptive(&field, &b0.to_array(), (0.0, -cfg.s_span), cfg.rtol, cfg.atol)
        .map_err(|e| anyhow!("{e}"))?;
    let table = reparam_t_of_s(&traj);

    let header =
        ["s", "mu", "zt11", "zt12", "zt21", "zt22", "zt31", "zt32", "zt41", "zt42", "t", "pi_residual"];
    let mut csv = CsvWriter::new(open_out(cfg.out.as_deref())?, &header)?;
    let mut max_pi: f64 = 0.0;
    for (i, st) in traj.states().iter().enumerate() {
        let b = BlownState::from_slice(st);
        let s_hat = traj.times()[i] + cfg.s_span; // 0 at the outer end
        let pi = pi_residual(&b);
        max_pi = max_pi.max(pi.abs());
        let mut row = vec![s_hat];
        row.extend_from_slice(&b.to_array());
        row.push(table.t[i]);
        row.push(pi);
        csv.row(&row)?;
    }
    // decay-rate fit over the deeper half of the run
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &s) in traj.times().iter().enumerate() {
        let s_hat = s + cfg.s_span;
        if s_hat >= cfg.s_span / 2.0 {
            xs.push(s_hat);
            ys.push(traj.state(i)[0].ln());
        }
    }
    let (slope, kappa) = if xs.len() >= 2 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        (slope, (my - slope * mx).exp())
    } else {
        (f64::NAN, f64::NAN)
    };
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "blowup",
        "s_span": cfg.s_span,
        "mu_seed": b0.mu,
        "log_mu_slope": slope,
        "kappa": kappa,
        "max_pi_residual": max_pi,
        "nodes": traj.len(),
        "out": cfg.out,
    });
    println!("{summary}");
    Ok(0)
}

pub fn cmd_floquet(cfg: &RunConfig) -> Result<i32> {
    let report = if cfg.reference_matrix {
        floquet::analyze_reference()
    } else {
        floquet::reconstruct_j(&cfg.gain(), cfg.samples)
    };
    let report = match report {
        Ok(r) => r,
        Err(floquet::FloquetError::TransformNotConstant { residual }) => {
            eprintln!("transform not constant for either frame orientation (residual {residual:.3e})");
            return Ok(4);
        }
        Err(e) => return Err(anyhow!("{e}")),
    };
    let payload = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "floquet",
        "report": report,
        "reference_exponents": checks::reference_exponent_pairs()
            .iter()
            .map(|(re, im)| json!({"re": re, "im": im}))
            .collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&payload)?;
    if let Some(path) = &cfg.out {
        std::fs::write(path, &text)?;
    }
    println!("{text}");
    Ok(0)
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<i32> {
    let results = checks::run_all(cfg.only.as_deref());
    if results.is_empty() {
        eprintln!("no checks match group {:?}", cfg.only);
        return Ok(2);
    }
    let mut all_ok = true;
    for r in &results {
        let status = if r.passed { "ok  " } else { "FAIL" };
        println!("{status}  {:2}  [{}] {} ({} ms)", r.id, r.group, r.name, r.runtime_ms);
        println!("        {}", r.detail);
        all_ok &= r.passed;
    }
    println!(
        "{} of {} checks passed",
        results.iter().filter(|r| r.passed).count(),
        results.len()
    );
    Ok(if all_ok { 0 } else { 1 })
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<i32> {
    let threads = cfg
        .threads
        .or_else(|| {
            std::env::var("SPIRALCTL_THREADS").ok().and_then(|v| v.parse().ok())
        })
        .unwrap_or(0); // 0 lets the pool pick
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if threads > 0 {
            b = b.num_threads(threads);
        }
        b.build().context("building the sweep thread pool")?
    };

    // deterministic row order: cartesian grid indexed by (lambda, angle)
    let grid: Vec<(usize, f64, f64)> = cfg
        .lambdas
        .iter()
        .flat_map(|&l| cfg.zeta_angles.iter().map(move |&a| (l, a)))
        .enumerate()
        .map(|(i, (l, a))| (i, l, a))
        .collect();

    struct Row {
        idx: usize,
        lambda: f64,
        angle: f64,
        hit: f64,
        ratio: f64,
        cost: f64,
        winding: f64,
    }

    let run_one = |lambda: f64, angle: f64| -> Result<(f64, f64, f64, f64)> {
        let mut sub = cfg.clone();
        sub.zeta_angle = angle;
        sub.scale = cfg.scale * lambda;
        let z0 = initial_state(&sub)?;
        let opts = ClosedLoopOptions {
            rtol: cfg.rtol,
            atol: spiralctl_core::numkit::AbsTol::Scalar(cfg.atol),
            stop_radius: cfg.stop_radius,
            singular_threshold: cfg.singular_threshold,
            max_time: cfg.max_time,
        };
        let run = simulate_closed_loop(&z0, &sub.gain(), &opts).map_err(|e| anyhow!("{e}"))?;
        let hit = run.hit_time.ok_or_else(|| anyhow!("no hit"))?;
        let ratio = hitting_ratio(&z0.x(), &z0.y(), hit);
        let c = cost(&run.trajectory);
        let w = node_windings(&run.trajectory).last().copied().unwrap_or(0.0);
        Ok((hit, ratio, c, w))
    };

    use rayon::prelude::*;
    let mut rows: Vec<Row> = pool.install(|| {
        grid.par_iter()
            .map(|&(idx, lambda, angle)| match run_one(lambda, angle) {
                Ok((hit, ratio, cost, winding)) => Row { idx, lambda, angle, hit, ratio, cost, winding },
                Err(_) => Row {
                    idx,
                    lambda,
                    angle,
                    hit: f64::NAN,
                    ratio: f64::NAN,
                    cost: f64::NAN,
                    winding: f64::NAN,
                },
            })
            .collect()
    });
    rows.sort_by_key(|r| r.idx);

    let header = ["lambda", "zeta_angle", "t_star", "hit_time", "hitting_ratio", "cost", "winding_u"];
    let mut csv = CsvWriter::new(open_out(cfg.out.as_deref())?, &header)?;
    let mut ok_rows = 0usize;
    for r in &rows {
        if r.hit.is_finite() {
            ok_rows += 1;
        }
        csv.row(&[r.lambda, r.angle, cfg.t_star, r.hit, r.ratio, r.cost, r.winding])?;
    }
    let hits: Vec<f64> = rows.iter().map(|r| r.hit).collect();
    let ratios: Vec<f64> = rows.iter().filter(|r| r.ratio.is_finite()).map(|r| r.ratio).collect();
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "sweep",
        "rows": rows.len(),
        "ok_rows": ok_rows,
        "hit_times": hits.iter().map(|h| fmt_f64(*h)).collect::<Vec<_>>(),
        "hitting_ratio_min": ratios.iter().cloned().fold(f64::INFINITY, f64::min),
        "hitting_ratio_max": ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        "out": cfg.out,
    });
    println!("{summary}");
    Ok(if ok_rows == 0 { 3 } else { 0 })
}
