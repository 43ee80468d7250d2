//! Run configuration: JSON file merged with command-line overrides.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use spiralctl_core::pendulum::PendulumParams;
use spiralctl_core::pmp::{SINGULAR_THRESHOLD, STOP_RADIUS};
use spiralctl_core::spiral::{AlphaBranch, SpiralFamily, Zeta};
use spiralctl_core::types::KMatrix;
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// "p1" (general gain) or "p2" (model problem, zero gain).
    pub problem: String,
    /// Diagonal gain entries; exclusive with `pendulum` for p1.
    pub k: Option<[f64; 2]>,
    /// Physical parameters; the gain becomes `k = g(M+m)/(Ml)` on both axes.
    pub pendulum: Option<PendulumParams>,
    /// Hitting time of the seeding family.
    pub t_star: f64,
    /// Seeding depth for the perturbed problem (seed placed at `T - eps`).
    pub eps: f64,
    /// Rotation angle of the family.
    pub zeta_angle: f64,
    /// Reflection flag of the family (mirrors the exponent branch).
    pub zeta_reflect: bool,
    /// "plus" or "minus" branch of the spiral exponent.
    pub alpha_branch: String,
    /// Weighted dilation applied to the initial state.
    pub scale: f64,
    /// Explicit initial extremal state (overrides family seeding).
    pub z0: Option<[f64; 8]>,
    pub rtol: f64,
    pub atol: f64,
    pub stop_radius: f64,
    pub singular_threshold: f64,
    pub max_time: Option<f64>,
    /// Append blown-cylinder columns to the simulate CSV.
    pub blown: bool,
    /// Output path for CSV/JSON artifacts; stdout summary is always printed.
    pub out: Option<String>,
    /// Phase samples per period for the floquet command.
    pub samples: usize,
    /// Analyze the hard-coded reference matrix instead of reconstructing.
    pub reference_matrix: bool,
    /// Slow-time span for the blowup command (integrated backward).
    pub s_span: f64,
    /// Verify-group filter.
    pub only: Option<String>,
    /// Sweep grid: weighted dilations.
    pub lambdas: Vec<f64>,
    /// Sweep grid: family rotation angles.
    pub zeta_angles: Vec<f64>,
    /// Worker threads for the sweep (default: SPIRALCTL_THREADS or all).
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: "p2".into(),
            k: None,
            pendulum: None,
            t_star: 1.0,
            eps: 1e-3,
            zeta_angle: 0.0,
            zeta_reflect: false,
            alpha_branch: "plus".into(),
            scale: 1.0,
            z0: None,
            rtol: 1e-12,
            atol: 1e-16,
            stop_radius: STOP_RADIUS,
            singular_threshold: SINGULAR_THRESHOLD,
            max_time: None,
            blown: false,
            out: None,
            samples: 32,
            reference_matrix: false,
            s_span: 10.0,
            only: None,
            lambdas: vec![1.0],
            zeta_angles: vec![0.0],
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                let cfg: RunConfig = serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))?;
                Ok(cfg)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.problem.as_str() {
            "p1" => {
                match (&self.k, &self.pendulum) {
                    (Some(_), Some(_)) => bail!("give exactly one of `k` or `pendulum`, not both"),
                    (None, None) => bail!("problem p1 needs `k` or `pendulum`"),
                    _ => {}
                }
                if let Some(p) = &self.pendulum {
                    p.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
                }
                if let Some([k1, k2]) = self.k {
                    if k1 == 0.0 || k2 == 0.0 {
                        bail!("problem p1 needs a nondegenerate diagonal gain");
                    }
                }
            }
            "p2" => {
                if self.k.is_some() && self.k != Some([0.0, 0.0]) {
                    bail!("problem p2 has zero gain; drop the `k` entry");
                }
                if self.pendulum.is_some() {
                    bail!("problem p2 has zero gain; drop the `pendulum` entry");
                }
            }
            other => bail!("unknown problem {other:?} (expected \"p1\" or \"p2\")"),
        }
        if !(self.t_star > 0.0) {
            bail!("t_star must be positive");
        }
        if !(self.eps > 0.0 && self.eps < self.t_star) {
            bail!("eps must lie in (0, t_star)");
        }
        for (name, v) in [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("stop_radius", self.stop_radius),
            ("singular_threshold", self.singular_threshold),
        ] {
            if !(v > 0.0) {
                bail!("{name} must be positive");
            }
        }
        match self.alpha_branch.as_str() {
            "plus" | "minus" => {}
            other => bail!("unknown alpha branch {other:?} (expected \"plus\" or \"minus\")"),
        }
        if self.samples < 8 {
            bail!("floquet needs at least 8 samples per period");
        }
        Ok(())
    }

    pub fn gain(&self) -> KMatrix {
        if self.problem == "p2" {
            return KMatrix::zero();
        }
        if let Some(p) = &self.pendulum {
            KMatrix::uniform(p.stiffness())
        } else if let Some([k1, k2]) = self.k {
            KMatrix::diag(k1, k2)
        } else {
            KMatrix::zero()
        }
    }

    pub fn family(&self) -> SpiralFamily {
        let branch = if self.alpha_branch == "minus" { AlphaBranch::Minus } else { AlphaBranch::Plus };
        let zeta = Zeta { angle: self.zeta_angle, reflect: self.zeta_reflect };
        SpiralFamily::new(self.t_star, branch, zeta)
    }
}
