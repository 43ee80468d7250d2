//! `spiralctl`: simulate and verify stabilizing extremals of the inverted
//! spherical pendulum under a bounded planar force.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 numeric failure, 4 co-rotating frame not constant.

mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "spiralctl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each overrides the matching config key.
#[derive(Args, Clone, Default)]
struct Common {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Problem selector: "p1" or "p2".
    #[arg(long)]
    problem: Option<String>,
    /// Diagonal gain entries, e.g. --k 2,2.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<f64>>,
    /// Pendulum parameters M,m,l,g (sets the gain via the stiffness).
    #[arg(long, value_delimiter = ',')]
    pendulum: Option<Vec<f64>>,
    /// Hitting time of the seeding family.
    #[arg(long)]
    t_star: Option<f64>,
    /// Seeding depth.
    #[arg(long)]
    eps: Option<f64>,
    /// Family rotation angle.
    #[arg(long)]
    zeta_angle: Option<f64>,
    /// Family reflection flag.
    #[arg(long)]
    reflect: bool,
    /// Exponent branch: "plus" or "minus".
    #[arg(long)]
    alpha_branch: Option<String>,
    /// Weighted dilation of the initial state.
    #[arg(long)]
    scale: Option<f64>,
    /// Explicit initial state (8 comma-separated values).
    #[arg(long, value_delimiter = ',')]
    z0: Option<Vec<f64>>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    stop_radius: Option<f64>,
    #[arg(long)]
    singular_threshold: Option<f64>,
    #[arg(long)]
    max_time: Option<f64>,
    /// Output path for the CSV/JSON artifact.
    #[arg(long)]
    out: Option<String>,
}

impl Common {
    fn apply(&self, cfg: &mut RunConfig) -> anyhow::Result<()> {
        if let Some(v) = &self.problem {
            cfg.problem = v.clone();
        }
        if let Some(v) = &self.k {
            anyhow::ensure!(v.len() == 2, "--k needs exactly 2 values, got {}", v.len());
            cfg.k = Some([v[0], v[1]]);
        }
        if let Some(v) = &self.pendulum {
            anyhow::ensure!(v.len() == 4, "--pendulum needs exactly 4 values, got {}", v.len());
            cfg.pendulum = Some(spiralctl_core::pendulum::PendulumParams {
                base_mass: v[0],
                bob_mass: v[1],
                length: v[2],
                gravity: v[3],
            });
        }
        if let Some(v) = self.t_star {
            cfg.t_star = v;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.zeta_angle {
            cfg.zeta_angle = v;
        }
        if self.reflect {
            cfg.zeta_reflect = true;
        }
        if let Some(v) = &self.alpha_branch {
            cfg.alpha_branch = v.clone();
        }
        if let Some(v) = self.scale {
            cfg.scale = v;
        }
        if let Some(v) = &self.z0 {
            anyhow::ensure!(v.len() == 8, "--z0 needs exactly 8 values, got {}", v.len());
            let mut z = [0.0; 8];
            z.copy_from_slice(v);
            cfg.z0 = Some(z);
        }
        if let Some(v) = self.rtol {
            cfg.rtol = v;
        }
        if let Some(v) = self.atol {
            cfg.atol = v;
        }
        if let Some(v) = self.stop_radius {
            cfg.stop_radius = v;
        }
        if let Some(v) = self.singular_threshold {
            cfg.singular_threshold = v;
        }
        if let Some(v) = self.max_time {
            cfg.max_time = Some(v);
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Closed-loop simulation of an extremal; CSV trajectory + JSON summary.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Append blown-cylinder columns to the CSV.
        #[arg(long)]
        blown: bool,
    },
    /// Sample the closed-form spiral family; CSV trajectory + JSON summary.
    Spiral {
        #[command(flatten)]
        common: Common,
    },
    /// Integrate the blown-up flow backward from a near-origin seed.
    Blowup {
        #[command(flatten)]
        common: Common,
        /// Slow-time span to cover.
        #[arg(long)]
        s_span: Option<f64>,
    },
    /// Reconstruct the constant variational matrix and report its spectrum.
    Floquet {
        #[command(flatten)]
        common: Common,
        /// Phase samples per period.
        #[arg(long)]
        samples: Option<usize>,
        /// Analyze the hard-coded reference matrix instead.
        #[arg(long)]
        reference_matrix: bool,
    },
    /// Run the verification suite; exit 0 iff every check passes.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Only run checks of this group (floquet, spiral, blowup, pmp, pendulum).
        #[arg(long)]
        only: Option<String>,
    },
    /// Grid of closed-loop runs over dilations and rotations; CSV table.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Weighted dilations, e.g. --lambdas 1,2,4.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        /// Family rotation angles.
        #[arg(long, value_delimiter = ',')]
        zeta_angles: Option<Vec<f64>>,
        /// Worker thread budget (default: SPIRALCTL_THREADS or all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn build_config(common: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    common.apply(&mut cfg).map_err(|e| anyhow::anyhow!("configuration error: {e}"))?;
    Ok(cfg)
}

fn run() -> anyhow::Result<i32> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { common, blown } => {
            let mut cfg = build_config(&common)?;
            cfg.blown |= blown;
            if let Err(e) = cfg.validate() {
                eprintln!("configuration error: {e}");
                return Ok(2);
            }
            commands::cmd_simulate(&cfg)
        }
        Command::Spiral { common } => {
            let mut cfg = build_config(&common)?;
            cfg.problem = "p2".into();
            cfg.k = None;
            cfg.pendulum = None;
            if let Err(e) = cfg.validate() {
                eprintln!("configuration error: {e}");
                return Ok(2);
            }
            commands::cmd_spiral(&cfg)
        }
        Command::Blowup { common, s_span } => {
            let mut cfg = build_config(&common)?;
            if let Some(v) = s_span {
                cfg.s_span = v;
            }
            if let Err(e) = cfg.validate() {
                eprintln!("configuration error: {e}");
                return Ok(2);
            }
            commands::cmd_blowup(&cfg)
        }
        Command::Floquet { common, samples, reference_matrix } => {
            let mut cfg = build_config(&common)?;
            if let Some(v) = samples {
                cfg.samples = v;
            }
            cfg.reference_matrix |= reference_matrix;
            if cfg.problem == "p1" && cfg.k.is_none() && cfg.pendulum.is_none() {
                cfg.k = Some([2.0, 2.0]);
            }
            if let Err(e) = cfg.validate() {
                eprintln!("configuration error: {e}");
                return Ok(2);
            }
            commands::cmd_floquet(&cfg)
        }
        Command::Verify { common, only } => {
            let mut cfg = build_config(&common)?;
            if let Some(v) = only {
                cfg.only = Some(v);
            }
            commands::cmd_verify(&cfg)
        }
        Command::Sweep { common, lambdas, zeta_angles, threads } => {
            let mut cfg = build_config(&common)?;
            if let Some(v) = lambdas {
                cfg.lambdas = v;
            }
            if let Some(v) = zeta_angles {
                cfg.zeta_angles = v;
            }
            if let Some(v) = threads {
                cfg.threads = Some(v);
            }
            if let Err(e) = cfg.validate() {
                eprintln!("configuration error: {e}");
                return Ok(2);
            }
            commands::cmd_sweep(&cfg)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            // configuration problems (file/JSON) exit 2; numeric failures 3
            let text = format!("{e:#}");
            eprintln!("error: {text}");
            if text.contains("config") || text.contains("parsing") {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
