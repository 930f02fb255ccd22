//! `singlab`: run value-distribution experiments near the singular point
//! `z = 0` and write JSON/CSV reports.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use singlab_core::report::RunConfig;
use singlab_core::Error;

#[derive(Parser, Debug)]
#[command(name = "singlab", version, about = "Value distribution near an isolated singular point")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Test function, e.g. "exp(z^2 + z^-2)".
    #[arg(long = "fn", value_name = "EXPR", allow_hyphen_values = true)]
    pub func: Option<String>,
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for reports (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub rmax: Option<f64>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Working precision in bits.
    #[arg(long)]
    pub bits: Option<u32>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// m₀, N₀, T₀ and ln M₀ at one radius or along the schedule.
    Nevanlinna {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        r: Option<f64>,
        /// Outer radius R′ of the counting function.
        #[arg(long, default_value_t = 0.9)]
        outer: f64,
    },
    /// Order (and type at level 1) from a radius sweep.
    Order {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "T")]
        kind: String,
        #[arg(long, default_value_t = 1)]
        level: u32,
        #[arg(long, default_value_t = 0.9)]
        outer: f64,
    },
    /// Type for a given (or estimated) order.
    Type {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "T")]
        kind: String,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 0.9)]
        outer: f64,
    },
    /// Compare |f^(k)/f| with a growth bound along the schedule.
    #[command(name = "logderiv-check")]
    LogderivCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value = "coro1")]
        bound: String,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        /// Iteration level n of CORO2.
        #[arg(long, default_value_t = 2)]
        level: u32,
        /// Restrict to one ray instead of the circle maximum.
        #[arg(long)]
        phi: Option<f64>,
        /// Fail (exit 3) when the exceptional log measure exceeds this.
        #[arg(long)]
        max_measure: Option<f64>,
        #[arg(long, default_value_t = 0.9)]
        outer: f64,
    },
    /// The indicator δ_a(φ), or the sandwich check for A·exp(a/zⁿ) when
    /// --phi and --eps are given (--fn is the prefactor A, default 1).
    Indicator {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[arg(long, allow_hyphen_values = true)]
        phi: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 360)]
        angles: usize,
    },
    /// Central index of the principal part and its iterated order.
    #[command(name = "central-index")]
    CentralIndex {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2048)]
        trunc: usize,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, default_value_t = 1)]
        level: u32,
    },
    /// Wiman-Valiron ratio ρ_j along the schedule.
    #[command(name = "wv-check")]
    WvCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        j: usize,
        #[arg(long, default_value_t = 2048)]
        trunc: usize,
    },
    /// Integrate a linear ODE along rays and estimate the hyper-order.
    #[command(name = "ode-growth")]
    OdeGrowth {
        #[command(flatten)]
        common: Common,
        /// "k;A0;A1[;A2]".
        #[arg(long)]
        eq: String,
        /// Comma-separated ray angles.
        #[arg(long, allow_hyphen_values = true)]
        rays: Option<String>,
        #[arg(long, default_value_t = 0.5)]
        rstart: f64,
        #[arg(long, default_value_t = 0.04)]
        rend: f64,
        #[arg(long, default_value_t = 1e-10)]
        rtol: f64,
        #[arg(long, default_value_t = 60)]
        samples: usize,
        /// Repeat at half tolerance and doubled sampling; exit 3 when the
        /// two estimates differ by more than 0.05.
        #[arg(long)]
        refine: bool,
    },
    /// Order reduction with known solutions.
    Reduce {
        #[command(flatten)]
        common: Common,
        /// Solutions separated by ';'.
        #[arg(long)]
        solutions: String,
        /// Equation; built from the solutions when omitted.
        #[arg(long)]
        eq: Option<String>,
        #[arg(long, default_value_t = 1)]
        q: usize,
    },
    /// Re-render a JSON report as CSV.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Outcome of a command that ran to completion.
pub enum Outcome {
    Ok,
    /// A checked contract did not hold.
    Violated,
    /// Completed, but some part hit a numeric failure.
    Numeric,
}

pub fn resolve_config(c: &Common) -> singlab_core::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = c.rmax {
        cfg.schedule.r_max = v;
    }
    if let Some(v) = c.ratio {
        cfg.schedule.ratio = v;
    }
    if let Some(v) = c.count {
        cfg.schedule.count = v;
    }
    if let Some(v) = c.bits {
        cfg.precision.work_bits = v;
    }
    if let Some(v) = &c.out {
        cfg.output_dir = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_for(e: &Error) -> u8 {
    if e.is_numeric() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let res = match cli.cmd {
        Cmd::Nevanlinna { common, r, outer } => commands::nevanlinna(&common, r, outer),
        Cmd::Order {
            common,
            kind,
            level,
            outer,
        } => commands::order(&common, &kind, level, outer),
        Cmd::Type {
            common,
            kind,
            sigma,
            outer,
        } => commands::type_(&common, &kind, sigma, outer),
        Cmd::LogderivCheck {
            common,
            k,
            bound,
            alpha,
            sigma,
            eps,
            level,
            phi,
            max_measure,
            outer,
        } => commands::logderiv_check(
            &common,
            k,
            &commands::BoundArgs {
                name: bound,
                alpha,
                sigma,
                eps,
                level,
            },
            phi,
            max_measure,
            outer,
        ),
        Cmd::Indicator {
            common,
            a,
            n,
            phi,
            eps,
            angles,
        } => commands::indicator(&common, &a, n, phi, eps, angles),
        Cmd::CentralIndex { common, trunc, r, level } => commands::central_index(&common, trunc, r, level),
        Cmd::WvCheck { common, j, trunc } => commands::wv_check(&common, j, trunc),
        Cmd::OdeGrowth {
            common,
            eq,
            rays,
            rstart,
            rend,
            rtol,
            samples,
            refine,
        } => commands::ode_growth(
            &common,
            &eq,
            rays.as_deref(),
            rstart,
            rend,
            rtol,
            samples,
            refine,
        ),
        Cmd::Reduce {
            common,
            solutions,
            eq,
            q,
        } => commands::reduce(&common, &solutions, eq.as_deref(), q),
        Cmd::Report { input, out } => commands::rerender(&input, out.as_deref()),
    };
    match res {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Violated) => ExitCode::from(3),
        Ok(Outcome::Numeric) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
