//! Command-line driver.
//!
//! Subcommands: `list` (print the registry), `localize <model>` (both sides
//! and the comparison), `proofpath <model>` (the deformation suite),
//! `verify <model>` (everything). Reports are deterministic for a fixed
//! seed and node configuration; the parallelism degree changes only wall
//! time, never bytes.

use std::io::Write as _;

use clap::{Args, Parser, Subcommand};

use crate::ad::{DiffMode, FD_DEFAULT_STEP};
use crate::localization::{checks_ok, RunOptions, Tolerances, VerificationReport};
use crate::models;
use crate::proofpath::Schedules;

#[derive(Parser, Debug)]
#[command(name = "eqloc", version, about = "Numerical checks of fixed-point localization for equivariant integrals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunFlags {
    /// Model name (see `list`).
    model: String,
    /// Per-axis quadrature node override.
    #[arg(long)]
    nodes: Option<usize>,
    /// Half-width of the fixed-point cubes.
    #[arg(long, default_value_t = 0.3)]
    eps: f64,
    /// Deformation schedule as comma-separated values; 0 is prepended when
    /// missing.
    #[arg(long, value_delimiter = ',')]
    r_schedule: Option<Vec<f64>>,
    /// Relative tolerance override for the two-sided comparison.
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Sampling seed recorded in the report.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report document to this path (default: stdout).
    #[arg(long)]
    report: Option<std::path::PathBuf>,
    /// Use central finite differences instead of dual-number derivatives.
    #[arg(long)]
    fd_fallback: bool,
    /// Worker threads for quadrature (the result does not depend on it).
    #[arg(long)]
    parallel: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the model registry.
    List,
    /// Run the hypothesis checks and compare both sides.
    Localize(RunFlags),
    /// Run the deformation suite.
    Proofpath(RunFlags),
    /// Run everything.
    Verify(RunFlags),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Localize,
    Proofpath,
    Verify,
}

/// Resolved run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mode: Mode,
    pub model: String,
    pub nodes: Option<usize>,
    pub eps: f64,
    pub deformation_schedule: Option<Vec<f64>>,
    pub rel_tol: Option<f64>,
    pub seed: u64,
    pub fd_fallback: bool,
    pub threads: usize,
}

impl RunConfig {
    pub fn new(mode: Mode, model: &str) -> RunConfig {
        RunConfig {
            mode,
            model: model.to_string(),
            nodes: None,
            eps: 0.3,
            deformation_schedule: None,
            rel_tol: None,
            seed: 0,
            fd_fallback: false,
            threads: default_threads(),
        }
    }
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl RunFlags {
    fn into_config(self, mode: Mode) -> crate::Result<RunConfig> {
        if self.eps <= 0.0 {
            return Err(crate::Error::InvalidConfig("eps must be positive".into()));
        }
        if let Some(n) = self.nodes {
            if n < 2 {
                return Err(crate::Error::InvalidConfig("nodes must be at least 2".into()));
            }
        }
        if let Some(t) = self.rel_tol {
            if t <= 0.0 {
                return Err(crate::Error::InvalidConfig("rel-tol must be positive".into()));
            }
        }
        let deformation_schedule = match self.r_schedule {
            None => None,
            Some(mut rs) => {
                rs.retain(|r| r.is_finite());
                rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                rs.dedup();
                if rs.iter().any(|r| *r < 0.0) {
                    return Err(crate::Error::InvalidConfig("schedule entries must be nonnegative".into()));
                }
                if rs.first() != Some(&0.0) {
                    rs.insert(0, 0.0);
                }
                Some(rs)
            }
        };
        Ok(RunConfig {
            mode,
            model: self.model,
            nodes: self.nodes,
            eps: self.eps,
            deformation_schedule,
            rel_tol: self.rel_tol,
            seed: self.seed,
            fd_fallback: self.fd_fallback,
            threads: self.parallel.unwrap_or_else(default_threads).max(1),
        })
    }
}

/// Execute a resolved configuration and return the report.
pub fn execute(config: &RunConfig) -> crate::Result<(VerificationReport, bool)> {
    let model = models::build(&config.model)?;
    let mut tols = Tolerances::for_dim(model.dim);
    if let Some(rel) = config.rel_tol {
        tols = tols.with_rel_tol(rel);
    }
    let mode = if config.fd_fallback {
        DiffMode::FiniteDifference { step: FD_DEFAULT_STEP }
    } else {
        DiffMode::Forward
    };
    let opts = RunOptions {
        threads: config.threads,
        mode,
        nodes_override: config.nodes,
        seed: config.seed,
        ..Default::default()
    };
    let mut schedules = Schedules {
        cube_half_width: config.eps,
        ..Default::default()
    };
    if let Some(rs) = &config.deformation_schedule {
        schedules.deformation = rs.clone();
    }

    let mut report = crate::localization::verify(&model, &tols, &opts);
    if config.mode != Mode::Localize {
        let metric_ok = report
            .check("metric_invariance")
            .and_then(|c| c.pass)
            .unwrap_or(false);
        let closed_ok = report
            .check("closedness")
            .and_then(|c| c.pass)
            .unwrap_or(false);
        let hypotheses = crate::proofpath::Hypotheses { closed: closed_ok, metric_invariant: metric_ok };
        let path = crate::proofpath::run(&model, &schedules, &opts, hypotheses)?;
        report.deformation = path.deformation;
        report.tail = path.tail;
        report.limits = path.limits;
        report.partition_residual = path.partition_residual;
        report.checks.extend(path.checks);
    }

    // Echoed configuration (excluding the parallelism degree: it must not
    // influence report bytes).
    report.config_lines = vec![
        ("mode".into(), format!("{:?}", config.mode).to_lowercase()),
        ("nodes".into(), config.nodes.map_or("default".into(), |n| n.to_string())),
        ("eps".into(), format!("{}", config.eps)),
        (
            "r_schedule".into(),
            schedules
                .deformation
                .iter()
                .map(|r| format!("{r}"))
                .collect::<Vec<_>>()
                .join(","),
        ),
        ("rel_tol".into(), format!("{:e}", tols.rel_tol)),
        ("derivatives".into(), if config.fd_fallback { "finite_difference".into() } else { "forward".into() }),
    ];

    let ok = checks_ok(&model, &report);
    Ok((report, ok))
}

fn print_summary(report: &VerificationReport, ok: bool) {
    let mut err = std::io::stderr().lock();
    for c in &report.checks {
        let status = match c.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "skip",
        };
        let _ = writeln!(
            err,
            "{status}  {name}: value {value:.3e} (tolerance {tol:.3e})",
            name = c.name,
            value = c.value,
            tol = c.tolerance
        );
    }
    if let (Some(l), Some(r)) = (&report.lhs, report.rhs) {
        let _ = writeln!(err, "lhs = {:.12e}, rhs = {:.12e}", l.value, r);
    }
    let _ = writeln!(err, "{}: {}", report.model, if ok { "OK" } else { "CHECKS FAILED" });
}

/// Entry point used by the binary. Returns the process exit code.
pub fn run_main() -> i32 {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for name in models::registry() {
                println!("{name}");
            }
            0
        }
        Command::Localize(flags) => run_command(flags, Mode::Localize),
        Command::Proofpath(flags) => run_command(flags, Mode::Proofpath),
        Command::Verify(flags) => run_command(flags, Mode::Verify),
    }
}

fn run_command(flags: RunFlags, mode: Mode) -> i32 {
    let report_path = flags.report.clone();
    let config = match flags.into_config(mode) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match execute(&config) {
        Ok((report, ok)) => {
            let doc = crate::report::render(&report);
            match &report_path {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, &doc) {
                        eprintln!("error: cannot write report to {}: {e}", path.display());
                        return 2;
                    }
                }
                None => print!("{doc}"),
            }
            print_summary(&report, ok);
            if ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                crate::Error::UnknownModel(_) | crate::Error::InvalidConfig(_) => 2,
                _ => 1,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn localize_sphere_ok() {
        let config = RunConfig::new(Mode::Localize, "sphere");
        let (report, ok) = execute(&config).unwrap();
        assert!(ok, "checks: {:?}", report.checks);
        assert!(report.deformation.is_empty(), "localize runs no deformation");
    }

    #[test]
    fn unknown_model_is_config_error() {
        let config = RunConfig::new(Mode::Localize, "not_a_model");
        assert!(matches!(execute(&config), Err(crate::Error::UnknownModel(_))));
    }

    #[test]
    fn reports_do_not_depend_on_thread_count() {
        let mut a = RunConfig::new(Mode::Localize, "sphere_exp");
        a.threads = 1;
        let mut b = a.clone();
        b.threads = 8;
        let (ra, _) = execute(&a).unwrap();
        let (rb, _) = execute(&b).unwrap();
        assert_eq!(crate::report::render(&ra), crate::report::render(&rb));
    }
}
