use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thinstrip::checks::lp_suite;
use thinstrip::config::{OutputConfig, RunConfig, SystemKind};
use thinstrip::convergence::refinement_gate;
use thinstrip::harness::{self, ExportFormat, EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_OK};
use thinstrip::hydro::Physics;
use thinstrip::Error;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  configuration error (field-level message on stderr)
  3  blow-up: non-finite state or the stability limit collapsed
  4  analytic band exhausted
  5  acceptance failure (check suite or refinement gate)

Environment:
  THINSTRIP_WORKERS  number of worker threads for sweeps (default: all cores)";

#[derive(Parser)]
#[command(name = "thinstrip", version, about = "Hyperbolic Navier-Stokes in a thin strip and its hydrostatic limit", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one hydrostatic, anisotropic or paired simulation.
    Simulate(ConfigArgs),
    /// Paired runs over a list of ε and the fitted convergence order.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run the refinement gate at the largest ε first; stop if it fails.
        #[arg(long)]
        gate: bool,
    },
    /// Property suites.
    Check {
        #[arg(long, default_value = "lp")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Validate a configuration without running anything.
    Validate(ConfigArgs),
    /// Convert a run directory to a plot-ready bundle.
    Export {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["hydrostatic", "anisotropic", "paired"])]
    system: Option<String>,
    /// Catalog entry of the initial data.
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// One ε, or a comma-separated decreasing list for sweeps.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    /// Switch the advection terms off.
    #[arg(long)]
    linear: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    snapshot_every: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config { field: "config".into(), message: format!("{}: {e}", p.display()) })?;
                RunConfig::from_toml(&text)?
            }
            None => RunConfig::hydrostatic_default(),
        };
        if let Some(s) = &self.system {
            c.system = match s.as_str() {
                "anisotropic" => SystemKind::Anisotropic,
                "paired" => SystemKind::Paired,
                _ => SystemKind::Hydrostatic,
            };
        }
        if let Some(d) = &self.data {
            c.data.name = d.clone();
        }
        if self.amplitude.is_some() {
            c.data.amplitude = self.amplitude;
        }
        if let Some(t) = self.t_end {
            c.t_end = t;
        }
        if let Some(dt) = self.dt {
            c.dt = dt;
        }
        if let Some(nx) = self.nx {
            c.grid.nx = nx;
        }
        if let Some(ny) = self.ny {
            c.grid.ny = ny;
        }
        if let Some(list) = &self.eps {
            if list.len() == 1 {
                c.eps = Some(list[0]);
            } else {
                c.eps_list = Some(list.clone());
            }
        }
        if self.linear {
            c.physics = Physics::linear();
        }
        if self.out.is_some() || self.snapshot_every.is_some() {
            let mut o = c.output.clone().unwrap_or(OutputConfig {
                dir: "run".into(),
                snapshot_every: 0,
            });
            if let Some(p) = &self.out {
                o.dir = p.display().to_string();
            }
            if let Some(k) = self.snapshot_every {
                o.snapshot_every = k;
            }
            c.output = Some(o);
        }
        Ok(c)
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(harness::exit_code(e) as u8)
}

fn print_json<T: serde::Serialize>(v: &T) {
    match serde_json::to_string_pretty(v) {
        Ok(s) => println!("{s}"),
        Err(e) => eprintln!("error: {e}"),
    }
}

fn configure_workers() -> Result<(), Error> {
    if let Ok(v) = std::env::var("THINSTRIP_WORKERS") {
        let n: usize = v.parse().map_err(|_| Error::Config {
            field: "THINSTRIP_WORKERS".into(),
            message: format!("expected a positive integer, got {v:?}"),
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config { field: "THINSTRIP_WORKERS".into(), message: e.to_string() })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_workers() {
        return fail(&e);
    }
    match cli.command {
        Command::Simulate(args) => {
            let cfg = match args.resolve() {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let dir = harness::output_dir(&cfg);
            match harness::run(&cfg, dir.as_deref()) {
                Ok(out) => {
                    print_json(&out.report);
                    ExitCode::from(out.report.status.exit_code() as u8)
                }
                Err(e) => fail(&e),
            }
        }
        Command::Sweep { config, gate } => {
            let mut cfg = match config.resolve() {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            cfg.system = SystemKind::Paired;
            let eps_list = match (&cfg.eps_list, cfg.eps) {
                (Some(l), _) => l.clone(),
                (None, Some(e)) => vec![e],
                (None, None) => vec![0.1, 0.05, 0.025, 0.0125],
            };
            cfg.eps_list = Some(eps_list.clone());
            cfg.eps = None;
            if let Err(e) = cfg.validate() {
                return fail(&e);
            }
            let gate_report = if gate {
                match refinement_gate(&cfg, eps_list[0]) {
                    Ok(g) => {
                        eprintln!(
                            "refinement gate at eps = {}: relative change {:.3e} ({})",
                            g.eps,
                            g.relative_change,
                            if g.passed { "passed" } else { "failed" }
                        );
                        if !g.passed {
                            print_json(&g);
                            return ExitCode::from(EXIT_ACCEPTANCE as u8);
                        }
                        Some(g)
                    }
                    Err(e) => return fail(&e),
                }
            } else {
                None
            };
            let dir = harness::output_dir(&cfg);
            match harness::run_sweep(&cfg, &eps_list, gate_report, dir.as_deref()) {
                Ok(res) => {
                    print_json(&res);
                    ExitCode::from(EXIT_OK as u8)
                }
                Err(e) => fail(&e),
            }
        }
        Command::Check { suite, seed } => {
            if suite != "lp" {
                return fail(&Error::Config {
                    field: "suite".into(),
                    message: format!("unknown suite {suite:?}; available: lp"),
                });
            }
            match lp_suite(seed) {
                Ok(outs) => {
                    for o in &outs {
                        println!("{}", o.line());
                    }
                    if outs.iter().all(|o| o.passed) {
                        ExitCode::from(EXIT_OK as u8)
                    } else {
                        ExitCode::from(EXIT_ACCEPTANCE as u8)
                    }
                }
                Err(e) => fail(&e),
            }
        }
        Command::Validate(args) => {
            let cfg = match args.resolve() {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let diags = cfg.diagnostics();
            if diags.is_empty() {
                println!("valid");
                ExitCode::from(EXIT_OK as u8)
            } else {
                for d in &diags {
                    eprintln!("{d}");
                }
                ExitCode::from(EXIT_CONFIG as u8)
            }
        }
        Command::Export { run_dir, format } => {
            let fmt: ExportFormat = match format.parse() {
                Ok(f) => f,
                Err(e) => return fail(&e),
            };
            match harness::export(&run_dir, fmt) {
                Ok(files) => {
                    for f in files {
                        println!("{f}");
                    }
                    ExitCode::from(EXIT_OK as u8)
                }
                Err(e) => fail(&e),
            }
        }
    }
}
