//! `collapse`: runs the time-reversal protocol, the Wigner verification
//! suite and unit conversion.
//!
//! Exit codes: 0 when everything ran and every check passed, 1 when a check
//! failed, 2 on configuration or protocol errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use collapse_core::checkpoint::sha256_hex;
use collapse_core::kernels::CollapseParams;
use collapse_core::runner::protocol::{ReportCheck, MANIFEST};
use collapse_core::runner::suite::write_suite_csv;
use collapse_core::runner::{
    convert_units, evaluate, run_protocol, run_stage, run_wigner_suite, Check, Manifest,
    RunConfig, Species, Stage,
};
use collapse_core::Error;

#[derive(Parser)]
#[command(name = "collapse", version, about = "Collapse-model kernels, Wigner solver and reversible MD experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prepare the equilibrated left and/or right half systems.
    Equilibrate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Side::Both)]
        side: Side,
    },
    /// Run the whole reversal protocol, or a single stage, and evaluate it.
    Protocol {
        #[command(flatten)]
        run: RunArgs,
        /// Run only this stage (equilibrate_left, ..., rerun_dissipative_grw).
        #[arg(long)]
        stage: Option<String>,
    },
    /// Compare Wigner-solver observables against their analytic laws.
    WignerSuite {
        #[command(flatten)]
        params: SuiteArgs,
        /// Checks to run (repeatable); all by default.
        #[arg(long = "check")]
        checks: Vec<String>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a finished protocol run directory.
    Analyze {
        /// Output directory of the run.
        dir: PathBuf,
    },
    /// Express the reduced-unit configuration in SI units.
    ConvertUnits {
        #[command(flatten)]
        run: RunArgs,
        /// Lennard-Jones length [m]; argon by default.
        #[arg(long)]
        sigma: Option<f64>,
        /// Lennard-Jones energy [J].
        #[arg(long)]
        epsilon: Option<f64>,
        /// Particle mass [kg].
        #[arg(long)]
        mass: Option<f64>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Side {
    Left,
    Right,
    Both,
}

/// Run configuration: a `key = value` file overridden by flags named after
/// the same keys.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    density: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long = "t_rev", visible_alias = "t-rev")]
    t_rev: Option<String>,
    #[arg(long = "sigma_left", visible_alias = "sigma-left")]
    sigma_left: Option<String>,
    #[arg(long = "sigma_right", visible_alias = "sigma-right")]
    sigma_right: Option<String>,
    #[arg(long = "a_nd", visible_alias = "a-nd")]
    a_nd: Option<String>,
    #[arg(long = "t_n_nd", visible_alias = "t-n-nd")]
    t_n_nd: Option<String>,
    /// A damping rate, or "derived".
    #[arg(long = "gamma_nd", visible_alias = "gamma-nd")]
    gamma_nd: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    #[arg(long = "equilibration_time", visible_alias = "equilibration-time")]
    equilibration_time: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long = "sample_every", visible_alias = "sample-every")]
    sample_every: Option<String>,
    #[arg(long = "forward_checkpoints", visible_alias = "forward-checkpoints")]
    forward_checkpoints: Option<String>,
    #[arg(long = "diagnostic_every", visible_alias = "diagnostic-every")]
    diagnostic_every: Option<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("density", &self.density),
            ("n", &self.n),
            ("dt", &self.dt),
            ("t_rev", &self.t_rev),
            ("sigma_left", &self.sigma_left),
            ("sigma_right", &self.sigma_right),
            ("a_nd", &self.a_nd),
            ("t_n_nd", &self.t_n_nd),
            ("gamma_nd", &self.gamma_nd),
            ("seed", &self.seed),
            ("output", &self.output),
            ("threads", &self.threads),
            ("equilibration_time", &self.equilibration_time),
            ("grid", &self.grid),
            ("sample_every", &self.sample_every),
            ("forward_checkpoints", &self.forward_checkpoints),
            ("diagnostic_every", &self.diagnostic_every),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Collapse parameters of the verification suite.
#[derive(Args)]
struct SuiteArgs {
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.4)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    hbar: f64,
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    /// Dissipation parameter k.
    #[arg(long = "k_temp", visible_alias = "k-temp", default_value_t = 0.1)]
    k_temp: f64,
    #[arg(long = "grav_const", visible_alias = "grav-const", default_value_t = 1.0)]
    grav_const: f64,
    #[arg(long = "smear_radius", visible_alias = "smear-radius", default_value_t = 1.0)]
    smear_radius: f64,
}

impl SuiteArgs {
    fn params(&self) -> Result<CollapseParams, Error> {
        CollapseParams::dissipative(self.lambda, self.alpha, self.hbar, self.mass, self.k_temp, 1)?
            .with_gravity(self.grav_const, self.smear_radius)
    }
}

fn print_checks(checks: &[ReportCheck]) {
    for c in checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

/// Evaluates a run directory, writes `report.csv` there and prints the checks.
fn analyze(dir: &Path) -> Result<bool, Error> {
    let manifest = Manifest::load(dir)?
        .ok_or_else(|| Error::Protocol(format!("{} has no {MANIFEST}", dir.display())))?;
    let report = evaluate(dir)?;
    let checks = report.checks();
    print_checks(&checks);
    let mut csv = format!("# config_hash = {}\ncheck,pass,detail\n", manifest.config_hash);
    for c in &checks {
        csv.push_str(&format!(
            "{},{},\"{}\"\n",
            c.name,
            if c.pass { "pass" } else { "fail" },
            c.detail.replace('"', "'")
        ));
    }
    fs::write(dir.join("report.csv"), csv)?;
    Ok(checks.iter().all(|c| c.pass))
}

fn execute(command: Command) -> Result<bool, Error> {
    match command {
        Command::Equilibrate { run, side } => {
            let cfg = run.resolve()?;
            let stages: &[Stage] = match side {
                Side::Left => &[Stage::EquilibrateLeft],
                Side::Right => &[Stage::EquilibrateRight],
                Side::Both => &[Stage::EquilibrateLeft, Stage::EquilibrateRight],
            };
            for &s in stages {
                let rec = run_stage(&cfg, s)?;
                println!("{}: {:?}", rec.stage, rec.results);
            }
            Ok(true)
        }
        Command::Protocol { run, stage } => {
            let cfg = run.resolve()?;
            match stage {
                Some(name) => {
                    let rec = run_stage(&cfg, Stage::parse(&name)?)?;
                    println!("{}: {:?}", rec.stage, rec.results);
                    Ok(true)
                }
                None => {
                    run_protocol(&cfg)?;
                    println!("config_hash = {}", cfg.hash());
                    analyze(&cfg.output)
                }
            }
        }
        Command::WignerSuite { params, checks, out } => {
            let p = params.params()?;
            let selection = if checks.is_empty() {
                Check::ALL.to_vec()
            } else {
                checks.iter().map(|c| c.parse()).collect::<Result<Vec<Check>, _>>()?
            };
            let rows = run_wigner_suite(&p, &selection)?;
            let hash = &sha256_hex(format!("{p:?}").as_bytes())[..16];
            let mut buf = Vec::new();
            write_suite_csv(&mut buf, &[format!("config_hash = {hash}")], &rows)?;
            match out {
                Some(path) => fs::write(path, &buf)?,
                None => std::io::stdout().write_all(&buf)?,
            }
            Ok(rows.iter().all(|r| r.pass))
        }
        Command::Analyze { dir } => analyze(&dir),
        Command::ConvertUnits { run, sigma, epsilon, mass } => {
            let cfg = run.resolve()?;
            let argon = Species::argon();
            let species = Species {
                sigma: sigma.unwrap_or(argon.sigma),
                epsilon: epsilon.unwrap_or(argon.epsilon),
                mass: mass.unwrap_or(argon.mass),
            };
            print!("{}", convert_units(&cfg, &species)?.to_text());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
