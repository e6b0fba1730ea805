//! Command-line front end for building and comparing two-hypothesis
//! testing procedures.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config_text, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "omt", version, about = "Optimal multiple testing for two hypotheses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Configuration file of `key = value` lines
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Print the effective configuration for the command and exit
    #[arg(long, global = true)]
    pub dump_config: bool,

    /// Set any configuration key
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// One-sided level
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<String>,

    /// Quadrature profile: coarse, standard, or fine
    #[arg(long, global = true)]
    pub quadrature: Option<String>,

    /// Output file (`-` for standard output)
    #[arg(long, short = 'o', global = true)]
    pub output: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify a z-grid by a procedure's decisions and write it as CSV
    Region(RegionArgs),
    /// Power table of one or more procedures
    Power(PowerArgs),
    /// Power of the optimal rule across splits of a total sample size
    Allocate(AllocateArgs),
    /// Observed p-values, decisions, and power for the two-group trial data
    Apex(ApexArgs),
    /// Sample size a comparator needs to match the optimal rule's power
    Savings(SavingsArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct ShiftArgs {
    /// Mean shift of the first z-statistic (implies --calibration direct)
    #[arg(long, allow_hyphen_values = true)]
    pub theta1: Option<String>,
    /// Mean shift of the second z-statistic
    #[arg(long, allow_hyphen_values = true)]
    pub theta2: Option<String>,
    /// Persons in the first group (design and marginal calibration)
    #[arg(long)]
    pub persons1: Option<String>,
    /// Persons in the second group
    #[arg(long)]
    pub persons2: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CalibrationArgs {
    /// direct, design, or marginal
    #[arg(long)]
    pub calibration: Option<String>,
    #[arg(long)]
    pub rate_control: Option<String>,
    #[arg(long)]
    pub rate_treat: Option<String>,
    /// Marginal power of a reference-size group
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub reference_persons: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct RegionArgs {
    /// Procedure name, or omt / omt:<objective>
    #[arg(long = "proc")]
    pub procedure: Option<String>,
    /// any, avg, pi1, combo, or three weights
    #[arg(long)]
    pub objective: Option<String>,
    /// Cells per axis
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub z_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub z_max: Option<String>,
    #[command(flatten)]
    pub shift: ShiftArgs,
    #[command(flatten)]
    pub calibration: CalibrationArgs,
}

#[derive(Args, Debug, Clone, Default)]
pub struct PowerArgs {
    /// table, all, or a comma list of procedures
    #[arg(long = "proc", visible_alias = "procedures")]
    pub procedures: Option<String>,
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<String>,
    /// Append Monte Carlo estimates and standard errors
    #[arg(long)]
    pub mc: bool,
    #[arg(long)]
    pub reps: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[command(flatten)]
    pub shift: ShiftArgs,
    #[command(flatten)]
    pub calibration: CalibrationArgs,
}

#[derive(Args, Debug, Clone, Default)]
pub struct AllocateArgs {
    /// Total persons
    #[arg(long = "N", visible_alias = "total-n")]
    pub total_n: Option<String>,
    /// Comma list of first-group fractions
    #[arg(long = "grid")]
    pub r_grid: Option<String>,
    /// Report the argmax of one measure only
    #[arg(long)]
    pub measure: Option<String>,
    /// matched, or one objective for every measure
    #[arg(long = "objective")]
    pub allocation_objective: Option<String>,
    #[command(flatten)]
    pub calibration: CalibrationArgs,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ApexArgs {
    #[arg(long)]
    pub events_control1: Option<String>,
    #[arg(long)]
    pub n_control1: Option<String>,
    #[arg(long)]
    pub events_treat1: Option<String>,
    #[arg(long)]
    pub n_treat1: Option<String>,
    #[arg(long)]
    pub events_control2: Option<String>,
    #[arg(long)]
    pub n_control2: Option<String>,
    #[arg(long)]
    pub events_treat2: Option<String>,
    #[arg(long)]
    pub n_treat2: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta2: Option<String>,
    #[command(flatten)]
    pub calibration: CalibrationArgs,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SavingsArgs {
    /// pi_avg, pi_any, pi_1, pi_combo, or all
    #[arg(long)]
    pub measure: Option<String>,
    /// Sample size of the optimal rule
    #[arg(long = "N", visible_alias = "reference-n")]
    pub reference_n: Option<String>,
    /// First-group fraction
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub comparator: Option<String>,
    /// Largest sample size searched
    #[arg(long)]
    pub n_cap: Option<String>,
    #[command(flatten)]
    pub calibration: CalibrationArgs,
}

type Pairs = Vec<(&'static str, Option<String>)>;

impl ShiftArgs {
    fn pairs(&self) -> Pairs {
        vec![
            ("theta1", self.theta1.clone()),
            ("theta2", self.theta2.clone()),
            ("persons1", self.persons1.clone()),
            ("persons2", self.persons2.clone()),
        ]
    }
}

impl CalibrationArgs {
    fn pairs(&self) -> Pairs {
        vec![
            ("calibration", self.calibration.clone()),
            ("rate_control", self.rate_control.clone()),
            ("rate_treat", self.rate_treat.clone()),
            ("beta", self.beta.clone()),
            ("reference_persons", self.reference_persons.clone()),
        ]
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Region(_) => "region",
            Command::Power(_) => "power",
            Command::Allocate(_) => "allocate",
            Command::Apex(_) => "apex",
            Command::Savings(_) => "savings",
        }
    }

    fn keys(&self) -> &'static [&'static str] {
        match self {
            Command::Region(_) => commands::REGION_KEYS,
            Command::Power(_) => commands::POWER_KEYS,
            Command::Allocate(_) => commands::ALLOCATE_KEYS,
            Command::Apex(_) => commands::APEX_KEYS,
            Command::Savings(_) => commands::SAVINGS_KEYS,
        }
    }

    fn pairs(&self) -> Pairs {
        match self {
            Command::Region(a) => {
                let mut v = vec![
                    ("procedures", a.procedure.clone()),
                    ("objective", a.objective.clone()),
                    ("grid", a.grid.clone()),
                    ("z_min", a.z_min.clone()),
                    ("z_max", a.z_max.clone()),
                ];
                v.extend(a.shift.pairs());
                v.extend(a.calibration.pairs());
                v
            }
            Command::Power(a) => {
                let mut v = vec![
                    ("procedures", a.procedures.clone()),
                    ("objective", a.objective.clone()),
                    ("rho", a.rho.clone()),
                    ("mc", a.mc.then(|| "true".to_string())),
                    ("reps", a.reps.clone()),
                    ("seed", a.seed.clone()),
                ];
                v.extend(a.shift.pairs());
                v.extend(a.calibration.pairs());
                v
            }
            Command::Allocate(a) => {
                let mut v = vec![
                    ("total_n", a.total_n.clone()),
                    ("r_grid", a.r_grid.clone()),
                    ("measure", a.measure.clone()),
                    ("allocation_objective", a.allocation_objective.clone()),
                ];
                v.extend(a.calibration.pairs());
                v
            }
            Command::Apex(a) => {
                let mut v = vec![
                    ("events_control1", a.events_control1.clone()),
                    ("n_control1", a.n_control1.clone()),
                    ("events_treat1", a.events_treat1.clone()),
                    ("n_treat1", a.n_treat1.clone()),
                    ("events_control2", a.events_control2.clone()),
                    ("n_control2", a.n_control2.clone()),
                    ("events_treat2", a.events_treat2.clone()),
                    ("n_treat2", a.n_treat2.clone()),
                    ("theta1", a.theta1.clone()),
                    ("theta2", a.theta2.clone()),
                ];
                v.extend(a.calibration.pairs());
                v
            }
            Command::Savings(a) => {
                let mut v = vec![
                    ("measure", a.measure.clone()),
                    ("reference_n", a.reference_n.clone()),
                    ("split", a.split.clone()),
                    ("comparator", a.comparator.clone()),
                    ("n_cap", a.n_cap.clone()),
                ];
                v.extend(a.calibration.pairs());
                v
            }
        }
    }
}

/// Defaults, then the config file, then `--set`, then dedicated flags.
pub fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.common.config {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        cfg.apply(&parse_config_text(&text)?)?;
    }
    for item in &cli.common.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got '{item}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    let common = [
        ("alpha", cli.common.alpha.clone()),
        ("quadrature", cli.common.quadrature.clone()),
        ("output", cli.common.output.clone()),
    ];
    for (k, v) in common.into_iter().chain(cli.command.pairs()) {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    Ok(cfg)
}

/// Dump of the effective configuration, with the calibration mode resolved so
/// that the dump reproduces the run on its own.
fn dump(cli: &Cli, cfg: &RunConfig) -> CliResult<String> {
    let mut cfg = cfg.clone();
    let fallback = match cli.command {
        Command::Apex(_) => config::CalibrationMode::Design,
        _ => config::CalibrationMode::Marginal,
    };
    let mode = cfg.calibration_mode(fallback)?;
    cfg.set("calibration", mode.name())?;
    Ok(cfg.dump(cli.command.name(), cli.command.keys()))
}

fn execute(cli: &Cli, env: Option<&str>, out: &mut dyn Write) -> CliResult<()> {
    let cfg = resolve_config(cli)?;
    if cli.common.dump_config {
        let text = dump(cli, &cfg)?;
        return out.write_all(text.as_bytes()).map_err(|source| CliError::Io {
            path: "<stdout>".into(),
            source,
        });
    }
    match cli.command {
        Command::Region(_) => commands::region(&cfg, env, out),
        Command::Power(_) => commands::power(&cfg, env, out),
        Command::Allocate(_) => commands::allocate(&cfg, env, out),
        Command::Apex(_) => commands::apex(&cfg, env, out),
        Command::Savings(_) => commands::savings_cmd(&cfg, env, out),
    }
}

/// Runs one command; returns the process exit code. `env_quadrature` is the
/// value of [`config::QUADRATURE_ENV`], if any.
pub fn run<I, T>(args: I, env_quadrature: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(&cli, env_quadrature, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
