//! `retrolab` command-line front end.
//!
//! Exit codes: 0 success (symmetric / independent), 1 asymmetric or
//! settings-dependent, 2 bad configuration, 3 write failure, 4 inconclusive.

mod commands;
mod config;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use retrolab::photon::OntologyMode;
use retrolab::Angle;

use crate::commands::{DemonKind, Output};
use crate::config::{CollapseBeable, FileConfig, Format, Resolved};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Write(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Write(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Write(m) => write!(f, "write failed: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "retrolab",
    version,
    about = "Polarization experiments, control games and time-symmetry audits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Positional arguments, where a
/// subcommand has them, take precedence over the matching flag.
#[derive(Args, Debug, Default, Clone)]
struct Common {
    /// TOML file with the same keys as the long flags; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    sigma_l: Option<f64>,
    #[arg(long, global = true)]
    sigma_r: Option<f64>,
    #[arg(long, global = true)]
    sigma_r_alt: Option<f64>,
    /// Number of simulated runs.
    #[arg(long, global = true)]
    n: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the payload here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Read all angles as degrees.
    #[arg(long, global = true)]
    degrees: bool,
    /// Also write every simulated record as JSON lines (run only).
    #[arg(long, global = true)]
    records: Option<PathBuf>,
    /// What the collapse model holds just before the right cube.
    #[arg(long, global = true, value_enum)]
    collapse_beable: Option<CollapseBeable>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the two-cube experiment and tally (input, output) channels.
    #[command(allow_negative_numbers = true)]
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Play the control game on one side.
    #[command(allow_negative_numbers = true)]
    Game {
        #[arg(value_enum)]
        side: SideArg,
        /// The side's cube setting.
        setting: Option<f64>,
        /// Demon limited to one photon on one channel (left side).
        #[arg(long, conflicts_with_all = ["classical", "superposition"])]
        discrete: bool,
        /// Demon with classical fields (left side only).
        #[arg(long, conflicts_with = "superposition")]
        classical: bool,
        /// Demon with superposed single-photon inputs (left side only).
        #[arg(long)]
        superposition: bool,
        /// Photon ontology at the right cube.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Counterfactual setting offset for the right side.
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_6)]
        rho: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Forwards/backwards audit: exit 0 symmetric, 1 asymmetric, 4 inconclusive.
    #[command(allow_negative_numbers = true)]
    Audit {
        #[arg(id = "model_pos", value_name = "MODEL")]
        model: Option<String>,
        sigma_a: Option<f64>,
        sigma_b: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Settings dependence of pre-measurement beables: exit 1 when dependent.
    #[command(allow_negative_numbers = true)]
    Retro {
        #[arg(id = "model_pos", value_name = "MODEL")]
        model: Option<String>,
        #[arg(id = "sigma_l_pos", value_name = "SIGMA_L")]
        sigma_l: Option<f64>,
        #[arg(id = "sigma_r_pos", value_name = "SIGMA_R")]
        sigma_r: Option<f64>,
        #[arg(id = "sigma_r_alt_pos", value_name = "SIGMA_R_ALT")]
        sigma_r_alt: Option<f64>,
        /// Estimate from simulated records instead of exact distributions.
        #[arg(long)]
        empirical: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Print analytic (input, output) distributions.
    #[command(allow_negative_numbers = true)]
    Table {
        #[arg(id = "model_pos", value_name = "MODEL")]
        model: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    #[value(alias = "discrete-symmetric")]
    Discrete,
    Collapse,
    #[value(alias = "no-collapse")]
    Nocollapse,
}

impl From<ModeArg> for OntologyMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Discrete => OntologyMode::DiscreteSymmetric,
            ModeArg::Collapse => OntologyMode::Collapse,
            ModeArg::Nocollapse => OntologyMode::NoCollapse,
        }
    }
}

/// Positional values that stand in for flags.
#[derive(Default)]
struct Positional {
    model: Option<String>,
    sigma_l: Option<f64>,
    sigma_r: Option<f64>,
    sigma_r_alt: Option<f64>,
}

fn resolve(common: &Common, pos: Positional) -> Result<Resolved, CliError> {
    let base = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let flags = FileConfig {
        model: pos.model.or_else(|| common.model.clone()),
        sigma_l: pos.sigma_l.or(common.sigma_l),
        sigma_r: pos.sigma_r.or(common.sigma_r),
        sigma_r_alt: pos.sigma_r_alt.or(common.sigma_r_alt),
        n: common.n,
        seed: common.seed,
        out: common.out.clone(),
        format: common.format,
        degrees: common.degrees.then_some(true),
        records: common.records.clone(),
        collapse_beable: common.collapse_beable,
    };
    Resolved::from_file_config(base.overlay(flags))
}

fn execute(cli: Cli) -> Result<(Output, Option<PathBuf>), CliError> {
    let (cfg, out) = match cli.command {
        Command::Run { common } => {
            let cfg = resolve(&common, Positional::default())?;
            (commands::run(&cfg)?, cfg.out)
        }
        Command::Table { model, common } => {
            let cfg = resolve(
                &common,
                Positional {
                    model,
                    ..Default::default()
                },
            )?;
            (commands::table(&cfg)?, cfg.out)
        }
        Command::Audit {
            model,
            sigma_a,
            sigma_b,
            common,
        } => {
            let cfg = resolve(
                &common,
                Positional {
                    model,
                    sigma_l: sigma_a,
                    sigma_r: sigma_b,
                    ..Default::default()
                },
            )?;
            (commands::audit(&cfg)?, cfg.out)
        }
        Command::Retro {
            model,
            sigma_l,
            sigma_r,
            sigma_r_alt,
            empirical,
            common,
        } => {
            let mut cfg = resolve(
                &common,
                Positional {
                    model,
                    sigma_l,
                    sigma_r,
                    sigma_r_alt,
                },
            )?;
            cfg.options.insert("empirical", empirical.into());
            (commands::retro(&cfg, empirical)?, cfg.out)
        }
        Command::Game {
            side,
            setting,
            discrete: _,
            classical,
            superposition,
            mode,
            rho,
            common,
        } => {
            let pos = match side {
                SideArg::Left => Positional {
                    sigma_l: setting,
                    ..Default::default()
                },
                SideArg::Right => Positional {
                    sigma_r: setting,
                    ..Default::default()
                },
            };
            let mut cfg = resolve(&common, pos)?;
            let output = match side {
                SideArg::Left => {
                    if mode.is_some() {
                        return Err(CliError::Config("--mode applies to the right side".into()));
                    }
                    let demon = if classical {
                        DemonKind::Classical
                    } else if superposition {
                        DemonKind::Superposition
                    } else {
                        DemonKind::Discrete
                    };
                    let name = match demon {
                        DemonKind::Discrete => "discrete",
                        DemonKind::Classical => "classical",
                        DemonKind::Superposition => "superposition",
                    };
                    cfg.options.insert("side", "left".into());
                    cfg.options.insert("demon", name.into());
                    let s = cfg.require(cfg.sigma_l, "setting")?;
                    commands::game_left(&cfg, s, demon)?
                }
                SideArg::Right => {
                    if classical || superposition {
                        return Err(CliError::Config(
                            "--classical and --superposition describe the left-side Demon".into(),
                        ));
                    }
                    let mode = mode.unwrap_or(ModeArg::Discrete);
                    let rho = if cfg.degrees { rho.to_radians() } else { rho };
                    if !rho.is_finite() {
                        return Err(CliError::Config("rho must be finite".into()));
                    }
                    let mode_name = match mode {
                        ModeArg::Discrete => "discrete",
                        ModeArg::Collapse => "collapse",
                        ModeArg::Nocollapse => "nocollapse",
                    };
                    cfg.options.insert("side", "right".into());
                    cfg.options.insert("mode", mode_name.into());
                    cfg.options.insert("rho", rho.into());
                    let s: Angle = cfg.require(cfg.sigma_r, "setting")?;
                    commands::game_right(&cfg, s, rho, mode.into())?
                }
            };
            (output, cfg.out)
        }
    };
    Ok((cfg, out))
}

fn emit(output: &Output, out: Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(&path, &output.text)
            .map_err(|e| CliError::Write(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(output.text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Write(format!("stdout: {e}")))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(cli).and_then(|(output, out)| {
        emit(&output, out)?;
        Ok(output.exit)
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("retrolab: {e}");
            ExitCode::from(e.code())
        }
    }
}
