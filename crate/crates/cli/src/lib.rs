//! Command-line front end: threshold tables, figure data, parameter sweeps
//! and simulations driven by a flat configuration file.

pub mod commands;
pub mod config;
pub mod table;

use std::io::Write;
use std::path::PathBuf;

use clap::{Arg, ArgAction, ArgMatches, Command};
use magnetomech::Error as CoreError;
use thiserror::Error;

use config::{flag_name, Config, KEYS};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParam { .. }
            | CoreError::Domain(_)
            | CoreError::NoFeedback
            | CoreError::IncompatibleOptions(_)
            | CoreError::NotOnGrid(_)
            | CoreError::TimeStep { .. }
            | CoreError::ShapeMismatch { .. } => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

const COMMANDS: &[(&str, &str)] = &[
    ("lsa", "thresholds, crossovers and optical density cutoff at one parameter point"),
    ("figures", "CSV tables behind the threshold figures"),
    ("sweep", "threshold table over one swept parameter"),
    ("simulate", "integrate the nonlinear model, writing diagnostics and snapshots"),
    ("growth", "measure a growth rate by simulation and compare with the analytic rate"),
];

fn with_key_flags(mut cmd: Command) -> Command {
    cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("TOML file of key = value settings")
            .value_parser(clap::value_parser!(PathBuf)),
    );
    for k in KEYS {
        let flag: &'static str = Box::leak(flag_name(k.name).into_boxed_str());
        let help: &'static str = Box::leak(format!("{} [default: {}]", k.help, k.default).into_boxed_str());
        cmd = cmd.arg(
            Arg::new(k.name)
                .long(flag)
                .value_name("VALUE")
                .allow_hyphen_values(true)
                .action(ArgAction::Set)
                .help(help),
        );
    }
    cmd
}

pub fn command() -> Command {
    let mut cmd = Command::new("magnetomech")
        .version(VERSION)
        .about("Optomechanical and magnetic pattern formation with single-mirror feedback")
        .subcommand_required(true);
    for (name, about) in COMMANDS {
        cmd = cmd.subcommand(with_key_flags(Command::new(*name).about(*about)));
    }
    cmd
}

fn resolve(matches: &ArgMatches) -> Result<Config, CliError> {
    let mut cfg = Config::default();
    if let Some(path) = matches.get_one::<PathBuf>("config") {
        cfg.merge_file(path)?;
    }
    for k in KEYS {
        if let Some(raw) = matches.get_one::<String>(k.name) {
            cfg.set_flag(k.name, raw)?;
        }
    }
    Ok(cfg)
}

/// Header shared by every output file.
pub struct Provenance {
    pub command_line: String,
    pub config: Config,
}

impl Provenance {
    pub fn header(&self) -> Vec<String> {
        let mut lines = vec![
            format!("magnetomech {VERSION}"),
            format!("command: {}", self.command_line),
        ];
        lines.extend(self.config.echo().into_iter().map(|l| format!("config: {l}")));
        lines
    }
}

/// Parse `args` (program name first) and run the selected command.
pub fn run<I, S>(args: I, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let matches = match command().try_get_matches_from(&args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                write!(stdout, "{}", e.render())?;
                return Ok(());
            }
            return Err(CliError::Usage(e.render().to_string()));
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let prov = Provenance {
        command_line: args.join(" "),
        config: resolve(sub)?,
    };
    match name {
        "lsa" => commands::lsa(&prov, stdout),
        "figures" => commands::figures(&prov, stdout),
        "sweep" => commands::sweep(&prov, stdout),
        "simulate" => commands::simulate(&prov, stdout),
        "growth" => commands::growth(&prov, stdout),
        other => Err(CliError::Usage(format!("unknown command {other}"))),
    }
}
