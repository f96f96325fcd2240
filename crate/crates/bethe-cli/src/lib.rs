//! Batch front-end: config parsing, subcommand dispatch, parallel grid
//! scheduling, CSV/JSON emission, and run manifests. All randomness flows
//! from the single `seed` key through per-task stream paths, so two runs
//! with identical effective configs produce identical CSV bytes at any
//! worker count.

pub mod commands;
pub mod config;
pub mod outputs;

use config::{parse_config, ConfigError, RunConfig};
use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Io(std::io::Error),
    Usage(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

pub const USAGE: &str = "usage: bethe <subcommand> [suite] [--key value]...
subcommands: spectrum | lyapunov | free-energy | rate-function | dos |
             phase-scan | edge | resonance |
             verify <greens-identities|weak-l1|ldp|lifshitz|ray-sum|fekete>
common flags mirror config keys (e.g. --K 2 --lambda 0.3 --E 0);
--config <path> loads a key = value file (flags override it);
--out <dir>, --seed <n>, --workers <n>.
exit codes: 0 ok, 1 hard error, 2 verification bound violated beyond slack.";

/// Parse argv-style arguments (without the program name) and run.
pub fn run_args(args: &[String]) -> Result<i32, CliError> {
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" {
        println!("{USAGE}");
        return Ok(0);
    }
    let subcommand = args[0].clone();
    let mut rest = &args[1..];
    let mut suite = None;
    if subcommand == "verify" {
        let Some(first) = rest.first() else {
            return Err(CliError::Usage("verify needs a suite name".into()));
        };
        suite = Some(first.clone());
        rest = &rest[1..];
    }

    let mut flags: Vec<(String, String)> = Vec::new();
    let mut config_path: Option<String> = None;
    let mut it = rest.iter();
    while let Some(arg) = it.next() {
        let Some(key) = arg.strip_prefix("--") else {
            return Err(CliError::Usage(format!("expected a --flag, got `{arg}`")));
        };
        let Some(value) = it.next() else {
            return Err(CliError::Usage(format!("flag --{key} needs a value")));
        };
        if key == "config" {
            config_path = Some(value.clone());
        } else {
            flags.push((key.to_string(), value.clone()));
        }
    }
    let file_contents = match config_path {
        Some(path) => std::fs::read_to_string(&path)?,
        None => String::new(),
    };
    let config = parse_config(&subcommand, &file_contents, &flags)?;
    dispatch(&config, suite.as_deref())
}

/// Run one validated configuration inside a worker pool of the configured
/// size. Returns the process exit code.
pub fn dispatch(config: &RunConfig, suite: Option<&str>) -> Result<i32, CliError> {
    let workers = config.usize("workers")?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot build worker pool: {e}")))?;
    pool.install(|| commands::run(config, suite))
}
