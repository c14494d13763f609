use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

use crate::config::{Command, RunConfig};
use crate::error::{exit_code, AppError};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "PLCWATCH_OUT";

#[derive(Debug, Parser)]
#[command(name = "plcwatch", version, about = "PLC cable monitoring from modem SNR reports")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration (TOML, or a JSON config or dataset manifest).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory [default: $PLCWATCH_OUT, else ./out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, short, global = true)]
    pub verbose: bool,
}

impl Cli {
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, AppError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| AppError::config("--config <path> is required"))?;
    let mut cfg = RunConfig::load(path)?;
    cfg.apply_seed(cli.seed);
    crate::commands::run(cli.command, &cfg, &cli.out_dir())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit_code::USAGE } else { exit_code::SUCCESS };
        }
    };
    let level = if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match run(&cli) {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            exit_code::SUCCESS
        }
        Err(e) => {
            eprintln!("plcwatch {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse_after_the_subcommand() {
        let cli = Cli::try_parse_from(["plcwatch", "train", "--config", "a.toml", "--seed", "4", "-v"]).unwrap();
        assert_eq!(cli.command, Command::Train);
        assert_eq!(cli.seed, Some(4));
        assert!(cli.verbose);
        assert_eq!(cli.config, Some(PathBuf::from("a.toml")));
    }

    #[test]
    fn usage_errors_exit_with_two() {
        assert_eq!(main_with_args(["plcwatch", "fly"]), exit_code::USAGE);
        assert_eq!(main_with_args(["plcwatch", "train", "--seed", "x"]), exit_code::USAGE);
    }

    #[test]
    fn missing_config_is_a_config_error() {
        assert_eq!(main_with_args(["plcwatch", "generate"]), exit_code::CONFIG);
    }
}
