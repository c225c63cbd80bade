//! `lightlike`: command-line driver for the light-like generator library.

mod commands;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{value_parser, Arg, ArgMatches, Command};

use commands::{Failure, JobExt};
use output::Output;
use settings::{Settings, SUBCOMMANDS};

const DEFAULT_OUT: &str = "lightlike-out";

fn cli() -> Command {
    let mut cmd = Command::new("lightlike")
        .version(env!("CARGO_PKG_VERSION"))
        .about("OTOCs, light-like generators and their spectra for brick-wall circuits")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .value_parser(value_parser!(PathBuf))
                .help("flat key = value file; command-line flags override it"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .global(true)
                .env("LIGHTLIKE_OUT")
                .value_name("DIR")
                .value_parser(value_parser!(PathBuf))
                .help(format!("output directory [default: {DEFAULT_OUT}]")),
        )
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .value_name("N")
                .value_parser(value_parser!(usize))
                .help("worker threads; 1 gives bit-reproducible output"),
        );
    for sub in SUBCOMMANDS {
        let mut c = Command::new(sub.name).about(sub.about);
        for k in sub.all_keys() {
            c = c.arg(
                Arg::new(k.name)
                    .long(k.name.replace('_', "-"))
                    .value_name("VALUE")
                    .help(format!("{} [default: {}]", k.help, k.default)),
            );
        }
        cmd = cmd.subcommand(c);
    }
    cmd
}

fn run(matches: &ArgMatches) -> Result<Vec<PathBuf>, Failure> {
    let (name, sub_m) = matches.subcommand().expect("subcommand is required");
    let sub = settings::find(name).expect("every registered subcommand has a schema");
    if let Some(&n) = sub_m.get_one::<usize>("threads") {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure {
                code: 2,
                message: format!("--threads {n}: {e}"),
            })?;
    }
    let config = match sub_m.get_one::<PathBuf>("config") {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|e| Failure {
            code: 2,
            message: format!("cannot read config '{}': {e}", path.display()),
        })?),
        None => None,
    };
    let cli_values: Vec<(&'static str, String)> = sub
        .all_keys()
        .iter()
        .filter_map(|k| sub_m.get_one::<String>(k.name).map(|v| (k.name, v.clone())))
        .collect();
    let settings = Settings::merge(sub, config.as_deref(), &cli_values).cfg()?;
    let dir = sub_m
        .get_one::<PathBuf>("out")
        .cloned()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut out = Output::new(&dir, &settings).job(|| format!("create '{}'", dir.display()))?;
    commands::run(&settings, &mut out)?;
    Ok(out.written().to_vec())
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    match run(&matches) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        cli().debug_assert();
    }

    #[test]
    fn every_key_is_a_flag() {
        let m = cli()
            .try_get_matches_from(["lightlike", "levelstats", "--s-max", "3", "--model", "xyzc"])
            .unwrap();
        let (_, sub) = m.subcommand().unwrap();
        assert_eq!(sub.get_one::<String>("s_max").unwrap(), "3");
        assert_eq!(sub.get_one::<String>("model").unwrap(), "xyzc");
    }
}
