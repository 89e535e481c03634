mod commands;
mod settings;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command};
use iteforest_core::{Error, Result};

use settings::{command_keys, Settings};

const COMMANDS: &[(&str, &str)] = &[
    ("simulate", "Simulate a data set from one of the benchmark models"),
    ("estimate", "Estimate individual treatment effects for a data set"),
    ("benchmark", "Run a simulation experiment and write stratified metrics"),
    ("infer", "Subsampling inference for a linear model of the estimated effects"),
    ("coplot", "Export conditioning-plot data for estimated effects"),
];

fn cli() -> Command {
    let mut cmd = Command::new("iteforest")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Random-forest estimators of individual treatment effects")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(Arg::new("seed").long("seed").global(true).help("base random seed"))
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .value_parser(clap::value_parser!(usize))
                .help("worker threads; results do not depend on it"),
        )
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_parser(clap::value_parser!(PathBuf))
                .help("flat key = value settings file"),
        );
    for &(name, about) in COMMANDS {
        let mut sub = Command::new(name).about(about);
        for k in command_keys(name).into_iter().filter(|k| k.name != "seed") {
            let help = match k.default {
                Some("") | None => k.help.to_string(),
                Some(d) => format!("{} [default: {d}]", k.help),
            };
            sub = sub.arg(Arg::new(k.name).long(k.name.replace('_', "-")).help(help));
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn flags(name: &str, global: &ArgMatches, sub: &ArgMatches) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for k in command_keys(name) {
        let m = if k.name == "seed" { global } else { sub };
        if let Some(v) = m.get_one::<String>(k.name) {
            out.insert(k.name.to_string(), v.clone());
        }
    }
    if let Some(v) = sub.get_one::<String>("seed") {
        out.insert("seed".into(), v.clone());
    }
    out
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Error::Config("threads must be positive".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    log::warn!("built without parallel support; ignoring --threads {n}");
    Ok(())
}

fn run(matches: &ArgMatches) -> Result<()> {
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let threads = sub
        .get_one::<usize>("threads")
        .or(matches.get_one::<usize>("threads"))
        .copied();
    configure_threads(threads)?;
    let config = sub
        .get_one::<PathBuf>("config")
        .or(matches.get_one::<PathBuf>("config"));
    let settings = Settings::resolve(name, flags(name, matches, sub), config.map(PathBuf::as_path))?;
    match name {
        "simulate" => commands::simulate_cmd(&settings),
        "estimate" => commands::estimate_cmd(&settings),
        "benchmark" => commands::benchmark_cmd(&settings),
        "infer" => commands::infer_cmd(&settings),
        "coplot" => commands::coplot_cmd(&settings),
        _ => unreachable!("unknown subcommand {name}"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = cli().get_matches();
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.code());
            ExitCode::FAILURE
        }
    }
}
