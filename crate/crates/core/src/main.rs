//! Batch front end: run, validate, and inspect scenario configurations.

use std::path::PathBuf;
use std::process::ExitCode;

use cavity_spin::config::ExperimentConfig;
use cavity_spin::scenarios::{self, RunOptions};
use cavity_spin::SimError;

const USAGE: &str = "\
usage:
  cavity-spin run <config.toml> [--output-dir DIR] [--seed S] [--jobs J]
  cavity-spin validate <config.toml>
  cavity-spin presets list
  cavity-spin presets show <name>

exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 oracle comparison failure";

fn exit_code_for(err: &SimError) -> u8 {
    match err {
        SimError::Config(_)
        | SimError::InvalidParams(_)
        | SimError::InvalidProfile(_)
        | SimError::InvalidProtocol(_) => 2,
        SimError::OracleMismatch(_) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run_cli(&args) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", err);
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn run_cli(args: &[String]) -> Result<ExitCode, SimError> {
    let mut iter = args.iter();
    let command = match iter.next() {
        Some(c) => c.as_str(),
        None => {
            eprintln!("{}", USAGE);
            return Ok(ExitCode::from(2));
        }
    };
    match command {
        "run" => {
            let mut config_path: Option<PathBuf> = None;
            let mut opts = RunOptions::default();
            let mut rest = iter.peekable();
            while let Some(arg) = rest.next() {
                match arg.as_str() {
                    "--output-dir" => {
                        let v = rest.next().ok_or_else(|| {
                            SimError::Config("--output-dir needs a value".into())
                        })?;
                        opts.output_dir = Some(PathBuf::from(v));
                    }
                    "--seed" => {
                        let v = rest
                            .next()
                            .ok_or_else(|| SimError::Config("--seed needs a value".into()))?;
                        opts.seed = Some(
                            v.parse()
                                .map_err(|_| SimError::Config(format!("bad seed: {:?}", v)))?,
                        );
                    }
                    "--jobs" => {
                        let v = rest
                            .next()
                            .ok_or_else(|| SimError::Config("--jobs needs a value".into()))?;
                        opts.jobs = Some(v.parse().map_err(|_| {
                            SimError::Config(format!("bad job count: {:?}", v))
                        })?);
                    }
                    other if config_path.is_none() && !other.starts_with("--") => {
                        config_path = Some(PathBuf::from(other));
                    }
                    other => {
                        return Err(SimError::Config(format!("unknown argument {:?}", other)));
                    }
                }
            }
            let path =
                config_path.ok_or_else(|| SimError::Config("run needs a config path".into()))?;
            let config = ExperimentConfig::from_path(&path)?;
            let result = scenarios::run(&config, &opts)?;
            println!(
                "scenario {} finished in {:.2} s (config {:016x})",
                result.scenario.name(),
                result.wall_time_s,
                result.config_hash
            );
            for file in &result.output_files {
                println!("  wrote {}", file.display());
            }
            for (key, value) in &result.summary {
                println!("  {} = {}", key, value);
            }
            Ok(ExitCode::SUCCESS)
        }
        "validate" => {
            let path = iter
                .next()
                .ok_or_else(|| SimError::Config("validate needs a config path".into()))?;
            let config = ExperimentConfig::from_path(&PathBuf::from(path))?;
            println!(
                "ok: scenario {}, seed {}",
                config.scenario.name(),
                config.seed
            );
            Ok(ExitCode::SUCCESS)
        }
        "presets" => match iter.next().map(|s| s.as_str()) {
            Some("list") => {
                for (name, description, _) in scenarios::presets() {
                    println!("{:24} {}", name, description);
                }
                Ok(ExitCode::SUCCESS)
            }
            Some("show") => {
                let name = iter
                    .next()
                    .ok_or_else(|| SimError::Config("presets show needs a name".into()))?;
                match scenarios::preset(name) {
                    Some(body) => {
                        print!("{}", body);
                        Ok(ExitCode::SUCCESS)
                    }
                    None => Err(SimError::Config(format!("no preset named {:?}", name))),
                }
            }
            _ => {
                eprintln!("{}", USAGE);
                Ok(ExitCode::from(2))
            }
        },
        "--help" | "-h" | "help" => {
            println!("{}", USAGE);
            Ok(ExitCode::SUCCESS)
        }
        other => {
            eprintln!("unknown command {:?}\n{}", other, USAGE);
            Ok(ExitCode::from(2))
        }
    }
}
