use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use ocbc::io::{load_log_with_warnings, load_model, load_report, parse_model, save_log, save_report};
use ocbc::{check_with, generate_conforming, inject_violation, render_text, CheckOptions, ProblemKind};

/// Conformance checking of object-centric event logs against OCBC models.
#[derive(Parser)]
#[command(name = "ocbc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a log against a model.
    ///
    /// Exits with 0 when there are no errors, 1 when there are violations
    /// and 2 when an input cannot be read.
    Check {
        /// Model document (.ocbc.json).
        model: PathBuf,
        /// Log document (.oclog.jsonl), or `-` for standard input.
        log: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Treat the log as the prefix of a running process: problems later
        /// events could repair are reported as warnings.
        #[arg(long)]
        prefix: bool,
        /// Only check these kinds, e.g. `--types I,VII,IX`.
        #[arg(long, value_delimiter = ',', value_parser = ProblemKind::from_str)]
        types: Vec<ProblemKind>,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report the well-formedness defects of a model.
    ValidateModel { model: PathBuf },
    /// Generate a conforming log, optionally with injected violations.
    Generate {
        model: PathBuf,
        #[arg(long, default_value_t = 30)]
        events: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Inject violations of a kind, e.g. `IX` or `VIIx3` for three.
        #[arg(long, value_parser = parse_injection)]
        inject: Vec<(ProblemKind, usize)>,
    },
    /// Render a JSON report document as text.
    Render { report: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn parse_injection(text: &str) -> Result<(ProblemKind, usize), String> {
    let (kind, times) = match text.rsplit_once(['x', 'X']) {
        Some((kind, n)) if !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) => {
            (kind, n.parse::<usize>().map_err(|e| e.to_string())?)
        }
        _ => (text, 1),
    };
    let kind = ProblemKind::from_str(kind).map_err(|e| e.to_string())?;
    Ok((kind, times))
}

/// An input problem: exit status 2.
struct InputError(String);

fn read_input(path: &Path) -> Result<Vec<u8>, InputError> {
    if path == Path::new("-") {
        let mut buf = Vec::new();
        io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| InputError(format!("cannot read standard input: {e}")))?;
        return Ok(buf);
    }
    fs::read(path).map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))
}

fn input<T, E: std::fmt::Display>(path: &Path, result: Result<T, E>) -> Result<T, InputError> {
    result.map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(InputError(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, InputError> {
    match cli.command {
        Command::Check {
            model,
            log,
            format,
            prefix,
            types,
            out,
        } => {
            let m = input(&model, load_model(&read_input(&model)?))?;
            let (l, warnings) = input(&log, load_log_with_warnings(&read_input(&log)?))?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            let mut options = CheckOptions {
                prefix,
                ..CheckOptions::default()
            };
            if !types.is_empty() {
                options.kinds = types.into_iter().collect();
            }
            let report = check_with(&m, &l, &options);
            let text = match format {
                Format::Text => render_text(&report),
                Format::Json => save_report(&report),
            };
            match out {
                Some(path) => fs::write(&path, text)
                    .map_err(|e| InputError(format!("cannot write {}: {e}", path.display())))?,
                None => print!("{text}"),
            }
            Ok(if report.errors == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::ValidateModel { model } => {
            let (_, defects) = input(&model, parse_model(&read_input(&model)?))?;
            if defects.is_empty() {
                println!("{}: well-formed", model.display());
                Ok(ExitCode::SUCCESS)
            } else {
                println!("{}: {} defect(s)", model.display(), defects.len());
                for d in &defects {
                    println!("  - {d}");
                }
                Ok(ExitCode::from(1))
            }
        }
        Command::Generate {
            model,
            events,
            seed,
            inject,
        } => {
            let m = input(&model, load_model(&read_input(&model)?))?;
            let mut log = match generate_conforming(&m, events, seed) {
                Ok(log) => log,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Ok(ExitCode::from(1));
                }
            };
            let mut round = 0u64;
            for (kind, times) in inject {
                for _ in 0..times {
                    round += 1;
                    match inject_violation(&m, &log, kind, seed.wrapping_add(round)) {
                        Ok((mutant, injection)) => {
                            eprintln!(
                                "injected type {} at {}: {}",
                                kind, injection.at_event.id, injection.subject
                            );
                            log = mutant;
                        }
                        Err(e) => {
                            eprintln!("error: {e}");
                            return Ok(ExitCode::from(1));
                        }
                    }
                }
            }
            io::stdout()
                .write_all(save_log(&log).as_bytes())
                .map_err(|e| InputError(format!("cannot write standard output: {e}")))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Render { report } => {
            let r = input(&report, load_report(&read_input(&report)?))?;
            print!("{}", render_text(&r));
            Ok(ExitCode::SUCCESS)
        }
    }
}
