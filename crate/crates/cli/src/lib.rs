//! Command-line front end: argument parsing, config files, CSV and manifest
//! output, and SVG plots.

use std::ffi::OsString;

use clap::{CommandFactory, FromArgMatches};
use thiserror::Error;
use twosite_coag::particles::RNG_ID;

pub mod args;
pub mod commands;
pub mod config_file;
pub mod csvio;
pub mod manifest;
pub mod plot;

use args::{Cli, Command, Common, PlotArgs};
use manifest::{resolved_params, unix_now, Outputs, RunManifest, MANIFEST_NAME};

#[derive(Debug, Error, PartialEq)]
pub enum CliError {
    /// Bad flags, config keys or parameter values.
    #[error("{0}")]
    Usage(String),
    /// Numerical or I/O failure during a run.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    match try_run(argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn try_run(argv: Vec<OsString>) -> Result<(), CliError> {
    let argv = config_file::expand(argv)?;
    let matches = match Cli::command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return Ok(());
            }
            let msg = e.render().to_string();
            return Err(CliError::Usage(msg.trim_start_matches("error: ").trim_end().to_string()));
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    let name = cli.command.name();
    if let Command::Plot(p) = &cli.command {
        return plot_cmd(p);
    }
    let (sub_cmd, sub_matches) = {
        let root = Cli::command();
        let sub = root.find_subcommand(name).expect("known subcommand").clone();
        (sub, matches.subcommand_matches(name).expect("matched subcommand").clone())
    };
    let params = resolved_params(&sub_cmd, &sub_matches);
    let common: &Common = match &cli.command {
        Command::Mc(a) => &a.common,
        Command::Ode(a) => &a.common,
        Command::Moments(a) => &a.common,
        Command::Meanfield(a) => &a.common,
        Command::Postgel(a) => &a.common,
        Command::Compare(a) => &a.common,
        Command::Plot(_) => unreachable!(),
    };
    let start = unix_now();
    let mut out = Outputs::new(&common.out);
    let report = match &cli.command {
        Command::Mc(a) => commands::mc(a, &mut out)?,
        Command::Ode(a) => commands::ode(a, &mut out)?,
        Command::Moments(a) => commands::moments(a, &mut out)?,
        Command::Meanfield(a) => commands::meanfield(a, &mut out)?,
        Command::Postgel(a) => commands::postgel(a, &mut out)?,
        Command::Compare(a) => commands::compare_cmd(a, &mut out)?,
        Command::Plot(_) => unreachable!(),
    };
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: name.to_string(),
        params,
        seeds: report.seeds,
        rng: RNG_ID.to_string(),
        start_unix: start,
        end_unix: unix_now(),
        results: report.results,
        outputs: out.files().to_vec(),
    };
    let path = out.dir().join(MANIFEST_NAME);
    std::fs::write(&path, manifest.render())
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

fn plot_cmd(args: &PlotArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.input.display())))?;
    let table = csvio::Table::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", args.input.display())))?;
    let spec = plot::PlotSpec {
        x: args.x.clone(),
        y: args.y.clone(),
        group: args.group.clone(),
        log_y: args.log_y,
        title: args.title.clone(),
    };
    let svg = plot::render_svg(&table, &spec)?;
    std::fs::write(&args.output, svg)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", args.output.display())))
}
