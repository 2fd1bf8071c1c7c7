//! `lightcone`: conformal invariants of timelike surfaces from the command line.

mod commands;
mod config;
mod json;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lightcone_core::blaschke::PAIR_ORDER;

use crate::commands::{Outcome, FRAME_ORDER};
use crate::config::{build_grid, load_chart, parse_grid, parse_list, parse_rect, Format, PairFlags, RunConfig, Tolerances, DEFAULT_GRID};

#[derive(Parser, Debug)]
#[command(name = "lightcone", version, about = "Conformal invariants of timelike surfaces in the light-cone model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Frame data (s₁, s₂, ⟨κ₁,κ₂⟩, normalization) at grid points.
    Invariants(RunArgs),
    /// Sweep the structure and integrability residuals.
    Verify(RunArgs),
    /// Willmore, S-Willmore and isothermic detectors plus the Willmore energy.
    Detect(RunArgs),
    /// Classify the pair described by the config's [fields] or [pair] table.
    PairClassify(RunArgs),
    /// The dual S-Willmore pair.
    PairDual(RunArgs),
    /// Integrate the Darboux system and classify the result.
    PairDarboux(RunArgs),
    /// The pair obtained from a fixed point P.
    PairTrivial(RunArgs),
    /// Recover a minimal surface from an isothermic Willmore surface.
    Thomsen(RunArgs),
    /// List catalog charts, or print one as a config file.
    Catalog { name: Option<String> },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Chart config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Catalog chart name.
    #[arg(long)]
    chart: Option<String>,
    /// Grid size, NUxNV.
    #[arg(long, default_value_t = format!("{DEFAULT_GRID}x{DEFAULT_GRID}"))]
    grid: String,
    /// Grid rectangle u0,u1,v0,v1 (default: the chart domain minus a margin).
    #[arg(long, allow_hyphen_values = true)]
    rect: Option<String>,
    /// Chart jet order J.
    #[arg(long)]
    order: Option<usize>,
    /// Tolerance override, name=value; repeatable.
    #[arg(long = "tol")]
    tol: Vec<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Darboux spectral parameter.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Darboux initial values a,b,ζ₁,…
    #[arg(long, allow_hyphen_values = true)]
    init: Option<String>,
    /// Fixed point for pair-trivial, comma-separated coordinates.
    #[arg(long = "P", allow_hyphen_values = true)]
    point: Option<String>,
    /// Isothermic sign (1 or -1) for pair-darboux.
    #[arg(long, allow_hyphen_values = true)]
    sign: Option<i8>,
}

impl RunArgs {
    fn into_config(self, default_order: usize) -> Result<RunConfig> {
        let (chart, pair) = load_chart(self.config.as_ref(), self.chart.as_deref())?;
        let dims = parse_grid(&self.grid)?;
        let rect = self.rect.as_deref().map(parse_rect).transpose()?;
        let grid = build_grid(&chart, dims, rect)?;
        let flags = PairFlags {
            theta: self.theta,
            init: self.init.as_deref().map(parse_list).transpose()?,
            point: self.point.as_deref().map(parse_list).transpose()?,
            sign: self.sign,
        };
        Ok(RunConfig {
            chart,
            pair,
            flags,
            grid,
            order: self.order.unwrap_or(default_order),
            tol: Tolerances::parse(&self.tol)?,
            format: match self.format {
                FormatArg::Json => Format::Json,
                FormatArg::Csv => Format::Csv,
            },
            out: self.out,
        })
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<u8> {
    let (name, args) = match cli.command {
        Command::Catalog { name } => {
            emit(&commands::catalog(name.as_deref())?, None)?;
            return Ok(0);
        }
        Command::Invariants(a) => ("invariants", a),
        Command::Verify(a) => ("verify", a),
        Command::Detect(a) => ("detect", a),
        Command::PairClassify(a) => ("pair-classify", a),
        Command::PairDual(a) => ("pair-dual", a),
        Command::PairDarboux(a) => ("pair-darboux", a),
        Command::PairTrivial(a) => ("pair-trivial", a),
        Command::Thomsen(a) => ("thomsen", a),
    };
    let default_order = if name.starts_with("pair-") { PAIR_ORDER } else { FRAME_ORDER };
    let cfg = args.into_config(default_order)?;
    let Outcome { report, csv, code } = commands::run(name, &cfg)?;
    let text = match cfg.format {
        Format::Json => report.render(),
        Format::Csv => csv.render(),
    };
    emit(&text, cfg.out.as_ref())?;
    if code != 0 {
        if let Some(json::Json::Str(status)) = report.get("status") {
            eprintln!("{name}: {status}");
        }
    }
    Ok(code)
}

fn main() -> ExitCode {
    // Usage errors exit 1; code 2 is reserved for negative results.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
