mod commands;
mod config;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::Variant;
use config::{parse_adjustment, parse_years, Settings};

/// Constant-increment trend and fluctuation analysis of GDP per capita panels.
#[derive(Parser)]
#[command(name = "gdptrend", version)]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Flags {
    /// Flat `key = value` config file; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// GDP per capita panel in 2002 EKS dollars (`country,year,value`)
    #[arg(long, global = true)]
    gdp_eks: Option<PathBuf>,
    /// GDP per capita panel in 1990 Geary-Khamis dollars
    #[arg(long, global = true)]
    gdp_gk: Option<PathBuf>,
    /// Population totals or age pyramid
    #[arg(long, global = true)]
    population: Option<PathBuf>,
    /// Reference country [default: USA]
    #[arg(long, global = true)]
    reference: Option<String>,
    /// Histogram bin width [default: 200]
    #[arg(long, global = true)]
    bin_width: Option<f64>,
    /// Tail multiplier k for the k-sigma excess count [default: 3]
    #[arg(long, global = true)]
    tail_k: Option<f64>,
    /// Countries left out of the SUBSET distribution (comma separated)
    #[arg(long, global = true, value_delimiter = ',')]
    exclude: Option<Vec<String>>,
    /// Output directory [default: out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for `simulate`, overriding the spec file
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Fill and trim every GDP series to START:END
    #[arg(long, global = true, value_parser = parse_years)]
    years: Option<std::ops::RangeInclusive<i32>>,
    /// Specific-age adjustment factor, COUNTRY=FACTOR (repeatable)
    #[arg(long, global = true, value_parser = parse_adjustment)]
    adjust: Vec<(String, f64)>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, fill and check the input panels
    Validate,
    /// Per-country mean increments and trend slopes
    Table1,
    /// Pooled increment distribution against a fitted normal
    Dist {
        #[arg(long, value_enum, ignore_case = true, default_value = "EKS_ORIGINAL")]
        variant: Variant,
    },
    /// Yearly increments of target countries against the reference mean
    Compare {
        #[arg(long, value_delimiter = ',', required = true)]
        targets: Vec<String>,
    },
    /// Generate a synthetic panel from a JSON spec
    Simulate {
        #[arg(long)]
        spec: PathBuf,
    },
}

impl Flags {
    fn settings(&self) -> Settings {
        Settings {
            gdp_eks: self.gdp_eks.clone(),
            gdp_gk: self.gdp_gk.clone(),
            population: self.population.clone(),
            reference: self.reference.clone(),
            bin_width: self.bin_width,
            tail_k: self.tail_k,
            exclude: self.exclude.as_ref().map(|v| {
                v.iter()
                    .map(|c| c.trim().to_string())
                    .filter(|c| !c.is_empty())
                    .collect::<BTreeSet<_>>()
            }),
            out: self.out.clone(),
            seed: self.seed,
            years: self.years.clone(),
            adjustments: self.adjust.iter().cloned().collect(),
            stated: Default::default(),
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let file = match &cli.flags.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let cfg = cli.flags.settings().over(file).resolve()?;
    match cli.command {
        Command::Validate => commands::validate(&cfg),
        Command::Table1 => commands::table1(&cfg).map(|_| true),
        Command::Dist { variant } => commands::dist(&cfg, variant).map(|_| true),
        Command::Compare { targets } => commands::compare(&cfg, &targets).map(|_| true),
        Command::Simulate { spec } => commands::simulate(&cfg, &spec).map(|_| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
