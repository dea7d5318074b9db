mod commands;
mod meta;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use missreg::Error;

#[derive(Debug, Parser)]
#[command(name = "missreg", version, about = "Sparse regression and confidence intervals with covariates missing at random")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
struct Global {
    /// Random seed recorded in every output.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker threads for parallel work.
    #[arg(long, global = true, env = "MISSREG_WORKERS")]
    workers: Option<usize>,
    /// Output format on standard output (json, except csv for `precision`
    /// and `ci`).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the modified Dantzig selector.
    Fit(commands::FitArgs),
    /// Estimate the precision matrix column by column.
    Precision(commands::PrecisionArgs),
    /// De-biased estimates and confidence intervals.
    Ci(commands::CiArgs),
    /// Run a simulation experiment from a JSON config.
    Simulate(commands::SimulateArgs),
    /// Numerical checks of the lower-bound constructions.
    KlVerify(commands::KlArgs),
}

#[derive(Debug, Serialize)]
struct ErrorReport<'a> {
    stage: Option<String>,
    kind: &'a str,
    error: String,
}

fn report_error(e: &Error) -> ExitCode {
    let numerical = e.is_numerical();
    let rep = ErrorReport {
        stage: e.stage().map(|s| s.to_string()),
        kind: if numerical { "numerical" } else { "input" },
        error: e.to_string(),
    };
    eprintln!("{}", serde_json::to_string(&rep).expect("error report serializes"));
    ExitCode::from(if numerical { 2 } else { 1 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(w) = cli.global.workers {
        if w == 0 {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(1);
        }
        // one-shot commands share the global pool; experiments build their own
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let g = &cli.global;
    let res = match &cli.command {
        Command::Fit(a) => commands::fit(g, a),
        Command::Precision(a) => commands::precision(g, a),
        Command::Ci(a) => commands::ci(g, a),
        Command::Simulate(a) => commands::simulate(g, a),
        Command::KlVerify(a) => commands::kl_verify(g, a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}
