use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use liedrag::acceptance;
use liedrag::scenario::{self, parse_config, run_scenario, ScenarioConfig, RECIPES};

#[derive(Parser)]
#[command(name = "liedrag", version, about = "Ideal MHD runs with advected-invariant diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario described by a TOML config.
    Run {
        config: PathBuf,
        /// Override the output directory from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate acceptance criteria (`all` or one of A1..A10).
    Check {
        #[arg(default_value = "all")]
        name: String,
    },
    /// List initial-condition recipes and their parameters.
    ListInits,
    /// Print the config schema with defaults and the CSV column layout.
    DumpSchema,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 4;

fn exit(code: i32) -> ExitCode {
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}

fn configure_threads() {
    if let Ok(v) = std::env::var("LIEDRAG_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size the thread pool: {e}");
                }
            }
            _ => log::warn!("ignoring LIEDRAG_THREADS={v:?}: expected a positive integer"),
        }
    }
}

fn run(config: PathBuf, out: Option<PathBuf>) -> ExitCode {
    let mut cfg = match parse_config(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit(e.exit_code());
        }
    };
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    match run_scenario(&cfg) {
        Ok(outcome) => match outcome.error {
            None => {
                println!(
                    "finished: {} steps, t = {}, outputs in {}",
                    outcome.steps,
                    outcome.last_valid_time(),
                    cfg.output.dir.display()
                );
                ExitCode::SUCCESS
            }
            Some(e) => {
                eprintln!("error: {e}");
                eprintln!("partial outputs kept in {}", cfg.output.dir.display());
                exit(e.exit_code())
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            exit(e.exit_code())
        }
    }
}

fn check(name: &str) -> ExitCode {
    let reports = match acceptance::check(name) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    for r in &reports {
        print!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    println!("{} of {} criteria passed", reports.len() - failed, reports.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ACCEPTANCE)
    }
}

fn list_inits() {
    for r in &RECIPES {
        println!("{}: {}", r.name, r.summary);
        for (p, v) in r.params {
            println!("    init.params.{p} = {v}");
        }
    }
}

fn dump_schema() -> ExitCode {
    let cfg = ScenarioConfig::default();
    let text = match cfg.to_toml() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return exit(e.exit_code());
        }
    };
    println!("# Scenario config with every default filled in. Keys may also be");
    println!("# written dotted, e.g. `run.t_end = 0.5`. Unknown keys are rejected.");
    println!("# Optional keys: run.cfl | run.dt, clebsch_init.{{phi0, r0, lambda0, mu0_field, Gamma0}},");
    println!("# diagnostics.charge_region = {{ lo = [..], hi = [..] }}, [[diagnostics.integrals]].");
    println!("{text}");
    let (integrals, residuals) = scenario::runner::columns(&cfg);
    println!("# diagnostics.csv columns, schema version {}", scenario::runner::SCHEMA_VERSION);
    println!("# t");
    for c in integrals.iter().chain(&residuals) {
        println!("# {c}");
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    configure_threads();
    match Cli::parse().command {
        Command::Run { config, out } => run(config, out),
        Command::Check { name } => check(&name),
        Command::ListInits => {
            list_inits();
            ExitCode::SUCCESS
        }
        Command::DumpSchema => dump_schema(),
    }
}
