use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use alarmsim_core::analytics::{deadline_probability, deadline_probability_via_absorption, DtmcSpec};
use alarmsim_core::report::{self, write_experiment, write_sweep, write_timing};
use alarmsim_core::{load_config, selftest, PolicyKind, ScenarioConfig, SweepAxis};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "alarmsim", version, about = "Shared-alarm random access simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run independent replications of one scenario.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Access policy: drl, mapra or rch.
        #[arg(long)]
        policy: Option<PolicyKind>,
    },
    /// Run every policy over a list of values of one parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// n_subnets, n_channels, eta or dnn_shape.
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, num_args = 1.., required = true)]
        values: Vec<String>,
        #[arg(long, num_args = 1.., default_values = ["drl", "mapra", "rch"])]
        policies: Vec<PolicyKind>,
    },
    /// Tabulate in-time delivery probability against the deadline.
    Analyze {
        /// Per-slot success probabilities.
        #[arg(long, num_args = 1.., required = true)]
        ps: Vec<f64>,
        #[arg(long)]
        deadline: u32,
        /// Treat the values as P_s(0), P_s(1), ... of one age-dependent chain.
        #[arg(long)]
        by_age: bool,
    },
    /// Run the built-in oracle checks.
    Selftest,
    /// Print the default configuration as TOML.
    Config,
}

#[derive(Args)]
struct RunArgs {
    /// TOML scenario file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    slots: Option<u64>,
    /// Stop each run after this many detected alarm events.
    #[arg(long)]
    events: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

impl RunArgs {
    fn scenario(&self) -> alarmsim_core::Result<ScenarioConfig> {
        let mut c = match &self.config {
            Some(path) => load_config(&std::fs::read_to_string(path)?)?,
            None => ScenarioConfig::default(),
        };
        if let Some(r) = self.runs {
            c.n_runs = r;
        }
        if let Some(s) = self.slots {
            c.n_slots = s;
        }
        if let Some(e) = self.events {
            c.n_events = Some(e);
        }
        if let Some(k) = self.seed {
            c.rng_seed = k;
        }
        c.validate()?;
        Ok(c)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> alarmsim_core::Result<ExitCode> {
    match cli.command {
        Command::Simulate { run, policy } => {
            let mut config = run.scenario()?;
            if let Some(p) = policy {
                config.policy_kind = p;
            }
            simulate(&config, &run.out)
        }
        Command::Sweep {
            run,
            axis,
            values,
            policies,
        } => {
            let config = run.scenario()?;
            let t = Instant::now();
            let result = report::sweep(&config, axis, &values, &policies)?;
            write_sweep(&run.out, &result)?;
            write_timing(&run.out, t.elapsed())?;
            print!("{}", result.to_csv());
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { ps, deadline, by_age } => analyze(&ps, deadline, by_age),
        Command::Selftest => {
            let mut failed = Vec::new();
            for check in selftest::run_all() {
                match &check.outcome {
                    Ok(()) => println!("ok   {}", check.name),
                    Err(msg) => {
                        println!("FAIL {}: {msg}", check.name);
                        failed.push(check.name);
                    }
                }
            }
            if failed.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("failing invariants: {}", failed.join(", "));
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Config => {
            print!("{}", ScenarioConfig::default().to_toml());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn simulate(config: &ScenarioConfig, out: &Path) -> alarmsim_core::Result<ExitCode> {
    let t = Instant::now();
    let result = report::run_experiment(config)?;
    write_experiment(out, &result)?;
    write_timing(out, t.elapsed())?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.4}"));
    println!(
        "{} runs={} P<=D={} stderr={} delivered={} expired={} undetected={}",
        result.policy,
        result.runs.len(),
        fmt(result.mean),
        fmt(result.stderr),
        result.delivered,
        result.expired,
        result.undetected
    );
    Ok(ExitCode::SUCCESS)
}

fn analyze(ps: &[f64], deadline: u32, by_age: bool) -> alarmsim_core::Result<ExitCode> {
    println!("ps,deadline,p_in_time,p_violation,absorption_gap");
    let row = |label: String, dtmc: DtmcSpec| {
        let (a, b) = deadline_probability(&dtmc);
        let (c, _) = deadline_probability_via_absorption(&dtmc);
        println!("{label},{},{a},{b},{:e}", dtmc.deadline(), (a - c).abs());
    };
    if by_age {
        let len = deadline as usize + 1;
        if ps.len() < len {
            return Err(alarmsim_core::Error::InputLength {
                expected: len,
                got: ps.len(),
            });
        }
        for d in 0..len {
            let prefix = ps[..=d].to_vec();
            row(format!("age{d}"), DtmcSpec::new(prefix)?);
        }
    } else {
        for &p in ps {
            for d in 0..=deadline {
                row(p.to_string(), DtmcSpec::stationary(p, d)?);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
