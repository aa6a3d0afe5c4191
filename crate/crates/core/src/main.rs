use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dfoq::error::Error;
use dfoq::harness::cmd_model;
use dfoq::harness::config::{parse_vector, PartialConfig, SweepConfig};
use dfoq::harness::sweep::{cmd_sweep, render};
use dfoq::harness::verify::{run, Suite};

/// Quadratic interpolation models for derivative-free optimization.
#[derive(Parser)]
#[command(name = "dfoq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build one model and print it as JSON.
    Model(Flags),
    /// Sweep the sample radius and compare errors with their bounds.
    Sweep(Flags),
    /// Run a fixture suite: examples, relationships, bounds or all.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct Flags {
    /// Test function name.
    #[arg(long)]
    function: Option<String>,
    /// Center, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Sample set: a JSON file, structured:p or random:p[:seed].
    #[arg(long)]
    set: Option<String>,
    /// mn, mfn or qs:<preset>.
    #[arg(long)]
    model: Option<String>,
    /// start:factor:count.
    #[arg(long)]
    deltas: Option<String>,
    /// Ball samples per radius.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// JSON file with any of the settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Residual tolerance.
    #[arg(long, env = "DFOQ_TOL", hide_env_values = true)]
    tol: Option<f64>,
}

impl Flags {
    fn resolve(self) -> Result<SweepConfig, Error> {
        let base = match &self.config {
            Some(p) => PartialConfig::from_file(p)?,
            None => PartialConfig::default(),
        };
        let flags = PartialConfig {
            function: self.function,
            x0: self.x0.as_deref().map(parse_vector).transpose()?,
            set: self.set,
            model: self.model,
            deltas: self.deltas,
            samples: self.samples,
            out: self.out,
            format: self.format,
            jobs: self.jobs,
            seed: self.seed,
            tol: self.tol,
        };
        SweepConfig::resolve(base.merge(flags))
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    if e.is_infeasible() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Model(flags) => flags.resolve().and_then(|cfg| {
            let v = cmd_model(&cfg)?;
            let text = serde_json::to_string_pretty(&v).expect("model JSON serializes") + "\n";
            emit(&text, cfg.out.as_ref())
        }),
        Command::Sweep(flags) => flags.resolve().and_then(|cfg| {
            let res = cmd_sweep(&cfg)?;
            emit(&render(&res, cfg.format)?, cfg.out.as_ref())?;
            let summary = serde_json::json!({ "metadata": res.metadata, "summary": res.summary });
            eprintln!("{summary}");
            Ok(())
        }),
        Command::Verify { suite, seed } => {
            match suite
                .parse::<Suite>()
                .and_then(|s| run(s, seed.unwrap_or(0)))
            {
                Ok(checks) => {
                    for c in &checks {
                        println!("{c}");
                    }
                    let failed = checks.iter().filter(|c| !c.passed).count();
                    println!("{} checks, {failed} failed", checks.len());
                    return if failed == 0 {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    };
                }
                Err(e) => Err(e),
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => exit_for(&e),
    }
}
