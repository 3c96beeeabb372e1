use std::fs;
use std::io::Read as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use momentgate::exec::configure_jobs;
use momentgate::report::{
    analyze_cached, cache_dir_from_env, exit_code, parse_grid, render_csv, render_json,
    render_pretty, sweep, Family, Format, RunConfig, SummaryRow,
};
use momentgate::verify::{render_verify, run_suite, Suite};
use momentgate::SequenceSpec;

/// Injectivity and surjectivity of the Stieltjes and origin moment mappings
/// on weight-sequence classes.
#[derive(Parser)]
#[command(name = "momentgate", version)]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Opts {
    /// Largest index p examined.
    #[arg(long, global = true, default_value_t = 10_000)]
    horizon: usize,
    /// Bracket width for the growth indices.
    #[arg(long, global = true, default_value_t = 0.05)]
    tol: f64,
    /// Relative tolerance of adaptive quadrature.
    #[arg(long, global = true, default_value_t = 1e-8)]
    quad_tol: f64,
    /// json, csv or pretty. Defaults to csv for sweep and json otherwise.
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Seed for randomized verification checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Largest β probed for the γ index.
    #[arg(long, global = true, default_value_t = 64.0)]
    beta_max: f64,
    /// Write output to FILE instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Classify one weight sequence.
    Analyze {
        /// Sequence spec as inline JSON, a file path, or - for stdin.
        spec: String,
    },
    /// Classify a parameterized family over a grid, one CSV row per value.
    Sweep {
        /// gevrey, q_gevrey or example38_power.
        #[arg(long)]
        family: Family,
        /// start:stop:step or a comma-separated list.
        #[arg(long)]
        grid: String,
    },
    /// Run a verification battery.
    Verify {
        /// gfun, moments, inversion or example38.
        suite: Suite,
    },
}

impl Opts {
    fn config(&self, default_format: Format) -> RunConfig {
        RunConfig {
            horizon: self.horizon,
            tol: self.tol,
            quad_tol: self.quad_tol,
            format: self.format.unwrap_or(default_format),
            seed: self.seed,
            jobs: self.jobs,
            beta_max: self.beta_max,
            ..RunConfig::default()
        }
    }
}

fn read_spec(arg: &str) -> Result<SequenceSpec, String> {
    let trimmed = arg.trim_start();
    let (text, origin) = if trimmed.starts_with('{') {
        (arg.to_string(), "inline spec".to_string())
    } else if arg == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| format!("stdin: {e}"))?;
        (s, "stdin".to_string())
    } else {
        let s = fs::read_to_string(arg).map_err(|e| format!("{arg}: {e}"))?;
        (s, arg.to_string())
    };
    SequenceSpec::from_json(&text).map_err(|e| format!("{origin}: {e}"))
}

fn sweep_output(rows: &[SummaryRow], format: Format) -> Result<String, String> {
    match format {
        Format::Csv => render_csv(rows).map_err(|e| e.to_string()),
        Format::Json => serde_json::to_value(rows)
            .map(|v| render_json(&v))
            .map_err(|e| e.to_string()),
        Format::Pretty => Ok(rows
            .iter()
            .map(|r| {
                if r.error.is_empty() {
                    format!(
                        "{:<28} injective {:<17} surjective {:<17} gamma [{}, {}] omega {}\n",
                        r.label, r.injective, r.surjective, r.gamma_lower, r.gamma_upper, r.omega_estimate
                    )
                } else {
                    format!("{:<28} error: {}\n", r.label, r.error)
                }
            })
            .collect()),
    }
}

fn run(cli: Cli) -> Result<(String, u8), String> {
    if let Some(jobs) = cli.opts.jobs {
        if jobs == 0 {
            return Err("--jobs must be >= 1".into());
        }
        configure_jobs(jobs);
    }
    let cache = cache_dir_from_env();
    match &cli.command {
        Command::Analyze { spec } => {
            let config = cli.opts.config(Format::Json);
            let spec = read_spec(spec)?;
            let report = analyze_cached(&spec, &config, cache.as_deref()).map_err(|e| e.to_string())?;
            let text = match config.format {
                Format::Json => render_json(&report),
                Format::Pretty => render_pretty(&report),
                Format::Csv => render_csv(&[SummaryRow::from_report(&report, None)]).map_err(|e| e.to_string())?,
            };
            Ok((text, exit_code(&report) as u8))
        }
        Command::Sweep { family, grid } => {
            let config = cli.opts.config(Format::Csv);
            let grid = parse_grid(grid).map_err(|e| e.to_string())?;
            let rows = sweep(*family, &grid, &config, cache.as_deref()).map_err(|e| e.to_string())?;
            let code = if rows.iter().all(|r| !r.error.is_empty()) { 1 } else { 0 };
            Ok((sweep_output(&rows, config.format)?, code))
        }
        Command::Verify { suite } => {
            let config = cli.opts.config(Format::Json);
            let report = run_suite(*suite, &config).map_err(|e| e.to_string())?;
            let text = render_verify(&report, config.format).map_err(|e| e.to_string())?;
            Ok((text, if report.passed { 0 } else { 1 }))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let out = cli.opts.out.clone();
    match run(cli) {
        Ok((text, code)) => {
            let written = match &out {
                Some(path) => fs::write(path, &text).map_err(|e| format!("{}: {e}", path.display())),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            match written {
                Ok(()) => ExitCode::from(code),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
