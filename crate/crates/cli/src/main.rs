use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use calib_core::harness::{
    binomial_anticoncentration_check, property_suite_with, run_experiment, ExperimentSpec, MetricSpec,
    SuiteOptions, SUITES,
};
use calib_core::metrics::DEFAULT_ORACLE_CAP;
use calib_core::simulation::{run_game, trial_rngs, GameConfig};
use calib_core::textio::{read_transcript_file, write_transcript};
use calib_core::Transcript;
use clap::{Args, Parser, Subcommand};

/// Calibration measures and forecasting experiments.
///
/// Set CALIB_THREADS to cap the number of worker threads.
#[derive(Parser)]
#[command(name = "calib", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play one game and print its transcript followed by metrics.
    Simulate(SimulateArgs),
    /// Monte Carlo sweep over horizons with log-log slope fits.
    Sweep(SweepArgs),
    /// Run the randomized property suites and the binomial check.
    Verify(VerifyArgs),
    /// Compute metrics on a transcript file.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct MetricOpts {
    /// Comma-separated: ece, smce, caldist-exact, lower-caldist[:K], caldist-upper:<general|sparse>
    #[arg(long, value_delimiter = ',', default_value = "ece,smce")]
    metrics: Vec<String>,
    /// Grid size for `lower-caldist` entries that do not name one.
    #[arg(long = "grid-K")]
    grid_k: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    oracle_cap: usize,
}

impl MetricOpts {
    fn resolve(&self) -> Result<Vec<MetricSpec>> {
        self.metrics
            .iter()
            .map(|m| {
                let spec: MetricSpec = m.parse()?;
                Ok(match (spec, self.grid_k) {
                    (MetricSpec::LowerCaldist(None), Some(k)) => MetricSpec::LowerCaldist(Some(k)),
                    _ => spec,
                })
            })
            .collect()
    }

    fn print(&self, tr: &Transcript, out: &mut impl Write) -> Result<()> {
        for m in self.resolve()? {
            let v = m.evaluate(tr, self.oracle_cap)?;
            writeln!(out, "# {m} = {v}")?;
        }
        Ok(())
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long = "T")]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[arg(long, default_value = "adaptive-bias")]
    forecaster: String,
    #[arg(long, default_value = "bernoulli:0.5")]
    adversary: String,
    #[command(flatten)]
    metrics: MetricOpts,
    /// Write the transcript here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Key-value experiment file; flags below override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    /// Comma-separated horizons, e.g. `1e3,1e4,1e5` or `2^12,2^14`.
    #[arg(long = "T")]
    horizons: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    forecaster: Option<String>,
    #[arg(long)]
    adversary: Option<String>,
    #[arg(long)]
    metrics: Option<String>,
    #[arg(long = "grid-K")]
    grid_k: Option<usize>,
    #[arg(long)]
    oracle_cap: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suites to run; all of them when omitted.
    #[arg(long = "suite", value_delimiter = ',')]
    suites: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override each suite's case budget.
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long = "grid-K", default_value_t = 1000)]
    grid_k: usize,
    #[arg(long, default_value_t = 100_000)]
    binomial_samples: usize,
}

#[derive(Args)]
struct MetricsArgs {
    /// Transcript file: `outcome,prediction[,plan row]` per line.
    file: PathBuf,
    #[command(flatten)]
    metrics: MetricOpts,
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let tr = run_game(&GameConfig {
        horizon: args.horizon,
        forecaster: args.forecaster,
        adversary: args.adversary,
        seed: args.seed,
        trial: args.trial,
    })?;
    let text = write_transcript(&tr, None)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match &args.out {
        Some(path) => std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?,
        None => out.write_all(text.as_bytes())?,
    }
    args.metrics.print(&tr, &mut out)
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentSpec::parse(&text)?
        }
        None => ExperimentSpec::default(),
    };
    let overrides = [
        ("name", args.name),
        ("T", args.horizons),
        ("trials", args.trials.map(|v| v.to_string())),
        ("seed", args.seed.map(|v| v.to_string())),
        ("forecaster", args.forecaster),
        ("adversary", args.adversary),
        ("metrics", args.metrics),
        ("oracle_cap", args.oracle_cap.map(|v| v.to_string())),
        ("out", args.out.map(|p| p.display().to_string())),
        ("format", args.format),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            spec.set(key, &v)?;
        }
    }
    if let Some(k) = args.grid_k {
        for m in &mut spec.metrics {
            if *m == MetricSpec::LowerCaldist(None) {
                *m = MetricSpec::LowerCaldist(Some(k));
            }
        }
    }
    let report = run_experiment(&spec)?;
    if spec.output.is_none() {
        print!("{}", report.render(spec.format));
    }
    for fit in &report.fits {
        eprintln!(
            "{}: slope {:.4} intercept {:.4} residual {:.3e}",
            fit.metric, fit.slope, fit.intercept, fit.residual
        );
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<bool> {
    let suites: Vec<String> = if args.suites.is_empty() {
        SUITES.iter().map(|s| s.to_string()).collect()
    } else {
        args.suites
    };
    let opts = SuiteOptions {
        cases: args.cases,
        grid_k: args.grid_k,
        ..SuiteOptions::default()
    };
    let mut ok = true;
    for name in &suites {
        let r = property_suite_with(name, args.seed, &opts)?;
        println!(
            "{} {name}: {} cases, {} failures",
            if r.passed() { "PASS" } else { "FAIL" },
            r.cases,
            r.failed
        );
        for c in &r.counterexamples {
            println!("  {c}");
        }
        ok &= r.passed();
    }
    let (mut rng, _) = trial_rngs(args.seed, 0);
    let (freq, pass) = binomial_anticoncentration_check(4096, args.binomial_samples, &mut rng)?;
    println!(
        "{} binomial anti-concentration: frequency {freq:.4} over {} samples",
        if pass { "PASS" } else { "FAIL" },
        args.binomial_samples
    );
    Ok(ok && pass)
}

fn metrics(args: MetricsArgs) -> Result<()> {
    let (tr, _) = read_transcript_file(&args.file)?;
    let stdout = std::io::stdout();
    args.metrics.print(&tr, &mut stdout.lock())
}

fn run() -> Result<bool> {
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Verify(a) => verify(a),
        Command::Metrics(a) => metrics(a).map(|_| true),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
