use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use twofield::experiments::{
    compare_schemes, even_odd_demo, identity_suite, large_n_diagnostic, conservation_table,
    reports_to_json, ExperimentReport, IdentityOptions, ScenarioParams,
};
use twofield::io::{save_series_csv, save_series_json, save_state_csv, save_text, write_series_csv, RunConfig};
use twofield::{run_with, EulerPath, Parity, RunOptions, Scheme, Shape};

#[derive(Parser)]
#[command(version, about = "Two-field cyclic lattice simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one initial state and write the observable time series.
    Run(RunArgs),
    /// Check the kernel closed forms and the exact identities by brute force.
    Verify(VerifyArgs),
    /// Conservation runs over the 3 shapes × 3 time steps grid.
    #[command(name = "paper-table")]
    Table(TableArgs),
    /// Reaction process against exact evolution from the same state.
    Compare(CompareArgs),
    /// Even-naive versus odd lattice, confined and wrapped packets.
    EvenOdd(EvenOddArgs),
}

#[derive(Args, Default)]
struct StateArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_sites: Option<usize>,
    #[arg(long)]
    lattice_constant: Option<f64>,
    #[arg(long, value_enum)]
    shape: Option<ShapeArg>,
    #[arg(long, allow_hyphen_values = true)]
    center: Option<i64>,
    /// Gaussian σ, or uniform half width W.
    #[arg(long)]
    width: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    velocity_index: Option<i64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    n_steps: Option<usize>,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long, value_enum)]
    parity_mode: Option<ParityArg>,
    #[arg(long, value_enum)]
    euler_path: Option<PathArg>,
    /// `site,a,b` CSV used as the initial state.
    #[arg(long)]
    initial_state: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    state: StateArgs,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Time-series CSV; standard output when neither output is given.
    #[arg(long)]
    output_csv: Option<PathBuf>,
    #[arg(long)]
    output_json: Option<PathBuf>,
    /// Final state as `site,a,b` CSV.
    #[arg(long)]
    final_state: Option<PathBuf>,
    /// Store full states in the JSON output every this many steps.
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Largest odd lattice size for the brute-force identities.
    #[arg(long, default_value_t = 21)]
    max_n: usize,
    #[arg(long, default_value_t = 50)]
    n_states: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, hide = true)]
    kernel_perturbation: f64,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    state: StateArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvenOddArgs {
    #[arg(long, default_value_t = 800)]
    n_even: usize,
    #[arg(long, default_value_t = 801)]
    n_odd: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Gaussian,
    Uniform,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Euler,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ParityArg {
    Odd,
    EvenNaive,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Direct,
    Spectral,
}

impl StateArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = self.$field.clone() { cfg.$field = v.into(); } )* };
        }
        take!(n_sites, lattice_constant, center, width, velocity_index, seed, tau, n_steps, record_every);
        if let Some(s) = self.shape {
            cfg.shape = match s {
                ShapeArg::Gaussian => Shape::Gaussian,
                ShapeArg::Uniform => Shape::Uniform,
                ShapeArg::Random => Shape::Random,
            };
        }
        if let Some(p) = self.parity_mode {
            cfg.parity_mode = match p {
                ParityArg::Odd => Parity::Odd,
                ParityArg::EvenNaive => Parity::EvenNaive,
            };
        }
        if let Some(p) = self.euler_path {
            cfg.euler_path = match p {
                PathArg::Direct => EulerPath::Direct,
                PathArg::Spectral => EulerPath::Spectral,
            };
        }
        if let Some(p) = &self.initial_state {
            cfg.initial_state = Some(p.clone());
        }
        Ok(cfg)
    }
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<()> {
    match output {
        Some(path) => save_text(text, path).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn render(reports: &[ExperimentReport], format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => reports_to_json(reports)? + "\n",
        Format::Text => reports.iter().map(|r| r.to_text()).collect::<Vec<_>>().join("\n"),
    })
}

fn failed_checks(reports: &[ExperimentReport]) -> Vec<String> {
    reports
        .iter()
        .flat_map(|r| r.failures().map(move |c| format!("{}: {}", r.scenario, c.name)))
        .collect()
}

/// Ok(true) when every check passed.
fn cmd_run(args: &RunArgs) -> Result<bool> {
    let mut cfg = args.state.resolve()?;
    if let Some(s) = args.scheme {
        cfg.scheme = match s {
            SchemeArg::Euler => Scheme::Euler,
            SchemeArg::Exact => Scheme::Exact,
        };
    }
    cfg.output_csv = args.output_csv.clone().or(cfg.output_csv);
    cfg.output_json = args.output_json.clone().or(cfg.output_json);
    cfg.final_state = args.final_state.clone().or(cfg.final_state);

    let lattice = cfg.validate()?;
    let initial = cfg.initial(&lattice)?;
    info!("running {} steps on N={}", cfg.n_steps, lattice.n_sites());
    let options = RunOptions {
        checkpoint_every: args.checkpoint_every,
    };
    let (series, last) = run_with(&initial, cfg.evolution(), cfg.n_steps, cfg.record_every, options)?;

    if let Some(path) = &cfg.output_csv {
        save_series_csv(&series, path)?;
    }
    if let Some(path) = &cfg.output_json {
        save_series_json(&series, path)?;
    }
    if cfg.output_csv.is_none() && cfg.output_json.is_none() {
        write_series_csv(&series, std::io::stdout().lock())?;
    }
    if let Some(path) = &cfg.final_state {
        save_state_csv(&last, path)?;
    }
    Ok(true)
}

fn cmd_verify(args: &VerifyArgs) -> Result<bool> {
    let mut options = IdentityOptions::up_to(args.max_n);
    options.n_states = args.n_states;
    options.seed = args.seed;
    options.kernel_perturbation = args.kernel_perturbation;
    let report = identity_suite(&options)?;
    let params = ScenarioParams::default();
    let diagnostic = large_n_diagnostic(&params.initial_state(Shape::Gaussian, args.seed)?, 1e-3);
    let reports = [report, diagnostic];
    print!("{}", render(&reports, Format::Text)?);
    if let Some(path) = &args.json {
        save_text(&render(&reports, Format::Json)?, path)?;
    }
    report_failures(&reports)
}

fn report_failures(reports: &[ExperimentReport]) -> Result<bool> {
    let failed = failed_checks(reports);
    for f in &failed {
        eprintln!("failed: {f}");
    }
    Ok(failed.is_empty())
}

fn cmd_table(args: &TableArgs) -> Result<bool> {
    let reports = conservation_table(args.steps, args.seed, &ScenarioParams::default())?;
    emit(&render(&reports, args.format)?, args.output.as_ref())?;
    report_failures(&reports)
}

fn cmd_compare(args: &CompareArgs) -> Result<bool> {
    let cfg = args.state.resolve()?;
    let lattice = cfg.validate()?;
    let initial = cfg.initial(&lattice)?;
    let rows = compare_schemes(&initial, cfg.tau, cfg.n_steps, cfg.record_every, cfg.euler_path)?;
    let mut out = String::from("step,state_distance,m_euler,m_exact,drift_euler,drift_exact\n");
    for r in rows {
        out += &format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.step, r.state_distance, r.m_euler, r.m_exact, r.drift_euler, r.drift_exact
        );
    }
    emit(&out, args.output.as_ref())?;
    Ok(true)
}

fn cmd_even_odd(args: &EvenOddArgs) -> Result<bool> {
    let report = even_odd_demo(args.n_even, args.n_odd)?;
    let reports = [report];
    emit(&render(&reports, args.format)?, None)?;
    report_failures(&reports)
}

/// 2 for configuration problems, 3 for numerical guards, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    use twofield::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::TimeStepTooLarge { .. } | E::NonFinite { .. } | E::ImaginaryResidue { .. }) => 3,
        Some(E::Io(_) | E::Json(_) | E::Csv(_)) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Table(a) => cmd_table(a),
        Command::Compare(a) => cmd_compare(a),
        Command::EvenOdd(a) => cmd_even_odd(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
