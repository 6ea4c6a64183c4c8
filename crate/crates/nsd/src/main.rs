//! Command-line front end.
//!
//! Output conventions: report-producing subcommands (`mc-eigen`,
//! `mc-amplitude`, `analytics`) write JSON by default and a CSV table when
//! `--out` ends in `.csv`; the CSV column order is
//! `name,analytic,mc,stderr,z,pass`. `propagate` writes the raw binary
//! field format; `nft` writes spectrum records
//! `{zeta_re, zeta_im, qd_re, qd_im}`. Exit status is 0 only if the run
//! succeeded and every requested check passed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nsd::analytics::{example1_stats, InputEnsemble, StatReport};
use nsd::error::{Error, Result};
use nsd::harness::{
    analytic_reports, registered_checks, reports_to_csv, reports_to_json_lines, run_experiment,
    ExperimentConfig, Mode,
};
use nsd::nft::{find_discrete_spectrum, DiscreteSpectrum, SearchRegion};
use nsd::ssfm::{propagate, PropagationConfig};
use nsd::units::FiberParams;
use nsd::waveform::{make_nsoliton, Signal, TimeGrid};

#[derive(Parser)]
#[command(
    name = "nsd",
    about = "Soliton spectral-noise models: synthesis, transforms, simulation, statistics",
    version
)]
struct Cli {
    /// Master RNG seed; overrides the seed in any config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for Monte Carlo trials (default: one per CPU).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output path (default stdout). For reports, a `.csv` extension
    /// selects the CSV table; anything else gets JSON.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Recover the discrete spectrum of a stored or synthesized field.
    Nft(NftArgs),
    /// Integrate the stochastic field equation over an input field.
    Propagate(PropagateArgs),
    /// Monte Carlo checks on eigenvalue noise coordinates.
    McEigen(McEigenArgs),
    /// Monte Carlo checks on the spectral-amplitude channel (reduced model).
    McAmplitude(McArgs),
    /// Closed-form statistics for an ensemble, no simulation.
    Analytics(AnalyticsArgs),
    /// Two-pulse link example: variance ratio and components vs launch power.
    Example1(Example1Args),
}

#[derive(Args)]
struct NftArgs {
    /// Input field: binary `.bin` from `propagate`, or spectrum records
    /// `.json` synthesized onto the grid first.
    #[arg(long = "in")]
    input: PathBuf,

    /// Eigenvalue search region, e.g. "re:[-1,1] im:(0,2]".
    #[arg(long)]
    search: Option<String>,

    /// Stop after this many eigenvalues (default: search exhaustively).
    #[arg(long)]
    count: Option<usize>,

    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct PropagateArgs {
    /// Config file with keys dz, total_z, eps2, seed, noise_on.
    #[arg(long)]
    config: PathBuf,

    /// Input field (`.bin`) or spectrum records (`.json`).
    #[arg(long = "in")]
    input: PathBuf,

    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct GridArgs {
    /// Time-domain span when synthesizing a field from spectrum records.
    #[arg(long, default_value_t = 80.0)]
    grid_width: f64,

    /// Samples on that span.
    #[arg(long, default_value_t = 4096)]
    grid_n: usize,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum CliMode {
    /// Reduced parameter stochastic differential equations.
    Sde,
    /// Full-field split-step propagation plus spectral measurement.
    Ssfm,
}

#[derive(Args)]
struct McEigenArgs {
    /// Trial generator.
    #[arg(long, value_enum, default_value_t = CliMode::Sde)]
    mode: CliMode,

    #[command(flatten)]
    mc: McArgs,

    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct McArgs {
    /// Monte Carlo trials.
    #[arg(long, default_value_t = 10_000)]
    trials: u64,

    /// Ensemble config file; without it the point flags below apply.
    #[arg(long)]
    ensemble: Option<PathBuf>,

    /// Launch eigenvalue real part (point ensembles).
    #[arg(long, default_value_t = 0.0)]
    alpha0: f64,

    /// Launch eigenvalue imaginary part (point ensembles).
    #[arg(long, default_value_t = 0.5)]
    beta0: f64,

    /// Launch pulse centre (point ensembles).
    #[arg(long, default_value_t = 0.0)]
    t00: f64,

    /// Noise strength (epsilon squared).
    #[arg(long, default_value_t = 2e-3)]
    eps2: f64,

    /// Propagation span.
    #[arg(long, default_value_t = 10.0)]
    length: f64,

    /// Integration step.
    #[arg(long, default_value_t = 1e-2)]
    dz: f64,

    /// Comma-separated check names; `--list-checks` shows the registry.
    #[arg(long)]
    checks: Option<String>,

    /// Print every registered check name and exit.
    #[arg(long)]
    list_checks: bool,
}

#[derive(Args)]
struct AnalyticsArgs {
    /// Ensemble config file; without it the point flags below apply.
    #[arg(long)]
    ensemble: Option<PathBuf>,

    /// Launch eigenvalue real part (point ensembles).
    #[arg(long, default_value_t = 0.0)]
    alpha0: f64,

    /// Launch eigenvalue imaginary part (point ensembles).
    #[arg(long, default_value_t = 0.5)]
    beta0: f64,

    /// Launch pulse centre (point ensembles).
    #[arg(long, default_value_t = 0.0)]
    t00: f64,

    /// Noise strength (epsilon squared).
    #[arg(long)]
    eps2: f64,

    /// Propagation span.
    #[arg(long)]
    length: f64,
}

#[derive(Args)]
struct Example1Args {
    /// Launch power in milliwatts.
    #[arg(long)]
    power_mw: f64,

    /// Pulse separation in input widths.
    #[arg(long, default_value_t = 7.0)]
    separation: f64,

    /// Link length in kilometres.
    #[arg(long, default_value_t = 7000.0)]
    length_km: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n > 0 {
            // Ignore the error if a pool already exists; the default then
            // stands, which only affects scheduling, never results.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match dispatch(&cli) {
        Ok(all_pass) => {
            if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Runs the subcommand; Ok(false) means it ran but a check failed.
fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.cmd {
        Cmd::Nft(args) => cmd_nft(cli, args),
        Cmd::Propagate(args) => cmd_propagate(cli, args),
        Cmd::McEigen(args) => {
            let mode = match args.mode {
                CliMode::Sde => Mode::Sde,
                CliMode::Ssfm => Mode::Ssfm,
            };
            let default_checks = "mean_ups_r,mean_ups_i,m2_ups_r,m2_ups_i,corr_ups";
            cmd_mc(cli, &args.mc, mode, default_checks, &args.grid)
        }
        Cmd::McAmplitude(args) => {
            let default_checks =
                "mean_gamma_i,m2_gamma_r,m2_gamma_i,cross_gamma_r_i,mean_mag,var_mag";
            let grid = GridArgs { grid_width: 80.0, grid_n: 4096 };
            cmd_mc(cli, args, Mode::Sde, default_checks, &grid)
        }
        Cmd::Analytics(args) => cmd_analytics(cli, args),
        Cmd::Example1(args) => cmd_example1(cli, args),
    }
}

/// Reads a field from disk: spectrum records are synthesized onto the grid,
/// anything else is taken as the binary field format.
fn load_field(path: &Path, grid: &GridArgs) -> Result<Signal> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let spec = DiscreteSpectrum::from_json_str(&text)?;
        let grid = TimeGrid::centered(grid.grid_width, grid.grid_n)?;
        make_nsoliton(&spec.entries, 0.0, &grid)
    } else {
        let file = fs::File::open(path).map_err(io_err(path))?;
        Signal::read_binary(std::io::BufReader::new(file))
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Config { message: format!("{}: {e}", path.display()) }
}

fn write_output(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(io_err(path)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn wants_csv(out: &Option<PathBuf>) -> bool {
    out.as_deref()
        .and_then(Path::extension)
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn cmd_nft(cli: &Cli, args: &NftArgs) -> Result<bool> {
    let sig = load_field(&args.input, &args.grid)?;
    let region = match &args.search {
        Some(text) => SearchRegion::parse(text)?,
        None => SearchRegion::upper_default(),
    };
    let found = find_discrete_spectrum(&sig, &region, args.count)?;
    write_output(&cli.out, &(found.to_json_string() + "\n"))?;
    eprintln!("found {} eigenvalue(s)", found.entries.len());
    Ok(true)
}

fn cmd_propagate(cli: &Cli, args: &PropagateArgs) -> Result<bool> {
    let mut cfg = PropagationConfig::from_config_file(&args.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let sig = load_field(&args.input, &args.grid)?;
    let out_sig = propagate(&sig, &cfg)?;
    let path = cli.out.as_ref().ok_or(Error::Config {
        message: "propagate writes a binary field; pass --out".into(),
    })?;
    let file = fs::File::create(path).map_err(io_err(path))?;
    out_sig.write_binary(std::io::BufWriter::new(file))?;
    eprintln!("propagated to z = {} ({} samples)", out_sig.z, out_sig.samples.len());
    Ok(true)
}

fn load_ensemble(
    path: &Option<PathBuf>,
    alpha0: f64,
    beta0: f64,
    t00: f64,
) -> Result<InputEnsemble> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            InputEnsemble::from_config_str(&text)
        }
        None => InputEnsemble::point(alpha0, beta0, t00),
    }
}

fn cmd_mc(
    cli: &Cli,
    args: &McArgs,
    mode: Mode,
    default_checks: &str,
    grid: &GridArgs,
) -> Result<bool> {
    if args.list_checks {
        let mut text = String::new();
        for name in registered_checks() {
            text.push_str(name);
            text.push('\n');
        }
        write_output(&cli.out, &text)?;
        return Ok(true);
    }
    let checks: Vec<String> = args
        .checks
        .as_deref()
        .unwrap_or(default_checks)
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    let cfg = ExperimentConfig {
        mode,
        trials: args.trials,
        ensemble: load_ensemble(&args.ensemble, args.alpha0, args.beta0, args.t00)?,
        propagation: PropagationConfig {
            dz: args.dz,
            total_z: args.length,
            eps: args.eps2.sqrt(),
            seed: 0,
            noise_on: args.eps2 > 0.0,
        },
        checks,
        master_seed: cli.seed.unwrap_or(1),
        grid_width: grid.grid_width,
        grid_n: grid.grid_n,
    };
    let result = run_experiment(&cfg)?;
    let text = if wants_csv(&cli.out) {
        reports_to_csv(&result.reports)
    } else {
        reports_to_json_lines(&result.reports)
    };
    write_output(&cli.out, &text)?;
    let passed = result.reports.iter().filter(|r| r.pass).count();
    eprintln!("{passed}/{} checks passed", result.reports.len());
    if !result.failures.is_empty() {
        eprintln!("{} of {} trials errored", result.failures.len(), cfg.trials);
    }
    Ok(result.all_pass())
}

fn json_array(reports: &[StatReport]) -> String {
    let lines: Vec<String> = reports.iter().map(|r| format!("  {}", r.to_json_line())).collect();
    format!("[\n{}\n]\n", lines.join(",\n"))
}

fn cmd_analytics(cli: &Cli, args: &AnalyticsArgs) -> Result<bool> {
    let ens = load_ensemble(&args.ensemble, args.alpha0, args.beta0, args.t00)?;
    let reports = analytic_reports(&ens, args.eps2, args.length)?;
    let text = if wants_csv(&cli.out) { reports_to_csv(&reports) } else { json_array(&reports) };
    write_output(&cli.out, &text)?;
    Ok(true)
}

fn cmd_example1(cli: &Cli, args: &Example1Args) -> Result<bool> {
    let params = FiberParams::default();
    let (b, stats) = example1_stats(
        args.power_mw * 1e-3,
        args.separation,
        args.length_km / params.l_n,
        &params,
    )?;
    let r = stats.var_n3 / stats.var_n1;
    let rows = [
        ("b", b),
        ("r", r),
        ("var_n1", stats.var_n1),
        ("var_n2", stats.var_n2),
        ("var_n3", stats.var_n3),
        ("var_n4", stats.var_n4),
        ("var_n0", stats.var_n0),
        ("cov_n1_n3", stats.cov_n1_n3),
    ];
    let text = if wants_csv(&cli.out) {
        let mut t = String::from("name,value\n");
        for (name, value) in rows {
            t.push_str(&format!("{name},{value:e}\n"));
        }
        t
    } else {
        let mut t = String::new();
        for (name, value) in rows {
            t.push_str(&format!("{name} = {value:.6e}\n"));
        }
        t
    };
    write_output(&cli.out, &text)?;
    Ok(true)
}
