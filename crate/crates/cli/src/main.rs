//! `burkholder`: constants tables, verification suites and simulations.
//!
//! Exit codes: 0 success, 1 invalid input or I/O failure, 2 no finite
//! constant, 3 a verification check failed, 4 diverged simulation paths.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use burkholder::burkfun::BurkholderFamily;
use burkholder::constants::{solve, ConstantsBundle, Status, CSV_HEADER};
use burkholder::sde::{
    hp_demo, simulate_pair_with_threads, two_step_experiment_with_threads, HpPair, SimConfig, SimResult,
    DEFAULT_RADII,
};
use burkholder::specfun::Params;
use burkholder::verify::run_suite;
use clap::{Args, Parser, Subcommand, ValueEnum};
use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "burkholder", version, about = "Sharp constants for Bessel-type moment inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the constants bundle for one (p, d) as JSON.
    Constants {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        d: f64,
        /// Also write the series coefficients to this file.
        #[arg(long)]
        dump_series: Option<PathBuf>,
    },
    /// Tabulate constants over lists of p and d.
    Table {
        /// Comma-separated values; `lo:hi:n` expands to n evenly spaced points.
        #[arg(long)]
        p: String,
        #[arg(long)]
        d: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run the verification suite and print one report per check.
    Verify {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        d: f64,
        #[arg(long, default_value_t = 2001)]
        grid_n: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Comma-separated check ids to keep.
        #[arg(long)]
        checks: Option<String>,
    },
    /// Monte Carlo experiments and the Hardy-space demo.
    #[command(subcommand)]
    Simulate(Simulate),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Simulate {
    /// Bessel pair stopped at the ray with parameter `a`.
    Bessel(SimArgs),
    /// Two-step stopping rule (p > 2).
    Twostep {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
        b: f64,
    },
    /// Hardy-space norms of a catalogue pair.
    Hp {
        /// identity, z2half, z3third or scaled:<lambda>
        #[arg(long)]
        pair: String,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1024)]
        n_quadrature: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct SimArgs {
    #[arg(long)]
    p: f64,
    #[arg(long)]
    d: f64,
    /// Defaults to `z0 - 0.05`.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    x0: f64,
    #[arg(long, default_value_t = 1.0)]
    y0: f64,
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    #[arg(long, default_value_t = 5.0)]
    t_max: f64,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "euler_reflect")]
    scheme: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Invalid(String),
    NoFiniteConstant(String),
    CheckFailed,
    Diverged(usize),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::NoFiniteConstant(_) => 2,
            Failure::CheckFailed => 3,
            Failure::Diverged(_) => 4,
        }
    }
}

impl From<burkholder::Error> for Failure {
    fn from(e: burkholder::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Invalid(format!("io: {e}"))
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    // Usage errors are invalid input (exit 1); help and version exit 0.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Constants { p, d, dump_series } => cmd_constants(p, d, dump_series.as_deref()),
        Command::Table { p, d, out, format } => cmd_table(&p, &d, out.as_deref(), format),
        Command::Verify { p, d, grid_n, tol, checks } => cmd_verify(p, d, grid_n, tol, checks.as_deref()),
        Command::Simulate(sim) => cmd_simulate(sim),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(m) => eprintln!("error: {m}"),
                Failure::NoFiniteConstant(m) => eprintln!("no finite constant: {m}"),
                Failure::CheckFailed => eprintln!("one or more checks failed"),
                Failure::Diverged(n) => eprintln!("{n} paths diverged"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> std::io::Result<()> {
    match out {
        Some(path) => fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_constants(p: f64, d: f64, dump_series: Option<&Path>) -> CliResult {
    let params = Params::new(p, d)?;
    let (series, bundle) = solve(params)?;
    if let Some(path) = dump_series {
        fs::write(path, serde_json::to_string_pretty(&series.to_json()).expect("series serialises") + "\n")?;
    }
    println!("{}", serde_json::to_string(&bundle).expect("bundle serialises"));
    if bundle.status == Status::NoFiniteConstant {
        return Err(Failure::NoFiniteConstant(format!("p + d = {} <= 2", p + d)));
    }
    Ok(())
}

/// Parses `1,2,3` and `lo:hi:n` items.
fn parse_list(text: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Invalid(format!("cannot parse list `{text}`"));
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(v.parse().map_err(|_| bad())?),
            [lo, hi, n] => {
                let (lo, hi): (f64, f64) = (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?);
                let n: usize = n.parse().map_err(|_| bad())?;
                out.extend(burkholder::report::linspace(lo, hi, n));
            }
            _ => return Err(bad()),
        }
    }
    if out.is_empty() {
        return Err(Failure::Invalid(format!("empty list `{text}`")));
    }
    Ok(out)
}

fn table_bundle(p: f64, d: f64) -> ConstantsBundle {
    Params::new(p, d)
        .and_then(solve)
        .map(|(_, b)| b)
        .unwrap_or_else(|_| ConstantsBundle::invalid(p, d))
}

fn cmd_table(p: &str, d: &str, out: Option<&Path>, format: Format) -> CliResult {
    let (ps, ds) = (parse_list(p)?, parse_list(d)?);
    let bundles: Vec<ConstantsBundle> =
        ds.iter().flat_map(|&d| ps.iter().map(move |&p| table_bundle(p, d))).collect();
    let text = match format {
        Format::Csv => {
            let mut text = format!("{CSV_HEADER}\n");
            for b in &bundles {
                text.push_str(&b.to_csv_row());
                text.push('\n');
            }
            text
        }
        Format::Json => serde_json::to_string_pretty(&bundles).expect("bundles serialise") + "\n",
    };
    emit(&text, out)?;
    Ok(())
}

fn cmd_verify(p: f64, d: f64, grid_n: usize, tol: f64, checks: Option<&str>) -> CliResult {
    let params = Params::new(p, d)?;
    let suite = run_suite(params, grid_n, tol)?;
    let keep: Option<Vec<&str>> = checks.map(|c| c.split(',').map(str::trim).collect());
    let mut all_pass = true;
    for r in suite.reports.iter().filter(|r| keep.as_ref().is_none_or(|k| k.contains(&r.check_id.as_str()))) {
        println!("{}", r.to_json_line());
        all_pass &= r.pass;
    }
    if suite.status == Status::NoFiniteConstant {
        return Err(Failure::NoFiniteConstant(format!("p + d = {} <= 2", p + d)));
    }
    if all_pass {
        Ok(())
    } else {
        Err(Failure::CheckFailed)
    }
}

fn sim_setup(args: &SimArgs) -> Result<(BurkholderFamily, SimConfig), Failure> {
    let params = Params::new(args.p, args.d)?;
    let (series, bundle) = solve(params)?;
    let Some(z0) = bundle.z0 else {
        return Err(Failure::NoFiniteConstant(format!("p + d = {} <= 2", args.p + args.d)));
    };
    let family = BurkholderFamily::new(series, bundle)?;
    let config = SimConfig {
        params,
        x0: args.x0,
        y0: args.y0,
        a: args.a.unwrap_or(z0 - 0.05),
        dt: args.dt,
        t_max: args.t_max,
        n_paths: args.paths,
        seed: args.seed,
        scheme: args.scheme.parse()?,
    };
    Ok((family, config))
}

fn finish_sim(result: &SimResult, resolved: serde_json::Value, out: Option<&Path>) -> CliResult {
    emit(&(result.to_json() + "\n"), out)?;
    if let Some(path) = out {
        let mut manifest = RunManifest::new(vec![result.seed], resolved);
        manifest.record(path)?;
        manifest.write_beside(path)?;
    }
    if result.n_diverged > 0 {
        return Err(Failure::Diverged(result.n_diverged));
    }
    Ok(())
}

fn cmd_simulate(sim: Simulate) -> CliResult {
    match sim {
        Simulate::Bessel(args) => {
            let (family, config) = sim_setup(&args)?;
            let result = simulate_pair_with_threads(&config, &family, args.threads)?;
            let resolved = serde_json::json!({ "experiment": "bessel", "config": config });
            finish_sim(&result, resolved, args.out.as_deref())
        }
        Simulate::Twostep { sim: args, b } => {
            let (family, config) = sim_setup(&args)?;
            let result = two_step_experiment_with_threads(&family, b, &config, args.threads)?;
            let resolved = serde_json::json!({ "experiment": "twostep", "b": b, "config": config });
            finish_sim(&result, resolved, args.out.as_deref())
        }
        Simulate::Hp { pair, p, n_quadrature, out } => {
            let pair: HpPair = pair.parse()?;
            let report = hp_demo(pair, p, &DEFAULT_RADII, n_quadrature)?;
            emit(&(serde_json::to_string_pretty(&report).expect("report serialises") + "\n"), out.as_deref())?;
            if let Some(path) = out.as_deref() {
                let resolved = serde_json::json!({
                    "experiment": "hp", "pair": pair.id(), "p": p, "n_quadrature": n_quadrature,
                    "radii": DEFAULT_RADII,
                });
                let mut manifest = RunManifest::new(Vec::new(), resolved);
                manifest.record(path)?;
                manifest.write_beside(path)?;
            }
            if report.pass {
                Ok(())
            } else {
                Err(Failure::CheckFailed)
            }
        }
    }
}
