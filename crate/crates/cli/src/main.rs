use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rinewton_core::harness::{self, ExperimentConfig, TraceFormat, CHECK_NAMES};
use rinewton_core::majorant::RadiusRecord;
use rinewton_core::{Majorant, RadiusQuery};

#[derive(Parser, Debug)]
#[command(name = "rinewton", version, about = "Inexact Newton experiments on Riemannian manifolds")]
struct Cli {
    /// Override the rng seed of the experiment.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Trace format for `run`, record format for `radii`.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment from a TOML config; exits 1 if any check fails.
    Run { config: PathBuf },
    /// Compute the radii and tolerance implied by a majorant.
    Radii(RadiiArgs),
    /// Describe the available checks.
    Checks {
        #[arg(long)]
        list: bool,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Lipschitz,
    Holder,
    Smale,
}

#[derive(Args, Debug)]
struct RadiiArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    vartheta: f64,
    /// Spreading constant.
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    #[arg(long, default_value_t = 1e12)]
    kappa: f64,
    #[arg(long, default_value_t = 1e12)]
    r_inj: f64,
    /// Condition number of the derivative at the singularity (for theta_max).
    #[arg(long, requires = "d0")]
    cond: Option<f64>,
    /// Start distance (for theta_max).
    #[arg(long, requires = "cond")]
    d0: Option<f64>,
}

fn majorant(a: &RadiiArgs) -> Result<Majorant, String> {
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| format!("--{name} is required for this kind"));
    let m = match a.kind {
        Kind::Lipschitz => Majorant::lipschitz(need(a.l, "l")?),
        Kind::Holder => Majorant::holder(need(a.l, "l")?, need(a.mu, "mu")?),
        Kind::Smale => Majorant::smale(need(a.gamma, "gamma")?),
    };
    m.map_err(|e| e.to_string())
}

fn radii(a: &RadiiArgs, format: Format) -> Result<String, String> {
    let m = majorant(a)?;
    let q = RadiusQuery::new(a.vartheta, a.k, a.kappa, a.r_inj);
    let theta = match (a.cond, a.d0) {
        (Some(c), Some(d)) => Some(m.theta_max(c, a.vartheta, d).map_err(|e| e.to_string())?),
        _ => None,
    };
    let rec = m.record(&q, theta).map_err(|e| e.to_string())?;
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(&rec).map_err(|e| e.to_string())?,
        Format::Csv => radii_csv(&rec),
    })
}

fn radii_csv(r: &RadiusRecord) -> String {
    let params: Vec<String> = r.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let theta = r.theta_max.map(|t| t.to_string()).unwrap_or_default();
    format!(
        "kind,parameters,vartheta,k,kappa,r_inj,nu,sigma,rho,r,theta_max\n{},{},{},{},{},{},{},{},{},{},{}",
        r.kind,
        params.join(";"),
        r.vartheta,
        r.k,
        r.kappa,
        r.r_inj,
        r.nu,
        r.sigma,
        r.rho,
        r.r,
        theta
    )
}

fn run(cli: &Cli, path: &PathBuf) -> Result<bool, String> {
    let mut cfg = ExperimentConfig::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.output.dir = dir.clone();
    }
    if let Some(f) = cli.format {
        cfg.output.format = match f {
            Format::Csv => TraceFormat::Csv,
            Format::Json => TraceFormat::Json,
        };
    }
    let out = harness::run(&cfg).map_err(|e| e.to_string())?;
    println!("radius r = {:.6e} (rho = {:.6e}, nu = {:.6e}, K = {})", out.radius.r, out.radius.rho, out.radius.nu, out.radius.k);
    for s in &out.summaries {
        println!(
            "trace {} d0 = {:.3e} theta = {:.4} {:?} after {} steps, |X| = {:.2e}",
            s.id, s.d0, s.theta, s.termination, s.steps, s.final_field_norm
        );
    }
    for c in &out.checks {
        let margin = c.worst_margin.map(|m| format!("{m:.3e}")).unwrap_or_else(|| "-".into());
        println!("{:<20} {:?} margin {margin} ({} checked, {} skipped)", c.name, c.status, c.checked, c.skipped);
    }
    println!("outputs written to {}", cfg.output.dir.display());
    Ok(out.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::Radii(a) => radii(a, cli.format.unwrap_or(Format::Json)).map(|s| {
            println!("{s}");
            true
        }),
        Command::Checks { list } => {
            if *list {
                for (name, desc) in CHECK_NAMES {
                    println!("{name:<20} {desc}");
                }
            } else {
                println!("use `checks --list` to print the available checks");
            }
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
