//! `dclab`: experiments on delta-convex quadratic forms and martingale constants.

mod config;
mod error;
mod experiments;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dclab::dcgauge::SignMode;
use dclab::factorize::DominationObjective;
use dclab::quadform::NormedSpace;

use config::{parse_list, parse_p_list, ExperimentConfig};
use error::{CliError, CliResult};
use experiments::{ControlArgs, Outcome, Target};
use report::{write_rows, write_svg};

#[derive(Parser, Debug)]
#[command(name = "dclab", version, about = "Delta-convexity, UMD and factorization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated exponents, `inf` allowed.
    #[arg(long)]
    p: Option<String>,
    /// Comma-separated dimensions.
    #[arg(long)]
    dim: Option<String>,
    /// Martingale depth.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Ascent steps per restart.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the CSV file, witnesses and certificates.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG plot (experiments only).
    #[arg(long)]
    svg: bool,
}

#[derive(Args, Debug, Clone)]
struct FormArgs {
    /// Matrix file (`rows,cols` header, then comma-separated rows).
    #[arg(long, conflicts_with = "form")]
    matrix: Option<PathBuf>,
    /// Named form: identity, ones, swap, duality, hadamard, fullsign.
    #[arg(long, default_value = "identity")]
    form: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dc bounds and dominating-form ratios of the hard forms across p and dim.
    Trichotomy {
        #[command(flatten)]
        common: Common,
    },
    /// Dc bounds of the pairing x*(x) on l_p + l_p* across dim.
    Duality {
        #[command(flatten)]
        common: Common,
    },
    /// Lower bound for the delta-convexity constant of a form.
    EstimateDc {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        form: FormArgs,
    },
    /// Lower bound for the UMD constant of an operator.
    EstimateUmd {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        form: FormArgs,
        /// fixed or predictable signs.
        #[arg(long, default_value = "fixed")]
        mode: String,
        /// Exponent of the target space (defaults to the source exponent).
        #[arg(long)]
        py: Option<String>,
    },
    /// Upper estimate of the l1 -> linf Hilbert factorization constant.
    Gamma2 {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        form: FormArgs,
        /// Inner dimension (defaults to the numerical rank).
        #[arg(long)]
        rank: Option<usize>,
    },
    /// Smallest dominating nonnegative form.
    Dominate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        form: FormArgs,
        /// spectral or max-entry (defaults to the norm matching the space).
        #[arg(long)]
        objective: Option<String>,
    },
    /// Grid value iteration for a control function.
    ControlFn {
        #[command(flatten)]
        common: Common,
        /// neg-square, square, zero, or cross (2xy, dim 2).
        #[arg(long, default_value = "neg-square")]
        phi: String,
        /// Budget rho = scale * |x|^2.
        #[arg(long, default_value_t = 2.0)]
        rho_scale: f64,
        #[arg(long, default_value_t = 4.0)]
        radius: f64,
        #[arg(long, default_value_t = 0.25)]
        step: f64,
        /// Comma-separated increment sizes (multiples of the step).
        #[arg(long, default_value = "0.25,0.5,1")]
        increments: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_sweeps: usize,
    },
}

fn build_config(scenario: &str, c: &Common, single: bool) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(scenario);
    if single {
        cfg.p = vec![2.0];
        cfg.dims = vec![1];
    }
    if let Some(path) = &c.config {
        cfg.load_file(path)?;
    }
    if let Some(p) = &c.p {
        cfg.p = parse_p_list(p)?;
    }
    if let Some(d) = &c.dim {
        cfg.dims = parse_list(d, "dim")?;
    }
    if let Some(v) = c.depth {
        cfg.depth = v;
    }
    if let Some(v) = c.restarts {
        cfg.restarts = v;
    }
    if let Some(v) = c.steps {
        cfg.steps = v;
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = &c.out {
        cfg.out = Some(v.clone());
    }
    cfg.svg |= c.svg;
    if single {
        cfg.validate(false)?;
    }
    Ok(cfg)
}

fn target(cfg: &ExperimentConfig, form: &FormArgs) -> CliResult<Target> {
    match &form.matrix {
        Some(path) => experiments::matrix_target(path, cfg.p[0]),
        None => experiments::named_target(&form.form, cfg.dims[0], cfg.p[0]),
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("DCLAB_THREADS") else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("DCLAB_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the worker pool: {e}")))
}

fn run(cli: Cli) -> CliResult<(ExperimentConfig, Outcome, bool)> {
    configure_threads()?;
    Ok(match cli.command {
        Command::Trichotomy { common } => {
            let cfg = build_config("trichotomy", &common, false)?;
            let out = experiments::run_trichotomy(&cfg)?;
            (cfg, out, true)
        }
        Command::Duality { common } => {
            let cfg = build_config("duality", &common, false)?;
            let out = experiments::run_duality(&cfg)?;
            (cfg, out, true)
        }
        Command::EstimateDc { common, form } => {
            let cfg = build_config("estimate-dc", &common, true)?;
            let t = target(&cfg, &form)?;
            let out = experiments::estimate_dc(&cfg, &t)?;
            (cfg, out, false)
        }
        Command::EstimateUmd { common, form, mode, py } => {
            let cfg = build_config("estimate-umd", &common, true)?;
            let t = target(&cfg, &form)?;
            let mode: SignMode = mode.parse()?;
            let py = match py {
                Some(s) => dclab::quadform::parse_exponent(&s)
                    .ok_or_else(|| CliError::Config(format!("invalid exponent {s:?}")))?,
                None => cfg.p[0],
            };
            let y = NormedSpace::lp(t.matrix.nrows(), py)?;
            let out = experiments::estimate_umd(&cfg, &t, &y, mode)?;
            (cfg, out, false)
        }
        Command::Gamma2 { common, form, rank } => {
            let cfg = build_config("gamma2", &common, true)?;
            let t = target(&cfg, &form)?;
            let out = experiments::gamma2(&cfg, &t, rank)?;
            (cfg, out, false)
        }
        Command::Dominate { common, form, objective } => {
            let cfg = build_config("dominate", &common, true)?;
            let t = target(&cfg, &form)?;
            let objective: Option<DominationObjective> = objective.map(|s| s.parse()).transpose()?;
            let out = experiments::dominate(&cfg, &t, objective)?;
            (cfg, out, false)
        }
        Command::ControlFn { common, phi, rho_scale, radius, step, increments, tol, max_sweeps } => {
            let cfg = build_config("control-fn", &common, true)?;
            let args =
                ControlArgs { phi, rho_scale, radius, step, increments: parse_list(&increments, "increments")?, tol, max_sweeps };
            let out = experiments::control_fn(&cfg, cfg.dims[0], &args)?;
            (cfg, out, false)
        }
    })
}

fn emit(cfg: &ExperimentConfig, out: &Outcome, experiment: bool) -> CliResult<()> {
    write_rows(std::io::stdout().lock(), &out.rows, experiment)?;
    if let Some(dir) = &cfg.out {
        write_rows(std::fs::File::create(dir.join(format!("{}.csv", cfg.scenario)))?, &out.rows, true)?;
        if cfg.svg && experiment {
            write_svg(&dir.join(format!("{}.svg", cfg.scenario)), &cfg.scenario, &out.rows)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli).and_then(|(cfg, out, experiment)| {
        emit(&cfg, &out, experiment)?;
        Ok(out.violations)
    });
    match result {
        Ok(violations) if violations.is_empty() => ExitCode::SUCCESS,
        Ok(violations) => {
            for v in &violations {
                eprintln!("dclab: {v}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("dclab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
