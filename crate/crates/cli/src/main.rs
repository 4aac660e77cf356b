use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lpp_core::io::{load_network, report_json, report_table};
use lpp_core::multistep::init_bounds;
use lpp_core::network::{BigMPolicy, NsPolicy};
use lpp_core::{
    build_model, count_model, run_multistep, validate_network, Backend, EnumerativeBackend, ExternalBackend, Mode,
    Network, RunConfig, RunReport, Termination,
};

/// Load pick-up optimization with multi-step piecewise-linear MILP solves.
#[derive(Parser)]
#[command(name = "lpp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize losses with every load served.
    Reconfigure(RunArgs),
    /// Maximize served load, possibly in DG-fed islands.
    Restore(RunArgs),
    /// Check a network file and print diagnostics.
    Validate { network: PathBuf },
    /// Direct solves (no bound renewal) over a list of segment counts.
    SweepLambda {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated segment counts.
        #[arg(long, value_delimiter = ',', default_values_t = [10u32, 20, 50, 100])]
        lambdas: Vec<u32>,
        #[arg(long, value_enum, default_value_t = ModeArg::Reconfigure)]
        mode: ModeArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Reconfigure,
    Restore,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Enumerate,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Json,
}

#[derive(Clone, Copy, Debug)]
struct BigMArg(BigMPolicy);

impl FromStr for BigMArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "tight" {
            return Ok(BigMArg(BigMPolicy::Tight));
        }
        let value =
            s.strip_prefix("fixed:").ok_or_else(|| format!("expected `tight` or `fixed:<value>`, got `{s}`"))?;
        match value.parse::<f64>() {
            Ok(m) if m > 0.0 && m.is_finite() => Ok(BigMArg(BigMPolicy::Fixed(m))),
            _ => Err(format!("big-M value must be a positive number, got `{value}`")),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    network: PathBuf,
    /// PWL segments per flow.
    #[arg(long, default_value_t = 10)]
    lambda: u32,
    /// Bound renewals after the first solve.
    #[arg(long, default_value_t = 5)]
    max_iters: u32,
    /// Threshold on the mean active-flow error index, percent.
    #[arg(long, default_value_t = 0.1)]
    eps_p: f64,
    /// Threshold on the mean reactive-flow error index, percent.
    #[arg(long, default_value_t = 0.1)]
    eps_q: f64,
    /// Relative MIP gap.
    #[arg(long, default_value_t = 1e-4)]
    gap: f64,
    #[arg(long, value_enum, default_value_t = BackendArg::Enumerate)]
    backend: BackendArg,
    /// `tight` or `fixed:<value>`.
    #[arg(long, default_value = "tight")]
    big_m: BigMArg,
    /// Recorded in the log; runs themselves are deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the first model in LP format here.
    #[arg(long)]
    dump_model: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,
    /// Per-solve time limit of the external backend, seconds.
    #[arg(long)]
    time_limit: Option<f64>,
}

impl RunArgs {
    fn config(&self, mode: Mode) -> Result<RunConfig> {
        let mut cfg = RunConfig::new(mode);
        cfg.lambda = self.lambda;
        cfg.max_iters = self.max_iters;
        cfg.eps_p = self.eps_p;
        cfg.eps_q = self.eps_q;
        cfg.mip_gap = self.gap;
        cfg.big_m = self.big_m.0;
        if mode == Mode::Restoration {
            cfg.n_s = NsPolicy::EnergizedRoots;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn backend(&self) -> Box<dyn Backend> {
        match self.backend {
            BackendArg::Enumerate => Box::new(EnumerativeBackend::default()),
            BackendArg::External => Box::new(ExternalBackend { time_limit: self.time_limit }),
        }
    }
}

fn load(path: &Path) -> Result<Network> {
    load_network(path).with_context(|| format!("invalid network {}", path.display()))
}

fn dump_model(net: &Network, cfg: &RunConfig, path: &Path) -> Result<()> {
    let model = build_model(net, cfg, &init_bounds(net))?;
    let file = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    model.write_lp(std::io::BufWriter::new(file))?;
    Ok(())
}

fn run(args: &RunArgs, mode: Mode) -> Result<ExitCode> {
    let net = load(&args.network)?;
    let cfg = args.config(mode)?;
    if let Some(seed) = args.seed {
        log::info!("seed {seed}");
    }
    if let Some(path) = &args.dump_model {
        dump_model(&net, &cfg, path)?;
    }
    let backend = args.backend();
    let report = run_multistep(&net, &cfg, backend.as_ref())?;
    emit(args, &report)?;
    Ok(match report.termination {
        Termination::ThresholdMet | Termination::IterationCap => ExitCode::SUCCESS,
        Termination::Infeasible => {
            eprintln!("no feasible load pick-up for {}", net.name);
            ExitCode::FAILURE
        }
    })
}

fn emit(args: &RunArgs, report: &RunReport) -> Result<()> {
    if let Some(path) = &args.out {
        fs::write(path, report_json(report, false)).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let text = match args.format {
        FormatArg::Table => report_table(report, false),
        FormatArg::Json => report_json(report, false),
    };
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn validate(path: &Path) -> Result<ExitCode> {
    let net = load(path)?;
    let report = validate_network(&net);
    if !report.is_empty() {
        bail!("{report}");
    }
    let roots = net.buses.iter().filter(|b| b.is_root).count();
    println!(
        "{}: {} buses ({} sources), {} feeders ({} switchable), {:.4} MW load",
        net.name,
        net.buses.len(),
        roots,
        net.feeders.len(),
        net.switchable_count(),
        net.total_load_p() * net.base_mva
    );
    Ok(ExitCode::SUCCESS)
}

fn sweep(args: &RunArgs, lambdas: &[u32], mode: Mode) -> Result<ExitCode> {
    let net = load(&args.network)?;
    let backend = args.backend();
    let mut any_feasible = false;
    println!(
        "{:>7}  {:>12}  {:>12}  {:>10}  {:>20}  {:>12}  {:>12}",
        "Lambda", "Variables", "Constraints", "Time (s)", "Objective (kW)", "E_p^m (%)", "E_q^m (%)"
    );
    let mut reports = Vec::new();
    for &lambda in lambdas {
        let mut cfg = args.config(mode)?;
        cfg.lambda = lambda;
        cfg.max_iters = 0;
        let counts = count_model(&build_model(&net, &cfg, &init_bounds(&net))?)?;
        let report = run_multistep(&net, &cfg, backend.as_ref())?;
        let it = report.last().context("run produced no iterations")?;
        let fmt = |e: Option<f64>| e.map_or("-".into(), |v| format!("{v:.6}"));
        let objective = if it.solution.status.is_feasible() {
            any_feasible = true;
            format!("{:.4}", it.solution.objective * net.base_mva * 1000.0)
        } else {
            "infeasible".into()
        };
        println!(
            "{:>7}  {:>12}  {:>12}  {:>10.4}  {:>20}  {:>12}  {:>12}",
            lambda,
            counts.binaries + counts.continuums,
            counts.total_constraints(),
            it.accumulated_time,
            objective,
            fmt(it.e_p_mean()),
            fmt(it.e_q_mean())
        );
        reports.push(report);
    }
    if let Some(path) = &args.out {
        let docs: Vec<String> = reports.iter().map(|r| report_json(r, false)).collect();
        fs::write(path, format!("[\n{}]\n", docs.join(",\n")))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(if any_feasible { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Reconfigure(args) => run(args, Mode::Reconfiguration),
        Command::Restore(args) => run(args, Mode::Restoration),
        Command::Validate { network } => validate(network),
        Command::SweepLambda { run, lambdas, mode } => {
            let mode = match mode {
                ModeArg::Reconfigure => Mode::Reconfiguration,
                ModeArg::Restore => Mode::Restoration,
            };
            sweep(run, lambdas, mode)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
