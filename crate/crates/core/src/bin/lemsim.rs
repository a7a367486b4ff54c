//! `lemsim` command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lemsim_core::config::ScenarioConfig;
use lemsim_core::lcoe::{capex, lcoe, FinancialParams, PvCostModel};
use lemsim_core::pipeline::{self, PipelineError, RunOptions};
use lemsim_core::ScenarioLabel;

#[derive(Parser)]
#[command(name = "lemsim", version, about = "Neighborhood local energy market simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all configured scenarios and write the output files.
    Run(RunArgs),
    /// Check a config file and list every violated rule.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Like `run`, but the config must contain a [sweep] section.
    Sweep(RunArgs),
    /// Print the levelized cost of electricity of one PV system in EUR/MWh.
    Lcoe(LcoeArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict the run to these scenario labels (repeatable).
    #[arg(long = "scenario")]
    scenarios: Vec<ScenarioLabel>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct LcoeArgs {
    /// Read the [finance] section from this config instead of the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0)]
    pv_kwp: f64,
    /// Annual production in kWh.
    #[arg(long)]
    annual_kwh: f64,
    #[arg(long)]
    lifetime: Option<usize>,
    #[arg(long)]
    wacc: Option<f64>,
    /// Yearly OPEX in EUR; 1 % of capex when absent.
    #[arg(long)]
    opex: Option<f64>,
}

fn init_threads() {
    if let Some(n) = std::env::var("LEMSIM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn fail(err: &dyn std::fmt::Display, code: u8) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(code)
}

fn run(args: RunArgs, require_sweep: bool) -> ExitCode {
    let opts = RunOptions {
        out_dir: args.out,
        seed: args.seed,
        scenarios: args.scenarios,
        require_sweep,
    };
    let result = pipeline::load_config(&args.config, &opts)
        .and_then(|config| pipeline::run(&config, opts.require_sweep));
    match result {
        Ok((dir, artifacts)) => {
            if !args.quiet {
                for o in &artifacts.outcomes {
                    let s = &o.summary;
                    println!(
                        "{:<20} consumer_cost={:>10.2} prosumer_revenue={:>10.2} net_cost={:>10.2}",
                        o.label.to_string(),
                        s.consumer_cost,
                        s.prosumer_revenue,
                        s.net_cost
                    );
                }
                println!("wrote {} files to {}", artifacts.files.len(), dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, e.exit_code() as u8),
    }
}

fn validate(path: PathBuf, quiet: bool) -> ExitCode {
    let config = match ScenarioConfig::from_path(&path) {
        Ok(c) => c,
        Err(e) => {
            let e = PipelineError::from(e);
            return fail(&e, e.exit_code() as u8);
        }
    };
    let violations = config.validate();
    if violations.is_empty() {
        if !quiet {
            println!("{}: valid", path.display());
        }
        return ExitCode::SUCCESS;
    }
    for v in &violations {
        println!("{v}");
    }
    ExitCode::from(1)
}

fn lcoe_cmd(args: LcoeArgs) -> ExitCode {
    let finance = match &args.config {
        Some(path) => match ScenarioConfig::from_path(path) {
            Ok(c) => c.finance.unwrap_or_default(),
            Err(e) => {
                let e = PipelineError::from(e);
                return fail(&e, e.exit_code() as u8);
            }
        },
        None => Default::default(),
    };
    let model: PvCostModel = finance.cost_model();
    if let Err(e) = model.validate() {
        return fail(&e, 1);
    }
    let i0 = capex(&model, args.pv_kwp);
    let opex = args.opex.unwrap_or_else(|| finance.opex_for(i0));
    let fin = match FinancialParams::constant(
        args.lifetime.unwrap_or(finance.lifetime_years),
        args.wacc.unwrap_or(finance.wacc),
        opex,
        args.annual_kwh,
    ) {
        Ok(f) => f,
        Err(e) => return fail(&e, 1),
    };
    match lcoe(i0, &fin) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, 1),
    }
}

fn main() -> ExitCode {
    init_threads();
    match Cli::parse().command {
        Command::Run(args) => run(args, false),
        Command::Sweep(args) => run(args, true),
        Command::Validate { config, quiet } => validate(config, quiet),
        Command::Lcoe(args) => lcoe_cmd(args),
    }
}
