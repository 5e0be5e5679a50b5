use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tlbt_cli::{
    cmd_bound, cmd_gen_model, cmd_reduce, cmd_simulate, cmd_sweep, CliError, ExperimentConfig,
    InputSpec, ModelSource, Reduction, SweepAxis,
};

#[derive(Parser)]
#[command(name = "tlbt", version, about = "Time-limited balanced truncation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the heat-equation model as Matrix Market files plus a manifest.
    GenModel {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        m: usize,
        #[arg(long, default_value_t = 6)]
        p: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce a model and write the reduced matrices and singular values.
    Reduce(Common),
    /// Compute the error bound for the reduced model.
    Bound {
        #[command(flatten)]
        common: Common,
        /// Also evaluate the bound in balanced coordinates and report the discrepancy.
        #[arg(long)]
        verify: bool,
    },
    /// Simulate full and reduced models and compare against the bound.
    Simulate(Common),
    /// Run BT and TLBT over a list of orders, horizons or tolerances.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Manifest path or gen:n,m,p.
    #[arg(long)]
    model: Option<ModelSource>,
    #[arg(long)]
    tbar: Option<f64>,
    /// Step size; defaults to tbar/1000.
    #[arg(long)]
    dt: Option<f64>,
    /// Simulation end; defaults to tbar.
    #[arg(long)]
    tend: Option<f64>,
    #[arg(long, conflicts_with = "tol")]
    order: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// const:c | star | zero | table:path | random:pieces
    #[arg(long)]
    input: Option<InputSpec>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn into_config(self) -> Result<ExperimentConfig, CliError> {
        let base = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
                Some(ExperimentConfig::from_json(&text)?)
            }
            None => None,
        };
        let missing = |what: &str| CliError::Usage(format!("--{what} is required without --config"));
        let model = match (self.model, &base) {
            (Some(m), _) => m,
            (None, Some(b)) => b.model.clone(),
            (None, None) => return Err(missing("model")),
        };
        let tbar = self.tbar.or(base.as_ref().map(|b| b.tbar)).unwrap_or(1.0);
        let dt = self
            .dt
            .or(base.as_ref().map(|b| b.dt))
            .unwrap_or(tbar / 1000.0);
        let t_end = self.tend.or(base.as_ref().map(|b| b.t_end)).unwrap_or(tbar);
        let reduction = match (self.order, self.tol, &base) {
            (Some(r), _, _) => Reduction::Order(r),
            (None, Some(t), _) => Reduction::Tol(t),
            (None, None, Some(b)) => b.reduction,
            (None, None, None) => return Err(CliError::Usage("give --order or --tol".into())),
        };
        let input = self
            .input
            .or(base.as_ref().map(|b| b.input.clone()))
            .unwrap_or(InputSpec::Const { value: 1.0 });
        let seed = self.seed.or(base.as_ref().map(|b| b.seed)).unwrap_or(0);
        let out = match (self.out, &base) {
            (Some(o), _) => o,
            (None, Some(b)) => b.out.clone(),
            (None, None) => return Err(missing("out")),
        };
        Ok(ExperimentConfig {
            model,
            tbar,
            dt,
            t_end,
            reduction,
            input,
            seed,
            out,
        })
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenModel { n, m, p, out } => {
            let manifest = cmd_gen_model(n, m, p, &out)?;
            println!("{}", manifest.display());
        }
        Command::Reduce(common) => {
            let s = cmd_reduce(&common.into_config()?)?;
            println!("r = {}, tail sum = {:e}", s.r, s.sigma_tail_sum);
        }
        Command::Bound { common, verify } => {
            let b = cmd_bound(&common.into_config()?, verify)?;
            println!("epsilon = {:e}", b.epsilon);
            if let Some(v) = b.verification {
                println!("eps2_alt = {:e}, discrepancy = {:e}", v.eps2_alt, v.discrepancy);
            }
        }
        Command::Simulate(common) => {
            let s = cmd_simulate(&common.into_config()?)?;
            println!(
                "max error on [0, T] = {:e}, bound level = {:e}",
                s.max_error_horizon, s.bound_level
            );
        }
        Command::Sweep {
            common,
            axis,
            values,
            jobs,
        } => {
            let rows = cmd_sweep(&common.into_config()?, axis, &values, jobs)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!("{} rows written, {failed} with errors", rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
