use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use porl_dyn::harness::{self, ExperimentConfig, PlotOptions};
use porl_dyn::{Error, Result};

#[derive(Parser)]
#[command(name = "porl-dyn", version, about = "Regularized-leader game dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config once per seed.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Repeat an experiment over values of one hyperparameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. `10,5,2,1,0.1`.
        #[arg(long)]
        values: String,
    },
    /// Pairwise cross-play scores of joint policies on a matrix game.
    Crossplay {
        /// Builtin game name, matrix game JSON file, or inline game spec JSON.
        #[arg(long)]
        game: String,
        #[arg(long, num_args = 2.., required = true)]
        policies: Vec<PathBuf>,
        /// Write the table here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render CSV columns as an SVG line chart.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Columns to draw (default: all but the first).
        #[arg(long, value_delimiter = ',')]
        columns: Vec<String>,
        #[arg(long)]
        log_y: bool,
    },
}

fn report_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn load_config(path: &std::path::Path) -> Result<(ExperimentConfig, String)> {
    let config = ExperimentConfig::load(path)?;
    let hash = config.hash();
    Ok((config, hash))
}

fn with_hash<T>(hash: &str, r: Result<T>) -> std::result::Result<T, (Error, Option<String>)> {
    r.map_err(|e| (e, Some(hash[..12].to_string())))
}

fn dispatch(command: Command) -> std::result::Result<(), (Error, Option<String>)> {
    match command {
        Command::Run { config } => {
            let (config, hash) = load_config(&config).map_err(|e| (e, None))?;
            let report = with_hash(&hash, harness::run(&config))?;
            report_warnings(&report.warnings);
            for row in &report.summary {
                println!("{:<22} {:.6e} ± {:.2e}", row.metric, row.mean, row.se);
            }
            println!("wrote {} (config {})", report.output_dir.display(), &hash[..12]);
        }
        Command::Sweep { config, axis, values } => {
            let (config, hash) = load_config(&config).map_err(|e| (e, None))?;
            let values = harness::parse_values(&values).map_err(|e| (e, None))?;
            let report = with_hash(&hash, harness::sweep(&config, &axis, &values))?;
            for run in &report.runs {
                report_warnings(&run.warnings);
            }
            println!("{axis:>12} {:>14} {:>10}", "final_metric", "se");
            for row in &report.rows {
                println!("{:>12} {:>14.6e} {:>10.2e}", row.axis_value, row.final_metric_mean, row.final_metric_se);
            }
            println!("wrote {}", report.table.display());
        }
        Command::Crossplay { game, policies, output } => {
            let run = || -> Result<()> {
                let game = harness::parse_game_arg(&game)?;
                let named = policies
                    .iter()
                    .map(|p| harness::load_named_policy(p))
                    .collect::<Result<Vec<_>>>()?;
                let table = harness::crossplay_csv(&harness::crossplay_report(&game, &named)?);
                match output {
                    Some(path) => std::fs::write(path, table)?,
                    None => print!("{table}"),
                }
                Ok(())
            };
            run().map_err(|e| (e, None))?;
        }
        Command::Plot {
            input,
            output,
            columns,
            log_y,
        } => {
            let svg = harness::plot_csv(&input, &PlotOptions { columns, log_y }).map_err(|e| (e, None))?;
            std::fs::write(&output, svg).map_err(|e| (e.into(), None))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err((err, hash)) => {
            match hash {
                Some(h) => eprintln!("error [config {h}]: {err}"),
                None => eprintln!("error: {err}"),
            }
            ExitCode::from(harness::exit_code(&err) as u8)
        }
    }
}
