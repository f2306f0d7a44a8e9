use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tpr::cli::compare::{compare, CompareOptions, Metric, Trace};
use tpr::cli::config::ExperimentConfig;
use tpr::cli::{exit_code, run, EXIT_CONFIG, EXIT_FAIL, EXIT_OK};

/// Two-photon Rabi/Dicke numerical laboratory.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the Fock cutoff (kinds with a single cutoff only).
        #[arg(long)]
        cutoff: Option<usize>,
    },
    /// Compare two CSV traces column by column.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = Metric::Max)]
        metric: Metric,
        /// Compare traces produced from different physics parameters.
        #[arg(long)]
        force: bool,
        /// Resample the second trace onto the first trace's grid.
        #[arg(long)]
        interpolate: bool,
        #[arg(long = "column")]
        columns: Vec<String>,
    },
    /// Classify the spectrum of the single-qubit model.
    Classify {
        #[arg(long)]
        g: f64,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
    },
}

fn init_threads() -> Result<(), String> {
    if let Ok(v) = std::env::var("TPR_THREADS") {
        let n: usize = v.parse().map_err(|_| format!("TPR_THREADS={v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn override_cutoff(cfg: &mut ExperimentConfig, cutoff: usize) -> Result<(), String> {
    use tpr::cli::config::{Experiment, MeasureConfig};
    match &mut cfg.experiment {
        Experiment::Dynamics(d) => d.cutoff = cutoff,
        Experiment::FullModel(f) => f.cutoff = cutoff,
        Experiment::Adiabatic(a) => a.cutoff = cutoff,
        Experiment::Measure(MeasureConfig::Derivative { cutoff: c, .. })
        | Experiment::Measure(MeasureConfig::Parity { cutoff: c, .. })
        | Experiment::Measure(MeasureConfig::Dispersive { cutoff: c, .. }) => *c = cutoff,
        Experiment::Spectrum(_) | Experiment::Classify(_) => {
            return Err("--cutoff does not apply to this experiment kind".into())
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    let code = match cli.command {
        Command::Run { config, out, cutoff } => {
            let cfg = ExperimentConfig::load(&config).and_then(|mut c| {
                if let Some(o) = out {
                    c.output.dir = o;
                }
                if let Some(k) = cutoff {
                    override_cutoff(&mut c, k).map_err(tpr::Error::Config)?;
                }
                Ok(c)
            });
            match cfg.and_then(|c| run(&c)) {
                Ok(outcome) => {
                    for line in &outcome.summary {
                        println!("{line}");
                    }
                    for wmsg in &outcome.warnings {
                        eprintln!("warning: {wmsg}");
                    }
                    for (name, ok) in outcome.convergence.iter().filter(|c| !c.1) {
                        eprintln!("not converged: {name} ({ok})");
                    }
                    outcome.exit_code()
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            }
        }
        Command::Compare {
            a,
            b,
            tol,
            metric,
            force,
            interpolate,
            columns,
        } => {
            let opts = CompareOptions {
                metric,
                tolerance: tol,
                force,
                interpolate,
                columns,
            };
            let res = Trace::load(&a).and_then(|ta| Trace::load(&b).and_then(|tb| compare(&ta, &tb, &opts)));
            match res {
                Ok(r) => {
                    for c in &r.columns {
                        println!("{}: max={:.6e} rms={:.6e}", c.column, c.max, c.rms);
                    }
                    println!("{} {:?}={:.6e} tol={:.3e}", if r.pass { "PASS" } else { "FAIL" }, r.metric, r.worst, r.tolerance);
                    if r.pass {
                        EXIT_OK
                    } else {
                        EXIT_FAIL
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            }
        }
        Command::Classify { g, omega } => match tpr::bargmann::classify_model(g, omega) {
            Ok(m) => {
                println!("{}", m.classification);
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
    };
    ExitCode::from(code as u8)
}
