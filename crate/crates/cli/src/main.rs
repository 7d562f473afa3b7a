use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bcpnn::commands::{self, ExplainOptions, Primitive};
use bcpnn::config_xai::DEFAULT_CREATED;
use bcpnn::explain::DriftSettings;
use bcpnn::learning::{Mode, TrainOptions};
use bcpnn::par::{with_jobs, Execution};
use bcpnn::recurrent::Clamp;
use bcpnn::report::Report;
use bcpnn::spiking::SpikeTrainOptions;
use bcpnn::{snapshot, Dataset, Error, NetworkConfig, SpikingConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INVARIANT: u8 = 3;
const EXIT_WARNINGS: u8 = 4;

#[derive(Parser)]
#[command(name = "bcpnn", version, about = "Train, explain and audit BCPNN models")]
struct Cli {
    /// Worker threads for parallel work (0 = all cores, 1 = sequential).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Supervised,
    Unsupervised,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Supervised => Mode::Supervised,
            ModeArg::Unsupervised => Mode::Unsupervised,
        }
    }
}

#[derive(Args)]
struct TrainingFlags {
    #[arg(long, value_enum, default_value = "supervised")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
}

impl TrainingFlags {
    fn options(&self) -> TrainOptions {
        TrainOptions {
            mode: self.mode.into(),
            epochs: self.epochs,
            seed: self.seed,
            ..TrainOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes the ontology document before the first update.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Output snapshot.
        #[arg(long)]
        snapshot: PathBuf,
        #[command(flatten)]
        training: TrainingFlags,
        /// Override the plasticity threshold.
        #[arg(long)]
        rho: Option<f64>,
        /// Set both z-trace time constants (ms); adds a spiking section.
        #[arg(long)]
        tau_z: Option<f64>,
        #[arg(long, default_value = "")]
        purpose: String,
        /// Ontology document path [default: <snapshot>.ontology.json].
        #[arg(long)]
        ontology: Option<PathBuf>,
        /// Training log path [default: <snapshot>.log.csv].
        #[arg(long)]
        log: Option<PathBuf>,
        /// Report path [default: stdout].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Explanation report for one query.
    Explain {
        #[arg(long)]
        snapshot: PathBuf,
        /// Query as name=state pairs, comma separated.
        #[arg(long, conflicts_with = "dataset")]
        query: Option<String>,
        /// Take the query from this CSV instead.
        #[arg(long, requires = "row")]
        dataset: Option<PathBuf>,
        /// Zero-based data row of --dataset.
        #[arg(long)]
        row: Option<usize>,
        /// Comma-separated primitive ids (p1..p16) or `all`.
        #[arg(long, default_value = "all")]
        primitives: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Hidden unit to decompose, as hypercolumn:minicolumn.
        #[arg(long, value_parser = parse_unit)]
        target: Option<(usize, usize)>,
        /// Clamp for the counterfactual, as hypercolumn:minicolumn.
        #[arg(long, value_parser = parse_unit)]
        counterfactual: Option<(usize, usize)>,
        /// Reference CSV for receptive-field means and tuning curves.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Random perturbations checked against each certificate.
        #[arg(long, default_value_t = 1000)]
        flip_samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the settling trajectory, one state per line.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Pre-deployment audit: importance graph, efficiency, fidelity.
    Audit {
        #[arg(long)]
        snapshot: PathBuf,
        /// Attributes, most important first, comma separated.
        #[arg(long)]
        expert_ranking: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        warn_fraction: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model per (rho, seed) cell and tabulate accuracy and sparsity.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        rho_grid: String,
        /// Comma-separated seeds [default: --seed].
        #[arg(long)]
        seeds: Option<String>,
        #[command(flatten)]
        training: TrainingFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CUSUM drift alarms over a stream of queries.
    Monitor {
        #[arg(long)]
        snapshot: PathBuf,
        /// Live stream CSV; the leading rows form the baseline.
        #[arg(long)]
        dataset: PathBuf,
        /// Slack in baseline standard deviations.
        #[arg(long, default_value_t = 0.5)]
        cusum_k: f64,
        /// Threshold in baseline standard deviations.
        #[arg(long, default_value_t = 5.0)]
        cusum_h: f64,
        #[arg(long, default_value_t = 1000)]
        baseline_window: usize,
        #[arg(long, default_value_t = 16.0)]
        live_tau: f64,
        /// Alarm events CSV [default: stdout].
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sample a synthetic dataset and its config, or write the risk demo model.
    Generate {
        /// fruit, graded, prototype, coupled or risk-demo.
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Ontology document for a configuration.
    Ontology {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "")]
        purpose: String,
        #[arg(long, default_value = DEFAULT_CREATED)]
        created: String,
        #[arg(long)]
        tau_z: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Supervised training of the spiking variant.
    Spike {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        tau_z: Option<f64>,
        /// Steps each sample is presented for.
        #[arg(long, default_value_t = 200)]
        presentation_steps: usize,
        #[arg(long, default_value_t = 1)]
        epochs: usize,
        /// Spike raster CSV covering the first --record-steps steps.
        #[arg(long)]
        raster: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        record_steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_unit(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected hypercolumn:minicolumn")?;
    Ok((
        a.trim().parse().map_err(|_| format!("bad hypercolumn '{a}'"))?,
        b.trim().parse().map_err(|_| format!("bad minicolumn '{b}'"))?,
    ))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) | Error::SizeCap { .. } => EXIT_USAGE,
        Error::Invariant(_) => EXIT_INVARIANT,
        _ => EXIT_DATA,
    }
}

fn read_config(path: &Path, tau_z: Option<f64>) -> bcpnn::Result<NetworkConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg: NetworkConfig = serde_json::from_str(&text)?;
    if let Some(tau) = tau_z {
        let s = cfg.spiking.get_or_insert_with(SpikingConfig::default);
        s.tau_z_pre_ms = tau;
        s.tau_z_post_ms = tau;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> bcpnn::Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
        }
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn warnings_code(r: &Report) -> u8 {
    let nonconv = r.warnings().iter().any(|w| w.starts_with("non-convergence"));
    for w in r.warnings() {
        eprintln!("warning: {w}");
    }
    if nonconv {
        EXIT_WARNINGS
    } else {
        0
    }
}

fn run(cli: Cli) -> bcpnn::Result<u8> {
    let exec = if cli.jobs == 1 { Execution::Sequential } else { Execution::Parallel };
    match cli.command {
        Command::Train {
            config,
            dataset,
            snapshot: snap,
            training,
            rho,
            tau_z,
            purpose,
            ontology,
            log,
            out,
        } => {
            let mut cfg = read_config(&config, tau_z)?;
            if let Some(r) = rho {
                cfg.plasticity_threshold = r;
            }
            let onto_path = ontology.unwrap_or_else(|| with_suffix(&snap, ".ontology.json"));
            // the ontology is fixed by the configuration alone
            std::fs::write(&onto_path, commands::cmd_ontology(&cfg, &purpose, DEFAULT_CREATED)?)?;
            let data = Dataset::read_csv_path(&dataset, &cfg)?;
            let products = commands::cmd_train(cfg, &data, &training.options(), &purpose)?;
            snapshot::save(&products.model, &snap)?;
            std::fs::write(log.unwrap_or_else(|| with_suffix(&snap, ".log.csv")), products.log_csv())?;
            emit(out.as_deref(), products.report.render().as_bytes())?;
            Ok(warnings_code(&products.report))
        }
        Command::Explain {
            snapshot: snap,
            query,
            dataset,
            row,
            primitives,
            seed,
            target,
            counterfactual,
            reference,
            flip_samples,
            out,
            trajectory,
        } => {
            let model = snapshot::load(&snap)?;
            let states = match (query, dataset, row) {
                (Some(q), _, _) => commands::parse_query(model.config(), &q)?,
                (None, Some(d), Some(r)) => {
                    let data = Dataset::read_csv_path(&d, model.config())?;
                    data.inputs
                        .get(r)
                        .cloned()
                        .ok_or_else(|| Error::Argument(format!("row {r} beyond the {} rows of the dataset", data.len())))?
                }
                _ => return Err(Error::Argument("give --query or --dataset with --row".into())),
            };
            let reference = match reference {
                Some(p) => Some(Dataset::read_csv_path(&p, model.config())?),
                None => None,
            };
            let opts = ExplainOptions {
                primitives: Primitive::parse_list(&primitives)?,
                seed,
                target,
                counterfactual: counterfactual.map(|(hypercolumn, minicolumn)| Clamp { hypercolumn, minicolumn }),
                reference,
                flip_samples,
                ..ExplainOptions::default()
            };
            let report = commands::cmd_explain(&model, &states, &opts)?;
            if let Some(path) = trajectory {
                emit(Some(&path), commands::trajectory_lines(&model, &states)?.as_bytes())?;
            }
            emit(out.as_deref(), report.render().as_bytes())?;
            Ok(warnings_code(&report))
        }
        Command::Audit {
            snapshot: snap,
            expert_ranking,
            warn_fraction,
            out,
        } => {
            let model = snapshot::load(&snap)?;
            let expert: Option<Vec<String>> =
                expert_ranking.map(|s| s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect());
            let report = commands::cmd_audit(&model, expert.as_deref(), warn_fraction)?;
            emit(out.as_deref(), report.render().as_bytes())?;
            Ok(warnings_code(&report))
        }
        Command::Sweep {
            config,
            dataset,
            rho_grid,
            seeds,
            training,
            out,
        } => {
            let cfg = read_config(&config, None)?;
            let data = Dataset::read_csv_path(&dataset, &cfg)?;
            let grid = commands::parse_float_list(&rho_grid)?;
            let seeds: Vec<u64> = match seeds {
                Some(s) => s
                    .split(',')
                    .map(|p| p.trim().parse().map_err(|_| Error::Argument(format!("bad seed '{p}'"))))
                    .collect::<bcpnn::Result<_>>()?,
                None => vec![training.seed],
            };
            let opts = training.options();
            let curve = with_jobs(cli.jobs, || commands::cmd_sweep(&cfg, &data, &grid, &seeds, &opts, exec))?;
            emit(out.as_deref(), curve.to_csv().as_bytes())?;
            Ok(0)
        }
        Command::Monitor {
            snapshot: snap,
            dataset,
            cusum_k,
            cusum_h,
            baseline_window,
            live_tau,
            out,
            report,
        } => {
            let model = snapshot::load(&snap)?;
            let data = Dataset::read_csv_path(&dataset, model.config())?;
            let settings = DriftSettings {
                k_sigmas: cusum_k,
                h_sigmas: cusum_h,
                baseline_window,
                live_tau,
            };
            let products = commands::cmd_monitor(&model, &data, &settings)?;
            emit(out.as_deref(), products.events_csv.as_bytes())?;
            if let Some(p) = report {
                emit(Some(&p), products.report.render().as_bytes())?;
            }
            Ok(0)
        }
        Command::Generate {
            preset,
            samples,
            seed,
            noise,
            dataset,
            config,
            snapshot: snap,
        } => {
            if preset == "risk-demo" {
                let path = snap.ok_or_else(|| Error::Argument("risk-demo needs --snapshot".into()))?;
                let model = commands::risk_demo_model()?;
                snapshot::save(&model, &path)?;
                if let Some(c) = config {
                    std::fs::write(c, serde_json::to_string_pretty(model.config())? + "\n")?;
                }
                return Ok(0);
            }
            let table = commands::preset(&preset, noise, seed)?;
            let cfg = table.config();
            let data = table.sample(samples, seed);
            if let Some(c) = config {
                std::fs::write(c, serde_json::to_string_pretty(&cfg)? + "\n")?;
            }
            let mut buf = Vec::new();
            data.write_csv(&mut buf, &cfg)?;
            emit(dataset.as_deref(), &buf)?;
            Ok(0)
        }
        Command::Ontology {
            config,
            purpose,
            created,
            tau_z,
            out,
        } => {
            let cfg = read_config(&config, tau_z)?;
            emit(out.as_deref(), commands::cmd_ontology(&cfg, &purpose, &created)?.as_bytes())?;
            Ok(0)
        }
        Command::Spike {
            config,
            dataset,
            snapshot: snap,
            seed,
            tau_z,
            presentation_steps,
            epochs,
            raster,
            record_steps,
            out,
        } => {
            let cfg = read_config(&config, tau_z)?;
            if cfg.spiking.is_none() {
                return Err(Error::Config("spiking parameters missing; add a spiking section or --tau-z".into()));
            }
            let data = Dataset::read_csv_path(&dataset, &cfg)?;
            let opts = SpikeTrainOptions {
                presentation_steps,
                epochs,
                seed,
                record_steps: if raster.is_some() { record_steps } else { 0 },
            };
            let products = commands::cmd_spike(cfg, &data, &opts)?;
            snapshot::save(&products.model, &snap)?;
            if let Some(p) = raster {
                std::fs::write(p, &products.raster)?;
            }
            emit(out.as_deref(), products.report.render().as_bytes())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let jobs = cli.jobs;
    match with_jobs(jobs, || run(cli)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
