use clap::{Parser, Subcommand};
use ghm_cli::commands::{
    cmd_analyze, cmd_eval_surrogate, cmd_gen_prior, cmd_hm_run, cmd_make_dataset, cmd_sim_batch,
    cmd_train, cmd_truth_case, TrainTarget,
};
use ghm_cli::Workspace;
use ghm_core::config::{HmMode, RunConfig};
use ghm_core::{GhmError, Result};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "ghm",
    about = "Geomodel history matching: dataset generation, surrogate training and hierarchical MCMC"
)]
struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured work directory.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,

    /// Override the dataset seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Rayon thread-pool size (0 = default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Skip work whose outputs already exist / continue from checkpoints.
    #[arg(long, global = true)]
    resume: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the built-in desk or paper configuration to stdout.
    PrintConfig {
        #[arg(default_value = "desk")]
        which: String,
    },
    /// Build the PCA basis and sample prior geomodels.
    GenPrior,
    /// Simulate every prior geomodel.
    SimBatch,
    /// Convert simulations into surrogate training tensors.
    MakeDataset,
    /// Train one surrogate: "seis" or "mon".
    Train { which: String },
    /// Test-set accuracy, delta_s box plots and the surrogate error model.
    EvalSurrogate,
    /// Simulate the truth case and synthesize noisy observations.
    TruthCase,
    /// Run the hierarchical MCMC chain for one mode.
    HmRun {
        #[arg(long, default_value = "mon")]
        mode: String,
    },
    /// Posterior histograms and representative plumes.
    Analyze {
        /// Mode to analyze, or "all".
        #[arg(long, default_value = "all")]
        mode: String,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::desk(),
    };
    if let Some(seed) = cli.seed {
        cfg.dataset.seed = seed;
    }
    if let Some(dir) = &cli.workdir {
        cfg.paths.workdir = dir.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| GhmError::Config(format!("thread pool: {e}")))?;
    }
    if let Command::PrintConfig { which } = &cli.command {
        let cfg = match which.as_str() {
            "desk" => RunConfig::desk(),
            "paper" => RunConfig::paper(),
            other => return Err(GhmError::Config(format!("unknown config preset '{other}'"))),
        };
        println!(
            "{}",
            serde_json::to_string_pretty(&cfg)
                .map_err(|e| GhmError::Format(format!("encode: {e}")))?
        );
        return Ok(());
    }

    let cfg = load_config(&cli)?;
    let ws = Workspace::new(&cfg.paths.workdir);
    match &cli.command {
        Command::PrintConfig { .. } => unreachable!(),
        Command::GenPrior => {
            let manifest = cmd_gen_prior(&cfg, &ws, cli.resume)?;
            println!(
                "gen-prior: {} models, basis rank {} ({:.1}% energy)",
                manifest.n_models,
                manifest.n_d,
                100.0 * manifest.energy_fraction
            );
        }
        Command::SimBatch => {
            let report = cmd_sim_batch(&cfg, &ws, cli.resume)?;
            println!(
                "sim-batch: {} simulated, {} skipped, worst mass-balance error {:.2e}",
                report.n_simulated, report.n_skipped, report.worst_mass_balance
            );
        }
        Command::MakeDataset => {
            cmd_make_dataset(&cfg, &ws)?;
            println!("make-dataset: wrote seismic and monitoring splits");
        }
        Command::Train { which } => {
            let target = TrainTarget::from_flag(which)?;
            let summary = cmd_train(&cfg, &ws, target)?;
            println!(
                "train {which}: best validation loss {:.4e} at epoch {}",
                summary.best_val, summary.best_epoch
            );
        }
        Command::EvalSurrogate => {
            let e = cmd_eval_surrogate(&cfg, &ws)?;
            println!(
                "eval: seismic loss {:.4e} (baseline {:.4e}), monitor loss {:.4e} (baseline {:.4e})",
                e.seis_test_loss, e.seis_baseline_loss, e.mon_test_loss, e.mon_baseline_loss
            );
        }
        Command::TruthCase => {
            let s = cmd_truth_case(&cfg, &ws)?;
            println!(
                "truth-case: sigma_d_mon {:.4e}, sigma_d_seis {:.4e}",
                s.sigma_d_mon, s.sigma_d_seis_sat
            );
        }
        Command::HmRun { mode } => {
            let mode = HmMode::from_flag(mode)?;
            let r = cmd_hm_run(&cfg, &ws, mode, cli.resume)?;
            println!(
                "hm-run {}: {} iterations, {} evaluations, acceptance xi {:.1}% / h {:.1}%{}",
                r.mode,
                r.iterations,
                r.n_evaluations,
                100.0 * r.acceptance_rate_xi,
                100.0 * r.acceptance_rate_h,
                if r.terminated_by_histogram { " (histogram-terminated)" } else { "" }
            );
        }
        Command::Analyze { mode } => {
            let modes: Vec<HmMode> = if mode == "all" {
                HmMode::ALL
                    .into_iter()
                    .filter(|m| ws.accepted_csv(*m).exists())
                    .collect()
            } else {
                vec![HmMode::from_flag(mode)?]
            };
            if modes.is_empty() {
                return Err(GhmError::Config("no completed chains to analyze".into()));
            }
            let reports = cmd_analyze(&cfg, &ws, &modes)?;
            for r in reports {
                let sigma = &r.histogram.params[1];
                println!(
                    "analyze {}: sigma_logk P50 {:.3} (std ratio {:.2})",
                    r.mode.flag(),
                    sigma.p50,
                    sigma.std_reduction
                );
            }
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
