use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gfra_cli::{run_experiment, ExperimentConfig, Figure, Modes};
use gfra_core::analytic::MixtureMode;
use gfra_core::kpi::LifetimeMode;
use gfra_sigchain::suite::validate_receiver;

#[derive(Parser)]
#[command(name = "gfra", version, about = "Grant-free random access experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mixture {
    PoissonMixture,
    MeanCount,
}

#[derive(Clone, Copy, ValueEnum)]
enum Lifetime {
    Corrected,
    PaperLiteral,
}

#[derive(Clone, Copy, ValueEnum)]
enum Law {
    Oracle,
    ClosedForm,
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration; omitted keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single seed (overrides `seeds`).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the load grid and write the figure tables and summary.json.
    Run {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of ee, lifetime, delay, se, reliability.
        #[arg(long, value_delimiter = ',')]
        figures: Option<Vec<Figure>>,
        /// Use the printed expressions: 1/Po lifetime, closed-form overlap
        /// law, fixed interferer count. Individual mode flags still apply.
        #[arg(long)]
        paper_literal: bool,
        #[arg(long, value_enum)]
        mixture: Option<Mixture>,
        #[arg(long, value_enum)]
        lifetime: Option<Lifetime>,
        #[arg(long, value_enum)]
        base_law: Option<Law>,
        /// Repetitions per cell and seed.
        #[arg(long)]
        reps: Option<usize>,
        /// New packets per trial.
        #[arg(long)]
        packets: Option<f64>,
    },
    /// Run the synthetic receiver suites and write receiver-report.json.
    /// Exits with status 2 if a suite fails.
    ValidateReceiver {
        #[command(flatten)]
        common: Common,
        /// Trials per suite (overrides both suite sizes).
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn load(common: &Common) -> gfra_core::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = common.seed {
        cfg.seeds = vec![s];
        cfg.suite.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> gfra_core::Result<bool> {
    match cli.command {
        Command::Run { common, figures, paper_literal, mixture, lifetime, base_law, reps, packets } => {
            let mut cfg = load(&common)?;
            if paper_literal {
                cfg.modes = Modes::paper_literal();
            }
            if let Some(m) = mixture {
                cfg.modes.mixture = match m {
                    Mixture::PoissonMixture => MixtureMode::PoissonMixture,
                    Mixture::MeanCount => MixtureMode::MeanCount,
                };
            }
            if let Some(l) = lifetime {
                cfg.modes.lifetime = match l {
                    Lifetime::Corrected => LifetimeMode::Corrected,
                    Lifetime::PaperLiteral => LifetimeMode::PaperLiteral,
                };
            }
            if let Some(b) = base_law {
                cfg.modes.base_law = match b {
                    Law::Oracle => gfra_cli::config::BaseLawKind::Oracle,
                    Law::ClosedForm => gfra_cli::config::BaseLawKind::ClosedForm,
                };
            }
            if let Some(r) = reps {
                cfg.reps = r;
            }
            if let Some(n) = packets {
                cfg.packets_per_trial = n;
            }
            let figures = figures.unwrap_or_else(|| Figure::ALL.to_vec());
            let start = std::time::Instant::now();
            let out = run_experiment(&cfg, &figures)?;
            log::info!("{} rows in {:.1} s", out.rows.len(), start.elapsed().as_secs_f64());
            for f in &out.files {
                println!("{}", f.display());
            }
            let flagged = out.rows.iter().filter(|r| r.divergent).count();
            if flagged > 0 {
                eprintln!("{flagged} rows flagged divergent; see summary.json");
            }
            Ok(true)
        }
        Command::ValidateReceiver { common, trials } => {
            let mut cfg = load(&common)?;
            if let Some(t) = trials {
                cfg.suite.single_trials = t;
                cfg.suite.spc_trials = t;
            }
            let report = validate_receiver(&cfg.system, &cfg.receiver, &cfg.suite)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            let path = cfg.out_dir.join("receiver-report.json");
            std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
            let verdict = |b: bool| if b { "PASS" } else { "FAIL" };
            let (s, c, d) = (&report.single, &report.spc, &report.drift);
            println!("single-packet  {}  bit errors {}/{} lost {}", verdict(s.pass), s.bit_errors, s.bits, s.lost);
            println!(
                "two-packet     {}  false positives {:.4} misses {:.4}",
                verdict(c.pass),
                c.false_positive_rate,
                c.miss_rate
            );
            println!("drift table    {}  Q(0)={} max |Q|={} bound {}", verdict(d.pass), d.zero_shift, d.max_abs_shift, d.bound);
            println!("{}", path.display());
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
