use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sicn_core::experiment::{
    load_datasets, load_diagnoses, load_evaluation, load_models, load_stream, run_experiment, stage_compare,
    stage_evaluate, stage_featurize, stage_mitigate, stage_pipeline, stage_simulate, stage_train, ExperimentConfig,
    ExperimentError, Stage,
};
use sicn_core::mitigation::ActionKind;

/// Hierarchical anomaly identification and mitigation experiments.
#[derive(Debug, Parser)]
#[command(name = "sicn", version)]
struct Cli {
    /// Experiment config (TOML or JSON).
    #[arg(long, global = true, default_value = "configs/default.toml")]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the window length in seconds.
    #[arg(long, global = true)]
    window_seconds: Option<i64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the update stream and ground truth.
    Simulate,
    /// Window, featurize and label the stream into datasets.
    Featurize,
    /// Fit hierarchical pipelines and flat baselines.
    Train,
    /// Score the trained models on the held-out windows.
    Evaluate,
    /// Run the diagnosis pipeline over the held-out windows.
    Pipeline,
    /// Hierarchical-vs-flat comparison report.
    Compare,
    /// Mitigation plans for every detection.
    Mitigate,
    /// Every stage in order.
    Run,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.window_seconds {
        cfg.window_seconds = w;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), ExperimentError> {
    let cfg = load_config(cli)?;
    let plans = cfg.validate()?;
    let topology = cfg.load_topology()?;
    let out = cfg.output_dir.as_path();
    match cli.command {
        Command::Simulate => {
            let (records, truth) = stage_simulate(&cfg, &topology)?;
            println!(
                "{} records, {} ground-truth intervals -> {}",
                records.len(),
                truth.len(),
                out.display()
            );
        }
        Command::Featurize => {
            let (records, truth) = load_stream(out)?;
            let data = stage_featurize(&cfg, records, &truth)?;
            println!("{} windows ({} for step 2)", data.ni.len(), data.na.len());
        }
        Command::Train => {
            let (ni, na) = load_datasets(out, Stage::Train)?;
            for t in stage_train(&cfg, &plans, &ni, &na)? {
                let times = t.times();
                println!(
                    "{:<15} step1 {:.3}s  step2 {:.3}s  flat {:.3}s",
                    t.algorithm.name(),
                    times.step1,
                    times.step2,
                    times.flat
                );
            }
        }
        Command::Evaluate => {
            let (ni, na) = load_datasets(out, Stage::Evaluate)?;
            let trained = load_models(out, &plans, Stage::Evaluate)?;
            let metrics = stage_evaluate(&cfg, &trained, &ni, &na, &topology)?;
            println!("algorithm        step1 acc/F1     step2 acc/F1     flat acc/F1");
            for m in &metrics {
                println!(
                    "{:<15}  {:.4}/{:.4}    {:.4}/{:.4}    {:.4}/{:.4}",
                    m.algorithm.name(),
                    m.step1.accuracy,
                    m.step1.macro_f1,
                    m.step2.accuracy,
                    m.step2.macro_f1,
                    m.flat.accuracy,
                    m.flat.macro_f1
                );
            }
        }
        Command::Pipeline => {
            let (ni, na) = load_datasets(out, Stage::Pipeline)?;
            let chosen = cfg.diagnosis_algorithm(&plans);
            let plan: Vec<_> = plans.into_iter().filter(|p| p.algorithm == chosen).collect();
            let trained = load_models(out, &plan, Stage::Pipeline)?;
            let (entries, latency) = stage_pipeline(&cfg, &trained[0].pipeline, &ni, &na, &topology)?;
            let detections = entries.iter().filter(|e| e.verdict.flat_label() != 0).count();
            println!(
                "{chosen}: {} windows, {detections} detections, step 2 ran {} times, mean latency {:.1} us",
                entries.len(),
                latency.step2_invocations,
                latency.mean_seconds * 1e6
            );
        }
        Command::Compare => {
            let report = stage_compare(&cfg, &load_evaluation(out)?)?;
            let mut csv = Vec::new();
            report
                .write_csv(&mut csv)
                .map_err(|e| ExperimentError::new(Stage::Compare, e))?;
            print!("{}", String::from_utf8_lossy(&csv));
        }
        Command::Mitigate => {
            let plans = stage_mitigate(&cfg, &load_diagnoses(out)?, &topology)?;
            for kind in [
                ActionKind::BackhaulSwitch,
                ActionKind::HapDispatch,
                ActionKind::BandSwitch,
                ActionKind::RepairDispatch,
                ActionKind::DeferToNid,
            ] {
                let n = plans.iter().filter(|p| p.plan.has(kind)).count();
                println!("{:<16} {n}", kind.name());
            }
        }
        Command::Run => {
            let report = run_experiment(&cfg)?;
            println!(
                "{} records, {} windows; diagnosis by {}",
                report.records, report.windows, report.diagnosed_with
            );
            let mut csv = Vec::new();
            report
                .comparison
                .write_csv(&mut csv)
                .map_err(|e| ExperimentError::new(Stage::Compare, e))?;
            print!("{}", String::from_utf8_lossy(&csv));
            println!("outputs in {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sicn: {e}");
            ExitCode::from(match e.stage {
                Stage::Config => 2,
                _ => 1,
            })
        }
    }
}
