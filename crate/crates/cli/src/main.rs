use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use occurlens::pipeline::{
    emit_report, evaluate_models, explain_models, ingest_station, prepare, restrict, run_pipeline, select_stations,
    station_statistics, synth_files, train_models, ReportBundle, RunConfig, WorkDir,
};
use occurlens::Error;

const THREADS_ENV: &str = "OCCURLENS_THREADS";

#[derive(Parser, Debug)]
#[command(name = "occurlens", version, about = "Hourly event-occurrence analysis pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Restricts the step to one station.
    #[arg(long, global = true)]
    station: Option<String>,

    /// Output directory; overrides `out_dir` from the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Write the configured synthetic station as input CSV files under `<out>/data`.
    Synth,
    /// Filter stations, impute covariates and save feature tables.
    Ingest,
    /// Correlations, independence tests and information values.
    Stats,
    /// Fit the configured models.
    Train,
    /// Shapley summaries and permutation importance.
    Explain,
    /// AUC, ROC and class-zero precision on the evaluation year.
    Eval,
    /// Assemble the report bundle from saved intermediates.
    Report,
    /// Run every step in memory and write the report.
    All,
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot size thread pool: {e}")))
}

fn for_stations<F>(ids: &[String], f: F) -> Result<(), Failure>
where
    F: Fn(&str) -> occurlens::Result<()> + Sync,
{
    ids.par_iter().map(|id| f(id)).collect::<occurlens::Result<Vec<()>>>()?;
    Ok(())
}

fn summarize(bundle: &ReportBundle) {
    for s in &bundle.stations {
        for m in &s.models {
            match m.auc {
                Some(auc) => println!("{}\t{}\tauc={auc:.4}", s.station_id, m.model),
                None => println!(
                    "{}\t{}\tdegenerate: {}",
                    s.station_id,
                    m.model,
                    m.note.as_deref().unwrap_or("")
                ),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    let config_path = cli
        .config
        .ok_or_else(|| Failure::Usage("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(&config_path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| Failure::Usage("no output directory: pass --out or set out_dir".into()))?;
    let wd = WorkDir::new(out);
    let station = cli.station.as_deref();
    let selected = || -> Result<Vec<String>, Failure> { Ok(restrict(&wd.load_selection()?.selected, station)?) };

    match cli.command {
        Command::Synth => {
            let files = synth_files(&cfg)?
                .ok_or_else(|| Error::Config("synth needs a synthetic input in the configuration".into()))?;
            wd.write_inputs(&files)?;
            println!("wrote {}", wd.data_dir().display());
        }
        Command::Ingest => {
            let inputs = wd.inputs(&cfg)?;
            let selection = select_stations(&cfg, &inputs)?;
            for e in &selection.excluded {
                log::info!("excluded {}: {}", e.station_id, e.reason);
            }
            let ids = restrict(&selection.selected, station)?;
            for_stations(&ids, |id| {
                let data = ingest_station(&cfg, &inputs, id).map_err(|e| e.in_stage("ingest", id))?;
                wd.save_station_data(&data)
            })?;
            wd.save_selection(&selection)?;
            println!("ingested {} station(s)", ids.len());
        }
        Command::Stats => for_stations(&selected()?, |id| {
            let prepared = prepare(&cfg, &wd.load_station_data(id)?).map_err(|e| e.in_stage("prepare", id))?;
            let stats = station_statistics(&cfg, &prepared).map_err(|e| e.in_stage("stats", id))?;
            wd.save_stats(id, &stats)
        })?,
        Command::Train => for_stations(&selected()?, |id| {
            let prepared = prepare(&cfg, &wd.load_station_data(id)?).map_err(|e| e.in_stage("prepare", id))?;
            let models = train_models(&cfg, &prepared).map_err(|e| e.in_stage("train", id))?;
            wd.save_models(id, &models)
        })?,
        Command::Eval => for_stations(&selected()?, |id| {
            let prepared = prepare(&cfg, &wd.load_station_data(id)?).map_err(|e| e.in_stage("prepare", id))?;
            let models = wd.load_models(id)?;
            let evals = evaluate_models(&cfg, &prepared, &models).map_err(|e| e.in_stage("eval", id))?;
            wd.save_evaluations(id, &evals)
        })?,
        Command::Explain => for_stations(&selected()?, |id| {
            let prepared = prepare(&cfg, &wd.load_station_data(id)?).map_err(|e| e.in_stage("prepare", id))?;
            let models = wd.load_models(id)?;
            let imp = explain_models(&cfg, &prepared, &models).map_err(|e| e.in_stage("explain", id))?;
            wd.save_importance(id, &imp)
        })?,
        Command::Report => {
            let bundle = wd.build_bundle(&cfg, station)?;
            emit_report(&bundle, &wd.report_dir())?;
            summarize(&bundle);
            println!("wrote {}", wd.report_dir().display());
        }
        Command::All => {
            if let Some(s) = station {
                cfg.stations = Some(vec![s.to_string()]);
            }
            let bundle = run_pipeline(&cfg)?;
            emit_report(&bundle, &wd.report_dir())?;
            summarize(&bundle);
            println!("wrote {}", wd.report_dir().display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 3 })
        }
    }
}
