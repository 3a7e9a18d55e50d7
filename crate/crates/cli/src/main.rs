use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use commevolve::artifacts::{header_line, write_atomic};
use commevolve::config::RunConfig;
use commevolve::experiments::{generate_synthetic, run_comparative, run_temporal_study, SynthConfig};
use commevolve::pipeline::{
    event_stats_csv, load_dataset, load_events, load_series, run_pipeline, snapshot_stats_csv, StageStatus,
};

#[derive(Parser, Debug)]
#[command(
    name = "commevolve",
    version,
    about = "Community evolution prediction on temporal interaction networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overwrite stage outputs whose hashes no longer match their manifest.
    #[arg(long)]
    force: bool,
    /// Worker threads for split-level parallelism.
    #[arg(long, value_name = "N", default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    /// Overrides the configured seed.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Comparative,
    Temporal,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ingest, snapshot, detect, track and featurize.
    Pipeline(Common),
    /// Run the comparative or temporal study on pipeline artifacts.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Mode,
    },
    /// Per-snapshot network sizes and event distributions.
    Stats(Common),
    /// Write a synthetic interaction log with planted events.
    Synth {
        /// Output CSV; planted events go to `<PATH>.events.csv`.
        #[arg(long, value_name = "PATH")]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        snapshots: usize,
        #[arg(long, default_value_t = 40)]
        communities: usize,
        #[arg(long, default_value_t = 0)]
        noise_edges: usize,
        #[arg(long, default_value_t = 1000)]
        window_length_seconds: i64,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg =
        RunConfig::load(&common.config).with_context(|| format!("loading config {}", common.config.display()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs.into())
        .build_global()
        .context("configuring worker threads")?;
    Ok(cfg)
}

fn output_header(cfg: &RunConfig, kind: &str) -> String {
    header_line(&[
        ("output", kind.into()),
        ("config_hash", cfg.settings_hash()),
        ("seed", cfg.seed.to_string()),
    ])
}

fn write_output(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    write_atomic(&path, contents.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn pipeline(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    for report in run_pipeline(&cfg, common.force)? {
        let status = match report.status {
            StageStatus::Ran => "ran",
            StageStatus::Skipped => "skipped",
        };
        println!("{:<10} {status}", report.stage.name());
    }
    Ok(())
}

fn experiment(common: &Common, mode: Mode) -> Result<()> {
    let cfg = load_config(common)?;
    let dataset = load_dataset(&cfg.output_dir)?;
    let exp = cfg.experiment();
    match mode {
        Mode::Comparative => {
            let table = run_comparative(&dataset, &exp)?;
            let header = output_header(&cfg, "comparative");
            write_output(&cfg.output_dir, "comparative_results.csv", &table.results_csv(&header))?;
            write_output(&cfg.output_dir, "comparative_summary.csv", &table.summary_csv(&header))?;
            print!("{}", table.render_summary());
        }
        Mode::Temporal => {
            let table = run_temporal_study(&dataset, &exp)?;
            let header = output_header(&cfg, "temporal");
            write_output(&cfg.output_dir, "temporal_results.csv", &table.to_csv(&header))?;
            println!("{} temporal records", table.records.len());
        }
    }
    Ok(())
}

fn stats(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let series = load_series(&cfg.output_dir)?;
    let events = load_events(&cfg.output_dir, series.len())?;
    write_output(
        &cfg.output_dir,
        "snapshot_stats.csv",
        &snapshot_stats_csv(&series, &output_header(&cfg, "snapshot_stats")),
    )?;
    write_output(
        &cfg.output_dir,
        "event_stats.csv",
        &event_stats_csv(&events, &output_header(&cfg, "event_stats")),
    )?;
    Ok(())
}

fn synth(output: &Path, seed: u64, cfg: SynthConfig) -> Result<()> {
    let data = generate_synthetic(&cfg, seed)?;
    write_atomic(output, data.to_csv().as_bytes()).with_context(|| format!("writing {}", output.display()))?;
    let mut events = String::from("t,event,members\n");
    for e in &data.events {
        let members: Vec<String> = e.members.iter().map(ToString::to_string).collect();
        let _ = writeln!(events, "{},{},{}", e.t, e.kind.name(), members.join(" "));
    }
    let mut events_path = output.as_os_str().to_owned();
    events_path.push(".events.csv");
    write_atomic(Path::new(&events_path), events.as_bytes())?;
    println!(
        "wrote {} interactions, {} planted events",
        data.interactions.len(),
        data.events.len()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pipeline(c) => pipeline(&c),
        Command::Experiment { common, mode } => experiment(&common, mode),
        Command::Stats(c) => stats(&c),
        Command::Synth {
            output,
            seed,
            snapshots,
            communities,
            noise_edges,
            window_length_seconds,
        } => {
            let cfg = SynthConfig {
                snapshots,
                communities,
                noise_edges,
                window_length: window_length_seconds,
                ..SynthConfig::default()
            };
            synth(&output, seed, cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
