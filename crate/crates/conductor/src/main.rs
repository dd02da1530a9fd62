use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use multiview_conductor::config::SimConfig;
use multiview_conductor::headless::{run_headless, Script};
use multiview_conductor::serve::serve;
use multiview_conductor::tools::{bench_pipeline, replay, sync_report};
use multiview_conductor::ConductorError;
use multiview_core::clocksync::SyncStatus;
use multiview_core::recorder::{verify, Recording};

#[derive(Parser, Debug)]
#[command(name = "multiview", version, about = "Multi-viewpoint telerobotic simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the live simulation and accept TCP and WebSocket clients.
    Sim {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
    },
    /// Run a script against a fresh simulation and record it.
    Headless {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the records of a recording as JSON lines.
    Replay {
        recording: PathBuf,
        /// Playback speed relative to real time; `inf` disables pacing.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
    /// Check every record CRC and summarize the channels.
    Verify { recording: PathBuf },
    /// Throughput of synth -> demosaic -> align on two stereo streams.
    BenchPipeline {
        #[arg(long, default_value_t = 640)]
        width: u32,
        #[arg(long, default_value_t = 480)]
        height: u32,
        #[arg(long, default_value_t = 300)]
        frames: u64,
    },
    /// Simulate clock synchronization and write the residual trace as CSV.
    SyncReport {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        duration: f64,
    },
}

fn print_json<T: Serialize>(value: &T) -> Result<(), ConductorError> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, ConductorError> {
    match cli.command {
        Command::Sim { config, listen } => {
            let cfg = SimConfig::load(config)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&listen).await?;
                eprintln!("listening on {}", listener.local_addr()?);
                serve(cfg, listener, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await
            })?;
        }
        Command::Headless {
            config,
            script,
            out,
        } => {
            let cfg = SimConfig::load(config)?;
            let script = Script::load(script)?;
            print_json(&run_headless(&cfg, &script, &out)?)?;
        }
        Command::Replay { recording, speed } => {
            let rec = Recording::open(recording)?;
            let out = BufWriter::new(io::stdout().lock());
            replay(&rec, speed, out)?;
        }
        Command::Verify { recording } => {
            let report = verify(recording)?;
            print_json(&report)?;
            if !report.is_clean() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::BenchPipeline {
            width,
            height,
            frames,
        } => print_json(&bench_pipeline(width, height, frames)?)?,
        Command::SyncReport {
            config,
            out,
            duration,
        } => {
            let cfg = SimConfig::load(config)?;
            let report = sync_report(&cfg, duration)?;
            report.write_csv(BufWriter::new(File::create(&out)?))?;
            let summary: Vec<_> = report
                .slaves
                .iter()
                .map(|s| {
                    serde_json::json!({
                        "id": s.id,
                        "synchronized": s.status == SyncStatus::Synchronized,
                        "p99_final_ns": s.p99_final_ns,
                    })
                })
                .collect();
            print_json(&summary)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn broken_pipe(e: &ConductorError) -> bool {
    let kind = match e {
        ConductorError::Io(e) => Some(e.kind()),
        ConductorError::Json(e) => e.io_error_kind(),
        _ => None,
    };
    kind == Some(io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        // output piped into something like `head`
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
