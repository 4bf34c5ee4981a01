//! textrack: track, evaluate, synthesize and benchmark multi-text video
//! tracking runs.
//!
//! Exit codes: 0 on success, 1 on validation/parse errors, 2 on I/O
//! errors. Output files are written atomically, so a failing run leaves
//! no partial outputs behind.

mod bench;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use textrack_core::{io, metrics, synth, tracker, Error};

#[derive(Parser)]
#[command(name = "textrack", version, about = "Multi-text video tracking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track a video from a per-frame detections file.
    Track {
        /// Detections file (line format, see README).
        #[arg(long)]
        detections: PathBuf,
        /// Directory of P5 graymap frames named 000000.pgm, 000001.pgm, ...
        /// Required when complementation or patch embeddings are enabled.
        #[arg(long)]
        frames: Option<PathBuf>,
        /// key=value tracker configuration.
        #[arg(long)]
        config: PathBuf,
        /// Result file to write.
        #[arg(long)]
        out: PathBuf,
        /// Seed recorded in the result header (provenance only).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a tracking result against ground truth.
    Eval {
        /// Ground-truth file (canonical format, or .xml for the ICDAR
        /// VideoText-style importer).
        #[arg(long)]
        gt: PathBuf,
        /// Result file produced by `track`.
        #[arg(long)]
        result: PathBuf,
        /// Report file to write (flat key = value text).
        #[arg(long)]
        out: PathBuf,
        /// Optional structured JSON report.
        #[arg(long)]
        json: Option<PathBuf>,
        /// IOU threshold for box matching.
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
    },
    /// Generate a synthetic scenario: frames, ground truth and corrupted
    /// detections.
    Synth {
        /// key=value scenario spec.
        #[arg(long)]
        spec: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an ablation benchmark over seeded synthetic scenarios and emit
    /// one report per configuration cell plus a summary.
    Bench {
        /// key=value scenario spec used as the base for every seed.
        #[arg(long)]
        spec: PathBuf,
        /// Which ablation to run: scm, embedding or distances.
        #[arg(long)]
        ablate: String,
        /// Number of seeds (scenarios are re-seeded 1..=seeds).
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    std::process::exit(0);
                }
                _ => {
                    eprint!("{e}");
                    std::process::exit(1);
                }
            }
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Io { .. } => 2,
                _ => 1,
            };
            std::process::exit(code);
        }
    }
}

fn run(cli: Cli) -> textrack_core::Result<()> {
    match cli.command {
        Command::Track {
            detections,
            frames,
            config,
            out,
            seed,
        } => {
            let cfg = io::load_config(&config)?;
            let mut video = io::VideoInput::new(detections);
            video.frames_dir = frames;
            video.seed = seed;
            let result = tracker::run_video(&video, &cfg)?;
            io::write_result(&out, &result)?;
            println!(
                "tracked {} instances over {} trajectories -> {}",
                result.records.len(),
                result.trajectories.len(),
                out.display()
            );
            Ok(())
        }
        Command::Eval {
            gt,
            result,
            out,
            json,
            iou,
        } => {
            let ground_truth = io::load_ground_truth(&gt)?;
            let tracking = io::read_result(&result)?;
            let report = metrics::evaluate(&ground_truth, &tracking, iou)?;
            io::write_report(&out, &report)?;
            if let Some(json_path) = json {
                io::write_report_json(&json_path, &report)?;
            }
            print!("{}", report.to_text());
            Ok(())
        }
        Command::Synth { spec, out } => {
            let spec = io::load_scenario(&spec)?;
            let scenario = synth::generate(&spec)?;
            write_scenario(&out, &scenario)?;
            println!(
                "wrote {} frames, {} trajectories, {} detections -> {}",
                scenario.frames.len(),
                scenario.gt.trajectory_count(),
                scenario.detections.iter().map(Vec::len).sum::<usize>(),
                out.display()
            );
            Ok(())
        }
        Command::Bench {
            spec,
            ablate,
            seeds,
            out,
        } => bench::run(&spec, &ablate, seeds, &out),
    }
}

/// Write a generated scenario to disk; on failure, remove everything
/// already written for this invocation.
fn write_scenario(dir: &std::path::Path, scenario: &synth::Scenario) -> textrack_core::Result<()> {
    let frames_dir = dir.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(|e| Error::Io {
        path: frames_dir.clone(),
        source: e,
    })?;
    let mut written: Vec<PathBuf> = Vec::new();
    let mut attempt = || -> textrack_core::Result<()> {
        let spec_path = dir.join("spec.txt");
        io::write_atomic(
            &spec_path,
            io::config::write_scenario_string(&scenario.spec).as_bytes(),
        )?;
        written.push(spec_path);
        let gt_path = dir.join("gt.txt");
        io::save_ground_truth(&gt_path, &scenario.gt)?;
        written.push(gt_path);
        let det_path = dir.join("detections.txt");
        io::save_detections(&det_path, &scenario.detections)?;
        written.push(det_path);
        for (index, frame) in scenario.frames.iter().enumerate() {
            let path = frames_dir.join(io::frame_file_name(index as u64));
            io::write_frame(&path, frame)?;
            written.push(path);
        }
        Ok(())
    };
    match attempt() {
        Ok(()) => Ok(()),
        Err(e) => {
            for path in written {
                let _ = std::fs::remove_file(path);
            }
            Err(e)
        }
    }
}
