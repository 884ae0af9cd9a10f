use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sketchint::experiment::{
    emit_figure_data, load_results, run_experiment, ExperimentSpec, Figure,
};
use sketchint::{Error, Result, Sketchlet, SketchletLayout};

/// Sweep runner and sketchlet debugging tool.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every point of an experiment spec and write results.csv and results.json.
    Run {
        /// Experiment spec (JSON).
        spec: PathBuf,
        /// Output directory; overrides the spec's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base simulation seed; overrides the spec's `base.seed`.
        #[arg(long, env = "SKETCHINT_SEED")]
        seed: Option<u64>,
    },
    /// Summarize results into a plot-ready long-format CSV on stdout.
    Figure {
        /// results.csv or results.json from `run`.
        results: PathBuf,
        /// One of fig4, fig5a, fig5b, fig6-offset, fig6-cookie.
        figure: String,
    },
    /// Encode or decode a single sketchlet as hex.
    Codec {
        #[command(subcommand)]
        op: CodecOp,
    },
}

#[derive(Args)]
struct LayoutArgs {
    /// Sketch rows.
    #[arg(short = 'd', long, default_value_t = 2)]
    rows: usize,
    /// Sketch width (power of two).
    #[arg(short = 'w', long, default_value_t = 1 << 15)]
    width: usize,
    /// Counter bits.
    #[arg(short = 'c', long, default_value_t = 64)]
    counter_bits: u32,
    /// Offset bits per row; 0 for column sketchlets.
    #[arg(short = 'r', long, default_value_t = 6)]
    offset_bits: u32,
}

impl LayoutArgs {
    fn layout(&self) -> Result<SketchletLayout> {
        SketchletLayout::new(self.rows, self.width, self.counter_bits, self.offset_bits)
    }
}

#[derive(Subcommand)]
enum CodecOp {
    /// Print the hex encoding of a sketchlet.
    Encode {
        #[command(flatten)]
        layout: LayoutArgs,
        /// Base column address.
        #[arg(long)]
        addr: u32,
        /// Comma-separated per-row offsets; omit for a column sketchlet.
        #[arg(long, value_delimiter = ',')]
        offsets: Vec<u32>,
        /// Comma-separated per-row counter values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<u64>,
    },
    /// Print a hex-encoded sketchlet as JSON.
    Decode {
        #[command(flatten)]
        layout: LayoutArgs,
        /// Hex bytes.
        hex: String,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run { spec, out, seed } => {
            let mut spec = ExperimentSpec::load(&spec)?;
            if let Some(seed) = seed {
                spec.base.seed = seed;
            }
            let records = run_experiment(&spec, out.as_deref())?;
            eprintln!("{} runs completed", records.len());
        }
        Cmd::Figure { results, figure } => {
            let figure: Figure = figure.parse()?;
            print!("{}", emit_figure_data(&load_results(results)?, figure)?);
        }
        Cmd::Codec { op } => match op {
            CodecOp::Encode {
                layout,
                addr,
                offsets,
                values,
            } => {
                let bytes = layout.layout()?.encode(&Sketchlet {
                    addr,
                    offsets,
                    values,
                })?;
                println!("{}", hex::encode(bytes));
            }
            CodecOp::Decode { layout, hex } => {
                let bytes =
                    hex::decode(hex.trim()).map_err(|e| Error::Decode(format!("bad hex: {e}")))?;
                let s = layout.layout()?.decode(&bytes)?;
                println!("{}", serde_json::to_string(&s)?);
            }
        },
    }
    Ok(())
}
