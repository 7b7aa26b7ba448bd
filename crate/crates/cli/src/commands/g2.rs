use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use recoil_lase::photon_stats::{
    apply_dead_time, bin_counts, g2_estimate, g2_zero_limit, gen_modulated, gen_poisson,
    gen_thermal, read_timetags, write_timetags,
};
use recoil_lase::Result;
use serde::Serialize;

use crate::manifest::ManifestWriter;
use crate::Context;

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Generator {
    Poisson,
    Modulated,
    Thermal,
}

#[derive(Parser, Debug)]
pub struct Args {
    /// Time-tag file (one arrival time in seconds per line); overrides the
    /// generator.
    #[arg(long, conflicts_with = "gen")]
    pub input: Option<PathBuf>,

    /// Synthetic stream to generate when no input file is given.
    #[arg(long, value_enum, default_value_t = Generator::Poisson)]
    pub gen: Generator,

    /// Mean count rate of the generated stream, 1/s.
    #[arg(long, default_value_t = 1.5e6)]
    pub rate: f64,

    /// Stream duration, s (also overrides the duration of an input file).
    #[arg(long)]
    pub duration: Option<f64>,

    /// Intensity modulation frequency, Hz (modulated generator).
    #[arg(long, default_value_t = 1e4)]
    pub mod_freq: f64,

    /// Intensity modulation depth in [0, 1] (modulated generator).
    #[arg(long, default_value_t = 0.5)]
    pub depth: f64,

    /// Intensity coherence time, s (thermal generator).
    #[arg(long, default_value_t = 1e-4)]
    pub coherence_time: f64,

    /// Detector dead time, s.
    #[arg(long, default_value_t = 22e-9)]
    pub dead_time: f64,

    /// Counting bin width, s.
    #[arg(long, default_value_t = 300e-9)]
    pub bin: f64,

    /// Largest lag in bins.
    #[arg(long, default_value_t = 100)]
    pub tau_max_bins: usize,

    /// Also export the (dead-time-filtered) stream as a time-tag file.
    #[arg(long)]
    pub save_tags: bool,
}

#[derive(Serialize)]
struct Summary {
    source: String,
    duration_s: f64,
    events: usize,
    events_after_dead_time: usize,
    dead_time_s: f64,
    bin_s: f64,
    mean_counts_per_bin: f64,
    /// g² at the first nonzero lag: the τ → 0 limit quoted for measured
    /// light.
    g2_0: Option<f64>,
    /// Raw τ = 0 lag including same-bin self-pairs.
    g2_lag0_raw: f64,
}

pub fn run(ctx: &Context, args: &Args) -> Result<()> {
    let (stream, source) = match &args.input {
        Some(path) => (
            read_timetags(path, args.duration)?,
            path.display().to_string(),
        ),
        None => {
            let duration = args.duration.unwrap_or(10.0);
            let stream = match args.gen {
                Generator::Poisson => gen_poisson(args.rate, duration, ctx.seed)?,
                Generator::Modulated => {
                    gen_modulated(args.rate, args.mod_freq, args.depth, duration, ctx.seed)?
                }
                Generator::Thermal => {
                    gen_thermal(args.rate, args.coherence_time, duration, ctx.seed)?
                }
            };
            (stream, format!("{:?}", args.gen).to_lowercase())
        }
    };

    let filtered = apply_dead_time(&stream, args.dead_time)?;
    let bins = bin_counts(&filtered, args.bin)?;
    let tau_max = args.tau_max_bins.min(bins.i_max.saturating_sub(1));
    let g2 = g2_estimate(&bins, tau_max)?;

    let mut manifest = ManifestWriter::new("g2", &ctx.params, ctx.seed, &ctx.out_dir);
    if args.save_tags {
        manifest.write_text("timetags.txt", &write_timetags(&filtered))?;
    }
    manifest.write_text("g2.csv", &g2.to_csv())?;
    let summary = Summary {
        source,
        duration_s: stream.duration,
        events: stream.len(),
        events_after_dead_time: filtered.len(),
        dead_time_s: args.dead_time,
        bin_s: args.bin,
        mean_counts_per_bin: filtered.len() as f64 / bins.i_max as f64,
        g2_0: g2_zero_limit(&g2),
        g2_lag0_raw: g2.g2[0],
    };
    manifest.write_text(
        "g2_summary.json",
        &serde_json::to_string_pretty(&summary).expect("summary serialises"),
    )?;
    manifest.finish()
}
