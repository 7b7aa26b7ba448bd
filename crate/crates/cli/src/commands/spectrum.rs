use std::path::PathBuf;

use clap::Parser;
use recoil_lase::spectra::{
    estimate_psd, fit_lorentzian_fwhm, read_field, synth_field, write_field,
};
use recoil_lase::Result;
use serde::Serialize;

use crate::manifest::ManifestWriter;
use crate::Context;

#[derive(Parser, Debug)]
pub struct Args {
    /// Binary field file written by a previous run; overrides synthesis.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Lorentzian FWHM of the synthesised line, Hz.
    #[arg(long, default_value_t = 7e3)]
    pub fwhm: f64,

    /// Nominal beat frequency, Hz.
    #[arg(long, default_value_t = 1e5)]
    pub f0: f64,

    /// Trace duration, s.
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,

    /// Complex sample rate, 1/s.
    #[arg(long, default_value_t = 1e6)]
    pub sample_rate: f64,

    /// Periodogram segment length, samples (even).
    #[arg(long, default_value_t = 65536)]
    pub segment: usize,

    /// Fractional segment overlap in [0, 0.9].
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,

    /// Also export the analysed trace as a binary field file.
    #[arg(long)]
    pub save_field: bool,
}

#[derive(Serialize)]
struct FitReport {
    source: String,
    f_center_hz: f64,
    fwhm_hz: f64,
    fit_residual: f64,
    resolution_limited: bool,
    resolution_bandwidth_hz: f64,
    segments: usize,
}

pub fn run(ctx: &Context, args: &Args) -> Result<()> {
    let (trace, source) = match &args.input {
        Some(path) => (read_field(path)?, path.display().to_string()),
        None => (
            synth_field(
                args.fwhm,
                args.f0,
                args.duration,
                args.sample_rate,
                ctx.seed,
            )?,
            format!("synthetic fwhm {} Hz", args.fwhm),
        ),
    };

    let mut manifest = ManifestWriter::new("spectrum", &ctx.params, ctx.seed, &ctx.out_dir);
    if args.save_field {
        let path = ctx.out_dir.join("field.bin");
        write_field(&path, &trace)?;
        manifest.record(&path);
    }

    let segment = args.segment.min(trace.samples.len() & !1);
    let spectrum = estimate_psd(&trace, segment, args.overlap)?;
    manifest.write_text("spectrum.csv", &spectrum.to_csv())?;

    // fit failures still leave the spectrum on disk
    let fit = match fit_lorentzian_fwhm(&spectrum) {
        Ok(fit) => fit,
        Err(err) => {
            manifest.finish()?;
            return Err(err);
        }
    };
    let hop = ((segment as f64) * (1.0 - args.overlap)).round().max(1.0) as usize;
    let report = FitReport {
        source,
        f_center_hz: fit.f_center,
        fwhm_hz: fit.fwhm,
        fit_residual: fit.residual,
        resolution_limited: fit.resolution_limited,
        resolution_bandwidth_hz: spectrum.resolution_bandwidth,
        segments: (trace.samples.len().saturating_sub(segment)) / hop + 1,
    };
    manifest.write_text(
        "spectrum_fit.json",
        &serde_json::to_string_pretty(&report).expect("report serialises"),
    )?;
    manifest.finish()
}
