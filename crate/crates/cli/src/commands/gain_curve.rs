use clap::Parser;
use recoil_lase::constants::PhysicalConstants;
use recoil_lase::gain;
use recoil_lase::Result;
use serde::Serialize;

use crate::manifest::ManifestWriter;
use crate::Context;

#[derive(Parser, Debug)]
pub struct Args {
    /// Radial temperature override, K.
    #[arg(long)]
    pub temperature: Option<f64>,

    /// Emission wavelength override, m.
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Photon-recoil multiplier override.
    #[arg(long)]
    pub recoil_order: Option<f64>,

    /// Lower edge of the offset grid, Hz (default −10 thermal widths).
    #[arg(long)]
    pub f_min: Option<f64>,

    /// Upper edge of the offset grid, Hz.
    #[arg(long)]
    pub f_max: Option<f64>,

    /// Number of grid points.
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
}

#[derive(Serialize)]
struct Summary {
    peak_hz: f64,
    peak_gain_per_hz: f64,
    temperature_k: f64,
    lambda_m: f64,
    recoil_order: f64,
    grid_min_hz: f64,
    grid_max_hz: f64,
    points: usize,
}

pub fn run(ctx: &Context, args: &Args) -> Result<()> {
    let temperature = args.temperature.unwrap_or(ctx.params.temperature);
    let lambda = args.lambda.unwrap_or(PhysicalConstants::SR88.lambda_689);
    let recoil_order = args.recoil_order.unwrap_or(ctx.params.recoil_order);

    let c = PhysicalConstants::SR88;
    let thermal_f = (c.k_b * temperature.abs() / c.m_sr88).sqrt() / lambda.abs().max(1e-12);
    let f_min = args.f_min.unwrap_or(-10.0 * thermal_f);
    let f_max = args.f_max.unwrap_or(10.0 * thermal_f);
    let points = args.points.max(2);
    let grid: Vec<f64> = (0..points)
        .map(|i| f_min + (f_max - f_min) * i as f64 / (points - 1) as f64)
        .collect();

    let curve = gain::sample_gain_curve(temperature, lambda, recoil_order, &grid)?;
    let (peak_hz, peak_gain) = gain::rir_peak(temperature, lambda, recoil_order)?;

    let mut manifest = ManifestWriter::new("gain-curve", &ctx.params, ctx.seed, &ctx.out_dir);
    manifest.write_text("gain_curve.csv", &curve.to_csv())?;
    let summary = Summary {
        peak_hz,
        peak_gain_per_hz: peak_gain,
        temperature_k: temperature,
        lambda_m: lambda,
        recoil_order,
        grid_min_hz: f_min,
        grid_max_hz: f_max,
        points,
    };
    manifest.write_text(
        "gain_curve_summary.json",
        &serde_json::to_string_pretty(&summary).expect("summary serialises"),
    )?;
    manifest.finish()
}
