use clap::Parser;
use recoil_lase::spectra::{doppler_difference, transport_velocity};
use recoil_lase::Result;
use serde::Serialize;

use crate::manifest::ManifestWriter;
use crate::Context;

#[derive(Parser, Debug)]
pub struct Args {
    /// Lattice-beam frequency offset δ_t, Hz.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "v_t")]
    pub delta_t: Option<f64>,

    /// Transport velocity, m/s (alternative to --delta-t).
    #[arg(long, allow_hyphen_values = true, required_unless_present = "delta_t")]
    pub v_t: Option<f64>,
}

#[derive(Serialize)]
struct Report {
    delta_t_hz: Option<f64>,
    v_t_mps: f64,
    delta_f_cw_ccw_hz: f64,
    out_of_model: bool,
}

pub fn run(ctx: &Context, args: &Args) -> Result<()> {
    let v_t = match (args.delta_t, args.v_t) {
        (Some(dt), _) => transport_velocity(dt),
        (None, Some(v)) => v,
        (None, None) => unreachable!("clap enforces one of the two"),
    };
    let split = doppler_difference(v_t);

    let mut manifest = ManifestWriter::new("doppler", &ctx.params, ctx.seed, &ctx.out_dir);
    let report = Report {
        delta_t_hz: args.delta_t,
        v_t_mps: v_t,
        delta_f_cw_ccw_hz: split.delta_f,
        out_of_model: split.out_of_model,
    };
    manifest.write_text(
        "doppler.json",
        &serde_json::to_string_pretty(&report).expect("report serialises"),
    )?;
    manifest.finish()
}
