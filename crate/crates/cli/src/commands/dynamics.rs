use clap::Parser;
use recoil_lase::dynamics::step_response;
use recoil_lase::equilibrium::Model;
use recoil_lase::Result;
use serde::Serialize;

use crate::manifest::ManifestWriter;
use crate::Context;

#[derive(Parser, Debug)]
pub struct Args {
    /// Bare cavity detuning the system is equilibrated at, Hz.
    #[arg(long, allow_hyphen_values = true)]
    pub delta_ca_before: f64,

    /// Bare cavity detuning after the sudden step, Hz.
    #[arg(long, allow_hyphen_values = true)]
    pub delta_ca_after: f64,

    /// Integration span after the step, s.
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,

    /// Apply the excited-fraction correction inside the feedback loop.
    #[arg(long)]
    pub excited_correction: bool,
}

#[derive(Serialize)]
struct PointReport {
    delta_ca_hz: f64,
    n_atoms: f64,
    m_photons: f64,
    delta_dressed_hz: f64,
}

#[derive(Serialize)]
struct Report {
    step_hz: f64,
    t_end_s: f64,
    initial: PointReport,
    settled: PointReport,
    early_dressed_shift_hz: f64,
    settled_dressed_shift_hz: f64,
}

pub fn run(ctx: &Context, args: &Args) -> Result<()> {
    let model = Model::new(&ctx.params).with_excited_correction(args.excited_correction);
    let resp = step_response(
        &model,
        args.delta_ca_before,
        args.delta_ca_after,
        args.t_end,
    )?;

    let mut manifest = ManifestWriter::new("dynamics", &ctx.params, ctx.seed, &ctx.out_dir);
    manifest.write_text("trajectory.csv", &resp.trajectory.to_csv())?;
    let as_report = |p: &recoil_lase::equilibrium::EquilibriumPoint| PointReport {
        delta_ca_hz: p.delta_ca,
        n_atoms: p.n_star,
        m_photons: p.m_star,
        delta_dressed_hz: p.delta_dressed,
    };
    let report = Report {
        step_hz: args.delta_ca_after - args.delta_ca_before,
        t_end_s: args.t_end,
        initial: as_report(&resp.initial),
        settled: as_report(&resp.settled),
        early_dressed_shift_hz: resp.early_dressed_shift,
        settled_dressed_shift_hz: resp.settled_dressed_shift,
    };
    manifest.write_text(
        "step_response.json",
        &serde_json::to_string_pretty(&report).expect("report serialises"),
    )?;
    manifest.finish()
}
