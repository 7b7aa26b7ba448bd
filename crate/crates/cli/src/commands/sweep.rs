use clap::Parser;
use recoil_lase::config::{SweepDirection, SweepSpec};
use recoil_lase::equilibrium::{
    branches_to_csv, pulling_coefficient, trace_to_csv, HysteresisTrace, Model,
};
use recoil_lase::Result;
use serde::Serialize;

use crate::manifest::ManifestWriter;
use crate::Context;

#[derive(Parser, Debug)]
pub struct Args {
    /// First bare cavity detuning, Hz.
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<f64>,

    /// Last bare cavity detuning, Hz.
    #[arg(long, allow_hyphen_values = true)]
    pub stop: Option<f64>,

    /// Detuning step, Hz.
    #[arg(long)]
    pub step: Option<f64>,

    /// Apply the excited-fraction correction inside the feedback loop.
    #[arg(long)]
    pub excited_correction: bool,
}

#[derive(Serialize)]
struct ZoneEntry {
    zone_id: usize,
    n_points: usize,
    delta_ca_min_hz: f64,
    delta_ca_max_hz: f64,
    delta_dressed_min_hz: f64,
    delta_dressed_max_hz: f64,
    n_atoms_min: f64,
    n_atoms_max: f64,
    min_depletion: f64,
    mean_abs_pulling: f64,
}

#[derive(Serialize)]
struct DirectionReport {
    zones: Vec<ZoneEntry>,
    jump_locations_hz: Vec<f64>,
}

#[derive(Serialize)]
struct BranchEntry {
    branch_id: usize,
    stable: bool,
    n_points: usize,
    delta_ca_min_hz: f64,
    delta_ca_max_hz: f64,
    min_depletion: f64,
    min_abs_pulling: Option<f64>,
    max_abs_pulling: Option<f64>,
}

#[derive(Serialize)]
struct Report {
    start_hz: f64,
    stop_hz: f64,
    step_hz: f64,
    excited_correction: bool,
    up: DirectionReport,
    down: DirectionReport,
    branches: Vec<BranchEntry>,
}

fn zone_table(model: &Model<'_>, trace: &HysteresisTrace) -> Vec<ZoneEntry> {
    let n_ref = model.params().no_lasing_atom_number();
    let max_zone = trace.points.iter().map(|p| p.zone_id).max().unwrap_or(0);
    (1..=max_zone)
        .filter_map(|zone_id| {
            let pts: Vec<_> = trace
                .points
                .iter()
                .filter(|p| p.zone_id == zone_id)
                .collect();
            if pts.is_empty() {
                return None;
            }
            let fold = |f: fn(&&recoil_lase::equilibrium::TracePoint) -> f64,
                        init: f64,
                        merge: fn(f64, f64) -> f64| {
                pts.iter().map(f).fold(init, merge)
            };
            // local pulling from consecutive in-zone points
            let mut pulls = Vec::new();
            for w in pts.windows(2) {
                let dc = w[1].delta_ca - w[0].delta_ca;
                if dc != 0.0 {
                    pulls.push(((w[1].delta_dressed - w[0].delta_dressed) / dc).abs());
                }
            }
            let mean_abs_pulling = if pulls.is_empty() {
                0.0
            } else {
                pulls.iter().sum::<f64>() / pulls.len() as f64
            };
            Some(ZoneEntry {
                zone_id,
                n_points: pts.len(),
                delta_ca_min_hz: fold(|p| p.delta_ca, f64::INFINITY, f64::min),
                delta_ca_max_hz: fold(|p| p.delta_ca, f64::NEG_INFINITY, f64::max),
                delta_dressed_min_hz: fold(|p| p.delta_dressed, f64::INFINITY, f64::min),
                delta_dressed_max_hz: fold(|p| p.delta_dressed, f64::NEG_INFINITY, f64::max),
                n_atoms_min: fold(|p| p.n, f64::INFINITY, f64::min),
                n_atoms_max: fold(|p| p.n, f64::NEG_INFINITY, f64::max),
                min_depletion: fold(|p| p.n, f64::INFINITY, f64::min) / n_ref,
                mean_abs_pulling,
            })
        })
        .collect()
}

pub fn run(ctx: &Context, args: &Args) -> Result<()> {
    let from_config = ctx.sweep_from_config;
    let start = args.start.or(from_config.map(|s| s.start)).unwrap_or(-6e6);
    let stop = args.stop.or(from_config.map(|s| s.stop)).unwrap_or(2e6);
    let step = args.step.or(from_config.map(|s| s.step)).unwrap_or(1e4);

    let up = SweepSpec::new(start, stop, step, SweepDirection::Up)?;
    let down = SweepSpec::new(start, stop, step, SweepDirection::Down)?;
    let model = Model::new(&ctx.params).with_excited_correction(args.excited_correction);

    let branches = model.sweep_branches(&up)?;
    let trace_up = model.classify_zones_default(&model.hysteresis_sweep(&up)?);
    let trace_down = model.classify_zones_default(&model.hysteresis_sweep(&down)?);

    let mut manifest = ManifestWriter::new("sweep", &ctx.params, ctx.seed, &ctx.out_dir);
    manifest.write_text("branches.csv", &branches_to_csv(&branches))?;
    manifest.write_text("trace_up.csv", &trace_to_csv(&trace_up))?;
    manifest.write_text("trace_down.csv", &trace_to_csv(&trace_down))?;

    let branch_entries = branches
        .iter()
        .map(|b| {
            let depletion = model.depletion(b);
            let min_depletion = depletion.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
            let pulls = pulling_coefficient(b).ok();
            let (min_abs, max_abs) = pulls
                .map(|p| {
                    let abs: Vec<f64> = p.iter().map(|x| x.1.abs()).collect();
                    (
                        abs.iter().copied().fold(f64::INFINITY, f64::min),
                        abs.iter().copied().fold(0.0, f64::max),
                    )
                })
                .map(|(lo, hi)| (Some(lo), Some(hi)))
                .unwrap_or((None, None));
            BranchEntry {
                branch_id: b.id,
                stable: b.stable,
                n_points: b.points.len(),
                delta_ca_min_hz: b
                    .points
                    .iter()
                    .map(|p| p.delta_ca)
                    .fold(f64::INFINITY, f64::min),
                delta_ca_max_hz: b
                    .points
                    .iter()
                    .map(|p| p.delta_ca)
                    .fold(f64::NEG_INFINITY, f64::max),
                min_depletion,
                min_abs_pulling: min_abs,
                max_abs_pulling: max_abs,
            }
        })
        .collect();

    let report = Report {
        start_hz: start,
        stop_hz: stop,
        step_hz: step,
        excited_correction: args.excited_correction,
        up: DirectionReport {
            zones: zone_table(&model, &trace_up),
            jump_locations_hz: trace_up.jump_locations.clone(),
        },
        down: DirectionReport {
            zones: zone_table(&model, &trace_down),
            jump_locations_hz: trace_down.jump_locations.clone(),
        },
        branches: branch_entries,
    };
    manifest.write_text(
        "zones.json",
        &serde_json::to_string_pretty(&report).expect("report serialises"),
    )?;
    manifest.finish()
}
