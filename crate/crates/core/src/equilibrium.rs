//! The atom–photon feedback model: photon number slaved to the dressed
//! cavity resonance, the atom-number rate equation, multi-root equilibrium
//! finding with stability, branch continuation over cavity detuning,
//! quasi-static hysteresis sweeps, zone segmentation, pulling coefficients
//! and depletion.
//!
//! The model is one-dimensional in the atom number N: the intracavity
//! photon number M responds instantaneously to N through the dressed
//! cavity resonance (the cavity ringdown is far faster than any atom-number
//! timescale), so equilibria are roots of a scalar function and stability
//! is the sign of its slope.

use rayon::prelude::*;

use crate::cavity::{dressed_cavity_detuning, Branch as CavityBranch};
use crate::config::{SweepDirection, SweepSpec, SystemParams};
use crate::dynamics;
use crate::error::{Error, Result};

/// Log-grid resolution for the initial root scan.
const N_GRID_POINTS: usize = 4000;
/// Relative bisection tolerance on root positions.
const ROOT_REL_TOL: f64 = 1e-10;
/// Relative step for the stability slope estimate.
const STABILITY_REL_STEP: f64 = 1e-6;
/// Relative atom-number jump above which roots at adjacent sweep steps are
/// not considered the same branch.
pub const BRANCH_JUMP_REL: f64 = 0.2;
/// Photon number below which a trace point counts as dark.
pub const DARK_PHOTON_THRESHOLD: f64 = 1.0;

/// A root of the atom-number rate equation at fixed cavity detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumPoint {
    /// Bare cavity detuning, Hz.
    pub delta_ca: f64,
    /// Steady-state atom number.
    pub n_star: f64,
    /// Intracavity photon number at the root.
    pub m_star: f64,
    /// Lower-branch dressed-cavity detuning at the root, Hz.
    pub delta_dressed: f64,
    /// True when the rate slope ∂Ṅ/∂N is negative.
    pub stable: bool,
}

/// A continuously connected family of equilibria over the sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: usize,
    /// Points in sweep order (monotone in delta_ca).
    pub points: Vec<EquilibriumPoint>,
    /// Stability is uniform within a branch.
    pub stable: bool,
}

/// One point of a quasi-static hysteresis walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub delta_ca: f64,
    pub n: f64,
    pub m: f64,
    pub delta_dressed: f64,
    /// 0 = dark or unclassified; lasing zones count from 1.
    pub zone_id: usize,
}

/// Quasi-static sweep result: every point is a stable equilibrium, and
/// jumps occur only where the occupied branch terminates.
#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisTrace {
    pub direction: SweepDirection,
    pub points: Vec<TracePoint>,
    /// Bare cavity detunings at which the walk had to jump branches, Hz.
    pub jump_locations: Vec<f64>,
}

/// The feedback model evaluated against one parameter set.
///
/// `excited_correction` applies the inversion correction N·(1 − 2f_e)
/// inside the dressed-cavity resonance of the feedback loop. It is off by
/// default: the equilibrium condition is written against the bare atom
/// number, and the correction is exposed for exploring its effect.
#[derive(Debug, Clone, Copy)]
pub struct Model<'a> {
    params: &'a SystemParams,
    excited_correction: bool,
}

impl<'a> Model<'a> {
    pub fn new(params: &'a SystemParams) -> Self {
        Model {
            params,
            excited_correction: false,
        }
    }

    pub fn with_excited_correction(mut self, on: bool) -> Self {
        self.excited_correction = on;
        self
    }

    pub fn params(&self) -> &SystemParams {
        self.params
    }

    /// Atom number entering the dressed-cavity resonance.
    fn loop_atom_number(&self, n: f64) -> f64 {
        if self.excited_correction {
            n * (1.0 - 2.0 * self.params.excited_fraction)
        } else {
            n
        }
    }

    /// Lower-branch dressed-cavity detuning at atom number `n`, Hz.
    pub fn dressed_detuning(&self, n: f64, delta_ca: f64) -> f64 {
        dressed_cavity_detuning(
            delta_ca,
            self.params.coupling,
            self.loop_atom_number(n),
            CavityBranch::Lower,
        )
    }

    /// Intracavity photon number at atom number `n`:
    /// M = Σ_j w_j·M₀·N / (1 + (δ′_j/(Γ/2))²), with δ′_j the offset of the
    /// dressed cavity from pump line j displaced by the gain shift.
    pub fn photon_number(&self, n: f64, delta_ca: f64) -> f64 {
        debug_assert!(n >= 0.0);
        let dressed = self.dressed_detuning(n, delta_ca);
        let half_width = self.params.gain_fwhm / 2.0;
        let mut m = 0.0;
        for line in &self.params.pump_lines {
            let offset = dressed - (line.detuning + self.params.gain_shift);
            let x = offset / half_width;
            m += line.weight * self.params.photons_per_atom * n / (1.0 + x * x);
        }
        m
    }

    /// Ṅ = R − γ_loss·N − γ_L·M(N)·N, atoms/s.
    pub fn atom_rate(&self, n: f64, delta_ca: f64) -> f64 {
        debug_assert!(n >= 0.0);
        self.params.loading_rate
            - self.params.loss_rate * n
            - self.params.lasing_loss_rate * self.photon_number(n, delta_ca) * n
    }

    fn point_at(&self, n_star: f64, delta_ca: f64, stable: bool) -> EquilibriumPoint {
        EquilibriumPoint {
            delta_ca,
            n_star,
            m_star: self.photon_number(n_star, delta_ca),
            delta_dressed: self.dressed_detuning(n_star, delta_ca),
            stable,
        }
    }

    /// All equilibria at one cavity detuning, ascending in atom number.
    ///
    /// Sign changes of the rate are bracketed on a logarithmic grid over
    /// [1, 2·R/γ_loss] and refined by bisection; stability comes from a
    /// central-difference slope.
    pub fn find_equilibria(&self, delta_ca: f64) -> Result<Vec<EquilibriumPoint>> {
        let n_max = 2.0 * self.params.no_lasing_atom_number();
        let log_span = n_max.ln();
        let grid = |i: usize| (i as f64 * log_span / (N_GRID_POINTS - 1) as f64).exp();

        let mut roots = Vec::new();
        let mut prev_n = grid(0);
        let mut prev_f = self.atom_rate(prev_n, delta_ca);
        for i in 1..N_GRID_POINTS {
            let n = grid(i);
            let f = self.atom_rate(n, delta_ca);
            if prev_f == 0.0 {
                roots.push(prev_n);
            } else if prev_f.signum() != f.signum() && f != 0.0 {
                roots.push(self.bisect(prev_n, n, prev_f, delta_ca));
            }
            prev_n = n;
            prev_f = f;
        }
        if prev_f == 0.0 {
            roots.push(prev_n);
        }
        if roots.is_empty() {
            // rate(0) = R > 0 and rate(2·R/γ_loss) < 0, so a sign change
            // must exist; reaching this means the rate produced NaN
            return Err(Error::numerical(format!(
                "no equilibrium bracketed at delta_ca = {delta_ca} Hz; \
                 rate function is not finite"
            )));
        }

        Ok(roots
            .into_iter()
            .map(|n| self.point_at(n, delta_ca, self.is_stable(n, delta_ca)))
            .collect())
    }

    fn bisect(&self, mut lo: f64, mut hi: f64, f_lo: f64, delta_ca: f64) -> f64 {
        let sign_lo = f_lo.signum();
        while hi - lo > ROOT_REL_TOL * hi {
            let mid = 0.5 * (lo + hi);
            let f_mid = self.atom_rate(mid, delta_ca);
            if f_mid == 0.0 {
                return mid;
            }
            if f_mid.signum() == sign_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn is_stable(&self, n: f64, delta_ca: f64) -> bool {
        let h = STABILITY_REL_STEP * n;
        let slope = (self.atom_rate(n + h, delta_ca) - self.atom_rate(n - h, delta_ca)) / (2.0 * h);
        slope < 0.0
    }

    /// Continue all equilibria over a detuning sweep, linking roots at
    /// adjacent steps into branches by nearest atom number.
    ///
    /// Roots link only when their relative atom-number difference is below
    /// [`BRANCH_JUMP_REL`] and their stability matches; unmatched roots
    /// start or terminate branches. The union of branch points reproduces
    /// the per-step root sets exactly.
    pub fn sweep_branches(&self, spec: &SweepSpec) -> Result<Vec<Branch>> {
        spec.validate()?;
        let grid = spec.grid();
        let per_step: Vec<Vec<EquilibriumPoint>> = grid
            .par_iter()
            .map(|&delta_ca| self.find_equilibria(delta_ca))
            .collect::<Result<_>>()?;

        let mut branches: Vec<Branch> = Vec::new();
        let mut open: Vec<usize> = Vec::new(); // indices into branches
        for roots in per_step {
            // candidate (relative distance, open slot, root index) triples
            let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
            for (slot, &b) in open.iter().enumerate() {
                let last = branches[b].points.last().expect("open branch is non-empty");
                for (ri, root) in roots.iter().enumerate() {
                    if root.stable != branches[b].stable {
                        continue;
                    }
                    let rel = (root.n_star - last.n_star).abs() / root.n_star.max(last.n_star);
                    if rel <= BRANCH_JUMP_REL {
                        pairs.push((rel, slot, ri));
                    }
                }
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut slot_taken = vec![false; open.len()];
            let mut root_taken = vec![false; roots.len()];
            let mut next_open: Vec<usize> = Vec::new();
            for (_, slot, ri) in pairs {
                if slot_taken[slot] || root_taken[ri] {
                    continue;
                }
                slot_taken[slot] = true;
                root_taken[ri] = true;
                branches[open[slot]].points.push(roots[ri]);
                next_open.push(open[slot]);
            }
            for (ri, root) in roots.iter().enumerate() {
                if !root_taken[ri] {
                    let id = branches.len();
                    branches.push(Branch {
                        id,
                        points: vec![*root],
                        stable: root.stable,
                    });
                    next_open.push(id);
                }
            }
            next_open.sort_unstable();
            open = next_open;
        }
        Ok(branches)
    }

    /// Stable equilibrium nearest the no-lasing atom number R/γ_loss.
    pub fn default_operating_point(&self, delta_ca: f64) -> Result<EquilibriumPoint> {
        let n_ref = self.params.no_lasing_atom_number();
        self.find_equilibria(delta_ca)?
            .into_iter()
            .filter(|p| p.stable)
            .min_by(|a, b| {
                (a.n_star - n_ref)
                    .abs()
                    .total_cmp(&(b.n_star - n_ref).abs())
            })
            .ok_or_else(|| {
                Error::numerical(format!("no stable equilibrium at delta_ca = {delta_ca} Hz"))
            })
    }

    /// Quasi-static walk of the stable equilibrium across the sweep window.
    ///
    /// Starts on the stable root nearest R/γ_loss. At each step the walk
    /// continues on the stable root nearest the current atom number; when
    /// none lies within the jump threshold, the transient rate equation is
    /// integrated at the new detuning until |Ṅ|/N < 1e-9·γ_loss and the
    /// walk lands on the root it relaxed to, recording a jump.
    pub fn hysteresis_sweep(&self, spec: &SweepSpec) -> Result<HysteresisTrace> {
        spec.validate()?;
        let grid = spec.grid();
        let mut points = Vec::with_capacity(grid.len());
        let mut jumps = Vec::new();

        let first = self.default_operating_point(grid[0])?;
        let mut current = first.n_star;
        points.push(trace_point(&first));

        for &delta_ca in &grid[1..] {
            let roots = self.find_equilibria(delta_ca)?;
            let nearest_stable = roots
                .iter()
                .filter(|p| p.stable)
                .map(|p| {
                    let rel = (p.n_star - current).abs() / p.n_star.max(current);
                    (rel, p)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0));

            let landed = match nearest_stable {
                Some((rel, p)) if rel <= BRANCH_JUMP_REL => *p,
                _ => {
                    let n_landed = self.relax_to_equilibrium(current, delta_ca)?;
                    jumps.push(delta_ca);
                    *roots
                        .iter()
                        .filter(|p| p.stable)
                        .min_by(|a, b| {
                            (a.n_star - n_landed)
                                .abs()
                                .total_cmp(&(b.n_star - n_landed).abs())
                        })
                        .ok_or_else(|| {
                            Error::numerical(format!(
                                "no stable equilibrium to land on at delta_ca = {delta_ca} Hz"
                            ))
                        })?
                }
            };
            current = landed.n_star;
            points.push(trace_point(&landed));
        }

        Ok(HysteresisTrace {
            direction: spec.direction,
            points,
            jump_locations: jumps,
        })
    }

    /// Integrate the transient at fixed detuning until |Ṅ|/N < 1e-9·γ_loss.
    fn relax_to_equilibrium(&self, n0: f64, delta_ca: f64) -> Result<f64> {
        let loss = self.params.loss_rate;
        let t_max = 1e4 / loss;
        dynamics::relax(
            |n| self.atom_rate(n, delta_ca),
            n0,
            |n, rate| rate.abs() / n.max(1.0) < 1e-9 * loss,
            t_max,
        )
    }

    /// Fractional steady-state atom number along a branch, relative to the
    /// no-lasing equilibrium R/γ_loss.
    pub fn depletion(&self, branch: &Branch) -> Vec<(f64, f64)> {
        let n_ref = self.params.no_lasing_atom_number();
        branch
            .points
            .iter()
            .map(|p| (p.delta_ca, p.n_star / n_ref))
            .collect()
    }

    /// Zone segmentation with the default thresholds 2·Γ_RIR and one
    /// photon.
    pub fn classify_zones_default(&self, trace: &HysteresisTrace) -> HysteresisTrace {
        classify_zones(trace, 2.0 * self.params.gain_fwhm, DARK_PHOTON_THRESHOLD)
    }
}

fn trace_point(p: &EquilibriumPoint) -> TracePoint {
    TracePoint {
        delta_ca: p.delta_ca,
        n: p.n_star,
        m: p.m_star,
        delta_dressed: p.delta_dressed,
        zone_id: 0,
    }
}

/// Segment a trace into lasing zones.
///
/// A new zone starts at a discontinuity in the dressed detuning larger
/// than `jump_threshold` or after a dark gap; points with fewer than
/// `m_min` photons are dark and carry zone id 0. Lasing zones are numbered
/// consecutively from 1 in trace order.
pub fn classify_zones(trace: &HysteresisTrace, jump_threshold: f64, m_min: f64) -> HysteresisTrace {
    let mut out = trace.clone();
    let mut zone = 0usize;
    let mut prev_lasing: Option<(usize, f64)> = None; // (index, dressed)
    for i in 0..out.points.len() {
        if out.points[i].m <= m_min {
            out.points[i].zone_id = 0;
            continue;
        }
        let dressed = out.points[i].delta_dressed;
        let new_zone = match prev_lasing {
            None => true,
            Some((j, prev)) => j + 1 != i || (dressed - prev).abs() > jump_threshold,
        };
        if new_zone {
            zone += 1;
        }
        out.points[i].zone_id = zone;
        prev_lasing = Some((i, dressed));
    }
    out
}

/// Local cavity pulling coefficient d(δ_dressed)/d(δ_ca) along a branch:
/// central differences inside, one-sided at the ends.
pub fn pulling_coefficient(branch: &Branch) -> Result<Vec<(f64, f64)>> {
    let pts = &branch.points;
    if pts.len() < 3 {
        return Err(Error::domain(format!(
            "pulling coefficient needs at least 3 branch points, got {}",
            pts.len()
        )));
    }
    let n = pts.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        let dd = pts[b].delta_dressed - pts[a].delta_dressed;
        let dc = pts[b].delta_ca - pts[a].delta_ca;
        out.push((pts[i].delta_ca, dd / dc));
    }
    Ok(out)
}

/// CSV export of branches: `delta_ca_hz,N,M,delta_dressed_hz,stable,zone_id,branch_id`.
/// Zones are a trace concept; the zone column is 0 here.
pub fn branches_to_csv(branches: &[Branch]) -> String {
    let mut out = String::from("delta_ca_hz,N,M,delta_dressed_hz,stable,zone_id,branch_id\n");
    for b in branches {
        for p in &b.points {
            out.push_str(&format!(
                "{:?},{:?},{:?},{:?},{},0,{}\n",
                p.delta_ca,
                p.n_star,
                p.m_star,
                p.delta_dressed,
                u8::from(p.stable),
                b.id
            ));
        }
    }
    out
}

/// CSV export of a hysteresis trace, same schema as [`branches_to_csv`];
/// trace points are stable by construction and carry no branch id.
pub fn trace_to_csv(trace: &HysteresisTrace) -> String {
    let mut out = String::from("delta_ca_hz,N,M,delta_dressed_hz,stable,zone_id,branch_id\n");
    for p in &trace.points {
        out.push_str(&format!(
            "{:?},{:?},{:?},{:?},1,{},0\n",
            p.delta_ca, p.n, p.m, p.delta_dressed, p.zone_id
        ));
    }
    out
}
