//! Time-domain integration of the atom-number rate equation.
//!
//! The ODE is scalar and autonomous for fixed cavity detuning, so the
//! exact solution is monotone between equilibria. The integrator is an
//! adaptive embedded Cash–Karp Runge–Kutta 4(5) with two extra acceptance
//! rules: a step may not drive the atom number negative, and within a
//! constant-detuning segment it may not cross an equilibrium (which the
//! exact solution never does). Piecewise-constant schedules are split at
//! their discontinuity so both rules apply segment by segment.

use crate::equilibrium::{EquilibriumPoint, Model};
use crate::error::{Error, Result};

/// Applied cavity-detuning schedule δ_ca(t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// Jump from `before` to `after` at time `at` (seconds).
    Step {
        before: f64,
        after: f64,
        at: f64,
    },
}

impl Schedule {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Schedule::Constant(d) => d,
            Schedule::Step { before, after, at } => {
                if t < at {
                    before
                } else {
                    after
                }
            }
        }
    }

    fn breakpoints(&self, t_end: f64) -> Vec<f64> {
        match *self {
            Schedule::Constant(_) => vec![],
            Schedule::Step { at, .. } => {
                if at > 0.0 && at < t_end {
                    vec![at]
                } else {
                    vec![]
                }
            }
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Schedule::Constant(d) => format!("constant delta_ca = {d} Hz"),
            Schedule::Step { before, after, at } => {
                format!("step delta_ca {before} -> {after} Hz at t = {at} s")
            }
        }
    }
}

/// Integrated atom-number trajectory with the slaved photon number.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Sample times, s, strictly increasing.
    pub t: Vec<f64>,
    /// Atom number at each sample.
    pub n: Vec<f64>,
    /// Photon number at each sample.
    pub m: Vec<f64>,
    /// Lower-branch dressed detuning at each sample, Hz.
    pub delta_dressed: Vec<f64>,
    /// Human-readable description of the applied schedule.
    pub schedule: String,
}

impl Trajectory {
    /// CSV export with header `t_s,N,M,delta_dressed_hz`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,N,M,delta_dressed_hz\n");
        for i in 0..self.t.len() {
            out.push_str(&format!(
                "{:?},{:?},{:?},{:?}\n",
                self.t[i], self.n[i], self.m[i], self.delta_dressed[i]
            ));
        }
        out
    }
}

/// Result of a sudden cavity-detuning step from a stable equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResponse {
    pub trajectory: Trajectory,
    /// Operating point before the step.
    pub initial: EquilibriumPoint,
    /// Equilibrium the system settles on after the step.
    pub settled: EquilibriumPoint,
    /// Largest dressed-detuning excursion within the first 200 μs, Hz.
    pub early_dressed_shift: f64,
    /// Settled minus initial dressed detuning, Hz.
    pub settled_dressed_shift: f64,
}

// Cash–Karp tableau.
const A: [[f64; 5]; 5] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0, 0.0, 0.0],
    [-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0, 0.0],
    [
        1631.0 / 55296.0,
        175.0 / 512.0,
        575.0 / 13824.0,
        44275.0 / 110592.0,
        253.0 / 4096.0,
    ],
];
const C5: [f64; 6] = [
    37.0 / 378.0,
    0.0,
    250.0 / 621.0,
    125.0 / 594.0,
    0.0,
    512.0 / 1771.0,
];
const C4: [f64; 6] = [
    2825.0 / 27648.0,
    0.0,
    18575.0 / 48384.0,
    13525.0 / 55296.0,
    277.0 / 14336.0,
    1.0 / 4.0,
];

struct CkStep {
    y5: f64,
    error: f64,
}

fn cash_karp_step<F: Fn(f64) -> f64>(f: &F, y: f64, h: f64) -> CkStep {
    let mut k = [0.0; 6];
    k[0] = f(y);
    for s in 1..6 {
        let mut yi = y;
        for (j, a) in A[s - 1].iter().enumerate().take(s) {
            yi += h * a * k[j];
        }
        k[s] = f(yi);
    }
    let mut y5 = y;
    let mut y4 = y;
    for s in 0..6 {
        y5 += h * C5[s] * k[s];
        y4 += h * C4[s] * k[s];
    }
    CkStep {
        y5,
        error: (y5 - y4).abs(),
    }
}

/// Integrate dy/dt = f(y) over [t0, t1], calling `on_step` after each
/// accepted step. Enforces y ≥ 0 and monotonicity (no equilibrium
/// crossing) by step rejection. `stop` may end the segment early.
fn integrate_autonomous<F, S>(
    f: &F,
    t0: f64,
    t1: f64,
    y0: f64,
    tol: f64,
    mut on_step: impl FnMut(f64, f64),
    mut stop: S,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
    S: FnMut(f64, f64) -> bool,
{
    // intermediate RK stages may probe below zero; extend the rate
    // function there by continuity
    let f = |y: f64| f(y.max(0.0));
    let span = t1 - t0;
    let mut t = t0;
    let mut y = y0;
    let scale0 = y0.abs().max(1.0);
    let f0 = f(y0);
    // exact solutions of a scalar autonomous ODE never reverse direction
    let direction = f0.signum();
    let mut h = if f0 == 0.0 {
        span / 16.0
    } else {
        (span / 64.0).min(0.1 * scale0 / f0.abs()).max(span * 1e-12)
    };
    let h_min = span * 1e-13;
    let mut steps = 0usize;

    while t < t1 {
        if steps > 50_000_000 {
            return Err(Error::numerical(format!(
                "integration exceeded step budget at t = {t} s"
            )));
        }
        steps += 1;
        h = h.min(t1 - t);
        let step = cash_karp_step(&f, y, h);
        let scale = tol * y.abs().max(1.0);
        let dy = step.y5 - y;
        // movement below representable resolution: the state has settled,
        // freeze it and let the step size run the clock out
        let frozen = dy.abs() <= 4.0 * f64::EPSILON * y.abs().max(1.0);

        let mut reject = false;
        if !frozen {
            let rate_after = if step.y5 >= 0.0 { f(step.y5) } else { f64::NAN };
            reject = step.y5 < 0.0
                || !rate_after.is_finite()
                // crossed an equilibrium
                || (rate_after != 0.0 && direction != 0.0
                    && rate_after.signum() != direction)
                // moved against the flow
                || dy * direction < 0.0
                || step.error > scale;
        }
        if reject {
            let shrink = if step.error > scale {
                (0.9 * (scale / step.error).powf(0.25)).max(0.2)
            } else {
                0.5
            };
            h *= shrink;
            if h < h_min {
                return Err(Error::numerical(format!(
                    "step size underflow at t = {t} s, N = {y}: rate equation too stiff \
                     for the requested tolerance {tol}"
                )));
            }
            continue;
        }
        t += h;
        if !frozen {
            y = step.y5;
        }
        on_step(t, y);
        if stop(y, f(y)) {
            break;
        }
        let grow = if step.error > 0.0 {
            (0.9 * (scale / step.error).powf(0.2)).min(5.0)
        } else {
            5.0
        };
        h *= grow;
    }
    Ok((t, y))
}

/// Integrate the atom-number rate equation under a detuning schedule.
///
/// `tol` bounds the local relative error per step (absolute floor of one
/// atom). The returned trajectory contains every accepted step.
pub fn integrate(
    model: &Model<'_>,
    n0: f64,
    schedule: Schedule,
    t_end: f64,
    tol: f64,
) -> Result<Trajectory> {
    if n0 < 0.0 {
        return Err(Error::domain(format!("initial atom number {n0} < 0")));
    }
    if t_end <= 0.0 || t_end.is_nan() {
        return Err(Error::domain(format!("t_end must be > 0, got {t_end}")));
    }
    if tol <= 0.0 || tol.is_nan() {
        return Err(Error::domain(format!("tolerance must be > 0, got {tol}")));
    }

    let mut t_nodes = vec![0.0];
    t_nodes.extend(schedule.breakpoints(t_end));
    t_nodes.push(t_end);

    let mut traj = Trajectory {
        t: Vec::new(),
        n: Vec::new(),
        m: Vec::new(),
        delta_dressed: Vec::new(),
        schedule: schedule.describe(),
    };
    let push = |t: f64, n: f64, delta_ca: f64, traj: &mut Trajectory| {
        traj.t.push(t);
        traj.n.push(n);
        traj.m.push(model.photon_number(n, delta_ca));
        traj.delta_dressed.push(model.dressed_detuning(n, delta_ca));
    };

    push(0.0, n0, schedule.value(0.0), &mut traj);
    let mut y = n0;
    for seg in t_nodes.windows(2) {
        let (t0, t1) = (seg[0], seg[1]);
        let delta_ca = schedule.value(0.5 * (t0 + t1));
        let f = |n: f64| model.atom_rate(n, delta_ca);
        let (_, y_end) = integrate_autonomous(
            &f,
            t0,
            t1,
            y,
            tol,
            |t, n| push(t, n, delta_ca, &mut traj),
            |_, _| false,
        )?;
        y = y_end;
    }
    Ok(traj)
}

/// Relax dy/dt = f(y) from `y0` until `converged(y, f(y))`, or fail after
/// `t_max` seconds of model time.
pub fn relax<F: Fn(f64) -> f64>(
    f: F,
    y0: f64,
    converged: impl Fn(f64, f64) -> bool,
    t_max: f64,
) -> Result<f64> {
    if converged(y0, f(y0)) {
        return Ok(y0);
    }
    let mut done = false;
    let (_, y) = integrate_autonomous(
        &f,
        0.0,
        t_max,
        y0,
        1e-10,
        |_, _| {},
        |y, rate| {
            done = converged(y, rate);
            done
        },
    )?;
    if !done {
        return Err(Error::numerical(format!(
            "transient failed to reach equilibrium within {t_max} s of model time \
             (stopped at N = {y})"
        )));
    }
    Ok(y)
}

/// Response to a sudden detuning step applied to a system sitting on its
/// default stable equilibrium.
///
/// The early dressed-frequency excursion is evaluated over the first
/// 200 μs after the step, separately from the settled value.
pub fn step_response(
    model: &Model<'_>,
    delta_ca_before: f64,
    delta_ca_after: f64,
    t_end: f64,
) -> Result<StepResponse> {
    let initial = model.default_operating_point(delta_ca_before)?;
    let traj = integrate(
        model,
        initial.n_star,
        Schedule::Constant(delta_ca_after),
        t_end,
        1e-9,
    )?;

    // settle fully, then refine onto the root set at the new detuning
    let loss = model.params().loss_rate;
    let n_settled = relax(
        |n| model.atom_rate(n, delta_ca_after),
        *traj.n.last().expect("trajectory is non-empty"),
        |n, rate| rate.abs() / n.max(1.0) < 1e-9 * loss,
        1e4 / loss,
    )?;
    let settled = model
        .find_equilibria(delta_ca_after)?
        .into_iter()
        .filter(|p| p.stable)
        .min_by(|a, b| {
            (a.n_star - n_settled)
                .abs()
                .total_cmp(&(b.n_star - n_settled).abs())
        })
        .ok_or_else(|| {
            Error::numerical(format!(
                "no stable equilibrium at delta_ca = {delta_ca_after} Hz"
            ))
        })?;

    let early_dressed_shift = traj
        .t
        .iter()
        .zip(&traj.delta_dressed)
        .take_while(|(t, _)| **t <= 200e-6)
        .map(|(_, d)| (d - initial.delta_dressed).abs())
        .fold(0.0, f64::max);

    Ok(StepResponse {
        settled_dressed_shift: settled.delta_dressed - initial.delta_dressed,
        early_dressed_shift,
        initial,
        settled,
        trajectory: traj,
    })
}
