//! Constrained trajectory integration and drift monitoring.
//!
//! The equations of motion qdd^a = -Gamma^a_{bc} qd^b qd^c - V^{,a} are
//! integrated with an adaptive embedded Dormand-Prince 5(4) pair with PI
//! step-size control and 4th-order dense output. There is no projection back
//! onto the constraint surface: conservation drift is the measurement, so it
//! must not be hidden by the integrator.

use crate::error::{Error, Result};
use crate::qfi::{ConstrainedSystem, QfiSpec};
use std::sync::Arc;

/// Margin used by the singular-locus step guard.
pub const INTEGRATOR_LOCUS_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
}

/// A first-integral monitor attached to a trajectory run.
#[derive(Clone)]
pub struct FiMonitor {
    pub name: String,
    pub eval: Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>,
}

impl FiMonitor {
    pub fn new(
        name: &str,
        eval: impl Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FiMonitor {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn from_qfi(spec: &Arc<QfiSpec>) -> Self {
        let s = Arc::clone(spec);
        FiMonitor {
            name: s.name.clone(),
            eval: Arc::new(move |t, q, qd| s.evaluate_unchecked(t, q, qd)),
        }
    }
}

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejections: usize,
    pub max_error_estimate: f64,
}

#[derive(Clone)]
pub struct Trajectory {
    pub states: Vec<State>,
    /// Per-state H - E0.
    pub energy_residual: Vec<f64>,
    /// Per-monitor value series, same length as `states`.
    pub monitor_names: Vec<String>,
    pub monitors: Vec<Vec<f64>>,
    pub integrator_stats: IntegratorStats,
}

impl Trajectory {
    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory has at least one state")
    }
}

/// Drift summary per monitored first integral.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DriftRecord {
    pub name: String,
    pub initial: f64,
    pub max_drift: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DriftReport {
    pub max_energy_drift: f64,
    pub fis: Vec<DriftRecord>,
}

/// Per-FI max |I(t) - I(0)| and max |H - E0| over the trajectory.
pub fn monitor_report(traj: &Trajectory) -> DriftReport {
    let max_energy_drift = traj
        .energy_residual
        .iter()
        .fold(0.0_f64, |m, r| m.max(r.abs()));
    let fis = traj
        .monitor_names
        .iter()
        .zip(traj.monitors.iter())
        .map(|(name, series)| {
            let initial = series.first().copied().unwrap_or(0.0);
            let max_drift = series
                .iter()
                .fold(0.0_f64, |m, v| m.max((v - initial).abs()));
            DriftRecord {
                name: name.clone(),
                initial,
                max_drift,
            }
        })
        .collect();
    DriftReport {
        max_energy_drift,
        fis,
    }
}

// ---------------------------------------------------------------------------
// On-shell initialization
// ---------------------------------------------------------------------------

/// Scale `direction` so that the state satisfies the energy constraint:
/// alpha^2 gamma(dir, dir) / 2 = E0 - V(q0). A null direction with
/// E0 = V(q0) is left at unit scale.
pub fn initial_state_on_shell(
    sys: &ConstrainedSystem,
    q0: &[f64],
    direction: &[f64],
) -> Result<State> {
    if !sys.domain().contains(q0, 0.0) {
        return Err(Error::OutOfDomain(q0.to_vec()));
    }
    let gdd = sys.metric.inner(q0, direction, direction);
    let rhs = sys.energy - sys.potential.value(q0);
    let null_tol = 1e-14;

    let alpha = if rhs.abs() <= null_tol {
        if gdd.abs() <= null_tol {
            1.0 // null geodesic normalization
        } else {
            return Err(Error::NullDirectionRequired);
        }
    } else {
        if gdd.abs() <= null_tol {
            return Err(Error::InfeasibleEnergy(format!(
                "direction is null but E0 - V = {rhs:.3e} != 0"
            )));
        }
        let alpha2 = 2.0 * rhs / gdd;
        if alpha2 < 0.0 {
            return Err(Error::InfeasibleEnergy(format!(
                "alpha^2 = 2 (E0 - V) / gamma(dir, dir) = {alpha2:.3e} < 0"
            )));
        }
        alpha2.sqrt()
    };

    Ok(State {
        t: 0.0,
        q: q0.to_vec(),
        qdot: direction.iter().map(|d| alpha * d).collect(),
    })
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4) with PI control and dense output
// ---------------------------------------------------------------------------

const STAGES: usize = 7;
// Stage times c = [0, 1/5, 3/10, 4/5, 8/9, 1, 1] are implicit: the
// constrained equations of motion are autonomous.
const A: [[f64; 6]; STAGES] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; STAGES] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; STAGES] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];
/// Extra weights for the 4th-order dense-output polynomial.
const D: [f64; STAGES] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

struct DenseSegment {
    t0: f64,
    h: f64,
    cont: [Vec<f64>; 5],
}

impl DenseSegment {
    fn eval(&self, t: f64) -> Vec<f64> {
        let theta = (t - self.t0) / self.h;
        let th1 = 1.0 - theta;
        (0..self.cont[0].len())
            .map(|i| {
                self.cont[0][i]
                    + theta
                        * (self.cont[1][i]
                            + th1
                                * (self.cont[2][i]
                                    + theta * (self.cont[3][i] + th1 * self.cont[4][i])))
            })
            .collect()
    }
}

fn rhs(sys: &ConstrainedSystem, y: &[f64]) -> Result<Vec<f64>> {
    let n = sys.dim();
    let (q, qd) = y.split_at(n);
    let acc = sys.acceleration(q, qd)?;
    let mut dy = Vec::with_capacity(2 * n);
    dy.extend_from_slice(qd);
    dy.extend(acc);
    Ok(dy)
}

/// Terminal status of an integration run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegrationStatus {
    Completed,
    /// The step size collapsed (typically against a singular locus); the
    /// trajectory holds every accepted state up to that point.
    Underflow { t: f64, h: f64 },
}

/// Integrate the constrained system from `s0` to `t_end` at tolerance `tol`
/// (used for both the absolute and relative parts of the error norm).
/// Monitors are recorded at every accepted step and at the dense-output
/// sample times in `sample_times` (which must be increasing).
pub fn integrate(
    sys: &ConstrainedSystem,
    s0: &State,
    t_end: f64,
    tol: f64,
    monitors: &[FiMonitor],
    sample_times: &[f64],
) -> Result<Trajectory> {
    let (traj, status) = integrate_with_status(sys, s0, t_end, tol, monitors, sample_times)?;
    match status {
        IntegrationStatus::Completed => Ok(traj),
        IntegrationStatus::Underflow { t, h } => Err(Error::StepSizeUnderflow { t, h }),
    }
}

/// Like [`integrate`], but a step-size underflow returns the partial
/// trajectory together with the status instead of discarding it.
pub fn integrate_with_status(
    sys: &ConstrainedSystem,
    s0: &State,
    t_end: f64,
    tol: f64,
    monitors: &[FiMonitor],
    sample_times: &[f64],
) -> Result<(Trajectory, IntegrationStatus)> {
    let n = sys.dim();
    let dom = sys.domain();
    let mut t = s0.t;
    let mut y: Vec<f64> = s0.q.iter().chain(s0.qdot.iter()).copied().collect();
    let dir = if t_end >= t { 1.0 } else { -1.0 };

    let mut states = Vec::new();
    let mut energy_residual = Vec::new();
    let mut monitor_values: Vec<Vec<f64>> = vec![Vec::new(); monitors.len()];
    let mut stats = IntegratorStats::default();

    let record = |t: f64,
                  y: &[f64],
                  states: &mut Vec<State>,
                  energy_residual: &mut Vec<f64>,
                  monitor_values: &mut Vec<Vec<f64>>| {
        let (q, qd) = y.split_at(n);
        states.push(State {
            t,
            q: q.to_vec(),
            qdot: qd.to_vec(),
        });
        energy_residual.push(sys.hamiltonian(q, qd) - sys.energy);
        for (m, series) in monitors.iter().zip(monitor_values.iter_mut()) {
            series.push((m.eval)(t, q, qd));
        }
    };

    record(t, &y, &mut states, &mut energy_residual, &mut monitor_values);

    let mut k = vec![vec![0.0; 2 * n]; STAGES];
    k[0] = rhs(sys, &y)?;

    let mut h = dir * (0.01 * (t_end - t).abs()).clamp(1e-10, 1e-3);
    let mut err_prev: f64 = 1.0;
    let mut sample_idx = sample_times.partition_point(|&s| s <= t);
    let h_min = 1e-14 * (1.0 + (t_end - s0.t).abs());

    let mut status = IntegrationStatus::Completed;
    while (t_end - t) * dir > 1e-14 {
        if h.abs() < h_min {
            status = IntegrationStatus::Underflow { t, h };
            break;
        }
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }

        // Stages 2..7 (FSAL: stage 1 is the derivative at the step start).
        let mut failed = false;
        for s in 1..STAGES {
            let mut ys = y.clone();
            for i in 0..2 * n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                ys[i] += h * acc;
            }
            match rhs(sys, &ys) {
                Ok(v) => k[s] = v,
                Err(_) => {
                    failed = true;
                    break;
                }
            }
        }

        let (y5, err_norm) = if failed {
            (Vec::new(), f64::INFINITY)
        } else {
            let mut y5 = y.clone();
            let mut err = vec![0.0; 2 * n];
            for i in 0..2 * n {
                let mut acc5 = 0.0;
                let mut acc_err = 0.0;
                for s in 0..STAGES {
                    acc5 += B5[s] * k[s][i];
                    acc_err += (B5[s] - B4[s]) * k[s][i];
                }
                y5[i] += h * acc5;
                err[i] = h * acc_err;
            }
            // Scaled RMS error norm.
            let mut sum = 0.0;
            for i in 0..2 * n {
                let sc = tol + tol * y[i].abs().max(y5[i].abs());
                sum += (err[i] / sc) * (err[i] / sc);
            }
            (y5, (sum / (2.0 * n as f64)).sqrt())
        };

        // Singular-locus guard: reject steps landing too close to an
        // excluded locus.
        let guard_hit = !failed && !dom.contains(&y5[0..n], INTEGRATOR_LOCUS_MARGIN);

        if err_norm <= 1.0 && !guard_hit {
            t += h;
            stats.steps += 1;
            stats.max_error_estimate = stats.max_error_estimate.max(err_norm * tol);

            // Dense output for the sample times inside this step.
            if sample_idx < sample_times.len() {
                let ydiff: Vec<f64> = (0..2 * n).map(|i| y5[i] - y[i]).collect();
                let bspl: Vec<f64> = (0..2 * n).map(|i| h * k[0][i] - ydiff[i]).collect();
                let cont = [
                    y.clone(),
                    ydiff.clone(),
                    bspl.clone(),
                    (0..2 * n)
                        .map(|i| ydiff[i] - h * k[6][i] - bspl[i])
                        .collect(),
                    (0..2 * n)
                        .map(|i| {
                            h * (0..STAGES).map(|s| D[s] * k[s][i]).sum::<f64>()
                        })
                        .collect(),
                ];
                let seg = DenseSegment { t0: t - h, h, cont };
                // Samples strictly inside the step; a sample landing on the
                // step end is covered by the step record itself, keeping the
                // state sequence strictly increasing in t.
                while sample_idx < sample_times.len()
                    && (sample_times[sample_idx] - t) * dir < -1e-14
                {
                    let ts = sample_times[sample_idx];
                    let ys = seg.eval(ts);
                    record(
                        ts,
                        &ys,
                        &mut states,
                        &mut energy_residual,
                        &mut monitor_values,
                    );
                    sample_idx += 1;
                }
                while sample_idx < sample_times.len()
                    && (sample_times[sample_idx] - t) * dir <= 1e-14
                {
                    sample_idx += 1;
                }
            }

            record(t, &y5, &mut states, &mut energy_residual, &mut monitor_values);
            k[0] = k[6].clone(); // FSAL
            y = y5;

            // PI step control (Hairer's beta = 0.04 stabilization).
            let e = err_norm.max(1e-16);
            let factor = 0.9 * e.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            h *= factor.clamp(0.2, 5.0);
            err_prev = e;
        } else {
            stats.rejections += 1;
            if failed || !err_norm.is_finite() {
                h *= 0.2;
            } else if guard_hit && err_norm <= 1.0 {
                // Shrink toward the locus until the underflow guard trips.
                h *= 0.5;
            } else {
                h *= (0.9 * err_norm.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
    }

    Ok((
        Trajectory {
            states,
            energy_residual,
            monitor_names: monitors.iter().map(|m| m.name.clone()).collect(),
            monitors: monitor_values,
            integrator_stats: stats,
        },
        status,
    ))
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod quadrature (G7, K15)
// ---------------------------------------------------------------------------

const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut kron = WGK[7] * f(c);
    let mut gauss = WG[3] * f(c);
    for i in 0..7 {
        let x = hw * XGK[i];
        let fv = f(c - x) + f(c + x);
        kron += WGK[i] * fv;
        if i % 2 == 1 {
            gauss += WG[i / 2] * fv;
        }
    }
    (kron * hw, (kron - gauss).abs() * hw.abs())
}

/// Adaptive Gauss-Kronrod integral of `f` over [a, b] to absolute accuracy
/// `tol`.
pub fn quadrature<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut stack = vec![(a, b, 0usize)];
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = gk15(&f, lo, hi);
        if !val.is_finite() {
            return Err(Error::NonConvergent {
                estimate: total,
                error: f64::INFINITY,
            });
        }
        if err <= tol * ((hi - lo) / (b - a)).abs() || depth >= 48 {
            if depth >= 48 && err > tol {
                return Err(Error::NonConvergent {
                    estimate: total + val,
                    error: err,
                });
            }
            total += val;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn quadrature_constants_are_exact_for_polynomials() {
        // K15 integrates polynomials up to degree 22 exactly; this guards the
        // embedded node/weight tables.
        for deg in [0, 5, 13, 20, 22] {
            let exact = if deg % 2 == 0 {
                2.0 / (deg as f64 + 1.0)
            } else {
                0.0
            };
            let (val, _) = gk15(&|x: f64| x.powi(deg), -1.0, 1.0);
            assert_abs_diff_eq!(val, exact, epsilon = 1e-13);
        }
        let v = quadrature(|x| x.exp(), 0.0, 1.0, 1e-13).unwrap();
        assert_relative_eq!(v, std::f64::consts::E - 1.0, max_relative = 1e-13);
        assert_eq!(quadrature(|_| 0.0, 0.0, 1.0, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn free_particle_goes_straight() {
        let sys = ConstrainedSystem::geodesic(catalog::euclidean(2), 1.0);
        let s0 = initial_state_on_shell(&sys, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let traj = integrate(&sys, &s0, 2.0, 1e-10, &[], &[]).unwrap();
        let last = traj.last();
        let alpha = s0.qdot[0];
        assert_relative_eq!(last.q[0], 2.0 * alpha, max_relative = 1e-10);
        assert_relative_eq!(last.q[1], 2.0 * alpha, max_relative = 1e-10);
    }

    #[test]
    fn on_shell_solver_examples() {
        // E^2, V = -1/r^2, E0 = 0 at (1, 0): xd^2 + yd^2 = 2, direction
        // (1, 1) scales to alpha = 1.
        let sys = ConstrainedSystem::new(catalog::euclidean(2), catalog::newton_cotes(-1.0), 0.0);
        let s = initial_state_on_shell(&sys, &[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_relative_eq!(s.qdot[0], 1.0, max_relative = 1e-12);

        // Null geodesic: any null direction normalizes to 1. For the
        // off-diagonal metric, (1, 0) is null.
        let gsys = ConstrainedSystem::geodesic(catalog::constant_curvature(1.0), 0.0);
        let s = initial_state_on_shell(&gsys, &[1.0, 0.5], &[1.0, 0.0]).unwrap();
        assert_eq!(s.qdot, vec![1.0, 0.0]);

        // Off-diagonal family f = k/(x+y)^2, E0 = 1, k = 1, q0 = (1, 0),
        // direction (1, 1): f xd yd = 1 needs alpha = 1.
        let gsys = ConstrainedSystem::geodesic(catalog::constant_curvature(1.0), 1.0);
        let s = initial_state_on_shell(&gsys, &[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_relative_eq!(s.qdot[0], 1.0, max_relative = 1e-12);

        // Infeasible: E0 < 0 with a Riemannian metric and V = 0 direction.
        let bad = ConstrainedSystem::geodesic(catalog::euclidean(2), -1.0);
        assert!(matches!(
            initial_state_on_shell(&bad, &[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::InfeasibleEnergy(_))
        ));

        // E0 = V with a non-null direction must error.
        let sys0 = ConstrainedSystem::geodesic(catalog::euclidean(2), 0.0);
        assert!(matches!(
            initial_state_on_shell(&sys0, &[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::NullDirectionRequired)
        ));
    }

    #[test]
    fn dense_output_hits_requested_times() {
        let sys = ConstrainedSystem::geodesic(catalog::euclidean(2), 0.5);
        let s0 = initial_state_on_shell(&sys, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        let samples: Vec<f64> = (1..10).map(|i| i as f64 * 0.1).collect();
        let traj = integrate(&sys, &s0, 1.0, 1e-10, &[], &samples).unwrap();
        for &ts in &samples {
            let st = traj
                .states
                .iter()
                .find(|s| (s.t - ts).abs() < 1e-12)
                .expect("sample time recorded");
            assert_relative_eq!(st.q[0], s0.qdot[0] * ts, max_relative = 1e-9);
        }
    }

    #[test]
    fn step_guard_reports_underflow_near_locus() {
        // Geodesics of f = x with xd < 0 satisfy x xd = const, so
        // x^2 = 1 - 2t reaches the x = 0 locus at t = 0.5.
        let sys = ConstrainedSystem::geodesic(catalog::flat_lorentzian_x(), 1.0);
        let s0 = State {
            t: 0.0,
            q: vec![1.0, 0.0],
            qdot: vec![-1.0, -1.0],
        };
        let res = integrate(&sys, &s0, 1.0, 1e-10, &[], &[]);
        assert!(matches!(res, Err(Error::StepSizeUnderflow { .. })));
    }

    #[test]
    fn time_reversal_returns_home() {
        let sys = ConstrainedSystem::new(catalog::euclidean(2), catalog::newton_cotes(-1.0), 0.0);
        let s0 = initial_state_on_shell(&sys, &[1.0, 0.0], &[1.0, 1.0]).unwrap();
        let fwd = integrate(&sys, &s0, 1.5, 1e-10, &[], &[]).unwrap();
        let end = fwd.last();
        let back_start = State {
            t: 0.0,
            q: end.q.clone(),
            qdot: end.qdot.iter().map(|v| -v).collect(),
        };
        let back = integrate(&sys, &back_start, 1.5, 1e-10, &[], &[]).unwrap();
        let home = back.last();
        for a in 0..2 {
            assert_abs_diff_eq!(home.q[a], s0.q[a], epsilon = 1e-6);
        }
    }
}
