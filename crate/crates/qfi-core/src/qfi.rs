//! Quadratic first integrals of energy-constrained systems.
//!
//! A candidate integral I = K_ab(t,q) qd^a qd^b + K_a(t,q) qd^a + K(t,q) is a
//! first integral of the constrained flow exactly when the coefficient PDEs
//! hold; the three admissible families assemble K_ab, K_a, K out of conformal
//! Killing data of the kinetic metric. Builders here construct the
//! time-dependent coefficients, sweep the family conditions over sampled
//! points, and attach residual certificates.

use crate::catalog;
use crate::error::{Error, Result};
use crate::field::{CovectorField, Domain, ScalarField, Sym2Field};
use crate::geometry::{
    christoffel, cov_derivative_tensor2_with, sym_cov_derivative_with, ConnectionEval, MetricSpec,
    Tensor3,
};
use crate::sampling::{sample_points, CertConfig, Certificate};
use crate::symmetry::{reducible_ckt_residual, SymCovDerivField, SymmetryObject};
use nalgebra::DMatrix;
use std::sync::Arc;

pub const ON_SHELL_TOL: f64 = 1e-9;
/// Default tolerance for QFI condition certificates.
pub const QFI_CONDITION_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Constrained system
// ---------------------------------------------------------------------------

/// Autonomous conservative system restricted to the energy level H = E0.
#[derive(Clone)]
pub struct ConstrainedSystem {
    pub metric: MetricSpec,
    pub potential: Arc<dyn ScalarField>,
    pub energy: f64,
    zero_potential: bool,
}

impl ConstrainedSystem {
    pub fn new(metric: MetricSpec, potential: Arc<dyn ScalarField>, energy: f64) -> Self {
        ConstrainedSystem {
            metric,
            potential,
            energy,
            zero_potential: false,
        }
    }

    /// Geodesic system: zero potential, quadratic constraint gamma qd qd = 2 E0.
    pub fn geodesic(metric: MetricSpec, energy: f64) -> Self {
        let n = metric.n;
        ConstrainedSystem {
            metric,
            potential: crate::field::zero_scalar(n),
            energy,
            zero_potential: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.metric.n
    }

    pub fn has_zero_potential(&self) -> bool {
        self.zero_potential
    }

    pub fn domain(&self) -> Domain {
        self.metric.domain().intersect(&self.potential.domain())
    }

    pub fn hamiltonian(&self, q: &[f64], qdot: &[f64]) -> f64 {
        0.5 * self.metric.inner(q, qdot, qdot) + self.potential.value(q)
    }

    pub fn on_shell(&self, q: &[f64], qdot: &[f64], tol: f64) -> bool {
        (self.hamiltonian(q, qdot) - self.energy).abs() <= tol
    }

    /// Raised potential gradient V^{,a} = gamma^{ab} V_{,b}.
    pub fn raised_grad_v(&self, q: &[f64]) -> Result<Vec<f64>> {
        let grad = self.potential.gradient(q);
        self.metric.raise(q, &grad)
    }

    /// qdd^a = -Gamma^a_{bc} qd^b qd^c - V^{,a}.
    pub fn acceleration(&self, q: &[f64], qdot: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        let conn = christoffel(&self.metric, q)?;
        let vup = self.raised_grad_v(q)?;
        Ok((0..n)
            .map(|a| {
                let mut s = -vup[a];
                for b in 0..n {
                    for c in 0..n {
                        s -= conn.gamma.get(a, b, c) * qdot[b] * qdot[c];
                    }
                }
                s
            })
            .collect())
    }

    /// W = L_b V^{,b} and its gradient W_{,a}; the gradient uses the inverse
    /// metric derivative d_a gamma^{bc} = -gamma^{bd} g_{de,a} gamma^{ec}.
    pub fn lv_scalar(&self, l: &dyn CovectorField, q: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = self.dim();
        let (ginv, _) = self.metric.inverse_at(q)?;
        let gradv = self.potential.gradient(q);
        let lvals = l.values(q);

        let mut w = 0.0;
        for b in 0..n {
            for c in 0..n {
                w += ginv[(b, c)] * lvals[b] * gradv[c];
            }
        }

        let dginv = self.dginv(q, &ginv);
        let grad_w = (0..n)
            .map(|a| {
                let mut s = 0.0;
                for b in 0..n {
                    for c in 0..n {
                        s += dginv[a][(b, c)] * lvals[b] * gradv[c]
                            + ginv[(b, c)]
                                * (l.partial(q, b, a) * gradv[c]
                                    + lvals[b] * self.potential.partial2(q, c, a));
                    }
                }
                s
            })
            .collect();
        Ok((w, grad_w))
    }

    /// d_a gamma^{bc} for each a.
    pub fn dginv(&self, q: &[f64], ginv: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let n = self.dim();
        (0..n)
            .map(|a| {
                let dg = self.metric.g.partial_matrix(q, a);
                -(ginv * dg * ginv)
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Time-dependent coefficient fields
// ---------------------------------------------------------------------------

/// Time profile of a coefficient term: t^j or e^{lambda t}.
#[derive(Debug, Clone, Copy)]
pub enum TimeProfile {
    Power(u32),
    Exp(f64),
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Power(j) => t.powi(j as i32),
            TimeProfile::Exp(l) => (l * t).exp(),
        }
    }
    pub fn deriv(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Power(0) => 0.0,
            TimeProfile::Power(j) => j as f64 * t.powi(j as i32 - 1),
            TimeProfile::Exp(l) => l * (l * t).exp(),
        }
    }
    pub fn deriv2(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Power(0) | TimeProfile::Power(1) => 0.0,
            TimeProfile::Power(j) => (j * (j - 1)) as f64 * t.powi(j as i32 - 2),
            TimeProfile::Exp(l) => l * l * (l * t).exp(),
        }
    }
}

pub struct TimeTerm<F> {
    pub coeff: f64,
    pub profile: TimeProfile,
    pub field: F,
}

/// Sum of coeff * profile(t) * field(q) terms.
pub struct TimeDep<F> {
    pub dim: usize,
    pub terms: Vec<TimeTerm<F>>,
}

impl<F> TimeDep<F> {
    pub fn new(dim: usize) -> Self {
        TimeDep {
            dim,
            terms: Vec::new(),
        }
    }
    pub fn push(&mut self, coeff: f64, profile: TimeProfile, field: F) {
        self.terms.push(TimeTerm {
            coeff,
            profile,
            field,
        });
    }
}

pub type TimeSym2 = TimeDep<Arc<dyn Sym2Field>>;
pub type TimeCov = TimeDep<Arc<dyn CovectorField>>;
pub type TimeScalar = TimeDep<Arc<dyn ScalarField>>;

impl TimeSym2 {
    pub fn matrix_at(&self, t: f64, q: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for term in &self.terms {
            m += term.field.matrix(q) * (term.coeff * term.profile.eval(t));
        }
        m
    }
    pub fn dt_matrix_at(&self, t: f64, q: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for term in &self.terms {
            m += term.field.matrix(q) * (term.coeff * term.profile.deriv(t));
        }
        m
    }
}

impl TimeCov {
    pub fn values_at(&self, t: f64, q: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for term in &self.terms {
            let w = term.coeff * term.profile.eval(t);
            for a in 0..self.dim {
                v[a] += w * term.field.component(q, a);
            }
        }
        v
    }
    pub fn dt_values_at(&self, t: f64, q: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for term in &self.terms {
            let w = term.coeff * term.profile.deriv(t);
            for a in 0..self.dim {
                v[a] += w * term.field.component(q, a);
            }
        }
        v
    }
    pub fn dtt_values_at(&self, t: f64, q: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for term in &self.terms {
            let w = term.coeff * term.profile.deriv2(t);
            for a in 0..self.dim {
                v[a] += w * term.field.component(q, a);
            }
        }
        v
    }
}

impl TimeScalar {
    pub fn value_at(&self, t: f64, q: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|term| term.coeff * term.profile.eval(t) * term.field.value(q))
            .sum()
    }
    pub fn dt_value_at(&self, t: f64, q: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|term| term.coeff * term.profile.deriv(t) * term.field.value(q))
            .sum()
    }
    pub fn gradient_at(&self, t: f64, q: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for term in &self.terms {
            let w = term.coeff * term.profile.eval(t);
            for a in 0..self.dim {
                v[a] += w * term.field.partial(q, a);
            }
        }
        v
    }
}

// ---------------------------------------------------------------------------
// Pointwise associated-vector helpers
// ---------------------------------------------------------------------------

/// u_a of a symmetric tensor and its partials d_b u_a, computed from the
/// tensor's first and second partials plus the connection gradient.
fn assoc_vector_and_partials(
    metric: &MetricSpec,
    conn: &ConnectionEval,
    ginv: &DMatrix<f64>,
    dginv: &[DMatrix<f64>],
    field: &dyn Sym2Field,
    q: &[f64],
) -> (Vec<f64>, DMatrix<f64>) {
    let n = metric.n;
    let d = cov_derivative_tensor2_with(conn, field, q);

    // dd[e](a,b,c) = d_e (U_{ab;c})
    let mut dd = vec![Tensor3::zeros(n); n];
    let um = field.matrix(q);
    for e in 0..n {
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut v = field.partial2(q, a, b, c, e);
                    for f in 0..n {
                        v -= conn.dgamma.get(f, c, a, e) * um[(f, b)]
                            + conn.gamma.get(f, c, a) * field.partial(q, f, b, e)
                            + conn.dgamma.get(f, c, b, e) * um[(a, f)]
                            + conn.gamma.get(f, c, b) * field.partial(q, a, f, e);
                    }
                    dd[e].set(a, b, c, v);
                }
            }
        }
    }

    let m2 = n as f64 + 2.0;
    let u: Vec<f64> = (0..n)
        .map(|a| {
            let mut s = 0.0;
            for b in 0..n {
                for c in 0..n {
                    s += ginv[(b, c)] * (d.get(b, c, a) + 2.0 * d.get(c, a, b));
                }
            }
            s / m2
        })
        .collect();

    let du = DMatrix::from_fn(n, n, |a, e| {
        let mut s = 0.0;
        for b in 0..n {
            for c in 0..n {
                s += dginv[e][(b, c)] * (d.get(b, c, a) + 2.0 * d.get(c, a, b))
                    + ginv[(b, c)] * (dd[e].get(b, c, a) + 2.0 * dd[e].get(c, a, b));
            }
        }
        s / m2
    });

    (u, du)
}

// ---------------------------------------------------------------------------
// The coefficient PDE system (pointwise residuals)
// ---------------------------------------------------------------------------

/// Residuals of the four coefficient PDEs at (t, q), with the multiplier data
/// X_a and psi computed internally from the trace identities:
/// 1. K_(ab;c) - X_(a gamma_bc)
/// 2. K_(a;b) - psi gamma_ab + K_ab,t
/// 3. K_,a - 2 K_ab V^{,b} - 2 (V - E0) X_a + K_a,t
/// 4. K_,t - K_a V^{,a} - 2 (V - E0) psi
pub fn pde_residuals(
    sys: &ConstrainedSystem,
    kab: &TimeSym2,
    ka: &TimeCov,
    kscalar: &TimeScalar,
    t: f64,
    q: &[f64],
) -> Result<[f64; 4]> {
    let n = sys.dim();
    let metric = &sys.metric;
    let conn = christoffel(metric, q)?;
    let (ginv, _) = metric.inverse_at(q)?;
    let g = metric.value(q);

    // X_a(t, q) from the tensor coefficient terms.
    let mut x = vec![0.0; n];
    let mut dcov_total = Tensor3::zeros(n);
    for term in &kab.terms {
        let w = term.coeff * term.profile.eval(t);
        let d = cov_derivative_tensor2_with(&conn, term.field.as_ref(), q);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    dcov_total.set(a, b, c, dcov_total.get(a, b, c) + w * d.get(a, b, c));
                }
            }
        }
    }
    let m2 = n as f64 + 2.0;
    for a in 0..n {
        let mut s = 0.0;
        for b in 0..n {
            for c in 0..n {
                s += ginv[(b, c)] * (dcov_total.get(b, c, a) + 2.0 * dcov_total.get(c, a, b));
            }
        }
        x[a] = s / m2;
    }

    // Residual 1: fully symmetrized.
    let mut res1 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let lhs = (dcov_total.get(a, b, c)
                    + dcov_total.get(b, c, a)
                    + dcov_total.get(c, a, b))
                    / 3.0;
                let rhs = (x[a] * g[(b, c)] + x[b] * g[(c, a)] + x[c] * g[(a, b)]) / 3.0;
                let v = lhs - rhs;
                res1 += v * v;
            }
        }
    }
    let res1 = res1.sqrt();

    // psi(t, q) = (K^a_{;a} + K^a_{a,t}) / n.
    let mut s_total = DMatrix::zeros(n, n);
    for term in &ka.terms {
        let w = term.coeff * term.profile.eval(t);
        s_total += sym_cov_derivative_with(&conn, term.field.as_ref(), q) * w;
    }
    let kab_dt = kab.dt_matrix_at(t, q);
    let mut psi = 0.0;
    for a in 0..n {
        for b in 0..n {
            psi += ginv[(a, b)] * (s_total[(a, b)] + kab_dt[(a, b)]);
        }
    }
    psi /= n as f64;

    let res2 = (&s_total - &(&g * psi) + &kab_dt).norm();

    // Residual 3.
    let vup = sys.raised_grad_v(q)?;
    let v0 = sys.potential.value(q) - sys.energy;
    let kab_val = kab.matrix_at(t, q);
    let grad_k = kscalar.gradient_at(t, q);
    let ka_dt = ka.dt_values_at(t, q);
    let mut res3 = 0.0;
    for a in 0..n {
        let mut kv = 0.0;
        for b in 0..n {
            kv += kab_val[(a, b)] * vup[b];
        }
        let r = grad_k[a] - 2.0 * kv - 2.0 * v0 * x[a] + ka_dt[a];
        res3 += r * r;
    }
    let res3 = res3.sqrt();

    // Residual 4.
    let ka_val = ka.values_at(t, q);
    let kav: f64 = (0..n).map(|a| ka_val[a] * vup[a]).sum();
    let res4 = (kscalar.dt_value_at(t, q) - kav - 2.0 * v0 * psi).abs();

    Ok([res1, res2, res3, res4])
}

/// The two integrability conditions supplementing the PDE system (the mixed
/// second derivatives of K), used as a diagnostic for hand-built candidates.
pub fn fi_integrability_residuals(
    sys: &ConstrainedSystem,
    kab: &TimeSym2,
    ka: &TimeCov,
    _kscalar: &TimeScalar,
    t: f64,
    q: &[f64],
) -> Result<[f64; 2]> {
    let n = sys.dim();
    let metric = &sys.metric;
    let conn = christoffel(metric, q)?;
    let (ginv, _) = metric.inverse_at(q)?;
    let dginv = sys.dginv(q, &ginv);
    let gradv = sys.potential.gradient(q);
    let vup = sys.raised_grad_v(q)?;
    let v0 = sys.potential.value(q) - sys.energy;

    // Assemble X(t, q), dX/dt, d_b X_a, psi, d_a psi.
    let mut x = vec![0.0; n];
    let mut x_dt = vec![0.0; n];
    let mut dx: DMatrix<f64> = DMatrix::zeros(n, n);
    for term in &kab.terms {
        let (u, du) =
            assoc_vector_and_partials(metric, &conn, &ginv, &dginv, term.field.as_ref(), q);
        let w = term.coeff * term.profile.eval(t);
        let wd = term.coeff * term.profile.deriv(t);
        for a in 0..n {
            x[a] += w * u[a];
            x_dt[a] += wd * u[a];
            for e in 0..n {
                dx[(a, e)] += w * du[(a, e)];
            }
        }
    }

    // Gradient of psi = (gamma^{ab} S_ab + gamma^{ab} K_ab,t)/n; only the
    // gradient enters the first integrability condition.
    let mut dpsi = vec![0.0; n];
    for term in &ka.terms {
        let w = term.coeff * term.profile.eval(t);
        let s = sym_cov_derivative_with(&conn, term.field.as_ref(), q);
        for e in 0..n {
            // d_e (gamma^{ab} S_ab) = dginv S + ginv d_e S
            let l = term.field.as_ref();
            let mut de = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let ds = 0.5 * (l.partial2(q, a, b, e) + l.partial2(q, b, a, e))
                        - (0..n)
                            .map(|c| {
                                conn.dgamma.get(c, a, b, e) * l.component(q, c)
                                    + conn.gamma.get(c, a, b) * l.partial(q, c, e)
                            })
                            .sum::<f64>();
                    de += dginv[e][(a, b)] * s[(a, b)] + ginv[(a, b)] * ds;
                }
            }
            dpsi[e] += w * de;
        }
    }
    for term in &kab.terms {
        let wd = term.coeff * term.profile.deriv(t);
        let f = term.field.as_ref();
        let fm = f.matrix(q);
        for e in 0..n {
            let mut de = 0.0;
            for a in 0..n {
                for b in 0..n {
                    de += dginv[e][(a, b)] * fm[(a, b)] + ginv[(a, b)] * f.partial(q, a, b, e);
                }
            }
            dpsi[e] += wd * de;
        }
    }
    for e in 0..n {
        dpsi[e] /= n as f64;
    }

    // Condition 1: K_a,tt - 2 K_ab,t V^{,b} + (K_b V^{,b})_,a
    //              + 2 (V - E0)(psi_,a - X_a,t).
    let ka_dtt = ka.dtt_values_at(t, q);
    let kab_dt = kab.dt_matrix_at(t, q);
    let mut grad_w = vec![0.0; n];
    for term in &ka.terms {
        let w = term.coeff * term.profile.eval(t);
        let (_, gw) = sys.lv_scalar(term.field.as_ref(), q)?;
        for a in 0..n {
            grad_w[a] += w * gw[a];
        }
    }
    let mut res1 = 0.0;
    for a in 0..n {
        let mut kdtv = 0.0;
        for b in 0..n {
            kdtv += kab_dt[(a, b)] * vup[b];
        }
        let r = ka_dtt[a] - 2.0 * kdtv + grad_w[a] + 2.0 * v0 * (dpsi[a] - x_dt[a]);
        res1 += r * r;
    }
    let res1 = res1.sqrt();

    // Condition 2: 2 (K_[a|c| V^{,c})_{;b]} - K_[a;b],t + 2 [(V-E0) X_[a]_{;b]}.
    let kab_val = kab.matrix_at(t, q);
    // dP[(a, e)] = d_e (K_ac V^{,c})
    let mut dp = DMatrix::zeros(n, n);
    for a in 0..n {
        for e in 0..n {
            let mut s = 0.0;
            for c in 0..n {
                for d in 0..n {
                    // K_ac gamma^{cd} V_,d and its e-partial
                    let dkab: f64 = kab
                        .terms
                        .iter()
                        .map(|tm| tm.coeff * tm.profile.eval(t) * tm.field.partial(q, a, c, e))
                        .sum();
                    s += dkab * ginv[(c, d)] * gradv[d]
                        + kab_val[(a, c)]
                            * (dginv[e][(c, d)] * gradv[d]
                                + ginv[(c, d)] * sys.potential.partial2(q, d, e));
                }
            }
            dp[(a, e)] = s;
        }
    }
    let ka_dt_partial = |a: usize, e: usize| -> f64 {
        ka.terms
            .iter()
            .map(|tm| tm.coeff * tm.profile.deriv(t) * tm.field.partial(q, a, e))
            .sum()
    };
    let mut res2: f64 = 0.0;
    for a in 0..n {
        for b in (a + 1)..n {
            // antisymmetric parts (connection terms cancel)
            let t1 = dp[(a, b)] - dp[(b, a)];
            let t2 = 0.5 * (ka_dt_partial(a, b) - ka_dt_partial(b, a));
            let t3 = gradv[b] * x[a] - gradv[a] * x[b] + v0 * (dx[(a, b)] - dx[(b, a)]);
            let r = t1 - t2 + t3;
            res2 += r * r;
        }
    }
    let res2 = res2.sqrt();

    Ok([res1, res2])
}

// ---------------------------------------------------------------------------
// QfiSpec and family builders
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum QfiFamily {
    Integral1,
    Integral2,
    Integral3,
    J1,
    J2,
    GeodesicP1,
    GeodesicP2,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConditionResidual {
    pub name: String,
    pub certificate: Certificate,
}

/// A built first-integral candidate: evaluator coefficients plus the sampled
/// residuals of its family conditions. Certification is the caller's call —
/// the spec stores certificates, not booleans.
pub struct QfiSpec {
    pub family: QfiFamily,
    pub name: String,
    pub kab: TimeSym2,
    pub ka: TimeCov,
    pub kscalar: TimeScalar,
    pub ell: usize,
    pub lambda: Option<f64>,
    /// Constant c of the autonomous LFI reduction, when applicable.
    pub j2_constant: Option<f64>,
    pub condition_residuals: Vec<ConditionResidual>,
    pub domain: Domain,
}

impl std::fmt::Debug for QfiSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QfiSpec")
            .field("family", &self.family)
            .field("name", &self.name)
            .field("ell", &self.ell)
            .field("max_condition_residual", &self.max_condition_residual())
            .finish()
    }
}

impl QfiSpec {
    pub fn max_condition_residual(&self) -> f64 {
        self.condition_residuals
            .iter()
            .map(|c| c.certificate.max_residual)
            .fold(0.0, f64::max)
    }

    pub fn certified(&self, tol: f64) -> bool {
        self.max_condition_residual() <= tol
    }

    /// I(t, q, qd).
    pub fn evaluate(&self, t: f64, q: &[f64], qdot: &[f64]) -> Result<f64> {
        if !self.domain.contains(q, 0.0) {
            return Err(Error::OutOfDomain(q.to_vec()));
        }
        Ok(self.evaluate_unchecked(t, q, qdot))
    }

    pub fn evaluate_unchecked(&self, t: f64, q: &[f64], qdot: &[f64]) -> f64 {
        let n = self.kab.dim;
        let m = self.kab.matrix_at(t, q);
        let mut i = self.kscalar.value_at(t, q);
        for a in 0..n {
            for b in 0..n {
                i += m[(a, b)] * qdot[a] * qdot[b];
            }
        }
        let kv = self.ka.values_at(t, q);
        for a in 0..n {
            i += kv[a] * qdot[a];
        }
        i
    }

    /// dI/dt along the flow, by forward-mode AD: every ingredient is lifted
    /// to a first-order jet seeded with (dt, dq, dqd) = (1, qd, qdd).
    pub fn ddt_along_flow(
        &self,
        sys: &ConstrainedSystem,
        t: f64,
        q: &[f64],
        qdot: &[f64],
    ) -> Result<f64> {
        use crate::dual::Jet1;
        let n = self.kab.dim;
        let qdd = sys.acceleration(q, qdot)?;

        let lift_scalar = |f: &dyn ScalarField| -> Jet1 {
            let der: f64 = (0..n).map(|i| f.partial(q, i) * qdot[i]).sum();
            Jet1::new(f.value(q), der)
        };
        let qd_jet: Vec<Jet1> = (0..n).map(|a| Jet1::new(qdot[a], qdd[a])).collect();

        let mut total = Jet1::constant(0.0);
        for term in &self.kab.terms {
            let p = Jet1::new(term.profile.eval(t), term.profile.deriv(t));
            for a in 0..n {
                for b in 0..n {
                    let der: f64 = (0..n)
                        .map(|i| term.field.partial(q, a, b, i) * qdot[i])
                        .sum();
                    let fj = Jet1::new(term.field.component(q, a, b), der);
                    total = total + (p * fj * qd_jet[a] * qd_jet[b]) * term.coeff;
                }
            }
        }
        for term in &self.ka.terms {
            let p = Jet1::new(term.profile.eval(t), term.profile.deriv(t));
            for a in 0..n {
                let der: f64 = (0..n).map(|i| term.field.partial(q, a, i) * qdot[i]).sum();
                let fj = Jet1::new(term.field.component(q, a), der);
                total = total + (p * fj * qd_jet[a]) * term.coeff;
            }
        }
        for term in &self.kscalar.terms {
            let p = Jet1::new(term.profile.eval(t), term.profile.deriv(t));
            total = total + (p * lift_scalar(term.field.as_ref())) * term.coeff;
        }
        Ok(total.dot)
    }

    /// The algebraic side of the defining identity: the first-order
    /// multiplier (psi + X_c qd^c) times the constraint expression
    /// gamma qd qd + 2 (V - E0), with psi and X from the trace formulas.
    pub fn multiplier_rhs(
        &self,
        sys: &ConstrainedSystem,
        t: f64,
        q: &[f64],
        qdot: &[f64],
    ) -> Result<f64> {
        let n = sys.dim();
        let metric = &sys.metric;
        let conn = christoffel(metric, q)?;
        let (ginv, _) = metric.inverse_at(q)?;

        let mut x = vec![0.0; n];
        let m2 = n as f64 + 2.0;
        for term in &self.kab.terms {
            let w = term.coeff * term.profile.eval(t);
            let d = cov_derivative_tensor2_with(&conn, term.field.as_ref(), q);
            for a in 0..n {
                let mut s = 0.0;
                for b in 0..n {
                    for c in 0..n {
                        s += ginv[(b, c)] * (d.get(b, c, a) + 2.0 * d.get(c, a, b));
                    }
                }
                x[a] += w * s / m2;
            }
        }

        let mut psi = 0.0;
        for term in &self.ka.terms {
            let w = term.coeff * term.profile.eval(t);
            let s = sym_cov_derivative_with(&conn, term.field.as_ref(), q);
            for a in 0..n {
                for b in 0..n {
                    psi += w * ginv[(a, b)] * s[(a, b)];
                }
            }
        }
        let kab_dt = self.kab.dt_matrix_at(t, q);
        for a in 0..n {
            for b in 0..n {
                psi += ginv[(a, b)] * kab_dt[(a, b)];
            }
        }
        psi /= n as f64;

        let xdot: f64 = (0..n).map(|a| x[a] * qdot[a]).sum();
        let bracket =
            metric.inner(q, qdot, qdot) + 2.0 * (sys.potential.value(q) - sys.energy);
        Ok((psi + xdot) * bracket)
    }
}

/// A vector datum for Integrals 1-3: the vector L whose symmetrized
/// covariant derivative is required to be a CKT.
pub struct ReducibleEntry {
    pub name: String,
    pub vector: Arc<dyn CovectorField>,
}

fn sweep_points(sys: &ConstrainedSystem, cfg: &CertConfig) -> Vec<Vec<f64>> {
    let bx = catalog::sample_box_for(&sys.metric);
    sample_points(&bx, &sys.domain(), cfg.n_points, cfg.seed)
}

fn ckt_precondition(
    sys: &ConstrainedSystem,
    entry: &ReducibleEntry,
    pts: &[Vec<f64>],
    tol: f64,
) -> Result<Certificate> {
    let cert = Certificate::sweep(pts, |q| {
        reducible_ckt_residual(&sys.metric, entry.vector.as_ref(), q)
            .map(|(r, _)| r)
            .unwrap_or(f64::INFINITY)
    });
    if !cert.passes(tol) {
        return Err(Error::UncertifiedSymmetry(
            entry.name.clone(),
            cert.max_residual,
        ));
    }
    Ok(cert)
}

fn push_condition(
    conds: &mut Vec<ConditionResidual>,
    name: &str,
    cert: Certificate,
    tol: f64,
) -> Result<()> {
    let violated = !cert.passes(tol);
    conds.push(ConditionResidual {
        name: name.into(),
        certificate: cert,
    });
    if violated {
        let c = conds.last().unwrap();
        return Err(Error::ConditionViolated {
            condition: c.name.clone(),
            max_residual: c.certificate.max_residual,
            tol,
        });
    }
    Ok(())
}

/// Integral 1: time-even tensor family
/// I = (-sum t^{2k}/(2k) L_(2k-1)(a;b) + C_(0)ab) qd qd
///     + sum t^{2k-1} L_(2k-1) qd + sum t^{2k}/(2k) L_(2k-1) V^, + G.
/// `ls[k-1]` holds L_(2k-1). With ell = 0 this is the autonomous J1.
pub fn build_integral1(
    sys: &ConstrainedSystem,
    c0: &SymmetryObject,
    ls: Vec<ReducibleEntry>,
    g: Arc<dyn ScalarField>,
    ell: usize,
    cfg: &CertConfig,
) -> Result<QfiSpec> {
    assert!(ell <= 8, "time-dependence degree capped at ell = 8");
    assert_eq!(ls.len(), ell, "integral 1 needs ell vectors L_(2k-1)");
    let n = sys.dim();
    let tensor = c0
        .tensor
        .clone()
        .ok_or_else(|| Error::BadConfig("integral 1 needs a tensor C0".into()))?;
    if !c0.certificate.passes(cfg.tol.max(1e-10)) {
        return Err(Error::UncertifiedSymmetry(
            c0.name.clone(),
            c0.certificate.max_residual,
        ));
    }

    let pts = sweep_points(sys, cfg);
    let mut conds = Vec::new();

    for entry in &ls {
        ckt_precondition(sys, entry, &pts, cfg.tol.max(1e-10))?;
    }

    // Conditions (k = 1..ell): the chain closes with Y-terms and the next
    // vector in the ladder.
    for k in 1..=ell {
        let entry = &ls[k - 1];
        let next = if k < ell { Some(&ls[k]) } else { None };
        let factor = 2.0 * k as f64 * (2.0 * k as f64 + 1.0);
        let cert = Certificate::sweep(&pts, |q| {
            let (_, grad_w) = match sys.lv_scalar(entry.vector.as_ref(), q) {
                Ok(x) => x,
                Err(_) => return f64::INFINITY,
            };
            let conn = christoffel(&sys.metric, q).unwrap();
            let s = sym_cov_derivative_with(&conn, entry.vector.as_ref(), q);
            let vup = sys.raised_grad_v(q).unwrap();
            let v0 = sys.potential.value(q) - sys.energy;
            let (_, y) = reducible_ckt_residual(&sys.metric, entry.vector.as_ref(), q).unwrap();
            let mut r2 = 0.0;
            for a in 0..n {
                let sv: f64 = (0..n).map(|b| s[(a, b)] * vup[b]).sum();
                let mut r = grad_w[a] + 2.0 * sv + 2.0 * v0 * y[a];
                if let Some(nx) = next {
                    r += factor * nx.vector.component(q, a);
                }
                r2 += r * r;
            }
            r2.sqrt()
        });
        let name = if k == ell {
            format!("closure condition for L_({})", 2 * k - 1)
        } else {
            format!("ladder condition for L_({})", 2 * k - 1)
        };
        push_condition(&mut conds, &name, cert, cfg.tol)?;
    }

    // G condition: G_,a = 2 C_ab V^{,b} + 2 (V - E0) X_a - L_(1)a (ell > 0).
    let l1 = ls.first().map(|e| e.vector.clone());
    let cert = Certificate::sweep(&pts, |q| {
        g_condition_residual(sys, tensor.as_ref(), c0.associated_vector.as_deref(), &g, l1.as_deref(), q)
            .unwrap_or(f64::INFINITY)
    });
    push_condition(&mut conds, "G gradient condition", cert, cfg.tol)?;

    // Assemble coefficients.
    let mut kab = TimeSym2::new(n);
    kab.push(1.0, TimeProfile::Power(0), tensor.clone());
    let mut ka = TimeCov::new(n);
    let mut kscalar = TimeScalar::new(n);
    kscalar.push(1.0, TimeProfile::Power(0), g.clone());
    for k in 1..=ell {
        let entry = &ls[k - 1];
        let s_field: Arc<dyn Sym2Field> = Arc::new(SymCovDerivField {
            metric: sys.metric.clone(),
            l: entry.vector.clone(),
        });
        kab.push(
            -1.0 / (2.0 * k as f64),
            TimeProfile::Power(2 * k as u32),
            s_field,
        );
        ka.push(
            1.0,
            TimeProfile::Power(2 * k as u32 - 1),
            entry.vector.clone(),
        );
        kscalar.push(
            1.0 / (2.0 * k as f64),
            TimeProfile::Power(2 * k as u32),
            Arc::new(LvField {
                sys: sys.clone(),
                l: entry.vector.clone(),
            }),
        );
    }

    let domain = sys.domain().intersect(&tensor.domain());
    Ok(QfiSpec {
        family: if ell == 0 {
            QfiFamily::J1
        } else {
            QfiFamily::Integral1
        },
        name: format!("integral1(ell={ell})"),
        kab,
        ka,
        kscalar,
        ell,
        lambda: None,
        j2_constant: None,
        condition_residuals: conds,
        domain,
    })
}

fn g_condition_residual(
    sys: &ConstrainedSystem,
    tensor: &dyn Sym2Field,
    assoc: Option<&dyn CovectorField>,
    g: &Arc<dyn ScalarField>,
    l1: Option<&dyn CovectorField>,
    q: &[f64],
) -> Result<f64> {
    let n = sys.dim();
    let vup = sys.raised_grad_v(q)?;
    let v0 = sys.potential.value(q) - sys.energy;
    let x: Vec<f64> = match assoc {
        Some(a) => a.values(q),
        None => crate::symmetry::ckt_associated_vector(&sys.metric, tensor, q)?,
    };
    let cm = tensor.matrix(q);
    let mut r2 = 0.0;
    for a in 0..n {
        let cv: f64 = (0..n).map(|b| cm[(a, b)] * vup[b]).sum();
        let mut r = g.partial(q, a) - 2.0 * cv - 2.0 * v0 * x[a];
        if let Some(l) = l1 {
            r += l.component(q, a);
        }
        r2 += r * r;
    }
    Ok(r2.sqrt())
}

/// L_b V^{,b} as a scalar field (one derivative order below its inputs).
pub struct LvField {
    pub sys: ConstrainedSystem,
    pub l: Arc<dyn CovectorField>,
}

impl ScalarField for LvField {
    fn dim(&self) -> usize {
        self.sys.dim()
    }
    fn value(&self, q: &[f64]) -> f64 {
        self.sys.lv_scalar(self.l.as_ref(), q).map(|(w, _)| w).unwrap_or(f64::NAN)
    }
    fn partial(&self, q: &[f64], i: usize) -> f64 {
        self.sys
            .lv_scalar(self.l.as_ref(), q)
            .map(|(_, g)| g[i])
            .unwrap_or(f64::NAN)
    }
    fn partial2(&self, _q: &[f64], _i: usize, _j: usize) -> f64 {
        panic!("LvField: second derivative not available")
    }
    fn domain(&self) -> Domain {
        self.sys.domain().intersect(&self.l.domain())
    }
    fn derivative_order(&self) -> u8 {
        1
    }
}

/// Integral 2: time-odd family
/// I = sum_k (-t^{2k+1}/(2k+1) L_(2k)(a;b) qd qd + t^{2k} L_(2k) qd
///            + t^{2k+1}/(2k+1) L_(2k) V^,).
/// `ls[k]` holds L_(2k), k = 0..ell.
pub fn build_integral2(
    sys: &ConstrainedSystem,
    ls: Vec<ReducibleEntry>,
    ell: usize,
    cfg: &CertConfig,
) -> Result<QfiSpec> {
    assert!(ell <= 8, "time-dependence degree capped at ell = 8");
    assert_eq!(ls.len(), ell + 1, "integral 2 needs ell + 1 vectors L_(2k)");
    let n = sys.dim();
    let pts = sweep_points(sys, cfg);
    let mut conds = Vec::new();

    for entry in &ls {
        ckt_precondition(sys, entry, &pts, cfg.tol.max(1e-10))?;
    }

    for k in 0..=ell {
        let entry = &ls[k];
        let next = if k < ell { Some(&ls[k + 1]) } else { None };
        let factor = 2.0 * (k as f64 + 1.0) * (2.0 * k as f64 + 1.0);
        let cert = Certificate::sweep(&pts, |q| {
            let (_, grad_w) = match sys.lv_scalar(entry.vector.as_ref(), q) {
                Ok(x) => x,
                Err(_) => return f64::INFINITY,
            };
            let conn = christoffel(&sys.metric, q).unwrap();
            let s = sym_cov_derivative_with(&conn, entry.vector.as_ref(), q);
            let vup = sys.raised_grad_v(q).unwrap();
            let v0 = sys.potential.value(q) - sys.energy;
            let (_, y) = reducible_ckt_residual(&sys.metric, entry.vector.as_ref(), q).unwrap();
            let mut r2 = 0.0;
            for a in 0..n {
                let sv: f64 = (0..n).map(|b| s[(a, b)] * vup[b]).sum();
                let mut r = grad_w[a] + 2.0 * sv + 2.0 * v0 * y[a];
                if let Some(nx) = next {
                    r += factor * nx.vector.component(q, a);
                }
                r2 += r * r;
            }
            r2.sqrt()
        });
        let name = if k == ell {
            format!("closure condition for L_({})", 2 * k)
        } else {
            format!("ladder condition for L_({})", 2 * k)
        };
        push_condition(&mut conds, &name, cert, cfg.tol)?;
    }

    let mut kab = TimeSym2::new(n);
    let mut ka = TimeCov::new(n);
    let mut kscalar = TimeScalar::new(n);
    let mut domain = sys.domain();
    for (k, entry) in ls.iter().enumerate() {
        domain = domain.intersect(&entry.vector.domain());
        let s_field: Arc<dyn Sym2Field> = Arc::new(SymCovDerivField {
            metric: sys.metric.clone(),
            l: entry.vector.clone(),
        });
        kab.push(
            -1.0 / (2.0 * k as f64 + 1.0),
            TimeProfile::Power(2 * k as u32 + 1),
            s_field,
        );
        ka.push(1.0, TimeProfile::Power(2 * k as u32), entry.vector.clone());
        kscalar.push(
            1.0 / (2.0 * k as f64 + 1.0),
            TimeProfile::Power(2 * k as u32 + 1),
            Arc::new(LvField {
                sys: sys.clone(),
                l: entry.vector.clone(),
            }),
        );
    }

    Ok(QfiSpec {
        family: QfiFamily::Integral2,
        name: format!("integral2(ell={ell})"),
        kab,
        ka,
        kscalar,
        ell,
        lambda: None,
        j2_constant: None,
        condition_residuals: conds,
        domain,
    })
}

/// Integral 3: exponential family
/// I = e^{lambda t} (-L_(a;b) qd qd + lambda L qd + L V^,).
pub fn build_integral3(
    sys: &ConstrainedSystem,
    lambda: f64,
    l: ReducibleEntry,
    cfg: &CertConfig,
) -> Result<QfiSpec> {
    if lambda == 0.0 {
        return Err(Error::ZeroLambda);
    }
    let n = sys.dim();
    let pts = sweep_points(sys, cfg);
    let mut conds = Vec::new();
    ckt_precondition(sys, &l, &pts, cfg.tol.max(1e-10))?;

    let cert = Certificate::sweep(&pts, |q| {
        let (_, grad_w) = match sys.lv_scalar(l.vector.as_ref(), q) {
            Ok(x) => x,
            Err(_) => return f64::INFINITY,
        };
        let conn = christoffel(&sys.metric, q).unwrap();
        let s = sym_cov_derivative_with(&conn, l.vector.as_ref(), q);
        let vup = sys.raised_grad_v(q).unwrap();
        let v0 = sys.potential.value(q) - sys.energy;
        let (_, y) = reducible_ckt_residual(&sys.metric, l.vector.as_ref(), q).unwrap();
        let mut r2 = 0.0;
        for a in 0..n {
            let sv: f64 = (0..n).map(|b| s[(a, b)] * vup[b]).sum();
            let r = grad_w[a]
                + 2.0 * sv
                + lambda * lambda * l.vector.component(q, a)
                + 2.0 * v0 * y[a];
            r2 += r * r;
        }
        r2.sqrt()
    });
    push_condition(&mut conds, "exponential-family condition", cert, cfg.tol)?;

    let s_field: Arc<dyn Sym2Field> = Arc::new(SymCovDerivField {
        metric: sys.metric.clone(),
        l: l.vector.clone(),
    });
    let mut kab = TimeSym2::new(n);
    kab.push(-1.0, TimeProfile::Exp(lambda), s_field);
    let mut ka = TimeCov::new(n);
    ka.push(lambda, TimeProfile::Exp(lambda), l.vector.clone());
    let mut kscalar = TimeScalar::new(n);
    kscalar.push(
        1.0,
        TimeProfile::Exp(lambda),
        Arc::new(LvField {
            sys: sys.clone(),
            l: l.vector.clone(),
        }),
    );

    let domain = sys.domain().intersect(&l.vector.domain());
    Ok(QfiSpec {
        family: QfiFamily::Integral3,
        name: format!("integral3(lambda={lambda})"),
        kab,
        ka,
        kscalar,
        ell: 0,
        lambda: Some(lambda),
        j2_constant: None,
        condition_residuals: conds,
        domain,
    })
}

/// Autonomous LFI J2 = L_a qd^a + c t from a CKV. The constant c is the
/// sampled mean of L_a V^{,a} + 2 (V - E0) psi; its sampled deviation must
/// stay below tolerance for the object to certify.
pub fn build_j2(
    sys: &ConstrainedSystem,
    ckv: &SymmetryObject,
    cfg: &CertConfig,
) -> Result<QfiSpec> {
    let l = ckv
        .covector
        .clone()
        .ok_or_else(|| Error::BadConfig("J2 needs a covector CKV".into()))?;
    let psi = ckv
        .conformal_factor
        .clone()
        .ok_or_else(|| Error::BadConfig("J2 needs the CKV conformal factor".into()))?;
    if !ckv.certificate.passes(cfg.tol.max(1e-10)) {
        return Err(Error::UncertifiedSymmetry(
            ckv.name.clone(),
            ckv.certificate.max_residual,
        ));
    }
    let n = sys.dim();
    let pts = sweep_points(sys, cfg);

    let samples: Vec<f64> = pts
        .iter()
        .map(|q| {
            let (w, _) = sys.lv_scalar(l.as_ref(), q)?;
            Ok(w + 2.0 * (sys.potential.value(q) - sys.energy) * psi.value(q))
        })
        .collect::<Result<_>>()?;
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let std = (samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>()
        / samples.len() as f64)
        .sqrt();

    let mut conds = Vec::new();
    push_condition(
        &mut conds,
        "LFI constant constancy (sampled std)",
        Certificate {
            max_residual: std,
            points_sampled: samples.len(),
        },
        cfg.tol,
    )?;

    let mut ka = TimeCov::new(n);
    ka.push(1.0, TimeProfile::Power(0), l.clone());
    let mut kscalar = TimeScalar::new(n);
    if mean.abs() > 0.0 {
        kscalar.push(
            mean,
            TimeProfile::Power(1),
            Arc::new(crate::field::ConstScalar::new(n, 1.0)),
        );
    }

    let domain = sys.domain().intersect(&l.domain());
    Ok(QfiSpec {
        family: QfiFamily::J2,
        name: format!("j2({})", ckv.name),
        kab: TimeSym2::new(n),
        ka,
        kscalar,
        ell: 0,
        lambda: None,
        j2_constant: Some(mean),
        condition_residuals: conds,
        domain,
    })
}

/// The Hamiltonian H - shifted form: I = (gamma/2) qd qd + (V - E0) + E0,
/// exposed as the J1 instance C0 = gamma/2, G = V. Its value along on-shell
/// flow is E0.
pub fn hamiltonian_qfi(sys: &ConstrainedSystem, cfg: &CertConfig) -> Result<QfiSpec> {
    let n = sys.dim();
    let half_g: Arc<dyn Sym2Field> = Arc::new(crate::field::ScaledSym2 {
        s: Arc::new(crate::field::ConstScalar::new(n, 0.5)),
        t: sys.metric.g.clone(),
    });
    let c0 = crate::symmetry::certify_ckt(&sys.metric, "gamma/2", half_g, None, cfg)?;
    let g: Arc<dyn ScalarField> = crate::field::lin_comb(vec![(1.0, sys.potential.clone())]);
    let mut spec = build_integral1(sys, &c0, vec![], g, 0, cfg)?;
    spec.name = "hamiltonian".into();
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Geodesic specializations (null and non-null constraints)
// ---------------------------------------------------------------------------

/// Data for the geodesic QFI forms.
pub enum GeodesicData {
    /// E0 = 0: I = C_ab qd qd for any certified CKT.
    NullCkt { c: SymmetryObject },
    /// E0 = 0: I = t^2/2 G_;ab qd qd - t G_,a qd + G, G_;ab a CKT. The
    /// gradient must be supplied in closed form (the coefficient assembly
    /// differentiates it twice).
    NullQuadratic {
        g: Arc<dyn ScalarField>,
        grad_g: Arc<dyn CovectorField>,
    },
    /// E0 = 0: I = -t L_(a;b) qd qd + L_a qd, L_(a;b) a CKT.
    NullReducible { l: ReducibleEntry },
    /// E0 != 0, Integral 1 with ell = 0: I = C_ab qd qd + G with
    /// G_,a = -2 E0 X_a.
    NonNullQuadratic {
        c: SymmetryObject,
        g: Arc<dyn ScalarField>,
    },
    /// E0 != 0, Integral 2 with ell = 0: L_(a;b) must be a Killing tensor;
    /// for a Killing vector this is the LFI L_a qd^a.
    NonNullLinear { l: ReducibleEntry },
    /// E0 != 0, Integral 3: L_a = (2 E0 / lambda^2) Y_a.
    NonNullExponential { lambda: f64, l: ReducibleEntry },
}

/// Specialize the QFI machinery to constrained geodesics (V = 0). For E0 = 0
/// the Y-conditions degenerate, so any CKT data serves; for E0 != 0 leading
/// tensors must be Killing tensors and the associated vectors are tied to the
/// next vector in the ladder.
pub fn geodesic_specialize(
    sys: &ConstrainedSystem,
    data: GeodesicData,
    cfg: &CertConfig,
) -> Result<QfiSpec> {
    if !sys.has_zero_potential() {
        return Err(Error::NonzeroPotential);
    }
    let n = sys.dim();
    let e0 = sys.energy;
    let pts = sweep_points(sys, cfg);

    let family = if e0 == 0.0 {
        QfiFamily::GeodesicP1
    } else {
        QfiFamily::GeodesicP2
    };

    match data {
        GeodesicData::NullCkt { c } => {
            if e0 != 0.0 {
                return Err(Error::BranchInfeasible(
                    "NullCkt form needs E0 = 0".into(),
                ));
            }
            let tensor = c
                .tensor
                .clone()
                .ok_or_else(|| Error::BadConfig("NullCkt needs a tensor".into()))?;
            let mut conds = Vec::new();
            push_condition(
                &mut conds,
                "CKT certificate",
                c.certificate.clone(),
                cfg.tol.max(1e-10),
            )?;
            let mut kab = TimeSym2::new(n);
            kab.push(1.0, TimeProfile::Power(0), tensor.clone());
            Ok(QfiSpec {
                family,
                name: format!("null-geodesic-ckt({})", c.name),
                kab,
                ka: TimeCov::new(n),
                kscalar: TimeScalar::new(n),
                ell: 0,
                lambda: None,
                j2_constant: None,
                condition_residuals: conds,
                domain: sys.domain().intersect(&tensor.domain()),
            })
        }
        GeodesicData::NullQuadratic { g, grad_g } => {
            if e0 != 0.0 {
                return Err(Error::BranchInfeasible(
                    "NullQuadratic form needs E0 = 0".into(),
                ));
            }
            let mut conds = Vec::new();
            let cert = Certificate::sweep(&pts, |q| {
                reducible_ckt_residual(&sys.metric, grad_g.as_ref(), q)
                    .map(|(r, _)| r)
                    .unwrap_or(f64::INFINITY)
            });
            push_condition(&mut conds, "Hessian-of-G CKT condition", cert, cfg.tol)?;
            // Consistency of the supplied gradient.
            let grad_cert = Certificate::sweep(&pts, |q| {
                (0..n)
                    .map(|a| (grad_g.component(q, a) - g.partial(q, a)).abs())
                    .fold(0.0, f64::max)
            });
            push_condition(&mut conds, "gradient consistency", grad_cert, 1e-12)?;

            let hess: Arc<dyn Sym2Field> = Arc::new(SymCovDerivField {
                metric: sys.metric.clone(),
                l: grad_g.clone(),
            });
            let mut kab = TimeSym2::new(n);
            kab.push(0.5, TimeProfile::Power(2), hess);
            let mut ka = TimeCov::new(n);
            ka.push(-1.0, TimeProfile::Power(1), grad_g.clone());
            let mut kscalar = TimeScalar::new(n);
            kscalar.push(1.0, TimeProfile::Power(0), g.clone());
            Ok(QfiSpec {
                family,
                name: "null-geodesic-quadratic".into(),
                kab,
                ka,
                kscalar,
                ell: 1,
                lambda: None,
                j2_constant: None,
                condition_residuals: conds,
                domain: sys.domain().intersect(&g.domain()),
            })
        }
        GeodesicData::NullReducible { l } => {
            if e0 != 0.0 {
                return Err(Error::BranchInfeasible(
                    "NullReducible form needs E0 = 0".into(),
                ));
            }
            let mut conds = Vec::new();
            push_condition(
                &mut conds,
                "reducible CKT condition",
                ckt_precondition(sys, &l, &pts, cfg.tol.max(1e-10))?,
                cfg.tol.max(1e-10),
            )?;
            let s_field: Arc<dyn Sym2Field> = Arc::new(SymCovDerivField {
                metric: sys.metric.clone(),
                l: l.vector.clone(),
            });
            let mut kab = TimeSym2::new(n);
            kab.push(-1.0, TimeProfile::Power(1), s_field);
            let mut ka = TimeCov::new(n);
            ka.push(1.0, TimeProfile::Power(0), l.vector.clone());
            Ok(QfiSpec {
                family,
                name: format!("null-geodesic-reducible({})", l.name),
                kab,
                ka,
                kscalar: TimeScalar::new(n),
                ell: 0,
                lambda: None,
                j2_constant: None,
                condition_residuals: conds,
                domain: sys.domain().intersect(&l.vector.domain()),
            })
        }
        GeodesicData::NonNullQuadratic { c, g } => {
            if e0 == 0.0 {
                return Err(Error::BranchInfeasible(
                    "NonNullQuadratic form needs E0 != 0".into(),
                ));
            }
            build_integral1(sys, &c, vec![], g, 0, cfg).map(|mut s| {
                s.family = family;
                s.name = format!("geodesic-qfi({})", c.name);
                s
            })
        }
        GeodesicData::NonNullLinear { l } => {
            if e0 == 0.0 {
                return Err(Error::BranchInfeasible(
                    "NonNullLinear form needs E0 != 0".into(),
                ));
            }
            // Killing-tensor requirement on L_(a;b): associated vector must
            // vanish on top of the CKT condition.
            let mut conds = Vec::new();
            push_condition(
                &mut conds,
                "reducible CKT condition",
                ckt_precondition(sys, &l, &pts, cfg.tol.max(1e-10))?,
                cfg.tol.max(1e-10),
            )?;
            let kt_cert = Certificate::sweep(&pts, |q| {
                reducible_ckt_residual(&sys.metric, l.vector.as_ref(), q)
                    .map(|(_, y)| y.iter().map(|v| v * v).sum::<f64>().sqrt())
                    .unwrap_or(f64::INFINITY)
            });
            push_condition(&mut conds, "leading tensor is a KT", kt_cert, cfg.tol)?;

            let s_field: Arc<dyn Sym2Field> = Arc::new(SymCovDerivField {
                metric: sys.metric.clone(),
                l: l.vector.clone(),
            });
            let mut kab = TimeSym2::new(n);
            kab.push(-1.0, TimeProfile::Power(1), s_field);
            let mut ka = TimeCov::new(n);
            ka.push(1.0, TimeProfile::Power(0), l.vector.clone());
            Ok(QfiSpec {
                family,
                name: format!("geodesic-lfi({})", l.name),
                kab,
                ka,
                kscalar: TimeScalar::new(n),
                ell: 0,
                lambda: None,
                j2_constant: None,
                condition_residuals: conds,
                domain: sys.domain().intersect(&l.vector.domain()),
            })
        }
        GeodesicData::NonNullExponential { lambda, l } => {
            if e0 == 0.0 {
                return Err(Error::BranchInfeasible(
                    "NonNullExponential form needs E0 != 0".into(),
                ));
            }
            if lambda == 0.0 {
                return Err(Error::ZeroLambda);
            }
            let mut conds = Vec::new();
            push_condition(
                &mut conds,
                "reducible CKT condition",
                ckt_precondition(sys, &l, &pts, cfg.tol.max(1e-10))?,
                cfg.tol.max(1e-10),
            )?;
            // L_a = (2 E0 / lambda^2) Y_a.
            let cert = Certificate::sweep(&pts, |q| {
                let (_, y) =
                    reducible_ckt_residual(&sys.metric, l.vector.as_ref(), q).unwrap();
                (0..n)
                    .map(|a| {
                        (l.vector.component(q, a) - 2.0 * e0 / (lambda * lambda) * y[a]).abs()
                    })
                    .fold(0.0, f64::max)
            });
            push_condition(&mut conds, "L = (2 E0 / lambda^2) Y", cert, cfg.tol)?;
            build_integral3(sys, lambda, l, cfg).map(|mut s| {
                s.family = family;
                s.condition_residuals.extend(conds);
                s
            })
        }
    }
}

// ---------------------------------------------------------------------------
// G-function integrability and quadrature
// ---------------------------------------------------------------------------

/// Mixed-partial residual of the right-hand side of the G gradient condition
/// rhs_a = 2 C_ab V^{,b} + 2 (V - E0) X_a - L_(1)a. Zero means a consistent
/// G exists locally.
pub fn check_g_integrability(
    sys: &ConstrainedSystem,
    c0: &SymmetryObject,
    l1: Option<&Arc<dyn CovectorField>>,
    q: &[f64],
) -> Result<f64> {
    let n = sys.dim();
    let tensor = c0
        .tensor
        .as_ref()
        .ok_or_else(|| Error::BadConfig("check_g_integrability needs a tensor".into()))?;
    let metric = &sys.metric;
    let conn = christoffel(metric, q)?;
    let (ginv, _) = metric.inverse_at(q)?;
    let dginv = sys.dginv(q, &ginv);
    let gradv = sys.potential.gradient(q);
    let v0 = sys.potential.value(q) - sys.energy;

    let (x, dx) = assoc_vector_and_partials(metric, &conn, &ginv, &dginv, tensor.as_ref(), q);
    let cm = tensor.matrix(q);

    // d_e rhs_a
    let drhs = |a: usize, e: usize| -> f64 {
        let mut s = 0.0;
        for c in 0..n {
            for d in 0..n {
                s += 2.0
                    * (tensor.partial(q, a, c, e) * ginv[(c, d)] * gradv[d]
                        + cm[(a, c)]
                            * (dginv[e][(c, d)] * gradv[d]
                                + ginv[(c, d)] * sys.potential.partial2(q, d, e)));
            }
        }
        s += 2.0 * (gradv[e] * x[a] + v0 * dx[(a, e)]);
        if let Some(l) = l1 {
            s -= l.partial(q, a, e);
        }
        s
    };

    let mut r2 = 0.0;
    for a in 0..n {
        for e in (a + 1)..n {
            let anti = drhs(a, e) - drhs(e, a);
            r2 += anti * anti;
        }
    }
    Ok(r2.sqrt())
}

/// Integrate G along an axis-parallel path from `base` to `target` given the
/// gradient rhs_a; path independence across the two L-shaped paths is
/// enforced to `path_tol`.
pub fn solve_g_by_quadrature(
    sys: &ConstrainedSystem,
    c0: &SymmetryObject,
    l1: Option<&Arc<dyn CovectorField>>,
    base: &[f64],
    target: &[f64],
    path_tol: f64,
) -> Result<f64> {
    let n = sys.dim();
    let tensor = c0
        .tensor
        .as_ref()
        .ok_or_else(|| Error::BadConfig("solve_g_by_quadrature needs a tensor".into()))?;

    // Integrability spot-checks along the box corners.
    for frac in [0.0, 0.5, 1.0] {
        let q: Vec<f64> = (0..n)
            .map(|a| base[a] + frac * (target[a] - base[a]))
            .collect();
        let res = check_g_integrability(sys, c0, l1, &q)?;
        if res > 1e-6 {
            return Err(Error::NonIntegrable(format!(
                "integrability residual {res:.3e} at {q:?}"
            )));
        }
    }

    let rhs_component = |q: &[f64], a: usize| -> Result<f64> {
        let vup = sys.raised_grad_v(q)?;
        let x = match &c0.associated_vector {
            Some(f) => f.values(q),
            None => crate::symmetry::ckt_associated_vector(&sys.metric, tensor.as_ref(), q)?,
        };
        let cm = tensor.matrix(q);
        let cv: f64 = (0..n).map(|b| cm[(a, b)] * vup[b]).sum();
        let v0 = sys.potential.value(q) - sys.energy;
        let mut r = 2.0 * cv + 2.0 * v0 * x[a];
        if let Some(l) = l1 {
            r -= l.component(q, a);
        }
        Ok(r)
    };

    // Axis-parallel path varying one coordinate at a time. `order` selects
    // which coordinate moves first.
    let integrate_path = |order: &[usize]| -> Result<f64> {
        let mut total = 0.0;
        let mut current = base.to_vec();
        for &axis in order {
            let (a, b) = (current[axis], target[axis]);
            if a != b {
                let snapshot = current.clone();
                let val = crate::dynamics::quadrature(
                    |s| {
                        let mut q = snapshot.clone();
                        q[axis] = s;
                        rhs_component(&q, axis).unwrap_or(f64::NAN)
                    },
                    a,
                    b,
                    1e-12,
                )?;
                total += val;
            }
            current[axis] = target[axis];
        }
        Ok(total)
    };

    let order_fwd: Vec<usize> = (0..n).collect();
    let order_rev: Vec<usize> = (0..n).rev().collect();
    let g1 = integrate_path(&order_fwd)?;
    let g2 = integrate_path(&order_rev)?;
    if (g1 - g2).abs() > path_tol {
        return Err(Error::NonIntegrable(format!(
            "path dependence {:.3e} exceeds {path_tol:.3e}",
            (g1 - g2).abs()
        )));
    }
    Ok(0.5 * (g1 + g2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ConstScalar;
    use approx::assert_abs_diff_eq;

    fn e2_system(k: f64, e0: f64) -> ConstrainedSystem {
        ConstrainedSystem::new(catalog::euclidean(2), catalog::newton_cotes(k), e0)
    }

    #[test]
    fn hamiltonian_coefficients_solve_the_pde_system() {
        // K_ab = delta/2, K_a = 0, K = V - E0: all four residuals vanish.
        let sys = e2_system(-1.0, 0.0);
        let n = 2;
        let mut kab = TimeSym2::new(n);
        kab.push(
            0.5,
            TimeProfile::Power(0),
            sys.metric.g.clone(),
        );
        let ka = TimeCov::new(n);
        let mut kscalar = TimeScalar::new(n);
        kscalar.push(1.0, TimeProfile::Power(0), sys.potential.clone());
        kscalar.push(
            -sys.energy,
            TimeProfile::Power(0),
            Arc::new(ConstScalar::new(n, 1.0)),
        );
        let res = pde_residuals(&sys, &kab, &ka, &kscalar, 0.7, &[1.1, 0.4]).unwrap();
        for r in res {
            assert_abs_diff_eq!(r, 0.0, epsilon = 1e-11);
        }
        let ires = fi_integrability_residuals(&sys, &kab, &ka, &kscalar, 0.7, &[1.1, 0.4]).unwrap();
        for r in ires {
            assert_abs_diff_eq!(r, 0.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn non_integral_candidate_shows_in_third_residual() {
        // K_ab = delta, K_a = 0, K = 0 with non-constant V: the third
        // residual equals |2 V^{,a}|.
        let sys = e2_system(-1.0, 0.0);
        let n = 2;
        let mut kab = TimeSym2::new(n);
        kab.push(1.0, TimeProfile::Power(0), sys.metric.g.clone());
        let ka = TimeCov::new(n);
        let kscalar = TimeScalar::new(n);
        let q = [1.2, 0.5];
        let res = pde_residuals(&sys, &kab, &ka, &kscalar, 0.0, &q).unwrap();
        let vup = sys.raised_grad_v(&q).unwrap();
        let expect = 2.0 * (vup[0] * vup[0] + vup[1] * vup[1]).sqrt();
        assert_abs_diff_eq!(res[2], expect, epsilon = 1e-12);
        assert_abs_diff_eq!(res[0], 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(res[1], 0.0, epsilon = 1e-13);
    }

    #[test]
    fn integral3_inverted_oscillator_certifies() {
        // 1D, gamma = 1, V = -lambda^2 x^2 / 2, L = (1): the exponential
        // condition holds for every E0 (Killing-tensor case).
        let lambda = 1.3;
        for e0 in [0.0, 0.7, -2.0] {
            let sys = ConstrainedSystem::new(
                catalog::line(),
                catalog::inverted_oscillator(lambda),
                e0,
            );
            let l = ReducibleEntry {
                name: "unit".into(),
                vector: crate::field::covector_from_components(vec![Arc::new(
                    ConstScalar::new(1, 1.0),
                )]),
            };
            let spec = build_integral3(&sys, lambda, l, &CertConfig::with_tol(1e-9)).unwrap();
            assert!(spec.certified(1e-9));
            // I = e^{lambda t} (lambda xd - lambda^2 x)
            let (t, q, qd) = (0.4, [0.8], [0.5]);
            let expect = (lambda * t).exp() * (lambda * qd[0] - lambda * lambda * q[0]);
            assert_abs_diff_eq!(
                spec.evaluate(t, &q, &qd).unwrap(),
                expect,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn integral3_rejects_zero_lambda() {
        let sys = ConstrainedSystem::new(catalog::line(), catalog::inverted_oscillator(1.0), 0.0);
        let l = ReducibleEntry {
            name: "unit".into(),
            vector: crate::field::covector_from_components(vec![Arc::new(ConstScalar::new(
                1, 1.0,
            ))]),
        };
        assert!(matches!(
            build_integral3(&sys, 0.0, l, &CertConfig::default()),
            Err(Error::ZeroLambda)
        ));
    }

    #[test]
    fn geodesic_specialize_rejects_potential() {
        let sys = e2_system(-1.0, 0.0);
        let err = geodesic_specialize(
            &sys,
            GeodesicData::NullReducible {
                l: ReducibleEntry {
                    name: "x".into(),
                    vector: crate::field::covector_from_components(vec![
                        Arc::new(ConstScalar::new(2, 1.0)),
                        Arc::new(ConstScalar::new(2, 0.0)),
                    ]),
                },
            },
            &CertConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonzeroPotential));
    }
}
