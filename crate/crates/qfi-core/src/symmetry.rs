//! Conformal Killing vectors and second-order conformal Killing tensors:
//! residual verification, construction from CKVs, and classification.
//!
//! Identities are verified numerically: an object is certified when the sup
//! of its defining-equation residual over a low-discrepancy sample of the
//! metric's validity domain stays below tolerance.

use crate::catalog::{self, CkvCatalogEntry};
use crate::error::{Error, Result};
use crate::field::{
    lin_comb, product, CovLinComb, CovectorField, Func1, GradCovector, ScalarField, Sym2Field,
    Sym2LinComb, SymProduct,
};
use crate::geometry::{
    christoffel, cov_derivative_tensor2_with, scalar_second_cov_derivative,
    sym_cov_derivative_with, MetricSpec, Tensor3,
};
use crate::sampling::{sample_points, CertConfig, Certificate};
use nalgebra::DMatrix;
use std::sync::Arc;

/// Kind of symmetry object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SymmetryKind {
    Ckv,
    Ckt2,
}

/// A candidate (or certified) CKV / second-order CKT with its conformal
/// factor or associated vector and a residual certificate.
#[derive(Clone)]
pub struct SymmetryObject {
    pub kind: SymmetryKind,
    pub name: String,
    pub metric_family: String,
    pub covector: Option<Arc<dyn CovectorField>>,
    pub tensor: Option<Arc<dyn Sym2Field>>,
    pub conformal_factor: Option<Arc<dyn ScalarField>>,
    pub associated_vector: Option<Arc<dyn CovectorField>>,
    pub certificate: Certificate,
}

impl SymmetryObject {
    pub fn is_certified(&self, tol: f64) -> bool {
        self.certificate.passes(tol)
    }
}

impl std::fmt::Debug for SymmetryObject {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymmetryObject")
            .field("kind", &self.kind)
            .field("name", &self.name)
            .field("metric_family", &self.metric_family)
            .field("certificate", &self.certificate)
            .finish()
    }
}

// ---------------------------------------------------------------------------
// Residual evaluators
// ---------------------------------------------------------------------------

/// CKV residual at a point: psi = L^a_{;a} / n and the matrix
/// L_(a;b) - psi gamma_ab. A vanishing residual certifies a CKV.
pub fn ckv_residual(
    metric: &MetricSpec,
    l: &dyn CovectorField,
    q: &[f64],
) -> Result<(f64, DMatrix<f64>)> {
    let n = metric.n;
    let conn = christoffel(metric, q)?;
    let (ginv, _) = metric.inverse_at(q)?;
    let s = sym_cov_derivative_with(&conn, l, q);
    let mut psi = 0.0;
    for a in 0..n {
        for b in 0..n {
            psi += ginv[(a, b)] * s[(a, b)];
        }
    }
    psi /= n as f64;
    let g = metric.value(q);
    let residual = &s - &(g * psi);
    Ok((psi, residual))
}

/// Associated vector of a symmetric tensor treated as a CKT candidate:
/// u_a = (U_{;a} + 2 U^b_{a;b}) / (m + 2), computed from the covariant
/// derivative of U (metric compatibility turns trace derivatives into
/// contractions of U_{ab;c}).
pub fn ckt_associated_vector(
    metric: &MetricSpec,
    u_field: &dyn Sym2Field,
    q: &[f64],
) -> Result<Vec<f64>> {
    let n = metric.n;
    let conn = christoffel(metric, q)?;
    let (ginv, _) = metric.inverse_at(q)?;
    let d = cov_derivative_tensor2_with(&conn, u_field, q);
    Ok(associated_vector_from_derivative(&d, &ginv, n))
}

fn associated_vector_from_derivative(d: &Tensor3, ginv: &DMatrix<f64>, n: usize) -> Vec<f64> {
    (0..n)
        .map(|a| {
            let mut trace_grad = 0.0; // gamma^{bc} U_{bc;a}
            let mut div = 0.0; // gamma^{bc} U_{ca;b}
            for b in 0..n {
                for c in 0..n {
                    trace_grad += ginv[(b, c)] * d.get(b, c, a);
                    div += ginv[(b, c)] * d.get(c, a, b);
                }
            }
            (trace_grad + 2.0 * div) / (n as f64 + 2.0)
        })
        .collect()
}

/// The symmetrized defect U_(ab;c) - u_(a gamma_bc) with u from
/// [`ckt_associated_vector`]; identically zero exactly when U is a CKT. The
/// expression is linear in U for fixed metric.
pub fn ckt_defect_tensor(
    metric: &MetricSpec,
    u_field: &dyn Sym2Field,
    q: &[f64],
) -> Result<Tensor3> {
    let n = metric.n;
    let conn = christoffel(metric, q)?;
    let (ginv, _) = metric.inverse_at(q)?;
    let d = cov_derivative_tensor2_with(&conn, u_field, q);
    let u = associated_vector_from_derivative(&d, &ginv, n);
    let g = metric.value(q);
    let mut out = Tensor3::zeros(n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let lhs = (d.get(a, b, c) + d.get(b, c, a) + d.get(c, a, b)) / 3.0;
                let rhs = (u[a] * g[(b, c)] + u[b] * g[(c, a)] + u[c] * g[(a, b)]) / 3.0;
                out.set(a, b, c, lhs - rhs);
            }
        }
    }
    Ok(out)
}

/// CKT residual at a point: Frobenius norm of the defect tensor. Zero
/// certifies a CKT.
pub fn ckt_residual(metric: &MetricSpec, u_field: &dyn Sym2Field, q: &[f64]) -> Result<f64> {
    Ok(ckt_defect_tensor(metric, u_field, q)?.frobenius())
}

/// Residual of the reducible-CKT condition for L_(a;b): the cyclic
/// symmetrization of (L_(a;b))_{;c} against Y_(a gamma_bc), with Y computed
/// pointwise. Returns (residual, Y).
pub fn reducible_ckt_residual(
    metric: &MetricSpec,
    l: &dyn CovectorField,
    q: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let field = SymCovDerivField {
        metric: metric.clone(),
        l: DynCov(l),
    };
    // SymCovDerivField borrows `l`; evaluate residual inline.
    let n = metric.n;
    let conn = christoffel(metric, q)?;
    let (ginv, _) = metric.inverse_at(q)?;
    let d = cov_derivative_tensor2_with(&conn, &field, q);
    let y = associated_vector_from_derivative(&d, &ginv, n);
    let g = metric.value(q);
    let mut sum = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let lhs = (d.get(a, b, c) + d.get(b, c, a) + d.get(c, a, b)) / 3.0;
                let rhs = (y[a] * g[(b, c)] + y[b] * g[(c, a)] + y[c] * g[(a, b)]) / 3.0;
                let t = lhs - rhs;
                sum += t * t;
            }
        }
    }
    Ok((sum.sqrt(), y))
}

struct DynCov<'a>(&'a dyn CovectorField);

/// L_(a;b) of a covector exposed as a symmetric tensor field. Values need
/// first partials of L; first partials need second partials of L and the
/// connection gradient, so the field is one derivative order below L.
pub struct SymCovDerivField<C> {
    pub metric: MetricSpec,
    pub l: C,
}

impl<C: AsCovector + Send + Sync> Sym2Field for SymCovDerivField<C> {
    fn dim(&self) -> usize {
        self.metric.n
    }
    fn component(&self, q: &[f64], a: usize, b: usize) -> f64 {
        let l = self.l.as_cov();
        let conn = christoffel(&self.metric, q).expect("singular metric in SymCovDerivField");
        let n = self.metric.n;
        let sym = 0.5 * (l.partial(q, a, b) + l.partial(q, b, a));
        let conn_term: f64 = (0..n)
            .map(|c| conn.gamma.get(c, a, b) * l.component(q, c))
            .sum();
        sym - conn_term
    }
    fn partial(&self, q: &[f64], a: usize, b: usize, i: usize) -> f64 {
        let l = self.l.as_cov();
        let conn = christoffel(&self.metric, q).expect("singular metric in SymCovDerivField");
        let n = self.metric.n;
        let sym = 0.5 * (l.partial2(q, a, b, i) + l.partial2(q, b, a, i));
        let mut conn_term = 0.0;
        for c in 0..n {
            conn_term += conn.dgamma.get(c, a, b, i) * l.component(q, c)
                + conn.gamma.get(c, a, b) * l.partial(q, c, i);
        }
        sym - conn_term
    }
    fn partial2(&self, _q: &[f64], _a: usize, _b: usize, _i: usize, _j: usize) -> f64 {
        panic!("SymCovDerivField: second derivative needs third partials of L")
    }
    fn domain(&self) -> crate::field::Domain {
        self.metric.domain().intersect(&self.l.as_cov().domain())
    }
    fn derivative_order(&self) -> u8 {
        self.l.as_cov().derivative_order().saturating_sub(1)
    }
}

pub trait AsCovector {
    fn as_cov(&self) -> &dyn CovectorField;
}

impl AsCovector for Arc<dyn CovectorField> {
    fn as_cov(&self) -> &dyn CovectorField {
        self.as_ref()
    }
}

impl<'a> AsCovector for DynCov<'a> {
    fn as_cov(&self) -> &dyn CovectorField {
        self.0
    }
}

// ---------------------------------------------------------------------------
// Construction: CKTs out of CKVs
// ---------------------------------------------------------------------------

/// U_ab = f gamma_ab + c^{KL} X_K(a X_|L|b) with associated vector
/// u_a = f_,a + c^{KL} (psi_K X_La + psi_L X_Ka), summation over K <= L.
/// `coeffs[(k, l)]` indexes the upper-triangular coefficient matrix.
pub fn ckt_from_ckvs(
    metric: &MetricSpec,
    f: Arc<dyn ScalarField>,
    ckvs: &[CkvCatalogEntry],
    coeffs: &[((usize, usize), f64)],
    cfg: &CertConfig,
) -> Result<SymmetryObject> {
    for e in ckvs {
        if e.metric_family != metric.id {
            return Err(Error::MixedMetric(
                metric.id.clone(),
                e.metric_family.clone(),
            ));
        }
    }

    let n = metric.n;
    let mut tensor_terms: Vec<(f64, Arc<dyn Sym2Field>)> = vec![(
        1.0,
        Arc::new(crate::field::ScaledSym2 {
            s: f.clone(),
            t: metric.g.clone(),
        }),
    )];
    let mut vec_terms: Vec<(f64, Arc<dyn CovectorField>)> =
        vec![(1.0, Arc::new(GradCovector { base: f.clone() }))];

    for &((k, l), c) in coeffs {
        if c == 0.0 {
            continue;
        }
        let (xk, xl) = (&ckvs[k], &ckvs[l]);
        tensor_terms.push((
            c,
            Arc::new(SymProduct {
                x: xk.vector.clone(),
                y: xl.vector.clone(),
            }),
        ));
        // psi_K X_L + psi_L X_K, assembled component-wise.
        let comps: Vec<Arc<dyn ScalarField>> = (0..n)
            .map(|a| {
                lin_comb(vec![
                    (
                        1.0,
                        product(xk.conformal_factor.clone(), component_field(&xl.vector, a)),
                    ),
                    (
                        1.0,
                        product(xl.conformal_factor.clone(), component_field(&xk.vector, a)),
                    ),
                ])
            })
            .collect();
        vec_terms.push((c, crate::field::covector_from_components(comps)));
    }

    let tensor: Arc<dyn Sym2Field> = Arc::new(Sym2LinComb {
        terms: tensor_terms,
        dim: n,
    });
    let associated_vector: Arc<dyn CovectorField> = Arc::new(CovLinComb {
        terms: vec_terms,
        dim: n,
    });

    let bx = catalog::sample_box_for(metric);
    let pts = sample_points(&bx, &metric.domain(), cfg.n_points, cfg.seed);
    let certificate = Certificate::sweep(&pts, |q| {
        ckt_residual(metric, tensor.as_ref(), q).unwrap_or(f64::INFINITY)
    });

    Ok(SymmetryObject {
        kind: SymmetryKind::Ckt2,
        name: "ckt-from-ckvs".into(),
        metric_family: metric.id.clone(),
        covector: None,
        tensor: Some(tensor),
        conformal_factor: None,
        associated_vector: Some(associated_vector),
        certificate,
    })
}

/// One component of a covector, as a scalar field.
pub fn component_field(v: &Arc<dyn CovectorField>, a: usize) -> Arc<dyn ScalarField> {
    struct Comp {
        v: Arc<dyn CovectorField>,
        a: usize,
    }
    impl ScalarField for Comp {
        fn dim(&self) -> usize {
            self.v.dim()
        }
        fn value(&self, q: &[f64]) -> f64 {
            self.v.component(q, self.a)
        }
        fn partial(&self, q: &[f64], i: usize) -> f64 {
            self.v.partial(q, self.a, i)
        }
        fn partial2(&self, q: &[f64], i: usize, j: usize) -> f64 {
            self.v.partial2(q, self.a, i, j)
        }
        fn domain(&self) -> crate::field::Domain {
            self.v.domain()
        }
        fn derivative_order(&self) -> u8 {
            self.v.derivative_order()
        }
    }
    Arc::new(Comp { v: v.clone(), a })
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize)]
pub struct CktClassification {
    pub is_kt: bool,
    pub is_proper: bool,
    pub is_hkt: bool,
    pub is_tracefree: bool,
    pub is_gradient_type: bool,
    pub max_assoc_norm: f64,
}

/// Sampled classification of a CKT per the standard taxonomy: Killing tensor
/// (u = 0), proper (u != 0), homothetic (u a KV), trace-free, gradient type
/// (curl of u = 0; a necessary condition only in non-simply-connected
/// domains).
pub fn classify_ckt(
    metric: &MetricSpec,
    obj: &SymmetryObject,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<CktClassification> {
    let tensor = obj
        .tensor
        .as_ref()
        .ok_or_else(|| Error::BadConfig("classify_ckt needs a tensor object".into()))?;
    let n = metric.n;

    let mut max_assoc: f64 = 0.0;
    let mut max_trace: f64 = 0.0;
    let mut max_curl: f64 = 0.0;
    let mut max_kv_res: f64 = 0.0;

    for q in points {
        let u = ckt_associated_vector(metric, tensor.as_ref(), q)?;
        let unorm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        max_assoc = max_assoc.max(unorm);

        let (ginv, _) = metric.inverse_at(q)?;
        let um = tensor.matrix(q);
        let mut trace = 0.0;
        for a in 0..n {
            for b in 0..n {
                trace += ginv[(a, b)] * um[(a, b)];
            }
        }
        max_trace = max_trace.max(trace.abs());

        if let Some(uf) = &obj.associated_vector {
            // Gradient test u_{[a,b]} = 0 and KV test on the closed-form
            // associated vector.
            for a in 0..n {
                for b in (a + 1)..n {
                    let curl = uf.partial(q, a, b) - uf.partial(q, b, a);
                    max_curl = max_curl.max(curl.abs());
                }
            }
            let (_psi, res) = ckv_residual(metric, uf.as_ref(), q)?;
            // KV means the full symmetrized derivative vanishes, i.e.
            // residual with psi forced to zero.
            let s = sym_cov_derivative_with(&christoffel(metric, q)?, uf.as_ref(), q);
            let kv_res = s.norm();
            let _ = res;
            max_kv_res = max_kv_res.max(kv_res);
        }
    }

    let is_kt = max_assoc <= tol;
    Ok(CktClassification {
        is_kt,
        is_proper: !is_kt,
        is_hkt: !is_kt && obj.associated_vector.is_some() && max_kv_res <= tol,
        is_tracefree: max_trace <= tol,
        is_gradient_type: obj.associated_vector.is_some() && max_curl <= tol,
        max_assoc_norm: max_assoc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CkvClass {
    Killing,
    Homothetic,
    SpecialConformal,
    ProperConformal,
}

/// Classify a certified CKV from sampled conformal-factor behaviour:
/// psi = 0 (KV), psi constant (HV), psi_{;ab} = 0 with psi non-constant
/// (special CKV), otherwise proper. The SCKV test needs second partials of
/// psi and is skipped (classified proper) when the factor field cannot
/// provide them.
pub fn classify_ckv(
    metric: &MetricSpec,
    psi: &Arc<dyn ScalarField>,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<CkvClass> {
    let vals: Vec<f64> = points.iter().map(|q| psi.value(q)).collect();
    let max_abs = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max_abs <= tol {
        return Ok(CkvClass::Killing);
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let spread = vals.iter().fold(0.0_f64, |m, v| m.max((v - mean).abs()));
    if spread <= tol {
        return Ok(CkvClass::Homothetic);
    }
    if psi.derivative_order() >= 2 {
        let mut max_hess: f64 = 0.0;
        for q in points {
            let h = scalar_second_cov_derivative(metric, psi.as_ref(), q)?;
            max_hess = max_hess.max(h.norm());
        }
        if max_hess <= tol {
            return Ok(CkvClass::SpecialConformal);
        }
    }
    Ok(CkvClass::ProperConformal)
}

// ---------------------------------------------------------------------------
// Catalogs and family residuals
// ---------------------------------------------------------------------------

/// Catalog family selector.
pub enum CkvFamily {
    E2,
    /// Off-diagonal family with caller-supplied F1(y), F2(x).
    OffDiagonal {
        metric: MetricSpec,
        f: Arc<dyn ScalarField>,
        f1: Func1,
        f2: Func1,
    },
    /// Constant-curvature member: its three Killing vectors.
    ConstantCurvature {
        k: f64,
    },
}

pub fn ckv_catalog(family: CkvFamily) -> Result<Vec<CkvCatalogEntry>> {
    match family {
        CkvFamily::E2 => Ok(catalog::e2_catalog()),
        CkvFamily::OffDiagonal { metric, f, f1, f2 } => Ok(vec![catalog::off_diagonal_ckv(
            &metric, f, f1, f2, "family-ckv",
        )]),
        CkvFamily::ConstantCurvature { k } => {
            if k == 0.0 {
                return Err(Error::UnknownFamily("const-curvature with k = 0".into()));
            }
            Ok(catalog::constant_curvature_kvs(k))
        }
    }
}

/// Killing-vector condition of the off-diagonal family:
/// F2 f_x + F1 f_y + f (F1' + F2'). Zero certifies a KV.
pub fn kv_condition_residual(
    f: &dyn ScalarField,
    f1: &Func1,
    f2: &Func1,
    q: &[f64],
) -> f64 {
    let (x, y) = (q[0], q[1]);
    f2.eval(x) * f.partial(q, 0)
        + f1.eval(y) * f.partial(q, 1)
        + f.value(q) * (f1.d1(y) + f2.d1(x))
}

/// Integrability PDE of the diagonal CKT ansatz on the off-diagonal family:
/// f_yy A1 - f_xx A2 + 3/2 (f_y A1' - f_x A2') + f/2 (A1'' - A2'').
/// Zero means a consistent G exists locally.
pub fn g_integrability_pde_residual(
    f: &dyn ScalarField,
    a1: &Func1,
    a2: &Func1,
    q: &[f64],
) -> f64 {
    let (x, y) = (q[0], q[1]);
    f.partial2(q, 1, 1) * a1.eval(y) - f.partial2(q, 0, 0) * a2.eval(x)
        + 1.5 * (f.partial(q, 1) * a1.d1(y) - f.partial(q, 0) * a2.d1(x))
        + 0.5 * f.value(q) * (a1.d2(y) - a2.d2(x))
}

/// Certify a catalog CKV entry over sampled points.
pub fn certify_ckv(
    metric: &MetricSpec,
    entry: &CkvCatalogEntry,
    cfg: &CertConfig,
) -> Result<SymmetryObject> {
    let bx = catalog::sample_box_for(metric);
    let dom = metric.domain().intersect(&entry.vector.domain());
    let pts = sample_points(&bx, &dom, cfg.n_points, cfg.seed);
    let certificate = Certificate::sweep(&pts, |q| {
        ckv_residual(metric, entry.vector.as_ref(), q)
            .map(|(_, r)| r.norm())
            .unwrap_or(f64::INFINITY)
    });
    Ok(SymmetryObject {
        kind: SymmetryKind::Ckv,
        name: entry.name.clone(),
        metric_family: entry.metric_family.clone(),
        covector: Some(entry.vector.clone()),
        tensor: None,
        conformal_factor: Some(entry.conformal_factor.clone()),
        associated_vector: None,
        certificate,
    })
}

/// Certify an arbitrary symmetric tensor as a CKT, attaching the
/// caller-supplied closed-form associated vector when available.
pub fn certify_ckt(
    metric: &MetricSpec,
    name: &str,
    tensor: Arc<dyn Sym2Field>,
    associated_vector: Option<Arc<dyn CovectorField>>,
    cfg: &CertConfig,
) -> Result<SymmetryObject> {
    let bx = catalog::sample_box_for(metric);
    let dom = metric.domain().intersect(&tensor.domain());
    let pts = sample_points(&bx, &dom, cfg.n_points, cfg.seed);
    let certificate = Certificate::sweep(&pts, |q| {
        ckt_residual(metric, tensor.as_ref(), q).unwrap_or(f64::INFINITY)
    });
    Ok(SymmetryObject {
        kind: SymmetryKind::Ckt2,
        name: name.into(),
        metric_family: metric.id.clone(),
        covector: None,
        tensor: Some(tensor),
        conformal_factor: None,
        associated_vector,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ComponentSym2;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn e2_entry(name: &str) -> CkvCatalogEntry {
        catalog::e2_catalog()
            .into_iter()
            .find(|e| e.name == name)
            .unwrap()
    }

    #[test]
    fn hv_residual_and_factor() {
        let m = catalog::euclidean(2);
        let hv = e2_entry("hv");
        let (psi, res) = ckv_residual(&m, hv.vector.as_ref(), &[0.4, -1.1]).unwrap();
        assert_relative_eq!(psi, 1.0);
        assert!(res.norm() < 1e-14);
    }

    #[test]
    fn sckv_b2_factor_is_y() {
        let m = catalog::euclidean(2);
        let b2 = e2_entry("sckv-b2");
        let q = [0.8, -0.6];
        let (psi, res) = ckv_residual(&m, b2.vector.as_ref(), &q).unwrap();
        assert_relative_eq!(psi, q[1]);
        assert!(res.norm() < 1e-14);
    }

    #[test]
    fn constant_curvature_kvs_have_zero_factor() {
        let m = catalog::constant_curvature(1.0);
        for e in catalog::constant_curvature_kvs(1.0) {
            for q in [[0.5, 0.9], [1.2, 0.4]] {
                let (psi, res) = ckv_residual(&m, e.vector.as_ref(), &q).unwrap();
                assert_abs_diff_eq!(psi, 0.0, epsilon = 1e-11);
                assert!(res.norm() < 1e-10, "{} residual {}", e.name, res.norm());
            }
        }
    }

    #[test]
    fn metric_is_improper_ckt_with_zero_vector() {
        let m = catalog::constant_curvature(2.0);
        let q = [0.7, 0.8];
        let u = ckt_associated_vector(&m, m.g.as_ref(), &q).unwrap();
        assert!(u.iter().all(|c| c.abs() < 1e-12));
        assert!(ckt_residual(&m, m.g.as_ref(), &q).unwrap() < 1e-12);
    }

    #[test]
    fn gradient_ckt_vector_is_gradient() {
        // U = f g with f = x on E^2: u_a = f_,a = (1, 0).
        let m = catalog::euclidean(2);
        let f: Arc<dyn ScalarField> = Arc::new(crate::field::CoordScalar::new(2, 0));
        let u_field = crate::field::ScaledSym2 {
            s: f,
            t: m.g.clone(),
        };
        let u = ckt_associated_vector(&m, &u_field, &[1.3, 2.4]).unwrap();
        assert_relative_eq!(u[0], 1.0, max_relative = 1e-12);
        assert_abs_diff_eq!(u[1], 0.0, epsilon = 1e-13);
    }

    #[test]
    fn off_diagonal_ckt_matches_closed_form_vector() {
        let f = catalog::scalar_no_kv_f();
        let m = catalog::no_kv_metric();
        let ckt = catalog::off_diagonal_ckt(f, Func1::exp_scaled(1.0, -2.0), Func1::zero());
        let q = [2.5, -0.3];
        let computed = ckt_associated_vector(&m, ckt.tensor.as_ref(), &q).unwrap();
        let closed = ckt.associated_vector.values(&q);
        for a in 0..2 {
            assert_relative_eq!(computed[a], closed[a], max_relative = 1e-9);
        }
        assert!(ckt_residual(&m, ckt.tensor.as_ref(), &q).unwrap() < 1e-8);
    }

    #[test]
    fn reducible_ckt_from_sckv() {
        // L = B_(1) on E^2: L_(a;b) = x delta_ab is a CKT with Y = (1, 0).
        let m = catalog::euclidean(2);
        let b1 = e2_entry("sckv-b1");
        let (res, y) = reducible_ckt_residual(&m, b1.vector.as_ref(), &[1.1, 0.3]).unwrap();
        assert!(res < 1e-13);
        assert_relative_eq!(y[0], 1.0, max_relative = 1e-12);
        assert_abs_diff_eq!(y[1], 0.0, epsilon = 1e-13);
    }

    #[test]
    fn kv_condition_residual_examples() {
        // Constant-curvature f with the KV-producing polynomials: zero.
        let f = catalog::scalar_const_curvature_f(1.0);
        let f1 = Func1::poly(vec![0.0, 1.0]);
        let f2 = Func1::poly(vec![0.0, 1.0]);
        assert_abs_diff_eq!(
            kv_condition_residual(f.as_ref(), &f1, &f2, &[0.6, 0.9]),
            0.0,
            epsilon = 1e-12
        );
        // F1 = F2 = 0: trivially zero.
        assert_eq!(
            kv_condition_residual(f.as_ref(), &Func1::zero(), &Func1::zero(), &[0.6, 0.9]),
            0.0
        );
    }

    #[test]
    fn no_kv_metric_rejects_low_degree_kvs() {
        // For the no-KV f, no polynomial pair of degree <= 2 satisfies the KV
        // condition on a grid.
        let f = catalog::scalar_no_kv_f();
        let coeff_sets: Vec<(Vec<f64>, Vec<f64>)> = vec![
            (vec![1.0], vec![0.0]),
            (vec![0.0, 1.0], vec![0.0, 1.0]),
            (vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0]),
            (vec![1.0, 1.0, 1.0], vec![1.0, -1.0, 0.5]),
        ];
        for (c1, c2) in coeff_sets {
            let f1 = Func1::poly(c1);
            let f2 = Func1::poly(c2);
            let mut max_res = 0.0_f64;
            for i in 0..5 {
                for j in 0..5 {
                    let q = [2.0 + 0.3 * i as f64, -1.0 + 0.4 * j as f64];
                    max_res = max_res.max(kv_condition_residual(f.as_ref(), &f1, &f2, &q).abs());
                }
            }
            assert!(max_res > 1e-3, "unexpected KV for no-KV metric");
        }
    }

    #[test]
    fn g_integrability_pde_examples() {
        // No-KV metric with A1 = e^{-2y}, A2 = 0: identically zero.
        let f = catalog::scalar_no_kv_f();
        let a1 = Func1::exp_scaled(1.0, -2.0);
        assert_abs_diff_eq!(
            g_integrability_pde_residual(f.as_ref(), &a1, &Func1::zero(), &[2.7, 0.2]),
            0.0,
            epsilon = 1e-9
        );
        // Toda pair.
        let p = catalog::TodaParams::default();
        let ft = catalog::scalar_toda_f(&p);
        let a2 = Func1::exp_scaled(1.0, -std::f64::consts::SQRT_2 * p.b1);
        assert_abs_diff_eq!(
            g_integrability_pde_residual(ft.as_ref(), &Func1::zero(), &a2, &[0.4, -0.3]),
            0.0,
            epsilon = 1e-12
        );
        // Random coefficients: generically non-zero.
        let bad = g_integrability_pde_residual(
            ft.as_ref(),
            &Func1::poly(vec![0.3, 1.0]),
            &Func1::poly(vec![-0.2, 0.7]),
            &[0.4, -0.3],
        );
        assert!(bad.abs() > 1e-3);
    }

    #[test]
    fn classify_identity_tensor_as_kt() {
        let m = catalog::euclidean(2);
        let ones: Vec<Arc<dyn ScalarField>> = (0..2)
            .map(|_| Arc::new(crate::field::ConstScalar::new(2, 1.0)) as Arc<dyn ScalarField>)
            .collect();
        let delta: Arc<dyn Sym2Field> = Arc::new(ComponentSym2::diagonal(ones));
        let obj = certify_ckt(&m, "delta", delta, None, &CertConfig::default()).unwrap();
        assert!(obj.is_certified(1e-10));
        let pts = sample_points(
            &catalog::sample_box_for(&m),
            &m.domain(),
            50,
            1,
        );
        let class = classify_ckt(&m, &obj, &pts, 1e-10).unwrap();
        assert!(class.is_kt);
        assert!(!class.is_proper);
    }
}
