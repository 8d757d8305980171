//! Pointwise Riemannian geometry of the kinetic metric: Christoffel symbols,
//! covariant derivatives and the 2D Ricci scalar.
//!
//! Everything here is an evaluator, not a symbolic object: operations take a
//! metric and a point and return numbers. Covariant components are stored;
//! indices are raised with the per-point metric inverse.

use crate::error::{Error, Result};
use crate::field::{CovectorField, Domain, Sym2Field};
use nalgebra::DMatrix;
use std::sync::Arc;

/// Determinant threshold below which a metric is treated as singular.
pub const SINGULAR_DET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SignatureHint {
    Riemannian,
    Lorentzian,
    Unknown,
}

/// Kinetic metric: a symmetric rank-2 field plus dimension and validity
/// domain.
#[derive(Clone)]
pub struct MetricSpec {
    pub g: Arc<dyn Sym2Field>,
    pub n: usize,
    pub signature_hint: SignatureHint,
    /// Catalog identifier; used to reject mixing symmetry objects across
    /// metrics.
    pub id: String,
}

impl MetricSpec {
    pub fn new(id: &str, g: Arc<dyn Sym2Field>, signature_hint: SignatureHint) -> Self {
        let n = g.dim();
        MetricSpec {
            g,
            n,
            signature_hint,
            id: id.to_string(),
        }
    }

    pub fn domain(&self) -> Domain {
        self.g.domain()
    }

    pub fn value(&self, q: &[f64]) -> DMatrix<f64> {
        self.g.matrix(q)
    }

    /// Metric inverse and determinant at a point.
    pub fn inverse_at(&self, q: &[f64]) -> Result<(DMatrix<f64>, f64)> {
        let g = self.g.matrix(q);
        let det = g.determinant();
        if det.abs() < SINGULAR_DET_TOL {
            return Err(Error::SingularMetric {
                point: q.to_vec(),
                det,
            });
        }
        let inv = g.clone().try_inverse().ok_or(Error::SingularMetric {
            point: q.to_vec(),
            det,
        })?;
        Ok((inv, det))
    }

    /// gamma(u, v) at a point.
    pub fn inner(&self, q: &[f64], u: &[f64], v: &[f64]) -> f64 {
        let g = self.g.matrix(q);
        let mut s = 0.0;
        for a in 0..self.n {
            for b in 0..self.n {
                s += g[(a, b)] * u[a] * v[b];
            }
        }
        s
    }

    /// Raise a covector: V^a = g^{ab} V_b.
    pub fn raise(&self, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let (inv, _) = self.inverse_at(q)?;
        Ok((0..self.n)
            .map(|a| (0..self.n).map(|b| inv[(a, b)] * v[b]).sum())
            .collect())
    }
}

/// Rank-3 array indexed (a, b, c).
#[derive(Debug, Clone)]
pub struct Tensor3 {
    pub n: usize,
    d: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            d: vec![0.0; n * n * n],
        }
    }
    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.d[(a * self.n + b) * self.n + c]
    }
    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.d[(a * self.n + b) * self.n + c] = v;
    }
    pub fn frobenius(&self) -> f64 {
        self.d.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Rank-4 array indexed (a, b, c, d).
#[derive(Debug, Clone)]
pub struct Tensor4 {
    pub n: usize,
    d: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Tensor4 {
            n,
            d: vec![0.0; n * n * n * n],
        }
    }
    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, e: usize) -> f64 {
        self.d[((a * self.n + b) * self.n + c) * self.n + e]
    }
    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, e: usize, v: f64) {
        self.d[((a * self.n + b) * self.n + c) * self.n + e] = v;
    }
}

/// Christoffel symbols and their first partials at a point.
#[derive(Debug, Clone)]
pub struct ConnectionEval {
    pub point: Vec<f64>,
    /// Gamma^a_{bc}, symmetric in (b, c).
    pub gamma: Tensor3,
    /// d_d Gamma^a_{bc}, index order (a, b, c, d).
    pub dgamma: Tensor4,
}

/// Gamma^a_{bc} = 1/2 g^{ad} (g_{db,c} + g_{dc,b} - g_{bc,d}), with first
/// partials from the second metric partials.
pub fn christoffel(metric: &MetricSpec, q: &[f64]) -> Result<ConnectionEval> {
    let n = metric.n;
    let (ginv, _) = metric.inverse_at(q)?;
    let g = &metric.g;

    // dg[c] = matrix of g_{ab,c}; d2g[(c,d)] = matrix of g_{ab,cd}.
    let dg: Vec<DMatrix<f64>> = (0..n).map(|c| g.partial_matrix(q, c)).collect();
    let d2g: Vec<Vec<DMatrix<f64>>> = (0..n)
        .map(|c| {
            (0..n)
                .map(|d| DMatrix::from_fn(n, n, |a, b| g.partial2(q, a, b, c, d)))
                .collect()
        })
        .collect();

    // dginv[c] = -g^{-1} dg[c] g^{-1}
    let dginv: Vec<DMatrix<f64>> = (0..n).map(|c| -(&ginv * &dg[c] * &ginv)).collect();

    let mut gamma = Tensor3::zeros(n);
    let mut dgamma = Tensor4::zeros(n);
    for a in 0..n {
        for b in 0..n {
            for c in b..n {
                let mut s = 0.0;
                for d in 0..n {
                    s += ginv[(a, d)] * (dg[c][(d, b)] + dg[b][(d, c)] - dg[d][(b, c)]);
                }
                gamma.set(a, b, c, 0.5 * s);
                gamma.set(a, c, b, 0.5 * s);

                for e in 0..n {
                    let mut t = 0.0;
                    for d in 0..n {
                        t += dginv[e][(a, d)] * (dg[c][(d, b)] + dg[b][(d, c)] - dg[d][(b, c)])
                            + ginv[(a, d)]
                                * (d2g[c][e][(d, b)] + d2g[b][e][(d, c)] - d2g[d][e][(b, c)]);
                    }
                    dgamma.set(a, b, c, e, 0.5 * t);
                    dgamma.set(a, c, b, e, 0.5 * t);
                }
            }
        }
    }

    Ok(ConnectionEval {
        point: q.to_vec(),
        gamma,
        dgamma,
    })
}

/// Symmetrized covariant derivative of a covector:
/// L_(a;b) = 1/2 (L_{a,b} + L_{b,a}) - Gamma^c_{ab} L_c.
pub fn sym_cov_derivative(
    metric: &MetricSpec,
    l: &dyn CovectorField,
    q: &[f64],
) -> Result<DMatrix<f64>> {
    let conn = christoffel(metric, q)?;
    Ok(sym_cov_derivative_with(&conn, l, q))
}

/// Same as [`sym_cov_derivative`] with a precomputed connection.
pub fn sym_cov_derivative_with(
    conn: &ConnectionEval,
    l: &dyn CovectorField,
    q: &[f64],
) -> DMatrix<f64> {
    let n = conn.gamma.n;
    let lv: Vec<f64> = l.values(q);
    DMatrix::from_fn(n, n, |a, b| {
        let sym = 0.5 * (l.partial(q, a, b) + l.partial(q, b, a));
        let conn_term: f64 = (0..n).map(|c| conn.gamma.get(c, a, b) * lv[c]).sum();
        sym - conn_term
    })
}

/// Covariant derivative of a symmetric rank-2 tensor:
/// C_{ab;c} = C_{ab,c} - Gamma^d_{ca} C_{db} - Gamma^d_{cb} C_{ad}.
pub fn cov_derivative_tensor2(
    metric: &MetricSpec,
    c_field: &dyn Sym2Field,
    q: &[f64],
) -> Result<Tensor3> {
    let conn = christoffel(metric, q)?;
    Ok(cov_derivative_tensor2_with(&conn, c_field, q))
}

pub fn cov_derivative_tensor2_with(
    conn: &ConnectionEval,
    c_field: &dyn Sym2Field,
    q: &[f64],
) -> Tensor3 {
    let n = conn.gamma.n;
    let cm = c_field.matrix(q);
    let mut out = Tensor3::zeros(n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut v = c_field.partial(q, a, b, c);
                for d in 0..n {
                    v -= conn.gamma.get(d, c, a) * cm[(d, b)] + conn.gamma.get(d, c, b) * cm[(a, d)];
                }
                out.set(a, b, c, v);
            }
        }
    }
    out
}

/// Second covariant derivative of a scalar: s_{;ab} = s_{,ab} - Gamma^c_{ab} s_{,c}.
pub fn scalar_second_cov_derivative(
    metric: &MetricSpec,
    s: &dyn crate::field::ScalarField,
    q: &[f64],
) -> Result<DMatrix<f64>> {
    let conn = christoffel(metric, q)?;
    let n = metric.n;
    let grad = s.gradient(q);
    Ok(DMatrix::from_fn(n, n, |a, b| {
        let mut v = s.partial2(q, a, b);
        for c in 0..n {
            v -= conn.gamma.get(c, a, b) * grad[c];
        }
        v
    }))
}

/// 2D Ricci scalar, convention R = 2 R_{1212} / det(gamma) with
/// gamma_{abcd} = gamma_{ac} gamma_{bd} - gamma_{ad} gamma_{bc}. For the
/// off-diagonal family gamma = f [[0,1],[1,0]] this reproduces
/// R_{1212} = f_{,xy} - f_{,x} f_{,y} / f.
pub fn ricci_scalar_2d(metric: &MetricSpec, q: &[f64]) -> Result<f64> {
    if metric.n != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: metric.n,
        });
    }
    let conn = christoffel(metric, q)?;
    let g = metric.g.matrix(q);
    let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
    if det.abs() < SINGULAR_DET_TOL {
        return Err(Error::SingularMetric {
            point: q.to_vec(),
            det,
        });
    }

    // R^e_{212}: curvature with (b, c, d) = (2, 1, 2) in 1-based labels.
    let (b, c, d) = (1usize, 0usize, 1usize);
    let mut r1212 = 0.0;
    for e in 0..2 {
        let mut r_ebcd = conn.dgamma.get(e, b, d, c) - conn.dgamma.get(e, b, c, d);
        for f in 0..2 {
            r_ebcd += conn.gamma.get(e, c, f) * conn.gamma.get(f, b, d)
                - conn.gamma.get(e, d, f) * conn.gamma.get(f, b, c);
        }
        r1212 += g[(0, e)] * r_ebcd;
    }
    Ok(2.0 * r1212 / det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn euclidean_christoffels_vanish() {
        let m = catalog::euclidean(2);
        let conn = christoffel(&m, &[0.3, -1.2]).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    assert_eq!(conn.gamma.get(a, b, c), 0.0);
                }
            }
        }
    }

    #[test]
    fn off_diagonal_family_christoffels() {
        // Generic f: only Gamma^1_11 = f_x/f and Gamma^2_22 = f_y/f survive.
        let f = catalog::scalar_no_kv_f();
        let m = catalog::off_diagonal(f.clone(), "test-2d1");
        let q = [1.0, 2.0];
        let conn = christoffel(&m, &q).unwrap();
        let (fx, fy, fv) = (f.partial(&q, 0), f.partial(&q, 1), f.value(&q));
        assert_relative_eq!(conn.gamma.get(0, 0, 0), fx / fv, max_relative = 1e-12);
        assert_relative_eq!(conn.gamma.get(1, 1, 1), fy / fv, max_relative = 1e-12);
        for (a, b, c) in [(0, 0, 1), (0, 1, 1), (1, 0, 0), (1, 0, 1)] {
            assert_abs_diff_eq!(conn.gamma.get(a, b, c), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_curvature_connection_value() {
        // f = k/(x+y)^2 at (1,1): Gamma^1_11 = -2/(x+y) = -1.
        let m = catalog::constant_curvature(1.0);
        let conn = christoffel(&m, &[1.0, 1.0]).unwrap();
        assert_relative_eq!(conn.gamma.get(0, 0, 0), -1.0, max_relative = 1e-12);
    }

    #[test]
    fn singular_metric_detected() {
        let m = catalog::flat_lorentzian_x();
        // f = x vanishes at x = 0 so the metric degenerates there.
        let err = christoffel(&m, &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::SingularMetric { .. }));
    }

    #[test]
    fn ricci_constant_curvature_and_flat() {
        let m = catalog::constant_curvature(2.0);
        for q in [[0.4, 0.7], [1.0, 1.5], [-0.3, 1.1]] {
            if m.domain().contains(&q, 1e-2) {
                assert_relative_eq!(ricci_scalar_2d(&m, &q).unwrap(), -2.0, max_relative = 1e-10);
            }
        }
        let e2 = catalog::euclidean(2);
        assert_abs_diff_eq!(ricci_scalar_2d(&e2, &[0.2, 0.9]).unwrap(), 0.0);
    }

    #[test]
    fn ricci_no_kv_metric_value() {
        let m = catalog::no_kv_metric();
        // R = -2 / (x^3 (x + e^y)^3) = -0.25 at (1, 0).
        assert_relative_eq!(
            ricci_scalar_2d(&m, &[1.0, 0.0]).unwrap(),
            -0.25,
            max_relative = 1e-11
        );
    }

    #[test]
    fn ricci_rejects_wrong_dimension() {
        let m = catalog::euclidean(3);
        assert!(matches!(
            ricci_scalar_2d(&m, &[0.0, 0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn metric_compatibility_nabla_g_zero() {
        for m in [
            catalog::constant_curvature(1.0),
            catalog::no_kv_metric(),
            catalog::toda_metric(&catalog::TodaParams::default()).unwrap(),
        ] {
            let q = [0.8, 0.6];
            let d = cov_derivative_tensor2(&m, m.g.as_ref(), &q).unwrap();
            assert!(d.frobenius() < 1e-11, "nabla g = {}", d.frobenius());
        }
    }

    #[test]
    fn sym_cov_derivative_homothetic_vector() {
        // E^2, L = (x, y): L_(a;b) = delta_ab.
        let m = catalog::euclidean(2);
        let hv = catalog::e2_catalog()
            .into_iter()
            .find(|e| e.name == "hv")
            .unwrap();
        let s = sym_cov_derivative(&m, hv.vector.as_ref(), &[0.7, -0.2]).unwrap();
        assert_relative_eq!(s[(0, 0)], 1.0);
        assert_relative_eq!(s[(1, 1)], 1.0);
        assert_abs_diff_eq!(s[(0, 1)], 0.0);
    }

    #[test]
    fn sym_cov_derivative_sckv_b1() {
        // E^2, L = B_(1): L_(a;b) = x delta_ab; at (2,3) that is 2 delta_ab.
        let m = catalog::euclidean(2);
        let b1 = catalog::e2_catalog()
            .into_iter()
            .find(|e| e.name == "sckv-b1")
            .unwrap();
        let s = sym_cov_derivative(&m, b1.vector.as_ref(), &[2.0, 3.0]).unwrap();
        assert_relative_eq!(s[(0, 0)], 2.0);
        assert_relative_eq!(s[(1, 1)], 2.0);
        assert_abs_diff_eq!(s[(0, 1)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn cov_derivative_of_scaled_identity_flat() {
        // E^2, C = x * delta_ab: C_{ab;c} = delta_ab delta_c^x.
        use crate::field::{ComponentSym2, CoordScalar};
        use std::sync::Arc;
        let m = catalog::euclidean(2);
        let x: Arc<dyn crate::field::ScalarField> = Arc::new(CoordScalar::new(2, 0));
        let c = ComponentSym2::diagonal(vec![x.clone(), x]);
        let d = cov_derivative_tensor2(&m, &c, &[1.4, 0.2]).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for cc in 0..2 {
                    let expect = if a == b && cc == 0 { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(d.get(a, b, cc), expect, epsilon = 1e-13);
                }
            }
        }
    }
}
