//! Built-in metrics, potentials and symmetry catalogs.
//!
//! Fields here carry hand-coded analytic partials; their validity domains
//! exclude the loci where the defining functions blow up or the metric
//! degenerates (x + y = 0, r = 0, x = 0, x + e^y = 0).

use crate::error::{Error, Result};
use crate::field::{
    product, AnalyticScalar, ComponentCovector, ComponentSym2, ConstScalar, CovectorField, Domain,
    DualScalar, Func1, PartialField, ScalarField, Sym2Field,
};
use crate::geometry::{MetricSpec, SignatureHint};
use crate::sampling::SampleBox;
use std::sync::Arc;

// ---------------------------------------------------------------------------
// Metric families
// ---------------------------------------------------------------------------

pub fn euclidean(n: usize) -> MetricSpec {
    let ones: Vec<Arc<dyn ScalarField>> = (0..n)
        .map(|_| Arc::new(ConstScalar::new(n, 1.0)) as Arc<dyn ScalarField>)
        .collect();
    MetricSpec::new(
        if n == 2 { "e2" } else { "euclidean" },
        Arc::new(ComponentSym2::diagonal(ones)),
        SignatureHint::Riemannian,
    )
}

/// Off-diagonal conformally flat family: gamma = f(x, y) [[0, 1], [1, 0]].
pub fn off_diagonal(f: Arc<dyn ScalarField>, id: &str) -> MetricSpec {
    let zero: Arc<dyn ScalarField> = Arc::new(ConstScalar::new(2, 0.0));
    let g = ComponentSym2::new(2, vec![zero.clone(), f, zero]);
    MetricSpec::new(id, Arc::new(g), SignatureHint::Lorentzian)
}

/// f = k/(x+y)^2 for the constant-curvature member (R = -4/k).
pub fn scalar_const_curvature_f(k: f64) -> Arc<dyn ScalarField> {
    Arc::new(
        AnalyticScalar::new(
            2,
            move |q| k / (q[0] + q[1]).powi(2),
            move |q, _| -2.0 * k / (q[0] + q[1]).powi(3),
            move |q, _, _| 6.0 * k / (q[0] + q[1]).powi(4),
        )
        .with_domain(Domain::excluding(|q| (q[0] + q[1]).abs())),
    )
}

pub fn constant_curvature(k: f64) -> MetricSpec {
    off_diagonal(scalar_const_curvature_f(k), "const-curvature")
}

/// f = -x^3 e^y (x + e^y), the metric without Killing vectors.
pub fn scalar_no_kv_f() -> Arc<dyn ScalarField> {
    Arc::new(
        AnalyticScalar::new(
            2,
            |q| {
                let (x, ey) = (q[0], q[1].exp());
                -(x.powi(4) * ey + x.powi(3) * ey * ey)
            },
            |q, i| {
                let (x, ey) = (q[0], q[1].exp());
                match i {
                    0 => -(4.0 * x.powi(3) * ey + 3.0 * x.powi(2) * ey * ey),
                    _ => -(x.powi(4) * ey + 2.0 * x.powi(3) * ey * ey),
                }
            },
            |q, i, j| {
                let (x, ey) = (q[0], q[1].exp());
                match (i, j) {
                    (0, 0) => -(12.0 * x.powi(2) * ey + 6.0 * x * ey * ey),
                    (1, 1) => -(x.powi(4) * ey + 4.0 * x.powi(3) * ey * ey),
                    _ => -(4.0 * x.powi(3) * ey + 6.0 * x.powi(2) * ey * ey),
                }
            },
        )
        .with_domain(Domain::excluding(|q| {
            q[0].abs().min((q[0] + q[1].exp()).abs())
        })),
    )
}

pub fn no_kv_metric() -> MetricSpec {
    off_diagonal(scalar_no_kv_f(), "no-kv")
}

/// Parameters of the Lorentzian Toda family.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TodaParams {
    pub k1: f64,
    pub k2: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

impl Default for TodaParams {
    fn default() -> Self {
        TodaParams {
            k1: 1.0,
            k2: 1.0,
            b1: 1.0,
            b2: 2.0,
            b3: 1.0,
        }
    }
}

impl TodaParams {
    pub fn validate(&self) -> Result<()> {
        let consts = [
            ("k1", self.k1),
            ("k2", self.k2),
            ("b1", self.b1),
            ("b2", self.b2),
            ("b3", self.b3),
        ];
        for (name, v) in consts {
            if v == 0.0 {
                return Err(Error::DegenerateParams(format!("{name} must be non-zero")));
            }
        }
        if self.b1 == self.b2 {
            return Err(Error::DegenerateParams("b1 must differ from b2".into()));
        }
        Ok(())
    }

    pub fn is_flat(&self) -> bool {
        (self.b3 - 2.0 * (self.b2 - self.b1)).abs() < 1e-12
    }
}

/// f = k1 exp(sqrt2 (b1 x + (b2-b1) y)) + k2 exp((b1 x + b3 y)/sqrt2).
pub fn scalar_toda_f(p: &TodaParams) -> Arc<dyn ScalarField> {
    let s2 = std::f64::consts::SQRT_2;
    let (k1, k2) = (p.k1, p.k2);
    let (a1, c1) = (s2 * p.b1, s2 * (p.b2 - p.b1));
    let (a2, c2) = (p.b1 / s2, p.b3 / s2);
    let terms = move |q: &[f64]| {
        (
            k1 * (a1 * q[0] + c1 * q[1]).exp(),
            k2 * (a2 * q[0] + c2 * q[1]).exp(),
        )
    };
    Arc::new(AnalyticScalar::new(
        2,
        move |q| {
            let (t1, t2) = terms(q);
            t1 + t2
        },
        move |q, i| {
            let (t1, t2) = terms(q);
            match i {
                0 => a1 * t1 + a2 * t2,
                _ => c1 * t1 + c2 * t2,
            }
        },
        move |q, i, j| {
            let (t1, t2) = terms(q);
            let w1 = if i == 0 { a1 } else { c1 } * if j == 0 { a1 } else { c1 };
            let w2 = if i == 0 { a2 } else { c2 } * if j == 0 { a2 } else { c2 };
            w1 * t1 + w2 * t2
        },
    ))
}

pub fn toda_metric(p: &TodaParams) -> Result<MetricSpec> {
    p.validate()?;
    Ok(off_diagonal(scalar_toda_f(p), "toda"))
}

/// f = x; the flat Lorentzian member of the family (Remark 1 of the
/// constant-curvature discussion).
pub fn flat_lorentzian_x() -> MetricSpec {
    let f: Arc<dyn ScalarField> = Arc::new(
        AnalyticScalar::new(2, |q| q[0], |_, i| if i == 0 { 1.0 } else { 0.0 }, |_, _, _| {
            0.0
        })
        .with_domain(Domain::excluding(|q| q[0].abs())),
    );
    off_diagonal(f, "flat-lorentzian")
}

/// One-dimensional unit metric.
pub fn line() -> MetricSpec {
    euclidean_named(1, "line")
}

fn euclidean_named(n: usize, id: &str) -> MetricSpec {
    let ones: Vec<Arc<dyn ScalarField>> = (0..n)
        .map(|_| Arc::new(ConstScalar::new(n, 1.0)) as Arc<dyn ScalarField>)
        .collect();
    MetricSpec::new(
        id,
        Arc::new(ComponentSym2::diagonal(ones)),
        SignatureHint::Riemannian,
    )
}

/// Default sampling box per metric family, chosen to keep every sample at
/// least 0.1 away from the family's singular loci.
pub fn sample_box_for(metric: &MetricSpec) -> SampleBox {
    match metric.id.as_str() {
        "e2" => SampleBox::new(vec![-2.0, -2.0], vec![2.0, 2.0]),
        "const-curvature" => SampleBox::new(vec![0.25, 0.25], vec![1.75, 1.75]),
        "no-kv" => SampleBox::new(vec![0.6, -1.5], vec![1.6, 0.5]),
        "toda" => SampleBox::new(vec![-0.75, -0.75], vec![0.75, 0.75]),
        "flat-lorentzian" => SampleBox::new(vec![0.5, -2.0], vec![2.5, 2.0]),
        "line" => SampleBox::new(vec![-2.0], vec![2.0]),
        _ => SampleBox::new(vec![-2.0; metric.n], vec![2.0; metric.n]),
    }
}

// ---------------------------------------------------------------------------
// Potentials
// ---------------------------------------------------------------------------

/// Newton-Cotes potential V = k / r^2 on E^2.
pub fn newton_cotes(k: f64) -> Arc<dyn ScalarField> {
    Arc::new(
        AnalyticScalar::new(
            2,
            move |q| k / (q[0] * q[0] + q[1] * q[1]),
            move |q, i| {
                let r2 = q[0] * q[0] + q[1] * q[1];
                -2.0 * k * q[i] / (r2 * r2)
            },
            move |q, i, j| {
                let r2 = q[0] * q[0] + q[1] * q[1];
                let kron = if i == j { 1.0 } else { 0.0 };
                -2.0 * k * kron / (r2 * r2) + 8.0 * k * q[i] * q[j] / (r2 * r2 * r2)
            },
        )
        .with_domain(Domain::excluding(|q| q[0].hypot(q[1]))),
    )
}

/// V = F(y/x)/r^2 + c/2, the potential admitting the homothetic-vector LFI.
pub fn ermakov_potential(f: Func1, c: f64) -> Arc<dyn ScalarField> {
    Arc::new(
        DualScalar::new(2, move |v| {
            let (x, y) = (&v[0], &v[1]);
            let r2 = &(x * x) + &(y * y);
            let u = y / x;
            let n = x.nvars();
            &(&f.apply_dual(&u) / &r2) + &crate::dual::Dual2::constant(c / 2.0, n)
        })
        .with_domain(Domain::excluding(|q| q[0].abs().min(q[0].hypot(q[1])))),
    )
}

/// V = M(y/r^2)/r^4, the special-CKV potential whose zero-LFI orbits are
/// circles.
pub fn sckv_potential(m: Func1) -> Arc<dyn ScalarField> {
    Arc::new(
        DualScalar::new(2, move |v| {
            let (x, y) = (&v[0], &v[1]);
            let r2 = &(x * x) + &(y * y);
            let u = y / &r2;
            &m.apply_dual(&u) / &(&r2 * &r2)
        })
        .with_domain(Domain::excluding(|q| q[0].hypot(q[1]))),
    )
}

/// 1D inverted oscillator V = -lambda^2 x^2 / 2.
pub fn inverted_oscillator(lambda: f64) -> Arc<dyn ScalarField> {
    Arc::new(AnalyticScalar::new(
        1,
        move |q| -0.5 * lambda * lambda * q[0] * q[0],
        move |q, _| -lambda * lambda * q[0],
        move |_, _, _| -lambda * lambda,
    ))
}

// ---------------------------------------------------------------------------
// CKV catalogs
// ---------------------------------------------------------------------------

/// A named conformal Killing vector of a catalog metric together with its
/// conformal factor.
#[derive(Clone)]
pub struct CkvCatalogEntry {
    pub name: String,
    pub metric_family: String,
    pub vector: Arc<dyn CovectorField>,
    pub conformal_factor: Arc<dyn ScalarField>,
}

fn cov2(
    fx: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    dfx: impl Fn(&[f64], usize) -> f64 + Send + Sync + 'static,
    d2fx: impl Fn(&[f64], usize, usize) -> f64 + Send + Sync + 'static,
    fy: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    dfy: impl Fn(&[f64], usize) -> f64 + Send + Sync + 'static,
    d2fy: impl Fn(&[f64], usize, usize) -> f64 + Send + Sync + 'static,
) -> Arc<dyn CovectorField> {
    Arc::new(ComponentCovector::new(vec![
        Arc::new(AnalyticScalar::new(2, fx, dfx, d2fx)),
        Arc::new(AnalyticScalar::new(2, fy, dfy, d2fy)),
    ]))
}

/// The CKVs of E^2 used in the worked potentials: translations and the
/// rotation (Killing), the homothetic vector, and the two special CKVs.
pub fn e2_catalog() -> Vec<CkvCatalogEntry> {
    let zero = |_: &[f64]| 0.0;
    let zero1 = |_: &[f64], _: usize| 0.0;
    let zero2 = |_: &[f64], _: usize, _: usize| 0.0;
    let kron = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };

    let entry = |name: &str,
                 vector: Arc<dyn CovectorField>,
                 psi: Arc<dyn ScalarField>|
     -> CkvCatalogEntry {
        CkvCatalogEntry {
            name: name.into(),
            metric_family: "e2".into(),
            vector,
            conformal_factor: psi,
        }
    };

    let const_psi = |c: f64| -> Arc<dyn ScalarField> { Arc::new(ConstScalar::new(2, c)) };
    let coord_psi = |idx: usize| -> Arc<dyn ScalarField> {
        Arc::new(crate::field::CoordScalar::new(2, idx))
    };

    vec![
        entry(
            "trans-x",
            cov2(|_| 1.0, zero1, zero2, zero, zero1, zero2),
            const_psi(0.0),
        ),
        entry(
            "trans-y",
            cov2(zero, zero1, zero2, |_| 1.0, zero1, zero2),
            const_psi(0.0),
        ),
        entry(
            "rotation",
            cov2(
                |q| -q[1],
                move |_, i| if i == 1 { -1.0 } else { 0.0 },
                zero2,
                |q| q[0],
                move |_, i| kron(i, 0),
                zero2,
            ),
            const_psi(0.0),
        ),
        entry(
            "hv",
            cov2(
                |q| q[0],
                move |_, i| kron(i, 0),
                zero2,
                |q| q[1],
                move |_, i| kron(i, 1),
                zero2,
            ),
            const_psi(1.0),
        ),
        entry(
            "sckv-b1",
            cov2(
                |q| 0.5 * (q[0] * q[0] - q[1] * q[1]),
                |q, i| if i == 0 { q[0] } else { -q[1] },
                move |_, i, j| {
                    if i == j {
                        kron(i, 0) - kron(i, 1)
                    } else {
                        0.0
                    }
                },
                |q| q[0] * q[1],
                |q, i| if i == 0 { q[1] } else { q[0] },
                move |_, i, j| if i != j { 1.0 } else { 0.0 },
            ),
            coord_psi(0),
        ),
        entry(
            "sckv-b2",
            cov2(
                |q| q[0] * q[1],
                |q, i| if i == 0 { q[1] } else { q[0] },
                move |_, i, j| if i != j { 1.0 } else { 0.0 },
                |q| 0.5 * (q[1] * q[1] - q[0] * q[0]),
                |q, i| if i == 1 { q[1] } else { -q[0] },
                move |_, i, j| {
                    if i == j {
                        kron(i, 1) - kron(i, 0)
                    } else {
                        0.0
                    }
                },
            ),
            coord_psi(1),
        ),
    ]
}

/// CKV of the off-diagonal family: B_a = f (F1(y), F2(x)) with conformal
/// factor psi = (F2 f_x + F1 f_y + f (F1' + F2')) / (2 f).
pub fn off_diagonal_ckv(
    metric: &MetricSpec,
    f: Arc<dyn ScalarField>,
    f1: Func1,
    f2: Func1,
    name: &str,
) -> CkvCatalogEntry {
    let f1_field = f1.as_field(2, 1);
    let f2_field = f2.as_field(2, 0);
    let vector = Arc::new(ComponentCovector::new(vec![
        product(f.clone(), f1_field.clone()),
        product(f.clone(), f2_field.clone()),
    ]));

    // psi assembled from first partials of f: it exposes one derivative
    // order less than f itself.
    let fx: Arc<dyn ScalarField> = Arc::new(PartialField::new(f.clone(), 0));
    let fy: Arc<dyn ScalarField> = Arc::new(PartialField::new(f.clone(), 1));
    let df_sum: Arc<dyn ScalarField> = {
        let f1c = f1.clone();
        let f2c = f2.clone();
        Arc::new(AnalyticScalar::new(
            2,
            move |q| f1c.d1(q[1]) + f2c.d1(q[0]),
            {
                let f1c = f1.clone();
                let f2c = f2.clone();
                move |q, i| {
                    if i == 0 {
                        f2c.d2(q[0])
                    } else {
                        f1c.d2(q[1])
                    }
                }
            },
            |_, _, _| panic!("third derivative of F1/F2 not available"),
        ))
    };
    let numer = crate::field::lin_comb(vec![
        (1.0, product(f2_field, fx)),
        (1.0, product(f1_field, fy)),
        (1.0, product(f.clone(), df_sum)),
    ]);
    let psi = Arc::new(HalfQuotient {
        numer,
        denom: f.clone(),
    });

    CkvCatalogEntry {
        name: name.into(),
        metric_family: metric.id.clone(),
        vector,
        conformal_factor: psi,
    }
}

/// numer / (2 denom); first-order derivatives only (quotient of derived
/// fields).
struct HalfQuotient {
    numer: Arc<dyn ScalarField>,
    denom: Arc<dyn ScalarField>,
}

impl ScalarField for HalfQuotient {
    fn dim(&self) -> usize {
        self.numer.dim()
    }
    fn value(&self, q: &[f64]) -> f64 {
        self.numer.value(q) / (2.0 * self.denom.value(q))
    }
    fn partial(&self, q: &[f64], i: usize) -> f64 {
        let (n, d) = (self.numer.value(q), self.denom.value(q));
        let (dn, dd) = (self.numer.partial(q, i), self.denom.partial(q, i));
        (dn * d - n * dd) / (2.0 * d * d)
    }
    fn partial2(&self, _q: &[f64], _i: usize, _j: usize) -> f64 {
        panic!("HalfQuotient: second derivative not available")
    }
    fn domain(&self) -> Domain {
        self.numer.domain().intersect(&self.denom.domain())
    }
    fn derivative_order(&self) -> u8 {
        1
    }
}

/// The three Killing vectors of the constant-curvature metric, obtained from
/// F1 = c1 y^2 + c2 y + c3, F2 = -c1 x^2 + c2 x - c3.
pub fn constant_curvature_kvs(k: f64) -> Vec<CkvCatalogEntry> {
    let metric = constant_curvature(k);
    let f = scalar_const_curvature_f(k);
    let cases = [
        ("kv-1", Func1::poly(vec![0.0, 0.0, 1.0]), Func1::poly(vec![0.0, 0.0, -1.0])),
        ("kv-2", Func1::poly(vec![0.0, 1.0]), Func1::poly(vec![0.0, 1.0])),
        ("kv-3", Func1::constant(1.0), Func1::constant(-1.0)),
    ];
    cases
        .into_iter()
        .map(|(name, f1, f2)| {
            let mut e = off_diagonal_ckv(&metric, f.clone(), f1, f2, name);
            // These are Killing vectors: psi vanishes identically.
            e.conformal_factor = Arc::new(ConstScalar::new(2, 0.0));
            e
        })
        .collect()
}

/// CKT of the off-diagonal family (diagonal ansatz): U = f^2 diag(A1(y), A2(x)),
/// with closed-form associated vector
/// X = (f_y A1 + f A1'/2, f_x A2 + f A2'/2).
pub struct OffDiagonalCkt {
    pub tensor: Arc<dyn Sym2Field>,
    pub associated_vector: Arc<dyn CovectorField>,
}

pub fn off_diagonal_ckt(f: Arc<dyn ScalarField>, a1: Func1, a2: Func1) -> OffDiagonalCkt {
    let f2 = product(f.clone(), f.clone());
    let a1f = a1.as_field(2, 1);
    let a2f = a2.as_field(2, 0);
    let tensor = Arc::new(ComponentSym2::diagonal(vec![
        product(f2.clone(), a1f.clone()),
        product(f2, a2f.clone()),
    ]));

    let fx: Arc<dyn ScalarField> = Arc::new(PartialField::new(f.clone(), 0));
    let fy: Arc<dyn ScalarField> = Arc::new(PartialField::new(f.clone(), 1));
    let da1 = {
        let a1c = a1.clone();
        let a1c2 = a1.clone();
        Arc::new(AnalyticScalar::new(
            2,
            move |q| a1c.d1(q[1]),
            move |q, i| if i == 1 { a1c2.d2(q[1]) } else { 0.0 },
            |_, _, _| panic!("third derivative of A1 not available"),
        )) as Arc<dyn ScalarField>
    };
    let da2 = {
        let a2c = a2.clone();
        let a2c2 = a2.clone();
        Arc::new(AnalyticScalar::new(
            2,
            move |q| a2c.d1(q[0]),
            move |q, i| if i == 0 { a2c2.d2(q[0]) } else { 0.0 },
            |_, _, _| panic!("third derivative of A2 not available"),
        )) as Arc<dyn ScalarField>
    };
    let comp_x = crate::field::lin_comb(vec![
        (1.0, product(fy, a1f)),
        (0.5, product(f.clone(), da1)),
    ]);
    let comp_y = crate::field::lin_comb(vec![
        (1.0, product(fx, a2f)),
        (0.5, product(f.clone(), da2)),
    ]);
    let associated_vector = Arc::new(ComponentCovector::new(vec![comp_x, comp_y]));

    OffDiagonalCkt {
        tensor,
        associated_vector,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn newton_cotes_partials() {
        let v = newton_cotes(-1.0);
        let q = [1.2, -0.7];
        let r2 = q[0] * q[0] + q[1] * q[1];
        assert_relative_eq!(v.value(&q), -1.0 / r2, max_relative = 1e-14);
        // Cross-check against the dual-number route.
        let dual = DualScalar::new(2, |vv| {
            let r2 = &(&vv[0] * &vv[0]) + &(&vv[1] * &vv[1]);
            -r2.recip()
        });
        for i in 0..2 {
            assert_relative_eq!(v.partial(&q, i), dual.partial(&q, i), max_relative = 1e-13);
            for j in 0..2 {
                assert_relative_eq!(
                    v.partial2(&q, i, j),
                    dual.partial2(&q, i, j),
                    max_relative = 1e-13
                );
            }
        }
    }

    #[test]
    fn ermakov_constant_f_reduces_to_newton_cotes() {
        let a = ermakov_potential(Func1::constant(-1.0), 0.0);
        let b = newton_cotes(-1.0);
        let q = [0.9, 1.4];
        assert_relative_eq!(a.value(&q), b.value(&q), max_relative = 1e-13);
        for i in 0..2 {
            assert_relative_eq!(a.partial(&q, i), b.partial(&q, i), max_relative = 1e-12);
        }
    }

    #[test]
    fn toda_params_validation() {
        let mut p = TodaParams::default();
        assert!(p.validate().is_ok());
        assert!(!p.is_flat());
        p.b3 = 2.0 * (p.b2 - p.b1);
        assert!(p.is_flat());
        p.b2 = p.b1;
        assert!(matches!(p.validate(), Err(Error::DegenerateParams(_))));
    }

    #[test]
    fn off_diagonal_ckv_conformal_factor_matches_formula() {
        // For f = k/(x+y)^2 with the KV-producing F1, F2 the factor is 0.
        let f = scalar_const_curvature_f(1.5);
        let m = constant_curvature(1.5);
        let e = off_diagonal_ckv(
            &m,
            f,
            Func1::poly(vec![0.0, 1.0]),
            Func1::poly(vec![0.0, 1.0]),
            "kv-2",
        );
        let q = [0.7, 0.9];
        assert!(e.conformal_factor.value(&q).abs() < 1e-13);
    }
}
