//! Differentiable pointwise fields.
//!
//! Every geometric object in the crate (metric components, potentials,
//! symmetry vectors and tensors) is a field on R^n exposing exact values and
//! exact partial derivatives up to order two. Derivatives come from either
//! hand-coded analytic closures (built-in catalog) or second-order dual
//! numbers (user expressions); finite differences appear only in test
//! oracles, never here.
//!
//! Fields derived from other fields (gradients, symmetrized covariant
//! derivatives) lose one derivative order; `derivative_order` reports what a
//! field can actually answer, and callers must not ask beyond it.

use crate::dual::Dual2;
use std::sync::Arc;

/// Validity region of a field, expressed as a distance-like margin to the
/// nearest excluded locus (`inf` when the field is global). Samplers and the
/// integrator apply their own margins on top.
#[derive(Clone)]
pub struct Domain {
    margin_fn: Option<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>>,
}

impl Domain {
    pub fn all() -> Self {
        Domain { margin_fn: None }
    }

    /// `f(q)` is a proxy for the distance from `q` to the excluded locus,
    /// e.g. `|x + y|` for the locus x + y = 0.
    pub fn excluding<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Domain {
            margin_fn: Some(Arc::new(f)),
        }
    }

    pub fn locus_distance(&self, q: &[f64]) -> f64 {
        match &self.margin_fn {
            None => f64::INFINITY,
            Some(f) => f(q),
        }
    }

    pub fn contains(&self, q: &[f64], margin: f64) -> bool {
        self.locus_distance(q) > margin
    }

    /// Intersection of two domains: the smaller margin wins.
    pub fn intersect(&self, other: &Domain) -> Domain {
        match (&self.margin_fn, &other.margin_fn) {
            (None, None) => Domain::all(),
            (Some(_), None) => self.clone(),
            (None, Some(_)) => other.clone(),
            (Some(a), Some(b)) => {
                let (a, b) = (Arc::clone(a), Arc::clone(b));
                Domain::excluding(move |q| a(q).min(b(q)))
            }
        }
    }
}

impl std::fmt::Debug for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Domain({})",
            if self.margin_fn.is_some() {
                "restricted"
            } else {
                "all"
            }
        )
    }
}

/// Scalar field with exact partials up to `derivative_order`.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, q: &[f64]) -> f64;
    fn partial(&self, q: &[f64], i: usize) -> f64;
    fn partial2(&self, q: &[f64], i: usize, j: usize) -> f64;
    fn domain(&self) -> Domain {
        Domain::all()
    }
    fn derivative_order(&self) -> u8 {
        2
    }

    fn gradient(&self, q: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|i| self.partial(q, i)).collect()
    }
}

/// Covector field (lowered index), component-wise differentiable.
pub trait CovectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn component(&self, q: &[f64], a: usize) -> f64;
    fn partial(&self, q: &[f64], a: usize, i: usize) -> f64;
    fn partial2(&self, q: &[f64], a: usize, i: usize, j: usize) -> f64;
    fn domain(&self) -> Domain {
        Domain::all()
    }
    fn derivative_order(&self) -> u8 {
        2
    }

    fn values(&self, q: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|a| self.component(q, a)).collect()
    }
}

/// Symmetric rank-2 covariant tensor field.
pub trait Sym2Field: Send + Sync {
    fn dim(&self) -> usize;
    fn component(&self, q: &[f64], a: usize, b: usize) -> f64;
    fn partial(&self, q: &[f64], a: usize, b: usize, i: usize) -> f64;
    fn partial2(&self, q: &[f64], a: usize, b: usize, i: usize, j: usize) -> f64;
    fn domain(&self) -> Domain {
        Domain::all()
    }
    fn derivative_order(&self) -> u8 {
        2
    }

    fn matrix(&self, q: &[f64]) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        nalgebra::DMatrix::from_fn(n, n, |a, b| self.component(q, a, b))
    }

    fn partial_matrix(&self, q: &[f64], i: usize) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        nalgebra::DMatrix::from_fn(n, n, |a, b| self.partial(q, a, b, i))
    }
}

// ---------------------------------------------------------------------------
// Scalar field constructors
// ---------------------------------------------------------------------------

type ValFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type D1Fn = Arc<dyn Fn(&[f64], usize) -> f64 + Send + Sync>;
type D2Fn = Arc<dyn Fn(&[f64], usize, usize) -> f64 + Send + Sync>;

/// Scalar field backed by hand-coded analytic closures.
#[derive(Clone)]
pub struct AnalyticScalar {
    dim: usize,
    f: ValFn,
    df: D1Fn,
    d2f: D2Fn,
    dom: Domain,
}

impl AnalyticScalar {
    pub fn new(
        dim: usize,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        df: impl Fn(&[f64], usize) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(&[f64], usize, usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        AnalyticScalar {
            dim,
            f: Arc::new(f),
            df: Arc::new(df),
            d2f: Arc::new(d2f),
            dom: Domain::all(),
        }
    }

    pub fn with_domain(mut self, dom: Domain) -> Self {
        self.dom = dom;
        self
    }
}

impl ScalarField for AnalyticScalar {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, q: &[f64]) -> f64 {
        (self.f)(q)
    }
    fn partial(&self, q: &[f64], i: usize) -> f64 {
        (self.df)(q, i)
    }
    fn partial2(&self, q: &[f64], i: usize, j: usize) -> f64 {
        (self.d2f)(q, i, j)
    }
    fn domain(&self) -> Domain {
        self.dom.clone()
    }
}

/// Scalar field evaluated through second-order dual numbers.
pub struct DualScalar {
    dim: usize,
    f: Arc<dyn Fn(&[Dual2]) -> Dual2 + Send + Sync>,
    dom: Domain,
}

impl DualScalar {
    pub fn new(dim: usize, f: impl Fn(&[Dual2]) -> Dual2 + Send + Sync + 'static) -> Self {
        DualScalar {
            dim,
            f: Arc::new(f),
            dom: Domain::all(),
        }
    }

    pub fn with_domain(mut self, dom: Domain) -> Self {
        self.dom = dom;
        self
    }

    fn lift(&self, q: &[f64]) -> Dual2 {
        let vars: Vec<Dual2> = q
            .iter()
            .enumerate()
            .map(|(i, &v)| Dual2::variable(v, i, self.dim))
            .collect();
        (self.f)(&vars)
    }
}

impl ScalarField for DualScalar {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, q: &[f64]) -> f64 {
        self.lift(q).val
    }
    fn partial(&self, q: &[f64], i: usize) -> f64 {
        self.lift(q).grad[i]
    }
    fn partial2(&self, q: &[f64], i: usize, j: usize) -> f64 {
        self.lift(q).hess_at(i, j)
    }
    fn domain(&self) -> Domain {
        self.dom.clone()
    }
}

/// Constant scalar field.
pub struct ConstScalar {
    dim: usize,
    c: f64,
}

impl ConstScalar {
    pub fn new(dim: usize, c: f64) -> Self {
        ConstScalar { dim, c }
    }
}

impl ScalarField for ConstScalar {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _q: &[f64]) -> f64 {
        self.c
    }
    fn partial(&self, _q: &[f64], _i: usize) -> f64 {
        0.0
    }
    fn partial2(&self, _q: &[f64], _i: usize, _j: usize) -> f64 {
        0.0
    }
}

pub fn zero_scalar(dim: usize) -> Arc<dyn ScalarField> {
    Arc::new(ConstScalar::new(dim, 0.0))
}

/// Coordinate projection q^i as a scalar field.
pub struct CoordScalar {
    dim: usize,
    idx: usize,
}

impl CoordScalar {
    pub fn new(dim: usize, idx: usize) -> Self {
        CoordScalar { dim, idx }
    }
}

impl ScalarField for CoordScalar {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, q: &[f64]) -> f64 {
        q[self.idx]
    }
    fn partial(&self, _q: &[f64], i: usize) -> f64 {
        if i == self.idx {
            1.0
        } else {
            0.0
        }
    }
    fn partial2(&self, _q: &[f64], _i: usize, _j: usize) -> f64 {
        0.0
    }
}

// ---------------------------------------------------------------------------
// Scalar combinators (exact chain rules, order preserved)
// ---------------------------------------------------------------------------

struct LinComb {
    terms: Vec<(f64, Arc<dyn ScalarField>)>,
    dim: usize,
}

impl ScalarField for LinComb {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, q: &[f64]) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.value(q)).sum()
    }
    fn partial(&self, q: &[f64], i: usize) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.partial(q, i)).sum()
    }
    fn partial2(&self, q: &[f64], i: usize, j: usize) -> f64 {
        self.terms
            .iter()
            .map(|(c, f)| c * f.partial2(q, i, j))
            .sum()
    }
    fn domain(&self) -> Domain {
        self.terms
            .iter()
            .fold(Domain::all(), |d, (_, f)| d.intersect(&f.domain()))
    }
    fn derivative_order(&self) -> u8 {
        self.terms
            .iter()
            .map(|(_, f)| f.derivative_order())
            .min()
            .unwrap_or(2)
    }
}

pub fn lin_comb(terms: Vec<(f64, Arc<dyn ScalarField>)>) -> Arc<dyn ScalarField> {
    let dim = terms.first().map(|(_, f)| f.dim()).unwrap_or(0);
    Arc::new(LinComb { terms, dim })
}

pub fn scale(c: f64, f: Arc<dyn ScalarField>) -> Arc<dyn ScalarField> {
    lin_comb(vec![(c, f)])
}

struct Product {
    a: Arc<dyn ScalarField>,
    b: Arc<dyn ScalarField>,
}

impl ScalarField for Product {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn value(&self, q: &[f64]) -> f64 {
        self.a.value(q) * self.b.value(q)
    }
    fn partial(&self, q: &[f64], i: usize) -> f64 {
        self.a.partial(q, i) * self.b.value(q) + self.a.value(q) * self.b.partial(q, i)
    }
    fn partial2(&self, q: &[f64], i: usize, j: usize) -> f64 {
        self.a.partial2(q, i, j) * self.b.value(q)
            + self.a.partial(q, i) * self.b.partial(q, j)
            + self.a.partial(q, j) * self.b.partial(q, i)
            + self.a.value(q) * self.b.partial2(q, i, j)
    }
    fn domain(&self) -> Domain {
        self.a.domain().intersect(&self.b.domain())
    }
    fn derivative_order(&self) -> u8 {
        self.a.derivative_order().min(self.b.derivative_order())
    }
}

pub fn product(a: Arc<dyn ScalarField>, b: Arc<dyn ScalarField>) -> Arc<dyn ScalarField> {
    Arc::new(Product { a, b })
}

/// Partial derivative of a scalar field, itself exposed as a field. Loses one
/// derivative order.
pub struct PartialField {
    base: Arc<dyn ScalarField>,
    idx: usize,
}

impl PartialField {
    pub fn new(base: Arc<dyn ScalarField>, idx: usize) -> Self {
        PartialField { base, idx }
    }
}

impl ScalarField for PartialField {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn value(&self, q: &[f64]) -> f64 {
        self.base.partial(q, self.idx)
    }
    fn partial(&self, q: &[f64], i: usize) -> f64 {
        self.base.partial2(q, self.idx, i)
    }
    fn partial2(&self, _q: &[f64], _i: usize, _j: usize) -> f64 {
        panic!("PartialField: third derivative of the base field is not available")
    }
    fn domain(&self) -> Domain {
        self.base.domain()
    }
    fn derivative_order(&self) -> u8 {
        self.base.derivative_order().saturating_sub(1)
    }
}

// ---------------------------------------------------------------------------
// Component-assembled covector / symmetric tensor fields
// ---------------------------------------------------------------------------

/// Covector field assembled from per-component scalar fields.
pub struct ComponentCovector {
    comps: Vec<Arc<dyn ScalarField>>,
    dom: Domain,
}

impl ComponentCovector {
    pub fn new(comps: Vec<Arc<dyn ScalarField>>) -> Self {
        let dom = comps
            .iter()
            .fold(Domain::all(), |d, f| d.intersect(&f.domain()));
        ComponentCovector { comps, dom }
    }
}

impl CovectorField for ComponentCovector {
    fn dim(&self) -> usize {
        self.comps.len()
    }
    fn component(&self, q: &[f64], a: usize) -> f64 {
        self.comps[a].value(q)
    }
    fn partial(&self, q: &[f64], a: usize, i: usize) -> f64 {
        self.comps[a].partial(q, i)
    }
    fn partial2(&self, q: &[f64], a: usize, i: usize, j: usize) -> f64 {
        self.comps[a].partial2(q, i, j)
    }
    fn domain(&self) -> Domain {
        self.dom.clone()
    }
    fn derivative_order(&self) -> u8 {
        self.comps
            .iter()
            .map(|f| f.derivative_order())
            .min()
            .unwrap_or(2)
    }
}

/// Symmetric rank-2 tensor assembled from upper-triangle scalar components.
pub struct ComponentSym2 {
    dim: usize,
    /// Upper triangle in row-major order: (0,0), (0,1), ..., (1,1), ...
    comps: Vec<Arc<dyn ScalarField>>,
    dom: Domain,
}

impl ComponentSym2 {
    pub fn new(dim: usize, upper: Vec<Arc<dyn ScalarField>>) -> Self {
        assert_eq!(upper.len(), dim * (dim + 1) / 2, "upper triangle size");
        let dom = upper
            .iter()
            .fold(Domain::all(), |d, f| d.intersect(&f.domain()));
        ComponentSym2 {
            dim,
            comps: upper,
            dom,
        }
    }

    /// Diagonal tensor diag(d_0, ..., d_{n-1}).
    pub fn diagonal(diag: Vec<Arc<dyn ScalarField>>) -> Self {
        let n = diag.len();
        let mut upper: Vec<Arc<dyn ScalarField>> = Vec::new();
        for a in 0..n {
            for b in a..n {
                if a == b {
                    upper.push(Arc::clone(&diag[a]));
                } else {
                    upper.push(zero_scalar(n));
                }
            }
        }
        ComponentSym2::new(n, upper)
    }

    fn idx(&self, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        a * self.dim - a * (a + 1) / 2 + b
    }
}

impl Sym2Field for ComponentSym2 {
    fn dim(&self) -> usize {
        self.dim
    }
    fn component(&self, q: &[f64], a: usize, b: usize) -> f64 {
        self.comps[self.idx(a, b)].value(q)
    }
    fn partial(&self, q: &[f64], a: usize, b: usize, i: usize) -> f64 {
        self.comps[self.idx(a, b)].partial(q, i)
    }
    fn partial2(&self, q: &[f64], a: usize, b: usize, i: usize, j: usize) -> f64 {
        self.comps[self.idx(a, b)].partial2(q, i, j)
    }
    fn domain(&self) -> Domain {
        self.dom.clone()
    }
    fn derivative_order(&self) -> u8 {
        self.comps
            .iter()
            .map(|f| f.derivative_order())
            .min()
            .unwrap_or(2)
    }
}

/// Scalar multiple of a symmetric tensor: s(q) * T_ab(q).
pub struct ScaledSym2 {
    pub s: Arc<dyn ScalarField>,
    pub t: Arc<dyn Sym2Field>,
}

impl Sym2Field for ScaledSym2 {
    fn dim(&self) -> usize {
        self.t.dim()
    }
    fn component(&self, q: &[f64], a: usize, b: usize) -> f64 {
        self.s.value(q) * self.t.component(q, a, b)
    }
    fn partial(&self, q: &[f64], a: usize, b: usize, i: usize) -> f64 {
        self.s.partial(q, i) * self.t.component(q, a, b)
            + self.s.value(q) * self.t.partial(q, a, b, i)
    }
    fn partial2(&self, q: &[f64], a: usize, b: usize, i: usize, j: usize) -> f64 {
        self.s.partial2(q, i, j) * self.t.component(q, a, b)
            + self.s.partial(q, i) * self.t.partial(q, a, b, j)
            + self.s.partial(q, j) * self.t.partial(q, a, b, i)
            + self.s.value(q) * self.t.partial2(q, a, b, i, j)
    }
    fn domain(&self) -> Domain {
        self.s.domain().intersect(&self.t.domain())
    }
    fn derivative_order(&self) -> u8 {
        self.s.derivative_order().min(self.t.derivative_order())
    }
}

/// Linear combination of symmetric tensors with constant coefficients.
pub struct Sym2LinComb {
    pub terms: Vec<(f64, Arc<dyn Sym2Field>)>,
    pub dim: usize,
}

impl Sym2Field for Sym2LinComb {
    fn dim(&self) -> usize {
        self.dim
    }
    fn component(&self, q: &[f64], a: usize, b: usize) -> f64 {
        self.terms
            .iter()
            .map(|(c, t)| c * t.component(q, a, b))
            .sum()
    }
    fn partial(&self, q: &[f64], a: usize, b: usize, i: usize) -> f64 {
        self.terms
            .iter()
            .map(|(c, t)| c * t.partial(q, a, b, i))
            .sum()
    }
    fn partial2(&self, q: &[f64], a: usize, b: usize, i: usize, j: usize) -> f64 {
        self.terms
            .iter()
            .map(|(c, t)| c * t.partial2(q, a, b, i, j))
            .sum()
    }
    fn domain(&self) -> Domain {
        self.terms
            .iter()
            .fold(Domain::all(), |d, (_, t)| d.intersect(&t.domain()))
    }
    fn derivative_order(&self) -> u8 {
        self.terms
            .iter()
            .map(|(_, t)| t.derivative_order())
            .min()
            .unwrap_or(2)
    }
}

/// Symmetrized tensor product of two covectors: X_(a Y_b).
pub struct SymProduct {
    pub x: Arc<dyn CovectorField>,
    pub y: Arc<dyn CovectorField>,
}

impl Sym2Field for SymProduct {
    fn dim(&self) -> usize {
        self.x.dim()
    }
    fn component(&self, q: &[f64], a: usize, b: usize) -> f64 {
        0.5 * (self.x.component(q, a) * self.y.component(q, b)
            + self.x.component(q, b) * self.y.component(q, a))
    }
    fn partial(&self, q: &[f64], a: usize, b: usize, i: usize) -> f64 {
        0.5 * (self.x.partial(q, a, i) * self.y.component(q, b)
            + self.x.component(q, a) * self.y.partial(q, b, i)
            + self.x.partial(q, b, i) * self.y.component(q, a)
            + self.x.component(q, b) * self.y.partial(q, a, i))
    }
    fn partial2(&self, q: &[f64], a: usize, b: usize, i: usize, j: usize) -> f64 {
        let term = |u: usize, v: usize| {
            self.x.partial2(q, u, i, j) * self.y.component(q, v)
                + self.x.partial(q, u, i) * self.y.partial(q, v, j)
                + self.x.partial(q, u, j) * self.y.partial(q, v, i)
                + self.x.component(q, u) * self.y.partial2(q, v, i, j)
        };
        0.5 * (term(a, b) + term(b, a))
    }
    fn domain(&self) -> Domain {
        self.x.domain().intersect(&self.y.domain())
    }
    fn derivative_order(&self) -> u8 {
        self.x.derivative_order().min(self.y.derivative_order())
    }
}

/// Gradient of a scalar field as a covector; loses one derivative order.
pub struct GradCovector {
    pub base: Arc<dyn ScalarField>,
}

impl CovectorField for GradCovector {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn component(&self, q: &[f64], a: usize) -> f64 {
        self.base.partial(q, a)
    }
    fn partial(&self, q: &[f64], a: usize, i: usize) -> f64 {
        self.base.partial2(q, a, i)
    }
    fn partial2(&self, _q: &[f64], _a: usize, _i: usize, _j: usize) -> f64 {
        panic!("GradCovector: third derivative of the base scalar is not available")
    }
    fn domain(&self) -> Domain {
        self.base.domain()
    }
    fn derivative_order(&self) -> u8 {
        self.base.derivative_order().saturating_sub(1)
    }
}

/// Linear combination of covectors with constant coefficients.
pub struct CovLinComb {
    pub terms: Vec<(f64, Arc<dyn CovectorField>)>,
    pub dim: usize,
}

impl CovectorField for CovLinComb {
    fn dim(&self) -> usize {
        self.dim
    }
    fn component(&self, q: &[f64], a: usize) -> f64 {
        self.terms.iter().map(|(c, v)| c * v.component(q, a)).sum()
    }
    fn partial(&self, q: &[f64], a: usize, i: usize) -> f64 {
        self.terms
            .iter()
            .map(|(c, v)| c * v.partial(q, a, i))
            .sum()
    }
    fn partial2(&self, q: &[f64], a: usize, i: usize, j: usize) -> f64 {
        self.terms
            .iter()
            .map(|(c, v)| c * v.partial2(q, a, i, j))
            .sum()
    }
    fn domain(&self) -> Domain {
        self.terms
            .iter()
            .fold(Domain::all(), |d, (_, v)| d.intersect(&v.domain()))
    }
    fn derivative_order(&self) -> u8 {
        self.terms
            .iter()
            .map(|(_, v)| v.derivative_order())
            .min()
            .unwrap_or(2)
    }
}

/// Covector whose components are scalar fields scaled by other scalar fields,
/// i.e. (s_0(q) h_0(q), ..., s_{n-1}(q) h_{n-1}(q)) built from products.
pub fn covector_from_components(comps: Vec<Arc<dyn ScalarField>>) -> Arc<dyn CovectorField> {
    Arc::new(ComponentCovector::new(comps))
}

// ---------------------------------------------------------------------------
// Differentiable functions of one variable
// ---------------------------------------------------------------------------

/// Smooth function of one variable with exact first and second derivatives.
/// Used for the free functions of the metric and potential families
/// (A1, A2, F1, F2, F, M).
#[derive(Clone)]
pub struct Func1 {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    d1: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    d2: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Func1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Func1")
    }
}

impl Func1 {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Func1 {
            f: Arc::new(f),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
        }
    }

    pub fn constant(c: f64) -> Self {
        Func1::new(move |_| c, |_| 0.0, |_| 0.0)
    }

    pub fn zero() -> Self {
        Func1::constant(0.0)
    }

    /// Polynomial sum c_k u^k from low to high degree.
    pub fn poly(coeffs: Vec<f64>) -> Self {
        let horner = |cs: &[f64], u: f64| cs.iter().rev().fold(0.0, |acc, c| acc * u + c);
        let c0 = coeffs.clone();
        let c1: Vec<f64> = coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| k as f64 * c)
            .collect();
        let c2: Vec<f64> = c1
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| k as f64 * c)
            .collect();
        Func1::new(
            move |u| horner(&c0, u),
            move |u| horner(&c1, u),
            move |u| horner(&c2, u),
        )
    }

    /// a * exp(b * u)
    pub fn exp_scaled(a: f64, b: f64) -> Self {
        Func1::new(
            move |u| a * (b * u).exp(),
            move |u| a * b * (b * u).exp(),
            move |u| a * b * b * (b * u).exp(),
        )
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.f)(u)
    }
    pub fn d1(&self, u: f64) -> f64 {
        (self.d1)(u)
    }
    pub fn d2(&self, u: f64) -> f64 {
        (self.d2)(u)
    }

    /// Chain-rule application to a second-order dual argument.
    pub fn apply_dual(&self, u: &Dual2) -> Dual2 {
        let n = u.nvars();
        let (g, dg, d2g) = (self.eval(u.val), self.d1(u.val), self.d2(u.val));
        let mut out = Dual2::constant(g, n);
        for i in 0..n {
            out.grad[i] = dg * u.grad[i];
        }
        for i in 0..n {
            for j in 0..n {
                out.hess[i * n + j] = dg * u.hess_at(i, j) + d2g * u.grad[i] * u.grad[j];
            }
        }
        out
    }

    /// F(q[var_idx]) as a scalar field on R^dim.
    pub fn as_field(&self, dim: usize, var_idx: usize) -> Arc<dyn ScalarField> {
        let me = self.clone();
        Arc::new(Func1Field {
            dim,
            var_idx,
            func: me,
        })
    }
}

struct Func1Field {
    dim: usize,
    var_idx: usize,
    func: Func1,
}

impl ScalarField for Func1Field {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, q: &[f64]) -> f64 {
        self.func.eval(q[self.var_idx])
    }
    fn partial(&self, q: &[f64], i: usize) -> f64 {
        if i == self.var_idx {
            self.func.d1(q[self.var_idx])
        } else {
            0.0
        }
    }
    fn partial2(&self, q: &[f64], i: usize, j: usize) -> f64 {
        if i == self.var_idx && j == self.var_idx {
            self.func.d2(q[self.var_idx])
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dual_scalar_partials_match_analytic() {
        // f = x^2 y + exp(y)
        let dual = DualScalar::new(2, |v| &(&v[0].powi(2) * &v[1]) + &v[1].exp());
        let ana = AnalyticScalar::new(
            2,
            |q| q[0] * q[0] * q[1] + q[1].exp(),
            |q, i| match i {
                0 => 2.0 * q[0] * q[1],
                _ => q[0] * q[0] + q[1].exp(),
            },
            |q, i, j| match (i, j) {
                (0, 0) => 2.0 * q[1],
                (0, 1) | (1, 0) => 2.0 * q[0],
                _ => q[1].exp(),
            },
        );
        let q = [1.3, -0.4];
        assert_relative_eq!(dual.value(&q), ana.value(&q), max_relative = 1e-14);
        for i in 0..2 {
            assert_relative_eq!(dual.partial(&q, i), ana.partial(&q, i), max_relative = 1e-14);
            for j in 0..2 {
                assert_relative_eq!(
                    dual.partial2(&q, i, j),
                    ana.partial2(&q, i, j),
                    max_relative = 1e-14
                );
            }
        }
    }

    #[test]
    fn product_rule_second_order() {
        let a: Arc<dyn ScalarField> = Arc::new(DualScalar::new(2, |v| v[0].sin()));
        let b: Arc<dyn ScalarField> = Arc::new(DualScalar::new(2, |v| &v[1] * &v[1]));
        let p = product(a, b);
        let direct = DualScalar::new(2, |v| &v[0].sin() * &(&v[1] * &v[1]));
        let q = [0.6, 1.7];
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(
                    p.partial2(&q, i, j),
                    direct.partial2(&q, i, j),
                    max_relative = 1e-13
                );
            }
        }
    }

    #[test]
    fn domain_intersection_takes_min_margin() {
        let d1 = Domain::excluding(|q| q[0].abs());
        let d2 = Domain::excluding(|q| (q[0] + q[1]).abs());
        let d = d1.intersect(&d2);
        assert!(d.contains(&[1.0, 1.0], 1e-2));
        assert!(!d.contains(&[1.0, -1.0], 1e-2));
        assert!(!d.contains(&[1e-3, 5.0], 1e-2));
    }
}
