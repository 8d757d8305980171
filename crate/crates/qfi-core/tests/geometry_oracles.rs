#![allow(clippy::needless_range_loop)]

//! Finite-difference oracles for the analytic geometry backend.
//!
//! The main code path never uses finite differences; these tests rebuild the
//! same objects from field *values only* and compare. A disagreement means
//! the hand-coded partials (or the dual-number backend) are wrong.

use nalgebra::DMatrix;
use qfi_core::catalog;
use qfi_core::field::Func1;
use qfi_core::geometry::*;
use qfi_core::sampling::{sample_points, SampleBox};

const FD_STEP: f64 = 1e-5;

/// Central second-order finite difference of a scalar function of q.
fn fd_partial(f: &dyn Fn(&[f64]) -> f64, q: &[f64], i: usize, h: f64) -> f64 {
    let mut qp = q.to_vec();
    let mut qm = q.to_vec();
    qp[i] += h;
    qm[i] -= h;
    (f(&qp) - f(&qm)) / (2.0 * h)
}

/// Fourth-order central finite difference.
fn fd_partial4(f: &dyn Fn(&[f64]) -> f64, q: &[f64], i: usize, h: f64) -> f64 {
    let eval = |offset: f64| {
        let mut qq = q.to_vec();
        qq[i] += offset;
        f(&qq)
    };
    (-eval(2.0 * h) + 8.0 * eval(h) - 8.0 * eval(-h) + eval(-2.0 * h)) / (12.0 * h)
}

/// Christoffel symbols rebuilt from metric values alone (central
/// differences, step `h`).
fn christoffel_fd(metric: &MetricSpec, q: &[f64], h: f64) -> Vec<Vec<Vec<f64>>> {
    let n = metric.n;
    let g = metric.value(q);
    let ginv = g.clone().try_inverse().unwrap();
    let dg: Vec<DMatrix<f64>> = (0..n)
        .map(|c| {
            DMatrix::from_fn(n, n, |a, b| {
                fd_partial(&|p: &[f64]| metric.g.component(p, a, b), q, c, h)
            })
        })
        .collect();
    let mut gamma = vec![vec![vec![0.0; n]; n]; n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut s = 0.0;
                for d in 0..n {
                    s += ginv[(a, d)] * (dg[c][(d, b)] + dg[b][(d, c)] - dg[d][(b, c)]);
                }
                gamma[a][b][c] = 0.5 * s;
            }
        }
    }
    gamma
}

fn builtin_metrics() -> Vec<MetricSpec> {
    vec![
        catalog::euclidean(2),
        catalog::constant_curvature(1.0),
        catalog::constant_curvature(-2.5),
        catalog::no_kv_metric(),
        catalog::toda_metric(&catalog::TodaParams::default()).unwrap(),
        catalog::flat_lorentzian_x(),
    ]
}

#[test]
fn christoffels_match_finite_difference_oracle() {
    for metric in builtin_metrics() {
        let bx = catalog::sample_box_for(&metric);
        let pts = sample_points(&bx, &metric.domain(), 200, 7);
        for q in &pts {
            let conn = christoffel(&metric, q).unwrap();
            let fd = christoffel_fd(&metric, q, FD_STEP);
            for a in 0..metric.n {
                for b in 0..metric.n {
                    for c in 0..metric.n {
                        let exact = conn.gamma.get(a, b, c);
                        let rel = (exact - fd[a][b][c]).abs() / exact.abs().max(1.0);
                        assert!(
                            rel < 1e-6,
                            "{}: Gamma^{a}_{b}{c} at {q:?}: analytic {exact}, fd {}",
                            metric.id,
                            fd[a][b][c]
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn connection_gradient_matches_finite_difference() {
    // d_e Gamma^a_bc against a central difference of the analytic Gammas.
    let metric = catalog::no_kv_metric();
    let pts = sample_points(
        &catalog::sample_box_for(&metric),
        &metric.domain(),
        25,
        3,
    );
    for q in &pts {
        let conn = christoffel(&metric, q).unwrap();
        for e in 0..2 {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[e] += FD_STEP;
            qm[e] -= FD_STEP;
            let cp = christoffel(&metric, &qp).unwrap();
            let cm = christoffel(&metric, &qm).unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        let fd = (cp.gamma.get(a, b, c) - cm.gamma.get(a, b, c))
                            / (2.0 * FD_STEP);
                        let exact = conn.dgamma.get(a, b, c, e);
                        assert!(
                            (exact - fd).abs() / exact.abs().max(1.0) < 1e-5,
                            "dGamma mismatch at {q:?}: {exact} vs {fd}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn metric_compatibility_all_builtins() {
    for metric in builtin_metrics() {
        let bx = catalog::sample_box_for(&metric);
        let pts = sample_points(&bx, &metric.domain(), 200, 11);
        for q in &pts {
            let d = cov_derivative_tensor2(&metric, metric.g.as_ref(), q).unwrap();
            assert!(
                d.frobenius() < 1e-12,
                "{}: nabla g = {:.3e} at {q:?}",
                metric.id,
                d.frobenius()
            );
        }
    }
}

#[test]
fn ricci_constant_curvature_variance() {
    let metric = catalog::constant_curvature(1.0);
    let pts = sample_points(
        &catalog::sample_box_for(&metric),
        &metric.domain(),
        200,
        5,
    );
    let rs: Vec<f64> = pts
        .iter()
        .map(|q| ricci_scalar_2d(&metric, q).unwrap())
        .collect();
    let mean = rs.iter().sum::<f64>() / rs.len() as f64;
    let var = rs.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / rs.len() as f64;
    assert!((mean + 4.0).abs() < 1e-10, "mean R = {mean}");
    assert!(var <= 1e-18, "variance {var}");
}

#[test]
fn covariant_derivative_matches_fd4_oracle() {
    // The diagonal-ansatz tensor on the off-diagonal family, with
    // A1 = e^{-2y}, A2 = 0 and the no-KV f: rebuild U_{ab;c} entirely from
    // values with a 4th-order stencil.
    let metric = catalog::no_kv_metric();
    let ckt = catalog::off_diagonal_ckt(
        catalog::scalar_no_kv_f(),
        Func1::exp_scaled(1.0, -2.0),
        Func1::zero(),
    );
    let tensor = ckt.tensor;
    let h = 1e-3;
    let pts = sample_points(
        &SampleBox::new(vec![0.8, -1.0], vec![1.4, 0.2]),
        &metric.domain(),
        20,
        1,
    );
    for q in &pts {
        let exact = cov_derivative_tensor2(&metric, tensor.as_ref(), q).unwrap();
        // FD Christoffels at 4th order from metric values.
        let n = 2;
        let g = metric.value(q);
        let ginv = g.clone().try_inverse().unwrap();
        let mut gamma = vec![vec![vec![0.0; n]; n]; n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut s = 0.0;
                    for d in 0..n {
                        let gdb_c =
                            fd_partial4(&|p: &[f64]| metric.g.component(p, d, b), q, c, h);
                        let gdc_b =
                            fd_partial4(&|p: &[f64]| metric.g.component(p, d, c), q, b, h);
                        let gbc_d =
                            fd_partial4(&|p: &[f64]| metric.g.component(p, b, c), q, d, h);
                        s += ginv[(a, d)] * (gdb_c + gdc_b - gbc_d);
                    }
                    gamma[a][b][c] = 0.5 * s;
                }
            }
        }
        let um = tensor.matrix(q);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let du = fd_partial4(&|p: &[f64]| tensor.component(p, a, b), q, c, h);
                    let mut fd = du;
                    for d in 0..n {
                        fd -= gamma[d][c][a] * um[(d, b)] + gamma[d][c][b] * um[(a, d)];
                    }
                    let rel = (exact.get(a, b, c) - fd).abs() / exact.get(a, b, c).abs().max(1.0);
                    assert!(
                        rel < 1e-8,
                        "U_{a}{b};{c} at {q:?}: analytic {} vs fd {fd}",
                        exact.get(a, b, c)
                    );
                }
            }
        }
    }
}

#[test]
fn second_partials_match_fd_on_dual_backend() {
    // Spot-check the dual-number backend against finite differences on the
    // special-CKV potential (the least trivial built-in composition).
    let v = catalog::sckv_potential(Func1::new(
        |u| -0.5 - 0.1 * u * u,
        |u| -0.2 * u,
        |_| -0.2,
    ));
    let pts = [[1.1, 0.4], [0.7, -0.9], [1.8, 1.2]];
    for q in &pts {
        for i in 0..2 {
            let fd = fd_partial4(&|p: &[f64]| v.value(p), q, i, 1e-3);
            let exact = v.partial(q, i);
            assert!(
                (exact - fd).abs() / exact.abs().max(1.0) < 1e-9,
                "dV mismatch {exact} vs {fd}"
            );
            for j in 0..2 {
                let fd2 = fd_partial4(&|p: &[f64]| v.partial(p, j), q, i, 1e-3);
                let exact2 = v.partial2(q, i, j);
                assert!(
                    (exact2 - fd2).abs() / exact2.abs().max(1.0) < 1e-8,
                    "d2V mismatch {exact2} vs {fd2}"
                );
            }
        }
    }
}
