//! Acceptance suite: the ten closed-form reproduction and property criteria,
//! each printed as one pass/fail line and enforced at its stated tolerance.

use qfi_core::catalog;
use qfi_core::dynamics::{integrate, monitor_report, FiMonitor};
use qfi_core::field::{Func1, ScalarField};
use qfi_core::qfi::ConstrainedSystem;
use qfi_core::sampling::{sample_points, CertConfig};
use qfi_core::scenarios::*;
use qfi_core::symmetry::{certify_ckt, certify_ckv, ckt_from_ckvs};
use std::sync::Arc;

fn report_line(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {:02} {:<28} {} ({})",
        id,
        name,
        if pass { "PASS" } else { "FAIL" },
        detail
    );
    assert!(pass, "acceptance {id} {name}: {detail}");
}

fn find_check<'r>(report: &'r ScenarioReport, needle: &str) -> &'r Check {
    report
        .checks
        .iter()
        .find(|c| c.description.contains(needle))
        .unwrap_or_else(|| panic!("no check matching `{needle}` in {}", report.name))
}

#[test]
fn acceptance_01_spiral_reproduction() {
    let out = run_ermakov_spiral(&ErmakovParams::default(), &RunCfg::default()).unwrap();
    let slope = find_check(&out.report, "logarithmic-spiral slope B");
    let resid = find_check(&out.report, "spiral fit max residual");
    let r2 = find_check(&out.report, "r(t)^2 - (2 I2 t + c1)");
    let pass = (slope.expected - 1.0).abs() < 1e-14
        && (slope.observed - slope.expected).abs() <= 1e-5
        && resid.observed <= 1e-6
        && r2.observed <= 1e-7;
    report_line(
        1,
        "spiral-reproduction",
        pass,
        &format!(
            "B = {:.9} (target 1 +- 1e-5), fit residual {:.2e} <= 1e-6, r^2 law {:.2e} <= 1e-7",
            slope.observed, resid.observed, r2.observed
        ),
    );
}

#[test]
fn acceptance_02_ermakov_relation() {
    let out = run_ermakov_spiral(&ErmakovParams::default(), &RunCfg::default()).unwrap();
    let rel = find_check(&out.report, "Ermakov relation");
    let pass = (rel.observed - rel.expected).abs() <= 1e-7 && (rel.expected + 1.0).abs() < 1e-14;
    report_line(
        2,
        "ermakov-relation",
        pass,
        &format!(
            "I1 measured {:.12} vs -I2^2 - c c1 = {:.1} within 1e-7",
            rel.observed, rel.expected
        ),
    );
}

#[test]
fn acceptance_03_circle_orbits() {
    let out = run_sckv_circles(&CirclesParams::default(), &RunCfg::default()).unwrap();
    let circle = find_check(&out.report, "circle orbit residual");
    let lfi = find_check(&out.report, "LFI stays at its initial value");
    let pass = circle.observed <= 1e-7 && lfi.observed <= 1e-8;
    report_line(
        3,
        "circle-orbits",
        pass,
        &format!(
            "max |(x-1)^2 + y^2 - 1| = {:.2e} <= 1e-7, |LFI| = {:.2e} <= 1e-8",
            circle.observed, lfi.observed
        ),
    );
}

#[test]
fn acceptance_04_constant_curvature_geodesics() {
    let mut details = Vec::new();
    let mut pass = true;
    for (e0, branch) in [
        (1.0, CurvatureBranch::A3Zero),
        (-1.0, CurvatureBranch::A3Nonzero),
    ] {
        let out = run_constant_curvature(
            &ConstCurvParams {
                k: 1.0,
                e0,
                branch,
                horizon: 1.0,
            },
            &RunCfg::default(),
        )
        .unwrap();
        let param = find_check(&out.report, "parametric geodesic solution match");
        let rel = find_check(&out.report, "energy relation a0");
        let var = find_check(&out.report, "Ricci scalar sample variance");
        pass &= param.observed <= 1e-6
            && (rel.observed - rel.expected).abs() <= 1e-7
            && var.observed <= 1e-18;
        for name in ["lfi_1 drift", "lfi_2 drift", "lfi_3 drift"] {
            pass &= find_check(&out.report, name).observed <= 1e-8;
        }
        details.push(format!(
            "{branch:?}: param {:.2e}, a0 rel {:.2e}, R var {:.2e}",
            param.observed,
            (rel.observed - rel.expected).abs(),
            var.observed
        ));
    }
    report_line(4, "constant-curvature", pass, &details.join("; "));
}

#[test]
fn acceptance_05_no_kv_metric() {
    let out = run_no_kv_metric(&NoKvParams::default(), &RunCfg::default()).unwrap();
    let drift = find_check(&out.report, "QFI drift");
    let orbit = find_check(&out.report, "orbit y = ln(c1 x^2 - 2x)");
    let tlaw = find_check(&out.report, "time law quadrature vs trajectory");
    let rejected = matches!(
        run_no_kv_metric(
            &NoKvParams {
                e0: 0.5,
                ..Default::default()
            },
            &RunCfg::default()
        ),
        Err(qfi_core::Error::InfeasibleEnergy(_))
    );
    let pass =
        drift.observed <= 1e-7 && orbit.observed <= 1e-6 && tlaw.observed <= 1e-5 && rejected;
    report_line(
        5,
        "no-kv-metric",
        pass,
        &format!(
            "QFI drift {:.2e} <= 1e-7, orbit {:.2e} <= 1e-6, time law {:.2e} <= 1e-5, E0 >= 0 rejected: {rejected}",
            drift.observed, orbit.observed, tlaw.observed
        ),
    );
}

#[test]
fn acceptance_06_toda() {
    let out = run_toda(&TodaScenarioParams::default(), &RunCfg::default()).unwrap();
    let drift = find_check(&out.report, "QFI drift");
    let flat_default = find_check(&out.report, "flatness detected");
    let mut flat_params = TodaScenarioParams::default();
    flat_params.toda.b3 = 2.0 * (flat_params.toda.b2 - flat_params.toda.b1);
    let out_flat = run_toda(&flat_params, &RunCfg::default()).unwrap();
    let flat_flat = find_check(&out_flat.report, "flatness detected");
    let pass = drift.observed <= 1e-7 && flat_default.pass && flat_flat.pass;
    report_line(
        6,
        "toda",
        pass,
        &format!(
            "QFI drift {:.2e} <= 1e-7; flat detection correct on both parameter sets",
            drift.observed
        ),
    );
}

#[test]
fn acceptance_07_symmetry_certificates() {
    let mut max_res: f64 = 0.0;
    let cfg = CertConfig::default();

    let e2 = catalog::euclidean(2);
    for entry in catalog::e2_catalog() {
        let obj = certify_ckv(&e2, &entry, &cfg).unwrap();
        max_res = max_res.max(obj.certificate.max_residual);
    }
    let cc = catalog::constant_curvature(1.0);
    for entry in catalog::constant_curvature_kvs(1.0) {
        let obj = certify_ckv(&cc, &entry, &cfg).unwrap();
        max_res = max_res.max(obj.certificate.max_residual);
    }
    let nokv = catalog::no_kv_metric();
    let ckt = catalog::off_diagonal_ckt(
        catalog::scalar_no_kv_f(),
        Func1::exp_scaled(1.0, -2.0),
        Func1::zero(),
    );
    let obj = certify_ckt(&nokv, "no-kv-ckt", ckt.tensor, Some(ckt.associated_vector), &cfg)
        .unwrap();
    max_res = max_res.max(obj.certificate.max_residual);
    let p = catalog::TodaParams::default();
    let toda = catalog::toda_metric(&p).unwrap();
    let ckt = catalog::off_diagonal_ckt(
        catalog::scalar_toda_f(&p),
        Func1::zero(),
        Func1::exp_scaled(1.0, -std::f64::consts::SQRT_2 * p.b1),
    );
    let obj =
        certify_ckt(&toda, "toda-ckt", ckt.tensor, Some(ckt.associated_vector), &cfg).unwrap();
    max_res = max_res.max(obj.certificate.max_residual);

    // Construction correctness: a deterministic batch of coefficient mixes
    // must always certify.
    let cat = catalog::e2_catalog();
    let mut max_ctor: f64 = 0.0;
    let mut rng: u64 = 0x9e3779b97f4a7c15;
    for case in 0..12 {
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng >> 33) as f64 / (1u64 << 31) as f64) * 4.0 - 2.0
        };
        let coeffs = vec![
            ((case % 6, (case + 1) % 6), next()),
            (((case + 2) % 6, (case + 4) % 6), next()),
        ];
        let coeffs: Vec<((usize, usize), f64)> = coeffs
            .into_iter()
            .map(|((a, b), c)| if a <= b { ((a, b), c) } else { ((b, a), c) })
            .collect();
        let f: Arc<dyn ScalarField> = if case % 2 == 0 {
            qfi_core::field::zero_scalar(2)
        } else {
            Arc::new(qfi_core::field::DualScalar::new(2, |v| {
                &(&v[0] * &v[1]) + &v[1].powi(2)
            }))
        };
        let obj = ckt_from_ckvs(&e2, f, &cat, &coeffs, &cfg).unwrap();
        max_ctor = max_ctor.max(obj.certificate.max_residual);
    }

    let pass = max_res <= 1e-10 && max_ctor <= 1e-10;
    report_line(
        7,
        "symmetry-certificates",
        pass,
        &format!(
            "catalog max residual {:.2e} <= 1e-10 at 200 points; construction max {:.2e} <= 1e-10",
            max_res, max_ctor
        ),
    );
}

#[test]
fn acceptance_08_condition_conservation_coupling() {
    let mut worst_cond: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    for shipped in shipped_qfi_specs().unwrap() {
        worst_cond = worst_cond.max(shipped.spec.max_condition_residual());
        let spec = Arc::new(shipped.spec);
        let mon = FiMonitor::from_qfi(&spec);
        let traj = integrate(
            &shipped.sys,
            &shipped.initial,
            shipped.horizon,
            1e-10,
            &[mon],
            &[],
        )
        .unwrap();
        let rep = monitor_report(&traj);
        worst_drift = worst_drift.max(rep.fis[0].max_drift);
    }

    // Negative control: perturb V by 1% and monitor the original LFI spec.
    let spiral = spiral_system(-1.0);
    let perturbed = ConstrainedSystem::new(
        spiral.metric.clone(),
        qfi_core::field::scale(1.01, spiral.potential.clone()),
        spiral.energy,
    );
    let hv = certify_ckv(
        &spiral.metric,
        &catalog::e2_catalog()
            .into_iter()
            .find(|e| e.name == "hv")
            .unwrap(),
        &CertConfig::default(),
    )
    .unwrap();
    let spec = Arc::new(qfi_core::qfi::build_j2(&spiral, &hv, &CertConfig::with_tol(1e-9)).unwrap());
    let mon = FiMonitor::from_qfi(&spec);
    let s0 = spiral_initial(-1.0, 1.0).unwrap();
    let traj = integrate(&perturbed, &s0, 2.0, 1e-10, &[mon], &[]).unwrap();
    let corrupted_drift = monitor_report(&traj).fis[0].max_drift;

    let pass = worst_cond <= 1e-9 && worst_drift <= 1e-7 && corrupted_drift > 1e-3;
    report_line(
        8,
        "condition-conservation",
        pass,
        &format!(
            "conditions {:.2e} <= 1e-9 imply drift {:.2e} <= 1e-7; corrupted V drift {:.2e} > 1e-3",
            worst_cond, worst_drift, corrupted_drift
        ),
    );
}

#[test]
fn acceptance_09_multiplier_factorization() {
    let shipped = shipped_qfi_specs().unwrap();
    let mut states = 0usize;
    let mut worst: f64 = 0.0;
    'outer: loop {
        for shipped in &shipped {
            let bx = catalog::sample_box_for(&shipped.sys.metric);
            let pts = sample_points(&bx, &shipped.sys.domain(), 4, 31 + states as u64);
            for q in &pts {
                let n = shipped.sys.dim();
                let qd: Vec<f64> = (0..n)
                    .map(|a| 0.9 - 0.17 * ((states + a) % 9) as f64)
                    .collect();
                let t = 0.11 * (states % 10) as f64;
                let lhs = shipped.spec.ddt_along_flow(&shipped.sys, t, q, &qd).unwrap();
                let rhs = shipped.spec.multiplier_rhs(&shipped.sys, t, q, &qd).unwrap();
                worst = worst.max((lhs - rhs).abs());
                states += 1;
                if states >= 100 {
                    break 'outer;
                }
            }
        }
    }
    let pass = worst <= 1e-8;
    report_line(
        9,
        "multiplier-factorization",
        pass,
        &format!("max |dI/dt - multiplier| = {:.2e} <= 1e-8 over {states} off-shell states", worst),
    );
}

#[test]
fn acceptance_10_pde_residual_checks() {
    // The displayed polynomial form of the integrability PDE for the no-KV
    // metric: (A1 + 3/2 A1' + 1/2 A1'') x + e^y (4 A1 + 3 A1' + 1/2 A1'').
    let a1 = Func1::exp_scaled(1.0, -2.0);
    let pde_2d34 = |q: &[f64]| {
        let y = q[1];
        let (a, d1, d2) = (a1.eval(y), a1.d1(y), a1.d2(y));
        (a + 1.5 * d1 + 0.5 * d2) * q[0] + y.exp() * (4.0 * a + 3.0 * d1 + 0.5 * d2)
    };
    let nokv = catalog::no_kv_metric();
    let pts = sample_points(
        &catalog::sample_box_for(&nokv),
        &nokv.domain(),
        200,
        13,
    );
    let max_34 = pts.iter().map(|q| pde_2d34(q).abs()).fold(0.0, f64::max);

    let p = catalog::TodaParams::default();
    let toda_f = catalog::scalar_toda_f(&p);
    let a2 = Func1::exp_scaled(1.0, -std::f64::consts::SQRT_2 * p.b1);
    let toda = catalog::toda_metric(&p).unwrap();
    let tpts = sample_points(
        &catalog::sample_box_for(&toda),
        &toda.domain(),
        200,
        13,
    );
    let max_toda = tpts
        .iter()
        .map(|q| {
            qfi_core::symmetry::g_integrability_pde_residual(
                toda_f.as_ref(),
                &Func1::zero(),
                &a2,
                q,
            )
            .abs()
        })
        .fold(0.0, f64::max);

    // Random coefficient functions must fail somewhere.
    let bad1 = pts
        .iter()
        .map(|q| {
            qfi_core::symmetry::g_integrability_pde_residual(
                catalog::scalar_no_kv_f().as_ref(),
                &Func1::poly(vec![1.0, 0.0, 1.0]),
                &Func1::poly(vec![0.0, 1.0]),
                q,
            )
            .abs()
        })
        .fold(0.0, f64::max);
    let bad2 = tpts
        .iter()
        .map(|q| {
            qfi_core::symmetry::g_integrability_pde_residual(
                toda_f.as_ref(),
                &Func1::new(|u| u.sin(), |u| u.cos(), |u| -u.sin()),
                &Func1::poly(vec![0.3]),
                q,
            )
            .abs()
        })
        .fold(0.0, f64::max);

    let pass = max_34 <= 1e-10 && max_toda <= 1e-10 && bad1 >= 1e-3 && bad2 >= 1e-3;
    report_line(
        10,
        "pde-residual-checks",
        pass,
        &format!(
            "worked pairs {:.2e}/{:.2e} <= 1e-10 at 200 points; random pairs reach {:.2e}/{:.2e} >= 1e-3",
            max_34, max_toda, bad1, bad2
        ),
    );
}
