//! End-to-end scenario runs: every default-parameter report must pass all of
//! its checks, and infeasible parameter sets must be rejected with the right
//! error.

use qfi_core::error::Error;
use qfi_core::scenarios::*;

fn assert_all_pass(out: &ScenarioOutput) {
    for c in &out.report.checks {
        assert!(
            c.pass,
            "[{}] failed check `{}`: expected {:.6e}, observed {:.6e}, tol {:.1e}",
            out.report.name, c.description, c.expected, c.observed, c.tolerance
        );
    }
}

#[test]
fn constant_curvature_exp_branch() {
    let out = run_constant_curvature(&ConstCurvParams::default(), &RunCfg::default()).unwrap();
    assert_all_pass(&out);
}

#[test]
fn constant_curvature_tan_branch() {
    let out = run_constant_curvature(
        &ConstCurvParams {
            e0: -1.0,
            branch: CurvatureBranch::A3Nonzero,
            ..Default::default()
        },
        &RunCfg::default(),
    )
    .unwrap();
    assert_all_pass(&out);
}

#[test]
fn no_kv_defaults() {
    let out = run_no_kv_metric(&NoKvParams::default(), &RunCfg::default()).unwrap();
    assert_all_pass(&out);
}

#[test]
fn toda_defaults() {
    let out = run_toda(&TodaScenarioParams::default(), &RunCfg::default()).unwrap();
    assert_all_pass(&out);
}

#[test]
fn toda_flat_member_detected() {
    let mut params = TodaScenarioParams::default();
    params.toda.b3 = 2.0 * (params.toda.b2 - params.toda.b1);
    let out = run_toda(&params, &RunCfg::default()).unwrap();
    assert_all_pass(&out);
    assert!(out.report.params["flat_family_member"].as_bool().unwrap());
}

#[test]
fn reports_are_deterministic() {
    let a = run_ermakov_spiral(&ErmakovParams::default(), &RunCfg::default()).unwrap();
    let b = run_ermakov_spiral(&ErmakovParams::default(), &RunCfg::default()).unwrap();
    let ja = serde_json::to_string(&a.report).unwrap();
    let jb = serde_json::to_string(&b.report).unwrap();
    assert_eq!(ja, jb);
}

#[test]
fn flat_lorentzian_energy_identity_examples() {
    // k1 = 0, k3 = sqrt(2) gives E0 = 1 by construction.
    let out = run_flat_lorentzian_remark1(&Remark1Params::default(), &RunCfg::default()).unwrap();
    let k3 = out.report.params["k3"].as_f64().unwrap();
    assert!((k3 - std::f64::consts::SQRT_2).abs() < 1e-12);
    assert_all_pass(&out);
}

#[test]
fn shipped_specs_all_certify() {
    for shipped in shipped_qfi_specs().unwrap() {
        assert!(
            shipped.spec.certified(1e-9),
            "{} has residual {:.3e}",
            shipped.name,
            shipped.spec.max_condition_residual()
        );
    }
}

#[test]
fn degenerate_and_infeasible_params_error_cleanly() {
    assert!(matches!(
        run_constant_curvature(
            &ConstCurvParams {
                k: 0.0,
                ..Default::default()
            },
            &RunCfg::default()
        ),
        Err(Error::DegenerateParams(_))
    ));
    assert!(matches!(
        run_flat_lorentzian_remark1(
            &Remark1Params {
                e0: 0.0,
                ..Default::default()
            },
            &RunCfg::default()
        ),
        Err(Error::DegenerateParams(_))
    ));
    assert!(matches!(
        run_no_kv_metric(
            &NoKvParams {
                c1: 0.0,
                ..Default::default()
            },
            &RunCfg::default()
        ),
        Err(Error::BadConfig(_))
    ));
}
