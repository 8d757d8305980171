//! qfi-lab: scenario runner, symmetry/QFI verifier and trajectory exporter.
//!
//! Exit codes: 0 success, 2 check/certificate failure, 3 infeasible
//! parameters, 4 bad configuration or parse error, 5 step-size underflow
//! (partial trajectory written and flagged).

mod spec_file;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qfi_core::dynamics::{
    initial_state_on_shell, integrate_with_status, monitor_report, FiMonitor, IntegrationStatus,
    State, Trajectory,
};
use qfi_core::error::Error;
use qfi_core::io::{trajectory_to_csv, write_atomic};
use qfi_core::qfi::ConstrainedSystem;
use qfi_core::sampling::{sample_points, CertConfig};
use qfi_core::scenarios::{self, RunCfg, ScenarioOutput};
use spec_file::SpecFile;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "qfi-lab",
    about = "Quadratic first integrals of energy-constrained systems: reproduce, verify, integrate",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Residual / integration tolerance; must lie in (1e-14, 1e-2).
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,

    /// Seed offsetting the quasi-random certification sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output directory (env QFI_LAB_OUT overrides).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Artifact format for trajectories.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Parallel scenario jobs for `reproduce all`.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a named scenario (or `all`) and write report.json + trajectories.
    Reproduce {
        /// ermakov-spiral | sckv-circles | constant-curvature |
        /// flat-lorentzian | no-kv | toda | all
        scenario: String,
        #[command(flatten)]
        params: ScenarioArgs,
    },
    /// Verify a symmetry or QFI candidate from a declarative file.
    Verify {
        /// e2 | const-curvature | no-kv | toda | flat-lorentzian | off-diagonal
        metric_id: String,
        object_file: PathBuf,
        /// ckv | ckt | qfi (falls back to `kind =` in the file)
        #[arg(long)]
        kind: Option<String>,
    },
    /// Integrate an ad-hoc system from a declarative file and export the
    /// trajectory.
    Integrate {
        system_file: PathBuf,
        /// Overrides `horizon =` in the file.
        #[arg(long)]
        horizon: Option<f64>,
        /// Also emit bare (x, y) pairs for plotting.
        #[arg(long)]
        plot_data: bool,
    },
    /// List scenarios, metric families and symmetry catalogs.
    List,
}

#[derive(Args, Clone, Default)]
struct ScenarioArgs {
    #[arg(long)]
    k: Option<f64>,
    #[arg(id = "I2", long = "I2")]
    i2: Option<f64>,
    #[arg(id = "E0", long = "E0")]
    e0: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(id = "M", long = "M")]
    m: Option<f64>,
    #[arg(id = "I02", long = "I02")]
    i02: Option<f64>,
    /// a3_zero | a3_nonzero (constant-curvature)
    #[arg(long)]
    branch: Option<String>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    k2: Option<f64>,
    #[arg(long)]
    k4: Option<f64>,
    #[arg(long)]
    b1: Option<f64>,
    #[arg(long)]
    b2: Option<f64>,
    #[arg(long)]
    b3: Option<f64>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InfeasibleEnergy(_)
        | Error::BranchInfeasible(_)
        | Error::DegenerateParams(_)
        | Error::NullDirectionRequired => 3,
        Error::Parse(_)
        | Error::BadConfig(_)
        | Error::UnknownFamily(_)
        | Error::MixedMetric(_, _) => 4,
        Error::StepSizeUnderflow { .. } => 5,
        Error::ConditionViolated { .. } | Error::UncertifiedSymmetry(_, _) => 2,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.tol <= 1e-14 || cli.tol >= 1e-2 {
        eprintln!("error: --tol must lie in (1e-14, 1e-2), got {}", cli.tol);
        return ExitCode::from(4);
    }
    let out_dir = std::env::var_os("QFI_LAB_OUT")
        .map(PathBuf::from)
        .or_else(|| cli.out.clone())
        .unwrap_or_else(|| PathBuf::from("qfi-lab-out"));

    let result = match &cli.cmd {
        Cmd::Reproduce { scenario, params } => cmd_reproduce(&cli, scenario, params, &out_dir),
        Cmd::Verify {
            metric_id,
            object_file,
            kind,
        } => cmd_verify(&cli, metric_id, object_file, kind.as_deref()),
        Cmd::Integrate {
            system_file,
            horizon,
            plot_data,
        } => cmd_integrate(&cli, system_file, *horizon, *plot_data, &out_dir),
        Cmd::List => {
            cmd_list();
            Ok(0)
        }
    };

    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

// ---------------------------------------------------------------------------
// reproduce
// ---------------------------------------------------------------------------

fn run_one_scenario(
    name: &str,
    args: &ScenarioArgs,
    cfg: &RunCfg,
) -> Result<ScenarioOutput, Error> {
    match name {
        "ermakov-spiral" => {
            let mut p = scenarios::ErmakovParams::default();
            if let Some(k) = args.k {
                p.k = k;
            }
            if let Some(i2) = args.i2 {
                p.i2 = i2;
            }
            if let Some(h) = args.horizon {
                p.horizon = h;
            }
            scenarios::run_ermakov_spiral(&p, cfg)
        }
        "sckv-circles" => {
            let mut p = scenarios::CirclesParams::default();
            if let Some(c1) = args.c1 {
                p.c1 = c1;
            }
            if let Some(m) = args.m {
                p.m = m;
            }
            if let Some(i02) = args.i02 {
                p.i02 = i02;
            }
            if let Some(h) = args.horizon {
                p.horizon = h;
            }
            scenarios::run_sckv_circles(&p, cfg)
        }
        "constant-curvature" => {
            let mut p = scenarios::ConstCurvParams::default();
            if let Some(k) = args.k {
                p.k = k;
            }
            if let Some(e0) = args.e0 {
                p.e0 = e0;
            }
            if let Some(h) = args.horizon {
                p.horizon = h;
            }
            if let Some(b) = &args.branch {
                p.branch = match b.as_str() {
                    "a3_zero" => scenarios::CurvatureBranch::A3Zero,
                    "a3_nonzero" => scenarios::CurvatureBranch::A3Nonzero,
                    other => {
                        return Err(Error::BadConfig(format!(
                            "unknown branch `{other}` (a3_zero | a3_nonzero)"
                        )))
                    }
                };
            } else if let Some(e0) = args.e0 {
                // Pick the feasible branch for the requested energy.
                let k = args.k.unwrap_or(1.0);
                p.branch = if e0 / k > 0.0 {
                    scenarios::CurvatureBranch::A3Zero
                } else {
                    scenarios::CurvatureBranch::A3Nonzero
                };
            }
            scenarios::run_constant_curvature(&p, cfg)
        }
        "flat-lorentzian" => {
            let mut p = scenarios::Remark1Params::default();
            if let Some(e0) = args.e0 {
                p.e0 = e0;
            }
            if let Some(k1) = args.k1 {
                p.k1 = k1;
            }
            if let Some(k2) = args.k2 {
                p.k2 = k2;
            }
            if let Some(k4) = args.k4 {
                p.k4 = k4;
            }
            if let Some(h) = args.horizon {
                p.horizon = h;
            }
            scenarios::run_flat_lorentzian_remark1(&p, cfg)
        }
        "no-kv" => {
            let mut p = scenarios::NoKvParams::default();
            if let Some(e0) = args.e0 {
                p.e0 = e0;
            }
            if let Some(c1) = args.c1 {
                p.c1 = c1;
            }
            if let Some(x0) = args.x0 {
                p.x0 = x0;
            }
            if let Some(h) = args.horizon {
                p.horizon = h;
            }
            scenarios::run_no_kv_metric(&p, cfg)
        }
        "toda" => {
            let mut p = scenarios::TodaScenarioParams::default();
            if let Some(k1) = args.k1 {
                p.toda.k1 = k1;
            }
            if let Some(k2) = args.k2 {
                p.toda.k2 = k2;
            }
            if let Some(b1) = args.b1 {
                p.toda.b1 = b1;
            }
            if let Some(b2) = args.b2 {
                p.toda.b2 = b2;
            }
            if let Some(b3) = args.b3 {
                p.toda.b3 = b3;
            }
            if let Some(e0) = args.e0 {
                p.e0 = e0;
            }
            if let Some(h) = args.horizon {
                p.horizon = h;
            }
            scenarios::run_toda(&p, cfg)
        }
        other => Err(Error::UnknownFamily(other.into())),
    }
}

fn write_scenario_output(
    cli_format: Format,
    out_dir: &Path,
    mut out: ScenarioOutput,
) -> Result<bool, Error> {
    let dir = out_dir.join(&out.report.name);
    for (stem, traj) in &out.trajectories {
        let rel = match cli_format {
            Format::Csv => format!("{stem}.csv"),
            Format::Json => format!("{stem}.json"),
        };
        let path = dir.join(&rel);
        let contents = match cli_format {
            Format::Csv => trajectory_to_csv(traj),
            Format::Json => trajectory_json(traj),
        };
        write_atomic(&path, &contents)
            .map_err(|e| Error::BadConfig(format!("cannot write {}: {e}", path.display())))?;
        out.report.artifacts.push(path.display().to_string());
    }
    let report_path = dir.join("report.json");
    let json = serde_json::to_string_pretty(&out.report)
        .map_err(|e| Error::BadConfig(format!("report serialization: {e}")))?;
    write_atomic(&report_path, &json)
        .map_err(|e| Error::BadConfig(format!("cannot write {}: {e}", report_path.display())))?;

    let all_pass = out.report.all_pass();
    for c in &out.report.checks {
        println!(
            "[{}] {} {}: expected {:.6e}, observed {:.6e}, tol {:.1e}",
            out.report.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.description,
            c.expected,
            c.observed,
            c.tolerance
        );
    }
    println!("[{}] report: {}", out.report.name, report_path.display());
    Ok(all_pass)
}

fn trajectory_json(traj: &Trajectory) -> String {
    let n = traj.states.first().map(|s| s.q.len()).unwrap_or(0);
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=n).map(|i| format!("q{i}")));
    header.extend((1..=n).map(|i| format!("qd{i}")));
    header.push("H_minus_E0".into());
    header.extend(traj.monitor_names.iter().cloned());
    let rows: Vec<Vec<f64>> = traj
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut row = vec![s.t];
            row.extend(&s.q);
            row.extend(&s.qdot);
            row.push(traj.energy_residual[i]);
            for series in &traj.monitors {
                row.push(series[i]);
            }
            row
        })
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({
        "header": header,
        "rows": rows,
    }))
    .expect("trajectory serialization")
}

fn cmd_reproduce(
    cli: &Cli,
    scenario: &str,
    params: &ScenarioArgs,
    out_dir: &Path,
) -> Result<u8, Error> {
    let cfg = RunCfg {
        tol: cli.tol,
        seed: cli.seed,
    };
    let names: Vec<&str> = if scenario == "all" {
        scenarios::SCENARIO_NAMES.to_vec()
    } else {
        vec![scenario]
    };

    let mut all_pass = true;
    if names.len() > 1 && cli.jobs > 1 {
        let results: Vec<Result<ScenarioOutput, Error>> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for chunk in names.chunks(names.len().div_ceil(cli.jobs)) {
                let cfg = cfg.clone();
                let params = params.clone();
                handles.push(scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|n| run_one_scenario(n, &params, &cfg))
                        .collect::<Vec<_>>()
                }));
            }
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("scenario thread"))
                .collect()
        });
        for res in results {
            all_pass &= write_scenario_output(cli.format, out_dir, res?)?;
        }
    } else {
        for name in names {
            let out = run_one_scenario(name, params, &cfg)?;
            all_pass &= write_scenario_output(cli.format, out_dir, out)?;
        }
    }
    Ok(if all_pass { 0 } else { 2 })
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

const VERIFY_KEYS: [&str; 22] = [
    "kind", "builtin", "metric", "k", "k1", "k2", "b1", "b2", "b3", "f", "Lx", "Ly", "G", "V",
    "E0", "I2", "Uxx", "Uxy", "Uyy", "Cxx", "Cxy", "Cyy",
];

fn cmd_verify(
    cli: &Cli,
    metric_id: &str,
    object_file: &Path,
    kind_flag: Option<&str>,
) -> Result<u8, Error> {
    let text = std::fs::read_to_string(object_file)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", object_file.display())))?;
    let file = SpecFile::parse(&text)?;
    file.check_keys(&VERIFY_KEYS, false)?;

    let metric = spec_file::resolve_metric(metric_id, &file)?;
    let kind = kind_flag
        .map(|s| s.to_string())
        .or_else(|| file.get("kind").map(|s| s.to_string()))
        .ok_or_else(|| Error::BadConfig("missing --kind or `kind =` in file".into()))?;

    let cert_cfg = CertConfig {
        n_points: 200,
        tol: cli.tol,
        seed: cli.seed,
    };

    match kind.as_str() {
        "ckv" => {
            let (vector, builtin_psi) = if let Some(name) = file.get("builtin") {
                let entry = builtin_ckv(&metric, name)?;
                (entry.vector.clone(), Some(entry.conformal_factor.clone()))
            } else {
                (spec_file::covector_from(&file, "Lx", "Ly")?, None)
            };
            let bx = qfi_core::catalog::sample_box_for(&metric);
            let dom = metric.domain().intersect(&vector.domain());
            let pts = sample_points(&bx, &dom, cert_cfg.n_points, cert_cfg.seed);
            let mut max_res: f64 = 0.0;
            let mut psis = Vec::new();
            for q in &pts {
                let (psi, res) = qfi_core::symmetry::ckv_residual(&metric, vector.as_ref(), q)?;
                max_res = max_res.max(res.norm());
                psis.push(psi);
            }
            let class = classify_from_psis(&metric, &psis, builtin_psi.as_ref(), &pts, cli.tol)?;
            println!(
                "ckv certificate: max residual {max_res:.3e} over {} points; class: {class}",
                pts.len()
            );
            Ok(if max_res <= cli.tol { 0 } else { 2 })
        }
        "ckt" => {
            let tensor = spec_file::sym2_from(&file, "U")?;
            let obj =
                qfi_core::symmetry::certify_ckt(&metric, "user-ckt", tensor, None, &cert_cfg)?;
            let bx = qfi_core::catalog::sample_box_for(&metric);
            let pts = sample_points(&bx, &metric.domain(), 60, cert_cfg.seed);
            let class = qfi_core::symmetry::classify_ckt(&metric, &obj, &pts, cli.tol)?;
            println!(
                "ckt certificate: max residual {:.3e} over {} points; KT: {}, proper: {}, trace-free: {}",
                obj.certificate.max_residual,
                obj.certificate.points_sampled,
                class.is_kt,
                class.is_proper,
                class.is_tracefree
            );
            Ok(if obj.certificate.passes(cli.tol) { 0 } else { 2 })
        }
        "qfi" => {
            let tensor = spec_file::sym2_from(&file, "C")?;
            let g = spec_file::scalar_from(&file, "G")?
                .ok_or_else(|| Error::BadConfig("qfi candidate needs `G = <expr>`".into()))?;
            let v = spec_file::scalar_from(&file, "V")?
                .unwrap_or_else(|| qfi_core::field::zero_scalar(2));
            let e0 = file.get_f64("E0")?.unwrap_or(0.0);
            let sys = ConstrainedSystem::new(metric.clone(), v, e0);
            let c0 = qfi_core::symmetry::certify_ckt(&metric, "user-c0", tensor, None, &cert_cfg)?;
            if !c0.certificate.passes(cli.tol) {
                println!(
                    "qfi candidate: C is not a CKT (residual {:.3e})",
                    c0.certificate.max_residual
                );
                return Ok(2);
            }
            match qfi_core::qfi::build_integral1(&sys, &c0, vec![], g, 0, &cert_cfg) {
                Ok(spec) => {
                    println!(
                        "qfi certificate: max condition residual {:.3e}; family {:?}",
                        spec.max_condition_residual(),
                        spec.family
                    );
                    Ok(if spec.certified(cli.tol) { 0 } else { 2 })
                }
                Err(Error::ConditionViolated {
                    condition,
                    max_residual,
                    tol,
                }) => {
                    println!(
                        "qfi candidate rejected: `{condition}` residual {max_residual:.3e} > {tol:.1e}"
                    );
                    Ok(2)
                }
                Err(e) => Err(e),
            }
        }
        other => Err(Error::BadConfig(format!(
            "unknown kind `{other}` (ckv | ckt | qfi)"
        ))),
    }
}

fn builtin_ckv(
    metric: &qfi_core::geometry::MetricSpec,
    name: &str,
) -> Result<qfi_core::catalog::CkvCatalogEntry, Error> {
    let entries = match metric.id.as_str() {
        "e2" => qfi_core::catalog::e2_catalog(),
        "const-curvature" => qfi_core::catalog::constant_curvature_kvs(1.0),
        other => {
            return Err(Error::UnknownFamily(format!(
                "no built-in CKV catalog for metric `{other}`"
            )))
        }
    };
    entries
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownFamily(format!("no built-in CKV `{name}`")))
}

fn classify_from_psis(
    metric: &qfi_core::geometry::MetricSpec,
    psis: &[f64],
    psi_field: Option<&std::sync::Arc<dyn qfi_core::field::ScalarField>>,
    pts: &[Vec<f64>],
    tol: f64,
) -> Result<String, Error> {
    if let Some(field) = psi_field {
        let class = qfi_core::symmetry::classify_ckv(metric, field, pts, tol)?;
        return Ok(format!("{class:?}"));
    }
    let max_abs = psis.iter().fold(0.0_f64, |m, p| m.max(p.abs()));
    if max_abs <= tol {
        return Ok("Killing".into());
    }
    let mean = psis.iter().sum::<f64>() / psis.len() as f64;
    let spread = psis.iter().fold(0.0_f64, |m, p| m.max((p - mean).abs()));
    if spread <= tol {
        return Ok("Homothetic".into());
    }
    Ok("Conformal (special-CKV test needs a closed-form factor)".into())
}

// ---------------------------------------------------------------------------
// integrate
// ---------------------------------------------------------------------------

const SYSTEM_KEYS: [&str; 15] = [
    "metric", "k", "k1", "k2", "b1", "b2", "b3", "f", "V", "E0", "q0", "qdot0", "direction",
    "horizon", "name",
];

fn cmd_integrate(
    cli: &Cli,
    system_file: &Path,
    horizon_flag: Option<f64>,
    plot_data: bool,
    out_dir: &Path,
) -> Result<u8, Error> {
    let text = std::fs::read_to_string(system_file)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", system_file.display())))?;
    let file = SpecFile::parse(&text)?;
    file.check_keys(&SYSTEM_KEYS, true)?;

    let metric_id = file
        .get("metric")
        .ok_or_else(|| Error::BadConfig("missing `metric =`".into()))?;
    let metric = spec_file::resolve_metric(metric_id, &file)?;
    let potential = spec_file::scalar_from(&file, "V")?;
    let e0 = file.get_f64("E0")?.unwrap_or(0.0);
    let sys = match potential {
        Some(v) => ConstrainedSystem::new(metric, v, e0),
        None => ConstrainedSystem::geodesic(metric, e0),
    };

    let q0 = file
        .get_vec("q0")?
        .ok_or_else(|| Error::BadConfig("missing `q0 = x, y`".into()))?;
    if q0.len() != sys.dim() {
        return Err(Error::BadConfig(format!(
            "q0 has {} components, metric dimension is {}",
            q0.len(),
            sys.dim()
        )));
    }
    let s0 = if let Some(qd0) = file.get_vec("qdot0")? {
        State {
            t: 0.0,
            q: q0,
            qdot: qd0,
        }
    } else if let Some(dir) = file.get_vec("direction")? {
        initial_state_on_shell(&sys, &q0, &dir)?
    } else {
        return Err(Error::BadConfig(
            "missing `qdot0 = ...` or `direction = ...`".into(),
        ));
    };

    let horizon = horizon_flag
        .or(file.get_f64("horizon")?)
        .ok_or_else(|| Error::BadConfig("missing `horizon =` (or --horizon)".into()))?;

    // Registered first-integral monitors: fi.<name> = expr(x, y, xd, yd, t, r).
    let mut monitors = Vec::new();
    for (key, src) in &file.entries {
        if let Some(name) = key.strip_prefix("fi.") {
            let ast = qfi_core::expr::parse(src)?;
            let params = file.params()?;
            let mut vars = Vec::new();
            qfi_core::expr::free_vars(&ast, &mut vars);
            for v in &vars {
                let known = ["x", "y", "xd", "yd", "t", "r"].contains(&v.as_str())
                    || params.contains_key(v);
                if !known {
                    return Err(Error::Parse(format!("unknown variable `{v}` in `{key}`")));
                }
            }
            monitors.push(FiMonitor::new(name, move |t, q, qd| {
                let mut env: HashMap<String, f64> = params.clone();
                env.insert("x".into(), q[0]);
                env.insert("y".into(), *q.get(1).unwrap_or(&0.0));
                env.insert("xd".into(), qd[0]);
                env.insert("yd".into(), *qd.get(1).unwrap_or(&0.0));
                env.insert("t".into(), t);
                env.insert("r".into(), q[0].hypot(*q.get(1).unwrap_or(&0.0)));
                qfi_core::expr::eval_f64(&ast, &env).unwrap_or(f64::NAN)
            }));
        }
    }

    let n_samples = 200;
    let samples: Vec<f64> = (0..n_samples)
        .map(|i| horizon * i as f64 / (n_samples - 1) as f64)
        .collect();
    let (traj, status) = integrate_with_status(&sys, &s0, horizon, cli.tol, &monitors, &samples)?;

    let name = file.get("name").unwrap_or("system");
    let dir = out_dir.join(name);
    let path = dir.join(match cli.format {
        Format::Csv => "trajectory.csv",
        Format::Json => "trajectory.json",
    });
    let contents = match cli.format {
        Format::Csv => trajectory_to_csv(&traj),
        Format::Json => trajectory_json(&traj),
    };
    write_atomic(&path, &contents)
        .map_err(|e| Error::BadConfig(format!("cannot write {}: {e}", path.display())))?;
    println!("trajectory: {}", path.display());

    if plot_data {
        let mut plot = String::new();
        for st in &traj.states {
            plot.push_str(&format!(
                "{:.16e} {:.16e}\n",
                st.q[0],
                st.q.get(1).copied().unwrap_or(0.0)
            ));
        }
        let ppath = dir.join("plot.dat");
        write_atomic(&ppath, &plot)
            .map_err(|e| Error::BadConfig(format!("cannot write {}: {e}", ppath.display())))?;
        println!("plot data: {}", ppath.display());
    }

    let rep = monitor_report(&traj);
    println!("max |H - E0| = {:.3e}", rep.max_energy_drift);
    for fi in &rep.fis {
        println!(
            "FI `{}`: initial {:.6e}, max drift {:.3e}",
            fi.name, fi.initial, fi.max_drift
        );
    }

    match status {
        IntegrationStatus::Completed => Ok(0),
        IntegrationStatus::Underflow { t, h } => {
            eprintln!(
                "warning: step size underflow at t = {t} (h = {h:.3e}); partial trajectory written"
            );
            Ok(5)
        }
    }
}

// ---------------------------------------------------------------------------
// list
// ---------------------------------------------------------------------------

fn cmd_list() {
    println!("scenarios:");
    for s in scenarios::SCENARIO_NAMES {
        println!("  {s}");
    }
    println!("metric families:");
    for m in [
        "e2                (flat Euclidean plane)",
        "const-curvature   (f = k/(x+y)^2; param k)",
        "no-kv             (f = -x^3 e^y (x + e^y))",
        "toda              (two-exponential family; params k1 k2 b1 b2 b3)",
        "flat-lorentzian   (f = x)",
        "off-diagonal      (user f = <expr>)",
    ] {
        println!("  {m}");
    }
    println!("built-in CKV catalogs:");
    for e in qfi_core::catalog::e2_catalog() {
        println!("  e2/{}", e.name);
    }
    for e in qfi_core::catalog::constant_curvature_kvs(1.0) {
        println!("  const-curvature/{}", e.name);
    }
}
