use std::fs;

use satindex_core::basin::{equilibrium_ray_check, BasinProbe, BasinVerdict, PairSource, RayFlag};
use satindex_core::dynamics::{integrate_adaptive, IntegratorOptions};
use satindex_core::equilibria::{enumerate_equilibria, parity_check, GP_TOL};
use satindex_core::nalgebra::DVector;
use satindex_core::num_complex::Complex64;
use satindex_core::{index_sum_check, place_poles_single_input, reference, validate_spec};
use serde::Serialize;
use serde_json::json;

use crate::args::ReproduceArgs;
use crate::output::{io_error, CliError, Envelope, RunConfig, EXIT_CHECK_FAILED, EXIT_OK};

/// Horizon of the exported example trajectories.
const TRAJECTORY_HORIZON: f64 = 20.0;
/// Allowed distance between the boundary bracket and a saturated equilibrium.
const EQUILIBRIUM_RAY_SLACK: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, expected: impl Into<String>, actual: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.to_string(),
            expected: expected.into(),
            actual: actual.into(),
            pass,
        }
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.9}")).collect();
    format!("({})", items.join(", "))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn run(args: &ReproduceArgs) -> Result<i32, CliError> {
    let mut config = RunConfig::new("reproduce-paper", Some(&args.out));
    config.seed = Some(args.seed);
    config.rays = Some(args.rays);
    config.tol = Some(args.tol);
    config.t_max = Some(args.integration.t_max);
    config.rel_tol = Some(args.integration.rel_tol);
    config.abs_tol = Some(args.integration.abs_tol);
    let options = IntegratorOptions::with_tolerances(args.integration.rel_tol, args.integration.abs_tol);

    let spec = reference::system();
    let mut checks = Vec::new();

    let report = validate_spec(&spec);
    let mut eig_re: Vec<f64> = report.eig_closed_loop.iter().map(|l| l.re).collect();
    eig_re.sort_by(f64::total_cmp);
    let max_im = report.eig_closed_loop.iter().map(|l| l.im.abs()).fold(0.0, f64::max);
    let eig_err = max_abs_diff(&eig_re, &[-3.0, -2.0, -1.0]).max(max_im);
    checks.push(Check::new(
        "closed-loop eigenvalues",
        "{-3, -2, -1} within 1e-9",
        fmt_vec(&eig_re),
        eig_err <= 1e-9,
    ));
    checks.push(Check::new(
        "validation",
        "A anti-stable, (A, b) controllable, A + bk Hurwitz",
        format!(
            "anti_stable={} controllable={} hurwitz={}",
            report.anti_stable, report.controllable, report.closed_loop_hurwitz
        ),
        report.all_ok(),
    ));

    let b = DVector::from_column_slice(spec.b().column(0).as_slice());
    let poles = [-1.0, -2.0, -3.0].map(|p| Complex64::new(p, 0.0));
    let k_expected = [7.0 / 3.0, -4.0 / 3.0, -35.0 / 12.0];
    let placed = place_poles_single_input(spec.a(), &b, &poles)?;
    let placed: Vec<f64> = placed.iter().copied().collect();
    checks.push(Check::new(
        "pole placement",
        format!("k = {} within 1e-9", fmt_vec(&k_expected)),
        fmt_vec(&placed),
        max_abs_diff(&placed, &k_expected) <= 1e-9,
    ));

    let set = enumerate_equilibria(&spec, GP_TOL);
    let found: Vec<(String, Vec<f64>, Option<i32>)> = set
        .equilibria
        .iter()
        .map(|e| (e.signature.to_string(), e.x.as_slice().to_vec(), e.index))
        .collect();
    let expected_eq = [
        ("N", vec![0.7, -0.1, 1.0], 1),
        ("L", vec![0.0, 0.0, 0.0], -1),
        ("P", vec![-0.7, 0.1, -1.0], 1),
    ];
    let eq_ok = found.len() == 3
        && found
            .iter()
            .zip(&expected_eq)
            .all(|((sig, x, idx), (esig, ex, eidx))| sig == esig && max_abs_diff(x, ex) <= 1e-9 && *idx == Some(*eidx));
    checks.push(Check::new(
        "equilibria",
        "N: (0.7, -0.1, 1) index +1; L: origin index -1; P: (-0.7, 0.1, -1) index +1",
        found
            .iter()
            .map(|(s, x, i)| format!("{s}: {} index {i:?}", fmt_vec(x)))
            .collect::<Vec<_>>()
            .join("; "),
        eq_ok,
    ));
    let parity = parity_check(&spec)?;
    checks.push(Check::new(
        "parity law",
        "3 equilibria for n = 3, index sum +1",
        format!("count {} index sum {}", parity.count, parity.index_sum),
        parity.pass,
    ));
    let index_sum = index_sum_check(&spec, None, args.seed)?;
    checks.push(Check::new(
        "index sum",
        "sum of indices = degree = +1",
        format!("{} = {} at r = {:.6}", index_sum.lhs, index_sum.rhs, index_sum.radius),
        index_sum.pass && index_sum.lhs == 1 && index_sum.rhs == 1,
    ));

    let probe = BasinProbe::new(&spec, args.integration.t_max, options)?;
    let points = [("p1", reference::P1), ("p2", reference::P2), ("p3", reference::P3)];
    let expected_fates = [BasinVerdict::In, BasinVerdict::In, BasinVerdict::Out];
    let mut fates = serde_json::Map::new();
    let mut fate_reports = serde_json::Map::new();
    for ((name, x), want) in points.iter().zip(expected_fates) {
        let report = probe.classifier().classify(x)?;
        let got = BasinVerdict::from(report.verdict);
        checks.push(Check::new(
            &format!("fate {name}"),
            want.to_string(),
            got.to_string(),
            got == want,
        ));
        fates.insert(name.to_string(), json!(got));
        fate_reports.insert(name.to_string(), json!(report));
    }

    let convexity = probe.convexity(&PairSource::Explicit(Vec::new()))?;
    let triple = convexity.violations.iter().find(|v| v.is_reference_triple);
    checks.push(Check::new(
        "convexity counterexample",
        format!("(p1 + p2) / 2 = {} is Out", fmt_vec(&reference::P3)),
        triple.map_or_else(
            || "no violation".to_string(),
            |v| format!("violation at {}", fmt_vec(&v.midpoint)),
        ),
        convexity.contains_paper_triple && triple.is_some_and(|v| max_abs_diff(&v.midpoint, &reference::P3) <= 5e-7),
    ));

    let cloud = probe.point_cloud(args.rays, args.seed, args.tol)?;
    let ok = cloud.records.iter().filter(|r| r.flag == RayFlag::Ok).count();
    let too_wide = cloud
        .records
        .iter()
        .filter(|r| r.flag == RayFlag::Ok && r.r_hi - r.r_lo > args.tol)
        .count();
    checks.push(Check::new(
        "boundary point cloud",
        format!("{} rays, widths <= {} or flagged", args.rays, args.tol),
        format!(
            "{} rays, {ok} ok, {} flagged, {too_wide} too wide",
            cloud.records.len(),
            cloud.records.len() - ok
        ),
        cloud.records.len() == args.rays && too_wide == 0,
    ));

    let eq_rays = equilibrium_ray_check(&probe, args.tol, EQUILIBRIUM_RAY_SLACK)?;

    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    let mut files = Vec::new();
    let mut write = |name: &str, text: String| -> Result<(), CliError> {
        let path = out.join(name);
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        files.push(name.to_string());
        Ok(())
    };
    write("system.json", spec.to_json() + "\n")?;
    write("equilibria.json", pretty(&set)?)?;
    write("convexity.json", pretty(&convexity)?)?;
    write("cloud.csv", cloud.to_csv())?;
    for (name, x) in points {
        let traj = integrate_adaptive(
            &spec,
            &DVector::from_row_slice(&x),
            TRAJECTORY_HORIZON,
            options.rel_tol,
            options.abs_tol,
        )?;
        write(&format!("trajectory_{name}.csv"), traj.to_csv())?;
    }

    let pass = checks.iter().all(|c| c.pass);
    let summary = json!({
        "pass": pass,
        "checks": checks,
        "fates": fates,
        "fate_reports": fate_reports,
        "closed_loop_eigenvalues": report.eig_closed_loop.iter().map(|l| [l.re, l.im]).collect::<Vec<_>>(),
        "certificates": {
            "lyapunov_level": probe.classifier().inner().level,
            "ellipsoid_radius": probe.classifier().inner().bounding_radius,
            "escape_radius": probe.classifier().outer().map(|c| c.r_div),
            "escape_level": probe.classifier().outer().map(|c| c.w_max),
        },
        "exploratory": {
            "equilibrium_rays": eq_rays,
            "note": "boundary bracket along each saturated equilibrium's ray; reported only",
        },
        "files": files.clone(),
    });
    let envelope = Envelope {
        command: "reproduce-paper",
        config: &config,
        status: if pass { "ok" } else { "check_failed" },
        result: summary,
    };
    let text = pretty(&envelope)?;
    fs::write(out.join("summary.json"), &text).map_err(|e| io_error(&out.join("summary.json"), e))?;
    print!("{text}");

    if !pass {
        eprintln!("{}", diff_report(&checks));
        return Ok(EXIT_CHECK_FAILED);
    }
    Ok(EXIT_OK)
}

fn pretty<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::failed(e.to_string()))
}

/// Failed checks as `-expected` / `+actual` lines.
pub fn diff_report(checks: &[Check]) -> String {
    let mut out = String::new();
    for c in checks.iter().filter(|c| !c.pass) {
        out.push_str(&format!("@@ {} @@\n-{}\n+{}\n", c.name, c.expected, c.actual));
    }
    out
}
