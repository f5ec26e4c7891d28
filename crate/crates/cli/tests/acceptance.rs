//! End-to-end acceptance criteria. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::fs;
use std::panic;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use satindex_core::basin::{BasinProbe, PairSource, RayFlag};
use satindex_core::degree::{auto_radius, piecewise_affine_degree, winding_number_spec};
use satindex_core::dynamics::{CertificateKind, FateClassifier, FateVerdict, DEFAULT_T_MAX};
use satindex_core::equilibria::{enumerate_equilibria, parity_check, sign_test, GP_TOL};
use satindex_core::nalgebra::{DMatrix, DVector};
use satindex_core::num_complex::Complex64;
use satindex_core::{
    classify_fate, convexity_probe, index_sum_check, integrate_adaptive, place_poles_single_input,
    random_antistable_system, reference, BasinVerdict,
};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn standard_normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn equilibria_and_indices() -> Outcome {
    let start = Instant::now();
    let spec = reference::system();
    let set = enumerate_equilibria(&spec, GP_TOL);
    let expected = [([0.7, -0.1, 1.0], 1), ([0.0, 0.0, 0.0], -1), ([-0.7, 0.1, -1.0], 1)];
    ensure(set.len() == 3, format!("{} equilibria", set.len()))?;
    for (eq, (x, idx)) in set.equilibria.iter().zip(expected) {
        ensure(
            dist(eq.x.as_slice(), &x) <= 1e-9,
            format!("equilibrium {:?} vs {x:?}", eq.x.as_slice()),
        )?;
        ensure(
            eq.index == Some(idx),
            format!("index {:?} at {x:?}, expected {idx}", eq.index),
        )?;
    }
    let sum = index_sum_check(&spec, None, 0).map_err(|e| e.to_string())?;
    ensure(
        sum.lhs == 1 && sum.rhs == 1,
        format!("index sum {} degree {}", sum.lhs, sum.rhs),
    )?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("origin -1, x+ +1, x- +1; sum = degree = 1 in {elapsed:.2?}"))
}

fn pole_placement() -> Outcome {
    let spec = reference::system();
    let b = DVector::from_column_slice(spec.b().column(0).as_slice());
    let poles = [-1.0, -2.0, -3.0].map(|p| Complex64::new(p, 0.0));
    let k = place_poles_single_input(spec.a(), &b, &poles).map_err(|e| e.to_string())?;
    let want = [7.0 / 3.0, -4.0 / 3.0, -35.0 / 12.0];
    let err = dist(k.as_slice(), &want);
    ensure(err <= 1e-9, format!("k = {:?}, max error {err:e}", k.as_slice()))?;
    Ok(format!("k = [7/3, -4/3, -35/12], max error {err:.1e}"))
}

fn counterexample_fates() -> Outcome {
    let start = Instant::now();
    let spec = reference::system();
    let expected = [
        (
            reference::p1(),
            FateVerdict::ConvergedToOrigin,
            CertificateKind::Lyapunov,
        ),
        (
            reference::p2(),
            FateVerdict::ConvergedToOrigin,
            CertificateKind::Lyapunov,
        ),
        (reference::p3(), FateVerdict::NotConverged, CertificateKind::Escape),
    ];
    let mut times = Vec::new();
    for (i, (x, verdict, cert)) in expected.into_iter().enumerate() {
        let r = classify_fate(&spec, &x, DEFAULT_T_MAX).map_err(|e| e.to_string())?;
        ensure(
            r.verdict == verdict && r.certificate == cert,
            format!("p{}: {:?} via {:?}", i + 1, r.verdict, r.certificate),
        )?;
        times.push(format!("{:.2}", r.t_decided));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!(
        "p1 In, p2 In, p3 Out (decided at t = {}) in {elapsed:.2?}",
        times.join(", ")
    ))
}

fn convexity_violation() -> Outcome {
    let report = convexity_probe(
        &reference::system(),
        &PairSource::Explicit(vec![(reference::P1.to_vec(), reference::P2.to_vec())]),
    )
    .map_err(|e| e.to_string())?;
    let v = report.violations.first().ok_or("no violation recorded")?;
    ensure(
        v.fates == [BasinVerdict::In, BasinVerdict::In, BasinVerdict::Out],
        format!("fates {:?}", v.fates),
    )?;
    let err = dist(&v.midpoint, &reference::P3);
    ensure(err <= 5e-7, format!("midpoint {:?} vs p3, error {err:e}", v.midpoint))?;
    ensure(report.contains_paper_triple, "reference triple not flagged")?;
    Ok(format!("midpoint {:?} matches p3 (error {err:.1e})", v.midpoint))
}

struct SweepRow {
    n: usize,
    generic: bool,
    degree: i32,
    index_sum: i32,
    winding: Option<i32>,
    count: usize,
    sign: f64,
}

fn sweep() -> Result<Vec<SweepRow>, String> {
    (0..100u64)
        .map(|seed| {
            let n = 2 + (seed % 4) as usize;
            let spec = random_antistable_system(n, seed).map_err(|e| e.to_string())?;
            let parity = parity_check(&spec).map_err(|e| e.to_string())?;
            let generic = parity.generic && parity.min_margin > 1e-6;
            let set = enumerate_equilibria(&spec, GP_TOL);
            let index_sum = set.equilibria.iter().map(|e| e.index.unwrap_or(0)).sum();
            let r = auto_radius(&spec).map_err(|e| e.to_string())?;
            let degree = piecewise_affine_degree(&spec, r, None, seed)
                .map_err(|e| e.to_string())?
                .value;
            let winding = if n == 2 {
                Some(winding_number_spec(&spec, r, 4096).map_err(|e| e.to_string())?)
            } else {
                None
            };
            Ok(SweepRow {
                n,
                generic,
                degree,
                index_sum,
                winding,
                count: parity.count,
                sign: sign_test(&spec).map_err(|e| e.to_string())?,
            })
        })
        .collect()
}

fn oracle_agreement(rows: &[SweepRow]) -> Outcome {
    let skipped = rows.iter().filter(|r| !r.generic).count();
    ensure(
        skipped * 20 <= rows.len(),
        format!("{skipped} non-generic draws exceed 5%"),
    )?;
    let mut windings = 0;
    for (seed, r) in rows.iter().enumerate().filter(|(_, r)| r.generic) {
        ensure(
            r.degree == r.index_sum && r.degree == 1,
            format!("seed {seed} n = {}: degree {} index sum {}", r.n, r.degree, r.index_sum),
        )?;
        if let Some(w) = r.winding {
            ensure(
                w == r.degree,
                format!("seed {seed}: winding {w} vs degree {}", r.degree),
            )?;
            windings += 1;
        }
    }
    Ok(format!(
        "{} generic systems: degree = index sum = +1; {windings} planar winding checks agree; {skipped} skipped",
        rows.len() - skipped
    ))
}

fn parity_law(rows: &[SweepRow]) -> Outcome {
    for (seed, r) in rows.iter().enumerate().filter(|(_, r)| r.generic) {
        let odd = r.n % 2 == 1;
        ensure(
            r.count == if odd { 3 } else { 1 },
            format!("seed {seed} n = {}: {} equilibria", r.n, r.count),
        )?;
        ensure(
            (r.sign > 1.0) == odd,
            format!("seed {seed} n = {}: -K A^-1 B = {}", r.n, r.sign),
        )?;
    }
    let generic = rows.iter().filter(|r| r.generic).count();
    Ok(format!(
        "{generic} generic systems: 1 equilibrium for even n, 3 for odd n, sign test consistent"
    ))
}

fn symmetry() -> Outcome {
    let probe = BasinProbe::with_defaults(&reference::system()).map_err(|e| e.to_string())?;
    let report = probe.symmetry(130, 0).map_err(|e| e.to_string())?;
    ensure(
        report.decided_pairs >= 100,
        format!("only {} decided pairs", report.decided_pairs),
    )?;
    ensure(report.pass, format!("{} mismatched pairs", report.mismatches.len()))?;

    let cloud = probe.point_cloud(40, 0, 1e-3).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for pair in cloud.records.chunks(2) {
        ensure(pair.iter().all(|r| r.flag == RayFlag::Ok), "antipodal scan flagged")?;
        let mid = |i: usize| 0.5 * (pair[i].r_lo + pair[i].r_hi);
        worst = worst.max((mid(0) - mid(1)).abs());
    }
    ensure(worst <= 2e-3, format!("antipodal radii differ by {worst:e}"))?;
    Ok(format!(
        "{} decided pairs all symmetric ({} undecided); 20 antipodal scans agree within {worst:.1e}",
        report.decided_pairs, report.undecided_pairs
    ))
}

fn certificates() -> Outcome {
    let spec = reference::system();
    let cls = FateClassifier::with_defaults(&spec).map_err(|e| e.to_string())?;
    let outer = cls.outer().ok_or("no escape certificate")?.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut inside = Vec::new();
    while inside.len() < 50 {
        let d = standard_normal_vector(&mut rng, 3);
        inside.push(cls.inner().surface_point(d.as_slice()));
    }
    let mut outside = Vec::new();
    while outside.len() < 50 {
        let d = standard_normal_vector(&mut rng, 3).normalize() * (1.5 * outer.r_div);
        if outer.value(d.as_slice()) > outer.w_max {
            outside.push(d.as_slice().to_vec());
        }
    }
    for x in &inside {
        let r = cls.classify(x).map_err(|e| e.to_string())?;
        ensure(
            r.verdict == FateVerdict::ConvergedToOrigin,
            format!("ellipsoid point {x:?} is {:?}", r.verdict),
        )?;
    }
    for x in &outside {
        let r = cls.classify(x).map_err(|e| e.to_string())?;
        ensure(
            r.verdict == FateVerdict::NotConverged,
            format!("outer point {x:?} is {:?}", r.verdict),
        )?;
    }
    Ok(format!(
        "50 ellipsoid samples In (c = {:.4}); 50 samples at 1.5 R_div = {:.4} Out",
        cls.inner().level,
        1.5 * outer.r_div
    ))
}

fn integrator_order() -> Outcome {
    // x0 stays in the positively saturated region on [0, 1], where the exact
    // solution is x(t) = e^{At}(x0 + A^-1 b M) - A^-1 b M
    let spec = reference::system();
    let x0 = DVector::from_vec(vec![-0.75, 0.12, -1.1]);
    let shift = spec
        .a()
        .clone()
        .lu()
        .solve(&DMatrix::from(spec.b().clone()))
        .ok_or("singular A")?
        .column(0)
        .into_owned();
    let exact = |t: f64| (spec.a() * t).exp() * (&x0 + &shift) - &shift;
    let k = spec.k().row(0).transpose();
    for i in 0..=100 {
        let kx = k.dot(&exact(i as f64 / 100.0));
        ensure(kx > 1.0, format!("reference leaves the saturated region (k x = {kx})"))?;
    }
    let reference = exact(1.0);
    let endpoint_error = |rel: f64, abs: f64| -> Result<f64, String> {
        let tr = integrate_adaptive(&spec, &x0, 1.0, rel, abs).map_err(|e| e.to_string())?;
        Ok((DVector::from_column_slice(tr.final_state()) - &reference).norm())
    };
    let coarse = endpoint_error(1e-8, 1e-10)?;
    let fine = endpoint_error(1e-9, 1e-11)?;
    let ratio = coarse / fine;
    ensure(
        ratio >= 16.0,
        format!("error ratio {ratio:.2} ({coarse:.2e} -> {fine:.2e})"),
    )?;
    Ok(format!("endpoint error {coarse:.2e} -> {fine:.2e}, ratio {ratio:.1}"))
}

fn reproduction_bundle() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bundle = dir.path().join("bundle");
    let run = || -> Result<Vec<(String, Vec<u8>)>, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_satindex"))
            .args(["reproduce-paper", "--out", bundle.to_str().unwrap()])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(
            out.status.code() == Some(0),
            format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)),
        )?;
        read_dir(&bundle)
    };
    let first = run()?;
    let second = run()?;
    ensure(first == second, "bundle differs between reruns")?;

    let csv = fs::read_to_string(bundle.join("cloud.csv")).map_err(|e| e.to_string())?;
    let mut rows = 0;
    let mut flagged = 0;
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let (lo, hi): (f64, f64) = (cols[4].parse().unwrap(), cols[5].parse().unwrap());
        rows += 1;
        if cols[6] == "ok" {
            ensure(hi - lo <= 1e-3, format!("ray {} width {}", cols[0], hi - lo))?;
        } else {
            flagged += 1;
        }
    }
    ensure(rows == 500, format!("{rows} rays in cloud"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(600), format!("took {elapsed:?}"))?;

    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(bundle.join("summary.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let rays = summary["result"]["exploratory"]["equilibrium_rays"]
        .as_array()
        .cloned()
        .unwrap_or_default();
    let exploratory: Vec<String> = rays
        .iter()
        .map(|r| {
            format!(
                "[{:.4}, {:.4}] vs {:.4}{}",
                r["scan"]["r_lo"].as_f64().unwrap_or(f64::NAN),
                r["scan"]["r_hi"].as_f64().unwrap_or(f64::NAN),
                r["norm"].as_f64().unwrap_or(f64::NAN),
                if r["within_slack"] == true {
                    " (within 0.1)"
                } else {
                    " (outside 0.1)"
                }
            )
        })
        .collect();
    Ok(format!(
        "exit 0 twice, identical bundles, 500 rays ({flagged} flagged) in {elapsed:.1?}; exploratory equilibrium rays: {}",
        exploratory.join("; ")
    ))
}

fn read_dir(p: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    for e in fs::read_dir(p).map_err(|e| e.to_string())? {
        let e = e.map_err(|e| e.to_string())?;
        files.push((
            e.file_name().to_string_lossy().into_owned(),
            fs::read(e.path()).map_err(|e| e.to_string())?,
        ));
    }
    files.sort();
    Ok(files)
}

fn main() {
    let rows = panic::catch_unwind(sweep);
    let sweep_outcome = |f: fn(&[SweepRow]) -> Outcome| -> Outcome {
        match &rows {
            Ok(Ok(rows)) => f(rows),
            Ok(Err(e)) => Err(format!("sweep failed: {e}")),
            Err(_) => Err("sweep panicked".into()),
        }
    };
    let criteria: Vec<Criterion> = vec![
        (
            "equilibria and indices of the reference system",
            Box::new(equilibria_and_indices),
        ),
        ("pole-placement round trip", Box::new(pole_placement)),
        ("counterexample fates", Box::new(counterexample_fates)),
        ("convexity violation", Box::new(convexity_violation)),
        (
            "degree oracle agreement on 100 random systems",
            Box::new(move || sweep_outcome(oracle_agreement)),
        ),
        (
            "parity law on 100 random systems",
            Box::new(move || sweep_outcome(parity_law)),
        ),
        ("basin symmetry", Box::new(symmetry)),
        ("certificate consistency", Box::new(certificates)),
        ("integrator order", Box::new(integrator_order)),
        ("reproduction bundle", Box::new(reproduction_bundle)),
    ];

    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(panic::AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
