use std::fs;
use std::path::Path;

use satindex_core::basin::{BasinProbe, PairSource, RayFlag};
use satindex_core::degree::{auto_radius, piecewise_affine_degree, winding_number_spec};
use satindex_core::dynamics::{integrate_adaptive, FateClassifier, IntegratorOptions};
use satindex_core::equilibria::{enumerate_equilibria, parity_check, GP_TOL};
use satindex_core::nalgebra::DVector;
use satindex_core::{index_sum_check, safe_radius, validate_spec, Error, SystemSpec};
use serde::Serialize;
use serde_json::json;

use crate::args::{ConvexityArgs, DegreeArgs, FateArgs, IntegrationArgs, ScanArgs, SystemArgs};
use crate::output::{
    emit, io_error, parse_vector, write_text, CliError, Envelope, RunConfig, EXIT_CHECK_FAILED, EXIT_OK,
};

pub fn load_system(path: &Path) -> Result<SystemSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    SystemSpec::from_json(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn base_config(command: &str, sys: &SystemArgs) -> RunConfig {
    let mut config = RunConfig::new(command, sys.out.as_deref());
    config.system_path = Some(sys.system.display().to_string());
    config
}

fn set_integration(config: &mut RunConfig, args: &IntegrationArgs) -> IntegratorOptions {
    config.t_max = Some(args.t_max);
    config.rel_tol = Some(args.rel_tol);
    config.abs_tol = Some(args.abs_tol);
    IntegratorOptions::with_tolerances(args.rel_tol, args.abs_tol)
}

fn finish<T: Serialize>(config: &RunConfig, sys: &SystemArgs, pass: bool, result: T) -> Result<i32, CliError> {
    let envelope = Envelope {
        command: &config.command,
        config,
        status: if pass { "ok" } else { "check_failed" },
        result,
    };
    emit(sys.out.as_ref(), &envelope)?;
    Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

pub fn validate(args: &SystemArgs) -> Result<i32, CliError> {
    let config = base_config("validate", args);
    let spec = load_system(&args.system)?;
    let report = validate_spec(&spec);
    let pass = report.all_ok();
    let radius = safe_radius(&spec).ok();
    finish(&config, args, pass, json!({ "report": report, "safe_radius": radius }))
}

pub fn equilibria(args: &SystemArgs) -> Result<i32, CliError> {
    let config = base_config("equilibria", args);
    let spec = load_system(&args.system)?;
    let set = enumerate_equilibria(&spec, GP_TOL);
    let indices: Vec<Option<i32>> = set.equilibria.iter().map(|e| e.index).collect();
    let index_sum = indices.iter().map(|i| i.unwrap_or(0)).sum::<i32>();
    let (parity, parity_note) = if spec.m() == 1 {
        match parity_check(&spec) {
            Ok(p) => (Some(p), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (
            None,
            Some("parity law applies to single-input systems only".to_string()),
        )
    };
    let pass = parity.as_ref().is_none_or(|p| p.pass);
    finish(
        &config,
        args,
        pass,
        json!({
            "count": set.len(),
            "equilibria": set.equilibria,
            "degenerate_regions": set.degenerate_regions,
            "indices": indices,
            "index_sum": index_sum,
            "parity": parity,
            "parity_note": parity_note,
        }),
    )
}

pub fn degree(args: &DegreeArgs) -> Result<i32, CliError> {
    let mut config = base_config("degree", &args.system);
    let spec = load_system(&args.system.system)?;
    let radius = match args.radius {
        Some(r) => r,
        None => auto_radius(&spec)?,
    };
    config.radius = Some(radius);
    config.seed = Some(args.seed);
    let report = piecewise_affine_degree(&spec, radius, None, args.seed)?;
    let winding = if spec.n() == 2 {
        Some(winding_number_spec(&spec, radius, 4096)?)
    } else {
        None
    };
    let index_sum = match index_sum_check(&spec, Some(radius), args.seed) {
        Ok(r) => Some(r),
        Err(Error::DegenerateEquilibrium(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let pass = winding.is_none_or(|w| w == report.value) && index_sum.as_ref().is_none_or(|s| s.pass);
    finish(
        &config,
        &args.system,
        pass,
        json!({
            "value": report.value,
            "degree": report,
            "winding": winding,
            "index_sum": index_sum,
        }),
    )
}

pub fn fate(args: &FateArgs) -> Result<i32, CliError> {
    let mut config = base_config("fate", &args.system);
    let spec = load_system(&args.system.system)?;
    let x = parse_vector(&args.x)?;
    config.x = Some(x.clone());
    let options = set_integration(&mut config, &args.integration);
    let classifier = FateClassifier::new(&spec, args.integration.t_max, options)?;
    let report = classifier.classify(&x)?;
    if let Some(path) = &args.trajectory {
        let t_end = if report.t_decided > 0.0 {
            report.t_decided
        } else {
            args.integration.t_max
        };
        let x0 = DVector::from_column_slice(&x);
        let traj = integrate_adaptive(&spec, &x0, t_end, options.rel_tol, options.abs_tol)?;
        write_text(Some(path), &traj.to_csv())?;
    }
    finish(&config, &args.system, true, report)
}

pub fn scan(args: &ScanArgs) -> Result<i32, CliError> {
    let mut config = base_config("scan", &args.system);
    let spec = load_system(&args.system.system)?;
    config.tol = Some(args.tol);
    let options = set_integration(&mut config, &args.integration);
    let probe = BasinProbe::new(&spec, args.integration.t_max, options)?;
    if let Some(text) = &args.x {
        let direction = parse_vector(text)?;
        config.x = Some(direction.clone());
        let result = probe.scan_ray(&direction, args.tol)?;
        return finish(&config, &args.system, true, result);
    }
    config.rays = Some(args.rays);
    config.seed = Some(args.seed);
    let cloud = probe.point_cloud(args.rays, args.seed, args.tol)?;
    if let Some(path) = &args.csv {
        write_text(Some(path), &cloud.to_csv())?;
    }
    let count = |flag: RayFlag| cloud.records.iter().filter(|r| r.flag == flag).count();
    let summary = json!({
        "rays": cloud.records.len(),
        "ok": count(RayFlag::Ok),
        "early_stop": count(RayFlag::EarlyStop),
        "geometry_error": count(RayFlag::GeometryError),
        "failed": count(RayFlag::Failed),
        "max_ok_width": cloud.records.iter()
            .filter(|r| r.flag == RayFlag::Ok)
            .map(|r| r.r_hi - r.r_lo)
            .fold(0.0, f64::max),
    });
    finish(
        &config,
        &args.system,
        true,
        json!({ "summary": summary, "cloud": cloud }),
    )
}

pub fn convexity(args: &ConvexityArgs) -> Result<i32, CliError> {
    let mut config = base_config("convexity", &args.system);
    let spec = load_system(&args.system.system)?;
    config.pairs = Some(args.pairs);
    config.seed = Some(args.seed);
    let options = set_integration(&mut config, &args.integration);
    let probe = BasinProbe::new(&spec, args.integration.t_max, options)?;
    let report = probe.convexity(&PairSource::Random {
        count: args.pairs,
        seed: args.seed,
    })?;
    finish(&config, &args.system, true, report)
}
