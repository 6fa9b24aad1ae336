//! Subcommand implementations. Each returns the files it wrote and a text
//! report; nothing here prints.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use armbalance_core::anthro::BodyModel;
use armbalance_core::bench::{
    ingest_measured, relative_error, theoretical_sweep, write_measured, write_relative_error, Direction,
    MeasuredCurve, SweepSpec,
};
use armbalance_core::gss::gss_reachable;
use armbalance_core::metrics::{evaluate_cells, FieldMap, Mechanism, Metric};
use armbalance_core::optimizer::{optimize, OptimizationProblem, OptimizationResult};
use armbalance_core::sbs::{tune_delta_s, SCREW_PITCH};
use armbalance_core::units::fmt9;

use crate::config::RunConfig;

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub report: String,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn write(&mut self, dir: &Path, name: &str, contents: &[u8]) -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.files.push(path);
        Ok(())
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

/// Gas spring parameters for `body`, or `None` with a warning when the
/// strut cannot be sized under the selected kinematics.
fn gss_or_warn(cfg: &RunConfig, body: &BodyModel, label: &str, out: &mut Outcome) -> Option<armbalance_core::gss::GasSpringParams> {
    if !cfg.gss.enabled {
        return None;
    }
    match cfg.gss_for(body) {
        Ok(p) => Some(p),
        Err(e) => {
            out.warnings.push(format!("{label}: gas spring skipped: {e:#}"));
            None
        }
    }
}

fn mechanisms(cfg: &RunConfig, body: &BodyModel, label: &str, out: &mut Outcome) -> Result<Vec<Mechanism>> {
    let mut m = vec![Mechanism::Sbs(cfg.sbs_for(body)?)];
    if let Some(p) = gss_or_warn(cfg, body, label, out) {
        m.push(Mechanism::Gss(p));
    }
    Ok(m)
}

/// Writes both metric maps of `mechanism` and appends their statistics to
/// `summary`.
fn write_fields(
    out: &mut Outcome,
    dir: &Path,
    prefix: &str,
    cfg: &RunConfig,
    body: &BodyModel,
    mechanism: &Mechanism,
    summary: &mut Vec<u8>,
) -> Result<Vec<FieldMap>> {
    let domain = cfg.domain()?;
    let cells = evaluate_cells(mechanism, body, &domain, cfg.kinematics);
    let mut maps = Vec::new();
    for metric in Metric::ALL {
        let field = FieldMap::from_cells(&domain, &cells, body, metric);
        let mut csv = Vec::new();
        field.write_csv(&mut csv)?;
        out.write(dir, &format!("{prefix}_{}_{}.csv", mechanism.name(), metric.name()), &csv)?;
        summary.extend_from_slice(format!("\n[{}.{}]\n", mechanism.name(), metric.name()).as_bytes());
        field.write_summary(&mut *summary, mechanism.name())?;
        maps.push(field);
    }
    Ok(maps)
}

fn summary_header(cfg: &RunConfig, label: &str, body: &BodyModel) -> String {
    format!(
        "body = \"{label}\"\narm_mass = {}\nupper_arm_length = {}\nmoment_arm = {}\nkinematics = \"{:?}\"\ncable_mode = \"{:?}\"\nresolution = {}\n",
        fmt9(body.arm_mass),
        fmt9(body.upper_arm_length),
        fmt9(body.moment_arm()),
        cfg.kinematics,
        cfg.sbs.mode,
        fmt9(cfg.domain.resolution),
    )
}

/// Torque-error and parasitic maps with statistics, per body and support.
pub fn cmd_map(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    ensure_dir(dir)?;
    let mut out = Outcome::default();
    for (label, body) in cfg.map_bodies()? {
        let mut summary = summary_header(cfg, &label, &body).into_bytes();
        for m in mechanisms(cfg, &body, &label, &mut out)? {
            let maps = write_fields(&mut out, dir, &format!("map_{label}"), cfg, &body, &m, &mut summary)?;
            for f in &maps {
                writeln!(
                    out.report,
                    "{label} {} {}: coverage {} mean {} max_abs {} {}",
                    m.name(),
                    f.metric.name(),
                    fmt9(f.coverage()),
                    fmt9(f.stats.mean),
                    fmt9(f.stats.max_abs),
                    f.metric.unit()
                )?;
            }
        }
        out.write(dir, &format!("map_{label}_summary.toml"), &summary)?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct OptimizeReport<'a> {
    body: &'a str,
    kinematics: String,
    resolution: f64,
    free: Vec<&'static str>,
    lower_bounds: Vec<f64>,
    upper_bounds: Vec<f64>,
    initial_guess: Vec<f64>,
    method: armbalance_core::optimizer::MethodConfig,
    result: &'a OptimizationResult,
}

pub fn cmd_optimize(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    ensure_dir(dir)?;
    let mut out = Outcome::default();
    let (label, body) = cfg.body()?;
    let base = cfg.sbs_for(&body)?;
    let bounds = cfg.optimize_bounds()?;
    let free: Vec<_> = bounds.iter().map(|b| b.0).collect();
    let intervals: Vec<_> = bounds.iter().map(|b| b.1).collect();
    let initial: Vec<f64> = bounds
        .iter()
        .map(|(p, iv)| {
            let v = cfg.optimize.initial.get(p).copied().unwrap_or_else(|| iv.clamp(p.get(&base)));
            if !iv.contains(v) {
                bail!("config: initial {} = {v} outside its bounds", p.name());
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let problem = OptimizationProblem::new(body, cfg.domain()?, base, free.clone(), intervals.clone(), initial.clone())?;
    let method = cfg.method();
    let result = optimize(&problem, &method)?;
    let report = OptimizeReport {
        body: &label,
        kinematics: format!("{:?}", cfg.kinematics),
        resolution: cfg.domain.resolution,
        free: free.iter().map(|p| p.name()).collect(),
        lower_bounds: intervals.iter().map(|i| i.min).collect(),
        upper_bounds: intervals.iter().map(|i| i.max).collect(),
        initial_guess: initial,
        method,
        result: &result,
    };
    let text = toml::to_string(&report).context("cannot serialize the optimization result")?;
    out.write(dir, &format!("optimize_{label}.toml"), text.as_bytes())?;

    let mut summary = summary_header(cfg, &label, &body).into_bytes();
    let m = Mechanism::Sbs(result.configuration);
    write_fields(&mut out, dir, &format!("optimize_{label}"), cfg, &body, &m, &mut summary)?;
    out.write(dir, &format!("optimize_{label}_summary.toml"), &summary)?;

    for (p, v) in free.iter().zip(&result.parameters) {
        writeln!(out.report, "{} = {}", p.name(), fmt9(*v))?;
    }
    writeln!(out.report, "objective = {} N^2 (converged: {})", fmt9(result.objective), result.converged)?;
    Ok(out)
}

fn mm_label(delta_s: f64) -> String {
    format!("{}mm", fmt9(delta_s * 1000.0))
}

pub fn cmd_bench(cfg: &RunConfig, dir: &Path, emit_measured: bool) -> Result<Outcome> {
    ensure_dir(dir)?;
    let mut out = Outcome::default();
    let base = cfg.sbs_base()?;
    let curves = theoretical_sweep(&base.geometry, &base.spring, &cfg.bench, cfg.sbs.mode)?;
    let mut summary = format!("cable_mode = \"{:?}\"\nk_tolerance = {}\n", cfg.sbs.mode, fmt9(cfg.bench.k_tolerance));
    for c in &curves {
        let tag = mm_label(c.delta_s);
        let mut csv = Vec::new();
        c.write_csv(&mut csv)?;
        out.write(dir, &format!("bench_{tag}.csv"), &csv)?;
        if emit_measured {
            let mut m = Vec::new();
            write_measured(&[MeasuredCurve::from_theoretical(c, Direction::Loading)], &mut m)?;
            out.write(dir, &format!("bench_{tag}_measured.csv"), &m)?;
        }
        let peak = c.torque.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Rounding noise of the parabola fit is not meaningful below 1e-9 deg.
        let peak_angle = (c.peak_angle() * 1e9).round() / 1e9 + 0.0;
        write!(
            summary,
            "\n[\"{tag}\"]\ndelta_s = {}\nconstant_form_torque = {}\npeak_torque = {}\npeak_angle = {}\n",
            fmt9(c.delta_s),
            fmt9(c.amplitude),
            fmt9(peak),
            fmt9(peak_angle)
        )?;
        writeln!(
            out.report,
            "delta_s {tag}: a*ds*k = {} N*m, sweep peak {} N*m at {} deg",
            fmt9(c.amplitude),
            fmt9(peak),
            fmt9(peak_angle)
        )?;
    }
    out.write(dir, "bench_summary.toml", summary.as_bytes())?;
    Ok(out)
}

pub fn cmd_compare(cfg: &RunConfig, dir: &Path, measured: &Path, delta_s: f64) -> Result<Outcome> {
    ensure_dir(dir)?;
    let mut out = Outcome::default();
    let file = fs::File::open(measured).with_context(|| format!("cannot open {}", measured.display()))?;
    let curves = ingest_measured(file)?;
    let base = cfg.sbs_base()?;
    let spec = SweepSpec {
        delta_s_values: vec![delta_s],
        ..cfg.bench.clone()
    };
    let theory = theoretical_sweep(&base.geometry, &base.spring, &spec, cfg.sbs.mode)?;
    for (i, c) in curves.iter().enumerate() {
        let points = relative_error(c, &theory[0])?;
        let mut csv = Vec::new();
        write_relative_error(&points, &mut csv)?;
        out.write(dir, &format!("compare_{}_{}.csv", i + 1, c.direction.as_str()), &csv)?;
        let defined: Vec<f64> = points.iter().filter_map(|p| p.value).collect();
        let max = defined.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        writeln!(
            out.report,
            "branch {} ({}): {} points, {} defined, max |relative error| {}",
            i + 1,
            c.direction.as_str(),
            points.len(),
            defined.len(),
            fmt9(max)
        )?;
    }
    if curves.is_empty() {
        writeln!(out.report, "no measured rows")?;
    }
    Ok(out)
}

pub fn cmd_tune(cfg: &RunConfig, dir: &Path, mass: Option<f64>, arm_length: Option<f64>) -> Result<Outcome> {
    ensure_dir(dir)?;
    let mut out = Outcome::default();
    let (mut label, mut body) = cfg.body()?;
    if let Some(m) = mass {
        body = BodyModel { arm_mass: m, ..body };
        label = format!("{}kg", fmt9(m));
    }
    if let Some(l) = arm_length {
        body = body.with_moment_arm(l)?;
    }
    body.validate()?;
    let base = cfg.sbs_base()?;
    let t = tune_delta_s(&body, &base.geometry, &base.spring)?;
    let geom = base.geometry.with_delta_s(t.delta_s);
    let tuned = armbalance_core::sbs::Sbs { geometry: geom, ..base };
    let field = FieldMap::from_cells(
        &cfg.domain()?,
        &evaluate_cells(&Mechanism::Sbs(tuned), &body, &cfg.domain()?, cfg.kinematics),
        &body,
        Metric::TorqueError,
    );
    let r = &mut out.report;
    writeln!(r, "body = \"{label}\"")?;
    writeln!(r, "arm_mass_kg = {}", fmt9(body.arm_mass))?;
    writeln!(r, "moment_arm_m = {}", fmt9(body.moment_arm()))?;
    writeln!(r, "delta_s_mm = {}", fmt9(t.delta_s * 1000.0))?;
    writeln!(r, "delta_s_required_mm = {}", fmt9(t.unclamped * 1000.0))?;
    writeln!(r, "clamped = {}", t.clamped)?;
    writeln!(r, "knob_turns = {}", fmt9(t.delta_s / SCREW_PITCH))?;
    writeln!(r, "peak_torque_nm = {}", fmt9(geom.a * base.spring.k * t.delta_s))?;
    writeln!(r, "residual_torque_error_mean = {}", fmt9(field.stats.mean))?;
    writeln!(r, "residual_torque_error_max_abs = {}", fmt9(field.stats.max_abs))?;
    writeln!(r, "residual_coverage = {}", fmt9(field.coverage()))?;
    if t.clamped {
        out.warnings.push(format!(
            "body needs delta_s = {} mm, beyond the {} mm travel; clamped",
            fmt9(t.unclamped * 1000.0),
            fmt9(t.delta_s * 1000.0)
        ));
    }
    let report = out.report.clone();
    out.write(dir, &format!("tune_{label}.txt"), report.as_bytes())?;
    Ok(out)
}

pub fn cmd_coverage(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    ensure_dir(dir)?;
    let mut out = Outcome::default();
    let domain = cfg.domain()?;
    let joint = cfg.sbs.joint_range;
    for (label, body) in cfg.map_bodies()? {
        let mut summary = format!("body = \"{label}\"\ncells = {}\n", domain.len());
        let mut grids = vec![("sbs", domain.restrict(|p| joint.contains(p.elevation())))];
        if let Some(gss) = gss_or_warn(cfg, &body, &label, &mut out) {
            grids.push(("gss", domain.restrict(|p| gss_reachable(&body, &gss, p, cfg.kinematics))));
        }
        for (name, grid) in grids {
            let mut csv = Vec::new();
            grid.write_csv(&mut csv)?;
            out.write(dir, &format!("coverage_{label}_{name}.csv"), &csv)?;
            writeln!(summary, "{name} = {}", fmt9(grid.coverage()))?;
            writeln!(out.report, "{label} {name} coverage {}", fmt9(grid.coverage()))?;
        }
        out.write(dir, &format!("coverage_{label}.toml"), summary.as_bytes())?;
    }
    Ok(out)
}
