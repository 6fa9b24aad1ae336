//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::path::Path;
use std::process::{Command as Process, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use armbalance_cli::config::RunConfig;
use armbalance_cli::{run, Cli, Command};
use armbalance_core::anthro::{BodyModel, FIRST_PERCENTILE_FEMALE as PF, NINETY_NINTH_PERCENTILE_MALE as PM};
use armbalance_core::bench::theoretical_sweep;
use armbalance_core::kinematics::{elbow_position, KinematicsForm, Pose};
use armbalance_core::metrics::{evaluate_cells, FieldMap, Mechanism, Metric};
use armbalance_core::optimizer::{optimize, MethodConfig, OptimizationProblem, Parameter};
use armbalance_core::sbs::{
    compensable_mass, net_torque, tune_delta_s, CableMode, MechanismGeometry, SpringParams,
};
use armbalance_core::units::{Interval, GRAVITY};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn defaults() -> RunConfig {
    RunConfig::from_toml("").expect("default config")
}

fn body(mass: f64, moment_arm: f64) -> BodyModel {
    BodyModel { arm_mass: mass, ..PM }.with_moment_arm(moment_arm).unwrap()
}

fn tuning_rule() -> Verdict {
    let base = defaults().sbs_base().unwrap();
    let b = body(1.0, 0.312);
    let start = Instant::now();
    let t = tune_delta_s(&b, &base.geometry, &base.spring).unwrap();
    let elapsed = start.elapsed();
    let mm = t.delta_s * 1000.0;
    verdict(
        (mm - 10.0).abs() <= 0.1 && elapsed < Duration::from_millis(1),
        format!("1 kg at 0.312 m -> {mm:.6} mm (target 10.0 +/- 0.1) in {elapsed:?}"),
    )
}

fn capacity() -> Verdict {
    let base = defaults().sbs_base().unwrap();
    let g = base.geometry.with_delta_s(0.060);
    let free = compensable_mass(&g, &base.spring, 0.312, None);
    let capped = compensable_mass(&g, &base.spring, 0.312, Some(18.0));
    let ok = (free - 6.00).abs() <= 0.01 * 6.00 && (capped - 5.87).abs() <= 0.01 * 5.87;
    verdict(ok, format!("no cap {free:.4} kg (6.00), 18 N*m cap {capped:.4} kg vs measured 5.87 kg (1%)"))
}

fn exact_balance() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a = rng.gen_range(0.05..0.2);
        let k = rng.gen_range(500.0..8000.0);
        let l = rng.gen_range(0.2..0.4);
        let m = rng.gen_range(0.5..7.0);
        let l0 = rng.gen_range(0.03..0.2);
        let f0 = rng.gen_range(0.0..k * l0);
        let spring = SpringParams::zero_free_length(k, l0, f0).unwrap();
        let b = body(m, l);
        let geom = MechanismGeometry { a, delta_s: l * m * GRAVITY / (a * k), ..Default::default() };
        for i in 0..=160 {
            let th = -80.0 + i as f64;
            let net = net_torque(&b, &geom, &spring, th, CableMode::Exact).unwrap().net;
            worst = worst.max(net.abs());
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-9 && elapsed < Duration::from_secs(1),
        format!("1000 configs, max |net torque| {worst:.3e} N*m (<= 1e-9) in {elapsed:?}"),
    )
}

fn energy_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a = rng.gen_range(0.05..0.2);
        let ds = rng.gen_range(0.005..0.045);
        let k = rng.gen_range(500.0..8000.0);
        let l0 = rng.gen_range(0.05..0.2);
        let f0 = rng.gen_range(0.0..200.0);
        let b0 = rng.gen_range(0.0..0.1);
        let spring = SpringParams::with_pretension(k, l0, f0, b0).unwrap();
        let m = rng.gen_range(0.5..7.0);
        let l = rng.gen_range(0.2..0.4);
        let b = body(m, l);
        let geom = MechanismGeometry { a, delta_s: ds, ..Default::default() };
        // Potential energy against the elevation φ (radians); θ = 90° − φ.
        let energy = |phi: f64| {
            let th = std::f64::consts::FRAC_PI_2 - phi;
            let cable = (a * a + ds * ds - 2.0 * a * ds * th.cos()).sqrt();
            let dx = cable - l0 + b0;
            0.5 * k * dx * dx + f0 * dx + m * GRAVITY * l * phi.sin()
        };
        for _ in 0..20 {
            let phi_deg: f64 = rng.gen_range(-75.0..75.0);
            let phi = phi_deg.to_radians();
            let h = 1e-6;
            let oracle = -(energy(phi + h) - energy(phi - h)) / (2.0 * h);
            let model = net_torque(&b, &geom, &spring, 90.0 - phi_deg, CableMode::Exact).unwrap().net;
            worst = worst.max((model - oracle).abs());
        }
    }
    verdict(worst <= 1e-6, format!("100 non-ideal configs, max |model + dU/dphi| {worst:.3e} N*m (<= 1e-6)"))
}

fn ideal_fields() -> Verdict {
    let cfg = defaults();
    let domain = cfg.domain().unwrap();
    let mut zero = 0.0f64;
    let mut worst_mean = 0.0f64;
    let mut notes = Vec::new();
    for (name, b) in [("1pf", PF), ("99pm", PM)] {
        let ideal = cfg.sbs_for(&b).unwrap();
        let cells = evaluate_cells(&Mechanism::Sbs(ideal), &b, &domain, KinematicsForm::Corrected);
        for metric in Metric::ALL {
            let f = FieldMap::from_cells(&domain, &cells, &b, metric);
            zero = zero.max(f.stats.max_abs);
        }
        for (p, factor) in [("k", 1.05), ("k", 0.95), ("l0", 1.05), ("l0", 0.95), ("f0", 1.05), ("f0", 0.95), ("b0", 1.05), ("b0", 0.95)] {
            let mut s = ideal;
            match p {
                "k" => s.spring.k *= factor,
                "l0" => s.spring.l0 *= factor,
                "f0" => s.spring.f0 *= factor,
                _ => s.spring.b0 *= factor,
            }
            let f = FieldMap::from_cells(
                &domain,
                &evaluate_cells(&Mechanism::Sbs(s), &b, &domain, KinematicsForm::Corrected),
                &b,
                Metric::TorqueError,
            );
            if f.stats.mean.abs() > worst_mean {
                worst_mean = f.stats.mean.abs();
                notes = vec![format!("{name} {p} x{factor}")];
            }
        }
    }
    verdict(
        zero <= 1e-12 && worst_mean <= 0.1,
        format!(
            "ideal max |field| {zero:.3e} (<= 1e-12); worst 5% spring perturbation |mean T_err| {worst_mean:.4} N*m/kg ({}) (<= 0.1)",
            notes.join("")
        ),
    )
}

fn coverage_ordering() -> Verdict {
    let cfg = defaults();
    let domain = cfg.domain().unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, b) in [("1pf", PF), ("99pm", PM)] {
        let cov = |m: Mechanism| {
            FieldMap::from_cells(&domain, &evaluate_cells(&m, &b, &domain, cfg.kinematics), &b, Metric::TorqueError).coverage()
        };
        let sbs = cov(Mechanism::Sbs(cfg.sbs_for(&b).unwrap()));
        let gss = cov(Mechanism::Gss(cfg.gss_for(&b).unwrap()));
        ok &= sbs >= 0.95 && gss < sbs;
        parts.push(format!("{name}: SBS {:.1}% GSS {:.1}%", 100.0 * sbs, 100.0 * gss));
    }
    verdict(ok, parts.join(", "))
}

fn optimizer_recovery() -> Verdict {
    let cfg = defaults();
    let start = Instant::now();
    let base = cfg.sbs_base().unwrap();
    let problem = OptimizationProblem::new(
        PM,
        cfg.domain().unwrap(),
        base,
        vec![Parameter::DeltaS],
        vec![Interval::new(0.0, 0.08).unwrap()],
        vec![0.03],
    )
    .unwrap();
    let r = optimize(&problem, &MethodConfig::default()).unwrap();
    let target = PM.arm_weight() * PM.moment_arm() / (base.geometry.a * base.spring.k);
    let runs: Vec<f64> = (0..5)
        .map(|s| optimize(&problem, &MethodConfig { seed: Some(s), ..Default::default() }).unwrap().objective)
        .collect();
    let spread = runs.iter().cloned().fold(f64::MIN, f64::max) - runs.iter().cloned().fold(f64::MAX, f64::min);
    let elapsed = start.elapsed();
    let err = (r.parameters[0] - target).abs();
    verdict(
        r.objective < 1e-6 && err <= 1e-6 && spread <= 1e-8 && elapsed < Duration::from_secs(10),
        format!(
            "objective {:.3e} N^2, |ds - ds*| {err:.3e} m, seed spread {spread:.3e} N^2, {elapsed:?}",
            r.objective
        ),
    )
}

fn bench_curves() -> Verdict {
    let cfg = defaults();
    let base = cfg.sbs_base().unwrap();
    let exact = theoretical_sweep(&base.geometry, &base.spring, &cfg.bench, CableMode::Exact).unwrap();
    let mut sine = 0.0f64;
    let mut ratio = 0.0f64;
    for c in &exact {
        for (i, phi) in c.angles.iter().enumerate() {
            let want = c.amplitude * phi.to_radians().cos();
            sine = sine.max((c.torque[i] - want).abs() / c.amplitude);
            if c.torque[i] != 0.0 {
                ratio = ratio.max((c.band_high[i] / c.band_low[i] - 1.1 / 0.9).abs() / (1.1 / 0.9));
            }
        }
    }
    let scaling = exact[0]
        .torque
        .iter()
        .zip(&exact[1].torque)
        .map(|(t1, t2)| (t2 - 2.0 * t1).abs() / t2.abs())
        .fold(0.0f64, f64::max);
    let constant = theoretical_sweep(&base.geometry, &base.spring, &cfg.bench, CableMode::ConstantB).unwrap();
    let peaks: Vec<f64> = constant.iter().map(|c| c.peak_angle()).collect();
    let monotone = peaks.windows(2).all(|w| w[1] < w[0]);
    let peaks_text: Vec<String> = peaks.iter().map(|p| format!("{p:.2}")).collect();
    verdict(
        sine <= 1e-12 && scaling <= 1e-12 && ratio <= 1e-12 && monotone,
        format!(
            "sine dev {sine:.1e}, 20/10 mm scaling dev {scaling:.1e}, band ratio dev {ratio:.1e}, constant_b peaks [{}] deg",
            peaks_text.join(", ")
        ),
    )
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let commands = || {
        vec![
            Command::Map,
            Command::Coverage,
            Command::Optimize,
            Command::Bench { emit_measured: true },
            Command::Tune { mass: None, arm_length: None },
        ]
    };
    let mut runs = Vec::new();
    for (i, threads) in [1usize, 4, 4].iter().enumerate() {
        let dir = tmp.path().join(format!("run{i}"));
        for command in commands() {
            let cli = Cli {
                config: None,
                out: Some(dir.clone()),
                percentile: None,
                resolution: None,
                paper_mode: false,
                threads: Some(*threads),
                command,
            };
            run(&cli).unwrap();
        }
        let measured = dir.join("bench_10mm_measured.csv");
        let cli = Cli {
            config: None,
            out: Some(dir.clone()),
            percentile: None,
            resolution: None,
            paper_mode: false,
            threads: Some(*threads),
            command: Command::Compare { measured, delta_s_mm: 10.0 },
        };
        run(&cli).unwrap();
        runs.push(snapshot(&dir));
    }
    // The binary, twice.
    let exe = env!("CARGO_BIN_EXE_armbalance");
    let mut bin_runs = Vec::new();
    for i in 0..2 {
        let dir = tmp.path().join(format!("bin{i}"));
        let status = Process::new(exe).args(["--out", dir.to_str().unwrap(), "map"]).output().unwrap();
        assert!(status.status.success());
        bin_runs.push(snapshot(&dir));
    }
    let files = runs[0].len();
    let same = runs.windows(2).all(|w| w[0] == w[1]) && bin_runs[0] == bin_runs[1];
    verdict(same, format!("{files} files from 6 subcommands identical across 1/4/4 threads; binary rerun identical"))
}

fn kinematics_oracle() -> Verdict {
    let mut worst = 0.0f64;
    for b in [PF, PM] {
        for ai in 0..=65 {
            for bi in 0..=40 {
                let pose = Pose::new(-60.0 + ai as f64, -20.0 + bi as f64);
                let e = elbow_position(&b, &pose, KinematicsForm::Corrected).unwrap();
                // Planar chain: hip pivot, torso rotated by β, arm at world elevation α + β.
                let (sb, cb) = pose.beta.to_radians().sin_cos();
                let sx = -b.half_hip_width + b.half_chest_width * cb - b.upper_trunk_height * sb;
                let sy = b.lower_trunk_height + b.half_chest_width * sb + b.upper_trunk_height * cb;
                let (se, ce) = (pose.alpha + pose.beta).to_radians().sin_cos();
                let (ox, oy) = (sx + b.upper_arm_length * ce, sy + b.upper_arm_length * se);
                worst = worst.max((e.x - ox).hypot(e.y - oy));
            }
        }
    }
    verdict(worst <= 1e-9, format!("max |elbow - chain oracle| {worst:.3e} m (<= 1e-9) for both bodies"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("tuning rule", tuning_rule),
        ("capacity", capacity),
        ("exact balance", exact_balance),
        ("energy oracle", energy_oracle),
        ("ideal SBS field", ideal_fields),
        ("coverage ordering", coverage_ordering),
        ("optimizer recovery", optimizer_recovery),
        ("bench curves", bench_curves),
        ("determinism", determinism),
        ("kinematics oracle", kinematics_oracle),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        println!("acceptance {:>2} {} {name}: {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
