//! Least-squares fit of the spring parameters over the range of motion.
//!
//! The objective is `Σ F_errYe²` (N²) over the reachable cells. Minimization
//! is a grid multi-start followed by a bounded Nelder–Mead refinement with
//! restarts and a final compass search. Parameters are searched in
//! coordinates normalized to the unit box; points outside the bounds are
//! projected back onto them.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anthro::BodyModel;
use crate::error::{Error, Result};
use crate::kinematics::{theta, RomDomain};
use crate::metrics::gravity_reference;
use crate::sbs::{device_torque, Sbs};
use crate::units::Interval;

/// Spring or geometry parameter the optimizer may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    K,
    L0,
    F0,
    DeltaS,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::K => "k",
            Parameter::L0 => "l0",
            Parameter::F0 => "f0",
            Parameter::DeltaS => "delta_s",
        }
    }

    pub fn get(self, sbs: &Sbs) -> f64 {
        match self {
            Parameter::K => sbs.spring.k,
            Parameter::L0 => sbs.spring.l0,
            Parameter::F0 => sbs.spring.f0,
            Parameter::DeltaS => sbs.geometry.delta_s,
        }
    }

    pub fn set(self, sbs: &mut Sbs, value: f64) {
        match self {
            Parameter::K => sbs.spring.k = value,
            Parameter::L0 => sbs.spring.l0 = value,
            Parameter::F0 => sbs.spring.f0 = value,
            Parameter::DeltaS => sbs.geometry.delta_s = value,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    pub body: BodyModel,
    pub domain: RomDomain,
    /// Configuration supplying every parameter that is not free. The
    /// pretension `b0` always stays at its value here.
    pub base: Sbs,
    pub free: Vec<Parameter>,
    pub bounds: Vec<Interval>,
    pub initial_guess: Vec<f64>,
    /// `(θ, F_Ye,ref)` of every cell inside the domain and the joint range.
    cells: Vec<(f64, f64)>,
}

impl OptimizationProblem {
    pub fn new(
        body: BodyModel,
        domain: RomDomain,
        base: Sbs,
        free: Vec<Parameter>,
        bounds: Vec<Interval>,
        initial_guess: Vec<f64>,
    ) -> Result<Self> {
        let fail = |m: String| Err(Error::Optimization { message: m });
        if free.is_empty() {
            return fail("no free parameters".into());
        }
        if bounds.len() != free.len() || initial_guess.len() != free.len() {
            return fail(format!(
                "{} free parameters but {} bounds and {} initial values",
                free.len(),
                bounds.len(),
                initial_guess.len()
            ));
        }
        let mut seen = free.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != free.len() {
            return fail("a parameter is listed twice".into());
        }
        for ((p, b), x) in free.iter().zip(&bounds).zip(&initial_guess) {
            if !(b.min.is_finite() && b.max.is_finite() && b.min <= b.max) {
                return fail(format!("bounds of {} must be finite", p.name()));
            }
            if !b.contains(*x) {
                return fail(format!("initial {} = {x} outside [{}, {}]", p.name(), b.min, b.max));
            }
        }
        let joint = base.geometry.joint_range;
        let cells = domain
            .reachable_cells()
            .filter(|(_, pose)| joint.contains(pose.elevation()))
            .map(|(_, pose)| (theta(&pose), gravity_reference(&body, &pose).0))
            .collect();
        Ok(Self {
            body,
            domain,
            base,
            free,
            bounds,
            initial_guess,
            cells,
        })
    }

    /// Base configuration with the free parameters set to `params`.
    pub fn configure(&self, params: &[f64]) -> Sbs {
        let mut sbs = self.base;
        for (p, v) in self.free.iter().zip(params) {
            p.set(&mut sbs, *v);
        }
        sbs
    }

    fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.bounds)
            .map(|(v, b)| if b.width() > 0.0 { (v - b.min) / b.width() } else { 0.0 })
            .collect()
    }

    fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.bounds)
            .map(|(v, b)| b.clamp(b.min + v.clamp(0.0, 1.0) * b.width()))
            .collect()
    }
}

/// `Σ F_errYe²` over the reachable cells, N². Configurations the spring or
/// cable model rejects score `+∞`.
pub fn objective(problem: &OptimizationProblem, params: &[f64]) -> f64 {
    let sbs = problem.configure(params);
    if sbs.validate().is_err() {
        return f64::INFINITY;
    }
    let l = problem.body.moment_arm();
    let mut sum = 0.0;
    for &(th, f_ref) in &problem.cells {
        match device_torque(&sbs.geometry, &sbs.spring, th, sbs.mode) {
            Ok(gamma) => {
                let e = gamma / l - f_ref;
                sum += e * e;
            }
            Err(_) => return f64::INFINITY,
        }
    }
    sum
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    /// Grid points per free dimension for the multi-start.
    pub grid_points: usize,
    /// Number of best grid points refined locally.
    pub refine_starts: usize,
    /// Evaluation budget of one local refinement.
    pub max_evaluations: usize,
    /// Stop when the simplex objective spread falls below this, N².
    pub f_tolerance: f64,
    /// Stop when the simplex diameter falls below this, in unit-box coordinates.
    pub x_tolerance: f64,
    /// Seed for jittering the start grid. `None` keeps the regular grid.
    pub seed: Option<u64>,
    /// Jitter amplitude as a fraction of the grid spacing.
    pub jitter: f64,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            grid_points: 8,
            refine_starts: 3,
            max_evaluations: 10_000,
            f_tolerance: 1e-12,
            x_tolerance: 1e-9,
            seed: None,
            jitter: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub free: Vec<Parameter>,
    pub parameters: Vec<f64>,
    /// `p_e`, N².
    pub objective: f64,
    pub initial_objective: f64,
    pub best_start_objective: f64,
    /// Simplex iterations over all refinements of the winning start.
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective after each iteration of the winning refinement.
    pub history: Vec<f64>,
    pub configuration: Sbs,
}

struct Refinement {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn cmp_point(a: (f64, &[f64]), b: (f64, &[f64])) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| {
        a.1.iter()
            .zip(b.1)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Start points on a regular grid of cell centres in the unit box,
/// optionally jittered inside their cells.
fn start_grid(dim: usize, n: usize, seed: Option<u64>, jitter: f64) -> Vec<Vec<f64>> {
    let n = n.max(1);
    let total = n.pow(dim as u32);
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    (0..total)
        .map(|mut idx| {
            (0..dim)
                .map(|_| {
                    let i = idx % n;
                    idx /= n;
                    let shift = match rng.as_mut() {
                        Some(r) => jitter * r.gen_range(-0.5..0.5),
                        None => 0.0,
                    };
                    ((i as f64 + 0.5 + shift) / n as f64).clamp(0.0, 1.0)
                })
                .collect()
        })
        .collect()
}

fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    f0: f64,
    step: f64,
    cfg: &MethodConfig,
    budget: usize,
    history: &mut Vec<f64>,
) -> (Vec<f64>, f64, usize, usize, bool) {
    let d = x0.len();
    let clamp = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|c| c.clamp(0.0, 1.0)).collect() };
    let mut evals = 0usize;
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] = if x[i] + step <= 1.0 { x[i] + step } else { x[i] - step };
        let fx = f(&x);
        evals += 1;
        simplex.push((x, fx));
    }
    let mut iterations = 0;
    loop {
        simplex.sort_by(|a, b| cmp_point((a.1, &a.0), (b.1, &b.0)));
        history.push(simplex[0].1);
        let spread = simplex[d].1 - simplex[0].1;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= cfg.f_tolerance) || diameter <= cfg.x_tolerance {
            return (simplex[0].0.clone(), simplex[0].1, iterations, evals, true);
        }
        if evals >= budget {
            return (simplex[0].0.clone(), simplex[0].1, iterations, evals, false);
        }
        iterations += 1;
        let mut centroid = vec![0.0; d];
        for (x, _) in &simplex[..d] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / d as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            clamp(
                centroid
                    .iter()
                    .zip(&simplex[d].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect(),
            )
        };
        let xr = along(1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[d].1 {
            let xc = along(0.5);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = f(&xc);
            (xc, fc)
        };
        evals += 1;
        if fc < simplex[d].1.min(fr) {
            simplex[d] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for (x, fx) in simplex[1..].iter_mut() {
            *x = clamp(best.iter().zip(x.iter()).map(|(b, v)| b + 0.5 * (v - b)).collect());
            *fx = f(x);
            evals += 1;
        }
    }
}

/// Coordinate search with halving steps. Only accepts strict improvements.
fn compass(f: &dyn Fn(&[f64]) -> f64, x: &mut Vec<f64>, fx: &mut f64, min_step: f64, budget: usize) -> usize {
    let mut step = 1e-3;
    let mut evals = 0;
    while step >= min_step && evals < budget {
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] = (y[i] + dir * step).clamp(0.0, 1.0);
                if y[i] == x[i] {
                    continue;
                }
                let fy = f(&y);
                evals += 1;
                if fy < *fx {
                    *x = y;
                    *fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    evals
}

fn refine(problem: &OptimizationProblem, cfg: &MethodConfig, u0: Vec<f64>, f0: f64) -> Refinement {
    let f = |u: &[f64]| objective(problem, &problem.from_unit(u));
    let mut history = Vec::new();
    let (mut x, mut fx) = (u0, f0);
    let (mut iterations, mut evaluations) = (0, 0);
    let mut converged = false;
    let mut step = 0.1;
    for _ in 0..30 {
        let budget = cfg.max_evaluations.saturating_sub(evaluations);
        if budget == 0 {
            break;
        }
        let before = fx;
        let (nx, nf, it, ev, ok) = nelder_mead(&f, &x, fx, step, cfg, budget, &mut history);
        iterations += it;
        evaluations += ev;
        converged = ok;
        if nf <= fx {
            x = nx;
            fx = nf;
        }
        if !(before - fx > cfg.f_tolerance) && step <= 1e-4 {
            break;
        }
        step = (step * 0.1).max(1e-6);
    }
    let budget = cfg.max_evaluations.saturating_sub(evaluations);
    evaluations += compass(&f, &mut x, &mut fx, cfg.x_tolerance * 0.1, budget);
    if history.last().is_none_or(|h| fx < *h) {
        history.push(fx);
    }
    Refinement {
        x: problem.from_unit(&x),
        f: fx,
        iterations,
        evaluations,
        converged,
        history,
    }
}

/// Minimizes the objective over the free parameters within their bounds.
pub fn optimize(problem: &OptimizationProblem, cfg: &MethodConfig) -> Result<OptimizationResult> {
    let dim = problem.free.len();
    let initial_objective = objective(problem, &problem.initial_guess);
    let mut starts: Vec<(f64, Vec<f64>)> = start_grid(dim, cfg.grid_points, cfg.seed, cfg.jitter)
        .into_par_iter()
        .map(|u| (objective(problem, &problem.from_unit(&u)), u))
        .collect();
    starts.push((initial_objective, problem.to_unit(&problem.initial_guess)));
    starts.retain(|(f, _)| f.is_finite());
    if starts.is_empty() {
        return Err(Error::Optimization {
            message: "every start point is infeasible".into(),
        });
    }
    starts.sort_by(|a, b| cmp_point((a.0, &a.1), (b.0, &b.1)));
    let best_start_objective = starts[0].0;
    starts.truncate(cfg.refine_starts.max(1));

    let refined: Vec<Refinement> = starts
        .into_par_iter()
        .map(|(f0, u0)| refine(problem, cfg, u0, f0))
        .collect();
    let best = refined
        .into_iter()
        .min_by(|a, b| cmp_point((a.f, &a.x), (b.f, &b.x)))
        .expect("at least one start");
    Ok(OptimizationResult {
        free: problem.free.clone(),
        configuration: problem.configure(&best.x),
        parameters: best.x,
        objective: best.f,
        initial_objective,
        best_start_objective,
        iterations: best.iterations,
        evaluations: best.evaluations,
        converged: best.converged,
        history: best.history,
    })
}
