//! Force decomposition in the arm frame, the normalized error metrics and
//! their evaluation over a range-of-motion grid.
//!
//! The arm frame has `X_e` along the upper arm (shoulder to elbow) and `Y_e`
//! perpendicular to it, pointing upward when the arm is horizontal. A support
//! is compared with gravity through the force it applies at the moment-arm
//! distance `l`: the balancing component must equal `m·g·cos(α+β)`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anthro::BodyModel;
use crate::error::{Error, Result};
use crate::gss::{strut_geometry, GasSpringParams};
use crate::kinematics::{theta, KinematicsForm, Pose, RomDomain};
use crate::sbs::{device_torque, Sbs};
use crate::units::fmt9;

/// Applied force split along the arm frame, N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForceDecomposition {
    pub f_ye: f64,
    pub f_xe: f64,
    pub f_ye_ref: f64,
    pub f_xe_ref: f64,
    /// `f_ye − f_ye_ref`.
    pub f_err_ye: f64,
}

/// Unit vectors `(X_e, Y_e)` of the arm frame in world coordinates.
pub fn arm_frame(pose: &Pose) -> ([f64; 2], [f64; 2]) {
    let (s, c) = pose.elevation().to_radians().sin_cos();
    ([c, s], [-s, c])
}

/// `(m·g·cos(α+β), m·g·sin(α+β))`, N.
pub fn gravity_reference(body: &BodyModel, pose: &Pose) -> (f64, f64) {
    let (s, c) = pose.elevation().to_radians().sin_cos();
    let w = body.arm_weight();
    (c * w, s * w)
}

/// Rotates a world-frame force into the arm frame and compares it with the
/// gravity reference.
pub fn decompose(body: &BodyModel, force: [f64; 2], pose: &Pose) -> ForceDecomposition {
    let (xe, ye) = arm_frame(pose);
    let f_xe = force[0] * xe[0] + force[1] * xe[1];
    let f_ye = force[0] * ye[0] + force[1] * ye[1];
    let (f_ye_ref, f_xe_ref) = gravity_reference(body, pose);
    ForceDecomposition {
        f_ye,
        f_xe,
        f_ye_ref,
        f_xe_ref,
        f_err_ye: f_ye - f_ye_ref,
    }
}

/// Residual balancing torque per kilogram of arm, `F_errYe·L_a/A_m`, N·m/kg.
pub fn torque_error_norm(d: &ForceDecomposition, body: &BodyModel) -> f64 {
    d.f_err_ye * body.upper_arm_length / body.arm_mass
}

/// Force along the arm per kilogram of arm, `F_Xe/A_m`, N/kg.
pub fn parasitic_norm(d: &ForceDecomposition, body: &BodyModel) -> f64 {
    d.f_xe / body.arm_mass
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    TorqueError,
    Parasitic,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::TorqueError, Metric::Parasitic];

    pub fn name(self) -> &'static str {
        match self {
            Metric::TorqueError => "torque_error",
            Metric::Parasitic => "parasitic",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Metric::TorqueError => "N*m/kg",
            Metric::Parasitic => "N/kg",
        }
    }

    pub fn apply(self, d: &ForceDecomposition, body: &BodyModel) -> f64 {
        match self {
            Metric::TorqueError => torque_error_norm(d, body),
            Metric::Parasitic => parasitic_norm(d, body),
        }
    }
}

/// A support that can be evaluated over the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mechanism {
    Sbs(Sbs),
    Gss(GasSpringParams),
}

impl Mechanism {
    pub fn name(&self) -> &'static str {
        match self {
            Mechanism::Sbs(_) => "sbs",
            Mechanism::Gss(_) => "gss",
        }
    }

    /// Force the support applies, referred to the moment-arm distance `l`
    /// on the arm, in world coordinates. Its `Y_e` component carries the
    /// support torque divided by `l`; its `X_e` component is the force along
    /// the arm.
    pub fn equivalent_force(&self, body: &BodyModel, pose: &Pose, form: KinematicsForm) -> Result<[f64; 2]> {
        let (xe, ye) = arm_frame(pose);
        let l = body.moment_arm();
        match self {
            Mechanism::Sbs(sbs) => {
                let th = theta(pose);
                if !sbs.geometry.joint_range.contains(pose.elevation()) {
                    return Err(Error::domain(
                        "sbs",
                        format!("elevation {} deg outside the joint range", pose.elevation()),
                    ));
                }
                let gamma = device_torque(&sbs.geometry, &sbs.spring, th, sbs.mode)?;
                let f = gamma / l;
                Ok([f * ye[0], f * ye[1]])
            }
            Mechanism::Gss(params) => {
                let force = crate::gss::gss_force_at(body, params, pose, form)?;
                let strut = strut_geometry(body, params, pose, form)?;
                let off = strut.attach_offset;
                let torque = off[0] * force[1] - off[1] * force[0];
                let axial = force[0] * xe[0] + force[1] * xe[1];
                let perp = torque / l;
                Ok([perp * ye[0] + axial * xe[0], perp * ye[1] + axial * xe[1]])
            }
        }
    }
}

/// Outcome of evaluating one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Value(ForceDecomposition),
    /// Outside the domain mask or outside what the support can reach.
    Unreachable,
    /// The support model is singular at this pose.
    Singular,
}

/// Evaluates the support at every cell of `domain`, in grid order.
pub fn evaluate_cells(
    mechanism: &Mechanism,
    body: &BodyModel,
    domain: &RomDomain,
    form: KinematicsForm,
) -> Vec<Cell> {
    (0..domain.len())
        .into_par_iter()
        .map(|i| {
            if !domain.is_reachable(i) {
                return Cell::Unreachable;
            }
            let pose = domain.pose(i);
            match mechanism.equivalent_force(body, &pose, form) {
                Ok(f) => Cell::Value(decompose(body, f, &pose)),
                Err(Error::Singularity { .. }) => Cell::Singular,
                Err(_) => Cell::Unreachable,
            }
        })
        .collect()
}

/// Summary statistics over the defined cells. All NaN when none is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldStats {
    pub cells: usize,
    pub reachable: usize,
    pub singular: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub max_abs: f64,
}

impl FieldStats {
    /// Statistics of `values`, summed in slice order.
    pub fn from_values(values: &[Option<f64>], singular: usize) -> Self {
        let mut n = 0usize;
        let mut sum = 0.0;
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.iter().flatten() {
            n += 1;
            sum += v;
            min = min.min(*v);
            max = max.max(*v);
        }
        if n == 0 {
            return Self {
                cells: values.len(),
                reachable: 0,
                singular,
                mean: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
                max_abs: f64::NAN,
            };
        }
        Self {
            cells: values.len(),
            reachable: n,
            singular,
            mean: sum / n as f64,
            min,
            max,
            max_abs: min.abs().max(max.abs()),
        }
    }

    pub fn coverage(&self) -> f64 {
        if self.cells == 0 {
            0.0
        } else {
            self.reachable as f64 / self.cells as f64
        }
    }
}

/// One metric over the grid. `None` marks cells without a value.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub domain: RomDomain,
    pub metric: Metric,
    pub values: Vec<Option<f64>>,
    pub stats: FieldStats,
}

impl FieldMap {
    pub fn from_cells(domain: &RomDomain, cells: &[Cell], body: &BodyModel, metric: Metric) -> Self {
        let values: Vec<Option<f64>> = cells
            .iter()
            .map(|c| match c {
                Cell::Value(d) => Some(metric.apply(d, body)),
                _ => None,
            })
            .collect();
        let singular = cells.iter().filter(|c| matches!(c, Cell::Singular)).count();
        let stats = FieldStats::from_values(&values, singular);
        Self {
            domain: domain.clone(),
            metric,
            values,
            stats,
        }
    }

    pub fn coverage(&self) -> f64 {
        self.stats.coverage()
    }

    /// CSV with header `alpha_deg,beta_deg,value`; undefined cells have an
    /// empty value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "alpha_deg,beta_deg,value")?;
        for (i, v) in self.values.iter().enumerate() {
            let p = self.domain.pose(i);
            let value = v.map(fmt9).unwrap_or_default();
            writeln!(w, "{},{},{}", fmt9(p.alpha), fmt9(p.beta), value)?;
        }
        Ok(())
    }

    /// `key = value` summary of the statistics.
    pub fn write_summary<W: Write>(&self, mut w: W, mechanism: &str) -> Result<()> {
        let s = &self.stats;
        writeln!(w, "mechanism = \"{mechanism}\"")?;
        writeln!(w, "metric = \"{}\"", self.metric.name())?;
        writeln!(w, "unit = \"{}\"", self.metric.unit())?;
        writeln!(w, "cells = {}", s.cells)?;
        writeln!(w, "reachable = {}", s.reachable)?;
        writeln!(w, "singular = {}", s.singular)?;
        writeln!(w, "coverage = {}", fmt9(s.coverage()))?;
        for (k, v) in [("mean", s.mean), ("min", s.min), ("max", s.max), ("max_abs", s.max_abs)] {
            writeln!(w, "{k} = {}", fmt9(v))?;
        }
        Ok(())
    }
}

/// One metric of one support over `domain`.
pub fn evaluate_field(
    mechanism: &Mechanism,
    body: &BodyModel,
    domain: &RomDomain,
    metric: Metric,
    form: KinematicsForm,
) -> FieldMap {
    let cells = evaluate_cells(mechanism, body, domain, form);
    FieldMap::from_cells(domain, &cells, body, metric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anthro::{FIRST_PERCENTILE_FEMALE as PF, NINETY_NINTH_PERCENTILE_MALE as PM};
    use crate::gss::GssDesign;
    use crate::sbs::{CableMode, MechanismGeometry, SpringParams, CALIBRATED_LEVER_STIFFNESS};
    use crate::units::{Interval, GRAVITY};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const FORM: KinematicsForm = KinematicsForm::Corrected;

    fn full_domain(res: f64) -> RomDomain {
        RomDomain::from_predicate(
            Interval::new(-60.0, 5.0).unwrap(),
            Interval::new(-20.0, 20.0).unwrap(),
            res,
            |_| true,
        )
        .unwrap()
    }

    fn ideal(body: &BodyModel) -> Sbs {
        let a = 0.1;
        let sbs = Sbs {
            geometry: MechanismGeometry { a, ..Default::default() },
            spring: SpringParams::zero_free_length(CALIBRATED_LEVER_STIFFNESS / a, 0.07, 180.0).unwrap(),
            mode: CableMode::Exact,
        };
        sbs.balanced_for(body).unwrap()
    }

    #[test]
    fn gravity_reference_examples() {
        let (y, x) = gravity_reference(&PF, &Pose::new(0.0, 0.0));
        assert_eq!((y, x), (PF.arm_weight(), 0.0));
        let (y, x) = gravity_reference(&PF, &Pose::new(60.0, 30.0));
        assert!(y.abs() < 1e-12);
        assert_relative_eq!(x, PF.arm_weight(), epsilon = 1e-12);
        let (y, _) = gravity_reference(&PF, &Pose::new(-30.0, -20.0));
        assert_relative_eq!(y, 11.729, epsilon = 1e-3);
    }

    #[test]
    fn decompose_limits() {
        let pose = Pose::new(-40.0, 10.0);
        let d = decompose(&PF, [0.0, 0.0], &pose);
        assert_eq!(d.f_err_ye, -d.f_ye_ref);
        // A force equal and opposite to the arm weight.
        let d = decompose(&PF, [0.0, PF.arm_weight()], &pose);
        let (xe, _) = arm_frame(&pose);
        // Vertical support also pushes along the arm; remove that part.
        let along = PF.arm_weight() * xe[1];
        let balancing = [-along * xe[0], PF.arm_weight() - along * xe[1]];
        let d2 = decompose(&PF, balancing, &pose);
        assert!(d2.f_err_ye.abs() < 1e-12 && d2.f_xe.abs() < 1e-12);
        assert!(d.f_err_ye.abs() < 1e-12);
    }

    #[test]
    fn normalization_examples() {
        let d = ForceDecomposition { f_ye: 0.0, f_xe: -0.0465, f_ye_ref: 0.0298, f_xe_ref: 0.0, f_err_ye: -0.0298 };
        assert_relative_eq!(torque_error_norm(&d, &PF), -0.00375, epsilon = 1e-5);
        assert_relative_eq!(parasitic_norm(&d, &PF), -0.025, epsilon = 1e-12);
        let zero = ForceDecomposition { f_err_ye: 0.0, f_xe: 0.0, ..d };
        assert_eq!(torque_error_norm(&zero, &PF), 0.0);
        assert_eq!(parasitic_norm(&zero, &PF), 0.0);
    }

    #[test]
    fn ideal_sbs_fields_vanish() {
        let domain = full_domain(1.0);
        for body in [PF, PM] {
            let m = Mechanism::Sbs(ideal(&body));
            for metric in Metric::ALL {
                let f = evaluate_field(&m, &body, &domain, metric, FORM);
                assert_eq!(f.stats.reachable, domain.len());
                assert!(f.stats.max_abs <= 1e-12, "{metric:?} {}", f.stats.max_abs);
            }
        }
    }

    #[test]
    fn unsupported_arm_matches_closed_form() {
        let domain = full_domain(5.0);
        let mut sbs = ideal(&PF);
        sbs.geometry.delta_s = 0.0;
        let f = evaluate_field(&Mechanism::Sbs(sbs), &PF, &domain, Metric::TorqueError, FORM);
        for (i, v) in f.values.iter().enumerate() {
            let p = domain.pose(i);
            let want = -GRAVITY * PF.upper_arm_length * (p.alpha + p.beta).to_radians().cos();
            assert_relative_eq!(v.unwrap(), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn pretension_mismatch_is_bounded() {
        let domain = full_domain(1.0);
        for body in [PF, PM] {
            let mut sbs = ideal(&body);
            sbs.spring.f0 *= 1.05;
            let f = evaluate_field(&Mechanism::Sbs(sbs), &body, &domain, Metric::TorqueError, FORM);
            let mean = f.stats.mean.abs();
            assert!(mean > 0.0 && mean < 0.05 * GRAVITY * body.upper_arm_length, "{mean}");
        }
    }

    #[test]
    fn stats_ignore_traversal_order() {
        let domain = full_domain(1.0);
        let mut sbs = ideal(&PM);
        sbs.spring.k *= 1.05;
        let f = evaluate_field(&Mechanism::Sbs(sbs), &PM, &domain, Metric::TorqueError, FORM);
        let mut rev = f.values.clone();
        rev.reverse();
        let r = FieldStats::from_values(&rev, 0);
        assert_relative_eq!(r.mean, f.stats.mean, max_relative = 1e-12);
        assert_eq!((r.min, r.max, r.max_abs), (f.stats.min, f.stats.max, f.stats.max_abs));
    }

    #[test]
    fn joint_range_limits_sbs() {
        let domain = RomDomain::from_predicate(
            Interval::new(-65.0, 5.0).unwrap(),
            Interval::new(-20.0, 20.0).unwrap(),
            1.0,
            |_| true,
        )
        .unwrap();
        let f = evaluate_field(&Mechanism::Sbs(ideal(&PF)), &PF, &domain, Metric::TorqueError, FORM);
        assert_eq!(f.stats.cells - f.stats.reachable, 15);
        assert!(f.values.iter().zip(domain.mask()).all(|(v, _)| v.is_none() || v.unwrap().abs() < 1e-12));
    }

    #[test]
    fn gss_covers_less_than_sbs() {
        let domain = full_domain(1.0);
        for body in [PF, PM] {
            let gss = GssDesign::default().params_for(&body, FORM).unwrap();
            let g = evaluate_field(&Mechanism::Gss(gss), &body, &domain, Metric::TorqueError, FORM);
            let s = evaluate_field(&Mechanism::Sbs(ideal(&body)), &body, &domain, Metric::TorqueError, FORM);
            assert!(g.coverage() < s.coverage(), "{} vs {}", g.coverage(), s.coverage());
            assert!(g.coverage() > 0.0);
            // Balanced exactly at the reference pose only.
            let r = GssDesign::default().reference_pose;
            let idx = (0..domain.len()).find(|&i| domain.pose(i) == r).unwrap();
            assert!(g.values[idx].unwrap().abs() < 1e-12);
            assert!(g.stats.max_abs > 1e-3);
        }
    }

    #[test]
    fn gss_equivalent_force_keeps_torque() {
        let gss = GssDesign::default().params_for(&PF, FORM).unwrap();
        let pose = Pose::new(-30.0, 5.0);
        let f = Mechanism::Gss(gss).equivalent_force(&PF, &pose, FORM).unwrap();
        let raw = crate::gss::gss_force_at(&PF, &gss, &pose, FORM).unwrap();
        let s = strut_geometry(&PF, &gss, &pose, FORM).unwrap();
        let torque = s.attach_offset[0] * raw[1] - s.attach_offset[1] * raw[0];
        let d = decompose(&PF, f, &pose);
        assert_relative_eq!(d.f_ye * PF.moment_arm(), torque, epsilon = 1e-12);
    }

    #[test]
    fn field_csv_layout() {
        let domain = RomDomain::from_predicate(
            Interval::new(-1.0, 0.0).unwrap(),
            Interval::new(0.0, 1.0).unwrap(),
            1.0,
            |p| p.alpha < 0.0,
        )
        .unwrap();
        let f = evaluate_field(&Mechanism::Sbs(ideal(&PF)), &PF, &domain, Metric::Parasitic, FORM);
        let mut out = Vec::new();
        f.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "alpha_deg,beta_deg,value\n-1,0,0\n0,0,\n-1,1,0\n0,1,\n");
        let mut sum = Vec::new();
        f.write_summary(&mut sum, "sbs").unwrap();
        assert!(String::from_utf8(sum).unwrap().contains("coverage = 0.5\n"));
    }

    proptest! {
        #[test]
        fn decomposition_preserves_norm(fx in -500.0f64..500.0, fy in -500.0f64..500.0,
                                        a in -60.0f64..5.0, b in -20.0f64..20.0) {
            let pose = Pose::new(a, b);
            let d = decompose(&PF, [fx, fy], &pose);
            // Rotation-matrix oracle: rotate by −(α+β).
            let t = -(a + b).to_radians();
            let (rx, ry) = (t.cos() * fx - t.sin() * fy, t.sin() * fx + t.cos() * fy);
            prop_assert!((d.f_xe - rx).abs() <= 1e-9 * (1.0 + rx.abs()));
            prop_assert!((d.f_ye - ry).abs() <= 1e-9 * (1.0 + ry.abs()));
            let n2 = fx * fx + fy * fy;
            prop_assert!((d.f_xe * d.f_xe + d.f_ye * d.f_ye - n2).abs() <= 1e-9 * n2.max(1e-300));
            prop_assert_eq!(d.f_err_ye, d.f_ye - d.f_ye_ref);
        }

        #[test]
        fn metrics_are_linear(e in -50.0f64..50.0, s in -10.0f64..10.0) {
            let d = ForceDecomposition { f_ye: 0.0, f_xe: e, f_ye_ref: 0.0, f_xe_ref: 0.0, f_err_ye: e };
            let ds = ForceDecomposition { f_xe: e * s, f_err_ye: e * s, ..d };
            prop_assert!((torque_error_norm(&ds, &PM) - s * torque_error_norm(&d, &PM)).abs() <= 1e-12 * (1.0 + e.abs() * s.abs()));
            prop_assert!((parasitic_norm(&ds, &PM) - s * parasitic_norm(&d, &PM)).abs() <= 1e-12 * (1.0 + e.abs() * s.abs()));
        }
    }
}
