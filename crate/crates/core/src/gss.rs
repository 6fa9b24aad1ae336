//! Gas spring support (GSS): a strut pushing from a waist anchor to a point
//! on the upper arm.
//!
//! The anchor is fixed to the waist belt and follows the torso as it bends,
//! i.e. it rotates about the lumbosacral pivot by β. The strut force acts
//! along the strut, `|F| = F_n + k_g·(L_n − L)`, and exists only while the
//! strut length stays inside its stroke.

use serde::{Deserialize, Serialize};

use crate::anthro::BodyModel;
use crate::error::{Error, Result};
use crate::kinematics::{elbow_position, pivot, rotate_about, shoulder_position, KinematicsForm, Pose};
use crate::units::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasSpringParams {
    /// Waist anchor relative to the hip fixation with the torso upright, m.
    pub anchor_offset: [f64; 2],
    /// Attachment point along the upper arm, as a fraction of `L_a`.
    pub attach_fraction: f64,
    /// Strut force at the nominal length, N.
    pub nominal_force: f64,
    pub nominal_length: f64,
    /// Force slope around the nominal length, N/m.
    pub gas_stiffness: f64,
    /// Admissible strut lengths, m.
    pub stroke: Interval,
}

impl GasSpringParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nominal_force.is_finite() && self.nominal_force > 0.0) {
            return Err(Error::config("gss", format!("nominal_force must be > 0, got {}", self.nominal_force)));
        }
        if !(self.stroke.min < self.nominal_length && self.nominal_length < self.stroke.max) {
            return Err(Error::config(
                "gss",
                format!(
                    "nominal_length {} must lie strictly inside the stroke [{}, {}]",
                    self.nominal_length, self.stroke.min, self.stroke.max
                ),
            ));
        }
        if !(self.attach_fraction > 0.0 && self.attach_fraction <= 1.0) {
            return Err(Error::config("gss", "attach_fraction must lie in (0, 1]"));
        }
        if !(self.gas_stiffness.is_finite() && self.gas_stiffness >= 0.0) {
            return Err(Error::config("gss", "gas_stiffness must be >= 0"));
        }
        Ok(())
    }

    /// Strut force magnitude at length `length`.
    pub fn force_magnitude(&self, length: f64) -> f64 {
        self.nominal_force + self.gas_stiffness * (self.nominal_length - length)
    }
}

/// Strut hardware plus the pose at which the nominal force is sized to
/// carry the arm. [`GssDesign::params_for`] turns it into the parameters for
/// one body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GssDesign {
    pub anchor_offset: [f64; 2],
    pub attach_fraction: f64,
    pub gas_stiffness: f64,
    pub nominal_length: f64,
    pub stroke: Interval,
    pub reference_pose: Pose,
}

impl Default for GssDesign {
    fn default() -> Self {
        Self {
            anchor_offset: [0.0, 0.10],
            attach_fraction: 0.5,
            gas_stiffness: 200.0,
            nominal_length: 0.40,
            stroke: Interval { min: 0.30, max: 0.50 },
            reference_pose: Pose::new(-20.0, 0.0),
        }
    }
}

impl GssDesign {
    /// Parameters whose strut balances `body` exactly at the reference pose.
    pub fn params_for(&self, body: &BodyModel, form: KinematicsForm) -> Result<GasSpringParams> {
        let mut params = GasSpringParams {
            anchor_offset: self.anchor_offset,
            attach_fraction: self.attach_fraction,
            nominal_force: 1.0,
            nominal_length: self.nominal_length,
            gas_stiffness: self.gas_stiffness,
            stroke: self.stroke,
        };
        let pose = self.reference_pose;
        let strut = strut_geometry(body, &params, &pose, form)?;
        let unit = [strut.vector[0] / strut.length, strut.vector[1] / strut.length];
        // Shoulder torque per newton of strut force.
        let lever = strut.attach_offset[0] * unit[1] - strut.attach_offset[1] * unit[0];
        let required = body.moment_arm() * body.arm_weight() * pose.elevation().to_radians().cos();
        if lever <= 0.0 {
            return Err(Error::config("gss", "strut cannot lift the arm at the reference pose"));
        }
        let force_at_ref = required / lever;
        params.nominal_force = force_at_ref - self.gas_stiffness * (self.nominal_length - strut.length);
        params.validate()?;
        Ok(params)
    }
}

/// Strut state for one pose. All vectors in world coordinates, m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrutGeometry {
    pub anchor: [f64; 2],
    pub attachment: [f64; 2],
    /// Attachment point relative to the shoulder.
    pub attach_offset: [f64; 2],
    /// Anchor to attachment.
    pub vector: [f64; 2],
    pub length: f64,
}

pub fn strut_geometry(
    body: &BodyModel,
    params: &GasSpringParams,
    pose: &Pose,
    form: KinematicsForm,
) -> Result<StrutGeometry> {
    let shoulder = shoulder_position(body, pose.beta);
    let elbow = elbow_position(body, pose, form)?;
    let f = params.attach_fraction;
    let attachment = [
        shoulder[0] + f * (elbow.x - shoulder[0]),
        shoulder[1] + f * (elbow.y - shoulder[1]),
    ];
    let anchor = rotate_about(params.anchor_offset, pivot(body), pose.beta);
    let vector = [attachment[0] - anchor[0], attachment[1] - anchor[1]];
    Ok(StrutGeometry {
        anchor,
        attachment,
        attach_offset: [attachment[0] - shoulder[0], attachment[1] - shoulder[1]],
        vector,
        length: vector[0].hypot(vector[1]),
    })
}

/// Force `(F_x, F_y)` the strut applies at the attachment point, N.
pub fn gss_force_at(
    body: &BodyModel,
    params: &GasSpringParams,
    pose: &Pose,
    form: KinematicsForm,
) -> Result<[f64; 2]> {
    let strut = strut_geometry(body, params, pose, form)?;
    if !params.stroke.contains(strut.length) || strut.length == 0.0 {
        return Err(Error::Unreachable {
            length: strut.length,
            min: params.stroke.min,
            max: params.stroke.max,
        });
    }
    let magnitude = params.force_magnitude(strut.length);
    Ok([
        magnitude * strut.vector[0] / strut.length,
        magnitude * strut.vector[1] / strut.length,
    ])
}

/// True when the strut length lies inside the stroke at `pose`.
pub fn gss_reachable(body: &BodyModel, params: &GasSpringParams, pose: &Pose, form: KinematicsForm) -> bool {
    strut_geometry(body, params, pose, form)
        .map(|s| params.stroke.contains(s.length))
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anthro::{FIRST_PERCENTILE_FEMALE as PF, NINETY_NINTH_PERCENTILE_MALE as PM};
    use approx::assert_relative_eq;

    const FORM: KinematicsForm = KinematicsForm::Corrected;

    fn params() -> GasSpringParams {
        GssDesign::default().params_for(&PF, FORM).unwrap()
    }

    #[test]
    fn nominal_length_gives_nominal_force() {
        let mut p = params();
        let pose = Pose::new(-35.0, 5.0);
        let s = strut_geometry(&PF, &p, &pose, FORM).unwrap();
        p.nominal_length = s.length;
        p.stroke = Interval::new(0.0, 10.0).unwrap();
        let f = gss_force_at(&PF, &p, &pose, FORM).unwrap();
        assert_relative_eq!(f[0].hypot(f[1]), p.nominal_force, epsilon = 1e-12);
    }

    #[test]
    fn zero_stiffness_is_constant_force() {
        let mut p = params();
        p.gas_stiffness = 0.0;
        p.stroke = Interval::new(0.0, 10.0).unwrap();
        for a in [-60.0, -30.0, 0.0, 5.0] {
            for b in [-20.0, 0.0, 20.0] {
                let f = gss_force_at(&PF, &p, &Pose::new(a, b), FORM).unwrap();
                assert_relative_eq!(f[0].hypot(f[1]), p.nominal_force, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn vertical_strut_has_no_lateral_force() {
        let mut p = params();
        p.stroke = Interval::new(0.0, 10.0).unwrap();
        let pose = Pose::new(0.0, 0.0);
        let s = strut_geometry(&PF, &p, &pose, FORM).unwrap();
        // Put the anchor straight below the attachment point.
        p.anchor_offset = [s.attachment[0], 0.05];
        let f = gss_force_at(&PF, &p, &pose, FORM).unwrap();
        assert!(f[0].abs() < 1e-12);
        assert!(f[1] > 0.0);
    }

    #[test]
    fn force_is_along_strut() {
        let p = params();
        let pose = Pose::new(-25.0, 4.0);
        let s = strut_geometry(&PF, &p, &pose, FORM).unwrap();
        let f = gss_force_at(&PF, &p, &pose, FORM).unwrap();
        let cross = s.vector[0] * f[1] - s.vector[1] * f[0];
        assert!(cross.abs() < 1e-12);
    }

    #[test]
    fn reachability_follows_stroke() {
        let mut p = params();
        p.stroke = Interval::new(0.0, f64::MAX).unwrap();
        for a in [-60.0, -10.0, 5.0] {
            assert!(gss_reachable(&PF, &p, &Pose::new(a, 15.0), FORM));
        }
        let s = strut_geometry(&PF, &p, &Pose::new(-20.0, 0.0), FORM).unwrap();
        p.stroke = Interval::new(s.length, s.length).unwrap();
        assert!(gss_reachable(&PF, &p, &Pose::new(-20.0, 0.0), FORM));
        assert!(!gss_reachable(&PF, &p, &Pose::new(-19.0, 0.0), FORM));
        let out = gss_force_at(&PF, &p, &Pose::new(-19.0, 0.0), FORM);
        assert!(matches!(out, Err(Error::Unreachable { .. })));
    }

    #[test]
    fn anchor_moves_with_torso() {
        let p = params();
        let up = strut_geometry(&PF, &p, &Pose::new(0.0, 0.0), FORM).unwrap();
        let bent = strut_geometry(&PF, &p, &Pose::new(0.0, 10.0), FORM).unwrap();
        let p0 = pivot(&PF);
        let r = |q: [f64; 2]| (q[0] - p0[0]).hypot(q[1] - p0[1]);
        assert_relative_eq!(r(up.anchor), r(bent.anchor), epsilon = 1e-12);
        assert!(up.anchor != bent.anchor);
    }

    #[test]
    fn design_balances_reference_pose() {
        for body in [PF, PM] {
            let design = GssDesign::default();
            let p = design.params_for(&body, FORM).unwrap();
            let pose = design.reference_pose;
            let s = strut_geometry(&body, &p, &pose, FORM).unwrap();
            let f = gss_force_at(&body, &p, &pose, FORM).unwrap();
            let torque = s.attach_offset[0] * f[1] - s.attach_offset[1] * f[0];
            let need = body.moment_arm() * body.arm_weight() * pose.elevation().to_radians().cos();
            assert_relative_eq!(torque, need, epsilon = 1e-10);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = params();
        p.nominal_length = p.stroke.max;
        assert!(p.validate().is_err());
        let mut p = params();
        p.nominal_force = 0.0;
        assert!(p.validate().is_err());
    }
}
