//! Anthropometric body models and the flight range-of-motion limits.
//!
//! Two anchor bodies are tabulated, the 1st percentile female (1PF) and the
//! 99th percentile male (99PM). Intermediate bodies are a linear blend of the
//! two anchor rows. That blend is a convenience for sweeping body size, not a
//! statement about the population distribution between the anchors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Interval, GRAVITY};

/// Upper-body segment dimensions and arm mass. Lengths in m, mass in kg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyModel {
    /// Total arm mass `A_m`.
    pub arm_mass: f64,
    /// Upper arm length `L_a`.
    pub upper_arm_length: f64,
    /// Upper trunk height `U_th`.
    pub upper_trunk_height: f64,
    /// Lower trunk height `L_th`.
    pub lower_trunk_height: f64,
    /// Half chest width `C_w`.
    pub half_chest_width: f64,
    /// Half hip width `H_w`.
    pub half_hip_width: f64,
    /// Moment arm of the arm weight about the shoulder. `None` uses `L_a`.
    #[serde(default)]
    pub moment_arm: Option<f64>,
}

/// Table row for the 1st percentile female.
pub const FIRST_PERCENTILE_FEMALE: BodyModel = BodyModel {
    arm_mass: 1.86,
    upper_arm_length: 0.234,
    upper_trunk_height: 0.269,
    lower_trunk_height: 0.213,
    half_chest_width: 0.138,
    half_hip_width: 0.142,
    moment_arm: None,
};

/// Table row for the 99th percentile male.
pub const NINETY_NINTH_PERCENTILE_MALE: BodyModel = BodyModel {
    arm_mass: 6.56,
    upper_arm_length: 0.312,
    upper_trunk_height: 0.353,
    lower_trunk_height: 0.265,
    half_chest_width: 0.203,
    half_hip_width: 0.214,
    moment_arm: None,
};

impl BodyModel {
    pub fn new(
        arm_mass: f64,
        upper_arm_length: f64,
        upper_trunk_height: f64,
        lower_trunk_height: f64,
        half_chest_width: f64,
        half_hip_width: f64,
    ) -> Result<Self> {
        let body = Self {
            arm_mass,
            upper_arm_length,
            upper_trunk_height,
            lower_trunk_height,
            half_chest_width,
            half_hip_width,
            moment_arm: None,
        };
        body.validate()?;
        Ok(body)
    }

    pub fn with_moment_arm(mut self, moment_arm: f64) -> Result<Self> {
        self.moment_arm = Some(moment_arm);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("arm_mass", self.arm_mass),
            ("upper_arm_length", self.upper_arm_length),
            ("upper_trunk_height", self.upper_trunk_height),
            ("lower_trunk_height", self.lower_trunk_height),
            ("half_chest_width", self.half_chest_width),
            ("half_hip_width", self.half_hip_width),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config("anthro", format!("{name} must be > 0, got {v}")));
            }
        }
        if let Some(l) = self.moment_arm {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::config("anthro", format!("moment_arm must be > 0, got {l}")));
            }
        }
        Ok(())
    }

    /// Arm weight `W = A_m * g`, in N.
    pub fn arm_weight(&self) -> f64 {
        self.arm_mass * GRAVITY
    }

    /// Lever arm `l` of the arm weight about the shoulder.
    pub fn moment_arm(&self) -> f64 {
        self.moment_arm.unwrap_or(self.upper_arm_length)
    }

    fn lerp(a: &BodyModel, b: &BodyModel, t: f64) -> BodyModel {
        // t = 0 and t = 1 reproduce the anchors bit-exactly.
        let mix = |x: f64, y: f64| {
            if t == 1.0 {
                y
            } else {
                (x + t * (y - x)).clamp(x.min(y), x.max(y))
            }
        };
        BodyModel {
            arm_mass: mix(a.arm_mass, b.arm_mass),
            upper_arm_length: mix(a.upper_arm_length, b.upper_arm_length),
            upper_trunk_height: mix(a.upper_trunk_height, b.upper_trunk_height),
            lower_trunk_height: mix(a.lower_trunk_height, b.lower_trunk_height),
            half_chest_width: mix(a.half_chest_width, b.half_chest_width),
            half_hip_width: mix(a.half_hip_width, b.half_hip_width),
            moment_arm: None,
        }
    }
}

/// Body for a fraction `p` of the way from the 1PF row (`p = 0`) to the
/// 99PM row (`p = 1`).
pub fn body_for_percentile(p: f64) -> Result<BodyModel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(
            "anthro",
            format!("percentile fraction must lie in [0, 1], got {p}"),
        ));
    }
    Ok(BodyModel::lerp(
        &FIRST_PERCENTILE_FEMALE,
        &NINETY_NINTH_PERCENTILE_MALE,
        p,
    ))
}

/// Arm weight in N.
pub fn arm_weight(body: &BodyModel) -> f64 {
    body.arm_weight()
}

/// Joint ranges observed during flight, in degrees.
///
/// Only `torso_lateral_bend` (β) and `shoulder_abduction` (α) enter the
/// frontal-plane analysis. The other four rows are carried for completeness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RomLimits {
    pub torso_flexion_extension: Interval,
    pub torso_lateral_bend: Interval,
    pub torso_rotation: Interval,
    pub shoulder_abduction: Interval,
    pub shoulder_flexion: Interval,
    pub shoulder_rotation: Interval,
}

impl Default for RomLimits {
    fn default() -> Self {
        let iv = |min, max| Interval { min, max };
        Self {
            torso_flexion_extension: iv(-30.0, 40.0),
            torso_lateral_bend: iv(-20.0, 20.0),
            torso_rotation: iv(-60.0, 60.0),
            shoulder_abduction: iv(-60.0, 5.0),
            shoulder_flexion: iv(-40.0, 0.0),
            shoulder_rotation: iv(-5.0, 5.0),
        }
    }
}

impl RomLimits {
    pub fn validate(&self) -> Result<()> {
        for iv in [
            self.torso_flexion_extension,
            self.torso_lateral_bend,
            self.torso_rotation,
            self.shoulder_abduction,
            self.shoulder_flexion,
            self.shoulder_rotation,
        ] {
            Interval::new(iv.min, iv.max)?;
        }
        Ok(())
    }
}
