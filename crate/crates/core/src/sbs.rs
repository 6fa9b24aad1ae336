//! Spring and cable static-balancing support (SBS).
//!
//! A spring in the torso segment pulls a cable that runs over a pulley at
//! distance `a` from the joint and ends on a grounding part at distance `Δs`
//! along the arm segment. With θ the angle between the arm segment and the
//! pulley axis, the cable length is `b = sqrt(a² + Δs² − 2·a·Δs·cos θ)` and
//! the device torque is `Γ_d = a·F_s·Δs·sin θ / b`.
//!
//! When the spring behaves as a zero-free-length spring (`F_s = k·b`), the
//! torque reduces to `a·k·Δs·sin θ`, which has the same shape as the arm
//! weight torque `l·m·g·sin θ`. Tuning `a·k·Δs = l·m·g` then balances the arm
//! at every angle.

use serde::{Deserialize, Serialize};

use crate::anthro::BodyModel;
use crate::error::{Error, Result};
use crate::units::{Interval, GRAVITY};

/// Travel of the grounding part on the built device, m.
pub const DELTA_S_TRAVEL: Interval = Interval { min: 0.0, max: 0.06 };

/// Arm length the tuning knob is calibrated for, m.
pub const CALIBRATION_ARM_LENGTH: f64 = 0.312;

/// Grounding-part travel that compensates one kilogram at the calibration
/// arm length, m.
pub const TRAVEL_PER_KG: f64 = 0.010;

/// `a·k` implied by the tuning rule: 1 kg at 0.312 m per 10 mm of travel.
pub const CALIBRATED_LEVER_STIFFNESS: f64 = GRAVITY * CALIBRATION_ARM_LENGTH / TRAVEL_PER_KG;

/// Pitch of the M10 adjustment screw, m per knob turn.
pub const SCREW_PITCH: f64 = 0.0015;

/// Spring law parameters. `F_s = k·Δx + F0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpringParams {
    /// Spring constant, N/m.
    pub k: f64,
    /// Initial (free) length, m.
    pub l0: f64,
    /// Force at the initial length, N.
    pub f0: f64,
    /// Pretension length, m.
    pub b0: f64,
}

impl SpringParams {
    /// Spring pretensioned so that it acts as a zero-free-length spring.
    pub fn zero_free_length(k: f64, l0: f64, f0: f64) -> Result<Self> {
        let mut s = Self { k, l0, f0, b0: 0.0 };
        s.validate_base()?;
        s.b0 = zero_free_length_pretension(&s)?;
        Ok(s)
    }

    /// Spring with an explicit pretension.
    pub fn with_pretension(k: f64, l0: f64, f0: f64, b0: f64) -> Result<Self> {
        let s = Self { k, l0, f0, b0 };
        s.validate()?;
        Ok(s)
    }

    fn validate_base(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::config("sbs", format!("spring constant k must be > 0, got {}", self.k)));
        }
        if !(self.l0.is_finite() && self.l0 > 0.0) {
            return Err(Error::config("sbs", format!("initial length l0 must be > 0, got {}", self.l0)));
        }
        if !(self.f0.is_finite() && self.f0 >= 0.0) {
            return Err(Error::config("sbs", format!("initial force F0 must be >= 0, got {}", self.f0)));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_base()?;
        if !(self.b0.is_finite() && self.b0 >= 0.0) {
            return Err(Error::config("sbs", format!("pretension b0 must be >= 0, got {}", self.b0)));
        }
        Ok(())
    }

    /// True when `b0 = l0 − F0/k` up to rounding.
    pub fn is_zero_free_length(&self) -> bool {
        let ideal = self.l0 - self.f0 / self.k;
        (self.b0 - ideal).abs() <= 1e-12 * self.l0.max(self.b0).max(1e-3)
    }

    /// Same spring with `k` scaled, everything else unchanged.
    pub fn scaled_k(&self, factor: f64) -> Self {
        Self {
            k: self.k * factor,
            ..*self
        }
    }
}

/// `F_s = k·Δx + F0`.
pub fn spring_force(spring: &SpringParams, deflection: f64) -> Result<f64> {
    if deflection < -spring.l0 {
        return Err(Error::PhysicalRange {
            deflection,
            min: -spring.l0,
        });
    }
    Ok(spring.k * deflection + spring.f0)
}

/// Pretension that makes the spring emulate zero free length,
/// `b0 = l0 − F0/k`.
pub fn zero_free_length_pretension(spring: &SpringParams) -> Result<f64> {
    if !(spring.k > 0.0) {
        return Err(Error::config("sbs", "zero-free-length pretension needs k > 0"));
    }
    let b0 = spring.l0 - spring.f0 / spring.k;
    if b0 < 0.0 {
        return Err(Error::config(
            "sbs",
            format!(
                "l0 = {} m is shorter than F0/k = {} m; the spring cannot emulate zero free length",
                spring.l0,
                spring.f0 / spring.k
            ),
        ));
    }
    Ok(b0)
}

/// How the cable length enters the torque equation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CableMode {
    /// `b` from the cable geometry at every angle.
    #[default]
    Exact,
    /// The lever term uses a constant `b`, its value with the arm horizontal
    /// (θ = 90°); the spring still sees the exact cable length. This is the
    /// constant-length simplification of the bench model and produces the
    /// drift of the torque maximum with `Δs`.
    ConstantB,
}

/// Geometry of the spring and cable mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismGeometry {
    /// Pulley distance from the joint along the torso segment, m.
    pub a: f64,
    /// Grounding-part travel, i.e. cable lever arm on the arm segment, m.
    pub delta_s: f64,
    /// Attachment distance of the arm segment, m.
    pub arm_segment_length: f64,
    /// Arm segment angle range relative to the torso segment, degrees.
    pub joint_range: Interval,
    /// Design torque about the sagittal axis, N·m. Informational.
    pub sagittal_design_torque: f64,
}

impl Default for MechanismGeometry {
    fn default() -> Self {
        Self {
            a: 0.1,
            delta_s: 0.0,
            arm_segment_length: CALIBRATION_ARM_LENGTH,
            joint_range: Interval { min: -80.0, max: 80.0 },
            sagittal_design_torque: 10.0,
        }
    }
}

impl MechanismGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::config("sbs", format!("lever distance a must be > 0, got {}", self.a)));
        }
        if !(self.delta_s.is_finite() && self.delta_s >= 0.0) {
            return Err(Error::config("sbs", format!("delta_s must be >= 0, got {}", self.delta_s)));
        }
        if !(self.arm_segment_length.is_finite() && self.arm_segment_length > 0.0) {
            return Err(Error::config("sbs", "arm_segment_length must be > 0"));
        }
        Interval::new(self.joint_range.min, self.joint_range.max)?;
        if !Interval::new(-180.0, 180.0)?.contains_interval(&self.joint_range) {
            return Err(Error::config("sbs", "joint_range must lie within [-180, 180] degrees"));
        }
        Ok(())
    }

    pub fn with_delta_s(self, delta_s: f64) -> Self {
        Self { delta_s, ..self }
    }
}

/// `b = sqrt(a² + Δs² − 2·a·Δs·cos θ)`, θ in degrees.
pub fn cable_length(geom: &MechanismGeometry, theta_deg: f64) -> f64 {
    let (a, ds) = (geom.a, geom.delta_s);
    let sq = a * a + ds * ds - 2.0 * a * ds * theta_deg.to_radians().cos();
    sq.max(0.0).sqrt()
}

/// Spring deflection for cable length `b`: `Δx = b − l0 + b0`.
pub fn spring_deflection(spring: &SpringParams, b: f64) -> f64 {
    b - spring.l0 + spring.b0
}

/// Device torque `Γ_d = a·F_s·Δs·sin θ / b`, N·m, θ in degrees.
pub fn device_torque(
    geom: &MechanismGeometry,
    spring: &SpringParams,
    theta_deg: f64,
    mode: CableMode,
) -> Result<f64> {
    let b = cable_length(geom, theta_deg);
    let lever = match mode {
        CableMode::Exact => b,
        CableMode::ConstantB => geom.a.hypot(geom.delta_s),
    };
    if geom.delta_s == 0.0 {
        return Ok(0.0);
    }
    if lever <= f64::EPSILON * (geom.a + geom.delta_s) {
        return Err(Error::Singularity { theta_deg });
    }
    let force = spring_force(spring, spring_deflection(spring, b))?;
    Ok(geom.a * force * geom.delta_s * theta_deg.to_radians().sin() / lever)
}

/// Arm weight torque `Γ_w = l·m·g·sin θ`, N·m.
pub fn arm_torque(body: &BodyModel, moment_arm: f64, theta_deg: f64) -> f64 {
    moment_arm * body.arm_weight() * theta_deg.to_radians().sin()
}

/// Device torque, weight torque and their difference at one angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueBreakdown {
    pub gamma_d: f64,
    pub gamma_w: f64,
    /// `gamma_d − gamma_w`.
    pub net: f64,
}

/// A complete SBS configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sbs {
    pub geometry: MechanismGeometry,
    pub spring: SpringParams,
    #[serde(default)]
    pub mode: CableMode,
}

impl Sbs {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.spring.validate()
    }

    pub fn net_torque(&self, body: &BodyModel, theta_deg: f64) -> Result<TorqueBreakdown> {
        net_torque(body, &self.geometry, &self.spring, theta_deg, self.mode)
    }

    /// Configuration with `Δs` tuned so that `a·k·Δs = l·m·g`, without the
    /// hardware travel clamp.
    pub fn balanced_for(&self, body: &BodyModel) -> Result<Sbs> {
        let t = tune_delta_s(body, &self.geometry, &self.spring)?;
        Ok(Sbs {
            geometry: self.geometry.with_delta_s(t.unclamped),
            ..*self
        })
    }
}

/// `ΣΓ = Γ_d − Γ_w` with the body's moment arm.
pub fn net_torque(
    body: &BodyModel,
    geom: &MechanismGeometry,
    spring: &SpringParams,
    theta_deg: f64,
    mode: CableMode,
) -> Result<TorqueBreakdown> {
    let gamma_d = device_torque(geom, spring, theta_deg, mode)?;
    let gamma_w = arm_torque(body, body.moment_arm(), theta_deg);
    Ok(TorqueBreakdown {
        gamma_d,
        gamma_w,
        net: gamma_d - gamma_w,
    })
}

/// Result of the analytic tuning rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tuning {
    /// Travel to set on the device, clamped to [`DELTA_S_TRAVEL`].
    pub delta_s: f64,
    /// `m·g·l / (a·k)` before clamping.
    pub unclamped: f64,
    /// True when the body needs more travel than the device has.
    pub clamped: bool,
}

/// Grounding-part travel that balances `body`: `Δs = m·g·l / (a·k)`.
pub fn tune_delta_s(body: &BodyModel, geom: &MechanismGeometry, spring: &SpringParams) -> Result<Tuning> {
    let ak = geom.a * spring.k;
    if !(ak.is_finite() && ak > 0.0) {
        return Err(Error::config("sbs", format!("a·k must be > 0 for tuning, got {ak}")));
    }
    if !spring.is_zero_free_length() {
        return Err(Error::config(
            "sbs",
            "the analytic tuning rule m·g·l = a·Δs·k needs a zero-free-length spring (b0 = l0 − F0/k)",
        ));
    }
    let unclamped = body.arm_weight() * body.moment_arm() / ak;
    let delta_s = DELTA_S_TRAVEL.clamp(unclamped);
    Ok(Tuning {
        delta_s,
        unclamped,
        clamped: delta_s != unclamped,
    })
}

/// Largest arm mass held at `arm_length` with travel `delta_s` and a
/// zero-free-length spring. An optional torque cap models a measured
/// maximum output.
pub fn compensable_mass(
    geom: &MechanismGeometry,
    spring: &SpringParams,
    arm_length: f64,
    torque_cap: Option<f64>,
) -> f64 {
    let torque = geom.a * spring.k * geom.delta_s;
    let torque = torque_cap.map_or(torque, |cap| torque.min(cap));
    torque / (GRAVITY * arm_length)
}
