//! Frontal-plane kinematics of the hip, torso, shoulder and elbow chain, and
//! the discretised range-of-motion domain.
//!
//! World frame: origin at the hip fixation of the support, `x` lateral toward
//! the supported arm, `y` up. The torso pivots about the lumbosacral point
//! `P0 = (-H_w, L_th)`. α is the shoulder elevation relative to the torso
//! (0 = arm horizontal and perpendicular to the torso, positive raises the
//! arm), β the lateral torso bend. The world elevation of the arm is α + β.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::anthro::{BodyModel, RomLimits};
use crate::error::{Error, Result};
use crate::units::{fmt9, Interval};

/// Slack allowed on law-of-cosines arguments before they are rejected.
pub const COS_LAW_TOLERANCE: f64 = 1e-9;

/// Shoulder elevation and torso bend, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub alpha: f64,
    pub beta: f64,
}

impl Pose {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    /// World elevation of the arm, α + β, degrees.
    pub fn elevation(&self) -> f64 {
        self.alpha + self.beta
    }
}

/// Device joint angle θ for a pose, in degrees.
///
/// θ is measured between the arm segment and the upward torso-segment axis
/// that carries the cable pulley, so θ = 90° − (α + β). With it,
/// `sin θ = cos(α + β)`: the weight torque `l·m·g·sin θ` and the weight
/// projection `m·g·cos(α + β)` describe the same load.
pub fn theta(pose: &Pose) -> f64 {
    90.0 - pose.elevation()
}

/// Which form of the elbow position equations to evaluate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KinematicsForm {
    /// Geometric form: radius `d2`, rotated by the torso bend β.
    #[default]
    Corrected,
    /// The published expressions verbatim, `d2² · sin(α + γ1 + γ2) − H_w`.
    /// The radius is squared and the rotation uses α; kept for comparison.
    Literal,
}

/// Intermediate and final quantities of the elbow position computation.
/// Lengths in m, angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElbowSolution {
    /// Lumbosacral pivot to shoulder.
    pub d1: f64,
    pub gamma1: f64,
    /// Lumbosacral pivot to elbow.
    pub d2: f64,
    /// Angle at the pivot between the shoulder and the elbow directions.
    pub gamma2: f64,
    pub x: f64,
    pub y: f64,
}

fn clamp_cos(equation: &'static str, value: f64) -> Result<f64> {
    if !value.is_finite() || value.abs() > 1.0 + COS_LAW_TOLERANCE {
        return Err(Error::Geometry { equation, value });
    }
    Ok(value.clamp(-1.0, 1.0))
}

/// Elbow position for `pose`.
pub fn elbow_position(body: &BodyModel, pose: &Pose, form: KinematicsForm) -> Result<ElbowSolution> {
    let u_th = body.upper_trunk_height;
    let c_w = body.half_chest_width;
    let l_a = body.upper_arm_length;
    let alpha = pose.alpha.to_radians();

    let d1 = (u_th * u_th + c_w * c_w).sqrt();
    let gamma1 = (c_w / u_th).atan();

    let shoulder_angle = std::f64::consts::FRAC_PI_2 + gamma1 + alpha;
    let d2_sq = l_a * l_a + d1 * d1 - 2.0 * l_a * d1 * clamp_cos("d2", shoulder_angle.cos())?;
    let d2 = d2_sq.max(0.0).sqrt();
    if d2 == 0.0 {
        return Err(Error::Geometry {
            equation: "gamma2",
            value: f64::NAN,
        });
    }
    let gamma2 = clamp_cos("gamma2", (d1 * d1 + d2 * d2 - l_a * l_a) / (2.0 * d1 * d2))?.acos();

    let (x, y) = match form {
        KinematicsForm::Literal => {
            let phi = alpha + gamma1 + gamma2;
            let r = d2 * d2;
            (r * phi.sin() - body.half_hip_width, r * phi.cos() + body.lower_trunk_height)
        }
        KinematicsForm::Corrected => {
            // gamma2 is unsigned; the elbow lies on the lateral side of the
            // pivot-shoulder line unless the arm is raised past that line.
            let turn = c_w * alpha.sin() - u_th * alpha.cos();
            let signed = if turn <= 0.0 { gamma2 } else { -gamma2 };
            let phi = gamma1 + signed - pose.beta.to_radians();
            (d2 * phi.sin() - body.half_hip_width, d2 * phi.cos() + body.lower_trunk_height)
        }
    };

    Ok(ElbowSolution {
        d1,
        gamma1: gamma1.to_degrees(),
        d2,
        gamma2: gamma2.to_degrees(),
        x,
        y,
    })
}

/// Lumbosacral pivot in world coordinates.
pub fn pivot(body: &BodyModel) -> [f64; 2] {
    [-body.half_hip_width, body.lower_trunk_height]
}

/// Rotates `p` about `center` by `angle_deg` counter-clockwise.
pub fn rotate_about(p: [f64; 2], center: [f64; 2], angle_deg: f64) -> [f64; 2] {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
    [center[0] + c * dx - s * dy, center[1] + s * dx + c * dy]
}

/// Shoulder position in world coordinates with the torso bent by β.
pub fn shoulder_position(body: &BodyModel, beta_deg: f64) -> [f64; 2] {
    let p0 = pivot(body);
    let upright = [
        p0[0] + body.half_chest_width,
        p0[1] + body.upper_trunk_height,
    ];
    rotate_about(upright, p0, beta_deg)
}

/// Discretised (α, β) domain with a reachability mask.
///
/// Cells are stored row-major with α varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct RomDomain {
    pub alpha_range: Interval,
    pub beta_range: Interval,
    pub resolution: f64,
    alphas: Vec<f64>,
    betas: Vec<f64>,
    mask: Vec<bool>,
}

impl RomDomain {
    /// Builds a domain whose mask is `reachable(pose)` at each grid node.
    pub fn from_predicate(
        alpha_range: Interval,
        beta_range: Interval,
        resolution: f64,
        mut reachable: impl FnMut(&Pose) -> bool,
    ) -> Result<Self> {
        let alphas = alpha_range.grid(resolution)?;
        let betas = beta_range.grid(resolution)?;
        let mut mask = Vec::with_capacity(alphas.len() * betas.len());
        for &b in &betas {
            for &a in &alphas {
                mask.push(reachable(&Pose::new(a, b)));
            }
        }
        Ok(Self {
            alpha_range,
            beta_range,
            resolution,
            alphas,
            betas,
            mask,
        })
    }

    /// Same grid, new mask: a cell stays reachable only if `keep` accepts it.
    pub fn restrict(&self, mut keep: impl FnMut(&Pose) -> bool) -> Self {
        let mut out = self.clone();
        for (idx, m) in out.mask.iter_mut().enumerate() {
            if *m {
                *m = keep(&self.pose(idx));
            }
        }
        out
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.alphas.len(), self.betas.len())
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn pose(&self, index: usize) -> Pose {
        let n = self.alphas.len();
        Pose::new(self.alphas[index % n], self.betas[index / n])
    }

    pub fn is_reachable(&self, index: usize) -> bool {
        self.mask[index]
    }

    pub fn reachable_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Reachable fraction of all cells.
    pub fn coverage(&self) -> f64 {
        if self.mask.is_empty() {
            return 0.0;
        }
        self.reachable_count() as f64 / self.mask.len() as f64
    }

    /// Iterates `(index, pose)` over reachable cells in storage order.
    pub fn reachable_cells(&self) -> impl Iterator<Item = (usize, Pose)> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| (i, self.pose(i)))
    }

    /// CSV with header `alpha_deg,beta_deg,reachable`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "alpha_deg,beta_deg,reachable")?;
        for (idx, &m) in self.mask.iter().enumerate() {
            let p = self.pose(idx);
            writeln!(w, "{},{},{}", fmt9(p.alpha), fmt9(p.beta), u8::from(m))?;
        }
        Ok(())
    }
}

/// SBS reachability over explicit axes: a cell is reachable when the arm
/// segment angle relative to the torso segment, α + β, lies in `joint_range`.
pub fn rom_domain_on(
    alpha_range: Interval,
    beta_range: Interval,
    joint_range: Interval,
    resolution: f64,
) -> Result<RomDomain> {
    RomDomain::from_predicate(alpha_range, beta_range, resolution, |p| {
        joint_range.contains(p.elevation())
    })
}

/// SBS reachability over the α (shoulder abduction) and β (torso lateral
/// bend) rows of `limits`.
pub fn rom_domain(limits: &RomLimits, joint_range: Interval, resolution: f64) -> Result<RomDomain> {
    rom_domain_on(
        limits.shoulder_abduction,
        limits.torso_lateral_bend,
        joint_range,
        resolution,
    )
}
