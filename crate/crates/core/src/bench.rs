//! Virtual test bench: theoretical torque sweeps with spring-tolerance bands,
//! measured-curve ingestion and relative torque error.
//!
//! Bench angles are arm-segment elevations φ in degrees (0 = horizontal,
//! negative = arm down); the device angle is θ = 90° − φ.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sbs::{device_torque, CableMode, MechanismGeometry, SpringParams, DELTA_S_TRAVEL};
use crate::units::{fmt9, Interval};

/// Below this theoretical torque the relative error is left undefined, N·m.
pub const MIN_RELATIVE_TORQUE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub angle_range: Interval,
    pub angle_step: f64,
    pub delta_s_values: Vec<f64>,
    pub k_tolerance: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            angle_range: Interval { min: -69.0, max: 63.0 },
            angle_step: 1.0,
            delta_s_values: (1..=6).map(|i| i as f64 * 0.01).collect(),
            k_tolerance: 0.10,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self, geom: &MechanismGeometry) -> Result<()> {
        self.angle_range.grid_len(self.angle_step)?;
        if !geom.joint_range.contains_interval(&self.angle_range) {
            return Err(Error::config("bench", "angle_range must lie within the joint range"));
        }
        if let Some(ds) = self.delta_s_values.iter().find(|d| !DELTA_S_TRAVEL.contains(**d)) {
            return Err(Error::config("bench", format!("delta_s {ds} outside the travel [0, 0.06] m")));
        }
        if !(0.0..1.0).contains(&self.k_tolerance) {
            return Err(Error::config("bench", "k_tolerance must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Theoretical torque at one grounding-part setting.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueCurve {
    pub delta_s: f64,
    pub angles: Vec<f64>,
    pub torque: Vec<f64>,
    pub band_low: Vec<f64>,
    pub band_high: Vec<f64>,
    /// Constant-form torque `a·Δs·k`, the horizontal-arm value, N·m.
    pub amplitude: f64,
}

impl TorqueCurve {
    /// Angle of the largest torque, refined by a parabola through the
    /// maximum sample and its neighbours.
    pub fn peak_angle(&self) -> f64 {
        let (i, _) = self
            .torque
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &t)| if t > acc.1 { (i, t) } else { acc });
        if i == 0 || i + 1 == self.torque.len() {
            return self.angles[i];
        }
        let (y0, y1, y2) = (self.torque[i - 1], self.torque[i], self.torque[i + 1]);
        let h = self.angles[i + 1] - self.angles[i];
        let denom = y0 - 2.0 * y1 + y2;
        if denom == 0.0 {
            return self.angles[i];
        }
        self.angles[i] + 0.5 * h * (y0 - y2) / denom
    }

    /// CSV with header `angle_deg,torque_nm,band_low_nm,band_high_nm`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "angle_deg,torque_nm,band_low_nm,band_high_nm")?;
        for i in 0..self.angles.len() {
            writeln!(
                w,
                "{},{},{},{}",
                fmt9(self.angles[i]),
                fmt9(self.torque[i]),
                fmt9(self.band_low[i]),
                fmt9(self.band_high[i])
            )?;
        }
        Ok(())
    }
}

/// Spring with `k` scaled by `factor`. A zero-free-length spring keeps its
/// zero free length.
fn tolerance_spring(spring: &SpringParams, factor: f64) -> SpringParams {
    let mut s = spring.scaled_k(factor);
    if spring.is_zero_free_length() {
        s.b0 = s.l0 - s.f0 / s.k;
    }
    s
}

pub fn theoretical_sweep(
    geom: &MechanismGeometry,
    spring: &SpringParams,
    spec: &SweepSpec,
    mode: CableMode,
) -> Result<Vec<TorqueCurve>> {
    spec.validate(geom)?;
    let angles = spec.angle_range.grid(spec.angle_step)?;
    let lo = tolerance_spring(spring, 1.0 - spec.k_tolerance);
    let hi = tolerance_spring(spring, 1.0 + spec.k_tolerance);
    spec.delta_s_values
        .iter()
        .map(|&ds| {
            let g = geom.with_delta_s(ds);
            let n = angles.len();
            let (mut torque, mut band_low, mut band_high) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
            for &phi in &angles {
                let th = 90.0 - phi;
                let t = device_torque(&g, spring, th, mode)?;
                let tl = device_torque(&g, &lo, th, mode)?;
                let th_ = device_torque(&g, &hi, th, mode)?;
                torque.push(t);
                band_low.push(tl.min(th_));
                band_high.push(tl.max(th_));
            }
            Ok(TorqueCurve {
                delta_s: ds,
                angles: angles.clone(),
                torque,
                band_low,
                band_high,
                amplitude: g.a * ds * spring.k,
            })
        })
        .collect()
}

/// Hysteresis branch of a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Loading,
    Unloading,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Loading => "loading",
            Direction::Unloading => "unloading",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredCurve {
    pub angles: Vec<f64>,
    pub torque: Vec<f64>,
    pub direction: Direction,
}

impl MeasuredCurve {
    /// The theoretical torque written as if it had been measured.
    pub fn from_theoretical(curve: &TorqueCurve, direction: Direction) -> Self {
        Self {
            angles: curve.angles.clone(),
            torque: curve.torque.clone(),
            direction,
        }
    }
}

const MEASURED_HEADER: [&str; 3] = ["angle_deg", "torque_nm", "direction"];

/// Reads `angle_deg,torque_nm,direction` rows. Each contiguous run of one
/// direction becomes a curve; angles must be strictly monotone in a run.
pub fn ingest_measured<R: Read>(reader: R) -> Result<Vec<MeasuredCurve>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    if header.is_empty() {
        return Err(Error::Parse { line: 1, message: "missing header".into() });
    }
    if header.iter().collect::<Vec<_>>() != MEASURED_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`", MEASURED_HEADER.join(",")),
        });
    }
    let mut curves: Vec<MeasuredCurve> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse { line, message };
        if record.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", record.len())));
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            let v: f64 = record[i].parse().map_err(|_| bad(format!("invalid {name} `{}`", &record[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(format!("non-finite {name}")))
            }
        };
        let angle = num(0, "angle")?;
        let torque = num(1, "torque")?;
        let direction = match &record[2] {
            "loading" => Direction::Loading,
            "unloading" => Direction::Unloading,
            other => return Err(bad(format!("unknown direction `{other}`"))),
        };
        match curves.last_mut() {
            Some(c) if c.direction == direction => {
                c.angles.push(angle);
                c.torque.push(torque);
            }
            _ => curves.push(MeasuredCurve {
                angles: vec![angle],
                torque: vec![torque],
                direction,
            }),
        }
    }
    for (i, c) in curves.iter().enumerate() {
        let up = c.angles.windows(2).all(|w| w[1] > w[0]);
        let down = c.angles.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(Error::Validation {
                message: format!("branch {} ({}) has non-monotone angles", i + 1, c.direction.as_str()),
            });
        }
    }
    Ok(curves)
}

/// Writes curves in the measured format. Numbers use the shortest
/// representation that reads back to the same value.
pub fn write_measured<W: Write>(curves: &[MeasuredCurve], mut w: W) -> Result<()> {
    writeln!(w, "{}", MEASURED_HEADER.join(","))?;
    for c in curves {
        for (a, t) in c.angles.iter().zip(&c.torque) {
            writeln!(w, "{a:?},{t:?},{}", c.direction.as_str())?;
        }
    }
    Ok(())
}

/// Relative error at one measured angle. `None` where the theoretical
/// torque is too small or the angle lies outside the theoretical range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeErrorPoint {
    pub angle: f64,
    pub value: Option<f64>,
}

fn interpolate(curve: &TorqueCurve, angle: f64) -> Option<f64> {
    let xs = &curve.angles;
    if xs.is_empty() || angle < xs[0] || angle > xs[xs.len() - 1] {
        return None;
    }
    let j = xs.partition_point(|&x| x < angle);
    if xs[j] == angle {
        return Some(curve.torque[j]);
    }
    let (x0, x1) = (xs[j - 1], xs[j]);
    let t = (angle - x0) / (x1 - x0);
    Some(curve.torque[j - 1] + t * (curve.torque[j] - curve.torque[j - 1]))
}

/// `(theoretical − measured) / theoretical` per measured angle, with the
/// theoretical curve linearly interpolated.
pub fn relative_error(measured: &MeasuredCurve, theoretical: &TorqueCurve) -> Result<Vec<RelativeErrorPoint>> {
    let mut overlap = false;
    let points = measured
        .angles
        .iter()
        .zip(&measured.torque)
        .map(|(&angle, &m)| {
            let value = interpolate(theoretical, angle).and_then(|t| {
                overlap = true;
                (t.abs() >= MIN_RELATIVE_TORQUE).then(|| (t - m) / t)
            });
            RelativeErrorPoint { angle, value }
        })
        .collect();
    if !overlap {
        return Err(Error::domain("bench", "measured angles do not overlap the theoretical curve"));
    }
    Ok(points)
}

/// CSV with header `angle_deg,relative_error`; undefined points are empty.
pub fn write_relative_error<W: Write>(points: &[RelativeErrorPoint], mut w: W) -> Result<()> {
    writeln!(w, "angle_deg,relative_error")?;
    for p in points {
        writeln!(w, "{},{}", fmt9(p.angle), p.value.map(fmt9).unwrap_or_default())?;
    }
    Ok(())
}
