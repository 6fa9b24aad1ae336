//! Run configuration: TOML file layered over the embedded defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use armbalance_core::anthro::{body_for_percentile, BodyModel, RomLimits};
use armbalance_core::bench::SweepSpec;
use armbalance_core::gss::{GasSpringParams, GssDesign};
use armbalance_core::kinematics::{KinematicsForm, Pose, RomDomain};
use armbalance_core::optimizer::{MethodConfig, Parameter};
use armbalance_core::sbs::{CableMode, MechanismGeometry, Sbs, SpringParams};
use armbalance_core::units::{fmt9, Interval};

/// The embedded default configuration.
pub const DEFAULT_CONFIG: &str = include_str!("default.toml");

/// Body selection: one of the anchor rows or a fraction between them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Percentile {
    FirstFemale,
    NinetyNinthMale,
    Fraction(f64),
}

impl Percentile {
    pub fn fraction(self) -> f64 {
        match self {
            Percentile::FirstFemale => 0.0,
            Percentile::NinetyNinthMale => 1.0,
            Percentile::Fraction(f) => f,
        }
    }

    /// Short name used in output file names.
    pub fn label(self) -> String {
        match self {
            Percentile::FirstFemale => "1pf".into(),
            Percentile::NinetyNinthMale => "99pm".into(),
            Percentile::Fraction(f) => format!("p{}", fmt9(f)),
        }
    }

    pub fn body(self) -> Result<BodyModel> {
        Ok(body_for_percentile(self.fraction())?)
    }
}

impl FromStr for Percentile {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1pf" => Ok(Percentile::FirstFemale),
            "99pm" => Ok(Percentile::NinetyNinthMale),
            other => {
                let f: f64 = other
                    .parse()
                    .map_err(|_| anyhow!("percentile must be 1pf, 99pm or a fraction in [0, 1], got `{s}`"))?;
                if !(0.0..=1.0).contains(&f) {
                    bail!("percentile fraction must lie in [0, 1], got {f}");
                }
                Ok(Percentile::Fraction(f))
            }
        }
    }
}

impl fmt::Display for Percentile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PercentileValue {
    Name(String),
    Fraction(f64),
}

impl PercentileValue {
    fn parse(&self) -> Result<Percentile> {
        match self {
            PercentileValue::Name(s) => s.parse(),
            PercentileValue::Fraction(f) => f.to_string().parse(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySection {
    percentile: Option<PercentileValue>,
    arm_mass: Option<f64>,
    upper_arm_length: Option<f64>,
    upper_trunk_height: Option<f64>,
    lower_trunk_height: Option<f64>,
    half_chest_width: Option<f64>,
    half_hip_width: Option<f64>,
    moment_arm: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub resolution: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbsSection {
    pub a: f64,
    pub k: f64,
    pub l0: f64,
    pub f0: f64,
    /// Pretension; omitted means zero free length.
    pub b0: Option<f64>,
    /// Grounding-part travel; omitted means tuned to each body.
    pub delta_s: Option<f64>,
    pub mode: CableMode,
    pub arm_segment_length: f64,
    pub joint_range: Interval,
    pub sagittal_design_torque: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GssSection {
    pub enabled: bool,
    pub anchor_offset: [f64; 2],
    pub attach_fraction: f64,
    pub gas_stiffness: f64,
    pub nominal_length: f64,
    pub stroke: Interval,
    pub reference_pose: Pose,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    percentiles: Vec<PercentileValue>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    pub free: Vec<Parameter>,
    pub bounds: BTreeMap<Parameter, [f64; 2]>,
    #[serde(default)]
    pub initial: BTreeMap<Parameter, f64>,
    pub grid_points: usize,
    pub refine_starts: usize,
    pub max_evaluations: usize,
    pub seed: Option<u64>,
    pub jitter: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kinematics: KinematicsForm,
    pub output: Option<String>,
    pub body: BodySection,
    pub domain: DomainSection,
    pub rom: RomLimits,
    pub sbs: SbsSection,
    pub gss: GssSection,
    pub map: MapSection,
    pub optimize: OptimizeSection,
    pub bench: SweepSpec,
    #[serde(skip)]
    percentile_override: Option<Percentile>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub percentile: Option<Percentile>,
    pub resolution: Option<f64>,
    pub paper_mode: bool,
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    /// Parses `text` layered over the defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut table: toml::Table = DEFAULT_CONFIG.parse().context("embedded default config")?;
        let user: toml::Table = text.parse().context("config: invalid TOML")?;
        merge(&mut table, user);
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| anyhow!("config: {}", e.message()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("config: cannot read {}", p.display()))?;
                Self::from_toml(&text)
            }
            None => Self::from_toml(""),
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(r) = o.resolution {
            self.domain.resolution = r;
        }
        if o.paper_mode {
            self.kinematics = KinematicsForm::Literal;
            self.sbs.mode = CableMode::ConstantB;
        }
        self.percentile_override = o.percentile;
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.rom.validate()?;
        self.domain()?;
        self.explicit_body()?;
        self.body_percentile()?;
        for p in &self.map.percentiles {
            p.parse()?;
        }
        let body = self.body()?.1;
        self.sbs_for(&body)?;
        if self.gss.enabled && self.kinematics == KinematicsForm::Corrected {
            self.gss_for(&body)?;
        }
        self.optimize_bounds()?;
        let geom = self.sbs_base()?.geometry;
        self.bench.validate(&geom)?;
        Ok(())
    }

    fn explicit_body(&self) -> Result<Option<BodyModel>> {
        let b = &self.body;
        let fields = [
            b.arm_mass,
            b.upper_arm_length,
            b.upper_trunk_height,
            b.lower_trunk_height,
            b.half_chest_width,
            b.half_hip_width,
        ];
        let given = fields.iter().filter(|f| f.is_some()).count();
        let body = match given {
            0 => return Ok(None),
            6 => BodyModel::new(
                fields[0].unwrap(),
                fields[1].unwrap(),
                fields[2].unwrap(),
                fields[3].unwrap(),
                fields[4].unwrap(),
                fields[5].unwrap(),
            )?,
            _ => bail!("config: an explicit body needs all six dimensions"),
        };
        Ok(Some(match b.moment_arm {
            Some(l) => body.with_moment_arm(l)?,
            None => body,
        }))
    }

    fn body_percentile(&self) -> Result<Percentile> {
        match &self.body.percentile {
            Some(p) => p.parse(),
            None => Ok(Percentile::FirstFemale),
        }
    }

    fn with_moment_arm(&self, body: BodyModel) -> Result<BodyModel> {
        match self.body.moment_arm {
            Some(l) => Ok(body.with_moment_arm(l)?),
            None => Ok(body),
        }
    }

    /// The body for single-body commands, with its file-name label.
    pub fn body(&self) -> Result<(String, BodyModel)> {
        if let Some(p) = self.percentile_override {
            return Ok((p.label(), self.with_moment_arm(p.body()?)?));
        }
        if let Some(b) = self.explicit_body()? {
            return Ok(("custom".into(), b));
        }
        let p = self.body_percentile()?;
        Ok((p.label(), self.with_moment_arm(p.body()?)?))
    }

    /// Bodies mapped by `map` and `coverage`.
    pub fn map_bodies(&self) -> Result<Vec<(String, BodyModel)>> {
        if self.percentile_override.is_some() || self.explicit_body()?.is_some() {
            return Ok(vec![self.body()?]);
        }
        self.map
            .percentiles
            .iter()
            .map(|p| {
                let p = p.parse()?;
                Ok((p.label(), self.with_moment_arm(p.body()?)?))
            })
            .collect()
    }

    /// Full α × β grid of the configured range of motion, every cell
    /// admitted; the supports decide what they can reach.
    pub fn domain(&self) -> Result<RomDomain> {
        Ok(RomDomain::from_predicate(
            self.rom.shoulder_abduction,
            self.rom.torso_lateral_bend,
            self.domain.resolution,
            |_| true,
        )?)
    }

    /// Support as configured, `Δs` left at the configured value or 0.
    pub fn sbs_base(&self) -> Result<Sbs> {
        let s = &self.sbs;
        let spring = match s.b0 {
            Some(b0) => SpringParams::with_pretension(s.k, s.l0, s.f0, b0)?,
            None => SpringParams::zero_free_length(s.k, s.l0, s.f0)?,
        };
        let sbs = Sbs {
            geometry: MechanismGeometry {
                a: s.a,
                delta_s: s.delta_s.unwrap_or(0.0),
                arm_segment_length: s.arm_segment_length,
                joint_range: s.joint_range,
                sagittal_design_torque: s.sagittal_design_torque,
            },
            spring,
            mode: s.mode,
        };
        sbs.validate()?;
        Ok(sbs)
    }

    /// Support for `body`: the configured `Δs`, or the balancing one.
    pub fn sbs_for(&self, body: &BodyModel) -> Result<Sbs> {
        let base = self.sbs_base()?;
        match self.sbs.delta_s {
            Some(_) => Ok(base),
            None => Ok(base.balanced_for(body)?),
        }
    }

    pub fn gss_design(&self) -> GssDesign {
        let g = &self.gss;
        GssDesign {
            anchor_offset: g.anchor_offset,
            attach_fraction: g.attach_fraction,
            gas_stiffness: g.gas_stiffness,
            nominal_length: g.nominal_length,
            stroke: g.stroke,
            reference_pose: g.reference_pose,
        }
    }

    pub fn gss_for(&self, body: &BodyModel) -> Result<GasSpringParams> {
        Ok(self.gss_design().params_for(body, self.kinematics)?)
    }

    /// Free parameters with their bounds.
    pub fn optimize_bounds(&self) -> Result<Vec<(Parameter, Interval)>> {
        if self.optimize.free.is_empty() {
            bail!("config: optimize.free is empty");
        }
        self.optimize
            .free
            .iter()
            .map(|p| {
                let [lo, hi] = self
                    .optimize
                    .bounds
                    .get(p)
                    .ok_or_else(|| anyhow!("config: optimize.bounds has no entry for {}", p.name()))?;
                Ok((*p, Interval::new(*lo, *hi)?))
            })
            .collect()
    }

    pub fn method(&self) -> MethodConfig {
        let o = &self.optimize;
        let d = MethodConfig::default();
        MethodConfig {
            grid_points: o.grid_points,
            refine_starts: o.refine_starts,
            max_evaluations: o.max_evaluations,
            seed: o.seed,
            jitter: o.jitter.unwrap_or(d.jitter),
            ..d
        }
    }
}
