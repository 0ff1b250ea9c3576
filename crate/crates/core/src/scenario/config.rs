//! Scenario configuration: a TOML document whose keys may be written either
//! as tables or as dotted keys (`run.t_end = 1.0`). Unknown keys are errors.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::Physics;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::invariants::{IntegralKind, Monomial, PhiSpec, Subbox, GV_FLOOR};
use crate::thermo::EosParams;

use super::recipes;

/// A value given once for all axes or per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAxis<T> {
    Uniform(T),
    Axes([T; 3]),
}

impl<T: Copy> PerAxis<T> {
    pub fn expand(&self) -> [T; 3] {
        match *self {
            PerAxis::Uniform(v) => [v; 3],
            PerAxis::Axes(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub n: PerAxis<usize>,
    pub length: PerAxis<f64>,
    pub dealias: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: PerAxis::Uniform(32),
            length: PerAxis::Uniform(2.0 * PI),
            dealias: 2.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EosConfig {
    pub gamma: f64,
    pub rho0: f64,
    pub p0: f64,
    pub cv: f64,
    #[serde(rename = "S0")]
    pub s0: f64,
    pub mu0: f64,
}

impl Default for EosConfig {
    fn default() -> Self {
        let e = EosParams::default();
        Self {
            gamma: e.gamma,
            rho0: e.rho0,
            p0: e.p0,
            cv: e.cv,
            s0: e.s0,
            mu0: 1.0,
        }
    }
}

impl EosConfig {
    pub fn physics(&self) -> Physics {
        Physics {
            eos: EosParams {
                gamma: self.gamma,
                rho0: self.rho0,
                p0: self.p0,
                cv: self.cv,
                s0: self.s0,
            },
            mu0: self.mu0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitConfig {
    pub name: String,
    pub params: BTreeMap<String, f64>,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            name: "static_gas".into(),
            params: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarShape {
    Zero,
    Constant,
    Sin,
    Cos,
    /// Only for `phi0`: chosen so that the initial velocity is divergence-free.
    Solenoidal,
}

/// `amp · shape(k·x + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalarRecipe {
    pub shape: ScalarShape,
    pub amp: f64,
    pub k: [f64; 3],
    pub phase: f64,
}

impl Default for ScalarRecipe {
    fn default() -> Self {
        Self {
            shape: ScalarShape::Zero,
            amp: 1.0,
            k: [1.0, 0.0, 0.0],
            phase: 0.0,
        }
    }
}

impl ScalarRecipe {
    pub fn new(shape: ScalarShape, amp: f64, k: [f64; 3]) -> Self {
        Self {
            shape,
            amp,
            k,
            phase: 0.0,
        }
    }

    pub fn sample(&self, g: &Grid) -> Vec<f64> {
        let (a, k, ph) = (self.amp, self.k, self.phase);
        let arg = move |x: f64, y: f64, z: f64| k[0] * x + k[1] * y + k[2] * z + ph;
        match self.shape {
            ScalarShape::Zero | ScalarShape::Solenoidal => vec![0.0; g.len()],
            ScalarShape::Constant => vec![a; g.len()],
            ScalarShape::Sin => g.sample(|x, y, z| a * arg(x, y, z).sin()),
            ScalarShape::Cos => g.sample(|x, y, z| a * arg(x, y, z).cos()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorShape {
    Zero,
    Uniform,
    /// `amp·(A sin z + C cos y, B sin x + A cos z, C sin y + B cos x)`.
    Abc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VectorRecipe {
    pub shape: VectorShape,
    pub amp: f64,
    pub abc: [f64; 3],
    pub value: [f64; 3],
}

impl Default for VectorRecipe {
    fn default() -> Self {
        Self {
            shape: VectorShape::Zero,
            amp: 1.0,
            abc: [1.0; 3],
            value: [0.0; 3],
        }
    }
}

impl VectorRecipe {
    pub fn sample(&self, g: &Grid) -> [Vec<f64>; 3] {
        match self.shape {
            VectorShape::Zero => [vec![0.0; g.len()], vec![0.0; g.len()], vec![0.0; g.len()]],
            VectorShape::Uniform => self.value.map(|v| vec![self.amp * v; g.len()]),
            VectorShape::Abc => recipes::abc_field(g, self.abc.map(|c| c * self.amp)),
        }
    }
}

/// Initial Clebsch data; absent entries take the recipe's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClebschInit {
    pub phi0: Option<ScalarRecipe>,
    pub r0: Option<ScalarRecipe>,
    pub lambda0: Option<ScalarRecipe>,
    pub mu0_field: Option<ScalarRecipe>,
    #[serde(rename = "Gamma0")]
    pub gamma0: Option<VectorRecipe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub t_end: f64,
    /// CFL number (default 0.25 when `dt` is not given).
    pub cfl: Option<f64>,
    /// Fixed step; excludes `cfl`.
    pub dt: Option<f64>,
    /// Use the CFL step of the initial state for the whole run.
    pub freeze_dt: bool,
    /// Steps between observations.
    pub observer_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            cfl: None,
            dt: None,
            freeze_dt: false,
            observer_every: 5,
        }
    }
}

impl RunConfig {
    pub const DEFAULT_CFL: f64 = 0.25;

    pub fn cfl(&self) -> f64 {
        self.cfl.unwrap_or(Self::DEFAULT_CFL)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParticleConfig {
    pub count: usize,
    pub seed: u64,
    pub diagnostics: Vec<String>,
}

impl Default for ParticleConfig {
    fn default() -> Self {
        Self {
            count: 0,
            seed: 1,
            diagnostics: vec!["S".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedIntegral {
    pub name: String,
    pub kind: IntegralKind,
    pub terms: Vec<Monomial>,
}

impl NamedIntegral {
    pub fn spec(&self) -> PhiSpec {
        PhiSpec {
            kind: self.kind,
            terms: self.terms.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsConfig {
    pub gv_floor: f64,
    /// Region for the topological charges; omitted means no charge columns.
    pub charge_region: Option<Subbox>,
    pub integrals: Vec<NamedIntegral>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            gv_floor: GV_FLOOR,
            charge_region: None,
            integrals: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub dump_fields: bool,
    /// Observations between field dumps.
    pub dump_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            dump_fields: false,
            dump_every: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub grid: GridConfig,
    pub eos: EosConfig,
    pub init: InitConfig,
    pub clebsch_init: ClebschInit,
    pub run: RunConfig,
    pub particles: ParticleConfig,
    pub diagnostics: DiagnosticsConfig,
    pub output: OutputConfig,
}

/// Particle diagnostics that can be sampled along tracers.
pub const PARTICLE_DIAGNOSTICS: [&str; 7] = [
    "S",
    "ertel",
    "ertel_mhd",
    "hollmann",
    "hollmann_mhd",
    "magnetic_scalar",
    "cauchy_b",
];

impl ScenarioConfig {
    /// Parse and validate TOML text.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut unknown = Vec::new();
        let mut track = |path: serde_ignored::Path<'_>| unknown.push(path.to_string().replace(".?", ""));
        let ignoring = serde_ignored::Deserializer::new(de, &mut track);
        let cfg: Self = serde_path_to_error::deserialize(ignoring).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("at `{path}`: {}", e.into_inner()))
        })?;
        if let Some(key) = unknown.first() {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.eos.physics().validate()?;
        recipes::check_params(&self.init.name, &self.init.params)?;
        if let Some(r) = [&self.clebsch_init.r0, &self.clebsch_init.lambda0, &self.clebsch_init.mu0_field]
            .into_iter()
            .flatten()
            .find(|r| r.shape == ScalarShape::Solenoidal)
        {
            return Err(Error::Config(format!(
                "shape `solenoidal` is only available for phi0 (got {r:?})"
            )));
        }
        let run = &self.run;
        if !(run.t_end >= 0.0 && run.t_end.is_finite()) {
            return Err(Error::Config(format!("run.t_end must be non-negative, got {}", run.t_end)));
        }
        match (run.cfl, run.dt) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("run.cfl and run.dt are mutually exclusive".into()))
            }
            (_, Some(dt)) if !(dt > 0.0 && dt.is_finite()) => {
                return Err(Error::Config(format!("run.dt must be positive, got {dt}")))
            }
            (Some(c), _) if !(c > 0.0 && c < 1.0) => {
                return Err(Error::Config(format!("run.cfl must lie in (0, 1), got {c}")))
            }
            _ => {}
        }
        if run.observer_every == 0 {
            return Err(Error::Config("run.observer_every must be at least 1".into()));
        }
        for d in &self.particles.diagnostics {
            if !PARTICLE_DIAGNOSTICS.contains(&d.as_str()) {
                return Err(Error::Config(format!(
                    "unknown particle diagnostic `{d}`; available: {}",
                    PARTICLE_DIAGNOSTICS.join(", ")
                )));
            }
        }
        if !(self.diagnostics.gv_floor > 0.0) {
            return Err(Error::Config("diagnostics.gv_floor must be positive".into()));
        }
        for i in &self.diagnostics.integrals {
            i.spec().validate()?;
        }
        if self.output.dump_every == 0 {
            return Err(Error::Config("output.dump_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n.expand(), self.grid.length.expand(), self.grid.dealias)
            .map_err(|e| Error::Config(format!("grid: {e}")))
    }

    pub fn physics(&self) -> Physics {
        self.eos.physics()
    }
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ScenarioConfig::from_toml(&text)
}
