//! Run configuration: TOML with `[section]` headers and `key = value` lines.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vpflow::constitutive::{ExponentField, FluxLaw, StressLaw};
use vpflow::fespace::ElementKind;
use vpflow::solver::SolverConfig;
use vpflow::verify::{InfSupMode, MmsCase};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Mms,
    SweepK,
    CertifyLaws,
    Infsup,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Mms => "mms",
            Command::SweepK => "sweep-k",
            Command::CertifyLaws => "certify-laws",
            Command::Infsup => "infsup",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    /// Seeds certification sampling and eigen start vectors.
    pub seed: u64,
    pub output: PathBuf,
    pub domain: DomainConfig,
    pub mesh: MeshConfig,
    pub elements: ElementConfig,
    pub law: LawConfig,
    pub solver: SolverSection,
    pub data: DataConfig,
    pub mms: MmsSection,
    pub sweep: SweepSection,
    pub certify: CertifySection,
    pub infsup: InfSupSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            seed: 0,
            output: PathBuf::from("vpflow-out"),
            domain: DomainConfig::default(),
            mesh: MeshConfig::default(),
            elements: ElementConfig::default(),
            law: LawConfig::default(),
            solver: SolverSection::default(),
            data: DataConfig::default(),
            mms: MmsSection::default(),
            sweep: SweepSection::default(),
            certify: CertifySection::default(),
            infsup: InfSupSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub dim: usize,
    pub divisions: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            dim: 2,
            divisions: vec![2, 2],
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub fluid_level: usize,
    pub conc_level: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            fluid_level: 2,
            conc_level: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityElement {
    P2,
    P2Bubble,
    /// Only for inf-sup diagnostics.
    P1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PressureElement {
    P0,
    P1Disc,
    /// Continuous P1; only for inf-sup diagnostics.
    P1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElementConfig {
    pub velocity: VelocityElement,
    pub pressure: PressureElement,
}

impl Default for ElementConfig {
    fn default() -> Self {
        ElementConfig {
            velocity: VelocityElement::P2,
            pressure: PressureElement::P0,
        }
    }
}

impl ElementConfig {
    pub fn kinds(&self) -> (ElementKind, ElementKind) {
        let v = match self.velocity {
            VelocityElement::P2 => ElementKind::VectorP2,
            VelocityElement::P2Bubble => ElementKind::VectorP2Bubble,
            VelocityElement::P1 => ElementKind::VectorP1,
        };
        let q = match self.pressure {
            PressureElement::P0 => ElementKind::P0,
            PressureElement::P1Disc => ElementKind::P1Discontinuous,
            PressureElement::P1 => ElementKind::ScalarP1,
        };
        (v, q)
    }

    /// Pairs the flow solver accepts; the others exist for `infsup` only.
    fn check_solvable(&self) -> Result<(), CliError> {
        if self.velocity == VelocityElement::P1 {
            return Err(CliError::config(
                "elements.velocity",
                "p1 is only available for infsup",
            ));
        }
        if self.pressure == PressureElement::P1 {
            return Err(CliError::config(
                "elements.pressure",
                "p1 is only available for infsup",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LawConfig {
    pub r_minus: f64,
    pub r_plus: f64,
    pub gamma: f64,
    pub c_mid: f64,
    pub nu0: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub k0: f64,
    pub k1: f64,
}

impl Default for LawConfig {
    fn default() -> Self {
        LawConfig {
            r_minus: 1.6,
            r_plus: 2.4,
            gamma: 4.0,
            c_mid: 0.5,
            nu0: 1.0,
            kappa1: 1.0,
            kappa2: 1.0,
            k0: 1.0,
            k1: 0.5,
        }
    }
}

impl LawConfig {
    pub fn from_laws(stress: &StressLaw, flux: &FluxLaw) -> Self {
        let r = &stress.exponent;
        LawConfig {
            r_minus: r.r_minus,
            r_plus: r.r_plus,
            gamma: r.gamma,
            c_mid: r.c_mid,
            nu0: stress.nu0,
            kappa1: stress.kappa1,
            kappa2: stress.kappa2,
            k0: flux.k0,
            k1: flux.k1,
        }
    }

    pub fn build(&self) -> Result<(StressLaw, FluxLaw), CliError> {
        let exponent = ExponentField::new(self.r_minus, self.r_plus, self.gamma, self.c_mid)
            .map_err(|e| CliError::config("law.r_minus/r_plus/gamma/c_mid", e))?;
        let stress = StressLaw::new(self.nu0, self.kappa1, self.kappa2, exponent)
            .map_err(|e| CliError::config("law.nu0/kappa1/kappa2", e))?;
        let flux = FluxLaw::new(self.k0, self.k1).map_err(|e| CliError::config("law.k0/k1", e))?;
        Ok((stress, flux))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub t: f64,
    /// `inf` switches the regularization off.
    pub k_reg: f64,
    pub outer_tol: f64,
    pub outer_maxit: usize,
    pub inner_tol: f64,
    pub inner_maxit: usize,
    pub damping: f64,
    pub convection: bool,
    pub quad_degree: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSection {
            t: d.t,
            k_reg: d.k_reg,
            outer_tol: d.outer_tol,
            outer_maxit: d.outer_maxit,
            inner_tol: d.inner_tol,
            inner_maxit: d.inner_maxit,
            damping: d.damping,
            convection: d.convection,
            quad_degree: d.quad_degree,
        }
    }
}

impl SolverSection {
    pub fn build(&self) -> Result<SolverConfig, CliError> {
        let cfg = SolverConfig {
            t: self.t,
            k_reg: self.k_reg,
            outer_tol: self.outer_tol,
            outer_maxit: self.outer_maxit,
            inner_tol: self.inner_tol,
            inner_maxit: self.inner_maxit,
            damping: self.damping,
            convection: self.convection,
            quad_degree: self.quad_degree,
        };
        cfg.validate().map_err(|e| CliError::config("solver", e))?;
        Ok(cfg)
    }
}

/// Boundary data for the concentration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundaryData {
    Constant {
        value: f64,
    },
    /// `c0 + gradient . x`
    Affine {
        c0: f64,
        gradient: Vec<f64>,
    },
    /// Boundary data of a shipped scenario.
    Preset {
        name: String,
    },
}

impl BoundaryData {
    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        match self {
            BoundaryData::Constant { value } => *value,
            BoundaryData::Affine { c0, gradient } => {
                c0 + gradient.iter().zip(x).map(|(g, x)| g * x).sum::<f64>()
            }
            BoundaryData::Preset { name } => {
                vpflow::verify::scenario(name).map_or(f64::NAN, |s| s.boundary_c(x))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Rotational body force `swirl ((1/2 - y), (x - 1/2), 0)`.
    pub swirl: f64,
    pub boundary_c: BoundaryData,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            swirl: 0.0,
            boundary_c: BoundaryData::Constant { value: 1.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MmsSection {
    pub preset: String,
    pub levels: Vec<usize>,
    pub base_divisions: usize,
    /// Concentration level minus fluid level.
    pub conc_offset: usize,
    pub interpolation_only: bool,
}

impl Default for MmsSection {
    fn default() -> Self {
        MmsSection {
            preset: "stokes2d".into(),
            levels: vec![1, 2, 3, 4],
            base_divisions: 2,
            conc_offset: 0,
            interpolation_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub k: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            k: vec![1e1, 1e2, 1e3, 1e4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifySection {
    pub samples: usize,
    pub c_min: f64,
    pub c_max: f64,
}

impl Default for CertifySection {
    fn default() -> Self {
        CertifySection {
            samples: 10_000,
            c_min: 0.0,
            c_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfSupModeName {
    Standard,
    Diagnostic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InfSupSection {
    pub levels: Vec<usize>,
    pub mode: InfSupModeName,
}

impl Default for InfSupSection {
    fn default() -> Self {
        InfSupSection {
            levels: vec![1, 2, 3],
            mode: InfSupModeName::Standard,
        }
    }
}

impl InfSupSection {
    pub fn mode(&self) -> InfSupMode {
        match self.mode {
            InfSupModeName::Standard => InfSupMode::Standard,
            InfSupModeName::Diagnostic => InfSupMode::Diagnostic,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    /// Checks shared by every command.
    pub fn validate_domain(&self) -> Result<(), CliError> {
        let d = &self.domain;
        if d.dim != 2 && d.dim != 3 {
            return Err(CliError::config(
                "domain.dim",
                format!("must be 2 or 3, got {}", d.dim),
            ));
        }
        for (key, len) in [
            ("divisions", d.divisions.len()),
            ("lo", d.lo.len()),
            ("hi", d.hi.len()),
        ] {
            if len != d.dim {
                return Err(CliError::config(
                    &format!("domain.{key}"),
                    format!("needs {} entries, got {len}", d.dim),
                ));
            }
        }
        if d.divisions.contains(&0) {
            return Err(CliError::config(
                "domain.divisions",
                "entries must be positive",
            ));
        }
        if d.lo.iter().zip(&d.hi).any(|(l, h)| !(l < h)) {
            return Err(CliError::config(
                "domain.hi",
                "each entry must exceed domain.lo",
            ));
        }
        if self.mesh.conc_level < self.mesh.fluid_level {
            return Err(CliError::config(
                "mesh.conc_level",
                "must be at least mesh.fluid_level",
            ));
        }
        Ok(())
    }

    pub fn validate_flow(&self) -> Result<(), CliError> {
        self.validate_domain()?;
        if !(self.law.r_minus > vpflow::solver::MIN_R_MINUS) {
            return Err(CliError::config(
                "law.r_minus",
                format!("must exceed 3/2, got {}", self.law.r_minus),
            ));
        }
        self.elements.check_solvable()?;
        match &self.data.boundary_c {
            BoundaryData::Affine { gradient, .. } if gradient.len() != self.domain.dim => {
                return Err(CliError::config(
                    "data.boundary_c.gradient",
                    format!("needs {} entries, got {}", self.domain.dim, gradient.len()),
                ));
            }
            BoundaryData::Preset { name } => {
                vpflow::verify::scenario(name)
                    .map_err(|e| CliError::config("data.boundary_c.name", e))?;
            }
            _ => {}
        }
        if !self.data.swirl.is_finite() {
            return Err(CliError::config("data.swirl", "must be finite"));
        }
        Ok(())
    }

    pub fn validate(&self, command: Command) -> Result<(), CliError> {
        match command {
            Command::Solve => {
                self.validate_flow()?;
                self.law.build()?;
                self.solver.build()?;
            }
            Command::SweepK => {
                self.validate_flow()?;
                self.law.build()?;
                self.solver.build()?;
                if self.sweep.k.is_empty() || self.sweep.k.iter().any(|k| !(*k > 0.0)) {
                    return Err(CliError::config(
                        "sweep.k",
                        "needs a nonempty list of positive values",
                    ));
                }
            }
            Command::Mms => {
                self.elements.check_solvable()?;
                self.solver.build()?;
                if self.mms.base_divisions == 0 {
                    return Err(CliError::config("mms.base_divisions", "must be positive"));
                }
                if self.mms.levels.len() < 3 || self.mms.levels.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(CliError::config(
                        "mms.levels",
                        "needs at least 3 increasing levels",
                    ));
                }
            }
            Command::CertifyLaws => {
                self.law.build()?;
                if self.certify.samples == 0 {
                    return Err(CliError::config("certify.samples", "must be positive"));
                }
                if !(self.certify.c_min <= self.certify.c_max) {
                    return Err(CliError::config(
                        "certify.c_max",
                        "must be at least certify.c_min",
                    ));
                }
            }
            Command::Infsup => {
                self.validate_domain()?;
                if self.infsup.levels.is_empty() {
                    return Err(CliError::config(
                        "infsup.levels",
                        "needs at least one level",
                    ));
                }
            }
        }
        Ok(())
    }

    /// The preset with the `[solver]` section's tolerances (the preset
    /// fixes `t`, `k_reg` and convection).
    pub fn mms_case(&self) -> Result<MmsCase, CliError> {
        let dim = if self.mms.preset.ends_with("3d") {
            3
        } else {
            2
        };
        vpflow::verify::make_mms_case(&self.mms.preset, dim)
            .map_err(|e| CliError::config("mms.preset", e))
    }
}
