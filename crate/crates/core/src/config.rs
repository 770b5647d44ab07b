//! TOML experiment configuration.
//!
//! ```toml
//! pipeline = "spectrum"          # simulate | spectrum | resolvent | decay-fit
//! seed = 0
//!
//! [domain]
//! kind = "interval"              # or kind = "square", side = 1.0
//! length = 3.141592653589793
//!
//! [grid]
//! n = 200
//!
//! [coefficients]
//! a = 1.0
//! model = "kelvin_voigt"         # viscous | viscous_single
//! damping = { value = 1.0 }      # region defaults to the whole domain
//! coupling = { value = 1.0, region = { kind = "interval", lo = 0.5, hi = 2.0 } }
//! # or: preset = { name = "H4", eps = [0.2, 0.4, 0.6, 0.8], b0 = 1.0, c0 = 1.0 }
//!
//! [spectrum]
//! modes = 120
//! k_min = 20
//! tail_from = 100
//! ```
//!
//! See the README for every section and key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::DecayModel;
use crate::error::{Error, Result};
use crate::geometry::{build_grid, indicator_field, preset_config, CoefficientField, Domain, FieldRole, Grid, Preset, RegionSpec};
use crate::operators::{assemble_generator, assemble_viscous_generator, DiscreteGenerator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Simulate,
    Spectrum,
    Resolvent,
    DecayFit,
}

impl Pipeline {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pipeline::Simulate => "simulate",
            Pipeline::Spectrum => "spectrum",
            Pipeline::Resolvent => "resolvent",
            Pipeline::DecayFit => "decay-fit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Pipeline,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    pub coefficients: CoefficientConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolvent: Option<ResolventParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_fit: Option<DecayFitParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Interior nodes per axis.
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    KelvinVoigt,
    Viscous,
    ViscousSingle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default = "whole_domain")]
    pub region: RegionSpec,
    pub value: f64,
}

fn whole_domain() -> RegionSpec {
    RegionSpec::All
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default)]
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<FieldSpec>,
}

impl CoefficientConfig {
    /// `(b, c)` when both fields are constant over the whole domain.
    pub fn constant_values(&self) -> Option<(f64, f64)> {
        if self.preset.is_some() {
            return None;
        }
        let value = |f: &Option<FieldSpec>| match f {
            None => Some(0.0),
            Some(FieldSpec { region: RegionSpec::All, value }) => Some(*value),
            Some(_) => None,
        };
        Some((value(&self.damping)?, value(&self.coupling)?))
    }

    pub fn fields(&self, grid: &Grid) -> Result<(CoefficientField, CoefficientField)> {
        if let Some(p) = &self.preset {
            return preset_config(grid, p).map_err(|e| scoped("coefficients.preset", e));
        }
        let field = |f: &Option<FieldSpec>, role, name: &str| -> Result<CoefficientField> {
            match f {
                None => Ok(CoefficientField::constant(grid, 0.0)),
                Some(spec) => indicator_field(grid, &spec.region, spec.value, role).map_err(|e| scoped(name, e)),
            }
        };
        Ok((
            field(&self.damping, FieldRole::Damping, "coefficients.damping")?,
            field(&self.coupling, FieldRole::Coupling, "coefficients.coupling")?,
        ))
    }

    pub fn generator(&self, grid: &Grid) -> Result<DiscreteGenerator> {
        let (b, c) = self.fields(grid)?;
        let gen = match self.model {
            ModelKind::KelvinVoigt => assemble_generator(grid, self.a, &b, &c),
            ModelKind::Viscous => assemble_viscous_generator(grid, self.a, &b, &c, false),
            ModelKind::ViscousSingle => assemble_viscous_generator(grid, self.a, &b, &c, true),
        };
        gen.map_err(|e| scoped("coefficients", e))
    }

    /// `β` of the strip presets.
    pub fn beta(&self) -> Option<f64> {
        self.preset.as_ref().and_then(Preset::beta)
    }

    fn validate(&self, domain: &Domain) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::config("coefficients.a", format!("must be positive, got {}", self.a)));
        }
        match (&self.preset, &self.damping, &self.coupling) {
            (Some(p), None, None) => {
                p.validate(domain.length()).map_err(|e| scoped("coefficients.preset", e))?;
                let square = !matches!(p, Preset::OneDBc { .. });
                if square != (domain.dim() == 2) {
                    return Err(Error::config("coefficients.preset", format!("{} does not apply to {domain:?}", p.name())));
                }
            }
            (Some(_), _, _) => {
                return Err(Error::config("coefficients", "give either a preset or damping/coupling fields, not both"));
            }
            (None, d, c) => {
                for (name, f) in [("coefficients.damping", d), ("coefficients.coupling", c)] {
                    if let Some(spec) = f {
                        if !spec.value.is_finite() {
                            return Err(Error::config(name, "value must be finite"));
                        }
                        spec.region.validate(domain).map_err(|e| scoped(name, e))?;
                    }
                }
                if d.as_ref().is_some_and(|s| s.value < 0.0) {
                    return Err(Error::config("coefficients.damping", "value must be nonnegative"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    /// `u = Π sin(π x_i / L)`, other blocks zero.
    #[default]
    Bump,
    Zero,
    /// Uniform on `[-1, 1)` in every block, from the config seed.
    Random,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "one_usize")]
    pub sample_every: usize,
    #[serde(default)]
    pub initial: InitialData,
    /// Also write stiffness, damping and generator in coordinate format.
    #[serde(default)]
    pub export_matrices: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frequencies {
    /// `kπ/L` and sums of squares thereof.
    #[default]
    Continuum,
    /// Eigenvalues of the assembled Laplacian.
    Discrete,
}

fn default_gap_threshold() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    pub modes: usize,
    #[serde(default = "one_usize")]
    pub k_min: usize,
    /// First mode of the window over which the tail gap is reported; defaults to `k_min`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_from: Option<usize>,
    #[serde(default)]
    pub frequencies: Frequencies,
    /// Also compute the full spectrum of the assembled generator (needs `[grid]`).
    #[serde(default)]
    pub generator: bool,
    #[serde(default = "default_gap_threshold")]
    pub gap_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// `λ = μ_k` for `from <= k <= to`.
    AtModes {
        from: usize,
        to: usize,
        #[serde(default = "discrete")]
        frequencies: Frequencies,
    },
    LogUniform { lo: f64, hi: f64, count: usize },
}

fn discrete() -> Frequencies {
    Frequencies::Discrete
}

fn default_norm_tol() -> f64 {
    crate::resolvent::DEFAULT_NORM_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventParams {
    pub schedule: ScheduleConfig,
    #[serde(default = "default_norm_tol")]
    pub tol: f64,
    /// Growth-fit window in `λ`; defaults to the unflagged range of the sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
}

fn polynomial() -> DecayModel {
    DecayModel::Polynomial
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayFitParams {
    pub dt: f64,
    /// Defaults to the end of the fit window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default = "one_usize")]
    pub sample_every: usize,
    #[serde(default = "polynomial")]
    pub model: DecayModel,
    /// Defaults to `[0.1 t*, 0.8 t*]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
    #[serde(default)]
    pub initial: InitialData,
}

/// Re-labels a module error with the config path it came from.
fn scoped(prefix: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::config(format!("{prefix}.{name}"), reason),
        other => other,
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

fn window_ok(field: &str, w: Option<(f64, f64)>) -> Result<()> {
    match w {
        Some((lo, hi)) if !(lo.is_finite() && hi.is_finite() && lo < hi) => Err(Error::config(field, format!("need lo < hi, got [{lo}, {hi}]"))),
        _ => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let field = e.span().map(|s| format!("byte {}..{}", s.start, s.end)).unwrap_or_else(|| "<document>".into());
            Error::config(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = self.grid.ok_or_else(|| Error::config("grid", format!("the {} pipeline needs a [grid] section", self.pipeline.as_str())))?;
        build_grid(self.domain, g.n).map_err(|e| scoped("grid", e))
    }

    pub fn generator(&self) -> Result<DiscreteGenerator> {
        self.coefficients.generator(&self.grid()?)
    }

    fn section<'a, T>(&self, s: &'a Option<T>, name: &str) -> Result<&'a T> {
        s.as_ref().ok_or_else(|| Error::config(name, format!("the {} pipeline needs a [{name}] section", self.pipeline.as_str())))
    }

    pub fn simulate_params(&self) -> Result<&SimulateParams> {
        self.section(&self.simulate, "simulate")
    }

    pub fn spectrum_params(&self) -> Result<&SpectrumParams> {
        self.section(&self.spectrum, "spectrum")
    }

    pub fn resolvent_params(&self) -> Result<&ResolventParams> {
        self.section(&self.resolvent, "resolvent")
    }

    pub fn decay_fit_params(&self) -> Result<&DecayFitParams> {
        self.section(&self.decay_fit, "decay_fit")
    }

    /// Checks every field against the preconditions of the module consuming it.
    pub fn validate(&self) -> Result<()> {
        self.domain.validate().map_err(|e| scoped("domain", e))?;
        if let Some(g) = self.grid {
            if g.n == 0 {
                return Err(Error::config("grid.n", "need at least one interior node"));
            }
        }
        self.coefficients.validate(&self.domain)?;
        let needs_grid = match self.pipeline {
            Pipeline::Simulate => {
                let p = self.simulate_params()?;
                positive("simulate.dt", p.dt)?;
                positive("simulate.t_final", p.t_final)?;
                if p.sample_every == 0 {
                    return Err(Error::config("simulate.sample_every", "must be at least 1"));
                }
                true
            }
            Pipeline::Spectrum => {
                let p = self.spectrum_params()?;
                if p.modes == 0 {
                    return Err(Error::config("spectrum.modes", "must be at least 1"));
                }
                if p.k_min == 0 || p.k_min > p.modes {
                    return Err(Error::config("spectrum.k_min", format!("must lie in [1, {}]", p.modes)));
                }
                if p.tail_from.is_some_and(|t| t < p.k_min || t > p.modes) {
                    return Err(Error::config("spectrum.tail_from", format!("must lie in [{}, {}]", p.k_min, p.modes)));
                }
                positive("spectrum.gap_threshold", p.gap_threshold)?;
                if self.coefficients.constant_values().is_none() && !p.generator {
                    return Err(Error::config(
                        "spectrum.generator",
                        "the quartic analysis needs constant damping and coupling; enable the generator spectrum for other coefficients",
                    ));
                }
                if let Some((b, _)) = self.coefficients.constant_values() {
                    if !p.generator && !(b > 0.0) {
                        return Err(Error::config("coefficients.damping", "the quartic analysis needs positive damping"));
                    }
                }
                p.generator || p.frequencies == Frequencies::Discrete
            }
            Pipeline::Resolvent => {
                let p = self.resolvent_params()?;
                positive("resolvent.tol", p.tol)?;
                match p.schedule {
                    ScheduleConfig::AtModes { from, to, .. } => {
                        if from == 0 || to < from {
                            return Err(Error::config("resolvent.schedule", format!("need 1 <= from <= to, got {from}..{to}")));
                        }
                    }
                    ScheduleConfig::LogUniform { lo, hi, count } => {
                        positive("resolvent.schedule.lo", lo)?;
                        positive("resolvent.schedule.hi", hi)?;
                        if hi < lo || count == 0 {
                            return Err(Error::config("resolvent.schedule", "need lo <= hi and count >= 1"));
                        }
                    }
                }
                window_ok("resolvent.window", p.window)?;
                if p.window.is_some_and(|(lo, _)| lo <= 0.0) {
                    return Err(Error::config("resolvent.window", "growth fits need lo > 0"));
                }
                true
            }
            Pipeline::DecayFit => {
                let p = self.decay_fit_params()?;
                positive("decay_fit.dt", p.dt)?;
                if let Some(t) = p.t_final {
                    positive("decay_fit.t_final", t)?;
                }
                if p.sample_every == 0 {
                    return Err(Error::config("decay_fit.sample_every", "must be at least 1"));
                }
                window_ok("decay_fit.window", p.window)?;
                if p.model == DecayModel::Polynomial && p.window.is_some_and(|(lo, _)| lo <= 0.0) {
                    return Err(Error::config("decay_fit.window", "polynomial fits need lo > 0"));
                }
                if let (Some(t), Some((_, hi))) = (p.t_final, p.window) {
                    if t < hi {
                        return Err(Error::config("decay_fit.t_final", "must reach the end of the fit window"));
                    }
                }
                true
            }
        };
        if needs_grid {
            self.grid()?;
        }
        Ok(())
    }
}
