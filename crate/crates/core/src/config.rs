//! Run configuration: one JSON file per run, validated before any compute.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conformal::{ClassifyParams, EquivalenceOptions};
use crate::error::{Error, Result};
use crate::evolve::{SimConfig, Stepper};
use crate::grid::{Backend, ComplexField, Grid};
use crate::nonlinearity::{Condition, SeriesNonlinearity, Term};
use crate::petviashvili::{solve_ground_state, Gamma, GroundStateResult, PetviashviliOptions};
use crate::profiles;

/// Pipeline a config runs when no subcommand overrides it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    #[default]
    Evolve,
    Groundstate,
    Sweep,
    ConformalCheck,
    CheckConditions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Half width `L` of the periodic domain `[-L, L)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    /// `L / pi`; give this or `half_width`, not both.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width_pi: Option<f64>,
    pub n: usize,
}

impl GridSpec {
    pub fn pi(multiple: f64, n: usize) -> Self {
        Self {
            half_width: None,
            half_width_pi: Some(multiple),
            n,
        }
    }

    pub fn half_width(&self) -> Result<f64> {
        match (self.half_width, self.half_width_pi) {
            (Some(l), None) => Ok(l),
            (None, Some(m)) => Ok(m * PI),
            (Some(_), Some(_)) => Err(Error::config("grid", "give half_width or half_width_pi, not both")),
            (None, None) => Err(Error::config("grid", "missing half_width or half_width_pi")),
        }
    }

    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.half_width()?, self.n).map_err(|e| Error::config("grid", e.to_string()))
    }
}

fn default_stride() -> usize {
    10
}
fn default_blowup_factor() -> f64 {
    50.0
}
fn default_halvings() -> u32 {
    6
}
fn default_resolution_tol() -> Option<f64> {
    Some(1e-8)
}
fn default_true() -> bool {
    true
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSpec {
    pub method: Stepper,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub diagnostics_stride: usize,
    /// Steps between field snapshots; none when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<usize>,
    #[serde(default = "default_blowup_factor")]
    pub blowup_factor: f64,
    #[serde(default = "default_halvings")]
    pub max_halvings: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_n: Option<f64>,
    #[serde(default)]
    pub backend: Backend,
    /// `null` switches the under-resolution check off.
    #[serde(default = "default_resolution_tol")]
    pub resolution_tol: Option<f64>,
    #[serde(default = "default_true")]
    pub track_energy: bool,
}

impl StepperSpec {
    pub fn new(method: Stepper, dt: f64, t_end: f64) -> Self {
        Self {
            method,
            dt,
            t_end,
            diagnostics_stride: default_stride(),
            snapshot_stride: None,
            blowup_factor: default_blowup_factor(),
            max_halvings: default_halvings(),
            weight_n: None,
            backend: Backend::Spectral,
            resolution_tol: default_resolution_tol(),
            track_energy: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coeff: f64,
    pub alpha: f64,
}

/// `N(s)` by family. For the closed-form families `first = 0` keeps the
/// `k = 0` term, which is a constant `eps` (phase rotation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    FiniteSum {
        terms: Vec<TermSpec>,
    },
    /// `eps * sum_{k >= first} (c s^r)^k / k!`.
    Exp {
        eps: f64,
        r: f64,
        #[serde(default = "one")]
        c: f64,
        #[serde(default)]
        first: u32,
    },
    /// `eps * sum_{k >= first} (-1)^k s^{r(2k+1)} / (2k+1)!`.
    Sin {
        #[serde(default = "one")]
        eps: f64,
        r: f64,
        #[serde(default)]
        first: u32,
    },
    /// `eps * sum_{k >= first} (-1)^k s^{2rk} / (2k)!`.
    Cos {
        #[serde(default = "one")]
        eps: f64,
        r: f64,
        #[serde(default)]
        first: u32,
    },
}

impl NonlinearitySpec {
    pub fn power(coeff: f64, alpha: f64) -> Self {
        Self::FiniteSum {
            terms: vec![TermSpec { coeff, alpha }],
        }
    }

    pub fn double(eps1: f64, alpha1: f64, eps2: f64, alpha2: f64) -> Self {
        Self::FiniteSum {
            terms: vec![
                TermSpec { coeff: eps1, alpha: alpha1 },
                TermSpec { coeff: eps2, alpha: alpha2 },
            ],
        }
    }

    /// Same family with its leading strength replaced: the first listed
    /// coefficient of a finite sum, `eps` otherwise.
    pub fn with_eps(&self, value: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::FiniteSum { terms } => {
                if let Some(t) = terms.first_mut() {
                    t.coeff = value;
                }
            }
            Self::Exp { eps, .. } | Self::Sin { eps, .. } | Self::Cos { eps, .. } => *eps = value,
        }
        out
    }

    pub fn build(&self) -> Result<SeriesNonlinearity> {
        let wrap = |e: Error| Error::config("nonlinearity", e.to_string());
        match *self {
            Self::FiniteSum { ref terms } => {
                SeriesNonlinearity::finite_sum(terms.iter().map(|t| Term::new(t.coeff, t.alpha)).collect())
                    .map_err(wrap)
            }
            Self::Exp { eps, r, c, first } => {
                let s = SeriesNonlinearity::exp_from(c, r, first.max(1)).map_err(wrap)?;
                Ok(closed_form(s, eps, first))
            }
            Self::Sin { eps, r, first } => Ok(SeriesNonlinearity::sin_from(r, first).map_err(wrap)?.with_scale(eps)),
            Self::Cos { eps, r, first } => {
                let s = SeriesNonlinearity::cos_from(r, first.max(1)).map_err(wrap)?;
                Ok(closed_form(s, eps, first))
            }
        }
    }
}

fn closed_form(s: SeriesNonlinearity, eps: f64, first: u32) -> SeriesNonlinearity {
    let s = s.with_scale(eps);
    if first == 0 {
        s.with_constant(eps)
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// `amplitude / (1 + x^2)^{n/2}`.
    Polynomial { amplitude: f64, n: f64 },
    /// Explicit single-power ground state at `omega = 1`.
    SechGs { alpha: f64, eps: f64 },
    /// Explicit ground state for powers `alpha1`, `2 alpha1`.
    DoubleGs { alpha1: f64, eps1: f64, eps2: f64, omega: f64 },
    /// Ground state of the run's own nonlinearity, solved numerically.
    NumericGs { omega: f64 },
    Gaussian { height: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub profile: ProfileSpec,
    /// Amplitude factor `A` in `u_0 = A P`.
    #[serde(default = "one")]
    pub scale: f64,
    /// `b` in the quadratic phase `e^{i b x^2 / 4}`.
    #[serde(default)]
    pub phase_b: f64,
}

impl InitialSpec {
    pub fn new(profile: ProfileSpec) -> Self {
        Self {
            profile,
            scale: 1.0,
            phase_b: 0.0,
        }
    }
}

fn default_gs_tol() -> f64 {
    1e-11
}
fn default_gs_iter() -> usize {
    20_000
}
fn default_gamma() -> Gamma {
    Gamma::Auto
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStateSpec {
    pub omega: f64,
    #[serde(default = "default_gamma")]
    pub gamma: Gamma,
    #[serde(default = "default_gs_tol")]
    pub tol: f64,
    #[serde(default = "default_gs_iter")]
    pub max_iter: usize,
}

impl GroundStateSpec {
    pub fn new(omega: f64) -> Self {
        Self {
            omega,
            gamma: Gamma::Auto,
            tol: default_gs_tol(),
            max_iter: default_gs_iter(),
        }
    }

    pub fn options(&self) -> PetviashviliOptions {
        PetviashviliOptions {
            seed: None,
            gamma: self.gamma,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

/// Lists swept as a Cartesian product; an empty list keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub amplitudes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps: Vec<f64>,
}

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Case {
    pub amplitude: f64,
    pub b: f64,
    /// `None` keeps the configured nonlinearity.
    pub eps: Option<f64>,
}

fn default_conformal_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConformalSpec {
    pub b: f64,
    pub times: Vec<f64>,
    #[serde(default = "default_conformal_dt")]
    pub dt: f64,
    #[serde(default)]
    pub method: Option<Stepper>,
}

fn default_r0() -> f64 {
    1.0
}
fn default_m() -> u32 {
    1
}
fn default_cond_tol() -> f64 {
    1e-12
}
fn all_conditions() -> Vec<Condition> {
    Condition::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionsSpec {
    #[serde(default = "default_r0")]
    pub r0: f64,
    #[serde(default = "default_m")]
    pub m: u32,
    #[serde(default = "default_cond_tol")]
    pub tol: f64,
    #[serde(default = "all_conditions")]
    pub conditions: Vec<Condition>,
}

impl Default for ConditionsSpec {
    fn default() -> Self {
        Self {
            r0: default_r0(),
            m: default_m(),
            tol: default_cond_tol(),
            conditions: all_conditions(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub action: Action,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stepper: Option<StepperSpec>,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groundstate: Option<GroundStateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub classify: ClassifyParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conformal: Option<ConformalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionsSpec>,
    /// `Some(false)` turns a detected blow-up into a failing exit status.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_blowup: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Parameters chosen where the source of a preset is silent.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn new(experiment: impl Into<String>, grid: GridSpec, nonlinearity: NonlinearitySpec) -> Self {
        Self {
            experiment: experiment.into(),
            preset: None,
            action: Action::Evolve,
            grid,
            stepper: None,
            nonlinearity,
            initial: None,
            groundstate: None,
            sweep: None,
            classify: ClassifyParams::default(),
            conformal: None,
            conditions: None,
            expect_blowup: None,
            output: None,
            notes: Vec::new(),
        }
    }

    /// Parses without validating, for callers that adjust the config
    /// (the action, say) before checking it; `origin` labels errors.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Parses and validates.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let cfg = Self::parse(text, origin)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file without validating it.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg = Self::read(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Output directory: the configured one, else `runs/<experiment>`.
    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(&self.experiment))
    }

    /// Checks everything the configured action needs.
    pub fn validate(&self) -> Result<()> {
        if self.experiment.trim().is_empty() {
            return Err(Error::config("experiment", "must not be empty"));
        }
        self.grid.build()?;
        self.nonlinearity.build()?;
        if let Some(st) = &self.stepper {
            self.sim_config_for(st, self.nonlinearity.build()?)?;
        }
        if let Some(init) = &self.initial {
            if !init.scale.is_finite() || !init.phase_b.is_finite() {
                return Err(Error::config("initial", "scale and phase_b must be finite"));
            }
            match init.profile {
                ProfileSpec::Polynomial { amplitude, n } => {
                    if amplitude == 0.0 || !amplitude.is_finite() {
                        return Err(Error::config("initial.profile.amplitude", "must be non-zero"));
                    }
                    positive("initial.profile.n", n)?;
                }
                ProfileSpec::SechGs { alpha, eps } => {
                    positive("initial.profile.alpha", alpha)?;
                    positive("initial.profile.eps", eps)?;
                }
                ProfileSpec::DoubleGs { alpha1, omega, .. } => {
                    positive("initial.profile.alpha1", alpha1)?;
                    positive("initial.profile.omega", omega)?;
                }
                ProfileSpec::NumericGs { omega } => positive("initial.profile.omega", omega)?,
                ProfileSpec::Gaussian { height } => positive("initial.profile.height", height)?,
            }
        }
        if let Some(gs) = &self.groundstate {
            positive("groundstate.omega", gs.omega)?;
            positive("groundstate.tol", gs.tol)?;
            if gs.max_iter == 0 {
                return Err(Error::config("groundstate.max_iter", "must be at least 1"));
            }
            if let Gamma::Fixed(g) = gs.gamma {
                positive("groundstate.gamma", g)?;
            }
        }
        if let Some(sw) = &self.sweep {
            for (i, a) in sw.amplitudes.iter().enumerate() {
                if !a.is_finite() {
                    return Err(Error::config(format!("sweep.amplitudes[{i}]"), "must be finite"));
                }
            }
            for (i, b) in sw.b.iter().enumerate() {
                if !b.is_finite() {
                    return Err(Error::config(format!("sweep.b[{i}]"), "must be finite"));
                }
            }
            for (i, e) in sw.eps.iter().enumerate() {
                self.nonlinearity
                    .with_eps(*e)
                    .build()
                    .map_err(|err| Error::config(format!("sweep.eps[{i}]"), err.to_string()))?;
            }
        }
        let c = &self.classify;
        if !(c.tail_fraction > 0.0 && c.tail_fraction <= 1.0) {
            return Err(Error::config("classify.tail_fraction", "must lie in (0, 1]"));
        }
        positive("classify.bound_factor", c.bound_factor)?;
        if let Some(cf) = &self.conformal {
            positive("conformal.b", cf.b)?;
            positive("conformal.dt", cf.dt)?;
            if cf.times.is_empty() {
                return Err(Error::config("conformal.times", "must not be empty"));
            }
            for (i, t) in cf.times.iter().enumerate() {
                positive(&format!("conformal.times[{i}]"), *t)?;
            }
        }
        if let Some(cd) = &self.conditions {
            positive("conditions.r0", cd.r0)?;
            positive("conditions.tol", cd.tol)?;
            if cd.conditions.is_empty() {
                return Err(Error::config("conditions.conditions", "must not be empty"));
            }
        }
        match self.action {
            Action::Evolve | Action::Sweep => {
                self.require_stepper()?;
                self.require_initial()?;
            }
            Action::Groundstate => {
                self.require_groundstate()?;
            }
            Action::ConformalCheck => {
                self.require_initial()?;
                if self.conformal.is_none() {
                    return Err(Error::config("conformal", "required by the conformal_check action"));
                }
            }
            Action::CheckConditions => {}
        }
        Ok(())
    }

    pub fn require_stepper(&self) -> Result<&StepperSpec> {
        self.stepper
            .as_ref()
            .ok_or_else(|| Error::config("stepper", "required by this action"))
    }

    pub fn require_initial(&self) -> Result<&InitialSpec> {
        self.initial
            .as_ref()
            .ok_or_else(|| Error::config("initial", "required by this action"))
    }

    pub fn require_groundstate(&self) -> Result<&GroundStateSpec> {
        self.groundstate
            .as_ref()
            .ok_or_else(|| Error::config("groundstate", "required by this action"))
    }

    pub fn grid_build(&self) -> Result<Grid> {
        self.grid.build()
    }

    pub fn series(&self) -> Result<SeriesNonlinearity> {
        self.nonlinearity.build()
    }

    pub fn series_for(&self, case: &Case) -> Result<SeriesNonlinearity> {
        match case.eps {
            Some(e) => self.nonlinearity.with_eps(e).build(),
            None => self.series(),
        }
    }

    fn sim_config_for(&self, st: &StepperSpec, series: SeriesNonlinearity) -> Result<SimConfig> {
        let mut c = SimConfig::new(series, st.method, st.dt, st.t_end);
        c.diagnostics_stride = st.diagnostics_stride;
        c.snapshot_stride = st.snapshot_stride;
        c.blowup_factor = st.blowup_factor;
        c.max_halvings = st.max_halvings;
        c.weight_n = st.weight_n;
        c.backend = st.backend;
        c.resolution_tol = st.resolution_tol;
        c.track_energy = st.track_energy;
        c.validate().map_err(|e| Error::config("stepper", e.to_string()))?;
        Ok(c)
    }

    pub fn sim_config(&self, series: SeriesNonlinearity) -> Result<SimConfig> {
        self.sim_config_for(self.require_stepper()?, series)
    }

    pub fn equivalence_options(&self) -> Result<EquivalenceOptions> {
        let cf = self
            .conformal
            .as_ref()
            .ok_or_else(|| Error::config("conformal", "required by this action"))?;
        let mut opts = EquivalenceOptions {
            dt: cf.dt,
            ..Default::default()
        };
        if let Some(m) = cf.method {
            opts.stepper = m;
        }
        if let Some(st) = &self.stepper {
            opts.backend = st.backend;
        }
        Ok(opts)
    }

    pub fn ground_state_spec(&self, omega: f64) -> GroundStateSpec {
        match &self.groundstate {
            Some(gs) => GroundStateSpec { omega, ..gs.clone() },
            None => GroundStateSpec::new(omega),
        }
    }

    /// Base points of the sweep (a single case without a sweep block).
    pub fn cases(&self) -> Vec<Case> {
        let (a0, b0) = self.initial.as_ref().map_or((1.0, 0.0), |i| (i.scale, i.phase_b));
        let sw = self.sweep.clone().unwrap_or_default();
        let amps = if sw.amplitudes.is_empty() { vec![a0] } else { sw.amplitudes };
        let bs = if sw.b.is_empty() { vec![b0] } else { sw.b };
        let epss: Vec<Option<f64>> = if sw.eps.is_empty() {
            vec![None]
        } else {
            sw.eps.into_iter().map(Some).collect()
        };
        let mut out = Vec::new();
        for &eps in &epss {
            for &b in &bs {
                for &amplitude in &amps {
                    out.push(Case { amplitude, b, eps });
                }
            }
        }
        out
    }

    /// The unscaled, phase-free profile `P` for `series`; a numerically
    /// solved ground state is returned with its solver report.
    pub fn profile(&self, grid: &Grid, series: &SeriesNonlinearity) -> Result<(ComplexField, Option<GroundStateResult>)> {
        let init = self.require_initial()?;
        let at = |e: Error| Error::config("initial.profile", e.to_string());
        Ok(match init.profile {
            ProfileSpec::Polynomial { amplitude, n } => (profiles::polynomial_decay(amplitude, n, grid).map_err(at)?, None),
            ProfileSpec::SechGs { alpha, eps } => (profiles::sech_ground_state(alpha, eps, grid).map_err(at)?, None),
            ProfileSpec::DoubleGs {
                alpha1,
                eps1,
                eps2,
                omega,
            } => (
                profiles::double_ground_state(alpha1, eps1, eps2, omega, grid).map_err(at)?,
                None,
            ),
            ProfileSpec::NumericGs { omega } => {
                let res = solve_ground_state(series, omega, grid, &self.ground_state_spec(omega).options())?;
                (res.q.clone(), Some(res))
            }
            ProfileSpec::Gaussian { height } => (profiles::gaussian(height, grid), None),
        })
    }

    /// `u_0 = A e^{i b x^2/4} P` for one sweep case.
    pub fn initial_field(&self, profile: &ComplexField, case: &Case) -> ComplexField {
        let scaled = profile.scale(num_complex::Complex64::new(case.amplitude, 0.0));
        profiles::quadratic_phase(&scaled, case.b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{
            "experiment": "t",
            "grid": {"half_width_pi": 10, "n": 256},
            "stepper": {"method": "irk4", "dt": 0.01, "t_end": 1},
            "nonlinearity": {"family": "finite_sum", "terms": [{"coeff": 1, "alpha": 2}]},
            "initial": {"profile": {"kind": "gaussian", "height": 1}}
        }"#
    }

    #[test]
    fn parses_with_defaults() {
        let c = RunConfig::from_json(minimal(), Path::new("x.json")).unwrap();
        assert_eq!(c.action, Action::Evolve);
        assert_eq!(c.stepper.as_ref().unwrap().diagnostics_stride, 10);
        assert_eq!(c.cases().len(), 1);
        let back = RunConfig::from_json(&c.to_json(), Path::new("y.json")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = minimal().replace("\"experiment\"", "\"bogus\": 1, \"experiment\"");
        assert!(matches!(
            RunConfig::from_json(&text, Path::new("x.json")),
            Err(Error::Parse { .. })
        ));
        let text = minimal().replace("\"height\": 1", "\"height\": 1, \"width\": 2");
        assert!(RunConfig::from_json(&text, Path::new("x.json")).is_err());
    }

    #[test]
    fn errors_name_the_offending_field() {
        let text = minimal().replace("\"dt\": 0.01", "\"dt\": -1");
        match RunConfig::from_json(&text, Path::new("x.json")) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "stepper"),
            other => panic!("{other:?}"),
        }
        let text = minimal().replace("\"half_width_pi\": 10", "\"half_width_pi\": 10, \"half_width\": 3");
        match RunConfig::from_json(&text, Path::new("x.json")) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "grid"),
            other => panic!("{other:?}"),
        }
        let text = minimal().replace(
            "\"initial\": {\"profile\": {\"kind\": \"gaussian\", \"height\": 1}}",
            "\"output\": \"o\"",
        );
        match RunConfig::from_json(&text, Path::new("x.json")) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "initial"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_cases_and_eps_override() {
        let mut c = RunConfig::from_json(minimal(), Path::new("x.json")).unwrap();
        c.sweep = Some(SweepSpec {
            amplitudes: vec![0.5, 1.0],
            b: vec![-1.0, 1.0],
            eps: vec![2.0],
        });
        let cases = c.cases();
        assert_eq!(cases.len(), 4);
        let s = c.series_for(&cases[0]).unwrap();
        assert_eq!(s.term(0).unwrap().coeff.re, 2.0);
    }

    #[test]
    fn exp_first_zero_keeps_the_constant() {
        let full = NonlinearitySpec::Exp {
            eps: 0.5,
            r: 1.0,
            c: 1.0,
            first: 0,
        }
        .build()
        .unwrap();
        assert_eq!(full, SeriesNonlinearity::exp_full(0.5, 1.0).unwrap());
        let tail = NonlinearitySpec::Exp {
            eps: 1.0,
            r: 1.0,
            c: 1.0,
            first: 3,
        }
        .build()
        .unwrap();
        assert_eq!(tail, SeriesNonlinearity::exp_tail(1.0, 1.0).unwrap());
    }
}
