use std::path::{Path, PathBuf};

use lcbo_core::acquisition::AcquisitionConfig;
use lcbo_core::benchmarks::ConstraintSense;
use lcbo_core::lcbo::{BatchSchedule, LcboConfig, StepMode};
use lcbo_core::KernelFamily;
use serde::Deserialize;

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    ToyCircle,
    Synthetic,
    Truss,
    Beam,
}

impl std::str::FromStr for ProblemKind {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "toy-circle" => Ok(Self::ToyCircle),
            "synthetic" => Ok(Self::Synthetic),
            "truss" => Ok(Self::Truss),
            "beam" => Ok(Self::Beam),
            other => Err(HarnessError::Config(format!("unknown problem `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lcbo,
    RandomSearch,
}

impl std::str::FromStr for Method {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lcbo" => Ok(Self::Lcbo),
            "random-search" | "random_search" => Ok(Self::RandomSearch),
            other => Err(HarnessError::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// Which values decide feasibility and the starting point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Judge {
    Truth,
    Noisy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Fixed,
    Large,
    Growing,
    Theoretical,
}

/// Optional overrides of the optimizer defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LcboSettings {
    pub step_scale: Option<f64>,
    pub step_mode: Option<String>,
    pub penalty_scale: Option<f64>,
    pub penalty_exponent: Option<f64>,
    pub schedule: Option<ScheduleKind>,
    pub repeats: Option<usize>,
    pub explore: Option<usize>,
    pub window: Option<usize>,
    pub local_radius: Option<f64>,
    pub lse_temperature: Option<f64>,
    pub restarts: Option<usize>,
    pub acq_steps: Option<usize>,
    pub acq_learning_rate: Option<f64>,
    pub fd_step: Option<f64>,
    pub refit_period: Option<usize>,
    pub noise_var: Option<f64>,
    /// Defaults to true for synthetic problems, false elsewhere.
    pub ground_truth: Option<bool>,
    pub kernel: Option<String>,
    pub constraint_sense: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    /// Dimension of synthetic problems.
    pub dim: usize,
    pub problem_seed: u64,
    pub method: Method,
    /// Evaluations, each covering the objective and every constraint.
    pub budget: usize,
    pub repetitions: usize,
    pub base_seed: u64,
    pub out: PathBuf,
    pub plots: bool,
    pub judge: Judge,
    pub start_judge: Judge,
    /// Equality constraints count as satisfied within this tolerance.
    pub eq_tol: f64,
    pub noise_sd: Option<f64>,
    pub lcbo: LcboSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::ToyCircle,
            dim: 25,
            problem_seed: 0,
            method: Method::Lcbo,
            budget: 1000,
            repetitions: 10,
            base_seed: 0,
            out: PathBuf::from("results"),
            plots: false,
            judge: Judge::Truth,
            start_judge: Judge::Truth,
            eq_tol: 1e-2,
            noise_sd: None,
            lcbo: LcboSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Problem dimension implied by the selector.
    pub fn problem_dim(&self) -> usize {
        match self.problem {
            ProblemKind::ToyCircle => 2,
            ProblemKind::Synthetic => self.dim,
            ProblemKind::Truss => 25,
            ProblemKind::Beam => 50,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.problem == ProblemKind::Synthetic && self.dim == 0 {
            return bad("synthetic dimension must be positive".into());
        }
        let d = self.problem_dim();
        if self.budget < d + 1 {
            return bad(format!("budget {} must exceed the cold start of {d} evaluations", self.budget));
        }
        if !(self.eq_tol >= 0.0) {
            return bad("eq_tol must be nonnegative".into());
        }
        if let Some(sd) = self.noise_sd {
            if !(sd >= 0.0 && sd.is_finite()) {
                return bad("noise_sd must be nonnegative".into());
            }
        }
        self.lcbo_config()?.validate().map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Optimizer settings with every override applied; the budget is left unlimited.
    pub fn lcbo_config(&self) -> Result<LcboConfig, HarnessError> {
        let s = &self.lcbo;
        let mut c = LcboConfig::default();
        if let Some(v) = s.step_scale {
            c.step_scale = v;
        }
        if let Some(m) = &s.step_mode {
            c.step_mode = match m.as_str() {
                "decaying" => StepMode::Decaying,
                "constant" => StepMode::Constant,
                other => return Err(HarnessError::Config(format!("unknown step_mode `{other}`"))),
            };
        }
        if let Some(v) = s.penalty_scale {
            c.penalty_scale = v;
        }
        if let Some(v) = s.penalty_exponent {
            c.penalty_exponent = v;
        }
        c.batch_schedule = match s.schedule.unwrap_or(ScheduleKind::Fixed) {
            ScheduleKind::Fixed => BatchSchedule::Fixed {
                repeats: s.repeats.unwrap_or(2),
                explore: s.explore.unwrap_or(5),
            },
            ScheduleKind::Large => BatchSchedule::Large,
            ScheduleKind::Growing => BatchSchedule::Growing,
            ScheduleKind::Theoretical => BatchSchedule::Theoretical,
        };
        c.window = s.window;
        let a = &mut c.acquisition;
        *a = AcquisitionConfig {
            local_radius: s.local_radius.unwrap_or(a.local_radius),
            lse_temperature: s.lse_temperature.unwrap_or(a.lse_temperature),
            restarts: s.restarts.unwrap_or(a.restarts),
            max_steps: s.acq_steps.unwrap_or(a.max_steps),
            step_length: s.acq_learning_rate.unwrap_or(a.step_length),
            fd_step: s.fd_step.unwrap_or(a.fd_step),
            ..a.clone()
        };
        if let Some(v) = s.refit_period {
            c.refit_period = v;
        }
        if let Some(v) = s.noise_var {
            c.noise_var = v;
        }
        c.use_ground_truth = s.ground_truth.unwrap_or(self.problem == ProblemKind::Synthetic);
        if let Some(k) = &s.kernel {
            c.kernel_family = match k.as_str() {
                "rbf" => KernelFamily::Rbf,
                "matern25" => KernelFamily::Matern25,
                other => return Err(HarnessError::Config(format!("unknown kernel `{other}`"))),
            };
        }
        if let Some(sense) = &s.constraint_sense {
            c.constraint_sense = Some(match sense.as_str() {
                "equality" => ConstraintSense::Equality,
                "inequality" => ConstraintSense::Inequality,
                other => return Err(HarnessError::Config(format!("unknown constraint_sense `{other}`"))),
            });
        }
        Ok(c)
    }
}
