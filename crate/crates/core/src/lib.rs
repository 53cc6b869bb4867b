pub mod acquisition;
pub mod benchmarks;
pub mod domain;
pub mod error;
pub mod gp;
pub mod kernels;
pub mod lcbo;
pub mod rng;

pub use acquisition::{minimize_acquisition, AcquisitionConfig};
pub use benchmarks::{ConstraintSense, ProblemDef};
pub use domain::BoxDomain;
pub use error::{LcboError, Result};
pub use gp::{Dataset, GPModel, HyperPriors, Standardizer};
pub use kernels::{KernelFamily, KernelSpec};
pub use lcbo::{BatchSchedule, IterationRecord, LcboConfig, StepMode};
