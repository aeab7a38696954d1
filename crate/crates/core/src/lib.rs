pub mod asymptotics;
pub mod design;
pub mod ecdf;
pub mod estimators;
pub mod error;
pub mod functionals;
pub mod montecarlo;
pub mod normal;
pub mod population;
pub mod rng;
pub mod variance;

pub use ecdf::Ecdf;
pub use error::{Error, Result};
pub use population::{Population, PopulationUnit, TruncNormSpec, Variable};
pub use design::{DesignSpec, Sample, SampleUnit};
pub use estimators::{EstimatorKind, SampleView};
pub use functionals::{ParameterSpec, QuantileFunction, QuantileShape, SmoothL, WeightFunction};
pub use asymptotics::{AsymptoticDesign, ComparisonVerdict, Condition, SuperpopProxy};
pub use montecarlo::{run_simulation, SimulationConfig, SimulationReport};
