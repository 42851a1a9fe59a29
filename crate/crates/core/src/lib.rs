//! Revenue-optimal stochastic pricing for a buyer with cumulative prospect
//! theory preferences: static random prices, the continuous-time optimal
//! process, loot-box classes, naive buyers and private values.

pub mod classes;
pub mod cpt;
pub mod error;
pub mod exponential;
pub mod montecarlo;
pub mod naive;
pub mod numeric;
pub mod payment;
pub mod private_values;
pub mod verify;
pub mod weighting;

pub use classes::{ClassKind, ClassOptimum, Granularity, MechanismClassSpec, Table};
pub use cpt::{CptParams, Menu, StaticMultiplier, StaticOptimum};
pub use error::{Error, Result};
pub use exponential::{ExponentialSolution, SolverOptions};
pub use montecarlo::{SimConfig, SimMechanism, SimResult};
pub use naive::NaiveSolution;
pub use payment::{Atom, CumulativePaymentFn, DirReport, PaymentDistribution};
pub use private_values::{PrivateValueMechanism, TypePrior};
pub use weighting::WeightingFn;
