//! American option pricing under stochastic funding and carry rates.
//!
//! A CRR lattice prices under flat rates and yields the distribution of the optimal
//! exercise time. Moment-matched short-rate models supply the rate's marginal at any
//! horizon, and Gauss-Hermite quadrature averages lattice prices over that marginal to
//! measure the convexity the flat-rate price leaves out.

pub mod error;
pub mod european;
pub mod fugit;
pub mod integrator;
pub mod lattice;
pub mod option;
pub mod optionality;
pub mod quadrature;
pub mod rates;
pub mod scenario;

pub use error::{Error, Result};
pub use european::{price_european_closed, stochastic_european, EuropeanPrice};
pub use fugit::{stopping_distribution, FugitSummary, StoppingDistribution};
pub use integrator::{Method, StochasticPriceResult};
pub use lattice::{price_american, LatticeConfig};
pub use option::{OptionKind, OptionSpec, RateSlot, Style};
pub use optionality::{OptionalityReport, PipelineConfig};
pub use quadrature::QuadratureRule;
pub use rates::{calibrate, MarginalLaw, ModelKind, RateModel};
