//! Config-driven sweeps, the deterministic rate-shock cases and figure data.

pub mod cases;
pub mod config;
pub mod figures;
pub mod sweep;

pub use cases::{run_case, run_cases, Case, CaseReport};
pub use config::{ConfigError, Format, Layout, ScenarioConfig};
pub use figures::{compute_figure, figure_spec, figure_specs, BaseScenario, FigureSpec};
pub use sweep::{run_sweep, SweepResult};
