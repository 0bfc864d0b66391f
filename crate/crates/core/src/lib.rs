//! Interconnection-level primary frequency response simulator.
//!
//! Reduced-order swing dynamics with turbine governors, fast responsive
//! load relays and energy-limited storage, plus the usual frequency
//! response metrics (nadir, ROCOF, settling frequency, FR, UFLS crossing).
//!
//! ```no_run
//! let cfg = gridfreq::scenario::bundled_scenario("ercot80").unwrap();
//! let run = gridfreq::dynamics::run_scenario(&cfg).unwrap();
//! println!("nadir {} Hz at {} s", run.metrics.nadir_hz, run.metrics.nadir_time_s);
//! ```

pub mod dynamics;
pub mod error;
pub mod governor;
pub mod metrics;
pub mod model;
pub mod output;
pub mod scenario;
pub mod storage;
pub mod sweep;
pub mod tactics;

pub use dynamics::{run_scenario, simulate, ScenarioRun, Trace};
pub use error::{Error, Result};
pub use metrics::{compute_metrics, FrequencyMetrics, MetricsParams};
pub use model::{build_fleet, validate_scenario, Fleet, ScenarioConfig};
pub use tactics::{run_compare, TacticSpec};
