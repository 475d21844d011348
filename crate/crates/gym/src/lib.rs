//! Reset/step market environments built on the `marketgym-core` simulator.
//!
//! ```no_run
//! use marketgym_core::background::PopulationSpec;
//! use marketgym_gym::registry::{make, EnvOverrides, DAILY_INVESTOR};
//!
//! let mut env = make(DAILY_INVESTOR, &EnvOverrides::new(), &PopulationSpec::default())?;
//! env.seed(0);
//! let mut state = env.reset()?;
//! loop {
//!     let step = env.step(1)?;
//!     state = step.state;
//!     if step.done {
//!         break;
//!     }
//! }
//! # let _ = state;
//! # Ok::<(), marketgym_gym::env::EnvError>(())
//! ```

pub mod daily_investor;
pub mod env;
pub mod execution;
pub mod features;
pub mod markets;
pub mod registry;

pub use env::{EnvError, Environment, GymEnv, MdpLayer, StepResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
