//! Balanced truncation (BT) and time-limited balanced truncation (TLBT) for
//! dense LTI systems, with the H2-type error bound for TLBT and the tools to
//! check it against simulation.

pub mod balancing;
pub mod bounds;
pub mod error;
pub mod gramians;
pub mod input;
pub mod io;
pub mod linalg;
pub mod simulation;
pub mod system;

pub use balancing::{balance, balance_all, select_order, truncate, BalancingResult, ReducedModel};
pub use bounds::{tlbt_h2_bound, tlbt_h2_bound_alt, BoundReport};
pub use error::{MorError, Result};
pub use gramians::{infinite_gramians, time_limited_gramians, GramianSet, Horizon};
pub use input::InputSignal;
pub use linalg::Matrix;
pub use simulation::{simulate, Trajectory};
pub use system::{generate_heat_model, LinearModel, StateSpaceSystem};
