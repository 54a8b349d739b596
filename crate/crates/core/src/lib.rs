//! Multi-robot path planning with rapidly-exploring random disjointed trees.
//!
//! The planner grows two root trees per robot (one at its start, one at its
//! goal) together with a pool of disjointed trees scattered over free space.
//! Disjointed trees that touch a root tree are copied into it and frozen, so
//! every robot group can reuse what they explored. Found paths are shortened
//! by line-of-sight shortcutting and executed with reciprocal velocity
//! obstacles. An RRT* baseline and a benchmark harness are included.

pub mod baseline;
pub mod error;
pub mod forest;
pub mod harness;
pub mod motion;
pub mod multiplan;
pub mod sampling;
pub mod smoothing;
pub mod spatial;
pub mod workspace;

pub use error::PlanError;
pub use workspace::{load_map, GridMap, MapError, Point, Segment};
