use thiserror::Error;

use crate::workspace::{MapError, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("start {0} is not in free space")]
    InvalidStart(Point),
    #[error("goal {0} is not in free space")]
    InvalidGoal(Point),
    #[error("endpoint {0} is used more than once")]
    DuplicateEndpoint(Point),
    #[error("starts and goals differ in count ({starts} vs {goals})")]
    EndpointCountMismatch { starts: usize, goals: usize },
    #[error("at least one robot is required")]
    NoRobots,
    #[error("every active tree has zero selection weight")]
    AllTreesHalted,
    #[error("planning failed for groups {0:?}")]
    PlanningFailed(Vec<usize>),
    #[error("path needs at least two waypoints")]
    DegeneratePath,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
