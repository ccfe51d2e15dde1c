//! Experimental procedures as deterministic harnesses with synthetic observers.

pub mod fit;
pub mod schedule;
pub mod staircase;

pub use fit::{fit_exponential, fit_linear, FitModel, FitResult};
pub use schedule::{schedule, schedule_by_tag, Condition, Experiment, Material, Reference, Trial, TrialSchedule};
pub use staircase::{
    run_observer, staircase_estimate, staircase_next, Interleave, ObserverModel, ObserverRun, Response,
    Series, StaircaseState,
};
