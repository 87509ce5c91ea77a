//! One convex-integration step for the stationary EMHD-Reynolds system.

pub mod cutoff;
pub mod perturbation;
pub mod step;
pub mod stress;
pub mod tuple;

pub use cutoff::{build_amplitudes, build_cutoff, cutoff_constant, Amplitudes, Chi};
pub use perturbation::{build_perturbation, Perturbation};
pub use step::{step, weak_check, weak_pairings, StepParams, StepReport, StressNorms, WeakPairing};
pub use stress::{build_new_stress, build_new_stress_with, NewStress, StressPart};
pub use tuple::{
    compatible_tuple, mollify_tuple, residual, solve_compatible, solve_pressure, system_pressure, ReynoldsTuple,
    TupleNorms,
};
