//! Classical paths generated by Re H and scored by the time integral of Im H.

mod hamiltonian;
mod inflaton;
mod integrate;
mod optimize;
mod saddle;

pub use hamiltonian::{Bump, ComplexHamiltonianSpec, Coupling, PhaseState, Potential, MAX_DEGREE};
pub use inflaton::{inflaton_toy, inflaton_toy_with_bound, InflatonConfig, InflatonReport};
pub use integrate::{
    integrate, integrate_with_bound, region_label, reward, reward_from, reward_from_with_bound,
    reward_with_fixed_points, step_count, RegionDwell, RewardReport, Trajectory,
    DEFAULT_BLOWUP_BOUND,
};
pub use optimize::{
    grid_search, optimize_initial, optimize_initial_with_bound, OptResult, RestartSummary,
    SearchConfig,
};
pub use saddle::{
    dwell_time, dwell_time_with, nearest_hyperbolic, saddle_points, saddle_points_with,
    unstable_mode, CriticalPoint, DwellConfig, DwellResult, SaddleSearch,
};
