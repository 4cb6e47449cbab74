//! Zeeman-resolved stochastic simulation of SFWM with polarisation.

pub mod bloch;
pub mod integrator;
pub mod seed;
pub mod simpson;
pub mod trajectory;

pub use bloch::{density_rhs, BlochModel, Coupling, DecayForm, DensityBlocks};
pub use integrator::{kutta_merson_step, KuttaMerson, OdeSystem, StepControl};
pub use seed::vacuum_seed_step;
pub use trajectory::{
    polarization_extinction, run_ensemble, to_linear, run_trajectory, trajectory_extinction, InitialState, Mode,
    Polarization, Probe, SimConfig, SimInputs, TrajectoryResult, Transitions,
};
