//! Restarted outer momentum for local-update optimization, analysed one
//! quadratic eigenmode at a time.
//!
//! The core is generic over the scalar. `f64` is the workhorse, `f32` is
//! supported throughout, and exact rationals (`BigRational`) work for the
//! algebraic layer: transitions, the restart-factor recurrence and the
//! simulators. Spectral quantities (angles, radii, rates) need a `Float`.

pub mod error;
pub mod mode_dynamics;
pub mod restart_analysis;
pub mod scalar;
pub mod sweep_harness;
pub mod trajectory_sim;
pub mod validation;

pub use error::{Error, Result};
pub use mode_dynamics::{
    complex_regime_interval, effective_sigma, spectral_params, step, transition, transition_hb,
    transition_nag, EffectiveProgress, InnerConfig, Method, ModeState, OuterHyperparams, Regime,
    RegimeInterval, SpectralParams, Transition2x2,
};
pub use restart_analysis::{
    chi_closed_form, chi_recurrence, crossover, heuristic_period, oracle_period, phase_estimates,
    rate_r_inf, rate_r_k, PeriodRecommendation, RestartFactorSeries,
};
pub use scalar::{Real, Scalar};
pub use sweep_harness::{robustness_metric, run_sweep, SweepConfig, SweepResult};
pub use trajectory_sim::{
    simulate_blocks, simulate_full_quadratic, simulate_modes, Block, QuadraticProblem,
    RestartSchedule, Spectrum, Trajectory,
};

pub use num_rational::BigRational;

pub type Transition = Transition2x2<f64>;
pub type TransitionF32 = Transition2x2<f32>;
pub type ExactTransition = Transition2x2<BigRational>;
pub type Hyperparams = OuterHyperparams<f64>;
pub type ExactHyperparams = OuterHyperparams<BigRational>;
pub type State = ModeState<f64>;
pub type SpectrumF64 = Spectrum<f64>;
pub type ExactSpectrum = Spectrum<BigRational>;
pub type Schedule = RestartSchedule<f64>;
pub type TrajectoryF64 = Trajectory<f64>;
pub type Sweep = SweepConfig<f64>;
