//! Numerical laboratory for evolutionary Hamilton-Jacobi equations
//! `∂_t u + H(x, ∂_x u) = 0` on the flat torus `T^n` (n = 1, 2) with convex,
//! coercive Hamiltonians.
//!
//! The toolkit is organized around a superlinear modification `H_R` of a
//! merely coercive Hamiltonian:
//!
//! * [`hamiltonian`] — base presets, the cutoff/penalty modification `H_R`,
//!   and sampled verification of its smoothness, convexity and
//!   superlinearity.
//! * [`legendre`] — the Lagrangian `L_R` as the convex conjugate of `H_R`,
//!   with the velocity map `∂H_R/∂p` and biconjugate round-trip checks.
//! * [`lax_oleinik`] — a semi-Lagrangian discretization of the variational
//!   solution operator, backpointer orbits, energy and calibration checks.
//! * [`critical_value`] — two independent estimators of the critical level
//!   `c` at which the stationary equation admits a global solution.
//! * [`regularity`] — Lipschitz/semiconcavity time series, stabilization-time
//!   detection and the multi-initial-data regularity experiment.
//! * [`config`] / [`io`] — strict JSON experiment configuration and
//!   deterministic CSV/JSON emission.

pub mod config;
pub mod critical_value;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod io;
pub mod lax_oleinik;
pub mod legendre;
pub mod regularity;

pub use config::{parse_config, ExperimentConfig, Tolerances};
pub use error::CoreError;
pub use grid::{TorusGrid, ValueFunction};
pub use hamiltonian::{
    build_modified, verify_claims, ClaimsReport, HamiltonianModel, ModifiedHamiltonian,
    PotentialKind, Preset, SamplingSpec,
};
pub use lax_oleinik::{evolve, one_step, reconstruct_orbit, EvolutionTrace, OrbitSample};
pub use legendre::{velocity_map, LagrangianEvaluator};
pub use regularity::{
    detect_t0, lipschitz_estimate, run_family_experiment, semiconcavity_estimate, InitialDatum,
    RegularityReport,
};
