//! Learning moment-closure models for lattice reaction-diffusion systems
//! with dynamic centered deep Boltzmann machines.
//!
//! The pipeline has four stages, mirrored by the `dyndbm` CLI:
//!
//! 1. [`sim`] — generate ensembles of stochastic lattice trajectories.
//! 2. [`trainer`] — fit time-dependent Boltzmann interactions whose
//!    dynamics are finite-element fields ([`fem`]) learned by an adjoint
//!    method ([`dynamics`]) over the centered parameterization
//!    ([`centering`]) of a locally connected multinomial DBM ([`dbm`]).
//! 3. [`closure`] — decompose observable dynamics into the learned
//!    closure terms and compare against the simulations.
//! 4. [`config`]/[`io`] — reproducible run configuration and plain-text
//!    persistence for datasets, checkpoints, and trajectories.

pub mod arch;
pub mod centering;
pub mod closure;
pub mod config;
pub mod dbm;
pub mod dynamics;
pub mod error;
pub mod fem;
pub mod io;
pub mod lattice;
pub mod reactions;
pub mod sim;
pub mod trainer;

pub use arch::{DbmArchitecture, InteractionId, LayerSpec, WeightSpec};
pub use error::{Error, Result};
pub use fem::BasisField;
pub use lattice::{count_moments, Lattice, MomentRecord, SpeciesId, SpeciesTable};
pub use reactions::{BimolecularReaction, ReactionSet, UnimolecularReaction};
pub use sim::{run_ensemble, SimParams, SimulationDataset, Trajectory};
