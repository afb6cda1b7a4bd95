//! Sequential optimization for experiments with quantitative-sequence factors.
//!
//! A run is a [`qscore::QSPoint`]: a quantity for each of k components plus the
//! order in which the components are applied. The crate provides
//!
//! * [`magp`]: the mapping-based additive GP surrogate and its likelihood fit,
//! * [`acquisition`]: expected improvement, SFTA permutation search and the
//!   alternating EI maximizer,
//! * [`initdesign`]: space-filling initial designs and the lattice construction,
//! * [`learner`]: the sequential loop, its fast variant and ask-tell campaigns,
//! * [`baselines`]: linear pairwise-order and component-position models,
//! * [`oracles`]: benchmark functions and an external-process oracle,
//! * [`interface`]: configuration, formatting and the HTTP service.

pub mod acquisition;
pub mod baselines;
pub mod error;
pub mod initdesign;
pub mod interface;
pub mod learner;
pub mod magp;
pub mod optim;
pub mod oracles;
pub mod qscore;

pub use error::{Error, Result};
