//! Preparation and analysis of quasi-stationary states: many-body states
//! whose energy support lies in a narrow window of a dense spectrum.
//!
//! The pipeline is
//! 1. [`spectral`]: build the mixed-field Ising chain and diagonalize it;
//! 2. [`product`]: zero-energy product initial states and state reflections;
//! 3. [`filter`]: ideal and Gaussian-blurred window reflections;
//! 4. [`search`]: fixed-point amplitude amplification onto the window;
//! 5. [`analysis`], [`shadow`]: populations, fidelities, entanglement,
//!    off-diagonal elements and classical-shadow estimators;
//! 6. [`dynamics`]: window decompositions and reconstruction of dynamics.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod filter;
pub mod linalg;
pub mod observable;
pub mod product;
pub mod search;
pub mod shadow;
pub mod spectral;
pub mod state;

pub use error::{QssError, Result};
pub use filter::{BlurSpec, EnergyWindow, FourierReflection};
pub use search::{PreparationResult, SearchMode, SearchPlan};
pub use spectral::{IsingParams, Spectrum};
pub use state::StateVector;
