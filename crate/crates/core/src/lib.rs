//! Steady-state optical response of a J=1 -> J'=0 atom driven by a
//! trichromatic slice of a narrow-bandwidth frequency comb.
//!
//! * [`atomfield`]: level scheme, elliptical trichromatic field, relaxation rates
//! * [`comb`]: Bessel-function comb teeth and phase-class analysis
//! * [`floquet`]: harmonic-balance steady-state solver
//! * [`observables`]: absorption, birefringence, dichroism, Larmor scans,
//!   lock-in derivative
//! * [`oracle`]: direct time integration used to cross-check the solver
//! * [`cli`]: configuration, run modes and CSV output behind the `nbfc` binary

pub mod atomfield;
pub mod comb;
pub mod error;
pub mod floquet;
pub mod observables;
pub mod oracle;
pub mod cli;

pub use error::{Error, Result};
