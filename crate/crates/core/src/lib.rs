//! Synthesis and simulation of truncated modular-exponentiation operators
//! for Shor's algorithm.
//!
//! The operators `U^p` are built only on the orbit `{a^x mod N}` of the work
//! register's initial state `|1⟩`, one level per transition, using NOT and
//! multi-controlled-NOT gates. Emptying trailing levels gives the truncated
//! operators whose factoring performance the [`experiments`] module measures.
//!
//! ```
//! use truncshor::{analyze_measurement, build_orbit, synth_all_powers, exact_distribution};
//! use truncshor::FactoringInstance;
//!
//! let inst = FactoringInstance::new(21, 2, 5).unwrap();
//! let orbit = build_orbit(&inst);
//! assert_eq!(orbit.states(), &[1, 2, 4, 8, 16, 11]);
//!
//! let family = synth_all_powers(&orbit, 5, 0).unwrap();
//! let dist = exact_distribution(&inst, &family);
//! let best = dist
//!     .ranked()
//!     .into_iter()
//!     .find(|&l| analyze_measurement(&inst, l as u64).produces_factors())
//!     .unwrap();
//! assert_eq!(best, 5);
//! assert_eq!(analyze_measurement(&inst, 5).factors(), Some((7, 3)));
//! ```

pub mod circuit;
pub mod error;
pub mod experiments;
pub mod modmath;
pub mod shor;
pub mod synth;

pub use circuit::{Control, Gate, LeveledCircuit, PermutationTable, Polarity, Version};
pub use error::{Error, Result};
pub use experiments::{
    derive_seed, peak_presence, resolution_study, resolution_study_with, tries_until_factor,
    truncated_distribution, truncation_sweep, PeakPresence, ResolutionStudy, StudyRow, TrialPlan,
    TriesResult, TryOutcome, DEFAULT_MAX_TRIES,
};
pub use modmath::{
    analyze_measurement, build_orbit, check_period, continued_fraction, convergents,
    cycle_decomposition, extract_factors, mod_pow, ConvergentReport, CycleDecomposition,
    FactoringInstance, Orbit, PeriodCheck,
};
pub use shor::{
    analytic_amplitude, control_image, eigenstate_vector, exact_distribution, run_shor_dense,
    histogram_csv, sample, EigenphaseSet, PhaseDistribution, Provenance, DEFAULT_DENSE_CAP,
};
pub use synth::{synth_all_powers, synth_me_operator, PowerFamily};
