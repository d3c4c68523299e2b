//! Simulation and offline receiver DSP for an 11-mode mode-division
//! multiplexed coherent optical link: transmitter, crosstalk channel, TDM
//! receiver front end, frequency-domain MIMO LMS equalization and the
//! BER / EVM / MDL / capacity metrics.
//!
//! Every stochastic stage is a pure function of its inputs and a seed; see
//! [`rng`] for how stage seeds are derived.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod rxdsp;
pub mod sigproc;

pub use channel::{DualPol, TdmPlan, TransferMatrix};
pub use config::ExperimentConfig;
pub use error::{Error, Result, Stage};
pub use experiment::{run_simulation, sweep, RunResult, SweepAxis};
pub use metrics::{BerClass, BerReport, CapacityReport};
pub use rxdsp::{EqualizerConfig, EqualizerState, ImpulseResponse, TributarySet};
pub use sigproc::{BitSequence, ModulationFormat, SymbolFrame, Waveform};
