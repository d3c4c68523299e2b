//! File formats: intensity-matrix CSV, binary waveform records, run
//! result tables and the SVG figures drawn from them.

pub mod matrix_csv;
pub mod plot;
pub mod results;
pub mod waveform;

pub use matrix_csv::IntensityTable;
pub use waveform::{read_waveforms, write_waveforms, WAVEFORM_MAGIC, WAVEFORM_VERSION};
