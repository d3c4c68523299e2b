//! Transmitter-side signal processing: bit generation, Gray mapping, Nyquist
//! pulse shaping, band-limited resampling and single-waveform impairments.
//!
//! Waveforms are treated as one period of a periodic record (the DAC replays
//! its pattern), so shaping, matched filtering and resampling are all cyclic.

mod impair;
mod modulation;
mod prbs;
mod pulse;
mod resample;

pub use impair::{add_awgn, add_freq_offset, add_phase_noise};
pub use modulation::{demap_symbols, map_bits, ModulationFormat};
pub use prbs::{generate_prbs, PrbsKind, PRBS17_PERIOD};
pub use pulse::{matched_filter_downsample, rrc_taps, shape_pulses, RrcFilter, DEFAULT_RRC_SPAN};
pub use resample::resample;

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Ordered binary values, each 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSequence {
    bits: Vec<u8>,
}

impl BitSequence {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::invalid("bit sequence must not be empty"));
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::invalid(format!("bit {pos} is not 0 or 1")));
        }
        Ok(Self { bits })
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn hamming_distance(&self, other: &BitSequence) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.bits
    }
}

/// Symbol-spaced complex samples with their modulation format and rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub symbols: Vec<Complex64>,
    pub format: ModulationFormat,
    pub baud: f64,
}

impl SymbolFrame {
    pub fn new(symbols: Vec<Complex64>, format: ModulationFormat, baud: f64) -> Result<Self> {
        if !(baud > 0.0 && baud.is_finite()) {
            return Err(Error::invalid(format!("baud must be positive, got {baud}")));
        }
        Ok(Self { symbols, format, baud })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Hard decisions back to bits.
    pub fn decide_bits(&self) -> Result<BitSequence> {
        demap_symbols(&self.symbols, self.format)
    }

    /// Copy of the frame with every symbol replaced by its nearest point.
    pub fn decided(&self) -> SymbolFrame {
        SymbolFrame {
            symbols: self.symbols.iter().map(|&s| self.format.decide(s)).collect(),
            format: self.format,
            baud: self.baud,
        }
    }

    pub fn rotated_left(&self, shift: usize) -> SymbolFrame {
        let mut symbols = self.symbols.clone();
        if !symbols.is_empty() {
            let s = shift % symbols.len();
            symbols.rotate_left(s);
        }
        SymbolFrame {
            symbols,
            format: self.format,
            baud: self.baud,
        }
    }
}

/// Uniformly sampled complex baseband record.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub label: String,
}

impl Waveform {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64, label: impl Into<String>) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
            label: label.into(),
        })
    }

    pub fn zeros(len: usize, sample_rate: f64, label: impl Into<String>) -> Self {
        Self {
            samples: vec![Complex64::new(0.0, 0.0); len],
            sample_rate,
            label: label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean |x|^2 over the record.
    pub fn power(&self) -> f64 {
        mean_power(&self.samples)
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// A waveform with the same rate and label but new samples.
    pub fn with_samples(&self, samples: Vec<Complex64>) -> Waveform {
        Waveform {
            samples,
            sample_rate: self.sample_rate,
            label: self.label.clone(),
        }
    }
}

pub fn mean_power(x: &[Complex64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|s| s.norm_sqr()).sum::<f64>() / x.len() as f64
}

/// RMS of the difference between two equally long sequences.
pub fn rms_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    (a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / a.len() as f64).sqrt()
}
