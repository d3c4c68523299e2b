//! BER with threshold classification, EVM, mode-dependent loss, net
//! capacity and spectral efficiency.

use crate::channel::TransferMatrix;
use crate::error::{Error, Result};
use crate::sigproc::{BitSequence, SymbolFrame};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Pre-FEC BER threshold of 7% overhead hard-decision FEC.
pub const FEC_THRESHOLD: f64 = 4.5e-3;
/// BER bound quoted for an error-free measurement.
pub const ERROR_FREE_BER: f64 = 7e-6;
/// Bits that must be counted, error-free, to support the
/// [`ERROR_FREE_BER`] bound: `ceil(1 / 7e-6)`.
pub const ERROR_FREE_MIN_BITS: usize = 142_858;
pub const DEFAULT_FEC_OVERHEAD: f64 = 0.07;
pub const DEFAULT_GRID_HZ: f64 = 33e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BerClass {
    /// No errors over at least [`ERROR_FREE_MIN_BITS`] bits: BER is below
    /// the bound set by the counted volume (never reported as zero).
    ErrorFreeBound,
    /// `ber < FEC_THRESHOLD` (half-open: equality is above).
    BelowFec,
    AboveFec,
}

impl BerClass {
    pub fn classify(errors: usize, bits: usize) -> Self {
        if errors == 0 && bits >= ERROR_FREE_MIN_BITS {
            return BerClass::ErrorFreeBound;
        }
        if bits > 0 && (errors as f64) / (bits as f64) < FEC_THRESHOLD {
            BerClass::BelowFec
        } else {
            BerClass::AboveFec
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BerClass::ErrorFreeBound => "error_free_bound",
            BerClass::BelowFec => "below_fec",
            BerClass::AboveFec => "above_fec",
        }
    }
}

impl fmt::Display for BerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BerClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error_free_bound" => Ok(BerClass::ErrorFreeBound),
            "below_fec" => Ok(BerClass::BelowFec),
            "above_fec" => Ok(BerClass::AboveFec),
            other => Err(Error::invalid(format!("unknown BER class '{other}'"))),
        }
    }
}

/// Error count for one tributary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerEntry {
    pub bits: usize,
    pub errors: usize,
    pub ber: f64,
    pub class: BerClass,
}

impl BerEntry {
    pub fn new(errors: usize, bits: usize) -> Self {
        let ber = if bits == 0 { 0.0 } else { errors as f64 / bits as f64 };
        Self {
            bits,
            errors,
            ber,
            class: BerClass::classify(errors, bits),
        }
    }

    /// Upper bound that the counted volume supports: the BER itself when
    /// errors were seen, `1 / bits` otherwise.
    pub fn reported_bound(&self) -> f64 {
        if self.errors > 0 || self.bits == 0 {
            self.ber
        } else {
            1.0 / self.bits as f64
        }
    }
}

/// Compare two bit sequences after discarding the first `skip` bits.
/// Symmetric in its two arguments.
pub fn count_ber(decided: &BitSequence, reference: &BitSequence, skip: usize) -> Result<BerEntry> {
    if decided.len() != reference.len() {
        return Err(Error::invalid(format!(
            "bit sequences differ in length ({} vs {})",
            decided.len(),
            reference.len()
        )));
    }
    if skip > decided.len() {
        return Err(Error::invalid("skip exceeds the sequence length"));
    }
    let errors = decided.as_slice()[skip..]
        .iter()
        .zip(&reference.as_slice()[skip..])
        .filter(|(a, b)| a != b)
        .count();
    Ok(BerEntry::new(errors, decided.len() - skip))
}

/// Per-mode BER and EVM for one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct BerReport {
    pub per_mode: Vec<BerEntry>,
    pub evm_percent: Vec<f64>,
}

impl BerReport {
    pub fn bits_counted(&self) -> usize {
        self.per_mode.iter().map(|e| e.bits).sum()
    }

    pub fn errors_counted(&self) -> usize {
        self.per_mode.iter().map(|e| e.errors).sum()
    }

    /// Mean of the per-mode BERs.
    pub fn mean_ber(&self) -> f64 {
        self.per_mode.iter().map(|e| e.ber).sum::<f64>() / self.per_mode.len().max(1) as f64
    }

    pub fn best_ber(&self) -> f64 {
        self.per_mode.iter().map(|e| e.ber).fold(f64::INFINITY, f64::min)
    }

    pub fn worst_ber(&self) -> f64 {
        self.per_mode.iter().map(|e| e.ber).fold(0.0, f64::max)
    }

    pub fn worst_mode(&self) -> usize {
        (0..self.per_mode.len())
            .max_by(|&a, &b| self.per_mode[a].ber.total_cmp(&self.per_mode[b].ber))
            .unwrap_or(0)
    }

    /// Classification of the pooled count.
    pub fn class(&self) -> BerClass {
        BerClass::classify(self.errors_counted(), self.bits_counted())
    }
}

/// RMS error magnitude over RMS reference magnitude, in percent.
pub fn evm(symbols: &SymbolFrame, reference: &SymbolFrame) -> Result<f64> {
    evm_slices(&symbols.symbols, &reference.symbols)
}

pub fn evm_slices(symbols: &[Complex64], reference: &[Complex64]) -> Result<f64> {
    if symbols.is_empty() {
        return Err(Error::invalid("EVM of an empty frame"));
    }
    if symbols.len() != reference.len() {
        return Err(Error::invalid("EVM frames differ in length"));
    }
    let err: f64 = symbols.iter().zip(reference).map(|(a, b)| (a - b).norm_sqr()).sum();
    let pref: f64 = reference.iter().map(|v| v.norm_sqr()).sum();
    if pref == 0.0 {
        return Err(Error::invalid("EVM reference has no power"));
    }
    Ok(100.0 * (err / pref).sqrt())
}

/// `20 log10(sigma_max / sigma_min)`.
pub fn mdl_from_matrix(m: &TransferMatrix) -> Result<f64> {
    mdl_db(&m.entries)
}

/// Mode-dependent loss of any square complex matrix.
pub fn mdl_db(m: &DMatrix<Complex64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::invalid("MDL needs a square matrix"));
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smin > 0.0) || smin <= smax * 1e-15 {
        return Err(Error::SingularChannel);
    }
    Ok(20.0 * (smax / smin).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub gross_bps: f64,
    pub net_bps: f64,
    pub fec_overhead: f64,
    pub grid_hz: f64,
    /// Net rate over the WDM grid spacing.
    pub spectral_efficiency_bps_hz: f64,
    /// Occupied bandwidth `baud * (1 + rolloff)`.
    pub occupied_hz: f64,
    /// Net rate over the occupied bandwidth.
    pub spectral_efficiency_occupied_bps_hz: f64,
}

/// `gross = modes * baud * bits_per_symbol`, `net = gross / (1 + overhead)`.
/// The report's spectral efficiencies use the default 33 GHz grid and zero
/// roll-off; see [`CapacityReport::with_bandwidths`].
pub fn net_capacity(modes: usize, baud: f64, bits_per_symbol: usize, fec_overhead: f64) -> Result<CapacityReport> {
    if modes == 0 || bits_per_symbol == 0 || !(baud > 0.0) || !(fec_overhead >= 0.0) {
        return Err(Error::invalid("capacity inputs must be positive"));
    }
    let gross = modes as f64 * baud * bits_per_symbol as f64;
    let net = gross / (1.0 + fec_overhead);
    CapacityReport {
        gross_bps: gross,
        net_bps: net,
        fec_overhead,
        grid_hz: DEFAULT_GRID_HZ,
        spectral_efficiency_bps_hz: 0.0,
        occupied_hz: baud,
        spectral_efficiency_occupied_bps_hz: 0.0,
    }
    .with_bandwidths(DEFAULT_GRID_HZ, baud)
}

impl CapacityReport {
    pub fn with_bandwidths(mut self, grid_hz: f64, occupied_hz: f64) -> Result<Self> {
        self.grid_hz = grid_hz;
        self.occupied_hz = occupied_hz;
        self.spectral_efficiency_bps_hz = spectral_efficiency(self.net_bps, grid_hz)?;
        self.spectral_efficiency_occupied_bps_hz = spectral_efficiency(self.net_bps, occupied_hz)?;
        Ok(self)
    }
}

pub fn spectral_efficiency(net_bps: f64, grid_hz: f64) -> Result<f64> {
    if !(grid_hz > 0.0) {
        return Err(Error::invalid(format!("grid must be positive, got {grid_hz}")));
    }
    Ok(net_bps / grid_hz)
}
