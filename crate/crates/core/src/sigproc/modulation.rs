use super::{BitSequence, SymbolFrame};
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

/// Square QAM formats with fixed Gray maps.
///
/// QPSK maps each bit to one axis: `0 -> +1`, `1 -> -1`, scaled by 1/sqrt(2),
/// first bit on I. 16-QAM maps each bit pair to one axis with levels
/// `00 -> +3, 01 -> +1, 11 -> -1, 10 -> -3`, scaled by 1/sqrt(10), first pair
/// on I.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModulationFormat {
    #[serde(alias = "QPSK")]
    Qpsk,
    #[serde(rename = "qam16", alias = "16qam", alias = "QAM16")]
    Qam16,
}

const QAM16_LEVELS: [f64; 4] = [3.0, 1.0, -3.0, -1.0]; // indexed by bit pair 00, 01, 10, 11

impl ModulationFormat {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            ModulationFormat::Qpsk => 2,
            ModulationFormat::Qam16 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModulationFormat::Qpsk => "QPSK",
            ModulationFormat::Qam16 => "16-QAM",
        }
    }

    fn scale(self) -> f64 {
        match self {
            ModulationFormat::Qpsk => FRAC_1_SQRT_2,
            ModulationFormat::Qam16 => 1.0 / 10f64.sqrt(),
        }
    }

    fn axis_bits(self) -> usize {
        self.bits_per_symbol() / 2
    }

    fn axis_level(self, label: usize) -> f64 {
        match self {
            ModulationFormat::Qpsk => {
                if label == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            ModulationFormat::Qam16 => QAM16_LEVELS[label],
        }
    }

    fn axis_label(self, x: f64) -> usize {
        let x = x / self.scale();
        match self {
            ModulationFormat::Qpsk => (x < 0.0) as usize,
            ModulationFormat::Qam16 => {
                if x >= 2.0 {
                    0b00
                } else if x >= 0.0 {
                    0b01
                } else if x >= -2.0 {
                    0b11
                } else {
                    0b10
                }
            }
        }
    }

    /// Point for an integer label whose MSBs are the I-axis bits.
    pub fn point(self, label: usize) -> Complex64 {
        let ab = self.axis_bits();
        let mask = (1 << ab) - 1;
        let i = self.axis_level(label >> ab);
        let q = self.axis_level(label & mask);
        Complex64::new(i, q) * self.scale()
    }

    /// All constellation points, indexed by label.
    pub fn constellation(self) -> Vec<Complex64> {
        (0..1usize << self.bits_per_symbol()).map(|l| self.point(l)).collect()
    }

    pub fn label_of(self, s: Complex64) -> usize {
        (self.axis_label(s.re) << self.axis_bits()) | self.axis_label(s.im)
    }

    /// Nearest constellation point.
    pub fn decide(self, s: Complex64) -> Complex64 {
        self.point(self.label_of(s))
    }
}

/// Gray-map bits to unit-mean-power symbols.
pub fn map_bits(bits: &BitSequence, format: ModulationFormat, baud: f64) -> Result<SymbolFrame> {
    let k = format.bits_per_symbol();
    if bits.len() % k != 0 {
        return Err(Error::invalid(format!(
            "{} bits is not a multiple of {k} bits per symbol",
            bits.len()
        )));
    }
    let symbols = bits
        .as_slice()
        .chunks_exact(k)
        .map(|c| {
            let label = c.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
            format.point(label)
        })
        .collect();
    SymbolFrame::new(symbols, format, baud)
}

/// Hard-decide symbols back to bits.
pub fn demap_symbols(symbols: &[Complex64], format: ModulationFormat) -> Result<BitSequence> {
    let k = format.bits_per_symbol();
    let mut bits = Vec::with_capacity(symbols.len() * k);
    for &s in symbols {
        let label = format.label_of(s);
        for b in (0..k).rev() {
            bits.push(((label >> b) & 1) as u8);
        }
    }
    BitSequence::new(bits)
}
