use crate::error::{Error, Result};
use crate::io::matrix_csv::IntensityTable;
use crate::rng;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use std::path::Path;

/// How the entries of a [`TransferMatrix`] are scaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Field amplitudes exactly as loaded or synthesized.
    Field,
    /// Field amplitudes multiplied by this global factor so the largest
    /// singular value does not exceed one.
    Passive(f64),
}

/// Per-wavelength N x N complex field coupling matrix. Row `i` is output
/// mode `i`, column `j` is input mode `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    pub wavelength_nm: f64,
    pub entries: DMatrix<Complex64>,
    pub normalization: Normalization,
}

impl TransferMatrix {
    pub fn new(wavelength_nm: f64, entries: DMatrix<Complex64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::invalid(format!(
                "transfer matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self {
            wavelength_nm,
            entries,
            normalization: Normalization::Field,
        })
    }

    pub fn identity(n: usize, wavelength_nm: f64) -> Self {
        Self {
            wavelength_nm,
            entries: DMatrix::identity(n, n),
            normalization: Normalization::Field,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Build from measured intensities: magnitudes are the square roots of
    /// the linear powers, phases are uniform draws from `phase_seed`.
    pub fn from_intensity(table: &IntensityTable, phase_seed: u64) -> Result<Self> {
        let n = table.labels.len();
        let mut r = rng::rng_for(phase_seed, "matrix-phase", 0);
        let mut entries = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let db = table.db[i][j];
                let mag = 10f64.powf(db / 20.0);
                entries[(i, j)] = rng::uniform_phase(&mut r) * mag;
            }
        }
        Self::new(table.wavelength_nm, entries)
    }

    /// Intensity view `10 log10 |m_ij|^2`.
    pub fn intensity_db(&self) -> DMatrix<f64> {
        self.entries.map(|v| 10.0 * v.norm_sqr().log10())
    }

    pub fn intensity_table(&self, labels: &[String]) -> IntensityTable {
        let db = self.intensity_db();
        IntensityTable {
            wavelength_nm: self.wavelength_nm,
            labels: labels.to_vec(),
            db: (0..self.dim())
                .map(|i| (0..self.dim()).map(|j| db[(i, j)]).collect())
                .collect(),
        }
    }

    /// Worst off-diagonal power in each row, in dB relative to that row's
    /// through (diagonal) power.
    pub fn crosstalk_db(&self) -> Vec<f64> {
        let db = self.intensity_db();
        (0..self.dim())
            .map(|i| {
                let worst = (0..self.dim())
                    .filter(|&j| j != i)
                    .map(|j| db[(i, j)])
                    .fold(f64::NEG_INFINITY, f64::max);
                worst - db[(i, i)]
            })
            .collect()
    }

    /// Diagonal (through) power per mode in dB.
    pub fn insertion_loss_db(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| 10.0 * self.entries[(i, i)].norm_sqr().log10())
            .collect()
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self
            .entries
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    pub fn max_singular_value(&self) -> f64 {
        self.singular_values()[0]
    }

    /// Globally rescale so the largest singular value is at most one.
    /// Returns the applied factor.
    pub fn normalize_passive(&mut self) -> f64 {
        let prior = match self.normalization {
            Normalization::Passive(f) => f,
            Normalization::Field => 1.0,
        };
        let smax = self.max_singular_value();
        let factor = if smax > 1.0 { 1.0 / smax } else { 1.0 };
        if factor != 1.0 {
            self.entries *= Complex64::new(factor, 0.0);
        }
        self.normalization = Normalization::Passive(prior * factor);
        factor
    }

    pub fn passive(&self) -> TransferMatrix {
        let mut m = self.clone();
        if m.normalization == Normalization::Field {
            m.normalize_passive();
        }
        m
    }
}

/// Read a matrix CSV and attach seeded phases.
pub fn load_transfer_matrix(path: impl AsRef<Path>, phase_seed: u64) -> Result<TransferMatrix> {
    let text = std::fs::read_to_string(path)?;
    let table = IntensityTable::parse(&text)?;
    TransferMatrix::from_intensity(&table, phase_seed)
}

/// Tabulated per-mode worst crosstalk and insertion-loss spread versus
/// wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkProfile {
    pub wavelengths_nm: Vec<f64>,
    /// `[wavelength][mode]`, dB relative to the through path (<= 0).
    pub crosstalk_db: Vec<Vec<f64>>,
    /// `[wavelength]`, max - min of the through powers in dB.
    pub insertion_loss_spread_db: Vec<f64>,
}

/// Mode index that carries the strongest crosstalk in the built-in profile.
pub const WORST_MODE: usize = 8;
pub const WORST_MODE_CROSSTALK_DB: f64 = -7.0;

impl CrosstalkProfile {
    pub fn new(
        wavelengths_nm: Vec<f64>,
        crosstalk_db: Vec<Vec<f64>>,
        insertion_loss_spread_db: Vec<f64>,
    ) -> Result<Self> {
        if wavelengths_nm.is_empty() {
            return Err(Error::invalid("profile needs at least one wavelength"));
        }
        if wavelengths_nm.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("profile wavelengths must be strictly increasing"));
        }
        if crosstalk_db.len() != wavelengths_nm.len() || insertion_loss_spread_db.len() != wavelengths_nm.len() {
            return Err(Error::invalid("profile tables must have one row per wavelength"));
        }
        let modes = crosstalk_db[0].len();
        if crosstalk_db.iter().any(|row| row.len() != modes) {
            return Err(Error::invalid("profile rows must all have the same mode count"));
        }
        if crosstalk_db.iter().flatten().any(|&x| x > 0.0) {
            return Err(Error::invalid("crosstalk levels must be <= 0 dB"));
        }
        if insertion_loss_spread_db.iter().any(|&x| x < 0.0) {
            return Err(Error::invalid("insertion-loss spread must be >= 0 dB"));
        }
        Ok(Self {
            wavelengths_nm,
            crosstalk_db,
            insertion_loss_spread_db,
        })
    }

    /// Same crosstalk level for every mode and wavelength.
    pub fn flat(modes: usize, wavelengths_nm: Vec<f64>, crosstalk_db: f64, il_spread_db: f64) -> Result<Self> {
        let rows = vec![vec![crosstalk_db; modes]; wavelengths_nm.len()];
        let il = vec![il_spread_db; wavelengths_nm.len()];
        Self::new(wavelengths_nm, rows, il)
    }

    /// Built-in C-band profile: seven points from 1530 to 1560 nm, most modes
    /// between -22 and -12 dB with a mild wavelength ripple, and TE8 pinned
    /// at -7 dB across the band.
    pub fn builtin(modes: usize) -> Self {
        let wavelengths: Vec<f64> = (0..7).map(|k| 1530.0 + 5.0 * k as f64).collect();
        let rows = wavelengths
            .iter()
            .map(|&wl| {
                (0..modes)
                    .map(|i| {
                        if i == WORST_MODE {
                            return WORST_MODE_CROSSTALK_DB;
                        }
                        let base = -22.0 + 10.0 * i as f64 / (modes.max(2) - 1) as f64;
                        let ripple = 1.5 * (std::f64::consts::TAU * (wl - 1530.0) / 30.0 + i as f64).sin();
                        (base + ripple).min(-9.0)
                    })
                    .collect()
            })
            .collect();
        let il = vec![2.0; wavelengths.len()];
        Self::new(wavelengths, rows, il).expect("built-in profile is valid")
    }

    pub fn modes(&self) -> usize {
        self.crosstalk_db[0].len()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.wavelengths_nm[0], *self.wavelengths_nm.last().unwrap())
    }

    /// Linear interpolation of (per-mode crosstalk, IL spread) at `wavelength`.
    pub fn at(&self, wavelength: f64) -> Result<(Vec<f64>, f64)> {
        let (lo, hi) = self.range();
        if !(wavelength >= lo - 1e-9 && wavelength <= hi + 1e-9) {
            return Err(Error::invalid(format!(
                "wavelength {wavelength} nm outside profile range {lo}..{hi} nm"
            )));
        }
        let wl = &self.wavelengths_nm;
        if wl.len() == 1 {
            return Ok((self.crosstalk_db[0].clone(), self.insertion_loss_spread_db[0]));
        }
        let k = wl
            .windows(2)
            .position(|w| wavelength <= w[1] + 1e-9)
            .unwrap_or(wl.len() - 2);
        let t = ((wavelength - wl[k]) / (wl[k + 1] - wl[k])).clamp(0.0, 1.0);
        let lerp = |a: f64, b: f64| a + t * (b - a);
        let xt = self.crosstalk_db[k]
            .iter()
            .zip(&self.crosstalk_db[k + 1])
            .map(|(&a, &b)| lerp(a, b))
            .collect();
        let il = lerp(self.insertion_loss_spread_db[k], self.insertion_loss_spread_db[k + 1]);
        Ok((xt, il))
    }
}

/// Draw a coupling matrix consistent with a crosstalk profile.
///
/// Through powers spread uniformly over the insertion-loss range (extremes
/// pinned). In row `i`, one off-diagonal entry next to the diagonal carries
/// exactly the profile's worst level; every other off-diagonal entry sits
/// 3 to 20 dB below it. Phases are uniform. The result is scaled down if
/// needed to be passive.
pub fn synthesize_transfer_matrix(profile: &CrosstalkProfile, wavelength_nm: f64, seed: u64) -> Result<TransferMatrix> {
    let (xt, il_spread) = profile.at(wavelength_nm)?;
    let n = xt.len();
    let mut r = rng::rng_for(seed, "synth-matrix", wavelength_nm.to_bits());

    let mut u: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
    let (umin, umax) = u.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    if umax > umin {
        u.iter_mut().for_each(|v| *v = (*v - umin) / (umax - umin));
    }
    let through_db: Vec<f64> = u.iter().map(|v| -il_spread * v).collect();

    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        let worst_db = through_db[i] + xt[i];
        let worst_col = if i == 0 {
            1
        } else if i == n - 1 || r.random::<bool>() {
            i - 1
        } else {
            i + 1
        };
        for j in 0..n {
            let db = if j == i {
                through_db[i]
            } else if j == worst_col {
                worst_db
            } else {
                worst_db - 3.0 - 17.0 * r.random::<f64>()
            };
            entries[(i, j)] = rng::uniform_phase(&mut r) * 10f64.powf(db / 20.0);
        }
    }
    let mut m = TransferMatrix::new(wavelength_nm, entries)?;
    m.normalize_passive();
    Ok(m)
}
