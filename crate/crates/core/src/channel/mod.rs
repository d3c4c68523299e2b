//! Optical path emulation: per-mode delay decorrelation, the multimode chip
//! (crosstalk and mode-dependent loss), polarization pairing of modes into
//! time slots, gating, delay-line TDM combining and weak reflections.

mod coupling;
mod matrix;
mod tdm;

pub use coupling::{add_reflection_echo, apply_mode_coupling, delay_decorrelate, Echo};
pub use matrix::{
    load_transfer_matrix, synthesize_transfer_matrix, CrosstalkProfile, Normalization, TransferMatrix, WORST_MODE,
    WORST_MODE_CROSSTALK_DB,
};
pub use tdm::{
    gate, jones_matrices, pair_polarizations, tdm_combine, DualPol, JonesMode, JonesSpec, SlotEntry, TdmCombiner,
    TdmPlan,
};

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

pub const MIN_MODES: usize = 2;
pub const MAX_MODES: usize = 16;

/// Ordered waveguide mode labels `TE0 .. TE{n-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSet {
    labels: Vec<String>,
}

impl ModeSet {
    pub fn new(count: usize) -> Result<Self> {
        if !(MIN_MODES..=MAX_MODES).contains(&count) {
            return Err(Error::invalid(format!(
                "mode count {count} outside {MIN_MODES}..={MAX_MODES}"
            )));
        }
        Ok(Self {
            labels: (0..count).map(mode_label).collect(),
        })
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

pub fn mode_label(index: usize) -> String {
    format!("TE{index}")
}

/// Everything that defines one optical path realization.
#[derive(Debug, Clone)]
pub struct LinkModel {
    pub matrix: TransferMatrix,
    /// Per-mode loss in dB (positive numbers attenuate).
    pub mdl_db: Vec<f64>,
    /// Per-mode launch power in dB relative to unit power.
    pub launch_power_db: Vec<f64>,
    pub decorrelation_delay: f64,
    pub plan: TdmPlan,
    pub jones: JonesSpec,
    pub snr_db: f64,
    pub linewidth: f64,
    pub freq_offset: f64,
    pub echoes: Vec<Echo>,
}

impl LinkModel {
    pub fn validate(&self) -> Result<()> {
        let n = self.matrix.dim();
        if self.mdl_db.len() != n || self.launch_power_db.len() != n {
            return Err(Error::invalid(format!(
                "per-mode vectors must have {n} entries (mdl {}, launch {})",
                self.mdl_db.len(),
                self.launch_power_db.len()
            )));
        }
        if self.plan.mode_count() != n {
            return Err(Error::invalid("TDM plan does not match the mode count"));
        }
        if !(self.decorrelation_delay >= 0.0) {
            return Err(Error::invalid("decorrelation delay must be >= 0"));
        }
        Ok(())
    }

    /// Spread (max - min) of the per-mode loss vector.
    pub fn mdl_spread_db(&self) -> f64 {
        let max = self.mdl_db.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.mdl_db.iter().cloned().fold(f64::MAX, f64::min);
        max - min
    }

    /// Memoryless mode-domain matrix `diag(loss) * M * diag(launch)`, using
    /// the passivity-normalized chip matrix.
    pub fn mode_matrix(&self) -> DMatrix<Complex64> {
        let m = self.matrix.passive();
        let n = m.dim();
        DMatrix::from_fn(n, n, |i, j| {
            let g_out = 10f64.powf(-self.mdl_db[i] / 20.0);
            let g_in = 10f64.powf(self.launch_power_db[j] / 20.0);
            m.entries[(i, j)] * g_out * g_in
        })
    }

    /// End-to-end memoryless matrix from transmitted modes to the
    /// `2 * slots` receiver tributaries (slot-major, X before Y).
    pub fn system_matrix(&self) -> DMatrix<Complex64> {
        let modes = self.mode_matrix();
        let jones = jones_matrices(&self.plan, &self.jones);
        let n = modes.ncols();
        let mut out = DMatrix::zeros(2 * self.plan.slot_count(), n);
        for (k, entry) in self.plan.slots().iter().enumerate() {
            let u = &jones[k];
            for col in 0..n {
                let a = entry.x.map_or(Complex64::new(0.0, 0.0), |m| modes[(m, col)]);
                let b = entry.y.map_or(Complex64::new(0.0, 0.0), |m| modes[(m, col)]);
                out[(2 * k, col)] = u[(0, 0)] * a + u[(0, 1)] * b;
                out[(2 * k + 1, col)] = u[(1, 0)] * a + u[(1, 1)] * b;
            }
        }
        out
    }
}
