//! Receiver DSP: TDM stitching back into per-slot tributaries, frame and
//! frequency synchronization, the frequency-domain MIMO LMS equalizer (and
//! its time-domain oracle), phase tracking, and channel estimation.

mod equalizer;
mod estimate;
mod phase;
mod stitch;
mod sync;

pub use equalizer::{
    fd_lms_equalize, fd_lms_streams, td_lms_reference, AfterTraining, EqualizerConfig, EqualizerState,
    EqualizerStructure, StreamOutput, TdLmsState,
};
pub use estimate::{
    estimate_intensity_transfer_matrix, extract_impulse_response, least_squares_channel, ChannelEstimate,
    ImpulseResponse, DEFAULT_ESTIMATE_TAPS,
};
pub use phase::phase_track;
pub use stitch::{tdm_stitch, SlotAlignment, StitchConfig};
pub use sync::{estimate_freq_offset, frame_sync};

use crate::channel::TdmPlan;
use crate::error::{Error, Result};
use num_complex::Complex64;

/// One received polarization of one time slot, symbol-spaced.
#[derive(Debug, Clone, PartialEq)]
pub struct Tributary {
    pub slot: usize,
    /// 0 = X, 1 = Y.
    pub pol: usize,
    /// Mode nominally carried here; `None` for the EMPTY position.
    pub mode: Option<usize>,
    pub symbols: Vec<Complex64>,
}

impl Tributary {
    pub fn label(&self) -> String {
        let pol = if self.pol == 0 { "X" } else { "Y" };
        match self.mode {
            Some(m) => format!("slot{}-{pol} (TE{m})", self.slot),
            None => format!("slot{}-{pol} (EMPTY)", self.slot),
        }
    }
}

/// All `2 * slots` tributaries of one TDM record, slot-major with X before Y.
#[derive(Debug, Clone, PartialEq)]
pub struct TributarySet {
    pub tributaries: Vec<Tributary>,
    pub baud: f64,
    /// Per-slot fine alignment found while stitching (empty when the set
    /// was built directly from symbols).
    pub alignment: Vec<SlotAlignment>,
}

impl TributarySet {
    /// Wrap per-position symbol streams (`2 * slots` of them, slot-major).
    pub fn from_symbols(plan: &TdmPlan, streams: Vec<Vec<Complex64>>, baud: f64) -> Result<Self> {
        if streams.len() != 2 * plan.slot_count() {
            return Err(Error::invalid(format!(
                "{} streams for {} slot positions",
                streams.len(),
                2 * plan.slot_count()
            )));
        }
        let len = streams[0].len();
        if streams.iter().any(|s| s.len() != len) {
            return Err(Error::invalid("tributaries must have equal lengths"));
        }
        let tributaries = streams
            .into_iter()
            .enumerate()
            .map(|(t, symbols)| Tributary {
                slot: t / 2,
                pol: t % 2,
                mode: plan.slots()[t / 2].get(t % 2),
                symbols,
            })
            .collect();
        Ok(Self {
            tributaries,
            baud,
            alignment: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.tributaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tributaries.is_empty()
    }

    pub fn symbols_per_tributary(&self) -> usize {
        self.tributaries.first().map_or(0, |t| t.symbols.len())
    }

    pub fn mode_count(&self) -> usize {
        self.tributaries.iter().filter(|t| t.mode.is_some()).count()
    }

    pub fn for_mode(&self, mode: usize) -> Option<&Tributary> {
        self.tributaries.iter().find(|t| t.mode == Some(mode))
    }

    pub fn empty_tributaries(&self) -> impl Iterator<Item = &Tributary> {
        self.tributaries.iter().filter(|t| t.mode.is_none())
    }

    /// Equalizer inputs ordered by nominal mode (TE0 first), optionally
    /// followed by the EMPTY tributaries. Returns the streams and the mode
    /// each carries.
    pub fn equalizer_inputs(&self, include_empty: bool) -> (Vec<&[Complex64]>, Vec<Option<usize>>) {
        let n = self.mode_count();
        let mut streams = Vec::new();
        let mut modes = Vec::new();
        for m in 0..n {
            if let Some(t) = self.for_mode(m) {
                streams.push(t.symbols.as_slice());
                modes.push(Some(m));
            }
        }
        if include_empty {
            for t in self.empty_tributaries() {
                streams.push(t.symbols.as_slice());
                modes.push(None);
            }
        }
        (streams, modes)
    }

    /// Reorder so every tributary's `mode` follows `perm` (mode `m` becomes
    /// `perm[m]`). Used to check permutation invariance.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for t in &mut out.tributaries {
            t.mode = t.mode.map(|m| perm[m]);
        }
        out
    }
}
