use super::{Tributary, TributarySet};
use crate::channel::{DualPol, TdmPlan};
use crate::error::{Error, Result};
use crate::fft;
use crate::sigproc::{resample, RrcFilter, SymbolFrame, Waveform, DEFAULT_RRC_SPAN};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StitchConfig {
    /// Fine-alignment search half-width around each nominal window start,
    /// in samples at 2 samples/symbol.
    pub search_samples: usize,
    /// Minimum normalized training correlation for a slot to count as found.
    pub threshold: f64,
    /// Number of training symbols used for the alignment metric.
    pub sync_symbols: usize,
    pub rolloff: f64,
    pub rrc_span: usize,
}

impl Default for StitchConfig {
    fn default() -> Self {
        Self {
            search_samples: 2,
            threshold: 0.5,
            sync_symbols: 4096,
            rolloff: 0.01,
            rrc_span: DEFAULT_RRC_SPAN,
        }
    }
}

/// Fine alignment found for one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotAlignment {
    /// Offset from the nominal window start, in samples at 2 samples/symbol.
    pub offset: isize,
    /// Normalized training correlation at that offset (1 = perfect).
    pub metric: f64,
}

/// Normalized projection of the received slot (both polarizations) onto
/// the training of the modes it carries. Equals one when the slot holds
/// exactly a unitary mix of those modes, whatever the Jones rotation.
fn slot_metric(rx: &[Vec<Complex64>; 2], refs: &[&[Complex64]]) -> f64 {
    let rx_energy: f64 = rx.iter().flatten().map(|v| v.norm_sqr()).sum();
    if rx_energy == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for pol in rx {
        for r in refs {
            let c: Complex64 = pol.iter().zip(r.iter()).map(|(a, b)| a * b.conj()).sum();
            let e: f64 = r.iter().map(|v| v.norm_sqr()).sum();
            if e > 0.0 {
                acc += c.norm_sqr() / e;
            }
        }
    }
    acc / rx_energy
}

/// Cut a TDM record back into per-slot, per-polarization tributaries.
///
/// The record (any sample rate) is resampled to 2 samples/symbol. For each
/// slot the window start is searched within `search_samples` of its nominal
/// position by correlating against the training prefix of the slot's
/// modes; the window is then cut at the best offset, which removes the
/// small gaps and overlaps left by inexact delay lines, and matched
/// filtered as one period of a periodic signal. `references` holds the
/// known frame of every mode, indexed by mode.
pub fn tdm_stitch(
    record: &DualPol<Waveform>,
    plan: &TdmPlan,
    references: &[SymbolFrame],
    cfg: &StitchConfig,
) -> Result<TributarySet> {
    if references.len() != plan.mode_count() {
        return Err(Error::invalid(format!(
            "{} reference frames for {} modes",
            references.len(),
            plan.mode_count()
        )));
    }
    let baud = references[0].baud;
    let fs = 2.0 * baud;
    let to_two = |wf: &Waveform| -> Result<Waveform> {
        if (wf.sample_rate - fs).abs() > 1e-9 * fs {
            resample(wf, fs)
        } else {
            Ok(wf.clone())
        }
    };
    let rx = DualPol {
        x: to_two(&record.x)?,
        y: to_two(&record.y)?,
    };
    let window_f = plan.slot_duration() * fs;
    let window = window_f.round() as usize;
    if window < 2 || (window_f - window as f64).abs() > 1e-6 || window % 2 != 0 {
        return Err(Error::invalid(format!(
            "slot window of {window_f} samples is not a whole number of symbols"
        )));
    }
    let period = window * plan.slot_count();
    let len = rx.x.len();
    if len < period || rx.y.len() != len {
        return Err(Error::invalid(format!(
            "record of {len} samples is shorter than one TDM period ({period})"
        )));
    }
    let symbols = window / 2;
    if references.iter().any(|r| r.len() != symbols) {
        return Err(Error::invalid(format!(
            "reference frames must hold one slot ({symbols} symbols)"
        )));
    }
    let filter = RrcFilter::new(cfg.rolloff, cfg.rrc_span, 2)?;
    let mf = DualPol {
        x: fft::cyclic_filter(&rx.x.samples, filter.taps()),
        y: fft::cyclic_filter(&rx.y.samples, filter.taps()),
    };
    let sync_len = cfg.sync_symbols.min(symbols);
    let g = cfg.search_samples as isize;
    let at = |n: isize| n.rem_euclid(len as isize) as usize;

    let mut tributaries = Vec::with_capacity(2 * plan.slot_count());
    let mut alignment = Vec::with_capacity(plan.slot_count());
    for (k, entry) in plan.slots().iter().enumerate() {
        let nominal = (plan.slot_delays()[k] * fs).round() as isize;
        let refs: Vec<&[Complex64]> = [entry.x, entry.y]
            .iter()
            .flatten()
            .map(|&m| &references[m].symbols[..sync_len])
            .collect();
        let mut best = SlotAlignment {
            offset: 0,
            metric: f64::NEG_INFINITY,
        };
        for o in -g..=g {
            let start = nominal + o;
            let grab =
                |v: &[Complex64]| -> Vec<Complex64> { (0..sync_len as isize).map(|i| v[at(start + 2 * i)]).collect() };
            let metric = slot_metric(&[grab(&mf.x), grab(&mf.y)], &refs);
            if metric > best.metric {
                best = SlotAlignment { offset: o, metric };
            }
        }
        if !(best.metric >= cfg.threshold) {
            return Err(Error::SyncFailure {
                slot: k,
                peak: best.metric.max(0.0),
                threshold: cfg.threshold,
            });
        }
        let start = nominal + best.offset;
        for pol in 0..2 {
            let src = &rx.get(pol).samples;
            let seg: Vec<Complex64> = (0..window as isize).map(|i| src[at(start + i)]).collect();
            tributaries.push(Tributary {
                slot: k,
                pol,
                mode: entry.get(pol),
                symbols: filter.matched_filter(&seg, 0),
            });
        }
        alignment.push(best);
    }
    Ok(TributarySet {
        tributaries,
        baud,
        alignment,
    })
}
