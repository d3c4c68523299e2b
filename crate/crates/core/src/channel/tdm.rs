use crate::error::{Error, Result};
use crate::rng;
use crate::sigproc::Waveform;
use nalgebra::Matrix2;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Label used for the unused polarization position of an odd mode count.
pub const EMPTY_LABEL: &str = "EMPTY";

/// One dual-polarization time slot: the mode carried on X and on Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotEntry {
    pub x: Option<usize>,
    pub y: Option<usize>,
}

impl SlotEntry {
    pub fn get(&self, pol: usize) -> Option<usize> {
        if pol == 0 {
            self.x
        } else {
            self.y
        }
    }
}

/// A pair of X/Y polarization signals.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPol<T> {
    pub x: T,
    pub y: T,
}

impl<T> DualPol<T> {
    pub fn get(&self, pol: usize) -> &T {
        if pol == 0 {
            &self.x
        } else {
            &self.y
        }
    }

    pub fn get_mut(&mut self, pol: usize) -> &mut T {
        if pol == 0 {
            &mut self.x
        } else {
            &mut self.y
        }
    }
}

/// Mapping of modes onto dual-polarization time slots, with the gate
/// window length and the delay-line delays.
///
/// The TDM period is `slot_count * slot_duration` and each slot is gated
/// with duty cycle `1 / slot_count`; all slots are gated in the same window
/// (slot index 0) and then separated in time by `slot_delays`.
#[derive(Debug, Clone, PartialEq)]
pub struct TdmPlan {
    slots: Vec<SlotEntry>,
    slot_duration: f64,
    slot_delays: Vec<f64>,
}

impl TdmPlan {
    pub fn new(slots: Vec<SlotEntry>, slot_duration: f64, slot_delays: Vec<f64>) -> Result<Self> {
        let plan = Self {
            slots,
            slot_duration,
            slot_delays,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Pair consecutive modes, leaving mode `n / 2` alone (with an EMPTY
    /// partner) when `n` is odd. For 11 modes this gives (TE0,TE1),
    /// (TE2,TE3), (TE4,TE6), (TE7,TE8), (TE9,TE10), (TE5,EMPTY).
    /// Delays are exact multiples of the slot duration.
    pub fn default_for(modes: usize, slot_duration: f64) -> Result<Self> {
        if modes == 0 {
            return Err(Error::invalid("plan needs at least one mode"));
        }
        let lone = (modes % 2 == 1).then_some(modes / 2);
        let paired: Vec<usize> = (0..modes).filter(|&m| Some(m) != lone).collect();
        let mut slots: Vec<SlotEntry> = paired
            .chunks(2)
            .map(|c| SlotEntry {
                x: Some(c[0]),
                y: Some(c[1]),
            })
            .collect();
        if let Some(m) = lone {
            slots.push(SlotEntry { x: Some(m), y: None });
        }
        let delays = (0..slots.len()).map(|k| k as f64 * slot_duration).collect();
        Self::new(slots, slot_duration, delays)
    }

    /// Build from `[x, y]` label pairs such as `["TE5", "EMPTY"]`.
    pub fn from_labels(
        pairs: &[[String; 2]],
        modes: usize,
        slot_duration: f64,
        slot_delays: Option<Vec<f64>>,
    ) -> Result<Self> {
        let parse = |s: &str| -> Result<Option<usize>> {
            if s.eq_ignore_ascii_case(EMPTY_LABEL) {
                return Ok(None);
            }
            let idx = s
                .strip_prefix("TE")
                .and_then(|d| d.parse::<usize>().ok())
                .ok_or_else(|| Error::invalid(format!("unknown mode label '{s}'")))?;
            if idx >= modes {
                return Err(Error::invalid(format!("mode {s} outside 0..{modes}")));
            }
            Ok(Some(idx))
        };
        let slots = pairs
            .iter()
            .map(|[x, y]| {
                Ok(SlotEntry {
                    x: parse(x)?,
                    y: parse(y)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let delays = slot_delays.unwrap_or_else(|| (0..slots.len()).map(|k| k as f64 * slot_duration).collect());
        let plan = Self::new(slots, slot_duration, delays)?;
        if plan.mode_count() != modes {
            return Err(Error::invalid(format!(
                "plan carries {} modes, expected {modes}",
                plan.mode_count()
            )));
        }
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots.is_empty() {
            return Err(Error::invalid("plan needs at least one slot"));
        }
        if !(self.slot_duration > 0.0 && self.slot_duration.is_finite()) {
            return Err(Error::invalid("slot duration must be positive"));
        }
        let mut seen = Vec::new();
        let mut empties = 0;
        for (k, s) in self.slots.iter().enumerate() {
            if s.x.is_none() && s.y.is_none() {
                return Err(Error::invalid(format!("slot {k} carries no mode")));
            }
            for m in [s.x, s.y] {
                match m {
                    Some(m) if seen.contains(&m) => return Err(Error::invalid(format!("mode TE{m} appears twice"))),
                    Some(m) => seen.push(m),
                    None => empties += 1,
                }
            }
        }
        let n = seen.len();
        if (0..n).any(|m| !seen.contains(&m)) {
            return Err(Error::invalid("plan modes must be TE0..TE{n-1} without gaps"));
        }
        if empties != n % 2 {
            return Err(Error::invalid(format!(
                "{n} modes need exactly {} EMPTY positions, found {empties}",
                n % 2
            )));
        }
        if self.slot_delays.len() != self.slots.len() {
            return Err(Error::invalid("one delay per slot is required"));
        }
        if self.slot_delays.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::invalid("slot delays must be finite and >= 0"));
        }
        let tol = 1e-9 * self.slot_duration;
        for (k, w) in self.slot_delays.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::invalid("slot delays must be strictly increasing"));
            }
            if w[1] - w[0] < self.slot_duration - tol {
                return Err(Error::invalid(format!(
                    "slots {k} and {} are closer than one slot duration",
                    k + 1
                )));
            }
        }
        let span = self.slot_delays.last().unwrap() - self.slot_delays[0] + self.slot_duration;
        if span > self.period() + tol {
            return Err(Error::invalid("slot delays do not fit in one TDM period"));
        }
        Ok(())
    }

    pub fn slots(&self) -> &[SlotEntry] {
        &self.slots
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Number of modes carried (non-EMPTY positions).
    pub fn mode_count(&self) -> usize {
        self.slots
            .iter()
            .map(|s| s.x.is_some() as usize + s.y.is_some() as usize)
            .sum()
    }

    pub fn slot_duration(&self) -> f64 {
        self.slot_duration
    }

    pub fn slot_delays(&self) -> &[f64] {
        &self.slot_delays
    }

    pub fn period(&self) -> f64 {
        self.slot_duration * self.slots.len() as f64
    }

    pub fn duty(&self) -> f64 {
        1.0 / self.slots.len() as f64
    }

    /// `(slot, pol)` position carrying `mode`.
    pub fn position_of(&self, mode: usize) -> Option<(usize, usize)> {
        self.slots.iter().enumerate().find_map(|(k, s)| {
            if s.x == Some(mode) {
                Some((k, 0))
            } else if s.y == Some(mode) {
                Some((k, 1))
            } else {
                None
            }
        })
    }

    /// Label pairs, the inverse of [`TdmPlan::from_labels`].
    pub fn labels(&self) -> Vec<[String; 2]> {
        let name = |m: Option<usize>| m.map_or(EMPTY_LABEL.to_string(), super::mode_label);
        self.slots.iter().map(|s| [name(s.x), name(s.y)]).collect()
    }

    /// Same plan with a different slot duration, delays rescaled.
    pub fn with_slot_duration(&self, slot_duration: f64) -> Result<Self> {
        let scale = slot_duration / self.slot_duration;
        Self::new(
            self.slots.clone(),
            slot_duration,
            self.slot_delays.iter().map(|d| d * scale).collect(),
        )
    }
}

/// How the per-slot polarization rotation is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JonesMode {
    Identity,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JonesSpec {
    pub mode: JonesMode,
    pub seed: u64,
    /// Keep the lone (mode + EMPTY) slot unrotated, as if its polarization
    /// controller were aligned to the receiver's X axis.
    pub align_lone_slot: bool,
}

impl JonesSpec {
    pub fn identity() -> Self {
        Self {
            mode: JonesMode::Identity,
            seed: 0,
            align_lone_slot: true,
        }
    }

    pub fn random(seed: u64) -> Self {
        Self {
            mode: JonesMode::Random,
            seed,
            align_lone_slot: true,
        }
    }
}

/// Haar-distributed 2x2 unitary: a uniform point on the 3-sphere gives an
/// SU(2) element, times a uniform global phase.
fn haar_unitary(r: &mut rng::Rng) -> Matrix2<Complex64> {
    let g: Vec<f64> = (0..4).map(|_| StandardNormal.sample(r)).collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let a = Complex64::new(g[0], g[1]) / norm;
    let b = Complex64::new(g[2], g[3]) / norm;
    let phase = rng::uniform_phase(r);
    Matrix2::new(a, b, -b.conj(), a.conj()) * phase
}

/// One Jones matrix per slot.
pub fn jones_matrices(plan: &TdmPlan, spec: &JonesSpec) -> Vec<Matrix2<Complex64>> {
    plan.slots()
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let lone = s.x.is_none() || s.y.is_none();
            match spec.mode {
                JonesMode::Identity => Matrix2::identity(),
                JonesMode::Random if lone && spec.align_lone_slot => Matrix2::identity(),
                JonesMode::Random => haar_unitary(&mut rng::rng_for(spec.seed, "jones", k as u64)),
            }
        })
        .collect()
}

/// Combine modes into dual-polarization slot signals and apply each slot's
/// Jones matrix. EMPTY positions are zero waveforms.
pub fn pair_polarizations(wfs: &[Waveform], plan: &TdmPlan, jones: &JonesSpec) -> Result<Vec<DualPol<Waveform>>> {
    plan.validate()?;
    if wfs.len() != plan.mode_count() {
        return Err(Error::invalid(format!(
            "{} waveforms for a plan with {} modes",
            wfs.len(),
            plan.mode_count()
        )));
    }
    let len = wfs[0].len();
    let rate = wfs[0].sample_rate;
    if wfs.iter().any(|w| w.len() != len || w.sample_rate != rate) {
        return Err(Error::invalid("mode waveforms must share length and rate"));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mats = jones_matrices(plan, jones);
    Ok(plan
        .slots()
        .iter()
        .zip(mats)
        .enumerate()
        .map(|(k, (s, u))| {
            let a = s.x.map(|m| &wfs[m].samples);
            let b = s.y.map(|m| &wfs[m].samples);
            let mix = |c0: Complex64, c1: Complex64| -> Vec<Complex64> {
                (0..len)
                    .map(|n| {
                        let va = a.map_or(zero, |v| v[n]);
                        let vb = b.map_or(zero, |v| v[n]);
                        c0 * va + c1 * vb
                    })
                    .collect()
            };
            DualPol {
                x: Waveform {
                    samples: mix(u[(0, 0)], u[(0, 1)]),
                    sample_rate: rate,
                    label: format!("slot{k}-X"),
                },
                y: Waveform {
                    samples: mix(u[(1, 0)], u[(1, 1)]),
                    sample_rate: rate,
                    label: format!("slot{k}-Y"),
                },
            }
        })
        .collect())
}

/// Zero every sample outside the gate window
/// `[slot_index * duty * period, (slot_index + 1) * duty * period)` taken
/// modulo `period`. `baud` only serves the minimum-window check.
pub fn gate(wf: &Waveform, duty: f64, period: f64, slot_index: usize, baud: f64) -> Result<Waveform> {
    if !(duty > 0.0 && duty <= 1.0) {
        return Err(Error::invalid(format!("duty must be in (0, 1], got {duty}")));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::invalid(format!("period must be positive, got {period}")));
    }
    let window_symbols = duty * period * baud;
    if window_symbols < 10.0 {
        return Err(Error::DegenerateWindow { window_symbols });
    }
    if duty == 1.0 {
        return Ok(wf.clone());
    }
    let fs = wf.sample_rate;
    let period_s = period * fs;
    let lo = slot_index as f64 * duty * period_s;
    let hi = lo + duty * period_s;
    let eps = 1e-9;
    let samples = wf
        .samples
        .iter()
        .enumerate()
        .map(|(n, &v)| {
            let pos = (n as f64).rem_euclid(period_s);
            // windows beyond one period wrap around
            let lo_w = lo.rem_euclid(period_s);
            let inside = if lo_w + (hi - lo) <= period_s + eps {
                pos >= lo_w - eps && pos < lo_w + (hi - lo) - eps
            } else {
                pos >= lo_w - eps || pos < lo_w + (hi - lo) - period_s - eps
            };
            if inside {
                v
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(wf.with_samples(samples))
}

/// Number of integer sample positions shared by two cyclic windows of
/// `width` samples starting at integer positions `a` and `b` on a circle of
/// `period` samples.
fn cyclic_overlap(a: usize, b: usize, width: usize, period: usize) -> usize {
    let d = (b + period - a % period) % period;
    width.saturating_sub(d) + (d + width).saturating_sub(period)
}

/// Incremental delay-line combiner. Each slot's content (one gate window of
/// a periodic slot signal) is delayed by its plan delay plus an optional
/// jitter in samples and added into a single cyclic TDM record. Fractional
/// delays interpolate the periodic slot signal (band-limited) and move the
/// window edges to the next integer sample, so adjacent windows overlap or
/// leave a gap of at most one sample for jitter below half a sample.
#[derive(Debug, Clone)]
pub struct TdmCombiner {
    sample_rate: f64,
    period: usize,
    window: usize,
    delays: Vec<f64>,
    guard: usize,
    placed: Vec<(usize, usize)>,
    record: DualPol<Vec<Complex64>>,
}

impl TdmCombiner {
    pub fn new(plan: &TdmPlan, sample_rate: f64, guard: usize) -> Result<Self> {
        let window_f = plan.slot_duration() * sample_rate;
        let window = window_f.round() as usize;
        if window == 0 || (window_f - window as f64).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "slot duration is {window_f} samples; it must be a whole number"
            )));
        }
        let period = window * plan.slot_count();
        let zero = Complex64::new(0.0, 0.0);
        Ok(Self {
            sample_rate,
            period,
            window,
            delays: plan.slot_delays().iter().map(|d| d * sample_rate).collect(),
            guard,
            placed: Vec::new(),
            record: DualPol {
                x: vec![zero; period],
                y: vec![zero; period],
            },
        })
    }

    pub fn period_samples(&self) -> usize {
        self.period
    }

    pub fn window_samples(&self) -> usize {
        self.window
    }

    /// Add slot `index`, whose X/Y signals hold exactly one gate window
    /// (one period of the slot's periodic signal).
    pub fn add_slot(&mut self, index: usize, slot: &DualPol<Waveform>, jitter: f64) -> Result<()> {
        if index >= self.delays.len() {
            return Err(Error::invalid(format!("slot {index} not in plan")));
        }
        for wf in [&slot.x, &slot.y] {
            if wf.len() != self.window {
                return Err(Error::invalid(format!(
                    "slot {index} has {} samples; the gate window is {}",
                    wf.len(),
                    self.window
                )));
            }
            if (wf.sample_rate - self.sample_rate).abs() > 1e-9 * self.sample_rate {
                return Err(Error::invalid("slot sample rate differs from the combiner's"));
            }
        }
        if !(jitter.abs() < 1.0) {
            return Err(Error::invalid("jitter must be below one sample"));
        }
        let delay = self.delays[index] + jitter;
        let floor = delay.floor();
        let frac = delay - floor;
        // first integer sample inside [delay, delay + window)
        let start = if frac > 1e-12 { floor + 1.0 } else { floor } as i64;
        let start_mod = start.rem_euclid(self.period as i64) as usize;
        for &(other, other_start) in &self.placed {
            let ov = cyclic_overlap(other_start, start_mod, self.window, self.period);
            if ov > self.guard {
                return Err(Error::Overlap {
                    first: other,
                    second: index,
                    samples: ov,
                    guard: self.guard,
                });
            }
        }
        self.placed.push((index, start_mod));
        let base = floor as i64;
        for pol in 0..2 {
            let src = &slot.get(pol).samples;
            let shifted = if frac > 1e-12 {
                crate::fft::cyclic_delay(src, frac)
            } else {
                src.clone()
            };
            let dst = self.record.get_mut(pol);
            for i in 0..self.window as i64 {
                let n = start + i;
                let m = (n - base).rem_euclid(self.window as i64) as usize;
                dst[n.rem_euclid(self.period as i64) as usize] += shifted[m];
            }
        }
        Ok(())
    }

    pub fn finish(self) -> DualPol<Waveform> {
        let rate = self.sample_rate;
        DualPol {
            x: Waveform {
                samples: self.record.x,
                sample_rate: rate,
                label: "tdm-X".into(),
            },
            y: Waveform {
                samples: self.record.y,
                sample_rate: rate,
                label: "tdm-Y".into(),
            },
        }
    }
}

/// Delay each slot by its plan delay (plus `jitter[k]` samples, if given)
/// and sum into one TDM record. Slot signals hold one gate window each.
pub fn tdm_combine(
    slots: &[DualPol<Waveform>],
    plan: &TdmPlan,
    jitter: &[f64],
    guard: usize,
) -> Result<DualPol<Waveform>> {
    if slots.len() != plan.slot_count() {
        return Err(Error::invalid(format!(
            "{} slot signals for a {}-slot plan",
            slots.len(),
            plan.slot_count()
        )));
    }
    if !jitter.is_empty() && jitter.len() != slots.len() {
        return Err(Error::invalid("jitter needs one entry per slot"));
    }
    let rate = slots[0].x.sample_rate;
    let mut comb = TdmCombiner::new(plan, rate, guard)?;
    for (k, s) in slots.iter().enumerate() {
        comb.add_slot(k, s, jitter.get(k).copied().unwrap_or(0.0))?;
    }
    Ok(comb.finish())
}
