//! Full link runs: transmitter, optical path, TDM receiver front end, MIMO
//! equalization and metrics, plus sweeps and matrix characterization.

use crate::channel::{
    add_reflection_echo, apply_mode_coupling, delay_decorrelate, mode_label, pair_polarizations,
    synthesize_transfer_matrix, DualPol, Echo, JonesSpec, LinkModel, TdmCombiner, TransferMatrix,
};
use crate::config::{ChannelSource, ExperimentConfig, PhaseModel, PhaseTracking};
use crate::error::{Error, Result, Stage, StageExt};
use crate::io::IntensityTable;
use crate::metrics::{self, BerEntry, BerReport, CapacityReport};
use crate::rng;
use crate::rxdsp::{
    estimate_freq_offset, estimate_intensity_transfer_matrix, extract_impulse_response, fd_lms_equalize, phase_track,
    tdm_stitch, EqualizerConfig, SlotAlignment, StitchConfig, TributarySet,
};
use crate::sigproc::{
    add_awgn, add_freq_offset, add_phase_noise, demap_symbols, generate_prbs, map_bits, resample, BitSequence,
    RrcFilter, SymbolFrame, Waveform,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use std::path::Path;

/// Transmitted per-mode frames (after delay decorrelation) and the optical
/// waveforms that carry them.
#[derive(Debug, Clone)]
pub struct Transmitted {
    /// Known symbols of each mode as launched; the receiver's references.
    pub frames: Vec<SymbolFrame>,
    pub bits: Vec<BitSequence>,
    pub waveforms: Vec<Waveform>,
}

/// Generate, map, shape and delay-decorrelate every mode.
pub fn transmit(cfg: &ExperimentConfig) -> Result<Transmitted> {
    let s = &cfg.signal;
    let n = cfg.channel.modes;
    let len = cfg.frame_symbols();
    let bps = s.format.bits_per_symbol();
    let data_seed = cfg.seeds.data();
    let frames: Vec<SymbolFrame> = (0..n)
        .map(|m| {
            let seed = if s.independent_data {
                rng::derive_seed(data_seed, &[m as u64])
            } else {
                data_seed
            };
            let bits = generate_prbs(seed, len * bps, s.prbs)?;
            map_bits(&bits, s.format, s.baud)
        })
        .collect::<Result<_>>()?;
    let filter = RrcFilter::new(s.rolloff, s.rrc_span, s.sps)?;
    let shaped: Vec<Waveform> = frames
        .iter()
        .enumerate()
        .map(|(m, f)| {
            let mut wf = filter.shape(f)?;
            wf.label = mode_label(m);
            Ok(wf)
        })
        .collect::<Result<_>>()?;
    let waveforms = delay_decorrelate(&shaped, cfg.channel.decorrelation_delay)?;

    // the decorrelation delay must be whole symbols so references stay on
    // the symbol grid
    let fs = s.baud * s.sps as f64;
    let frames = frames
        .into_iter()
        .enumerate()
        .map(|(k, f)| {
            let shift = (k as f64 * cfg.channel.decorrelation_delay * fs).round() as usize;
            if shift % s.sps != 0 {
                return Err(Error::Config(format!(
                    "decorrelation delay of {shift} samples for mode {k} is not a whole number of symbols"
                )));
            }
            let sym = (shift / s.sps) % len;
            Ok(f.rotated_left((len - sym) % len))
        })
        .collect::<Result<Vec<_>>>()?;
    let bits = frames
        .iter()
        .map(|f| demap_symbols(&f.symbols, f.format))
        .collect::<Result<_>>()?;
    Ok(Transmitted {
        frames,
        bits,
        waveforms,
    })
}

fn zero_phases(m: &TransferMatrix) -> Result<TransferMatrix> {
    let mut out = TransferMatrix::new(m.wavelength_nm, m.entries.map(|v| Complex64::new(v.norm(), 0.0)))?;
    out.normalize_passive();
    Ok(out)
}

/// Chip matrix for one wavelength.
pub fn link_matrix(cfg: &ExperimentConfig, wavelength_nm: f64, index: usize) -> Result<TransferMatrix> {
    let c = &cfg.channel;
    let m = match c.source {
        ChannelSource::Identity => TransferMatrix::identity(c.modes, wavelength_nm),
        ChannelSource::Synthesized => synthesize_transfer_matrix(&c.profile(), wavelength_nm, cfg.seeds.matrix())?,
        ChannelSource::File => {
            let path = &c.matrix_files[index];
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let table = IntensityTable::parse(&text)?;
            let phase_seed = rng::derive_seed(cfg.seeds.matrix(), &[index as u64]);
            TransferMatrix::from_intensity(&table, phase_seed)?.passive()
        }
    };
    if m.dim() != c.modes {
        return Err(Error::Config(format!(
            "matrix at {wavelength_nm} nm is {}x{} but channel.modes = {}",
            m.dim(),
            m.dim(),
            c.modes
        )));
    }
    match c.phases {
        PhaseModel::Random => Ok(m),
        PhaseModel::Zero => zero_phases(&m),
    }
}

/// Per-mode loss vector of a link through `chip`: the configured vector if
/// there is one, otherwise the linear ramp scaled so that the link MDL
/// (singular-value spread of `diag(loss) * chip * diag(launch)`) equals
/// `mdl_spread_db`. A chip that already exceeds the target on its own gets
/// no extra loss.
pub fn mdl_vector(cfg: &ExperimentConfig, chip: &TransferMatrix) -> Result<Vec<f64>> {
    let c = &cfg.channel;
    if let Some(v) = &c.mdl_db {
        return Ok(v.clone());
    }
    let ramp = c.mdl_ramp();
    let m = chip.passive();
    let launch: Vec<f64> = c.launch_vector().iter().map(|db| 10f64.powf(db / 20.0)).collect();
    let mdl_at = |scale: f64| -> Result<f64> {
        let a = DMatrix::from_fn(m.dim(), m.dim(), |i, j| {
            m.entries[(i, j)] * 10f64.powf(-scale * ramp[i] / 20.0) * launch[j]
        });
        metrics::mdl_db(&a)
    };
    let target = c.mdl_spread_db;
    if mdl_at(0.0)? >= target {
        return Ok(vec![0.0; ramp.len()]);
    }
    let (mut lo, mut hi) = (0.0, target.max(1.0));
    while mdl_at(hi)? < target {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Config(format!(
                "cannot reach an MDL of {target} dB with a per-mode loss ramp"
            )));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mdl_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let scale = 0.5 * (lo + hi);
    Ok(ramp.iter().map(|r| scale * r).collect())
}

/// Link model of run point (`wavelength`, `snr_db`).
pub fn link_model(
    cfg: &ExperimentConfig,
    wavelength_nm: f64,
    wavelength_index: usize,
    snr_db: f64,
) -> Result<LinkModel> {
    let plan = cfg.tdm_plan()?;
    let jones = JonesSpec {
        mode: cfg.tdm.jones,
        seed: cfg.seeds.jones(),
        align_lone_slot: cfg.tdm.align_lone_slot,
    };
    let matrix = link_matrix(cfg, wavelength_nm, wavelength_index)?;
    let link = LinkModel {
        mdl_db: mdl_vector(cfg, &matrix)?,
        matrix,
        launch_power_db: cfg.channel.launch_vector(),
        decorrelation_delay: cfg.channel.decorrelation_delay,
        plan,
        jones,
        snr_db,
        linewidth: cfg.impairments.linewidth,
        freq_offset: cfg.impairments.freq_offset,
        echoes: cfg
            .impairments
            .echoes
            .iter()
            .map(|e| Echo {
                delay: e.delay_symbols / cfg.signal.baud,
                level_db: e.level_db,
            })
            .collect(),
    };
    link.validate()?;
    Ok(link)
}

/// Per-slot delay-line error in transmitter samples.
pub fn slot_jitter(cfg: &ExperimentConfig, slots: usize) -> Vec<f64> {
    let t = &cfg.tdm;
    (0..slots)
        .map(|k| {
            let fixed = t.jitter_samples.get(k).copied().unwrap_or(0.0);
            let random = if t.random_jitter_samples > 0.0 {
                let mut r = rng::rng_for(cfg.seeds.jitter(), "slot-jitter", k as u64);
                (2.0 * r.random::<f64>() - 1.0) * t.random_jitter_samples
            } else {
                0.0
            };
            fixed + random
        })
        .collect()
}

/// Optical path and coherent receiver up to the digitized TDM record.
pub fn propagate(
    cfg: &ExperimentConfig,
    tx: &Transmitted,
    link: &LinkModel,
    noise_seed: u64,
) -> Result<DualPol<Waveform>> {
    let launched: Vec<Waveform> = tx
        .waveforms
        .iter()
        .zip(&link.launch_power_db)
        .map(|(wf, &p)| {
            let g = 10f64.powf(p / 20.0);
            wf.with_samples(wf.samples.iter().map(|s| s * g).collect())
        })
        .collect();
    let chip = link.matrix.passive();
    let coupled = apply_mode_coupling(&launched, &chip, &link.mdl_db).stage(Stage::Channel)?;
    let coupled = if link.echoes.is_empty() {
        coupled
    } else {
        coupled
            .iter()
            .map(|wf| add_reflection_echo(wf, &link.echoes))
            .collect::<Result<Vec<_>>>()
            .stage(Stage::Channel)?
    };
    let slots = pair_polarizations(&coupled, &link.plan, &link.jones).stage(Stage::Channel)?;

    let jitter = slot_jitter(cfg, link.plan.slot_count());
    let fs = cfg.signal.baud * cfg.signal.sps as f64;
    let mut comb = TdmCombiner::new(&link.plan, fs, cfg.tdm.guard_samples).stage(Stage::Tdm)?;
    for (k, s) in slots.iter().enumerate() {
        comb.add_slot(k, s, jitter[k]).stage(Stage::Tdm)?;
    }
    let record = comb.finish();

    let rx = |wf: &Waveform, pol: u64| -> Result<Waveform> {
        let wf = add_awgn(wf, link.snr_db, rng::derive_seed(noise_seed, &[pol]))?;
        // one laser: both polarizations share the phase walk
        let wf = add_phase_noise(&wf, link.linewidth, rng::derive_seed(noise_seed, &[rng::tag("laser")]))?;
        let wf = add_freq_offset(&wf, link.freq_offset)?;
        if cfg.impairments.dso_rate > 0.0 {
            resample(&wf, cfg.impairments.dso_rate)
        } else {
            Ok(wf)
        }
    };
    Ok(DualPol {
        x: rx(&record.x, 0).stage(Stage::Channel)?,
        y: rx(&record.y, 1).stage(Stage::Channel)?,
    })
}

/// Cut the record into tributaries and remove an estimated carrier offset
/// if configured. Returns the tributaries and the offset estimate.
pub fn receive(
    cfg: &ExperimentConfig,
    tx: &Transmitted,
    link: &LinkModel,
    record: &DualPol<Waveform>,
) -> Result<(TributarySet, Option<f64>)> {
    let stitch_cfg = StitchConfig {
        search_samples: cfg.tdm.search_samples,
        threshold: cfg.tdm.sync_threshold,
        sync_symbols: cfg.equalizer.training_symbols.min(4096),
        rolloff: cfg.signal.rolloff,
        rrc_span: cfg.signal.rrc_span,
    };
    let mut tribs = tdm_stitch(record, &link.plan, &tx.frames, &stitch_cfg).stage(Stage::Stitch)?;
    if !cfg.receiver.estimate_freq_offset {
        return Ok((tribs, None));
    }
    let format = cfg.signal.format;
    let mut estimates: Vec<f64> = tribs
        .tributaries
        .iter()
        .filter(|t| t.mode.is_some())
        .filter_map(|t| estimate_freq_offset(&t.symbols, format, tribs.baud).ok())
        .collect();
    if estimates.is_empty() {
        return Err(Error::EstimateUnreliable(
            "no tributary gave a frequency-offset estimate".into(),
        ))
        .stage(Stage::FrequencyOffset);
    }
    estimates.sort_by(|a, b| a.total_cmp(b));
    let f = estimates[estimates.len() / 2];
    let baud = tribs.baud;
    for t in &mut tribs.tributaries {
        for (n, s) in t.symbols.iter_mut().enumerate() {
            *s *= Complex64::from_polar(1.0, -std::f64::consts::TAU * f * n as f64 / baud);
        }
    }
    Ok((tribs, Some(f)))
}

/// Everything measured at one (wavelength, SNR) point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub wavelength_nm: f64,
    pub snr_db: f64,
    pub noise_seed: u64,
    pub ber: BerReport,
    pub alignment: Vec<SlotAlignment>,
    pub freq_offset_estimate: Option<f64>,
    pub mse_history: Vec<f64>,
    pub converged: bool,
    /// Least-squares estimate of the system intensity matrix (rows: the
    /// tributaries nominally carrying each mode; columns: transmitted modes).
    pub intensity_db: Option<DMatrix<f64>>,
    /// The same view computed from the true link, for comparison.
    pub true_intensity_db: DMatrix<f64>,
    pub impulse_profile_db: Option<Vec<f64>>,
    pub impulse_peak_lag: Option<usize>,
    /// MDL of the simulated link (chip, per-mode loss and launch powers).
    pub mdl_link_db: f64,
    /// MDL of the estimated channel.
    pub mdl_estimated_db: Option<f64>,
    /// Leading equalized payload symbols of every mode.
    pub constellation: Vec<Vec<Complex64>>,
    /// Non-fatal problems (skipped estimates).
    pub notes: Vec<String>,
}

impl PointResult {
    pub fn mean_ber(&self) -> f64 {
        self.ber.mean_ber()
    }
}

/// True tributary-domain intensity matrix in the estimator's row order.
fn true_intensity(link: &LinkModel) -> DMatrix<f64> {
    let sys = link.system_matrix();
    let n = link.plan.mode_count();
    let rows: Vec<usize> = (0..n)
        .map(|m| {
            let (slot, pol) = link.plan.position_of(m).expect("plan covers every mode");
            2 * slot + pol
        })
        .collect();
    let lin = DMatrix::from_fn(n, n, |i, j| sys[(rows[i], j)].norm_sqr());
    let max = lin.max();
    lin.map(|p| 10.0 * (p / max).log10())
}

/// Equalize, track phase and measure one received point.
pub fn evaluate(
    cfg: &ExperimentConfig,
    eq: &EqualizerConfig,
    tx: &Transmitted,
    link: &LinkModel,
    tribs: &TributarySet,
) -> Result<PointResult> {
    let (outputs, state) = fd_lms_equalize(tribs, &tx.frames, eq).stage(Stage::Equalizer)?;
    let train = eq.training_symbols;
    let block = cfg.receiver.phase_block;
    let tracked: Vec<SymbolFrame> = outputs
        .iter()
        .zip(&tx.frames)
        .map(|(y, r)| match cfg.receiver.phase_tracking {
            PhaseTracking::Off => Ok(y.clone()),
            PhaseTracking::Decision => phase_track(y, None, block),
            PhaseTracking::DataAided => phase_track(y, Some(r), block),
        })
        .collect::<Result<_>>()
        .stage(Stage::Equalizer)?;

    let bps = cfg.signal.format.bits_per_symbol();
    let mut per_mode: Vec<BerEntry> = Vec::with_capacity(tracked.len());
    let mut evm_percent = Vec::with_capacity(tracked.len());
    for (m, y) in tracked.iter().enumerate() {
        let decided = y.decide_bits().stage(Stage::Metrics)?;
        per_mode.push(metrics::count_ber(&decided, &tx.bits[m], train * bps).stage(Stage::Metrics)?);
        evm_percent
            .push(metrics::evm_slices(&y.symbols[train..], &tx.frames[m].symbols[train..]).stage(Stage::Metrics)?);
    }
    let constellation = tracked
        .iter()
        .map(|y| {
            y.symbols[train..]
                .iter()
                .take(cfg.output.constellation_points)
                .cloned()
                .collect()
        })
        .collect();

    let mut notes = Vec::new();
    let intensity =
        match estimate_intensity_transfer_matrix(&state, tribs, &tx.frames, train, cfg.receiver.estimate_taps) {
            Ok(est) => Some(est),
            Err(e) => {
                notes.push(format!("intensity matrix skipped: {e}"));
                None
            }
        };
    let impulse = match extract_impulse_response(&state) {
        Ok(ir) => Some(ir),
        Err(e) => {
            notes.push(format!("impulse response skipped: {e}"));
            None
        }
    };
    let mdl_estimated_db = intensity.as_ref().and_then(|est| {
        let dc = DMatrix::from_fn(est.h.len(), est.h[0].len(), |i, j| {
            est.h[i][j].iter().sum::<Complex64>()
        });
        metrics::mdl_db(&dc).ok()
    });
    let mdl_link_db = metrics::mdl_db(&link.mode_matrix()).unwrap_or(f64::INFINITY);
    Ok(PointResult {
        wavelength_nm: link.matrix.wavelength_nm,
        snr_db: link.snr_db,
        noise_seed: 0,
        ber: BerReport { per_mode, evm_percent },
        alignment: tribs.alignment.clone(),
        freq_offset_estimate: None,
        mse_history: state.mse_history.clone(),
        converged: state.converged,
        intensity_db: intensity.map(|e| e.intensity_db),
        true_intensity_db: true_intensity(link),
        impulse_peak_lag: impulse.as_ref().map(|i| i.peak_lag),
        impulse_profile_db: impulse.map(|i| i.intensity_profile_db),
        mdl_link_db,
        mdl_estimated_db,
        constellation,
        notes,
    })
}

/// Seed of the receiver noise at point `index` of a run.
pub fn point_noise_seed(cfg: &ExperimentConfig, index: usize) -> u64 {
    rng::derive_seed(cfg.seeds.noise(), &[index as u64])
}

/// A received point ready for (possibly repeated) equalization.
#[derive(Debug, Clone)]
pub struct ReceivedPoint {
    pub link: LinkModel,
    pub tribs: TributarySet,
    pub freq_offset_estimate: Option<f64>,
    pub noise_seed: u64,
}

/// Propagate and receive point `index` = (`wavelength_index`, `snr_db`).
pub fn simulate_point(
    cfg: &ExperimentConfig,
    tx: &Transmitted,
    wavelength_nm: f64,
    wavelength_index: usize,
    snr_db: f64,
    index: usize,
) -> Result<ReceivedPoint> {
    let link = link_model(cfg, wavelength_nm, wavelength_index, snr_db).stage(Stage::Channel)?;
    let noise_seed = point_noise_seed(cfg, index);
    let record = propagate(cfg, tx, &link, noise_seed)?;
    let (tribs, freq_offset_estimate) = receive(cfg, tx, &link, &record)?;
    Ok(ReceivedPoint {
        link,
        tribs,
        freq_offset_estimate,
        noise_seed,
    })
}

/// Self-describing result of a run: the configuration that produced it,
/// one entry per (wavelength, SNR) point and the capacity accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub points: Vec<PointResult>,
    pub capacity: CapacityReport,
}

impl RunResult {
    /// Mean of the per-point mean BERs.
    pub fn mean_ber(&self) -> f64 {
        self.points.iter().map(|p| p.mean_ber()).sum::<f64>() / self.points.len().max(1) as f64
    }
}

pub fn capacity(cfg: &ExperimentConfig) -> Result<CapacityReport> {
    let s = &cfg.signal;
    metrics::net_capacity(
        cfg.channel.modes,
        s.baud,
        s.format.bits_per_symbol(),
        metrics::DEFAULT_FEC_OVERHEAD,
    )?
    .with_bandwidths(metrics::DEFAULT_GRID_HZ, s.baud * (1.0 + s.rolloff))
}

/// Run every (wavelength, SNR) point of `cfg`. Points are independent and
/// computed concurrently; the result does not depend on scheduling.
pub fn run_simulation(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let tx = transmit(cfg).stage(Stage::Transmitter)?;
    let wavelengths = cfg.wavelengths()?;
    let grid: Vec<(usize, f64, f64)> = wavelengths
        .iter()
        .enumerate()
        .flat_map(|(w, &wl)| cfg.impairments.snr_db.iter().map(move |&snr| (w, wl, snr)))
        .collect();
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(index, &(w, wl, snr))| {
            let rx = simulate_point(cfg, &tx, wl, w, snr, index)?;
            let mut p = evaluate(cfg, &cfg.equalizer, &tx, &rx.link, &rx.tribs)?;
            p.noise_seed = rx.noise_seed;
            p.freq_offset_estimate = rx.freq_offset_estimate;
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunResult {
        config: cfg.clone(),
        points,
        capacity: capacity(cfg)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Wavelength,
    Snr,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wavelength" => Ok(SweepAxis::Wavelength),
            "snr" => Ok(SweepAxis::Snr),
            other => Err(Error::Config(format!(
                "unknown sweep axis '{other}' (expected wavelength or snr)"
            ))),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::Wavelength => "wavelength",
            SweepAxis::Snr => "snr",
        })
    }
}

#[derive(Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub seed: u64,
    pub result: Result<RunResult>,
}

/// Configuration of sweep point `index`: the swept axis set to `value`
/// and the master seed advanced by `index`.
pub fn sweep_point_config(cfg: &ExperimentConfig, axis: SweepAxis, value: f64, index: usize) -> ExperimentConfig {
    let mut c = cfg.clone();
    match axis {
        SweepAxis::Wavelength => c.channel.wavelengths_nm = vec![value],
        SweepAxis::Snr => c.impairments.snr_db = vec![value],
    }
    c.seeds.master = cfg.seeds.master.wrapping_add(index as u64);
    c
}

/// Independent runs along one axis. Failed points are kept, with their
/// error, and do not stop the sweep.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    if axis == SweepAxis::Wavelength && cfg.channel.source == ChannelSource::File {
        return Err(Error::Config(
            "wavelength sweeps need a synthesized or identity channel".into(),
        ));
    }
    cfg.validate()?;
    Ok(values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = sweep_point_config(cfg, axis, v, i);
            SweepPoint {
                value: v,
                seed: c.seeds.master,
                result: run_simulation(&c),
            }
        })
        .collect())
}

/// Crosstalk, insertion loss and MDL of one measured matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCharacterization {
    pub wavelength_nm: f64,
    pub labels: Vec<String>,
    /// Worst off-diagonal power relative to the through power, per row.
    pub crosstalk_db: Vec<f64>,
    pub insertion_loss_db: Vec<f64>,
    pub worst_mode: usize,
    pub mdl_db: f64,
}

/// Characterize intensity-matrix CSV files. MDL depends on the field
/// phases, which the files do not hold; they are drawn from `phase_seed`.
pub fn characterize<P: AsRef<Path>>(files: &[P], phase_seed: u64) -> Result<Vec<MatrixCharacterization>> {
    files
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p.as_ref())?;
            let table = IntensityTable::parse(&text)?;
            characterize_table(&table, phase_seed)
        })
        .collect()
}

pub fn characterize_table(table: &IntensityTable, phase_seed: u64) -> Result<MatrixCharacterization> {
    let m = TransferMatrix::from_intensity(table, phase_seed)?;
    let crosstalk_db = m.crosstalk_db();
    let worst_mode = (0..crosstalk_db.len())
        .max_by(|&a, &b| crosstalk_db[a].total_cmp(&crosstalk_db[b]))
        .unwrap_or(0);
    Ok(MatrixCharacterization {
        wavelength_nm: table.wavelength_nm,
        labels: table.labels.clone(),
        insertion_loss_db: m.insertion_loss_db(),
        crosstalk_db,
        worst_mode,
        mdl_db: metrics::mdl_from_matrix(&m)?,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::channel::JonesMode;

    /// Small, fast configuration: 4 modes, short frames.
    pub(crate) fn small(format: crate::sigproc::ModulationFormat) -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.signal.format = format;
        c.signal.payload_symbols = 4096;
        c.signal.rrc_span = 256;
        c.channel.modes = 5;
        c.channel.wavelengths_nm = vec![1550.0];
        c.equalizer.num_taps = 32;
        c.equalizer.training_symbols = 4096;
        c.impairments.snr_db = vec![f64::INFINITY];
        c.channel.decorrelation_delay = 1e-9;
        c
    }

    #[test]
    fn link_mdl_calibrated_to_target() {
        let cfg = ExperimentConfig::default();
        for (w, &wl) in cfg.channel.wavelengths_nm.iter().enumerate() {
            let link = link_model(&cfg, wl, w, 18.0).unwrap();
            let mdl = metrics::mdl_db(&link.mode_matrix()).unwrap();
            let chip = metrics::mdl_from_matrix(&link.matrix.passive()).unwrap();
            eprintln!(
                "{wl} nm: chip {chip:.2} dB, link {mdl:.2} dB, ramp {:.2} dB",
                link.mdl_spread_db()
            );
            if chip < 7.0 {
                assert!((mdl - 7.0).abs() < 1e-6, "{wl} nm: {mdl}");
                assert!(link.mdl_spread_db() > 0.0 && link.mdl_spread_db() < 7.0);
            } else {
                assert_eq!(link.mdl_spread_db(), 0.0);
            }
        }
        let mut id = cfg.clone();
        id.channel.source = ChannelSource::Identity;
        let link = link_model(&id, 1550.0, 0, 18.0).unwrap();
        assert!((link.mdl_spread_db() - 7.0).abs() < 1e-6);
        // a chip beyond the target gets no extra loss
        id.channel.source = ChannelSource::Synthesized;
        id.channel.mdl_spread_db = 0.5;
        assert!(link_model(&id, 1550.0, 0, 18.0)
            .unwrap()
            .mdl_db
            .iter()
            .all(|&l| l == 0.0));
        // an explicit vector is used verbatim
        id.channel.mdl_db = Some((0..11).map(f64::from).collect());
        assert_eq!(link_model(&id, 1550.0, 0, 18.0).unwrap().mdl_db[10], 10.0);
    }

    #[test]
    fn decorrelated_references_match_waveforms() {
        let c = small(crate::sigproc::ModulationFormat::Qpsk);
        let tx = transmit(&c).unwrap();
        let filter = RrcFilter::new(c.signal.rolloff, c.signal.rrc_span, 2).unwrap();
        for (f, wf) in tx.frames.iter().zip(&tx.waveforms) {
            let again = filter.shape(f).unwrap();
            assert!(crate::sigproc::rms_error(&again.samples, &wf.samples) < 1e-12);
        }
    }

    #[test]
    fn odd_sample_decorrelation_rejected() {
        let mut c = small(crate::sigproc::ModulationFormat::Qpsk);
        c.channel.decorrelation_delay = 1.0 / 60e9;
        assert!(matches!(transmit(&c), Err(Error::Config(_))));
    }

    #[test]
    fn noiseless_small_link_is_error_free() {
        for format in [
            crate::sigproc::ModulationFormat::Qpsk,
            crate::sigproc::ModulationFormat::Qam16,
        ] {
            let c = small(format);
            let r = run_simulation(&c).unwrap();
            let p = &r.points[0];
            assert_eq!(p.ber.errors_counted(), 0, "{format:?}");
            assert!(p.converged);
        }
    }

    #[test]
    fn identical_runs_are_identical() {
        let mut c = small(crate::sigproc::ModulationFormat::Qam16);
        c.impairments.snr_db = vec![16.0];
        let a = run_simulation(&c).unwrap();
        let b = run_simulation(&c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_jones_true_intensity_is_mode_matrix() {
        let mut c = small(crate::sigproc::ModulationFormat::Qpsk);
        c.tdm.jones = JonesMode::Identity;
        let link = link_model(&c, 1550.0, 0, 20.0).unwrap();
        let t = true_intensity(&link);
        let m = link.mode_matrix().map(|v| v.norm_sqr());
        let max = m.max();
        for i in 0..5 {
            for j in 0..5 {
                assert!((t[(i, j)] - 10.0 * (m[(i, j)] / max).log10()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sweep_single_value_equals_run() {
        let mut c = small(crate::sigproc::ModulationFormat::Qpsk);
        c.impairments.snr_db = vec![12.0];
        let s = sweep(&c, SweepAxis::Snr, &[12.0]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].result.as_ref().unwrap(), &run_simulation(&c).unwrap());
    }

    #[test]
    fn failed_sweep_point_is_recorded() {
        let mut c = small(crate::sigproc::ModulationFormat::Qpsk);
        c.tdm.sync_threshold = 1.0;
        c.impairments.snr_db = vec![10.0];
        let s = sweep(&c, SweepAxis::Snr, &[f64::INFINITY, 0.0]).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s[1].result.as_ref().is_err_and(|e| e.is_runtime()));
    }
}
