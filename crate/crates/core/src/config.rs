//! Experiment configuration: a TOML file of `[section]`s with `key = value`
//! pairs. Every field has a default; unknown keys are rejected.

use crate::channel::{CrosstalkProfile, JonesMode, TdmPlan, MAX_MODES, MIN_MODES};
use crate::error::{Error, Result};
use crate::rng;
use crate::rxdsp::{EqualizerConfig, DEFAULT_ESTIMATE_TAPS};
use crate::sigproc::{ModulationFormat, PrbsKind, DEFAULT_RRC_SPAN};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub signal: SignalConfig,
    pub channel: ChannelConfig,
    pub impairments: ImpairmentConfig,
    pub tdm: TdmConfig,
    pub equalizer: EqualizerConfig,
    pub receiver: ReceiverConfig,
    pub seeds: SeedConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalConfig {
    pub format: ModulationFormat,
    pub baud: f64,
    /// Transmitter samples per symbol (DAC rate = baud * sps).
    pub sps: usize,
    pub rolloff: f64,
    /// RRC filter span in symbols.
    pub rrc_span: usize,
    /// Payload symbols per mode after the training prefix
    /// (`equalizer.training_symbols`).
    pub payload_symbols: usize,
    pub prbs: PrbsKind,
    /// Independent data per mode. When false every mode carries the same
    /// pattern and relies on `channel.decorrelation_delay` alone.
    pub independent_data: bool,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            format: ModulationFormat::Qam16,
            baud: 30e9,
            sps: 2,
            rolloff: 0.01,
            rrc_span: DEFAULT_RRC_SPAN,
            payload_symbols: 1 << 17,
            prbs: PrbsKind::Uniform,
            independent_data: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSource {
    /// Matrices drawn from the built-in crosstalk profile.
    Synthesized,
    /// One intensity-matrix CSV per wavelength (`matrix_files`).
    File,
    /// Identity chip (no crosstalk).
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseModel {
    /// Uniform seeded phases on every matrix entry.
    Random,
    /// All entries real and non-negative.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub modes: usize,
    pub source: ChannelSource,
    pub matrix_files: Vec<PathBuf>,
    /// Wavelengths in nm (ignored for file sources, which carry their own).
    pub wavelengths_nm: Vec<f64>,
    /// Worst-mode crosstalk override in dB applied to the built-in profile
    /// (the profile's own TE8 level when absent).
    pub worst_crosstalk_db: Option<f64>,
    /// Target end-to-end MDL in dB: the singular-value spread of the whole
    /// link (chip, per-mode loss and launch powers). Per-mode losses follow
    /// a linear ramp over the modes, scaled until the link reaches it.
    pub mdl_spread_db: f64,
    /// Explicit per-mode loss vector, applied as given (overrides
    /// `mdl_spread_db`).
    pub mdl_db: Option<Vec<f64>>,
    /// Per-mode launch power in dB (uniform 0 dB when absent).
    pub launch_power_db: Option<Vec<f64>>,
    /// Relative delay between consecutive modes, seconds.
    pub decorrelation_delay: f64,
    pub phases: PhaseModel,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            modes: 11,
            source: ChannelSource::Synthesized,
            matrix_files: Vec::new(),
            wavelengths_nm: (0..7).map(|k| 1530.0 + 5.0 * k as f64).collect(),
            worst_crosstalk_db: None,
            mdl_spread_db: 7.0,
            mdl_db: None,
            launch_power_db: None,
            decorrelation_delay: 25e-9,
            phases: PhaseModel::Random,
        }
    }
}

impl ChannelConfig {
    /// Shape of the per-mode loss: 0 for TE0 rising linearly to 1 for the
    /// last mode.
    pub fn mdl_ramp(&self) -> Vec<f64> {
        (0..self.modes)
            .map(|i| i as f64 / (self.modes - 1).max(1) as f64)
            .collect()
    }

    pub fn launch_vector(&self) -> Vec<f64> {
        self.launch_power_db.clone().unwrap_or_else(|| vec![0.0; self.modes])
    }

    pub fn profile(&self) -> CrosstalkProfile {
        let mut p = CrosstalkProfile::builtin(self.modes);
        if let Some(worst) = self.worst_crosstalk_db {
            let mode = crate::channel::WORST_MODE.min(self.modes - 1);
            for row in p.crosstalk_db.iter_mut() {
                row[mode] = worst;
            }
        }
        // extend the tabulated range if the requested wavelengths exceed it
        let (lo, hi) = p.range();
        let (wmin, wmax) = self
            .wavelengths_nm
            .iter()
            .fold((lo, hi), |(a, b), &w| (a.min(w), b.max(w)));
        if wmin < lo {
            p.wavelengths_nm.insert(0, wmin);
            let (r, il) = (p.crosstalk_db[0].clone(), p.insertion_loss_spread_db[0]);
            p.crosstalk_db.insert(0, r);
            p.insertion_loss_spread_db.insert(0, il);
        }
        if wmax > hi {
            p.wavelengths_nm.push(wmax);
            let (r, il) = (
                p.crosstalk_db.last().unwrap().clone(),
                *p.insertion_loss_spread_db.last().unwrap(),
            );
            p.crosstalk_db.push(r);
            p.insertion_loss_spread_db.push(il);
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EchoConfig {
    /// Delay in symbols.
    pub delay_symbols: f64,
    pub level_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpairmentConfig {
    /// SNR of the received record in dB, referenced to its full
    /// transmitter-rate bandwidth. One run point per entry; `inf` disables
    /// noise.
    pub snr_db: Vec<f64>,
    /// Laser linewidth in Hz (0 = none).
    pub linewidth: f64,
    /// Carrier frequency offset in Hz.
    pub freq_offset: f64,
    pub echoes: Vec<EchoConfig>,
    /// Oscilloscope sample rate in Hz; 0 keeps the transmitter rate.
    pub dso_rate: f64,
}

impl Default for ImpairmentConfig {
    fn default() -> Self {
        Self {
            snr_db: vec![18.0],
            linewidth: 0.0,
            freq_offset: 0.0,
            echoes: Vec::new(),
            dso_rate: 40e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TdmConfig {
    /// Slot contents as `[pol_x, pol_y]` label pairs ("EMPTY" for none);
    /// the default pairing when absent.
    pub plan: Option<Vec<[String; 2]>>,
    pub jones: JonesMode,
    pub align_lone_slot: bool,
    /// Fixed per-slot delay-line errors in transmitter samples.
    pub jitter_samples: Vec<f64>,
    /// Seeded uniform per-slot delay error in `[-a, a]` samples, added to
    /// `jitter_samples`.
    pub random_jitter_samples: f64,
    /// Tolerated cyclic overlap between slot windows, samples.
    pub guard_samples: usize,
    /// Receiver fine-alignment search half-width (samples at 2 sps).
    pub search_samples: usize,
    pub sync_threshold: f64,
}

impl Default for TdmConfig {
    fn default() -> Self {
        Self {
            plan: None,
            jones: JonesMode::Random,
            align_lone_slot: true,
            jitter_samples: Vec::new(),
            random_jitter_samples: 0.0,
            guard_samples: 1,
            search_samples: 2,
            sync_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseTracking {
    Off,
    /// Block phase from hard decisions.
    Decision,
    /// Block phase from the known transmitted symbols.
    DataAided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverConfig {
    pub phase_tracking: PhaseTracking,
    pub phase_block: usize,
    /// Estimate and remove a carrier offset before equalization.
    pub estimate_freq_offset: bool,
    /// Taps of the least-squares channel fit behind the intensity matrix.
    pub estimate_taps: usize,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            phase_tracking: PhaseTracking::Decision,
            phase_block: 64,
            estimate_freq_offset: false,
            estimate_taps: DEFAULT_ESTIMATE_TAPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub master: u64,
    pub data: Option<u64>,
    pub matrix: Option<u64>,
    pub jones: Option<u64>,
    pub noise: Option<u64>,
    pub jitter: Option<u64>,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            master: 1,
            data: None,
            matrix: None,
            jones: None,
            noise: None,
            jitter: None,
        }
    }
}

impl SeedConfig {
    fn pick(&self, explicit: Option<u64>, name: &str) -> u64 {
        explicit.unwrap_or_else(|| rng::derive_seed(self.master, &[rng::tag(name)]))
    }

    pub fn data(&self) -> u64 {
        self.pick(self.data, "data")
    }

    pub fn matrix(&self) -> u64 {
        self.pick(self.matrix, "matrix")
    }

    pub fn jones(&self) -> u64 {
        self.pick(self.jones, "jones")
    }

    pub fn noise(&self) -> u64 {
        self.pick(self.noise, "noise")
    }

    pub fn jitter(&self) -> u64 {
        self.pick(self.jitter, "jitter")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Equalized symbols per mode kept for constellation plots.
    pub constellation_points: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
            constellation_points: 2000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Symbols per mode frame (training prefix plus payload).
    pub fn frame_symbols(&self) -> usize {
        self.equalizer.training_symbols + self.signal.payload_symbols
    }

    pub fn slot_duration(&self) -> f64 {
        self.frame_symbols() as f64 / self.signal.baud
    }

    pub fn tdm_plan(&self) -> Result<TdmPlan> {
        let d = self.slot_duration();
        match &self.tdm.plan {
            None => TdmPlan::default_for(self.channel.modes, d),
            Some(labels) => TdmPlan::from_labels(labels, self.channel.modes, d, None),
        }
    }

    /// Wavelengths of the run points: from the files for file sources.
    pub fn wavelengths(&self) -> Result<Vec<f64>> {
        match self.channel.source {
            ChannelSource::File => self
                .channel
                .matrix_files
                .iter()
                .map(|p| {
                    let text =
                        std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                    Ok(crate::io::IntensityTable::parse(&text)?.wavelength_nm)
                })
                .collect(),
            _ => Ok(self.channel.wavelengths_nm.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let s = &self.signal;
        if !(s.baud > 0.0 && s.baud.is_finite()) {
            return bad(format!("signal.baud must be positive, got {}", s.baud));
        }
        if s.sps < 2 {
            return bad(format!("signal.sps must be at least 2, got {}", s.sps));
        }
        if !(0.0..=1.0).contains(&s.rolloff) {
            return bad(format!("signal.rolloff must be in [0, 1], got {}", s.rolloff));
        }
        if s.rrc_span == 0 || s.rrc_span % 2 != 0 {
            return bad(format!("signal.rrc_span must be even and positive, got {}", s.rrc_span));
        }
        let c = &self.channel;
        if !(MIN_MODES..=MAX_MODES).contains(&c.modes) {
            return bad(format!(
                "channel.modes must be in {MIN_MODES}..={MAX_MODES}, got {}",
                c.modes
            ));
        }
        match c.source {
            ChannelSource::File if c.matrix_files.is_empty() => {
                return bad("channel.source = \"file\" needs channel.matrix_files".into())
            }
            ChannelSource::File => {}
            _ if c.wavelengths_nm.is_empty() => return bad("channel.wavelengths_nm must not be empty".into()),
            _ => {}
        }
        if !(c.mdl_spread_db >= 0.0) {
            return bad("channel.mdl_spread_db must be >= 0".into());
        }
        for (name, v) in [("mdl_db", &c.mdl_db), ("launch_power_db", &c.launch_power_db)] {
            if let Some(v) = v {
                if v.len() != c.modes {
                    return bad(format!("channel.{name} needs {} entries, got {}", c.modes, v.len()));
                }
            }
        }
        if !(c.decorrelation_delay >= 0.0) {
            return bad("channel.decorrelation_delay must be >= 0".into());
        }
        if let Some(w) = c.worst_crosstalk_db {
            if w > 0.0 {
                return bad("channel.worst_crosstalk_db must be <= 0".into());
            }
        }
        let im = &self.impairments;
        if im.snr_db.is_empty() || im.snr_db.iter().any(|v| v.is_nan()) {
            return bad("impairments.snr_db needs at least one value".into());
        }
        if !(im.linewidth >= 0.0) {
            return bad("impairments.linewidth must be >= 0".into());
        }
        if im.echoes.iter().any(|e| e.level_db > -10.0) {
            return bad("echo levels must be <= -10 dB".into());
        }
        if !(im.dso_rate >= 0.0) {
            return bad("impairments.dso_rate must be >= 0".into());
        }
        if im.dso_rate > 0.0 && im.dso_rate < s.baud * (1.0 + s.rolloff) {
            return bad(format!(
                "impairments.dso_rate {} Hz is below the signal bandwidth",
                im.dso_rate
            ));
        }
        if im.freq_offset.abs() >= s.baud * s.sps as f64 / 2.0 {
            return bad("impairments.freq_offset exceeds the Nyquist limit".into());
        }
        self.equalizer
            .validate()
            .map_err(|e| Error::Config(format!("equalizer: {e}")))?;
        if self.receiver.phase_block < 16 {
            return bad("receiver.phase_block must be at least 16".into());
        }
        if self.receiver.estimate_taps == 0 {
            return bad("receiver.estimate_taps must be positive".into());
        }
        if s.payload_symbols == 0 {
            return bad("signal.payload_symbols must be positive".into());
        }
        let plan = self.tdm_plan().map_err(|e| Error::Config(format!("tdm: {e}")))?;
        if im.dso_rate > 0.0 {
            let fs = s.baud * s.sps as f64;
            let len = (plan.slot_count() * self.frame_symbols() * s.sps) as f64;
            let out = len * im.dso_rate / fs;
            if (out - out.round()).abs() > 1e-6 {
                return bad(format!(
                    "a TDM record of {len} samples does not resample to a whole number of samples at {} Sa/s",
                    im.dso_rate
                ));
            }
        }
        let t = &self.tdm;
        if !t.jitter_samples.is_empty() && t.jitter_samples.len() != plan.slot_count() {
            return bad(format!(
                "tdm.jitter_samples needs {} entries, got {}",
                plan.slot_count(),
                t.jitter_samples.len()
            ));
        }
        if !(t.random_jitter_samples >= 0.0) {
            return bad("tdm.random_jitter_samples must be >= 0".into());
        }
        if !(t.sync_threshold > 0.0 && t.sync_threshold <= 1.0) {
            return bad("tdm.sync_threshold must be in (0, 1]".into());
        }
        Ok(())
    }
}

/// Annotated reference of every configuration key.
pub fn schema() -> String {
    let d = ExperimentConfig::default();
    format!(
        r#"# Experiment configuration (TOML). Every key is optional; unknown keys are
# rejected. Values shown are the defaults.

[signal]
format = "{format}"            # "qpsk" | "qam16"
baud = {baud:e}                  # symbols/s
sps = {sps}                        # transmitter samples per symbol
rolloff = {rolloff}                 # RRC roll-off
rrc_span = {span}                # RRC span, symbols (even)
payload_symbols = {payload}       # per mode, after the training prefix
prbs = "uniform"                 # "uniform" | "lfsr17"
independent_data = true          # false: one pattern for all modes

[channel]
modes = {modes}                       # 2..=16
source = "synthesized"           # "synthesized" | "file" | "identity"
matrix_files = []                # intensity CSVs, one per wavelength (source = "file")
wavelengths_nm = {wl:?}
# worst_crosstalk_db = -7.0      # override of the profile's worst mode
mdl_spread_db = {mdl}              # end-to-end MDL target (singular-value spread)
# mdl_db = [...]                 # explicit per-mode loss, dB
# launch_power_db = [...]        # per-mode launch power, dB
decorrelation_delay = {decor:e}     # seconds between consecutive modes
phases = "random"                # "random" | "zero"

[impairments]
snr_db = [18.0]                  # one run point per value; inf = noiseless
linewidth = 0.0                  # laser linewidth, Hz
freq_offset = 0.0                # carrier offset, Hz
echoes = []                      # [{{ delay_symbols = 5.0, level_db = -20.0 }}]
dso_rate = {dso:e}               # oscilloscope rate, Hz (0 = transmitter rate)

[tdm]
# plan = [["TE0", "TE1"], ...]   # slot pairs; "EMPTY" marks an unused position
jones = "random"                 # "random" | "identity"
align_lone_slot = true
jitter_samples = []              # per-slot delay error, transmitter samples
random_jitter_samples = 0.0      # seeded uniform error in [-a, a] samples
guard_samples = {guard}
search_samples = {search}
sync_threshold = {thr}

[equalizer]
num_taps = {taps}
step = {step}
training_symbols = {train}       # multiple of num_taps
passes = {passes}
normalized = true
after_training = "frozen"        # "frozen" | "decision_directed"
structure = "mimo"               # "mimo" | "diagonal"
include_empty = false            # feed the EMPTY tributary as an extra input
power_smoothing = {ps}
epsilon = {eps}

[receiver]
phase_tracking = "decision"      # "off" | "decision" | "data_aided"
phase_block = {pb}
estimate_freq_offset = false
estimate_taps = {et}

[seeds]
master = {master}
# data = ..., matrix = ..., jones = ..., noise = ..., jitter = ...  (derived from master when absent)

[output]
dir = "results"
constellation_points = {cp}
"#,
        format = "qam16",
        baud = d.signal.baud,
        sps = d.signal.sps,
        rolloff = d.signal.rolloff,
        span = d.signal.rrc_span,
        payload = d.signal.payload_symbols,
        modes = d.channel.modes,
        wl = d.channel.wavelengths_nm,
        mdl = d.channel.mdl_spread_db,
        decor = d.channel.decorrelation_delay,
        dso = d.impairments.dso_rate,
        guard = d.tdm.guard_samples,
        search = d.tdm.search_samples,
        thr = d.tdm.sync_threshold,
        taps = d.equalizer.num_taps,
        step = d.equalizer.step,
        train = d.equalizer.training_symbols,
        passes = d.equalizer.passes,
        ps = d.equalizer.power_smoothing,
        eps = d.equalizer.epsilon,
        pb = d.receiver.phase_block,
        et = d.receiver.estimate_taps,
        master = d.seeds.master,
        cp = d.output.constellation_points,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_paper_faithful() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.channel.modes, 11);
        assert_eq!(c.signal.baud, 30e9);
        assert_eq!(c.signal.rolloff, 0.01);
        assert_eq!(c.equalizer.num_taps, 512);
        assert_eq!(
            c.channel.wavelengths_nm,
            vec![1530.0, 1535.0, 1540.0, 1545.0, 1550.0, 1555.0, 1560.0]
        );
        assert_eq!(c.tdm_plan().unwrap().slot_count(), 6);
        assert_eq!(c.channel.mdl_spread_db, 7.0);
        let ramp = c.channel.mdl_ramp();
        assert_eq!(ramp.len(), 11);
        assert_eq!((ramp[0], ramp[10]), (0.0, 1.0));
    }

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::default();
        c.impairments.snr_db = vec![12.5, f64::INFINITY];
        c.impairments.echoes.push(EchoConfig {
            delay_symbols: 5.0,
            level_db: -20.0,
        });
        c.channel.mdl_db = Some((0..11).map(|i| 0.1 * i as f64 + 1e-7).collect());
        c.tdm.jitter_samples = vec![0.5, -0.4, 0.3, -0.5, 0.2, -0.1];
        c.seeds.noise = Some(99);
        let text = c.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            "bogus = 1",
            "[signal]\nbaudrate = 3e10",
            "[equalizer]\ntaps = 4",
            "[nope]\n",
        ] {
            assert!(
                matches!(ExperimentConfig::from_toml(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            "[signal]\nsps = 1",
            "[channel]\nmodes = 1",
            "[channel]\nmdl_db = [1.0]",
            "[impairments]\nsnr_db = []",
            "[impairments]\nechoes = [{ delay_symbols = 5.0, level_db = -3.0 }]",
            "[equalizer]\ntraining_symbols = 1000",
            "[tdm]\njitter_samples = [0.1]",
            "[channel]\nsource = \"file\"",
        ] {
            assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn schema_parses_as_defaults() {
        let parsed = ExperimentConfig::from_toml(&schema()).unwrap();
        assert_eq!(parsed, ExperimentConfig::default());
    }

    #[test]
    fn derived_seeds_follow_master() {
        let a = SeedConfig::default();
        let b = SeedConfig {
            master: 2,
            ..SeedConfig::default()
        };
        assert_ne!(a.noise(), b.noise());
        assert_ne!(a.noise(), a.data());
        let c = SeedConfig {
            noise: Some(5),
            ..SeedConfig::default()
        };
        assert_eq!(c.noise(), 5);
        assert_eq!(c.data(), a.data());
    }
}
