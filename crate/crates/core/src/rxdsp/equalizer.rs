use super::TributarySet;
use crate::error::{Error, Result};
use crate::sigproc::{ModulationFormat, SymbolFrame};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// What happens after the training passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AfterTraining {
    /// Weights are frozen for the payload.
    Frozen,
    /// Adaptation continues on hard decisions over the payload.
    DecisionDirected,
}

/// Which input-to-output filters exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqualizerStructure {
    /// Full N_out x N_in filter bank.
    Mimo,
    /// Each output sees only its own nominal tributary (single-mode
    /// equalization baseline).
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EqualizerConfig {
    /// Symbol-spaced taps per filter; also the block length. The FFT size is
    /// twice this (50% overlap-save).
    pub num_taps: usize,
    pub step: f64,
    pub training_symbols: usize,
    pub passes: usize,
    /// Per-bin step normalization by the smoothed input power spectrum.
    pub normalized: bool,
    pub after_training: AfterTraining,
    pub structure: EqualizerStructure,
    /// Feed the EMPTY tributary as an extra input (12 x 11 for 11 modes).
    pub include_empty: bool,
    /// Forgetting factor of the per-bin power estimate.
    pub power_smoothing: f64,
    /// Regularization added to the per-bin power, relative to its mean.
    pub epsilon: f64,
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        Self {
            num_taps: 512,
            step: 0.1,
            training_symbols: 1 << 15,
            passes: 3,
            normalized: true,
            after_training: AfterTraining::Frozen,
            structure: EqualizerStructure::Mimo,
            include_empty: false,
            power_smoothing: 0.9,
            epsilon: 1e-3,
        }
    }
}

impl EqualizerConfig {
    pub fn fft_size(&self) -> usize {
        2 * self.num_taps
    }

    /// Decision delay in symbols (centre of the tap window).
    pub fn delay(&self) -> usize {
        self.num_taps / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_taps < 2 {
            return Err(Error::invalid("equalizer needs at least 2 taps"));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid(format!("step must be positive, got {}", self.step)));
        }
        if self.passes == 0 {
            return Err(Error::invalid("at least one training pass is required"));
        }
        if self.training_symbols < self.num_taps {
            return Err(Error::invalid(format!(
                "{} training symbols are fewer than the {} taps",
                self.training_symbols, self.num_taps
            )));
        }
        if self.training_symbols % self.num_taps != 0 {
            return Err(Error::invalid("training length must be a multiple of the tap count"));
        }
        if !(0.0..1.0).contains(&self.power_smoothing) {
            return Err(Error::invalid("power smoothing must be in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        Ok(())
    }
}

/// Time-domain view shared by both LMS implementations: `taps[i][j][l]`,
/// with `y_i[n] = sum_j sum_l taps[i][j][l] x_j[n - l]`.
fn dc_matrix(taps: &[Vec<Vec<Complex64>>]) -> DMatrix<Complex64> {
    let n_out = taps.len();
    let n_in = taps[0].len();
    DMatrix::from_fn(n_out, n_in, |i, j| taps[i][j].iter().sum())
}

fn invert_dc(taps: &[Vec<Vec<Complex64>>]) -> Result<DMatrix<Complex64>> {
    let w = dc_matrix(taps);
    if !w.is_square() {
        return Err(Error::invalid("channel inverse needs a square equalizer"));
    }
    w.try_inverse().ok_or(Error::SingularChannel)
}

/// Adapted filter bank and its learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizerState {
    /// `weights[i][j]`: FFT-size spectrum of the filter from input j to
    /// output i.
    pub weights: Vec<Vec<Vec<Complex64>>>,
    pub num_taps: usize,
    pub delay: usize,
    /// Mean-square error per adapted block, averaged over outputs.
    pub mse_history: Vec<f64>,
    pub converged: bool,
    /// Mode carried by each input (`None` = EMPTY).
    pub input_modes: Vec<Option<usize>>,
}

impl EqualizerState {
    pub fn n_out(&self) -> usize {
        self.weights.len()
    }

    pub fn n_in(&self) -> usize {
        self.weights.first().map_or(0, |w| w.len())
    }

    /// Time-domain taps (first `num_taps` samples of each inverse FFT).
    pub fn taps(&self) -> Vec<Vec<Vec<Complex64>>> {
        let fft_size = 2 * self.num_taps;
        let ifft = FftPlanner::new().plan_fft_inverse(fft_size);
        self.weights
            .iter()
            .map(|row| {
                row.iter()
                    .map(|w| {
                        let mut h = w.clone();
                        ifft.process(&mut h);
                        h.truncate(self.num_taps);
                        h.iter_mut().for_each(|v| *v /= fft_size as f64);
                        h
                    })
                    .collect()
            })
            .collect()
    }

    /// Zero-frequency response matrix `sum_l taps[i][j][l]`.
    pub fn dc_response(&self) -> DMatrix<Complex64> {
        dc_matrix(&self.taps())
    }

    /// Memoryless channel implied by the equalizer: the inverse of its
    /// zero-frequency response (square equalizers only).
    pub fn channel_estimate(&self) -> Result<DMatrix<Complex64>> {
        invert_dc(&self.taps())
    }

    /// Final-quarter MSE, the quantity the convergence test looks at.
    pub fn final_mse(&self) -> f64 {
        final_quarter_mean(&self.mse_history)
    }
}

fn final_quarter_mean(h: &[f64]) -> f64 {
    if h.is_empty() {
        return f64::NAN;
    }
    let q = (h.len() / 4).max(1);
    h[h.len() - q..].iter().sum::<f64>() / q as f64
}

/// Blocks averaged before taking the minimum of the learning curve.
const CONVERGENCE_SMOOTHING: usize = 8;

/// Final-quarter MSE, relative to the desired power, below which the state
/// counts as converged whatever the trend of the learning curve.
const CONVERGED_MSE_FLOOR: f64 = 1e-2;

/// Final-quarter MSE below twice the minimum of the learning curve, or
/// below [`CONVERGED_MSE_FLOOR`] (noiseless, strongly mode-dependent links
/// keep improving geometrically long after the error is negligible). The
/// minimum is taken over an 8-block moving average: single block
/// estimates scatter by a factor of two around a flat floor.
fn is_converged(h: &[f64], desired_power: f64) -> bool {
    let w = CONVERGENCE_SMOOTHING.min(h.len()).max(1);
    let min = h
        .windows(w)
        .map(|s| s.iter().sum::<f64>() / w as f64)
        .fold(f64::INFINITY, f64::min);
    let q = final_quarter_mean(h);
    q < 2.0 * min || q < CONVERGED_MSE_FLOOR * desired_power
}

fn check_divergence(history: &[f64], desired_power: f64) -> Result<()> {
    let last = *history.last().unwrap();
    let limit = 10.0 * history[0].max(desired_power);
    if !last.is_finite() || last > limit {
        return Err(Error::Divergence {
            mse_history: history.to_vec(),
        });
    }
    Ok(())
}

/// Output of the stream-level equalizer.
#[derive(Debug, Clone)]
pub struct StreamOutput {
    /// `outputs[i][m]` estimates `references[i][m]` for every symbol index
    /// of the cyclic frame.
    pub outputs: Vec<Vec<Complex64>>,
    pub state: EqualizerState,
}

struct Plans {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl Plans {
    fn new(n: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            fwd: p.plan_fft_forward(n),
            inv: p.plan_fft_inverse(n),
            scale: 1.0 / n as f64,
        }
    }

    fn inverse(&self, v: &mut [Complex64]) {
        self.inv.process(v);
        v.iter_mut().for_each(|x| *x *= self.scale);
    }
}

/// Frequency-domain block LMS over raw cyclic symbol streams.
///
/// `nominal[i]` is the input index that carries output `i`'s own signal;
/// it receives the initial centre tap (scaled to match powers) and is the
/// only input used by the diagonal structure. Per block `b` of `B =
/// num_taps` symbols:
///
/// 1. `X_j = FFT(x_j[bB - B .. bB + B])` (cyclic indices)
/// 2. `y_i = last B of IFFT(sum_j W_ij X_j)`
/// 3. `e_i = d_i - y_i` with `d_i[n] = ref_i[n - B/2]`
/// 4. `W_ij += mu * FFT(first B of IFFT(conj(X_j) E_i / (P_j + eps)))`,
///    `E_i = FFT([0; e_i])`, `P_j` the smoothed `|X_j|^2`
///    (no division when `normalized` is off).
///
/// Training runs `passes` times over the first `training_symbols`, then the
/// whole frame is filtered with frozen weights, or with decision-directed
/// updates on the payload.
pub fn fd_lms_streams(
    inputs: &[&[Complex64]],
    references: &[&[Complex64]],
    nominal: &[usize],
    format: ModulationFormat,
    cfg: &EqualizerConfig,
) -> Result<StreamOutput> {
    cfg.validate()?;
    let (len, desired_power) = check_streams(inputs, references, nominal, cfg)?;
    let n_in = inputs.len();
    let n_out = references.len();
    let b = cfg.num_taps;
    let nfft = 2 * b;
    let delay = cfg.delay();
    let plans = Plans::new(nfft);
    let allowed = |i: usize, j: usize| match cfg.structure {
        EqualizerStructure::Mimo => true,
        EqualizerStructure::Diagonal => nominal[i] == j,
    };

    // initial weights: scaled centre tap on the nominal input
    let mut w = vec![vec![vec![ZERO; nfft]; n_in]; n_out];
    for i in 0..n_out {
        let j = nominal[i];
        let px = power(&inputs[j][..cfg.training_symbols]);
        let pd = power(&references[i][..cfg.training_symbols]);
        if px > 0.0 {
            let mut h = vec![ZERO; nfft];
            h[delay] = Complex64::new((pd / px).sqrt(), 0.0);
            plans.fwd.process(&mut h);
            w[i][j] = h;
        }
    }

    let mut p = vec![vec![0.0; nfft]; n_in];
    let mut p_init = false;
    let mut history = Vec::new();
    let mut xf = vec![vec![ZERO; nfft]; n_in];
    let mut y = vec![vec![ZERO; b]; n_out];
    let mut e = vec![vec![ZERO; b]; n_out];
    let mut buf = vec![ZERO; nfft];
    let blocks_total = len / b;
    let blocks_train = cfg.training_symbols / b;

    let load_inputs = |blk: usize, xf: &mut [Vec<Complex64>]| {
        let s = (blk * b) as isize;
        for (j, x) in inputs.iter().enumerate() {
            for t in 0..nfft {
                xf[j][t] = x[(s - b as isize + t as isize).rem_euclid(len as isize) as usize];
            }
            plans.fwd.process(&mut xf[j]);
        }
    };

    let filter = |w: &[Vec<Vec<Complex64>>], xf: &[Vec<Complex64>], y: &mut [Vec<Complex64>], buf: &mut [Complex64]| {
        for i in 0..n_out {
            buf.iter_mut().for_each(|v| *v = ZERO);
            for j in 0..n_in {
                if !allowed(i, j) {
                    continue;
                }
                for ((o, a), x) in buf.iter_mut().zip(&w[i][j]).zip(&xf[j]) {
                    *o += a * x;
                }
            }
            plans.inverse(buf);
            y[i].copy_from_slice(&buf[b..]);
        }
    };

    let mut grad = vec![ZERO; nfft];
    let mut ef = vec![ZERO; nfft];
    let mut update = |w: &mut [Vec<Vec<Complex64>>],
                      xf: &[Vec<Complex64>],
                      e: &[Vec<Complex64>],
                      p: &mut [Vec<f64>],
                      p_init: &mut bool| {
        if cfg.normalized {
            let lambda = if *p_init { cfg.power_smoothing } else { 0.0 };
            for j in 0..n_in {
                for (pk, x) in p[j].iter_mut().zip(&xf[j]) {
                    *pk = lambda * *pk + (1.0 - lambda) * x.norm_sqr();
                }
            }
            *p_init = true;
        }
        let mean_p = if cfg.normalized {
            p.iter().flatten().sum::<f64>() / (n_in * nfft) as f64
        } else {
            0.0
        };
        let eps = cfg.epsilon * mean_p;
        for i in 0..n_out {
            ef[..b].iter_mut().for_each(|v| *v = ZERO);
            ef[b..].copy_from_slice(&e[i]);
            plans.fwd.process(&mut ef);
            for j in 0..n_in {
                if !allowed(i, j) {
                    continue;
                }
                if cfg.normalized && mean_p == 0.0 {
                    continue;
                }
                for k in 0..nfft {
                    let g = xf[j][k].conj() * ef[k];
                    grad[k] = if cfg.normalized { g / (p[j][k] + eps) } else { g };
                }
                plans.inverse(&mut grad);
                grad[b..].iter_mut().for_each(|v| *v = ZERO);
                plans.fwd.process(&mut grad);
                for (wk, g) in w[i][j].iter_mut().zip(&grad) {
                    *wk += g * cfg.step;
                }
            }
        }
    };

    let desired = |i: usize, n: usize| references[i][(n + len - delay) % len];

    for _pass in 0..cfg.passes {
        for blk in 0..blocks_train {
            load_inputs(blk, &mut xf);
            filter(&w, &xf, &mut y, &mut buf);
            let mut mse = 0.0;
            for i in 0..n_out {
                for m in 0..b {
                    e[i][m] = desired(i, blk * b + m) - y[i][m];
                    mse += e[i][m].norm_sqr();
                }
            }
            history.push(mse / (n_out * b) as f64);
            check_divergence(&history, desired_power)?;
            update(&mut w, &xf, &e, &mut p, &mut p_init);
        }
    }

    let mut raw = vec![vec![ZERO; len]; n_out];
    for blk in 0..blocks_total {
        load_inputs(blk, &mut xf);
        filter(&w, &xf, &mut y, &mut buf);
        for i in 0..n_out {
            raw[i][blk * b..(blk + 1) * b].copy_from_slice(&y[i]);
        }
        if cfg.after_training == AfterTraining::DecisionDirected && blk >= blocks_train {
            let mut mse = 0.0;
            for i in 0..n_out {
                for m in 0..b {
                    e[i][m] = format.decide(y[i][m]) - y[i][m];
                    mse += e[i][m].norm_sqr();
                }
            }
            history.push(mse / (n_out * b) as f64);
            check_divergence(&history, desired_power)?;
            update(&mut w, &xf, &e, &mut p, &mut p_init);
        }
    }

    let outputs = raw
        .into_iter()
        .map(|r| (0..len).map(|m| r[(m + delay) % len]).collect())
        .collect();
    let converged = is_converged(&history, desired_power);
    Ok(StreamOutput {
        outputs,
        state: EqualizerState {
            weights: w,
            num_taps: b,
            delay,
            mse_history: history,
            converged,
            input_modes: Vec::new(),
        },
    })
}

fn power(x: &[Complex64]) -> f64 {
    crate::sigproc::mean_power(x)
}

fn check_streams(
    inputs: &[&[Complex64]],
    references: &[&[Complex64]],
    nominal: &[usize],
    cfg: &EqualizerConfig,
) -> Result<(usize, f64)> {
    if inputs.is_empty() || references.is_empty() {
        return Err(Error::invalid("equalizer needs at least one input and output"));
    }
    let len = inputs[0].len();
    if inputs.iter().chain(references).any(|s| s.len() != len) {
        return Err(Error::invalid("all streams must have the same length"));
    }
    if nominal.len() != references.len() || nominal.iter().any(|&j| j >= inputs.len()) {
        return Err(Error::invalid("nominal input map does not match the streams"));
    }
    if len < cfg.training_symbols {
        return Err(Error::invalid(format!(
            "{len} symbols cannot hold {} training symbols",
            cfg.training_symbols
        )));
    }
    if len % cfg.num_taps != 0 {
        return Err(Error::invalid("frame length must be a multiple of the tap count"));
    }
    let pd = references
        .iter()
        .map(|r| power(&r[..cfg.training_symbols]))
        .sum::<f64>()
        / references.len() as f64;
    Ok((len, pd))
}

/// Equalize a stitched tributary set. `references[m]` is the full known
/// frame of mode `m` (its first `training_symbols` are the training
/// prefix). Returns one equalized frame per mode.
pub fn fd_lms_equalize(
    tribs: &TributarySet,
    references: &[SymbolFrame],
    cfg: &EqualizerConfig,
) -> Result<(Vec<SymbolFrame>, EqualizerState)> {
    let (inputs, modes) = tribs.equalizer_inputs(cfg.include_empty);
    if references.len() != tribs.mode_count() {
        return Err(Error::invalid(format!(
            "{} reference frames for {} modes",
            references.len(),
            tribs.mode_count()
        )));
    }
    let nominal: Vec<usize> = (0..references.len())
        .map(|m| modes.iter().position(|&x| x == Some(m)).unwrap())
        .collect();
    let refs: Vec<&[Complex64]> = references.iter().map(|r| r.symbols.as_slice()).collect();
    let format = references[0].format;
    let out = fd_lms_streams(&inputs, &refs, &nominal, format, cfg)?;
    let frames = out
        .outputs
        .into_iter()
        .map(|s| SymbolFrame::new(s, format, tribs.baud))
        .collect::<Result<Vec<_>>>()?;
    let mut state = out.state;
    state.input_modes = modes;
    Ok((frames, state))
}

/// Taps and learning curve of the time-domain reference.
#[derive(Debug, Clone, PartialEq)]
pub struct TdLmsState {
    pub taps: Vec<Vec<Vec<Complex64>>>,
    pub delay: usize,
    pub mse_history: Vec<f64>,
}

impl TdLmsState {
    pub fn channel_estimate(&self) -> Result<DMatrix<Complex64>> {
        invert_dc(&self.taps)
    }

    pub fn dc_response(&self) -> DMatrix<Complex64> {
        dc_matrix(&self.taps)
    }

    pub fn final_mse(&self) -> f64 {
        final_quarter_mean(&self.mse_history)
    }
}

/// Plain sample-by-sample multichannel LMS, the verification oracle for
/// [`fd_lms_streams`] (small instances only).
///
/// Same decision delay (`taps / 2`), initialization and training schedule
/// as the block version. Update order per symbol `n`: all outputs
/// `y_i[n] = sum_j sum_l w_ij[l] x_j[n - l]` are computed with the current
/// weights, then every `w_ij[l] += mu * e_i[n] * conj(x_j[n - l])`. The
/// MSE history is averaged over blocks of `taps` symbols. Weights are
/// frozen after training.
pub fn td_lms_reference(
    inputs: &[&[Complex64]],
    references: &[&[Complex64]],
    nominal: &[usize],
    taps: usize,
    step: f64,
    training_symbols: usize,
    passes: usize,
) -> Result<(Vec<Vec<Complex64>>, TdLmsState)> {
    if inputs.len() > 4 || references.len() > 4 || taps > 64 {
        return Err(Error::invalid("time-domain reference is limited to N <= 4, taps <= 64"));
    }
    let cfg = EqualizerConfig {
        num_taps: taps,
        step,
        training_symbols,
        passes,
        normalized: false,
        ..EqualizerConfig::default()
    };
    cfg.validate()?;
    let (len, desired_power) = check_streams(inputs, references, nominal, &cfg)?;
    let n_in = inputs.len();
    let n_out = references.len();
    let delay = cfg.delay();
    let mut w = vec![vec![vec![ZERO; taps]; n_in]; n_out];
    for i in 0..n_out {
        let j = nominal[i];
        let px = power(&inputs[j][..training_symbols]);
        let pd = power(&references[i][..training_symbols]);
        if px > 0.0 {
            w[i][j][delay] = Complex64::new((pd / px).sqrt(), 0.0);
        }
    }
    let x_at = |j: usize, n: isize| inputs[j][n.rem_euclid(len as isize) as usize];
    let mut history = Vec::new();
    let mut acc = 0.0;
    let mut y = vec![ZERO; n_out];
    for _ in 0..passes {
        for n in 0..training_symbols {
            for i in 0..n_out {
                let mut s = ZERO;
                for j in 0..n_in {
                    for (l, wl) in w[i][j].iter().enumerate() {
                        s += wl * x_at(j, n as isize - l as isize);
                    }
                }
                y[i] = s;
            }
            for i in 0..n_out {
                let d = references[i][(n + len - delay) % len];
                let e = d - y[i];
                acc += e.norm_sqr();
                for j in 0..n_in {
                    for (l, wl) in w[i][j].iter_mut().enumerate() {
                        *wl += e * x_at(j, n as isize - l as isize).conj() * step;
                    }
                }
            }
            if (n + 1) % taps == 0 {
                history.push(acc / (taps * n_out) as f64);
                acc = 0.0;
                check_divergence(&history, desired_power)?;
            }
        }
    }
    let outputs = (0..n_out)
        .map(|i| {
            (0..len)
                .map(|m| {
                    let n = (m + delay) as isize;
                    let mut s = ZERO;
                    for j in 0..n_in {
                        for (l, wl) in w[i][j].iter().enumerate() {
                            s += wl * x_at(j, n - l as isize);
                        }
                    }
                    s
                })
                .collect()
        })
        .collect();
    Ok((
        outputs,
        TdLmsState {
            taps: w,
            delay,
            mse_history: history,
        },
    ))
}
