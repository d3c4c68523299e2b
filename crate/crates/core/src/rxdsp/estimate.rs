use super::{EqualizerState, TributarySet};
use crate::error::{Error, Result};
use crate::sigproc::SymbolFrame;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Taps of the least-squares channel fit (lags `-2 ..= 2`).
pub const DEFAULT_ESTIMATE_TAPS: usize = 5;
/// Training symbols skipped at the start of a slot, where window edges
/// and receiver resampling leave small transients.
const ESTIMATE_SKIP: usize = 16;
const ESTIMATE_MAX_ROWS: usize = 8192;

/// Equalizer-implied impulse responses.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    /// `h[i][j]`, `num_taps` long.
    pub h: Vec<Vec<Vec<Complex64>>>,
    /// `10 log10` of the per-lag mean `|h|^2` over all port pairs, peak 0 dB.
    pub intensity_profile_db: Vec<f64>,
    pub peak_lag: usize,
}

pub fn extract_impulse_response(state: &EqualizerState) -> Result<ImpulseResponse> {
    if !state.converged {
        return Err(Error::StaleState);
    }
    let h = state.taps();
    let pairs = (state.n_out() * state.n_in()) as f64;
    let mean: Vec<f64> = (0..state.num_taps)
        .map(|l| h.iter().flatten().map(|t| t[l].norm_sqr()).sum::<f64>() / pairs)
        .collect();
    let peak_lag = (0..mean.len()).max_by(|&a, &b| mean[a].total_cmp(&mean[b])).unwrap();
    let peak = mean[peak_lag];
    if !(peak > 0.0) {
        return Err(Error::EstimateUnreliable("equalizer taps are all zero".into()));
    }
    let intensity_profile_db = mean.iter().map(|&p| 10.0 * (p / peak).log10()).collect();
    Ok(ImpulseResponse {
        h,
        intensity_profile_db,
        peak_lag,
    })
}

/// Short FIR MIMO channel fitted by least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    /// `h[i][j][k]` for lag `k - taps / 2`.
    pub h: Vec<Vec<Vec<Complex64>>>,
    /// `10 log10 sum_k |h_ij[k]|^2`, normalized so the largest entry is 0 dB.
    pub intensity_db: DMatrix<f64>,
}

impl ChannelEstimate {
    pub fn taps(&self) -> usize {
        self.h.first().and_then(|r| r.first()).map_or(0, |t| t.len())
    }

    /// Apply the estimate to input streams (cyclic).
    pub fn predict(&self, inputs: &[&[Complex64]]) -> Vec<Vec<Complex64>> {
        let len = inputs[0].len() as isize;
        let half = (self.taps() / 2) as isize;
        self.h
            .iter()
            .map(|row| {
                (0..len)
                    .map(|n| {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (j, taps) in row.iter().enumerate() {
                            for (k, t) in taps.iter().enumerate() {
                                let idx = (n - (k as isize - half)).rem_euclid(len) as usize;
                                acc += t * inputs[j][idx];
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }
}

/// Least-squares fit of `outputs_i[n] = sum_j sum_k h_ij[k] inputs_j[n - (k - taps/2)]`
/// over the symbol range `rows`.
pub fn least_squares_channel(
    outputs: &[&[Complex64]],
    inputs: &[&[Complex64]],
    taps: usize,
    rows: std::ops::Range<usize>,
) -> Result<ChannelEstimate> {
    if taps == 0 || inputs.is_empty() || outputs.is_empty() {
        return Err(Error::invalid("least-squares fit needs taps, inputs and outputs"));
    }
    let len = inputs[0].len() as isize;
    let half = (taps / 2) as isize;
    let n_in = inputs.len();
    let cols = n_in * taps;
    let n_rows = rows.len();
    if n_rows < 4 * cols {
        return Err(Error::EstimateUnreliable(format!(
            "{n_rows} training symbols are too few for {cols} unknowns"
        )));
    }
    let a = DMatrix::from_fn(n_rows, cols, |r, c| {
        let (j, k) = (c / taps, c % taps);
        let n = (rows.start + r) as isize - (k as isize - half);
        inputs[j][n.rem_euclid(len) as usize]
    });
    let b = DMatrix::from_fn(n_rows, outputs.len(), |r, i| outputs[i][rows.start + r]);
    let gram = a.adjoint() * &a;
    let sv = gram.clone().svd(false, false).singular_values;
    let (smax, smin) = sv
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    if !(smin > 1e-10 * smax) {
        return Err(Error::EstimateUnreliable("training inputs are rank deficient".into()));
    }
    let rhs = a.adjoint() * b;
    let x = gram
        .cholesky()
        .ok_or_else(|| Error::EstimateUnreliable("normal equations not positive definite".into()))?
        .solve(&rhs);
    let h: Vec<Vec<Vec<Complex64>>> = (0..outputs.len())
        .map(|i| {
            (0..n_in)
                .map(|j| (0..taps).map(|k| x[(j * taps + k, i)]).collect())
                .collect()
        })
        .collect();
    let lin = DMatrix::from_fn(outputs.len(), n_in, |i, j| {
        h[i][j].iter().map(|v| v.norm_sqr()).sum::<f64>()
    });
    let max = lin.max();
    if !(max > 0.0) {
        return Err(Error::EstimateUnreliable("estimated channel is zero".into()));
    }
    let intensity_db = lin.map(|p| 10.0 * (p / max).log10());
    Ok(ChannelEstimate { h, intensity_db })
}

/// System intensity transfer matrix from a least-squares channel fit on
/// the training prefix (not from the equalizer inverse). Rows are the
/// tributaries nominally carrying TE0, TE1, ... (EMPTY dropped); columns
/// are the transmitted modes.
pub fn estimate_intensity_transfer_matrix(
    state: &EqualizerState,
    tribs: &TributarySet,
    references: &[SymbolFrame],
    training_symbols: usize,
    taps: usize,
) -> Result<ChannelEstimate> {
    if !state.converged {
        return Err(Error::StaleState);
    }
    let (outputs, _) = tribs.equalizer_inputs(false);
    if references.len() != outputs.len() {
        return Err(Error::invalid("one reference frame per mode is required"));
    }
    let inputs: Vec<&[Complex64]> = references.iter().map(|r| r.symbols.as_slice()).collect();
    let end = training_symbols
        .min(ESTIMATE_SKIP + ESTIMATE_MAX_ROWS)
        .min(tribs.symbols_per_tributary());
    least_squares_channel(&outputs, &inputs, taps, ESTIMATE_SKIP.min(end)..end)
}
