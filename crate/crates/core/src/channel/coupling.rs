use super::TransferMatrix;
use crate::error::{Error, Result};
use crate::fft;
use crate::sigproc::Waveform;
use num_complex::Complex64;

fn check_bank(wfs: &[Waveform]) -> Result<(usize, f64)> {
    let first = wfs.first().ok_or_else(|| Error::invalid("waveform bank is empty"))?;
    for (k, wf) in wfs.iter().enumerate() {
        if (wf.sample_rate - first.sample_rate).abs() > 1e-9 * first.sample_rate {
            return Err(Error::invalid(format!(
                "waveform {k} has sample rate {} (expected {})",
                wf.sample_rate, first.sample_rate
            )));
        }
        if wf.len() != first.len() {
            return Err(Error::invalid(format!(
                "waveform {k} has {} samples (expected {})",
                wf.len(),
                first.len()
            )));
        }
    }
    Ok((first.len(), first.sample_rate))
}

/// Cyclically delay copy `k` by `round(k * delay * sample_rate)` samples.
pub fn delay_decorrelate(wfs: &[Waveform], delay: f64) -> Result<Vec<Waveform>> {
    let (len, rate) = check_bank(wfs)?;
    if !(delay >= 0.0 && delay.is_finite()) {
        return Err(Error::invalid(format!("delay must be >= 0, got {delay}")));
    }
    Ok(wfs
        .iter()
        .enumerate()
        .map(|(k, wf)| {
            let shift = (k as f64 * delay * rate).round() as usize % len.max(1);
            let mut samples = wf.samples.clone();
            samples.rotate_right(shift);
            wf.with_samples(samples)
        })
        .collect())
}

/// Per-sample linear mixing `out = diag(10^(-mdl/20)) * M * in`.
pub fn apply_mode_coupling(wfs: &[Waveform], m: &TransferMatrix, mdl_db: &[f64]) -> Result<Vec<Waveform>> {
    let (len, rate) = check_bank(wfs)?;
    let n = m.dim();
    if wfs.len() != n || mdl_db.len() != n {
        return Err(Error::invalid(format!(
            "{} waveforms and {} loss entries for a {n}x{n} matrix",
            wfs.len(),
            mdl_db.len()
        )));
    }
    Ok((0..n)
        .map(|i| {
            let g = 10f64.powf(-mdl_db[i] / 20.0);
            let mut out = vec![Complex64::new(0.0, 0.0); len];
            for (j, wf) in wfs.iter().enumerate() {
                let c = m.entries[(i, j)] * g;
                if c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (o, s) in out.iter_mut().zip(&wf.samples) {
                    *o += c * s;
                }
            }
            Waveform {
                samples: out,
                sample_rate: rate,
                label: super::mode_label(i),
            }
        })
        .collect())
}

/// A discrete reflection: delayed copy at `level_db` relative to the main path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Echo {
    /// Seconds.
    pub delay: f64,
    pub level_db: f64,
}

/// `out = in + sum_k 10^(level_k/20) * delay(in, delay_k)`, with cyclic
/// (periodic-record) delays.
pub fn add_reflection_echo(wf: &Waveform, echoes: &[Echo]) -> Result<Waveform> {
    if let Some(e) = echoes.iter().find(|e| e.level_db > -10.0) {
        return Err(Error::invalid(format!(
            "echo level {} dB exceeds the -10 dB limit",
            e.level_db
        )));
    }
    let mut out = wf.samples.clone();
    for e in echoes {
        let a = 10f64.powf(e.level_db / 20.0);
        let delayed = fft::cyclic_delay(&wf.samples, e.delay * wf.sample_rate);
        for (o, d) in out.iter_mut().zip(delayed) {
            *o += d * a;
        }
    }
    Ok(wf.with_samples(out))
}
