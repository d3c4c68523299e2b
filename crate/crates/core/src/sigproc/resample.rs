use super::Waveform;
use crate::error::{Error, Result};
use crate::fft;
use num_complex::Complex64;

/// Band-limited rational resampling of a periodic record by zero-padding or
/// truncating its spectrum. The record length must map to an integer number
/// of output samples.
pub fn resample(wf: &Waveform, target_rate: f64) -> Result<Waveform> {
    if !(target_rate > 0.0 && target_rate.is_finite()) {
        return Err(Error::invalid(format!(
            "target rate must be positive, got {target_rate}"
        )));
    }
    let n = wf.len();
    let exact = n as f64 * target_rate / wf.sample_rate;
    let m = exact.round();
    if (exact - m).abs() > 1e-6 || m < 1.0 {
        return Err(Error::invalid(format!(
            "{n} samples at {} Sa/s do not map to an integer length at {target_rate} Sa/s",
            wf.sample_rate
        )));
    }
    let m = m as usize;
    if m == n {
        let mut out = wf.clone();
        out.sample_rate = target_rate;
        return Ok(out);
    }
    let mut spec = wf.samples.clone();
    fft::forward(&mut spec);
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    let k = n.min(m);
    let half = k / 2;
    // positive frequencies [0, half) and negative frequencies [-half, 0)
    for i in 0..half {
        out[i] = spec[i];
        out[m - half + i] = spec[n - half + i];
    }
    if k % 2 == 1 {
        out[half] = spec[half];
    } else if n > m {
        // fold the ambiguous Nyquist bins of the input
        out[m - half] = spec[n - half] + spec[half];
    } else if n < m {
        // split the input Nyquist bin across +/- Nyquist
        let v = spec[half] * 0.5;
        out[m - half] = v;
        out[half] = v;
    }
    fft::inverse(&mut out);
    let scale = m as f64 / n as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(Waveform {
        samples: out,
        sample_rate: target_rate,
        label: wf.label.clone(),
    })
}
