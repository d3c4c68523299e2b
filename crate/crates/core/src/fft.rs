//! FFT helpers shared by the pulse shaper, resampler and delay lines.

use num_complex::Complex64;
use rustfft::FftPlanner;

pub fn forward(data: &mut [Complex64]) {
    if data.is_empty() {
        return;
    }
    FftPlanner::new().plan_fft_forward(data.len()).process(data);
}

/// Inverse FFT including the 1/N scale.
pub fn inverse(data: &mut [Complex64]) {
    if data.is_empty() {
        return;
    }
    let n = data.len();
    FftPlanner::new().plan_fft_inverse(n).process(data);
    let scale = 1.0 / n as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Frequency in cycles/sample of DFT bin `k` of an `n`-point transform,
/// mapped to [-0.5, 0.5).
pub fn bin_frequency(k: usize, n: usize) -> f64 {
    let k = k as f64;
    let n_f = n as f64;
    if k < n_f / 2.0 {
        k / n_f
    } else {
        k / n_f - 1.0
    }
}

/// Cyclic convolution of a periodic record with a linear-phase FIR whose
/// centre tap sits at `taps.len() / 2`. Taps longer than the record are
/// folded modulo the record length, which is exact for periodic input.
pub fn cyclic_filter(x: &[Complex64], taps: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let centre = taps.len() / 2;
    let mut h = vec![Complex64::new(0.0, 0.0); n];
    for (k, &t) in taps.iter().enumerate() {
        let idx = (k as isize - centre as isize).rem_euclid(n as isize) as usize;
        h[idx].re += t;
    }
    let mut xf = x.to_vec();
    forward(&mut xf);
    forward(&mut h);
    for (a, b) in xf.iter_mut().zip(&h) {
        *a *= b;
    }
    inverse(&mut xf);
    xf
}

/// Cyclic delay by a possibly fractional number of samples, band-limited
/// (phase ramp in the DFT domain). Integer delays are exact rotations.
pub fn cyclic_delay(x: &[Complex64], delay: f64) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let rounded = delay.round();
    if (delay - rounded).abs() < 1e-12 {
        let shift = (rounded as i64).rem_euclid(n as i64) as usize;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (i, v) in x.iter().enumerate() {
            out[(i + shift) % n] = *v;
        }
        return out;
    }
    let mut xf = x.to_vec();
    forward(&mut xf);
    for (k, v) in xf.iter_mut().enumerate() {
        let f = bin_frequency(k, n);
        *v *= Complex64::from_polar(1.0, -std::f64::consts::TAU * f * delay);
    }
    inverse(&mut xf);
    xf
}
