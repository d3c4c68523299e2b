use super::Waveform;
use crate::error::{Error, Result};
use crate::rng;
use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use std::f64::consts::TAU;

/// Complex circular AWGN with variance `power / 10^(snr_db / 10)`, where
/// `power` is the measured mean power of `wf`. An infinite SNR returns the
/// input unchanged.
pub fn add_awgn(wf: &Waveform, snr_db: f64, seed: u64) -> Result<Waveform> {
    if wf.is_empty() {
        return Err(Error::invalid("cannot add noise to an empty waveform"));
    }
    if snr_db == f64::INFINITY {
        return Ok(wf.clone());
    }
    let variance = wf.power() / 10f64.powf(snr_db / 10.0);
    let mut r = rng::rng_for(seed, "awgn", 0);
    let samples = wf
        .samples
        .iter()
        .map(|&s| s + rng::complex_gaussian(&mut r, variance))
        .collect();
    Ok(wf.with_samples(samples))
}

/// Wiener (random-walk) laser phase noise for a Lorentzian linewidth.
pub fn add_phase_noise(wf: &Waveform, linewidth: f64, seed: u64) -> Result<Waveform> {
    if !(linewidth >= 0.0 && linewidth.is_finite()) {
        return Err(Error::invalid(format!("linewidth must be >= 0, got {linewidth}")));
    }
    if linewidth == 0.0 {
        return Ok(wf.clone());
    }
    let sigma = (TAU * linewidth / wf.sample_rate).sqrt();
    let step = Normal::new(0.0, sigma).expect("finite sigma");
    let mut r = rng::rng_for(seed, "phase-noise", 0);
    let mut phi = 0.0;
    let samples = wf
        .samples
        .iter()
        .map(|&s| {
            let out = s * Complex64::from_polar(1.0, phi);
            phi += step.sample(&mut r);
            out
        })
        .collect();
    Ok(wf.with_samples(samples))
}

/// Multiply by a complex exponential at `offset` Hz.
pub fn add_freq_offset(wf: &Waveform, offset: f64) -> Result<Waveform> {
    if !(offset.abs() < wf.sample_rate / 2.0) {
        return Err(Error::invalid(format!(
            "offset {offset} Hz aliases at {} Sa/s",
            wf.sample_rate
        )));
    }
    if offset == 0.0 {
        return Ok(wf.clone());
    }
    let w = TAU * offset / wf.sample_rate;
    let samples = wf
        .samples
        .iter()
        .enumerate()
        .map(|(n, &s)| s * Complex64::from_polar(1.0, w * n as f64))
        .collect();
    Ok(wf.with_samples(samples))
}
