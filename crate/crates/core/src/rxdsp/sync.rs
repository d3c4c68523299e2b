use crate::error::{Error, Result};
use crate::fft;
use crate::sigproc::{ModulationFormat, SymbolFrame};
use num_complex::Complex64;

pub const MIN_SYNC_TRAINING: usize = 256;
pub const MIN_FREQ_SYMBOLS: usize = 4096;

/// Offset `d` such that `tributary[(i + d) mod L] ~ training[i]`: the argmax
/// of the normalized cyclic cross-correlation magnitude. A second peak
/// within 1 dB of the maximum (more than one symbol away) is reported as
/// ambiguous.
pub fn frame_sync(tributary: &[Complex64], training: &SymbolFrame) -> Result<usize> {
    let t = training.len();
    let l = tributary.len();
    if t < MIN_SYNC_TRAINING {
        return Err(Error::invalid(format!(
            "training of {t} symbols is shorter than {MIN_SYNC_TRAINING}"
        )));
    }
    if l < t {
        return Err(Error::invalid("tributary is shorter than the training"));
    }
    let mut a = tributary.to_vec();
    let mut b = vec![Complex64::new(0.0, 0.0); l];
    b[..t].copy_from_slice(&training.symbols);
    fft::forward(&mut a);
    fft::forward(&mut b);
    let mut c: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y.conj()).collect();
    fft::inverse(&mut c);

    // sliding window energy of the tributary over t symbols (cyclic)
    let e_t: f64 = training.symbols.iter().map(|v| v.norm_sqr()).sum();
    let mut window: f64 = (0..t).map(|i| tributary[i].norm_sqr()).sum();
    let mut score = vec![0.0; l];
    for d in 0..l {
        let denom = (window * e_t).sqrt();
        score[d] = if denom > 0.0 { c[d].norm() / denom } else { 0.0 };
        window += tributary[(d + t) % l].norm_sqr() - tributary[d].norm_sqr();
    }
    let best = (0..l).max_by(|&i, &j| score[i].total_cmp(&score[j])).unwrap();
    let near = |d: usize| {
        let diff = d.abs_diff(best);
        diff.min(l - diff) <= 1
    };
    let limit = score[best] * 10f64.powf(-1.0 / 20.0);
    if let Some(other) = (0..l).find(|&d| !near(d) && score[d] >= limit) {
        return Err(Error::SyncAmbiguity {
            first: best.min(other),
            second: best.max(other),
        });
    }
    Ok(best)
}

/// Fourth-power spectral-peak frequency offset estimate in Hz.
///
/// For QPSK every symbol raised to the fourth power loses its modulation.
/// For 16-QAM only the inner and outer rings (whose points sit on the
/// diagonals) are used; middle-ring symbols are zeroed. The FFT length is
/// the next power of two at or above the input length, giving a resolution
/// of `baud / (4 * fft_len)`.
pub fn estimate_freq_offset(tributary: &[Complex64], format: ModulationFormat, baud: f64) -> Result<f64> {
    if tributary.len() < MIN_FREQ_SYMBOLS {
        return Err(Error::invalid(format!(
            "frequency estimation needs at least {MIN_FREQ_SYMBOLS} symbols"
        )));
    }
    let n = tributary.len().next_power_of_two();
    let p = crate::sigproc::mean_power(tributary);
    if p == 0.0 {
        return Err(Error::EstimateUnreliable("tributary carries no power".into()));
    }
    let mut z = vec![Complex64::new(0.0, 0.0); n];
    for (o, &s) in z.iter_mut().zip(tributary) {
        let r = s.norm_sqr() / p;
        let keep = match format {
            ModulationFormat::Qpsk => true,
            // ring radii^2 are 0.2, 1.0 and 1.8
            ModulationFormat::Qam16 => !(0.6..=1.4).contains(&r),
        };
        if keep && r > 0.0 {
            let u = s / s.norm();
            *o = u * u * u * u;
        }
    }
    fft::forward(&mut z);
    let mags: Vec<f64> = z.iter().map(|v| v.norm_sqr()).collect();
    let k = (0..n).max_by(|&i, &j| mags[i].total_cmp(&mags[j])).unwrap();
    let floor = mags.iter().sum::<f64>() / n as f64;
    if mags[k] < 20.0 * floor {
        return Err(Error::EstimateUnreliable(format!(
            "fourth-power peak only {:.1} dB above the spectral floor",
            10.0 * (mags[k] / floor).log10()
        )));
    }
    Ok(fft::bin_frequency(k, n) * baud / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::sigproc::{generate_prbs, map_bits, PrbsKind};

    fn frame(format: ModulationFormat, n: usize, seed: u64) -> SymbolFrame {
        let bits = generate_prbs(seed, n * format.bits_per_symbol(), PrbsKind::Uniform).unwrap();
        map_bits(&bits, format, 30e9).unwrap()
    }

    #[test]
    fn finds_constructed_shift() {
        let data = frame(ModulationFormat::Qpsk, 4096, 1);
        let training = SymbolFrame::new(data.symbols[..1024].to_vec(), data.format, data.baud).unwrap();
        let mut trib = data.symbols.clone();
        trib.rotate_right(777);
        assert_eq!(frame_sync(&trib, &training).unwrap(), 777);
        let rotated: Vec<Complex64> = trib.iter().map(|v| v * Complex64::from_polar(1.0, 1.234)).collect();
        assert_eq!(frame_sync(&rotated, &training).unwrap(), 777);
    }

    #[test]
    fn robust_at_zero_db_snr() {
        let mut hits = 0;
        for seed in 0..100u64 {
            let data = frame(ModulationFormat::Qpsk, 4096, 1000 + seed);
            let training = SymbolFrame::new(data.symbols[..1024].to_vec(), data.format, data.baud).unwrap();
            let shift = (seed as usize * 37) % 4096;
            let mut r = rng::rng_for(seed, "sync-noise", 0);
            let mut trib: Vec<Complex64> = data
                .symbols
                .iter()
                .map(|v| v + rng::complex_gaussian(&mut r, 1.0))
                .collect();
            trib.rotate_right(shift);
            if frame_sync(&trib, &training).ok() == Some(shift) {
                hits += 1;
            }
        }
        assert!(hits >= 99, "{hits}");
    }

    #[test]
    fn periodic_training_is_ambiguous() {
        let base = frame(ModulationFormat::Qpsk, 256, 5);
        let trib: Vec<Complex64> = base.symbols.iter().cycle().take(1024).cloned().collect();
        assert!(matches!(frame_sync(&trib, &base), Err(Error::SyncAmbiguity { .. })));
        let short = SymbolFrame::new(base.symbols[..100].to_vec(), base.format, base.baud).unwrap();
        assert!(frame_sync(&trib, &short).is_err());
    }

    fn with_offset(x: &[Complex64], offset: f64, baud: f64) -> Vec<Complex64> {
        x.iter()
            .enumerate()
            .map(|(n, v)| v * Complex64::from_polar(1.0, std::f64::consts::TAU * offset * n as f64 / baud))
            .collect()
    }

    #[test]
    fn qpsk_offset_recovered() {
        let n = 1 << 16;
        let baud = 30e9;
        let res = baud / (4.0 * n as f64);
        let data = frame(ModulationFormat::Qpsk, n, 3);
        let f0 = estimate_freq_offset(&data.symbols, ModulationFormat::Qpsk, baud).unwrap();
        assert!(f0.abs() <= res);
        let shifted = with_offset(&data.symbols, 100e6, baud);
        let f1 = estimate_freq_offset(&shifted, ModulationFormat::Qpsk, baud).unwrap();
        assert!((f1 - 100e6).abs() <= res, "{f1}");
    }

    #[test]
    fn shift_property_both_formats() {
        let n = 1 << 15;
        let baud = 30e9;
        let res = baud / (4.0 * n as f64);
        for (k, format) in [ModulationFormat::Qpsk, ModulationFormat::Qam16]
            .into_iter()
            .enumerate()
        {
            let data = frame(format, n, 10 + k as u64);
            let mut r = rng::rng_for(k as u64, "fo-noise", 0);
            let noisy: Vec<Complex64> = data
                .symbols
                .iter()
                .map(|v| v + rng::complex_gaussian(&mut r, 0.01))
                .collect();
            let base = with_offset(&noisy, 37e6, baud);
            let moved = with_offset(&base, 250e6, baud);
            let a = estimate_freq_offset(&base, format, baud).unwrap();
            let b = estimate_freq_offset(&moved, format, baud).unwrap();
            assert!((b - a - 250e6).abs() <= 2.0 * res, "{format:?}: {a} {b}");
        }
    }

    #[test]
    fn noise_only_is_unreliable() {
        let mut r = rng::rng_for(1, "fo-noise-only", 0);
        let noise: Vec<Complex64> = (0..8192).map(|_| rng::complex_gaussian(&mut r, 1.0)).collect();
        assert!(matches!(
            estimate_freq_offset(&noise, ModulationFormat::Qpsk, 30e9),
            Err(Error::EstimateUnreliable(_))
        ));
    }
}
