use crate::error::{Error, Result};
use crate::sigproc::SymbolFrame;
use num_complex::Complex64;

/// Block-average carrier phase removal.
///
/// For each block of `block` symbols the phase `arg sum(ref * conj(sym))` is
/// estimated and removed. With a reference frame this is data-aided; without
/// one, the references are hard decisions taken after rotating the block by
/// the previous block's estimate, so slowly drifting phase is followed
/// sequentially.
pub fn phase_track(symbols: &SymbolFrame, reference: Option<&SymbolFrame>, block: usize) -> Result<SymbolFrame> {
    if block < 16 {
        return Err(Error::invalid(format!("phase block {block} is below 16")));
    }
    if let Some(r) = reference {
        if r.len() != symbols.len() {
            return Err(Error::invalid("reference length differs from the symbols"));
        }
    }
    let format = symbols.format;
    let mut out = Vec::with_capacity(symbols.len());
    let mut previous = Complex64::new(1.0, 0.0);
    for (b, chunk) in symbols.symbols.chunks(block).enumerate() {
        let acc: Complex64 = match reference {
            Some(r) => chunk
                .iter()
                .zip(&r.symbols[b * block..])
                .map(|(s, r)| r * s.conj())
                .sum(),
            None => chunk.iter().map(|s| format.decide(s * previous) * s.conj()).sum(),
        };
        let rot = if acc.norm() > 0.0 { acc / acc.norm() } else { previous };
        out.extend(chunk.iter().map(|s| s * rot));
        previous = rot;
    }
    SymbolFrame::new(out, format, symbols.baud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::evm;
    use crate::rng;
    use crate::sigproc::{generate_prbs, map_bits, ModulationFormat, PrbsKind};

    fn frame(format: ModulationFormat, n: usize, seed: u64) -> SymbolFrame {
        let bits = generate_prbs(seed, n * format.bits_per_symbol(), PrbsKind::Uniform).unwrap();
        map_bits(&bits, format, 30e9).unwrap()
    }

    #[test]
    fn constant_rotation_removed() {
        let clean = frame(ModulationFormat::Qpsk, 4096, 1);
        let rotated = SymbolFrame::new(
            clean
                .symbols
                .iter()
                .map(|s| s * Complex64::from_polar(1.0, std::f64::consts::PI / 5.0))
                .collect(),
            clean.format,
            clean.baud,
        )
        .unwrap();
        let fixed = phase_track(&rotated, None, 64).unwrap();
        assert!(evm(&fixed, &clean).unwrap() < 0.1);
        let aided = phase_track(&rotated, Some(&clean), 64).unwrap();
        assert!(evm(&aided, &clean).unwrap() < 0.1);
    }

    #[test]
    fn clean_input_unchanged() {
        let clean = frame(ModulationFormat::Qam16, 4096, 2);
        let out = phase_track(&clean, None, 64).unwrap();
        for (a, b) in out.symbols.iter().zip(&clean.symbols) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(phase_track(&clean, None, 8).is_err());
    }

    #[test]
    fn tracking_helps_under_laser_phase_noise() {
        use crate::sigproc::{add_awgn, add_phase_noise, Waveform};
        // 100 kHz linewidth at 30 GBaud, one sample per symbol
        for seed in 0..20u64 {
            let clean = frame(ModulationFormat::Qam16, 1 << 14, 100 + seed);
            let wf = Waveform::new(clean.symbols.clone(), 30e9, "").unwrap();
            let mut noisy = add_phase_noise(&wf, 100e3, seed).unwrap();
            // common offset so the untracked reference is visibly rotated
            let mut r = rng::rng_for(seed, "pt-offset", 0);
            let rot = rng::uniform_phase(&mut r).powf(0.05);
            noisy.samples.iter_mut().for_each(|s| *s *= rot);
            let noisy = add_awgn(&noisy, 25.0, seed).unwrap();
            let rx = SymbolFrame::new(noisy.samples, clean.format, clean.baud).unwrap();
            let before = evm(&rx, &clean).unwrap();
            let after = evm(&phase_track(&rx, None, 64).unwrap(), &clean).unwrap();
            assert!(after < before, "seed {seed}: {after} >= {before}");
        }
    }
}
