//! End-to-end acceptance checks. Run with
//! `cargo test -p mdmlink-core --test acceptance [-- N ...]` to select
//! criteria by number. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use mdmlink::channel::{
    gate, jones_matrices, pair_polarizations, synthesize_transfer_matrix, tdm_combine, CrosstalkProfile, DualPol,
    JonesMode, JonesSpec, TdmPlan,
};
use mdmlink::config::{EchoConfig, PhaseModel};
use mdmlink::experiment::{self, evaluate, simulate_point, slot_jitter, transmit};
use mdmlink::metrics::{self, BerClass, FEC_THRESHOLD};
use mdmlink::rxdsp::{fd_lms_streams, td_lms_reference, tdm_stitch, EqualizerConfig, EqualizerStructure, StitchConfig};
use mdmlink::sigproc::{
    add_awgn, generate_prbs, map_bits, rms_error, rrc_taps, ModulationFormat, PrbsKind, RrcFilter, SymbolFrame,
    Waveform, DEFAULT_RRC_SPAN,
};
use mdmlink::ExperimentConfig;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;

// ---------------------------------------------------------------- 1

fn capacity_arithmetic() -> Outcome {
    let cap = metrics::net_capacity(11, 30e9, 4, 0.07).unwrap();
    let se = metrics::spectral_efficiency(cap.net_bps, 33e9).unwrap();
    let net_tb = cap.net_bps / 1e12;
    let pass = (net_tb - 1.2336).abs() < 5e-5 && (net_tb * 100.0).round() / 100.0 == 1.23 && (se - 37.2).abs() < 0.5;
    outcome(pass, format!("net {net_tb:.4} Tb/s, SE {se:.2} b/s/Hz over 33 GHz"))
}

// ---------------------------------------------------------------- 2

fn noiseless_loopback() -> Outcome {
    let mut worst_bits = usize::MAX;
    let mut total_errors = 0;
    let mut all_bound = true;
    for format in [ModulationFormat::Qpsk, ModulationFormat::Qam16] {
        let mut cfg = ExperimentConfig::default();
        cfg.signal.format = format;
        cfg.channel.phases = PhaseModel::Zero;
        cfg.impairments.snr_db = vec![f64::INFINITY];
        let run = match experiment::run_simulation(&cfg) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("{}: {e}", format.name())),
        };
        for p in &run.points {
            for e in &p.ber.per_mode {
                worst_bits = worst_bits.min(e.bits);
                total_errors += e.errors;
                all_bound &= e.class == BerClass::ErrorFreeBound;
            }
        }
    }
    let pass = total_errors == 0 && all_bound && worst_bits >= 200_000;
    outcome(
        pass,
        format!("QPSK + 16-QAM, 7 wavelengths: {total_errors} errors, min {worst_bits} bits/mode, all error_free_bound: {all_bound}"),
    )
}

// ---------------------------------------------------------------- 3

struct SeedResult {
    worst_mimo: f64,
    min_ratio: f64,
    max_align_err: f64,
}

/// MIMO and diagonal-only equalization of the same received points on all
/// default wavelengths.
fn mimo_vs_diagonal(cfg: &ExperimentConfig) -> mdmlink::Result<SeedResult> {
    let tx = transmit(cfg)?;
    let mut diag = cfg.equalizer.clone();
    diag.structure = EqualizerStructure::Diagonal;
    let snr = cfg.impairments.snr_db[0];
    let jitter = slot_jitter(cfg, 6);
    let mut out = SeedResult {
        worst_mimo: 0.0,
        min_ratio: f64::INFINITY,
        max_align_err: 0.0,
    };
    for (w, &wl) in cfg.channel.wavelengths_nm.iter().enumerate() {
        let rx = simulate_point(cfg, &tx, wl, w, snr, w)?;
        for (a, j) in rx.tribs.alignment.iter().zip(&jitter) {
            out.max_align_err = out.max_align_err.max((a.offset as f64 - j).abs());
        }
        let m = evaluate(cfg, &cfg.equalizer, &tx, &rx.link, &rx.tribs)?.mean_ber();
        let d = evaluate(cfg, &diag, &tx, &rx.link, &rx.tribs)?.mean_ber();
        out.worst_mimo = out.worst_mimo.max(m);
        out.min_ratio = out.min_ratio.min(d / m.max(1e-300));
    }
    Ok(out)
}

fn mimo_seed_sweep(base: &ExperimentConfig, label: &str) -> (usize, Vec<SeedResult>, String) {
    let mut passed = 0;
    let mut results = Vec::new();
    let mut lines = Vec::new();
    for seed in SEEDS {
        let mut cfg = base.clone();
        cfg.seeds.master = seed;
        match mimo_vs_diagonal(&cfg) {
            Ok(r) => {
                let ok = r.worst_mimo < FEC_THRESHOLD && r.min_ratio >= 10.0;
                passed += ok as usize;
                eprintln!(
                    "  [{label}] seed {seed}: worst MIMO mean BER {:.2e}, min diagonal/MIMO {:.1}x {}",
                    r.worst_mimo,
                    r.min_ratio,
                    if ok { "ok" } else { "FAIL" }
                );
                results.push(r);
            }
            Err(e) => {
                eprintln!("  [{label}] seed {seed}: {e}");
                lines.push(format!("seed {seed}: {e}"));
            }
        }
    }
    (passed, results, lines.join("; "))
}

fn mimo_necessity(budget: Duration) -> Outcome {
    let t = Instant::now();
    let (passed, results, errors) = mimo_seed_sweep(&ExperimentConfig::default(), "c3");
    let elapsed = t.elapsed();
    let worst = results.iter().map(|r| r.worst_mimo).fold(0.0, f64::max);
    let ratio = results.iter().map(|r| r.min_ratio).fold(f64::INFINITY, f64::min);
    outcome(
        passed >= 9 && elapsed < budget,
        format!(
            "{passed}/10 seeds pass on all 7 wavelengths (worst MIMO {worst:.2e}, min ratio {ratio:.1}x), {:.0} s{}",
            elapsed.as_secs_f64(),
            if errors.is_empty() {
                String::new()
            } else {
                format!("; {errors}")
            }
        ),
    )
}

// ---------------------------------------------------------------- 4

fn symbols(format: ModulationFormat, n: usize, seed: u64) -> Vec<Complex64> {
    let bits = generate_prbs(seed, n * format.bits_per_symbol(), PrbsKind::Uniform).unwrap();
    map_bits(&bits, format, 30e9).unwrap().symbols
}

/// Largest entry error after removing one common phase per output row.
fn max_err_up_to_row_phase(est: &DMatrix<Complex64>, truth: &DMatrix<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..truth.nrows() {
        let c: Complex64 = (0..truth.ncols()).map(|j| truth[(i, j)] * est[(i, j)].conj()).sum();
        let rot = Complex64::from_polar(1.0, c.arg());
        for j in 0..truth.ncols() {
            worst = worst.max((est[(i, j)] * rot - truth[(i, j)]).norm());
        }
    }
    worst
}

fn oracle_equivalence() -> Outcome {
    let c = Complex64::new;
    let h = DMatrix::from_row_slice(2, 2, &[c(0.8, 0.0), c(0.0, 0.6), c(0.0, 0.6), c(0.8, 0.0)])
        * Complex64::from_polar(1.0, 0.3);
    let s: Vec<Vec<Complex64>> = (0..2).map(|k| symbols(ModulationFormat::Qpsk, 8192, 10 + k)).collect();
    let x: Vec<Vec<Complex64>> = (0..2)
        .map(|i| {
            (0..s[0].len())
                .map(|n| h[(i, 0)] * s[0][n] + h[(i, 1)] * s[1][n])
                .collect()
        })
        .collect();
    let inputs: Vec<&[Complex64]> = x.iter().map(|v| v.as_slice()).collect();
    let refs: Vec<&[Complex64]> = s.iter().map(|v| v.as_slice()).collect();
    let cfg = EqualizerConfig {
        num_taps: 32,
        training_symbols: 4096,
        step: 0.1,
        ..EqualizerConfig::default()
    };
    let fd = match fd_lms_streams(&inputs, &refs, &[0, 1], ModulationFormat::Qpsk, &cfg) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("fd: {e}")),
    };
    let (_, td) = match td_lms_reference(&inputs, &refs, &[0, 1], 32, 0.005, 4096, 3) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("td: {e}")),
    };
    let (mse_fd, mse_td) = (fd.state.final_mse(), td.final_mse());
    let err_fd = fd
        .state
        .channel_estimate()
        .map(|e| max_err_up_to_row_phase(&e, &h))
        .unwrap_or(f64::INFINITY);
    let err_td = td
        .channel_estimate()
        .map(|e| max_err_up_to_row_phase(&e, &h))
        .unwrap_or(f64::INFINITY);
    outcome(
        mse_fd < 1e-3 && mse_td < 1e-3 && err_fd < 1e-2 && err_td < 1e-2,
        format!("MSE fd {mse_fd:.1e} td {mse_td:.1e}; max entry error fd {err_fd:.1e} td {err_td:.1e}"),
    )
}

// ---------------------------------------------------------------- 5

fn estimation_fidelity() -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.tdm.jones = JonesMode::Identity;
    cfg.impairments.snr_db = vec![f64::INFINITY];
    let run = match experiment::run_simulation(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut worst = 0.0f64;
    let mut compared = 0;
    for p in &run.points {
        let Some(est) = &p.intensity_db else {
            return outcome(false, format!("no estimate at {} nm: {:?}", p.wavelength_nm, p.notes));
        };
        for (e, t) in est.iter().zip(p.true_intensity_db.iter()) {
            if *t > -30.0 {
                worst = worst.max((e - t).abs());
                compared += 1;
            }
        }
    }
    outcome(
        worst <= 0.5,
        format!("{compared} entries above -30 dB on 7 wavelengths, worst deviation {worst:.3} dB"),
    )
}

// ---------------------------------------------------------------- 6

fn tdm_round_trip(budget: Duration, c3_budget: Duration) -> Outcome {
    let t = Instant::now();
    let baud = 30e9;
    let l = 4096;
    let modes = 11;
    let frames: Vec<SymbolFrame> = (0..modes)
        .map(|m| {
            let bits = generate_prbs(m as u64 + 1, 2 * l, PrbsKind::Uniform).unwrap();
            map_bits(&bits, ModulationFormat::Qpsk, baud).unwrap()
        })
        .collect();
    let filter = RrcFilter::new(0.01, DEFAULT_RRC_SPAN, 2).unwrap();
    let wfs: Vec<Waveform> = frames.iter().map(|f| filter.shape(f).unwrap()).collect();
    let plan = TdmPlan::default_for(modes, l as f64 / baud).unwrap();
    let slots = pair_polarizations(&wfs, &plan, &JonesSpec::random(3)).unwrap();

    // Gate a periodic copy of each slot signal and keep its window.
    let n = slots.len();
    let gated: Vec<DualPol<Waveform>> = slots
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let cut = |wf: &Waveform| {
                let tiled: Vec<Complex64> = (0..n).flat_map(|_| wf.samples.iter().copied()).collect();
                let mut full = wf.with_samples(tiled);
                full.samples.rotate_right(k * wf.len());
                let g = gate(&full, plan.duty(), plan.period(), k, baud).unwrap();
                let w = wf.len();
                let outside = g.samples[..k * w]
                    .iter()
                    .chain(&g.samples[(k + 1) * w..])
                    .all(|v| v.norm() == 0.0);
                assert!(outside, "gate leaked outside slot {k}");
                wf.with_samples(g.samples[k * w..(k + 1) * w].to_vec())
            };
            DualPol {
                x: cut(&s.x),
                y: cut(&s.y),
            }
        })
        .collect();
    let record = tdm_combine(&gated, &plan, &[], 0).unwrap();
    let stitch = StitchConfig::default();
    let tribs = tdm_stitch(&record, &plan, &frames, &stitch).unwrap();
    let mut rms = 0.0f64;
    for tr in &tribs.tributaries {
        let want = filter.matched_filter(&slots[tr.slot].get(tr.pol).samples, 0);
        rms = rms.max(rms_error(&tr.symbols, &want));
    }

    let jitter = [0.5, -0.5, 0.3, -0.2, 0.45, -0.35];
    let record = tdm_combine(&slots, &plan, &jitter, 1).unwrap();
    let tribs = tdm_stitch(&record, &plan, &frames, &stitch).unwrap();
    let align = tribs
        .alignment
        .iter()
        .zip(jitter)
        .map(|(a, j)| (a.offset as f64 - j).abs())
        .fold(0.0, f64::max);
    let round_trip_time = t.elapsed();

    // The full link with random +-0.5-sample delay-line errors.
    let t3 = Instant::now();
    let mut cfg = ExperimentConfig::default();
    cfg.tdm.random_jitter_samples = 0.5;
    let (passed, results, errors) = mimo_seed_sweep(&cfg, "c6");
    let c3_time = t3.elapsed();
    let link_align = results.iter().map(|r| r.max_align_err).fold(0.0, f64::max);

    let pass = rms < 1e-9
        && align <= 1.0
        && link_align <= 1.0
        && passed >= 9
        && round_trip_time < budget
        && c3_time < c3_budget;
    outcome(
        pass,
        format!(
            "exact RMS {rms:.1e}; jitter alignment error {align:.2} (bench), {link_align:.2} (link) samples; \
             jittered link {passed}/10 seeds{}; round trip {:.1} s, jittered sweep {:.0} s",
            if errors.is_empty() {
                String::new()
            } else {
                format!(" ({errors})")
            },
            round_trip_time.as_secs_f64(),
            c3_time.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 7

fn echo_side_lobe() -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.channel.wavelengths_nm = vec![1550.0];
    cfg.impairments.echoes = vec![EchoConfig {
        delay_symbols: 5.0,
        level_db: -20.0,
    }];
    let run = match experiment::run_simulation(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let p = &run.points[0];
    let (Some(profile), Some(peak)) = (&p.impulse_profile_db, p.impulse_peak_lag) else {
        return outcome(false, format!("no impulse response: {:?}", p.notes));
    };
    // The equalizer cancels a delayed echo with a tap `delay` lags after
    // its main tap.
    let lag = peak + 5;
    let lobe = profile.get(lag).copied().unwrap_or(f64::NEG_INFINITY);
    let main = profile[peak];
    let others = profile
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != peak && *k != lag)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    outcome(
        main.abs() < 1e-12 && (-25.0..=-15.0).contains(&lobe),
        format!("main peak {main:.1} dB at lag {peak}; side lobe {lobe:.1} dB at lag {lag}; largest other lag {others:.1} dB"),
    )
}

// ---------------------------------------------------------------- 8

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn cascade_isi(taps: &[f64]) -> f64 {
    let n = taps.len();
    let mid = n - 1;
    let at = |k: usize| -> f64 {
        // c[k] = sum_i taps[i] * taps[k - i]
        let lo = k.saturating_sub(n - 1);
        let hi = k.min(n - 1);
        (lo..=hi).map(|i| taps[i] * taps[k - i]).sum()
    };
    let peak = at(mid);
    let mut worst = 0.0f64;
    let mut k = mid % 2;
    while k < 2 * n - 1 {
        if k != mid {
            worst = worst.max(at(k).abs());
        }
        k += 2;
    }
    worst / peak.abs()
}

fn hygiene() -> Outcome {
    let mut fails = Vec::new();

    let isi = cascade_isi(&rrc_taps(0.01, DEFAULT_RRC_SPAN, 2).unwrap());
    if isi >= 1e-3 {
        fails.push("rrc");
    }
    let isi_128 = cascade_isi(&rrc_taps(0.01, 128, 2).unwrap());

    let plan = TdmPlan::default_for(11, 1e-6).unwrap();
    let mut jones_err = 0.0f64;
    for seed in 0..200 {
        for u in jones_matrices(&plan, &JonesSpec::random(seed)) {
            let d = u * u.adjoint() - nalgebra::Matrix2::identity();
            jones_err = jones_err.max(d.iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
    }
    if jones_err > 1e-12 {
        fails.push("jones");
    }

    let mut sigma_max = 0.0f64;
    let profile = CrosstalkProfile::builtin(11);
    let cfg = ExperimentConfig::default();
    for seed in 0..20 {
        for (w, &wl) in cfg.channel.wavelengths_nm.iter().enumerate() {
            let m = synthesize_transfer_matrix(&profile, wl, seed).unwrap();
            sigma_max = sigma_max.max(m.passive().max_singular_value());
            let mut c = cfg.clone();
            c.seeds.master = seed;
            let link = experiment::link_model(&c, wl, w, 18.0).unwrap();
            let sys = link.system_matrix();
            sigma_max = sigma_max.max(sys.singular_values().max());
        }
    }
    if sigma_max > 1.0 + 1e-9 {
        fails.push("passivity");
    }

    let n = 1 << 18;
    let mut r = mdmlink::rng::seeded(7);
    let signal: Vec<Complex64> = (0..n).map(|_| mdmlink::rng::uniform_phase(&mut r)).collect();
    let wf = Waveform::new(signal, 60e9, "unit").unwrap();
    let mut awgn_dev = 0.0f64;
    for (k, snr) in [0.0, 10.0, 18.0, 30.0].into_iter().enumerate() {
        let noisy = add_awgn(&wf, snr, 100 + k as u64).unwrap();
        let var = noisy
            .samples
            .iter()
            .zip(&wf.samples)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / n as f64;
        let want = 10f64.powf(-snr / 10.0);
        awgn_dev = awgn_dev.max((var / want - 1.0).abs());
    }
    if awgn_dev > 0.05 {
        fails.push("awgn");
    }

    let mut cfg = ExperimentConfig::default();
    cfg.channel.wavelengths_nm = vec![1550.0];
    cfg.impairments.snr_db = (10..=25).map(f64::from).collect();
    let (rho, bers) = match experiment::run_simulation(&cfg) {
        Ok(run) => {
            let bers: Vec<f64> = run.points.iter().map(|p| p.mean_ber()).collect();
            (spearman(&cfg.impairments.snr_db, &bers), bers)
        }
        Err(e) => {
            eprintln!("  waterfall: {e}");
            (f64::NAN, Vec::new())
        }
    };
    if !(rho < -0.9) {
        fails.push("waterfall");
    }
    eprintln!(
        "  waterfall BER 10..25 dB: {:?}",
        bers.iter().map(|b| format!("{b:.1e}")).collect::<Vec<_>>()
    );

    outcome(
        fails.is_empty(),
        format!(
            "RRC off-peak {isi:.1e} (span {DEFAULT_RRC_SPAN}; span 128 gives {isi_128:.1e}); Jones {jones_err:.1e}; \
             sigma_max {sigma_max:.12}; AWGN variance within {:.1}%; waterfall rho {rho:.3}{}",
            100.0 * awgn_dev,
            if fails.is_empty() {
                String::new()
            } else {
                format!("; failed: {}", fails.join(", "))
            }
        ),
    )
}

// ----------------------------------------------------------------

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let min = |m: u64| Duration::from_secs(60 * m);
    let criteria: Vec<(usize, &str, Duration, Box<dyn Fn() -> Outcome>)> = vec![
        (
            1,
            "capacity arithmetic",
            Duration::from_secs(1),
            Box::new(capacity_arithmetic),
        ),
        (2, "noiseless loopback", min(2), Box::new(noiseless_loopback)),
        (
            3,
            "MIMO necessity and sufficiency",
            min(10),
            Box::new(move || mimo_necessity(min(10))),
        ),
        (
            4,
            "FD vs TD oracle equivalence",
            Duration::from_secs(30),
            Box::new(oracle_equivalence),
        ),
        (5, "channel-estimation fidelity", min(5), Box::new(estimation_fidelity)),
        // The runtime budget covers the round trip itself; the jittered
        // repeat of criterion 3 gets that criterion's budget.
        (
            6,
            "TDM round trip",
            min(2) + min(10),
            Box::new(move || tdm_round_trip(min(2), min(10))),
        ),
        (7, "impulse-response side lobe", min(2), Box::new(echo_side_lobe)),
        (8, "numerical hygiene", min(2), Box::new(hygiene)),
    ];
    let mut failed = 0;
    for (n, name, budget, run) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        let elapsed = t.elapsed();
        let pass = o.pass && elapsed < budget;
        failed += !pass as usize;
        println!(
            "criterion {n} ({name}): {} - {} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
