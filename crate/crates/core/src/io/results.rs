//! Result files of a run directory:
//!
//! | file | content |
//! |------|---------|
//! | `config.toml` | the exact configuration of the run |
//! | `summary.txt` | flat `key = value` summary |
//! | `ber.csv` | `point,wavelength_nm,snr_db,mode,bits,errors,ber,class,evm_percent` |
//! | `intensity_<p>.csv` | estimated intensity matrix of point `p` (matrix CSV format) |
//! | `intensity_true_<p>.csv` | the same view of the simulated link |
//! | `impulse_response.csv` | `point,lag,db` |
//! | `mse_history.csv` | `point,block,mse` |
//! | `constellation.csv` | `point,mode,re,im` |
//! | `alignment.csv` | `point,slot,offset,metric` |
//!
//! Floats are written in shortest round-trip form, so identical results
//! give byte-identical files.

use super::IntensityTable;
use crate::channel::mode_label;
use crate::error::{Error, Result};
use crate::experiment::{MatrixCharacterization, RunResult, SweepPoint};
use crate::metrics::BerClass;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const BER_HEADER: &str = "point,wavelength_nm,snr_db,mode,bits,errors,ber,class,evm_percent";
pub const IMPULSE_HEADER: &str = "point,lag,db";
pub const MSE_HEADER: &str = "point,block,mse";
pub const CONSTELLATION_HEADER: &str = "point,mode,re,im";
pub const ALIGNMENT_HEADER: &str = "point,slot,offset,metric";
pub const SWEEP_HEADER: &str =
    "index,value,seed,status,point,wavelength_nm,snr_db,mean_ber,best_ber,worst_ber,worst_mode,class,error";

fn table_of(db: &DMatrix<f64>, wavelength_nm: f64) -> IntensityTable {
    IntensityTable {
        wavelength_nm,
        labels: (0..db.ncols()).map(mode_label).collect(),
        db: (0..db.nrows())
            .map(|i| (0..db.ncols()).map(|j| db[(i, j)]).collect())
            .collect(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

/// Flat `key = value` summary of a run.
pub fn summary_text(r: &RunResult) -> String {
    let mut s = String::new();
    let c = &r.config;
    let cap = &r.capacity;
    let w = |s: &mut String, k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
    w(&mut s, "seed", c.seeds.master.to_string());
    w(&mut s, "format", c.signal.format.name().to_string());
    w(&mut s, "modes", c.channel.modes.to_string());
    w(&mut s, "baud", c.signal.baud.to_string());
    w(&mut s, "points", r.points.len().to_string());
    w(&mut s, "mean_ber", r.mean_ber().to_string());
    w(&mut s, "capacity.gross_bps", cap.gross_bps.to_string());
    w(&mut s, "capacity.net_bps", cap.net_bps.to_string());
    w(&mut s, "capacity.fec_overhead", cap.fec_overhead.to_string());
    w(&mut s, "capacity.grid_hz", cap.grid_hz.to_string());
    w(
        &mut s,
        "capacity.spectral_efficiency_bps_hz",
        cap.spectral_efficiency_bps_hz.to_string(),
    );
    w(&mut s, "capacity.occupied_hz", cap.occupied_hz.to_string());
    w(
        &mut s,
        "capacity.spectral_efficiency_occupied_bps_hz",
        cap.spectral_efficiency_occupied_bps_hz.to_string(),
    );
    for (i, p) in r.points.iter().enumerate() {
        let k = |name: &str| format!("point.{i}.{name}");
        w(&mut s, &k("wavelength_nm"), p.wavelength_nm.to_string());
        w(&mut s, &k("snr_db"), p.snr_db.to_string());
        w(&mut s, &k("noise_seed"), p.noise_seed.to_string());
        w(&mut s, &k("mean_ber"), p.ber.mean_ber().to_string());
        w(&mut s, &k("best_ber"), p.ber.best_ber().to_string());
        w(&mut s, &k("worst_ber"), p.ber.worst_ber().to_string());
        w(&mut s, &k("worst_mode"), mode_label(p.ber.worst_mode()));
        w(&mut s, &k("bits"), p.ber.bits_counted().to_string());
        w(&mut s, &k("errors"), p.ber.errors_counted().to_string());
        w(&mut s, &k("class"), p.ber.class().to_string());
        w(&mut s, &k("converged"), p.converged.to_string());
        w(
            &mut s,
            &k("final_mse"),
            p.mse_history.last().copied().unwrap_or(f64::NAN).to_string(),
        );
        w(&mut s, &k("mdl_link_db"), p.mdl_link_db.to_string());
        w(&mut s, &k("mdl_estimated_db"), opt(p.mdl_estimated_db));
        w(&mut s, &k("freq_offset_estimate_hz"), opt(p.freq_offset_estimate));
        w(
            &mut s,
            &k("impulse_peak_lag"),
            opt(p.impulse_peak_lag.map(|v| v as f64)),
        );
        for (n, note) in p.notes.iter().enumerate() {
            w(&mut s, &k(&format!("note.{n}")), note.clone());
        }
    }
    s
}

pub fn ber_csv(r: &RunResult) -> String {
    let mut s = format!("{BER_HEADER}\n");
    for (i, p) in r.points.iter().enumerate() {
        for (m, (e, evm)) in p.ber.per_mode.iter().zip(&p.ber.evm_percent).enumerate() {
            writeln!(
                s,
                "{i},{},{},{},{},{},{},{},{}",
                p.wavelength_nm,
                p.snr_db,
                mode_label(m),
                e.bits,
                e.errors,
                e.ber,
                e.class,
                evm
            )
            .unwrap();
        }
    }
    s
}

/// Write every result file of a run into `dir` (created if needed).
/// Returns the written paths.
pub fn write_run(dir: &Path, r: &RunResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files: Vec<(PathBuf, String)> = vec![
        (dir.join("config.toml"), r.config.to_toml()),
        (dir.join("summary.txt"), summary_text(r)),
        (dir.join("ber.csv"), ber_csv(r)),
    ];
    let mut impulse = format!("{IMPULSE_HEADER}\n");
    let mut mse = format!("{MSE_HEADER}\n");
    let mut constellation = format!("{CONSTELLATION_HEADER}\n");
    let mut alignment = format!("{ALIGNMENT_HEADER}\n");
    for (i, p) in r.points.iter().enumerate() {
        if let Some(db) = &p.intensity_db {
            files.push((
                dir.join(format!("intensity_{i}.csv")),
                table_of(db, p.wavelength_nm).to_csv(),
            ));
        }
        files.push((
            dir.join(format!("intensity_true_{i}.csv")),
            table_of(&p.true_intensity_db, p.wavelength_nm).to_csv(),
        ));
        if let Some(profile) = &p.impulse_profile_db {
            for (l, v) in profile.iter().enumerate() {
                writeln!(impulse, "{i},{l},{v}").unwrap();
            }
        }
        for (b, v) in p.mse_history.iter().enumerate() {
            writeln!(mse, "{i},{b},{v}").unwrap();
        }
        for (m, pts) in p.constellation.iter().enumerate() {
            for z in pts {
                writeln!(constellation, "{i},{},{},{}", mode_label(m), z.re, z.im).unwrap();
            }
        }
        for (k, a) in p.alignment.iter().enumerate() {
            writeln!(alignment, "{i},{k},{},{}", a.offset, a.metric).unwrap();
        }
    }
    files.push((dir.join("impulse_response.csv"), impulse));
    files.push((dir.join("mse_history.csv"), mse));
    files.push((dir.join("constellation.csv"), constellation));
    files.push((dir.join("alignment.csv"), alignment));
    for (path, text) in &files {
        fs::write(path, text)?;
    }
    Ok(files.into_iter().map(|f| f.0).collect())
}

/// Sweep table: one row per run point of every sweep value (failed values
/// get one `failed` row carrying the error).
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for (i, sp) in points.iter().enumerate() {
        match &sp.result {
            Ok(r) => {
                for (k, p) in r.points.iter().enumerate() {
                    writeln!(
                        s,
                        "{i},{},{},ok,{k},{},{},{},{},{},{},{},",
                        sp.value,
                        sp.seed,
                        p.wavelength_nm,
                        p.snr_db,
                        p.ber.mean_ber(),
                        p.ber.best_ber(),
                        p.ber.worst_ber(),
                        mode_label(p.ber.worst_mode()),
                        p.ber.class()
                    )
                    .unwrap();
                }
            }
            Err(e) => {
                let msg = e.to_string().replace(['"', '\n'], " ");
                writeln!(s, "{i},{},{},failed,,,,,,,,,\"{msg}\"", sp.value, sp.seed).unwrap();
            }
        }
    }
    s
}

/// Write `sweep.csv` plus a run directory `point_<i>` per successful value.
pub fn write_sweep(dir: &Path, points: &[SweepPoint]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let path = dir.join("sweep.csv");
    fs::write(&path, sweep_csv(points))?;
    let mut out = vec![path];
    for (i, sp) in points.iter().enumerate() {
        if let Ok(r) = &sp.result {
            out.extend(write_run(&dir.join(format!("point_{i}")), r)?);
        }
    }
    Ok(out)
}

/// `characterization.csv`: `wavelength_nm,mode,crosstalk_db,insertion_loss_db,mdl_db,worst`.
pub fn characterization_csv(rows: &[MatrixCharacterization]) -> String {
    let mut s = String::from("wavelength_nm,mode,crosstalk_db,insertion_loss_db,mdl_db,worst\n");
    for r in rows {
        for (m, label) in r.labels.iter().enumerate() {
            writeln!(
                s,
                "{},{label},{},{},{},{}",
                r.wavelength_nm,
                r.crosstalk_db[m],
                r.insertion_loss_db[m],
                r.mdl_db,
                m == r.worst_mode
            )
            .unwrap();
        }
    }
    s
}

// ---- readers (used by the plotting command) ----

fn csv_rows(path: &Path, header: &str) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => {
            return Err(Error::Parse {
                row: 1,
                column: 1,
                message: format!("{}: expected header '{header}'", path.display()),
            })
        }
    }
    let cols = header.split(',').count();
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let cells: Vec<String> = l.split(',').map(|c| c.trim().to_string()).collect();
            if cells.len() != cols {
                return Err(Error::Parse {
                    row: n + 1,
                    column: cells.len().min(cols) + 1,
                    message: format!("{}: expected {cols} columns", path.display()),
                });
            }
            Ok(cells)
        })
        .collect()
}

fn num<T: std::str::FromStr>(cells: &[String], col: usize, row: usize) -> Result<T> {
    cells[col].parse().map_err(|_| Error::Parse {
        row,
        column: col + 1,
        message: format!("not a number: '{}'", cells[col]),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerRow {
    pub point: usize,
    pub wavelength_nm: f64,
    pub snr_db: f64,
    pub mode: String,
    pub bits: usize,
    pub errors: usize,
    pub ber: f64,
    pub class: BerClass,
    pub evm_percent: f64,
}

pub fn read_ber_csv(path: &Path) -> Result<Vec<BerRow>> {
    csv_rows(path, BER_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let row = i + 2;
            Ok(BerRow {
                point: num(c, 0, row)?,
                wavelength_nm: num(c, 1, row)?,
                snr_db: num(c, 2, row)?,
                mode: c[3].clone(),
                bits: num(c, 4, row)?,
                errors: num(c, 5, row)?,
                ber: num(c, 6, row)?,
                class: c[7].parse()?,
                evm_percent: num(c, 8, row)?,
            })
        })
        .collect()
}

/// `(point, mode) -> symbols`, in file order.
pub fn read_constellation_csv(path: &Path) -> Result<Vec<((usize, String), Vec<Complex64>)>> {
    let mut out: Vec<((usize, String), Vec<Complex64>)> = Vec::new();
    for (i, c) in csv_rows(path, CONSTELLATION_HEADER)?.iter().enumerate() {
        let row = i + 2;
        let key = (num::<usize>(c, 0, row)?, c[1].clone());
        let z = Complex64::new(num(c, 2, row)?, num(c, 3, row)?);
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(z),
            None => out.push((key, vec![z])),
        }
    }
    Ok(out)
}

/// `point -> profile in dB`, ordered by point.
pub fn read_impulse_csv(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut out: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, c) in csv_rows(path, IMPULSE_HEADER)?.iter().enumerate() {
        let row = i + 2;
        let point: usize = num(c, 0, row)?;
        let v: f64 = num(c, 2, row)?;
        match out.iter_mut().find(|(p, _)| *p == point) {
            Some((_, prof)) => prof.push(v),
            None => out.push((point, vec![v])),
        }
    }
    Ok(out)
}
