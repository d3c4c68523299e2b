//! Static SVG figures drawn from a result directory: constellation panels,
//! BER versus wavelength with best/worst-mode error bars, the normalized
//! impulse-response intensity profile and the intensity-matrix heat map.
//!
//! Every figure is built from the result files alone, so plots can be
//! redrawn without re-running a simulation. A missing or unreadable file
//! only drops its own figure.

use super::results::{read_ber_csv, read_constellation_csv, read_impulse_csv};
use super::IntensityTable;
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::fmt::Write;
use std::fs;
use std::path::{Path, PathBuf};

pub const CONSTELLATION_SVG: &str = "constellation.svg";
pub const BER_SVG: &str = "ber_vs_wavelength.svg";
pub const IMPULSE_SVG: &str = "impulse_response.svg";
pub const INTENSITY_SVG: &str = "intensity_matrix.svg";

/// Lowest BER drawn on the log axis; error-free points sit on it.
const BER_FLOOR: f64 = 1e-7;
/// Bottom of the impulse-response axis.
const IMPULSE_FLOOR_DB: f64 = -60.0;
/// Heat-map colour range.
const HEAT_FLOOR_DB: f64 = -40.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotReport {
    pub written: Vec<PathBuf>,
    /// `section: reason` for every figure that could not be drawn.
    pub missing: Vec<String>,
}

/// Draw every figure the files in `results` support into `out`.
///
/// `results` is a run directory (as written by `write_run`) or a sweep
/// directory (`sweep.csv` plus `point_<i>` runs); for a sweep the BER
/// figure covers all sweep values and the other figures use `point_0`.
pub fn emit_plots(results: &Path, out: &Path) -> Result<PlotReport> {
    if !results.is_dir() {
        return Err(Error::invalid(format!(
            "{} is not a result directory",
            results.display()
        )));
    }
    fs::create_dir_all(out)?;
    let sweep = results.join("sweep.csv");
    let run_dir = if sweep.is_file() && !results.join("ber.csv").is_file() {
        results.join("point_0")
    } else {
        results.to_path_buf()
    };
    let mut report = PlotReport::default();
    let mut emit = |name: &str, section: &str, svg: Result<String>| match svg {
        Ok(s) => {
            let path = out.join(name);
            match fs::write(&path, s) {
                Ok(()) => report.written.push(path),
                Err(e) => report.missing.push(format!("{section}: {e}")),
            }
        }
        Err(e) => report.missing.push(format!("{section}: {e}")),
    };

    emit(
        CONSTELLATION_SVG,
        "constellation",
        constellation_svg(&run_dir.join("constellation.csv")),
    );
    let ber_points = if sweep.is_file() {
        read_sweep_points(&sweep)
    } else {
        read_run_points(&run_dir.join("ber.csv"))
    };
    emit(BER_SVG, "ber", ber_points.and_then(|p| ber_svg(&p)));
    emit(
        IMPULSE_SVG,
        "impulse_response",
        impulse_svg(&run_dir.join("impulse_response.csv")),
    );
    emit(
        INTENSITY_SVG,
        "intensity_matrix",
        intensity_svg(&run_dir.join("intensity_0.csv")),
    );
    Ok(report)
}

// ---- data ----

/// One BER-vs-wavelength marker.
#[derive(Debug, Clone, Copy, PartialEq)]
struct BerPoint {
    wavelength_nm: f64,
    snr_db: f64,
    mean: f64,
    best: f64,
    worst: f64,
}

fn read_run_points(path: &Path) -> Result<Vec<BerPoint>> {
    let rows = read_ber_csv(path)?;
    let mut points: Vec<(usize, BerPoint, usize)> = Vec::new();
    for r in &rows {
        match points.iter_mut().find(|(p, _, _)| *p == r.point) {
            Some((_, b, n)) => {
                b.mean += r.ber;
                b.best = b.best.min(r.ber);
                b.worst = b.worst.max(r.ber);
                *n += 1;
            }
            None => points.push((
                r.point,
                BerPoint {
                    wavelength_nm: r.wavelength_nm,
                    snr_db: r.snr_db,
                    mean: r.ber,
                    best: r.ber,
                    worst: r.ber,
                },
                1,
            )),
        }
    }
    if points.is_empty() {
        return Err(Error::invalid("no BER rows"));
    }
    Ok(points
        .into_iter()
        .map(|(_, mut b, n)| {
            b.mean /= n as f64;
            b
        })
        .collect())
}

fn read_sweep_points(path: &Path) -> Result<Vec<BerPoint>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let row = i + 1;
        // the trailing error column may itself contain commas
        let c: Vec<&str> = line.splitn(13, ',').collect();
        if c.len() < 12 {
            return Err(Error::Parse {
                row,
                column: c.len() + 1,
                message: "too few columns".into(),
            });
        }
        if c[3] != "ok" {
            continue;
        }
        let f = |col: usize| -> Result<f64> {
            c[col].parse().map_err(|_| Error::Parse {
                row,
                column: col + 1,
                message: format!("bad number '{}'", c[col]),
            })
        };
        out.push(BerPoint {
            wavelength_nm: f(5)?,
            snr_db: f(6)?,
            mean: f(7)?,
            best: f(8)?,
            worst: f(9)?,
        });
    }
    if out.is_empty() {
        return Err(Error::invalid("no successful sweep points"));
    }
    Ok(out)
}

// ---- drawing ----

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Self {
            body: String::new(),
            width,
            height,
        }
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: f64, s: &str) {
        writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-size="{size}">{}</text>"#,
            escape(s)
        )
        .unwrap();
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}"/>"#
        )
        .unwrap();
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n\
             <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Plot area with linear or log10 axes.
#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        self.x0 + (v - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }

    fn y(&self, v: f64) -> f64 {
        self.y0 + self.h - (v - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }

    fn draw_box(&self, svg: &mut Svg) {
        writeln!(
            svg.body,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            self.x0, self.y0, self.w, self.h
        )
        .unwrap();
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn constellation_svg(path: &Path) -> Result<String> {
    let all = read_constellation_csv(path)?;
    let Some(first) = all.iter().map(|((p, _), _)| *p).min() else {
        return Err(Error::invalid("no constellation rows"));
    };
    let panels: Vec<(&str, &[Complex64])> = all
        .iter()
        .filter(|((p, _), _)| *p == first)
        .map(|((_, m), v)| (m.as_str(), v.as_slice()))
        .collect();
    Ok(draw_constellations(&panels))
}

fn draw_constellations(panels: &[(&str, &[Complex64])]) -> String {
    let cols = (panels.len() as f64).sqrt().ceil().max(1.0) as usize;
    let rows = panels.len().div_ceil(cols);
    let size = 200.0;
    let mut svg = Svg::new(cols as f64 * size, rows as f64 * size + 30.0);
    svg.text(svg.width / 2.0, 20.0, "middle", 14.0, "Equalized constellations");
    let extent = panels
        .iter()
        .flat_map(|(_, v)| v.iter())
        .map(|z| z.re.abs().max(z.im.abs()))
        .fold(0.0, f64::max)
        .max(1e-12)
        * 1.1;
    for (k, (label, symbols)) in panels.iter().enumerate() {
        let (cx, cy) = ((k % cols) as f64 * size, 30.0 + (k / cols) as f64 * size);
        let f = Frame {
            x0: cx + 15.0,
            y0: cy + 20.0,
            w: size - 30.0,
            h: size - 30.0,
            xr: (-extent, extent),
            yr: (-extent, extent),
        };
        writeln!(svg.body, r#"<g class="panel">"#).unwrap();
        f.draw_box(&mut svg);
        svg.text(cx + size / 2.0, cy + 14.0, "middle", 12.0, label);
        for z in symbols.iter() {
            writeln!(
                svg.body,
                r##"<circle cx="{:.2}" cy="{:.2}" r="0.8" fill="#1f4e9c"/>"##,
                f.x(z.re),
                f.y(z.im)
            )
            .unwrap();
        }
        writeln!(svg.body, "</g>").unwrap();
    }
    svg.finish()
}

fn ber_svg(points: &[BerPoint]) -> Result<String> {
    let log = |v: f64| v.max(BER_FLOOR).log10();
    let (wmin, wmax) = points.iter().fold((f64::MAX, f64::MIN), |(a, b), p| {
        (a.min(p.wavelength_nm), b.max(p.wavelength_nm))
    });
    let top = points
        .iter()
        .map(|p| log(p.worst))
        .fold(f64::MIN, f64::max)
        .max(-1.0)
        .ceil();
    let f = Frame {
        x0: 80.0,
        y0: 40.0,
        w: 520.0,
        h: 320.0,
        xr: padded(wmin, wmax),
        yr: (BER_FLOOR.log10(), top),
    };
    let mut svg = Svg::new(640.0, 420.0);
    svg.text(
        340.0,
        25.0,
        "middle",
        14.0,
        "Mean BER over modes (bars: best and worst mode)",
    );
    f.draw_box(&mut svg);
    let mut e = f.yr.0 as i32;
    while e as f64 <= f.yr.1 {
        let y = f.y(e as f64);
        svg.line(f.x0 - 5.0, y, f.x0, y, "black");
        svg.text(f.x0 - 8.0, y + 4.0, "end", 11.0, &format!("1e{e}"));
        e += 1;
    }
    let fec = crate::metrics::FEC_THRESHOLD.log10();
    if fec <= f.yr.1 {
        let y = f.y(fec);
        writeln!(
            svg.body,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#c03030" stroke-dasharray="6,4"/>"##,
            f.x0,
            f.x0 + f.w
        )
        .unwrap();
        svg.text(f.x0 + f.w - 4.0, y - 4.0, "end", 10.0, "FEC threshold");
    }
    let mut ticks: Vec<f64> = points.iter().map(|p| p.wavelength_nm).collect();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for w in &ticks {
        let x = f.x(*w);
        svg.line(x, f.y0 + f.h, x, f.y0 + f.h + 5.0, "black");
        svg.text(x, f.y0 + f.h + 18.0, "middle", 11.0, &format!("{w}"));
    }
    svg.text(f.x0 + f.w / 2.0, f.y0 + f.h + 38.0, "middle", 12.0, "Wavelength (nm)");
    let snrs: Vec<f64> = {
        let mut v: Vec<f64> = points.iter().map(|p| p.snr_db).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    for p in points {
        let x = f.x(p.wavelength_nm);
        svg.line(x, f.y(log(p.best)), x, f.y(log(p.worst)), "black");
        for v in [p.best, p.worst] {
            svg.line(x - 4.0, f.y(log(v)), x + 4.0, f.y(log(v)), "black");
        }
        writeln!(
            svg.body,
            r##"<circle class="marker" cx="{x:.2}" cy="{:.2}" r="4" fill="#1f4e9c"/>"##,
            f.y(log(p.mean))
        )
        .unwrap();
    }
    if snrs.len() == 1 {
        svg.text(f.x0 + 6.0, f.y0 + 14.0, "start", 11.0, &format!("SNR {} dB", snrs[0]));
    }
    Ok(svg.finish())
}

fn impulse_svg(path: &Path) -> Result<String> {
    let profiles = read_impulse_csv(path)?;
    let Some((_, prof)) = profiles.first() else {
        return Err(Error::invalid("no impulse-response rows"));
    };
    let f = Frame {
        x0: 70.0,
        y0: 40.0,
        w: 530.0,
        h: 320.0,
        xr: (0.0, (prof.len().max(2) - 1) as f64),
        yr: (IMPULSE_FLOOR_DB, 0.0),
    };
    let mut svg = Svg::new(640.0, 420.0);
    svg.text(335.0, 25.0, "middle", 14.0, "Normalized intensity impulse response");
    f.draw_box(&mut svg);
    let mut db = 0.0;
    while db >= IMPULSE_FLOOR_DB {
        let y = f.y(db);
        svg.line(f.x0 - 5.0, y, f.x0, y, "black");
        svg.text(f.x0 - 8.0, y + 4.0, "end", 11.0, &format!("{db} dB"));
        db -= 10.0;
    }
    let step = (prof.len() / 8).max(1);
    for lag in (0..prof.len()).step_by(step) {
        let x = f.x(lag as f64);
        svg.line(x, f.y0 + f.h, x, f.y0 + f.h + 5.0, "black");
        svg.text(x, f.y0 + f.h + 18.0, "middle", 11.0, &lag.to_string());
    }
    svg.text(f.x0 + f.w / 2.0, f.y0 + f.h + 38.0, "middle", 12.0, "Tap (symbols)");
    let pts: Vec<String> = prof
        .iter()
        .enumerate()
        .map(|(k, v)| format!("{:.2},{:.2}", f.x(k as f64), f.y(v.clamp(IMPULSE_FLOOR_DB, 0.0))))
        .collect();
    writeln!(
        svg.body,
        r##"<polyline class="profile" fill="none" stroke="#1f4e9c" points="{}"/>"##,
        pts.join(" ")
    )
    .unwrap();
    Ok(svg.finish())
}

/// Linear blend through a dark-blue → teal → yellow ramp.
fn heat_color(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 3] = [(68.0, 1.0, 84.0), (33.0, 145.0, 140.0), (253.0, 231.0, 37.0)];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let u = t - i as f64;
    let mix = |a: f64, b: f64| (a + (b - a) * u).round() as u8;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn intensity_svg(path: &Path) -> Result<String> {
    let table = IntensityTable::parse(&fs::read_to_string(path)?)?;
    let n = table.labels.len();
    let cell = 36.0;
    let (x0, y0) = (70.0, 50.0);
    let mut svg = Svg::new(x0 + n as f64 * cell + 110.0, y0 + n as f64 * cell + 50.0);
    svg.text(
        x0 + n as f64 * cell / 2.0,
        25.0,
        "middle",
        14.0,
        &format!("Intensity transfer matrix (dB), {} nm", table.wavelength_nm),
    );
    for (i, row) in table.db.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let t = (v - HEAT_FLOOR_DB) / -HEAT_FLOOR_DB;
            writeln!(
                svg.body,
                r#"<rect class="cell" x="{:.2}" y="{:.2}" width="{cell}" height="{cell}" fill="{}"><title>{} from {}: {v:.2} dB</title></rect>"#,
                x0 + j as f64 * cell,
                y0 + i as f64 * cell,
                heat_color(t),
                table.labels[i],
                table.labels[j]
            )
            .unwrap();
        }
        svg.text(x0 - 6.0, y0 + (i as f64 + 0.6) * cell, "end", 11.0, &table.labels[i]);
    }
    for (j, l) in table.labels.iter().enumerate() {
        svg.text(
            x0 + (j as f64 + 0.5) * cell,
            y0 + n as f64 * cell + 16.0,
            "middle",
            11.0,
            l,
        );
    }
    svg.text(
        x0 + n as f64 * cell / 2.0,
        y0 + n as f64 * cell + 38.0,
        "middle",
        12.0,
        "Input mode",
    );
    // colour bar
    let bx = x0 + n as f64 * cell + 30.0;
    let bh = n as f64 * cell;
    for k in 0..40 {
        let t = 1.0 - k as f64 / 40.0;
        writeln!(
            svg.body,
            r#"<rect x="{bx:.2}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            y0 + k as f64 * bh / 40.0,
            bh / 40.0 + 0.5,
            heat_color(t)
        )
        .unwrap();
    }
    svg.text(bx + 22.0, y0 + 10.0, "start", 11.0, "0 dB");
    svg.text(bx + 22.0, y0 + bh, "start", 11.0, &format!("{HEAT_FLOOR_DB} dB"));
    Ok(svg.finish())
}
