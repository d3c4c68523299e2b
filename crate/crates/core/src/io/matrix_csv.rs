//! Intensity matrix CSV:
//!
//! ```text
//! # wavelength_nm = 1550
//! mode,TE0,TE1
//! TE0,0.0,-25.3
//! TE1,-24.1,-1.2
//! ```
//!
//! Rows are output modes, columns input modes, entries intensity in dB.
//! Row and column numbers in parse errors are 1-based file coordinates.

use crate::error::{Error, Result};
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityTable {
    pub wavelength_nm: f64,
    pub labels: Vec<String>,
    /// `db[row][col]`
    pub db: Vec<Vec<f64>>,
}

fn parse_err(row: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        row,
        column,
        message: message.into(),
    }
}

impl IntensityTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut wavelength = None;
        let mut header: Option<(usize, Vec<String>)> = None;
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut row_labels = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((key, value)) = comment.split_once('=') {
                    if key.trim() == "wavelength_nm" {
                        let v: f64 = value
                            .trim()
                            .parse()
                            .map_err(|_| parse_err(line_no, 1, format!("bad wavelength '{}'", value.trim())))?;
                        wavelength = Some(v);
                    }
                }
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            match &header {
                None => {
                    if cells[0] != "mode" {
                        return Err(parse_err(line_no, 1, "header must start with 'mode'"));
                    }
                    let labels: Vec<String> = cells[1..].iter().map(|s| s.to_string()).collect();
                    if labels.is_empty() {
                        return Err(parse_err(line_no, 2, "header has no mode labels"));
                    }
                    for (c, l) in labels.iter().enumerate() {
                        if l.is_empty() || labels[..c].contains(l) {
                            return Err(parse_err(line_no, c + 2, format!("bad or duplicate label '{l}'")));
                        }
                    }
                    header = Some((line_no, labels));
                }
                Some((_, labels)) => {
                    if cells.len() != labels.len() + 1 {
                        return Err(parse_err(
                            line_no,
                            cells.len().min(labels.len() + 1) + 1,
                            format!("expected {} columns, found {}", labels.len() + 1, cells.len()),
                        ));
                    }
                    let r = rows.len();
                    if r >= labels.len() {
                        return Err(parse_err(line_no, 1, "more rows than columns (matrix not square)"));
                    }
                    if cells[0] != labels[r] {
                        return Err(parse_err(
                            line_no,
                            1,
                            format!("row label '{}' does not match column label '{}'", cells[0], labels[r]),
                        ));
                    }
                    let mut vals = Vec::with_capacity(labels.len());
                    for (c, cell) in cells[1..].iter().enumerate() {
                        let v: f64 = cell
                            .parse()
                            .map_err(|_| parse_err(line_no, c + 2, format!("not a number: '{cell}'")))?;
                        if v.is_nan() || v == f64::INFINITY {
                            return Err(parse_err(line_no, c + 2, "intensity must be a finite dB value"));
                        }
                        vals.push(v);
                    }
                    row_labels.push(cells[0].to_string());
                    rows.push((line_no, vals));
                }
            }
        }
        let (header_line, labels) = header.ok_or_else(|| parse_err(1, 1, "missing header row"))?;
        if rows.len() != labels.len() {
            let last = rows.last().map_or(header_line, |r| r.0);
            return Err(parse_err(
                last + 1,
                1,
                format!("matrix not square: {} rows for {} columns", rows.len(), labels.len()),
            ));
        }
        let wavelength_nm = wavelength.ok_or_else(|| parse_err(1, 1, "missing '# wavelength_nm = ...' line"))?;
        Ok(Self {
            wavelength_nm,
            labels,
            db: rows.into_iter().map(|r| r.1).collect(),
        })
    }

    /// Serialize with full round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# wavelength_nm = {}", self.wavelength_nm).unwrap();
        writeln!(out, "mode,{}", self.labels.join(",")).unwrap();
        for (label, row) in self.labels.iter().zip(&self.db) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{label},{}", cells.join(",")).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::TransferMatrix;

    fn identity_csv(n: usize) -> String {
        let labels: Vec<String> = (0..n).map(|i| format!("TE{i}")).collect();
        let mut s = format!("# wavelength_nm = 1550\nmode,{}\n", labels.join(","));
        for i in 0..n {
            let row: Vec<&str> = (0..n).map(|j| if i == j { "0" } else { "-60" }).collect();
            s += &format!("{},{}\n", labels[i], row.join(","));
        }
        s
    }

    #[test]
    fn identity_db_matrix() {
        let t = IntensityTable::parse(&identity_csv(4)).unwrap();
        let m = TransferMatrix::from_intensity(&t, 1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 1e-3 };
                assert!((m.entries[(i, j)].norm() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reserialize_round_trip() {
        let text = "# wavelength_nm = 1532.5\nmode,TE0,TE1\nTE0,-0.123456789,-17.25\nTE1,-23.5,-1.75\n";
        let t = IntensityTable::parse(text).unwrap();
        let m = TransferMatrix::from_intensity(&t, 9).unwrap();
        let back = m.intensity_table(&t.labels);
        for (a, b) in back.db.iter().flatten().zip(t.db.iter().flatten()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(IntensityTable::parse(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn te8_worst_crosstalk() {
        let mut t = IntensityTable::parse(&identity_csv(11)).unwrap();
        t.db[8][9] = -7.0;
        let m = TransferMatrix::from_intensity(&t, 3).unwrap();
        let xt = m.crosstalk_db();
        assert!((xt[8] + 7.0).abs() < 1e-9);
        let worst = (0..11).max_by(|&a, &b| xt[a].total_cmp(&xt[b])).unwrap();
        assert_eq!(worst, 8);
    }

    #[test]
    fn errors_carry_location() {
        let bad = "# wavelength_nm = 1550\nmode,TE0,TE1\nTE0,0,abc\nTE1,0,0\n";
        match IntensityTable::parse(bad) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (3, 3)),
            other => panic!("{other:?}"),
        }
        let short = "# wavelength_nm = 1550\nmode,TE0,TE1\nTE0,0,0\n";
        assert!(matches!(IntensityTable::parse(short), Err(Error::Parse { row: 4, .. })));
        let ragged = "# wavelength_nm = 1550\nmode,TE0,TE1\nTE0,0\nTE1,0,0\n";
        assert!(matches!(
            IntensityTable::parse(ragged),
            Err(Error::Parse { row: 3, .. })
        ));
        let no_wl = "mode,TE0\nTE0,0\n";
        assert!(IntensityTable::parse(no_wl).is_err());
    }

    #[test]
    fn positive_infinity_rejected_negative_allowed() {
        // -inf dB is a legitimate zero entry
        let ok = "# wavelength_nm = 1550\nmode,TE0,TE1\nTE0,0,-inf\nTE1,-inf,0\n";
        let t = IntensityTable::parse(ok).unwrap();
        assert_eq!(t.db[0][1], f64::NEG_INFINITY);
        let bad = "# wavelength_nm = 1550\nmode,TE0\nTE0,inf\n";
        assert!(matches!(
            IntensityTable::parse(bad),
            Err(Error::Parse { row: 3, column: 2, .. })
        ));
    }
}
