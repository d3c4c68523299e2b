//! Binary waveform records.
//!
//! Layout (all little-endian):
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 8     | magic `MDMWAVE\0`                         |
//! | 4     | u32 format version (1)                    |
//! | 8     | f64 sample rate in Hz                     |
//! | 4     | u32 channel count                         |
//! | 8     | u64 samples per channel                   |
//! | ...   | per channel, per sample: f64 re, f64 im   |
//!
//! Channels are stored one after another.

use crate::error::{Error, Result};
use crate::sigproc::Waveform;
use num_complex::Complex64;
use std::io::{Read, Write};

pub const WAVEFORM_MAGIC: &[u8; 8] = b"MDMWAVE\0";
pub const WAVEFORM_VERSION: u32 = 1;

/// Write channels sharing one sample rate and length.
pub fn write_waveforms<W: Write>(mut out: W, channels: &[Waveform]) -> Result<()> {
    let first = channels.first().ok_or_else(|| Error::invalid("no channels to write"))?;
    if channels
        .iter()
        .any(|c| c.len() != first.len() || c.sample_rate != first.sample_rate)
    {
        return Err(Error::invalid("channels must share sample rate and length"));
    }
    out.write_all(WAVEFORM_MAGIC)?;
    out.write_all(&WAVEFORM_VERSION.to_le_bytes())?;
    out.write_all(&first.sample_rate.to_le_bytes())?;
    out.write_all(&(channels.len() as u32).to_le_bytes())?;
    out.write_all(&(first.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(first.len() * 16);
    for c in channels {
        buf.clear();
        for s in &c.samples {
            buf.extend_from_slice(&s.re.to_le_bytes());
            buf.extend_from_slice(&s.im.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_waveforms<R: Read>(mut input: R) -> Result<Vec<Waveform>> {
    let bad = |m: &str| Error::Parse {
        row: 0,
        column: 0,
        message: m.to_string(),
    };
    if &read_array::<8, _>(&mut input)? != WAVEFORM_MAGIC {
        return Err(bad("not a waveform file (bad magic)"));
    }
    let version = u32::from_le_bytes(read_array(&mut input)?);
    if version != WAVEFORM_VERSION {
        return Err(bad(&format!("unsupported waveform version {version}")));
    }
    let rate = f64::from_le_bytes(read_array(&mut input)?);
    let channels = u32::from_le_bytes(read_array(&mut input)?) as usize;
    let samples = u64::from_le_bytes(read_array(&mut input)?) as usize;
    let mut out = Vec::with_capacity(channels);
    let mut buf = vec![0u8; samples.checked_mul(16).ok_or_else(|| bad("sample count overflow"))?];
    for k in 0..channels {
        input.read_exact(&mut buf)?;
        let data = buf
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        out.push(Waveform::new(data, rate, format!("ch{k}"))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_and_round_trip() {
        let a = Waveform::new(vec![Complex64::new(1.5, -2.0), Complex64::new(0.0, 3.25)], 40e9, "a").unwrap();
        let b = Waveform::new(vec![Complex64::new(-1.0, 0.5), Complex64::new(7.0, 8.0)], 40e9, "b").unwrap();
        let mut bytes = Vec::new();
        write_waveforms(&mut bytes, &[a.clone(), b.clone()]).unwrap();
        assert_eq!(bytes.len(), 8 + 4 + 8 + 4 + 8 + 2 * 2 * 16);
        assert_eq!(&bytes[..8], b"MDMWAVE\0");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(bytes[12..20].try_into().unwrap()), 40e9);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(bytes[32..40].try_into().unwrap()), 1.5);
        assert_eq!(f64::from_le_bytes(bytes[40..48].try_into().unwrap()), -2.0);
        let back = read_waveforms(&bytes[..]).unwrap();
        assert_eq!(back[0].samples, a.samples);
        assert_eq!(back[1].samples, b.samples);
        assert_eq!(back[1].sample_rate, 40e9);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let wf = Waveform::zeros(4, 1.0, "");
        let mut bytes = Vec::new();
        write_waveforms(&mut bytes, &[wf]).unwrap();
        let mut corrupt = bytes.clone();
        corrupt[0] = b'X';
        assert!(read_waveforms(&corrupt[..]).is_err());
        assert!(read_waveforms(&bytes[..bytes.len() - 1]).is_err());
    }
}
