use std::io::Write;

use crate::error::{Error, Result};
use crate::losses::Raster;

/// 8-bit level of a value in `[0, 1]`; out-of-range values saturate.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn quantize_raster(r: &Raster) -> Vec<u8> {
    r.values().iter().map(|&v| quantize(v)).collect()
}

/// Binary PGM (P5, maxval 255) with values scaled by 255.
pub fn encode_pgm(r: &Raster) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", r.width(), r.height()).into_bytes();
    out.extend(quantize_raster(r));
    out
}

pub fn write_pgm(r: &Raster, mut w: impl Write) -> Result<()> {
    w.write_all(&encode_pgm(r))?;
    Ok(())
}

fn header_tokens(bytes: &[u8]) -> Result<(Vec<usize>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    let bad = |m: &str| Error::Image(format!("bad PGM header: {m}"));
    if bytes.get(..2) != Some(b"P5") {
        return Err(bad("missing P5 magic"));
    }
    i += 2;
    while tokens.len() < 3 {
        match bytes.get(i) {
            None => return Err(bad("truncated")),
            Some(b'#') => {
                while bytes.get(i).is_some_and(|&b| b != b'\n') {
                    i += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => i += 1,
            Some(b) if b.is_ascii_digit() => {
                let start = i;
                while bytes.get(i).is_some_and(u8::is_ascii_digit) {
                    i += 1;
                }
                let s = std::str::from_utf8(&bytes[start..i]).map_err(|_| bad("non-ascii"))?;
                tokens.push(s.parse().map_err(|_| bad("number"))?);
            }
            Some(_) => return Err(bad("unexpected byte")),
        }
    }
    // exactly one whitespace byte separates the header from the data
    Ok((tokens, i + 1))
}

/// Reads a P5 PGM with maxval ≤ 255 back into values in `[0, 1]`.
pub fn decode_pgm(bytes: &[u8]) -> Result<Raster> {
    let (t, start) = header_tokens(bytes)?;
    let (w, h, maxval) = (t[0], t[1], t[2]);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Image(format!("unsupported PGM maxval {maxval}")));
    }
    let data = bytes
        .get(start..start + w * h)
        .ok_or_else(|| Error::Image("PGM data is truncated".into()))?;
    Raster::new(w, h, data.iter().map(|&b| b as f64 / maxval as f64).collect())
}
