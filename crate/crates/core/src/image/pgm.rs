//! Binary PGM (P5) reading and writing, 8-bit only.

use std::fs;
use std::path::Path;

use super::{BinaryImage, GrayImage};
use crate::error::{Error, Result};

/// Parse a P5 PGM with maxval ≤ 255. Comments in the header are skipped.
pub fn decode(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(Error::Format(format!("not a binary PGM (magic {:?})", fields[0])));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PGM header field {s:?}")))
    };
    let (cols, rows, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = rows * cols;
    if bytes.len() < pos + need {
        return Err(Error::Format("truncated PGM raster".into()));
    }
    GrayImage::from_vec(
        rows,
        cols,
        bytes[pos..pos + need].iter().map(|&b| f64::from(b)).collect(),
    )
    .map_err(|e| Error::Format(e.to_string()))
}

/// Encode as P5; values are rounded and clamped into `[0, 255]`.
pub fn encode(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.cols(), img.rows()).into_bytes();
    out.extend(img.quantized().pixels().iter().map(|&v| v as u8));
    out
}

pub fn read(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(img)).map_err(|e| Error::io(path, e))
}

/// Binary images are stored with values {0, 255}.
pub fn write_binary(path: impl AsRef<Path>, bw: &BinaryImage) -> Result<()> {
    write(path, &bw.to_gray())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let img = GrayImage::from_fn(3, 5, |r, c| (r * 50 + c) as f64);
        assert_eq!(decode(&encode(&img)).unwrap(), img);
    }

    #[test]
    fn header_comments_and_errors() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend([7u8, 9]);
        let img = decode(&bytes).unwrap();
        assert_eq!(img.pixels(), &[7.0, 9.0]);
        assert!(decode(b"P2\n1 1\n255\n0").is_err());
        assert!(decode(b"P5\n4 4\n255\n\x00").is_err());
    }
}
