//! Binary masks as 8-bit binary PGM (`P5`): 255 marks changed pixels.

use std::path::Path;

use super::{read_bytes, write_atomic};
use crate::error::{Error, Result};
use crate::eval::Mask;

pub fn encode_pgm(mask: &Mask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    out.extend(mask.data.iter().map(|&v| if v { 255u8 } else { 0 }));
    out
}

/// Reads any `P5` file with maxval below 256; nonzero pixels are set.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<Mask> {
    let err = |offset: usize, msg: &str| Error::Parse {
        path: path.to_path_buf(),
        offset: offset as u64,
        msg: msg.to_string(),
    };
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(err(pos, "header ends early"));
        }
        tokens.push((start, std::str::from_utf8(&bytes[start..pos]).unwrap_or("")));
    }
    if tokens[0].1 != "P5" {
        return Err(err(0, "not a binary PGM (P5)"));
    }
    let mut dims = [0u32; 3];
    for (d, (at, tok)) in dims.iter_mut().zip(&tokens[1..]) {
        *d = tok.parse().map_err(|_| err(*at, "bad header number"))?;
    }
    let [width, height, maxval] = dims;
    if maxval == 0 || maxval > 255 {
        return Err(err(tokens[3].0, "maxval must be in 1..=255"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let n = width as usize * height as usize;
    if bytes.len() < pos + n {
        return Err(err(bytes.len().min(pos), "truncated raster"));
    }
    if bytes.len() > pos + n {
        return Err(err(pos + n, "trailing bytes after raster"));
    }
    Ok(Mask {
        width,
        height,
        data: bytes[pos..].iter().map(|&b| b != 0).collect(),
    })
}

pub fn write_mask(mask: &Mask, path: &Path) -> Result<()> {
    write_atomic(path, &encode_pgm(mask))
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    decode_pgm(&read_bytes(path)?, path)
}
