//! Binary (P5) PGM, 8 and 16 bit. 16-bit samples are big-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::DepthFrame;
use crate::mask::BinaryMask;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format("PGM", "truncated header"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::format("PGM", "non-ASCII header"))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| Error::format("PGM", format!("bad {what}: {tok:?}")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<GrayImage> {
    let mut header = Header { bytes, pos: 0 };
    if header.token()? != "P5" {
        return Err(Error::format("PGM", "expected P5 magic"));
    }
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format("PGM", format!("maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = header.pos + 1;
    let n = width * height;
    let wide = maxval > 255;
    let need = if wide { 2 * n } else { n };
    let raster = bytes
        .get(start..start + need)
        .ok_or_else(|| Error::format("PGM", format!("raster needs {need} bytes")))?;
    let samples = if wide {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        raster.iter().map(|&b| b as u16).collect()
    };
    Ok(GrayImage {
        width,
        height,
        maxval: maxval as u16,
        samples,
    })
}

pub fn encode8(width: usize, height: usize, samples: &[u8]) -> Vec<u8> {
    debug_assert_eq!(samples.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(samples);
    out
}

pub fn encode16(width: usize, height: usize, samples: &[u16]) -> Vec<u8> {
    debug_assert_eq!(samples.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(samples.len() * 2);
    for s in samples {
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

/// Samples at or above half scale (128 of 255) are foreground.
pub fn mask_from_image(img: &GrayImage) -> Result<BinaryMask> {
    let max = img.maxval as u32;
    BinaryMask::from_vec(
        img.width,
        img.height,
        img.samples
            .iter()
            .map(|&s| (s as u32) * 255 >= 128 * max)
            .collect(),
    )
}

pub fn decode_mask(bytes: &[u8]) -> Result<BinaryMask> {
    mask_from_image(&decode(bytes)?)
}

pub fn encode_mask(mask: &BinaryMask) -> Vec<u8> {
    encode8(mask.width(), mask.height(), &mask.to_bytes())
}

pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    decode_mask(&fs::read(path)?)
}

pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    fs::File::create(path)?.write_all(&encode_mask(mask))?;
    Ok(())
}

pub fn read_depth(path: &Path) -> Result<DepthFrame> {
    let img = decode(&fs::read(path)?)?;
    DepthFrame::from_vec(img.width, img.height, img.samples)
}

pub fn write_depth(path: &Path, depth: &DepthFrame) -> Result<()> {
    let bytes = encode16(depth.width(), depth.height(), depth.data());
    fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_threshold_and_round_trip() {
        let bytes = encode8(3, 2, &[0, 127, 128, 255, 10, 200]);
        let m = decode_mask(&bytes).unwrap();
        assert_eq!(m.data(), &[false, false, true, true, false, true]);
        let again = decode_mask(&encode_mask(&m)).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn header_comments_and_wide_samples() {
        let mut bytes = b"P5 # depth\n2 1\n# mm\n65535\n".to_vec();
        bytes.extend_from_slice(&[0x12, 0x34, 0x00, 0x01]);
        let img = decode(&bytes).unwrap();
        assert_eq!(img.samples, vec![0x1234, 1]);
        assert_eq!(decode(&encode16(2, 1, &img.samples)).unwrap(), img);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode(b"P2\n1 1\n255\n\x00").is_err());
        assert!(decode(b"P5\n4 4\n255\n\x00\x00").is_err());
        assert!(decode(b"P5\n1 1\n0\n\x00").is_err());
    }
}
