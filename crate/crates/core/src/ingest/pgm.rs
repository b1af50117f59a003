//! Portable graymap (PGM) reading and writing, 8- and 16-bit.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Declared maximum gray value; the PSNR/SSIM peak is 255 when this is
    /// at most 255 and 65535 otherwise.
    pub max_value: u16,
    pub pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, max_value: u16, pixels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::Image(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if max_value == 0 || pixels.iter().any(|&p| p > max_value) {
            return Err(Error::Image(format!("pixel exceeds max value {max_value}")));
        }
        Ok(Self {
            width,
            height,
            max_value,
            pixels,
        })
    }
}

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
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

    fn next_token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn next_number(&mut self, what: &str) -> Result<usize> {
        let t = self
            .next_token()
            .ok_or_else(|| Error::Image(format!("missing {what}")))?;
        std::str::from_utf8(t)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Image(format!("bad {what}")))
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut t = Tokens { bytes, pos: 0 };
    let magic = t.next_token().ok_or_else(|| Error::Image("empty file".into()))?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        _ => return Err(Error::Image("not a PGM file (expected P2 or P5)".into())),
    };
    let width = t.next_number("width")?;
    let height = t.next_number("height")?;
    let max = t.next_number("max value")?;
    if max == 0 || max > 65535 {
        return Err(Error::Image(format!("max value {max} out of range")));
    }
    let n = width * height;
    let pixels = if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = t.pos + 1;
        let bpp = if max > 255 { 2 } else { 1 };
        let raster = bytes
            .get(start..start + n * bpp)
            .ok_or_else(|| Error::Image("truncated raster".into()))?;
        if bpp == 1 {
            raster.iter().map(|&b| u16::from(b)).collect()
        } else {
            raster
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        }
    } else {
        (0..n)
            .map(|_| t.next_number("pixel").map(|v| v as u16))
            .collect::<Result<Vec<_>>>()?
    };
    GrayImage::new(width, height, max as u16, pixels)
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes).map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

/// Binary (P5) encoding.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.max_value).into_bytes();
    if img.max_value > 255 {
        for p in &img.pixels {
            out.extend_from_slice(&p.to_be_bytes());
        }
    } else {
        out.extend(img.pixels.iter().map(|&p| p as u8));
    }
    out
}
