//! Binary PNM: P6 (RGB, maxval 255) and P5 (maxval 255 or 65535, 16-bit
//! samples most-significant byte first).

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{DepthMap, GrayImage, RgbImage};

/// Images wider or taller than this are rejected before allocating.
pub const MAX_DIMENSION: usize = 1 << 14;

/// Any image the reader understands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pnm {
    Rgb(RgbImage),
    Gray(GrayImage),
    Gray16(DepthMap),
}

fn header(magic: &str, width: usize, height: usize, maxval: u32) -> Vec<u8> {
    format!("{magic}\n{width} {height}\n{maxval}\n").into_bytes()
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = header("P6", img.width, img.height, 255);
    out.extend_from_slice(&img.data);
    out
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = header("P5", img.width, img.height, 255);
    out.extend_from_slice(&img.data);
    out
}

pub fn encode_pgm16(img: &DepthMap) -> Vec<u8> {
    let mut out = header("P5", img.width, img.height, 65535);
    out.reserve(img.data.len() * 2);
    for v in &img.data {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, field: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format("PNM header", format!("expected {field} at byte {start}")));
        }
        // At most 9 digits keeps the value well inside usize.
        if self.pos - start > 9 {
            return Err(Error::format("PNM header", format!("{field} too large")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        Ok(text.parse().expect("ascii digits parse"))
    }
}

/// Decode a P5 or P6 file.
pub fn parse_pnm(bytes: &[u8]) -> Result<Pnm> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::format("PNM header", "missing P5/P6 magic"));
    }
    let kind = bytes[1];
    if kind != b'5' && kind != b'6' {
        return Err(Error::format("PNM header", format!("unsupported magic P{}", kind as char)));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 || width > MAX_DIMENSION || height > MAX_DIMENSION {
        return Err(Error::format("PNM header", format!("unsupported size {width}x{height}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::format("PNM header", "no whitespace after maxval")),
    }
    let raster = &bytes[cur.pos..];
    let pixels = width * height;
    let take = |n: usize| -> Result<&[u8]> {
        raster.get(..n).ok_or_else(|| {
            Error::format("PNM raster", format!("need {} bytes, file has {}", n, raster.len()))
        })
    };
    match (kind, maxval) {
        (b'6', 255) => Ok(Pnm::Rgb(RgbImage::new(width, height, take(pixels * 3)?.to_vec())?)),
        (b'5', 255) => Ok(Pnm::Gray(GrayImage::new(width, height, take(pixels)?.to_vec())?)),
        (b'5', 65535) => {
            let data = take(pixels * 2)?
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]))
                .collect();
            Ok(Pnm::Gray16(DepthMap::new(width, height, data)?))
        }
        (_, m) => Err(Error::format(
            "PNM header",
            format!("unsupported maxval {} for P{}", m, kind as char),
        )),
    }
}

pub fn parse_ppm(bytes: &[u8]) -> Result<RgbImage> {
    match parse_pnm(bytes)? {
        Pnm::Rgb(img) => Ok(img),
        _ => Err(Error::format("PPM", "expected P6 with maxval 255")),
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    match parse_pnm(bytes)? {
        Pnm::Gray(img) => Ok(img),
        _ => Err(Error::format("PGM", "expected P5 with maxval 255")),
    }
}

pub fn parse_pgm16(bytes: &[u8]) -> Result<DepthMap> {
    match parse_pnm(bytes)? {
        Pnm::Gray16(img) => Ok(img),
        _ => Err(Error::format("PGM", "expected P5 with maxval 65535")),
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    parse_ppm(&read_file(path)?)
}

pub fn read_pgm16(path: &Path) -> Result<DepthMap> {
    parse_pgm16(&read_file(path)?)
}

pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<()> {
    write_file(path, &encode_ppm(img))
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    write_file(path, &encode_pgm(img))
}

pub fn write_pgm16(path: &Path, img: &DepthMap) -> Result<()> {
    write_file(path, &encode_pgm16(img))
}
