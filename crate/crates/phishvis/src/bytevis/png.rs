//! PNG output and input for [`VisImage`].
//!
//! The encoder is written out by hand so the bytes are a pure function of
//! the pixels: 8-bit RGB, color type 2, non-interlaced, filter 0 on every
//! scanline, and the zlib stream uses stored (uncompressed) deflate blocks.
//! No compressor heuristics means no drift between builds or platforms.
//! Decoding goes through the `png` crate, which also serves as the
//! independent check that the encoder emits conformant files.

use std::io::Cursor;

use super::{Rgb, VisImage};
use crate::{Error, Result};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

/// Encode as a deterministic PNG. Same image, same bytes, always.
pub fn encode_png(img: &VisImage) -> Vec<u8> {
    let side = img.side() as u32;

    // raw scanlines: filter byte 0 + RGB triples
    let mut raw = Vec::with_capacity(img.side() * (1 + 3 * img.side()));
    for row in img.pixels().chunks(img.side()) {
        raw.push(0u8);
        for px in row {
            raw.extend_from_slice(&[px.r, px.g, px.b]);
        }
    }

    let mut ihdr = Vec::with_capacity(13);
    ihdr.extend_from_slice(&side.to_be_bytes());
    ihdr.extend_from_slice(&side.to_be_bytes());
    // bit depth 8, color type 2 (RGB), compression 0, filter 0, interlace 0
    ihdr.extend_from_slice(&[8, 2, 0, 0, 0]);

    let mut out = Vec::with_capacity(raw.len() + 128);
    out.extend_from_slice(&PNG_SIGNATURE);
    write_chunk(&mut out, b"IHDR", &ihdr);
    write_chunk(&mut out, b"IDAT", &zlib_stored(&raw));
    write_chunk(&mut out, b"IEND", &[]);
    out
}

/// Decode a PNG into a [`VisImage`]. Accepts 8-bit RGB or RGBA (alpha is
/// dropped); anything else is rejected. The image must be square.
pub fn decode_png(bytes: &[u8]) -> Result<VisImage> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::ImageFormat(e.to_string()))?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::ImageFormat(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::ImageFormat(format!(
            "unsupported bit depth {:?}",
            info.bit_depth
        )));
    }
    if info.width != info.height {
        return Err(Error::ImageFormat(format!(
            "image is {}x{}, expected square",
            info.width, info.height
        )));
    }
    let side = info.width as usize;
    let stride = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => {
            return Err(Error::ImageFormat(format!(
                "unsupported color type {other:?}"
            )))
        }
    };
    let data = &buf[..info.buffer_size()];
    let pixels: Vec<Rgb> = data
        .chunks_exact(stride)
        .map(|px| Rgb {
            r: px[0],
            g: px[1],
            b: px[2],
        })
        .collect();
    VisImage::from_pixels(side, pixels)
}

fn write_chunk(out: &mut Vec<u8>, kind: &[u8; 4], data: &[u8]) {
    out.extend_from_slice(&(data.len() as u32).to_be_bytes());
    out.extend_from_slice(kind);
    out.extend_from_slice(data);
    let mut crc = Crc32::new();
    crc.update(kind);
    crc.update(data);
    out.extend_from_slice(&crc.finish().to_be_bytes());
}

/// zlib wrapper around stored (BTYPE=00) deflate blocks.
fn zlib_stored(raw: &[u8]) -> Vec<u8> {
    let n_blocks = raw.len().div_ceil(0xFFFF).max(1);
    let mut out = Vec::with_capacity(raw.len() + n_blocks * 5 + 6);
    // CMF/FLG: 32K window, no dict; 0x78 0x01 satisfies the mod-31 check
    out.extend_from_slice(&[0x78, 0x01]);
    let mut chunks = raw.chunks(0xFFFF).peekable();
    if raw.is_empty() {
        out.extend_from_slice(&[0x01, 0x00, 0x00, 0xFF, 0xFF]);
    }
    while let Some(chunk) = chunks.next() {
        let bfinal = if chunks.peek().is_none() { 1u8 } else { 0u8 };
        out.push(bfinal);
        let len = chunk.len() as u16;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&(!len).to_le_bytes());
        out.extend_from_slice(chunk);
    }
    out.extend_from_slice(&adler32(raw).to_be_bytes());
    out
}

fn adler32(data: &[u8]) -> u32 {
    const MOD: u32 = 65521;
    let mut s1: u32 = 1;
    let mut s2: u32 = 0;
    for chunk in data.chunks(5552) {
        for &b in chunk {
            s1 += b as u32;
            s2 += s1;
        }
        s1 %= MOD;
        s2 %= MOD;
    }
    (s2 << 16) | s1
}

struct Crc32(u32);

impl Crc32 {
    fn new() -> Crc32 {
        Crc32(0xFFFF_FFFF)
    }

    fn update(&mut self, data: &[u8]) {
        for &b in data {
            self.0 = CRC_TABLE[((self.0 ^ b as u32) & 0xFF) as usize] ^ (self.0 >> 8);
        }
    }

    fn finish(self) -> u32 {
        self.0 ^ 0xFFFF_FFFF
    }
}

const CRC_TABLE: [u32; 256] = build_crc_table();

const fn build_crc_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut n = 0usize;
    while n < 256 {
        let mut c = n as u32;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 {
                0xEDB8_8320 ^ (c >> 1)
            } else {
                c >> 1
            };
            k += 1;
        }
        table[n] = c;
        n += 1;
    }
    table
}
