//! Byte-level visualization: classify every byte of a document, give each
//! class a flat color, and lay the stream out along the Hilbert curve into a
//! fixed-size RGB raster.
//!
//! Class colors:
//!
//! | class     | bytes             | color  |
//! |-----------|-------------------|--------|
//! | Null      | 0x00              | black  |
//! | Control   | 0x01-0x1F, 0x7F   | green  |
//! | Printable | 0x20-0x7E         | blue   |
//! | Extended  | 0x80-0xFE         | red    |
//! | Max       | 0xFF              | white  |
//!
//! Streams longer than the cell count are index-sampled; shorter streams are
//! null-padded, so short documents show up as large black regions.

mod png;

pub use png::{decode_png, encode_png};

use crate::hilbert::{self, CurveOrder};
use crate::{Error, Result};

/// The five-way byte partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ByteClass {
    Null,
    Printable,
    Control,
    Extended,
    Max,
}

/// An 8-bit RGB color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

pub const BLACK: Rgb = Rgb { r: 0, g: 0, b: 0 };
pub const WHITE: Rgb = Rgb {
    r: 255,
    g: 255,
    b: 255,
};
pub const BLUE: Rgb = Rgb { r: 0, g: 0, b: 255 };
pub const GREEN: Rgb = Rgb { r: 0, g: 255, b: 0 };
pub const RED: Rgb = Rgb { r: 255, g: 0, b: 0 };

/// Classify a byte. Total over 0x00-0xFF.
pub fn classify_byte(b: u8) -> ByteClass {
    match b {
        0x00 => ByteClass::Null,
        0xFF => ByteClass::Max,
        0x01..=0x1F | 0x7F => ByteClass::Control,
        0x20..=0x7E => ByteClass::Printable,
        0x80..=0xFE => ByteClass::Extended,
    }
}

/// The flat class color for a byte.
pub fn byte_to_rgb(b: u8) -> Rgb {
    match classify_byte(b) {
        ByteClass::Null => BLACK,
        ByteClass::Max => WHITE,
        ByteClass::Printable => BLUE,
        ByteClass::Control => GREEN,
        ByteClass::Extended => RED,
    }
}

/// A square RGB raster, pixels row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisImage {
    side: usize,
    pixels: Vec<Rgb>,
}

impl VisImage {
    /// An all-black image.
    pub fn new(side: usize) -> VisImage {
        VisImage {
            side,
            pixels: vec![BLACK; side * side],
        }
    }

    /// Build from an existing row-major pixel buffer.
    pub fn from_pixels(side: usize, pixels: Vec<Rgb>) -> Result<VisImage> {
        if pixels.len() != side * side {
            return Err(Error::BadShape(format!(
                "{} pixels for a {side}x{side} image",
                pixels.len()
            )));
        }
        Ok(VisImage { side, pixels })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.side + x]
    }

    pub fn set(&mut self, x: usize, y: usize, color: Rgb) {
        self.pixels[y * self.side + x] = color;
    }
}

/// Adapt a byte stream of length `L` to exactly `n_cells` bytes.
///
/// `L >= n_cells`: cell `c` takes the byte at `floor(c * L / n_cells)`,
/// preserving document order. `L < n_cells`: the stream is copied and the
/// tail is null-padded. Empty input is an error rather than an all-black
/// image: an empty body means the fetch failed and must not end up in
/// training data looking like content.
pub fn sample_stream(bytes: &[u8], n_cells: usize) -> Result<Vec<u8>> {
    if bytes.is_empty() {
        return Err(Error::EmptyContent);
    }
    let len = bytes.len();
    if len >= n_cells {
        Ok((0..n_cells).map(|c| bytes[c * len / n_cells]).collect())
    } else {
        let mut out = Vec::with_capacity(n_cells);
        out.extend_from_slice(bytes);
        out.resize(n_cells, 0x00);
        Ok(out)
    }
}

/// Render a byte stream onto the Hilbert curve of the given order.
///
/// Pure: identical input gives a bit-identical raster.
pub fn render(bytes: &[u8], order: CurveOrder) -> Result<VisImage> {
    let sampled = sample_stream(bytes, order.n_cells())?;
    let mut img = VisImage::new(order.side());
    for (d, &byte) in sampled.iter().enumerate() {
        let cell = hilbert::d2xy(order, d)?;
        img.set(cell.x, cell.y, byte_to_rgb(byte));
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_partition_all_256_byte_values() {
        let mut counts = [0usize; 5];
        for b in 0..=255u8 {
            let idx = match classify_byte(b) {
                ByteClass::Null => 0,
                ByteClass::Printable => 1,
                ByteClass::Control => 2,
                ByteClass::Extended => 3,
                ByteClass::Max => 4,
            };
            counts[idx] += 1;
        }
        assert_eq!(counts.iter().sum::<usize>(), 256);
        assert_eq!(counts, [1, 95, 32, 127, 1]);
    }

    #[test]
    fn canonical_byte_classifications() {
        assert_eq!(classify_byte(0x00), ByteClass::Null);
        assert_eq!(classify_byte(0x41), ByteClass::Printable);
        assert_eq!(classify_byte(0x0A), ByteClass::Control);
        assert_eq!(classify_byte(0xFF), ByteClass::Max);
    }

    #[test]
    fn boundary_bytes_follow_the_ascii_convention() {
        assert_eq!(classify_byte(0x1F), ByteClass::Control);
        assert_eq!(classify_byte(0x20), ByteClass::Printable);
        assert_eq!(classify_byte(0x7E), ByteClass::Printable);
        assert_eq!(classify_byte(0x7F), ByteClass::Control);
        assert_eq!(classify_byte(0x80), ByteClass::Extended);
        assert_eq!(classify_byte(0xA0), ByteClass::Extended);
        assert_eq!(classify_byte(0xFE), ByteClass::Extended);
    }

    #[test]
    fn class_colors_are_pairwise_distinct() {
        let colors = [
            byte_to_rgb(0x00),
            byte_to_rgb(0x41),
            byte_to_rgb(0x0A),
            byte_to_rgb(0x90),
            byte_to_rgb(0xFF),
        ];
        for i in 0..colors.len() {
            for j in i + 1..colors.len() {
                assert_ne!(colors[i], colors[j]);
            }
        }
        assert_eq!(byte_to_rgb(0xFF), WHITE);
        assert_eq!(byte_to_rgb(0x41), BLUE);
        assert_eq!(byte_to_rgb(0x90), RED);
    }

    #[test]
    fn sampling_identity_when_lengths_match() {
        let bytes: Vec<u8> = (0..16).collect();
        assert_eq!(sample_stream(&bytes, 16).unwrap(), bytes);
    }

    #[test]
    fn sampling_double_length_takes_every_other_byte() {
        let bytes: Vec<u8> = (0..32).collect();
        let sampled = sample_stream(&bytes, 16).unwrap();
        let expected: Vec<u8> = (0..16).map(|c| 2 * c).collect();
        assert_eq!(sampled, expected);
    }

    #[test]
    fn short_streams_are_null_padded() {
        let sampled = sample_stream(&[1, 2, 3, 4, 5], 16).unwrap();
        assert_eq!(&sampled[..5], &[1, 2, 3, 4, 5]);
        assert_eq!(&sampled[5..], &[0u8; 11]);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(sample_stream(&[], 16), Err(Error::EmptyContent)));
        assert!(matches!(
            render(&[], CurveOrder::order7()),
            Err(Error::EmptyContent)
        ));
    }

    #[test]
    fn render_of_all_nulls_is_all_black() {
        let img = render(&vec![0x00; 16384], CurveOrder::order7()).unwrap();
        assert_eq!(img.side(), 128);
        assert!(img.pixels().iter().all(|&p| p == BLACK));
    }

    #[test]
    fn render_of_all_printables_is_all_blue() {
        let img = render(&vec![0x41; 16384], CurveOrder::order7()).unwrap();
        assert!(img.pixels().iter().all(|&p| p == BLUE));
    }

    #[test]
    fn render_matches_cell_by_cell_composition_at_order_3() {
        let order = CurveOrder::new(3).unwrap();
        let bytes: Vec<u8> = (0..64u8).map(|i| i.wrapping_mul(37).wrapping_add(11)).collect();
        let img = render(&bytes, order).unwrap();
        let sampled = sample_stream(&bytes, order.n_cells()).unwrap();
        for (d, &byte) in sampled.iter().enumerate() {
            let cell = crate::hilbert::d2xy(order, d).unwrap();
            assert_eq!(img.get(cell.x, cell.y), byte_to_rgb(byte), "d={d}");
        }
    }

    #[test]
    fn output_shape_is_independent_of_input_length() {
        for len in [1usize, 7, 63, 64, 65, 5000] {
            let bytes = vec![0x41u8; len];
            let img = render(&bytes, CurveOrder::new(3).unwrap()).unwrap();
            assert_eq!(img.pixels().len(), 64);
        }
    }
}
