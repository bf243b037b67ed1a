//! Binary PPM (`P6`, maxval 255) for 8-bit rasters.

use super::{sample_count, Cursor};
use crate::error::FormatError;
use crate::image::{SdrImage, TransferTag};

/// Reads a P6 file. The transfer tag is assumed to be sRGB.
pub fn read_ppm(bytes: &[u8]) -> Result<SdrImage, FormatError> {
    let mut cur = Cursor::new(bytes);
    let (magic, _) = cur.token()?;
    match magic {
        "P6" => {}
        "P1" | "P2" | "P3" | "P4" | "P5" | "P7" => {
            return Err(FormatError::UnsupportedVariant { offset: 0, variant: magic.to_string() })
        }
        _ => return Err(FormatError::BadHeader { offset: 0, reason: "not a PPM file".into() }),
    }
    let width = cur.dimension()?;
    let height = cur.dimension()?;
    let (tok, offset) = cur.token()?;
    if tok != "255" {
        return Err(FormatError::UnsupportedMaxval { offset });
    }
    cur.header_terminator()?;
    let data_offset = cur.pos;
    let n = sample_count(width, height, 3, data_offset)?;
    let payload = cur.take(n)?;
    SdrImage::new(width, height, payload.to_vec(), TransferTag::Srgb)
        .map_err(|e| FormatError::BadImage { offset: data_offset, reason: e.to_string() })
}

pub fn write_ppm(img: &SdrImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_pixel_payload() {
        let img = SdrImage::new(1, 1, vec![255; 3], TransferTag::Srgb).unwrap();
        let bytes = write_ppm(&img);
        assert_eq!(bytes, b"P6\n1 1\n255\n\xff\xff\xff");
        assert_eq!(read_ppm(&bytes).unwrap(), img);
    }

    #[test]
    fn roundtrip_with_comments() {
        let data: Vec<u8> = (0..2 * 3 * 3).map(|i| (i * 13) as u8).collect();
        let mut bytes = b"P6\n# made by hand\n2 3 # dims\n255\n".to_vec();
        bytes.extend_from_slice(&data);
        let img = read_ppm(&bytes).unwrap();
        assert_eq!(img.data(), &data[..]);
        assert_eq!(read_ppm(&write_ppm(&img)).unwrap(), img);
    }

    #[test]
    fn errors() {
        assert!(matches!(read_ppm(b"P3\n1 1\n255\n255 255 255\n"), Err(FormatError::UnsupportedVariant { .. })));
        assert_eq!(read_ppm(b"P6\n1 1\n65535\n"), Err(FormatError::UnsupportedMaxval { offset: 7 }));
        assert!(matches!(read_ppm(b"P6\n2 2\n255\n\0\0\0"), Err(FormatError::TruncatedFile { .. })));
        assert!(matches!(read_ppm(b"GIF89a"), Err(FormatError::BadHeader { .. })));
    }
}
