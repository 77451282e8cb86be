//! Binary silhouette masks.

use std::path::Path;

use nalgebra::Point2;

use crate::error::{Error, Result};
use crate::pnm;

/// 8-bit samples above this value are object pixels.
pub const BINARIZE_THRESHOLD: u16 = 127;

/// Row-major binary grid, `1` = object. Pixel `(u, v)` has its centre at
/// integer coordinates, `u` along columns, `v` along rows, origin top-left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCentroid {
    pub u: f64,
    pub v: f64,
    pub mass: u64,
}

impl Mask {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(Error::InvalidMask(format!(
                "data length {} != {width}x{height}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidMask(format!("non-binary value {bad}")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; width as usize * height as usize],
        }
    }

    pub fn ones(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![1; width as usize * height as usize],
        }
    }

    /// Builds a mask from a per-pixel predicate `f(u, v)`.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v) as u8);
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, u: u32, v: u32) -> bool {
        debug_assert!(u < self.width && v < self.height);
        self.data[v as usize * self.width as usize + u as usize] == 1
    }

    pub fn count_ones(&self) -> u64 {
        self.data.iter().map(|&b| b as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&b| b == 0)
    }

    /// Membership of a real-valued pixel position. Coordinates are rounded
    /// half away from zero; anything outside the grid (or non-finite) is
    /// background.
    pub fn contains(&self, point: &Point2<f64>) -> bool {
        let u = point.x.round();
        let v = point.y.round();
        if !(u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64) {
            return false;
        }
        self.get(u as u32, v as u32)
    }

    /// Intensity centroid `(m10/m00, m01/m00)` over object pixels.
    pub fn centroid(&self) -> Result<PixelCentroid> {
        let (mut m00, mut m10, mut m01) = (0u64, 0u64, 0u64);
        let w = self.width as usize;
        for (v, row) in self.data.chunks_exact(w).enumerate() {
            let mut row_mass = 0u64;
            let mut row_u = 0u64;
            for (u, &b) in row.iter().enumerate() {
                if b == 1 {
                    row_mass += 1;
                    row_u += u as u64;
                }
            }
            m00 += row_mass;
            m10 += row_u;
            m01 += row_mass * v as u64;
        }
        if m00 == 0 {
            return Err(Error::NoObject);
        }
        Ok(PixelCentroid {
            u: m10 as f64 / m00 as f64,
            v: m01 as f64 / m00 as f64,
            mass: m00,
        })
    }

    /// Decodes an 8-bit P5 graymap, binarizing at [`BINARIZE_THRESHOLD`].
    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Self> {
        let g = pnm::decode_pgm(bytes)?;
        if g.maxval != 255 {
            return Err(Error::UnsupportedMaxval(g.maxval));
        }
        let data = g
            .samples
            .iter()
            .map(|&s| (s > BINARIZE_THRESHOLD) as u8)
            .collect();
        Ok(Self {
            width: g.width,
            height: g.height,
            data,
        })
    }

    /// Encodes as an 8-bit P5 graymap with values 0 / 255.
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let samples: Vec<u8> = self.data.iter().map(|&b| b * 255).collect();
        pnm::encode_pgm8(self.width, self.height, &samples)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        pnm::write_bytes(path, &self.to_pgm_bytes())
    }
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Mask::from_pgm_bytes(&bytes)
}

pub fn mask_centroid(mask: &Mask) -> Result<PixelCentroid> {
    mask.centroid()
}

pub fn mask_contains(mask: &Mask, point: &Point2<f64>) -> bool {
    mask.contains(point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(width: u32, height: u32, u: u32, v: u32) -> Mask {
        Mask::from_fn(width, height, |x, y| x == u && y == v)
    }

    #[test]
    fn all_white_pgm_loads_as_ones() {
        let bytes = pnm::encode_pgm8(4, 4, &[255; 16]);
        assert_eq!(Mask::from_pgm_bytes(&bytes).unwrap(), Mask::ones(4, 4));
    }

    #[test]
    fn sixteen_bit_pgm_is_unsupported() {
        let bytes = pnm::encode_pgm16(2, 2, &[0; 4]);
        let err = Mask::from_pgm_bytes(&bytes).unwrap_err();
        assert_eq!(err.to_string(), "unsupported maxval 65535");
    }

    #[test]
    fn checkerboard_has_half_ones() {
        let samples: Vec<u8> = (0..8 * 6)
            .map(|i| if ((i % 8) + (i / 8)) % 2 == 0 { 255 } else { 0 })
            .collect();
        let mask = Mask::from_pgm_bytes(&pnm::encode_pgm8(8, 6, &samples)).unwrap();
        assert_eq!(mask.count_ones(), 8 * 6 / 2);
    }

    #[test]
    fn threshold_is_exclusive_at_127() {
        let mask = Mask::from_pgm_bytes(&pnm::encode_pgm8(3, 1, &[127, 128, 200])).unwrap();
        assert_eq!(mask.data(), &[0, 1, 1]);
    }

    #[test]
    fn constructor_enforces_invariants() {
        assert!(Mask::new(2, 2, vec![0, 1, 1]).is_err());
        assert!(Mask::new(2, 1, vec![0, 2]).is_err());
        assert!(Mask::new(2, 1, vec![0, 1]).is_ok());
    }

    #[test]
    fn centroid_examples() {
        let c = Mask::ones(10, 10).centroid().unwrap();
        assert_eq!((c.u, c.v, c.mass), (4.5, 4.5, 100));
        let c = single(10, 10, 3, 7).centroid().unwrap();
        assert_eq!((c.u, c.v, c.mass), (3.0, 7.0, 1));
        assert!(matches!(Mask::zeros(5, 5).centroid(), Err(Error::NoObject)));
    }

    #[test]
    fn l_shape_matches_double_loop() {
        // vertical bar u in 2..4, v in 1..9 plus foot u in 2..8, v in 7..9
        let mask = Mask::from_fn(12, 10, |u, v| {
            ((2..4).contains(&u) && (1..9).contains(&v)) || ((2..8).contains(&u) && (7..9).contains(&v))
        });
        let (mut n, mut su, mut sv) = (0.0, 0.0, 0.0);
        for v in 0..10 {
            for u in 0..12 {
                if mask.get(u, v) {
                    n += 1.0;
                    su += u as f64;
                    sv += v as f64;
                }
            }
        }
        let c = mask.centroid().unwrap();
        assert_eq!(c.mass as f64, n);
        assert_eq!(c.u, su / n);
        assert_eq!(c.v, sv / n);
    }

    #[test]
    fn contains_examples() {
        let ones = Mask::ones(5, 5);
        assert!(ones.contains(&Point2::new(2.2, 3.7)));
        assert!(!ones.contains(&Point2::new(-0.6, 2.0)));
        // -0.4 rounds to -0 which is in bounds
        assert!(ones.contains(&Point2::new(-0.4, 2.0)));
        assert!(!ones.contains(&Point2::new(4.5, 2.0)));
        let m = single(5, 5, 2, 3);
        assert!(m.contains(&Point2::new(2.49, 2.51)));
        assert!(!m.contains(&Point2::new(2.51, 2.51)));
        assert!(!ones.contains(&Point2::new(f64::NAN, 1.0)));
        assert!(!ones.contains(&Point2::new(f64::INFINITY, 1.0)));
    }

    proptest! {
        #[test]
        fn contains_is_total(x in proptest::num::f64::ANY, y in proptest::num::f64::ANY) {
            let _ = Mask::ones(7, 3).contains(&Point2::new(x, y));
        }

        #[test]
        fn pgm_round_trip(w in 1u32..20, h in 1u32..20, seed in any::<u64>()) {
            let mask = Mask::from_fn(w, h, |u, v| (seed >> ((u * 7 + v * 3) % 64)) & 1 == 1);
            prop_assert_eq!(Mask::from_pgm_bytes(&mask.to_pgm_bytes()).unwrap(), mask);
        }
    }
}
