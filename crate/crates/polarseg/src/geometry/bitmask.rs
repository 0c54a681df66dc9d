//! Dense binary occupancy grid over an image raster.

use super::{Contour, GeometryError, Point};

/// Row-major binary grid, packed 64 pixels per word.
///
/// Bits beyond `width * height` in the last word are always zero, so popcount
/// based set operations need no masking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    width: usize,
    height: usize,
    words: Vec<u64>,
}

impl BitMask {
    /// All-zero mask of the given dimensions.
    pub fn new(width: usize, height: usize) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidDimensions);
        }
        let nbits = width * height;
        Ok(BitMask {
            width,
            height,
            words: vec![0u64; nbits.div_ceil(64)],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        let idx = y * self.width + x;
        self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        debug_assert!(x < self.width && y < self.height);
        let idx = y * self.width + x;
        if value {
            self.words[idx / 64] |= 1 << (idx % 64);
        } else {
            self.words[idx / 64] &= !(1 << (idx % 64));
        }
    }

    /// Number of set pixels.
    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    /// Pixel-wise intersection-over-union.
    pub fn iou(&self, other: &BitMask) -> Result<f64, GeometryError> {
        if self.width != other.width || self.height != other.height {
            return Err(GeometryError::DimensionMismatch);
        }
        let mut inter = 0usize;
        let mut union = 0usize;
        for (a, b) in self.words.iter().zip(&other.words) {
            inter += (a & b).count_ones() as usize;
            union += (a | b).count_ones() as usize;
        }
        if union == 0 {
            return Err(GeometryError::BothEmpty);
        }
        Ok(inter as f64 / union as f64)
    }

    /// Mean of set pixel centers. The bitmap counterpart of
    /// [`Contour::mass_center`]; the polygon form is the canonical one.
    pub fn centroid(&self) -> Result<Point, GeometryError> {
        let mut count = 0usize;
        let mut sx = 0.0;
        let mut sy = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    count += 1;
                    sx += x as f64 + 0.5;
                    sy += y as f64 + 0.5;
                }
            }
        }
        if count == 0 {
            return Err(GeometryError::EmptyMask);
        }
        Ok(Point::new(sx / count as f64, sy / count as f64))
    }

    /// Outer boundary of the largest 8-connected component, traced along
    /// pixel edges. Holes are ignored; ties on component size go to the
    /// first component in scan order.
    pub fn extract_contour(&self) -> Result<Contour, GeometryError> {
        super::trace::extract_contour(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_get_count() {
        let mut m = BitMask::new(70, 3).unwrap();
        assert!(m.is_empty());
        m.set(0, 0, true);
        m.set(69, 2, true);
        m.set(33, 1, true);
        assert!(m.get(69, 2));
        assert_eq!(m.count_ones(), 3);
        m.set(33, 1, false);
        assert_eq!(m.count_ones(), 2);
    }

    #[test]
    fn iou_identical_is_one() {
        let mut m = BitMask::new(8, 8).unwrap();
        for i in 0..4 {
            m.set(i, i, true);
        }
        assert_eq!(m.iou(&m).unwrap(), 1.0);
    }

    #[test]
    fn iou_disjoint_is_zero() {
        let mut a = BitMask::new(8, 8).unwrap();
        let mut b = BitMask::new(8, 8).unwrap();
        a.set(0, 0, true);
        b.set(7, 7, true);
        assert_eq!(a.iou(&b).unwrap(), 0.0);
    }

    #[test]
    fn iou_half_overlapping_squares() {
        // Two 8x8 squares offset by half a side: overlap 32, union 96.
        let mut a = BitMask::new(16, 8).unwrap();
        let mut b = BitMask::new(16, 8).unwrap();
        let mut overlap = 0;
        let mut union = 0;
        for y in 0..8 {
            for x in 0..16 {
                let in_a = x < 8;
                let in_b = (4..12).contains(&x);
                a.set(x, y, in_a);
                b.set(x, y, in_b);
                if in_a && in_b {
                    overlap += 1;
                }
                if in_a || in_b {
                    union += 1;
                }
            }
        }
        assert_eq!((overlap, union), (32, 96));
        assert!((a.iou(&b).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn iou_errors() {
        let a = BitMask::new(4, 4).unwrap();
        let b = BitMask::new(5, 4).unwrap();
        assert_eq!(a.iou(&b).unwrap_err(), GeometryError::DimensionMismatch);
        assert_eq!(a.iou(&a).unwrap_err(), GeometryError::BothEmpty);
    }

    #[test]
    fn iou_symmetric() {
        let mut a = BitMask::new(12, 12).unwrap();
        let mut b = BitMask::new(12, 12).unwrap();
        for i in 0..12 {
            a.set(i, i / 2, true);
            b.set(i / 3, i, true);
        }
        assert_eq!(a.iou(&b).unwrap(), b.iou(&a).unwrap());
    }

    #[test]
    fn centroid_of_single_pixel() {
        let mut m = BitMask::new(4, 4).unwrap();
        m.set(2, 1, true);
        let c = m.centroid().unwrap();
        assert_eq!((c.x, c.y), (2.5, 1.5));
        let empty = BitMask::new(4, 4).unwrap();
        assert_eq!(empty.centroid().unwrap_err(), GeometryError::EmptyMask);
    }
}
