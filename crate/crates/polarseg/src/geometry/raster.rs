//! Scanline polygon rasterization under the pixel-center even-odd rule.

use super::{BitMask, Contour, GeometryError};

/// A pixel is set iff its center lies inside the polygon. Inside is decided
/// by crossing parity along the scanline through the pixel center, with the
/// half-open edge rule `[y_lo, y_hi)` so shared vertices count once.
pub(super) fn rasterize(
    contour: &Contour,
    width: usize,
    height: usize,
) -> Result<BitMask, GeometryError> {
    let mut mask = BitMask::new(width, height)?;
    let pts = contour.points();
    let n = pts.len();
    let mut crossings: Vec<f64> = Vec::with_capacity(8);

    for row in 0..height {
        let y = row as f64 + 0.5;
        crossings.clear();
        for i in 0..n {
            let p = pts[i];
            let q = pts[(i + 1) % n];
            if (p.y <= y && y < q.y) || (q.y <= y && y < p.y) {
                let t = (y - p.y) / (q.y - p.y);
                crossings.push(p.x + t * (q.x - p.x));
            }
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).expect("finite crossings"));
        // Pixel centers in [x0, x1) are inside; the parity of crossings at or
        // left of a center decides membership.
        for pair in crossings.chunks(2) {
            if pair.len() < 2 {
                break;
            }
            let (x0, x1) = (pair[0], pair[1]);
            let start = (x0 - 0.5).ceil().max(0.0);
            if start >= width as f64 {
                continue;
            }
            let mut col = start as usize;
            while col < width && (col as f64 + 0.5) < x1 {
                mask.set(col, row, true);
                col += 1;
            }
        }
    }

    if mask.is_empty() {
        return Err(GeometryError::EmptyRaster);
    }
    Ok(mask)
}
