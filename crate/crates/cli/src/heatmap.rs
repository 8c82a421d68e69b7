//! Uncompressed BMP heatmaps of 2D spectra.
//!
//! The real part of the grid is mapped through a diverging blue–white–red
//! scale symmetric about zero, so sign structure survives and a zero grid
//! renders as uniform white.  Polariton guide lines are drawn on top:
//! green verticals at the single-polariton detection frequencies and, where
//! they fall inside the first axis, green horizontals at the single-polariton
//! and purple horizontals at the double-polariton frequencies.

use polspec_core::{CoreError, PolaritonModes, Result, SpectrumGrid};

/// Smallest rendered dimension, px; grids are integer-upscaled toward it.
const TARGET_MIN_PX: usize = 256;
/// Upscale ceiling, to keep tiny grids from exploding.
const MAX_UPSCALE: usize = 16;

const GUIDE_SINGLE: [u8; 3] = [0, 150, 0];
const GUIDE_DOUBLE: [u8; 3] = [150, 0, 160];

/// Render a 2D grid to BMP bytes.  The first axis runs bottom-to-top, the
/// detection axis left-to-right.  Grids with fewer than two points on either
/// axis are rejected: a heatmap of a line is meaningless.
pub fn render_bmp(grid: &SpectrumGrid, modes: Option<&PolaritonModes>) -> Result<Vec<u8>> {
    let n1 = grid.axis1.len();
    let n3 = grid.axis3.len();
    if n1 < 2 || n3 < 2 {
        return Err(CoreError::InvalidSpectrum(format!(
            "heatmap needs a 2D grid; '{}' is {}x{}",
            grid.kind, n1, n3
        )));
    }

    let scale = grid.peak_abs_real();
    let upscale = (TARGET_MIN_PX.div_ceil(n1.min(n3))).clamp(1, MAX_UPSCALE);
    let width = n3 * upscale;
    let height = n1 * upscale;

    // Row-major RGB canvas with the first axis index increasing upward.
    let mut canvas = vec![0u8; width * height * 3];
    for i1 in 0..n1 {
        for i3 in 0..n3 {
            let v = if scale > 0.0 {
                (grid.at(i1, i3).re / scale).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            let rgb = diverging_rgb(v);
            for dy in 0..upscale {
                let y = i1 * upscale + dy;
                for dx in 0..upscale {
                    let x = i3 * upscale + dx;
                    canvas[(y * width + x) * 3..][..3].copy_from_slice(&rgb);
                }
            }
        }
    }

    if let Some(m) = modes {
        let singles = [m.lower_cm, m.upper_cm];
        let doubles = [
            2.0 * m.lower_cm,
            m.lower_cm + m.upper_cm,
            2.0 * m.upper_cm,
        ];
        for &x in &singles {
            if let Some(col) = nearest_index(&grid.axis3, x) {
                for y in 0..height {
                    for dx in 0..upscale {
                        let px = col * upscale + dx;
                        canvas[(y * width + px) * 3..][..3].copy_from_slice(&GUIDE_SINGLE);
                    }
                }
            }
        }
        for (values, color) in [(&singles[..], GUIDE_SINGLE), (&doubles[..], GUIDE_DOUBLE)] {
            for &v in values {
                if let Some(row) = nearest_index(&grid.axis1, v) {
                    for dy in 0..upscale {
                        let y = row * upscale + dy;
                        for x in 0..width {
                            canvas[(y * width + x) * 3..][..3].copy_from_slice(&color);
                        }
                    }
                }
            }
        }
    }

    Ok(encode_bmp(&canvas, width, height))
}

/// Diverging blue–white–red map on [−1, 1]: negative → blue, zero → white,
/// positive → red.  Negating the input swaps the red and blue channels.
fn diverging_rgb(v: f64) -> [u8; 3] {
    let fade = (255.0 * (1.0 - v.abs())).round() as u8;
    if v >= 0.0 {
        [255, fade, fade]
    } else {
        [fade, fade, 255]
    }
}

/// Index of the axis sample nearest to `x`, or None when `x` lies outside
/// the axis range.
fn nearest_index(axis: &[f64], x: f64) -> Option<usize> {
    let (&first, &last) = (axis.first()?, axis.last()?);
    if x < first || x > last {
        return None;
    }
    axis.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map(|(i, _)| i)
}

/// Pack an RGB canvas (row 0 at the bottom) into a 24-bit uncompressed BMP.
fn encode_bmp(canvas: &[u8], width: usize, height: usize) -> Vec<u8> {
    let row_bytes = width * 3;
    let padding = (4 - row_bytes % 4) % 4;
    let data_size = (row_bytes + padding) * height;
    let file_size = 54 + data_size;

    let mut out = Vec::with_capacity(file_size);
    // file header
    out.extend_from_slice(b"BM");
    out.extend_from_slice(&(file_size as u32).to_le_bytes());
    out.extend_from_slice(&[0; 4]); // reserved
    out.extend_from_slice(&54u32.to_le_bytes()); // pixel-data offset
    // info header (BITMAPINFOHEADER)
    out.extend_from_slice(&40u32.to_le_bytes());
    out.extend_from_slice(&(width as i32).to_le_bytes());
    out.extend_from_slice(&(height as i32).to_le_bytes()); // positive: bottom-up
    out.extend_from_slice(&1u16.to_le_bytes()); // planes
    out.extend_from_slice(&24u16.to_le_bytes()); // bits per pixel
    out.extend_from_slice(&0u32.to_le_bytes()); // no compression
    out.extend_from_slice(&(data_size as u32).to_le_bytes());
    out.extend_from_slice(&2835u32.to_le_bytes()); // 72 dpi
    out.extend_from_slice(&2835u32.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes()); // palette size
    out.extend_from_slice(&0u32.to_le_bytes()); // important colors

    // BMP rows run bottom-to-top; canvas row 0 is the bottom row, so emit in
    // storage order.  Pixels are BGR.
    for y in 0..height {
        let row = &canvas[y * row_bytes..(y + 1) * row_bytes];
        for px in row.chunks_exact(3) {
            out.extend_from_slice(&[px[2], px[1], px[0]]);
        }
        out.extend(std::iter::repeat(0u8).take(padding));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;
    use std::collections::BTreeMap;

    fn grid(n1: usize, n3: usize, f: impl Fn(usize, usize) -> f64) -> SpectrumGrid {
        let axis1: Vec<f64> = (0..n1).map(|i| 3900.0 + i as f64).collect();
        let axis3: Vec<f64> = (0..n3).map(|i| 1950.0 + i as f64).collect();
        let f = &f;
        let values = (0..n1)
            .flat_map(|i1| (0..n3).map(move |i3| C64::new(f(i1, i3), 0.0)))
            .collect();
        SpectrumGrid {
            kind: "test".into(),
            axis1,
            axis3,
            values,
            normalization: 1.0,
            metadata: BTreeMap::new(),
        }
    }

    fn pixels(bmp: &[u8]) -> (usize, usize, Vec<u8>) {
        let width = i32::from_le_bytes(bmp[18..22].try_into().unwrap()) as usize;
        let height = i32::from_le_bytes(bmp[22..26].try_into().unwrap()) as usize;
        let offset = u32::from_le_bytes(bmp[10..14].try_into().unwrap()) as usize;
        (width, height, bmp[offset..].to_vec())
    }

    #[test]
    fn magic_and_dimensions() {
        let bmp = render_bmp(&grid(4, 6, |_, _| 0.0), None).unwrap();
        assert_eq!(&bmp[..2], b"BM");
        let (w, h, _) = pixels(&bmp);
        // upscaled by ceil(256/4) = 64, capped at 16
        assert_eq!((w, h), (6 * 16, 4 * 16));
        let file_size = u32::from_le_bytes(bmp[2..6].try_into().unwrap()) as usize;
        assert_eq!(file_size, bmp.len());
    }

    #[test]
    fn one_dimensional_grids_are_rejected() {
        let err = render_bmp(&grid(1, 6, |_, _| 1.0), None).unwrap_err();
        assert!(matches!(err, CoreError::InvalidSpectrum(_)));
        let err = render_bmp(&grid(6, 1, |_, _| 1.0), None).unwrap_err();
        assert!(matches!(err, CoreError::InvalidSpectrum(_)));
    }

    #[test]
    fn zero_grid_renders_uniform_white() {
        let bmp = render_bmp(&grid(3, 3, |_, _| 0.0), None).unwrap();
        let (_, _, data) = pixels(&bmp);
        // every pixel byte is 255 except row padding (3x16=48 px, 144 bytes/row, no padding)
        assert!(data.iter().all(|&b| b == 255));
    }

    #[test]
    fn sign_flip_swaps_red_and_blue() {
        let f = |i1: usize, i3: usize| (i1 as f64 - 1.0) * (i3 as f64 - 1.0);
        let pos = render_bmp(&grid(3, 3, f), None).unwrap();
        let neg = render_bmp(&grid(3, 3, |a, b| -f(a, b)), None).unwrap();
        let (w, _, p) = pixels(&pos);
        let (_, _, n) = pixels(&neg);
        let stride = w * 3; // no padding at width 48
        for (rp, rn) in p.chunks_exact(stride).zip(n.chunks_exact(stride)) {
            for (a, b) in rp.chunks_exact(3).zip(rn.chunks_exact(3)) {
                assert_eq!([a[0], a[1], a[2]], [b[2], b[1], b[0]]);
            }
        }
    }

    #[test]
    fn guide_lines_are_drawn_only_inside_range() {
        let modes = PolaritonModes {
            lower_cm: 1951.0,
            upper_cm: 1953.0,
            lower_halfwidth_cm: 1.0,
            upper_halfwidth_cm: 1.0,
            splitting_cm: 2.0,
        };
        // axis1 covers 3900..3904: only 2*1951=3902 and 1951+1953=3904 fall inside
        let bmp = render_bmp(&grid(5, 5, |_, _| 0.0), Some(&modes)).unwrap();
        let (w, _, data) = pixels(&bmp);
        let up = 16;
        let stride = w * 3 + (4 - (w * 3) % 4) % 4;
        let probe = |x: usize, y: usize| {
            let i = y * stride + x * 3;
            [data[i + 2], data[i + 1], data[i]] // back to RGB
        };
        // vertical single-polariton guides at columns 1 and 3
        assert_eq!(probe(1 * up, 7), GUIDE_SINGLE);
        assert_eq!(probe(3 * up, 7), GUIDE_SINGLE);
        // horizontal double-polariton guides at rows 2 (3902) and 4 (3904)
        assert_eq!(probe(7, 2 * up), GUIDE_DOUBLE);
        assert_eq!(probe(7, 4 * up), GUIDE_DOUBLE);
        // 2*1953 = 3906 is outside; row 0 stays white away from the verticals
        assert_eq!(probe(7, 0), [255, 255, 255]);
    }
}
