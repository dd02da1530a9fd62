use super::frame::{BayerFrame, BayerPattern, RgbFrame};
use super::PipelineError;

/// Mirror neighbours that keep Bayer parity at the border (-1 -> 1, n -> n-2).
fn neighbours(n: u32) -> (Vec<usize>, Vec<usize>) {
    let n = n as usize;
    let prev = (0..n).map(|i| if i == 0 { 1 } else { i - 1 }).collect();
    let next = (0..n).map(|i| if i + 1 == n { n - 2 } else { i + 1 }).collect();
    (prev, next)
}

fn avg2(a: u16, b: u16) -> u16 {
    (a as u32 + b as u32).div_ceil(2) as u16
}

fn avg4(a: u16, b: u16, c: u16, d: u16) -> u16 {
    ((a as u32 + b as u32 + c as u32 + d as u32 + 2) / 4) as u16
}

/// Bilinear RGGB demosaic.
///
/// Missing samples are the mean of the nearest same-colour neighbours
/// (two or four of them), rounded half up. Samples outside the frame are
/// mirrored about the edge pixel so the colour phase is preserved.
pub fn demosaic_bilinear(frame: &BayerFrame) -> Result<RgbFrame, PipelineError> {
    if frame.width < 2 || frame.height < 2 {
        return Err(PipelineError::Dimensions {
            width: frame.width,
            height: frame.height,
        });
    }
    frame.validate()?;
    match frame.pattern {
        BayerPattern::Rggb => {}
    }
    let w = frame.width as usize;
    let (xm, xp) = neighbours(frame.width);
    let (ym, yp) = neighbours(frame.height);
    let px = &frame.pixels;
    let mut out = Vec::with_capacity(px.len());
    for y in 0..frame.height as usize {
        let (up, row, down) = (ym[y] * w, y * w, yp[y] * w);
        for x in 0..w {
            let (l, r) = (xm[x], xp[x]);
            let c = px[row + x];
            let cross = || avg4(px[up + x], px[down + x], px[row + l], px[row + r]);
            let diag = || avg4(px[up + l], px[up + r], px[down + l], px[down + r]);
            let horiz = || avg2(px[row + l], px[row + r]);
            let vert = || avg2(px[up + x], px[down + x]);
            out.push(match (y % 2, x % 2) {
                (0, 0) => [c, cross(), diag()],
                (0, _) => [horiz(), c, vert()],
                (_, 0) => [vert(), c, horiz()],
                _ => [diag(), cross(), c],
            });
        }
    }
    Ok(RgbFrame {
        width: frame.width,
        height: frame.height,
        bit_depth: frame.bit_depth,
        pixels: out,
        stream_id: frame.stream_id,
        seq: frame.seq,
        exposure_ts: frame.exposure_ts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(w: u32, h: u32, pixels: Vec<u16>) -> BayerFrame {
        BayerFrame {
            width: w,
            height: h,
            bit_depth: 8,
            pattern: BayerPattern::Rggb,
            pixels,
            stream_id: 0,
            seq: 0,
            exposure_ts: 77,
        }
    }

    #[test]
    fn uniform_input() {
        let rgb = demosaic_bilinear(&frame(6, 4, vec![93; 24])).unwrap();
        assert!(rgb.pixels.iter().all(|p| *p == [93, 93, 93]));
        assert_eq!(rgb.exposure_ts, 77);
    }

    #[test]
    fn single_red_sample_kernel() {
        // red 200 at (2, 2); everything else zero
        let mut px = vec![0; 16];
        px[2 * 4 + 2] = 200;
        let rgb = demosaic_bilinear(&frame(4, 4, px)).unwrap();
        let red = |x: usize, y: usize| rgb.pixels[y * 4 + x][0];
        assert_eq!(red(2, 2), 200);
        // green sites beside it: half weight
        assert_eq!(red(1, 2), 100);
        assert_eq!(red(3, 2), 200); // mirrored: both horizontal neighbours are (2,2)
        assert_eq!(red(2, 1), 100);
        assert_eq!(red(2, 3), 200);
        // blue sites: quarter weight per diagonal
        assert_eq!(red(1, 1), 50);
        assert_eq!(red(3, 1), 100);
        assert_eq!(red(1, 3), 100);
        assert_eq!(red(3, 3), 200);
        // other red sites untouched, far corners unaffected
        assert_eq!(red(0, 0), 0);
        assert_eq!(red(0, 1), 0);
        // red never leaks into other channels
        assert!(rgb.pixels.iter().all(|p| p[1] == 0 && p[2] == 0));
    }

    #[test]
    fn too_small() {
        assert!(demosaic_bilinear(&frame(1, 1, vec![0])).is_err());
    }
}
