//! Deterministic synthetic clips for benchmarking and smoke tests.

use bias_core::FrameRGB;

/// A textured background with a red disc drifting right, a blue square
/// drifting diagonally and a yellow bar sweeping down.
pub fn moving_shapes(width: usize, height: usize, frames: usize) -> Vec<FrameRGB> {
    (0..frames).map(|t| moving_shapes_frame(width, height, t)).collect()
}

pub fn moving_shapes_frame(width: usize, height: usize, t: usize) -> FrameRGB {
    let (w, h) = (width as f64, height as f64);
    let tf = t as f64;
    let disc = ((0.15 * w + 3.0 * tf) % w, 0.4 * h, 0.05 * h.min(w));
    let square = ((0.6 * w + 2.0 * tf) % w, (0.2 * h + 1.5 * tf) % h, 0.04 * h.min(w));
    let bar_y = (0.1 * h + 2.0 * tf) % h;
    FrameRGB::from_fn(width, height, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let tex = 20.0 * ((xf * 0.11).sin() * (yf * 0.07).cos());
        let base = 90.0 + 40.0 * yf / h + tex;
        let mut px = [base, base, base + 10.0];
        if (xf - disc.0).hypot(yf - disc.1) < disc.2 {
            px = [230.0, 30.0, 30.0];
        }
        if (xf - square.0).abs() < square.2 && (yf - square.1).abs() < square.2 {
            px = [30.0, 40.0, 220.0];
        }
        if (yf - bar_y).abs() < 3.0 && xf > 0.7 * w && xf < 0.9 * w {
            px = [235.0, 225.0, 40.0];
        }
        px.map(|v| v.clamp(0.0, 255.0))
    })
    .expect("values clamped into range")
}
