use crate::map::{FrameRGB, GrayMap};

/// Luminance `I+ = 0.299R + 0.587G + 0.114B` (BT.601) and its complement
/// `I− = 255 − I+`.
pub fn intensity_channels(frame: &FrameRGB) -> (GrayMap, GrayMap) {
    let (w, h) = frame.dims();
    let on: Vec<f64> = frame
        .r()
        .iter()
        .zip(frame.g())
        .zip(frame.b())
        .map(|((&r, &g), &b)| 0.299 * r + 0.587 * g + 0.114 * b)
        .collect();
    let off: Vec<f64> = on.iter().map(|&v| 255.0 - v).collect();
    (
        GrayMap::from_vec(w, h, on).expect("frame dims"),
        GrayMap::from_vec(w, h, off).expect("frame dims"),
    )
}

/// The four broadly tuned opponent colour channels. Values may be negative.
#[derive(Clone, Debug)]
pub struct ColorChannels {
    pub red: GrayMap,
    pub green: GrayMap,
    pub blue: GrayMap,
    pub yellow: GrayMap,
}

pub fn color_channels(frame: &FrameRGB) -> ColorChannels {
    let (w, h) = frame.dims();
    let n = w * h;
    let (mut rr, mut gg, mut bb, mut yy) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for ((&r, &g), &b) in frame.r().iter().zip(frame.g()).zip(frame.b()) {
        rr.push(r - (g + b) / 2.0);
        gg.push(g - (r + b) / 2.0);
        bb.push(b - (r + g) / 2.0);
        yy.push((r + g) / 2.0 - (r - g).abs() / 2.0 - b);
    }
    let mk = |v| GrayMap::from_vec(w, h, v).expect("frame dims");
    ColorChannels {
        red: mk(rr),
        green: mk(gg),
        blue: mk(bb),
        yellow: mk(yy),
    }
}
