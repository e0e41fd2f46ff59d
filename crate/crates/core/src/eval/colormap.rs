//! Fixed dark-to-warm heat colormap.
//!
//! Anchors (value, R, G, B), linearly interpolated:
//!   0.000 (0, 0, 4) | 0.167 (40, 11, 84) | 0.333 (101, 21, 110)
//!   0.500 (159, 42, 99) | 0.667 (212, 72, 66) | 0.833 (245, 125, 21)
//!   1.000 (250, 193, 39)
//!
//! The table is part of the output contract: overlays rendered from the same
//! heat values are byte-identical everywhere.

const ANCHORS: [(f32, [f32; 3]); 7] = [
    (0.0, [0.0, 0.0, 4.0]),
    (1.0 / 6.0, [40.0, 11.0, 84.0]),
    (2.0 / 6.0, [101.0, 21.0, 110.0]),
    (3.0 / 6.0, [159.0, 42.0, 99.0]),
    (4.0 / 6.0, [212.0, 72.0, 66.0]),
    (5.0 / 6.0, [245.0, 125.0, 21.0]),
    (1.0, [250.0, 193.0, 39.0]),
];

/// Map a heat value in [0, 1] to an RGB triple.
pub fn heat_color(v: f32) -> [u8; 3] {
    let v = v.clamp(0.0, 1.0);
    let mut lo = ANCHORS[0];
    let mut hi = ANCHORS[ANCHORS.len() - 1];
    for w in ANCHORS.windows(2) {
        if v >= w[0].0 && v <= w[1].0 {
            lo = w[0];
            hi = w[1];
            break;
        }
    }
    let span = hi.0 - lo.0;
    let t = if span == 0.0 { 0.0 } else { (v - lo.0) / span };
    let mut rgb = [0u8; 3];
    for (i, out) in rgb.iter_mut().enumerate() {
        *out = (lo.1[i] + t * (hi.1[i] - lo.1[i])).round() as u8;
    }
    rgb
}
