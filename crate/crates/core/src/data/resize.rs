//! Bilinear resampling with the align-corners convention: source position
//! `i * (in-1)/(out-1)`, so corner pixels map onto corner pixels exactly and
//! same-size resizing is the identity.

use crate::tensor::Tensor;

use super::{DataError, LabeledImage};

pub fn bilinear_resize_channel(
    src: &[f32],
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<f32> {
    debug_assert_eq!(src.len(), in_h * in_w);
    let scale = |out: usize, inp: usize| -> f32 {
        if out > 1 {
            (inp as f32 - 1.0) / (out as f32 - 1.0)
        } else {
            0.0
        }
    };
    let sy = scale(out_h, in_h);
    let sx = scale(out_w, in_w);
    let mut out = Vec::with_capacity(out_h * out_w);
    for oy in 0..out_h {
        let fy = oy as f32 * sy;
        let y0 = (fy.floor() as usize).min(in_h - 1);
        let y1 = (y0 + 1).min(in_h - 1);
        let wy = fy - y0 as f32;
        for ox in 0..out_w {
            let fx = ox as f32 * sx;
            let x0 = (fx.floor() as usize).min(in_w - 1);
            let x1 = (x0 + 1).min(in_w - 1);
            let wx = fx - x0 as f32;
            let top = src[y0 * in_w + x0] * (1.0 - wx) + src[y0 * in_w + x1] * wx;
            let bottom = src[y1 * in_w + x0] * (1.0 - wx) + src[y1 * in_w + x1] * wx;
            out.push(top * (1.0 - wy) + bottom * wy);
        }
    }
    out
}

/// Scale a sample to the model input: `[3, size, size]` values in [0, 1],
/// grayscale replicated across the three channels.
pub fn resize_to_input(img: &LabeledImage, size: usize) -> Result<Tensor, DataError> {
    let data = resize_to_planes(img, size)?;
    Ok(Tensor::from_vec(&[3, size, size], data)?)
}

/// Same as [`resize_to_input`] but returning the raw channel planes.
pub fn resize_to_planes(img: &LabeledImage, size: usize) -> Result<Vec<f32>, DataError> {
    if img.width == 0 || img.height == 0 {
        return Err(DataError::ZeroDimension {
            width: img.width,
            height: img.height,
        });
    }
    let (h, w, c) = (img.height, img.width, img.channels);
    if c != 1 && c != 3 {
        return Err(DataError::BadChannels(c));
    }
    let mut out = Vec::with_capacity(3 * size * size);
    if c == 1 {
        let plane: Vec<f32> = img.pixels.iter().map(|&p| p as f32 / 255.0).collect();
        let resized = bilinear_resize_channel(&plane, h, w, size, size);
        for _ in 0..3 {
            out.extend_from_slice(&resized);
        }
    } else {
        // interleaved RGB rows to channel planes
        for ch in 0..3 {
            let plane: Vec<f32> = (0..h * w)
                .map(|i| img.pixels[i * 3 + ch] as f32 / 255.0)
                .collect();
            out.extend(bilinear_resize_channel(&plane, h, w, size, size));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray_image(h: usize, w: usize, pixels: Vec<u8>) -> LabeledImage {
        LabeledImage {
            pixels,
            height: h,
            width: w,
            channels: 1,
            label: 0,
            class_name: "x".into(),
            source_path: String::new(),
        }
    }

    #[test]
    fn same_size_is_identity_up_to_scaling() {
        let pixels: Vec<u8> = (0..16).map(|i| (i * 16) as u8).collect();
        let img = gray_image(4, 4, pixels.clone());
        let t = resize_to_input(&img, 4).unwrap();
        for (i, &p) in pixels.iter().enumerate() {
            assert!((t.data()[i] - p as f32 / 255.0).abs() < 1e-7);
        }
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = gray_image(17, 31, vec![128; 17 * 31]);
        let t = resize_to_input(&img, 224).unwrap();
        assert_eq!(t.shape(), &[3, 224, 224]);
        for &v in t.data() {
            assert!((v - 128.0 / 255.0).abs() < 1e-6);
        }
    }

    #[test]
    fn checkerboard_upsample_keeps_corners() {
        // 2x2 checkerboard to 4x4: align-corners pins the four source values
        // at the corners; interior weights are 1/3-2/3 blends.
        let src = vec![1.0f32, 0.0, 0.0, 1.0];
        let out = bilinear_resize_channel(&src, 2, 2, 4, 4);
        assert!((out[0] - 1.0).abs() < 1e-6);
        assert!((out[3] - 0.0).abs() < 1e-6);
        assert!((out[12] - 0.0).abs() < 1e-6);
        assert!((out[15] - 1.0).abs() < 1e-6);
        // hand-evaluated interior: position 1/3 along the top row
        let expect_01 = 1.0 * (2.0 / 3.0) + 0.0 * (1.0 / 3.0);
        assert!((out[1] - expect_01).abs() < 1e-6);
    }

    #[test]
    fn zero_dimension_rejected() {
        let img = gray_image(0, 4, vec![]);
        assert!(matches!(
            resize_to_input(&img, 8),
            Err(DataError::ZeroDimension { .. })
        ));
    }

    #[test]
    fn grayscale_replicates_to_three_channels() {
        let img = gray_image(2, 2, vec![0, 85, 170, 255]);
        let t = resize_to_input(&img, 2).unwrap();
        let d = t.data();
        assert_eq!(&d[0..4], &d[4..8]);
        assert_eq!(&d[0..4], &d[8..12]);
    }
}
