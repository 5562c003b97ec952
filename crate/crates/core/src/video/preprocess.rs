//! CLIP image preprocessing: bicubic resize of the shorter side to 224,
//! center crop to 224x224, scale to [0,1], per-channel mean/std
//! normalization, CHW layout.

use image::imageops::{self, FilterType};
use image::RgbImage;

use crate::embedding::{Frame, FRAME_CHANNELS, FRAME_SIZE};

pub const CLIP_MEAN: [f32; 3] = [0.481_454_66, 0.457_827_5, 0.408_210_73];
pub const CLIP_STD: [f32; 3] = [0.268_629_54, 0.261_302_58, 0.275_777_11];

/// Output size of the shorter-side resize; the longer side is scaled
/// proportionally and truncated.
fn resized_dims(width: u32, height: u32) -> (u32, u32) {
    let target = FRAME_SIZE as u64;
    let (w, h) = (width as u64, height as u64);
    if w <= h {
        (target as u32, ((h * target) / w).max(target) as u32)
    } else {
        (((w * target) / h).max(target) as u32, target as u32)
    }
}

/// Offset of a centered crop, rounding half to even.
fn crop_offset(len: u32, crop: u32) -> u32 {
    let twice = len - crop;
    let (half, rem) = (twice / 2, twice % 2);
    if rem == 1 && half % 2 == 1 {
        half + 1
    } else {
        half
    }
}

pub fn preprocess(image: &RgbImage) -> Frame {
    let size = FRAME_SIZE as u32;
    let owned;
    let square = if image.width() == size && image.height() == size {
        image
    } else {
        let (w, h) = resized_dims(image.width().max(1), image.height().max(1));
        let resized = imageops::resize(image, w, h, FilterType::CatmullRom);
        let (x, y) = (crop_offset(w, size), crop_offset(h, size));
        owned = imageops::crop_imm(&resized, x, y, size, size).to_image();
        &owned
    };
    let plane = FRAME_SIZE * FRAME_SIZE;
    let mut data = vec![0f32; plane * FRAME_CHANNELS];
    for (i, px) in square.pixels().enumerate() {
        for c in 0..FRAME_CHANNELS {
            data[c * plane + i] = (f32::from(px[c]) / 255.0 - CLIP_MEAN[c]) / CLIP_STD[c];
        }
    }
    Frame::new(FRAME_SIZE, FRAME_SIZE, FRAME_CHANNELS, data).expect("buffer sized for 224x224x3")
}
