//! RGB image ingestion and reshape-based tensorization.

use std::path::Path;

use image::{ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::index::IndexSet;
use crate::tensor::{DenseTensor, Shape};

/// Loads an 8-bit image as an `H×W×3` tensor with entries in `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let img = image::ImageReader::open(path.as_ref())?
        .with_guessed_format()?
        .decode()?;
    image_to_tensor(&img.to_rgb8())
}

pub fn image_to_tensor(img: &RgbImage) -> Result<DenseTensor> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let shape = Shape::new(vec![h, w, 3])?;
    let mut data = vec![0.0; shape.numel()];
    for (x, y, px) in img.enumerate_pixels() {
        let (x, y) = (x as usize, y as usize);
        for c in 0..3 {
            data[y + h * x + h * w * c] = px.0[c] as f64 / 255.0;
        }
    }
    DenseTensor::from_vec(shape, data)
}

/// Clamps to `[0, 1]` and quantizes to 8 bits.
pub fn tensor_to_image(t: &DenseTensor) -> Result<RgbImage> {
    let d = t.dims();
    if d.len() != 3 || d[2] != 3 {
        return Err(Error::InvalidShape(format!("expected H×W×3, got {}", t.shape())));
    }
    let (h, w) = (d[0], d[1]);
    let (wu, hu) = (
        u32::try_from(w).map_err(|_| Error::InvalidShape("image too wide".into()))?,
        u32::try_from(h).map_err(|_| Error::InvalidShape("image too tall".into()))?,
    );
    let data = t.data();
    Ok(RgbImage::from_fn(wu, hu, |x, y| {
        let (x, y) = (x as usize, y as usize);
        image::Rgb(std::array::from_fn(|c| {
            (data[y + h * x + h * w * c].clamp(0.0, 1.0) * 255.0).round() as u8
        }))
    }))
}

pub fn save_image(t: &DenseTensor, path: impl AsRef<Path>) -> Result<()> {
    tensor_to_image(t)?.save_with_format(path, ImageFormat::Png)?;
    Ok(())
}

/// Reshapes `t` to `target` without moving data.
pub fn tensorize(t: &DenseTensor, target: &[usize]) -> Result<DenseTensor> {
    t.reshape(Shape::new(target.to_vec())?)
}

/// Inverse of [`tensorize`].
pub fn detensorize(t: &DenseTensor, original: &[usize]) -> Result<DenseTensor> {
    t.reshape(Shape::new(original.to_vec())?)
}

/// Named reshape schemes for standard image sizes.
pub fn preset(name: &str) -> Option<(Vec<usize>, Vec<usize>)> {
    match name {
        "lena" => Some((vec![256, 256, 3], vec![4, 4, 4, 4, 4, 4, 4, 4, 3])),
        "einstein" => Some((vec![600, 600, 3], vec![6, 10, 10, 6, 10, 10, 3])),
        _ => None,
    }
}

/// Splits each spatial side into the given factors: `64×64×3` with `[4, 4, 4]`
/// becomes `4×4×4×4×4×4×3`.
pub fn spatial_split(h_factors: &[usize], w_factors: &[usize]) -> Vec<usize> {
    h_factors.iter().chain(w_factors).copied().chain([3]).collect()
}

/// Fills every missing pixel with its channel's observed mean.
pub fn mean_fill(t: &DenseTensor, mask: &IndexSet) -> Result<DenseTensor> {
    let d = t.dims();
    if d.len() != 3 {
        return Err(Error::InvalidShape(format!("expected H×W×C, got {}", t.shape())));
    }
    if mask.shape() != t.shape() {
        return Err(Error::ShapeMismatch(format!("mask {} vs image {}", mask.shape(), t.shape())));
    }
    let plane = d[0] * d[1];
    let mut sums = vec![0.0; d[2]];
    let mut counts = vec![0usize; d[2]];
    for &lin in mask.linear() {
        sums[lin / plane] += t.data()[lin];
        counts[lin / plane] += 1;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
        .collect();
    let mut out = DenseTensor::from_fn(t.shape().clone(), |_| 0.0);
    let data = out.data_mut();
    for (lin, v) in data.iter_mut().enumerate() {
        *v = means[lin / plane];
    }
    for &lin in mask.linear() {
        data[lin] = t.data()[lin];
    }
    Ok(out)
}
