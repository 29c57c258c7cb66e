//! Frame sources: seeded synthetic tensors or images read from a directory.

use std::path::{Path, PathBuf};

use image::imageops::FilterType;

use crate::error::{Error, Result};
use crate::tensor::{Shape4, Tensor4};

/// One input frame, `1×3×size×size` with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    pub tensor: Tensor4,
}

pub trait FrameSource: Send {
    /// The next frame, or `None` once the source is exhausted.
    fn next_frame(&mut self) -> Option<Result<Frame>>;
}

/// `count` frames of seeded uniform noise; frame `i` uses seed `seed + i`.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    seed: u64,
    size: usize,
    count: u64,
    next: u64,
}

impl SyntheticSource {
    pub fn new(seed: u64, size: usize, count: u64) -> Self {
        Self {
            seed,
            size,
            count,
            next: 0,
        }
    }
}

impl FrameSource for SyntheticSource {
    fn next_frame(&mut self) -> Option<Result<Frame>> {
        if self.next >= self.count {
            return None;
        }
        let index = self.next;
        self.next += 1;
        Some(
            Tensor4::random(
                Shape4::new(1, 3, self.size, self.size),
                self.seed.wrapping_add(index),
                0.0,
                1.0,
            )
            .map(|tensor| Frame { index, tensor }),
        )
    }
}

/// PNG and JPEG files of a directory in name order, resized to `size×size` RGB.
#[derive(Debug, Clone)]
pub struct ImageDirSource {
    paths: Vec<PathBuf>,
    size: usize,
    next: usize,
}

impl ImageDirSource {
    pub fn open(dir: &Path, size: usize) -> Result<Self> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().and_then(|e| e.to_str()).is_some_and(|e| {
                    matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg")
                })
            })
            .collect();
        paths.sort();
        Ok(Self {
            paths,
            size,
            next: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

impl FrameSource for ImageDirSource {
    fn next_frame(&mut self) -> Option<Result<Frame>> {
        let path = self.paths.get(self.next)?;
        let index = self.next as u64;
        self.next += 1;
        Some(load_image(path, self.size).map(|tensor| Frame { index, tensor }))
    }
}

/// Decodes an image into a `1×3×size×size` tensor scaled to `[0, 1]`.
pub fn load_image(path: &Path, size: usize) -> Result<Tensor4> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let rgb = img
        .resize_exact(size as u32, size as u32, FilterType::Triangle)
        .to_rgb8();
    let plane = size * size;
    let mut data = vec![0.0f32; 3 * plane];
    for (i, px) in rgb.pixels().enumerate() {
        for c in 0..3 {
            data[c * plane + i] = px[c] as f32 / 255.0;
        }
    }
    Tensor4::from_vec(Shape4::new(1, 3, size, size), data)
}

/// Drains a source, failing on the first bad frame.
pub fn collect_frames(source: &mut dyn FrameSource) -> Result<Vec<Frame>> {
    std::iter::from_fn(|| source.next_frame()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_is_seeded_and_finite() {
        let a = collect_frames(&mut SyntheticSource::new(3, 32, 2)).unwrap();
        let b = collect_frames(&mut SyntheticSource::new(3, 32, 2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert_ne!(a[0].tensor, a[1].tensor);
        assert_eq!(a[1].index, 1);
    }

    #[test]
    fn image_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = image::RgbImage::from_fn(8, 8, |x, _| image::Rgb([255, (x * 32) as u8, 0]));
        img.save(dir.path().join("b.png")).unwrap();
        img.save(dir.path().join("a.png")).unwrap();
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let mut src = ImageDirSource::open(dir.path(), 8).unwrap();
        assert_eq!(src.len(), 2);
        let frames = collect_frames(&mut src).unwrap();
        let t = &frames[0].tensor;
        assert_eq!(t.shape(), Shape4::new(1, 3, 8, 8));
        assert_eq!(t.at(0, 0, 3, 3), 1.0);
        assert_eq!(t.at(0, 2, 3, 3), 0.0);
    }
}
