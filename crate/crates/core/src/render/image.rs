use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major depth map in meters along the optical axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthImage {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl DepthImage {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidArgument(format!(
                "depth buffer has {} values for a {height}x{width} image",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::InvalidArgument(format!("depth values must be finite and positive, found {bad}")));
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    /// Depth at `(row, col)` with coordinates clamped into the image.
    pub fn get_clamped(&self, row: isize, col: isize) -> f32 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.get(r, c)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.data.len());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        for d in &self.data {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::CorruptDataset("depth image shorter than its header".into()));
        }
        let h = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
        let w = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let expected = h.checked_mul(w).and_then(|n| n.checked_mul(4)).and_then(|n| n.checked_add(8));
        if expected != Some(bytes.len()) {
            return Err(Error::CorruptDataset(format!(
                "depth image of {h}x{w} expects {expected:?} bytes, found {}",
                bytes.len()
            )));
        }
        let data = bytes[8..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Self::new(h, w, data).map_err(|e| Error::CorruptDataset(e.to_string()))
    }
}

pub fn write_depth_image(path: &Path, image: &DepthImage) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&image.to_bytes())?;
    Ok(())
}

pub fn read_depth_image(path: &Path) -> Result<DepthImage> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    DepthImage::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_truncation() {
        let img = DepthImage::new(2, 3, vec![0.5, 0.6, 0.7, 0.8, 0.9, 1.0]).unwrap();
        let bytes = img.to_bytes();
        assert_eq!(&bytes[..8], &[2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(DepthImage::from_bytes(&bytes).unwrap(), img);
        assert!(matches!(DepthImage::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::CorruptDataset(_))));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.bin");
        write_depth_image(&p, &img).unwrap();
        assert_eq!(read_depth_image(&p).unwrap(), img);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(DepthImage::new(1, 2, vec![0.5, 0.0]).is_err());
        assert!(DepthImage::new(1, 2, vec![0.5, f32::NAN]).is_err());
        assert!(DepthImage::new(1, 2, vec![0.5]).is_err());
    }
}
