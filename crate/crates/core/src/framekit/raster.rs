use std::path::Path;

use crate::error::{invalid, Result};
use crate::plane::Plane;

/// Single-channel image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Raster {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(invalid(format!(
                "{height}x{width} raster needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Raster {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Raster {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_square(&self) -> bool {
        self.height == self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Bilinear sample at fractional (y, x); neighbours outside the image
    /// contribute zero.
    pub fn sample_bilinear(&self, y: f64, x: f64) -> f64 {
        let y0 = y.floor();
        let x0 = x.floor();
        let (fy, fx) = (y - y0, x - x0);
        let (y0, x0) = (y0 as isize, x0 as isize);
        let at = |yy: isize, xx: isize| -> f64 {
            if yy < 0 || xx < 0 || yy >= self.height as isize || xx >= self.width as isize {
                0.0
            } else {
                self.data[yy as usize * self.width + xx as usize]
            }
        };
        let mut v = 0.0;
        for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
            if wy == 0.0 {
                continue;
            }
            for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
                if wx == 0.0 {
                    continue;
                }
                v += wy * wx * at(y0 + dy, x0 + dx);
            }
        }
        v
    }

    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Raster> {
        if y0 + h > self.height || x0 + w > self.width {
            return Err(invalid(format!(
                "crop {h}x{w} at ({y0},{x0}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(h * w);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + w]);
        }
        Ok(Raster {
            height: h,
            width: w,
            data,
        })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len().max(1) as f64
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Bilinear resize with half-pixel centres and edge clamping.
    pub fn resize_bilinear(&self, height: usize, width: usize) -> Raster {
        let sy = self.height as f64 / height as f64;
        let sx = self.width as f64 / width as f64;
        let clamp = |v: f64, n: usize| v.clamp(0.0, (n - 1) as f64);
        Raster::from_fn(height, width, |y, x| {
            let fy = clamp((y as f64 + 0.5) * sy - 0.5, self.height);
            let fx = clamp((x as f64 + 0.5) * sx - 0.5, self.width);
            self.sample_bilinear(fy, fx)
        })
    }

    /// Writes an 8-bit grayscale PNG; values are clamped to [0, 1].
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer sized from dimensions");
        if let Some(dir) = path.as_ref().parent() {
            std::fs::create_dir_all(dir)?;
        }
        img.save(path)?;
        Ok(())
    }
}

/// One square grayscale MR frame with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pixels: Raster,
    plane: Plane,
}

impl Frame {
    pub fn new(pixels: Raster, plane: Plane) -> Result<Self> {
        if !pixels.is_square() {
            return Err(invalid(format!(
                "frame must be square, got {}x{}",
                pixels.height(),
                pixels.width()
            )));
        }
        if pixels.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("frame intensities must lie in [0, 1]"));
        }
        Ok(Frame { pixels, plane })
    }

    pub fn side(&self) -> usize {
        self.pixels.height()
    }

    pub fn plane(&self) -> Plane {
        self.plane
    }

    pub fn pixels(&self) -> &Raster {
        &self.pixels
    }

    pub fn into_pixels(self) -> Raster {
        self.pixels
    }
}
