//! Raster images of coarse-mesh estimates.

use std::path::Path;

use idsm_core::mesh::CellLocator;
use idsm_core::scenario::Scenario;
use idsm_core::Mesh;

use crate::error::{Error, Result};

pub const SIZE: usize = 256;

/// Pixel grid over `[-1, 1]²` with a precomputed pixel-to-cell map.
pub struct Raster {
    size: usize,
    cells: Vec<Option<usize>>,
}

impl Raster {
    pub fn new(mesh: &Mesh, size: usize) -> Self {
        let locator = CellLocator::new(mesh);
        let cells = (0..size * size)
            .map(|i| {
                let p = pixel_center(size, i);
                (p[0] * p[0] + p[1] * p[1] <= 1.0).then(|| locator.locate_or_nearest(mesh, p))
            })
            .collect();
        Self { size, cells }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Cell under pixel `i`, `None` outside the disk.
    pub fn cell(&self, i: usize) -> Option<usize> {
        self.cells[i]
    }

    /// Grayscale with 128 at zero, scaled by the largest magnitude.
    pub fn grayscale(&self, values: &[f64]) -> Vec<u8> {
        let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.cells
            .iter()
            .map(|c| match c {
                Some(c) if max > 0.0 => (127.5 * (1.0 + values[*c] / max)).round().clamp(0.0, 255.0) as u8,
                _ => 128,
            })
            .collect()
    }

    /// RGB map from blue (zero) to red (largest magnitude). Pixels on the
    /// boundary of the true support are black, outside the disk white.
    pub fn color(&self, values: &[f64], truth: Option<&[bool]>) -> Vec<u8> {
        let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let n = self.size;
        let mut out = Vec::with_capacity(3 * n * n);
        for i in 0..n * n {
            let rgb = match self.cells[i] {
                None => [255, 255, 255],
                Some(_) if truth.is_some_and(|t| is_edge(t, n, i)) => [0, 0, 0],
                Some(c) => {
                    let s = if max > 0.0 { values[c].abs() / max } else { 0.0 };
                    colormap(s)
                }
            };
            out.extend_from_slice(&rgb);
        }
        out
    }

    /// Per-pixel membership in the true support of component `l` at `t`.
    pub fn truth_mask(&self, scenario: &Scenario, l: usize, t: f64) -> Vec<bool> {
        (0..self.size * self.size)
            .map(|i| {
                self.cells[i].is_some() && {
                    let p = pixel_center(self.size, i);
                    scenario
                        .inclusions
                        .iter()
                        .any(|inc| inc.component == l && inc.contains(p, t))
                }
            })
            .collect()
    }
}

fn pixel_center(size: usize, i: usize) -> [f64; 2] {
    let (row, col) = (i / size, i % size);
    let h = 2.0 / size as f64;
    [-1.0 + (col as f64 + 0.5) * h, 1.0 - (row as f64 + 0.5) * h]
}

fn is_edge(mask: &[bool], n: usize, i: usize) -> bool {
    if !mask[i] {
        return false;
    }
    let (r, c) = (i / n, i % n);
    (r == 0 || !mask[i - n]) || (r + 1 == n || !mask[i + n]) || (c == 0 || !mask[i - 1]) || (c + 1 == n || !mask[i + 1])
}

fn colormap(s: f64) -> [u8; 3] {
    let s = s.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * s).round() as u8;
    [lerp(40.0, 220.0), lerp(60.0, 30.0), lerp(200.0, 30.0)]
}

pub fn encode_pgm(size: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{size} {size}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn encode_ppm(size: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P6\n{size} {size}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use idsm_core::mesh::build_disk_mesh;

    #[test]
    fn zero_field_is_neutral_gray() {
        let mesh = build_disk_mesh(300).unwrap();
        let r = Raster::new(&mesh, 32);
        let g = r.grayscale(&vec![0.0; mesh.cell_count()]);
        assert!(g.iter().all(|v| *v == 128));
        let img = encode_pgm(32, &g);
        assert!(img.starts_with(b"P5\n32 32\n255\n"));
        assert_eq!(img.len(), 13 + 32 * 32);
    }

    #[test]
    fn extremes_map_to_black_and_white() {
        let mesh = build_disk_mesh(300).unwrap();
        let r = Raster::new(&mesh, 64);
        let v: Vec<f64> = mesh.centroids().iter().map(|p| p[0]).collect();
        let g = r.grayscale(&v);
        assert!(g.iter().any(|x| *x <= 5));
        assert!(g.iter().any(|x| *x >= 250));
        assert_eq!(g[0], 128);
        let c = r.color(&v, None);
        assert_eq!(&c[..3], &[255, 255, 255]);
    }

    #[test]
    fn truth_contour_is_drawn() {
        let mesh = build_disk_mesh(600).unwrap();
        let r = Raster::new(&mesh, 64);
        let s = Scenario::builtin("ex1").unwrap();
        let mask = r.truth_mask(&s, 0, 1.0);
        assert!(mask.iter().any(|m| *m));
        let c = r.color(&vec![0.0; mesh.cell_count()], Some(&mask));
        assert!(c.chunks(3).any(|p| p == [0, 0, 0]));
    }
}
