//! Height-field terrain with bilinear interpolation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRID: usize = 32;
pub const DEFAULT_WIDTH: f64 = 10.0;

/// Square grid of heights covering `[-width/2, width/2]²`, row-major by `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    n: usize,
    width: f64,
    amplitude: f64,
    heights: Vec<f64>,
}

impl HeightField {
    pub fn flat() -> Self {
        Self::flat_with(DEFAULT_GRID, DEFAULT_WIDTH)
    }

    pub fn flat_with(n: usize, width: f64) -> Self {
        Self {
            n,
            width,
            amplitude: 0.0,
            heights: vec![0.0; n * n],
        }
    }

    /// Heights drawn i.i.d. from `uniform(0, amplitude)`.
    pub fn random<R: Rng + ?Sized>(amplitude: f64, rng: &mut R) -> Self {
        Self::random_with(DEFAULT_GRID, DEFAULT_WIDTH, amplitude, rng)
    }

    pub fn random_with<R: Rng + ?Sized>(n: usize, width: f64, amplitude: f64, rng: &mut R) -> Self {
        let heights = (0..n * n)
            .map(|_| if amplitude > 0.0 { rng.random_range(0.0..=amplitude) } else { 0.0 })
            .collect();
        Self {
            n,
            width,
            amplitude,
            heights,
        }
    }

    pub fn from_grid(n: usize, width: f64, amplitude: f64, heights: Vec<f64>) -> Result<Self> {
        if n < 2 || heights.len() != n * n {
            return Err(Error::config(format!(
                "height field needs n >= 2 and n*n heights, got n={n}, {} heights",
                heights.len()
            )));
        }
        if !(width > 0.0) || !(amplitude >= 0.0) {
            return Err(Error::config("height field width must be > 0 and amplitude >= 0"));
        }
        if heights.iter().any(|h| !(0.0..=amplitude).contains(h)) {
            return Err(Error::config("height field entries must lie in [0, amplitude]"));
        }
        Ok(Self {
            n,
            width,
            amplitude,
            heights,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn node(&self, ix: usize, iy: usize) -> f64 {
        self.heights[iy * self.n + ix]
    }

    fn spacing(&self) -> f64 {
        self.width / (self.n - 1) as f64
    }

    /// World coordinates of grid node `(ix, iy)`.
    pub fn node_position(&self, ix: usize, iy: usize) -> (f64, f64) {
        let s = self.spacing();
        (ix as f64 * s - 0.5 * self.width, iy as f64 * s - 0.5 * self.width)
    }

    /// Height and analytic gradient of the bilinear interpolant at `(x, y)`.
    ///
    /// Outside the square the nearest edge height is returned with zero slope.
    pub fn sample(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        let s = self.spacing();
        let max = (self.n - 1) as f64;
        let u = (x + 0.5 * self.width) / s;
        let v = (y + 0.5 * self.width) / s;
        let outside = !(0.0..=max).contains(&u) || !(0.0..=max).contains(&v);
        let u = u.clamp(0.0, max);
        let v = v.clamp(0.0, max);

        let ix = (u.floor() as usize).min(self.n - 2);
        let iy = (v.floor() as usize).min(self.n - 2);
        let tx = u - ix as f64;
        let ty = v - iy as f64;

        let h00 = self.node(ix, iy);
        let h10 = self.node(ix + 1, iy);
        let h01 = self.node(ix, iy + 1);
        let h11 = self.node(ix + 1, iy + 1);

        let height = h00 * (1.0 - tx) * (1.0 - ty)
            + h10 * tx * (1.0 - ty)
            + h01 * (1.0 - tx) * ty
            + h11 * tx * ty;
        if outside {
            return (height, [0.0, 0.0]);
        }
        let dx = ((h10 - h00) * (1.0 - ty) + (h11 - h01) * ty) / s;
        let dy = ((h01 - h00) * (1.0 - tx) + (h11 - h10) * tx) / s;
        (height, [dx, dy])
    }
}

impl Default for HeightField {
    fn default() -> Self {
        Self::flat()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn zero_amplitude_is_flat_everywhere() {
        let hf = HeightField::random(0.0, &mut stream(1));
        for &(x, y) in &[(0.0, 0.0), (1.3, -2.2), (4.9, 4.9), (-20.0, 3.0)] {
            assert_eq!(hf.sample(x, y), (0.0, [0.0, 0.0]));
        }
    }

    #[test]
    fn node_queries_reproduce_stored_values() {
        let hf = HeightField::random(0.05, &mut stream(2));
        for &(ix, iy) in &[(0, 0), (3, 7), (31, 31), (15, 0), (30, 12)] {
            let (x, y) = hf.node_position(ix, iy);
            let (h, _) = hf.sample(x, y);
            assert!((h - hf.node(ix, iy)).abs() < 1e-12, "node ({ix},{iy})");
        }
    }

    #[test]
    fn slope_matches_central_differences() {
        let mut rng = stream(3);
        let hf = HeightField::random(0.05, &mut rng);
        let eps = 1e-6;
        let s = hf.width() / (hf.grid_size() - 1) as f64;
        let mut checked = 0;
        while checked < 500 {
            let x: f64 = rng.random_range(-4.9..4.9);
            let y: f64 = rng.random_range(-4.9..4.9);
            // Bilinear slopes jump across cell edges; stay clear of them.
            let fu = ((x + 5.0) / s).fract();
            let fv = ((y + 5.0) / s).fract();
            if fu < 1e-4 || fu > 1.0 - 1e-4 || fv < 1e-4 || fv > 1.0 - 1e-4 {
                continue;
            }
            let (_, slope) = hf.sample(x, y);
            let fdx = (hf.sample(x + eps, y).0 - hf.sample(x - eps, y).0) / (2.0 * eps);
            let fdy = (hf.sample(x, y + eps).0 - hf.sample(x, y - eps).0) / (2.0 * eps);
            assert!((slope[0] - fdx).abs() < 1e-6, "{} vs {}", slope[0], fdx);
            assert!((slope[1] - fdy).abs() < 1e-6, "{} vs {}", slope[1], fdy);
            checked += 1;
        }
    }

    #[test]
    fn outside_queries_clamp_to_edge_with_zero_slope() {
        let hf = HeightField::random(0.05, &mut stream(4));
        let (h, slope) = hf.sample(50.0, 0.0);
        let (edge, _) = hf.sample(5.0, 0.0);
        assert_eq!(slope, [0.0, 0.0]);
        assert!((h - edge).abs() < 1e-12);
    }

    #[test]
    fn heights_stay_within_amplitude() {
        let mut rng = stream(5);
        let hf = HeightField::random(0.05, &mut rng);
        for _ in 0..1000 {
            let (h, _) = hf.sample(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
            assert!((0.0..=0.05).contains(&h));
        }
    }

    #[test]
    fn from_grid_rejects_out_of_range_entries() {
        assert!(HeightField::from_grid(2, 1.0, 0.1, vec![0.0, 0.2, 0.0, 0.0]).is_err());
        assert!(HeightField::from_grid(2, 1.0, 0.1, vec![0.0, 0.05, 0.0, 0.1]).is_ok());
    }
}
