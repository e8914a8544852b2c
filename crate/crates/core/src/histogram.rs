//! Position grids and mergeable position histograms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of `bins` cells over `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub bins: usize,
}

impl PositionGrid {
    pub fn new(x_min: f64, x_max: f64, bins: usize) -> Result<Self> {
        let g = Self { x_min, x_max, bins };
        g.validate()?;
        Ok(g)
    }

    /// `[−2.5/β, 2.5/β]` with 256 bins: both wells plus the turning points.
    pub fn default_for_beta(beta: f64) -> Self {
        let half = 2.5 / beta;
        Self {
            x_min: -half,
            x_max: half,
            bins: 256,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins < 8 {
            return Err(Error::param(
                "bins",
                format!("need at least 8, got {}", self.bins),
            ));
        }
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_min < self.x_max) {
            return Err(Error::param(
                "grid",
                format!("need x_min < x_max, got [{}, {}]", self.x_min, self.x_max),
            ));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        (self.x_max - self.x_min) / self.bins as f64
    }

    pub fn center(&self, b: usize) -> f64 {
        self.x_min + (b as f64 + 0.5) * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins).map(|b| self.center(b)).collect()
    }

    /// Bin containing `x`, if inside the grid.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.x_min && x < self.x_max) {
            return None;
        }
        let b = ((x - self.x_min) / self.width()) as usize;
        Some(b.min(self.bins - 1))
    }
}

/// Unnormalized accumulator of position densities or point counts.
///
/// `weights[b]` holds the weighted sum of densities at bin `b`;
/// `total_weight` the sum of sample weights. Normalization is deferred to
/// [`Histogram::finalize`] so partial histograms merge by plain addition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub grid: PositionGrid,
    pub weights: Vec<f64>,
    pub total_weight: f64,
}

/// Probability density on a grid, normalized to `Σ density·Δx = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedHistogram {
    pub grid: PositionGrid,
    pub density: Vec<f64>,
    /// Fraction of the probability that fell inside the grid before
    /// renormalization.
    pub captured_mass: f64,
}

impl Histogram {
    pub fn empty(grid: PositionGrid) -> Self {
        Self {
            grid,
            weights: vec![0.0; grid.bins],
            total_weight: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.total_weight == 0.0
    }

    /// Add a density sampled at the bin centers.
    pub fn add_density(&mut self, density: &[f64], weight: f64) {
        debug_assert_eq!(density.len(), self.grid.bins);
        for (w, d) in self.weights.iter_mut().zip(density) {
            *w += weight * d;
        }
        self.total_weight += weight;
    }

    /// Add a point sample; points outside the grid only count toward the total.
    pub fn add_point(&mut self, x: f64, weight: f64) {
        if let Some(b) = self.grid.bin_of(x) {
            self.weights[b] += weight / self.grid.width();
        }
        self.total_weight += weight;
    }

    pub fn merge(&self, other: &Histogram) -> Result<Histogram> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Histogram {
            grid: self.grid,
            weights: self
                .weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| a + b)
                .collect(),
            total_weight: self.total_weight + other.total_weight,
        })
    }

    /// Average density, before renormalization to the grid.
    pub fn mean_density(&self) -> Vec<f64> {
        if self.total_weight == 0.0 {
            return vec![0.0; self.grid.bins];
        }
        self.weights.iter().map(|w| w / self.total_weight).collect()
    }

    pub fn finalize(&self) -> NormalizedHistogram {
        let mean = self.mean_density();
        let dx = self.grid.width();
        let captured_mass: f64 = mean.iter().sum::<f64>() * dx;
        let density = if captured_mass > 0.0 {
            mean.iter().map(|m| m / captured_mass).collect()
        } else {
            mean
        };
        NormalizedHistogram {
            grid: self.grid,
            density,
            captured_mass,
        }
    }
}

/// Weight-summed histogram over all parts. All grids must agree.
pub fn merge_histograms(parts: &[Histogram]) -> Result<Histogram> {
    let (first, rest) = parts
        .split_first()
        .ok_or_else(|| Error::param("parts", "nothing to merge"))?;
    rest.iter().try_fold(first.clone(), |acc, h| acc.merge(h))
}

impl NormalizedHistogram {
    pub fn total(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid.width()
    }

    /// Probability mass at `x > 0` (half of a bin straddling zero on each side).
    pub fn right_mass(&self) -> f64 {
        let dx = self.grid.width();
        self.density
            .iter()
            .enumerate()
            .map(|(b, d)| {
                let lo = self.grid.x_min + b as f64 * dx;
                let hi = lo + dx;
                let frac = ((hi.max(0.0) - lo.max(0.0)) / dx).clamp(0.0, 1.0);
                d * dx * frac
            })
            .sum()
    }

    pub fn left_mass(&self) -> f64 {
        self.total() - self.right_mass()
    }

    /// Center of the bin with the highest density.
    pub fn mode(&self) -> f64 {
        let (b, _) = self
            .density
            .iter()
            .enumerate()
            .fold(
                (0, f64::MIN),
                |acc, (b, &d)| if d > acc.1 { (b, d) } else { acc },
            );
        self.grid.center(b)
    }

    /// Midpoint of the contiguous region around the global maximum where the
    /// density stays at or above half of it.
    pub fn half_max_center(&self) -> f64 {
        let d = &self.density;
        let top = self.grid.bin_of(self.mode()).unwrap_or(0);
        let half = 0.5 * d[top];
        let mut lo = top;
        while lo > 0 && d[lo - 1] >= half {
            lo -= 1;
        }
        let mut hi = top;
        while hi + 1 < d.len() && d[hi + 1] >= half {
            hi += 1;
        }
        0.5 * (self.grid.center(lo) + self.grid.center(hi))
    }

    pub fn mean(&self) -> f64 {
        let dx = self.grid.width();
        (0..self.grid.bins)
            .map(|b| self.grid.center(b) * self.density[b] * dx)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let dx = self.grid.width();
        let m = self.mean();
        (0..self.grid.bins)
            .map(|b| (self.grid.center(b) - m).powi(2) * self.density[b] * dx)
            .sum()
    }

    /// `∫|P(x) − P(−x)| dx`; needs a grid symmetric about zero.
    pub fn asymmetry(&self) -> f64 {
        let dx = self.grid.width();
        let n = self.grid.bins;
        (0..n)
            .map(|b| (self.density[b] - self.density[n - 1 - b]).abs() * dx)
            .sum()
    }

    /// Number of local maxima rising above `fraction` of the global maximum,
    /// after merging plateaus.
    pub fn peak_count(&self, fraction: f64) -> usize {
        let max = self.density.iter().cloned().fold(0.0, f64::max);
        let floor = fraction * max;
        let d = &self.density;
        let n = d.len();
        let mut peaks = 0;
        let mut b = 0;
        while b < n {
            // extent of the plateau starting at b
            let mut e = b;
            while e + 1 < n && d[e + 1] == d[b] {
                e += 1;
            }
            let left_lower = b == 0 || d[b - 1] < d[b];
            let right_lower = e + 1 == n || d[e + 1] < d[b];
            if left_lower && right_lower && d[b] >= floor && d[b] > 0.0 {
                peaks += 1;
            }
            b = e + 1;
        }
        peaks
    }
}
