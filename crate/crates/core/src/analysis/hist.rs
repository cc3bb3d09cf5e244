//! Normalized empirical distributions: densities, manifold angles, laminar
//! lasting times, and Poincare-section-like point sets.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// A normalized histogram: `density[i]` holds the probability density over
/// `[edges[i], edges[i+1])`; the integral is 1 whenever any sample fell
/// inside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    /// Samples inside the grid.
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

pub fn uniform_edges(min: f64, max: f64, bins: usize) -> Vec<f64> {
    assert!(bins >= 1);
    let (min, max) = if min == max {
        (min - 0.5, max + 0.5)
    } else {
        (min, max)
    };
    (0..=bins)
        .map(|i| min + (max - min) * i as f64 / bins as f64)
        .collect()
}

pub fn log_edges(min: f64, max: f64, bins: usize) -> Vec<f64> {
    assert!(bins >= 1 && min > 0.0 && max > min);
    let (l0, l1) = (min.ln(), max.ln());
    (0..=bins)
        .map(|i| (l0 + (l1 - l0) * i as f64 / bins as f64).exp())
        .collect()
}

impl Histogram {
    pub fn from_values(values: impl IntoIterator<Item = f64> + Clone, edges: Vec<f64>) -> Self {
        assert!(edges.len() >= 2);
        let bins = edges.len() - 1;
        let mut counts = vec![0usize; bins];
        let mut count = 0usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let lo = edges[0];
        let hi = edges[bins];
        let uniform_width = (hi - lo) / bins as f64;
        let uniform = edges
            .windows(2)
            .all(|w| ((w[1] - w[0]) - uniform_width).abs() <= 1e-9 * uniform_width);
        for v in values.clone() {
            if v < lo || v > hi {
                continue;
            }
            let mut b = if uniform {
                (((v - lo) / uniform_width) as usize).min(bins - 1)
            } else {
                match edges.binary_search_by(|e| e.total_cmp(&v)) {
                    Ok(i) => i.min(bins - 1),
                    Err(i) => i.saturating_sub(1).min(bins - 1),
                }
            };
            // Guard against rounding at the left edge of a bin.
            if v < edges[b] {
                b = b.saturating_sub(1);
            }
            counts[b] += 1;
            count += 1;
            sum += v;
            sumsq += v * v;
        }
        let mut density = vec![0.0; bins];
        if count > 0 {
            for i in 0..bins {
                let width = edges[i + 1] - edges[i];
                density[i] = counts[i] as f64 / (count as f64 * width);
            }
        }
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        let var = if count > 0 {
            (sumsq / count as f64 - mean * mean).max(0.0)
        } else {
            0.0
        };
        Self {
            edges,
            density,
            count,
            mean,
            std: var.sqrt(),
        }
    }

    pub fn bins(&self) -> usize {
        self.density.len()
    }

    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum()
    }

    /// Probability mass on [a, b), assuming the interval aligns with bins.
    pub fn mass_below(&self, x: f64) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .filter(|(_, w)| w[1] <= x + 1e-12)
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum()
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.edges.len() == other.edges.len()
            && self
                .edges
                .iter()
                .zip(other.edges.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs())))
    }

    /// L1 distance between two densities on the same grid:
    /// sum |da - db| * width. 2 for disjoint unit masses, 0 for identical.
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .density
            .iter()
            .zip(other.density.iter())
            .zip(self.edges.windows(2))
            .map(|((a, b), w)| (a - b).abs() * (w[1] - w[0]))
            .sum())
    }

    /// CSV rows `bin_left,bin_right,density` at full precision.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "bin_left,bin_right,density")?;
        for (d, win) in self.density.iter().zip(self.edges.windows(2)) {
            writeln!(w, "{:.16e},{:.16e},{d:.16e}", win[0], win[1])?;
        }
        Ok(())
    }
}

/// Density of a scalar series over `bins` uniform bins spanning its range.
pub fn density_histogram(series: &TimeSeries, bins: usize) -> Histogram {
    assert_eq!(series.dim(), 1);
    assert!(!series.is_empty());
    let (lo, hi) = series.min_max(0);
    Histogram::from_values(series.component(0), uniform_edges(lo, hi, bins))
}

/// L1 distance between two densities (grids must match).
pub fn density_l1(a: &Histogram, b: &Histogram) -> Result<f64> {
    a.l1_distance(b)
}

/// Collect the (x, z) projections of samples with |x - y| strictly below
/// `eps_p`.
pub fn poincare_like_section(trajectory: &TimeSeries, eps_p: f64) -> Vec<(f64, f64)> {
    assert_eq!(trajectory.dim(), 3);
    trajectory
        .samples()
        .filter(|s| (s[0] - s[1]).abs() < eps_p)
        .map(|s| (s[0], s[2]))
        .collect()
}

pub fn write_section_csv<P: AsRef<Path>>(points: &[(f64, f64)], path: P) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "x,z")?;
    for (x, z) in points {
        writeln!(w, "{x:.16e},{z:.16e}")?;
    }
    Ok(())
}

/// Fraction of `targets` lying within `radius` of some point of `cover`.
pub fn coverage_fraction(targets: &[(f64, f64)], cover: &[(f64, f64)], radius: f64) -> f64 {
    if targets.is_empty() {
        return 1.0;
    }
    // Grid over the cover set with cell = radius.
    use std::collections::HashMap;
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let key = |x: f64, z: f64| ((x / radius).floor() as i64, (z / radius).floor() as i64);
    for (i, &(x, z)) in cover.iter().enumerate() {
        grid.entry(key(x, z)).or_default().push(i);
    }
    let r2 = radius * radius;
    let mut covered = 0usize;
    for &(x, z) in targets {
        let (kx, kz) = key(x, z);
        let mut hit = false;
        'cells: for dx in -1..=1 {
            for dz in -1..=1 {
                if let Some(bucket) = grid.get(&(kx + dx, kz + dz)) {
                    for &i in bucket {
                        let (cx, cz) = cover[i];
                        if (cx - x).powi(2) + (cz - z).powi(2) <= r2 {
                            hit = true;
                            break 'cells;
                        }
                    }
                }
            }
        }
        if hit {
            covered += 1;
        }
    }
    covered as f64 / targets.len() as f64
}

/// Laminar lasting times: maximal runs where the normalized observable
/// stays inside the threshold band.
#[derive(Debug, Clone)]
pub struct LaminarDistribution {
    /// Run durations in time units (samples x dt), in order of occurrence.
    pub durations: Vec<f64>,
    /// Normalized duration histogram over log-spaced bins (empty series of
    /// runs gives an empty histogram).
    pub histogram: Option<Histogram>,
    /// Threshold applied to the normalized series.
    pub threshold: f64,
}

/// Normalize the series to mean 0 and standard deviation 1, then extract
/// maximal runs with |E| < threshold. Runs touching the series boundary
/// count; durations are (samples in run) x dt.
pub fn laminar_lasting_times(series: &TimeSeries, threshold: f64) -> LaminarDistribution {
    assert_eq!(series.dim(), 1);
    assert!(!series.is_empty());
    let (mean, std) = series.mean_std(0);
    let scale = if std > 0.0 { std } else { 1.0 };
    let dt = series.dt();
    let mut durations = Vec::new();
    let mut run = 0usize;
    for v in series.component(0) {
        let e = (v - mean) / scale;
        if e.abs() < threshold {
            run += 1;
        } else if run > 0 {
            durations.push(run as f64 * dt);
            run = 0;
        }
    }
    if run > 0 {
        durations.push(run as f64 * dt);
    }
    let histogram = if durations.is_empty() {
        None
    } else {
        let lo = durations.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = durations.iter().cloned().fold(0.0f64, f64::max);
        let edges = if lo == hi {
            uniform_edges(lo, hi, 1)
        } else {
            log_edges(lo, hi, 40)
        };
        Some(Histogram::from_values(durations.iter().copied(), edges))
    };
    LaminarDistribution {
        durations,
        histogram,
        threshold,
    }
}

/// Kolmogorov-Smirnov distance between two empirical distributions.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut a: Vec<f64> = a.to_vec();
    let mut b: Vec<f64> = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        let fa = i as f64 / a.len() as f64;
        let fb = j as f64 / b.len() as f64;
        d = d.max((fa - fb).abs());
    }
    d
}
