//! Uniformly sampled vector-valued time series.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A uniformly sampled trajectory: `dim` components per sample, spacing `dt`,
/// first sample at time `t0`. Data is stored row-major (sample-contiguous).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    dim: usize,
    dt: f64,
    t0: f64,
    data: Vec<f64>,
}

impl TimeSeries {
    pub fn new(dim: usize, dt: f64, t0: f64) -> Self {
        assert!(dim > 0, "dimension must be positive");
        assert!(dt > 0.0, "dt must be positive");
        Self {
            dim,
            dt,
            t0,
            data: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, dt: f64, t0: f64, n: usize) -> Self {
        let mut s = Self::new(dim, dt, t0);
        s.data.reserve(n * dim);
        s
    }

    pub fn from_flat(dim: usize, dt: f64, t0: f64, data: Vec<f64>) -> Self {
        assert!(dim > 0 && dt > 0.0);
        assert_eq!(data.len() % dim, 0, "flat length must be a multiple of dim");
        Self { dim, dt, t0, data }
    }

    /// Scalar (one-component) series.
    pub fn scalar(dt: f64, t0: f64, values: Vec<f64>) -> Self {
        Self::from_flat(1, dt, t0, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.len().saturating_sub(1) as f64 * self.dt
    }

    pub fn time_at(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, sample: &[f64]) {
        assert_eq!(sample.len(), self.dim);
        self.data.extend_from_slice(sample);
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn component(&self, c: usize) -> impl Iterator<Item = f64> + Clone + '_ {
        assert!(c < self.dim);
        self.data.iter().skip(c).step_by(self.dim).copied()
    }

    pub fn component_vec(&self, c: usize) -> Vec<f64> {
        self.component(c).collect()
    }

    /// One-component view as a new scalar series.
    pub fn component_series(&self, c: usize) -> TimeSeries {
        TimeSeries::scalar(self.dt, self.t0, self.component_vec(c))
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    /// Copy of samples `[start, start + n)`.
    pub fn window(&self, start: usize, n: usize) -> TimeSeries {
        assert!(start + n <= self.len());
        TimeSeries {
            dim: self.dim,
            dt: self.dt,
            t0: self.time_at(start),
            data: self.data[start * self.dim..(start + n) * self.dim].to_vec(),
        }
    }

    pub fn tail(&self, n: usize) -> TimeSeries {
        let n = n.min(self.len());
        self.window(self.len() - n, n)
    }

    pub fn mean_std(&self, c: usize) -> (f64, f64) {
        let n = self.len();
        assert!(n > 0);
        let mean = self.component(c).sum::<f64>() / n as f64;
        let var = self.component(c).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        (mean, var.sqrt())
    }

    pub fn min_max(&self, c: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in self.component(c) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Largest absolute component value over the whole series.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn header(&self) -> String {
        if self.dim == 3 {
            "t,x,y,z".to_string()
        } else {
            let mut h = String::from("t");
            for c in 1..=self.dim {
                h.push_str(&format!(",c{c}"));
            }
            h
        }
    }

    /// Write CSV with a `t,x,y,z` (dim 3) or `t,c1..cM` header at full double
    /// precision (17 significant digits).
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{}", self.header())?;
        for (i, row) in self.samples().enumerate() {
            write!(w, "{:.16e}", self.time_at(i))?;
            for v in row {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a CSV produced by [`TimeSeries::write_csv`] (or any file with the
    /// same header convention). The time column must be uniformly spaced.
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<TimeSeries> {
        let r = BufReader::new(File::open(path)?);
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty file".into()))??;
        let dim = header.split(',').count().saturating_sub(1);
        if dim == 0 {
            return Err(Error::Format(format!("bad header: {header}")));
        }
        let mut times = Vec::new();
        let mut data = Vec::new();
        for (ln, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let t: f64 = fields
                .next()
                .unwrap()
                .trim()
                .parse()
                .map_err(|e| Error::Format(format!("line {}: {e}", ln + 2)))?;
            times.push(t);
            let mut count = 0;
            for f in fields {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|e| Error::Format(format!("line {}: {e}", ln + 2)))?;
                data.push(v);
                count += 1;
            }
            if count != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: count,
                });
            }
        }
        if times.len() < 2 {
            return Err(Error::SeriesTooShort {
                needed: 2,
                got: times.len(),
            });
        }
        let t0 = times[0];
        let dt = (times[times.len() - 1] - t0) / (times.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::Format("non-increasing time column".into()));
        }
        for (i, &t) in times.iter().enumerate() {
            let expect = t0 + i as f64 * dt;
            if (t - expect).abs() > 1e-6 * dt.max(expect.abs() * 1e-9) {
                return Err(Error::Format(format!(
                    "non-uniform sampling at row {}: t = {t}, expected {expect}",
                    i + 1
                )));
            }
        }
        Ok(TimeSeries { dim, dt, t0, data })
    }
}
