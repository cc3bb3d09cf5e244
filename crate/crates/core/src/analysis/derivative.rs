//! Sixth-order finite-difference time derivatives.

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Central 7-point stencil for the first derivative, exact for polynomials
/// up to degree six: coefficients (-1/60, 3/20, -3/4, 0, 3/4, -3/20, 1/60)
/// over samples k-3 .. k+3, applied in antisymmetric-pair form.
const PAIR_WEIGHTS: [f64; 3] = [3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];

/// Derivative of one component. The three boundary samples on each end are
/// dropped, so the output is six samples shorter and starts at `t0 + 3 dt`.
pub fn derivative6(series: &TimeSeries, component: usize) -> Result<TimeSeries> {
    let all = derivative6_all(series)?;
    Ok(all.component_series(component))
}

/// Derivative of every component.
pub fn derivative6_all(series: &TimeSeries) -> Result<TimeSeries> {
    let n = series.len();
    if n < 7 {
        return Err(Error::SeriesTooShort { needed: 7, got: n });
    }
    let dim = series.dim();
    let dt = series.dt();
    let mut out = TimeSeries::with_capacity(dim, dt, series.time_at(3), n - 6);
    let mut row = vec![0.0; dim];
    for k in 3..n - 3 {
        for (c, slot) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (s, w) in PAIR_WEIGHTS.iter().enumerate() {
                acc += w * (series.sample(k + s + 1)[c] - series.sample(k - s - 1)[c]);
            }
            *slot = acc / dt;
        }
        out.push(&row);
    }
    Ok(out)
}
