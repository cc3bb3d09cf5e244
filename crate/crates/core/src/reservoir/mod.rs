//! Echo-state reservoir model: construction, ridge training, warm-up
//! synchronization and closed-loop (autonomous) prediction.
//!
//! The model is
//!
//! ```text
//! u(t)        = W_out r(t)
//! r(t + dt)   = (1 - alpha) r(t) + alpha tanh(A r(t) + W_in u(t))
//! ```
//!
//! with a sparse random `A` rescaled to spectral radius `rho`, random
//! `W_in`, and only `W_out` trained (ridge regression). Inputs are
//! delay-embedded: `u(t) = (v(t), v(t - delta_tau))` for the raw observed
//! vector `v`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

pub mod bundle;
mod sparse;

pub use sparse::SparseCsr;

/// Stream id mixed into `seed` for the training-noise generator, so noise
/// draws are independent of the matrix draws.
const NOISE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Default number of warm-up samples used to synchronize the reservoir
/// state with an observed trajectory.
pub const DEFAULT_WARMUP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirConfig {
    #[serde(rename = "N")]
    pub n: usize,
    /// Input/output dimension of the model; twice the raw observed
    /// dimension because of the delay embedding.
    #[serde(rename = "M")]
    pub m: usize,
    pub alpha: f64,
    pub dt: f64,
    pub rho: f64,
    pub beta: f64,
    pub delta_tau: f64,
    pub a_density: f64,
    pub w_in_scale: f64,
    pub seed: u64,
}

impl ReservoirConfig {
    /// Reference parameter set for the Lorenz r=28 runs.
    pub fn lorenz28() -> Self {
        Self {
            n: 2000,
            m: 6,
            alpha: 0.3,
            dt: 0.01,
            rho: 0.99,
            beta: 0.002,
            delta_tau: 0.11,
            a_density: 0.015,
            w_in_scale: 0.1,
            seed: 1,
        }
    }

    /// Reference parameter set for the Lorenz r=60 runs.
    pub fn lorenz60() -> Self {
        Self {
            alpha: 0.4,
            beta: 0.001,
            delta_tau: 0.07,
            ..Self::lorenz28()
        }
    }

    /// Working parameter set for the Roessler runs (slower timescale, so a
    /// coarser step and a longer delay).
    pub fn rossler() -> Self {
        Self {
            dt: 0.05,
            alpha: 0.3,
            beta: 1e-4,
            delta_tau: 0.25,
            ..Self::lorenz28()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n == 0 {
            return fail("N must be positive".into());
        }
        if self.m == 0 || self.m % 2 != 0 {
            return fail(format!("M must be a positive even number, got {}", self.m));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return fail(format!("alpha must be in (0, 1], got {}", self.alpha));
        }
        if !(self.dt > 0.0) {
            return fail(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.rho.abs() < 1.0) {
            return fail(format!("|rho| must be < 1, got {}", self.rho));
        }
        if !(self.beta >= 0.0) {
            return fail(format!("beta must be >= 0, got {}", self.beta));
        }
        if !(self.delta_tau >= 0.0) {
            return fail(format!("delta_tau must be >= 0, got {}", self.delta_tau));
        }
        if !(self.a_density > 0.0 && self.a_density <= 1.0) {
            return fail(format!("a_density must be in (0, 1], got {}", self.a_density));
        }
        if !(self.w_in_scale > 0.0) {
            return fail(format!("w_in_scale must be positive, got {}", self.w_in_scale));
        }
        Ok(())
    }

    /// Raw observed dimension before delay embedding.
    pub fn raw_dim(&self) -> usize {
        self.m / 2
    }

    /// Delay expressed in sampling steps of a series with step `series_dt`.
    pub fn delay_steps(&self, series_dt: f64) -> Result<usize> {
        let ratio = self.delta_tau / series_dt;
        let d = ratio.round();
        let remainder = (ratio - d) * series_dt;
        if remainder.abs() > 1e-9 * series_dt {
            return Err(Error::DelayNotMultiple {
                delta_tau: self.delta_tau,
                dt: series_dt,
                remainder,
            });
        }
        Ok(d as usize)
    }
}

/// Delay-embed a series: sample at time t becomes the concatenation of the
/// value at t and the value at `t - delta_tau`. Leading samples without
/// history are dropped, so the output is `delay_steps` samples shorter.
pub fn embed_delay(series: &TimeSeries, delta_tau: f64) -> Result<TimeSeries> {
    let dt = series.dt();
    let ratio = delta_tau / dt;
    let d_round = ratio.round();
    let remainder = (ratio - d_round) * dt;
    if remainder.abs() > 1e-9 * dt {
        return Err(Error::DelayNotMultiple {
            delta_tau,
            dt,
            remainder,
        });
    }
    let d = d_round as usize;
    if series.len() <= d {
        return Err(Error::SeriesTooShort {
            needed: d + 1,
            got: series.len(),
        });
    }
    let raw = series.dim();
    let mut out = TimeSeries::with_capacity(2 * raw, dt, series.time_at(d), series.len() - d);
    let mut row = vec![0.0; 2 * raw];
    for k in 0..series.len() - d {
        row[..raw].copy_from_slice(series.sample(k + d));
        row[raw..].copy_from_slice(series.sample(k));
        out.push(&row);
    }
    Ok(out)
}

/// Result of drawing the fixed random matrices.
pub struct ReservoirMatrices {
    pub a: SparseCsr,
    pub w_in: DMatrix<f64>,
    /// Seed actually used; differs from the configured seed only if a draw
    /// had to be rebuilt (zero spectral radius).
    pub seed_used: u64,
}

/// Draw the sparse recurrent matrix `A` (entries i.i.d. uniform on [-1, 1],
/// density `a_density`, rescaled to spectral radius `rho`) and the input
/// matrix `W_in` (i.i.d. uniform on [-w_in_scale, w_in_scale]).
/// Deterministic given the seed.
pub fn build_reservoir(config: &ReservoirConfig) -> Result<ReservoirMatrices> {
    config.validate()?;
    for attempt in 0..16 {
        let seed_used = config.seed.wrapping_add(attempt);
        let mut rng = ChaCha8Rng::seed_from_u64(seed_used);
        let mut a = SparseCsr::random(config.n, config.a_density, &mut rng);
        let w_in = DMatrix::from_fn(config.n, config.m, |_, _| {
            rng.gen_range(-config.w_in_scale..=config.w_in_scale)
        });
        if config.rho == 0.0 {
            a.scale(0.0);
            return Ok(ReservoirMatrices {
                a,
                w_in,
                seed_used,
            });
        }
        let sr = sparse::spectral_radius(&a);
        if sr > 0.0 {
            a.scale(config.rho / sr);
            return Ok(ReservoirMatrices {
                a,
                w_in,
                seed_used,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: 16,
        residual: 0.0,
    })
}

/// Reservoir state update: `r <- (1 - alpha) r + alpha tanh(A r + W_in u)`.
/// `scratch` must have length `n`.
fn update_state(
    a: &SparseCsr,
    w_in: &DMatrix<f64>,
    alpha: f64,
    r: &mut DVector<f64>,
    u: &[f64],
    scratch: &mut Vec<f64>,
) {
    let n = a.n();
    scratch.resize(n, 0.0);
    a.matvec(r.as_slice(), scratch);
    // Accumulate W_in u column by column (column-major storage).
    for (j, &uj) in u.iter().enumerate() {
        if uj == 0.0 {
            continue;
        }
        let col = w_in.column(j);
        for i in 0..n {
            scratch[i] += col[i] * uj;
        }
    }
    let keep = 1.0 - alpha;
    for i in 0..n {
        r[i] = keep * r[i] + alpha * scratch[i].tanh();
    }
}

/// Drive the reservoir with an input series, streaming one state per input
/// sample into `sink`. State k is the state after consuming input k.
pub fn drive_with<S>(
    a: &SparseCsr,
    w_in: &DMatrix<f64>,
    alpha: f64,
    inputs: &TimeSeries,
    r0: &DVector<f64>,
    mut sink: S,
) where
    S: FnMut(usize, &DVector<f64>),
{
    assert_eq!(w_in.ncols(), inputs.dim(), "input dimension mismatch");
    assert_eq!(w_in.nrows(), a.n());
    assert_eq!(r0.len(), a.n());
    let mut r = r0.clone();
    let mut scratch = Vec::with_capacity(a.n());
    for (k, u) in inputs.samples().enumerate() {
        update_state(a, w_in, alpha, &mut r, u, &mut scratch);
        sink(k, &r);
    }
}

/// Materialized variant of [`drive_with`]; one state per input sample.
pub fn drive(
    a: &SparseCsr,
    w_in: &DMatrix<f64>,
    alpha: f64,
    inputs: &TimeSeries,
    r0: &DVector<f64>,
) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(inputs.len());
    drive_with(a, w_in, alpha, inputs, r0, |_, r| out.push(r.clone()));
    out
}

/// Ridge regression `W = C G^-1` with `G = sum r r^T + beta I` and
/// `C = sum u r^T`, via Cholesky. With `beta = 0` a singular normal matrix
/// is reported as rank deficiency.
pub fn solve_ridge(
    gram: &DMatrix<f64>,
    cross: &DMatrix<f64>,
    beta: f64,
) -> Result<DMatrix<f64>> {
    let n = gram.nrows();
    assert_eq!(gram.ncols(), n);
    assert_eq!(cross.ncols(), n);
    let mut reg = gram.clone();
    for i in 0..n {
        reg[(i, i)] += beta;
    }
    let chol = nalgebra::Cholesky::new(reg).ok_or_else(|| {
        Error::RankDeficient(format!(
            "normal matrix not positive definite (beta = {beta}); \
             states do not span the reservoir space"
        ))
    })?;
    // W (G + beta I) = C  <=>  (G + beta I) W^T = C^T.
    Ok(chol.solve(&cross.transpose()).transpose())
}

/// Relative Frobenius residual of the ridge normal equations
/// `W (G + beta I) = C`.
pub fn ridge_normal_residual(
    w_out: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    cross: &DMatrix<f64>,
    beta: f64,
) -> f64 {
    let n = gram.nrows();
    let mut reg = gram.clone();
    for i in 0..n {
        reg[(i, i)] += beta;
    }
    let lhs = w_out * reg;
    (lhs - cross).norm() / cross.norm().max(f64::MIN_POSITIVE)
}

/// Fit the readout on explicit state/target pairs: `targets` row k is the
/// desired output for `states[k]`. The caller is responsible for the
/// one-step-ahead alignment (target k is the input at step k + 1).
pub fn train_ridge(
    states: &[DVector<f64>],
    targets: &TimeSeries,
    beta: f64,
) -> Result<DMatrix<f64>> {
    if states.is_empty() {
        return Err(Error::SeriesTooShort { needed: 1, got: 0 });
    }
    if targets.len() != states.len() {
        return Err(Error::DimensionMismatch {
            expected: states.len(),
            got: targets.len(),
        });
    }
    let n = states[0].len();
    let m = targets.dim();
    let mut gram = DMatrix::zeros(n, n);
    let mut cross = DMatrix::zeros(m, n);
    for (r, u) in states.iter().zip(targets.samples()) {
        gram.ger(1.0, r, r, 1.0);
        for (row, &uv) in u.iter().enumerate() {
            for c in 0..n {
                cross[(row, c)] += uv * r[c];
            }
        }
    }
    solve_ridge(&gram, &cross, beta)
}

/// A trained reservoir model.
#[derive(Debug, Clone)]
pub struct ReservoirModel {
    pub config: ReservoirConfig,
    pub seed_used: u64,
    pub a: SparseCsr,
    pub w_in: DMatrix<f64>,
    pub w_out: DMatrix<f64>,
    /// Divergence guard for free runs: 1000 x the largest absolute value
    /// seen in the training inputs.
    pub u_guard: f64,
    /// Relative residual of the ridge normal equations at training time.
    pub ridge_residual: f64,
}

impl PartialEq for ReservoirModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.seed_used == other.seed_used
            && self.a.to_dense() == other.a.to_dense()
            && self.w_in == other.w_in
            && self.w_out == other.w_out
            && self.u_guard == other.u_guard
    }
}

/// Reservoir state plus the recent raw outputs needed to form the delayed
/// half of the closed-loop input.
#[derive(Debug, Clone)]
pub struct SyncedState {
    pub r: DVector<f64>,
    /// Last `delay_steps` raw samples, oldest first.
    ring: VecDeque<Vec<f64>>,
}

impl SyncedState {
    pub fn state(&self) -> &DVector<f64> {
        &self.r
    }
}

impl ReservoirModel {
    /// Train on a raw (not yet embedded) series. Pipeline: optional input
    /// noise, delay embedding, drive from r = 0 discarding `l0` states,
    /// then ridge regression of state k onto the clean embedded input at
    /// step k + 1.
    ///
    /// `noise_amplitude` is relative: each raw component c gets i.i.d.
    /// uniform noise on [-a_c, a_c] with a_c = noise_amplitude x std(c).
    /// Targets stay clean.
    pub fn train(
        config: &ReservoirConfig,
        training: &TimeSeries,
        l0: usize,
        noise_amplitude: f64,
    ) -> Result<Self> {
        config.validate()?;
        if (training.dt() - config.dt).abs() > 1e-12 * config.dt {
            return Err(Error::InvalidConfig(format!(
                "training series step {} does not match model dt {}",
                training.dt(),
                config.dt
            )));
        }
        if 2 * training.dim() != config.m {
            return Err(Error::DimensionMismatch {
                expected: config.m,
                got: 2 * training.dim(),
            });
        }
        let d = config.delay_steps(training.dt())?;
        if training.len() < d + l0 + 3 {
            return Err(Error::SeriesTooShort {
                needed: d + l0 + 3,
                got: training.len(),
            });
        }

        let clean_embedded = embed_delay(training, config.delta_tau)?;
        let driven_embedded = if noise_amplitude > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ NOISE_STREAM);
            let amps: Vec<f64> = (0..training.dim())
                .map(|c| noise_amplitude * training.mean_std(c).1)
                .collect();
            let mut noisy = TimeSeries::with_capacity(
                training.dim(),
                training.dt(),
                training.t0(),
                training.len(),
            );
            let mut row = vec![0.0; training.dim()];
            for sample in training.samples() {
                for (c, v) in sample.iter().enumerate() {
                    row[c] = v + rng.gen_range(-amps[c]..=amps[c]);
                }
                noisy.push(&row);
            }
            embed_delay(&noisy, config.delta_tau)?
        } else {
            clean_embedded.clone()
        };

        let matrices = build_reservoir(config)?;
        let n = config.n;
        let n_embedded = clean_embedded.len();
        if n_embedded < l0 + 2 {
            return Err(Error::SeriesTooShort {
                needed: l0 + 2,
                got: n_embedded,
            });
        }

        // Streamed block accumulation of G = sum r r^T and C = sum u r^T.
        const BLOCK: usize = 256;
        let mut gram = DMatrix::<f64>::zeros(n, n);
        let mut cross = DMatrix::<f64>::zeros(config.m, n);
        let mut state_block = DMatrix::<f64>::zeros(n, BLOCK);
        let mut target_block = DMatrix::<f64>::zeros(config.m, BLOCK);
        let mut filled = 0usize;
        let mut pairs = 0usize;
        {
            let mut flush = |sb: &mut DMatrix<f64>, tb: &mut DMatrix<f64>, filled: &mut usize| {
                if *filled == 0 {
                    return;
                }
                let s = sb.columns(0, *filled);
                let st = s.transpose();
                gram.gemm(1.0, &s, &st, 1.0);
                cross.gemm(1.0, &tb.columns(0, *filled), &st, 1.0);
                *filled = 0;
            };
            let r0 = DVector::zeros(n);
            drive_with(
                &matrices.a,
                &matrices.w_in,
                config.alpha,
                &driven_embedded,
                &r0,
                |k, r| {
                    if k < l0 || k + 1 >= n_embedded {
                        return;
                    }
                    state_block.column_mut(filled).copy_from(r);
                    target_block
                        .column_mut(filled)
                        .copy_from_slice(clean_embedded.sample(k + 1));
                    filled += 1;
                    pairs += 1;
                    if filled == BLOCK {
                        flush(&mut state_block, &mut target_block, &mut filled);
                    }
                },
            );
            flush(&mut state_block, &mut target_block, &mut filled);
        }
        if pairs == 0 {
            return Err(Error::SeriesTooShort {
                needed: l0 + 2,
                got: n_embedded,
            });
        }

        let w_out = solve_ridge(&gram, &cross, config.beta)?;
        let ridge_residual = ridge_normal_residual(&w_out, &gram, &cross, config.beta);
        let u_guard = 1e3 * clean_embedded.max_abs();
        Ok(Self {
            config: *config,
            seed_used: matrices.seed_used,
            a: matrices.a,
            w_in: matrices.w_in,
            w_out,
            u_guard,
            ridge_residual,
        })
    }

    pub fn raw_dim(&self) -> usize {
        self.config.raw_dim()
    }

    pub fn delay_steps(&self) -> usize {
        // Config is validated at construction, so this cannot fail.
        self.config.delay_steps(self.config.dt).expect("validated config")
    }

    /// Spectral radius of the (rescaled) recurrent matrix.
    pub fn spectral_radius(&self) -> f64 {
        sparse::spectral_radius(&self.a)
    }

    /// Drive the reservoir from r = 0 with an observed raw series and
    /// return the final state plus the output history needed to continue
    /// in closed loop. Series shorter than the warm-up length are extended
    /// at the front with their first sample.
    pub fn synchronize(&self, observed: &TimeSeries) -> Result<SyncedState> {
        self.synchronize_with(observed, DEFAULT_WARMUP)
    }

    pub fn synchronize_with(&self, observed: &TimeSeries, warmup: usize) -> Result<SyncedState> {
        if observed.dim() != self.raw_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.raw_dim(),
                got: observed.dim(),
            });
        }
        if observed.is_empty() {
            return Err(Error::SeriesTooShort { needed: 1, got: 0 });
        }
        let d = self.delay_steps();
        let needed = warmup.max(1) + d;
        let padded = if observed.len() < needed {
            let mut s = TimeSeries::with_capacity(
                observed.dim(),
                observed.dt(),
                observed.t0(),
                needed,
            );
            let first = observed.sample(0).to_vec();
            for _ in 0..needed - observed.len() {
                s.push(&first);
            }
            for row in observed.samples() {
                s.push(row);
            }
            s
        } else {
            observed.tail(needed)
        };
        let embedded = embed_delay(&padded, self.config.delta_tau)?;
        let mut r = DVector::zeros(self.config.n);
        let mut scratch = Vec::with_capacity(self.config.n);
        for u in embedded.samples() {
            update_state(&self.a, &self.w_in, self.config.alpha, &mut r, u, &mut scratch);
        }
        let mut ring = VecDeque::with_capacity(d);
        for k in padded.len() - d..padded.len() {
            ring.push_back(padded.sample(k).to_vec());
        }
        Ok(SyncedState { r, ring })
    }

    /// Closed-loop run: alternate readout and state update, feeding the
    /// current-value half of the readout back as the next input (the
    /// delayed half comes from the model's own recent outputs). Streams the
    /// raw (current-value) outputs; aborts when |output| exceeds the
    /// divergence guard.
    pub fn run_autonomous_with<S>(
        &self,
        synced: &SyncedState,
        n_steps: usize,
        mut sink: S,
    ) -> Result<()>
    where
        S: FnMut(usize, &[f64]),
    {
        let raw = self.raw_dim();
        let d = self.delay_steps();
        assert_eq!(synced.ring.len(), d, "synced state delay history mismatch");
        let mut r = synced.r.clone();
        let mut ring = synced.ring.clone();
        let mut scratch = Vec::with_capacity(self.config.n);
        let mut u = vec![0.0; self.config.m];
        let mut y = vec![0.0; raw];
        for step in 0..n_steps {
            // Readout of the current half: y = first raw rows of W_out r.
            for (i, yi) in y.iter_mut().enumerate() {
                let mut acc = 0.0;
                for c in 0..self.config.n {
                    acc += self.w_out[(i, c)] * r[c];
                }
                *yi = acc;
            }
            let norm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !norm.is_finite() || norm > self.u_guard {
                return Err(Error::Divergence {
                    step,
                    norm,
                    guard: self.u_guard,
                });
            }
            sink(step, &y);
            u[..raw].copy_from_slice(&y);
            if d == 0 {
                u[raw..].copy_from_slice(&y);
            } else {
                let oldest = ring.pop_front().expect("ring nonempty");
                u[raw..].copy_from_slice(&oldest);
                ring.push_back(y.clone());
            }
            update_state(&self.a, &self.w_in, self.config.alpha, &mut r, &u, &mut scratch);
        }
        Ok(())
    }

    /// Materialized closed-loop run of the raw output series.
    pub fn run_autonomous(&self, synced: &SyncedState, n_steps: usize) -> Result<TimeSeries> {
        let mut out = TimeSeries::with_capacity(self.raw_dim(), self.config.dt, 0.0, n_steps);
        self.run_autonomous_with(synced, n_steps, |_, y| out.push(y))?;
        Ok(out)
    }
}

/// Closed-loop run from an explicit reservoir state and last input vector
/// (dimension M). The delayed-history ring is seeded by interpolating
/// between the delayed and current halves of `u_init`; prefer
/// [`ReservoirModel::synchronize`] + [`ReservoirModel::run_autonomous`]
/// when an observed history is available.
pub fn predict_autonomous(
    model: &ReservoirModel,
    r_init: &DVector<f64>,
    u_init: &[f64],
    n_steps: usize,
) -> Result<TimeSeries> {
    if u_init.len() != model.config.m {
        return Err(Error::DimensionMismatch {
            expected: model.config.m,
            got: u_init.len(),
        });
    }
    let raw = model.raw_dim();
    let d = model.delay_steps();
    let mut ring = VecDeque::with_capacity(d);
    for k in 0..d {
        let w = (k + 1) as f64 / d as f64;
        let row: Vec<f64> = (0..raw)
            .map(|c| (1.0 - w) * u_init[raw + c] + w * u_init[c])
            .collect();
        ring.push_back(row);
    }
    let synced = SyncedState {
        r: r_init.clone(),
        ring,
    };
    let mut out = TimeSeries::with_capacity(raw, model.config.dt, 0.0, n_steps);
    model.run_autonomous_with(&synced, n_steps, |_, y| out.push(y))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ReservoirConfig {
        ReservoirConfig {
            n: 2,
            m: 2,
            alpha: 0.3,
            dt: 0.01,
            rho: 0.99,
            beta: 1e-6,
            delta_tau: 0.0,
            a_density: 1.0,
            w_in_scale: 0.1,
            seed: 42,
        }
    }

    #[test]
    fn build_hits_requested_spectral_radius() {
        let cfg = small_config();
        let m = build_reservoir(&cfg).unwrap();
        let sr = sparse::spectral_radius(&m.a);
        assert!((sr - 0.99).abs() <= 1e-6, "spectral radius {sr}");
    }

    #[test]
    fn build_with_zero_rho_gives_zero_matrix() {
        let cfg = ReservoirConfig {
            rho: 0.0,
            ..small_config()
        };
        let m = build_reservoir(&cfg).unwrap();
        assert!(m.a.to_dense().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn build_is_deterministic() {
        let cfg = ReservoirConfig {
            n: 50,
            m: 6,
            a_density: 0.1,
            ..small_config()
        };
        let m1 = build_reservoir(&cfg).unwrap();
        let m2 = build_reservoir(&cfg).unwrap();
        assert_eq!(m1.a.to_dense(), m2.a.to_dense());
        assert_eq!(m1.w_in, m2.w_in);
        assert_eq!(m1.seed_used, m2.seed_used);
    }

    #[test]
    fn embed_constant_series_duplicates_value() {
        let s = TimeSeries::from_flat(2, 0.1, 0.0, vec![3.0, -1.0].repeat(20));
        let e = embed_delay(&s, 0.5).unwrap();
        assert_eq!(e.dim(), 4);
        assert_eq!(e.len(), 15);
        for row in e.samples() {
            assert_eq!(row, &[3.0, -1.0, 3.0, -1.0]);
        }
    }

    #[test]
    fn embed_zero_delay_duplicates_in_place() {
        let s = TimeSeries::scalar(0.1, 0.0, vec![1.0, 2.0, 3.0]);
        let e = embed_delay(&s, 0.0).unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(e.sample(1), &[2.0, 2.0]);
    }

    #[test]
    fn embed_pairs_with_delayed_index() {
        // dt = 0.01, delta_tau = 0.11: sample k pairs index k with k - 11.
        let s = TimeSeries::scalar(0.01, 0.0, (0..40).map(|i| i as f64).collect());
        let e = embed_delay(&s, 0.11).unwrap();
        assert_eq!(e.len(), 29);
        for (k, row) in e.samples().enumerate() {
            assert_eq!(row[0], (k + 11) as f64);
            assert_eq!(row[1], k as f64);
        }
        // t0 shifts by the delay.
        assert!((e.t0() - 0.11).abs() < 1e-12);
    }

    #[test]
    fn embed_rejects_non_multiple_delay() {
        let s = TimeSeries::scalar(0.01, 0.0, vec![0.0; 50]);
        match embed_delay(&s, 0.115) {
            Err(Error::DelayNotMultiple { remainder, .. }) => {
                assert!(remainder.abs() > 1e-9);
            }
            other => panic!("expected DelayNotMultiple, got {other:?}"),
        }
    }

    #[test]
    fn drive_with_alpha_zero_keeps_initial_state() {
        let cfg = ReservoirConfig {
            n: 4,
            m: 2,
            a_density: 0.5,
            ..small_config()
        };
        let m = build_reservoir(&cfg).unwrap();
        let inputs = TimeSeries::from_flat(2, 0.01, 0.0, vec![0.3; 20]);
        let r0 = DVector::from_element(4, 0.7);
        let states = drive(&m.a, &m.w_in, 0.0, &inputs, &r0);
        for s in &states {
            assert_eq!(s, &r0);
        }
    }

    #[test]
    fn drive_with_zero_matrices_and_alpha_one_gives_zero_states() {
        let a = SparseCsr::zeros(3);
        let w_in = DMatrix::zeros(3, 2);
        let inputs = TimeSeries::from_flat(2, 0.01, 0.0, vec![5.0; 12]);
        let r0 = DVector::from_element(3, 0.9);
        let states = drive(&a, &w_in, 1.0, &inputs, &r0);
        for s in &states {
            assert!(s.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn states_bounded_by_one_with_alpha_one() {
        let cfg = ReservoirConfig {
            n: 20,
            m: 2,
            alpha: 1.0,
            a_density: 0.5,
            ..small_config()
        };
        let m = build_reservoir(&cfg).unwrap();
        let inputs =
            TimeSeries::from_flat(2, 0.01, 0.0, (0..100).map(|i| (i as f64).sin() * 50.0).collect());
        let r0 = DVector::from_element(20, 0.0);
        for s in drive(&m.a, &m.w_in, 1.0, &inputs, &r0) {
            assert!(s.iter().all(|v| v.abs() <= 1.0));
        }
    }

    fn random_states(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn ridge_recovers_exact_linear_map() {
        let n = 6;
        let states = random_states(n, 40, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let c = DMatrix::from_fn(3, n, |_, _| rng.gen_range(-2.0..2.0));
        let mut targets = TimeSeries::new(3, 0.01, 0.0);
        for s in &states {
            let y = &c * s;
            targets.push(y.as_slice());
        }
        let w = train_ridge(&states, &targets, 0.0).unwrap();
        assert!((w - c).amax() < 1e-10);
    }

    #[test]
    fn ridge_norm_vanishes_with_huge_beta() {
        let states = random_states(5, 30, 21);
        let mut targets = TimeSeries::new(2, 0.01, 0.0);
        for s in &states {
            targets.push(&[s[0] + 1.0, s[1] - 2.0]);
        }
        let mut last = f64::INFINITY;
        for beta in [1e0, 1e4, 1e8, 1e12] {
            let w = train_ridge(&states, &targets, beta).unwrap();
            let norm = w.norm();
            assert!(norm < last, "norm should decrease monotonically in beta");
            last = norm;
        }
        assert!(last < 1e-10);
    }

    #[test]
    fn ridge_reports_rank_deficiency_without_regularization() {
        // 3 states in a 6-dimensional space cannot span it.
        let states = random_states(6, 3, 31);
        let mut targets = TimeSeries::new(1, 0.01, 0.0);
        for s in &states {
            targets.push(&[s[0]]);
        }
        match train_ridge(&states, &targets, 0.0) {
            Err(Error::RankDeficient(_)) => {}
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn ridge_minimizes_the_quadratic_objective() {
        // Direct objective evaluation as an independent oracle.
        let n = 8;
        let states = random_states(n, 60, 77);
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let mut targets = TimeSeries::new(3, 0.01, 0.0);
        for s in &states {
            targets.push(&[
                s[0] - 0.5 * s[3] + rng.gen_range(-0.1..0.1),
                s[1] * 0.2 + rng.gen_range(-0.1..0.1),
                s[5] + rng.gen_range(-0.1..0.1),
            ]);
        }
        let beta = 0.01;
        let objective = |w: &DMatrix<f64>| -> f64 {
            let mut v = 0.0;
            for (s, u) in states.iter().zip(targets.samples()) {
                let pred = w * s;
                for (p, t) in pred.iter().zip(u.iter()) {
                    v += (p - t) * (p - t);
                }
            }
            v + beta * (w.transpose() * w).trace()
        };
        let w = train_ridge(&states, &targets, beta).unwrap();
        let at_min = objective(&w);
        for k in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + k);
            let g = DMatrix::from_fn(3, n, |_, _| rng.gen_range(-1.0..1.0));
            let perturbed = &w + g * 1e-3;
            assert!(
                objective(&perturbed) > at_min,
                "perturbation {k} lowered the objective"
            );
        }
    }

    #[test]
    fn zero_readout_gives_zero_output_series() {
        let cfg = ReservoirConfig {
            n: 10,
            m: 6,
            delta_tau: 0.05,
            a_density: 0.5,
            ..small_config()
        };
        let m = build_reservoir(&cfg).unwrap();
        let model = ReservoirModel {
            config: cfg,
            seed_used: m.seed_used,
            a: m.a,
            w_in: m.w_in,
            w_out: DMatrix::zeros(6, 10),
            u_guard: 1e3,
            ridge_residual: 0.0,
        };
        let r0 = DVector::from_element(10, 0.1);
        let u0 = [1.0, 2.0, 3.0, 0.5, 1.5, 2.5];
        let out = predict_autonomous(&model, &r0, &u0, 50).unwrap();
        assert_eq!(out.dim(), 3);
        assert_eq!(out.len(), 50);
        assert!(out.flat().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn synchronize_constant_extends_short_input() {
        let cfg = ReservoirConfig {
            n: 12,
            m: 6,
            delta_tau: 0.03,
            a_density: 0.5,
            ..small_config()
        };
        let m = build_reservoir(&cfg).unwrap();
        let model = ReservoirModel {
            config: cfg,
            seed_used: m.seed_used,
            a: m.a,
            w_in: m.w_in,
            w_out: DMatrix::zeros(6, 12),
            u_guard: 1e3,
            ridge_residual: 0.0,
        };
        // A 2-sample observation still synchronizes (front-padded).
        let obs = TimeSeries::from_flat(3, 0.01, 0.0, vec![1.0, 2.0, 3.0, 1.1, 2.1, 3.1]);
        let synced = model.synchronize(&obs).unwrap();
        assert_eq!(synced.ring.len(), 3);
        // Most recent ring entry is the last observed sample.
        assert_eq!(synced.ring.back().unwrap().as_slice(), &[1.1, 2.1, 3.1]);
    }
}
