//! Exact samplers for fractional Brownian motion on a uniform grid.
//!
//! Two independent constructions share one seeding contract:
//!
//! * [`CholeskySampler`] factors the Gram matrix of `(B_{s_1}, ..., B_{s_n})`
//!   once and maps standard normals through the factor. `O(n^3)` set-up, so
//!   the step count is capped.
//! * [`CirculantSampler`] embeds the stationary autocovariance of the
//!   increments (fractional Gaussian noise) in a circulant matrix whose
//!   eigenvalues come from one FFT; each path then costs one FFT of size
//!   `M`, the first power of two `>= 2(n - 1)`. The increments are cumulated
//!   into the path.
//!
//! Path `k` of an ensemble with master seed `m` is drawn from a ChaCha8
//! stream seeded with [`derive_seed`]`(m, k)`.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{covariance, pow_nonneg, HurstIndex};

/// Default cap on the Cholesky step count.
pub const CHOLESKY_CAP: usize = 4096;
/// Relative tolerance for negative circulant eigenvalues.
pub const EMBEDDING_TOL: f64 = 1e-9;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer; a bijection on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of path `k` under `master`: `mix64(master + (k + 1) * 0x9E3779B97F4A7C15)`.
///
/// The golden-ratio increment is odd, so the argument is injective in `k`
/// modulo `2^64`, and `mix64` is a bijection: distinct `k` never collide.
#[inline]
pub fn derive_seed(master: u64, k: u64) -> u64 {
    mix64(master.wrapping_add(k.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// The generator a sampler draws from for a given path seed.
pub fn path_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Cholesky,
    Circulant,
    /// Values supplied by the caller rather than drawn.
    Constructed,
}

/// fBm values on a [`TimeGrid`], with the seed that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: Arc<TimeGrid>,
    values: Vec<f64>,
    seed: u64,
    method: Method,
}

impl SamplePath {
    /// Wraps caller-supplied values; `values[0]` must be zero.
    pub fn from_values(grid: Arc<TimeGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.steps() + 1 {
            return Err(Error::InvalidArgument(format!(
                "path needs {} values, got {}",
                grid.steps() + 1,
                values.len()
            )));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidArgument("path must start at 0".into()));
        }
        Ok(Self {
            grid,
            values,
            seed: 0,
            method: Method::Constructed,
        })
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    #[inline]
    pub fn grid_arc(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn method(&self) -> Method {
        self.method
    }

    #[inline]
    pub fn hurst(&self) -> HurstIndex {
        self.grid.hurst()
    }

    /// Value at the final node.
    #[inline]
    pub fn endpoint(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// The path `-B`, same grid, seed and method.
    pub fn reflected(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| -v).collect(),
            ..self.clone()
        }
    }

    /// Writes `s,value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "s,value")?;
        for (s, v) in self.grid.nodes().iter().zip(&self.values) {
            writeln!(out, "{s:.16e},{v:.16e}")?;
        }
        Ok(())
    }
}

/// First differences of the path values.
pub fn increments(path: &SamplePath) -> Vec<f64> {
    path.values.windows(2).map(|w| w[1] - w[0]).collect()
}

fn standard_normals(rng: &mut ChaCha8Rng, n: usize) -> impl Iterator<Item = f64> + '_ {
    (0..n).map(move |_| StandardNormal.sample(rng))
}

/// Cholesky factor of the fBm Gram matrix, reusable across seeds.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    grid: Arc<TimeGrid>,
    factor: DMatrix<f64>,
}

impl CholeskySampler {
    pub fn new(grid: Arc<TimeGrid>) -> Result<Self> {
        Self::with_cap(grid, CHOLESKY_CAP)
    }

    pub fn with_cap(grid: Arc<TimeGrid>, cap: usize) -> Result<Self> {
        let n = grid.steps();
        if n > cap {
            return Err(Error::GridTooLarge { steps: n, cap });
        }
        let h = grid.hurst();
        let s = &grid.nodes()[1..];
        let gram = DMatrix::from_fn(n, n, |i, j| covariance(h, s[i], s[j]));
        let chol = gram.cholesky().ok_or(Error::NotPositiveDefinite)?;
        Ok(Self {
            grid,
            factor: chol.unpack(),
        })
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn sample(&self, seed: u64) -> SamplePath {
        let n = self.grid.steps();
        let mut rng = path_rng(seed);
        let z = DVector::from_iterator(n, standard_normals(&mut rng, n));
        let x = &self.factor * z;
        let mut values = Vec::with_capacity(n + 1);
        values.push(0.0);
        values.extend(x.iter().copied());
        SamplePath {
            grid: Arc::clone(&self.grid),
            values,
            seed,
            method: Method::Cholesky,
        }
    }
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(h: HurstIndex, k: usize) -> f64 {
    let p = h.two_h();
    let k = k as f64;
    0.5 * (pow_nonneg(k + 1.0, p) + pow_nonneg((k - 1.0).abs(), p) - 2.0 * pow_nonneg(k, p))
}

/// Circulant embedding of fractional Gaussian noise, reusable across seeds.
#[derive(Clone)]
pub struct CirculantSampler {
    grid: Arc<TimeGrid>,
    /// `sqrt(lambda_k / M)`.
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("steps", &self.grid.steps())
            .field("embedding", &self.scale.len())
            .finish()
    }
}

impl CirculantSampler {
    pub fn new(grid: Arc<TimeGrid>) -> Result<Self> {
        let n = grid.steps();
        let size = (2 * n.saturating_sub(1)).next_power_of_two().max(2);
        let half = size / 2;
        let h = grid.hurst();
        let step_var = pow_nonneg(grid.dt(), h.two_h());
        let mut row = vec![Complex::new(0.0, 0.0); size];
        for j in 0..=half {
            let g = step_var * fgn_autocovariance(h, j);
            row[j].re = g;
            if j > 0 && j < half {
                row[size - j].re = g;
            }
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(size);
        fft.process(&mut row);
        let max = row.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
        let mut scale = Vec::with_capacity(size);
        for c in &row {
            let mut lambda = c.re;
            if lambda < 0.0 {
                if lambda < -EMBEDDING_TOL * max {
                    return Err(Error::EmbeddingFailure {
                        eigenvalue: lambda,
                        tol: EMBEDDING_TOL,
                    });
                }
                lambda = 0.0;
            }
            scale.push((lambda / size as f64).sqrt());
        }
        Ok(Self { grid, scale, fft })
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    /// Size of the circulant embedding.
    pub fn embedding_size(&self) -> usize {
        self.scale.len()
    }

    pub fn sample(&self, seed: u64) -> SamplePath {
        let n = self.grid.steps();
        let mut rng = path_rng(seed);
        let mut buf: Vec<Complex<f64>> = self
            .scale
            .iter()
            .map(|&sc| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex::new(sc * re, sc * im)
            })
            .collect();
        self.fft.process(&mut buf);
        let mut values = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for c in &buf[..n] {
            acc += c.re;
            values.push(acc);
        }
        SamplePath {
            grid: Arc::clone(&self.grid),
            values,
            seed,
            method: Method::Circulant,
        }
    }
}

/// Either sampler behind one interface.
#[derive(Debug, Clone)]
pub enum Sampler {
    Cholesky(CholeskySampler),
    Circulant(CirculantSampler),
}

impl Sampler {
    pub fn new(method: Method, grid: Arc<TimeGrid>) -> Result<Self> {
        match method {
            Method::Cholesky => Ok(Self::Cholesky(CholeskySampler::new(grid)?)),
            Method::Circulant => Ok(Self::Circulant(CirculantSampler::new(grid)?)),
            Method::Constructed => Err(Error::InvalidArgument(
                "constructed paths have no sampler".into(),
            )),
        }
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        match self {
            Self::Cholesky(s) => s.grid(),
            Self::Circulant(s) => s.grid(),
        }
    }

    pub fn sample(&self, seed: u64) -> SamplePath {
        match self {
            Self::Cholesky(s) => s.sample(seed),
            Self::Circulant(s) => s.sample(seed),
        }
    }

    /// Path `k` of the ensemble under `master`.
    pub fn sample_path(&self, master: u64, k: u64) -> SamplePath {
        self.sample(derive_seed(master, k))
    }

    /// Maps `f` over paths `0..count` in parallel; results come back in path
    /// order regardless of scheduling.
    pub fn map_paths<T, F>(&self, master: u64, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, SamplePath) -> T + Sync + Send,
    {
        (0..count)
            .into_par_iter()
            .map(|k| f(k, self.sample_path(master, k as u64)))
            .collect()
    }
}

/// One Cholesky draw.
pub fn sample_cholesky(h: HurstIndex, grid: &TimeGrid, seed: u64) -> Result<SamplePath> {
    debug_assert_eq!(h, grid.hurst());
    let _ = h;
    Ok(CholeskySampler::new(Arc::new(grid.clone()))?.sample(seed))
}

/// One circulant-embedding draw.
pub fn sample_circulant(h: HurstIndex, grid: &TimeGrid, seed: u64) -> Result<SamplePath> {
    debug_assert_eq!(h, grid.hurst());
    let _ = h;
    Ok(CirculantSampler::new(Arc::new(grid.clone()))?.sample(seed))
}
