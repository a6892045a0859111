//! Histogram estimators of the local time and the weighted local time.
//!
//! A path on a grid with steps `i = 0..n` deposits, for each step, its step
//! weight into the spatial bin holding the value at the step's left node.
//! The plain field uses `ds = T/n`; the weighted field uses
//! `s_{i+1}^{2H} - s_i^{2H}`, the discrete version of `2H s^{2H-1} ds`.
//! Dividing by the bin width turns the deposits into a density, so the
//! discrete occupation formula
//! `sum_i Phi(c_{j(i)}) w_i = sum_j Phi(c_j) mass_j h`
//! holds exactly and the total mass is `t` or `t^{2H}` up to rounding.

use std::f64::consts::PI;
use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{pow_nonneg, HurstIndex, Regime};
use crate::sampler::{SamplePath, Sampler};
use crate::stats::MeanSe;

/// Weight fraction in clamped edge bins above which a coverage warning fires.
pub const COVERAGE_WARN_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    /// Occupation density against `ds`.
    Plain,
    /// Occupation density against `2H s^{2H-1} ds`.
    Weighted,
}

/// Uniform spatial bins `[lo + j h, lo + (j + 1) h)`, `j = 0..bins`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    lo: f64,
    width: f64,
    bins: usize,
}

impl SpatialGrid {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::EmptyGrid);
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "spatial grid needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            lo,
            width: (hi - lo) / bins as f64,
            bins,
        })
    }

    /// Odd number of bins of width `width` with `center` at the middle bin's
    /// center, covering at least `[center - half_width, center + half_width]`.
    /// Levels `center + k * width` are bin centers and the grid is
    /// mirror-symmetric about `center`.
    pub fn centered(center: f64, width: f64, half_width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidArgument(format!("bin width must be positive, got {width}")));
        }
        if !(half_width > 0.0) {
            return Err(Error::EmptyGrid);
        }
        let side = (half_width / width - 0.5).ceil().max(0.0) as usize;
        let bins = 2 * side + 1;
        Ok(Self {
            lo: center - (side as f64 + 0.5) * width,
            width,
            bins,
        })
    }

    /// Default grid for a horizon `T` and `n` steps: width `2 T^H n^{-1/3}`,
    /// coverage `[-5 T^H, 5 T^H]`, centered at 0.
    pub fn default_for(h: HurstIndex, horizon: f64, steps: usize) -> Self {
        let scale = pow_nonneg(horizon, h.value());
        let width = default_bandwidth(h, horizon, steps);
        Self::centered(0.0, width, 5.0 * scale).expect("positive default grid")
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.width
    }

    #[inline]
    pub fn bins(&self) -> usize {
        self.bins
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.lo + self.bins as f64 * self.width
    }

    #[inline]
    pub fn center(&self, j: usize) -> f64 {
        self.lo + (j as f64 + 0.5) * self.width
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins).map(|j| self.center(j)).collect()
    }

    /// Bin index of `x` and whether it had to be clamped into an edge bin.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, bool) {
        let u = ((x - self.lo) / self.width).floor();
        if u < 0.0 {
            (0, true)
        } else if u >= self.bins as f64 {
            (self.bins - 1, true)
        } else {
            (u as usize, false)
        }
    }
}

/// `2 T^H n^{-1/3}`.
pub fn default_bandwidth(h: HurstIndex, horizon: f64, steps: usize) -> f64 {
    2.0 * pow_nonneg(horizon, h.value()) * (steps as f64).powf(-1.0 / 3.0)
}

/// Local-time histogram of one path at a fixed horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeField {
    pub grid: SpatialGrid,
    pub mass: Vec<f64>,
    pub kind: FieldKind,
    pub horizon: f64,
    pub hurst: HurstIndex,
    /// Number of time steps that contributed.
    pub steps: usize,
    pub seed: u64,
    /// Fraction of the total weight that fell outside the grid.
    pub clamped_fraction: f64,
}

/// Step weights of `kind` for the first `steps` steps of `path`.
fn step_weights(path: &SamplePath, kind: FieldKind, steps: usize) -> Vec<f64> {
    match kind {
        FieldKind::Plain => vec![path.grid().dt(); steps],
        FieldKind::Weighted => path.grid().ds2h_weights()[..steps].to_vec(),
    }
}

/// Local time over the whole path.
pub fn local_time(path: &SamplePath, grid: &SpatialGrid, kind: FieldKind) -> Result<LocalTimeField> {
    local_time_until(path, grid, kind, path.grid().steps())
}

/// Local time using the first `steps` steps, i.e. up to `t = steps * dt`.
pub fn local_time_until(
    path: &SamplePath,
    grid: &SpatialGrid,
    kind: FieldKind,
    steps: usize,
) -> Result<LocalTimeField> {
    if grid.bins() == 0 {
        return Err(Error::EmptyGrid);
    }
    let steps = steps.min(path.grid().steps());
    let weights = step_weights(path, kind, steps);
    let mut mass = vec![0.0; grid.bins()];
    let mut clamped = 0.0;
    let mut total = 0.0;
    for (&v, &w) in path.values()[..steps].iter().zip(&weights) {
        let (j, out) = grid.locate(v);
        mass[j] += w;
        total += w;
        if out {
            clamped += w;
        }
    }
    let inv_h = 1.0 / grid.width();
    for m in &mut mass {
        *m *= inv_h;
    }
    let clamped_fraction = if total > 0.0 { clamped / total } else { 0.0 };
    if clamped_fraction > COVERAGE_WARN_FRACTION {
        warn!(
            "local time: {:.3}% of the weight fell outside [{}, {}]",
            100.0 * clamped_fraction,
            grid.lo(),
            grid.hi()
        );
    }
    Ok(LocalTimeField {
        grid: *grid,
        mass,
        kind,
        horizon: steps as f64 * path.grid().dt(),
        hurst: path.hurst(),
        steps,
        seed: path.seed(),
        clamped_fraction,
    })
}

impl LocalTimeField {
    /// `sum_j mass_j h`.
    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum::<f64>() * self.grid.width()
    }

    /// Expected total mass: `t` (plain) or `t^{2H}` (weighted).
    pub fn expected_total(&self) -> f64 {
        match self.kind {
            FieldKind::Plain => self.horizon,
            FieldKind::Weighted => pow_nonneg(self.horizon, self.hurst.two_h()),
        }
    }

    /// Density of the bin holding `x`; zero off the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        if x < self.grid.lo() || x >= self.grid.hi() {
            return 0.0;
        }
        self.mass[self.grid.locate(x).0]
    }

    /// `sum_j Phi(c_j) mass_j h`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, phi: F) -> f64 {
        let h = self.grid.width();
        self.mass
            .iter()
            .enumerate()
            .map(|(j, m)| phi(self.grid.center(j)) * m * h)
            .sum()
    }

    /// Field with bins mirrored; matches the field of the reflected path on
    /// grids that are symmetric about 0.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        out.mass.reverse();
        out.grid = SpatialGrid {
            lo: -self.grid.hi(),
            ..self.grid
        };
        out
    }

    pub fn require_kind(&self, kind: FieldKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::WrongFieldKind {
                expected: match kind {
                    FieldKind::Plain => "plain",
                    FieldKind::Weighted => "weighted",
                },
            })
        }
    }

    /// Discrete Hilbert transform of the field at `a`: the midpoint rule
    /// `(1/π) Σ_j mass_j h / (c_j - a)` over bins whose center lies at least
    /// half a bin from `a`.
    pub fn hilbert_at(&self, a: f64) -> f64 {
        self.pv_sum(a, 0.0) / PI
    }

    /// `Σ_{|c_j - a| >= max(eps, h/2)} mass_j h / (c_j - a)`.
    pub fn pv_sum(&self, a: f64, eps: f64) -> f64 {
        let h = self.grid.width();
        let cut = eps.max(0.5 * h * (1.0 - 1e-9));
        let mut acc = 0.0;
        for (j, &m) in self.mass.iter().enumerate() {
            let d = self.grid.center(j) - a;
            if m != 0.0 && d.abs() >= cut {
                acc += m * h / d;
            }
        }
        acc
    }

    /// [`hilbert_at`](Self::hilbert_at) at every bin center, as a Toeplitz
    /// product with kernel `1/d`.
    pub fn hilbert_at_centers(&self) -> Vec<f64> {
        let m = self.grid.bins();
        let inv: Vec<f64> = (0..m).map(|d| if d == 0 { 0.0 } else { 1.0 / d as f64 }).collect();
        (0..m)
            .map(|k| {
                let mut acc = 0.0;
                for (j, &mass) in self.mass.iter().enumerate() {
                    if j > k {
                        acc += mass * inv[j - k];
                    } else if j < k {
                        acc -= mass * inv[k - j];
                    }
                }
                acc / PI
            })
            .collect()
    }

    /// Writes `x,mass` rows (bin centers) with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,mass")?;
        for (j, m) in self.mass.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e}", self.grid.center(j), m)?;
        }
        Ok(())
    }

    /// JSON sidecar `{H, t, kind, h, n, seed}`.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "H": self.hurst.value(),
            "t": self.horizon,
            "kind": self.kind,
            "h": self.grid.width(),
            "n": self.steps,
            "seed": self.seed,
        })
    }
}

/// `|sum_i Phi(B_i) w_i - sum_j Phi(c_j) mass_j h|` for one path.
pub fn occupation_check<F: Fn(f64) -> f64>(
    path: &SamplePath,
    grid: &SpatialGrid,
    phi: F,
    kind: FieldKind,
) -> Result<f64> {
    let field = local_time(path, grid, kind)?;
    let steps = path.grid().steps();
    let weights = step_weights(path, kind, steps);
    let time_side: f64 = path.values()[..steps]
        .iter()
        .zip(&weights)
        .map(|(&v, &w)| phi(v) * w)
        .sum();
    Ok((time_side - field.integrate(phi)).abs())
}

/// One row of the local-time modulus table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusRow {
    /// `|b - a|`.
    pub offset: f64,
    /// Monte Carlo `E|L(b, t) - L(a, t)|^2`.
    pub second_moment: MeanSe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusTable {
    pub rows: Vec<ModulusRow>,
    pub bin_width: f64,
}

/// Normalised ratio `m / g^p` with its standard error, per row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub gap: f64,
    pub ratio: f64,
    pub se: f64,
}

/// Verdict on a sequence of normalised ratios over shrinking gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessCheck {
    pub rows: Vec<RatioRow>,
    /// Slope of `ln ratio` against `ln gap`; non-negative when the ratio does
    /// not grow as the gap shrinks.
    pub loglog_slope: f64,
    pub max_ratio: f64,
    /// Each ratio stays below its predecessor plus `z` combined standard errors.
    pub non_increasing: bool,
    pub pass: bool,
}

/// Ratios `moment / gap^exponent` and a boundedness verdict: every ratio
/// finite, each successive ratio (smaller gap) at most the previous one
/// plus `z` combined standard errors.
pub fn boundedness(rows: &[(f64, MeanSe)], exponent: f64, z: f64) -> BoundednessCheck {
    let ratios: Vec<RatioRow> = rows
        .iter()
        .map(|(g, m)| {
            let scale = g.powf(exponent);
            RatioRow {
                gap: *g,
                ratio: m.mean / scale,
                se: m.se / scale,
            }
        })
        .collect();
    let non_increasing = ratios
        .windows(2)
        .all(|w| w[1].ratio <= w[0].ratio + z * w[0].se.hypot(w[1].se));
    let finite = ratios.iter().all(|r| r.ratio.is_finite());
    let gaps: Vec<f64> = ratios.iter().map(|r| r.gap).collect();
    let vals: Vec<f64> = ratios.iter().map(|r| r.ratio.max(f64::MIN_POSITIVE)).collect();
    let slope = if ratios.len() >= 2 {
        crate::stats::loglog_slope(&gaps, &vals)
    } else {
        0.0
    };
    let max_ratio = vals.iter().copied().fold(0.0, f64::max);
    BoundednessCheck {
        rows: ratios,
        loglog_slope: slope,
        max_ratio,
        non_increasing,
        pass: finite && non_increasing,
    }
}

impl ModulusTable {
    /// Boundedness of `E|ΔL|^2 / |b - a|^alpha` over the table.
    pub fn ratio_check(&self, alpha: f64, z: f64) -> BoundednessCheck {
        let rows: Vec<(f64, MeanSe)> = self
            .rows
            .iter()
            .map(|r| (r.offset, r.second_moment))
            .collect();
        boundedness(&rows, alpha, z)
    }
}

/// Monte Carlo table of `E|L(a + d, t) - L(a, t)|^2` over `offsets` for the
/// weighted local time (`H > 1/2`).
///
/// The histogram uses bins of width `bin_width` (default: half the smallest
/// offset) centred so that `a` and every `a + d` are bin centers.
pub fn lt_modulus_scaling(
    sampler: &Sampler,
    t: f64,
    a: f64,
    offsets: &[f64],
    paths: usize,
    master_seed: u64,
    bin_width: Option<f64>,
) -> Result<ModulusTable> {
    let grid0 = sampler.grid();
    grid0.hurst().require(Regime::Super)?;
    if offsets.is_empty() || offsets.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument("offsets must be positive".into()));
    }
    if offsets.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("offsets must be decreasing".into()));
    }
    if paths < 1000 {
        return Err(Error::InvalidArgument(format!(
            "modulus table needs at least 1000 paths, got {paths}"
        )));
    }
    let min_off = offsets[offsets.len() - 1];
    let width = bin_width.unwrap_or(0.5 * min_off);
    for &d in offsets {
        let k = (d / width).round();
        if k < 1.0 || (k * width - d).abs() > 1e-9 * d.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "offset {d} is not a multiple of the bin width {width}"
            )));
        }
    }
    let scale = pow_nonneg(grid0.horizon(), grid0.hurst().value());
    let spatial = SpatialGrid::centered(a, width, (a.abs() + 6.0 * scale).max(offsets[0] + 5.0 * scale))?;
    let steps = grid0.index_at(t);
    let per_path: Vec<Vec<f64>> = sampler.map_paths(master_seed, paths, |_, path| {
        let field = local_time_until(&path, &spatial, FieldKind::Weighted, steps)
            .expect("grid validated above");
        let base = field.value_at(a);
        offsets
            .iter()
            .map(|d| (field.value_at(a + d) - base).powi(2))
            .collect()
    });
    let rows = offsets
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let col: Vec<f64> = per_path.iter().map(|v| v[k]).collect();
            ModulusRow {
                offset: d,
                second_moment: MeanSe::from_slice(&col),
            }
        })
        .collect();
    Ok(ModulusTable {
        rows,
        bin_width: width,
    })
}
