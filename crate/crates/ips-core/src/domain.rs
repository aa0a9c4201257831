//! Observation-window and covariate bookkeeping shared by every module:
//! the time domain `T` with its base measure, the covariate set `X` with the
//! empirical measure over process indices, and interval partitions of the
//! process indices used by piecewise-parametric surfaces.

use serde::{Deserialize, Serialize};

use crate::error::{IpsError, Result};

/// Mass below which an unbounded time domain may be truncated.
pub const TRUNCATION_TAIL_MASS: f64 = 1e-10;

/// The observation window `T` together with its base measure.
///
/// The measure is Lebesgue on `[t_min, t_max]`, except for the point-mass
/// variant where it is the unit atom at `t_min` (so "integrals" are point
/// evaluations and counts follow a plain Poisson law).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeDomain {
    pub t_min: f64,
    pub t_max: f64,
    /// Unit atom at `t_min` instead of Lebesgue measure.
    pub point_mass: bool,
    /// The left endpoint is excluded; quadrature must not evaluate at `t_min`
    /// (power-law surfaces with negative exponents diverge there).
    pub open_left: bool,
    /// Window obtained by truncating an unbounded domain at negligible tail
    /// mass (below `TRUNCATION_TAIL_MASS` for the surfaces it was built for).
    pub truncated: bool,
}

impl TimeDomain {
    pub fn interval(t_min: f64, t_max: f64) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite()) || t_min >= t_max {
            return Err(IpsError::EmptyDomain { t_min, t_max });
        }
        Ok(Self { t_min, t_max, point_mass: false, open_left: false, truncated: false })
    }

    /// `[0, 1]` with Lebesgue measure.
    pub fn unit() -> Self {
        Self::interval(0.0, 1.0).expect("unit interval is valid")
    }

    /// `(0, 1]`: left-open unit interval for surfaces singular at 0.
    pub fn open_unit() -> Self {
        let mut d = Self::unit();
        d.open_left = true;
        d
    }

    /// Truncation of `[0, inf)` at `t_max`, flagged as truncated.
    pub fn truncated(t_max: f64) -> Result<Self> {
        let mut d = Self::interval(0.0, t_max)?;
        d.truncated = true;
        Ok(d)
    }

    /// Unit atom at `t`.
    pub fn point_mass(t: f64) -> Self {
        Self { t_min: t, t_max: t, point_mass: true, open_left: false, truncated: false }
    }

    /// Total mass of the base measure.
    pub fn measure(&self) -> f64 {
        if self.point_mass {
            1.0
        } else {
            self.t_max - self.t_min
        }
    }

    pub fn length(&self) -> f64 {
        self.t_max - self.t_min
    }

    pub fn contains(&self, t: f64) -> bool {
        if self.point_mass {
            t == self.t_min
        } else if self.open_left {
            t > self.t_min && t <= self.t_max
        } else {
            (self.t_min..=self.t_max).contains(&t)
        }
    }
}

/// The `n` covariate vectors, one per observed process, carrying the
/// empirical measure `nu_n = n^{-1} sum_i delta_{x_i}` used by all
/// covariate-side norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSet {
    rows: Vec<Vec<f64>>,
    dim: usize,
}

impl CovariateSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(IpsError::DegenerateInput("covariate set must be non-empty".into()));
        }
        let dim = rows[0].len();
        for r in &rows {
            if r.len() != dim {
                return Err(IpsError::CovariateDimMismatch(dim, r.len()));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(IpsError::InvalidParameter("covariate entries must be finite".into()));
            }
        }
        Ok(Self { rows, dim })
    }

    /// Scalar covariates `x_i = i/n`, `i = 1..n` (sorted, inside `[0, 1]`).
    pub fn unit_grid_1d(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(IpsError::DegenerateInput("need at least one process".into()));
        }
        Self::new((1..=n).map(|i| vec![i as f64 / n as f64]).collect())
    }

    /// `n` processes with no usable covariate (zero vectors of dimension 1).
    pub fn trivial(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(IpsError::DegenerateInput("need at least one process".into()));
        }
        Self::new(vec![vec![0.0]; n])
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn max_norm(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// All covariates inside the closed unit ball (required by the log-linear
    /// covariate family's Lipschitz bounds).
    pub fn in_unit_ball(&self) -> bool {
        self.max_norm() <= 1.0 + 1e-12
    }

    pub fn dot(&self, i: usize, theta: &[f64]) -> f64 {
        self.rows[i].iter().zip(theta).map(|(x, t)| x * t).sum()
    }
}

/// Partition of the process indices `{0, .., n-1}` into consecutive
/// intervals, stored as the start index of each segment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    /// Segment start indices; `starts[0] == 0`, strictly increasing, `< n`.
    starts: Vec<usize>,
    n: usize,
}

impl Partition {
    pub fn new(starts: Vec<usize>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(IpsError::InvalidPartition("n must be positive".into()));
        }
        if starts.first() != Some(&0) {
            return Err(IpsError::InvalidPartition("first segment must start at 0".into()));
        }
        if starts.windows(2).any(|w| w[0] >= w[1]) || *starts.last().unwrap() >= n {
            return Err(IpsError::InvalidPartition("starts must be strictly increasing and < n".into()));
        }
        Ok(Self { starts, n })
    }

    /// The trivial partition with a single segment.
    pub fn whole(n: usize) -> Self {
        Self::new(vec![0], n).expect("single segment is valid")
    }

    /// Two segments split before index `b` (first segment is `0..b`).
    pub fn split_at(b: usize, n: usize) -> Result<Self> {
        Self::new(vec![0, b], n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of segments `|P|`.
    pub fn num_segments(&self) -> usize {
        self.starts.len()
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    /// Start indices after the first, i.e. the interior breakpoints.
    pub fn breakpoints(&self) -> &[usize] {
        &self.starts[1..]
    }

    pub fn segment(&self, s: usize) -> std::ops::Range<usize> {
        let lo = self.starts[s];
        let hi = if s + 1 < self.starts.len() { self.starts[s + 1] } else { self.n };
        lo..hi
    }

    pub fn segments(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        (0..self.num_segments()).map(move |s| self.segment(s))
    }

    /// Segment index containing process `i`.
    pub fn segment_of(&self, i: usize) -> usize {
        match self.starts.binary_search(&i) {
            Ok(s) => s,
            Err(s) => s - 1,
        }
    }
}

/// Number of partitions of `{1..n}` into at most `max_segments` intervals:
/// `sum_{j<=max_segments} C(n-1, j-1)`.
pub fn interval_partition_count(n: usize, max_segments: usize) -> u128 {
    let mut total: u128 = 0;
    for j in 1..=max_segments.min(n) {
        total += binomial_u128(n - 1, j - 1);
    }
    total
}

pub(crate) fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// `ln C(n, k)` computed in floating point (large `n` safe).
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    let mut acc = 0.0;
    for i in 0..k {
        acc += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    acc
}
