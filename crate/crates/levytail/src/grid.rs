//! Uniform-grid density carriers.
//!
//! A [`GridFunction`] holds non-negative samples `values[i]` at the lattice
//! points `x_min + i*dx`. Samples are cell averages over
//! `[x - dx/2, x + dx/2)`, so `dx * sum(values)` is the mass captured by the
//! grid and stays exactly multiplicative under discrete convolution. Mass
//! that lives outside the grid is tracked in `leakage`, and behaviour beyond
//! the right edge is declared through [`TailKind`] instead of being silently
//! truncated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack allowed when matching two grid spacings or offsets.
const GRID_MATCH_TOL: f64 = 1e-9;

/// Requested discretization window.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridParams {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
}

impl GridParams {
    pub fn new(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) || !x_min.is_finite() || !x_max.is_finite() || x_max <= x_min {
            return Err(Error::InvalidParams(format!(
                "grid window [{x_min}, {x_max}] with dx={dx}"
            )));
        }
        Ok(Self { x_min, x_max, dx })
    }

    /// Lattice index of the first sample point at or above `x_min`.
    pub(crate) fn first_index(&self) -> i64 {
        (self.x_min / self.dx - GRID_MATCH_TOL).ceil() as i64
    }

    pub(crate) fn n_samples(&self) -> usize {
        let k_lo = self.first_index();
        let k_hi = (self.x_max / self.dx + GRID_MATCH_TOL).floor() as i64;
        (k_hi - k_lo + 1).max(1) as usize
    }
}

/// Declared extrapolation beyond the last grid sample.
///
/// `PowerLaw { exponent }` means `f(x) ~ C x^{-exponent}` and
/// `Exponential { rate }` means `f(x) ~ C e^{-rate x}`, both anchored at the
/// last sample. Left of the grid the function is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailKind {
    None,
    PowerLaw { exponent: f64 },
    Exponential { rate: f64 },
}

/// A non-negative function sampled on a uniform grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFunction {
    x_min: f64,
    dx: f64,
    values: Vec<f64>,
    pub tail_kind: TailKind,
    pub leakage: f64,
}

impl GridFunction {
    pub fn new(
        x_min: f64,
        dx: f64,
        values: Vec<f64>,
        tail_kind: TailKind,
        leakage: f64,
    ) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidParams(format!("dx must be positive, got {dx}")));
        }
        if values.is_empty() {
            return Err(Error::InvalidParams("grid values must be non-empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParams(format!("negative or non-finite value {v}")));
        }
        if !(leakage >= 0.0) {
            return Err(Error::InvalidParams(format!("leakage must be >= 0, got {leakage}")));
        }
        Ok(Self { x_min, dx, values, tail_kind, leakage })
    }

    /// Grid of zeros covering the window of `params`.
    pub fn zeros(params: &GridParams) -> Self {
        let k_lo = params.first_index();
        let n = params.n_samples();
        Self {
            x_min: k_lo as f64 * params.dx,
            dx: params.dx,
            values: vec![0.0; n],
            tail_kind: TailKind::None,
            leakage: 0.0,
        }
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.values.len() - 1)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Coordinate of sample `i`.
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    /// Mass captured by the grid, `dx * sum(values)`.
    pub fn mass(&self) -> f64 {
        self.dx * self.values.iter().sum::<f64>()
    }

    /// Grid mass plus declared leakage.
    pub fn total_mass(&self) -> f64 {
        self.mass() + self.leakage
    }

    /// Whether the function is a probability density within `tol`.
    pub fn is_probability(&self, tol: f64) -> bool {
        (self.total_mass() - 1.0).abs() <= tol
    }

    /// Linear interpolation inside the grid, declared extrapolation beyond
    /// the right edge, 0 left of the grid.
    pub fn eval(&self, x: f64) -> f64 {
        if x < self.x_min {
            return 0.0;
        }
        let last = self.values.len() - 1;
        let xmax = self.x(last);
        if x > xmax {
            let anchor = self.values[last];
            return match self.tail_kind {
                TailKind::None => 0.0,
                TailKind::PowerLaw { exponent } => {
                    if xmax <= 0.0 {
                        0.0
                    } else {
                        anchor * (x / xmax).powf(-exponent)
                    }
                }
                TailKind::Exponential { rate } => anchor * (-rate * (x - xmax)).exp(),
            };
        }
        let t = (x - self.x_min) / self.dx;
        let i = (t.floor() as usize).min(last - usize::from(last > 0));
        if last == 0 {
            return self.values[0];
        }
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Nearest-sample value (no interpolation). `x` outside the grid falls
    /// back to [`Self::eval`].
    pub fn value_at(&self, x: f64) -> f64 {
        if x < self.x_min || x > self.x_max() {
            return self.eval(x);
        }
        let i = ((x - self.x_min) / self.dx).round() as usize;
        self.values[i.min(self.values.len() - 1)]
    }

    /// Cumulative mass, `cdf[i] = dx * (v_0 + ... + v_i)`.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.values
            .iter()
            .map(|v| {
                acc += v * self.dx;
                acc
            })
            .collect()
    }

    /// Mass on the interval `(a, b]`, by exact cell overlap.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let half = self.dx / 2.0;
        // cells overlapping (a, b): x(i) in (a - dx/2, b + dx/2)
        let i_lo = (((a - self.x_min) / self.dx - 0.5).floor()).max(0.0) as usize;
        let i_hi = ((((b - self.x_min) / self.dx + 0.5).ceil()) as i64 + 1)
            .clamp(0, self.values.len() as i64) as usize;
        let mut total = 0.0;
        for i in i_lo..i_hi {
            let v = self.values[i];
            if v == 0.0 {
                continue;
            }
            let lo = self.x(i) - half;
            let hi = lo + self.dx;
            let overlap = (hi.min(b) - lo.max(a)).max(0.0);
            total += v * overlap;
        }
        total
    }

    /// Integer lattice offset between this grid and `other`.
    pub(crate) fn offset_from(&self, other: &GridFunction) -> Result<i64> {
        if (self.dx - other.dx).abs() > GRID_MATCH_TOL * self.dx {
            return Err(Error::IncompatibleGrids(format!(
                "dx {} vs {}",
                self.dx, other.dx
            )));
        }
        let shift = (self.x_min - other.x_min) / self.dx;
        let k = shift.round();
        if (shift - k).abs() > 1e-6 {
            return Err(Error::IncompatibleGrids(format!(
                "origins {} and {} are not lattice-aligned at dx {}",
                self.x_min, other.x_min, self.dx
            )));
        }
        Ok(k as i64)
    }

    /// Pointwise sum on the union window. Both grids must share dx and sit
    /// on the same lattice. Leakage adds.
    pub fn try_add(&self, other: &GridFunction) -> Result<GridFunction> {
        let off = other.offset_from(self)?; // other.x_min = self.x_min + off*dx
        let lo = 0i64.min(off);
        let hi = (self.values.len() as i64).max(off + other.values.len() as i64);
        let mut values = vec![0.0; (hi - lo) as usize];
        for (i, v) in self.values.iter().enumerate() {
            values[(i as i64 - lo) as usize] += v;
        }
        for (i, v) in other.values.iter().enumerate() {
            values[(i as i64 + off - lo) as usize] += v;
        }
        GridFunction::new(
            self.x_min + lo as f64 * self.dx,
            self.dx,
            values,
            self.tail_kind,
            self.leakage + other.leakage,
        )
    }

    /// Scale all values (and leakage) by `c >= 0`.
    pub fn scaled(&self, c: f64) -> GridFunction {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= c;
        }
        out.leakage *= c;
        out
    }

    /// Restrict to the window `[x_lo, x_hi]`; removed mass moves to leakage.
    pub fn crop(&self, x_lo: f64, x_hi: f64) -> Result<GridFunction> {
        let i_lo = self
            .values
            .iter()
            .enumerate()
            .position(|(i, _)| self.x(i) >= x_lo - GRID_MATCH_TOL * self.dx)
            .ok_or_else(|| Error::GridInfeasible("crop window right of the grid".into()))?;
        let mut i_hi = self.values.len();
        while i_hi > i_lo && self.x(i_hi - 1) > x_hi + GRID_MATCH_TOL * self.dx {
            i_hi -= 1;
        }
        if i_hi == i_lo {
            return Err(Error::GridInfeasible("crop window contains no samples".into()));
        }
        let removed: f64 = self.values[..i_lo]
            .iter()
            .chain(self.values[i_hi..].iter())
            .sum::<f64>()
            * self.dx;
        GridFunction::new(
            self.x(i_lo),
            self.dx,
            self.values[i_lo..i_hi].to_vec(),
            self.tail_kind,
            self.leakage + removed,
        )
    }

    /// Largest sample value.
    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Normalize so grid mass plus leakage is 1, keeping their proportion.
    pub fn normalized(&self) -> Result<GridFunction> {
        let m = self.total_mass();
        if m <= 0.0 {
            return Err(Error::InvalidParams("cannot normalize a zero function".into()));
        }
        Ok(self.scaled(1.0 / m))
    }

    /// Suffix suprema `sup_{t >= x_i} f(t)`, honouring a monotone declared
    /// tail beyond the grid.
    pub fn suffix_sup(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.values.len()];
        let mut acc: f64 = match self.tail_kind {
            TailKind::None => 0.0,
            // declared tails decay, so the tail never exceeds the anchor
            _ => 0.0,
        };
        for i in (0..self.values.len()).rev() {
            acc = acc.max(self.values[i]);
            out[i] = acc;
        }
        out
    }
}

/// Atom at the origin plus a proper continuous density,
/// `p*delta(x) + (1-p) f(x)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneralizedDensity {
    pub atom: f64,
    pub cont: GridFunction,
}

impl GeneralizedDensity {
    /// `cont` must be a proper density (mass + leakage = 1) within `tol`
    /// unless the atom is 1, in which case it may be identically zero.
    pub fn new(atom: f64, cont: GridFunction, tol: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&atom) {
            return Err(Error::InvalidParams(format!("atom weight {atom} outside [0,1]")));
        }
        let m = cont.total_mass();
        if atom < 1.0 && (m - 1.0).abs() > tol {
            return Err(Error::MassCheck { got: m, expected: 1.0 });
        }
        Ok(Self { atom, cont })
    }

    /// Pure continuous density (no atom).
    pub fn from_density(cont: GridFunction, tol: f64) -> Result<Self> {
        Self::new(0.0, cont, tol)
    }

    /// Unit atom; the continuous part is a zero grid compatible with `like`.
    pub fn dirac(like: &GridFunction) -> Self {
        let mut cont = like.clone();
        for v in cont.values_mut() {
            *v = 0.0;
        }
        cont.leakage = 0.0;
        Self { atom: 1.0, cont }
    }

    /// Weight of the continuous part.
    pub fn q(&self) -> f64 {
        1.0 - self.atom
    }

    /// Total mass including atom, grid and leakage.
    pub fn total_mass(&self) -> f64 {
        self.atom + self.q() * self.cont.total_mass()
    }

    /// The continuous part scaled by its weight `q`, as plotted/compared.
    pub fn weighted_cont(&self) -> GridFunction {
        self.cont.scaled(self.q())
    }
}
