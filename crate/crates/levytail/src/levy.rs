//! Levy-density families, the Levy-Khintchine triplet and grid
//! discretization.
//!
//! A [`JumpDensitySpec`] is a probability-shaped jump density together with a
//! total mass, so the Levy density is `g(x) = total_mass * pdf(x)`. All
//! shipped families have finite activity; the semistable family is restricted
//! to `x >= 1`, the domain on which its log-periodic structure is anchored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridParams, TailKind};
use crate::quad;

const QUAD_TOL: f64 = 1e-12;

/// Log-periodic semistable density shape `C x^{-gamma-1} alpha(log x)` on
/// `x >= 1`.
///
/// `alpha` has period `log b` and, on the fundamental domain `u in [1, b)`,
/// dips to 0 at `x0`: it equals `-1/log|u - x0|` for `|u - x0| < 2 delta`,
/// climbs back to the constant 1 over linear ramps of width `delta/2` (or
/// half the remaining gap, whichever is smaller), and is 1 elsewhere.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemistableShape {
    pub x0: f64,
    pub b: f64,
    pub delta: f64,
    pub gamma: f64,
    norm: f64,
}

impl SemistableShape {
    pub fn new(x0: f64, b: f64, delta: f64, gamma: f64) -> Result<Self> {
        let gap = (x0 - 1.0).min(b - x0);
        if !(x0 > 1.0 && b > x0) {
            return Err(Error::InvalidParams(format!("need 1 < x0 < b, got x0={x0}, b={b}")));
        }
        if !(delta > 0.0 && 2.0 * delta < gap && 2.0 * delta < 1.0) {
            return Err(Error::InvalidParams(format!(
                "need 0 < 2*delta < min(x0-1, b-x0) and 2*delta < 1, got delta={delta}"
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParams(format!("need gamma in (0,1), got {gamma}")));
        }
        let mut shape = Self { x0, b, delta, gamma, norm: 1.0 };
        // one period of the unnormalized shape, then the geometric sum of
        // b^{-gamma n} period masses
        let period = quad::adaptive(&|x| shape.unnormalized(x), 1.0, b, QUAD_TOL)?;
        shape.norm = period / (1.0 - b.powf(-gamma));
        Ok(shape)
    }

    fn ramp_width(&self) -> f64 {
        let gap = (self.x0 - 1.0).min(self.b - self.x0);
        (self.delta / 2.0).min(0.5 * (gap - 2.0 * self.delta))
    }

    /// The periodic profile evaluated at `log x`, for any `x > 0`.
    pub fn alpha(&self, x: f64) -> f64 {
        let log_b = self.b.ln();
        let t = x.ln().rem_euclid(log_b);
        let u = t.exp();
        let d = (u - self.x0).abs();
        if d <= 4.0 * f64::EPSILON * self.x0 {
            return 0.0;
        }
        let two_delta = 2.0 * self.delta;
        if d < two_delta {
            return -1.0 / d.ln();
        }
        let w = self.ramp_width();
        let a0 = -1.0 / two_delta.ln();
        if d < two_delta + w {
            let s = (d - two_delta) / w;
            return a0 + s * (1.0 - a0);
        }
        1.0
    }

    fn unnormalized(&self, x: f64) -> f64 {
        if x < 1.0 {
            return 0.0;
        }
        x.powf(-self.gamma - 1.0) * self.alpha(x)
    }

    /// Normalized probability density on `[1, inf)`.
    pub fn pdf(&self, x: f64) -> f64 {
        self.unnormalized(x) / self.norm
    }
}

/// Jump-density family of a Levy measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum JumpFamily {
    Exponential { rate: f64 },
    Pareto { alpha: f64, x_floor: f64 },
    Weibull { shape: f64, scale: f64 },
    Lognormal { mu: f64, sigma: f64 },
    /// `weight` on `right` over `(0, inf)`, `1 - weight` on `left` reflected
    /// to `(-inf, 0)`.
    TwoSidedMixture {
        left: Box<JumpFamily>,
        right: Box<JumpFamily>,
        weight: f64,
    },
    Semistable(SemistableShape),
    Tabulated(GridFunction),
}

impl JumpFamily {
    pub fn validate(&self) -> Result<()> {
        match self {
            JumpFamily::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(Error::InvalidParams(format!("exponential rate {rate}")));
                }
            }
            JumpFamily::Pareto { alpha, x_floor } => {
                if !(*alpha > 0.0 && *x_floor > 0.0) {
                    return Err(Error::InvalidParams(format!(
                        "pareto alpha={alpha}, x_floor={x_floor}"
                    )));
                }
            }
            JumpFamily::Weibull { shape, scale } => {
                if !(*shape > 0.0 && *shape < 1.0 && *scale > 0.0) {
                    return Err(Error::InvalidParams(format!(
                        "weibull shape={shape} (need (0,1)), scale={scale}"
                    )));
                }
            }
            JumpFamily::Lognormal { sigma, .. } => {
                if !(*sigma > 0.0) {
                    return Err(Error::InvalidParams(format!("lognormal sigma {sigma}")));
                }
            }
            JumpFamily::TwoSidedMixture { left, right, weight } => {
                if !(0.0..=1.0).contains(weight) {
                    return Err(Error::InvalidParams(format!("mixture weight {weight}")));
                }
                left.validate()?;
                right.validate()?;
            }
            JumpFamily::Semistable(_) => {}
            JumpFamily::Tabulated(g) => {
                if g.mass() <= 0.0 {
                    return Err(Error::InvalidParams("tabulated density has zero mass".into()));
                }
            }
        }
        Ok(())
    }

    /// Probability density of the family shape.
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            JumpFamily::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            JumpFamily::Pareto { alpha, x_floor } => {
                if x < *x_floor {
                    0.0
                } else {
                    alpha * x_floor.powf(*alpha) * x.powf(-alpha - 1.0)
                }
            }
            JumpFamily::Weibull { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    let t = x / scale;
                    (shape / scale) * t.powf(shape - 1.0) * (-t.powf(*shape)).exp()
                }
            }
            JumpFamily::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    let z = (x.ln() - mu) / sigma;
                    (-0.5 * z * z).exp() / (x * sigma * (2.0 * std::f64::consts::PI).sqrt())
                }
            }
            JumpFamily::TwoSidedMixture { left, right, weight } => {
                if x > 0.0 {
                    weight * right.pdf(x)
                } else if x < 0.0 {
                    (1.0 - weight) * left.pdf(-x)
                } else {
                    0.0
                }
            }
            JumpFamily::Semistable(s) => s.pdf(x),
            JumpFamily::Tabulated(g) => {
                let tail = tabulated_tail_mass(g);
                let total = g.mass() + tail;
                if total.is_finite() {
                    g.eval(x) / total
                } else {
                    // unnormalizable declared tail; left raw so the
                    // integrability check can flag the divergence
                    g.eval(x)
                }
            }
        }
    }

    /// Closed-form right-tail mass `P(X > x)`, computed directly so the deep
    /// tail keeps full relative precision.
    fn tail_closed(&self, x: f64) -> Option<f64> {
        match self {
            JumpFamily::Exponential { rate } => {
                Some(if x < 0.0 { 1.0 } else { (-rate * x).exp() })
            }
            JumpFamily::Pareto { alpha, x_floor } => {
                Some(if x < *x_floor { 1.0 } else { (x_floor / x).powf(*alpha) })
            }
            JumpFamily::Weibull { shape, scale } => {
                Some(if x <= 0.0 { 1.0 } else { (-(x / scale).powf(*shape)).exp() })
            }
            JumpFamily::TwoSidedMixture { left, right, weight } => {
                if x >= 0.0 {
                    right.tail_closed(x).map(|t| weight * t)
                } else {
                    // everything right of 0 plus the left mass on (x, 0)
                    left.mass_between_closed(0.0, -x)
                        .map(|m| weight + (1.0 - weight) * m)
                }
            }
            _ => None,
        }
    }

    /// Closed-form mass on `(lo, hi]`, written as
    /// `tail(lo) * (1 - tail(hi)/tail(lo))` so adjacent deep-tail cells do
    /// not cancel.
    fn mass_between_closed(&self, lo: f64, hi: f64) -> Option<f64> {
        match self {
            JumpFamily::Exponential { rate } => {
                let lo = lo.max(0.0);
                if hi <= lo {
                    return Some(0.0);
                }
                Some((-rate * lo).exp() * (-(-rate * (hi - lo)).exp_m1()))
            }
            JumpFamily::Pareto { alpha, x_floor } => {
                let lo = lo.max(*x_floor);
                if hi <= lo {
                    return Some(0.0);
                }
                Some((x_floor / lo).powf(*alpha) * (-(alpha * (lo / hi).ln()).exp_m1()))
            }
            JumpFamily::Weibull { shape, scale } => {
                let lo = lo.max(0.0);
                if hi <= lo {
                    return Some(0.0);
                }
                let t_lo = (lo / scale).powf(*shape);
                let t_hi = (hi / scale).powf(*shape);
                Some((-t_lo).exp() * (-(-(t_hi - t_lo)).exp_m1()))
            }
            JumpFamily::TwoSidedMixture { left, right, weight } => {
                let mut total = 0.0;
                if hi > 0.0 {
                    total += weight * right.mass_between_closed(lo.max(0.0), hi)?;
                }
                if lo < 0.0 {
                    // left part reflected: mass on (lo, min(hi,0)) is the
                    // left family's mass on (max(-hi,0), -lo)
                    let a = (-hi).max(0.0);
                    let b = -lo;
                    total += (1.0 - weight) * left.mass_between_closed(a, b)?;
                }
                Some(total)
            }
            _ => None,
        }
    }

    /// Mass of the shape on `(lo, hi]`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        if let Some(m) = self.mass_between_closed(lo, hi) {
            return m.max(0.0);
        }
        match self {
            JumpFamily::Tabulated(g) => {
                let tail = tabulated_tail_mass(g);
                let total = g.mass() + tail;
                let xmax = g.x_max();
                let on_grid = g.interval_mass(lo, hi.min(xmax));
                let beyond = if hi > xmax {
                    tabulated_tail_mass_between(g, lo.max(xmax), hi)
                } else {
                    0.0
                };
                (on_grid + beyond) / total
            }
            _ => {
                // smooth families without closed CDFs: GL panels, refined
                let n = (((hi - lo) / 0.05).ceil() as usize).clamp(1, 4096);
                let step = (hi - lo) / n as f64;
                let mut acc = 0.0;
                for i in 0..n {
                    let a = lo + i as f64 * step;
                    acc += quad::gl5(&|x| self.pdf(x), a, a + step);
                }
                acc
            }
        }
    }

    /// Mass of the shape on `(x, inf)`.
    pub fn tail_mass(&self, x: f64) -> Result<f64> {
        if let Some(t) = self.tail_closed(x) {
            return Ok(t);
        }
        match self {
            JumpFamily::Semistable(s) => {
                // partial period up to b^{n+1}, then whole periods sum to
                // exactly b^{-gamma (n+1)} under the normalization
                let b = s.b;
                let x = x.max(1.0);
                let n = (x.ln() / b.ln()).floor();
                let scale = b.powf(n);
                let u = (x / scale).clamp(1.0, b);
                let partial = scale * quad::adaptive(&|t| s.pdf(scale * t), u, b, QUAD_TOL)?;
                let rest = b.powf(-s.gamma * (n + 1.0));
                Ok(partial + rest)
            }
            JumpFamily::Lognormal { .. } => quad::to_infinity(&|t| self.pdf(t), x, QUAD_TOL),
            JumpFamily::Tabulated(g) => {
                let tail = tabulated_tail_mass(g);
                if !tail.is_finite() {
                    return Err(Error::DivergentLevyMeasure(
                        "declared tail of tabulated density is not integrable".into(),
                    ));
                }
                let total = g.mass() + tail;
                let xmax = g.x_max();
                if x >= xmax {
                    Ok(tabulated_tail_mass_between(g, x, f64::INFINITY) / total)
                } else {
                    Ok((g.interval_mass(x, xmax) + tail) / total)
                }
            }
            _ => quad::to_infinity(&|t| self.pdf(t), x, QUAD_TOL),
        }
    }

    /// Declared extrapolation kind for the discretized family.
    pub fn tail_kind(&self, x_max: f64) -> TailKind {
        match self {
            JumpFamily::Exponential { rate } => TailKind::Exponential { rate: *rate },
            JumpFamily::Pareto { alpha, .. } => TailKind::PowerLaw { exponent: alpha + 1.0 },
            JumpFamily::Semistable(s) => TailKind::PowerLaw { exponent: s.gamma + 1.0 },
            // local log-derivative of the density at the grid edge
            JumpFamily::Weibull { shape, scale } => TailKind::Exponential {
                rate: (shape / scale) * (x_max / scale).powf(shape - 1.0),
            },
            JumpFamily::Lognormal { mu, sigma } => TailKind::Exponential {
                rate: ((x_max.ln() - mu) / (sigma * sigma) + 1.0) / x_max,
            },
            JumpFamily::TwoSidedMixture { right, .. } => right.tail_kind(x_max),
            JumpFamily::Tabulated(g) => g.tail_kind,
        }
    }
}

fn tabulated_tail_mass(g: &GridFunction) -> f64 {
    tabulated_tail_mass_between(g, g.x_max(), f64::INFINITY)
}

/// Analytic mass of the declared tail of a tabulated grid on `(lo, hi)`.
fn tabulated_tail_mass_between(g: &GridFunction, lo: f64, hi: f64) -> f64 {
    let xmax = g.x_max();
    let anchor = g.values()[g.len() - 1];
    let lo = lo.max(xmax);
    if anchor <= 0.0 || hi <= lo {
        return 0.0;
    }
    match g.tail_kind {
        TailKind::None => 0.0,
        TailKind::PowerLaw { exponent } => {
            if exponent <= 1.0 {
                return f64::INFINITY;
            }
            let prim = |x: f64| -anchor * xmax / (exponent - 1.0) * (x / xmax).powf(1.0 - exponent);
            let upper = if hi.is_finite() { prim(hi) } else { 0.0 };
            upper - prim(lo)
        }
        TailKind::Exponential { rate } => {
            let prim = |x: f64| -anchor / rate * (-rate * (x - xmax)).exp();
            let upper = if hi.is_finite() { prim(hi) } else { 0.0 };
            upper - prim(lo)
        }
    }
}

/// A Levy density: family shape scaled by `total_mass = nu(R)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpDensitySpec {
    pub family: JumpFamily,
    pub total_mass: f64,
}

impl JumpDensitySpec {
    pub fn new(family: JumpFamily, total_mass: f64) -> Result<Self> {
        if !(total_mass >= 0.0) || !total_mass.is_finite() {
            return Err(Error::InvalidParams(format!(
                "total_mass must be finite and >= 0, got {total_mass}"
            )));
        }
        family.validate()?;
        Ok(Self { family, total_mass })
    }

    /// Unit-mass spec.
    pub fn probability(family: JumpFamily) -> Result<Self> {
        Self::new(family, 1.0)
    }

    /// The Levy density `g(x) = total_mass * pdf(x)`; 0 outside the support.
    pub fn density(&self, x: f64) -> f64 {
        if self.total_mass == 0.0 {
            return 0.0;
        }
        self.total_mass * self.family.pdf(x)
    }

    /// `nu((lo, hi])`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        self.total_mass * self.family.mass_between(lo, hi)
    }

    /// `nu((x, inf))`.
    pub fn tail_mass(&self, x: f64) -> Result<f64> {
        Ok(self.total_mass * self.family.tail_mass(x)?)
    }
}

/// Levy-Khintchine data `(a, b, nu)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevyTriplet {
    pub drift: f64,
    pub gaussian: f64,
    pub jumps: JumpDensitySpec,
}

impl LevyTriplet {
    pub fn new(drift: f64, gaussian: f64, jumps: JumpDensitySpec) -> Result<Self> {
        if !(gaussian >= 0.0) {
            return Err(Error::InvalidParams(format!("gaussian b must be >= 0, got {gaussian}")));
        }
        Ok(Self { drift, gaussian, jumps })
    }

    /// Compound Poisson without compensation: the drift is set to the
    /// small-jump compensator so the exponent reduces to
    /// `integral (e^{izy}-1) nu(dy)`.
    pub fn compound_poisson(lambda: f64, family: JumpFamily) -> Result<Self> {
        let jumps = JumpDensitySpec::new(family, lambda)?;
        let compensator = quad::adaptive(&|y| y * jumps.density(y), -1.0, 1.0, QUAD_TOL)?;
        Self::new(compensator, 0.0, jumps)
    }
}

/// `integral (1 and x^2) nu(dx)` by adaptive quadrature; errors with
/// `DivergentLevyMeasure` when the improper parts fail the Cauchy criterion.
pub fn levy_integrability_check(spec: &JumpDensitySpec) -> Result<f64> {
    if spec.total_mass == 0.0 {
        return Ok(0.0);
    }
    let core = quad::adaptive(&|x| spec.density(x) * x * x, -1.0, 1.0, QUAD_TOL)?;
    let right = quad::to_infinity(&|x| spec.density(x), 1.0, QUAD_TOL)?;
    let left = quad::from_neg_infinity(&|x| spec.density(x), -1.0, QUAD_TOL)?;
    Ok(core + right + left)
}

/// Discretize the Levy density on the requested window into cell averages.
///
/// The returned samples sit on the origin-anchored lattice `k * dx`; each
/// value is the exact cell mass divided by `dx` (closed-form CDF where the
/// family has one, Gauss-Legendre panels otherwise). `leakage` records the
/// spec mass outside the window and the declared `tail_kind` comes from the
/// family.
pub fn discretize(spec: &JumpDensitySpec, grid: &GridParams, mass_tol: f64) -> Result<GridFunction> {
    let k_lo = grid.first_index();
    let n = grid.n_samples();
    let dx = grid.dx;
    let mut values = vec![0.0; n];
    if spec.total_mass > 0.0 {
        for (i, v) in values.iter_mut().enumerate() {
            let x = (k_lo + i as i64) as f64 * dx;
            *v = (spec.mass_between(x - dx / 2.0, x + dx / 2.0) / dx).max(0.0);
        }
    }
    let grid_mass: f64 = values.iter().sum::<f64>() * dx;
    let leakage = (spec.total_mass - grid_mass).max(0.0);
    let tail_kind = spec.family.tail_kind(grid.x_max);
    let out = GridFunction::new(k_lo as f64 * dx, dx, values, tail_kind, leakage)?;
    check_grid_resolution(&out, mass_tol)?;
    Ok(out)
}

/// Trapezoid-vs-Simpson mass discrepancy check, run on the interior of the
/// support. The first and last cells of the support carry the expected
/// cell-average halving at a density jump, which is not a resolution
/// problem, so two cells are skipped at each end.
pub(crate) fn check_grid_resolution(g: &GridFunction, tol: f64) -> Result<()> {
    let all = g.values();
    let first = all.iter().position(|v| *v > 0.0);
    let last = all.iter().rposition(|v| *v > 0.0);
    let (first, last) = match (first, last) {
        (Some(a), Some(b)) => (a, b),
        _ => return Ok(()),
    };
    if last < first + 8 {
        return Ok(());
    }
    let v = &all[first + 2..=last - 2];
    let n = v.len();
    let m = if (n - 1) % 2 == 0 { n } else { n - 1 };
    let dx = g.dx();
    let mut trap = 0.5 * (v[0] + v[m - 1]);
    for x in &v[1..m - 1] {
        trap += x;
    }
    trap *= dx;
    let mut simp = v[0] + v[m - 1];
    for (i, x) in v[1..m - 1].iter().enumerate() {
        simp += if i % 2 == 0 { 4.0 * x } else { 2.0 * x };
    }
    simp *= dx / 3.0;
    let scale = simp.abs().max(trap.abs()).max(1e-300);
    let discrepancy = (trap - simp).abs() / scale;
    if discrepancy > tol {
        return Err(Error::GridTooCoarse { discrepancy, tol });
    }
    Ok(())
}

/// Normalized restriction of the Levy density to `(1, inf)`:
/// `g1 = 1_{x>1} g / nu((1,inf))`. Returns the discretized `g1` and
/// `nu((1,inf))`.
pub fn normalize_g1(spec: &JumpDensitySpec, grid: &GridParams) -> Result<(GridFunction, f64)> {
    let nu_tail = spec.tail_mass(1.0)?;
    if !(nu_tail > 1e-300) {
        return Err(Error::EmptyTail(nu_tail));
    }
    let window = GridParams::new(grid.x_min.max(1.0), grid.x_max, grid.dx)?;
    let k_lo = window.first_index();
    let n = window.n_samples();
    let dx = window.dx;
    let mut values = vec![0.0; n];
    for (i, v) in values.iter_mut().enumerate() {
        let x = (k_lo + i as i64) as f64 * dx;
        // restrict exactly at 1: cells straddling the cut keep only (1, hi]
        let lo = (x - dx / 2.0).max(1.0);
        let hi = x + dx / 2.0;
        *v = (spec.mass_between(lo, hi) / dx).max(0.0) / nu_tail * spec.total_mass;
    }
    let grid_mass: f64 = values.iter().sum::<f64>() * dx;
    let leakage = (1.0 - grid_mass).max(0.0);
    let g1 = GridFunction::new(
        k_lo as f64 * dx,
        dx,
        values,
        spec.family.tail_kind(window.x_max),
        leakage,
    )?;
    Ok((g1, nu_tail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exp1() -> JumpDensitySpec {
        JumpDensitySpec::probability(JumpFamily::Exponential { rate: 1.0 }).unwrap()
    }

    fn pareto(alpha: f64, x_floor: f64) -> JumpDensitySpec {
        JumpDensitySpec::probability(JumpFamily::Pareto { alpha, x_floor }).unwrap()
    }

    #[test]
    fn evaluate_closed_forms() {
        assert!((exp1().density(0.0) - 1.0).abs() < 1e-15);
        assert!((pareto(2.0, 1.0).density(2.0) - 0.25).abs() < 1e-15);
        assert_eq!(pareto(2.0, 1.0).density(0.5), 0.0);
    }

    #[test]
    fn semistable_dip_is_exactly_zero() {
        let s = SemistableShape::new(1.5, 2.0, 0.05, 0.5).unwrap();
        let spec = JumpDensitySpec::probability(JumpFamily::Semistable(s.clone())).unwrap();
        assert_eq!(spec.density(1.5), 0.0);
        // periodicity carries the dip to b * x0
        assert_eq!(spec.density(3.0), 0.0);
        // flat part of the period is strictly positive
        assert!(spec.density(1.1) > 0.0);
        assert!(spec.density(1.9) > 0.0);
    }

    #[test]
    fn semistable_periodic_self_similarity() {
        let s = SemistableShape::new(1.5, 2.0, 0.05, 0.5).unwrap();
        let target = 2.0f64.powf(-1.5);
        for &x in &[1.1, 1.25, 1.8, 2.5, 4.4, 7.3] {
            let num = s.pdf(2.0 * x);
            let den = s.pdf(x);
            if den > 1e-12 && num > 1e-12 {
                assert!(
                    (num / den - target).abs() < 1e-10,
                    "self-similarity off at x={x}: {}",
                    num / den
                );
            }
        }
    }

    #[test]
    fn semistable_mass_normalizes() {
        let s = SemistableShape::new(1.5, 2.0, 0.05, 0.5).unwrap();
        let total = quad::to_infinity(&|x| s.pdf(x), 1.0, 1e-11).unwrap();
        assert!((total - 1.0).abs() < 1e-8, "total {total}");
        // tail_mass agrees with direct quadrature a couple of periods in
        let spec = JumpDensitySpec::probability(JumpFamily::Semistable(s.clone())).unwrap();
        let t = spec.tail_mass(3.3).unwrap();
        let q = quad::to_infinity(&|x| s.pdf(x), 3.3, 1e-11).unwrap();
        assert!((t - q).abs() < 1e-8, "tail {t} vs quad {q}");
    }

    #[test]
    fn integrability_oracle_values() {
        // integral (1 ^ x^2) e^{-x} dx = (2 - 5/e) + 1/e = 2 - 4/e
        let expected = 2.0 - 4.0 / std::f64::consts::E;
        let got = levy_integrability_check(&exp1()).unwrap();
        assert!((got - expected).abs() < 1e-6 * expected, "got {got}");

        // integral_1^inf 2 x^{-3} dx = 1
        let got = levy_integrability_check(&pareto(2.0, 1.0)).unwrap();
        assert!((got - 1.0).abs() < 1e-6, "got {got}");

        let zero = JumpDensitySpec::new(JumpFamily::Exponential { rate: 1.0 }, 0.0).unwrap();
        assert_eq!(levy_integrability_check(&zero).unwrap(), 0.0);
    }

    #[test]
    fn integrability_detects_divergence() {
        // tabulated density with a declared x^{-0.8} tail: nu((1,inf)) = inf
        let g = GridFunction::new(
            1.0,
            0.01,
            vec![1.0; 100],
            TailKind::PowerLaw { exponent: 0.8 },
            0.0,
        )
        .unwrap();
        let spec = JumpDensitySpec::new(JumpFamily::Tabulated(g), 1.0).unwrap();
        assert!(matches!(
            levy_integrability_check(&spec),
            Err(Error::DivergentLevyMeasure(_))
        ));
    }

    #[test]
    fn normalize_g1_two_sided_exponential() {
        // g(x) = e^{-|x|}/2
        let family = JumpFamily::TwoSidedMixture {
            left: Box::new(JumpFamily::Exponential { rate: 1.0 }),
            right: Box::new(JumpFamily::Exponential { rate: 1.0 }),
            weight: 0.5,
        };
        let spec = JumpDensitySpec::probability(family).unwrap();
        let grid = GridParams::new(1.0, 60.0, 0.001).unwrap();
        let (g1, nu) = normalize_g1(&spec, &grid).unwrap();
        let expected_nu = (-1.0f64).exp() / 2.0;
        assert!((nu - expected_nu).abs() < 1e-12, "nu {nu}");
        let expected_g1_at_2 = (-1.0f64).exp();
        assert!((g1.eval(2.0) - expected_g1_at_2).abs() < 1e-6, "g1(2) = {}", g1.eval(2.0));
        assert!((g1.total_mass() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn normalize_g1_pareto_is_identity() {
        let spec = pareto(2.0, 1.0);
        let grid = GridParams::new(1.0, 1000.0, 0.01).unwrap();
        let (g1, nu) = normalize_g1(&spec, &grid).unwrap();
        assert!((nu - 1.0).abs() < 1e-12);
        assert!((g1.eval(2.0) - 0.25).abs() < 1e-5);
        assert!((g1.total_mass() - 1.0).abs() < 1e-8);
        assert_eq!(g1.eval(0.9), 0.0);
    }

    #[test]
    fn normalize_g1_rejects_empty_tail() {
        // all mass below 1
        let g = GridFunction::new(0.0, 0.001, vec![2.0; 500], TailKind::None, 0.0).unwrap();
        let spec = JumpDensitySpec::new(JumpFamily::Tabulated(g), 1.0).unwrap();
        let grid = GridParams::new(1.0, 10.0, 0.01).unwrap();
        assert!(matches!(normalize_g1(&spec, &grid), Err(Error::EmptyTail(_))));
    }

    #[test]
    fn discretize_exponential_mass_and_leakage() {
        let grid = GridParams::new(0.0, 40.0, 0.01).unwrap();
        let g = discretize(&exp1(), &grid, 1e-3).unwrap();
        assert!((g.total_mass() - 1.0).abs() < 1e-10);
        assert!(g.leakage < 1e-12); // e^{-40} ~ 4.2e-18
        assert!(matches!(g.tail_kind, TailKind::Exponential { .. }));
    }

    #[test]
    fn discretize_pareto_leakage_matches_tail() {
        let grid = GridParams::new(1.0, 1e4, 0.01).unwrap();
        let g = discretize(&pareto(1.5, 1.0), &grid, 1e-3).unwrap();
        // tail mass beyond 10^4 is (10^4)^{-1.5} = 1e-6
        assert!((g.leakage - 1e-6).abs() < 1e-8, "leakage {}", g.leakage);
    }

    #[test]
    fn discretize_zero_function() {
        let spec = JumpDensitySpec::new(JumpFamily::Exponential { rate: 1.0 }, 0.0).unwrap();
        let grid = GridParams::new(0.0, 10.0, 0.1).unwrap();
        let g = discretize(&spec, &grid, 1e-3).unwrap();
        assert!(g.values().iter().all(|v| *v == 0.0));
        assert_eq!(g.leakage, 0.0);
    }

    #[test]
    fn discretize_cdf_checkpoints() {
        let grid = GridParams::new(0.0, 40.0, 0.01).unwrap();
        let g = discretize(&exp1(), &grid, 1e-3).unwrap();
        let cdf = g.cdf();
        for k in 1..=10 {
            let x = 2.0 * k as f64;
            let i = ((x - g.x_min()) / g.dx()).round() as usize;
            // cdf[i] covers (x_min - dx/2, x_i + dx/2]
            let expected = 1.0 - (-(g.x(i) + g.dx() / 2.0)).exp();
            assert!((cdf[i] - expected).abs() < 1e-6, "x={x}: {} vs {expected}", cdf[i]);
        }

        let grid = GridParams::new(1.0, 200.0, 0.005).unwrap();
        let p = discretize(&pareto(2.0, 1.0), &grid, 1e-3).unwrap();
        let cdf = p.cdf();
        for k in 1..=10 {
            let x = 1.0 + 3.0 * k as f64;
            let i = ((x - p.x_min()) / p.dx()).round() as usize;
            let hi = p.x(i) + p.dx() / 2.0;
            let expected = 1.0 - hi.powi(-2);
            assert!((cdf[i] - expected).abs() < 1e-6, "x={x}: {} vs {expected}", cdf[i]);
        }
    }

    #[test]
    fn discretize_rejects_coarse_grid() {
        let grid = GridParams::new(0.0, 40.0, 1.0).unwrap();
        assert!(matches!(
            discretize(&exp1(), &grid, 1e-3),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn compound_poisson_triplet_compensates_drift() {
        let t = LevyTriplet::compound_poisson(1.0, JumpFamily::Exponential { rate: 1.0 }).unwrap();
        // integral_0^1 y e^{-y} dy = 1 - 2/e
        let expected = 1.0 - 2.0 / std::f64::consts::E;
        assert!((t.drift - expected).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn densities_are_nonnegative(x in -50.0f64..2000.0, pick in 0usize..6) {
            let s = SemistableShape::new(1.5, 2.0, 0.05, 0.5).unwrap();
            let fam = match pick {
                0 => JumpFamily::Exponential { rate: 0.7 },
                1 => JumpFamily::Pareto { alpha: 1.5, x_floor: 1.0 },
                2 => JumpFamily::Weibull { shape: 0.5, scale: 1.0 },
                3 => JumpFamily::Lognormal { mu: 0.0, sigma: 1.0 },
                4 => JumpFamily::TwoSidedMixture {
                    left: Box::new(JumpFamily::Exponential { rate: 1.0 }),
                    right: Box::new(JumpFamily::Pareto { alpha: 1.5, x_floor: 1.0 }),
                    weight: 0.5,
                },
                _ => JumpFamily::Semistable(s),
            };
            let spec = JumpDensitySpec::probability(fam).unwrap();
            prop_assert!(spec.density(x) >= 0.0);
        }
    }
}
