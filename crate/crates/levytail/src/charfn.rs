//! Levy-Khintchine characteristic functions, Fourier inversion back to grid
//! densities, fractional convolution powers through the continuous logarithm,
//! and exponential tilting.
//!
//! Frequency grids are tied to space grids by `dz * dx = 2*pi / P` for an FFT
//! size `P`, so [`invert_cf_to_density`] evaluates the inversion integral
//! exactly on the requested lattice with a single FFT and no interpolation.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridParams, TailKind};
use crate::levy::{JumpDensitySpec, JumpFamily, LevyTriplet};
use crate::quad;

/// Required decay of |cf| at the window edge before inversion.
const EDGE_THRESHOLD: f64 = 1e-8;
/// Target decay when the window is grown automatically.
const EDGE_TARGET: f64 = 1e-12;
/// Largest phase step tolerated by the unwrap.
const MAX_PHASE_STEP: f64 = std::f64::consts::FRAC_PI_2;
/// Below this magnitude the argument is numerically meaningless; the unwrap
/// freezes there instead of failing. `cf_power` rejects such samples anyway.
const PHASE_FLOOR: f64 = 1e-14;

/// Uniform symmetric frequency grid `z_j = j * dz`, `j = -n_half ..= n_half`.
#[derive(Debug, Clone, Copy)]
pub struct ZGrid {
    pub dz: f64,
    pub n_half: usize,
}

impl ZGrid {
    pub fn new(dz: f64, n_half: usize) -> Result<Self> {
        if !(dz > 0.0) || n_half == 0 {
            return Err(Error::InvalidParams(format!("z grid dz={dz}, n_half={n_half}")));
        }
        Ok(Self { dz, n_half })
    }

    pub fn len(&self) -> usize {
        2 * self.n_half + 1
    }

    pub fn z_max(&self) -> f64 {
        self.n_half as f64 * self.dz
    }
}

/// Characteristic-function samples with a continuous argument.
///
/// `values[i]` is the cf at `z = (i - n_half) * dz`; `phase` is the unwrapped
/// argument anchored at 0 for `z = 0`. Construction enforces the invariants:
/// cf(0) = 1, |cf| <= 1, and phase steps below pi/2.
#[derive(Debug, Clone)]
pub struct CfSamples {
    pub dz: f64,
    pub values: Vec<Complex64>,
    pub phase: Vec<f64>,
}

impl CfSamples {
    pub fn n_half(&self) -> usize {
        (self.values.len() - 1) / 2
    }

    pub fn z(&self, i: usize) -> f64 {
        (i as f64 - self.n_half() as f64) * self.dz
    }

    pub fn value_at_zero(&self) -> Complex64 {
        self.values[self.n_half()]
    }

    /// Build from samples on the non-negative half grid; negative
    /// frequencies are filled in by Hermitian symmetry.
    pub fn from_half<F>(grid: &ZGrid, mut eval: F) -> Result<Self>
    where
        F: FnMut(f64) -> Result<Complex64>,
    {
        let n = grid.n_half;
        let mut values = vec![Complex64::new(0.0, 0.0); 2 * n + 1];
        for j in 0..=n {
            let v = eval(j as f64 * grid.dz)?;
            values[n + j] = v;
            values[n - j] = v.conj();
        }
        Self::from_values(grid.dz, values)
    }

    /// Validate invariants and unwrap the phase outward from `z = 0`.
    pub fn from_values(dz: f64, values: Vec<Complex64>) -> Result<Self> {
        if values.len() % 2 == 0 || values.len() < 3 {
            return Err(Error::InvalidParams(
                "cf sample count must be odd (symmetric grid with z=0)".into(),
            ));
        }
        let n = (values.len() - 1) / 2;
        let center = values[n];
        if (center - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
            return Err(Error::InvalidParams(format!("cf(0) must be 1, got {center}")));
        }
        if let Some(v) = values.iter().find(|v| v.norm() > 1.0 + 1e-9) {
            return Err(Error::InvalidParams(format!("|cf| must be <= 1, got {}", v.norm())));
        }
        let mut phase = vec![0.0; values.len()];
        for i in (n + 1)..values.len() {
            let step = principal_arg_ratio(values[i], values[i - 1])?;
            phase[i] = phase[i - 1] + step;
        }
        for i in (0..n).rev() {
            let step = principal_arg_ratio(values[i], values[i + 1])?;
            phase[i] = phase[i + 1] + step;
        }
        Ok(Self { dz, values, phase })
    }
}

fn principal_arg_ratio(a: Complex64, b: Complex64) -> Result<f64> {
    if a.norm() < PHASE_FLOOR || b.norm() < PHASE_FLOOR {
        return Ok(0.0);
    }
    let step = (a / b).arg();
    if step.abs() >= MAX_PHASE_STEP {
        return Err(Error::PhaseUnwrap { step });
    }
    Ok(step)
}

/// How far out the jump integral must reach so the ignored tail mass stays
/// below `tol`.
fn support_upper(spec: &JumpDensitySpec, tol: f64) -> Result<f64> {
    let mut hi = 1.0f64;
    for _ in 0..64 {
        if spec.tail_mass(hi)? < tol {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::QuadratureFailure(
        "jump density tail too heavy for characteristic-function quadrature".into(),
    ))
}

fn support_bounds(spec: &JumpDensitySpec, tol: f64) -> Result<(f64, f64)> {
    match &spec.family {
        JumpFamily::TwoSidedMixture { left, right, weight } => {
            let hi = if *weight > 0.0 {
                let right_spec = JumpDensitySpec::new((**right).clone(), spec.total_mass * weight)?;
                support_upper(&right_spec, tol)?
            } else {
                0.0
            };
            let lo = if *weight < 1.0 {
                let left_spec =
                    JumpDensitySpec::new((**left).clone(), spec.total_mass * (1.0 - weight))?;
                -support_upper(&left_spec, tol)?
            } else {
                0.0
            };
            Ok((lo, hi))
        }
        JumpFamily::Tabulated(g) => {
            let mut hi = g.x_max().max(1.0);
            while spec.tail_mass(hi)? >= tol {
                hi *= 2.0;
            }
            Ok((g.x_min().min(0.0), hi))
        }
        _ => Ok((0.0, support_upper(spec, tol)?)),
    }
}

struct JumpExponent<'a> {
    spec: &'a JumpDensitySpec,
    y_lo: f64,
    y_hi: f64,
    right_tail: f64,
    left_tail: f64,
}

impl<'a> JumpExponent<'a> {
    fn prepare(spec: &'a JumpDensitySpec, positive_only: bool) -> Result<Self> {
        let tol = 1e-13 * spec.total_mass.max(1.0);
        let (mut y_lo, y_hi) = if spec.total_mass == 0.0 {
            (0.0, 0.0)
        } else {
            support_bounds(spec, tol)?
        };
        if positive_only {
            y_lo = 0.0;
        }
        let right_tail = if y_hi > 0.0 { spec.tail_mass(y_hi)? } else { 0.0 };
        let left_tail = if y_lo < 0.0 {
            spec.total_mass - spec.tail_mass(y_lo)? - spec.mass_between(y_lo, y_hi)
        } else {
            0.0
        };
        Ok(Self {
            spec,
            y_lo,
            y_hi,
            right_tail: right_tail.max(0.0),
            left_tail: left_tail.max(0.0),
        })
    }

    /// `integral (e^{izy} - 1 - izy 1_{|y|<=1}) nu(dy)` over the prepared
    /// support, with compensated forms near 0 (`cos w - 1 = -2 sin^2(w/2)`)
    /// and the constant part of the ignored far tails added exactly.
    fn eval(&self, z: f64) -> Result<Complex64> {
        if self.spec.total_mass == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let tol = 1e-11 * self.spec.total_mass.max(1.0);
        let dens = |y: f64| self.spec.density(y);
        let mut re = 0.0;
        let mut im = 0.0;
        let a = self.y_lo.max(-1.0);
        let b = self.y_hi.min(1.0);
        if b > a {
            re += quad::adaptive(&|y| -2.0 * (0.5 * z * y).sin().powi(2) * dens(y), a, b, tol)?;
            im += quad::adaptive(&|y| sin_minus_lin(z * y) * dens(y), a, b, tol)?;
        }
        if self.y_hi > 1.0 {
            re += quad::adaptive(&|y| ((z * y).cos() - 1.0) * dens(y), 1.0, self.y_hi, tol)?;
            im += quad::adaptive(&|y| (z * y).sin() * dens(y), 1.0, self.y_hi, tol)?;
        }
        re -= self.right_tail;
        if self.y_lo < -1.0 {
            re += quad::adaptive(&|y| ((z * y).cos() - 1.0) * dens(y), self.y_lo, -1.0, tol)?;
            im += quad::adaptive(&|y| (z * y).sin() * dens(y), self.y_lo, -1.0, tol)?;
        }
        re -= self.left_tail;
        Ok(Complex64::new(re, im))
    }
}

/// `sin(w) - w`, stable for small `w`.
fn sin_minus_lin(w: f64) -> f64 {
    if w.abs() < 1e-4 {
        let w2 = w * w;
        w * w2 * (-1.0 / 6.0 + w2 / 120.0)
    } else {
        w.sin() - w
    }
}

/// The Levy-Khintchine characteristic function
/// `exp{ integral (e^{izy}-1-izy 1_{|y|<=1}) nu(dy) + iaz - b^2 z^2 / 2 }`
/// sampled on `grid`.
pub fn levy_khintchine_cf(triplet: &LevyTriplet, grid: &ZGrid) -> Result<CfSamples> {
    let jump = JumpExponent::prepare(&triplet.jumps, false)?;
    let b2 = triplet.gaussian * triplet.gaussian;
    CfSamples::from_half(grid, |z| {
        let psi = jump.eval(z)?;
        let exponent = Complex64::new(psi.re - 0.5 * b2 * z * z, psi.im + triplet.drift * z);
        Ok(exponent.exp())
    })
}

/// Spectrally positive version: the jump integral runs over `(0, inf)` only
/// and `a = b = 0`.
pub fn spectrally_positive_cf(triplet: &LevyTriplet, grid: &ZGrid) -> Result<CfSamples> {
    let jump = JumpExponent::prepare(&triplet.jumps, true)?;
    CfSamples::from_half(grid, |z| Ok(jump.eval(z)?.exp()))
}

/// Direct DFT of a grid density: `cf(z) = dx * sum_k v_k e^{i z x_k} / mass`.
pub fn cf_from_grid(f: &GridFunction, grid: &ZGrid) -> Result<CfSamples> {
    let dx = f.dx();
    let m = f.mass();
    if !(m > 0.0) {
        return Err(Error::InvalidParams("cannot take the cf of a zero function".into()));
    }
    CfSamples::from_half(grid, |z| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, v) in f.values().iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let phase = z * f.x(k);
            acc += Complex64::new(phase.cos(), phase.sin()) * *v;
        }
        Ok(acc * dx / m)
    })
}

/// Fractional convolution power: `cf^alpha` through
/// `exp(alpha (log|cf| + i phase))` with the unwrapped phase.
pub fn cf_power(cf: &CfSamples, alpha: f64) -> Result<CfSamples> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParams(format!("alpha must be > 0, got {alpha}")));
    }
    let min_norm = cf.values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if min_norm < 1e-14 {
        return Err(Error::ZeroCrossing { min: min_norm });
    }
    let values: Vec<Complex64> = cf
        .values
        .iter()
        .zip(cf.phase.iter())
        .map(|(v, phi)| {
            let mag = (alpha * v.norm().ln()).exp().min(1.0);
            let ang = alpha * phi;
            Complex64::new(mag * ang.cos(), mag * ang.sin())
        })
        .collect();
    CfSamples::from_values(cf.dz, values)
}

/// Frequency grid matched to a space grid: `dz = 2 pi / (P dx)` with `P` a
/// power of two whose period `P dx` at least doubles the window span, and
/// enough samples to reach `z_max`.
pub fn inversion_z_grid(grid: &GridParams, z_max: f64) -> Result<ZGrid> {
    let span = grid.x_max - grid.x_min;
    let min_period = 2.0 * span + 1.0;
    let p = ((min_period / grid.dx).ceil() as usize).next_power_of_two();
    let dz = 2.0 * std::f64::consts::PI / (p as f64 * grid.dx);
    let n_half = (z_max / dz).ceil() as usize;
    if 2 * n_half + 1 > p {
        return Err(Error::InvalidParams(format!(
            "dx = {} too coarse to reach z_max = {z_max}; need dx <= {}",
            grid.dx,
            std::f64::consts::PI / z_max
        )));
    }
    ZGrid::new(dz, n_half)
}

/// Clamp and mass bookkeeping from an inversion.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InversionReport {
    pub clamped_mass: f64,
    pub mass: f64,
    pub edge_magnitude: f64,
}

/// Fourier inversion `f(x) = (2 pi)^{-1} integral e^{-izx} cf(z) dz` onto the
/// requested grid.
///
/// The cf must decay below 1e-8 at the window edges (otherwise
/// `NotAbsolutelyIntegrable`: the absolute-integrability hypothesis is not
/// numerically credible) and its `dz` must satisfy `dz * dx = 2 pi / P` for
/// an integer FFT size `P >= len(cf)`, as produced by [`inversion_z_grid`].
pub fn invert_cf_to_density(
    cf: &CfSamples,
    grid: &GridParams,
) -> Result<(GridFunction, InversionReport)> {
    let edge = cf.values[0].norm().max(cf.values[cf.values.len() - 1].norm());
    if edge > EDGE_THRESHOLD {
        return Err(Error::NotAbsolutelyIntegrable { edge });
    }
    let p_exact = 2.0 * std::f64::consts::PI / (cf.dz * grid.dx);
    let p = p_exact.round() as usize;
    if p == 0 || (p_exact - p as f64).abs() > 1e-6 || p < cf.values.len() {
        return Err(Error::IncompatibleGrids(format!(
            "cf dz = {} does not match dx = {} (P = {p_exact})",
            cf.dz, grid.dx
        )));
    }
    let n = cf.n_half() as i64;
    let mut buf = vec![Complex64::new(0.0, 0.0); p];
    for (i, v) in cf.values.iter().enumerate() {
        let j = i as i64 - n;
        let idx = j.rem_euclid(p as i64) as usize;
        buf[idx] = *v;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(p).process(&mut buf);
    let scale = cf.dz / (2.0 * std::f64::consts::PI);

    let k_lo = grid.first_index();
    let count = grid.n_samples();
    let mut values = vec![0.0; count];
    let mut clamped = 0.0;
    for (i, v) in values.iter_mut().enumerate() {
        let k = (k_lo + i as i64).rem_euclid(p as i64) as usize;
        let val = buf[k].re * scale;
        if val < 0.0 {
            clamped -= val;
        } else {
            *v = val;
        }
    }
    let clamped_mass = clamped * grid.dx;
    let mass: f64 = values.iter().sum::<f64>() * grid.dx;
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::MassCheck { got: mass, expected: 1.0 });
    }
    let out = GridFunction::new(
        k_lo as f64 * grid.dx,
        grid.dx,
        values,
        TailKind::None,
        (1.0 - mass).max(0.0),
    )?;
    Ok((out, InversionReport { clamped_mass, mass, edge_magnitude: edge }))
}

/// Grow the frequency window by doubling until the cf magnitude at the edge
/// falls below 1e-12; hitting the cap flags the absolute-integrability
/// hypothesis as failed.
pub fn auto_z_grid(triplet: &LevyTriplet, grid: &GridParams) -> Result<ZGrid> {
    let jump = JumpExponent::prepare(&triplet.jumps, false)?;
    let b2 = triplet.gaussian * triplet.gaussian;
    let magnitude = |z: f64| -> Result<f64> {
        let psi = jump.eval(z)?;
        Ok((psi.re - 0.5 * b2 * z * z).exp())
    };
    let mut z_max = 16.0;
    let cap = std::f64::consts::PI / grid.dx;
    loop {
        let edge = magnitude(z_max)?;
        if edge < EDGE_TARGET {
            break;
        }
        z_max *= 2.0;
        if z_max > cap {
            return Err(Error::NotAbsolutelyIntegrable { edge });
        }
    }
    inversion_z_grid(grid, z_max)
}

/// Exponential tilt `e^{gamma x} f(x) / C` with `C` including the declared
/// tail; rejected when the tilted tail cannot integrate.
pub fn exponential_tilt(f: &GridFunction, gamma: f64) -> Result<GridFunction> {
    let tail_integral = match f.tail_kind {
        TailKind::None => 0.0,
        TailKind::PowerLaw { exponent } => {
            if gamma >= 0.0 {
                return Err(Error::TiltDiverges {
                    gamma,
                    tail: format!("power law with exponent {exponent}"),
                });
            }
            tilted_tail_quadrature(f, gamma)
        }
        TailKind::Exponential { rate } => {
            if gamma >= rate {
                return Err(Error::TiltDiverges {
                    gamma,
                    tail: format!("exponential with rate {rate}"),
                });
            }
            let anchor = f.values()[f.len() - 1];
            anchor * (gamma * f.x_max()).exp() / (rate - gamma)
        }
    };
    let dx = f.dx();
    let mut values: Vec<f64> = f
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| (gamma * f.x(k)).exp() * v)
        .collect();
    let grid_part: f64 = values.iter().sum::<f64>() * dx;
    let total = grid_part + tail_integral;
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::TiltDiverges { gamma, tail: "tilted mass not finite".into() });
    }
    for v in &mut values {
        *v /= total;
    }
    let tail_kind = match f.tail_kind {
        TailKind::Exponential { rate } => TailKind::Exponential { rate: rate - gamma },
        TailKind::PowerLaw { .. } => TailKind::Exponential { rate: -gamma },
        TailKind::None => TailKind::None,
    };
    GridFunction::new(f.x_min(), dx, values, tail_kind, tail_integral / total)
}

fn tilted_tail_quadrature(f: &GridFunction, gamma: f64) -> f64 {
    let xmax = f.x_max();
    quad::to_infinity(&|x| (gamma * x).exp() * f.eval(x), xmax, 1e-12).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::discretize;

    fn gaussian_triplet() -> LevyTriplet {
        let jumps = JumpDensitySpec::new(JumpFamily::Exponential { rate: 1.0 }, 0.0).unwrap();
        LevyTriplet::new(0.0, 1.0, jumps).unwrap()
    }

    fn cp_exp_cf_formula(lambda: f64, grid: &ZGrid) -> CfSamples {
        // cf(z) = exp(lambda (1/(1 - iz) - 1)) for exponential(1) jumps
        CfSamples::from_half(grid, |z| {
            let ghat = Complex64::new(1.0, 0.0) / Complex64::new(1.0, -z);
            Ok(((ghat - 1.0) * lambda).exp())
        })
        .unwrap()
    }

    #[test]
    fn cf_at_zero_is_one() {
        let grid = ZGrid::new(0.05, 200).unwrap();
        let cf = levy_khintchine_cf(&gaussian_triplet(), &grid).unwrap();
        assert!((cf.value_at_zero() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn gaussian_cf_closed_form() {
        let grid = ZGrid::new(0.1, 100).unwrap();
        let cf = levy_khintchine_cf(&gaussian_triplet(), &grid).unwrap();
        let i1 = cf.n_half() + 10; // z = 1
        assert!((cf.values[i1].re - (-0.5f64).exp()).abs() < 1e-12);
        assert!(cf.values[i1].im.abs() < 1e-14);
    }

    #[test]
    fn cp_exponential_cf_matches_oracle() {
        let t = LevyTriplet::compound_poisson(1.0, JumpFamily::Exponential { rate: 1.0 }).unwrap();
        let grid = ZGrid::new(0.25, 8).unwrap();
        let cf = levy_khintchine_cf(&t, &grid).unwrap();
        // oracle at z = 1: exp(1/(1-i) - 1) = exp(-1/2 + i/2)
        let oracle = Complex64::new(-0.5, 0.5).exp();
        let i1 = cf.n_half() + 4;
        assert!((cf.values[i1] - oracle).norm() < 1e-9, "{} vs {oracle}", cf.values[i1]);
    }

    #[test]
    fn hermitian_symmetry() {
        let t = LevyTriplet::compound_poisson(0.7, JumpFamily::Exponential { rate: 2.0 }).unwrap();
        let grid = ZGrid::new(0.2, 50).unwrap();
        let cf = levy_khintchine_cf(&t, &grid).unwrap();
        let n = cf.n_half();
        let max_asym = (0..cf.values.len())
            .map(|i| (cf.values[i] - cf.values[2 * n - i].conj()).norm())
            .fold(0.0f64, f64::max);
        assert!(max_asym < 1e-12);
    }

    #[test]
    fn spectrally_positive_matches_symmetric_relation() {
        // symmetric nu: |mu_+(z)|^2 = mu(z) with a = b = 0 (both real)
        let family = JumpFamily::TwoSidedMixture {
            left: Box::new(JumpFamily::Exponential { rate: 1.0 }),
            right: Box::new(JumpFamily::Exponential { rate: 1.0 }),
            weight: 0.5,
        };
        let jumps = JumpDensitySpec::probability(family).unwrap();
        let t = LevyTriplet::new(0.0, 0.0, jumps).unwrap();
        let grid = ZGrid::new(0.3, 20).unwrap();
        let full = levy_khintchine_cf(&t, &grid).unwrap();
        let plus = spectrally_positive_cf(&t, &grid).unwrap();
        for i in 0..full.values.len() {
            let lhs = plus.values[i].norm_sqr();
            let rhs = full.values[i].norm();
            assert!((lhs - rhs).abs() < 1e-9, "z index {i}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn spectrally_positive_equals_full_for_positive_support() {
        let jumps = JumpDensitySpec::probability(JumpFamily::Exponential { rate: 1.0 }).unwrap();
        let t = LevyTriplet::new(0.0, 0.0, jumps).unwrap();
        let grid = ZGrid::new(0.3, 20).unwrap();
        let full = levy_khintchine_cf(&t, &grid).unwrap();
        let plus = spectrally_positive_cf(&t, &grid).unwrap();
        let max_diff = full
            .values
            .iter()
            .zip(plus.values.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(max_diff < 1e-10, "max diff {max_diff}");
    }

    #[test]
    fn invert_gaussian_cf_to_normal_density() {
        let grid = GridParams::new(-8.0, 8.0, 0.01).unwrap();
        let zg = inversion_z_grid(&grid, 12.0).unwrap();
        let cf =
            CfSamples::from_half(&zg, |z| Ok(Complex64::new((-0.5 * z * z).exp(), 0.0))).unwrap();
        let (f, report) = invert_cf_to_density(&cf, &grid).unwrap();
        let norm = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut sup = 0.0f64;
        for (i, v) in f.values().iter().enumerate() {
            sup = sup.max((v - norm(f.x(i))).abs());
        }
        assert!(sup < 1e-8, "sup error {sup}");
        assert!((report.mass - 1.0).abs() < 1e-6);
        // even cf: symmetric density
        let n = f.len();
        let max_asym = (0..n)
            .map(|i| (f.values()[i] - f.values()[n - 1 - i]).abs())
            .fold(0.0f64, f64::max);
        assert!(max_asym < 1e-10);
    }

    #[test]
    fn invert_rejects_fat_edge() {
        let grid = GridParams::new(-8.0, 8.0, 0.05).unwrap();
        let zg = inversion_z_grid(&grid, 4.0).unwrap();
        // Cauchy-like cf decays too slowly to vanish at z = 4
        let cf =
            CfSamples::from_half(&zg, |z| Ok(Complex64::new((-0.1 * z.abs()).exp(), 0.0))).unwrap();
        assert!(matches!(
            invert_cf_to_density(&cf, &grid),
            Err(Error::NotAbsolutelyIntegrable { .. })
        ));
    }

    #[test]
    fn auto_window_flags_compound_poisson_atom() {
        // a compound Poisson cf never decays: |cf| -> e^{-lambda}
        let t = LevyTriplet::compound_poisson(1.0, JumpFamily::Exponential { rate: 1.0 }).unwrap();
        let grid = GridParams::new(0.0, 30.0, 0.01).unwrap();
        assert!(matches!(
            auto_z_grid(&t, &grid),
            Err(Error::NotAbsolutelyIntegrable { .. })
        ));
    }

    #[test]
    fn auto_window_accepts_gaussian() {
        let grid = GridParams::new(-8.0, 8.0, 0.01).unwrap();
        let zg = auto_z_grid(&gaussian_triplet(), &grid).unwrap();
        assert!(zg.z_max() >= 8.0);
    }

    #[test]
    fn cf_power_identity_and_square_root() {
        let zg = ZGrid::new(0.05, 400).unwrap();
        let cf = cp_exp_cf_formula(1.0, &zg);
        let p1 = cf_power(&cf, 1.0).unwrap();
        let max1 = cf
            .values
            .iter()
            .zip(p1.values.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(max1 < 1e-12);

        let half = cf_power(&cf, 0.5).unwrap();
        let max2 = cf
            .values
            .iter()
            .zip(half.values.iter())
            .map(|(a, b)| (a - b * b).norm())
            .fold(0.0f64, f64::max);
        assert!(max2 < 1e-10, "sqrt squared off by {max2}");
    }

    #[test]
    fn cf_power_doubles_poisson_rate() {
        let zg = ZGrid::new(0.05, 400).unwrap();
        let cf1 = cp_exp_cf_formula(1.0, &zg);
        let cf2 = cp_exp_cf_formula(2.0, &zg);
        let p2 = cf_power(&cf1, 2.0).unwrap();
        let max_diff = cf2
            .values
            .iter()
            .zip(p2.values.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(max_diff < 1e-10, "max diff {max_diff}");
    }

    #[test]
    fn cf_power_semigroup() {
        let zg = ZGrid::new(0.05, 300).unwrap();
        let cf = cp_exp_cf_formula(0.8, &zg);
        let a = cf_power(&cf, 0.6).unwrap();
        let b = cf_power(&cf, 1.7).unwrap();
        let ab = cf_power(&cf, 2.3).unwrap();
        let max_diff = (0..cf.values.len())
            .map(|i| (a.values[i] * b.values[i] - ab.values[i]).norm())
            .fold(0.0f64, f64::max);
        assert!(max_diff < 1e-10, "semigroup violated by {max_diff}");
    }

    #[test]
    fn phase_unwrap_rejects_coarse_grid() {
        // density far from the origin: phase ~ 10 z, steps 10 dz > pi/2
        let zg = ZGrid::new(0.25, 10).unwrap();
        let res = CfSamples::from_half(&zg, |z| {
            Ok((Complex64::new(-0.5 * z * z, 10.0 * z)).exp())
        });
        assert!(matches!(res, Err(Error::PhaseUnwrap { .. })));
    }

    #[test]
    fn round_trip_grid_cf_grid() {
        // smooth density away from the origin
        let grid = GridParams::new(0.0, 20.0, 0.01).unwrap();
        let mut vals = vec![0.0; 2001];
        for (i, v) in vals.iter_mut().enumerate() {
            let x = i as f64 * 0.01;
            *v = (-0.5 * (x - 10.0) * (x - 10.0)).exp();
        }
        let mass: f64 = vals.iter().sum::<f64>() * 0.01;
        vals.iter_mut().for_each(|v| *v /= mass);
        let f = GridFunction::new(0.0, 0.01, vals, TailKind::None, 0.0).unwrap();
        let zg = inversion_z_grid(&grid, 14.0).unwrap();
        let cf = cf_from_grid(&f, &zg).unwrap();
        let (back, _) = invert_cf_to_density(&cf, &grid).unwrap();
        let sup = f
            .values()
            .iter()
            .zip(back.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(sup < 1e-7, "round trip sup {sup}");
    }

    #[test]
    fn fractional_power_inversion_matches_nfold() {
        use crate::conv::nfold;
        use crate::grid::GeneralizedDensity;
        // gaussian N(6, 1); its n-fold is N(6n, n)
        let grid = GridParams::new(-10.0, 60.0, 0.02).unwrap();
        // keep |cf| above the phase floor on the whole window
        let zg = inversion_z_grid(&grid, 7.0).unwrap();
        let cf =
            CfSamples::from_half(&zg, |z| Ok((Complex64::new(-0.5 * z * z, 6.0 * z)).exp()))
                .unwrap();
        let (f1, _) = invert_cf_to_density(&cf, &grid).unwrap();
        let base = GeneralizedDensity::from_density(f1, 1e-5).unwrap();
        for n in [2usize, 3] {
            let powered = cf_power(&cf, n as f64).unwrap();
            let (direct, _) = invert_cf_to_density(&powered, &grid).unwrap();
            let folded = nfold(&base, n).unwrap();
            let mut sup = 0.0f64;
            for (i, v) in direct.values().iter().enumerate() {
                let x = direct.x(i);
                if x > folded.cont.x_min() && x < folded.cont.x_max() {
                    sup = sup.max((v - folded.cont.eval(x)).abs());
                }
            }
            assert!(sup < 1e-6, "n={n}: sup {sup}");
        }
    }

    #[test]
    fn tilt_shapes_and_involution() {
        let spec = JumpDensitySpec::probability(JumpFamily::Exponential { rate: 1.0 }).unwrap();
        let grid = GridParams::new(0.0, 60.0, 0.01).unwrap();
        let f = discretize(&spec, &grid, 1e-3).unwrap();

        // gamma = 0 is the identity
        let same = exponential_tilt(&f, 0.0).unwrap();
        let max_diff = f
            .values()
            .iter()
            .zip(same.values())
            .map(|(a, b)| (a - b).abs() / a.max(1e-300))
            .fold(0.0f64, f64::max);
        assert!(max_diff < 1e-12);

        // tilting e^{-x} by 0.5 gives the exponential(0.5) shape exactly:
        // pointwise reweighting preserves value ratios
        let tilted = exponential_tilt(&f, 0.5).unwrap();
        assert!((tilted.total_mass() - 1.0).abs() < 1e-10);
        let v0 = tilted.eval(1.0);
        for &x in &[2.0, 5.0, 10.0, 20.0] {
            let got = tilted.eval(x) / v0;
            let expected = (-0.5 * (x - 1.0)).exp();
            assert!((got / expected - 1.0).abs() < 1e-6, "x={x}: {got} vs {expected}");
        }

        // involution
        let back = exponential_tilt(&tilted, -0.5).unwrap();
        let max_diff = f
            .values()
            .iter()
            .zip(back.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_diff < 1e-9, "involution off by {max_diff}");
    }

    #[test]
    fn tilt_rejects_power_tail() {
        let spec =
            JumpDensitySpec::probability(JumpFamily::Pareto { alpha: 1.5, x_floor: 1.0 }).unwrap();
        let grid = GridParams::new(1.0, 100.0, 0.01).unwrap();
        let f = discretize(&spec, &grid, 1e-3).unwrap();
        assert!(matches!(exponential_tilt(&f, 0.5), Err(Error::TiltDiverges { .. })));
        // negative tilt of a power tail is fine
        assert!(exponential_tilt(&f, -0.5).is_ok());
    }
}
