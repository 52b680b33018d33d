//! Convolution algebra on grid densities: FFT linear convolution, n-fold
//! powers, the compound Poisson series
//! `f = (e^L - 1)^{-1} sum_n (L^n/n!) g^{*n}`, its logarithmic inverse
//! `g = -(1/L) sum_n n^{-1} (1 - e^L)^n f^{*n}` (valid for `L < log 2`),
//! and the Kesten bound profile `sup f^{*n} / ((1+eps)^n f)`.
//!
//! Atom algebra on generalized densities is exact; only the continuous parts
//! go through the FFT. Series terms are cropped back to the input window
//! after every convolution, which is exact for one-sided densities and keeps
//! the cost of long series linear in the grid size.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GeneralizedDensity, GridFunction, TailKind};

/// Total FFT-roundoff mass allowed to be clamped away per convolution.
const CLAMP_TOL: f64 = 1e-9;
/// A priori series tail bound.
const SERIES_TOL: f64 = 1e-12;
/// Hard cap for the Poisson series.
pub const POISSON_SERIES_CAP: usize = 200;
/// Hard cap for the geometric inverse series; near `lam = log 2` the
/// geometric ratio approaches 1 and thousands of terms are needed.
pub const GEOMETRIC_SERIES_CAP: usize = 20_000;
/// Mass tolerance when an operation requires a probability density.
const PROB_TOL: f64 = 1e-6;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Truncation level with its a priori bound on the discarded series mass.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SeriesTruncation {
    pub n_max: usize,
    pub tail_bound: f64,
}

/// Smallest truncation with Poisson tail `sum_{n>N} lambda^n/n! < tol`.
pub fn poisson_truncation(lambda: f64, tol: f64) -> Result<SeriesTruncation> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParams(format!("lambda must be > 0, got {lambda}")));
    }
    let mut term = lambda; // lambda^1 / 1!
    for n in 1..=POISSON_SERIES_CAP {
        term *= lambda / (n as f64 + 1.0); // lambda^{n+1} / (n+1)!
        let ratio = lambda / (n as f64 + 2.0);
        if ratio < 1.0 {
            let bound = term / (1.0 - ratio);
            if bound < tol {
                return Ok(SeriesTruncation { n_max: n, tail_bound: bound });
            }
        }
    }
    Err(Error::TruncationInsufficient {
        bound: term,
        tol,
        cap: POISSON_SERIES_CAP,
    })
}

fn geometric_truncation(q: f64, tol: f64) -> Result<SeriesTruncation> {
    for n in 1..=GEOMETRIC_SERIES_CAP {
        let bound = q.powi(n as i32 + 1) / ((n as f64 + 1.0) * (1.0 - q));
        if bound < tol {
            return Ok(SeriesTruncation { n_max: n, tail_bound: bound });
        }
    }
    Err(Error::TruncationInsufficient {
        bound: q.powi(GEOMETRIC_SERIES_CAP as i32),
        tol,
        cap: GEOMETRIC_SERIES_CAP,
    })
}

/// Raw linear convolution of two sample arrays via zero-padded FFT.
fn convolve_values(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let size = out_len.next_power_of_two();
    let mut fa: Vec<Complex64> = a.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let mut fb: Vec<Complex64> = b.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    fa.resize(size, Complex64::new(0.0, 0.0));
    fb.resize(size, Complex64::new(0.0, 0.0));
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        fwd.process(&mut fa);
        fwd.process(&mut fb);
        for (x, y) in fa.iter_mut().zip(fb.iter()) {
            *x *= *y;
        }
        inv.process(&mut fa);
    });
    let scale = 1.0 / size as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

fn require_anchored(g: &GridFunction, what: &str) -> Result<()> {
    let k = g.x_min() / g.dx();
    if (k - k.round()).abs() > 1e-6 {
        return Err(Error::IncompatibleGrids(format!(
            "{what} grid origin {} is not a multiple of dx {}",
            g.x_min(),
            g.dx()
        )));
    }
    Ok(())
}

/// Linear convolution of two grid densities (no atoms). The result spans
/// `[f.x_min + g.x_min, f.x_max + g.x_max]`; leakage is whatever of
/// `total_f * total_g` the output grid does not capture.
pub fn convolve_grid(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    require_anchored(f, "left")?;
    require_anchored(g, "right")?;
    if (f.dx() - g.dx()).abs() > 1e-9 * f.dx() {
        return Err(Error::IncompatibleGrids(format!("dx {} vs {}", f.dx(), g.dx())));
    }
    let dx = f.dx();
    let mut values = convolve_values(f.values(), g.values());
    let mut clamped = 0.0;
    for v in &mut values {
        *v *= dx;
        if *v < 0.0 {
            clamped -= *v;
            *v = 0.0;
        }
    }
    let clamped_mass = clamped * dx;
    if clamped_mass > CLAMP_TOL {
        return Err(Error::ClampExceeded { clamped: clamped_mass, tol: CLAMP_TOL });
    }
    let grid_mass: f64 = values.iter().sum::<f64>() * dx;
    let leakage = (f.total_mass() * g.total_mass() - grid_mass).max(0.0);
    GridFunction::new(
        f.x_min() + g.x_min(),
        dx,
        values,
        dominant_tail(f.tail_kind, g.tail_kind),
        leakage,
    )
}

/// The slower-decaying of two declared tails.
fn dominant_tail(a: TailKind, b: TailKind) -> TailKind {
    use TailKind::*;
    match (a, b) {
        (None, other) | (other, None) => other,
        (PowerLaw { exponent: e1 }, PowerLaw { exponent: e2 }) => {
            PowerLaw { exponent: e1.min(e2) }
        }
        (PowerLaw { exponent }, Exponential { .. })
        | (Exponential { .. }, PowerLaw { exponent }) => PowerLaw { exponent },
        (Exponential { rate: r1 }, Exponential { rate: r2 }) => {
            Exponential { rate: r1.min(r2) }
        }
    }
}

/// Convolution of generalized densities with exact atom algebra:
/// `(p_f d + q_f f) * (p_g d + q_g g)` has atom `p_f p_g` and continuous
/// part `p_f q_g g + q_f p_g f + q_f q_g (f * g)`.
pub fn convolve(f: &GeneralizedDensity, g: &GeneralizedDensity) -> Result<GeneralizedDensity> {
    let atom = f.atom * g.atom;
    let q_out = 1.0 - atom;
    let target = f.total_mass() * g.total_mass();
    if q_out <= 0.0 {
        return Ok(GeneralizedDensity::dirac(&f.cont));
    }
    let qq = f.q() * g.q();
    let mut cont = if qq > 0.0 {
        convolve_grid(&f.cont, &g.cont)?.scaled(qq)
    } else {
        convolve_grid(&f.cont, &g.cont)?.scaled(0.0)
    };
    if f.atom * g.q() > 0.0 {
        cont = cont.try_add(&g.cont.scaled(f.atom * g.q()))?;
    }
    if f.q() * g.atom > 0.0 {
        cont = cont.try_add(&f.cont.scaled(f.q() * g.atom))?;
    }
    let mut proper = cont.scaled(1.0 / q_out);
    let leak = (target - atom) / q_out - proper.mass();
    if leak < -1e-7 {
        return Err(Error::MassCheck {
            got: atom + q_out * (proper.mass()),
            expected: target,
        });
    }
    proper.leakage = leak.max(0.0);
    GeneralizedDensity::new(atom, proper, 1e-6)
}

/// `f^{*n}` by binary (repeated-squaring) convolution.
pub fn nfold(f: &GeneralizedDensity, n: usize) -> Result<GeneralizedDensity> {
    if n == 0 {
        return Err(Error::InvalidParams("nfold needs n >= 1".into()));
    }
    let mut result: Option<GeneralizedDensity> = None;
    let mut base = f.clone();
    let mut k = n;
    loop {
        if k & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => convolve(&r, &base)?,
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = convolve(&base, &base)?;
    }
    Ok(result.expect("n >= 1"))
}

/// Convolve `power` with `g` and crop back to `g`'s window. Exact for
/// one-sided supports; cropped mass is tracked as leakage.
fn convolve_crop(power: &GridFunction, g: &GridFunction) -> Result<Option<GridFunction>> {
    let full = convolve_grid(power, g)?;
    match full.crop(g.x_min(), g.x_max()) {
        Ok(c) => Ok(Some(c)),
        Err(Error::GridInfeasible(_)) => Ok(None), // support moved past the window
        Err(e) => Err(e),
    }
}

/// Compound Poisson generalized density: atom `e^{-lambda}` plus the proper
/// continuous part `(e^lambda - 1)^{-1} sum_{n=1}^{N} (lambda^n/n!) g^{*n}`
/// on `g`'s window.
pub fn compound_poisson_density(
    lambda: f64,
    g: &GridFunction,
    trunc: &SeriesTruncation,
) -> Result<GeneralizedDensity> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParams(format!("lambda must be > 0, got {lambda}")));
    }
    if !g.is_probability(PROB_TOL) {
        return Err(Error::MassCheck { got: g.total_mass(), expected: 1.0 });
    }
    let dx = g.dx();
    let norm = 1.0 / lambda.exp_m1();
    let mut acc = vec![0.0f64; g.len()];
    let mut acc_x_min = g.x_min();
    let mut weight = lambda; // lambda^n / n!
    let mut power = g.clone();
    add_scaled(&mut acc, acc_x_min, &power, weight * norm, dx);
    for n in 2..=trunc.n_max {
        weight *= lambda / n as f64;
        match convolve_crop(&power, g)? {
            Some(next) => power = next,
            None => break,
        }
        add_scaled(&mut acc, acc_x_min, &power, weight * norm, dx);
        let _ = &mut acc_x_min;
    }
    let grid_mass: f64 = acc.iter().sum::<f64>() * dx;
    let leakage = (1.0 - grid_mass).max(0.0);
    let cont = GridFunction::new(g.x_min(), dx, acc, g.tail_kind, leakage)?;
    GeneralizedDensity::new((-lambda).exp(), cont, 1e-9)
}

fn add_scaled(acc: &mut [f64], acc_x_min: f64, term: &GridFunction, w: f64, dx: f64) {
    let offset = ((term.x_min() - acc_x_min) / dx).round() as i64;
    for (i, v) in term.values().iter().enumerate() {
        let j = i as i64 + offset;
        if j >= 0 && (j as usize) < acc.len() {
            acc[j as usize] += w * v;
        }
    }
}

/// Result of the inverse (logarithmic) series.
#[derive(Debug, Clone)]
pub struct RecoveredJumpDensity {
    pub density: GridFunction,
    /// Total negative mass clamped to zero after truncation.
    pub clamped_mass: f64,
    pub terms_used: usize,
    pub tail_bound: f64,
}

/// Recover the jump density from the proper compound Poisson part:
/// `g(x) = -(1/lam) sum_{n>=1} n^{-1} (1 - e^{lam})^n f1^{*n}(x)`.
///
/// The series converges geometrically only for `lam < log 2`
/// (`|1 - e^{lam}| < 1`); beyond that boundary `SeriesDiverges` is raised.
pub fn recover_jump_density(f1: &GridFunction, lam: f64) -> Result<RecoveredJumpDensity> {
    if !(lam > 0.0) {
        return Err(Error::InvalidParams(format!("lam must be > 0, got {lam}")));
    }
    if lam >= std::f64::consts::LN_2 {
        return Err(Error::SeriesDiverges { lam });
    }
    if !f1.is_probability(PROB_TOL) {
        return Err(Error::MassCheck { got: f1.total_mass(), expected: 1.0 });
    }
    let q = lam.exp_m1(); // in (0, 1)
    let trunc = geometric_truncation(q, SERIES_TOL)?;
    let dx = f1.dx();
    let mut acc = vec![0.0f64; f1.len()];
    let mut power = f1.clone();
    // n = 1 term: (1/lam) * q * f1
    add_scaled(&mut acc, f1.x_min(), &power, q / lam, dx);
    let mut coeff = -q; // (1 - e^lam)^n = (-q)^n
    let mut used = 1;
    for n in 2..=trunc.n_max {
        coeff *= -q;
        match convolve_crop(&power, f1)? {
            Some(next) => power = next,
            None => break,
        }
        // -(1/lam) * (1/n) * (-q)^n * f1^{*n}
        add_scaled(&mut acc, f1.x_min(), &power, -coeff / (lam * n as f64), dx);
        used = n;
    }
    let mut clamped = 0.0;
    for v in &mut acc {
        if *v < 0.0 {
            clamped -= *v * dx;
            *v = 0.0;
        }
    }
    let grid_mass: f64 = acc.iter().sum::<f64>() * dx;
    let density = GridFunction::new(
        f1.x_min(),
        dx,
        acc,
        f1.tail_kind,
        (1.0 - grid_mass).max(0.0),
    )?;
    Ok(RecoveredJumpDensity {
        density,
        clamped_mass: clamped,
        terms_used: used,
        tail_bound: trunc.tail_bound,
    })
}

/// One row of the Kesten profile.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KestenEntry {
    pub n: usize,
    pub sup_ratio: f64,
    /// Window points skipped because the denominator underflowed.
    pub excluded: usize,
}

/// For each `n <= n_max`, the sup over the far-tail window of
/// `f^{*n}(x) / ((1+eps)^n f(x))`. Bounded profiles are the numerical
/// signature of the Kesten bound; unbounded growth flags a failure.
pub fn kesten_bound_profile(
    f: &GridFunction,
    eps: f64,
    n_max: usize,
) -> Result<Vec<KestenEntry>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParams(format!("eps must be in (0,1), got {eps}")));
    }
    if n_max > 12 {
        return Err(Error::InvalidParams(format!("n_max capped at 12, got {n_max}")));
    }
    let (i_lo, i_hi) = tail_window_indices(f)?;
    let floor = 1e-280;
    let mut entries = Vec::with_capacity(n_max);
    entries.push(KestenEntry { n: 1, sup_ratio: 1.0 / (1.0 + eps), excluded: 0 });
    let mut power = f.clone();
    for n in 2..=n_max {
        power = match convolve_crop(&power, f)? {
            Some(p) => p,
            None => break,
        };
        let denom_scale = (1.0 + eps).powi(n as i32);
        let mut sup = 0.0f64;
        let mut excluded = 0usize;
        for i in i_lo..i_hi {
            let x = f.x(i);
            let fx = f.values()[i];
            if fx < floor {
                excluded += 1;
                continue;
            }
            let num = power.eval(x);
            sup = sup.max(num / (denom_scale * fx));
        }
        entries.push(KestenEntry { n, sup_ratio: sup, excluded });
    }
    Ok(entries)
}

/// Index range of the far-tail window: the last 20% of the grid by log-x,
/// measured on the positive part.
pub(crate) fn tail_window_indices(f: &GridFunction) -> Result<(usize, usize)> {
    let x_hi = f.x_max();
    let x_anchor = f.x_min().max(f.dx());
    if x_hi <= x_anchor {
        return Err(Error::WindowUnderflow);
    }
    let log_lo = x_anchor.ln();
    let log_hi = x_hi.ln();
    let x_start = (log_lo + 0.8 * (log_hi - log_lo)).exp();
    let i_lo = ((x_start - f.x_min()) / f.dx()).ceil() as usize;
    Ok((i_lo.min(f.len() - 1), f.len()))
}
