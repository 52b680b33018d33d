//! Small quadrature toolbox: adaptive Simpson on finite intervals,
//! panel-doubling for improper integrals with a Cauchy stabilization check,
//! and fixed Gauss-Legendre panels for cell averages and oscillatory
//! characteristic-function integrands.

use crate::error::{Error, Result};

/// 5-point Gauss-Legendre nodes on [-1, 1].
const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// One 5-point Gauss-Legendre panel over [a, b].
pub fn gl5<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (node, w) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
        acc += w * f(mid + half * node);
    }
    acc * half
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || (b - a) < 1e-14 * (1.0 + a.abs()) {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureFailure(format!(
            "max subdivision depth reached on [{a}, {b}]"
        )));
    }
    Ok(adaptive_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
        + adaptive_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
}

/// Adaptive Simpson integration of `f` over `[a, b]`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Integral of `f` over `[a, inf)` by octave doubling. Panels must pass a
/// Cauchy criterion (geometric decay of panel sums) before the tail is
/// accepted; otherwise the integral is declared divergent.
pub fn to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, tol: f64) -> Result<f64> {
    let mut lo = a;
    let mut hi = if a.abs() < 1.0 { a + 1.0 } else { a + a.abs() };
    let mut total = 0.0;
    let mut prev_panel = f64::INFINITY;
    for _ in 0..96 {
        let panel = adaptive(f, lo, hi, tol / 8.0)?;
        total += panel;
        let width = hi - lo;
        if panel.abs() < tol && panel.abs() < 0.5 * prev_panel.abs().max(tol) {
            return Ok(total);
        }
        prev_panel = panel;
        lo = hi;
        hi += 2.0 * width;
    }
    Err(Error::DivergentLevyMeasure(format!(
        "panel sums past x={lo:.3e} do not satisfy the Cauchy criterion"
    )))
}

/// Mirror of [`to_infinity`] over `(-inf, b]`.
pub fn from_neg_infinity<F: Fn(f64) -> f64>(f: &F, b: f64, tol: f64) -> Result<f64> {
    to_infinity(&|x| f(-x), -b, tol)
}
