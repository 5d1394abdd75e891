//! Shared numerical primitives: adaptive quadrature on (0, ∞) with
//! divergence detection, monotone bisection, and rank statistics.
//!
//! Quadrature covers the half line by dyadic panels
//!
//! ```text
//!   (0, 1] = ∪_k [2^{-k-1}, 2^{-k}],     [1, ∞) = ∪_k [2^k, 2^{k+1}],
//! ```
//!
//! each integrated by adaptive Simpson. Integrable singularities at 0
//! are captured by the shrinking left panels; divergent right tails are
//! reported as infinite once the panel increments grow geometrically
//! past [`DIVERGENCE_CUTOFF`]. Only the finite/infinite dichotomy of the
//! tail matters to callers, so the cutoff does not need to be tight.

use crate::error::Error;

/// Panel increment beyond which a geometrically growing tail is
/// declared divergent.
pub const DIVERGENCE_CUTOFF: f64 = 1e12;

/// Deepest left dyadic panel: 2^-64 lower edge, below which any
/// integrable singularity contributes less than the target tolerance.
const LEFT_PANELS: u32 = 64;

/// Right dyadic panels up to 2^128; geometric tails diverge or converge
/// well before this.
const RIGHT_PANELS: u32 = 128;

/// Consecutive negligible panel increments required before the tail is
/// accepted as converged.
const TAIL_RUN: u32 = 3;

/// Result of integrating a nonnegative integrand over (0, ∞).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integral {
    Finite(f64),
    /// Geometric growth certified; `partial` is the sum accumulated
    /// before the cutoff tripped.
    Divergent { partial: f64 },
}

impl Integral {
    /// Collapses to an extended real (`f64::INFINITY` when divergent).
    pub fn value(self) -> f64 {
        match self {
            Integral::Finite(v) => v,
            Integral::Divergent { .. } => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Integral::Finite(v) => Some(v),
            Integral::Divergent { .. } => None,
        }
    }
}

/// Adaptive Simpson on a finite interval to absolute tolerance `tol`.
pub fn integrate_interval(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64, Error> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::InvalidParameter(format!(
            "bad integration interval [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    Ok(adaptive(f, a, b, fa, fm, fb, whole, tol, 48))
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1)
            + adaptive(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1)
    }
}

/// Integrates a nonnegative integrand over (0, ∞) to absolute tolerance
/// `tol`, reporting divergence instead of failing on heavy tails.
pub fn integrate_half_line(f: &dyn Fn(f64) -> f64, tol: f64) -> Result<Integral, Error> {
    integrate_tail(f, tol, 0)
}

/// Same as [`integrate_half_line`] but restricted to `(2^k0, ∞)` on the
/// right side, with the full singular left block only when `k0 == 0`.
fn integrate_tail(f: &dyn Fn(f64) -> f64, tol: f64, k0: u32) -> Result<Integral, Error> {
    let panel_tol = tol / (LEFT_PANELS + RIGHT_PANELS) as f64;
    let mut total = 0.0;
    if k0 == 0 {
        // (0, 1] by shrinking dyadic panels; stop early once panel
        // contributions are negligible for TAIL_RUN panels in a row.
        let mut small_run = 0;
        for k in 0..LEFT_PANELS {
            let hi = 0.5f64.powi(k as i32);
            let lo = 0.5 * hi;
            let inc = integrate_interval(f, lo, hi, panel_tol)?;
            total += inc;
            if inc.abs() <= panel_tol {
                small_run += 1;
                if small_run >= TAIL_RUN {
                    break;
                }
            } else {
                small_run = 0;
            }
        }
    }
    // [2^k0, ∞) by growing dyadic panels with divergence detection.
    let mut prev_inc = 0.0f64;
    let mut small_run = 0;
    for k in k0..RIGHT_PANELS {
        let lo = 2f64.powi(k as i32);
        let hi = 2.0 * lo;
        let inc = integrate_interval(f, lo, hi, panel_tol)?;
        if !inc.is_finite() || (inc > DIVERGENCE_CUTOFF && inc >= prev_inc) {
            return Ok(Integral::Divergent { partial: total });
        }
        total += inc;
        if inc.abs() <= panel_tol {
            small_run += 1;
            if small_run >= TAIL_RUN {
                return Ok(Integral::Finite(total));
            }
        } else {
            small_run = 0;
        }
        prev_inc = inc;
    }
    // Panels never became negligible and never certified divergence:
    // refuse to guess.
    Err(Error::QuadratureNonConvergence {
        partial: total,
        increment: prev_inc,
    })
}

/// Bisection for `g(λ) = target` with `g` nondecreasing, given a
/// bracket with `g(lo) <= target <= g(hi)`. Absolute tolerance on λ.
pub fn bisect_monotone(
    g: &dyn Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    target: f64,
    tol: f64,
    max_iter: u32,
) -> f64 {
    for _ in 0..max_iter {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Spearman rank correlation between `xs` and `ys` (average ranks on
/// ties). Returns 0 on degenerate input.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> f64 {
    if xs.len() != ys.len() || xs.len() < 2 {
        return 0.0;
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    pearson(&rx, &ry)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Mean and standard error of a sample.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn simpson_exact_on_cubic() {
        let f = |s: f64| s * s * s - 2.0 * s + 1.0;
        let v = integrate_interval(&f, 0.0, 2.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn half_line_exponential_mass() {
        let f = |s: f64| 2.0 * (-2.0 * s).exp();
        let v = integrate_half_line(&f, 1e-10).unwrap().value();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn half_line_integrable_singularity() {
        // s^{-1/2} e^{-s} has mass Γ(1/2) = √π.
        let f = |s: f64| s.powf(-0.5) * (-s).exp();
        let v = integrate_half_line(&f, 1e-10).unwrap().value();
        assert_abs_diff_eq!(v, std::f64::consts::PI.sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn half_line_divergent_tail() {
        // e^{0.1 s}: geometric growth must be certified divergent.
        let f = |s: f64| (0.1 * s).exp();
        match integrate_half_line(&f, 1e-10).unwrap() {
            Integral::Divergent { .. } => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn half_line_constant_integrand_diverges() {
        let f = |_: f64| 1.0;
        assert!(matches!(
            integrate_half_line(&f, 1e-10).unwrap(),
            Integral::Divergent { .. }
        ));
    }

    #[test]
    fn bisect_sqrt() {
        let g = |x: f64| x * x;
        let r = bisect_monotone(&g, 0.0, 4.0, 2.0, 1e-12, 200);
        assert_abs_diff_eq!(r, std::f64::consts::SQRT_2, epsilon = 1e-10);
    }

    #[test]
    fn spearman_monotone_is_one() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        assert_abs_diff_eq!(spearman_rho(&xs, &ys), 1.0, epsilon = 1e-12);
    }
}
