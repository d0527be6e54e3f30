//! Scalar numerical building blocks: adaptive quadrature, safeguarded
//! root finding, and a natural cubic spline for tabulated profiles.
//!
//! These are deliberately small and allocation-free on the hot paths; the
//! heavier grid kernels live in [`crate::parallel`] and the solver modules.

use crate::error::{Error, Result};

/// Maximum recursion depth for adaptive Simpson quadrature. With interval
/// halving this corresponds to subintervals ~2^-50 of the original length,
/// far beyond f64 resolution for the smooth integrands used here.
const SIMPSON_MAX_DEPTH: u32 = 50;

/// Adaptive Simpson quadrature of `f` over `[a, b]` with absolute
/// tolerance `tol`.
///
/// Uses the classic recursive halving estimate with Richardson
/// extrapolation (`S2 + (S2 - S1)/15`). Intended for smooth integrands;
/// the depth cap guards against pathological inputs rather than being a
/// precision mechanism.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson_rule(a, b, fa, fm, fb);
    adaptive(&f, a, b, fa, fm, fb, whole, tol.abs(), SIMPSON_MAX_DEPTH)
}

#[inline]
fn simpson_rule(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
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
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_rule(a, m, fa, flm, fm);
    let right = simpson_rule(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Safeguarded Newton iteration on a bracketing interval (`rtsafe`).
///
/// `f_df` returns `(f(x), f'(x))`. The bracket `[lo, hi]` must contain a
/// sign change of `f`; either orientation is accepted. Newton steps are
/// taken while they stay inside the current bracket and shrink it fast
/// enough, otherwise the method bisects, so convergence is guaranteed for
/// continuous `f`. Terminates when the step size drops below
/// `rel_tol * max(|x|, x_floor)`.
///
/// `what` names the quantity being solved for in error messages.
pub fn solve_bracketed<F: Fn(f64) -> (f64, f64)>(
    f_df: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    max_iter: usize,
    what: &str,
) -> Result<f64> {
    let (flo, _) = f_df(lo);
    let (fhi, _) = f_df(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo * fhi < 0.0) {
        return Err(Error::Numerics(format!(
            "no sign change while solving for {what}: f({lo:?}) = {flo:?}, f({hi:?}) = {fhi:?}"
        )));
    }
    // Orient so that f(xl) < 0 < f(xh).
    let (mut xl, mut xh) = if flo < 0.0 { (lo, hi) } else { (hi, lo) };
    let mut x = 0.5 * (xl + xh);
    let mut dx_old = (hi - lo).abs();
    let mut dx = dx_old;
    let (mut fx, mut dfx) = f_df(x);
    let x_floor = 0.5 * (lo.abs() + hi.abs()).max(f64::MIN_POSITIVE);
    for _ in 0..max_iter {
        let newton_escapes =
            ((x - xh) * dfx - fx) * ((x - xl) * dfx - fx) > 0.0 || dfx == 0.0;
        let newton_slow = (2.0 * fx).abs() > (dx_old * dfx).abs();
        if newton_escapes || newton_slow {
            // Bisect.
            dx_old = dx;
            dx = 0.5 * (xh - xl);
            x = xl + dx;
        } else {
            dx_old = dx;
            dx = fx / dfx;
            x -= dx;
        }
        if dx.abs() < rel_tol * x.abs().max(x_floor) {
            return Ok(x);
        }
        let pair = f_df(x);
        fx = pair.0;
        dfx = pair.1;
        if fx < 0.0 {
            xl = x;
        } else {
            xh = x;
        }
    }
    Err(Error::Numerics(format!(
        "root solve for {what} did not converge in {max_iter} iterations \
         (last x = {x:?}, residual = {fx:?})"
    )))
}

/// `n` evenly spaced points from `a` to `b` inclusive. The endpoints are
/// set exactly to avoid accumulated rounding at the boundary.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let h = (b - a) / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n).map(|i| a + i as f64 * h).collect();
    out[0] = a;
    out[n - 1] = b;
    out
}

/// Natural cubic spline through strictly increasing abscissae.
///
/// Used for tabulated upstream velocity profiles. Evaluation outside the
/// table is flat: the boundary value is held constant and derivatives
/// vanish, matching the far-field behaviour expected of admissible
/// profiles (constant limit velocity).
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots (natural boundary: zero at ends).
    y2: Vec<f64>,
}

impl CubicSpline {
    /// Natural spline (zero curvature at both ends). Requires at least 3
    /// points and strictly increasing `x`.
    pub fn natural(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::build(x, y, None)
    }

    /// Spline with the left-end first derivative clamped to `slope` and a
    /// natural right end. Used for velocity profiles, whose axis slope is
    /// known to vanish — the natural condition would force zero *curvature*
    /// there instead, an O(h) slope artifact.
    pub fn clamped_left(x: Vec<f64>, y: Vec<f64>, slope: f64) -> Result<Self> {
        Self::build(x, y, Some(slope))
    }

    fn build(x: Vec<f64>, y: Vec<f64>, left_clamp: Option<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Hypothesis(format!(
                "spline data length mismatch: {} abscissae vs {} values",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 3 {
            return Err(Error::Hypothesis(
                "spline needs at least 3 points".into(),
            ));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Hypothesis(
                "spline abscissae must be strictly increasing".into(),
            ));
        }
        let n = x.len();
        // Tridiagonal system for the knot second derivatives, solved by the
        // Thomas algorithm. Interior row i:
        //   h_{i-1} y2_{i-1} + 2(h_{i-1}+h_i) y2_i + h_i y2_{i+1}
        //     = 6 (slope_i - slope_{i-1}).
        // gamma stores the eliminated superdiagonal ratios, y2 the forward-
        // swept right-hand sides until back substitution.
        let mut y2 = vec![0.0; n];
        let mut gamma = vec![0.0; n];
        if let Some(slope) = left_clamp {
            // Clamped row 0: 2 h_0 y2_0 + h_0 y2_1 = 6 ((y1-y0)/h0 - slope).
            let h0 = x[1] - x[0];
            gamma[0] = 0.5;
            y2[0] = 3.0 * ((y[1] - y[0]) / h0 - slope) / h0;
        }
        // Natural row 0 keeps gamma[0] = y2[0] = 0 (y2_0 known zero).
        for i in 1..n - 1 {
            let h_prev = x[i] - x[i - 1];
            let h_next = x[i + 1] - x[i];
            let rhs = 6.0
                * ((y[i + 1] - y[i]) / h_next - (y[i] - y[i - 1]) / h_prev);
            let diag = 2.0 * (h_prev + h_next) - h_prev * gamma[i - 1];
            gamma[i] = h_next / diag;
            y2[i] = (rhs - h_prev * y2[i - 1]) / diag;
        }
        // Back substitution from the natural right end (y2_{n-1} = 0).
        for i in (0..n - 1).rev() {
            let carry = gamma[i] * y2[i + 1];
            y2[i] -= carry;
        }
        Ok(CubicSpline { x, y, y2 })
    }

    fn segment(&self, xq: f64) -> usize {
        // partition_point returns the first knot > xq; the segment index is
        // one less, clamped to the valid range.
        let k = self.x.partition_point(|&t| t <= xq);
        k.clamp(1, self.x.len() - 1) - 1
    }

    /// Last abscissa of the table.
    pub fn x_max(&self) -> f64 {
        *self.x.last().expect("non-empty by construction")
    }

    /// Spline value with flat extension outside the table.
    pub fn value(&self, xq: f64) -> f64 {
        if xq <= self.x[0] {
            return self.y[0];
        }
        if xq >= self.x_max() {
            return *self.y.last().expect("non-empty");
        }
        let i = self.segment(xq);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - xq) / h;
        let b = (xq - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.y2[i] + (b * b * b - b) * self.y2[i + 1])
                * h
                * h
                / 6.0
    }

    /// First derivative; zero strictly outside the table (flat extension).
    pub fn derivative(&self, xq: f64) -> f64 {
        if xq < self.x[0] || xq > self.x_max() {
            return 0.0;
        }
        let i = self.segment(xq);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - xq) / h;
        let b = (xq - self.x[i]) / h;
        (self.y[i + 1] - self.y[i]) / h
            + ((3.0 * b * b - 1.0) * self.y2[i + 1]
                - (3.0 * a * a - 1.0) * self.y2[i])
                * h
                / 6.0
    }

    /// Second derivative; zero strictly outside the table.
    pub fn second_derivative(&self, xq: f64) -> f64 {
        if xq < self.x[0] || xq > self.x_max() {
            return 0.0;
        }
        let i = self.segment(xq);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - xq) / h;
        let b = (xq - self.x[i]) / h;
        a * self.y2[i] + b * self.y2[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        // Simpson's rule integrates cubics exactly, so the adaptive driver
        // must return the exact value on the first level.
        let v = integrate(|x| x * x * x - 2.0 * x + 1.0, -1.0, 3.0, 1e-12);
        // Antiderivative: x^4/4 - x^2 + x.
        let exact = (81.0 / 4.0 - 9.0 + 3.0) - (0.25 - 1.0 - 1.0);
        assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
    }

    #[test]
    fn simpson_handles_oscillatory_integrand() {
        let v = integrate(|x| (10.0 * x).sin(), 0.0, 1.0, 1e-12);
        let exact = (1.0 - (10.0f64).cos()) / 10.0;
        assert!((v - exact).abs() < 1e-11, "{v} vs {exact}");
    }

    #[test]
    fn simpson_degenerate_interval_is_zero() {
        assert_eq!(integrate(|x| x.exp(), 2.0, 2.0, 1e-12), 0.0);
    }

    #[test]
    fn rtsafe_finds_cube_root() {
        let r = solve_bracketed(
            |x| (x * x * x - 2.0, 3.0 * x * x),
            0.0,
            2.0,
            1e-15,
            100,
            "cube root of two",
        )
        .unwrap();
        assert!((r - 2.0f64.powf(1.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn rtsafe_survives_flat_derivative() {
        // f'(0) = 0 forces the bisection safeguard on the first step.
        let r = solve_bracketed(
            |x| (x * x * x - 0.001, 3.0 * x * x),
            -1.0,
            1.0,
            1e-15,
            200,
            "flat-derivative root",
        )
        .unwrap();
        assert!((r - 0.1).abs() < 1e-13, "{r}");
    }

    #[test]
    fn rtsafe_rejects_unbracketed_root() {
        let err = solve_bracketed(
            |x| (x * x + 1.0, 2.0 * x),
            -1.0,
            1.0,
            1e-12,
            50,
            "impossible root",
        )
        .unwrap_err();
        assert!(err.to_string().contains("impossible root"));
    }

    #[test]
    fn linspace_hits_endpoints_exactly() {
        let v = linspace(-4.0, 4.0, 129);
        assert_eq!(v.len(), 129);
        assert_eq!(v[0], -4.0);
        assert_eq!(v[128], 4.0);
        assert!((v[64] - 0.0).abs() < 1e-15);
    }

    #[test]
    fn spline_reproduces_linear_data_exactly() {
        let x = linspace(0.0, 10.0, 11);
        let y: Vec<f64> = x.iter().map(|&t| 3.0 - 0.5 * t).collect();
        let s = CubicSpline::natural(x, y).unwrap();
        for &t in &[0.0, 0.37, 5.5, 9.99] {
            assert!((s.value(t) - (3.0 - 0.5 * t)).abs() < 1e-13);
            assert!((s.derivative(t) - (-0.5)).abs() < 1e-12);
        }
        // Flat extension beyond the table.
        assert_eq!(s.value(11.0), 3.0 - 5.0);
        assert_eq!(s.derivative(11.0), 0.0);
        assert_eq!(s.second_derivative(11.0), 0.0);
    }

    #[test]
    fn spline_approximates_smooth_function() {
        let x = linspace(0.0, 6.0, 401);
        let y: Vec<f64> = x.iter().map(|&t| (1.0 + 2.0 * t) * (-t).exp()).collect();
        let s = CubicSpline::natural(x.clone(), y).unwrap();
        for &t in &[0.21f64, 1.733, 3.01, 5.5] {
            let exact = (1.0 + 2.0 * t) * (-t).exp();
            let dexact = (2.0 - (1.0 + 2.0 * t)) * (-t).exp();
            assert!((s.value(t) - exact).abs() < 1e-8, "value at {t}");
            assert!((s.derivative(t) - dexact).abs() < 1e-5, "slope at {t}");
        }
    }

    #[test]
    fn clamped_spline_matches_prescribed_axis_slope() {
        // u(r) = (1 + 2r) e^{-r} has u'(0) = 1; clamp to the exact value
        // and check both the slope at 0 and interior accuracy.
        let x = linspace(0.0, 6.0, 401);
        let y: Vec<f64> = x.iter().map(|&t| (1.0 + 2.0 * t) * (-t).exp()).collect();
        let s = CubicSpline::clamped_left(x, y, 1.0).unwrap();
        assert!((s.derivative(0.0) - 1.0).abs() < 1e-12);
        for &t in &[0.004f64, 0.21, 1.733, 5.5] {
            let exact = (1.0 + 2.0 * t) * (-t).exp();
            let dexact = (2.0 - (1.0 + 2.0 * t)) * (-t).exp();
            assert!((s.value(t) - exact).abs() < 1e-8, "value at {t}");
            assert!((s.derivative(t) - dexact).abs() < 1e-5, "slope at {t}");
        }
        // Near the clamped end the second derivative should track the true
        // curvature (-3 at r = 0) instead of being pinned to zero.
        assert!((s.second_derivative(0.0) - (-3.0)).abs() < 0.01);
    }

    #[test]
    fn spline_rejects_bad_input() {
        assert!(CubicSpline::natural(vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(
            CubicSpline::natural(vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 2.0])
                .is_err()
        );
        assert!(
            CubicSpline::natural(vec![0.0, 1.0, 2.0], vec![0.0, 1.0]).is_err()
        );
    }
}
